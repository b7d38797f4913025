"""Speaker-conditioned single-channel speech source separation."""

from sepkit.errors import SepkitError

__version__ = "0.1.0"

__all__ = ["SepkitError", "__version__"]
