"""Exception types shared across the toolkit."""


class SepkitError(Exception):
    """Base class for all toolkit errors."""


class NotWav(SepkitError):
    """File is not a RIFF/WAVE container."""


class UnsupportedEncoding(SepkitError):
    """WAV file is not 16-bit PCM mono."""


class WrongSampleRate(SepkitError):
    """Pipeline entry points require 16 kHz audio."""


class TooShort(SepkitError):
    """Signal too short for the requested framing."""


class ShapeMismatch(SepkitError):
    """Array shapes are inconsistent with the operation's contract."""


class ZeroPower(SepkitError):
    """A signal with zero power cannot be mixed at a target SNR."""


class DegenerateBatch(SepkitError):
    """Batch statistics need at least two values per channel."""


class MissingGrad(SepkitError):
    """Optimizer step requested for a parameter with no gradient."""


class TooShortUtterance(SepkitError):
    """No sampled utterance pair was long enough for segment + context."""


class NotEnoughSpeakers(SepkitError):
    """Sampling needs at least two distinct speakers."""


class SingularGram(SepkitError):
    """Gram matrix stayed singular even after damping."""


class BadCheckpoint(SepkitError):
    """Checkpoint container is malformed."""


class ConfigMismatch(SepkitError):
    """Checkpoint does not match the model configuration."""
