"""Backend selection for the conv2d pack/unpack kernels.

The compiled extension is used when it imported cleanly; otherwise the
numpy fallback. Set SEPKIT_KERNELS=python or SEPKIT_KERNELS=ext to force
a backend (forcing ext raises if the build is missing).
"""

import os

import numpy as np

from sepkit.nn import _kernels_np

_FORCED = os.environ.get("SEPKIT_KERNELS", "").strip().lower()

backend = "python"
_ext = None
if _FORCED != "python":
    try:
        from sepkit.nn import _kernels_ext as _ext  # type: ignore[no-redef]
        backend = "ext"
    except ImportError:
        if _FORCED == "ext":
            raise
        _ext = None


def _ext_ok(arr) -> bool:
    return _ext is not None and arr.dtype in (np.float32, np.float64)


def im2col(xp: np.ndarray, kh, kw, st, sf, oh, ow) -> np.ndarray:
    """(N,C,Hp,Wp) padded input -> (N*oh*ow, C*kh*kw) patch matrix."""
    if _ext_ok(xp):
        return _ext.im2col(np.ascontiguousarray(xp), kh, kw, st, sf, oh, ow)
    return _kernels_np.im2col(xp, kh, kw, st, sf, oh, ow)


def col2im(dcol: np.ndarray, n, c, hp, wp, kh, kw, st, sf, oh, ow) -> np.ndarray:
    """Adjoint of im2col: scatter-add patches back to (N,C,Hp,Wp)."""
    if _ext_ok(dcol):
        return _ext.col2im(np.ascontiguousarray(dcol), n, c, hp, wp,
                           kh, kw, st, sf, oh, ow)
    return _kernels_np.col2im(dcol, n, c, hp, wp, kh, kw, st, sf, oh, ow)
