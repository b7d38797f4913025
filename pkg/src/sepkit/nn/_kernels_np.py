"""Pure-numpy im2col/col2im, the fallback when the compiled extension
is unavailable. Loops run over the kernel window only; each iteration
moves a full strided plane, so the work stays inside numpy."""

import numpy as np


def im2col(xp, kh, kw, st, sf, oh, ow):
    """Unpack (N,C,Hp,Wp) padded input into (N*oh*ow, C*kh*kw) patches.

    Row r = n*oh*ow + a*ow + b holds the patch at output position (a, b)
    of sample n; columns are ordered (channel, kh, kw) to line up with a
    reshaped (out_ch, C*kh*kw) kernel matrix.
    """
    n, c = xp.shape[:2]
    col = np.empty((n, oh, ow, c, kh, kw), dtype=xp.dtype)
    for i in range(kh):
        for j in range(kw):
            plane = xp[:, :, i:i + st * oh:st, j:j + sf * ow:sf]
            col[:, :, :, :, i, j] = plane.transpose(0, 2, 3, 1)
    return col.reshape(n * oh * ow, c * kh * kw)


def col2im(dcol, n, c, hp, wp, kh, kw, st, sf, oh, ow):
    """Adjoint of im2col: scatter-add patch rows back to (N,C,Hp,Wp)."""
    dcol = dcol.reshape(n, oh, ow, c, kh, kw)
    dxp = np.zeros((n, c, hp, wp), dtype=dcol.dtype)
    # Within one (i, j) the strided destination slices never alias, so a
    # vectorized += is a correct scatter-add.
    for i in range(kh):
        for j in range(kw):
            view = dxp[:, :, i:i + st * oh:st, j:j + sf * ow:sf]
            view += dcol[:, :, :, :, i, j].transpose(0, 3, 1, 2)
    return dxp
