# cython: boundscheck=False, wraparound=False, cdivision=True
# Compiled im2col/col2im. Same contracts as _kernels_np; float32/float64 only.

import numpy as np

cimport cython


ctypedef fused floating:
    float
    double


def im2col(floating[:, :, :, ::1] xp, int kh, int kw, int st, int sf,
           int oh, int ow):
    """(N,C,Hp,Wp) -> (N*oh*ow, C*kh*kw); columns ordered (c, kh, kw)."""
    cdef Py_ssize_t n = xp.shape[0]
    cdef Py_ssize_t c = xp.shape[1]
    cdef Py_ssize_t ni, ci, i, j, a, b, row, colbase
    if floating is float:
        dtype = np.float32
    else:
        dtype = np.float64
    out = np.empty((n * oh * ow, c * kh * kw), dtype=dtype)
    cdef floating[:, ::1] col = out
    for ni in range(n):
        for a in range(oh):
            for b in range(ow):
                row = (ni * oh + a) * ow + b
                for ci in range(c):
                    for i in range(kh):
                        colbase = (ci * kh + i) * kw
                        for j in range(kw):
                            col[row, colbase + j] = xp[ni, ci, i + a * st, j + b * sf]
    return out


def col2im(floating[:, ::1] dcol, int n, int c, int hp, int wp,
           int kh, int kw, int st, int sf, int oh, int ow):
    """Adjoint of im2col: scatter-add patch rows back to (N,C,Hp,Wp)."""
    cdef Py_ssize_t ni, ci, i, j, a, b, row, colbase
    if floating is float:
        dtype = np.float32
    else:
        dtype = np.float64
    out = np.zeros((n, c, hp, wp), dtype=dtype)
    cdef floating[:, :, :, ::1] dxp = out
    for ni in range(n):
        for a in range(oh):
            for b in range(ow):
                row = (ni * oh + a) * ow + b
                for ci in range(c):
                    for i in range(kh):
                        colbase = (ci * kh + i) * kw
                        for j in range(kw):
                            dxp[ni, ci, i + a * st, j + b * sf] += dcol[row, colbase + j]
    return out
