# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels (Cython).

Each stencil output point is evaluated with the same expression tree as the
numpy fallback in _pykernels.py:

    sx  = (2*c - xm - xp) * wx
    sy  = (2*c - ym - yp) * wy
    sz  = (2*c - zm - zp) * wz
    lap = (sx + sy) + sz            # then lap = d * lap with a coefficient
    out = alpha * lap + beta * c

The extension is built with -ffp-contract=off and without -ffast-math, so
results are bitwise identical to the fallback.  CSR row sums accumulate
strictly in storage order.  All hot loops release the GIL so the in-process
worker pool scales.
"""

import numpy as np

cimport cython
from libc.math cimport exp, expf

backend_name = "compiled"

MODE_ZERO = 0
MODE_PERIODIC = 1
MODE_FACES = 2

ctypedef fused real_t:
    float
    double

ctypedef double complex cplx

_DUMMY_F64_2D = np.zeros((1, 1), dtype=np.float64)
_DUMMY_F64_3D = np.zeros((1, 1, 1), dtype=np.float64)
_DUMMY_F32_2D = np.zeros((1, 1), dtype=np.float32)
_DUMMY_F32_3D = np.zeros((1, 1, 1), dtype=np.float32)


cdef inline real_t _point(
    const real_t[:, :, ::1] u3,
    const real_t[:, ::1] fx_lo, const real_t[:, ::1] fx_hi,
    const real_t[:, ::1] fy_lo, const real_t[:, ::1] fy_hi,
    const real_t[:, ::1] fz_lo, const real_t[:, ::1] fz_hi,
    const real_t[:, ::1] halo_lo, const real_t[:, ::1] halo_hi,
    const real_t[:, :, ::1] coeff3,
    int mode, bint has_halo_lo, bint has_halo_hi, bint has_coeff,
    bint at_z_lo, bint at_z_hi,
    Py_ssize_t z0, Py_ssize_t lz, Py_ssize_t ny, Py_ssize_t nx,
    real_t wx, real_t wy, real_t wz,
    real_t alpha, real_t beta,
    Py_ssize_t iz, Py_ssize_t iy, Py_ssize_t ix,
) noexcept nogil:
    cdef real_t c = u3[iz, iy, ix]
    cdef real_t xm, xp, ym, yp, zm, zp, sx, sy, sz, lap
    cdef real_t zero = <real_t> 0.0
    cdef real_t two = <real_t> 2.0

    if ix > 0:
        xm = u3[iz, iy, ix - 1]
    elif mode == 1:
        xm = u3[iz, iy, nx - 1]
    elif mode == 2:
        xm = fx_lo[z0 + iz, iy]
    else:
        xm = zero
    if ix < nx - 1:
        xp = u3[iz, iy, ix + 1]
    elif mode == 1:
        xp = u3[iz, iy, 0]
    elif mode == 2:
        xp = fx_hi[z0 + iz, iy]
    else:
        xp = zero

    if iy > 0:
        ym = u3[iz, iy - 1, ix]
    elif mode == 1:
        ym = u3[iz, ny - 1, ix]
    elif mode == 2:
        ym = fy_lo[z0 + iz, ix]
    else:
        ym = zero
    if iy < ny - 1:
        yp = u3[iz, iy + 1, ix]
    elif mode == 1:
        yp = u3[iz, 0, ix]
    elif mode == 2:
        yp = fy_hi[z0 + iz, ix]
    else:
        yp = zero

    if iz > 0:
        zm = u3[iz - 1, iy, ix]
    elif has_halo_lo:
        zm = halo_lo[iy, ix]
    elif mode == 1:
        zm = u3[lz - 1, iy, ix]
    elif mode == 2 and at_z_lo:
        zm = fz_lo[iy, ix]
    else:
        zm = zero
    if iz < lz - 1:
        zp = u3[iz + 1, iy, ix]
    elif has_halo_hi:
        zp = halo_hi[iy, ix]
    elif mode == 1:
        zp = u3[0, iy, ix]
    elif mode == 2 and at_z_hi:
        zp = fz_hi[iy, ix]
    else:
        zp = zero

    sx = (two * c - xm - xp) * wx
    sy = (two * c - ym - yp) * wy
    sz = (two * c - zm - zp) * wz
    lap = (sx + sy) + sz
    if has_coeff:
        lap = coeff3[iz, iy, ix] * lap
    return alpha * lap + beta * c


cdef void _stencil_impl(
    const real_t[:, :, ::1] u3, real_t[:, :, ::1] out3,
    const real_t[:, ::1] fx_lo, const real_t[:, ::1] fx_hi,
    const real_t[:, ::1] fy_lo, const real_t[:, ::1] fy_hi,
    const real_t[:, ::1] fz_lo, const real_t[:, ::1] fz_hi,
    const real_t[:, ::1] halo_lo, const real_t[:, ::1] halo_hi,
    const real_t[:, :, ::1] coeff3,
    int mode, bint has_halo_lo, bint has_halo_hi, bint has_coeff,
    bint at_z_lo, bint at_z_hi,
    Py_ssize_t z0, real_t wx, real_t wy, real_t wz,
    real_t alpha, real_t beta,
    int traversal, Py_ssize_t tile_x, Py_ssize_t tile_y,
) noexcept nogil:
    cdef Py_ssize_t lz = u3.shape[0]
    cdef Py_ssize_t ny = u3.shape[1]
    cdef Py_ssize_t nx = u3.shape[2]
    cdef Py_ssize_t iz, iy, ix, ys, xs, ye, xe

    if traversal == 0:
        for iz in range(lz):
            for iy in range(ny):
                for ix in range(nx):
                    out3[iz, iy, ix] = _point(
                        u3, fx_lo, fx_hi, fy_lo, fy_hi, fz_lo, fz_hi,
                        halo_lo, halo_hi, coeff3, mode, has_halo_lo, has_halo_hi,
                        has_coeff, at_z_lo, at_z_hi, z0, lz, ny, nx,
                        wx, wy, wz, alpha, beta, iz, iy, ix)
        return
    # tiled: 2D tiles in (x, y), marching over z inside each tile
    ys = 0
    while ys < ny:
        ye = ys + tile_y
        if ye > ny:
            ye = ny
        xs = 0
        while xs < nx:
            xe = xs + tile_x
            if xe > nx:
                xe = nx
            for iz in range(lz):
                for iy in range(ys, ye):
                    for ix in range(xs, xe):
                        out3[iz, iy, ix] = _point(
                            u3, fx_lo, fx_hi, fy_lo, fy_hi, fz_lo, fz_hi,
                            halo_lo, halo_hi, coeff3, mode, has_halo_lo,
                            has_halo_hi, has_coeff, at_z_lo, at_z_hi, z0, lz,
                            ny, nx, wx, wy, wz, alpha, beta, iz, iy, ix)
            xs = xe
        ys = ye


def stencil_fused_slab(
    u3,
    out3,
    alpha,
    beta,
    weights,
    mode,
    faces=None,
    halo_lo=None,
    halo_hi=None,
    z0=0,
    nz_total=None,
    coeff3=None,
    traversal="naive",
    tile=(64, 8),
):
    """Compiled twin of _pykernels.stencil_fused_slab (f32/f64 slabs)."""
    cdef int imode = mode
    cdef int trav = 0 if traversal == "naive" else 1
    cdef Py_ssize_t tx = tile[0], ty = tile[1]
    cdef Py_ssize_t z_off = z0
    cdef bint has_lo = halo_lo is not None
    cdef bint has_hi = halo_hi is not None
    cdef bint has_coeff = coeff3 is not None
    lz = u3.shape[0]
    total = lz if nz_total is None else nz_total
    cdef bint at_z_lo = z_off == 0
    cdef bint at_z_hi = z_off + lz == total
    wx, wy, wz = weights

    if u3.dtype == np.float64:
        dummy2, dummy3 = _DUMMY_F64_2D, _DUMMY_F64_3D
        f = faces if faces is not None else (dummy2,) * 6
        _stencil_impl[double](
            u3, out3, f[0], f[1], f[2], f[3], f[4], f[5],
            halo_lo if has_lo else dummy2, halo_hi if has_hi else dummy2,
            coeff3 if has_coeff else dummy3,
            imode, has_lo, has_hi, has_coeff, at_z_lo, at_z_hi,
            z_off, wx, wy, wz, alpha, beta, trav, tx, ty)
    elif u3.dtype == np.float32:
        dummy2, dummy3 = _DUMMY_F32_2D, _DUMMY_F32_3D
        f = faces if faces is not None else (dummy2,) * 6
        _stencil_impl[float](
            u3, out3, f[0], f[1], f[2], f[3], f[4], f[5],
            halo_lo if has_lo else dummy2, halo_hi if has_hi else dummy2,
            coeff3 if has_coeff else dummy3,
            imode, has_lo, has_hi, has_coeff, at_z_lo, at_z_hi,
            z_off, <float> wx, <float> wy, <float> wz,
            <float> alpha, <float> beta, trav, tx, ty)
    else:
        raise TypeError(f"compiled stencil kernel supports f32/f64, got {u3.dtype}")


# ---------------------------------------------------------------------------
# CSR kernels: strictly sequential accumulation in storage order.

ctypedef fused vec_t:
    float
    double
    cplx

ctypedef int i32
ctypedef long long i64

ctypedef fused idx_t:
    i32
    i64


cdef void _csr_same(
    Py_ssize_t row_lo, Py_ssize_t row_hi,
    const i64[::1] row_ptr, const idx_t[::1] col_idx,
    const vec_t[::1] vals, const vec_t[::1] x, vec_t[::1] y,
    vec_t alpha, vec_t beta, bint use_beta,
) noexcept nogil:
    cdef Py_ssize_t r, k
    cdef vec_t acc
    for r in range(row_lo, row_hi):
        acc = 0
        for k in range(row_ptr[r], row_ptr[r + 1]):
            acc = acc + vals[k] * x[col_idx[k]]
        if use_beta:
            y[r] = alpha * acc + beta * x[r]
        else:
            y[r] = alpha * acc


cdef void _csr_real_cplx(
    Py_ssize_t row_lo, Py_ssize_t row_hi,
    const i64[::1] row_ptr, const idx_t[::1] col_idx,
    const double[::1] vals, const cplx[::1] x, cplx[::1] y,
    cplx alpha, cplx beta, bint use_beta,
) noexcept nogil:
    cdef Py_ssize_t r, k
    cdef cplx acc
    for r in range(row_lo, row_hi):
        acc = 0
        for k in range(row_ptr[r], row_ptr[r + 1]):
            acc = acc + vals[k] * x[col_idx[k]]
        if use_beta:
            y[r] = alpha * acc + beta * x[r]
        else:
            y[r] = alpha * acc


def csr_fused_rows(row_lo, row_hi, row_ptr, col_idx, vals, x, y, alpha, beta, use_beta):
    """y[row_lo:row_hi] = alpha * (A x)[rows] (+ beta * x[rows])."""
    cdef bint wide = col_idx.dtype == np.int64
    if vals.dtype == np.float64 and x.dtype == np.float64:
        if wide:
            _csr_same[i64, double](row_lo, row_hi, row_ptr, col_idx, vals, x, y,
                                         float(alpha), float(beta), use_beta)
        else:
            _csr_same[i32, double](row_lo, row_hi, row_ptr, col_idx, vals, x, y,
                                   float(alpha), float(beta), use_beta)
    elif vals.dtype == np.float32 and x.dtype == np.float32:
        if wide:
            _csr_same[i64, float](row_lo, row_hi, row_ptr, col_idx, vals, x, y,
                                        <float> float(alpha), <float> float(beta), use_beta)
        else:
            _csr_same[i32, float](row_lo, row_hi, row_ptr, col_idx, vals, x, y,
                                  <float> float(alpha), <float> float(beta), use_beta)
    elif vals.dtype == np.float64 and x.dtype == np.complex128:
        if wide:
            _csr_real_cplx[i64](row_lo, row_hi, row_ptr, col_idx, vals, x, y,
                                      complex(alpha), complex(beta), use_beta)
        else:
            _csr_real_cplx[i32](row_lo, row_hi, row_ptr, col_idx, vals, x, y,
                                complex(alpha), complex(beta), use_beta)
    elif vals.dtype == np.complex128 and x.dtype == np.complex128:
        if wide:
            _csr_same[i64, cplx](row_lo, row_hi, row_ptr, col_idx, vals, x, y,
                                       complex(alpha), complex(beta), use_beta)
        else:
            _csr_same[i32, cplx](row_lo, row_hi, row_ptr, col_idx, vals, x, y,
                                 complex(alpha), complex(beta), use_beta)
    else:
        raise TypeError(
            f"compiled CSR kernel does not support vals={vals.dtype}, x={x.dtype}"
        )


def csr_fused(nrows, row_ptr, col_idx, vals, x, y, alpha, beta, use_beta):
    csr_fused_rows(0, nrows, row_ptr, col_idx, vals, x, y, alpha, beta, use_beta)


# ---------------------------------------------------------------------------
# Pointwise combustion nonlinearity.

cdef void _combustion_impl(const real_t[::1] u, real_t[::1] out) noexcept nogil:
    cdef Py_ssize_t i, n = u.shape[0]
    cdef real_t r, t
    cdef real_t one = <real_t> 1.0
    cdef real_t two = <real_t> 2.0
    cdef real_t twenty = <real_t> 20.0
    cdef real_t quarter = <real_t> 0.25
    for i in range(n):
        r = one / u[i]
        t = twenty * (one - r)
        if real_t is float:
            out[i] = (quarter * (two - u[i])) * expf(t)
        else:
            out[i] = (quarter * (two - u[i])) * exp(t)


def combustion_pointwise(u, out):
    """out[i] = (2 - u[i])/4 * exp(20 (1 - 1/u[i])); caller checks u > 0."""
    if u.dtype == np.float64:
        _combustion_impl[double](u, out)
    elif u.dtype == np.float32:
        _combustion_impl[float](u, out)
    else:
        raise TypeError(f"combustion kernel supports f32/f64, got {u.dtype}")
