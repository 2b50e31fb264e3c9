"""Numpy fallback kernels.

Every kernel evaluates each output point with the same expression tree as the
compiled core (see _core.pyx):

    sx  = (2*c - xm - xp) * wx
    sy  = (2*c - ym - yp) * wy
    sz  = (2*c - zm - zp) * wz
    lap = (sx + sy) + sz            # then lap = d * lap with a coefficient
    out = alpha * lap + beta * c

so stencil results are bitwise identical across traversals, slab partitions,
and backends.  CSR row sums here use numpy's per-row reduce (deterministic
and partition-invariant, but pairwise rather than the compiled backend's
strictly sequential accumulation); the combustion kernel matches the compiled
one up to the last ulp of the exp implementation.
"""

from __future__ import annotations

import numpy as np

backend_name = "python"

# ghost-value modes for the stencil kernels
MODE_ZERO = 0
MODE_PERIODIC = 1
MODE_FACES = 2


def _fill_ghosts(P, u3, mode, faces, halo_lo, halo_hi, z0, nz_total):
    lz = u3.shape[0]
    if mode == MODE_PERIODIC:
        # wraparound is only defined on an unpartitioned slab
        P[1:-1, 1:-1, 0] = u3[:, :, -1]
        P[1:-1, 1:-1, -1] = u3[:, :, 0]
        P[1:-1, 0, 1:-1] = u3[:, -1, :]
        P[1:-1, -1, 1:-1] = u3[:, 0, :]
        P[0, 1:-1, 1:-1] = u3[-1, :, :]
        P[-1, 1:-1, 1:-1] = u3[0, :, :]
        return
    if mode == MODE_FACES:
        fx_lo, fx_hi, fy_lo, fy_hi, fz_lo, fz_hi = faces
        P[1:-1, 1:-1, 0] = fx_lo[z0:z0 + lz, :]
        P[1:-1, 1:-1, -1] = fx_hi[z0:z0 + lz, :]
        P[1:-1, 0, 1:-1] = fy_lo[z0:z0 + lz, :]
        P[1:-1, -1, 1:-1] = fy_hi[z0:z0 + lz, :]
        if z0 == 0:
            P[0, 1:-1, 1:-1] = fz_lo
        if z0 + lz == nz_total:
            P[-1, 1:-1, 1:-1] = fz_hi
    # MODE_ZERO: the zero-initialized padding already holds the ghosts.
    if halo_lo is not None:
        P[0, 1:-1, 1:-1] = halo_lo
    if halo_hi is not None:
        P[-1, 1:-1, 1:-1] = halo_hi


def _block(P, out3, coeff3, wx, wy, wz, alpha, beta, ys, ye, xs, xe):
    c = P[1:-1, 1 + ys:1 + ye, 1 + xs:1 + xe]
    xm = P[1:-1, 1 + ys:1 + ye, xs:xe]
    xp = P[1:-1, 1 + ys:1 + ye, 2 + xs:2 + xe]
    ym = P[1:-1, ys:ye, 1 + xs:1 + xe]
    yp = P[1:-1, 2 + ys:2 + ye, 1 + xs:1 + xe]
    zm = P[:-2, 1 + ys:1 + ye, 1 + xs:1 + xe]
    zp = P[2:, 1 + ys:1 + ye, 1 + xs:1 + xe]
    two = c.dtype.type(2.0)
    sx = (two * c - xm - xp) * wx
    sy = (two * c - ym - yp) * wy
    sz = (two * c - zm - zp) * wz
    lap = (sx + sy) + sz
    if coeff3 is not None:
        lap = coeff3[:, ys:ye, xs:xe] * lap
    out3[:, ys:ye, xs:xe] = alpha * lap + beta * c


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
    """out = alpha * (D . A u) + beta * u on one z-slab of the grid.

    u3/out3 have shape (lz, ny, nx); weights are the per-axis 1/dx^2 factors
    (zero for degenerate axes).  halo_lo/halo_hi, when given, supply the ghost
    z-planes at the slab seams and override the global boundary mode there.
    """
    lz, ny, nx = u3.shape
    if nz_total is None:
        nz_total = lz
    dt = u3.dtype.type
    alpha = dt(alpha)
    beta = dt(beta)
    wx, wy, wz = (dt(w) for w in weights)

    P = np.zeros((lz + 2, ny + 2, nx + 2), dtype=u3.dtype)
    P[1:-1, 1:-1, 1:-1] = u3
    _fill_ghosts(P, u3, mode, faces, halo_lo, halo_hi, z0, nz_total)

    if traversal == "naive":
        _block(P, out3, coeff3, wx, wy, wz, alpha, beta, 0, ny, 0, nx)
        return
    tx, ty = tile
    for ys in range(0, ny, ty):
        ye = min(ys + ty, ny)
        for xs in range(0, nx, tx):
            xe = min(xs + tx, nx)
            _block(P, out3, coeff3, wx, wy, wz, alpha, beta, ys, ye, xs, xe)


def csr_fused(nrows, row_ptr, col_idx, vals, x, y, alpha, beta, use_beta):
    """y[r] = alpha * sum(vals[k] x[col[k]], k in row r) (+ beta * x[r])."""
    products = vals * x[col_idx]
    for r in range(nrows):
        s, e = row_ptr[r], row_ptr[r + 1]
        acc = np.add.reduce(products[s:e]) if e > s else products.dtype.type(0)
        y[r] = alpha * acc + beta * x[r] if use_beta else alpha * acc


def csr_fused_rows(row_lo, row_hi, row_ptr, col_idx, vals, x, y, alpha, beta, use_beta):
    """Row-range variant used by the partitioned apply; writes y[row_lo:row_hi]."""
    for r in range(row_lo, row_hi):
        s, e = row_ptr[r], row_ptr[r + 1]
        acc = np.add.reduce(vals[s:e] * x[col_idx[s:e]]) if e > s else vals.dtype.type(0)
        y[r] = alpha * acc + beta * x[r] if use_beta else alpha * acc


def combustion_pointwise(u, out):
    """out[i] = (2 - u[i]) / 4 * exp(20 (1 - 1/u[i])); caller checks u > 0."""
    dt = u.dtype.type
    r = dt(1.0) / u
    t = dt(20.0) * (dt(1.0) - r)
    np.exp(t, out=out)
    out *= dt(0.25) * (dt(2.0) - u)
