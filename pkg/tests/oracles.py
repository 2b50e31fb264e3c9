"""Independent brute-force oracles for the test suite.

Everything here re-derives expected values from first principles (naive
loops, extended precision, eigendecompositions) and never calls the kernel
paths it is used to check.
"""

from __future__ import annotations

import numpy as np


def dense_stencil(grid, bc_kind, boundary_fn=None, coeff=None):
    """Explicit dense matrix + boundary vector of the seven-point operator.

    Naive triple loop; neighbors outside the interior contribute 0
    (homogeneous), -w*f(ghost coordinates) to b (function), or wrap
    (periodic/'none').  Axes with a single point carry no term.  Row i is
    scaled by coeff at point i when given.
    """
    nx, ny, nz = grid.nx, grid.ny, grid.nz
    n = nx * ny * nz
    spacing = {"x": grid.dx, "y": grid.dy, "z": grid.dz}
    counts = {"x": nx, "y": ny, "z": nz}
    mat = np.zeros((n, n))
    b = np.zeros(n)

    def flat(ix, iy, iz):
        return ix + nx * (iy + ny * iz)

    def coords(ix, iy, iz):
        return ((ix + 1) * grid.dx, (iy + 1) * grid.dy, (iz + 1) * grid.dz)

    for iz in range(nz):
        for iy in range(ny):
            for ix in range(nx):
                i = flat(ix, iy, iz)
                d = 1.0 if coeff is None else coeff(*coords(ix, iy, iz))
                for axis, (sx, sy, sz) in (("x", (1, 0, 0)), ("y", (0, 1, 0)), ("z", (0, 0, 1))):
                    m = counts[axis]
                    if m == 1:
                        continue
                    w = 1.0 / spacing[axis] ** 2
                    mat[i, i] += 2.0 * w * d
                    for step in (-1, +1):
                        jx, jy, jz = ix + step * sx, iy + step * sy, iz + step * sz
                        inside = 0 <= jx < nx and 0 <= jy < ny and 0 <= jz < nz
                        if inside:
                            mat[i, flat(jx, jy, jz)] -= w * d
                        elif bc_kind == "none":
                            mat[i, flat(jx % nx, jy % ny, jz % nz)] -= w * d
                        elif bc_kind == "function":
                            gx = (jx + 1) * grid.dx
                            gy = (jy + 1) * grid.dy
                            gz = (jz + 1) * grid.dz
                            b[i] -= w * d * boundary_fn(gx, gy, gz)
                        # homogeneous: ghost value 0 contributes nothing
    return mat, b


def brute_leja(a, b, count, grid_points=100001):
    """Leja points on [a, b] by full re-maximization over a uniform grid."""
    grid = np.linspace(a, b, grid_points)
    pts = [b]
    for _ in range(count - 1):
        prod = np.ones_like(grid)
        for p in pts:
            prod *= np.abs(grid - p)
        pts.append(float(grid[int(np.argmax(prod))]))
    return np.array(pts[:count])


def mp_divided_differences(nodes, target, scale, dps=60):
    """Recursive divided-difference table of target(scale*z) in mpmath."""
    import mpmath as mp

    with mp.workdps(dps):
        s = mp.mpc(scale) if isinstance(scale, complex) else mp.mpf(scale)

        def f(x):
            z = s * x
            if target == "exp":
                return mp.exp(z)
            return (mp.exp(z) - 1) / z if z != 0 else mp.mpf(1)

        xs = [mp.mpf(float(x)) for x in nodes]
        table = [f(x) for x in xs]
        out = [table[0]]
        for order in range(1, len(xs)):
            table = [
                (table[k + 1] - table[k]) / (xs[k + order] - xs[k])
                for k in range(len(table) - 1)
            ]
            out.append(table[0])
        return [complex(v) for v in out]


def mp_phi1(z, dps=50):
    """phi1 at one point in extended precision."""
    import mpmath as mp

    with mp.workdps(dps):
        zz = mp.mpc(z)
        if zz == 0:
            return complex(1)
        return complex((mp.exp(zz) - 1) / zz)


def eig_matfunc_apply(m, target, scale, v):
    """target(scale*M) v by dense eigendecomposition (Hermitian M)."""
    lam, q = np.linalg.eigh(m)
    z = scale * lam.astype(np.result_type(lam, type(scale)))
    if target == "exp":
        f = np.exp(z)
    else:
        safe = np.where(z == 0, 1.0, z)
        f = np.where(z == 0, 1.0, np.expm1(safe) / safe)
    return (q * f) @ (q.conj().T @ v)


def expm_phi1_apply(m, v):
    """phi1(M) v through scipy's expm on the augmented matrix (any square M)."""
    import scipy.linalg

    n = m.shape[0]
    aug = np.zeros((n + 1, n + 1), dtype=np.result_type(m, v))
    aug[:n, :n] = m
    aug[:n, n] = v
    return scipy.linalg.expm(aug)[:n, n]
