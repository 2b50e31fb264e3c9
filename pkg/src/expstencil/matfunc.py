"""Action of exp(s A) and phi1(s A) on vectors via Newton interpolation at Leja points.

Everything reduces to fused (alpha A + beta I) x products: nodes are generated
on the canonical interval [-2, 2] and mapped affinely onto a spectral interval
that contains the operator's eigenvalues (Gershgorin disks), and the Newton
recurrence runs in the recentered variable for conditioning.  Divided
differences are computed by applying the target function to the bidiagonal
node matrix (diagonal x_k, unit subdiagonal) with a Taylor
scaling-and-squaring scheme; the naive recursion is catastrophically unstable
for the exponential on wide intervals.

``scale`` is the (possibly negative or imaginary) factor s in target(s A):
the exponential Euler step passes s = -h, quantum propagation s = -i t.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from math import ceil, log2
from typing import Optional

import numpy as np

from .errors import ConvergenceError
from .sparse import CsrMatrix, gershgorin_bounds_csr
from .stencil import StencilOperator, gershgorin_bounds

TARGETS = ("exp", "phi1")

# Taylor switch for the scalar phi1: truncation ~ |z|^8/9! ~ 3e-22 at the
# boundary, so the series and the expm1-based formula agree to well below
# double roundoff across the switch.
_PHI1_SWITCH = 1e-2
_PHI1_COEFF = [1.0 / math.factorial(k + 1) for k in range(8)]


def _expm1_complex(z: np.ndarray) -> np.ndarray:
    """exp(z) - 1 without cancellation for complex z."""
    x, y = z.real, z.imag
    re = np.expm1(x) * np.cos(y) - 2.0 * np.sin(0.5 * y) ** 2
    im = np.exp(x) * np.sin(y)
    return re + 1j * im


def phi1_scalar(z):
    """phi1(z) = (e^z - 1)/z, entire with phi1(0) = 1.

    Direct formula (via expm1) for |z| > 1e-2, 8-term Taylor series below.
    """
    zz = np.asarray(z)
    scalar = zz.ndim == 0
    work = zz.astype(np.complex128 if np.iscomplexobj(zz) else np.float64)
    work = np.atleast_1d(work)
    out = np.empty_like(work)

    small = np.abs(work) <= _PHI1_SWITCH
    if small.any():
        zs = work[small]
        acc = np.full_like(zs, _PHI1_COEFF[7])
        for c in reversed(_PHI1_COEFF[:7]):
            acc = acc * zs + c
        out[small] = acc
    big = ~small
    if big.any():
        zb = work[big]
        em1 = _expm1_complex(zb) if np.iscomplexobj(work) else np.expm1(zb)
        out[big] = em1 / zb
    if scalar:
        return out[0]
    return out.reshape(zz.shape)


@dataclass(frozen=True)
class SpectralInterval:
    """Interval [a, b] containing the operator spectrum.

    axis='real' for self-adjoint/dissipative operators; axis='imag' declares
    a skew-Hermitian operator with spectrum in i*[a, b].
    """

    a: float
    b: float
    axis: str = "real"

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)) or self.a > self.b:
            raise ValueError(f"invalid spectral interval [{self.a}, {self.b}]")
        if self.axis not in ("real", "imag"):
            raise ValueError(f"axis must be 'real' or 'imag', got {self.axis!r}")

    @property
    def center(self) -> float:
        return 0.5 * (self.a + self.b)

    @property
    def halfspan(self) -> float:
        """Capacity-normalized half width (b-a)/4; the canonical map factor."""
        return 0.25 * (self.b - self.a)

    def widened(self, margin: float) -> "SpectralInterval":
        return SpectralInterval(self.a - margin, self.b + margin, self.axis)


def gershgorin_interval(a, axis: str = "real") -> SpectralInterval:
    """Spectral interval from Gershgorin disks of a stencil or CSR operator."""
    base = getattr(a, "base_operator", a)
    if isinstance(base, StencilOperator):
        if axis != "real":
            raise ValueError("stencil operators have real spectral intervals")
        lo, hi = gershgorin_bounds(base)
    elif isinstance(base, CsrMatrix):
        lo, hi = gershgorin_bounds_csr(base, axis)
    else:
        raise TypeError(f"no Gershgorin bounds for {type(base).__name__}")
    return SpectralInterval(lo, hi, axis)


# ---------------------------------------------------------------------------
# Leja points on the canonical interval [-2, 2].

_CANONICAL_GRID_SIZE = 100001


class _CanonicalLeja:
    """Incrementally extended Leja sequence on [-2,2] over a fixed fine grid.

    x0 = 2 (right endpoint); x_k maximizes prod_{j<k} |x - x_j| over the
    candidate grid.  Deterministic: argmax ties resolve to the leftmost
    candidate.
    """

    def __init__(self, grid_size: int = _CANONICAL_GRID_SIZE):
        self.grid = np.linspace(-2.0, 2.0, grid_size)
        self.points = [2.0]
        self._sep = np.abs(self.grid - 2.0)

    def get(self, count: int) -> np.ndarray:
        if count > self.grid.size:
            raise ValueError(f"requested {count} Leja points exceeds candidate grid size")
        while len(self.points) < count:
            k = int(np.argmax(self._sep))
            x = float(self.grid[k])
            self.points.append(x)
            self._sep *= np.abs(self.grid - x)
        return np.array(self.points[:count])


_canonical = _CanonicalLeja()


def canonical_leja_points(count: int) -> np.ndarray:
    return _canonical.get(count)


def leja_points(interval: SpectralInterval, count: int) -> np.ndarray:
    """Leja sequence mapped onto [a, b]; a degenerate interval yields [a]."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if interval.a == interval.b:
        return np.array([interval.a])
    return interval.center + interval.halfspan * canonical_leja_points(count)


# ---------------------------------------------------------------------------
# Divided differences via the bidiagonal-matrix (Opitz) form.


def _taylor_exp_phi1(m: np.ndarray, terms: int = 30) -> tuple[np.ndarray, np.ndarray]:
    eye = np.eye(m.shape[0], dtype=m.dtype)
    e = eye.copy()
    p = eye.copy()
    t_e = eye.copy()
    t_p = eye.copy()
    for k in range(1, terms + 1):
        t_e = (t_e @ m) / k
        e += t_e
        t_p = (t_p @ m) / (k + 1)
        p += t_p
    return e, p


def _funm_bidiagonal(diag: np.ndarray, sub, target: str) -> np.ndarray:
    """target() of the lower-bidiagonal matrix; returns its first column.

    The first column of f(Z), Z = diag(x) + sub * subdiagonal, holds the
    divided differences of f scaled by sub^k; with sub = scale this is exactly
    f[x_0..x_k] of f(z) = target(scale*z).
    """
    m = len(diag)
    dtype = np.complex128 if (np.iscomplexobj(diag) or np.iscomplexobj(np.asarray(sub))) else np.float64
    z = np.zeros((m, m), dtype=dtype)
    z[np.arange(m), np.arange(m)] = diag
    if m > 1:
        z[np.arange(1, m), np.arange(m - 1)] = sub
    norm = np.linalg.norm(z, 1)
    s = 0 if norm <= 1.0 else int(ceil(log2(norm)))
    e, p = _taylor_exp_phi1(z / (2.0**s))
    for _ in range(s):
        # phi1(2M) = (I + e^M) phi1(M) / 2, then square the exponential
        p = 0.5 * (p + e @ p)
        e = e @ e
    f = e if target == "exp" else p
    if not np.all(np.isfinite(f)):
        raise OverflowError(
            "divided differences overflowed: spectral interval too large for the degree"
        )
    return f[:, 0].copy()


def divided_differences(nodes, target: str, scale) -> np.ndarray:
    """dd[k] = f[x_0..x_k] for f(z) = target(scale*z) at the given nodes."""
    if target not in TARGETS:
        raise ValueError(f"target must be one of {TARGETS}")
    nodes = np.asarray(nodes, dtype=np.float64)
    dd = _funm_bidiagonal(scale * nodes, scale, target)
    # the leading coefficient is known in closed form; pin it exactly
    dd[0] = np.exp(scale * nodes[0]) if target == "exp" else phi1_scalar(scale * nodes[0])
    return dd


@dataclass
class LejaInterpolant:
    """Newton interpolant of target(scale * z) on a spectral interval.

    ``nodes`` are the Leja points mapped to [a, b]; ``dd`` are the divided
    differences in the recentered variable xi = (z - center)/halfspan, which
    is also the variable of the operator recurrence (dd[0] equals
    target(scale * nodes[0]) either way).
    """

    interval: SpectralInterval
    target: str
    scale: complex
    max_degree: int
    tol: float
    nodes: np.ndarray = field(repr=False)
    xi: np.ndarray = field(repr=False)
    dd: np.ndarray = field(repr=False)

    @property
    def degree(self) -> int:
        return len(self.nodes) - 1


def make_interpolant(
    interval: SpectralInterval,
    target: str,
    scale,
    max_degree: int = 150,
    tol: float = 1e-8,
) -> LejaInterpolant:
    if target not in TARGETS:
        raise ValueError(f"target must be one of {TARGETS}")
    s_eff = scale * 1j if interval.axis == "imag" else scale
    if interval.a == interval.b:
        nodes = np.array([interval.a])
        xi = np.zeros(1)
        f0 = np.exp(s_eff * interval.a) if target == "exp" else phi1_scalar(s_eff * interval.a)
        dd = np.array([f0])
    else:
        xi = canonical_leja_points(max_degree + 1)
        nodes = interval.center + interval.halfspan * xi
        # divided differences of g(xi) = target(s_eff*(center + halfspan*xi)):
        # bidiagonal with diagonal s_eff*nodes and subdiagonal s_eff*halfspan
        dd = _funm_bidiagonal(s_eff * nodes, s_eff * interval.halfspan, target)
        dd[0] = np.exp(s_eff * nodes[0]) if target == "exp" else phi1_scalar(s_eff * nodes[0])
    return LejaInterpolant(interval, target, scale, max_degree, tol, nodes, xi, dd)


def newton_apply(a, interp: LejaInterpolant, v: np.ndarray, tol: Optional[float] = None):
    """Evaluate the interpolant on a vector; returns (result, matvec count).

    The term-size test |dd_k| ||w_k|| <= tol ||p_k|| must hold twice in a row
    before truncation (divided differences of the exponential oscillate).
    tol == 0 disables truncation and consumes every node.

    All norms are taken on the coordinating thread over the full vector, so
    partitioned operators give bitwise-identical truncation decisions.
    """
    tol = interp.tol if tol is None else tol
    v = np.asarray(v)
    dd, xi = interp.dd, interp.xi
    out_dtype = np.result_type(dd.dtype, v.dtype)
    if len(dd) == 1:
        return (dd[0] * v).astype(out_dtype), 0

    gamma = interp.interval.halfspan
    shift = interp.interval.center / gamma
    op_alpha = (-1j / gamma) if interp.interval.axis == "imag" else (1.0 / gamma)

    w = v.astype(out_dtype)
    p = dd[0] * w
    consecutive = 0
    term = np.inf
    matvecs = 0
    for k in range(1, len(dd)):
        beta = -shift - xi[k - 1]
        w = a.fused_apply_flat(op_alpha, beta, w)
        matvecs += 1
        p += dd[k] * w
        term = abs(dd[k]) * np.linalg.norm(w)
        if tol > 0:
            if term <= tol * np.linalg.norm(p):
                consecutive += 1
                if consecutive >= 2:
                    return p, matvecs
            else:
                consecutive = 0
    if tol == 0:
        return p, matvecs
    ref = np.linalg.norm(p)
    raise ConvergenceError(
        f"Newton series for {interp.target} did not converge within degree "
        f"{interp.degree} (last term {term:.3e} vs tolerance {tol:.1e} * {ref:.3e})",
        residual=float(term / ref) if ref > 0 else float("inf"),
        degree=matvecs,
    )


@dataclass
class MatfuncStats:
    matvecs: int = 0
    degree: int = 0
    halvings: int = 0


def apply_matfunc(
    a,
    v: np.ndarray,
    target: str,
    scale,
    interval: Optional[SpectralInterval] = None,
    tol: float = 1e-8,
    max_degree: int = 150,
    max_halvings: int = 10,
):
    """target(scale*A) v with scale-halving composition as a convergence rescue.

    exp composes by applying the half-scale exponential twice;
    phi1(M) v = (phi1(M/2) v + exp(M/2) phi1(M/2) v)/2.
    Returns (vector, MatfuncStats).
    """
    if interval is None:
        interval = gershgorin_interval(a)
    stats = MatfuncStats()
    cache: dict[tuple[str, int], LejaInterpolant] = {}

    def interp_for(tgt: str, level: int) -> LejaInterpolant:
        key = (tgt, level)
        if key not in cache:
            cache[key] = make_interpolant(interval, tgt, scale / 2**level, max_degree, tol)
        return cache[key]

    def run(tgt: str, vec: np.ndarray, level: int) -> np.ndarray:
        try:
            y, mv = newton_apply(a, interp_for(tgt, level), vec, tol)
            stats.matvecs += mv
            stats.degree = max(stats.degree, mv)
            return y
        except ConvergenceError as err:
            stats.matvecs += err.degree or 0
            if level >= max_halvings:
                raise
            stats.halvings = max(stats.halvings, level + 1)
            if tgt == "exp":
                half = run("exp", vec, level + 1)
                return run("exp", half, level + 1)
            v1 = run("phi1", vec, level + 1)
            v2 = run("exp", v1, level + 1)
            return 0.5 * (v1 + v2)

    return run(target, v, 0), stats
