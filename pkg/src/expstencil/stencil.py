"""Matrix-free seven-point operator A = -laplacian_h with boundary handling.

The operator acts on interior unknowns of the unit cube.  Per point (the
canonical evaluation order shared by every kernel backend):

    (A u)_i = [ (2c - xm - xp)/dx^2 + (2c - ym - yp)/dy^2 + (2c - zm - zp)/dz^2 ]

optionally premultiplied by a position-dependent coefficient D(x,y,z) > 0 at
the output point.  Neighbors outside the interior are 0 (homogeneous
Dirichlet), the boundary function value at the physical boundary point
(Dirichlet function), or wrap periodically ('none', benchmark mode).  Axes
with a single interior point contribute no second-difference term, so
degenerate grids behave as lower-dimensional operators.

The sign convention makes A positive semidefinite for Dirichlet data, so
exp(-h A) is a contraction and the exponential Euler step is stable.
"""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from . import _kernels, _pykernels
from .errors import BoundaryKindError, EvaluationError, GridMismatchError
from .expr import parse_expression
from .grid import Field, Grid3D, eval_on_grid, zeros_field

MODE_ZERO = _pykernels.MODE_ZERO
MODE_PERIODIC = _pykernels.MODE_PERIODIC
MODE_FACES = _pykernels.MODE_FACES

DEFAULT_TILE = (64, 8)  # (x, y) points; hardware tuning, not correctness


class BoundaryCondition:
    """Tagged description of the Dirichlet data on the boundary of [0,1]^3.

    Kinds: 'none' (periodic wraparound, benchmark-only), 'homogeneous'
    (Dirichlet zero), 'function' (Dirichlet data f(x,y,z) on the boundary).
    """

    __slots__ = ("kind", "fn", "text")

    def __init__(self, kind: str, fn: Optional[Callable] = None, text: Optional[str] = None):
        if kind not in ("none", "homogeneous", "function"):
            raise ValueError(f"unknown boundary kind {kind!r}")
        if kind == "function" and fn is None:
            raise ValueError("boundary kind 'function' requires a callable")
        self.kind = kind
        self.fn = fn
        self.text = text

    @classmethod
    def none(cls) -> "BoundaryCondition":
        return cls("none")

    @classmethod
    def homogeneous(cls) -> "BoundaryCondition":
        return cls("homogeneous")

    @classmethod
    def function(cls, fn: Callable, text: Optional[str] = None) -> "BoundaryCondition":
        return cls("function", fn, text)

    @classmethod
    def from_spec(cls, spec: str) -> "BoundaryCondition":
        """CLI form: 'none', 'homogeneous', or an expression in x,y,z."""
        s = spec.strip().lower()
        if s == "none":
            return cls.none()
        if s in ("homogeneous", "dirichlet0"):
            return cls.homogeneous()
        return cls.function(parse_expression(spec), text=spec)

    def label(self) -> str:
        if self.kind == "function":
            return self.text or "function"
        return self.kind

    def __repr__(self):
        return f"BoundaryCondition({self.label()!r})"


class StencilOperator:
    """Seven-point operator bound to a grid, boundary condition and traversal.

    traversal is 'naive' (plain z,y,x sweep) or 'tiled' (2D tiles in (x,y)
    marching over z); both produce bitwise-identical outputs.
    """

    def __init__(
        self,
        grid: Grid3D,
        bc: BoundaryCondition,
        coeff: Optional[Callable] = None,
        traversal: str = "naive",
        tile: tuple[int, int] = DEFAULT_TILE,
        backend: str = "auto",
    ):
        if traversal not in ("naive", "tiled"):
            raise ValueError(f"unknown traversal {traversal!r}")
        self.grid = grid
        self.bc = bc
        self.coeff = coeff
        self.traversal = traversal
        self.tile = tile
        self.backend = backend
        self._coeff_cache: dict[str, np.ndarray] = {}

    @property
    def n(self) -> int:
        return self.grid.n

    def weights(self) -> tuple[float, float, float]:
        """Per-axis 1/dx^2 factors; zero for degenerate (single-point) axes."""
        g = self.grid
        wx = 0.0 if g.nx == 1 else 1.0 / (g.dx * g.dx)
        wy = 0.0 if g.ny == 1 else 1.0 / (g.dy * g.dy)
        wz = 0.0 if g.nz == 1 else 1.0 / (g.dz * g.dz)
        return (wx, wy, wz)

    def coeff_values(self, kind: str = "f64") -> Optional[np.ndarray]:
        """Coefficient sampled on the grid as a (nz, ny, nx) array, cached."""
        if self.coeff is None:
            return None
        if kind not in self._coeff_cache:
            fld = eval_on_grid(self.grid, self.coeff, kind="f64")
            if np.any(fld.values <= 0.0):
                bad = int(np.argmax(fld.values <= 0.0))
                raise EvaluationError(
                    f"coefficient must be positive; value {fld.values[bad]} at index {bad}"
                )
            self._coeff_cache[kind] = fld.values.reshape(self.grid.shape).astype(kind_dtype(kind))
        return self._coeff_cache[kind]

    def with_traversal(self, traversal: str) -> "StencilOperator":
        return StencilOperator(self.grid, self.bc, self.coeff, traversal, self.tile, self.backend)

    # flat-vector protocol used by the matrix-function and decomposition layers
    def fused_apply_flat(self, alpha, beta, x: np.ndarray) -> np.ndarray:
        if self.bc.kind == "function":
            raise BoundaryKindError(
                "fused apply needs a linear operator; use apply_affine_split for "
                "Dirichlet-function boundaries"
            )
        return _fused_flat(self, alpha, beta, x, faces=None)

    def __repr__(self):
        g = self.grid
        return (
            f"StencilOperator({g.nx}x{g.ny}x{g.nx}, bc={self.bc.label()!r}, "
            f"coeff={'yes' if self.coeff else 'no'}, traversal={self.traversal!r})"
        )


def kind_dtype(kind: str):
    from .grid import SCALAR_KINDS

    return SCALAR_KINDS[kind]


def _sample(fn, x, y, z) -> np.ndarray:
    """Vectorized evaluation with a pointwise fallback for plain-math callables."""
    try:
        vals = np.asarray(fn(x, y, z), dtype=np.float64)
        if vals.shape != np.broadcast(x, y, z).shape:
            vals = np.broadcast_to(vals, np.broadcast(x, y, z).shape).copy()
        return vals
    except (TypeError, ValueError):
        bx, by, bz = np.broadcast_arrays(x, y, z)
        out = np.empty(bx.shape, dtype=np.float64)
        for idx in np.ndindex(bx.shape):
            out[idx] = fn(bx[idx], by[idx], bz[idx])
        return out


def boundary_faces(op: StencilOperator, dtype) -> tuple[np.ndarray, ...]:
    """Ghost values of the boundary function on the 6 faces of the cube.

    Layout: fx_lo/fx_hi have shape (nz, ny) (the x=0 / x=1 faces), fy_* have
    (nz, nx), fz_* have (ny, nx).  Recomputed at every apply: this is the
    'evaluated inside the kernel' path the split-boundary mode is benchmarked
    against.
    """
    g = op.grid
    fn = op.bc.fn
    xc, yc, zc = g.axis_coords("x"), g.axis_coords("y"), g.axis_coords("z")
    zz_y, yy = np.meshgrid(zc, yc, indexing="ij")
    zz_x, xx = np.meshgrid(zc, xc, indexing="ij")
    yy_x, xx_y = np.meshgrid(yc, xc, indexing="ij")
    faces = (
        _sample(fn, 0.0, yy, zz_y),
        _sample(fn, 1.0, yy, zz_y),
        _sample(fn, xx, 0.0, zz_x),
        _sample(fn, xx, 1.0, zz_x),
        _sample(fn, xx_y, yy_x, 0.0),
        _sample(fn, xx_y, yy_x, 1.0),
    )
    for name, f in zip(("x=0", "x=1", "y=0", "y=1", "z=0", "z=1"), faces):
        if not np.all(np.isfinite(f)):
            raise EvaluationError(f"non-finite boundary evaluation on face {name}")
    return tuple(np.ascontiguousarray(f, dtype=dtype) for f in faces)


def fused_slab(
    op: StencilOperator,
    alpha,
    beta,
    x3: np.ndarray,
    out3: np.ndarray,
    halo_lo=None,
    halo_hi=None,
    z0: int = 0,
    faces=None,
):
    """Run the kernel on one z-slab; the decomposition layer calls this directly."""
    mode = {"none": MODE_PERIODIC, "homogeneous": MODE_ZERO, "function": MODE_FACES}[op.bc.kind]
    if mode == MODE_PERIODIC and (z0 != 0 or x3.shape[0] != op.grid.nz):
        raise BoundaryKindError("periodic wraparound is not defined on a partitioned slab")
    if mode == MODE_FACES and faces is None:
        raise BoundaryKindError("Dirichlet-function apply needs precomputed face values")
    kern = _kernels.get_kernels(op.backend)
    coeff3 = op.coeff_values("f32" if x3.dtype == np.float32 else "f64")
    if coeff3 is not None:
        coeff3 = coeff3[z0:z0 + x3.shape[0]]
    kern.stencil_fused_slab(
        x3,
        out3,
        alpha,
        beta,
        op.weights(),
        mode,
        faces=faces,
        halo_lo=halo_lo,
        halo_hi=halo_hi,
        z0=z0,
        nz_total=op.grid.nz,
        coeff3=coeff3,
        traversal=op.traversal,
        tile=op.tile,
    )


def _fused_flat(op: StencilOperator, alpha, beta, x: np.ndarray, faces) -> np.ndarray:
    g = op.grid
    if x.shape != (g.n,):
        raise GridMismatchError(f"vector length {x.shape} does not match grid n={g.n}")
    if np.iscomplexobj(x):
        # kernels are real-valued; split A x into real and imaginary parts
        xr = np.ascontiguousarray(x.real)
        xi = np.ascontiguousarray(x.imag)
        lr = _fused_flat(op, 1.0, 0.0, xr, faces)
        li = _fused_flat(op, 1.0, 0.0, xi, faces)
        return alpha * (lr + 1j * li) + beta * x
    out = np.empty_like(x)
    fused_slab(op, alpha, beta, x.reshape(g.shape), out.reshape(g.shape), faces=faces)
    return out


def apply(op: StencilOperator, u: Field) -> Field:
    """A u with the operator's boundary handling (inline boundary evaluation)."""
    if u.grid != op.grid:
        raise GridMismatchError("field is bound to a different grid")
    faces = None
    if op.bc.kind == "function":
        if np.iscomplexobj(u.values):
            raise BoundaryKindError("Dirichlet-function boundaries are real-valued")
        faces = boundary_faces(op, u.values.dtype)
    return Field(u.grid, _fused_flat(op, 1.0, 0.0, u.values, faces))


def fused_apply(op: StencilOperator, alpha, beta, x: Field) -> Field:
    """(alpha A + beta I) x in a single traversal; linear boundaries only."""
    if x.grid != op.grid:
        raise GridMismatchError("field is bound to a different grid")
    return Field(x.grid, op.fused_apply_flat(alpha, beta, x.values))


def apply_affine_split(op: StencilOperator, u: Field) -> tuple[Field, Field]:
    """Split A u = A_hom u + b for Dirichlet-function boundaries.

    A_hom is the homogeneous-Dirichlet operator and b the (u-independent)
    boundary contribution; precomputing b once is the alternative to the
    inline boundary evaluation done by apply().
    """
    if op.bc.kind != "function":
        raise BoundaryKindError("apply_affine_split requires a Dirichlet-function boundary")
    if u.grid != op.grid:
        raise GridMismatchError("field is bound to a different grid")
    hom = Field(u.grid, _fused_flat(homogeneous_part(op), 1.0, 0.0, u.values, faces=None))
    zero = zeros_field(op.grid, kind=u.kind)
    faces = boundary_faces(op, u.values.dtype)
    b = Field(u.grid, _fused_flat(op, 1.0, 0.0, zero.values, faces))
    return hom, b


def homogeneous_part(op: StencilOperator) -> StencilOperator:
    """The linear operator underlying a Dirichlet-function stencil."""
    return StencilOperator(
        op.grid, BoundaryCondition.homogeneous(), op.coeff, op.traversal, op.tile, op.backend
    )


def boundary_source_field(op: StencilOperator, kind: str = "f64") -> Field:
    """The constant vector b = A(0) of a Dirichlet-function operator."""
    if op.bc.kind != "function":
        raise BoundaryKindError("boundary source requires a Dirichlet-function boundary")
    zero = zeros_field(op.grid, kind=kind)
    faces = boundary_faces(op, zero.values.dtype)
    return Field(op.grid, _fused_flat(op, 1.0, 0.0, zero.values, faces))


def gershgorin_bounds(op: StencilOperator) -> tuple[float, float]:
    """Exact Gershgorin interval of the (homogeneous/periodic) stencil matrix.

    Row centers and radii are computed analytically from the neighbor counts,
    scaled by the coefficient at the output point when one is present.
    """
    if op.bc.kind == "function":
        raise BoundaryKindError("spectral bounds are defined for the linear operator")
    g = op.grid
    wx, wy, wz = op.weights()
    center = 2.0 * (wx + wy + wz)

    def counts(n: int, periodic: bool) -> np.ndarray:
        c = np.full(n, 2.0)
        if not periodic and n >= 2:
            c[0] = 1.0
            c[-1] = 1.0
        return c

    periodic = op.bc.kind == "none"
    ex = counts(g.nx, periodic)
    ey = counts(g.ny, periodic)
    ez = counts(g.nz, periodic)
    radius = (
        wx * ex[None, None, :]
        + wy * ey[None, :, None]
        + wz * ez[:, None, None]
    )
    d = op.coeff_values("f64")
    if d is None:
        return float(np.min(center - radius)), float(np.max(center + radius))
    lo = np.min(d * (center - radius))
    hi = np.max(d * (center + radius))
    return float(lo), float(hi)
