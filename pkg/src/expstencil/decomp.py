"""Slab/row-block decomposition across an in-process worker pool.

Workers are threads over a shared address space, but slabs interact only
through explicit halo buffers filled in an exchange phase that completes
before any compute starts (two-phase supersteps).  The TransferLedger counts
every scalar copied between workers, which makes the totals comparable to
inter-device transfer counts: a stencil apply moves 2 (m-1) nx ny boundary
plane values, a dense-coupling CSR apply moves the worst case (m-1) n.

Because each output value is computed with the same expression regardless of
which worker owns it, results are bitwise identical for every worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import matfunc, stencil as _stencil
from .errors import BoundaryKindError, GridMismatchError
from .grid import Field, Grid3D
from .sparse import CsrMatrix
from .stencil import StencilOperator, boundary_faces, fused_slab

MODES = ("stencil_slab", "csr_rows")


@dataclass(frozen=True)
class Partition:
    """Disjoint contiguous ranges covering 0..extent (z-planes or rows)."""

    mode: str
    m: int
    bounds: tuple[int, ...]

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if len(self.bounds) != self.m + 1 or self.bounds[0] != 0:
            raise ValueError("bounds must have length m+1 and start at 0")
        if any(b <= a for a, b in zip(self.bounds, self.bounds[1:])):
            raise ValueError("every slab must be nonempty")

    @property
    def extent(self) -> int:
        return self.bounds[-1]

    def ranges(self) -> list[tuple[int, int]]:
        return list(zip(self.bounds[:-1], self.bounds[1:]))

    def sizes(self) -> tuple[int, ...]:
        return tuple(b - a for a, b in self.ranges())


def make_partition(target, m: int, mode: Optional[str] = None) -> Partition:
    """Balanced partition (sizes differ by at most one) of a grid's z-planes
    or a matrix's rows across m workers."""
    if isinstance(target, Grid3D):
        extent = target.nz
        mode = mode or "stencil_slab"
    elif isinstance(target, StencilOperator):
        extent = target.grid.nz
        mode = mode or "stencil_slab"
    elif isinstance(target, CsrMatrix):
        extent = target.nrows
        mode = mode or "csr_rows"
    else:
        extent = int(target)
        if mode is None:
            raise ValueError("mode is required when partitioning a plain extent")
    if m < 1:
        raise ValueError("worker count must be >= 1")
    if m > extent:
        raise ValueError(f"cannot split {extent} planes/rows across {m} workers")
    base, rem = divmod(extent, m)
    sizes = [base + 1] * rem + [base] * (m - rem)
    bounds = [0]
    for s in sizes:
        bounds.append(bounds[-1] + s)
    return Partition(mode, m, tuple(bounds))


class TransferLedger:
    """Per-apply counts of scalar values copied between workers."""

    def __init__(self):
        self.apply_count = 0
        self.entries: list[tuple[int, int, int]] = []  # (apply idx, scalars, bytes)

    def record(self, scalars: int, itemsize: int) -> None:
        self.apply_count += 1
        self.entries.append((self.apply_count, int(scalars), int(scalars) * itemsize))

    @property
    def scalars_total(self) -> int:
        return sum(e[1] for e in self.entries)

    @property
    def bytes_total(self) -> int:
        return sum(e[2] for e in self.entries)

    def last_scalars(self) -> int:
        return self.entries[-1][1] if self.entries else 0

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("apply_index,scalars_moved,cumulative_bytes\n")
            cum = 0
            for idx, scalars, nbytes in self.entries:
                cum += nbytes
                fh.write(f"{idx},{scalars},{cum}\n")

    def __repr__(self):
        return f"TransferLedger(applies={self.apply_count}, scalars={self.scalars_total})"


class WorkerPool:
    """Thread pool with a serial fast path for a single worker."""

    def __init__(self, m: int):
        self.m = m
        self._pool = ThreadPoolExecutor(max_workers=m) if m > 1 else None

    def run(self, fn, items) -> None:
        if self._pool is None:
            for it in items:
                fn(it)
            return
        # list() joins every task: the barrier between supersteps
        list(self._pool.map(fn, items))

    def close(self):
        if self._pool is not None:
            self._pool.shutdown()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


class PartitionedStencil:
    """Stencil operator computed slab-by-slab with explicit halo exchange.

    Supports linear boundaries for fused products; Dirichlet-function
    boundaries are handled by apply_field (plain A u).  Periodic wraparound is
    restricted to a single worker: with more, the wrap seam would move extra
    planes and the ledger formula 2 (m-1) nx ny would no longer hold.
    """

    def __init__(
        self,
        op: StencilOperator,
        partition: Partition,
        ledger: Optional[TransferLedger] = None,
        pool: Optional[WorkerPool] = None,
    ):
        if partition.mode != "stencil_slab":
            raise ValueError("PartitionedStencil needs a stencil_slab partition")
        if partition.extent != op.grid.nz:
            raise GridMismatchError("partition does not cover the grid's z-planes")
        if op.bc.kind == "none" and partition.m > 1:
            raise BoundaryKindError(
                "periodic wraparound is not supported across slab seams"
            )
        self.base_operator = op
        self.partition = partition
        self.ledger = ledger if ledger is not None else TransferLedger()
        self.pool = pool if pool is not None else WorkerPool(partition.m)
        self._owns_pool = pool is None

    @property
    def n(self) -> int:
        return self.base_operator.n

    @property
    def grid(self):
        return self.base_operator.grid

    def close(self):
        if self._owns_pool:
            self.pool.close()

    def _exchange(self, x3: np.ndarray) -> list[tuple[Optional[np.ndarray], Optional[np.ndarray]]]:
        """Copy seam planes into contiguous per-worker halo buffers (counted)."""
        g = self.grid
        halos: list[tuple[Optional[np.ndarray], Optional[np.ndarray]]] = []
        moved = 0
        for z_lo, z_hi in self.partition.ranges():
            lo = hi = None
            if z_lo > 0:
                lo = np.empty((g.ny, g.nx), dtype=x3.dtype)
                np.copyto(lo, x3[z_lo - 1])
                moved += lo.size
            if z_hi < g.nz:
                hi = np.empty((g.ny, g.nx), dtype=x3.dtype)
                np.copyto(hi, x3[z_hi])
                moved += hi.size
            halos.append((lo, hi))
        self.ledger.record(moved, x3.dtype.itemsize)
        return halos

    def _run(self, alpha, beta, x: np.ndarray, faces=None) -> np.ndarray:
        g = self.grid
        if x.shape != (g.n,):
            raise GridMismatchError(f"vector length {x.shape} does not match n={g.n}")
        if np.iscomplexobj(x):
            xr = np.ascontiguousarray(x.real)
            xi = np.ascontiguousarray(x.imag)
            lr = self._run(1.0, 0.0, xr, faces)
            li = self._run(1.0, 0.0, xi, faces)
            return alpha * (lr + 1j * li) + beta * x
        x3 = x.reshape(g.shape)
        out = np.empty_like(x)
        out3 = out.reshape(g.shape)
        halos = self._exchange(x3)  # phase 1: exchange, then barrier
        op = self.base_operator

        def compute(w: int) -> None:  # phase 2: slab-local compute
            z_lo, z_hi = self.partition.bounds[w], self.partition.bounds[w + 1]
            lo, hi = halos[w]
            fused_slab(
                op, alpha, beta, x3[z_lo:z_hi], out3[z_lo:z_hi],
                halo_lo=lo, halo_hi=hi, z0=z_lo, faces=faces,
            )

        self.pool.run(compute, range(self.partition.m))
        return out

    def fused_apply_flat(self, alpha, beta, x: np.ndarray) -> np.ndarray:
        if self.base_operator.bc.kind == "function":
            raise BoundaryKindError(
                "fused apply needs a linear operator; split the boundary first"
            )
        return self._run(alpha, beta, x)

    def apply_field(self, u: Field) -> Field:
        op = self.base_operator
        if u.grid != op.grid:
            raise GridMismatchError("field is bound to a different grid")
        faces = None
        if op.bc.kind == "function":
            faces = boundary_faces(op, u.values.dtype)
        return Field(u.grid, self._run(1.0, 0.0, u.values, faces))

    def map_pointwise(self, fn) -> "callable":
        """Wrap a pointwise map so it runs slab-locally on the worker pool."""

        def run(u: np.ndarray, *args) -> np.ndarray:
            u3 = u.reshape(self.grid.shape)
            out = np.empty_like(u)
            out3 = out.reshape(self.grid.shape)

            def compute(w: int) -> None:
                z_lo, z_hi = self.partition.bounds[w], self.partition.bounds[w + 1]
                block = fn(u3[z_lo:z_hi].reshape(-1), *args)
                out3[z_lo:z_hi] = np.asarray(block).reshape(z_hi - z_lo, *self.grid.shape[1:])

            self.pool.run(compute, range(self.partition.m))
            return out

        return run


class PartitionedCsr:
    """Row-block CSR apply in dense-coupling mode.

    Every worker receives a private copy of the remote part of x before
    computing its rows, so each apply moves (m-1) n scalars: the worst case
    of a system that couples every degree of freedom with every other one.
    """

    def __init__(
        self,
        a: CsrMatrix,
        partition: Partition,
        ledger: Optional[TransferLedger] = None,
        pool: Optional[WorkerPool] = None,
    ):
        if partition.mode != "csr_rows":
            raise ValueError("PartitionedCsr needs a csr_rows partition")
        if partition.extent != a.nrows:
            raise ValueError("partition does not cover the matrix rows")
        if a.nrows != a.ncols:
            raise ValueError("partitioned apply requires a square matrix")
        self.base_operator = a
        self.partition = partition
        self.ledger = ledger if ledger is not None else TransferLedger()
        self.pool = pool if pool is not None else WorkerPool(partition.m)
        self._owns_pool = pool is None

    @property
    def n(self) -> int:
        return self.base_operator.nrows

    def close(self):
        if self._owns_pool:
            self.pool.close()

    def _run(self, alpha, beta, x: np.ndarray, use_beta: bool) -> np.ndarray:
        from . import _kernels
        from .sparse import _COMPILED_COMBOS

        a = self.base_operator
        if x.shape != (a.ncols,):
            raise ValueError(f"vector length {x.shape} does not match n={a.ncols}")
        out_dtype = np.result_type(a.vals.dtype, x.dtype, type(alpha), type(beta))
        if out_dtype == np.complex64:
            out_dtype = np.dtype(np.complex128)
        xx = np.ascontiguousarray(x, dtype=out_dtype)
        y = np.empty(a.nrows, dtype=out_dtype)
        kern = _kernels.get_kernels("auto")
        if kern.backend_name == "compiled" and (a.vals.dtype, out_dtype) not in _COMPILED_COMBOS:
            kern = _kernels.get_kernels("python")

        # phase 1: each worker materializes its private full copy of x;
        # only the remote part counts as moved.
        locals_ = [xx.copy() for _ in range(self.partition.m)]
        moved = (self.partition.m - 1) * a.ncols
        self.ledger.record(moved, xx.dtype.itemsize)

        def compute(w: int) -> None:
            r_lo, r_hi = self.partition.bounds[w], self.partition.bounds[w + 1]
            kern.csr_fused_rows(
                r_lo, r_hi, a.row_ptr, a.col_idx, a.vals, locals_[w], y, alpha, beta, use_beta
            )

        self.pool.run(compute, range(self.partition.m))
        return y

    def apply_flat(self, x: np.ndarray) -> np.ndarray:
        return self._run(1.0, 0.0, np.asarray(x), use_beta=False)

    def fused_apply_flat(self, alpha, beta, x: np.ndarray) -> np.ndarray:
        return self._run(alpha, beta, np.asarray(x), use_beta=True)


def partitioned_operator(op, partition: Partition, ledger=None, pool=None):
    if isinstance(op, StencilOperator):
        return PartitionedStencil(op, partition, ledger, pool)
    if isinstance(op, CsrMatrix):
        return PartitionedCsr(op, partition, ledger, pool)
    raise TypeError(f"cannot partition {type(op).__name__}")


def partitioned_apply(op, partition: Partition, x, ledger=None, pool=None, alpha=1.0, beta=0.0):
    """One (alpha A + beta I) x through the partitioned path; returns the vector.

    Convenience wrapper over PartitionedStencil/PartitionedCsr for one-shot
    use; long runs should hold on to the wrapper to reuse its worker pool.
    """
    wrapper = partitioned_operator(op, partition, ledger, pool)
    try:
        if isinstance(wrapper, PartitionedStencil) and op.bc.kind == "function":
            if alpha != 1.0 or beta != 0.0:
                raise BoundaryKindError("affine boundaries only support the plain apply")
            faces = boundary_faces(op, np.asarray(x).dtype)
            return wrapper._run(1.0, 0.0, np.asarray(x), faces)
        return wrapper.fused_apply_flat(alpha, beta, np.asarray(x))
    finally:
        wrapper.close()


def partitioned_newton_apply(
    op,
    partition: Partition,
    interp: matfunc.LejaInterpolant,
    v: np.ndarray,
    tol: Optional[float] = None,
    ledger: Optional[TransferLedger] = None,
    pool: Optional[WorkerPool] = None,
):
    """newton_apply with every operator product routed through the partition."""
    wrapper = partitioned_operator(op, partition, ledger, pool)
    try:
        return matfunc.newton_apply(wrapper, interp, v, tol)
    finally:
        wrapper.close()
