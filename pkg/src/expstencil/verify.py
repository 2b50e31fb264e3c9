"""On-demand verification suites behind the `verify` CLI command.

Each check pits one implementation path against an independent route:
stencil kernels against the assembled matrix, Newton-Leja matrix functions
against dense eigendecompositions, partitioned applies against single-domain
runs (bitwise), and the time stepper against its first-order convergence
rate on a manufactured problem.
"""

from __future__ import annotations

from math import cos, log2, pi
from typing import Callable, Optional

import numpy as np

from .decomp import PartitionedStencil, make_partition
from .expr import parse_expression
from .grid import Field, Grid3D, eval_on_grid
from .integrator import SemilinearProblem, StepperConfig, combustion_g, integrate
from .matfunc import gershgorin_interval, make_interpolant, newton_apply
from .sparse import assemble_stencil, spmv
from .stencil import BoundaryCondition, StencilOperator, apply


def _rel_err(got: np.ndarray, ref: np.ndarray) -> float:
    denom = np.max(np.abs(ref))
    if denom == 0:
        return float(np.max(np.abs(got)))
    return float(np.max(np.abs(got - ref)) / denom)


def check_stencil_vs_assembled() -> tuple[bool, str]:
    """apply() against the assembled matrix A u + b on small grids."""
    boundaries = [
        BoundaryCondition.none(),
        BoundaryCondition.homogeneous(),
        BoundaryCondition.function(parse_expression("z*(1-z)*x*y"), "z*(1-z)*x*y"),
        BoundaryCondition.function(parse_expression("sin(pi*z)*exp(-x*y)"), "sin(pi*z)*exp(-x*y)"),
    ]
    rng = np.random.default_rng(7)
    worst = 0.0
    for dims in [(5, 5, 5), (7, 5, 3)]:
        g = Grid3D(*dims)
        u = Field(g, rng.standard_normal(g.n))
        for bc in boundaries:
            for traversal in ("naive", "tiled"):
                op = StencilOperator(g, bc, traversal=traversal, tile=(3, 2))
                a, b = assemble_stencil(op)
                ref = spmv(a, u.values) + b
                worst = max(worst, _rel_err(apply(op, u).values, ref))
    ok = worst <= 1e-13
    return ok, f"max relative error vs assembled oracle: {worst:.3e} (tol 1e-13)"


def _eig_matfunc(m: np.ndarray, target: str, scale) -> np.ndarray:
    lam, q = np.linalg.eigh(m)
    z = scale * lam
    if target == "exp":
        f = np.exp(z)
    else:
        f = np.where(z == 0, 1.0, np.expm1(z) / np.where(z == 0, 1.0, z))
    return (q * f) @ q.conj().T


def check_leja_vs_dense() -> tuple[bool, str]:
    rng = np.random.default_rng(11)
    tol = 1e-9
    worst = 0.0
    from .sparse import CsrMatrix

    for trial in range(5):
        n = 40
        q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        lam = rng.uniform(0.0, 40.0, n)
        m = (q * lam) @ q.T
        a = CsrMatrix.from_dense(m)
        v = rng.standard_normal(n)
        interval = gershgorin_interval(a)
        for target in ("exp", "phi1"):
            for h in (1e-2, 1e-1):
                interp = make_interpolant(interval, target, -h, 150, tol)
                got, _mv = newton_apply(a, interp, v)
                ref = _eig_matfunc(m, target, -h) @ v
                worst = max(worst, float(np.linalg.norm(got - ref) / np.linalg.norm(ref)))
    bound = max(1e-8, 10 * tol)
    return worst <= bound, f"max relative 2-norm error vs eigendecomposition: {worst:.3e} (tol {bound:.1e})"


def check_partition_invariance() -> tuple[bool, str]:
    g = Grid3D(17, 17, 17)
    op = StencilOperator(g, BoundaryCondition.homogeneous())
    rng = np.random.default_rng(3)
    x = rng.standard_normal(g.n)
    ref_fused = op.fused_apply_flat(2.0, 1.0, x)
    interval = gershgorin_interval(op)
    interp = make_interpolant(interval, "exp", -1e-3, 150, 1e-8)
    ref_newton, _ = newton_apply(op, interp, x)

    u0 = Field(g, np.full(g.n, 1.0))
    ref_step = None
    for m in (1, 2, 3, 4):
        part = make_partition(g, m)
        wrapper = PartitionedStencil(op, part)
        try:
            got_fused = wrapper.fused_apply_flat(2.0, 1.0, x)
            got_newton, _ = newton_apply(wrapper, interp, x)
            problem = SemilinearProblem(
                operator=wrapper,
                nonlinearity=wrapper.map_pointwise(combustion_g),
                u0=u0,
                interval=interval,
            )
            stepped = integrate(problem, StepperConfig(h=1e-4, t_end=1e-4, tol=1e-4))
        finally:
            wrapper.close()
        if not np.array_equal(got_fused, ref_fused):
            return False, f"fused apply differs bitwise at m={m}"
        if not np.array_equal(got_newton, ref_newton):
            return False, f"Newton apply differs bitwise at m={m}"
        if ref_step is None:
            ref_step = stepped.values
        elif not np.array_equal(stepped.values, ref_step):
            return False, f"combustion step differs bitwise at m={m}"
    return True, "fused apply, Newton apply and combustion step bitwise identical for m=1..4"


def check_order1() -> tuple[bool, str]:
    """Observed convergence order of the stepper on a manufactured problem."""
    n = 31
    g = Grid3D(n, 1, 1)
    op = StencilOperator(g, BoundaryCondition.homogeneous())
    dx = g.dx
    lam1 = (2.0 - 2.0 * cos(pi * dx)) / (dx * dx)  # discrete eigenvalue of sin(pi x)
    s = np.sin(pi * g.axis_coords("x"))
    t_end = 0.2

    def exact(t: float) -> np.ndarray:
        return np.exp(-t) * s

    def forcing(u: np.ndarray, t: float) -> np.ndarray:
        return u * u + (lam1 - 1.0) * np.exp(-t) * s - np.exp(-2.0 * t) * s * s

    errs = []
    for h in (1e-2, 5e-3, 2.5e-3):
        problem = SemilinearProblem(operator=op, nonlinearity=forcing, u0=exact(0.0))
        u = integrate(problem, StepperConfig(h=h, t_end=t_end, tol=1e-10))
        errs.append(float(np.max(np.abs(u - exact(t_end)))))
    orders = [log2(errs[i] / errs[i + 1]) for i in range(2)]
    ok = all(0.9 <= p <= 1.1 for p in orders)
    return ok, f"observed orders {orders[0]:.3f}, {orders[1]:.3f} (expected within [0.9, 1.1])"


CHECKS: dict[str, Callable[[], tuple[bool, str]]] = {
    "stencil": check_stencil_vs_assembled,
    "leja": check_leja_vs_dense,
    "partition": check_partition_invariance,
    "order1": check_order1,
}


def run_checks(only: Optional[list[str]] = None, inject_failure: bool = False):
    """Run the named checks (all by default); yields (name, ok, detail)."""
    names = list(CHECKS) if not only else only
    results = []
    for name in names:
        if name not in CHECKS:
            raise KeyError(f"unknown check {name!r}; known: {sorted(CHECKS)}")
        ok, detail = CHECKS[name]()
        results.append((name, ok, detail))
    if inject_failure:
        results.append(("injected-failure", False, "deliberate failure for exit-code tests"))
    return results
