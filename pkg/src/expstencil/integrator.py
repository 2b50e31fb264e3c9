"""Exponential Euler time stepping for semilinear problems du/dt + A u = g(u).

One step advances

    u_{n+1} = exp(-h A) u_n + h * phi1(-h A) g(u_n)

with both matrix functions evaluated by Newton-Leja interpolation sharing one
spectral interval.  Inhomogeneous Dirichlet data enters as a constant source
folded into the nonlinearity (g - b), keeping A strictly linear.  The step
size is fixed by the caller; scale-halving inside the matrix-function layer
is only a convergence rescue, not adaptivity.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import ceil
from typing import Callable, Optional, Union

import numpy as np

from . import _kernels
from .errors import ConvergenceError, DomainError
from .grid import Field
from .matfunc import (
    MatfuncStats,
    SpectralInterval,
    apply_matfunc,
    gershgorin_interval,
    make_interpolant,
    newton_apply,
)


def combustion_g(u: Union[Field, np.ndarray], backend: str = "auto"):
    """Pointwise combustion nonlinearity (2 - u)/4 * exp(20 (1 - 1/u)).

    Defined for u > 0 only; the first offending index is reported otherwise.
    """
    values = u.values if isinstance(u, Field) else np.asarray(u)
    if values.dtype not in (np.float32, np.float64):
        raise DomainError("combustion nonlinearity is real-valued")
    nonpos = values <= 0.0
    if nonpos.any():
        bad = int(np.argmax(nonpos))
        raise DomainError(
            f"combustion nonlinearity undefined at index {bad} (u={values[bad]!r} <= 0)",
            index=bad,
        )
    out = np.empty_like(values)
    _kernels.get_kernels(backend).combustion_pointwise(values, out)
    if isinstance(u, Field):
        return Field(u.grid, out)
    return out


NONLINEARITIES: dict[str, Optional[Callable]] = {
    "zero": None,
    "combustion": combustion_g,
}


def get_nonlinearity(name: str):
    try:
        return NONLINEARITIES[name]
    except KeyError:
        raise KeyError(
            f"unknown nonlinearity {name!r}; registered: {sorted(NONLINEARITIES)}"
        ) from None


@dataclass
class SemilinearProblem:
    """Operator, nonlinearity and initial state of du/dt + A u = g(u).

    ``operator`` is anything with fused_apply_flat (stencil, CSR, or their
    partitioned wrappers).  ``nonlinearity`` maps a value array to an array
    and may optionally accept the time as a second argument;
    ``boundary_source`` is the constant b from an affine boundary split and
    is subtracted from g.
    """

    operator: object
    nonlinearity: Optional[Callable] = None
    u0: Union[Field, np.ndarray, None] = None
    boundary_source: Optional[np.ndarray] = None
    interval: Optional[SpectralInterval] = None

    def __post_init__(self):
        if self.u0 is None:
            raise ValueError("initial state u0 is required")
        vals = self.initial_values()
        if self.boundary_source is not None:
            self.boundary_source = np.asarray(self.boundary_source)
            if self.boundary_source.shape != vals.shape:
                raise ValueError("boundary_source length does not match u0")
        if self.interval is None:
            self.interval = gershgorin_interval(self.operator)
        self._g_takes_time: Optional[bool] = None

    def initial_values(self) -> np.ndarray:
        return self.u0.values if isinstance(self.u0, Field) else np.asarray(self.u0)

    def forcing(self, u: np.ndarray, t: float) -> Optional[np.ndarray]:
        """g(u[, t]) - b, or None when the problem is purely linear."""
        g = self.nonlinearity
        if g is None:
            if self.boundary_source is None:
                return None
            return -self.boundary_source
        if self._g_takes_time is None:
            try:
                gu = g(u, t)
                self._g_takes_time = True
            except TypeError:
                gu = g(u)
                self._g_takes_time = False
        else:
            gu = g(u, t) if self._g_takes_time else g(u)
        gu = np.asarray(gu)
        if self.boundary_source is not None:
            gu = gu - self.boundary_source
        return gu


@dataclass
class StepperConfig:
    h: float
    t_end: float
    tol: float = 1e-8
    max_degree: int = 150

    def __post_init__(self):
        if not (self.h > 0):
            raise ValueError("time step h must be positive")
        if self.h > self.t_end:
            raise ValueError("h must not exceed t_end")
        if not (self.tol > 0):
            raise ValueError("tolerance must be positive")
        if self.max_degree < 1:
            raise ValueError("max_degree must be >= 1")


@dataclass
class StepStats:
    matvecs: int = 0
    matvecs_exp: int = 0
    matvecs_phi1: int = 0
    degree_exp: int = 0
    degree_phi1: int = 0
    halvings: int = 0


class _StepWorkspace:
    """Interpolants for a fixed (A, h); reused across the steps of a run."""

    def __init__(self, problem: SemilinearProblem, h: float, tol: float, max_degree: int):
        self.problem = problem
        self.h = h
        self.tol = tol
        self.max_degree = max_degree
        iv = problem.interval
        self.exp_interp = make_interpolant(iv, "exp", -h, max_degree, tol)
        self.phi_interp = make_interpolant(iv, "phi1", -h, max_degree, tol)

    def _run(self, target: str, interp, v: np.ndarray) -> tuple[np.ndarray, MatfuncStats]:
        a = self.problem.operator
        try:
            y, mv = newton_apply(a, interp, v, self.tol)
            return y, MatfuncStats(matvecs=mv, degree=mv)
        except ConvergenceError:
            # rescue: recompute with scale halving
            return apply_matfunc(
                a, v, target, -self.h, self.problem.interval, self.tol, self.max_degree
            )

    def step(self, u: np.ndarray, t: float) -> tuple[np.ndarray, StepStats]:
        stats = StepStats()
        y, st = self._run("exp", self.exp_interp, u)
        stats.matvecs_exp, stats.degree_exp = st.matvecs, st.degree
        stats.halvings = max(stats.halvings, st.halvings)
        gn = self.problem.forcing(u, t)
        if gn is not None:
            z, st2 = self._run("phi1", self.phi_interp, gn)
            stats.matvecs_phi1, stats.degree_phi1 = st2.matvecs, st2.degree
            stats.halvings = max(stats.halvings, st2.halvings)
            y = y + self.h * z
        stats.matvecs = stats.matvecs_exp + stats.matvecs_phi1
        return y, stats


def exponential_euler_step(
    problem: SemilinearProblem,
    u_n: Union[Field, np.ndarray],
    h: float,
    tol: float,
    max_degree: int = 150,
    t: float = 0.0,
):
    """One exponential Euler step; returns (u_{n+1}, StepStats)."""
    values = u_n.values if isinstance(u_n, Field) else np.asarray(u_n)
    ws = _StepWorkspace(problem, h, tol, max_degree)
    out, stats = ws.step(values, t)
    if isinstance(u_n, Field):
        return Field(u_n.grid, out), stats
    return out, stats


def integrate(
    problem: SemilinearProblem,
    cfg: StepperConfig,
    observer: Optional[Callable] = None,
):
    """Run exponential Euler up to t_end; the last step is shortened to land
    on t_end exactly.  The observer receives (step, t, matvecs, max_norm)
    after each step on the coordinating thread."""
    u = problem.initial_values().copy()
    n_steps = max(1, ceil(cfg.t_end / cfg.h - 1e-12))
    ws = _StepWorkspace(problem, cfg.h, cfg.tol, cfg.max_degree)
    ws_last = None
    t = 0.0
    for k in range(n_steps):
        last = k == n_steps - 1
        h_k = cfg.t_end - (n_steps - 1) * cfg.h if last else cfg.h
        try:
            if last and abs(h_k - cfg.h) > 1e-15 * cfg.h:
                if ws_last is None:
                    ws_last = _StepWorkspace(problem, h_k, cfg.tol, cfg.max_degree)
                u, stats = ws_last.step(u, t)
            else:
                u, stats = ws.step(u, t)
        except (ConvergenceError, DomainError) as err:
            raise type(err)(f"step {k + 1} (t={t:.6g}): {err}") from err
        t = cfg.t_end if last else t + cfg.h
        if observer is not None:
            observer(k + 1, t, stats.matvecs, float(np.max(np.abs(u))))
    if isinstance(problem.u0, Field):
        return Field(problem.u0.grid, u)
    return u
