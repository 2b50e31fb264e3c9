"""Command-line entry point: bench, solve-combustion, propagate, verify.

Options may come from a flat key=value config file (--config); command-line
flags win.  Exit codes: 0 success, 1 configuration error, 2 runtime or
numerical error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from . import bench as bench_mod
from .decomp import PartitionedCsr, PartitionedStencil, TransferLedger, make_partition
from .errors import ConfigError, ExpStencilError
from .expr import parse_expression
from .grid import Field, Grid3D, eval_on_grid, read_field_binary, write_field_binary
from .integrator import SemilinearProblem, StepperConfig, combustion_g, integrate
from .matfunc import apply_matfunc, gershgorin_interval
from .sparse import read_matrix_market
from .stencil import (
    BoundaryCondition,
    StencilOperator,
    boundary_source_field,
    homogeneous_part,
)
from .verify import run_checks


def _parse_grid(text: str) -> tuple[int, int, int]:
    parts = [p.strip() for p in str(text).split(",") if p.strip()]
    try:
        dims = [int(p) for p in parts]
    except ValueError:
        raise ConfigError(f"grid must be N or N,N,N, got {text!r}") from None
    if len(dims) == 1:
        dims = dims * 3
    if len(dims) != 3 or any(d < 1 for d in dims):
        raise ConfigError(f"grid must be N or N,N,N with positive sizes, got {text!r}")
    return tuple(dims)


def _parse_float(text) -> float:
    try:
        return float(text)
    except (TypeError, ValueError):
        raise ConfigError(f"expected a number, got {text!r}") from None


def _parse_int(text) -> int:
    try:
        return int(text)
    except (TypeError, ValueError):
        raise ConfigError(f"expected an integer, got {text!r}") from None


def _parse_list(text) -> list[str]:
    return [p.strip() for p in str(text).split(",") if p.strip()]


def _parse_bool(text) -> bool:
    s = str(text).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"expected a boolean, got {text!r}")


def _parse_str(text) -> str:
    return str(text)


@dataclass
class Option:
    name: str
    conv: Callable
    default: object
    help: str
    flag: bool = False  # presence-only flag


COMMANDS: dict[str, list[Option]] = {
    "bench": [
        Option("grid", _parse_grid, (64, 64, 64), "grid size N or N,N,N"),
        Option("kernel", _parse_list, ["stencil_fused"], "comma list of kernels"),
        Option("boundary", _parse_str, "homogeneous", "none|homogeneous|EXPR"),
        Option("method", _parse_list, ["naive"], "comma list: naive,tiled"),
        Option("precision", _parse_list, ["f64"], "comma list: f32,f64"),
        Option("backend", _parse_list, ["auto"], "comma list: auto,compiled,python"),
        Option("workers", _parse_int, 1, "worker count for partitioned kernels"),
        Option("reps", _parse_int, 5, "timed repetitions (>= 3)"),
        Option("warmup", _parse_int, 2, "untimed warmup repetitions"),
        Option("out", _parse_str, None, "output path (default: stdout)"),
        Option("json", _parse_bool, False, "emit JSON instead of CSV", flag=True),
    ],
    "solve-combustion": [
        Option("grid", _parse_grid, (33, 33, 33), "grid size N or N,N,N"),
        Option("h", _parse_float, None, "time step (required)"),
        Option("t-end", _parse_float, None, "final time (required)"),
        Option("tol", _parse_float, 1e-4, "Leja truncation tolerance"),
        Option("max-degree", _parse_int, 150, "maximum interpolation degree"),
        Option("boundary", _parse_str, "homogeneous", "homogeneous|EXPR"),
        Option("u0", _parse_str, "1", "initial condition expression"),
        Option("method", _parse_str, "naive", "stencil traversal: naive|tiled"),
        Option("precision", _parse_str, "f64", "f32|f64"),
        Option("workers", _parse_int, 1, "slab worker count"),
        Option("out", _parse_str, "combustion_final.field", "final field (binary)"),
        Option("log", _parse_str, None, "per-step CSV (default: <out>.steps.csv)"),
        Option("ledger-out", _parse_str, None, "halo transfer ledger CSV"),
    ],
    "propagate": [
        Option("matrix", _parse_str, None, "Matrix Market file (required)"),
        Option("state", _parse_str, None, "initial state field (binary); default: uniform"),
        Option("t-end", _parse_float, None, "propagation time (required)"),
        Option("tol", _parse_float, 1e-8, "Leja truncation tolerance"),
        Option("max-degree", _parse_int, 300, "maximum interpolation degree"),
        Option("workers", _parse_int, 1, "row-block worker count"),
        Option("out", _parse_str, "state_final.field", "final state (binary)"),
        Option("ledger-out", _parse_str, None, "transfer ledger CSV"),
    ],
    "verify": [
        Option("only", _parse_list, None, "subset of checks (comma list)"),
        Option("inject-failure", _parse_bool, False, "force one failing check", flag=True),
    ],
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse usage errors are config errors (exit 1)
        raise ConfigError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="expstencil", description=__doc__)
    sub = parser.add_subparsers(dest="command")
    for cmd, options in COMMANDS.items():
        p = sub.add_parser(cmd)
        p.add_argument("--config", default=None, help="flat key=value config file")
        for opt in options:
            if opt.flag:
                p.add_argument(f"--{opt.name}", nargs="?", const="true", default=None,
                               help=opt.help)
            else:
                p.add_argument(f"--{opt.name}", default=None, help=opt.help)
    return parser


def _load_config_file(path: str) -> dict[str, str]:
    values = {}
    try:
        with open(path) as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
                key, _, val = line.partition("=")
                values[key.strip().replace("-", "_")] = val.strip()
    except OSError as err:
        raise ConfigError(f"cannot read config file: {err}") from None
    return values


def _resolve_options(cmd: str, args: argparse.Namespace) -> dict:
    options = COMMANDS[cmd]
    known = {opt.name.replace("-", "_"): opt for opt in options}
    file_values = _load_config_file(args.config) if args.config else {}
    for key in file_values:
        if key not in known:
            raise ConfigError(f"unknown config key {key!r} for command {cmd!r}")
    resolved = {}
    for key, opt in known.items():
        cli_value = getattr(args, key)
        if cli_value is not None:
            resolved[key] = opt.conv(cli_value)
        elif key in file_values:
            resolved[key] = opt.conv(file_values[key])
        else:
            resolved[key] = opt.default
    return resolved


def _require(opts: dict, *keys: str) -> None:
    for key in keys:
        if opts[key] is None:
            raise ConfigError(f"--{key.replace('_', '-')} is required")


def cmd_bench(opts: dict) -> int:
    if opts["reps"] < 3:
        raise ConfigError("reps must be >= 3")
    results = []
    for kernel in opts["kernel"]:
        for method in opts["method"]:
            for precision in opts["precision"]:
                for backend in opts["backend"]:
                    try:
                        spec = bench_mod.BenchSpec(
                            kernel=kernel,
                            grid=opts["grid"],
                            kind=precision,
                            boundary=opts["boundary"],
                            method=method,
                            reps=opts["reps"],
                            warmup=opts["warmup"],
                            workers=opts["workers"],
                            backend=backend,
                        )
                    except ValueError as err:
                        raise ConfigError(str(err)) from None
                    results.append(bench_mod.run_bench(spec))
    if opts["json"]:
        text = bench_mod.report_json(results, opts["out"])
        if opts["out"] is None:
            print(text)
    elif opts["out"] is not None:
        bench_mod.report_csv(results, opts["out"])
    else:
        print(",".join(bench_mod.CSV_COLUMNS))
        for row in bench_mod.report_rows(results):
            print(",".join(bench_mod._format_cell(row[c]) for c in bench_mod.CSV_COLUMNS))
    return 0


def cmd_solve_combustion(opts: dict) -> int:
    _require(opts, "h", "t_end")
    if opts["h"] <= 0 or opts["t_end"] <= 0:
        raise ConfigError("h and t-end must be positive")
    if opts["h"] > opts["t_end"]:
        raise ConfigError("h must not exceed t-end")
    if opts["tol"] <= 0:
        raise ConfigError("tol must be positive")
    if opts["workers"] < 1:
        raise ConfigError("workers must be >= 1")
    if opts["precision"] not in ("f32", "f64"):
        raise ConfigError("precision must be f32 or f64")

    grid = Grid3D(*opts["grid"])
    try:
        bc = BoundaryCondition.from_spec(opts["boundary"])
        u0_expr = parse_expression(opts["u0"])
    except ExpStencilError as err:
        raise ConfigError(str(err)) from None
    if bc.kind == "none":
        raise ConfigError("the integrator needs homogeneous or Dirichlet-function boundaries")

    op = StencilOperator(grid, bc, traversal=opts["method"])
    boundary_source = None
    if bc.kind == "function":
        b = boundary_source_field(op, kind=opts["precision"])
        boundary_source = b.values
        op = homogeneous_part(op)

    u0 = eval_on_grid(grid, u0_expr, kind=opts["precision"])
    ledger = TransferLedger()
    wrapper = None
    nonlinearity = combustion_g
    operator = op
    if opts["workers"] > 1:
        wrapper = PartitionedStencil(op, make_partition(grid, opts["workers"]), ledger)
        operator = wrapper
        nonlinearity = wrapper.map_pointwise(combustion_g)

    problem = SemilinearProblem(
        operator=operator,
        nonlinearity=nonlinearity,
        u0=u0,
        boundary_source=boundary_source,
    )
    cfg = StepperConfig(
        h=opts["h"], t_end=opts["t_end"], tol=opts["tol"], max_degree=opts["max_degree"]
    )

    log_path = opts["log"] or f"{opts['out']}.steps.csv"
    totals = {"matvecs": 0}
    with open(log_path, "w") as log:
        log.write("step,t,matvecs,max_norm\n")

        def observer(step, t, matvecs, max_norm):
            totals["matvecs"] += matvecs
            log.write(f"{step},{t!r},{matvecs},{max_norm!r}\n")

        try:
            final = integrate(problem, cfg, observer)
        finally:
            if wrapper is not None:
                wrapper.close()
    write_field_binary(final, opts["out"])
    print(f"steps completed: total matvecs {totals['matvecs']}")
    print(f"final field written to {opts['out']}; step log in {log_path}")
    if opts["workers"] > 1:
        print(f"halo transfer: {ledger.scalars_total} scalars / {ledger.bytes_total} bytes")
    if opts["ledger_out"]:
        ledger.to_csv(opts["ledger_out"])
    return 0


def cmd_propagate(opts: dict) -> int:
    _require(opts, "matrix", "t_end")
    if opts["t_end"] <= 0:
        raise ConfigError("t-end must be positive")
    if opts["tol"] <= 0:
        raise ConfigError("tol must be positive")
    if opts["workers"] < 1:
        raise ConfigError("workers must be >= 1")

    h_matrix = read_matrix_market(opts["matrix"])
    if h_matrix.nrows != h_matrix.ncols:
        raise ConfigError("propagation requires a square (Hermitian) matrix")
    n = h_matrix.nrows
    if opts["state"]:
        psi0 = read_field_binary(opts["state"]).values.astype(np.complex128)
        if psi0.shape != (n,):
            raise ConfigError(f"state length {psi0.shape[0]} does not match matrix n={n}")
    else:
        psi0 = np.full(n, 1.0 / np.sqrt(n), dtype=np.complex128)

    interval = gershgorin_interval(h_matrix)
    ledger = TransferLedger()
    operator = h_matrix
    wrapper = None
    if opts["workers"] > 1:
        wrapper = PartitionedCsr(h_matrix, make_partition(h_matrix, opts["workers"]), ledger)
        operator = wrapper

    try:
        # Hermitian generator H propagated as d/dt psi = -i H psi
        psi, stats = apply_matfunc(
            operator,
            psi0,
            "exp",
            scale=-1j * opts["t_end"],
            interval=interval,
            tol=opts["tol"],
            max_degree=opts["max_degree"],
        )
    finally:
        if wrapper is not None:
            wrapper.close()

    norm0 = float(np.linalg.norm(psi0))
    norm1 = float(np.linalg.norm(psi))
    drift = abs(norm1 - norm0)
    write_field_binary(Field(Grid3D(n, 1, 1), psi), opts["out"])
    print(f"matvecs: {stats.matvecs} (degree {stats.degree}, halvings {stats.halvings})")
    print(f"norm drift |norm(psi_t) - norm(psi_0)| = {drift:.3e}")
    if opts["workers"] > 1:
        print(f"transfer: {ledger.scalars_total} scalars / {ledger.bytes_total} bytes")
    if opts["ledger_out"]:
        ledger.to_csv(opts["ledger_out"])
    return 0


def cmd_verify(opts: dict) -> int:
    results = run_checks(only=opts["only"], inject_failure=opts["inject_failure"])
    all_ok = True
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        all_ok = all_ok and ok
    return 0 if all_ok else 2


_HANDLERS = {
    "bench": cmd_bench,
    "solve-combustion": cmd_solve_combustion,
    "propagate": cmd_propagate,
    "verify": cmd_verify,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if not args.command:
            raise ConfigError("a command is required: " + ", ".join(COMMANDS))
        opts = _resolve_options(args.command, args)
        handler = _HANDLERS[args.command]
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    try:
        return handler(opts)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 1
    except (ExpStencilError, OverflowError, ValueError, KeyError, OSError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
