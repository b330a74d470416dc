"""Command-line front end.

Subcommands: validate, frac-apply, fiber-report, solve, sweep, oracle.  Exit
codes: 0 success, 1 mathematical failure (a hypothesis clause or solution
assertion failed), 2 usage or configuration error.  All outputs are JSON or
CSV and byte-stable for a fixed config and seed; the PSINEHARI_SEED variable
overrides the configured seed without editing the file.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from .config import RunConfig, load_config
from .domain import Field, read_field_csv, validate_params, write_field_csv
from .errors import (
    ConfigError,
    NoTwoRootStructureError,
    PsinehariError,
    TwoSolutionFailure,
    UnknownQuantityError,
)
from .fracops import (
    apply,
    assemble_hilfer_derivative,
    assemble_rl_integral,
    build_operator_set,
    operator_to_csv,
)
from .nehari import NehariTolerances, fiber_w, fiber_w1, fiber_w2, find_roots, phi, phi_hat
from .oracle import OracleConfig, dense_reference, registered_quantities
from .solver import SolverOptions, lambda_sweep, two_solution_solve
from .spaces import norm_bundle

__all__ = ["main", "entry", "build_parser"]

_SWEEP_COLUMNS = [
    "lambda",
    "m_plus",
    "m_minus",
    "res_plus",
    "res_minus",
    "iters_plus",
    "iters_minus",
    "converged_plus",
    "converged_minus",
    "error",
]


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="psinehari",
        description="Discrete double-phase singular problems with fractional derivatives.",
    )
    parser.add_argument("--config", help="JSON config file (defaults apply when omitted)")
    parser.add_argument("--output", help="output directory (overrides the config)")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("validate", help="check the hypothesis clauses of the config")

    fa = sub.add_parser("frac-apply", help="apply a fractional operator to a field CSV")
    fa.add_argument("--side", choices=["left", "right"], default="left")
    fa.add_argument("--alpha", type=float, help="order (default: config problem alpha)")
    fa.add_argument("--beta", type=float, help="type parameter (default: config problem beta)")
    fa.add_argument("--axis", type=int, choices=[1, 2], default=1)
    fa.add_argument("--kind", choices=["derivative", "integral"], default="derivative")
    fa.add_argument("--input", required=True, help="field CSV to read")
    fa.add_argument("--result", help="result CSV (default: <output>/applied.csv)")
    fa.add_argument("--dump-operator", help="also dump the dense operator matrix as CSV")

    fr = sub.add_parser("fiber-report", help="ray analysis of one direction")
    fr.add_argument(
        "--direction",
        default="bump",
        help='"bump" for the sine product, or file:<path> for a field CSV',
    )

    sub.add_parser("solve", help="find both constraint-class solutions")

    sw = sub.add_parser("sweep", help="two-branch solve across a lambda grid")
    sw.add_argument("--lambdas", default="1e-4,3e-4,1e-3", help="comma-separated values")
    sw.add_argument("--jobs", type=int, default=1, help="parallel rows (1 = reproducible)")

    orc = sub.add_parser("oracle", help="evaluate an independent reference quantity")
    orc.add_argument("--check", required=True, help="registered quantity name")
    orc.add_argument("--refine-factor", type=int, default=4)
    return parser


def _json_dump(obj, path: Path) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=2) + "\n", encoding="utf-8")


def _outdir(cfg: RunConfig, args) -> Path:
    out = Path(args.output if args.output else cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _direction_field(spec: str, grid):
    token = spec.strip()
    if token.lower() == "bump":
        x = grid.nodes
        if grid.d == 1:
            vals = np.sin(np.pi * x / grid.T)
        else:
            xx, yy = np.meshgrid(x, x, indexing="ij")
            vals = np.sin(np.pi * xx / grid.T) * np.sin(np.pi * yy / grid.T)
        vals[grid.boundary_mask()] = 0.0
        return Field(vals, grid)
    if token.lower().startswith("file:"):
        return read_field_csv(token.split(":", 1)[1], grid)
    raise ConfigError(f'direction must be "bump" or "file:<path>", got {spec!r}')


def cmd_validate(cfg: RunConfig, args) -> int:
    report = validate_params(cfg.problem_params())
    for check in report.checks:
        mark = "ok  " if check.passed else "FAIL"
        print(f"{mark} {check.name}  ({check.detail})")
    print(f"validation {'passed' if report.passed else 'failed'}")
    return 0 if report.passed else 1


def cmd_frac_apply(cfg: RunConfig, args) -> int:
    grid = cfg.grid_spec()
    psi = cfg.psi_function()
    problem = cfg.problem_params()
    alpha = problem.alpha if args.alpha is None else args.alpha
    beta = problem.beta if args.beta is None else args.beta
    if args.kind == "integral":
        op = assemble_rl_integral(args.side, alpha, psi, grid)
    else:
        op = assemble_hilfer_derivative(args.side, alpha, beta, psi, grid)
    u = read_field_csv(args.input, grid)
    result = apply(op, u, axis=args.axis)
    out = _outdir(cfg, args)
    target = Path(args.result) if args.result else out / "applied.csv"
    write_field_csv(result, target)
    if args.dump_operator:
        operator_to_csv(op, args.dump_operator)
    print(f"wrote {target}")
    return 0


def cmd_fiber_report(cfg: RunConfig, args) -> int:
    grid = cfg.grid_spec()
    params = cfg.problem_params()
    ops = build_operator_set(params, grid, cfg.psi_function())
    direction = _direction_field(args.direction, grid)
    bundle = norm_bundle(direction, params, ops)
    tol = NehariTolerances()
    try:
        report = find_roots(bundle, params, tol)
    except NoTwoRootStructureError as exc:
        report = exc.report
        payload = report.as_dict() if report is not None else {"two_roots": False}
        payload["degenerate"] = exc.degenerate
        payload["message"] = str(exc)
    else:
        payload = report.as_dict()

    out = _outdir(cfg, args)
    _json_dump(payload, out / "fiber.json")
    if report is not None:
        ts = np.exp(
            np.linspace(math.log(report.t_hat0 / 100.0), math.log(100.0 * report.t_hat0), 512)
        )
        with open(out / "fiber_curve.csv", "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t", "w", "w1", "w2", "phi", "phi_hat"])
            for t in ts:
                t = float(t)
                writer.writerow(
                    [
                        repr(t),
                        repr(fiber_w(bundle, t, params)),
                        repr(fiber_w1(bundle, t, params)),
                        repr(fiber_w2(bundle, t, params)),
                        repr(phi(bundle, t, params)),
                        repr(phi_hat(bundle, t, params)),
                    ]
                )
    print(f"wrote {out / 'fiber.json'}")
    return 0


def _solve_summary(cfg: RunConfig, plus, minus, error: str) -> dict:
    summary = {
        "config": cfg.as_dict(),
        "error": error,
    }
    if plus is not None:
        summary["u_star"] = plus.as_dict()
    if minus is not None:
        summary["v_star"] = minus.as_dict()
    return summary


def cmd_solve(cfg: RunConfig, args) -> int:
    grid = cfg.grid_spec()
    params = cfg.problem_params()
    ops = build_operator_set(params, grid, cfg.psi_function())
    opts = cfg.solver_options()
    out = _outdir(cfg, args)
    try:
        plus, minus = two_solution_solve(params, ops, opts)
        error = ""
        code = 0
    except TwoSolutionFailure as exc:
        plus, minus = exc.plus, exc.minus
        error = str(exc)
        code = 1
    if plus is not None:
        write_field_csv(plus.u, out / "u_star.csv")
    if minus is not None:
        write_field_csv(minus.u, out / "v_star.csv")
    _json_dump(_solve_summary(cfg, plus, minus, error), out / "summary.json")
    if code == 0:
        print(
            f"two solutions: E(u*)={plus.energy.total:.6g} < 0 < E(v*)={minus.energy.total:.6g}"
        )
    else:
        print(f"solve failed: {error}", file=sys.stderr)
    return code


def cmd_sweep(cfg: RunConfig, args) -> int:
    try:
        lambdas = [float(tok) for tok in args.lambdas.split(",") if tok.strip()]
    except ValueError as exc:
        raise ConfigError(f"bad --lambdas list {args.lambdas!r}: {exc}") from exc
    if not lambdas:
        raise ConfigError("--lambdas produced an empty grid")
    grid = cfg.grid_spec()
    params = cfg.problem_params()
    ops = build_operator_set(params, grid, cfg.psi_function())
    opts = cfg.solver_options()
    rows = lambda_sweep(params, ops, lambdas, opts, jobs=args.jobs)
    out = _outdir(cfg, args)
    target = out / "sweep.csv"
    with open(target, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=_SWEEP_COLUMNS)
        writer.writeheader()
        for row in rows:
            writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
    print(f"wrote {target}")
    return 0


def cmd_oracle(cfg: RunConfig, args) -> int:
    grid = cfg.grid_spec()
    params = cfg.problem_params()
    oc = OracleConfig(refine_factor=args.refine_factor)
    value = dense_reference(args.check, params, grid, oc)
    print(
        json.dumps(
            {"quantity": args.check, "value": value, "refine_factor": oc.refine_factor},
            sort_keys=True,
        )
    )
    return 0


_COMMANDS = {
    "validate": cmd_validate,
    "frac-apply": cmd_frac_apply,
    "fiber-report": cmd_fiber_report,
    "solve": cmd_solve,
    "sweep": cmd_sweep,
    "oracle": cmd_oracle,
}


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config) if args.config else RunConfig()
        seed_env = os.environ.get("PSINEHARI_SEED")
        if seed_env is not None:
            try:
                cfg = cfg.with_seed(int(seed_env))
            except ValueError:
                raise ConfigError(f"PSINEHARI_SEED must be an integer, got {seed_env!r}")
        return _COMMANDS[args.command](cfg, args)
    except (ConfigError, UnknownQuantityError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except PsinehariError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def entry() -> None:
    sys.exit(main())
