"""Run configuration: JSON in, validated problem objects out.

The JSON layout has four sections (problem, grid, psi, solver) plus an output
directory.  Missing keys take the documented defaults; unknown keys are
rejected rather than ignored so typos cannot silently change a run.  The
problem section spells the coupling constant "lambda", which is a Python
keyword, so the attribute is called lam.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

from .domain import (
    Field,
    GridSpec,
    ProblemParams,
    PsiFunction,
    coefficient_from_name,
    psi_from_name,
)
from .errors import ConfigError
from .solver import SolverOptions

__all__ = ["RunConfig", "load_config", "DEFAULT_CONFIG"]

_PROBLEM_DEFAULTS = {
    "alpha": 0.8,
    "beta": 0.5,
    "p": 1.5,
    "q": 2.0,
    "r": 2.4,
    "gamma": 0.5,
    "lambda": 1e-3,
    "T": 1.0,
    "a": "constant:1.0",
    "mu": "constant:0.5",
}
_GRID_DEFAULTS = {"n": 33, "d": 2}
_SOLVER_DEFAULTS = {
    "max_iter": 2000,
    "restarts": 10,
    "seed": 42,
    "residual_tol": 1e-4,
    "armijo": 1e-4,
    "max_halvings": 30,
    "stall_length": 5,
    "stall_rel_drop": 1e-12,
    "init_noise": 0.1,
}


def _merge(section: str, defaults: dict, given: dict) -> dict:
    unknown = sorted(set(given) - set(defaults))
    if unknown:
        raise ConfigError(f"unknown key(s) in {section!r} section: {', '.join(unknown)}")
    out = dict(defaults)
    out.update(given)
    return out


@dataclass(frozen=True)
class RunConfig:
    problem: dict = field(default_factory=lambda: dict(_PROBLEM_DEFAULTS))
    grid: dict = field(default_factory=lambda: dict(_GRID_DEFAULTS))
    psi: str = "identity"
    solver: dict = field(default_factory=lambda: dict(_SOLVER_DEFAULTS))
    output: str = "out"

    @classmethod
    def from_dict(cls, data: dict) -> "RunConfig":
        if not isinstance(data, dict):
            raise ConfigError(f"config root must be an object, got {type(data).__name__}")
        known = {"problem", "grid", "psi", "solver", "output"}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ConfigError(f"unknown top-level key(s): {', '.join(unknown)}")
        problem = _merge("problem", _PROBLEM_DEFAULTS, data.get("problem", {}))
        grid = _merge("grid", _GRID_DEFAULTS, data.get("grid", {}))
        solver = _merge("solver", _SOLVER_DEFAULTS, data.get("solver", {}))
        psi = data.get("psi", "identity")
        output = data.get("output", "out")
        if not isinstance(psi, str):
            raise ConfigError(f"psi must be a string, got {type(psi).__name__}")
        if not isinstance(output, str):
            raise ConfigError(f"output must be a string, got {type(output).__name__}")
        return cls(problem=problem, grid=grid, psi=psi, solver=solver, output=output)

    def as_dict(self) -> dict:
        return {
            "problem": dict(self.problem),
            "grid": dict(self.grid),
            "psi": self.psi,
            "solver": dict(self.solver),
            "output": self.output,
        }

    def with_lambda(self, lam: float) -> "RunConfig":
        problem = dict(self.problem)
        problem["lambda"] = float(lam)
        return RunConfig(problem, dict(self.grid), self.psi, dict(self.solver), self.output)

    def with_seed(self, seed: int) -> "RunConfig":
        solver = dict(self.solver)
        solver["seed"] = int(seed)
        return RunConfig(dict(self.problem), dict(self.grid), self.psi, solver, self.output)

    def grid_spec(self) -> GridSpec:
        try:
            return GridSpec(float(self.problem["T"]), int(self.grid["n"]), int(self.grid["d"]))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad grid section: {exc}") from exc

    def psi_function(self) -> PsiFunction:
        return psi_from_name(self.psi)

    def problem_params(self) -> ProblemParams:
        g = self.grid_spec()
        pr = self.problem
        try:
            return ProblemParams(
                alpha=float(pr["alpha"]),
                beta=float(pr["beta"]),
                p=float(pr["p"]),
                q=float(pr["q"]),
                r=float(pr["r"]),
                gamma=float(pr["gamma"]),
                lam=float(pr["lambda"]),
                T=float(pr["T"]),
                a_field=coefficient_from_name(str(pr["a"]), g),
                mu_field=coefficient_from_name(str(pr["mu"]), g),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad problem section: {exc}") from exc

    def solver_options(self) -> SolverOptions:
        s = self.solver
        try:
            return SolverOptions(
                max_iter=int(s["max_iter"]),
                restarts=int(s["restarts"]),
                seed=int(s["seed"]),
                residual_tol=float(s["residual_tol"]),
                armijo=float(s["armijo"]),
                max_halvings=int(s["max_halvings"]),
                stall_length=int(s["stall_length"]),
                stall_rel_drop=float(s["stall_rel_drop"]),
                init_noise=float(s["init_noise"]),
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad solver section: {exc}") from exc


DEFAULT_CONFIG = RunConfig()


def load_config(path) -> RunConfig:
    """Parse a JSON config file; raises ConfigError on any malformation."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"malformed JSON in {path}: {exc}") from exc
    return RunConfig.from_dict(data)
