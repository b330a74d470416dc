"""Grids, weight functions, nodal fields, and problem parameters.

The computational domain is [0, T]^d with d in {1, 2}, discretized by n
uniformly spaced nodes per axis.  Fields are nodal value arrays; integration
uses tensor-product trapezoid weights.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field as dc_field
from functools import lru_cache
from typing import Callable

import numpy as np

from ._kernels import weighted_power_sum
from .errors import (
    BoundaryMaskError,
    ConfigError,
    InvalidPsiError,
    NonFiniteFieldError,
    ShapeError,
)

__all__ = [
    "GridSpec",
    "PsiFunction",
    "Field",
    "ProblemParams",
    "ClauseCheck",
    "ValidationReport",
    "validate_params",
    "integrate",
    "identity_psi",
    "power_psi",
    "exp_psi",
    "psi_from_name",
    "coefficient_from_name",
    "read_field_csv",
    "write_field_csv",
]


@dataclass(frozen=True)
class GridSpec:
    """Uniform tensor grid on [0, T]^d."""

    T: float
    n: int
    d: int

    def __post_init__(self):
        if not (self.T > 0 and math.isfinite(self.T)):
            raise ConfigError(f"T must be positive and finite, got {self.T}")
        if self.n < 8:
            raise ConfigError(f"need at least 8 nodes per axis, got {self.n}")
        if self.d not in (1, 2):
            raise ConfigError(f"d must be 1 or 2, got {self.d}")

    @property
    def h(self) -> float:
        return self.T / (self.n - 1)

    @property
    def nodes(self) -> np.ndarray:
        return _nodes(self.T, self.n)

    @property
    def shape(self) -> tuple:
        return (self.n,) if self.d == 1 else (self.n, self.n)

    def weights_1d(self) -> np.ndarray:
        return _weights_1d(self.T, self.n)

    def weights(self) -> np.ndarray:
        """Tensor-product trapezoid quadrature weights, one per node."""
        w = _weights_1d(self.T, self.n)
        if self.d == 1:
            return w
        return np.outer(w, w)

    def boundary_mask(self) -> np.ndarray:
        return _boundary_mask(self.n, self.d)

    def interior_mask(self) -> np.ndarray:
        return ~_boundary_mask(self.n, self.d)


@lru_cache(maxsize=None)
def _nodes(T, n):
    x = np.linspace(0.0, T, n)
    x.flags.writeable = False
    return x


@lru_cache(maxsize=None)
def _weights_1d(T, n):
    h = T / (n - 1)
    w = np.full(n, h)
    w[0] = w[-1] = h / 2.0
    w.flags.writeable = False
    return w


@lru_cache(maxsize=None)
def _boundary_mask(n, d):
    if d == 1:
        m = np.zeros(n, dtype=bool)
        m[0] = m[-1] = True
    else:
        m = np.zeros((n, n), dtype=bool)
        m[0, :] = m[-1, :] = m[:, 0] = m[:, -1] = True
    m.flags.writeable = False
    return m


@dataclass(frozen=True)
class PsiFunction:
    """Strictly increasing coordinate weight with pointwise derivative.

    `eval` maps node coordinates to transformed coordinates, `deriv` gives
    the derivative at the same points.  Validity against a concrete grid
    (strict increase, positive finite derivative on (0, T]) is checked when
    operators are assembled.
    """

    name: str
    eval: Callable[[np.ndarray], np.ndarray]
    deriv: Callable[[np.ndarray], np.ndarray]

    def values_on(self, grid: GridSpec) -> np.ndarray:
        v = np.asarray(self.eval(grid.nodes), dtype=np.float64)
        if v.shape != (grid.n,):
            raise InvalidPsiError(f"psi evaluation returned shape {v.shape}")
        return v

    def deriv_on(self, grid: GridSpec) -> np.ndarray:
        with np.errstate(divide="ignore", invalid="ignore"):
            dv = np.asarray(self.deriv(grid.nodes), dtype=np.float64)
        if dv.shape != (grid.n,):
            raise InvalidPsiError(f"psi derivative returned shape {dv.shape}")
        return dv

    def validate_on(self, grid: GridSpec) -> None:
        v = self.values_on(grid)
        if not np.all(np.isfinite(v)):
            raise InvalidPsiError(f"psi {self.name!r} is non-finite at a node")
        if not np.all(np.diff(v) > 0):
            raise InvalidPsiError(f"psi {self.name!r} is not strictly increasing on the grid")
        dv = self.deriv_on(grid)[1:]
        if not np.all(np.isfinite(dv)) or not np.all(dv > 0):
            raise InvalidPsiError(f"psi {self.name!r} needs a positive finite derivative on (0, T]")


def identity_psi() -> PsiFunction:
    return PsiFunction("identity", lambda x: np.asarray(x, dtype=float), lambda x: np.ones_like(np.asarray(x, dtype=float)))


def power_psi(sigma: float) -> PsiFunction:
    if not (sigma > 0 and math.isfinite(sigma)):
        raise InvalidPsiError(f"power exponent must be positive, got {sigma}")
    return PsiFunction(
        f"power:{sigma:g}",
        lambda x, s=sigma: np.asarray(x, dtype=float) ** s,
        lambda x, s=sigma: s * np.asarray(x, dtype=float) ** (s - 1.0),
    )


def exp_psi() -> PsiFunction:
    return PsiFunction("exp", lambda x: np.exp(np.asarray(x, dtype=float)), lambda x: np.exp(np.asarray(x, dtype=float)))


def psi_from_name(name: str) -> PsiFunction:
    """Parse "identity", "exp" or "power:<sigma>" into a PsiFunction."""
    token = name.strip().lower()
    if token == "identity":
        return identity_psi()
    if token == "exp":
        return exp_psi()
    if token.startswith("power:"):
        try:
            sigma = float(token.split(":", 1)[1])
        except ValueError as exc:
            raise ConfigError(f"bad power exponent in psi spec {name!r}") from exc
        return power_psi(sigma)
    raise ConfigError(f"unknown psi spec {name!r}; use identity, exp or power:<sigma>")


class Field:
    """Nodal values on a grid.  Values must be finite everywhere."""

    __slots__ = ("values", "grid")

    def __init__(self, values, grid: GridSpec):
        arr = np.asarray(values, dtype=np.float64)
        if arr.shape != grid.shape:
            raise ShapeError(f"field shape {arr.shape} does not match grid shape {grid.shape}")
        if not np.all(np.isfinite(arr)):
            raise NonFiniteFieldError("field has non-finite nodal values")
        self.values = arr
        self.grid = grid

    @classmethod
    def from_function(cls, fn, grid: GridSpec, zero_boundary: bool = False) -> "Field":
        x = grid.nodes
        if grid.d == 1:
            vals = np.asarray(fn(x), dtype=np.float64)
        else:
            xx, yy = np.meshgrid(x, x, indexing="ij")
            vals = np.asarray(fn(xx, yy), dtype=np.float64)
        vals = np.broadcast_to(vals, grid.shape).copy()
        if zero_boundary:
            vals[grid.boundary_mask()] = 0.0
        return cls(vals, grid)

    @classmethod
    def constant(cls, value: float, grid: GridSpec) -> "Field":
        return cls(np.full(grid.shape, float(value)), grid)

    def copy_with(self, values) -> "Field":
        return Field(values, self.grid)

    def zero_boundary(self) -> "Field":
        vals = self.values.copy()
        vals[self.grid.boundary_mask()] = 0.0
        return Field(vals, self.grid)

    def require_boundary_zero(self) -> None:
        if np.any(self.values[self.grid.boundary_mask()] != 0.0):
            raise BoundaryMaskError("field must vanish on the boundary nodes")

    def is_zero(self) -> bool:
        return not np.any(self.values)

    def interior_values(self) -> np.ndarray:
        return self.values[self.grid.interior_mask()]

    def __repr__(self):
        return f"Field(shape={self.values.shape}, T={self.grid.T}, d={self.grid.d})"


def integrate(f: Field) -> float:
    """Trapezoid quadrature of a field over the domain."""
    if not np.all(np.isfinite(f.values)):
        raise NonFiniteFieldError("cannot integrate a field with non-finite values")
    return float(np.sum(f.grid.weights() * f.values))


def weighted_power_integral(f: Field, expo: float, weight: Field | None = None) -> float:
    """Quadrature of |f|**expo, optionally against a coefficient field."""
    w = f.grid.weights()
    if weight is not None:
        w = w * weight.values
    return weighted_power_sum(w, f.values, expo)


@dataclass(frozen=True)
class ProblemParams:
    """Exponents, orders, and coefficient fields of the energy functional."""

    alpha: float
    beta: float
    p: float
    q: float
    r: float
    gamma: float
    lam: float
    T: float
    a_field: Field
    mu_field: Field

    @property
    def p_star_alpha(self) -> float:
        """Critical exponent 2p/(2 - alpha p); +inf when the denominator closes."""
        den = 2.0 - self.alpha * self.p
        return math.inf if den <= 0 else 2.0 * self.p / den


@dataclass(frozen=True)
class ClauseCheck:
    name: str
    passed: bool
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def as_dict(self):
        return {
            "passed": self.passed,
            "checks": [
                {"name": c.name, "passed": c.passed, "detail": c.detail}
                for c in self.checks
            ],
        }


def validate_params(params: ProblemParams) -> ValidationReport:
    """Check every structural hypothesis clause; report all violations at once.

    Clause order is fixed and each clause is evaluated independently, so the
    report is deterministic and complete.
    """
    checks = []

    def add(name, passed, detail):
        checks.append(ClauseCheck(name, bool(passed), detail))

    p, q, r, g = params.p, params.q, params.r, params.gamma
    alpha, beta, lam, T = params.alpha, params.beta, params.lam, params.T
    ps = params.p_star_alpha

    add("1 < p < 2", 1.0 < p < 2.0, f"p={p}")
    add("2 - alpha*p > 0", 2.0 - alpha * p > 0.0, f"2-alpha*p={2.0 - alpha * p}")
    add("p < q < p_star_alpha", p < q < ps, f"q={q}, p_star_alpha={ps}")
    add("0 < gamma < 1", 0.0 < g < 1.0, f"gamma={g}")
    add("q < r < p_star_alpha", q < r < ps, f"r={r}, p_star_alpha={ps}")
    add("1/p < alpha < 1", 1.0 / p < alpha < 1.0, f"alpha={alpha}, 1/p={1.0 / p}")
    add("0 <= beta <= 1", 0.0 <= beta <= 1.0, f"beta={beta}")
    add("lambda > 0", lam > 0.0, f"lambda={lam}")
    add("T > 0", T > 0.0, f"T={T}")

    a_int = params.a_field.interior_values()
    add("a > 0 on interior nodes", bool(np.all(a_int > 0)), f"min interior a={a_int.min()}")
    mu = params.mu_field.values
    add(
        "mu >= 0 and bounded",
        bool(np.all(mu >= 0) and np.all(np.isfinite(mu))),
        f"min mu={mu.min()}, max mu={mu.max()}",
    )
    return ValidationReport(tuple(checks))


def coefficient_from_name(name: str, grid: GridSpec) -> Field:
    """Build a named coefficient field: "constant:<v>", "bump", or "file:<path>"."""
    token = name.strip()
    low = token.lower()
    if low.startswith("constant:"):
        try:
            value = float(token.split(":", 1)[1])
        except ValueError as exc:
            raise ConfigError(f"bad constant coefficient {name!r}") from exc
        return Field.constant(value, grid)
    if low == "bump":
        if grid.d == 1:
            return Field.from_function(lambda x: 1.0 + 0.5 * np.sin(np.pi * x / grid.T), grid)
        return Field.from_function(
            lambda x, y: 1.0 + 0.5 * np.sin(np.pi * x / grid.T) * np.sin(np.pi * y / grid.T),
            grid,
        )
    if low.startswith("file:"):
        return read_field_csv(token.split(":", 1)[1], grid)
    raise ConfigError(f"unknown coefficient spec {name!r}")


def write_field_csv(f: Field, path) -> None:
    """Write a field as CSV: columns (i, value) in 1-D, (i, j, value) in 2-D.

    Rows are emitted row-major: the first index varies slowest.
    """
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if f.grid.d == 1:
            writer.writerow(["i", "value"])
            for i, v in enumerate(f.values):
                writer.writerow([i, repr(float(v))])
        else:
            writer.writerow(["i", "j", "value"])
            for i in range(f.grid.n):
                for j in range(f.grid.n):
                    writer.writerow([i, j, repr(float(f.values[i, j]))])


def read_field_csv(path, grid: GridSpec) -> Field:
    """Read a field CSV matching the grid; every node must appear exactly once."""
    vals = np.full(grid.shape, np.nan)
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise ConfigError(f"cannot open field file {path!r}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ["i", "value"] if grid.d == 1 else ["i", "j", "value"]
        if header is None or [h.strip().lower() for h in header] != expected:
            raise ConfigError(f"field CSV {path!r} must have header {','.join(expected)}")
        for row in reader:
            if not row:
                continue
            try:
                if grid.d == 1:
                    i = int(row[0])
                    vals[i] = float(row[1])
                else:
                    i, j = int(row[0]), int(row[1])
                    vals[i, j] = float(row[2])
            except (ValueError, IndexError) as exc:
                raise ConfigError(f"bad row {row!r} in field CSV {path!r}") from exc
    if np.any(np.isnan(vals)):
        raise ConfigError(f"field CSV {path!r} does not cover every grid node")
    return Field(vals, grid)
