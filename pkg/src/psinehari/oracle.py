"""Independent reference computations backing the test suite.

Everything here recomputes quantities the library already produces, but by a
different route: integrals use the midpoint rule instead of the trapezoid
rule, fractional integrals use a product-midpoint quadrature built on
piecewise-constant reconstruction, and operator-dependent quantities are
assembled on a refine_factor-times finer grid with fields re-sampled from
their analytic definitions.  Agreement between the two routes is evidence;
neither is derived from the other.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .domain import Field, GridSpec, ProblemParams, identity_psi
from .errors import ConfigError, NumericalBreakdownError, UnknownQuantityError
from .fracops import build_operator_set

__all__ = [
    "OracleConfig",
    "dense_reference",
    "fd_derivative",
    "scan_argmax",
    "registered_quantities",
    "midpoint_integral",
    "rl_midpoint_quadrature",
]


@dataclass(frozen=True)
class OracleConfig:
    refine_factor: int = 4
    fd_step: float = 1e-5
    scan_points: int = 2048

    def __post_init__(self):
        if not (isinstance(self.refine_factor, int) and self.refine_factor >= 2):
            raise ConfigError(f"refine_factor must be an integer >= 2, got {self.refine_factor}")
        if not (1e-9 < self.fd_step < 1e-2):
            raise ConfigError(f"fd_step must lie in (1e-9, 1e-2), got {self.fd_step}")
        if not (isinstance(self.scan_points, int) and self.scan_points >= 64):
            raise ConfigError(f"scan_points must be an integer >= 64, got {self.scan_points}")


def _cell_centers(T: float, cells: int) -> np.ndarray:
    h = T / cells
    return (np.arange(cells) + 0.5) * h


def midpoint_integral(fn, T: float, d: int, cells: int) -> float:
    """Midpoint-rule integral of fn over (0,T)^d with `cells` cells per axis."""
    h = T / cells
    c = _cell_centers(T, cells)
    if d == 1:
        return float(h * np.sum(fn(c)))
    xx, yy = np.meshgrid(c, c, indexing="ij")
    return float(h * h * np.sum(fn(xx, yy)))


def rl_midpoint_quadrature(fn, psi, order: float, x: float, cells: int) -> float:
    """Left fractional integral of fn at x by product-midpoint quadrature.

    The kernel moment over each cell is integrated exactly; fn is frozen at
    the cell midpoint (piecewise-constant reconstruction, as opposed to the
    piecewise-linear reconstruction the production assembly uses).
    """
    s = np.linspace(0.0, x, cells + 1)
    vx = psi.eval(x)
    vl = psi.eval(s[:-1])
    vr = psi.eval(s[1:])
    moments = ((vx - vl) ** order - (vx - vr) ** order) / order
    mids = 0.5 * (s[:-1] + s[1:])
    return float(np.sum(moments * fn(mids)) / math.gamma(order))


def _bump_1d(x, T):
    return np.sin(np.pi * x / T)


def _bump_2d(x, y, T):
    return np.sin(np.pi * x / T) * np.sin(np.pi * y / T)


def _bump(grid_T, d):
    if d == 1:
        return lambda x: _bump_1d(x, grid_T)
    return lambda x, y: _bump_2d(x, y, grid_T)


def _const_interior(field_vals: np.ndarray, grid: GridSpec) -> float:
    # coefficient fields enter the refs by their interior mean; exact for the
    # constant coefficients every registered quantity is defined with
    return float(np.mean(field_vals[grid.interior_mask()]))


def _refined_grid(grid: GridSpec, factor: int) -> GridSpec:
    return GridSpec(grid.T, factor * (grid.n - 1) + 1, grid.d)


def _refined_bundle_terms(params: ProblemParams, grid: GridSpec, cfg: OracleConfig):
    """(A, B, C, D) on the refined grid: derivative at nodes, midpoint sums."""
    fine = _refined_grid(grid, cfg.refine_factor)
    a0 = _const_interior(params.a_field.values, grid)
    mu0 = _const_interior(params.mu_field.values, grid)
    fine_params = ProblemParams(
        params.alpha, params.beta, params.p, params.q, params.r, params.gamma,
        params.lam, params.T,
        Field.constant(a0, fine), Field.constant(mu0, fine),
    )
    ops = build_operator_set(fine_params, fine)
    x = fine.nodes
    if fine.d == 1:
        u = Field(_bump_1d(x, fine.T), fine)
    else:
        xx, yy = np.meshgrid(x, x, indexing="ij")
        u = Field(_bump_2d(xx, yy, fine.T), fine)
    du = ops.derivative(u).values
    h = fine.h
    T, d = fine.T, fine.d
    cells = fine.n - 1
    if d == 1:
        du_c = 0.5 * (du[:-1] + du[1:])
        A = float(h * np.sum(np.abs(du_c) ** params.p))
        B = float(mu0 * h * np.sum(np.abs(du_c) ** params.q))
    else:
        du_c = 0.25 * (du[:-1, :-1] + du[1:, :-1] + du[:-1, 1:] + du[1:, 1:])
        A = float(h * h * np.sum(np.abs(du_c) ** params.p))
        B = float(mu0 * h * h * np.sum(np.abs(du_c) ** params.q))
    bump = _bump(T, d)
    C = a0 * midpoint_integral(
        lambda *xs: np.abs(bump(*xs)) ** (1.0 - params.gamma), T, d, cells
    )
    D = midpoint_integral(lambda *xs: np.abs(bump(*xs)) ** params.r, T, d, cells)
    return A, B, C, D


def _q_bump_modular(params, grid, cfg):
    cells = cfg.refine_factor * (grid.n - 1)
    mu0 = _const_interior(params.mu_field.values, grid)
    bump = _bump(grid.T, grid.d)
    f = lambda *xs: np.abs(bump(*xs)) ** params.p + mu0 * np.abs(bump(*xs)) ** params.q
    return midpoint_integral(f, grid.T, grid.d, cells)


def _q_bump_sing(params, grid, cfg):
    cells = cfg.refine_factor * (grid.n - 1)
    a0 = _const_interior(params.a_field.values, grid)
    bump = _bump(grid.T, grid.d)
    return a0 * midpoint_integral(
        lambda *xs: np.abs(bump(*xs)) ** (1.0 - params.gamma), grid.T, grid.d, cells
    )


def _q_bump_r(params, grid, cfg):
    cells = cfg.refine_factor * (grid.n - 1)
    bump = _bump(grid.T, grid.d)
    return midpoint_integral(lambda *xs: np.abs(bump(*xs)) ** params.r, grid.T, grid.d, cells)


def _q_bump_dup_p(params, grid, cfg):
    return _refined_bundle_terms(params, grid, cfg)[0]


def _q_bump_dup_q_mu(params, grid, cfg):
    return _refined_bundle_terms(params, grid, cfg)[1]


def _q_bump_energy(params, grid, cfg):
    A, B, C, D = _refined_bundle_terms(params, grid, cfg)
    return (
        A / params.p
        + B / params.q
        - C / (1.0 - params.gamma)
        - params.lam * D / params.r
    )


def _q_rl_apply_mid(params, grid, cfg):
    # left fractional integral of the 1-D bump at x = T/2
    cells = cfg.refine_factor * (grid.n - 1) // 2
    return rl_midpoint_quadrature(
        lambda s: _bump_1d(s, grid.T), identity_psi(), params.alpha, grid.T / 2.0, cells
    )


def _q_zero_modular(params, grid, cfg):
    cells = cfg.refine_factor * (grid.n - 1)
    return midpoint_integral(lambda *xs: 0.0 * xs[0], grid.T, grid.d, cells)


def _q_bilinear(params, grid, cfg):
    # multilinear integrand: midpoint is exact at every refinement
    cells = cfg.refine_factor * (grid.n - 1)
    if grid.d == 1:
        return midpoint_integral(lambda x: x, grid.T, 1, cells)
    return midpoint_integral(lambda x, y: x * y, grid.T, 2, cells)


_QUANTITIES = {
    "bump_modular": _q_bump_modular,
    "bump_sing": _q_bump_sing,
    "bump_r": _q_bump_r,
    "bump_dup_p": _q_bump_dup_p,
    "bump_dup_q_mu": _q_bump_dup_q_mu,
    "bump_energy": _q_bump_energy,
    "rl_apply_mid": _q_rl_apply_mid,
    "zero_modular": _q_zero_modular,
    "bilinear_integral": _q_bilinear,
}


def registered_quantities() -> list:
    return sorted(_QUANTITIES)


def dense_reference(
    quantity: str,
    params: ProblemParams,
    grid: GridSpec,
    config: OracleConfig | None = None,
) -> float:
    if config is None:
        config = OracleConfig()
    try:
        fn = _QUANTITIES[quantity]
    except KeyError:
        raise UnknownQuantityError(
            f"unknown quantity {quantity!r}; registered: {', '.join(registered_quantities())}"
        ) from None
    return float(fn(params, grid, config))


def _central(f, x0, h, order):
    if order == 1:
        return (f(x0 + h) - f(x0 - h)) / (2.0 * h)
    return (f(x0 + h) - 2.0 * f(x0) + f(x0 - h)) / (h * h)


def fd_derivative(
    scalar_map,
    at,
    direction: Field | None = None,
    config: OracleConfig | None = None,
    order: int = 1,
):
    """Central finite difference with one Richardson halving.

    `at` is either a real (the map is scalar-to-scalar) or a Field, in which
    case `direction` is required and the map is differentiated along the line
    at + s*direction.  Returns (value, error_estimate); the estimate is the
    difference between the two step sizes, which the extrapolation removes to
    leading order.
    """
    if config is None:
        config = OracleConfig()
    if order not in (1, 2):
        raise ValueError(f"order must be 1 or 2, got {order}")
    if isinstance(at, Field):
        if direction is None:
            raise ValueError("Field input needs a direction")
        base, h_dir = at, direction

        def line(s):
            return scalar_map(Field(base.values + s * h_dir.values, base.grid))

        x0 = 0.0
        step = config.fd_step
    else:
        line = scalar_map
        x0 = float(at)
        step = config.fd_step * max(1.0, abs(x0))

    coarse = _central(line, x0, step, order)
    fine = _central(line, x0, 0.5 * step, order)
    if not (math.isfinite(coarse) and math.isfinite(fine)):
        raise NumericalBreakdownError("non-finite finite-difference evaluation")
    value = (4.0 * fine - coarse) / 3.0
    return value, abs(fine - coarse)


def scan_argmax(scalar_map, bracket, config: OracleConfig | None = None) -> float:
    """Argmax of the map over a log-uniform grid spanning the bracket."""
    if config is None:
        config = OracleConfig()
    lo, hi = bracket
    if not (0.0 < lo < hi):
        raise ValueError(f"bracket must satisfy 0 < lo < hi, got ({lo}, {hi})")
    ts = np.exp(np.linspace(math.log(lo), math.log(hi), config.scan_points))
    vals = np.array([scalar_map(float(t)) for t in ts])
    return float(ts[int(np.argmax(vals))])
