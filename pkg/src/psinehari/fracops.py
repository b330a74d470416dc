"""Discrete fractional integral and derivative operators on one axis.

A fractional integral of order alpha in (0, 1) against an increasing weight
psi is discretized by product-trapezoidal quadrature: substituting v = psi(s)
makes the integrand u times a weakly singular kernel in v; u is interpolated
piecewise linearly in v and the singular cell moments are integrated exactly.
The result is a dense triangular matrix acting on nodal values.

The derivative of order alpha with type parameter beta composes two such
integrals of orders beta*(1-alpha) and (1-beta)*(1-alpha) around a scaled
first-derivative factor (1/psi')(d/dx); the right-sided variant carries a
minus sign on that factor.  On 2-D grids the mixed operator applies the same
one-axis matrix along each axis in turn (the applications commute).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._kernels import rl_weight_matrix
from .domain import Field, GridSpec, PsiFunction, identity_psi
from .errors import InvalidOrderError, InvalidPsiError, ShapeError

__all__ = [
    "FracOperator",
    "OperatorSet",
    "assemble_rl_integral",
    "assemble_hilfer_derivative",
    "first_derivative_matrix",
    "apply",
    "adjoint_apply",
    "mixed_apply",
    "mixed_adjoint_apply",
    "build_operator_set",
    "operator_to_csv",
]

_SIDES = ("left", "right")


@dataclass(frozen=True)
class FracOperator:
    """Dense one-axis operator matrix plus the metadata that built it.

    axis_sign records the sign of the first-derivative factor used per axis:
    +1 for left-sided operators and integrals, -1 for right-sided derivatives.
    """

    matrix: np.ndarray
    side: str
    kind: str
    order: float
    beta: float | None
    psi: PsiFunction
    grid: GridSpec
    axis_sign: int

    def as_meta(self) -> dict:
        return {
            "kind": self.kind,
            "side": self.side,
            "order": self.order,
            "beta": self.beta,
            "psi": self.psi.name,
            "axis_sign": self.axis_sign,
            "n": self.grid.n,
            "T": self.grid.T,
        }


def _check_side(side: str) -> None:
    if side not in _SIDES:
        raise ShapeError(f"side must be one of {_SIDES}, got {side!r}")


def assemble_rl_integral(side: str, order: float, psi: PsiFunction, grid: GridSpec) -> FracOperator:
    """Fractional integral matrix of the given order and side.

    Left-sided matrices are lower-triangular with nonnegative entries,
    right-sided ones upper-triangular.  The quadrature is exact whenever the
    integrand is linear in psi(x) on each cell.
    """
    _check_side(side)
    if not (0.0 < order < 1.0) or not math.isfinite(order):
        raise InvalidOrderError(f"integral order must lie in (0, 1), got {order}")
    psi.validate_on(grid)
    v = psi.values_on(grid)
    m = rl_weight_matrix(v, order, side) / math.gamma(order)
    return FracOperator(m, side, "rl_integral", order, None, psi, grid, +1)


def first_derivative_matrix(grid: GridSpec) -> np.ndarray:
    """Dense first-derivative matrix: central interior, one-sided at the ends."""
    n, h = grid.n, grid.h
    d = np.zeros((n, n))
    for i in range(1, n - 1):
        d[i, i - 1] = -0.5 / h
        d[i, i + 1] = 0.5 / h
    d[0, 0], d[0, 1] = -1.0 / h, 1.0 / h
    d[-1, -2], d[-1, -1] = -1.0 / h, 1.0 / h
    return d


def _scaled_derivative_matrix(grid: GridSpec, psi: PsiFunction) -> np.ndarray:
    dpsi = psi.deriv_on(grid).copy()
    good = np.isfinite(dpsi) & (dpsi > 0)
    if not good[1:-1].all():
        raise InvalidPsiError(f"psi {psi.name!r} has a bad derivative at an interior node")
    # Endpoint derivative may vanish or blow up for power-law psi; substitute
    # the nearest interior value so the matrix stays finite.  Boundary rows
    # carry no accuracy claim and Dirichlet fields vanish there.
    if not good[0]:
        dpsi[0] = dpsi[1]
    if not good[-1]:
        dpsi[-1] = dpsi[-2]
    return first_derivative_matrix(grid) / dpsi[:, None]


def assemble_hilfer_derivative(
    side: str, alpha: float, beta: float, psi: PsiFunction, grid: GridSpec
) -> FracOperator:
    """Fractional derivative of order alpha in (0,1) and type beta in [0,1].

    Composes integral factors of orders beta*(1-alpha) and (1-beta)*(1-alpha)
    around the scaled first-derivative factor; a zero sub-order contributes
    the identity.  beta=0 gives the derivative whose inner integral carries
    the full order 1-alpha, beta=1 the one whose outer integral does.
    """
    _check_side(side)
    if not (0.0 < alpha < 1.0) or not math.isfinite(alpha):
        raise InvalidOrderError(f"derivative order must lie in (0, 1), got {alpha}")
    if not (0.0 <= beta <= 1.0) or not math.isfinite(beta):
        raise InvalidOrderError(f"type parameter must lie in [0, 1], got {beta}")
    psi.validate_on(grid)

    def integral_factor(order: float) -> np.ndarray:
        if order == 0.0:
            return np.eye(grid.n)
        return assemble_rl_integral(side, order, psi, grid).matrix

    outer = integral_factor(beta * (1.0 - alpha))
    inner = integral_factor((1.0 - beta) * (1.0 - alpha))
    sign = 1 if side == "left" else -1
    m = outer @ (sign * _scaled_derivative_matrix(grid, psi)) @ inner
    return FracOperator(m, side, "hilfer_derivative", alpha, beta, psi, grid, sign)


def _check_field(op: FracOperator, u: Field, axis: int) -> None:
    if u.grid.n != op.grid.n or u.grid.T != op.grid.T:
        raise ShapeError("field grid does not match the operator grid")
    if axis not in (1, 2):
        raise ShapeError(f"axis must be 1 or 2, got {axis}")
    if u.grid.d == 1 and axis != 1:
        raise ShapeError("axis 2 is invalid on a 1-D grid")


def apply(op: FracOperator, u: Field, axis: int = 1) -> Field:
    """Apply the one-axis operator matrix along the given axis of a field."""
    _check_field(op, u, axis)
    if u.grid.d == 1:
        out = op.matrix @ u.values
    elif axis == 1:
        out = op.matrix @ u.values
    else:
        out = u.values @ op.matrix.T
    return Field(out, u.grid)


def adjoint_apply(op: FracOperator, w: Field, axis: int = 1) -> Field:
    """Adjoint of `apply` in the trapezoid quadrature inner product.

    Computed as W^{-1} M^T W along the axis, with W the diagonal of 1-D
    quadrature weights, so that <apply(op,u), w>_quad == <u, adjoint(w)>_quad
    holds exactly at the discrete level.
    """
    _check_field(op, w, axis)
    wq = op.grid.weights_1d()
    if w.grid.d == 1:
        out = (op.matrix.T @ (wq * w.values)) / wq
    elif axis == 1:
        out = (op.matrix.T @ (wq[:, None] * w.values)) / wq[:, None]
    else:
        out = ((w.values * wq[None, :]) @ op.matrix) / wq[None, :]
    return Field(out, w.grid)


def mixed_apply(op: FracOperator, u: Field) -> Field:
    """Apply along every axis of the grid (one axis in 1-D, both in 2-D)."""
    out = apply(op, u, axis=1)
    if u.grid.d == 2:
        out = apply(op, out, axis=2)
    return out


def mixed_adjoint_apply(op: FracOperator, w: Field) -> Field:
    out = adjoint_apply(op, w, axis=1)
    if w.grid.d == 2:
        out = adjoint_apply(op, out, axis=2)
    return out


@dataclass(frozen=True)
class OperatorSet:
    """Operators assembled once for a (params, grid, psi) configuration."""

    grid: GridSpec
    psi: PsiFunction
    dleft: FracOperator

    def derivative(self, u: Field) -> Field:
        return mixed_apply(self.dleft, u)

    def derivative_adjoint(self, w: Field) -> Field:
        return mixed_adjoint_apply(self.dleft, w)


def build_operator_set(params, grid: GridSpec, psi: PsiFunction | None = None) -> OperatorSet:
    if psi is None:
        psi = identity_psi()
    if grid.T != params.T:
        raise ShapeError(f"grid T={grid.T} does not match params T={params.T}")
    dleft = assemble_hilfer_derivative("left", params.alpha, params.beta, psi, grid)
    return OperatorSet(grid, psi, dleft)


def operator_to_csv(op: FracOperator, path) -> None:
    """Dump the dense operator matrix as plain CSV, one row per grid node."""
    np.savetxt(path, op.matrix, delimiter=",")
