"""Energy functional, weak-form pairings, and the discrete energy gradient.

E(u) = (1/p)||Du||_p^p + (1/q)||Du||_{q,mu}^q
       - (1/(1-gamma)) integral a |u|^(1-gamma) - (lambda/r)||u||_r^r

with Du the mixed left-sided fractional derivative.  The singular integrand
u^(-gamma) in pairings and gradients is guarded by a floor tied to the field
scale; solutions keep all interior nodes far above it.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import signed_power, weighted_power_sum
from .domain import Field, ProblemParams
from .errors import NegativeCandidateError
from .fracops import OperatorSet
from .spaces import NormBundle, norm_bundle

__all__ = [
    "EnergyBreakdown",
    "energy",
    "energy_from_bundle",
    "apply_A",
    "weak_residual",
    "energy_gradient",
    "singular_floor",
]

FLOOR_SCALE = 1e-8


@dataclass(frozen=True)
class EnergyBreakdown:
    """Signed value of each energy term and their total."""

    term_p: float
    term_q: float
    term_sing: float
    term_r: float

    @property
    def total(self) -> float:
        return self.term_p + self.term_q + self.term_sing + self.term_r

    def as_dict(self) -> dict:
        return {
            "term_p": self.term_p,
            "term_q": self.term_q,
            "term_sing": self.term_sing,
            "term_r": self.term_r,
            "total": self.total,
        }


def energy_from_bundle(bundle: NormBundle, params: ProblemParams) -> EnergyBreakdown:
    return EnergyBreakdown(
        bundle.dup_p / params.p,
        bundle.dup_q_mu / params.q,
        -bundle.sing / (1.0 - params.gamma),
        -params.lam * bundle.ur_r / params.r,
    )


def energy(u: Field, params: ProblemParams, ops: OperatorSet) -> EnergyBreakdown:
    return energy_from_bundle(norm_bundle(u, params, ops), params)


def singular_floor(u: Field) -> float:
    """Positivity floor for u^(-gamma): tiny relative to the interior scale."""
    return FLOOR_SCALE * (float(np.mean(np.abs(u.interior_values()))) + 1e-300)


def _require_nonnegative(u: Field) -> None:
    if np.any(u.values[u.grid.interior_mask()] < 0.0):
        raise NegativeCandidateError("candidate field is negative at an interior node")


def _phase_flux(du: np.ndarray, params: ProblemParams) -> np.ndarray:
    # |Du|^(p-2) Du + mu |Du|^(q-2) Du, written with signed powers so the
    # p < 2 branch stays finite where Du vanishes.
    return signed_power(du, params.p - 1.0) + params.mu_field.values * signed_power(du, params.q - 1.0)


def apply_A(u: Field, phi: Field, params: ProblemParams, ops: OperatorSet) -> float:
    """Weak pairing of the double-phase operator: integral flux(Du) * Dphi."""
    du = ops.derivative(u)
    dphi = ops.derivative(phi)
    w = u.grid.weights()
    return float(np.sum(w * _phase_flux(du.values, params) * dphi.values))


def weak_residual(
    u: Field, h: Field, params: ProblemParams, ops: OperatorSet, floor: float | None = None
) -> float:
    """<A u, h> - integral a u^(-gamma) h - lambda integral u^(r-1) h.

    Vanishing of this pairing over a test basis certifies u as a discrete
    weak solution; with h = u it reproduces the ray stationarity identity.
    """
    _require_nonnegative(u)
    if floor is None:
        floor = singular_floor(u)
    w = u.grid.weights()
    safe_u = np.maximum(u.values, floor)
    sing = float(np.sum(w * params.a_field.values * safe_u ** (-params.gamma) * h.values))
    react = float(np.sum(w * np.maximum(u.values, 0.0) ** (params.r - 1.0) * h.values))
    return apply_A(u, h, params, ops) - sing - params.lam * react


def energy_gradient(
    u: Field, params: ProblemParams, ops: OperatorSet, floor: float | None = None
) -> Field:
    """Gradient field g with <g, h>_quad equal to the weak residual pairing.

    The double-phase term backpropagates through the derivative with the
    quadrature adjoint; the singular and reaction terms differentiate
    nodewise.  Boundary entries are forced to zero since boundary values
    are fixed.
    """
    _require_nonnegative(u)
    if floor is None:
        floor = singular_floor(u)
    du = ops.derivative(u)
    flux = Field(_phase_flux(du.values, params), u.grid)
    g = ops.derivative_adjoint(flux).values
    safe_u = np.maximum(u.values, floor)
    g = g - params.a_field.values * safe_u ** (-params.gamma)
    g = g - params.lam * np.maximum(u.values, 0.0) ** (params.r - 1.0)
    g[u.grid.boundary_mask()] = 0.0
    return Field(g, u.grid)
