"""Modular, Luxemburg norm, and the four-norm bundle of a candidate field.

The modular is rho(u) = integral of |u|^p + mu |u|^q; the associated norm is
the Luxemburg gauge inf { tau > 0 : rho(u / tau) <= 1 }, computed here by
bracketing and bisection since rho(u/tau) is strictly decreasing in tau.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._kernels import weighted_power_sum
from .domain import Field, ProblemParams
from .errors import NumericalBreakdownError
from .fracops import OperatorSet

__all__ = ["modular", "luxemburg_norm", "NormBundle", "norm_bundle"]


def modular(u: Field, mu: Field, p: float, q: float) -> float:
    """rho(u) = integral |u|^p + mu |u|^q over the grid."""
    w = u.grid.weights()
    return weighted_power_sum(w, u.values, p) + weighted_power_sum(w * mu.values, u.values, q)


def luxemburg_norm(u: Field, mu: Field, p: float, q: float) -> float:
    """Luxemburg gauge of the modular; 0 for the zero field.

    Bisection starts from the bracket [||u||_p / 4, 4 (||u||_p + ||u||_{q,mu})]
    and stops at relative bracket width 1e-12, so rho(u / result) = 1 holds to
    about 1e-11 regardless of the magnitude of u.
    """
    w = u.grid.weights()
    ip = weighted_power_sum(w, u.values, p)
    iq = weighted_power_sum(w * mu.values, u.values, q)
    if ip == 0.0 and iq == 0.0:
        return 0.0

    def excess(tau):
        # rho(u / tau) - 1, strictly decreasing in tau
        return ip / tau**p + iq / tau**q - 1.0

    norm_p = ip ** (1.0 / p)
    norm_q = iq ** (1.0 / q) if iq > 0 else 0.0
    lo = norm_p / 4.0 if norm_p > 0 else (norm_q / 4.0)
    hi = 4.0 * (norm_p + norm_q)
    for _ in range(200):
        if excess(lo) > 0.0:
            break
        lo /= 4.0
    for _ in range(200):
        if excess(hi) < 0.0:
            break
        hi *= 4.0
    if not (excess(lo) > 0.0 > excess(hi)):
        raise NumericalBreakdownError("luxemburg bracket expansion failed")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if hi - lo <= 1e-12 * mid:
            return mid
        if excess(mid) > 0.0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


@dataclass(frozen=True)
class NormBundle:
    """The four ray-homogeneous quantities of a candidate field.

    dup_p    = ||Du||_p^p            (scales like t^p along the ray)
    dup_q_mu = ||Du||_{q,mu}^q       (t^q)
    sing     = integral a |u|^(1-gamma)   (t^(1-gamma))
    ur_r     = ||u||_r^r             (t^r)

    du caches the derivative field so downstream consumers can reuse it.
    """

    dup_p: float
    dup_q_mu: float
    sing: float
    ur_r: float
    du: Field | None = None

    def scaled(self, t: float, params: ProblemParams) -> "NormBundle":
        return NormBundle(
            self.dup_p * t**params.p,
            self.dup_q_mu * t**params.q,
            self.sing * t ** (1.0 - params.gamma),
            self.ur_r * t**params.r,
            None,
        )

    def scale_reference(self, lam: float) -> float:
        """Magnitude reference A + B + C + lambda*D used by relative tolerances."""
        return self.dup_p + self.dup_q_mu + self.sing + lam * self.ur_r

    def as_dict(self) -> dict:
        return {
            "dup_p": self.dup_p,
            "dup_q_mu": self.dup_q_mu,
            "sing": self.sing,
            "ur_r": self.ur_r,
        }


def norm_bundle(u: Field, params: ProblemParams, ops: OperatorSet) -> NormBundle:
    """Evaluate all four bundle entries, applying the derivative once."""
    u.require_boundary_zero()
    du = ops.derivative(u)
    w = u.grid.weights()
    mu_w = w * params.mu_field.values
    a_w = w * params.a_field.values
    return NormBundle(
        weighted_power_sum(w, du.values, params.p),
        weighted_power_sum(mu_w, du.values, params.q),
        weighted_power_sum(a_w, u.values, 1.0 - params.gamma),
        weighted_power_sum(w, u.values, params.r),
        du,
    )
