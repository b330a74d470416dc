"""Ray (fibering) analysis of the energy and the natural-constraint classes.

Along the ray t -> t*u the energy reduces to a four-term scalar function of
the bundle (A, B, C, D) = (dup_p, dup_q_mu, sing, ur_r):

    w(t)  = (t^p/p) A + (t^q/q) B - (t^(1-gamma)/(1-gamma)) C - lambda (t^r/r) D

Stationary rays satisfy w'(1) = 0; the constraint set splits by the sign of
w''(1).  Dividing w'(t) by t^(r-1) isolates

    phi(t)     = t^(p-r) A + t^(q-r) B - t^(1-gamma-r) C
    phi_hat(t) = t^(p-r) A - t^(1-gamma-r) C

so that w'(t) = t^(r-1) (phi(t) - lambda D): rays crossing the level
lambda*D twice carry one local minimum and one local maximum of w.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .domain import Field, ProblemParams
from .errors import (
    DegenerateDirectionError,
    DomainError,
    NoTwoRootStructureError,
    NumericalBreakdownError,
    ZeroFieldError,
)
from .fracops import OperatorSet
from .spaces import NormBundle, norm_bundle

__all__ = [
    "NehariTolerances",
    "NehariClass",
    "FiberReport",
    "fiber_w",
    "fiber_w1",
    "fiber_w2",
    "phi",
    "phi_hat",
    "t_hat0",
    "phi_hat_max_closed_form",
    "find_roots",
    "classify",
    "classify_bundle",
    "eta_h",
]

N_PLUS = "N_plus"
N_ZERO = "N_zero"
N_MINUS = "N_minus"
OFF_MANIFOLD = "off_manifold"


@dataclass(frozen=True)
class NehariTolerances:
    """Relative tolerances, all against the bundle scale A + B + C + lambda*D."""

    manifold: float = 1e-8
    degenerate: float = 1e-8
    root_rel: float = 1e-10
    argmax_rel: float = 1e-12


def _check_t(t: float) -> None:
    if not (t > 0.0) or not math.isfinite(t):
        raise DomainError(f"ray parameter must be positive and finite, got {t}")


def fiber_w(bundle: NormBundle, t: float, params: ProblemParams) -> float:
    """Ray energy w(t); w(0) = 0 by continuity."""
    if t == 0.0:
        return 0.0
    _check_t(t)
    p, q, r, g, lam = params.p, params.q, params.r, params.gamma, params.lam
    return (
        t**p / p * bundle.dup_p
        + t**q / q * bundle.dup_q_mu
        - t ** (1.0 - g) / (1.0 - g) * bundle.sing
        - lam * t**r / r * bundle.ur_r
    )


def fiber_w1(bundle: NormBundle, t: float, params: ProblemParams) -> float:
    """First ray derivative w'(t)."""
    _check_t(t)
    p, q, r, g, lam = params.p, params.q, params.r, params.gamma, params.lam
    return (
        t ** (p - 1.0) * bundle.dup_p
        + t ** (q - 1.0) * bundle.dup_q_mu
        - t ** (-g) * bundle.sing
        - lam * t ** (r - 1.0) * bundle.ur_r
    )


def fiber_w2(bundle: NormBundle, t: float, params: ProblemParams) -> float:
    """Second ray derivative w''(t)."""
    _check_t(t)
    p, q, r, g, lam = params.p, params.q, params.r, params.gamma, params.lam
    return (
        (p - 1.0) * t ** (p - 2.0) * bundle.dup_p
        + (q - 1.0) * t ** (q - 2.0) * bundle.dup_q_mu
        + g * t ** (-g - 1.0) * bundle.sing
        - lam * (r - 1.0) * t ** (r - 2.0) * bundle.ur_r
    )


def phi(bundle: NormBundle, t: float, params: ProblemParams) -> float:
    """Reduced ray function: w'(t) = t^(r-1) (phi(t) - lambda D)."""
    _check_t(t)
    p, q, r, g = params.p, params.q, params.r, params.gamma
    return (
        t ** (p - r) * bundle.dup_p
        + t ** (q - r) * bundle.dup_q_mu
        - t ** (1.0 - g - r) * bundle.sing
    )


def phi_hat(bundle: NormBundle, t: float, params: ProblemParams) -> float:
    """phi without the q-phase term; concave-free with a unique maximum."""
    _check_t(t)
    p, r, g = params.p, params.r, params.gamma
    return t ** (p - r) * bundle.dup_p - t ** (1.0 - g - r) * bundle.sing


def _phi_prime(bundle: NormBundle, t: float, params: ProblemParams) -> float:
    p, q, r, g = params.p, params.q, params.r, params.gamma
    return (
        (p - r) * t ** (p - r - 1.0) * bundle.dup_p
        + (q - r) * t ** (q - r - 1.0) * bundle.dup_q_mu
        + (r + g - 1.0) * t ** (-r - g) * bundle.sing
    )


def _require_nondegenerate(bundle: NormBundle) -> None:
    if not (bundle.dup_p > 0.0 and bundle.sing > 0.0):
        raise DegenerateDirectionError(
            f"ray analysis needs dup_p > 0 and sing > 0, got {bundle.dup_p}, {bundle.sing}"
        )


def t_hat0(bundle: NormBundle, params: ProblemParams) -> float:
    """Unique stationary point of phi_hat on the ray.

    t_hat0 = ((r+gamma-1) C / ((r-p) A))^(1/(p+gamma-1)); scaling the field
    by s divides it by s.
    """
    _require_nondegenerate(bundle)
    p, r, g = params.p, params.r, params.gamma
    ratio = (r + g - 1.0) * bundle.sing / ((r - p) * bundle.dup_p)
    return ratio ** (1.0 / (p + g - 1.0))


def phi_hat_max_closed_form(bundle: NormBundle, params: ProblemParams) -> float:
    """Closed-form value of phi_hat at its maximizer."""
    _require_nondegenerate(bundle)
    p, r, g = params.p, params.r, params.gamma
    e1 = (r + g - 1.0) / (p + g - 1.0)
    e2 = (r - p) / (p + g - 1.0)
    return (
        (p + g - 1.0)
        / (r - p)
        * ((r - p) / (r + g - 1.0)) ** e1
        * bundle.dup_p**e1
        / bundle.sing**e2
    )


@dataclass(frozen=True)
class NehariClass:
    """Constraint classification of a field at ray parameter 1."""

    tag: str
    w1: float
    w2: float


@dataclass(frozen=True)
class FiberReport:
    """Everything the ray analysis produced for one direction.

    t1 and t2 are present only when the gap phi(t0) - lambda*D is positive;
    degenerate marks a gap that vanished within tolerance.
    """

    bundle: NormBundle
    lam: float
    t_hat0: float
    phi_hat_max: float
    t0: float
    phi_max: float
    gap: float
    t1: float | None = None
    t2: float | None = None
    class_at_t1: str | None = None
    class_at_t2: str | None = None
    degenerate: bool = False

    def as_dict(self) -> dict:
        return {
            "bundle": self.bundle.as_dict(),
            "lambda": self.lam,
            "t_hat0": self.t_hat0,
            "phi_hat_max": self.phi_hat_max,
            "t0": self.t0,
            "phi_max": self.phi_max,
            "gap": self.gap,
            "t1": self.t1,
            "t2": self.t2,
            "class_at_t1": self.class_at_t1,
            "class_at_t2": self.class_at_t2,
            "degenerate": self.degenerate,
            "two_roots": self.t1 is not None,
        }


def _golden_max(f, lo: float, hi: float, rel_tol: float):
    """Golden-section maximizer for a unimodal function on [lo, hi]."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(300):
        if (b - a) <= rel_tol * max(1.0, abs(a) + abs(b)):
            break
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    t = 0.5 * (a + b)
    return t, f(t)


def _bisect_root(f, lo: float, hi: float, rel_tol: float) -> float:
    flo, fhi = f(lo), f(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if flo * fhi > 0.0:
        raise NumericalBreakdownError("bisection bracket does not straddle a root")
    for _ in range(300):
        mid = 0.5 * (lo + hi)
        if hi - lo <= rel_tol * max(1.0, mid):
            return mid
        fm = f(mid)
        if fm == 0.0:
            return mid
        if flo * fm < 0.0:
            hi = mid
        else:
            lo, flo = mid, fm
    return 0.5 * (lo + hi)


def find_roots(
    bundle: NormBundle, params: ProblemParams, tol: NehariTolerances | None = None
) -> FiberReport:
    """Locate the two-root crossing of phi with the level lambda*D.

    Golden-section maximizes phi from a bracket seeded at t_hat0 (expanded
    geometrically if the maximum sits at an edge).  When the gap is positive
    the two crossings are bracketed by sign, bisected, then polished with at
    most five Newton steps on w' that must stay inside their bracket.
    Raises NoTwoRootStructureError (carrying the partial report) otherwise.
    """
    if tol is None:
        tol = NehariTolerances()
    _require_nondegenerate(bundle)
    lam, level = params.lam, params.lam * bundle.ur_r

    th = t_hat0(bundle, params)
    ph_max = phi_hat(bundle, th, params)

    f = lambda t: phi(bundle, t, params)
    lo, hi = th * 1e-3, th * 1e3
    t0, phi_max = _golden_max(f, lo, hi, tol.argmax_rel)
    for _ in range(8):
        # re-seed wider if the maximizer landed within a cell of an endpoint
        if t0 <= lo * (1.0 + 1e-6):
            lo /= 10.0
        elif t0 >= hi * (1.0 - 1e-6):
            hi *= 10.0
        else:
            break
        t0, phi_max = _golden_max(f, lo, hi, tol.argmax_rel)

    gap = phi_max - level
    base = FiberReport(bundle, lam, th, ph_max, t0, phi_max, gap)
    scale = bundle.scale_reference(lam)
    if gap <= 0.0 or bundle.ur_r == 0.0:
        degenerate = abs(gap) <= tol.degenerate * scale
        raise NoTwoRootStructureError(
            f"no two-root structure: gap={gap:.6e} at lambda={lam}",
            report=base,
            degenerate=degenerate,
        )

    def crossing(t):
        return f(t) - level

    # left crossing: phi -> -inf as t -> 0, so expand down until sign change
    a = lo
    for _ in range(200):
        if crossing(a) < 0.0:
            break
        a /= 4.0
    else:
        raise NumericalBreakdownError("left crossing bracket expansion failed")
    t1 = _bisect_root(crossing, a, t0, tol.root_rel)

    # right crossing: phi -> 0+ < level as t -> inf
    b = hi
    for _ in range(200):
        if crossing(b) < 0.0:
            break
        b *= 4.0
    else:
        raise NumericalBreakdownError("right crossing bracket expansion failed")
    t2 = _bisect_root(crossing, t0, b, tol.root_rel)

    def polish(t, blo, bhi):
        for _ in range(5):
            d1 = fiber_w1(bundle, t, params)
            d2 = fiber_w2(bundle, t, params)
            if d2 == 0.0:
                break
            step = t - d1 / d2
            if not (blo < step < bhi) or not math.isfinite(step):
                break
            t = step
        return t

    t1 = polish(t1, a, t0)
    t2 = polish(t2, t0, b)

    c1 = classify_bundle(bundle.scaled(t1, params), params, tol)
    c2 = classify_bundle(bundle.scaled(t2, params), params, tol)
    return FiberReport(
        bundle, lam, th, ph_max, t0, phi_max, gap, t1, t2, c1.tag, c2.tag, False
    )


def classify_bundle(
    bundle: NormBundle, params: ProblemParams, tol: NehariTolerances | None = None
) -> NehariClass:
    """Classify by the signs of w'(1) and w''(1) with relative tolerances."""
    if tol is None:
        tol = NehariTolerances()
    w1 = fiber_w1(bundle, 1.0, params)
    w2 = fiber_w2(bundle, 1.0, params)
    scale = bundle.scale_reference(params.lam)
    if abs(w1) > tol.manifold * scale:
        return NehariClass(OFF_MANIFOLD, w1, w2)
    if abs(w2) <= tol.degenerate * scale:
        return NehariClass(N_ZERO, w1, w2)
    return NehariClass(N_PLUS if w2 > 0.0 else N_MINUS, w1, w2)


def classify(
    u: Field, params: ProblemParams, ops: OperatorSet, tol: NehariTolerances | None = None
) -> NehariClass:
    if u.is_zero():
        raise ZeroFieldError("cannot classify the zero field")
    return classify_bundle(norm_bundle(u, params, ops), params, tol)


def eta_h(u: Field, h: Field, t: float, params: ProblemParams, ops: OperatorSet) -> float:
    """Second-variation surrogate along u + t*h.

    eta(t) = (p-1)||D(u+th)||_p^p + (q-1)||D(u+th)||_{q,mu}^q
             + gamma integral a |u+th|^(1-gamma) - lambda (r-1)||u+th||_r^r.

    On the local-minimum constraint class eta(0) > 0, which is the quantity
    whose persistence under small t the existence argument leans on.
    """
    if t == 0.0:
        v = u
    else:
        v = Field(u.values + t * h.values, u.grid)
    b = norm_bundle(v, params, ops)
    return (
        (params.p - 1.0) * b.dup_p
        + (params.q - 1.0) * b.dup_q_mu
        + params.gamma * b.sing
        - params.lam * (params.r - 1.0) * b.ur_r
    )
