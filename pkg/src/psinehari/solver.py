"""Projected-descent minimization on the two constraint branches.

The iterate is kept as a unit direction in the quadrature inner product and a
branch multiplier.  Each step moves the direction against the energy gradient
with the ray component removed (Barzilai-Borwein step length, nonmonotone
Armijo backtracking), folds to |u|, and re-solves the branch multiplier by
Newton continuation from its previous value.  The singular term makes the
problem stiff near the boundary, so when the descent stalls above the weak
residual tolerance a damped Newton polish on the interior stationarity system
finishes the job; the polished point is re-projected onto its branch and only
kept if it actually improves the residual.  Runs restart from seeded random
initializations and the best iterate is retained.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from .domain import Field, GridSpec, ProblemParams
from .energy import EnergyBreakdown, energy_from_bundle, energy_gradient, singular_floor, weak_residual
from .errors import (
    LambdaTooLargeError,
    NoTwoRootStructureError,
    NumericalBreakdownError,
    TwoSolutionFailure,
)
from .fracops import OperatorSet
from .nehari import (
    N_MINUS,
    N_PLUS,
    NehariTolerances,
    classify_bundle,
    fiber_w1,
    fiber_w2,
    find_roots,
    phi_hat_max_closed_form,
)
from .spaces import NormBundle, luxemburg_norm, norm_bundle

__all__ = [
    "SolverOptions",
    "SolveResult",
    "minimize_on_branch",
    "two_solution_solve",
    "estimate_lambda_star",
    "estimate_sobolev_constant",
    "coercivity_probe",
    "lambda_sweep",
    "default_initial_field",
    "smooth_bump_field",
    "test_direction_basis",
]


@dataclass(frozen=True)
class SolverOptions:
    max_iter: int = 2000
    restarts: int = 10
    seed: int = 42
    residual_tol: float = 1e-4
    armijo: float = 1e-4
    max_halvings: int = 30
    stall_length: int = 5
    stall_rel_drop: float = 1e-12
    init_noise: float = 0.1

    def as_dict(self) -> dict:
        return {
            "max_iter": self.max_iter,
            "restarts": self.restarts,
            "seed": self.seed,
            "residual_tol": self.residual_tol,
            "armijo": self.armijo,
            "max_halvings": self.max_halvings,
            "stall_length": self.stall_length,
            "stall_rel_drop": self.stall_rel_drop,
            "init_noise": self.init_noise,
        }


@dataclass(frozen=True)
class SolveResult:
    branch: str
    u: Field
    bundle: NormBundle
    energy: EnergyBreakdown
    classification: str
    w1: float
    w2: float
    t_project: float
    iterations: int
    converged: bool
    residual_max: float
    floor_activity: float
    restart_index: int

    def as_dict(self) -> dict:
        return {
            "branch": self.branch,
            "bundle": self.bundle.as_dict(),
            "energy": self.energy.as_dict(),
            "classification": self.classification,
            "w1": self.w1,
            "w2": self.w2,
            "t_project": self.t_project,
            "iterations": self.iterations,
            "converged": self.converged,
            "residual_max": self.residual_max,
            "floor_activity": self.floor_activity,
            "restart_index": self.restart_index,
        }


def default_initial_field(grid: GridSpec, seed: int, noise: float = 0.1) -> Field:
    """Product-of-sines bump with multiplicative seeded noise; positive inside."""
    rng = np.random.default_rng(seed)
    x = grid.nodes
    if grid.d == 1:
        base = np.sin(np.pi * x / grid.T)
    else:
        xx, yy = np.meshgrid(x, x, indexing="ij")
        base = np.sin(np.pi * xx / grid.T) * np.sin(np.pi * yy / grid.T)
    vals = np.abs(base * (1.0 + noise * rng.standard_normal(grid.shape)))
    vals[grid.boundary_mask()] = 0.0
    return Field(vals, grid)


def smooth_bump_field(grid: GridSpec, seed: int, modes: int = 3) -> Field:
    """Random low-mode combination of sine products, zero on the boundary."""
    rng = np.random.default_rng(seed)
    x = grid.nodes
    vals = np.zeros(grid.shape)
    if grid.d == 1:
        for i in range(1, modes + 1):
            vals += rng.standard_normal() * np.sin(i * np.pi * x / grid.T)
    else:
        xx, yy = np.meshgrid(x, x, indexing="ij")
        for i in range(1, modes + 1):
            for j in range(1, modes + 1):
                vals += rng.standard_normal() * np.sin(i * np.pi * xx / grid.T) * np.sin(
                    j * np.pi * yy / grid.T
                )
    vals[grid.boundary_mask()] = 0.0
    if not vals.any():
        vals[tuple(np.array(grid.shape) // 2)] = 1.0
    return Field(vals, grid)


def test_direction_basis(grid: GridSpec, count: int = 16) -> list:
    """Fixed smooth test directions used for weak-form residual checks."""
    x = grid.nodes
    out = []
    if grid.d == 1:
        for k in range(1, count + 1):
            vals = np.sin(k * np.pi * x / grid.T)
            vals[grid.boundary_mask()] = 0.0
            out.append(Field(vals, grid))
        return out
    side = int(math.isqrt(count))
    xx, yy = np.meshgrid(x, x, indexing="ij")
    for i in range(1, side + 1):
        for j in range(1, side + 1):
            vals = np.sin(i * np.pi * xx / grid.T) * np.sin(j * np.pi * yy / grid.T)
            vals[grid.boundary_mask()] = 0.0
            out.append(Field(vals, grid))
    return out


def _quad_dot(grid: GridSpec, a: np.ndarray, b: np.ndarray) -> float:
    return float(np.sum(grid.weights() * a * b))


def _project(
    raw: Field, branch: str, params: ProblemParams, ops: OperatorSet, tol: NehariTolerances
):
    """Nehari-project |raw| onto the branch; returns (field, bundle, t, report)."""
    vals = np.abs(raw.values)
    vals[raw.grid.boundary_mask()] = 0.0
    clean = Field(vals, raw.grid)
    if clean.is_zero():
        raise NoTwoRootStructureError("zero candidate", report=None, degenerate=False)
    b = norm_bundle(clean, params, ops)
    report = find_roots(b, params, tol)
    t = report.t1 if branch == N_PLUS else report.t2
    projected = Field(t * clean.values, clean.grid)
    return projected, b.scaled(t, params), t, report


def _unit_direction(grid: GridSpec, vals: np.ndarray):
    """Fold to |.|, zero the boundary, normalize in the quadrature norm."""
    out = np.abs(vals)
    out[grid.boundary_mask()] = 0.0
    nrm2 = _quad_dot(grid, out, out)
    if nrm2 <= 0.0 or not math.isfinite(nrm2):
        return None
    return out / math.sqrt(nrm2)


def _warm_root(
    bundle: NormBundle, branch: str, params: ProblemParams, tol: NehariTolerances, t_prev: float
):
    """Continue the branch root from the previous multiplier by Newton steps.

    Returns None when the iteration escapes (0, inf), hits a flat spot, or
    lands on the wrong branch; callers then fall back to full bracketing.
    """
    t = t_prev
    for _ in range(30):
        w1 = fiber_w1(bundle, t, params)
        w2 = fiber_w2(bundle, t, params)
        if not (math.isfinite(w1) and math.isfinite(w2)) or w2 == 0.0:
            return None
        t_new = t - w1 / w2
        if not (t_new > 0.0 and math.isfinite(t_new)):
            return None
        done = abs(t_new - t) <= 1e-14 * t
        t = t_new
        if done:
            break
    else:
        return None
    if classify_bundle(bundle.scaled(t, params), params, tol).tag != branch:
        return None
    return t


def _residual_max(u: Field, params: ProblemParams, ops: OperatorSet) -> float:
    basis = test_direction_basis(u.grid)
    floor = singular_floor(u)
    return max(abs(weak_residual(u, h, params, ops, floor)) for h in basis)


def _flat_derivative(ops: OperatorSet) -> np.ndarray:
    """Mixed derivative as one matrix on row-major flattened fields."""
    m = ops.dleft.matrix
    if ops.grid.d == 1:
        return m
    return np.kron(m, m)


def _newton_polish(u: Field, params: ProblemParams, ops: OperatorSet, max_steps: int = 25):
    """Damped Newton on the interior stationarity system, from a descent iterate.

    The singular term puts curvatures of order a*u^(-gamma-1) at near-boundary
    nodes, which first-order steps cannot traverse at the weak residual
    tolerance; one dense Newton system per step resolves them directly.
    Returns (field, steps); positivity is kept by clamping trials to a tiny
    floor before the fractional powers are evaluated.
    """
    grid = u.grid
    big = _flat_derivative(ops)
    wflat = grid.weights().ravel()
    interior = grid.interior_mask().ravel()
    a_flat = params.a_field.values.ravel()
    mu_flat = params.mu_field.values.ravel()
    p, q, r, g, lam = params.p, params.q, params.r, params.gamma, params.lam

    def force(uflat):
        du = big @ uflat
        flux = np.sign(du) * np.abs(du) ** (p - 1.0) + mu_flat * np.sign(du) * np.abs(du) ** (
            q - 1.0
        )
        safe = np.where(interior, uflat, 1.0)
        f = big.T @ (wflat * flux) - wflat * (a_flat * safe ** (-g) + lam * safe ** (r - 1.0))
        return f, du

    uflat = u.values.ravel().copy()
    floor = 1e-14 * float(np.mean(np.abs(uflat[interior])))
    if not (floor > 0.0):
        return u, 0
    uflat[interior] = np.maximum(uflat[interior], floor)
    f, du = force(uflat)
    fnorm = float(np.linalg.norm(f[interior]))
    du_scale = float(np.mean(np.abs(du))) + 1e-300
    steps = 0
    for _ in range(max_steps):
        absdu = np.maximum(np.abs(du), 1e-10 * du_scale)
        s1 = (p - 1.0) * absdu ** (p - 2.0) + mu_flat * (q - 1.0) * absdu ** (q - 2.0)
        safe = np.where(interior, uflat, 1.0)
        s2 = g * a_flat * safe ** (-g - 1.0) - lam * (r - 1.0) * safe ** (r - 2.0)
        hess = (big.T * (wflat * s1)) @ big
        hess[np.diag_indices_from(hess)] += wflat * s2
        try:
            delta = np.linalg.solve(hess[np.ix_(interior, interior)], -f[interior])
        except np.linalg.LinAlgError:
            break
        step = 1.0
        improved = False
        for _ in range(25):
            trial = uflat.copy()
            trial[interior] = np.maximum(uflat[interior] + step * delta, floor)
            f_t, du_t = force(trial)
            fn = float(np.linalg.norm(f_t[interior]))
            if math.isfinite(fn) and fn < (1.0 - 1e-4 * step) * fnorm:
                uflat, f, du, fnorm = trial, f_t, du_t, fn
                improved = True
                break
            step *= 0.5
        if not improved:
            break
        steps += 1
        force_scale = float(np.linalg.norm(wflat[interior] * a_flat[interior]
                                           * np.maximum(uflat[interior], floor) ** (-g)))
        if fnorm <= 1e-14 * max(force_scale, 1e-300):
            break
    return Field(uflat.reshape(grid.shape), grid), steps


def _single_run(
    branch: str,
    params: ProblemParams,
    ops: OperatorSet,
    init: Field,
    opts: SolverOptions,
    tol: NehariTolerances,
):
    grid = init.grid
    y = _unit_direction(grid, init.values)
    if y is None:
        raise NoTwoRootStructureError("zero candidate", report=None, degenerate=False)
    b = norm_bundle(Field(y, grid), params, ops)
    report = find_roots(b, params, tol)
    t = report.t1 if branch == N_PLUS else report.t2
    e_curr = energy_from_bundle(b.scaled(t, params), params).total
    recent = deque([e_curr], maxlen=2 * opts.stall_length)
    y_prev = None
    gy_prev = None
    stall = 0
    iterations = 0

    for iterations in range(1, opts.max_iter + 1):
        u_vals = t * y
        g = energy_gradient(Field(u_vals, grid), params, ops).values
        # sphere gradient of t -> E(t(y) y): the ray component drops out
        gy = t * (g - _quad_dot(grid, g, y) * y)
        gn2 = _quad_dot(grid, gy, gy)
        if not math.isfinite(gn2):
            raise NumericalBreakdownError("non-finite descent direction")
        if gn2 == 0.0:
            stall += 1
            if stall >= opts.stall_length:
                break
            continue

        sigma = None
        if y_prev is not None:
            dy = y - y_prev
            dg = gy - gy_prev
            curv = _quad_dot(grid, dy, dg)
            if curv > 0.0:
                sigma = _quad_dot(grid, dy, dy) / curv
        # clamp by sphere displacement; y has unit norm, gy sets the scale
        scale = 1.0 / math.sqrt(gn2)
        if sigma is None or not math.isfinite(sigma):
            sigma = 0.1 * scale
        sigma = min(max(sigma, 1e-16 * scale), 1e2 * scale)

        ref = max(recent)
        accepted = False
        for _ in range(opts.max_halvings + 1):
            y_t = _unit_direction(grid, y - sigma * gy)
            if y_t is None:
                sigma *= 0.5
                continue
            b_t = norm_bundle(Field(y_t, grid), params, ops)
            t_t = _warm_root(b_t, branch, params, tol, t)
            if t_t is None:
                try:
                    rep = find_roots(b_t, params, tol)
                except NoTwoRootStructureError:
                    sigma *= 0.5
                    continue
                t_t = rep.t1 if branch == N_PLUS else rep.t2
            sb = b_t.scaled(t_t, params)
            if classify_bundle(sb, params, tol).tag != branch:
                sigma *= 0.5
                continue
            e_trial = energy_from_bundle(sb, params).total
            if e_trial <= ref - opts.armijo * sigma * gn2:
                change = abs(e_curr - e_trial)
                y_prev, gy_prev = y, gy
                y, t, b, e_curr = y_t, t_t, b_t, e_trial
                recent.append(e_curr)
                accepted = True
                stall = stall + 1 if change <= opts.stall_rel_drop * max(
                    abs(e_curr), 1e-300
                ) else 0
                break
            sigma *= 0.5
        if not accepted:
            y_prev = None
            gy_prev = None
            stall += 1
        if stall >= opts.stall_length:
            break

    u = Field(t * y, grid)
    bundle = b.scaled(t, params)
    t_last = t
    residual_max = _residual_max(u, params, ops)
    polish_steps = 0
    if residual_max > opts.residual_tol * bundle.dup_p:
        polished, polish_steps = _newton_polish(u, params, ops)
        if polish_steps > 0:
            try:
                v, vb, t_v, _ = _project(polished, branch, params, ops, tol)
            except NoTwoRootStructureError:
                pass
            else:
                res_v = _residual_max(v, params, ops)
                if res_v < residual_max and classify_bundle(vb, params, tol).tag == branch:
                    u, bundle, t_last, residual_max = v, vb, t_v, res_v

    cls = classify_bundle(bundle, params, tol)
    floor = singular_floor(u)
    interior = u.interior_values()
    floor_activity = float(np.mean(interior <= floor))
    converged = (
        cls.tag == branch
        and floor_activity == 0.0
        and residual_max <= opts.residual_tol * bundle.dup_p
    )
    return SolveResult(
        branch=branch,
        u=u,
        bundle=bundle,
        energy=energy_from_bundle(bundle, params),
        classification=cls.tag,
        w1=cls.w1,
        w2=cls.w2,
        t_project=t_last,
        iterations=iterations + polish_steps,
        converged=converged,
        residual_max=residual_max,
        floor_activity=floor_activity,
        restart_index=-1,
    )


def _improves(candidate: SolveResult, incumbent: SolveResult) -> bool:
    # converged results always beat unconverged ones; ties break on energy
    if candidate.converged != incumbent.converged:
        return candidate.converged
    return candidate.energy.total < incumbent.energy.total


def minimize_on_branch(
    branch: str,
    params: ProblemParams,
    ops: OperatorSet,
    init: Field | None = None,
    opts: SolverOptions | None = None,
) -> SolveResult:
    """Best projected iterate over seeded restarts on one branch.

    Restart 0 starts from `init` (or the default bump); later restarts draw
    fresh seeded bumps and only run while no restart has converged yet.  If
    every initialization fails ray projection the level lambda*D is
    unreachable and LambdaTooLargeError is raised.
    """
    if branch not in (N_PLUS, N_MINUS):
        raise ValueError(f"branch must be {N_PLUS!r} or {N_MINUS!r}, got {branch!r}")
    if opts is None:
        opts = SolverOptions()
    tol = NehariTolerances()
    grid = ops.grid
    best = None
    failures = 0
    for k in range(opts.restarts):
        if k == 0 and init is not None:
            u0 = init
        else:
            u0 = default_initial_field(grid, opts.seed + k, opts.init_noise)
        try:
            result = _single_run(branch, params, ops, u0, opts, tol)
        except NoTwoRootStructureError:
            failures += 1
            continue
        result = replace(result, restart_index=k)
        if best is None or _improves(result, best):
            best = result
        if best.converged:
            break
    if best is None:
        raise LambdaTooLargeError(
            f"all {failures} initializations lost the two-root structure at lambda={params.lam}"
        )
    return best


def two_solution_solve(
    params: ProblemParams, ops: OperatorSet, opts: SolverOptions | None = None
):
    """Solve both branches from shared initializations and certify the pair.

    Returns (plus, minus) with E(plus) < 0 < E(minus), both converged with
    weak residuals below residual_tol relative to their own ||Du||_p^p.
    Raises TwoSolutionFailure carrying partial results otherwise.
    """
    if opts is None:
        opts = SolverOptions()
    init = default_initial_field(ops.grid, opts.seed, opts.init_noise)
    plus = minimize_on_branch(N_PLUS, params, ops, init, opts)
    minus = minimize_on_branch(N_MINUS, params, ops, init, opts)

    problems = []
    if not plus.converged:
        problems.append("local-minimum branch did not converge")
    if not minus.converged:
        problems.append("local-maximum branch did not converge")
    if not plus.energy.total < 0.0:
        problems.append(f"E at the first solution is {plus.energy.total}, expected < 0")
    if not minus.energy.total > 0.0:
        problems.append(f"E at the second solution is {minus.energy.total}, expected > 0")
    if plus.residual_max > opts.residual_tol * plus.bundle.dup_p:
        problems.append(f"first solution residual {plus.residual_max} too large")
    if minus.residual_max > opts.residual_tol * minus.bundle.dup_p:
        problems.append(f"second solution residual {minus.residual_max} too large")
    if problems:
        raise TwoSolutionFailure("; ".join(problems), plus=plus, minus=minus)
    return plus, minus


def estimate_lambda_star(
    params: ProblemParams,
    ops: OperatorSet,
    direction_sample: int = 16,
    lambda_grid=None,
    seed: int | None = None,
) -> float:
    """Sampled lower envelope of the per-direction critical level.

    Each sampled direction is normalized to ||Du||_p = 1; its exact critical
    value phi_hat(t_hat0) / ||u||_r^r is evaluated in closed form, and the
    minimum over the sample is returned.  Every sampled direction keeps the
    two-root structure for lambda below the returned value.
    """
    if direction_sample < 16:
        raise ValueError(f"direction_sample must be at least 16, got {direction_sample}")
    if lambda_grid is not None:
        lg = list(lambda_grid)
        if any(b <= a for a, b in zip(lg, lg[1:])):
            raise ValueError("lambda_grid must be strictly increasing")
    if seed is None:
        seed = 42
    best = math.inf
    for k in range(direction_sample):
        u = smooth_bump_field(ops.grid, seed + k)
        b = norm_bundle(u, params, ops)
        scale = b.dup_p ** (-1.0 / params.p)
        b = b.scaled(scale, params)
        best = min(best, phi_hat_max_closed_form(b, params) / b.ur_r)
    return best


def estimate_sobolev_constant(
    params: ProblemParams, ops: OperatorSet, sample: int = 32, seed: int = 42
) -> float:
    """Sampled lower bound of ||Du||_p^p / ||u||_{p*_alpha}^p over bump fields."""
    ps = params.p_star_alpha
    if not math.isfinite(ps):
        raise ValueError("critical exponent is unbounded for these parameters")
    w = ops.grid.weights()
    best = math.inf
    for k in range(sample):
        u = smooth_bump_field(ops.grid, seed + k)
        b = norm_bundle(u, params, ops)
        denom = float(np.sum(w * np.abs(u.values) ** ps)) ** (params.p / ps)
        if denom > 0:
            best = min(best, b.dup_p / denom)
    return best


def coercivity_probe(
    params: ProblemParams,
    ops: OperatorSet,
    direction: Field,
    scales,
) -> dict:
    """Tabulate constraint-set energies along rays of growing roughness.

    Ray projection is scale-invariant, so rescaling one direction cannot move
    along the constraint set.  Each requested scale therefore modulates the
    base direction with a seeded oscillation indexed by the scale before
    projecting s * direction to the nearest branch point on its own ray (the
    multiplier closest to 1).  Rows are sorted by the space norm ||Du||_H of
    the projected point; the report flags whether energy increases over the
    top half of that norm range.
    """
    grid = direction.grid
    x = grid.nodes
    rows = []
    scales = list(scales)
    for idx, s in enumerate(scales):
        if not (s > 0 and math.isfinite(s)):
            raise ValueError(f"scales must be positive and finite, got {s}")
        wobble = 1.0 + 0.25 * idx
        if grid.d == 1:
            mod = 1.0 + 0.5 * np.sin(wobble * np.pi * x / grid.T + 0.7 * idx)
        else:
            xx, yy = np.meshgrid(x, x, indexing="ij")
            mod = 1.0 + 0.5 * np.sin(wobble * np.pi * xx / grid.T + 0.7 * idx) * np.sin(
                wobble * np.pi * yy / grid.T + 0.3 * idx
            )
        vals = s * direction.values * mod
        vals[grid.boundary_mask()] = 0.0
        candidate = Field(vals, grid)
        b = norm_bundle(candidate, params, ops)
        try:
            rep = find_roots(b, params)
        except NoTwoRootStructureError:
            continue
        t = rep.t1 if abs(rep.t1 - 1.0) <= abs(rep.t2 - 1.0) else rep.t2
        branch = N_PLUS if t == rep.t1 else N_MINUS
        proj = Field(t * candidate.values, grid)
        pb = b.scaled(t, params)
        du = ops.derivative(proj)
        norm = luxemburg_norm(du, params.mu_field, params.p, params.q)
        rows.append(
            {
                "scale": float(s),
                "norm": norm,
                "energy": energy_from_bundle(pb, params).total,
                "branch": branch,
                "t": t,
            }
        )
    rows.sort(key=lambda row: row["norm"])
    top = rows[len(rows) // 2 :]
    increasing = all(b["energy"] > a["energy"] for a, b in zip(top, top[1:]))
    return {"rows": rows, "top_half_increasing": bool(increasing)}


def lambda_sweep(
    params: ProblemParams,
    ops: OperatorSet,
    lambdas,
    opts: SolverOptions | None = None,
    jobs: int = 1,
) -> list:
    """two_solution_solve across a lambda grid; one row per lambda.

    Failures are recorded per row and do not stop the sweep.  Rows come back
    in the order of the input grid regardless of job count.
    """
    lambdas = [float(v) for v in lambdas]
    if opts is None:
        opts = SolverOptions()
    if jobs > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futures = [
                pool.submit(_sweep_row, params, ops, lam, opts) for lam in lambdas
            ]
            return [f.result() for f in futures]
    return [_sweep_row(params, ops, lam, opts) for lam in lambdas]


def _sweep_row(params: ProblemParams, ops: OperatorSet, lam: float, opts: SolverOptions) -> dict:
    row_params = replace(params, lam=lam)
    row = {
        "lambda": lam,
        "m_plus": math.nan,
        "m_minus": math.nan,
        "res_plus": math.nan,
        "res_minus": math.nan,
        "iters_plus": 0,
        "iters_minus": 0,
        "converged_plus": False,
        "converged_minus": False,
        "error": "",
    }

    def fill(result: SolveResult, side: str):
        row[f"m_{side}"] = result.energy.total
        row[f"res_{side}"] = result.residual_max
        row[f"iters_{side}"] = result.iterations
        row[f"converged_{side}"] = result.converged

    try:
        plus, minus = two_solution_solve(row_params, ops, opts)
        fill(plus, "plus")
        fill(minus, "minus")
    except TwoSolutionFailure as exc:
        if exc.plus is not None:
            fill(exc.plus, "plus")
        if exc.minus is not None:
            fill(exc.minus, "minus")
        row["error"] = str(exc)
    except (LambdaTooLargeError, NumericalBreakdownError) as exc:
        row["error"] = str(exc)
    return row
