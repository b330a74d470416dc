import math

import numpy as np
import pytest
from dataclasses import replace

from psinehari import (
    Field,
    GridSpec,
    NoTwoRootStructureError,
    SolverOptions,
    TwoSolutionFailure,
    build_operator_set,
    coercivity_probe,
    default_initial_field,
    estimate_lambda_star,
    estimate_sobolev_constant,
    find_roots,
    lambda_sweep,
    minimize_on_branch,
    norm_bundle,
    smooth_bump_field,
    two_solution_solve,
)
from psinehari import test_direction_basis as direction_basis
from psinehari.nehari import N_MINUS, N_PLUS, NehariTolerances

from conftest import make_params, sine_bump


@pytest.fixture(scope="module")
def solved(params2, ops2):
    return two_solution_solve(params2, ops2)


class TestSamplers:
    def test_default_initial_field_properties(self, grid2):
        u = default_initial_field(grid2, 42)
        assert np.all(u.values[grid2.boundary_mask()] == 0.0)
        assert np.all(u.values >= 0.0)
        assert u.values[16, 16] > 0.0

    def test_default_initial_field_seeded(self, grid2):
        a = default_initial_field(grid2, 1)
        b = default_initial_field(grid2, 1)
        c = default_initial_field(grid2, 2)
        assert np.array_equal(a.values, b.values)
        assert not np.array_equal(a.values, c.values)

    def test_smooth_bump_field_boundary(self, grid2):
        u = smooth_bump_field(grid2, 5)
        assert np.all(u.values[grid2.boundary_mask()] == 0.0)
        assert not u.is_zero()

    def test_direction_basis_count_and_boundary(self, grid2, grid1):
        basis2 = direction_basis(grid2)
        assert len(basis2) == 16
        for f in basis2:
            assert np.all(f.values[grid2.boundary_mask()] == 0.0)
        basis1 = direction_basis(grid1, count=8)
        assert len(basis1) == 8


class TestTwoSolutionSolve:
    def test_branch_tags_and_energy_signs(self, solved):
        plus, minus = solved
        assert plus.branch == N_PLUS and minus.branch == N_MINUS
        assert plus.energy.total < 0.0 < minus.energy.total

    def test_both_converged(self, solved, params2):
        opts = SolverOptions()
        for result in solved:
            assert result.converged
            assert result.classification == result.branch
            assert result.residual_max <= opts.residual_tol * result.bundle.dup_p
            assert result.floor_activity == 0.0

    def test_on_constraint_set(self, solved, params2):
        tol = NehariTolerances()
        for result in solved:
            scale = result.bundle.scale_reference(params2.lam)
            assert abs(result.w1) <= tol.manifold * scale

    def test_stationarity_identity(self, solved, params2):
        # <A u, u> = integral a u^(1-gamma) + lambda ||u||_r^r on the set
        for result in solved:
            b = result.bundle
            lhs = b.dup_p + b.dup_q_mu
            rhs = b.sing + params2.lam * b.ur_r
            scale = b.scale_reference(params2.lam)
            assert abs(lhs - rhs) <= 1e-8 * scale

    def test_curvature_signs(self, solved):
        plus, minus = solved
        assert plus.w2 > 0.0
        assert minus.w2 < 0.0

    def test_second_branch_reaction_dominates(self, solved, params2):
        # negative curvature at the constraint point forces the reaction
        # term above the combined gradient terms
        _, minus = solved
        b = minus.bundle
        p, q, r, g, lam = params2.p, params2.q, params2.r, params2.gamma, params2.lam
        lhs = (p + g - 1.0) * b.dup_p + (q + g - 1.0) * b.dup_q_mu
        rhs = lam * (r + g - 1.0) * b.ur_r
        assert lhs <= rhs * (1.0 + 1e-8)

    def test_fields_positive_and_boundary_zero(self, solved, grid2):
        for result in solved:
            assert np.all(result.u.values[grid2.boundary_mask()] == 0.0)
            assert np.all(result.u.interior_values() > 0.0)

    def test_deterministic_across_calls(self, solved, params2, ops2):
        plus2, minus2 = two_solution_solve(params2, ops2)
        assert plus2.energy.total == solved[0].energy.total
        assert minus2.energy.total == solved[1].energy.total
        assert np.array_equal(plus2.u.values, solved[0].u.values)

    def test_as_dict_schema(self, solved):
        d = solved[0].as_dict()
        for key in ("branch", "bundle", "energy", "classification", "w1", "w2",
                    "t_project", "iterations", "converged", "residual_max",
                    "floor_activity", "restart_index"):
            assert key in d

    def test_failure_carries_partial_results(self, params2, ops2):
        opts = SolverOptions(max_iter=1, restarts=1, residual_tol=1e-30)
        with pytest.raises(TwoSolutionFailure) as exc:
            two_solution_solve(params2, ops2, opts)
        assert exc.value.plus is not None
        assert exc.value.minus is not None
        assert not exc.value.plus.converged


class TestMinimizeOnBranch:
    def test_rescaled_init_same_minimum(self, solved, params2, ops2, grid2):
        # ray projection normalizes the start, so magnitude cannot matter
        init = default_initial_field(grid2, SolverOptions().seed)
        scaled = Field(10.0 * init.values, grid2)
        result = minimize_on_branch(N_PLUS, params2, ops2, scaled)
        assert result.energy.total == pytest.approx(solved[0].energy.total, rel=1e-6)

    def test_bad_branch_rejected(self, params2, ops2):
        with pytest.raises(ValueError):
            minimize_on_branch("N_flat", params2, ops2)


class TestLambdaStar:
    def test_default_lambda_below_envelope(self, params2, ops2):
        star = estimate_lambda_star(params2, ops2)
        assert star > params2.lam

    def test_sample_monotone(self, params2, ops2):
        # later seeds extend the earlier sample, so the minimum cannot rise
        small = estimate_lambda_star(params2, ops2, direction_sample=16)
        large = estimate_lambda_star(params2, ops2, direction_sample=32)
        assert large <= small

    def test_two_root_structure_splits_at_envelope(self, params2, ops2, grid2):
        star = estimate_lambda_star(params2, ops2)
        below = replace(params2, lam=0.5 * star)
        above = replace(params2, lam=2.0 * star)
        failures_below = failures_above = 0
        for k in range(16):
            u = smooth_bump_field(grid2, 42 + k)
            b = norm_bundle(u, params2, ops2)
            for pp, bump in ((below, "below"), (above, "above")):
                try:
                    find_roots(b, pp)
                except NoTwoRootStructureError:
                    if bump == "below":
                        failures_below += 1
                    else:
                        failures_above += 1
        assert failures_below == 0
        assert failures_above >= 1

    def test_small_sample_rejected(self, params2, ops2):
        with pytest.raises(ValueError):
            estimate_lambda_star(params2, ops2, direction_sample=8)

    def test_unsorted_grid_rejected(self, params2, ops2):
        with pytest.raises(ValueError):
            estimate_lambda_star(params2, ops2, lambda_grid=[1e-3, 1e-4])


class TestSobolevEstimate:
    def test_positive(self, params2, ops2):
        assert estimate_sobolev_constant(params2, ops2) > 0.0

    def test_sample_monotone(self, params2, ops2):
        small = estimate_sobolev_constant(params2, ops2, sample=16)
        large = estimate_sobolev_constant(params2, ops2, sample=32)
        assert large <= small

    def test_grid_stability(self, params2, ops2):
        coarse = estimate_sobolev_constant(params2, ops2)
        grid_f = GridSpec(1.0, 49, 2)
        params_f = make_params(grid_f)
        ops_f = build_operator_set(params_f, grid_f)
        fine = estimate_sobolev_constant(params_f, ops_f)
        assert abs(fine - coarse) <= 0.2 * coarse


class TestCoercivityProbe:
    def test_growth_at_large_norms(self, params2, ops2, bump2):
        # scales comparable to the second ray multiplier reach the
        # large-norm part of the constraint set, where energy must grow
        out = coercivity_probe(params2, ops2, bump2, np.geomspace(2e10, 2e12, 8))
        assert out["top_half_increasing"] is True
        norms = [row["norm"] for row in out["rows"]]
        assert norms == sorted(norms)
        assert all(row["branch"] == N_MINUS for row in out["rows"])

    def test_small_norms_negative_near_zero(self, params2, ops2, bump2):
        # small scales project onto the local-minimum branch, where the
        # fibering dip keeps energies slightly below zero
        out = coercivity_probe(params2, ops2, bump2, [0.5, 1.0, 2.0])
        for row in out["rows"]:
            assert row["branch"] == N_PLUS
            assert -1.0 < row["energy"] < 0.0

    def test_rows_carry_branch_and_multiplier(self, params2, ops2, bump2):
        out = coercivity_probe(params2, ops2, bump2, [0.5, 1.0, 2.0])
        for row in out["rows"]:
            assert row["branch"] in (N_PLUS, N_MINUS)
            assert row["t"] > 0.0
            assert math.isfinite(row["energy"])

    def test_bad_scale_rejected(self, params2, ops2, bump2):
        with pytest.raises(ValueError):
            coercivity_probe(params2, ops2, bump2, [1.0, -2.0, 3.0])


class TestLambdaSweep:
    def test_single_row_matches_direct_solve(self, solved, params2, ops2):
        rows = lambda_sweep(params2, ops2, [1e-3])
        assert len(rows) == 1
        row = rows[0]
        assert row["error"] == ""
        assert row["m_plus"] == solved[0].energy.total
        assert row["m_minus"] == solved[1].energy.total
        assert row["converged_plus"] and row["converged_minus"]

    def test_row_schema(self, params2, ops2):
        rows = lambda_sweep(params2, ops2, [1e-3])
        expected = {
            "lambda", "m_plus", "m_minus", "res_plus", "res_minus",
            "iters_plus", "iters_minus", "converged_plus", "converged_minus",
            "error",
        }
        assert set(rows[0]) == expected

    def test_failure_recorded_not_raised(self, params2, ops2):
        # a lambda far above the envelope removes the constraint set
        rows = lambda_sweep(params2, ops2, [1e6])
        assert len(rows) == 1
        assert rows[0]["error"] != ""
        assert not rows[0]["converged_plus"]
