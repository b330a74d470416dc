import numpy as np
import pytest

from psinehari import (
    BoundaryMaskError,
    Field,
    GridSpec,
    build_operator_set,
    dense_reference,
    luxemburg_norm,
    modular,
    norm_bundle,
)

from conftest import make_params, sine_bump


def _random_field(grid, seed, scale=1.0):
    rng = np.random.default_rng(seed)
    vals = scale * rng.standard_normal(grid.shape)
    vals[grid.boundary_mask()] = 0.0
    return Field(vals, grid)


class TestModular:
    def test_direct_formula(self, grid2, params2):
        u = sine_bump(grid2)
        w = grid2.weights()
        expected = float(
            np.sum(w * np.abs(u.values) ** 1.5) + 0.5 * np.sum(w * np.abs(u.values) ** 2.0)
        )
        assert modular(u, params2.mu_field, 1.5, 2.0) == pytest.approx(expected, rel=1e-13)

    def test_zero_field(self, grid2, params2):
        z = Field.constant(0.0, grid2)
        assert modular(z, params2.mu_field, 1.5, 2.0) == 0.0

    def test_scaling_between_powers(self, grid2, params2):
        # rho(t u) lies between t^p rho(u) and t^q rho(u) for t > 1
        u = sine_bump(grid2)
        rho1 = modular(u, params2.mu_field, 1.5, 2.0)
        rho3 = modular(Field(3.0 * u.values, grid2), params2.mu_field, 1.5, 2.0)
        assert 3.0**1.5 * rho1 <= rho3 <= 3.0**2.0 * rho1

    def test_against_oracle(self, params2):
        grid = GridSpec(1.0, 257, 1)
        params = make_params(grid)
        u = sine_bump(grid)
        got = modular(u, params.mu_field, params.p, params.q)
        ref = dense_reference("bump_modular", params, grid)
        assert got == pytest.approx(ref, rel=1e-3)


class TestLuxemburgNorm:
    def test_unit_modular_at_unit_norm(self, grid2, params2):
        for seed in range(5):
            u = _random_field(grid2, seed)
            nu = luxemburg_norm(u, params2.mu_field, 1.5, 2.0)
            scaled = Field(u.values / nu, grid2)
            assert modular(scaled, params2.mu_field, 1.5, 2.0) == pytest.approx(1.0, abs=1e-8)

    def test_zero_field_has_zero_norm(self, grid2, params2):
        assert luxemburg_norm(Field.constant(0.0, grid2), params2.mu_field, 1.5, 2.0) == 0.0

    def test_positive_homogeneity(self, grid2, params2):
        u = _random_field(grid2, 11)
        n1 = luxemburg_norm(u, params2.mu_field, 1.5, 2.0)
        n3 = luxemburg_norm(Field(3.0 * u.values, grid2), params2.mu_field, 1.5, 2.0)
        assert n3 == pytest.approx(3.0 * n1, rel=1e-8)

    @pytest.mark.parametrize("scale", [1e-8, 1e8])
    def test_extreme_magnitudes_bracketed(self, grid2, params2, scale):
        u = _random_field(grid2, 13, scale=scale)
        nu = luxemburg_norm(u, params2.mu_field, 1.5, 2.0)
        scaled = Field(u.values / nu, grid2)
        assert modular(scaled, params2.mu_field, 1.5, 2.0) == pytest.approx(1.0, abs=1e-8)


class TestModularNormLaws:
    """Sign and power relations between the modular and its Luxemburg gauge."""

    def _pair(self, grid, params, seed, target):
        u = _random_field(grid, seed)
        nu = luxemburg_norm(u, params.mu_field, params.p, params.q)
        u = Field(u.values * (target / nu), grid)
        nu = luxemburg_norm(u, params.mu_field, params.p, params.q)
        rho = modular(u, params.mu_field, params.p, params.q)
        return nu, rho

    def test_small_norm_small_modular(self, grid2, params2):
        for seed in range(8):
            nu, rho = self._pair(grid2, params2, seed, 0.5)
            assert nu < 1.0 and rho < 1.0
            assert nu**params2.q - 1e-8 <= rho <= nu**params2.p + 1e-8

    def test_large_norm_large_modular(self, grid2, params2):
        for seed in range(8):
            nu, rho = self._pair(grid2, params2, seed, 2.0)
            assert nu > 1.0 and rho > 1.0
            assert nu**params2.p - 1e-8 <= rho <= nu**params2.q + 1e-8

    def test_unit_norm_unit_modular(self, grid2, params2):
        nu, rho = self._pair(grid2, params2, 3, 1.0)
        assert rho == pytest.approx(1.0, abs=1e-8)


class TestNormBundle:
    def test_requires_boundary_zero(self, grid2, params2, ops2):
        with pytest.raises(BoundaryMaskError):
            norm_bundle(Field.constant(1.0, grid2), params2, ops2)

    def test_entries_nonnegative(self, params2, ops2, bump2):
        b = norm_bundle(bump2, params2, ops2)
        assert b.dup_p > 0 and b.dup_q_mu > 0 and b.sing > 0 and b.ur_r > 0

    def test_carries_derivative_field(self, params2, ops2, bump2):
        b = norm_bundle(bump2, params2, ops2)
        expected = ops2.derivative(bump2).values
        assert np.array_equal(b.du.values, expected)

    def test_scaled_homogeneities(self, params2, ops2, bump2):
        b = norm_bundle(bump2, params2, ops2)
        s = b.scaled(2.0, params2)
        assert s.dup_p == pytest.approx(2.0**params2.p * b.dup_p, rel=1e-14)
        assert s.dup_q_mu == pytest.approx(2.0**params2.q * b.dup_q_mu, rel=1e-14)
        assert s.sing == pytest.approx(2.0 ** (1.0 - params2.gamma) * b.sing, rel=1e-14)
        assert s.ur_r == pytest.approx(2.0**params2.r * b.ur_r, rel=1e-14)

    def test_scaling_matches_rescaled_field(self, grid2, params2, ops2, bump2):
        direct = norm_bundle(Field(2.0 * bump2.values, grid2), params2, ops2)
        scaled = norm_bundle(bump2, params2, ops2).scaled(2.0, params2)
        assert direct.dup_p == pytest.approx(scaled.dup_p, rel=1e-12)
        assert direct.ur_r == pytest.approx(scaled.ur_r, rel=1e-12)

    def test_scale_reference_combination(self, params2, ops2, bump2):
        b = norm_bundle(bump2, params2, ops2)
        expected = b.dup_p + b.dup_q_mu + b.sing + params2.lam * b.ur_r
        assert b.scale_reference(params2.lam) == pytest.approx(expected, rel=1e-15)

    def test_as_dict_keys(self, params2, ops2, bump2):
        d = norm_bundle(bump2, params2, ops2).as_dict()
        assert set(d) == {"dup_p", "dup_q_mu", "sing", "ur_r"}


@pytest.fixture(scope="module")
def fine_bundle_setup():
    grid = GridSpec(1.0, 257, 1)
    params = make_params(grid)
    ops = build_operator_set(params, grid)
    bundle = norm_bundle(sine_bump(grid), params, ops)
    return grid, params, bundle


class TestBundleAgainstOracle:
    """Independent refined-grid references for every bundle entry (1-D)."""

    @pytest.mark.parametrize(
        "entry,quantity",
        [
            ("dup_p", "bump_dup_p"),
            ("dup_q_mu", "bump_dup_q_mu"),
            ("sing", "bump_sing"),
            ("ur_r", "bump_r"),
        ],
    )
    def test_entry_matches_reference(self, fine_bundle_setup, entry, quantity):
        grid, params, bundle = fine_bundle_setup
        ref = dense_reference(quantity, params, grid)
        assert getattr(bundle, entry) == pytest.approx(ref, rel=1e-3)
