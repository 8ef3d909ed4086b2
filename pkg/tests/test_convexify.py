import math

import numpy as np
import pytest

from sgcontrol.bilinear import full_B
from sgcontrol.builders import FieldBuilder
from sgcontrol.convexify import (ConvexDecomposition, OscillationProfile, RelaxationTable, SaturatedControl,
                                 build_psi_k, canonical_relaxation_instance, compute_fk, convex_decompose,
                                 lift_extended_control, lifted_shift, relaxation_report, relaxation_study,
                                 running_integral_sup)
from sgcontrol.dynamics import IntegratorConfig, Trajectory
from sgcontrol.errors import ContractViolation, GeometryMismatchError, RampTooWideError
from sgcontrol.signals import PiecewiseConstantSignal, SampledSignal, SumSignal, constant_signal, zero_signal
from sgcontrol.torus import SobolevParams, SpectralField, TorusGeometry, op_L, sobolev_norm


@pytest.fixture
def saturated(skewed, random_field):
    return SaturatedControl(random_field(skewed, 6, 3), [0.5, 1.5],
                            [random_field(skewed, 6, 3), random_field(skewed, 6, 3)])


class TestConvexDecompose:

    def test_single_direction(self, square):
        rho = FieldBuilder(square, 3).cos((1, 1)).finalize()
        dec = convex_decompose(SaturatedControl(SpectralField.zeros(square, 3), [4.0], [rho]))
        assert dec.weights == (0.5, 0.5)
        np.testing.assert_array_equal(dec.directions[0].coeffs, 2.0 * rho.coeffs)
        np.testing.assert_array_equal(dec.directions[1].coeffs, -2.0 * rho.coeffs)
        # a single antisymmetric pair cancels exactly
        assert not np.any(dec.mean_direction().coeffs)

    def test_weights_and_pairs(self, saturated):
        dec = convex_decompose(saturated)
        assert len(dec) == 4
        assert math.fsum(dec.weights) == pytest.approx(1.0, abs=1e-14)
        assert dec.weights[0] == dec.weights[2] and dec.weights[1] == dec.weights[3]
        assert dec.weights[1] == pytest.approx(1.5 / 4.0)
        np.testing.assert_allclose(dec.directions[1].coeffs, math.sqrt(2.0) * saturated.rhotildes[1].coeffs)
        assert np.max(np.abs(dec.mean_direction().coeffs)) <= 1e-15

    def test_identity_on_random_states(self, rng):
        """Σλ_j(B(U + ρ^j) + Lρ^j) - η = B(U) - η̄ on H³ directions."""
        g = TorusGeometry(1.0, 1.3)
        p = SobolevParams(alpha=0.5, nu=0.1)

        def draw():
            return FieldBuilder(g, 6).random(rng, 3).finalize()

        for _ in range(50):
            control = SaturatedControl(draw(), rng.uniform(0.1, 3.0, 2), [draw(), draw()])
            dec = convex_decompose(control)
            U = FieldBuilder(g, 6).random(rng).finalize()
            lhs = dec.averaged_rhs(U, p)
            rhs = full_B(U, U, p).field - control.value(p)
            scale = max(1.0, np.max(np.abs(rhs.coeffs)))
            assert np.max(np.abs(lhs.coeffs - rhs.coeffs)) <= 1e-12 * scale

    def test_averaged_linear_term_vanishes(self, saturated, params):
        dec = convex_decompose(saturated)
        total = sum(w * op_L(rho, params).coeffs for w, rho in zip(dec.weights, dec.directions))
        assert np.max(np.abs(total)) <= 1e-15

    @pytest.mark.parametrize('alphas', [[0.0], [1.0, -0.5]])
    def test_nonpositive_weights(self, square, alphas):
        rhos = [SpectralField.zeros(square, 3)] * len(alphas)
        with pytest.raises(ContractViolation, match='positive'):
            convex_decompose(SaturatedControl(SpectralField.zeros(square, 3), alphas, rhos))

    def test_no_direction(self, square):
        with pytest.raises(ContractViolation):
            convex_decompose(SaturatedControl(SpectralField.zeros(square, 3), [], []))

    def test_decomposition_validates_pairs(self, square):
        rho = FieldBuilder(square, 3).sin((1, 0)).finalize()
        with pytest.raises(ContractViolation, match='antisymmetric'):
            ConvexDecomposition(SpectralField.zeros(square, 3), [0.5, 0.5], [rho, rho])
        with pytest.raises(ContractViolation, match='sum'):
            ConvexDecomposition(SpectralField.zeros(square, 3), [0.5, 0.25], [rho, -1.0 * rho])

    def test_json_form(self, saturated):
        dec = convex_decompose(saturated)
        again = ConvexDecomposition.from_dict(dec.to_dict())
        assert again.weights == dec.weights
        for a, b in zip(again.directions, dec.directions):
            assert np.array_equal(a.coeffs, b.coeffs)


class TestBuildPsiK:

    def test_single_pair_one_period(self, square):
        rho = FieldBuilder(square, 3).cos((2, 1)).finalize()
        dec = convex_decompose(SaturatedControl(SpectralField.zeros(square, 3), [1.0], [rho]))
        psi = build_psi_k(OscillationProfile(dec, 1, 2.0))
        np.testing.assert_allclose(psi.breakpoints, [0.0, 1.0, 2.0])
        np.testing.assert_array_equal(psi.value(0.5), rho.coeffs)
        np.testing.assert_array_equal(psi.value(1.5), -rho.coeffs)

    @pytest.mark.parametrize('k', [2, 3, 8])
    def test_periodic(self, saturated, rng, k):
        psi = build_psi_k(OscillationProfile(convex_decompose(saturated), k, 1.0))
        period = 1.0 / k
        for t in rng.uniform(0.0, 1.0 - period, 20):
            np.testing.assert_array_equal(psi.value(t), psi.value(t + period))

    def test_dwell_fractions(self, saturated):
        dec = convex_decompose(saturated)
        psi = build_psi_k(OscillationProfile(dec, 5, 2.0))
        for j, rho in enumerate(dec.directions):
            dwell = sum(d for d, v in zip(psi.durations, psi.values) if np.array_equal(v, rho.coeffs))
            assert dwell == pytest.approx(2.0 * dec.weights[j], rel=1e-12)

    def test_period_average_vanishes(self, saturated):
        dec = convex_decompose(saturated)
        psi = build_psi_k(OscillationProfile(dec, 4, 1.0))
        F = psi.running_integral()
        # one period spans len(dec) slots
        ends = F[len(dec)::len(dec)]
        assert np.max(np.abs(ends)) <= 1e-14

    def test_support_is_declared(self, saturated):
        dec = convex_decompose(saturated)
        psi = build_psi_k(OscillationProfile(dec, 2, 1.0))
        assert psi.support.issubset(dec.support())

    @pytest.mark.parametrize('k', [0, 1.5, -2])
    def test_bad_oscillation_count(self, saturated, k):
        with pytest.raises(ValueError, match='positive integer'):
            OscillationProfile(convex_decompose(saturated), k, 1.0)


class TestComputeFk:

    def test_full_periods_integrate_to_zero(self, saturated, params, random_field):
        dec = convex_decompose(saturated)
        VN = Trajectory.constant(random_field(dec.geometry, 6, 3), 1.0)
        fk = compute_fk(VN, OscillationProfile(dec, 4, 1.0), params)
        total = fk.running_integral()[-1]
        assert np.max(np.abs(total)) <= 1e-12 * max(1.0, np.max(np.abs(fk.values)))

    def test_linear_part_bound(self, saturated, params):
        """sup_t ‖Lψ_k - Σλ_jLρ^j‖ ≤ (2ν/α) max_j ‖ρ^j‖."""
        dec = convex_decompose(saturated)
        psi = build_psi_k(OscillationProfile(dec, 3, 1.0))
        for s in (0, 2):
            bound = 2.0 * params.nu / params.alpha * max(sobolev_norm(rho, s) for rho in dec.directions)
            g_sup = max(sobolev_norm(op_L(SpectralField(dec.geometry, dec.trunc, v), params), s)
                        for v in psi.values)
            assert g_sup <= bound

    def test_running_integral_shrinks_with_k(self, params):
        instance = canonical_relaxation_instance(seed=0)
        sups = {}
        for k in (8, 64):
            fk = compute_fk(instance.background, OscillationProfile(instance.decomposition, k, 1.0), params)
            sups[k] = running_integral_sup(fk, 2)
        assert sups[64] <= 0.5 * sups[8]

    def test_horizon_mismatch(self, saturated, params, random_field):
        dec = convex_decompose(saturated)
        VN = Trajectory.constant(random_field(dec.geometry, 6), 2.0)
        with pytest.raises(ContractViolation, match='horizon'):
            compute_fk(VN, OscillationProfile(dec, 2, 1.0), params)

    def test_geometry_mismatch(self, saturated, params, square):
        dec = convex_decompose(saturated)
        with pytest.raises(GeometryMismatchError):
            compute_fk(Trajectory.constant(SpectralField.zeros(square, 6), 1.0), OscillationProfile(dec, 2, 1.0),
                       params)


class TestRelaxation:

    def test_canonical_instance_relaxes(self):
        instance = canonical_relaxation_instance(seed=0)
        _, table = relaxation_study(instance.decomposition, instance.background, [8, 16, 32, 64], instance.cfg)
        assert table.ks == [8, 16, 32, 64]
        assert table.is_decreasing()
        assert table.slope('F') <= -0.8
        assert table.slope('Kf') <= -0.8

    def test_zero_family(self, square, params):
        fks = {k: zero_signal(square, 3, 1.0) for k in (4, 2)}
        table = relaxation_report(fks, IntegratorConfig(params, dt=0.1))
        assert table.ks == [2, 4]
        assert table.sup_F == [0.0, 0.0] and table.sup_Kf == [0.0, 0.0]
        assert math.isnan(table.slope())

    def test_growth_is_detected(self):
        table = RelaxationTable([8, 16, 32], [1.0, 0.5, 0.8], [1.0, 0.5, 0.25])
        assert not table.is_decreasing()
        assert RelaxationTable([8, 16], [1.0, 1.05], [1.0, 0.5]).is_decreasing()
        assert table.rows()[1] == (16, 0.5, 0.5)

    def test_sampled_running_integral(self, square):
        u = FieldBuilder(square, 2).cos((1, 0), 2.0).finalize()
        f = SampledSignal(square, 2, [0.0, 1.0], [u, u])
        assert running_integral_sup(f, 0) == pytest.approx(sobolev_norm(u, 0))

    def test_instance_is_seeded(self):
        a = canonical_relaxation_instance(seed=3)
        b = canonical_relaxation_instance(seed=3)
        assert np.array_equal(a.background.states, b.background.states)
        assert a.decomposition.weights == b.decomposition.weights
        assert a.decomposition.support().max_order <= 3


class TestLift:

    @pytest.fixture
    def zeta(self, square):
        values = [FieldBuilder(square, 3).cos((1, 1), v).finalize() for v in (1.0, -1.0, 2.0, 0.5)]
        return PiecewiseConstantSignal(square, 3, [0.0, 0.25, 0.5, 0.75, 1.0], values)

    def test_lift_is_pinned_at_both_ends(self, zeta):
        lifted = lifted_shift(zeta, 0.1, 2)
        assert not np.any(lifted.value(0.0))
        assert not np.any(lifted.value(1.0))
        np.testing.assert_array_equal(lifted.value(0.375), zeta.value(0.375))

    def test_sharper_lift_matches_more_of_the_shift(self, zeta):
        times = np.linspace(0.0, 1.0, 2001)
        misses = [np.sum(np.any(lifted_shift(zeta, 0.1, l).sample(times) != zeta.sample(times), axis=1))
                  for l in (1, 4)]
        assert misses[1] < misses[0]

    def test_extended_control(self, zeta, square):
        eta = constant_signal(FieldBuilder(square, 3).sin((0, 1)).finalize(), 1.0)
        lifted = lift_extended_control(eta, zeta, 0.1, 2)
        assert isinstance(lifted, SumSignal)
        # outside the ramps ∂_tζ_l vanishes
        np.testing.assert_array_equal(lifted.value(0.375), eta.value(0.375))

    def test_zero_shift_is_a_no_op(self, square):
        eta = constant_signal(FieldBuilder(square, 3).sin((0, 1)).finalize(), 1.0)
        assert lift_extended_control(eta, zero_signal(square, 3, 1.0), 0.1, 1) is eta

    def test_ramp_too_wide(self, zeta):
        with pytest.raises(RampTooWideError):
            lifted_shift(zeta, 0.125, 1)

    def test_only_piecewise_constant_shifts(self, square, zeta):
        smooth = SampledSignal(square, 3, zeta.breakpoints, np.vstack([zeta.values, zeta.values[-1]]))
        with pytest.raises(ContractViolation, match='piecewise-constant'):
            lift_extended_control(constant_signal(SpectralField.zeros(square, 3), 1.0), smooth, 0.1, 1)

    def test_incompatible_control(self, skewed, zeta):
        with pytest.raises(GeometryMismatchError):
            lift_extended_control(zero_signal(skewed, 3, 1.0), zeta, 0.1, 1)
