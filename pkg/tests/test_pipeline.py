import mock
import numpy as np
import pytest

from sgcontrol.builders import FieldBuilder
from sgcontrol.dynamics import IntegratorConfig, integrate_plain
from sgcontrol.errors import ContractViolation, StageFailure
from sgcontrol.pipeline import (PipelineConfig, StageReport, high_mode_energy, norm_transfer_ratio, project_control,
                                reference_control, stage_descend, synthesize)
from sgcontrol.saturation import certified_subspace, ladder_build
from sgcontrol.signals import MaskedSignal, constant_signal
from sgcontrol.torus import ModeSubspace, SobolevParams, SpectralField, TorusGeometry, helmholtz, sobolev_norm


def supported_in_h3(signal) -> bool:
    mask = ModeSubspace.low_modes(3).mask(signal.trunc)
    return not np.any(signal.sample(signal.sample_times())[:, ~mask])


class TestPipelineConfig:

    @pytest.mark.parametrize('changes', [
        dict(epsilon=0.0), dict(T=-1.0), dict(k_project=2), dict(trunc=3, k_project=4),
        dict(oscillation_cap=8), dict(ramp_fraction=0.5), dict(segments=0),
    ])
    def test_rejects(self, params, changes):
        kwargs = dict(T=1.0, epsilon=0.1, trunc=6, integrator=IntegratorConfig(params), oscillation_start=16)
        kwargs.update(changes)
        with pytest.raises(ValueError):
            PipelineConfig(**kwargs)


class TestReferenceControl:

    def test_zero_data(self, square, params):
        zero = SpectralField.zeros(square, 4)
        Ubar, eta = reference_control(zero, zero, None, 1.0, params)
        assert not np.any(Ubar.states)
        assert not np.any(eta.sample([0.0, 0.5, 1.0]))

    def test_equal_states_hold_still(self, skewed, params, random_field):
        u = random_field(skewed, 5, 3)
        Ubar, eta = reference_control(u, u, None, 2.0, params)
        np.testing.assert_array_equal(Ubar.states[0], Ubar.states[-1])
        np.testing.assert_allclose(eta.value(0.0), eta.value(2.0), atol=1e-14)

    def test_endpoints(self, skewed, params, random_field):
        u0, uT = random_field(skewed, 4), random_field(skewed, 4)
        Ubar, _ = reference_control(u0, uT, None, 1.0, params)
        np.testing.assert_allclose(Ubar.initial.coeffs, helmholtz(u0, params).coeffs)
        np.testing.assert_allclose(Ubar.final.coeffs, helmholtz(uT, params).coeffs, atol=1e-14)

    def test_forcing_is_subtracted(self, skewed, params, random_field):
        u0, uT = random_field(skewed, 4), random_field(skewed, 4)
        f = random_field(skewed, 4, 2)
        _, plain = reference_control(u0, uT, None, 1.0, params)
        _, forced = reference_control(u0, uT, constant_signal(f, 1.0), 1.0, params)
        np.testing.assert_allclose(forced.value(0.3), plain.value(0.3) - f.coeffs, atol=1e-14)


class TestProjectControl:

    def test_identity_at_truncation(self, skewed, params, random_field):
        _, eta = reference_control(random_field(skewed, 4), random_field(skewed, 4), None, 1.0, params)
        assert project_control(eta, 4) is eta
        assert project_control(eta, 9) is eta

    def test_idempotent(self, skewed, params, random_field):
        _, eta = reference_control(random_field(skewed, 5), random_field(skewed, 5), None, 1.0, params)
        once = project_control(eta, 3)
        twice = project_control(once, 3)
        assert isinstance(once, MaskedSignal)
        for t in (0.0, 0.4, 1.0):
            np.testing.assert_array_equal(once.value(t), twice.value(t))
        assert supported_in_h3(once)

    def test_error_decreases_with_the_order(self, skewed, params, rng):
        u0 = FieldBuilder(skewed, 6).random(rng, 3, 0.1).finalize()
        uT = FieldBuilder(skewed, 6).random(rng, 3, 0.1).finalize()
        _, eta = reference_control(u0, uT, None, 1.0, params)
        cfg = IntegratorConfig(params, dt=1e-2)
        errors = [sobolev_norm(integrate_plain(helmholtz(u0, params), project_control(eta, k), cfg, 1.0).final
                               - helmholtz(uT, params), 1) for k in range(3, 7)]
        for before, after in zip(errors[:-1], errors[1:]):
            assert after <= before + 1e-8
        assert errors[-1] <= 1e-6

    def test_rejects_order_zero(self, square, params):
        _, eta = reference_control(SpectralField.zeros(square, 3), SpectralField.zeros(square, 3), None, 1.0,
                                   params)
        with pytest.raises(ValueError):
            project_control(eta, 0)


class TestStageDescend:

    @pytest.fixture
    def toy(self, square, params):
        """A constant control on c_(3,1) on top of H³ content, lowered from E₁ to E₀ = H³_q."""
        eta = constant_signal(FieldBuilder(square, 6).cos((3, 1), 0.2).sin((1, 1), 0.1).finalize(), 1.0)
        ladder = ladder_build(4, square, params, trunc=6)
        return eta, ladder

    def config(self, params, **changes):
        kwargs = dict(T=1.0, epsilon=1.0, trunc=6, integrator=IntegratorConfig(params, dt=1e-2), segments=2,
                      oscillation_start=4, oscillation_cap=32)
        kwargs.update(changes)
        return PipelineConfig(**kwargs)

    def test_passthrough(self, square, params, random_field):
        eta = constant_signal(random_field(square, 6, 3), 1.0)
        ladder = ladder_build(4, square, params, trunc=6)
        lowered, report = stage_descend(eta, ladder, 1e-3, self.config(params), SpectralField.zeros(square, 6), 1)
        assert lowered is eta
        assert report.passthrough and report.passed
        assert report.error == 0.0

    def test_lowers_one_level(self, toy, square, params):
        eta, ladder = toy
        lowered, report = stage_descend(eta, ladder, 1e3, self.config(params), SpectralField.zeros(square, 6), 1)
        assert report.passed and not report.passthrough
        assert report.k == 4 and report.attempts[0][0] == 4
        assert report.support == certified_subspace(ladder, 0)
        assert supported_in_h3(lowered)

    def test_doubling_reduces_the_error(self, toy, square, params):
        eta, ladder = toy
        with pytest.raises(StageFailure) as info:
            stage_descend(eta, ladder, 1e-14, self.config(params), SpectralField.zeros(square, 6), 1)
        attempts = info.value.attempts
        assert [k for k, _ in attempts] == [4, 8, 16, 32]
        errors = [e for _, e in attempts]
        for before, after in zip(errors[:-1], errors[1:]):
            assert after < before
        assert info.value.achieved == min(errors)
        assert info.value.stage == 1

    def test_second_stage_keeps_improving(self, square, params):
        """Lowering a control that already went through one stage still converges as k doubles."""
        uT = FieldBuilder(square, 6).cos((4, 1), 0.2).finalize()
        _, eta = reference_control(SpectralField.zeros(square, 6), uT, None, 1.0, params)
        ladder = ladder_build(5, square, params, trunc=6)
        zero = SpectralField.zeros(square, 6)
        lifted, first = stage_descend(project_control(eta, 5), ladder, 1e6,
                                      self.config(params, segments=4, oscillation_start=16), zero, 3)
        assert not first.passthrough
        with pytest.raises(StageFailure) as info:
            stage_descend(lifted, ladder, 1e-14, self.config(params, segments=4, oscillation_start=8), zero, 1)
        errors = [e for _, e in info.value.attempts]
        assert [k for k, _ in info.value.attempts] == [8, 16, 32]
        assert errors[-1] < errors[0]


class TestSynthesize:

    def test_equal_states(self, params):
        g = TorusGeometry(1.0, 1.2)
        u = FieldBuilder(g, 6).cos((1, 2), 0.3).finalize()
        cfg = PipelineConfig(T=1.0, epsilon=1e-3, trunc=6, integrator=IntegratorConfig(params, dt=1e-2))
        result = synthesize(u, u, None, cfg)
        assert result.achieved <= 1e-8
        assert result.projection_order == 3
        assert [r.stage for r in result.trace] == [0]

    def test_flagship(self):
        g = TorusGeometry(1.0, 1.1)
        p = SobolevParams(alpha=0.2, nu=0.1)
        u0 = SpectralField.zeros(g, 12)
        uT = FieldBuilder(g, 12).cos((2, 1)).finalize()
        epsilon = 0.1 * sobolev_norm(helmholtz(uT, p), 1)
        cfg = PipelineConfig(T=1.0, epsilon=epsilon, trunc=12, integrator=IntegratorConfig(p, dt=1e-2))
        result = synthesize(u0, uT, None, cfg)
        assert result.achieved <= epsilon
        assert supported_in_h3(result.eta_final)
        assert result.budget_total <= 3.0 * epsilon
        assert result.u_error <= result.u_bound * (1.0 + 1e-12)
        assert not result.flagged

    def test_one_stage_end_to_end(self, square, params):
        uT = FieldBuilder(square, 6).cos((3, 1), 0.2).finalize()
        epsilon = 0.9 * sobolev_norm(helmholtz(uT, params), 1)
        cfg = PipelineConfig(T=1.0, epsilon=epsilon, trunc=6, integrator=IntegratorConfig(params, dt=1e-2),
                             segments=4)
        result = synthesize(SpectralField.zeros(square, 6), uT, None, cfg)
        assert result.projection_order == 4
        assert [r.stage for r in result.trace] == [0, 2, 1]
        assert result.trace[1].passthrough
        assert not result.trace[2].passthrough
        assert supported_in_h3(result.eta_final)
        assert result.achieved <= result.budget_total <= 3.0 * epsilon
        summary = result.to_dict()
        assert [s['stage'] for s in summary['stages']] == [0, 2, 1]

    def test_two_stages_end_to_end(self, square, params):
        uT = FieldBuilder(square, 6).cos((4, 1), 0.2).finalize()
        epsilon = 0.5 * sobolev_norm(helmholtz(uT, params), 1)
        cfg = PipelineConfig(T=1.0, epsilon=epsilon, trunc=6, integrator=IntegratorConfig(params, dt=1e-2),
                             segments=4)
        result = synthesize(SpectralField.zeros(square, 6), uT, None, cfg)
        assert result.projection_order == 5
        assert [r.stage for r in result.trace] == [0, 4, 3, 2, 1]
        assert sum(not r.passthrough for r in result.trace[1:]) >= 2
        assert supported_in_h3(result.eta_final)
        assert result.achieved <= result.budget_total <= 3.0 * epsilon
        for report in result.trace:
            assert all(error > report.error for _, error in report.attempts[:-1])

    def test_stage_failure_carries_the_trace(self, square, params):
        uT = FieldBuilder(square, 6).cos((3, 1), 0.2).finalize()
        cfg = PipelineConfig(T=1.0, epsilon=0.1, trunc=6, integrator=IntegratorConfig(params, dt=1e-2))
        failure = StageFailure(2, 0.5, 0.05, [(16, 0.5)])
        with mock.patch('sgcontrol.pipeline.stage_descend', side_effect=failure):
            with pytest.raises(StageFailure) as info:
                synthesize(SpectralField.zeros(square, 6), uT, None, cfg)
        assert info.value.stage == 2
        assert [r.stage for r in info.value.trace] == [0]
        assert isinstance(info.value.trace[0], StageReport)

    def test_projection_failure(self, square, params):
        uT = FieldBuilder(square, 4).cos((3, 1), 0.2).finalize()
        cfg = PipelineConfig(T=1.0, epsilon=1e-30, trunc=4, integrator=IntegratorConfig(params, dt=1e-2))
        with pytest.raises(StageFailure) as info:
            synthesize(SpectralField.zeros(square, 4), uT, None, cfg)
        assert info.value.stage == 0
        assert [k for k, _ in info.value.attempts] == [3, 4]

    def test_truncation_mismatch(self, square, params):
        zero = SpectralField.zeros(square, 4)
        cfg = PipelineConfig(T=1.0, epsilon=0.1, trunc=5, integrator=IntegratorConfig(params, dt=1e-2))
        with pytest.raises(ContractViolation, match='truncation'):
            synthesize(zero, zero, None, cfg)

    def test_high_mode_flag(self, square, params):
        u = FieldBuilder(square, 6).cos((1, 0), 0.1).sin((5, 1), 1.0).finalize()
        assert high_mode_energy(u) > 0.9
        assert high_mode_energy(SpectralField.zeros(square, 6)) == 0.0
        cfg = PipelineConfig(T=1.0, epsilon=1e6, trunc=6, integrator=IntegratorConfig(params, dt=1e-2))
        assert synthesize(u, u, None, cfg).flagged


class TestNormTransfer:

    @pytest.mark.parametrize('alpha', [0.05, 0.2, 1.0, 7.0])
    def test_ratio_is_at_most_one(self, skewed, random_field, alpha):
        p = SobolevParams(alpha=alpha, nu=0.1)
        for _ in range(20):
            assert norm_transfer_ratio(random_field(skewed, 8), p) <= 1.0 + 1e-12

    def test_zero(self, skewed, params):
        assert norm_transfer_ratio(SpectralField.zeros(skewed, 3), params) == 0.0
