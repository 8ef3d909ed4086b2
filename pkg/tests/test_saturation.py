import mock
import numpy as np
import pytest

from sgcontrol.bilinear import full_B
from sgcontrol.enums import Parity
from sgcontrol.errors import DegenerateGeometryError, LadderFailure, RejectedPairError
from sgcontrol.saturation import (BASE_ORDER, F_of, LadderStep, certified_subspace, interaction_gram,
                                  ladder_build, mode_level, prescribed_pair, replay_step, saturation_solve,
                                  step_residual)
from sgcontrol.torus import ModeIndex, ModeSubspace, SobolevParams, TorusGeometry, sobolev_norm, spectral_basis

GEOMETRIES = [(1.0, 1.0), (1.0, 1.3), (0.7, 2.1)]


def modes_of_order(k):
    basis = spectral_basis(k)
    return [tuple(int(v) for v in m) for m, order in zip(basis.modes, basis.orders) if order == k]


class TestModeLevel:

    @pytest.mark.parametrize('l, level', [
        ((1, 0), 0), ((2, -1), 0), ((3, 0), 0),
        ((3, 1), 1), ((1, -3), 1), ((4, 0), 2), ((0, 4), 2),
        ((2, 3), 3), ((5, 0), 4), ((3, 3), 5), ((0, 6), 6),
    ])
    def test_levels(self, l, level):
        assert mode_level(l) == level


class TestInteractionGram:

    def test_closed_form(self, rng):
        p = SobolevParams(alpha=0.7, nu=0.1)
        for _ in range(20):
            g = TorusGeometry(*rng.uniform(0.5, 2.0, 2))
            m = tuple(int(v) for v in rng.integers(-3, 4, 2))
            n = tuple(int(v) for v in rng.integers(-3, 4, 2))
            if m == (0, 0) or n == (0, 0):
                continue
            cf, cg = rng.uniform(-2.0, 2.0, 2)
            gram = interaction_gram(m, n, p, g, cf, cg)
            assert gram.direct == pytest.approx(gram.closed, rel=1e-12, abs=1e-12)

    def test_hand_computed(self, square, params):
        # F = (17/6, 1/6), G = (1, -3)
        gram = interaction_gram((2, 1), (1, 0), params, square)
        assert gram.direct == pytest.approx(7.0 / 3.0)
        assert gram.closed == pytest.approx(7.0 / 3.0)


class TestSaturationSolve:

    def test_reference_step(self, square, params):
        step = saturation_solve((3, 1), Parity.COS, (2, 1), (1, 0), params, square)
        assert step.level == 1
        assert step.trunc == 4
        assert step.remainder.support().issubset(ModeSubspace([((1, 1), Parity.COS), ((1, 1), Parity.SIN)]))
        residual = replay_step(step, params)
        outside = residual - residual.with_coeffs(
            np.where(ModeSubspace([((1, 1), 'cos'), ((1, 1), 'sin')]).mask(4), residual.coeffs, 0.0))
        assert sobolev_norm(outside, 0) <= 1e-10 * sobolev_norm(step.target_field(), 0)
        assert step_residual(step, params) <= 1e-12

    @pytest.mark.parametrize('parity', [Parity.COS, Parity.SIN])
    def test_target_component_is_cancelled(self, skewed, params, parity):
        step = saturation_solve((2, 3), parity, (1, 3), (1, 0), params, skewed, trunc=6)
        a = step.generator_field()
        product = full_B(a, a, params).field
        assert product.coefficient((2, 3), parity) == pytest.approx(-1.0, abs=1e-12)
        assert abs(step.gram) >= 1e-12

    def test_non_canonical_target(self, square, params):
        step = saturation_solve((-3, -1), Parity.SIN, (-2, -1), (-1, 0), params, square)
        assert step.target == (ModeIndex(3, 1), Parity.SIN)
        assert step_residual(step, params) <= 1e-10

    @pytest.mark.parametrize('l, m, n, reason', [
        ((1, 1), (1, 0), (0, 1), 'equal-norm'),
        ((3, 0), (2, 0), (1, 0), 'parallel'),
        ((3, 1), (2, 0), (1, 0), 'sum'),
    ])
    def test_rejected_pairs(self, square, params, l, m, n, reason):
        with pytest.raises(RejectedPairError) as info:
            saturation_solve(l, Parity.COS, m, n, params, square)
        assert info.value.reason == reason

    def test_equal_norm_depends_on_q(self, params):
        # ‖(1, 0)‖_q ≠ ‖(0, 1)‖_q once q1 ≠ q2
        step = saturation_solve((1, 1), Parity.COS, (1, 0), (0, 1), params, TorusGeometry(1.0, 1.3), trunc=3)
        assert step_residual(step, params) <= 1e-10

    def test_scaling(self, square, params):
        """B(a_c) + c·target = c·remainder; the product C_f·C_g scales with c."""
        step = saturation_solve((3, 1), Parity.COS, (2, 1), (1, 0), params, square)
        for c in (2.5, -0.3):
            a, remainder = step.realize(c)
            lhs = full_B(a, a, params).field + step.target_field(c)
            assert np.max(np.abs(lhs.coeffs - remainder.coeffs)) <= 1e-12 * max(1.0, abs(c))
            cf = a.coefficient(*step.generator[0]) / step.coefficients[0]
            cg = a.coefficient(*step.generator[1]) / step.coefficients[1]
            assert cf * cg == pytest.approx(c)


class TestPrescribedPair:

    @pytest.mark.parametrize('l, m, n', [
        ((3, 1), (2, 1), (1, 0)),
        ((4, 0), (3, 1), (1, -1)),
        ((0, 4), (1, 3), (-1, 1)),
        ((1, 3), (1, 2), (0, 1)),
        ((1, -3), (1, -2), (0, -1)),
    ])
    def test_pairs(self, l, m, n):
        assert prescribed_pair(l) == (ModeIndex(*m), ModeIndex(*n))


class TestLadderBuild:

    def test_base_case_is_empty(self, square, params):
        assert ladder_build(BASE_ORDER, square, params) == []

    def test_rejects_low_order(self, square, params):
        with pytest.raises(ValueError):
            ladder_build(2, square, params)

    def test_order_four_on_the_square(self, square, params):
        ladder = ladder_build(4, square, params)
        assert len(ladder) == 2 * len(modes_of_order(4))
        for step in ladder:
            assert step_residual(step, params) <= 1e-10

    @pytest.mark.parametrize('q', GEOMETRIES)
    def test_certificate_replays(self, q, params):
        g = TorusGeometry(*q)
        ladder = ladder_build(6, g, params)
        assert len(ladder) == 2 * sum(len(modes_of_order(k)) for k in (4, 5, 6))
        targets = {step.target for step in ladder}
        for k in (4, 5, 6):
            for l in modes_of_order(k):
                assert (ModeIndex(*l), Parity.COS) in targets
                assert (ModeIndex(*l), Parity.SIN) in targets
        for step in ladder:
            assert step_residual(step, params) <= 1e-10

    @pytest.mark.parametrize('q', GEOMETRIES)
    def test_generators_sit_below_their_target(self, q, params):
        for step in ladder_build(6, TorusGeometry(*q), params):
            diff = ModeIndex(step.m.m1 - step.n.m1, step.m.m2 - step.n.m2)
            for mode in (step.m, step.n, diff):
                assert mode_level(mode) < step.level
            assert step.m.m1 + step.n.m1 == step.target[0].m1
            assert step.m.m2 + step.n.m2 == step.target[0].m2

    def test_deterministic_order(self, skewed, params):
        ladder = ladder_build(5, skewed, params)
        keys = [(step.target[0].order, step.target[0].as_tuple()) for step in ladder]
        assert keys == sorted(keys)
        assert [step.target[1] for step in ladder[:2]] == [Parity.COS, Parity.SIN]

    def test_preferred_pair_is_used(self, square, params):
        ladder = ladder_build(4, square, params, preferred_pairs={(3, 1): ((2, 0), (1, 1))})
        step = next(s for s in ladder if s.target == (ModeIndex(3, 1), Parity.COS))
        assert (step.m, step.n) == (ModeIndex(2, 0), ModeIndex(1, 1))
        assert not step.substituted
        assert step_residual(step, params) <= 1e-10

    def test_rejected_preference_is_recorded(self, square, params):
        ladder = ladder_build(4, square, params, preferred_pairs={(3, 1): ((3, 0), (0, 1))})
        step = next(s for s in ladder if s.target == (ModeIndex(3, 1), Parity.COS))
        assert step.substituted
        assert step.prescribed == (ModeIndex(3, 0), ModeIndex(0, 1))
        assert step.rejected == (((ModeIndex(3, 0), ModeIndex(0, 1)), 'level'),)
        assert (step.m, step.n) == (ModeIndex(2, 1), ModeIndex(1, 0))

    def test_failure_lists_every_attempt(self, square, params):
        with mock.patch('sgcontrol.saturation.saturation_solve', side_effect=DegenerateGeometryError('flat')):
            with pytest.raises(LadderFailure) as info:
                ladder_build(4, square, params)
        assert info.value.tried
        assert all(reason in ('degenerate', 'level', 'truncation', 'parallel') for _, reason in info.value.tried)

    def test_json_certificate(self, skewed, params):
        for step in ladder_build(5, skewed, params):
            again = LadderStep.from_dict(step.to_dict(), skewed, 5)
            assert (again.target, again.m, again.n, again.generator) == (step.target, step.m, step.n, step.generator)
            assert again.coefficients == step.coefficients
            assert np.array_equal(again.remainder.coeffs, step.remainder.coeffs)
            assert step_residual(again, params) <= 1e-10


class TestCertifiedSubspace:

    def test_levels(self, square, params):
        ladder = ladder_build(5, square, params)
        assert certified_subspace(ladder, 0) == ModeSubspace.low_modes(3)
        assert ModeSubspace.low_modes(4).issubset(certified_subspace(ladder, 2))
        assert not ModeSubspace.low_modes(4).issubset(certified_subspace(ladder, 1))
        assert ModeSubspace.low_modes(5).issubset(certified_subspace(ladder, 4))


class TestFOf:

    def test_contains_its_argument(self, square, params):
        E = ModeSubspace.low_modes(1)
        assert E.issubset(F_of(E, 3, params, square))

    def test_single_mode(self, square, params):
        E = ModeSubspace([((2, 1), Parity.COS)])
        assert F_of(E, 4, params, square) == E

    def test_empty(self, square, params):
        assert len(F_of(ModeSubspace(), 3, params, square)) == 0

    @pytest.mark.parametrize('q', GEOMETRIES)
    def test_two_iterations_reach_order_four(self, q, params):
        g = TorusGeometry(*q)
        E1 = F_of(ModeSubspace.low_modes(3), 4, params, g)
        E2 = F_of(E1, 4, params, g)
        assert ModeSubspace.low_modes(4).issubset(E2)

    def test_one_iteration_reaches_off_axis_modes(self, square, params):
        E1 = F_of(ModeSubspace.low_modes(3), 4, params, square)
        assert ((3, 1), Parity.COS) in E1
        assert ((1, 3), Parity.SIN) in E1
