"""End-to-end synthesis of a low-mode control steering u0 to a neighbourhood of uT.

The construction runs in the transformed variable U = (I - αΔ)u:

1. the straight line Ū(t) = A + tD between U0 and U_T is exactly controllable by
   η = ∂_tŪ + LŪ + B(Ū) - Pf;
2. η is projected onto H^k_q, with k raised until the end state is within ε;
3. stage by stage, the control is pushed down the saturation ladder, from the
   level 2(k - 3) to H³_q, each stage spending a budget ε/2^{levels-j}.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Optional, Tuple

import numpy as np

from .bilinear import interaction_tensor
from .convexify import (OscillationProfile, SaturatedControl, convex_decompose, lift_extended_control,
                        oscillation_slots)
from .dynamics import IntegratorConfig, Trajectory, integrate_plain
from .errors import ContractViolation, StageFailure
from .saturation import BASE_ORDER, LadderStep, certified_subspace, ladder_build
from .signals import ControlSignal, MaskedSignal, PiecewiseConstantSignal, PolynomialSignal, SumSignal
from .torus import (ModeSubspace, SobolevParams, SpectralField, helmholtz, linear_rates, sobolev_norm,
                    spectral_basis)

logger = logging.getLogger(__name__)

_GAUSS = np.polynomial.legendre.leggauss(3)


@dataclass(frozen=True)
class PipelineConfig:
    """Settings of a synthesis run.

    Args:
        T (float): Horizon.
        epsilon (float): Target accuracy, V¹ norm of the transformed end state.
        trunc (int): Galerkin truncation N_trunc.
        integrator (IntegratorConfig): Step, scheme and parameters of every verification run.
        k_project (int): First projection order tried.
        segments (int): Uniform segments of the piecewise-constant approximation of each stage.
        oscillation_start (int): Oscillations per segment at the first attempt of a stage.
        oscillation_cap (int): Largest oscillation count before a stage fails.
        ramp_fraction (float): Lift ramp as a fraction of the shortest shift segment, below 1/2.
        lift_per_oscillation (float): Lift sharpness l per oscillation count k.
        ramp_substeps (int): Integrator knots inside every lift ramp.
        high_mode_fraction (float): Energy share of the upper half of the spectrum above which the
            data is flagged as leaving the smooth regime.
    """
    T: float
    epsilon: float
    trunc: int
    integrator: IntegratorConfig
    k_project: int = BASE_ORDER
    segments: int = 16
    oscillation_start: int = 16
    oscillation_cap: int = 1024
    ramp_fraction: float = 0.45
    lift_per_oscillation: float = 0.5
    ramp_substeps: int = 4
    high_mode_fraction: float = 0.1

    def __post_init__(self):
        if not self.T > 0:
            raise ValueError('Horizon must be positive, got {}'.format(self.T))
        if not self.epsilon > 0:
            raise ValueError('epsilon must be positive, got {}'.format(self.epsilon))
        if self.k_project < BASE_ORDER:
            raise ValueError('k_project must be at least {}, got {}'.format(BASE_ORDER, self.k_project))
        if self.trunc < self.k_project:
            raise ValueError('Truncation {} is below k_project {}'.format(self.trunc, self.k_project))
        if self.segments < 1 or self.oscillation_start < 1 or self.oscillation_cap < self.oscillation_start:
            raise ValueError('Invalid oscillation schedule')
        if not 0 < self.ramp_fraction < 0.5:
            raise ValueError('ramp_fraction must lie in (0, 1/2), got {}'.format(self.ramp_fraction))
        if not self.lift_per_oscillation > 0 or self.ramp_substeps < 1:
            raise ValueError('Invalid lift settings')

    @property
    def params(self) -> SobolevParams:
        return self.integrator.params


@dataclass
class StageReport:
    """Outcome of the projection (stage 0) or of one descent stage."""
    stage: int
    support: ModeSubspace
    error: float
    budget: float
    passed: bool
    k: int = 0
    attempts: List[Tuple[int, float]] = field(default_factory=list)
    passthrough: bool = False

    def to_dict(self) -> dict:
        return {
            'stage': self.stage,
            'support_size': len(self.support),
            'support_max_order': self.support.max_order,
            'error': self.error,
            'budget': self.budget,
            'passed': self.passed,
            'k': self.k,
            'attempts': [list(a) for a in self.attempts],
            'passthrough': self.passthrough,
        }


def reference_control(u0: SpectralField, uT: SpectralField, f: Optional[ControlSignal], T: float,
                      p: SobolevParams, samples: int = 101) -> Tuple[Trajectory, ControlSignal]:
    """Ū(t) = (I - αΔ)((T - t)u0 + t·uT)/T and the control holding the system on it.

    With A = (I - αΔ)u0 and D = (I - αΔ)(uT - u0)/T, Ū = A + tD and

        η = (D + LA + B(A)) + t(LD + B(A, D) + B(D, A)) + t²B(D) - Pf.

    Returns:
        tuple: Ū sampled at ``samples`` uniform times, and η.
    """
    u0.check_compatible(uT)
    A = helmholtz(u0, p)
    D = helmholtz(uT - u0, p) * (1.0 / T)
    tensor = interaction_tensor(u0.trunc, u0.geometry, p.alpha)
    rates = linear_rates(u0.trunc, u0.geometry, p)
    a, d = A.coeffs, D.coeffs
    coefficients = [
        d + rates * a + tensor.apply(a, a),
        rates * d + tensor.apply(a, d) + tensor.apply(d, a),
        tensor.apply(d, d),
    ]
    eta = PolynomialSignal(u0.geometry, u0.trunc, T, coefficients)
    if f is not None:
        eta = SumSignal([eta, f], [1.0, -1.0])
    times = np.linspace(0.0, T, max(samples, 2))
    Ubar = Trajectory(u0.geometry, u0.trunc, times, a[None, :] + times[:, None] * d[None, :], params=p)
    return Ubar, eta


def project_control(eta: ControlSignal, k: int) -> ControlSignal:
    """P_k η: every coefficient with |m| > k is zeroed at every time."""
    if int(k) != k or k < 1:
        raise ValueError('Projection order must be a positive integer, got {}'.format(k))
    if k >= eta.trunc:
        return eta
    return MaskedSignal(eta, ModeSubspace.low_modes(k))


def _segment_grid(eta: ControlSignal, segments: int) -> np.ndarray:
    """Uniform segments refined at every knot of η, so each piece sees a smooth signal."""
    T = eta.horizon
    uniform = np.linspace(0.0, T, segments + 1)
    knots = eta.knots()
    grid = np.union1d(uniform, knots[(knots > 0.0) & (knots < T)])
    grid = grid[np.concatenate([[True], np.diff(grid) > 1e-12 * T])]
    grid[-1] = T
    return grid


def _level_averages(eta: ControlSignal, grid: np.ndarray, slots: List[int]) -> np.ndarray:
    """Mean of the given coefficients of η over every piece of the grid, shape (pieces, slots)."""
    nodes, weights = _GAUSS
    averages = np.empty((len(grid) - 1, len(slots)))
    for i, (t0, t1) in enumerate(zip(grid[:-1], grid[1:])):
        mid, half = 0.5 * (t0 + t1), 0.5 * (t1 - t0)
        values = np.array([eta.step_value(mid + half * x, t0, t1)[slots] for x in nodes])
        averages[i] = 0.5 * np.dot(weights, values)
    return averages


def _end_error(U0: SpectralField, eta: ControlSignal, reference: SpectralField, integ: IntegratorConfig,
               T: float) -> float:
    return sobolev_norm(integrate_plain(U0, eta, integ, T).final - reference, 1)


def _lower(lower: ControlSignal, steps: List[LadderStep], grid: np.ndarray, averages: np.ndarray, k: int,
           cfg: PipelineConfig) -> ControlSignal:
    """One attempt of a stage.

    ``lower`` is the part of η_j below the stage level and is kept as is. The level coefficients,
    averaged over each piece, are realized through the ladder and turned into an oscillating
    shift. A piece gets periods in proportion to its width times its level magnitude, k per
    uniform segment at the mean magnitude, so every period shrinks as k doubles.
    """
    g, trunc, T = lower.geometry, lower.trunc, lower.horizon
    widths = np.diff(grid)
    magnitude = np.abs(averages).sum(axis=1)
    mean = float(np.dot(widths, magnitude)) / T
    tau = T / (cfg.segments * k)

    shift_times, shift_values, base_values = [], [], []
    for i, (t0, t1) in enumerate(zip(grid[:-1], grid[1:])):
        tilde = SpectralField.zeros(g, trunc)
        generators = []
        for column, step in enumerate(steps):
            if averages[i, column] != 0.0:
                generator, remainder = step.realize(float(averages[i, column]))
                tilde = tilde + remainder
                generators.append(generator)
        if generators:
            periods = max(1, int(math.ceil(widths[i] * max(magnitude[i], mean) / (tau * mean) - 1e-9)))
        else:
            generators, periods = [SpectralField.zeros(g, trunc)], 1
        dec = convex_decompose(SaturatedControl(tilde, [1.0] * len(generators), generators))
        times, index = oscillation_slots(OscillationProfile(dec, periods, t1 - t0), start=t0)
        directions = np.array([rho.coeffs for rho in dec.directions])
        shift_times.append(times[:-1])
        shift_values.append(directions[index])
        base_values.append(dec.eta.coeffs)

    breakpoints = np.append(np.concatenate(shift_times), T)
    zeta = PiecewiseConstantSignal(g, trunc, breakpoints, np.vstack(shift_values))
    eta_tilde = PiecewiseConstantSignal(g, trunc, grid, np.array(base_values))
    ramp = cfg.ramp_fraction * zeta.shortest_segment()
    l = max(1, int(math.ceil(cfg.lift_per_oscillation * k)))
    return SumSignal([lower, lift_extended_control(eta_tilde, zeta, ramp, l, cfg.ramp_substeps)])


def stage_descend(eta_j: ControlSignal, ladder: List[LadderStep], budget: float, cfg: PipelineConfig,
                  U0: SpectralField, stage: int) -> Tuple[ControlSignal, StageReport]:
    """Rewrites a control supported in E_j as one supported in E_{j-1}.

    The coefficients of η_j on the level-j modes are averaged over the pieces of a grid that
    refines the uniform segments at every knot of η_j, realized through the ladder, convexified
    into an oscillating shift and lifted back into an additive control. The rest of η_j is
    carried over unchanged. The end state of the result is compared with the one of η_j; the
    oscillation count doubles until the difference is within ``budget``.

    Raises:
        StageFailure: The budget is still missed at ``cfg.oscillation_cap`` oscillations.
    """
    steps = [step for step in ladder if step.level == stage]
    support = certified_subspace(ladder, stage - 1)
    grid = _segment_grid(eta_j, cfg.segments)
    active = False
    if steps:
        basis = spectral_basis(eta_j.trunc)
        slots = [basis.position(*step.target)[0] for step in steps]
        averages = _level_averages(eta_j, grid, slots)
        active = bool(np.any(averages != 0.0))
    if not active:
        logger.debug('Stage %d: nothing at this level, passing through', stage)
        return eta_j, StageReport(stage, support, 0.0, budget, True, passthrough=True)

    T = eta_j.horizon
    integ = cfg.integrator
    lower = MaskedSignal(eta_j, support)
    reference = integrate_plain(U0, eta_j, integ, T).final
    logger.debug('Stage %d: %d pieces, %d level modes', stage, len(grid) - 1, len(steps))
    attempts = []
    k = cfg.oscillation_start
    while k <= cfg.oscillation_cap:
        candidate = _lower(lower, steps, grid, averages, k, cfg)
        error = _end_error(U0, candidate, reference, integ, T)
        attempts.append((k, error))
        logger.debug('Stage %d, k=%d: error %.3e (budget %.3e)', stage, k, error, budget)
        if error <= budget:
            logger.info('Stage %d passed with k=%d: error %.3e <= %.3e', stage, k, error, budget)
            return candidate, StageReport(stage, support, error, budget, True, k, attempts)
        k *= 2
    raise StageFailure(stage, min(e for _, e in attempts), budget, attempts)


@dataclass
class SynthesisResult:
    """Control, trace and errors of :func:`synthesize`."""
    eta_final: ControlSignal
    trace: List[StageReport]
    projection_order: int
    projection_error: float
    achieved: float
    u_error: float
    u_bound: float
    high_mode_fraction: float
    flagged: bool
    final_state: Optional[SpectralField] = None

    @property
    def budget_total(self) -> float:
        return sum(r.budget for r in self.trace)

    def to_dict(self) -> dict:
        return {
            'projection_order': self.projection_order,
            'projection_error': self.projection_error,
            'achieved': self.achieved,
            'u_error_V3': self.u_error,
            'u_bound_V3': self.u_bound,
            'high_mode_fraction': self.high_mode_fraction,
            'flagged': self.flagged,
            'budget_total': self.budget_total,
            'stages': [r.to_dict() for r in self.trace],
        }


def norm_transfer_ratio(X: SpectralField, p: SobolevParams) -> float:
    """‖(I - αΔ)^{-1}X‖_{V³} · min(1, α) / ‖X‖_{V¹}, at most 1 for every X ≠ 0."""
    norm = sobolev_norm(X, 1)
    if norm == 0.0:
        return 0.0
    return sobolev_norm(helmholtz(X, p, inverse=True), 3) * min(1.0, p.alpha) / norm


def high_mode_energy(u: SpectralField) -> float:
    """Share of the L² energy carried by modes above half the truncation."""
    total = sobolev_norm(u, 0) ** 2
    if total == 0.0:
        return 0.0
    high = u - u.project(u.trunc // 2)
    return sobolev_norm(high, 0) ** 2 / total


def _check_support(eta: ControlSignal, order: int):
    mask = ModeSubspace.low_modes(order).mask(eta.trunc)
    values = eta.sample(eta.sample_times())
    if np.any(values[:, ~mask] != 0.0):
        raise ContractViolation('Synthesized control leaves H^{}_q'.format(order))


def synthesize(u0: SpectralField, uT: SpectralField, f: Optional[ControlSignal],
               cfg: PipelineConfig) -> SynthesisResult:
    """A control supported in H³_q driving u0 to within about 3ε of uT.

    Raises:
        StageFailure: The projection or a stage missed its budget; ``trace`` holds the reports
            of the completed stages.
    """
    u0.check_compatible(uT)
    if u0.trunc != cfg.trunc:
        raise ContractViolation('Fields have truncation {}, configuration {}'.format(u0.trunc, cfg.trunc))
    p, T = cfg.params, cfg.T
    integ = replace(cfg.integrator, forcing=f)
    fraction = max(high_mode_energy(u0), high_mode_energy(uT))
    flagged = fraction > cfg.high_mode_fraction
    if flagged:
        logger.warning('%.1f%% of the data energy sits in the upper half of the spectrum', 100 * fraction)

    U0, UT = helmholtz(u0, p), helmholtz(uT, p)
    _, eta = reference_control(u0, uT, f, T, p)

    trace = []
    attempts = []
    k = cfg.k_project
    while True:
        eta_k = project_control(eta, k)
        error = _end_error(U0, eta_k, UT, integ, T)
        attempts.append((k, error))
        logger.debug('Projection onto H^%d: error %.3e', k, error)
        if error <= cfg.epsilon:
            break
        if k >= cfg.trunc:
            raise StageFailure(0, min(e for _, e in attempts), cfg.epsilon, attempts)
        k += 1
    trace.append(StageReport(0, ModeSubspace.low_modes(k), error, cfg.epsilon, True, k, attempts))
    logger.info('Projected onto H^%d with error %.3e', k, error)

    levels = 2 * (k - BASE_ORDER)
    ladder = ladder_build(k, u0.geometry, p, trunc=cfg.trunc) if levels else []
    pipeline_cfg = replace(cfg, integrator=integ)
    current = eta_k
    for j in range(levels, 0, -1):
        budget = cfg.epsilon / 2 ** (levels - j)
        try:
            current, report = stage_descend(current, ladder, budget, pipeline_cfg, U0, j)
        except StageFailure as e:
            e.trace = list(trace)
            raise
        trace.append(report)

    _check_support(current, BASE_ORDER)
    final = integrate_plain(U0, current, integ, T).final
    miss = final - UT
    achieved = sobolev_norm(miss, 1)
    u_error = sobolev_norm(helmholtz(miss, p, inverse=True), 3)
    u_bound = achieved / min(1.0, p.alpha)
    logger.info('Synthesis finished: V1 error %.3e (epsilon %.3e), %d stages', achieved, cfg.epsilon, levels)
    return SynthesisResult(eta_final=current, trace=trace, projection_order=k, projection_error=error,
                           achieved=achieved, u_error=u_error, u_bound=u_bound, high_mode_fraction=fraction,
                           flagged=flagged, final_state=final)
