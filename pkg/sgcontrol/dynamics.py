"""Time integration of the controlled second-grade system in the variable U = (I - αΔ)u.

All integrators share one exponential time differencing core: the diagonal
operator L is integrated exactly, everything else (the bilinear term, the
forcing Pf and the controls) by the Runge-Kutta rule of the configured
:class:`~sgcontrol.enums.Scheme`. Step boundaries always include the knots of
every signal involved, so a piecewise-constant control is constant on each step.
"""
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, NamedTuple, Optional, Sequence

import numpy as np

from .bilinear import interaction_tensor
from .enums import Scheme
from .errors import ContractViolation, DivergenceError, GeometryMismatchError
from .signals import ControlSignal, SampledSignal
from .torus import (SobolevParams, SpectralField, TorusGeometry, _doubled, _eigenvalues, linear_rates,
                    sobolev_weights, spectral_basis)

logger = logging.getLogger(__name__)

#: Contour points used to evaluate the φ functions without cancellation.
CONTOUR_POINTS = 32

#: Default step as a fraction of the horizon.
DT_FRACTION = 1e-3

Nonlinearity = Callable[[np.ndarray, float, float, float], np.ndarray]


@dataclass(frozen=True)
class IntegratorConfig:
    """Settings shared by every integration.

    Args:
        params (SobolevParams): α and ν.
        dt (float): Optional. Nominal step; the actual grid also contains every signal knot. When
            omitted the step is ``dt_fraction`` times the horizon of each integration.
        dt_fraction (float): Step relative to the horizon, used when ``dt`` is not given.
        scheme (Scheme): ETD Runge-Kutta rule.
        forcing (ControlSignal): Optional. The external force Pf; zero when omitted.
        blowup_factor (float): Divergence is reported once ‖U‖_{V¹} exceeds this multiple of
            max(‖U(0)‖_{V¹}, 1).
    """
    params: SobolevParams
    dt: Optional[float] = None
    dt_fraction: float = DT_FRACTION
    scheme: Scheme = Scheme.ETD_RK4
    forcing: Optional[ControlSignal] = None
    blowup_factor: float = 1e6

    def __post_init__(self):
        if self.dt is not None and not self.dt > 0:
            raise ValueError('dt must be positive, got {}'.format(self.dt))
        if not 0 < self.dt_fraction <= 1:
            raise ValueError('dt_fraction must lie in (0, 1], got {}'.format(self.dt_fraction))
        if not self.blowup_factor > 1:
            raise ValueError('blowup_factor must exceed 1, got {}'.format(self.blowup_factor))
        object.__setattr__(self, 'scheme', Scheme(self.scheme))

    def step(self, T: float) -> float:
        """Nominal step of an integration over [0, T]."""
        return self.dt if self.dt is not None else self.dt_fraction * T


class Trajectory(object):
    """States of one integration on its time grid.

    Args:
        geometry (TorusGeometry): Shared by every state.
        trunc (int): Shared by every state.
        times (np.ndarray): Increasing times starting at 0.
        states (np.ndarray): Coefficient vectors, shape (len(times), 2M).
        spillover (np.ndarray): Optional. L² norm of the part of B dropped by the truncation, per time.
        params (SobolevParams): Optional. Parameters the trajectory was integrated with.
    """

    def __init__(self, geometry: TorusGeometry, trunc: int, times: np.ndarray, states: np.ndarray,
                 spillover: Optional[np.ndarray] = None, params: Optional[SobolevParams] = None):
        times = np.array(times, dtype=float)
        states = np.array(states, dtype=float)
        if times.ndim != 1 or np.any(np.diff(times) <= 0):
            raise ValueError('Trajectory times must be strictly increasing')
        if states.shape != (len(times), spectral_basis(trunc).dim):
            raise ValueError('Expected states of shape {}, got {}'.format(
                (len(times), spectral_basis(trunc).dim), states.shape))
        self.geometry = geometry
        self.trunc = trunc
        self.times = times
        self.states = states
        self.spillover = np.zeros(len(times)) if spillover is None else np.asarray(spillover, dtype=float)
        self.params = params
        for arr in (self.times, self.states, self.spillover):
            arr.flags.writeable = False

    @classmethod
    def constant(cls, U: SpectralField, horizon: float) -> 'Trajectory':
        """The trajectory staying at U on [0, T]."""
        return cls(U.geometry, U.trunc, [0.0, horizon], np.vstack([U.coeffs, U.coeffs]))

    def __len__(self) -> int:
        return len(self.times)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    def state(self, i: int) -> SpectralField:
        return SpectralField(self.geometry, self.trunc, self.states[i])

    @property
    def initial(self) -> SpectralField:
        return self.state(0)

    @property
    def final(self) -> SpectralField:
        return self.state(-1)

    def interpolate(self, t: float) -> SpectralField:
        """State at t by linear interpolation between grid points."""
        i = int(np.searchsorted(self.times, t, side='right')) - 1
        i = min(max(i, 0), len(self.times) - 2) if len(self.times) > 1 else 0
        if len(self.times) == 1:
            return self.state(0)
        w = (t - self.times[i]) / (self.times[i + 1] - self.times[i])
        w = min(max(w, 0.0), 1.0)
        return SpectralField(self.geometry, self.trunc, (1.0 - w) * self.states[i] + w * self.states[i + 1])

    def norms(self, s: float) -> np.ndarray:
        """‖U(t)‖_{V^s} at every recorded time."""
        weights = sobolev_weights(self.trunc, self.geometry, s)
        return np.sqrt(self.states * self.states @ weights)

    def enstrophy(self) -> np.ndarray:
        """‖rot U(t)‖²_{L²} at every recorded time."""
        lam = _doubled(_eigenvalues(self.trunc, self.geometry))
        return self.geometry.mass * (self.states * self.states @ lam)

    def diagnostics(self) -> Dict[str, np.ndarray]:
        """Columns of the trajectory export."""
        return {
            't': self.times,
            'v0': self.norms(0),
            'v1': self.norms(1),
            'v3': self.norms(3),
            'spillover': self.spillover,
        }

    def sup_norm(self, s: float) -> float:
        return float(np.max(self.norms(s)))

    def as_signal(self) -> SampledSignal:
        return SampledSignal(self.geometry, self.trunc, self.times, self.states)


class ETDCoefficients(NamedTuple):
    """Per-mode coefficients of one step size."""
    E: np.ndarray
    E2: np.ndarray
    phi1: np.ndarray
    phi2: np.ndarray
    Q: np.ndarray
    f1: np.ndarray
    f2: np.ndarray
    f3: np.ndarray


def etd_coefficients(rates: np.ndarray, h: float) -> ETDCoefficients:
    """Exponential and φ-function weights for ∂_tx = -rates·x + N over a step h.

    Every coefficient already contains its factor h. The φ functions are averaged over a
    circle of radius one around z = -rates·h.

    See Also:
        - Kassam & Trefethen, Fourth-order time-stepping for stiff PDEs, SIAM J. Sci. Comput. 26 (2005).
    """
    z = -rates * h
    r = np.exp(2j * math.pi * (np.arange(CONTOUR_POINTS) + 0.5) / CONTOUR_POINTS)
    zr = z[:, None] + r[None, :]
    ez = np.exp(zr)

    def mean(values):
        return np.real(np.mean(values, axis=1))

    return ETDCoefficients(
        E=np.exp(z),
        E2=np.exp(z / 2.0),
        phi1=h * mean((ez - 1.0) / zr),
        phi2=h * mean((ez - 1.0 - zr) / zr ** 2),
        Q=h * mean((np.exp(zr / 2.0) - 1.0) / zr),
        f1=h * mean((-4.0 - zr + ez * (4.0 - 3.0 * zr + zr ** 2)) / zr ** 3),
        f2=h * mean((2.0 + zr + ez * (zr - 2.0)) / zr ** 3),
        f3=h * mean((-4.0 - 3.0 * zr - zr ** 2 + ez * (4.0 - zr)) / zr ** 3),
    )


class _CoefficientCache(object):

    def __init__(self, rates: np.ndarray):
        self.rates = rates
        self._cache = {}  # type: Dict[float, ETDCoefficients]

    def __call__(self, h: float) -> ETDCoefficients:
        coeffs = self._cache.get(h)
        if coeffs is None:
            coeffs = self._cache[h] = etd_coefficients(self.rates, h)
        return coeffs


def _etd_rk2_step(x: np.ndarray, t: float, h: float, c: ETDCoefficients, N: Nonlinearity) -> np.ndarray:
    t1 = t + h
    n0 = N(x, t, t, t1)
    a = c.E * x + c.phi1 * n0
    return a + c.phi2 * (N(a, t1, t, t1) - n0)


def _etd_rk4_step(x: np.ndarray, t: float, h: float, c: ETDCoefficients, N: Nonlinearity) -> np.ndarray:
    t1, tm = t + h, t + 0.5 * h
    nx = N(x, t, t, t1)
    a = c.E2 * x + c.Q * nx
    na = N(a, tm, t, t1)
    b = c.E2 * x + c.Q * na
    nb = N(b, tm, t, t1)
    d = c.E2 * a + c.Q * (2.0 * nb - nx)
    nd = N(d, t1, t, t1)
    return c.E * x + c.f1 * nx + 2.0 * c.f2 * (na + nb) + c.f3 * nd


_STEPPERS = {
    Scheme.ETD_RK2: _etd_rk2_step,
    Scheme.ETD_RK4: _etd_rk4_step,
}


def time_grid(T: float, dt: float, signals: Sequence[Optional[ControlSignal]] = ()) -> np.ndarray:
    """Uniform grid of step ≤ dt on [0, T] merged with the knots of ``signals``.

    Uniform points closer than 1e-9·T to a knot are dropped in favour of the knot.
    """
    if not T > 0:
        raise ValueError('Horizon must be positive, got {}'.format(T))
    n = max(1, int(math.ceil(T / dt - 1e-9)))
    uniform = np.linspace(0.0, T, n + 1)
    knots = [np.asarray(s.knots(), dtype=float) for s in signals if s is not None]
    if not knots:
        return uniform
    knots = np.concatenate(knots)
    tol = 1e-9 * T
    knots = np.unique(knots[(knots > tol) & (knots < T - tol)])
    if len(knots) > 1:
        knots = knots[np.concatenate([[True], np.diff(knots) > 1e-12 * T])]
    if not len(knots):
        return uniform
    pos = np.searchsorted(knots, uniform)
    gap_right = np.abs(knots[np.minimum(pos, len(knots) - 1)] - uniform)
    gap_left = np.abs(knots[np.maximum(pos - 1, 0)] - uniform)
    keep = np.minimum(gap_left, gap_right) > tol
    keep[0] = keep[-1] = True
    return np.union1d(uniform[keep], knots)


def _check_signal(signal: Optional[ControlSignal], U0: SpectralField, T: float, what: str):
    if signal is None:
        return
    if signal.geometry != U0.geometry or signal.trunc != U0.trunc:
        raise GeometryMismatchError('{} does not share the geometry and truncation of the initial state'.format(
            what))
    if signal.horizon < T * (1.0 - 1e-12):
        raise ContractViolation('{} ends at {} before the horizon {}'.format(what, signal.horizon, T))


def _step_values(signal: Optional[ControlSignal], dim: int) -> Callable[[float, float, float], np.ndarray]:
    if signal is None:
        zero = np.zeros(dim)
        return lambda t, t0, t1: zero
    return signal.step_value


def _run(U0: SpectralField, N: Nonlinearity, cfg: IntegratorConfig, T: float,
         signals: Sequence[Optional[ControlSignal]], spill: Callable[[np.ndarray, float], float],
         label: str) -> Trajectory:
    times = time_grid(T, cfg.step(T), signals)
    rates = linear_rates(U0.trunc, U0.geometry, cfg.params)
    coefficients = _CoefficientCache(rates)
    step = _STEPPERS[cfg.scheme]
    weights = sobolev_weights(U0.trunc, U0.geometry, 1)
    ceiling = cfg.blowup_factor * max(U0.norm(1), 1.0)

    states = np.empty((len(times), len(rates)))
    spillover = np.empty(len(times))
    x = np.array(U0.coeffs)
    states[0] = x
    spillover[0] = spill(x, 0.0)
    logger.debug('%s: %d steps on [0, %g] with %s', label, len(times) - 1, T, cfg.scheme.value)
    for i in range(len(times) - 1):
        t, h = times[i], times[i + 1] - times[i]
        x = step(x, t, h, coefficients(h), N)
        norm = math.sqrt(float(np.dot(weights, x * x)))
        if not math.isfinite(norm) or norm > ceiling:
            logger.debug('%s diverged at t=%g', label, times[i + 1])
            raise DivergenceError(float(times[i + 1]), norm)
        states[i + 1] = x
        spillover[i + 1] = spill(x, times[i + 1])
    return Trajectory(U0.geometry, U0.trunc, times, states, spillover, cfg.params)


def integrate_plain(U0: SpectralField, eta: Optional[ControlSignal], cfg: IntegratorConfig,
                    T: float) -> Trajectory:
    """Solves ∂_tU + LU + B(U, U) = Pf + η, U(0) = U0.

    Args:
        U0 (SpectralField): Initial transformed state.
        eta (ControlSignal): Control; ``None`` means η = 0.
        cfg (IntegratorConfig): Scheme, step, parameters and forcing.
        T (float): Horizon.

    Returns:
        Trajectory: States on the merged time grid.

    Raises:
        DivergenceError: The V¹ norm blew up.
        GeometryMismatchError: A signal does not match U0.
    """
    _check_signal(eta, U0, T, 'Control')
    _check_signal(cfg.forcing, U0, T, 'Forcing')
    tensor = interaction_tensor(U0.trunc, U0.geometry, cfg.params.alpha)
    control = _step_values(eta, tensor.dim)
    forcing = _step_values(cfg.forcing, tensor.dim)

    def N(x, t, t0, t1):
        return -tensor.apply(x, x) + forcing(t, t0, t1) + control(t, t0, t1)

    return _run(U0, N, cfg, T, [eta, cfg.forcing], lambda x, t: tensor.spillover(x, x), 'plain')


def integrate_extended(U0: SpectralField, eta: Optional[ControlSignal], zeta: Optional[ControlSignal],
                       cfg: IntegratorConfig, T: float) -> Trajectory:
    """Solves ∂_tU + L(U + ζ) + B(U + ζ, U + ζ) = Pf + η, U(0) = U0.

    With ζ = 0 the result is bit-for-bit the one of :func:`integrate_plain`.

    Raises:
        DivergenceError: The V¹ norm blew up.
        GeometryMismatchError: A signal does not match U0.
    """
    _check_signal(eta, U0, T, 'Control')
    _check_signal(zeta, U0, T, 'Shift')
    _check_signal(cfg.forcing, U0, T, 'Forcing')
    tensor = interaction_tensor(U0.trunc, U0.geometry, cfg.params.alpha)
    rates = linear_rates(U0.trunc, U0.geometry, cfg.params)
    control = _step_values(eta, tensor.dim)
    shift = _step_values(zeta, tensor.dim)
    forcing = _step_values(cfg.forcing, tensor.dim)

    def N(x, t, t0, t1):
        z = shift(t, t0, t1)
        y = x + z
        return -tensor.apply(y, y) + forcing(t, t0, t1) + control(t, t0, t1) - rates * z

    def spill(x, t):
        y = x + shift(t, t, t)
        return tensor.spillover(y, y)

    return _run(U0, N, cfg, T, [eta, zeta, cfg.forcing], spill, 'extended')


def integrate_perturbed(W0: SpectralField, Vcal: Optional[ControlSignal], f: Optional[ControlSignal],
                        cfg: IntegratorConfig, T: float) -> Trajectory:
    """Solves ∂_tW + LW + B(W) + B(W, V) + B(V, W) = Pf around a background V.

    ``f`` is the forcing of the perturbed system; ``cfg.forcing`` is not used.

    Raises:
        DivergenceError: The V¹ norm blew up.
    """
    _check_signal(Vcal, W0, T, 'Background')
    _check_signal(f, W0, T, 'Forcing')
    tensor = interaction_tensor(W0.trunc, W0.geometry, cfg.params.alpha)
    background = _step_values(Vcal, tensor.dim)
    forcing = _step_values(f, tensor.dim)

    def N(x, t, t0, t1):
        v = background(t, t0, t1)
        return -(tensor.apply(x, x + v) + tensor.apply(v, x)) + forcing(t, t0, t1)

    return _run(W0, N, cfg, T, [Vcal, f], lambda x, t: tensor.spillover(x, x), 'perturbed')


def kernel_K(f: ControlSignal, cfg: IntegratorConfig, T: float) -> Trajectory:
    """Z = Kf, the solution of ∂_tZ + LZ = Pf with Z(0) = 0.

    Each mode is integrated by variation of constants; on a step where f is constant the
    update is exact, otherwise f is interpolated linearly across the step.
    """
    if f.horizon < T * (1.0 - 1e-12):
        raise ContractViolation('Signal ends at {} before the horizon {}'.format(f.horizon, T))
    times = time_grid(T, cfg.step(T), [f])
    rates = linear_rates(f.trunc, f.geometry, cfg.params)
    coefficients = _CoefficientCache(rates)
    states = np.zeros((len(times), len(rates)))
    z = np.zeros(len(rates))
    for i in range(len(times) - 1):
        t0, t1 = times[i], times[i + 1]
        c = coefficients(t1 - t0)
        f0 = f.step_value(t0, t0, t1)
        f1 = f.step_value(t1, t0, t1)
        z = c.E * z + c.phi1 * f0 + c.phi2 * (f1 - f0)
        states[i + 1] = z
    return Trajectory(f.geometry, f.trunc, times, states, params=cfg.params)


@dataclass
class GronwallReport:
    """Both sides of ‖rot W(t)‖² ≤ (‖rot W(0)‖² + ‖f‖²_{L∞V¹}) exp{2t(1 + ‖v‖_{L∞V⁴})}."""
    times: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    tolerance: float = 1e-8
    violations: List[int] = field(default_factory=list)

    @property
    def margin(self) -> np.ndarray:
        return self.rhs - self.lhs

    @property
    def holds(self) -> bool:
        return not self.violations


def gronwall_monitor(traj: Trajectory, v: Optional[ControlSignal], f: Optional[ControlSignal],
                     params: Optional[SobolevParams] = None) -> GronwallReport:
    """Evaluates the a priori L² bound of the perturbed system along ``traj``.

    ``v`` is the transformed background V handed to :func:`integrate_perturbed`; the bound uses
    (I - αΔ)^{-1}V. Margins below -1e-8·max(rhs, 1) are reported as violations, not raised.
    """
    params = params or traj.params
    if params is None:
        raise ValueError('The trajectory carries no parameters; pass them explicitly')
    lhs = traj.enstrophy()
    f_sup = f.sup_norm(1) if f is not None else 0.0
    v_sup = 0.0
    if v is not None:
        factor = 1.0 + params.alpha * _doubled(_eigenvalues(v.trunc, v.geometry))
        weights = sobolev_weights(v.trunc, v.geometry, 4)
        values = v.sample(v.sample_times()) / factor
        v_sup = math.sqrt(float(np.max(values * values @ weights)))
    rhs = (lhs[0] + f_sup ** 2) * np.exp(2.0 * traj.times * (1.0 + v_sup))
    report = GronwallReport(traj.times, lhs, rhs)
    slack = report.margin + report.tolerance * np.maximum(rhs, 1.0)
    report.violations = [int(i) for i in np.nonzero(slack < 0)[0]]
    if report.violations:
        logger.warning('Gronwall bound violated at %d of %d times', len(report.violations), len(traj))
    return report
