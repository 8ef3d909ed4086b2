"""Convexification of saturated controls and the relaxation that realizes them.

A control η̄ = η̃ - Σ α_j B(ρ̃^j) is rewritten as a convex combination

    B(U) - η̄ = Σ λ_j (B(U + ρ^j) + Lρ^j) - η̃,

and the convex combination is produced in time by a piecewise-constant shift
ψ_k that visits the directions ρ^j for fractions λ_j of each of k periods. The
shift is finally absorbed into an additive control through its C¹ lift ζ_l.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, Iterable, List, Mapping, Optional, Tuple

import numpy as np

from .bilinear import full_B, interaction_tensor
from .builders import FieldBuilder
from .dynamics import IntegratorConfig, Trajectory, kernel_K
from .errors import ContractViolation, GeometryMismatchError, RampTooWideError
from .signals import ControlSignal, PiecewiseConstantSignal, RampedSignal, SumSignal
from .torus import ModeSubspace, SobolevParams, SpectralField, TorusGeometry, linear_rates, op_L, sobolev_weights

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SaturatedControl:
    """A control of the form η̄ = η̃ - Σ α_j B(ρ̃^j).

    Args:
        tilde_eta (SpectralField): The additive part η̃.
        alphas (Sequence[float]): Positive weights α_j.
        rhotildes (Sequence[SpectralField]): Directions ρ̃^j.
    """
    tilde_eta: SpectralField
    alphas: Tuple[float, ...]
    rhotildes: Tuple[SpectralField, ...]

    def __post_init__(self):
        object.__setattr__(self, 'alphas', tuple(float(a) for a in self.alphas))
        object.__setattr__(self, 'rhotildes', tuple(self.rhotildes))
        if len(self.alphas) != len(self.rhotildes):
            raise ValueError('One weight per direction is required')
        for rho in self.rhotildes:
            self.tilde_eta.check_compatible(rho)

    def value(self, p: SobolevParams) -> SpectralField:
        """η̄ itself."""
        out = self.tilde_eta
        for a, rho in zip(self.alphas, self.rhotildes):
            out = out - a * full_B(rho, rho, p).field
        return out


@dataclass(frozen=True)
class ConvexDecomposition:
    """η̃ together with the weights λ_j and directions ρ^j of a convex decomposition.

    The directions come in antisymmetric pairs: with m = 2k, ρ^{j+k} = -ρ^j and λ_{j+k} = λ_j.
    """
    eta: SpectralField
    weights: Tuple[float, ...]
    directions: Tuple[SpectralField, ...]

    def __post_init__(self):
        object.__setattr__(self, 'weights', tuple(float(w) for w in self.weights))
        object.__setattr__(self, 'directions', tuple(self.directions))
        m = len(self.weights)
        if m == 0 or m % 2 or len(self.directions) != m:
            raise ContractViolation('A decomposition needs an even, nonzero number of weighted directions')
        if any(w <= 0 for w in self.weights):
            raise ContractViolation('Decomposition weights must be positive')
        if abs(math.fsum(self.weights) - 1.0) > 1e-14:
            raise ContractViolation('Decomposition weights sum to {!r}, not 1'.format(math.fsum(self.weights)))
        k = m // 2
        for j in range(k):
            self.eta.check_compatible(self.directions[j])
            if self.weights[j] != self.weights[j + k] or not np.array_equal(
                    self.directions[j].coeffs, -self.directions[j + k].coeffs):
                raise ContractViolation('Directions {} and {} are not an antisymmetric pair'.format(j, j + k))

    def __len__(self) -> int:
        return len(self.weights)

    @property
    def geometry(self) -> TorusGeometry:
        return self.eta.geometry

    @property
    def trunc(self) -> int:
        return self.eta.trunc

    def support(self) -> ModeSubspace:
        out = self.eta.support()
        for rho in self.directions:
            out = out | rho.support()
        return out

    def mean_direction(self) -> SpectralField:
        """Σ λ_j ρ^j, zero up to rounding."""
        return self.eta.with_coeffs(sum(w * rho.coeffs for w, rho in zip(self.weights, self.directions)))

    def averaged_rhs(self, U: SpectralField, p: SobolevParams) -> SpectralField:
        """Σ λ_j (B(U + ρ^j) + Lρ^j) - η."""
        out = np.zeros(U.basis.dim)
        for w, rho in zip(self.weights, self.directions):
            shifted = U + rho
            out += w * (full_B(shifted, shifted, p).field.coeffs + op_L(rho, p).coeffs)
        return U.with_coeffs(out - self.eta.coeffs)

    def to_dict(self) -> dict:
        return {
            'eta': self.eta.to_dict(),
            'lambdas': list(self.weights),
            'rhos': [rho.to_dict() for rho in self.directions],
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'ConvexDecomposition':
        eta = SpectralField.from_dict(data['eta'])
        rhos = [SpectralField.from_dict(r, eta.geometry, eta.trunc) for r in data['rhos']]
        return cls(eta, data['lambdas'], rhos)


def convex_decompose(target: SaturatedControl) -> ConvexDecomposition:
    """Splits η̄ = η̃ - Σ α_j B(ρ̃^j) into λ_j = α_j / 2α and ρ^j = ±√α ρ̃^j, α = Σ α_j.

    Raises:
        ContractViolation: A weight is not positive or no direction is given.
    """
    if not target.alphas:
        raise ContractViolation('At least one direction is required')
    if any(not a > 0 for a in target.alphas):
        raise ContractViolation('Weights α_j must be positive, got {}'.format(list(target.alphas)))
    alpha = math.fsum(target.alphas)
    scale = math.sqrt(alpha)
    half = [a / (2.0 * alpha) for a in target.alphas]
    directions = [scale * rho for rho in target.rhotildes]
    # the halves must sum to exactly 1/2; move the rounding onto the largest weight
    drift = 0.5 - math.fsum(half)
    half[int(np.argmax(half))] += drift
    return ConvexDecomposition(target.tilde_eta, half + half, directions + [-d for d in directions])


@dataclass(frozen=True)
class OscillationProfile:
    """ψ_k(t) = φ(kt/T) for the 1-periodic φ visiting ρ^j for a fraction λ_j of each period."""
    decomposition: ConvexDecomposition
    k: int
    T: float

    def __post_init__(self):
        if int(self.k) != self.k or self.k < 1:
            raise ValueError('Oscillation count must be a positive integer, got {}'.format(self.k))
        if not self.T > 0:
            raise ValueError('Horizon must be positive, got {}'.format(self.T))
        object.__setattr__(self, 'k', int(self.k))

    @property
    def period(self) -> float:
        return self.T / self.k


def oscillation_slots(prof: OscillationProfile, start: float = 0.0) -> Tuple[np.ndarray, np.ndarray]:
    """Breakpoints and direction indices of ψ_k placed on [start, start + T].

    Returns:
        tuple: ``(times, index)`` with ``len(times) == len(index) + 1``; slot i holds
        ``directions[index[i]]``.
    """
    weights = prof.decomposition.weights
    offsets = np.concatenate([[0.0], np.cumsum(weights)[:-1]])
    periods = np.arange(prof.k)
    times = (periods[:, None] + offsets[None, :]).ravel()
    times = np.append(start + prof.T * times / prof.k, start + prof.T)
    index = np.tile(np.arange(len(weights)), prof.k)
    return times, index


def build_psi_k(prof: OscillationProfile) -> PiecewiseConstantSignal:
    """ψ_k as a piecewise-constant signal on [0, T]."""
    times, index = oscillation_slots(prof)
    dec = prof.decomposition
    values = np.array([rho.coeffs for rho in dec.directions])[index]
    return PiecewiseConstantSignal(dec.geometry, dec.trunc, times, values, dec.support())


def _merge_times(*grids: np.ndarray, horizon: float) -> np.ndarray:
    times = np.unique(np.concatenate(grids))
    times = times[(times >= 0.0) & (times <= horizon)]
    keep = np.concatenate([[True], np.diff(times) > 1e-12 * horizon])
    times = times[keep]
    times[-1] = horizon
    return times


def compute_fk(VN: Trajectory, prof: OscillationProfile, p: SobolevParams) -> PiecewiseConstantSignal:
    """f_k = g_k + h_k with g_k = Lψ_k - Σλ_jLρ^j and h_k = B(V_N + ψ_k) - Σλ_jB(V_N + ρ^j).

    f_k is constant on each piece of the merge of the trajectory grid with the breakpoints of
    ψ_k, with V_N frozen at the piece midpoint.
    """
    dec = prof.decomposition
    if VN.geometry != dec.geometry or VN.trunc != dec.trunc:
        raise GeometryMismatchError('Trajectory and decomposition do not share geometry and truncation')
    if not math.isclose(VN.horizon, prof.T, rel_tol=1e-12):
        raise ContractViolation('Trajectory horizon {} differs from the profile horizon {}'.format(
            VN.horizon, prof.T))
    psi = build_psi_k(prof)
    tensor = interaction_tensor(dec.trunc, dec.geometry, p.alpha)
    rates = linear_rates(dec.trunc, dec.geometry, p)
    rhos = [rho.coeffs for rho in dec.directions]
    mean_L = sum(w * rates * rho for w, rho in zip(dec.weights, rhos))

    times = _merge_times(psi.breakpoints, VN.times, horizon=prof.T)
    values = np.empty((len(times) - 1, len(rates)))
    for i, (t0, t1) in enumerate(zip(times[:-1], times[1:])):
        tm = 0.5 * (t0 + t1)
        v = VN.interpolate(tm).coeffs
        shift = psi.value(tm)
        y = v + shift
        mean_B = sum(w * tensor.apply(v + rho, v + rho) for w, rho in zip(dec.weights, rhos))
        values[i] = (rates * shift - mean_L) + (tensor.apply(y, y) - mean_B)
    return PiecewiseConstantSignal(dec.geometry, dec.trunc, times, values)


def running_integral_sup(f: ControlSignal, s: float) -> float:
    """sup_t ‖∫₀ᵗ f‖_{V^s}.

    Exact for piecewise-constant signals, whose running integral is piecewise linear;
    trapezoidal on :meth:`ControlSignal.sample_times` otherwise.
    """
    weights = sobolev_weights(f.trunc, f.geometry, s)
    if isinstance(f, PiecewiseConstantSignal):
        F = f.running_integral()
    else:
        times = f.sample_times()
        values = f.sample(times)
        steps = 0.5 * np.diff(times)[:, None] * (values[1:] + values[:-1])
        F = np.vstack([np.zeros(f.dim), np.cumsum(steps, axis=0)])
    return math.sqrt(float(np.max(F * F @ weights)))


@dataclass
class RelaxationTable:
    """sup_t‖F_k‖_{V²} and sup_t‖Kf_k‖_{V²} for a sequence of oscillation counts."""
    ks: List[int]
    sup_F: List[float]
    sup_Kf: List[float]

    def rows(self) -> List[Tuple[int, float, float]]:
        return list(zip(self.ks, self.sup_F, self.sup_Kf))

    def is_decreasing(self, tol: float = 0.1) -> bool:
        """True when no column grows by more than ``tol`` between consecutive k."""
        for column in (self.sup_F, self.sup_Kf):
            for before, after in zip(column[:-1], column[1:]):
                if after > (1.0 + tol) * before:
                    return False
        return True

    def slope(self, column: str = 'F') -> float:
        """Least-squares slope of log₂ sup against log₂ k; ``nan`` if a value is not positive."""
        values = np.array(self.sup_F if column == 'F' else self.sup_Kf)
        if len(values) < 2 or np.any(values <= 0):
            return float('nan')
        return float(np.polyfit(np.log2(self.ks), np.log2(values), 1)[0])


def relaxation_report(fks: Mapping[int, ControlSignal], cfg: IntegratorConfig,
                      T: Optional[float] = None) -> RelaxationTable:
    """Tabulates the relaxation of a family f_k, sorted by k.

    Args:
        fks (Mapping[int, ControlSignal]): f_k per oscillation count.
        cfg (IntegratorConfig): Parameters and step used for Kf_k.
        T (float): Optional. Horizon; defaults to the signals' horizon.
    """
    ks = sorted(fks)
    sup_F, sup_Kf = [], []
    for k in ks:
        f = fks[k]
        horizon = f.horizon if T is None else T
        sup_F.append(running_integral_sup(f, 2))
        sup_Kf.append(kernel_K(f, cfg, horizon).sup_norm(2))
        logger.debug('k=%d: sup F=%.3e, sup Kf=%.3e', k, sup_F[-1], sup_Kf[-1])
    return RelaxationTable(ks, sup_F, sup_Kf)


def relaxation_study(decomposition: ConvexDecomposition, VN: Trajectory, ks: Iterable[int],
                     cfg: IntegratorConfig) -> Tuple[Dict[int, PiecewiseConstantSignal], RelaxationTable]:
    """f_k for every k in ``ks`` and their relaxation table."""
    fks = {}
    for k in ks:
        prof = OscillationProfile(decomposition, k, VN.horizon)
        fks[k] = compute_fk(VN, prof, cfg.params)
    return fks, relaxation_report(fks, cfg, VN.horizon)


@dataclass
class RelaxationInstance:
    """A fixed random convexification problem."""
    control: SaturatedControl
    decomposition: ConvexDecomposition
    background: Trajectory
    cfg: IntegratorConfig
    T: float


def canonical_relaxation_instance(seed: int = 0, trunc: int = 6, T: float = 1.0, dt: float = 1e-2,
                                  directions: int = 2, geometry: Optional[TorusGeometry] = None,
                                  params: Optional[SobolevParams] = None) -> RelaxationInstance:
    """Constant V_N and directions ρ̃^j drawn in H³_q, by default on q = (1, 1) with α = 1, ν = 0.1."""
    geometry = geometry or TorusGeometry(1.0, 1.0)
    params = params or SobolevParams(alpha=1.0, nu=0.1)
    rng = np.random.default_rng(seed)

    def draw(amplitude):
        return FieldBuilder(geometry, trunc).random(rng, 3, amplitude).finalize()

    control = SaturatedControl(draw(0.5), rng.uniform(0.5, 2.0, directions),
                               [draw(1.0) for _ in range(directions)])
    return RelaxationInstance(control=control,
                              decomposition=convex_decompose(control),
                              background=Trajectory.constant(draw(1.0), T),
                              cfg=IntegratorConfig(params, dt=dt),
                              T=T)


def lifted_shift(zeta: PiecewiseConstantSignal, ramp: float, l: int, substeps: int = 4) -> RampedSignal:
    """ζ_l: ζ with every jump smoothed over ramp/l, rising from 0 after t = 0 and back to 0 before T."""
    _check_lift(zeta, ramp, l)
    return RampedSignal(zeta, ramp / l, substeps=substeps)


def _check_lift(zeta: ControlSignal, ramp: float, l: int):
    if not isinstance(zeta, PiecewiseConstantSignal):
        raise ContractViolation('Only piecewise-constant shifts can be lifted, got {}'.format(zeta.kind.value))
    if int(l) != l or l < 1:
        raise ValueError('Lift sharpness must be a positive integer, got {}'.format(l))
    if not ramp > 0:
        raise ValueError('Ramp must be positive, got {}'.format(ramp))
    if ramp >= 0.5 * zeta.shortest_segment():
        raise RampTooWideError('Ramp {} is not below half the shortest segment {}'.format(
            ramp, zeta.shortest_segment()))


def lift_extended_control(eta: ControlSignal, zeta: ControlSignal, ramp: float, l: int,
                          substeps: int = 4) -> ControlSignal:
    """η' = η + ∂_tζ_l, the plain-system control equivalent to (η, ζ) in the extended system.

    Raises:
        ContractViolation: ζ is not piecewise constant.
        RampTooWideError: ``ramp`` is not below half of the shortest segment of ζ.
        GeometryMismatchError: η and ζ are not compatible.
    """
    _check_lift(zeta, ramp, l)
    if not eta.is_compatible(zeta):
        raise GeometryMismatchError('Control and shift must share geometry, truncation and horizon')
    if not np.any(zeta.values):
        return eta
    return SumSignal([eta, RampedSignal(zeta, ramp / l, derivative=True, substeps=substeps)])
