"""Time-dependent spectral fields used as controls, forcings and shifts.

Every signal lives on [0, T] with a fixed geometry and truncation. Besides its
value, a signal reports ``knots()``, times the integrator has to step on, and
``step_value(t, t0, t1)``, the value seen by a Runge-Kutta stage at time t of
the step [t0, t1]. Piecewise-constant signals answer with the value of the
segment containing the step, so every step sees a constant control.
"""
import math
from abc import ABCMeta, abstractmethod
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .enums import SignalKind
from .errors import ContractViolation, GeometryMismatchError
from .torus import ModeSubspace, SpectralField, TorusGeometry, sobolev_norm, sobolev_weights, spectral_basis


def _as_matrix(values, dim: int, what: str) -> np.ndarray:
    if isinstance(values, np.ndarray):
        out = np.array(values, dtype=float)
    else:
        out = np.array([v.coeffs if isinstance(v, SpectralField) else v for v in values], dtype=float)
    if out.ndim != 2 or out.shape[1] != dim:
        raise ValueError('{} must have shape (n, {}), got {}'.format(what, dim, out.shape))
    out.flags.writeable = False
    return out


class ControlSignal(metaclass=ABCMeta):
    """A SpectralField-valued function of time on [0, T].

    Args:
        geometry (TorusGeometry): Torus shared by every value.
        trunc (int): Truncation shared by every value.
        horizon (float): Final time T.
        support (ModeSubspace): Optional. Declared support; every value vanishes outside it.
            Defaults to the whole truncation.
    """
    kind = SignalKind.SAMPLED

    def __init__(self, geometry: TorusGeometry, trunc: int, horizon: float,
                 support: Optional[ModeSubspace] = None):
        if not horizon > 0:
            raise ValueError('Signal horizon must be positive, got {}'.format(horizon))
        self.geometry = geometry
        self.trunc = trunc
        self.horizon = float(horizon)
        self.support = support if support is not None else ModeSubspace.low_modes(trunc)

    @property
    def dim(self) -> int:
        return spectral_basis(self.trunc).dim

    @abstractmethod
    def value(self, t: float) -> np.ndarray:
        """Coefficient vector at time t."""
        pass

    def step_value(self, t: float, t0: float, t1: float) -> np.ndarray:
        """Value used by an integration stage at time t inside the step [t0, t1]."""
        return self.value(t)

    def knots(self) -> np.ndarray:
        """Times where the signal is not smooth; integrators put step boundaries there."""
        return np.array([0.0, self.horizon])

    @property
    def is_piecewise_constant(self) -> bool:
        return False

    def evaluate(self, t: float) -> SpectralField:
        return SpectralField(self.geometry, self.trunc, self.value(t))

    def sample(self, times: Iterable[float]) -> np.ndarray:
        return np.array([self.value(t) for t in times])

    def sample_times(self, steps: int = 1000) -> np.ndarray:
        """Knots merged with a uniform grid; used to estimate sup norms."""
        uniform = np.linspace(0.0, self.horizon, steps + 1)
        return np.unique(np.concatenate([uniform, np.clip(self.knots(), 0.0, self.horizon)]))

    def sup_norm(self, s: float, times: Optional[np.ndarray] = None) -> float:
        """max_t ‖value(t)‖_{V^s} over ``times`` (default :meth:`sample_times`)."""
        if times is None:
            times = self.sample_times()
        weights = sobolev_weights(self.trunc, self.geometry, s)
        values = self.sample(times)
        return math.sqrt(float(np.max(values * values @ weights))) if len(values) else 0.0

    def is_compatible(self, other: 'ControlSignal') -> bool:
        return (self.geometry == other.geometry and self.trunc == other.trunc
                and math.isclose(self.horizon, other.horizon, rel_tol=1e-12))

    def check_field(self, field: SpectralField):
        if field.geometry != self.geometry or field.trunc != self.trunc:
            raise GeometryMismatchError('Signal on N={} cannot act on a field with N={}'.format(
                self.trunc, field.trunc))

    def check_support(self, values: np.ndarray, atol: float = 0.0):
        outside = values[:, ~self.support.mask(self.trunc)]
        if outside.size and np.max(np.abs(outside)) > atol:
            raise ContractViolation('Signal values leave the declared support')

    def __add__(self, other: 'ControlSignal') -> 'ControlSignal':
        return SumSignal([self, other])

    def __sub__(self, other: 'ControlSignal') -> 'ControlSignal':
        return SumSignal([self, other], [1.0, -1.0])

    def __neg__(self) -> 'ControlSignal':
        return SumSignal([self], [-1.0])

    def __mul__(self, scalar: float) -> 'ControlSignal':
        return SumSignal([self], [float(scalar)])

    __rmul__ = __mul__


class PiecewiseConstantSignal(ControlSignal):
    """Signal holding ``values[i]`` on [breakpoints[i], breakpoints[i+1]).

    Args:
        geometry (TorusGeometry): The torus.
        trunc (int): Truncation order.
        breakpoints (Sequence[float]): Strictly increasing, starting at 0; the last one is T.
        values: One coefficient vector or SpectralField per segment.
        support (ModeSubspace): Optional. Declared support, checked against the values.
    """
    kind = SignalKind.PIECEWISE_CONSTANT

    def __init__(self, geometry: TorusGeometry, trunc: int, breakpoints: Sequence[float], values,
                 support: Optional[ModeSubspace] = None):
        bp = np.array(breakpoints, dtype=float)
        if bp.ndim != 1 or len(bp) < 2 or bp[0] != 0.0 or np.any(np.diff(bp) <= 0):
            raise ValueError('Breakpoints must be strictly increasing and start at 0')
        super().__init__(geometry, trunc, bp[-1], support)
        bp.flags.writeable = False
        self.breakpoints = bp
        self.values = _as_matrix(values, self.dim, 'Segment values')
        if len(self.values) != len(bp) - 1:
            raise ValueError('Expected {} segment values, got {}'.format(len(bp) - 1, len(self.values)))
        self.check_support(self.values)

    def segment(self, t: float) -> int:
        i = int(np.searchsorted(self.breakpoints, t, side='right')) - 1
        return min(max(i, 0), len(self.values) - 1)

    def value(self, t: float) -> np.ndarray:
        return self.values[self.segment(t)]

    def step_value(self, t: float, t0: float, t1: float) -> np.ndarray:
        return self.values[self.segment(0.5 * (t0 + t1))]

    def knots(self) -> np.ndarray:
        return self.breakpoints

    @property
    def is_piecewise_constant(self) -> bool:
        return True

    @property
    def durations(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def shortest_segment(self) -> float:
        return float(np.min(self.durations))

    def running_integral(self) -> np.ndarray:
        """∫₀ᵗ of the signal at every breakpoint, shape (n + 1, 2M)."""
        steps = self.durations[:, None] * self.values
        return np.vstack([np.zeros(self.dim), np.cumsum(steps, axis=0)])


def constant_signal(field: SpectralField, horizon: float,
                    support: Optional[ModeSubspace] = None) -> PiecewiseConstantSignal:
    """The signal equal to ``field`` on [0, T]."""
    return PiecewiseConstantSignal(field.geometry, field.trunc, [0.0, horizon], [field.coeffs], support)


def zero_signal(geometry: TorusGeometry, trunc: int, horizon: float) -> PiecewiseConstantSignal:
    return constant_signal(SpectralField.zeros(geometry, trunc), horizon)


class SampledSignal(ControlSignal):
    """Signal linearly interpolated between samples.

    Args:
        geometry (TorusGeometry): The torus.
        trunc (int): Truncation order.
        times (Sequence[float]): Strictly increasing sample times from 0 to T.
        values: One coefficient vector or SpectralField per sample.
        support (ModeSubspace): Optional. Declared support.
    """
    kind = SignalKind.SAMPLED

    def __init__(self, geometry: TorusGeometry, trunc: int, times: Sequence[float], values,
                 support: Optional[ModeSubspace] = None):
        ts = np.array(times, dtype=float)
        if ts.ndim != 1 or len(ts) < 2 or ts[0] != 0.0 or np.any(np.diff(ts) <= 0):
            raise ValueError('Sample times must be strictly increasing and start at 0')
        super().__init__(geometry, trunc, ts[-1], support)
        ts.flags.writeable = False
        self.times = ts
        self.values = _as_matrix(values, self.dim, 'Samples')
        if len(self.values) != len(ts):
            raise ValueError('Expected {} samples, got {}'.format(len(ts), len(self.values)))
        self.check_support(self.values)

    def value(self, t: float) -> np.ndarray:
        i = int(np.searchsorted(self.times, t, side='right')) - 1
        i = min(max(i, 0), len(self.times) - 2)
        w = (t - self.times[i]) / (self.times[i + 1] - self.times[i])
        w = min(max(w, 0.0), 1.0)
        return (1.0 - w) * self.values[i] + w * self.values[i + 1]

    def knots(self) -> np.ndarray:
        return self.times


class PolynomialSignal(ControlSignal):
    """Signal Σ_k t^k c_k with coefficient fields c_k, evaluated in closed form."""
    kind = SignalKind.POLYNOMIAL

    def __init__(self, geometry: TorusGeometry, trunc: int, horizon: float, coefficients,
                 support: Optional[ModeSubspace] = None):
        super().__init__(geometry, trunc, horizon, support)
        self.coefficients = _as_matrix(coefficients, self.dim, 'Polynomial coefficients')
        self.check_support(self.coefficients)

    @property
    def degree(self) -> int:
        return len(self.coefficients) - 1

    def value(self, t: float) -> np.ndarray:
        out = np.zeros(self.dim)
        for c in self.coefficients[::-1]:
            out = out * t + c
        return out


class SumSignal(ControlSignal):
    """Weighted sum of compatible signals."""
    kind = SignalKind.COMPOSITE

    def __init__(self, terms: Sequence[ControlSignal], weights: Optional[Sequence[float]] = None):
        if not terms:
            raise ValueError('A sum needs at least one term')
        first = terms[0]
        for term in terms[1:]:
            if not first.is_compatible(term):
                raise GeometryMismatchError('Summed signals must share geometry, truncation and horizon')
        support = ModeSubspace()
        for term in terms:
            support = support | term.support
        super().__init__(first.geometry, first.trunc, first.horizon, support)
        self.terms = list(terms)
        self.weights = [1.0] * len(terms) if weights is None else [float(w) for w in weights]
        if len(self.weights) != len(self.terms):
            raise ValueError('One weight per term is required')

    def value(self, t: float) -> np.ndarray:
        out = np.zeros(self.dim)
        for w, term in zip(self.weights, self.terms):
            out += w * term.value(t)
        return out

    def step_value(self, t: float, t0: float, t1: float) -> np.ndarray:
        out = np.zeros(self.dim)
        for w, term in zip(self.weights, self.terms):
            out += w * term.step_value(t, t0, t1)
        return out

    def knots(self) -> np.ndarray:
        return np.unique(np.concatenate([term.knots() for term in self.terms]))

    @property
    def is_piecewise_constant(self) -> bool:
        return all(term.is_piecewise_constant for term in self.terms)


class MaskedSignal(ControlSignal):
    """A signal restricted to a coordinate subspace (P_k when the subspace is H^k_q)."""

    def __init__(self, signal: ControlSignal, subspace: ModeSubspace):
        super().__init__(signal.geometry, signal.trunc, signal.horizon, signal.support.intersection(subspace))
        self.signal = signal
        self.subspace = subspace
        self._mask = subspace.mask(signal.trunc).astype(float)

    @property
    def kind(self) -> SignalKind:
        return self.signal.kind

    def value(self, t: float) -> np.ndarray:
        return self.signal.value(t) * self._mask

    def step_value(self, t: float, t0: float, t1: float) -> np.ndarray:
        return self.signal.step_value(t, t0, t1) * self._mask

    def knots(self) -> np.ndarray:
        return self.signal.knots()

    @property
    def is_piecewise_constant(self) -> bool:
        return self.signal.is_piecewise_constant


def smoothstep(s: np.ndarray) -> np.ndarray:
    """Cubic Hermite ramp 3s² - 2s³, C¹ with zero slope at both ends."""
    return s * s * (3.0 - 2.0 * s)


def smoothstep_slope(s: np.ndarray) -> np.ndarray:
    return 6.0 * s * (1.0 - s)


class RampedSignal(ControlSignal):
    """C¹ version ζ_l of a piecewise-constant shift ζ, or its time derivative.

    Every jump of ζ is replaced by a cubic Hermite ramp of the given width centred on the
    breakpoint; extra ramps rise from 0 after t = 0 and return to 0 before t = T, so the
    signal vanishes at both ends.

    Args:
        zeta (PiecewiseConstantSignal): The shift being smoothed.
        width (float): Ramp width; must be at most 2/3 of the shortest segment.
        derivative (bool): Return ∂_tζ_l instead of ζ_l.
        substeps (int): Knots placed inside every ramp.
    """
    kind = SignalKind.SMOOTH

    def __init__(self, zeta: PiecewiseConstantSignal, width: float, derivative: bool = False,
                 substeps: int = 4):
        super().__init__(zeta.geometry, zeta.trunc, zeta.horizon, zeta.support)
        if not width > 0 or 1.5 * width > zeta.shortest_segment() * (1.0 + 1e-12):
            raise ValueError('Ramp width {} does not fit the shortest segment {}'.format(
                width, zeta.shortest_segment()))
        self.width = float(width)
        self.derivative = derivative
        self.substeps = int(substeps)

        bp, values = zeta.breakpoints, zeta.values
        zero = np.zeros((1, self.dim))
        before = np.vstack([zero, values])
        after = np.vstack([values, zero])
        starts = np.concatenate([[0.0], bp[1:-1] - 0.5 * width, [bp[-1] - width]])
        jumps = np.any(before != after, axis=1)
        self._starts = starts[jumps]
        self._from = before[jumps]
        self._to = after[jumps]

    def _locate(self, t: float):
        i = int(np.searchsorted(self._starts, t, side='right')) - 1
        if i < 0:
            return None, 0.0
        s = (t - self._starts[i]) / self.width
        return i, s

    def value(self, t: float) -> np.ndarray:
        if t <= 0.0 or t >= self.horizon:
            return np.zeros(self.dim)
        i, s = self._locate(t)
        if i is None:
            return np.zeros(self.dim)
        if s >= 1.0:
            return np.zeros(self.dim) if self.derivative else self._to[i].copy()
        jump = self._to[i] - self._from[i]
        if self.derivative:
            return jump * (smoothstep_slope(s) / self.width)
        return self._from[i] + jump * smoothstep(s)

    def knots(self) -> np.ndarray:
        inner = np.linspace(0.0, self.width, self.substeps + 1)
        points = (self._starts[:, None] + inner[None, :]).ravel()
        return np.unique(np.concatenate([[0.0, self.horizon], np.clip(points, 0.0, self.horizon)]))
