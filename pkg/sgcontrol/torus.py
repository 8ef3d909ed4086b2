"""Geometry of the q-weighted torus and its divergence-free Fourier basis.

A field on T²_q = [0, 2πq1) × [0, 2πq2) is stored through its coefficients on

    c_m = m^{q,⊥} cos⟨m, x⟩_q,    s_m = m^{q,⊥} sin⟨m, x⟩_q,

for the canonical modes m (first nonzero component positive) with
|m| = |m1| + |m2| ≤ N_trunc. Coefficient vectors are laid out as
``[a_1 .. a_M, b_1 .. b_M]`` following the lexicographic mode order.

Because m^{q,⊥} is odd in m, c_{-m} = -c_m and s_{-m} = s_m.
"""
import logging
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Dict, FrozenSet, Iterable, Iterator, Optional, Sequence, Tuple, Union

import numpy as np

from .enums import Parity
from .errors import GeometryMismatchError, InvalidModeError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TorusGeometry:
    """The rectangular torus T²_q.

    Args:
        q1 (float): Radius along x1, the torus has period 2πq1.
        q2 (float): Radius along x2, the torus has period 2πq2.
    """
    q1: float
    q2: float

    def __post_init__(self):
        if not (self.q1 > 0 and self.q2 > 0) or math.isinf(self.q1) or math.isinf(self.q2):
            raise ValueError('Torus radii must be positive and finite, got q=({}, {})'.format(self.q1, self.q2))
        object.__setattr__(self, 'q1', float(self.q1))
        object.__setattr__(self, 'q2', float(self.q2))

    @classmethod
    def of(cls, q: Union['TorusGeometry', Sequence[float]]) -> 'TorusGeometry':
        if isinstance(q, TorusGeometry):
            return q
        q1, q2 = q
        return cls(q1, q2)

    @property
    def q(self) -> np.ndarray:
        return np.array([self.q1, self.q2])

    @property
    def mass(self) -> float:
        """L² mass κ = (2π)²q1q2/2 shared by every basis function."""
        return 2.0 * math.pi ** 2 * self.q1 * self.q2

    @property
    def area(self) -> float:
        return 4.0 * math.pi ** 2 * self.q1 * self.q2

    def norm_q(self, x: Sequence[float]) -> float:
        return math.sqrt(inner_q(x, x, self))


@dataclass(frozen=True, order=True)
class ModeIndex:
    """A nonzero lattice vector m ∈ Z² indexing one Fourier mode pair."""
    m1: int
    m2: int

    def __post_init__(self):
        if int(self.m1) != self.m1 or int(self.m2) != self.m2:
            raise InvalidModeError('Mode components must be integers, got ({}, {})'.format(self.m1, self.m2))
        object.__setattr__(self, 'm1', int(self.m1))
        object.__setattr__(self, 'm2', int(self.m2))
        if self.m1 == 0 and self.m2 == 0:
            raise InvalidModeError('The zero mode carries no divergence-free, zero-mean field')

    @classmethod
    def of(cls, m: 'ModeLike') -> 'ModeIndex':
        if isinstance(m, ModeIndex):
            return m
        m1, m2 = m
        return cls(m1, m2)

    @property
    def order(self) -> int:
        """The lattice order |m| = |m1| + |m2|."""
        return abs(self.m1) + abs(self.m2)

    @property
    def is_canonical(self) -> bool:
        return self.m1 > 0 or (self.m1 == 0 and self.m2 > 0)

    @property
    def is_axis(self) -> bool:
        return self.m1 == 0 or self.m2 == 0

    def canonical(self) -> Tuple['ModeIndex', bool]:
        """Returns the canonical representative and whether m had to be negated."""
        if self.is_canonical:
            return self, False
        return -self, True

    def as_tuple(self) -> Tuple[int, int]:
        return self.m1, self.m2

    def __neg__(self) -> 'ModeIndex':
        return ModeIndex(-self.m1, -self.m2)

    def __iter__(self) -> Iterator[int]:
        yield self.m1
        yield self.m2

    def __str__(self) -> str:
        return '({},{})'.format(self.m1, self.m2)


ModeLike = Union[ModeIndex, Tuple[int, int], Sequence[int]]


def representative_sign(parity: Parity, flipped: bool) -> float:
    """Sign relating a basis function of -m to the one of m (c_{-m} = -c_m, s_{-m} = s_m)."""
    return -1.0 if (flipped and parity is Parity.COS) else 1.0


@dataclass(frozen=True)
class SobolevParams:
    """Physical and regularity parameters.

    Args:
        alpha (float): Second-grade fluid parameter α > 0.
        nu (float): Kinematic viscosity ν > 0.
        s (float): Sobolev exponent s ≥ 0 used where a single norm is needed.
    """
    alpha: float
    nu: float
    s: float = 0.0

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError('alpha must be positive, got {}'.format(self.alpha))
        if not self.nu > 0:
            raise ValueError('nu must be positive, got {}'.format(self.nu))
        if not self.s >= 0:
            raise ValueError('Sobolev exponent must be nonnegative, got {}'.format(self.s))
        for name in ('alpha', 'nu', 's'):
            object.__setattr__(self, name, float(getattr(self, name)))


def inner_q(x: Sequence[float], y: Sequence[float], g: TorusGeometry) -> float:
    """The q-weighted inner product ⟨x, y⟩_q = x1y1/q1 + x2y2/q2."""
    return float(x[0] * y[0] / g.q1 + x[1] * y[1] / g.q2)


def _perp_rows(modes: np.ndarray, g: TorusGeometry) -> np.ndarray:
    """Unit q-perpendicular vectors for an (n, 2) array of lattice vectors.

    Rows for the zero vector are returned as (0, 0).
    """
    modes = np.asarray(modes, dtype=float)
    v = np.stack([-modes[:, 1] * g.q1, modes[:, 0] * g.q2], axis=1)
    r = np.sqrt(v[:, 0] * v[:, 0] + v[:, 1] * v[:, 1])
    r[r == 0.0] = 1.0
    return v / r[:, None]


def perp_q(m: ModeLike, g: TorusGeometry) -> np.ndarray:
    """Unit vector m^{q,⊥} = (-m2 q1, m1 q2) / ‖(-m2 q1, m1 q2)‖.

    It satisfies ⟨m, m^{q,⊥}⟩_q = 0 and reduces to the usual (-m2, m1)/|m| when q = (1, 1).

    Raises:
        InvalidModeError: m is the zero vector.
    """
    m = ModeIndex.of(m)
    return _perp_rows(np.array([[m.m1, m.m2]]), g)[0]


def leray_project_dir(a: Sequence[float], l: ModeLike, g: TorusGeometry) -> np.ndarray:
    """Direction part of the Leray projection, P(a cos⟨l,x⟩_q) = (P_l a) cos⟨l,x⟩_q.

    Returns the Euclidean projection of ``a`` onto span{l^{q,⊥}}.
    """
    p = perp_q(l, g)
    return float(np.dot(a, p)) * p


def stokes_eigenvalue(m: ModeLike, g: TorusGeometry) -> float:
    """Eigenvalue ‖m‖²_q = m1²/q1² + m2²/q2² of the Stokes operator on c_m and s_m."""
    m = ModeIndex.of(m)
    return (m.m1 / g.q1) ** 2 + (m.m2 / g.q2) ** 2


class SpectralBasis(object):
    """Enumeration of the canonical modes of one truncation.

    Do not instantiate directly, use :func:`spectral_basis` which caches instances.

    Args:
        trunc (int): Truncation order N_trunc ≥ 1.
    """

    def __init__(self, trunc: int):
        if int(trunc) != trunc or trunc < 1:
            raise ValueError('Truncation order must be a positive integer, got {}'.format(trunc))
        self.trunc = int(trunc)
        modes = [(m1, m2)
                 for m1 in range(0, self.trunc + 1)
                 for m2 in range(-self.trunc, self.trunc + 1)
                 if abs(m1) + abs(m2) <= self.trunc and (m1 > 0 or (m1 == 0 and m2 > 0))]
        self.modes = np.array(modes, dtype=int)
        self.modes.flags.writeable = False
        self.orders = np.abs(self.modes).sum(axis=1)
        self.orders.flags.writeable = False
        self.index = {m: i for i, m in enumerate(modes)}  # type: Dict[Tuple[int, int], int]

        span = 2 * self.trunc + 1
        self._table = np.full((span, span), -1, dtype=int)
        self._table[self.modes[:, 0] + self.trunc, self.modes[:, 1] + self.trunc] = np.arange(len(modes))

    @property
    def size(self) -> int:
        """Number M of canonical modes."""
        return len(self.index)

    @property
    def dim(self) -> int:
        """Length 2M of a coefficient vector."""
        return 2 * len(self.index)

    def position(self, m: ModeLike, parity: Parity) -> Tuple[int, float]:
        """Vector slot and sign of the basis function of any representative of m.

        Raises:
            InvalidModeError: m is zero or beyond the truncation.
        """
        mode, flipped = ModeIndex.of(m).canonical()
        i = self.index.get(mode.as_tuple())
        if i is None:
            raise InvalidModeError('Mode {} is beyond truncation {}'.format(mode, self.trunc))
        offset = self.size if parity is Parity.SIN else 0
        return i + offset, representative_sign(parity, flipped)

    def lookup(self, modes: np.ndarray) -> np.ndarray:
        """Indices of canonical modes in an (n, 2) array; -1 where absent."""
        modes = np.asarray(modes, dtype=int)
        out = np.full(len(modes), -1, dtype=int)
        inside = np.abs(modes).sum(axis=1) <= self.trunc
        sel = modes[inside] + self.trunc
        out[inside] = self._table[sel[:, 0], sel[:, 1]]
        return out

    def order_mask(self, k: int) -> np.ndarray:
        """Boolean coefficient mask of H^k_q (|m| ≤ k, both parities)."""
        low = self.orders <= k
        return np.concatenate([low, low])

    def entries(self) -> Iterator[Tuple[ModeIndex, Parity]]:
        """(mode, parity) for every coefficient slot, in vector order."""
        for parity in (Parity.COS, Parity.SIN):
            for m1, m2 in self.modes:
                yield ModeIndex(int(m1), int(m2)), parity

    def eigenvalues(self, g: TorusGeometry) -> np.ndarray:
        return _eigenvalues(self.trunc, g)

    def perps(self, g: TorusGeometry) -> np.ndarray:
        return _perps(self.trunc, g)


@lru_cache(maxsize=None)
def spectral_basis(trunc: int) -> SpectralBasis:
    return SpectralBasis(trunc)


@lru_cache(maxsize=64)
def _eigenvalues(trunc: int, g: TorusGeometry) -> np.ndarray:
    modes = spectral_basis(trunc).modes
    lam = (modes[:, 0] / g.q1) ** 2 + (modes[:, 1] / g.q2) ** 2
    lam.flags.writeable = False
    return lam


@lru_cache(maxsize=64)
def _perps(trunc: int, g: TorusGeometry) -> np.ndarray:
    p = _perp_rows(spectral_basis(trunc).modes, g)
    p.flags.writeable = False
    return p


def _doubled(values: np.ndarray) -> np.ndarray:
    return np.concatenate([values, values])


def linear_rates(trunc: int, g: TorusGeometry, p: SobolevParams) -> np.ndarray:
    """Diagonal of L on a coefficient vector: νλ/(1 + αλ), always below ν/α."""
    lam = _eigenvalues(trunc, g)
    return _doubled(p.nu * lam / (1.0 + p.alpha * lam))


def sobolev_weights(trunc: int, g: TorusGeometry, s: float) -> np.ndarray:
    """Per-coefficient weights κ(1 + λ)^s of the squared V^s norm."""
    if not s >= 0:
        raise ValueError('Sobolev exponent must be nonnegative, got {}'.format(s))
    lam = _eigenvalues(trunc, g)
    return _doubled(g.mass * (1.0 + lam) ** s)


class ModeSubspace(object):
    """A coordinate subspace spanned by basis functions (mode, parity).

    Represents E, H^N_q and the saturation iterates E_j. Entries are canonical.

    Args:
        entries (Iterable): (ModeIndex, Parity) pairs; tuples are accepted for modes.
    """

    __slots__ = ('_entries',)

    def __init__(self, entries: Iterable[Tuple[ModeLike, Parity]] = ()):
        normalized = set()
        for m, parity in entries:
            mode = ModeIndex.of(m)
            if not mode.is_canonical:
                raise InvalidModeError('Subspace entries must be canonical, got {}'.format(mode))
            normalized.add((mode, Parity(parity)))
        self._entries = frozenset(normalized)  # type: FrozenSet[Tuple[ModeIndex, Parity]]

    @classmethod
    def low_modes(cls, order: int) -> 'ModeSubspace':
        """H^N_q = span{c_m, s_m : |m| ≤ N}."""
        if order < 1:
            return cls()
        basis = spectral_basis(order)
        return cls(basis.entries())

    @property
    def entries(self) -> FrozenSet[Tuple[ModeIndex, Parity]]:
        return self._entries

    @property
    def max_order(self) -> int:
        return max((m.order for m, _ in self._entries), default=0)

    def mask(self, trunc: int) -> np.ndarray:
        """Boolean mask selecting the subspace's coefficients in truncation ``trunc``."""
        basis = spectral_basis(trunc)
        out = np.zeros(basis.dim, dtype=bool)
        for mode, parity in self._entries:
            i = basis.index.get(mode.as_tuple())
            if i is not None:
                out[i + (basis.size if parity is Parity.SIN else 0)] = True
        return out

    def contains(self, field: 'SpectralField', atol: float = 0.0) -> bool:
        outside = field.coeffs[~self.mask(field.trunc)]
        return bool(np.all(np.abs(outside) <= atol))

    def union(self, other: 'ModeSubspace') -> 'ModeSubspace':
        return ModeSubspace(self._entries | other.entries)

    def intersection(self, other: 'ModeSubspace') -> 'ModeSubspace':
        return ModeSubspace(self._entries & other.entries)

    def issubset(self, other: 'ModeSubspace') -> bool:
        return self._entries <= other.entries

    def __or__(self, other: 'ModeSubspace') -> 'ModeSubspace':
        return self.union(other)

    def __contains__(self, item) -> bool:
        m, parity = item
        return (ModeIndex.of(m), Parity(parity)) in self._entries

    def __iter__(self) -> Iterator[Tuple[ModeIndex, Parity]]:
        return iter(sorted(self._entries, key=lambda e: (e[0].m1, e[0].m2, e[1].value)))

    def __len__(self) -> int:
        return len(self._entries)

    def __eq__(self, other) -> bool:
        return isinstance(other, ModeSubspace) and self._entries == other.entries

    def __hash__(self) -> int:
        return hash(self._entries)

    def __repr__(self) -> str:
        return 'ModeSubspace({} entries, max order {})'.format(len(self), self.max_order)

    def to_list(self) -> list:
        return [{'m': [m.m1, m.m2], 'parity': parity.value} for m, parity in self]

    @classmethod
    def from_list(cls, data: Iterable[dict]) -> 'ModeSubspace':
        return cls((tuple(item['m']), Parity(item['parity'])) for item in data)


class SpectralField(object):
    """A truncated divergence-free field Σ a_m c_m + b_m s_m on T²_q.

    Instances are immutable: the coefficient vector is read-only.

    Args:
        geometry (TorusGeometry): The torus.
        trunc (int): Truncation order N_trunc.
        coeffs (np.ndarray): Optional. Coefficients ``[a..., b...]`` of length 2M; zero when omitted.
    """

    __slots__ = ('geometry', 'trunc', '_coeffs')

    def __init__(self, geometry: TorusGeometry, trunc: int, coeffs: Optional[np.ndarray] = None):
        basis = spectral_basis(trunc)
        if coeffs is None:
            values = np.zeros(basis.dim)
        else:
            values = np.array(coeffs, dtype=float)
            if values.shape != (basis.dim,):
                raise ValueError('Expected {} coefficients for truncation {}, got shape {}'.format(
                    basis.dim, trunc, values.shape))
        values.flags.writeable = False
        self.geometry = geometry
        self.trunc = basis.trunc
        self._coeffs = values

    @classmethod
    def zeros(cls, geometry: TorusGeometry, trunc: int) -> 'SpectralField':
        return cls(geometry, trunc)

    @classmethod
    def basis_function(cls, geometry: TorusGeometry, trunc: int, m: ModeLike,
                       parity: Parity) -> 'SpectralField':
        """The field c_m or s_m; non-canonical m follow c_{-m} = -c_m, s_{-m} = s_m."""
        basis = spectral_basis(trunc)
        slot, sign = basis.position(m, parity)
        values = np.zeros(basis.dim)
        values[slot] = sign
        return cls(geometry, trunc, values)

    @property
    def basis(self) -> SpectralBasis:
        return spectral_basis(self.trunc)

    @property
    def coeffs(self) -> np.ndarray:
        return self._coeffs

    @property
    def a(self) -> np.ndarray:
        return self._coeffs[:self.basis.size]

    @property
    def b(self) -> np.ndarray:
        return self._coeffs[self.basis.size:]

    def coefficient(self, m: ModeLike, parity: Parity) -> float:
        """Coefficient of c_m or s_m for any representative of m."""
        slot, sign = self.basis.position(m, parity)
        return sign * float(self._coeffs[slot])

    def compatible_with(self, other: 'SpectralField') -> bool:
        return self.geometry == other.geometry and self.trunc == other.trunc

    def check_compatible(self, other: 'SpectralField'):
        if not self.compatible_with(other):
            raise GeometryMismatchError('Fields do not share geometry/truncation: {} N={} vs {} N={}'.format(
                self.geometry, self.trunc, other.geometry, other.trunc))

    def with_coeffs(self, coeffs: np.ndarray) -> 'SpectralField':
        return SpectralField(self.geometry, self.trunc, coeffs)

    def project(self, order: int) -> 'SpectralField':
        """P_k: zero every coefficient with |m| > k."""
        return self.with_coeffs(np.where(self.basis.order_mask(order), self._coeffs, 0.0))

    def restrict(self, trunc: int) -> 'SpectralField':
        """The same field expressed in another truncation; modes above ``trunc`` are dropped."""
        if trunc == self.trunc:
            return self
        source, target = self.basis, spectral_basis(trunc)
        idx = target.lookup(source.modes)
        keep = idx >= 0
        values = np.zeros(target.dim)
        values[idx[keep]] = self.a[keep]
        values[idx[keep] + target.size] = self.b[keep]
        return SpectralField(self.geometry, trunc, values)

    def norm(self, s: float = 0.0) -> float:
        return sobolev_norm(self, s)

    def support(self, atol: float = 0.0) -> ModeSubspace:
        """Entries carrying a coefficient larger than ``atol`` in magnitude."""
        nonzero = np.abs(self._coeffs) > atol
        return ModeSubspace(e for e, keep in zip(self.basis.entries(), nonzero) if keep)

    def allclose(self, other: 'SpectralField', atol: float = 1e-12, rtol: float = 0.0) -> bool:
        self.check_compatible(other)
        return bool(np.allclose(self._coeffs, other.coeffs, atol=atol, rtol=rtol))

    def __add__(self, other: 'SpectralField') -> 'SpectralField':
        self.check_compatible(other)
        return self.with_coeffs(self._coeffs + other.coeffs)

    def __sub__(self, other: 'SpectralField') -> 'SpectralField':
        self.check_compatible(other)
        return self.with_coeffs(self._coeffs - other.coeffs)

    def __neg__(self) -> 'SpectralField':
        return self.with_coeffs(-self._coeffs)

    def __mul__(self, scalar: float) -> 'SpectralField':
        return self.with_coeffs(float(scalar) * self._coeffs)

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return 'SpectralField(q=({}, {}), trunc={}, nonzero={})'.format(
            self.geometry.q1, self.geometry.q2, self.trunc, int(np.count_nonzero(self._coeffs)))

    def to_dict(self) -> dict:
        """JSON form {q, trunc, modes: [{m, a, b}]}, canonical modes with a nonzero coefficient, sorted."""
        basis = self.basis
        modes = []
        for i, (m1, m2) in enumerate(basis.modes):
            a, b = float(self.a[i]), float(self.b[i])
            if a != 0.0 or b != 0.0:
                modes.append({'m': [int(m1), int(m2)], 'a': a, 'b': b})
        return {'q': [self.geometry.q1, self.geometry.q2], 'trunc': self.trunc, 'modes': modes}

    @classmethod
    def from_dict(cls, data: dict, geometry: Optional[TorusGeometry] = None,
                  trunc: Optional[int] = None) -> 'SpectralField':
        """Inverse of :meth:`to_dict`. Any representative of a mode is accepted.

        ``geometry`` and ``trunc`` fill in keys missing from ``data``.
        """
        if 'q' in data:
            geometry = TorusGeometry.of(data['q'])
        if 'trunc' in data:
            trunc = int(data['trunc'])
        if geometry is None or trunc is None:
            raise ValueError('Field data needs a geometry and a truncation')
        basis = spectral_basis(trunc)
        values = np.zeros(basis.dim)
        seen = set()
        for item in data.get('modes', []):
            mode, flipped = ModeIndex.of(item['m']).canonical()
            if mode in seen:
                raise ValueError('Mode {} given twice'.format(mode))
            seen.add(mode)
            for parity, key in ((Parity.COS, 'a'), (Parity.SIN, 'b')):
                slot, _ = basis.position(mode, parity)
                values[slot] = representative_sign(parity, flipped) * float(item.get(key, 0.0))
        return cls(geometry, trunc, values)


def helmholtz(u: SpectralField, p: SobolevParams, inverse: bool = False) -> SpectralField:
    """U = (I - αΔ)u, mode-wise multiplication by 1 + α‖m‖²_q (division when ``inverse``)."""
    factor = 1.0 + p.alpha * _doubled(_eigenvalues(u.trunc, u.geometry))
    if inverse:
        return u.with_coeffs(u.coeffs / factor)
    return u.with_coeffs(u.coeffs * factor)


def op_L(U: SpectralField, p: SobolevParams) -> SpectralField:
    """LU = -νPΔ(I - αΔ)^{-1}U, so that ∂_tU + LU is dissipative."""
    return U.with_coeffs(U.coeffs * linear_rates(U.trunc, U.geometry, p))


def sobolev_norm(U: SpectralField, s: float) -> float:
    """Multiplier norm (κ Σ (1 + ‖m‖²_q)^s (a_m² + b_m²))^{1/2}."""
    weights = sobolev_weights(U.trunc, U.geometry, s)
    return math.sqrt(float(np.dot(weights, U.coeffs * U.coeffs)))


def enstrophy_pairing(X: SpectralField, Y: SpectralField) -> float:
    """⟨rot X, rot Y⟩_{L²} = κ Σ ‖m‖²_q (a^X a^Y + b^X b^Y)."""
    X.check_compatible(Y)
    lam = _doubled(_eigenvalues(X.trunc, X.geometry))
    return X.geometry.mass * float(np.dot(lam, X.coeffs * Y.coeffs))


def torus_grid(g: TorusGeometry, grid: int) -> Tuple[np.ndarray, np.ndarray]:
    """Uniform nodes x_i = 2πq_i k / G, k = 0..G-1, along both axes."""
    k = np.arange(grid)
    return 2.0 * math.pi * g.q1 * k / grid, 2.0 * math.pi * g.q2 * k / grid


def mode_phases(modes: np.ndarray, g: TorusGeometry, grid: int) -> np.ndarray:
    """exp(i⟨m, x⟩_q) on the uniform grid for an (n, 2) mode array, shape (n, G, G)."""
    x1, x2 = torus_grid(g, grid)
    modes = np.asarray(modes, dtype=float)
    e1 = np.exp(1j * np.outer(modes[:, 0] / g.q1, x1))
    e2 = np.exp(1j * np.outer(modes[:, 1] / g.q2, x2))
    return e1[:, :, None] * e2[:, None, :]


def evaluate_on_grid(U: SpectralField, grid: int, derivative: Tuple[int, int] = (0, 0)) -> np.ndarray:
    """Values of ∂^{d1}_{x1}∂^{d2}_{x2}U on the uniform grid, shape (2, G, G)."""
    basis, g = U.basis, U.geometry
    d1, d2 = derivative
    phases = mode_phases(basis.modes, g, grid)
    factor = (1j * basis.modes[:, 0] / g.q1) ** d1 * (1j * basis.modes[:, 1] / g.q2) ** d2
    waves = factor[:, None, None] * phases
    scalar = U.a[:, None, None] * waves.real + U.b[:, None, None] * waves.imag
    return np.einsum('mc,mxy->cxy', basis.perps(g), scalar)


def vorticity_on_grid(U: SpectralField, grid: int) -> np.ndarray:
    """rot U = ∂1U2 - ∂2U1 on the uniform grid, shape (G, G)."""
    return evaluate_on_grid(U, grid, (1, 0))[1] - evaluate_on_grid(U, grid, (0, 1))[0]
