"""Saturation: expressing high Fourier modes through products of low ones.

For a target c_l or s_l and a pair m + n = l with ‖m‖_q ≠ ‖n‖_q and m, n not
parallel, a generator a built on the modes m and n satisfies

    B(a) + target ∈ span{c_{m-n}, s_{m-n}},

so a control acting on the modes of m, n and m - n reaches the target. The
ladder applies this recursively from H³_q up to H^N_q; each rung records the
pair, the solved coefficients and the remainder so that it can be replayed.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import List, Mapping, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from .bilinear import full_B, interaction_tensor
from .enums import Parity
from .errors import DegenerateGeometryError, LadderFailure, RejectedPairError
from .torus import (ModeIndex, ModeLike, ModeSubspace, SobolevParams, SpectralField, TorusGeometry, sobolev_norm,
                    spectral_basis, stokes_eigenvalue)

__all__ = ['ModeSubspace', 'LadderStep', 'Gram', 'mode_level', 'interaction_gram', 'saturation_solve',
           'prescribed_pair', 'ladder_build', 'certified_subspace', 'replay_step', 'step_residual', 'F_of']

logger = logging.getLogger(__name__)

#: Base of the ladder; every mode of order ≤ 3 is a control direction.
BASE_ORDER = 3

#: Increments n tried, in order, when the prescribed pair of a target is rejected.
FALLBACK_INCREMENTS = ((1, 0), (0, 1), (1, -1), (1, 1), (-1, 0), (0, -1), (-1, 1), (-1, -1))

GRAM_TOLERANCE = 1e-12
RESIDUAL_TOLERANCE = 1e-10

Entry = Tuple[ModeIndex, Parity]


def mode_level(l: ModeLike) -> int:
    """Index j of the first saturation iterate E_j certified to contain c_l and s_l.

    Modes of order ≤ 3 are in E_0; an off-axis mode of order k + 3 enters at 2k - 1, an axis
    mode at 2k.
    """
    l = ModeIndex.of(l)
    k = l.order - BASE_ORDER
    if k <= 0:
        return 0
    return 2 * k if l.is_axis else 2 * k - 1


class Gram(NamedTuple):
    """⟨F, G⟩ evaluated from the vectors and from its closed form."""
    direct: float
    closed: float


def interaction_gram(m: ModeLike, n: ModeLike, p: SobolevParams, g: TorusGeometry,
                     cf: float = 1.0, cg: float = 1.0) -> Gram:
    """⟨F, G⟩ for f̃_m = C_f(m₂q₁, -m₁q₂), g̃_n = C_g(n₂q₁, -n₁q₂) and G = ((m+n)₂q₁, -(m+n)₁q₂).

    The closed form is C_fC_g q₁²q₂²(M_q - N_q)(n₁m₂ - n₂m₁) / ((1 + α‖m‖²_q)(1 + α‖n‖²_q))
    with M_q = (1 + α‖m‖²_q)‖m‖²_q and N_q likewise.
    """
    m, n = ModeIndex.of(m), ModeIndex.of(n)
    q1, q2 = g.q1, g.q2
    lam_m, lam_n = stokes_eigenvalue(m, g), stokes_eigenvalue(n, g)
    hm, hn = 1.0 + p.alpha * lam_m, 1.0 + p.alpha * lam_n

    f_perp = cf * np.array([m.m1 * q2, m.m2 * q1])
    g_perp = cg * np.array([n.m1 * q2, n.m2 * q1])
    f_rot = f_perp[0] * m.m1 / q1 + f_perp[1] * m.m2 / q2
    g_rot = g_perp[0] * n.m1 / q1 + g_perp[1] * n.m2 / q2
    F = f_rot / hn * g_perp + g_rot / hm * f_perp
    G = np.array([(m.m2 + n.m2) * q1, -(m.m1 + n.m1) * q2])

    M_q, N_q = hm * lam_m, hn * lam_n
    closed = cf * cg * (q1 * q2) ** 2 * (M_q - N_q) * (n.m1 * m.m2 - n.m2 * m.m1) / (hm * hn)
    return Gram(float(np.dot(F, G)), float(closed))


@dataclass(frozen=True)
class LadderStep:
    """One rung of the saturation ladder, normalized to a unit target.

    With first = C_f·e₁ and second = C_g·e₂ the generator a = first + second satisfies
    B(a) + target = remainder, where the remainder lives on the modes of m - n.

    Attributes:
        target (tuple): Canonical (l, parity) of the target basis function.
        m (ModeIndex): First mode of the pair, m + n = l.
        n (ModeIndex): Second mode of the pair.
        generator (tuple): The two basis functions ((m', parity), (n', parity)), m', n' canonical.
        coefficients (tuple): (C_f, C_g).
        remainder (SpectralField): B(a) + target.
        level (int): Saturation iterate certified by the step.
        gram (float): ⟨F, G⟩ for the solved coefficients.
        substituted (bool): The preferred or prescribed pair was rejected.
        prescribed (tuple): The pair tried first.
        rejected (list): ``(pair, reason)`` for every pair tried before this one.
    """
    target: Entry
    m: ModeIndex
    n: ModeIndex
    generator: Tuple[Entry, Entry]
    coefficients: Tuple[float, float]
    remainder: SpectralField
    level: int
    gram: float
    substituted: bool = False
    prescribed: Optional[Tuple[ModeIndex, ModeIndex]] = None
    rejected: Tuple[Tuple[Tuple[ModeIndex, ModeIndex], str], ...] = field(default=())

    @property
    def geometry(self) -> TorusGeometry:
        return self.remainder.geometry

    @property
    def trunc(self) -> int:
        return self.remainder.trunc

    def generator_field(self, c: float = 1.0) -> SpectralField:
        """Generator scaled so that B(a) + c·target = c·remainder."""
        (e1, p1), (e2, p2) = self.generator
        cf, cg = self.coefficients
        first = SpectralField.basis_function(self.geometry, self.trunc, e1, p1)
        second = SpectralField.basis_function(self.geometry, self.trunc, e2, p2)
        root = math.sqrt(abs(c))
        return root * cf * first + math.copysign(root, c) * cg * second

    def target_field(self, c: float = 1.0) -> SpectralField:
        l, parity = self.target
        return c * SpectralField.basis_function(self.geometry, self.trunc, l, parity)

    def realize(self, c: float) -> Tuple[SpectralField, SpectralField]:
        """(a, c·remainder) with B(a) = -c·target + c·remainder."""
        return self.generator_field(c), c * self.remainder

    def to_dict(self) -> dict:
        (e1, p1), (e2, p2) = self.generator
        return {
            'target': {'m': list(self.target[0]), 'parity': self.target[1].value},
            'pair': [list(self.m), list(self.n)],
            'generator': [{'m': list(e1), 'parity': p1.value}, {'m': list(e2), 'parity': p2.value}],
            'C_f': self.coefficients[0],
            'C_g': self.coefficients[1],
            'remainder': self.remainder.to_dict()['modes'],
            'level': self.level,
            'gram': self.gram,
            'substituted': self.substituted,
            'prescribed': [list(x) for x in self.prescribed] if self.prescribed else None,
            'rejected': [{'pair': [list(x) for x in pair], 'reason': reason} for pair, reason in self.rejected],
        }

    @classmethod
    def from_dict(cls, data: dict, geometry: TorusGeometry, trunc: int) -> 'LadderStep':
        def mode(values):
            return ModeIndex.of(values)

        def pair(values):
            return mode(values[0]), mode(values[1])

        return cls(
            target=(mode(data['target']['m']), Parity(data['target']['parity'])),
            m=mode(data['pair'][0]),
            n=mode(data['pair'][1]),
            generator=tuple((mode(e['m']), Parity(e['parity'])) for e in data['generator']),
            coefficients=(float(data['C_f']), float(data['C_g'])),
            remainder=SpectralField.from_dict({'modes': data['remainder']}, geometry, trunc),
            level=int(data['level']),
            gram=float(data['gram']),
            substituted=bool(data.get('substituted', False)),
            prescribed=pair(data['prescribed']) if data.get('prescribed') else None,
            rejected=tuple((pair(r['pair']), r['reason']) for r in data.get('rejected', [])),
        )


def _check_pair(l: ModeIndex, m: ModeIndex, n: ModeIndex, g: TorusGeometry):
    if (m.m1 + n.m1, m.m2 + n.m2) != (l.m1, l.m2):
        raise RejectedPairError('{} + {} is not {}'.format(m, n, l), 'sum')
    if m.m1 * n.m2 - m.m2 * n.m1 == 0:
        raise RejectedPairError('{} and {} are parallel'.format(m, n), 'parallel')
    if math.isclose(stokes_eigenvalue(m, g), stokes_eigenvalue(n, g), rel_tol=1e-12):
        raise RejectedPairError('{} and {} have the same q-norm'.format(m, n), 'equal-norm')


def _solve(target: SpectralField, l: ModeIndex, parity: Parity, first: Entry, second: Entry,
           p: SobolevParams) -> Tuple[float, float, SpectralField]:
    unit = (SpectralField.basis_function(target.geometry, target.trunc, *first)
            + SpectralField.basis_function(target.geometry, target.trunc, *second))
    beta = full_B(unit, unit, p).field.coefficient(l, parity)
    if abs(beta) < GRAM_TOLERANCE:
        raise DegenerateGeometryError('Generator {} + {} does not reach {} {}'.format(
            first[0], second[0], parity.value, l))
    root = math.sqrt(abs(beta))
    cf, cg = 1.0 / root, -math.copysign(1.0, beta) / root
    a = cf * SpectralField.basis_function(target.geometry, target.trunc, *first) \
        + cg * SpectralField.basis_function(target.geometry, target.trunc, *second)
    return cf, cg, full_B(a, a, p).field + target


def saturation_solve(l: ModeLike, parity: Parity, m: ModeLike, n: ModeLike, p: SobolevParams,
                     g: TorusGeometry, trunc: Optional[int] = None) -> LadderStep:
    """Solves B(a) + e_l ∈ span{c_{m-n}, s_{m-n}} for a generator on the modes m and n.

    A cosine target uses a = C_f c_m + C_g s_n, a sine target a = C_f c_m + C_g c_n (or
    C_f s_m + C_g s_n when the cosine pair does not reach it).

    Args:
        l (ModeLike): Target mode; non-canonical representatives are canonicalized.
        parity (Parity): Target parity.
        m (ModeLike): First mode, with m + n = l.
        n (ModeLike): Second mode.
        p (SobolevParams): Parameters; α enters through B.
        g (TorusGeometry): The torus.
        trunc (int): Optional. Truncation of the returned fields; defaults to |m| + |n|.

    Raises:
        RejectedPairError: m + n ≠ l, ‖m‖_q = ‖n‖_q or m, n parallel.
        DegenerateGeometryError: |⟨F, G⟩| is below 1e-12.
    """
    parity = Parity(parity)
    l, m, n = ModeIndex.of(l), ModeIndex.of(m), ModeIndex.of(n)
    if not l.is_canonical:
        l, m, n = -l, -m, -n
    _check_pair(l, m, n, g)
    gram = interaction_gram(m, n, p, g)
    if abs(gram.direct) < GRAM_TOLERANCE:
        raise DegenerateGeometryError('Interaction of {} and {} vanishes (⟨F, G⟩ = {:.3g})'.format(
            m, n, gram.direct))

    trunc = trunc or max(m.order + n.order, l.order)
    target = SpectralField.basis_function(g, trunc, l, parity)
    mc, nc = m.canonical()[0], n.canonical()[0]
    if parity is Parity.COS:
        branches = [((mc, Parity.COS), (nc, Parity.SIN))]
    else:
        branches = [((mc, Parity.COS), (nc, Parity.COS)), ((mc, Parity.SIN), (nc, Parity.SIN))]

    failure = None
    for first, second in branches:
        try:
            cf, cg, residual = _solve(target, l, parity, first, second, p)
            break
        except DegenerateGeometryError as e:
            failure = e
    else:
        raise failure

    diff = (m.m1 - n.m1, m.m2 - n.m2)
    span = ModeSubspace([(ModeIndex.of(diff).canonical()[0], Parity.COS),
                         (ModeIndex.of(diff).canonical()[0], Parity.SIN)])
    mask = span.mask(trunc)
    remainder = residual.with_coeffs(np.where(mask, residual.coeffs, 0.0))
    off_span = residual - remainder
    if sobolev_norm(off_span, 0) > RESIDUAL_TOLERANCE * sobolev_norm(target, 0):
        raise DegenerateGeometryError('Pair {}, {} leaves a residual of {:.3g} outside the modes of {}'.format(
            m, n, sobolev_norm(off_span, 0), ModeIndex.of(diff)))

    return LadderStep(target=(l, parity), m=m, n=n, generator=(first, second), coefficients=(cf, cg),
                      remainder=remainder, level=mode_level(l),
                      gram=interaction_gram(m, n, p, g, cf, cg).direct)


def prescribed_pair(l: ModeLike) -> Tuple[ModeIndex, ModeIndex]:
    """The pair (m, n) the recursion uses first for a canonical target l of order ≥ 4."""
    l = ModeIndex.of(l)
    l1, l2 = l.m1, l.m2
    if l2 == 0:
        n = (1, -1)
    elif l1 == 0:
        n = (-1, 1)
    elif l1 >= 2:
        n = (1, 0)
    else:
        n = (0, 1 if l2 > 0 else -1)
    return ModeIndex(l1 - n[0], l2 - n[1]), ModeIndex(*n)


def _fits(l: ModeIndex, m: ModeIndex, n: ModeIndex, N: int) -> Optional[str]:
    """Why (m, n) cannot be used for l inside H^N_q, or ``None``."""
    level = mode_level(l)
    diff = (m.m1 - n.m1, m.m2 - n.m2)
    if diff == (0, 0):
        return 'parallel'
    for mode in (m, n, ModeIndex(*diff)):
        if mode.order > N:
            return 'truncation'
        if mode_level(mode) >= level:
            return 'level'
    return None


def _candidates(l: ModeIndex, preferred: Optional[Tuple[ModeLike, ModeLike]]) -> List[Tuple[ModeIndex, ModeIndex]]:
    pairs = []
    if preferred is not None:
        pairs.append((ModeIndex.of(preferred[0]), ModeIndex.of(preferred[1])))
    pairs.append(prescribed_pair(l))
    for n in FALLBACK_INCREMENTS:
        if (l.m1 - n[0], l.m2 - n[1]) != (0, 0):
            pairs.append((ModeIndex(l.m1 - n[0], l.m2 - n[1]), ModeIndex(*n)))
    unique = []
    for pair in pairs:
        if pair not in unique:
            unique.append(pair)
    return unique


def ladder_build(N: int, g: TorusGeometry, p: SobolevParams, trunc: Optional[int] = None,
                 preferred_pairs: Optional[Mapping[ModeLike, Tuple[ModeLike, ModeLike]]] = None) -> List[LadderStep]:
    """Rungs expressing every c_l, s_l with 3 < |l| ≤ N through lower levels.

    Targets are visited by increasing order, then lexicographically, cosine first. For each
    target the preferred pair (if any), the prescribed pair and the fallback pairs are tried in
    that order; the first one passing every check wins and a substitution is recorded.

    Raises:
        ValueError: N < 3.
        LadderFailure: No pair works for some target.
    """
    if int(N) != N or N < BASE_ORDER:
        raise ValueError('Ladder order must be an integer ≥ {}, got {}'.format(BASE_ORDER, N))
    trunc = trunc or N
    preferred = {ModeIndex.of(k).canonical()[0]: v for k, v in (preferred_pairs or {}).items()}
    basis = spectral_basis(N)
    steps = []
    substitutions = 0
    for (l1, l2), order in sorted(zip(map(tuple, basis.modes), basis.orders), key=lambda x: (x[1], x[0])):
        if order <= BASE_ORDER:
            continue
        l = ModeIndex(int(l1), int(l2))
        candidates = _candidates(l, preferred.get(l))
        for parity in (Parity.COS, Parity.SIN):
            tried = []
            step = None
            for m, n in candidates:
                reason = _fits(l, m, n, N)
                if reason is None:
                    try:
                        step = saturation_solve(l, parity, m, n, p, g, trunc)
                        break
                    except RejectedPairError as e:
                        reason = e.reason
                    except DegenerateGeometryError:
                        reason = 'degenerate'
                tried.append(((m, n), reason))
            if step is None:
                raise LadderFailure('No generator pair certifies {} {}'.format(parity.value, l),
                                    [((m.as_tuple(), n.as_tuple()), reason) for (m, n), reason in tried])
            if tried:
                substitutions += 1
                logger.debug('%s %s: pair %s, %s replaced by %s, %s', parity.value, l, candidates[0][0],
                             candidates[0][1], step.m, step.n)
            steps.append(replace(step, substituted=bool(tried), prescribed=candidates[0], rejected=tuple(tried)))
    logger.info('Saturation ladder up to order %d: %d steps, %d substitutions', N, len(steps), substitutions)
    return steps


def certified_subspace(ladder: Sequence[LadderStep], j: int) -> ModeSubspace:
    """E_j as certified by the ladder: H³_q plus every target of level ≤ j."""
    entries = set(ModeSubspace.low_modes(BASE_ORDER).entries)
    entries.update(step.target for step in ladder if step.level <= j)
    return ModeSubspace(entries)


def replay_step(step: LadderStep, p: SobolevParams) -> SpectralField:
    """B(a) + target recomputed from the recorded coefficients."""
    a = step.generator_field()
    return full_B(a, a, p).field + step.target_field()


def step_residual(step: LadderStep, p: SobolevParams) -> float:
    """Relative L² distance between the replayed and the recorded remainder."""
    diff = replay_step(step, p) - step.remainder
    return sobolev_norm(diff, 0) / sobolev_norm(step.target_field(), 0)


def F_of(E: ModeSubspace, budget: int, p: SobolevParams, g: TorusGeometry, atol: float = 1e-9) -> ModeSubspace:
    """Coordinate entries of span(E ∪ {B(ρ) : ρ ∈ E}) up to order ``budget``.

    B(ρ) is spanned by the polarized products B(e_i, e_j) + B(e_j, e_i) of the entries of E;
    products with any component above ``budget`` are left out. An entry belongs to the result
    when its unit vector lies in the span, i.e. its row of an orthonormal basis has unit norm.
    """
    basis = spectral_basis(budget)
    mask = E.mask(budget)
    if not mask.any():
        return ModeSubspace()
    tensor = interaction_tensor(budget, g, p.alpha)
    columns, spill = tensor.polarized(with_spill=True)
    slots = np.nonzero(mask)[0]
    ii, jj = np.triu_indices(basis.dim, k=1)
    inside = mask[ii] & mask[jj] & (spill <= 1e-14)
    products = columns[:, np.nonzero(inside)[0]].toarray()
    identity = np.eye(basis.dim)[:, slots]
    span = linalg.orth(np.hstack([identity, products]))
    weight = np.sum(span * span, axis=1)
    reached = np.abs(weight - 1.0) <= atol
    entries = list(basis.entries())
    return ModeSubspace(entries[i] for i in np.nonzero(reached)[0])
