"""The bilinear operator B(U₁, U₂) = P(rot U₁ × (I - αΔ)^{-1}U₂).

Two structurally different evaluations are provided:

* the closed mode-pair formulas (:func:`interact`), assembled once per
  truncation into a sparse :class:`InteractionTensor` that backs :func:`full_B`
  and every time integration;
* :func:`direct_B`, which synthesizes rot U₁ and (I - αΔ)^{-1}U₂ on a grid,
  forms the pointwise product and projects back by exact quadrature.

For a source p_m T(θ_m) and a target p_n T'(θ_n) the product is

    ±‖m‖_q / (1 + α‖n‖²_q) · R(θ_m) T'(θ_n) · p_n^⊥,

where R is the trigonometric factor of the vorticity (rot c_m = -‖m‖_q sin θ_m,
rot s_m = ‖m‖_q cos θ_m). Product-to-sum splits it over θ_{m+n} and θ_{m-n}
and the Leray projection keeps the component along the output's perp vector.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from functools import lru_cache
from typing import NamedTuple, Sequence, Tuple

import numpy as np
from scipy import sparse

from .enums import Parity
from .errors import AliasingError, ContractViolation
from .torus import (ModeIndex, ModeLike, SobolevParams, SpectralField, TorusGeometry, _perp_rows, helmholtz,
                    inner_q, leray_project_dir, mode_phases, perp_q, sobolev_norm, spectral_basis,
                    vorticity_on_grid, evaluate_on_grid)

logger = logging.getLogger(__name__)

Contribution = Tuple[ModeIndex, Parity, np.ndarray]


@dataclass(frozen=True)
class ModePairInteraction:
    """B(source, target) for a source v cos/sin⟨m,x⟩_q and a target w cos/sin⟨n,x⟩_q.

    Attributes:
        source_m (ModeIndex): Index of the first argument (any representative).
        source_parity (Parity): Trigonometric parity of the first argument.
        source_vec (np.ndarray): Direction of the first argument, q-orthogonal to m.
        target_n (ModeIndex): Index of the second argument.
        target_parity (Parity): Parity of the second argument.
        target_vec (np.ndarray): Direction of the second argument, q-orthogonal to n.
        outputs (tuple): Filled by :func:`interact` with ``(l, parity, vector)`` where ``l`` is canonical
            and the contribution is ``vector · cos/sin⟨l,x⟩_q``.
    """
    source_m: ModeIndex
    source_parity: Parity
    source_vec: np.ndarray
    target_n: ModeIndex
    target_parity: Parity
    target_vec: np.ndarray
    outputs: Tuple[Contribution, ...] = field(default=())

    @classmethod
    def of_basis(cls, m: ModeLike, source_parity: Parity, n: ModeLike, target_parity: Parity,
                 g: TorusGeometry) -> 'ModePairInteraction':
        """Pair of unit basis functions, i.e. source c_m/s_m and target c_n/s_n."""
        m, n = ModeIndex.of(m), ModeIndex.of(n)
        return cls(m, source_parity, perp_q(m, g), n, target_parity, perp_q(n, g))


class BilinearProduct(NamedTuple):
    """Truncated value of B and the L² norm of what the truncation dropped."""
    field: SpectralField
    spillover: float


def _pair_kernel(m: np.ndarray, n: np.ndarray, source_sin: np.ndarray, target_sin: np.ndarray,
                 g: TorusGeometry, alpha: float):
    """Closed-form B(e_m, e_n) for arrays of unit basis pairs.

    Returns one tuple per output frequency (m + n, then m - n) holding the canonical output
    modes, their sine flags, the coefficient on the canonical basis function and a validity
    mask (False where the output frequency is zero).
    """
    m = np.asarray(m, dtype=int)
    n = np.asarray(n, dtype=int)
    lam_n = (n[:, 0] / g.q1) ** 2 + (n[:, 1] / g.q2) ** 2
    norm_m = np.sqrt((m[:, 0] / g.q1) ** 2 + (m[:, 1] / g.q2) ** 2)
    amp = np.where(source_sin, 1.0, -1.0) * norm_m / (1.0 + alpha * lam_n)

    pn = _perp_rows(n, g)
    u = np.stack([-pn[:, 1], pn[:, 0]], axis=1)

    # vorticity of a cos source carries sin, of a sin source cos
    rot_sin = ~source_sin
    out_sin = rot_sin != target_sin
    coef_sum = np.where(rot_sin & target_sin, -0.5, 0.5)
    coef_diff = np.where(~rot_sin & target_sin, -0.5, 0.5)

    results = []
    for l, coef in ((m + n, coef_sum), (m - n, coef_diff)):
        valid = np.any(l != 0, axis=1)
        flip = ~((l[:, 0] > 0) | ((l[:, 0] == 0) & (l[:, 1] > 0)))
        lc = np.where(flip[:, None], -l, l)
        sign = np.where(flip & out_sin, -1.0, 1.0)
        pl = _perp_rows(lc, g)
        value = amp * coef * sign * np.einsum('ij,ij->i', u, pl)
        value = np.where(valid, value, 0.0)
        results.append((lc, out_sin, value, valid))
    return results


def _direction_scale(vec: Sequence[float], m: ModeIndex, g: TorusGeometry, what: str) -> float:
    vec = np.asarray(vec, dtype=float)
    k = np.array([m.m1 / g.q1, m.m2 / g.q2])
    residual = abs(inner_q(vec, (m.m1, m.m2), g))
    if residual > 1e-10 * max(np.linalg.norm(vec) * np.linalg.norm(k), 1e-300):
        raise ContractViolation('{} vector {} is not q-orthogonal to {} (⟨v, m⟩_q = {:.3g})'.format(
            what, vec.tolist(), m, residual))
    return float(np.dot(vec, perp_q(m, g)))


def interact(pair: ModePairInteraction, p: SobolevParams, g: TorusGeometry) -> ModePairInteraction:
    """Closed-form contributions of B(source, target) at m + n and m - n.

    Outputs whose frequency is zero or whose projected vector vanishes are omitted.

    Raises:
        ContractViolation: An input vector is not q-orthogonal to its index.
    """
    cs = _direction_scale(pair.source_vec, pair.source_m, g, 'Source')
    ct = _direction_scale(pair.target_vec, pair.target_n, g, 'Target')

    results = _pair_kernel(np.array([pair.source_m.as_tuple()]), np.array([pair.target_n.as_tuple()]),
                           np.array([pair.source_parity is Parity.SIN]),
                           np.array([pair.target_parity is Parity.SIN]), g, p.alpha)
    outputs = []
    for lc, out_sin, value, valid in results:
        amount = cs * ct * float(value[0])
        if not valid[0] or amount == 0.0:
            continue
        l = ModeIndex(int(lc[0, 0]), int(lc[0, 1]))
        outputs.append((l, Parity.SIN if out_sin[0] else Parity.COS, amount * perp_q(l, g)))
    return replace(pair, outputs=tuple(outputs))


class InteractionTensor(object):
    """Sparse form of B on one truncation.

    Column ``i·D + j`` holds B(e_i, e_j) for basis slots i, j (D = 2M), so that
    B(X, Y) = T (x ⊗ y). Rows above the truncation are kept separately to report
    the spillover of the Galerkin closure.

    Args:
        trunc (int): Truncation order shared by inputs and output.
        geometry (TorusGeometry): The torus.
        alpha (float): Fluid parameter α.
    """

    def __init__(self, trunc: int, geometry: TorusGeometry, alpha: float):
        basis = spectral_basis(trunc)
        wide = spectral_basis(2 * trunc)
        dim = basis.dim
        modes = np.concatenate([basis.modes, basis.modes])
        is_sin = np.arange(dim) >= basis.size
        ii, jj = np.meshgrid(np.arange(dim), np.arange(dim), indexing='ij')
        ii, jj = ii.ravel(), jj.ravel()
        columns = ii * dim + jj

        kept_rows, kept_cols, kept_vals = [], [], []
        spill_rows, spill_cols, spill_vals = [], [], []
        for lc, out_sin, value, valid in _pair_kernel(modes[ii], modes[jj], is_sin[ii], is_sin[jj],
                                                      geometry, alpha):
            nonzero = valid & (value != 0.0)
            lc, out_sin, value, cols = lc[nonzero], out_sin[nonzero], value[nonzero], columns[nonzero]
            inside = np.abs(lc).sum(axis=1) <= trunc

            rows = basis.lookup(lc[inside]) + np.where(out_sin[inside], basis.size, 0)
            kept_rows.append(rows)
            kept_cols.append(cols[inside])
            kept_vals.append(value[inside])

            rows = wide.lookup(lc[~inside]) + np.where(out_sin[~inside], wide.size, 0)
            spill_rows.append(rows)
            spill_cols.append(cols[~inside])
            spill_vals.append(value[~inside])

        self.trunc = trunc
        self.geometry = geometry
        self.alpha = alpha
        self.dim = dim
        self._kept = sparse.csr_matrix(
            (np.concatenate(kept_vals), (np.concatenate(kept_rows), np.concatenate(kept_cols))),
            shape=(dim, dim * dim))
        self._spill = sparse.csr_matrix(
            (np.concatenate(spill_vals), (np.concatenate(spill_rows), np.concatenate(spill_cols))),
            shape=(wide.dim, dim * dim))
        logger.debug('Interaction tensor N=%d: %d kept and %d spill entries', trunc, self._kept.nnz,
                     self._spill.nnz)

    def apply(self, x: np.ndarray, y: np.ndarray) -> np.ndarray:
        """Coefficient vector of B(X, Y) within the truncation."""
        return self._kept.dot(np.outer(x, y).ravel())

    def spillover(self, x: np.ndarray, y: np.ndarray) -> float:
        """L² norm of the contributions of B(X, Y) beyond the truncation."""
        dropped = self._spill.dot(np.outer(x, y).ravel())
        return math.sqrt(self.geometry.mass * float(np.dot(dropped, dropped)))

    def column(self, i: int, j: int) -> np.ndarray:
        """B(e_i, e_j) as a dense coefficient vector."""
        return np.asarray(self._kept[:, i * self.dim + j].todense()).ravel()

    def polarized(self, with_spill: bool = False):
        """All B(e_i, e_j) + B(e_j, e_i), i < j, as columns of a sparse matrix.

        With ``with_spill`` also returns, per column, the largest coefficient the product has
        beyond the truncation.
        """
        ii, jj = np.triu_indices(self.dim, k=1)
        kept = self._kept.tocsc()
        columns = (kept[:, ii * self.dim + jj] + kept[:, jj * self.dim + ii]).tocsc()
        if not with_spill:
            return columns
        spill = self._spill.tocsc()
        dropped = abs(spill[:, ii * self.dim + jj] + spill[:, jj * self.dim + ii])
        return columns, np.asarray(dropped.max(axis=0).todense()).ravel()


@lru_cache(maxsize=8)
def interaction_tensor(trunc: int, geometry: TorusGeometry, alpha: float) -> InteractionTensor:
    return InteractionTensor(trunc, geometry, alpha)


def full_B(U: SpectralField, V: SpectralField, p: SobolevParams) -> BilinearProduct:
    """B(U, V) summed over all mode pairs and truncated to U's truncation.

    Raises:
        GeometryMismatchError: U and V do not share geometry and truncation.
    """
    U.check_compatible(V)
    tensor = interaction_tensor(U.trunc, U.geometry, p.alpha)
    out = tensor.apply(U.coeffs, V.coeffs)
    spill = tensor.spillover(U.coeffs, V.coeffs)
    return BilinearProduct(U.with_coeffs(out), spill)


def direct_B(U: SpectralField, V: SpectralField, p: SobolevParams, grid: int) -> SpectralField:
    """B(U, V) by pointwise evaluation on a uniform grid and exact quadrature.

    Raises:
        AliasingError: ``grid`` is below 4·N_trunc + 1 points per axis.
        GeometryMismatchError: U and V do not share geometry and truncation.
    """
    U.check_compatible(V)
    if grid < 4 * U.trunc + 1:
        raise AliasingError('Grid of {} points is too coarse for truncation {} (need at least {})'.format(
            grid, U.trunc, 4 * U.trunc + 1))
    g, basis = U.geometry, U.basis

    omega = vorticity_on_grid(U, grid)
    w = evaluate_on_grid(helmholtz(V, p, inverse=True), grid)
    product = omega[None, :, :] * np.stack([-w[1], w[0]])

    phases = mode_phases(basis.modes, g, grid)
    weight = 2.0 / grid ** 2
    cos_moments = weight * np.einsum('cxy,mxy->mc', product, phases.real)
    sin_moments = weight * np.einsum('cxy,mxy->mc', product, phases.imag)

    out = np.zeros(basis.dim)
    for i, (m1, m2) in enumerate(basis.modes):
        l = (int(m1), int(m2))
        pl = perp_q(l, g)
        out[i] = float(np.dot(leray_project_dir(cos_moments[i], l, g), pl))
        out[i + basis.size] = float(np.dot(leray_project_dir(sin_moments[i], l, g), pl))
    return U.with_coeffs(out)


class NormBounds(NamedTuple):
    """Both sides of the continuity estimates of B, without their constants C(α)."""
    bound_V1: float
    bound_V2: float
    actual_V1: float
    actual_V2: float


def bilinear_norm_bounds(U: SpectralField, V: SpectralField, p: SobolevParams) -> NormBounds:
    """‖B(U,V)‖_{V¹} against ‖V‖_{V²}‖U‖_{V²} and ‖B(U,V)‖_{V²} against ‖V‖_{V²}‖U‖_{V³}."""
    product = full_B(U, V, p).field
    v2 = sobolev_norm(V, 2)
    return NormBounds(bound_V1=v2 * sobolev_norm(U, 2),
                      bound_V2=v2 * sobolev_norm(U, 3),
                      actual_V1=sobolev_norm(product, 1),
                      actual_V2=sobolev_norm(product, 2))
