"""Fock tensor isomorphism, boson splitting, and the scattering identification.

The doubled one-boson space h + h is realized as a 2M-mode grid (two copies of
the base grid).  The unitary U maps its Fock space onto the tensor product of
two Fock spaces over the base grid; in occupation coordinates U is a
permutation isometry, the binomial weights of the sector formula being
absorbed by the occupation-state normalization.

breve_gamma realizes the splitting map Gamma-breve(j) = U Gamma(j) routing each
boson through the pair (j0, jinf), and scattering_ident the fusion map
I = Gamma(iota) U* with iota(h0, hinf) = h0 + hinf.  All maps are Galerkin
projected onto the configured caps; overflow under I is counted, not raised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .fock import (
    DimensionMismatchError,
    FockVector,
    Gamma,
    ModeGrid,
    OccupationBasis,
    SparseOperator,
    dGamma2,
    weighted_adjoint,
)


class IncompatibleCapsError(ValueError):
    """Caps on the two sides of the tensor isomorphism do not match."""


def doubled_grid(grid: ModeGrid) -> ModeGrid:
    """Disjoint union grid for h + h: first M modes = '0' copy, last M = 'inf'."""
    labels = np.concatenate([np.zeros(grid.n_modes, dtype=int),
                             np.ones(grid.n_modes, dtype=int)])
    return ModeGrid(
        dim=grid.dim,
        points=np.vstack([grid.points, grid.points]),
        weights=np.concatenate([grid.weights, grid.weights]),
        omega_free=np.concatenate([grid.omega_free, grid.omega_free]),
        omega_mod=np.concatenate([grid.omega_mod, grid.omega_mod]),
        sigma=grid.sigma,
        meta={"kind": "doubled", "base": grid, "copy_labels": labels},
    )


def stack_pair(j0: np.ndarray, jinf: np.ndarray) -> np.ndarray:
    """Stack two M x M mode operators into the 2M x M map h -> h + h."""
    return np.vstack([np.asarray(j0, dtype=complex), np.asarray(jinf, dtype=complex)])


@dataclass
class SplitPair:
    """Pair of mode operators (j0, jinf) with its recorded algebraic property."""

    grid: ModeGrid
    j0: np.ndarray
    jinf: np.ndarray
    isometric: bool = field(init=False)
    partition: bool = field(init=False)

    def __post_init__(self):
        self.j0 = np.asarray(self.j0, dtype=complex)
        self.jinf = np.asarray(self.jinf, dtype=complex)
        M = self.grid.n_modes
        if self.j0.shape != (M, M) or self.jinf.shape != (M, M):
            raise DimensionMismatchError("split operators must be M x M")
        adj0 = weighted_adjoint(self.grid, self.grid, self.j0)
        adjinf = weighted_adjoint(self.grid, self.grid, self.jinf)
        eye = np.eye(M)
        self.isometric = bool(np.abs(adj0 @ self.j0 + adjinf @ self.jinf - eye).max() < 1e-10)
        self.partition = bool(np.abs(self.j0 + self.jinf - eye).max() < 1e-10)

    def stacked(self) -> np.ndarray:
        return stack_pair(self.j0, self.jinf)


@dataclass(frozen=True, eq=False)
class TensorBasis:
    """Pairs of occupation states with independent caps and a joint total cap."""

    left: OccupationBasis
    right: OccupationBasis
    joint_cap: int
    pairs: tuple
    index: dict = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.pairs)

    def pair_numbers(self) -> np.ndarray:
        nl = self.left.total_numbers()
        nr = self.right.total_numbers()
        return np.array([(nl[i], nr[j]) for i, j in self.pairs], dtype=int)

    def to_csv(self) -> str:
        lines = ["index,left_occupation,right_occupation"]
        for n, (i, j) in enumerate(self.pairs):
            l = ";".join(str(x) for x in self.left.states[i])
            r = ";".join(str(x) for x in self.right.states[j])
            lines.append(f"{n},{l},{r}")
        return "\n".join(lines) + "\n"


def build_tensor_basis(left: OccupationBasis, right: OccupationBasis,
                       joint_cap: int | None = None) -> TensorBasis:
    """Deterministic pair ordering: ascending (total N, left index, right index)."""
    cap = joint_cap if joint_cap is not None else left.n_max + right.n_max
    nl = left.total_numbers()
    nr = right.total_numbers()
    pairs = []
    for total in range(cap + 1):
        for i in range(left.size):
            if nl[i] > total:
                continue
            for j in range(right.size):
                if nl[i] + nr[j] == total:
                    pairs.append((i, j))
    index = {p: n for n, p in enumerate(pairs)}
    return TensorBasis(left=left, right=right, joint_cap=cap,
                       pairs=tuple(pairs), index=index)


def _split_state(state: tuple, M: int) -> tuple[tuple, tuple]:
    return state[:M], state[M:]


def tensor_iso_U(basis_sum: OccupationBasis, tb: TensorBasis) -> SparseOperator:
    """Unitary from the Fock space over h + h onto the tensor-product basis.

    In occupation coordinates every doubled-grid state (n_0 | n_inf) maps to
    the pair state |n_0> x |n_inf| with unit amplitude; the sector formula's
    binomial(n, k)^(1/2) factors are carried by the occupation normalization.
    Raises IncompatibleCapsError when a source state has no target pair.
    """
    M = tb.left.grid.n_modes
    if basis_sum.grid.n_modes != 2 * M:
        raise DimensionMismatchError("source basis must live on the doubled grid")
    rows, cols, data = [], [], []
    for c, state in enumerate(basis_sum.states):
        sl, sr = _split_state(state, M)
        il = tb.left.index.get(sl)
        ir = tb.right.index.get(sr)
        if il is None or ir is None:
            raise IncompatibleCapsError(
                "tensor caps cannot represent a source state; "
                "need left/right caps >= source n_max and matching energy caps")
        t = tb.index.get((il, ir))
        if t is None:
            raise IncompatibleCapsError("joint cap below source n_max")
        rows.append(t)
        cols.append(c)
        data.append(1.0)
    mat = sp.coo_matrix((data, (rows, cols)), shape=(tb.size, basis_sum.size),
                        dtype=complex).tocsr()
    return SparseOperator(mat, False, None, basis_sum)


def _cached_U(basis_sum: OccupationBasis, tb: TensorBasis) -> SparseOperator:
    cache = getattr(tb, "_u_cache", None)
    if cache is None:
        cache = {}
        object.__setattr__(tb, "_u_cache", cache)
    key = id(basis_sum)
    if key not in cache:
        cache[key] = tensor_iso_U(basis_sum, tb)
    return cache[key]


def breve_gamma(sp_pair: SplitPair, source: OccupationBasis, tb: TensorBasis,
                basis_sum: OccupationBasis | None = None) -> SparseOperator:
    """Splitting map U Gamma(j): F -> F x F for the pair j = (j0, jinf)."""
    from .fock import build_basis

    if basis_sum is None:
        basis_sum = build_basis(doubled_grid(source.grid), source.n_max, source.e_cap)
    G = Gamma(source, sp_pair.stacked(), basis_out=basis_sum)
    out = _cached_U(basis_sum, tb) @ G
    out.basis_in = source
    return out


def dbreve_gamma2(sp_pair: SplitPair, b0: np.ndarray, binf: np.ndarray,
                  source: OccupationBasis, tb: TensorBasis,
                  basis_sum: OccupationBasis | None = None) -> SparseOperator:
    """Mixed splitting map U dGamma(j, (b0, binf)): F -> F x F."""
    from .fock import build_basis

    if basis_sum is None:
        basis_sum = build_basis(doubled_grid(source.grid), source.n_max, source.e_cap)
    K = dGamma2(source, sp_pair.stacked(), stack_pair(b0, binf), basis_out=basis_sum)
    out = _cached_U(basis_sum, tb) @ K
    out.basis_in = source
    return out


def scattering_ident(tb: TensorBasis, target: OccupationBasis) -> SparseOperator:
    """Fusion map I: F x F -> F with I(phi x a*(h_1)..a*(h_n) Omega) = a*(h_1)..a*(h_n) phi.

    Matrix elements are products of binomial square roots,
    prod_m binom(nL_m + nR_m, nL_m)^(1/2).  Pairs whose fused state exceeds the
    target caps are projected out and counted in ``info``.
    """
    if target.grid.n_modes != tb.left.grid.n_modes:
        raise DimensionMismatchError("target grid must match the tensor factors")
    rows, cols, data = [], [], []
    projected = 0
    for c, (il, ir) in enumerate(tb.pairs):
        nl = tb.left.states[il]
        nr = tb.right.states[ir]
        fused = tuple(a + b for a, b in zip(nl, nr))
        t = target.index.get(fused)
        if t is None:
            projected += 1
            continue
        amp = 1.0
        for a, b in zip(nl, nr):
            if a and b:
                amp *= math.comb(a + b, a)
        rows.append(t)
        cols.append(c)
        data.append(math.sqrt(amp))
    mat = sp.coo_matrix((data, (rows, cols)), shape=(target.size, tb.size),
                        dtype=complex).tocsr()
    return SparseOperator(mat, False, target, None,
                          info={"projected_pairs": projected, "total_pairs": tb.size})


def tensor_vector(tb: TensorBasis, left: FockVector, right: FockVector) -> np.ndarray:
    """Amplitudes of left x right in the tensor basis (joint cap projected)."""
    out = np.zeros(tb.size, dtype=complex)
    for n, (i, j) in enumerate(tb.pairs):
        out[n] = left.amps[i] * right.amps[j]
    return out


def _pair_index_matrix(tb: TensorBasis) -> np.ndarray:
    cached = getattr(tb, "_pair_matrix", None)
    if cached is not None:
        return cached
    mat = np.full((tb.left.size, tb.right.size), -1, dtype=np.int64)
    for n, (i, j) in enumerate(tb.pairs):
        mat[i, j] = n
    object.__setattr__(tb, "_pair_matrix", mat)
    return mat


def _leg_groups(tb: TensorBasis):
    """Pair indices grouped by the spectator leg index, cached."""
    cached = getattr(tb, "_leg_groups", None)
    if cached is not None:
        return cached
    by_right: dict[int, tuple] = {}
    by_left: dict[int, tuple] = {}
    tmp_r: dict[int, list] = {}
    tmp_l: dict[int, list] = {}
    for n, (i, j) in enumerate(tb.pairs):
        tmp_r.setdefault(j, []).append((n, i))
        tmp_l.setdefault(i, []).append((n, j))
    for j, lst in tmp_r.items():
        by_right[j] = (np.array([n for n, _ in lst]), np.array([i for _, i in lst]))
    for i, lst in tmp_l.items():
        by_left[i] = (np.array([n for n, _ in lst]), np.array([j for _, j in lst]))
    object.__setattr__(tb, "_leg_groups", (by_right, by_left))
    return by_right, by_left


def tensor_factor_ops(tb: TensorBasis, op_left: SparseOperator | None = None,
                      op_right: SparseOperator | None = None) -> SparseOperator:
    """Lift op_left x op_right (identity when None) onto the pair basis.

    Pairs pushed outside the joint cap are projected out (Galerkin)."""
    by_right, by_left = _leg_groups(tb)
    if op_left is not None and op_right is not None:
        # exact Galerkin compression of the product operator
        Ld = op_left.mat.toarray()
        Rd = op_right.mat.toarray()
        pi = np.array([i for i, _ in tb.pairs])
        pj = np.array([j for _, j in tb.pairs])
        out = Ld[pi[:, None], pi[None, :]] * Rd[pj[:, None], pj[None, :]]
    elif op_left is not None:
        Ld = op_left.mat.toarray()
        out = np.zeros((tb.size, tb.size), dtype=complex)
        for _, (pidx, lidx) in by_right.items():
            out[np.ix_(pidx, pidx)] = Ld[np.ix_(lidx, lidx)]
    elif op_right is not None:
        Rd = op_right.mat.toarray()
        out = np.zeros((tb.size, tb.size), dtype=complex)
        for _, (pidx, ridx) in by_left.items():
            out[np.ix_(pidx, pidx)] = Rd[np.ix_(ridx, ridx)]
    else:
        out = np.eye(tb.size, dtype=complex)
    herm = bool((op_left is None or op_left.hermitian) and
                (op_right is None or op_right.hermitian))
    return SparseOperator(sp.csr_matrix(out), herm)


def outer_number_projector(tb: TensorBasis, n: int = 0) -> SparseOperator:
    """Projection 1 x chi(N = n) on the pair basis."""
    nr = tb.right.total_numbers()
    keep = np.array([1.0 if nr[j] == n else 0.0 for (_, j) in tb.pairs], dtype=complex)
    return SparseOperator(sp.diags(keep, format="csr"), True)
