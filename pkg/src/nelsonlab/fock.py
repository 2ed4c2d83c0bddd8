"""Truncated bosonic Fock spaces over discretized mode grids.

The one-boson space is a finite set of momentum modes ``k_j`` with quadrature
weights ``w_j``, carrying the weighted inner product

    <g, h>_w = sum_j w_j conj(g_j) h_j .

Discrete ladder operators are orthonormalized, ``a_j = a(e_j)/sqrt(w_j)``, so
the canonical commutation relations are weight-free and ladder matrix elements
are exact integer roots.  Smeared operators absorb the weights:

    a*(h) = sum_j sqrt(w_j) h_j a*_j ,       a(h) = a*(h)^dagger .

Truncation convention: the basis keeps total occupation N <= n_max and a*(h)
projects out of the top shell (Galerkin truncation).  Operator identities that
involve a creation operator therefore hold exactly only on the guarded sector
N <= n_max - 1; number-conserving identities hold on the whole basis.

The field operator follows the symmetric normalization

    phi(h) = (a(h) + a*(h)) / sqrt(2) .
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp


class GridError(ValueError):
    """Invalid mode grid (zero mode, bad weights, unsupported structure)."""


class BasisError(ValueError):
    """Invalid basis configuration (e.g. energy cap excludes the vacuum)."""


class DimensionMismatchError(ValueError):
    """Operator or coefficient vector does not match the mode count."""


# ---------------------------------------------------------------------------
# Mode grids
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ModeGrid:
    """Discretized single-boson momentum space.

    Attributes
    ----------
    dim:        spatial dimension d in {1, 2, 3}.
    points:     (M, d) array of momentum nodes; no node may sit at k = 0.
    weights:    (M,) positive quadrature weights (momentum-space volumes).
    omega_free: (M,) samples of |k|.
    omega_mod:  (M,) samples of the modified dispersion (>= |k|, >= sigma/2,
                equal to |k| beyond sigma).
    sigma:      infrared scale used to build omega_mod.
    meta:       structural info used by finite differences and lattices.
    """

    dim: int
    points: np.ndarray
    weights: np.ndarray
    omega_free: np.ndarray
    omega_mod: np.ndarray
    sigma: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", np.asarray(self.weights, dtype=float))
        object.__setattr__(self, "omega_free", np.asarray(self.omega_free, dtype=float))
        object.__setattr__(self, "omega_mod", np.asarray(self.omega_mod, dtype=float))
        if pts.shape[0] != self.n_modes:
            raise GridError("points/weights length mismatch")
        if np.any(self.weights <= 0):
            raise GridError("quadrature weights must be positive")
        norms = np.linalg.norm(pts, axis=1)
        if np.any(norms == 0.0):
            raise GridError("grid places a node at k = 0")
        labels = self.meta.get("copy_labels")
        keys = (
            [(labels[i], *pts[i]) for i in range(len(pts))]
            if labels is not None else [tuple(p) for p in pts]
        )
        if len(set(keys)) != len(pts):
            raise GridError("grid points must be distinct")
        if np.any(self.omega_mod < self.omega_free - 1e-12):
            raise GridError("omega_mod must dominate |k|")
        if np.any(self.omega_mod < self.sigma / 2 - 1e-12):
            raise GridError("omega_mod must stay above sigma/2")
        outside = norms > self.sigma
        if np.any(np.abs(self.omega_mod[outside] - self.omega_free[outside]) > 1e-12):
            raise GridError("omega_mod must equal |k| beyond sigma")

    @property
    def n_modes(self) -> int:
        return len(self.weights)

    def knorm(self) -> np.ndarray:
        return self.omega_free

    def soft_mask(self, sigma: float | None = None) -> np.ndarray:
        """Boolean mask of soft modes, |k| <= sigma."""
        s = self.sigma if sigma is None else sigma
        return self.omega_free <= s


def weighted_inner(grid: ModeGrid, g, h) -> complex:
    return complex(np.sum(grid.weights * np.conj(g) * np.asarray(h)))

def weighted_norm(grid: ModeGrid, h) -> float:
    return math.sqrt(float(np.sum(grid.weights * np.abs(h) ** 2)))

def weighted_adjoint(grid_out: ModeGrid, grid_in: ModeGrid, r: np.ndarray) -> np.ndarray:
    """Adjoint of a mode matrix r: h_in -> h_out w.r.t. the weighted inner products.

    The weight ratio is formed first so that equal weights contribute an
    exact factor 1 (the adjoint of a symmetrized matrix is then bit-equal)."""
    ratio = grid_out.weights[None, :] / grid_in.weights[:, None]
    return r.conj().T * ratio

def to_ortho(grid_out: ModeGrid, grid_in: ModeGrid, b: np.ndarray) -> np.ndarray:
    """Convert a coefficient-gauge mode matrix to the orthonormal gauge."""
    ratio = np.sqrt(grid_out.weights)[:, None] / np.sqrt(grid_in.weights)[None, :]
    return b * ratio

def weighted_opnorm(grid_out: ModeGrid, grid_in: ModeGrid, b: np.ndarray) -> float:
    return float(np.linalg.norm(to_ortho(grid_out, grid_in, b), 2))


def weighted_norm_omega(grid: ModeGrid, h) -> float:
    """Interaction norm (sum_j w_j (1 + 1/|k_j|) |h_j|^2)^(1/2).

    Raises GridError if any node sits at k = 0 (enforced at grid build time,
    re-checked here because the weight 1/|k| is singular there).
    """
    h = np.asarray(h)
    if h.shape[0] != grid.n_modes:
        raise DimensionMismatchError("coefficient vector length != mode count")
    kn = grid.knorm()
    if np.any(kn == 0):
        raise GridError("grid contains a k = 0 mode")
    return math.sqrt(float(np.sum(grid.weights * (1.0 + 1.0 / kn) * np.abs(h) ** 2)))


def _switch(t):
    """C-infinity step: 0 for t <= 0, 1 for t >= 1 (exp-based partition)."""
    t = np.clip(np.asarray(t, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore", invalid="ignore"):
        a = np.where(t > 0, np.exp(-1.0 / np.maximum(t, 1e-300)), 0.0)
        b = np.where(t < 1, np.exp(-1.0 / np.maximum(1.0 - t, 1e-300)), 0.0)
    return a / (a + b)


def omega_modified(s, sigma: float):
    """Modified boson dispersion on |k| = s.

    Squared-mass blend sqrt(s^2 + (sigma^2/4) u(s)) with u a smooth switch
    from 1 (s <= sigma/2) to 0 (s >= sigma).  Satisfies omega >= max(s, sigma/2),
    omega = s beyond sigma, 0 < omega' <= 1 away from 0.
    """
    s = np.asarray(s, dtype=float)
    u = 1.0 - _switch((2.0 * s - sigma) / sigma)
    return np.sqrt(s * s + (sigma * sigma / 4.0) * u)


def omega_modified_grad(s, sigma: float, rel_step: float = 1e-6):
    """Radial derivative of the modified dispersion (central difference).

    Exact value 1 is returned beyond sigma, where omega coincides with |k|.
    """
    s = np.asarray(s, dtype=float)
    h = rel_step * max(sigma, 1e-12)
    lo = np.maximum(s - h, 0.0)
    hi = s + h
    grad = (omega_modified(hi, sigma) - omega_modified(lo, sigma)) / (hi - lo)
    return np.where(s >= sigma, 1.0, grad)


def line_grid(n_modes: int, kmax: float, sigma: float) -> ModeGrid:
    """Symmetric midpoint grid on [-kmax, kmax] in d = 1 (even n_modes, no k=0)."""
    if n_modes % 2 != 0:
        raise GridError("line_grid requires an even mode count to avoid k = 0")
    h = 2.0 * kmax / n_modes
    pts = (-kmax + (np.arange(n_modes) + 0.5) * h)[:, None]
    w = np.full(n_modes, h)
    kn = np.abs(pts[:, 0])
    return ModeGrid(
        dim=1, points=pts, weights=w,
        omega_free=kn, omega_mod=omega_modified(kn, sigma), sigma=sigma,
        meta={"kind": "line", "spacing": h},
    )


def lattice_grid(n_sites: int, mode_indices: Sequence[int], sigma: float) -> ModeGrid:
    """Boson modes on the dual lattice of an L-site chain: k = 2 pi m / L, m != 0."""
    L = n_sites
    m = np.asarray(sorted(mode_indices), dtype=int)
    if np.any(m == 0):
        raise GridError("lattice modes must avoid m = 0")
    if np.any(np.abs(m) > L // 2):
        raise GridError("lattice mode index outside the Brillouin zone")
    pts = (2.0 * np.pi * m / L)[:, None]
    w = np.full(len(m), 2.0 * np.pi / L)
    kn = np.abs(pts[:, 0])
    return ModeGrid(
        dim=1, points=pts, weights=w,
        omega_free=kn, omega_mod=omega_modified(kn, sigma), sigma=sigma,
        meta={"kind": "lattice", "n_sites": L, "mode_indices": m},
    )


def radial_grid(n_r: int, kmax: float, sigma: float, n_ang: int = 6) -> ModeGrid:
    """d = 3 product grid: radial midpoints x octahedral angular nodes.

    Angular quadrature uses the six axis directions with equal weights; the
    radial weight carries the r^2 Jacobian.
    """
    if n_ang != 6:
        raise GridError("only the 6-point octahedral angular rule is supported")
    dr = kmax / n_r
    radii = (np.arange(n_r) + 0.5) * dr
    dirs = np.array([
        [1, 0, 0], [-1, 0, 0], [0, 1, 0], [0, -1, 0], [0, 0, 1], [0, 0, -1],
    ], dtype=float)
    pts = np.concatenate([r * dirs for r in radii])
    w_ang = 4.0 * np.pi / n_ang
    w = np.concatenate([np.full(n_ang, r * r * dr * w_ang) for r in radii])
    kn = np.linalg.norm(pts, axis=1)
    return ModeGrid(
        dim=3, points=pts, weights=w,
        omega_free=kn, omega_mod=omega_modified(kn, sigma), sigma=sigma,
        meta={"kind": "radial", "n_r": n_r, "dr": dr, "n_ang": n_ang},
    )


# ---------------------------------------------------------------------------
# Occupation bases and vectors
# ---------------------------------------------------------------------------

def _occupations(n_modes: int, total: int):
    """All occupation tuples with given total, in ascending lexicographic order."""
    if n_modes == 1:
        yield (total,)
        return
    for first in range(total + 1):
        for rest in _occupations(n_modes - 1, total - first):
            yield (first,) + rest


@dataclass(frozen=True, eq=False)
class OccupationBasis:
    """Graded-lexicographic occupation basis with a perfect reverse index."""

    grid: ModeGrid
    n_max: int
    e_cap: float | None
    states: tuple
    index: dict = field(repr=False)

    @property
    def size(self) -> int:
        return len(self.states)

    def total_numbers(self) -> np.ndarray:
        return np.array([sum(s) for s in self.states], dtype=int)

    def energies(self) -> np.ndarray:
        occ = np.array(self.states, dtype=float)
        return occ @ self.grid.omega_mod

    def boson_momenta(self) -> np.ndarray:
        """(size, d) array of total boson momentum per state."""
        occ = np.array(self.states, dtype=float)
        return occ @ np.atleast_2d(self.grid.points)

    def sector_slices(self) -> dict:
        out: dict[int, list[int]] = {}
        for i, s in enumerate(self.states):
            out.setdefault(sum(s), []).append(i)
        return out

    def to_csv(self) -> str:
        """Basis dump: index, occupation (semicolon-joined), total N, energy."""
        en = self.energies()
        lines = ["index,occupation,total_n,energy"]
        for i, s in enumerate(self.states):
            lines.append(f"{i},{';'.join(str(n) for n in s)},{sum(s)},{en[i]:.17g}")
        return "\n".join(lines) + "\n"


def build_basis(grid: ModeGrid, n_max: int, e_cap: float | None = None) -> OccupationBasis:
    """Enumerate occupation states with N <= n_max (and energy <= e_cap if set)."""
    if n_max < 0:
        raise BasisError("n_max must be nonnegative")
    omega = grid.omega_mod
    states = []
    for total in range(n_max + 1):
        for occ in _occupations(grid.n_modes, total):
            if e_cap is not None and float(np.dot(occ, omega)) > e_cap:
                continue
            states.append(occ)
    if not states:
        raise BasisError("energy cap excludes even the vacuum")
    if states[0] != (0,) * grid.n_modes:
        raise BasisError("vacuum missing from basis")
    index = {s: i for i, s in enumerate(states)}
    return OccupationBasis(grid=grid, n_max=n_max, e_cap=e_cap,
                           states=tuple(states), index=index)


@dataclass
class FockVector:
    """Complex amplitude vector over an occupation basis."""

    basis: OccupationBasis
    amps: np.ndarray

    def __post_init__(self):
        self.amps = np.ascontiguousarray(self.amps, dtype=complex)
        if self.amps.shape != (self.basis.size,):
            raise DimensionMismatchError("amplitude length != basis size")
        if not (np.all(np.isfinite(self.amps.real)) and np.all(np.isfinite(self.amps.imag))):
            raise ValueError("non-finite amplitudes")

    @classmethod
    def vacuum(cls, basis: OccupationBasis) -> "FockVector":
        amps = np.zeros(basis.size, dtype=complex)
        amps[0] = 1.0
        return cls(basis, amps)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def normalized(self) -> "FockVector":
        return FockVector(self.basis, self.amps / self.norm())


# ---------------------------------------------------------------------------
# Sparse operators
# ---------------------------------------------------------------------------

@dataclass
class SparseOperator:
    """Sparse matrix between occupation bases with a Hermitian flag."""

    mat: sp.csr_matrix
    hermitian: bool = False
    basis_out: OccupationBasis | None = None
    basis_in: OccupationBasis | None = None
    info: dict = field(default_factory=dict)

    @property
    def shape(self):
        return self.mat.shape

    def dense(self) -> np.ndarray:
        return self.mat.toarray()

    def apply(self, vec):
        if isinstance(vec, FockVector):
            return FockVector(self.basis_out or vec.basis, self.mat @ vec.amps)
        return self.mat @ vec

    def adjoint(self) -> "SparseOperator":
        return SparseOperator(self.mat.conj().T.tocsr(), self.hermitian,
                              self.basis_in, self.basis_out)

    def __matmul__(self, other):
        if isinstance(other, SparseOperator):
            return SparseOperator(self.mat @ other.mat, False,
                                  self.basis_out, other.basis_in)
        return self.mat @ other

    def __add__(self, other):
        herm = self.hermitian and getattr(other, "hermitian", False)
        m = other.mat if isinstance(other, SparseOperator) else other
        return SparseOperator((self.mat + m).tocsr(), herm, self.basis_out, self.basis_in)

    def __sub__(self, other):
        herm = self.hermitian and getattr(other, "hermitian", False)
        m = other.mat if isinstance(other, SparseOperator) else other
        return SparseOperator((self.mat - m).tocsr(), herm, self.basis_out, self.basis_in)

    def __mul__(self, scalar):
        herm = self.hermitian and (np.imag(scalar) == 0)
        return SparseOperator(self.mat * scalar, bool(herm), self.basis_out, self.basis_in)

    __rmul__ = __mul__

    def hermiticity_defect(self) -> float:
        d = self.mat - self.mat.conj().T
        return float(np.abs(d.toarray()).max()) if d.nnz else 0.0

    def norm2(self) -> float:
        return float(np.linalg.norm(self.dense(), 2))

    def to_csv(self) -> str:
        """Coordinate-triplet dump: row, col, re, im."""
        coo = self.mat.tocoo()
        order = np.lexsort((coo.col, coo.row))
        lines = ["row,col,re,im"]
        for i in order:
            lines.append(f"{coo.row[i]},{coo.col[i]},{coo.data[i].real:.17g},{coo.data[i].imag:.17g}")
        return "\n".join(lines) + "\n"


def _coo(basis_out, basis_in, rows, cols, data, hermitian=False) -> SparseOperator:
    mat = sp.coo_matrix((data, (rows, cols)),
                        shape=(basis_out.size, basis_in.size), dtype=complex).tocsr()
    return SparseOperator(mat, hermitian, basis_out, basis_in)


def identity_op(basis: OccupationBasis) -> SparseOperator:
    return SparseOperator(sp.identity(basis.size, dtype=complex, format="csr"),
                          True, basis, basis)


def _check_modes(basis: OccupationBasis, h) -> np.ndarray:
    h = np.asarray(h, dtype=complex)
    if h.shape != (basis.grid.n_modes,):
        raise DimensionMismatchError("mode coefficient length != mode count")
    return h


def creation_op(basis: OccupationBasis, h) -> SparseOperator:
    """Smeared creation operator a*(h) = sum_j sqrt(w_j) h_j a*_j.

    States pushed past n_max (or the energy cap) are projected out.
    """
    h = _check_modes(basis, h)
    amp = np.sqrt(basis.grid.weights) * h
    rows, cols, data = [], [], []
    for i, state in enumerate(basis.states):
        if sum(state) >= basis.n_max:
            continue
        for j in np.nonzero(amp)[0]:
            target = state[:j] + (state[j] + 1,) + state[j + 1:]
            t = basis.index.get(target)
            if t is None:
                continue
            rows.append(t)
            cols.append(i)
            data.append(math.sqrt(state[j] + 1) * amp[j])
    return _coo(basis, basis, rows, cols, data)


def annihilation_op(basis: OccupationBasis, h) -> SparseOperator:
    """a(h) = a*(h)^dagger; antilinear in h."""
    return creation_op(basis, h).adjoint()


def field_op(basis: OccupationBasis, h) -> SparseOperator:
    """phi(h) = (a(h) + a*(h)) / sqrt(2); exactly Hermitian by construction."""
    c = creation_op(basis, h)
    mat = (c.mat + c.mat.conj().T) / math.sqrt(2.0)
    return SparseOperator(mat.tocsr(), True, basis, basis)


def number_op(basis: OccupationBasis) -> SparseOperator:
    n = basis.total_numbers().astype(complex)
    return SparseOperator(sp.diags(n, format="csr"), True, basis, basis)


def _as_mode_matrix(basis: OccupationBasis, b) -> np.ndarray:
    M = basis.grid.n_modes
    b = np.asarray(b, dtype=complex)
    if b.ndim == 1:
        if b.shape != (M,):
            raise DimensionMismatchError("diagonal mode operator length != mode count")
        return np.diag(b)
    if b.shape != (M, M):
        raise DimensionMismatchError("mode operator must be M x M")
    return b


def dGamma(basis: OccupationBasis, b) -> SparseOperator:
    """Additive second quantization: sum_i 1 x ... b ... x 1 per sector.

    Number conserving, hence exact on the whole truncated basis.  A diagonal
    ``b`` yields the diagonal operator with value sum_j n_j b_jj.
    """
    b = _as_mode_matrix(basis, b)
    bo = to_ortho(basis.grid, basis.grid, b)
    defect = float(np.abs(bo - bo.conj().T).max()) if bo.size else 0.0
    scale = float(np.abs(bo).max()) if bo.size else 0.0
    herm = defect <= 1e-13 * max(scale, 1.0)
    if herm and defect > 0.0:
        bo = (bo + bo.conj().T) / 2.0
    rows, cols, data = [], [], []
    offdiag = [(i, j) for i in range(bo.shape[0]) for j in range(bo.shape[1])
               if i != j and bo[i, j] != 0]
    for c, state in enumerate(basis.states):
        diag = sum(n * bo[j, j] for j, n in enumerate(state) if n)
        if diag != 0:
            rows.append(c)
            cols.append(c)
            data.append(diag)
        for (i, j) in offdiag:
            nj = state[j]
            if nj == 0:
                continue
            target = list(state)
            target[j] -= 1
            target[i] += 1
            t = basis.index.get(tuple(target))
            if t is None:
                continue
            rows.append(t)
            cols.append(c)
            data.append(bo[i, j] * math.sqrt(nj * (state[i] + 1)))
    return _coo(basis, basis, rows, cols, data, hermitian=bool(herm))


def elementary_ladders(basis: OccupationBasis) -> list:
    """Orthonormal-mode creation matrices a*_i as CSR, cached on the basis."""
    cached = getattr(basis, "_ladders", None)
    if cached is not None:
        return cached
    M = basis.grid.n_modes
    ladders = []
    for i in range(M):
        rows, cols, data = [], [], []
        for c, state in enumerate(basis.states):
            if sum(state) >= basis.n_max:
                continue
            target = state[:i] + (state[i] + 1,) + state[i + 1:]
            t = basis.index.get(target)
            if t is None:
                continue
            rows.append(t)
            cols.append(c)
            data.append(math.sqrt(state[i] + 1))
        ladders.append(sp.coo_matrix((data, (rows, cols)),
                                     shape=(basis.size, basis.size), dtype=complex).tocsr())
    object.__setattr__(basis, "_ladders", ladders)
    return ladders


def _ladder_stack(basis: OccupationBasis) -> np.ndarray:
    """(M, n, n) dense stack of the orthonormal-mode creators, cached."""
    cached = getattr(basis, "_ladder_stack", None)
    if cached is not None:
        return cached
    stack = np.stack([L.toarray() for L in elementary_ladders(basis)])
    object.__setattr__(basis, "_ladder_stack", stack)
    return stack


def _combined_creators(basis_out: OccupationBasis, bo: np.ndarray) -> np.ndarray:
    """(M_in, n, n) dense matrices of a*(bo[:, j]) on basis_out."""
    stack = _ladder_stack(basis_out)
    return np.tensordot(bo.T, stack, axes=(1, 0))


def Gamma(basis_in: OccupationBasis, b, basis_out: OccupationBasis | None = None) -> SparseOperator:
    """Multiplicative second quantization: b x ... x b per sector.

    ``b`` maps mode coefficients of basis_in.grid to those of basis_out.grid
    (rectangular allowed).  Sectors that exceed the target caps are projected.
    """
    basis_out = basis_out or basis_in
    b = np.asarray(b, dtype=complex)
    if b.ndim == 1:
        b = np.diag(b)
    if b.shape != (basis_out.grid.n_modes, basis_in.grid.n_modes):
        raise DimensionMismatchError("Gamma: operator shape does not match grids")
    bo = to_ortho(basis_out.grid, basis_in.grid, b)
    B = _combined_creators(basis_out, bo)
    out = np.zeros((basis_out.size, basis_in.size), dtype=complex)
    for c, state in enumerate(basis_in.states):
        vec = np.zeros(basis_out.size, dtype=complex)
        vec[0] = 1.0
        norm = 1.0
        for j, nj in enumerate(state):
            for _ in range(nj):
                vec = B[j] @ vec
            norm *= math.factorial(nj)
        out[:, c] = vec / math.sqrt(norm)
    return SparseOperator(sp.csr_matrix(out), False, basis_out, basis_in)


def dGamma2(basis_in: OccupationBasis, a, b, basis_out: OccupationBasis | None = None) -> SparseOperator:
    """Mixed second quantization sum_j a x ... b(j-th) ... x a per sector."""
    basis_out = basis_out or basis_in
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    if a.ndim == 1:
        a = np.diag(a)
    if b.ndim == 1:
        b = np.diag(b)
    shape = (basis_out.grid.n_modes, basis_in.grid.n_modes)
    if a.shape != shape or b.shape != shape:
        raise DimensionMismatchError("dGamma2: operator shapes do not match grids")
    ao = to_ortho(basis_out.grid, basis_in.grid, a)
    bo = to_ortho(basis_out.grid, basis_in.grid, b)
    A = _combined_creators(basis_out, ao)
    B = _combined_creators(basis_out, bo)
    out = np.zeros((basis_out.size, basis_in.size), dtype=complex)
    for c, state in enumerate(basis_in.states):
        norm = 1.0
        for nj in state:
            norm *= math.factorial(nj)
        total = np.zeros(basis_out.size, dtype=complex)
        for j, nj in enumerate(state):
            if nj == 0:
                continue
            vec = np.zeros(basis_out.size, dtype=complex)
            vec[0] = 1.0
            vec = B[j] @ vec
            for l, nl in enumerate(state):
                reps = nl - (1 if l == j else 0)
                for _ in range(reps):
                    vec = A[l] @ vec
            total += nj * vec
        out[:, c] = total / math.sqrt(norm)
    return SparseOperator(sp.csr_matrix(out), False, basis_out, basis_in)


def guarded_projector(basis: OccupationBasis, margin: int = 1) -> SparseOperator:
    """Projection onto the sector N <= n_max - margin."""
    keep = (basis.total_numbers() <= basis.n_max - margin).astype(complex)
    return SparseOperator(sp.diags(keep, format="csr"), True, basis, basis)


def interacting_projector(basis: OccupationBasis, sigma: float | None = None) -> SparseOperator:
    """Gamma(chi_i): projection onto states with zero soft-mode occupancy."""
    soft = basis.grid.soft_mask(sigma)
    keep = np.array([all(n == 0 for n, s in zip(state, soft) if s)
                     for state in basis.states], dtype=complex)
    return SparseOperator(sp.diags(keep, format="csr"), True, basis, basis)
