"""Electron dispersions, form factors, and Hamiltonian assembly.

The fiber Hamiltonian at total momentum P is

    H(P) = Omega(P - sum_j n_j k_j) + dGamma(omega) + g phi(kappa_sigma)

on an occupation basis; the boson dispersion omega is |k| or the modified
dispersion depending on ``use_modified``.  The full d = 1 model lives on an
L-site chain in the electron-momentum x occupation product basis, with boson
modes restricted to the dual lattice so that total momentum (mod 2 pi) is
conserved exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fock import (
    ModeGrid,
    OccupationBasis,
    SparseOperator,
    _switch,
    field_op,
)


class UnsupportedDispersionError(ValueError):
    """Tabulated dispersion violates the velocity-threshold monotonicity."""


class IncompatibleGridError(ValueError):
    """Boson mode is not on the dual lattice of the electron chain."""


# ---------------------------------------------------------------------------
# Dispersion laws
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class DispersionLaw:
    """Electron dispersion: nonrelativistic, relativistic, or tabulated (d=1)."""

    kind: str
    mass: float = 1.0
    table_p: np.ndarray | None = None
    table_omega: np.ndarray | None = None

    def __post_init__(self):
        if self.kind not in ("nonrel", "rel", "tabulated"):
            raise ValueError(f"unknown dispersion kind {self.kind!r}")
        if self.kind != "tabulated" and self.mass <= 0:
            raise ValueError("mass must be positive")
        if self.kind == "tabulated":
            p = np.asarray(self.table_p, dtype=float)
            om = np.asarray(self.table_omega, dtype=float)
            if p.ndim != 1 or p.shape != om.shape or len(p) < 4:
                raise ValueError("tabulated dispersion needs matching 1-d samples")
            if not np.allclose(np.diff(np.diff(p)), 0.0, atol=1e-12):
                raise ValueError("tabulated dispersion needs uniform momentum samples")
            if np.any(om < 0) or not np.all(np.isfinite(om)):
                raise ValueError("tabulated dispersion must be finite and nonnegative")
            object.__setattr__(self, "table_p", p)
            object.__setattr__(self, "table_omega", om)

    def omega(self, p):
        """Energy at momentum p; p has component shape (..., d), or scalar."""
        p = np.asarray(p, dtype=float)
        p2 = p * p if p.ndim == 0 else np.sum(p * p, axis=-1)
        if self.kind == "nonrel":
            return p2 / (2.0 * self.mass)
        if self.kind == "rel":
            return np.sqrt(p2 + self.mass ** 2)
        pn = np.sqrt(p2)
        return np.interp(pn, self.table_p, self.table_omega)

    def grad(self, p):
        """Gradient of the dispersion; p and the result have shape (..., d)."""
        p = np.asarray(p, dtype=float)
        if self.kind == "nonrel":
            return p / self.mass
        if self.kind == "rel":
            om = np.sqrt(np.sum(p * p, axis=-1, keepdims=True) + self.mass ** 2)
            return p / om
        pn = np.maximum(np.linalg.norm(p, axis=-1, keepdims=True), 1e-12)
        dp = self.table_p[1] - self.table_p[0]
        slope = np.interp(pn.ravel(), self.table_p,
                          np.gradient(self.table_omega, dp)).reshape(pn.shape)
        return slope * p / pn

    def grad_norm(self, p) -> np.ndarray:
        return np.linalg.norm(self.grad(p), axis=-1)

    def hessian_sup(self) -> float:
        """B = sup over p of the spectral norm of the second derivative."""
        if self.kind in ("nonrel", "rel"):
            return 1.0 / self.mass
        dp = self.table_p[1] - self.table_p[0]
        return float(np.abs(np.gradient(np.gradient(self.table_omega, dp), dp)).max())

    def inf_omega(self) -> float:
        if self.kind == "nonrel":
            return 0.0
        if self.kind == "rel":
            return self.mass
        return float(np.min(self.table_omega))


def o_beta(disp: DispersionLaw, beta: float) -> float:
    """Largest energy threshold forcing |grad Omega| <= beta below it.

    Closed forms for the built-ins; for a tabulated law the threshold is
    located by bisection over the sampled velocity sup.  The map
    beta -> O_beta is non-decreasing and continuous from the left, and
    tends to inf Omega as beta -> 0+.
    """
    if beta <= 0:
        raise ValueError("beta must be positive")
    if disp.kind == "nonrel":
        return disp.mass * beta * beta / 2.0
    if disp.kind == "rel":
        if beta >= 1.0:
            return math.inf
        return disp.mass / math.sqrt(1.0 - beta * beta)
    # tabulated: f(lam) = sup {|Omega'(p)| : Omega(p) <= lam}; need f nondecreasing
    pn = disp.table_p
    om = disp.table_omega
    dp = pn[1] - pn[0]
    vel = np.abs(np.gradient(om, dp))
    order = np.argsort(om, kind="stable")
    running = np.maximum.accumulate(vel[order])
    if np.any(np.diff(om[order]) < -1e-12):
        raise UnsupportedDispersionError("tabulated dispersion is not sortable by energy")
    below = running <= beta
    if not below[0]:
        raise UnsupportedDispersionError("no energy window with |grad| <= beta")
    idx = int(np.max(np.nonzero(below)[0]))
    return float(om[order][idx])


def quadrature_C(ff: "FormFactor", grid: ModeGrid) -> float:
    """C = sum_j w_j kappa(k_j)^2 / |k_j| (uses the full kappa: sigma-free)."""
    kn = grid.knorm()
    return float(np.sum(grid.weights * ff.kappa(kn) ** 2 / kn))


def g_beta(disp: DispersionLaw, ff: "FormFactor", beta: float, grid: ModeGrid) -> float:
    """Coupling threshold min(1, (1-b)^{3/2} / 3 sqrt(BC), (1-b)^2 / 3B(C + O_b))."""
    if beta >= 1:
        raise ValueError("beta must be below 1")
    B = disp.hessian_sup()
    C = quadrature_C(ff, grid)
    Ob = o_beta(disp, beta)
    return min(
        1.0,
        (1.0 - beta) ** 1.5 / (3.0 * math.sqrt(B * C)),
        (1.0 - beta) ** 2 / (3.0 * B * (C + Ob)),
    )


# ---------------------------------------------------------------------------
# Form factor
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FormFactor:
    """Smooth compactly supported radial bump with an infrared switch.

    kappa(k) = kappa0 exp(-1 / (1 - (|k|/lam)^2)) inside |k| < lam, zero
    outside; kappa_sigma(k) = kappa(k) chi(|k|/sigma) with chi a mollified
    step vanishing below 1 and equal to 1 above 2.
    """

    kappa0: float = 1.0
    lam: float = 1.0
    sigma: float = 0.2

    def __post_init__(self):
        if self.kappa0 < 0 or self.lam <= 0 or self.sigma <= 0:
            raise ValueError("form factor parameters must be positive")

    def kappa(self, knorm):
        s = np.asarray(knorm, dtype=float) / self.lam
        out = np.zeros_like(s)
        inside = s < 1.0
        with np.errstate(divide="ignore", over="ignore"):
            out[inside] = self.kappa0 * np.exp(-1.0 / (1.0 - s[inside] ** 2))
        return out

    def chi(self, s):
        return _switch(np.asarray(s, dtype=float) - 1.0)

    def kappa_sigma(self, knorm):
        kn = np.asarray(knorm, dtype=float)
        return self.kappa(kn) * self.chi(kn / self.sigma)


# ---------------------------------------------------------------------------
# Model specification and fiber Hamiltonian
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ModelSpec:
    """Dispersion + form factor + grid + coupling, with the dispersion switch."""

    disp: DispersionLaw
    ff: FormFactor
    grid: ModeGrid
    g: float
    use_modified: bool = True

    def __post_init__(self):
        if abs(self.grid.sigma - self.ff.sigma) > 1e-12:
            raise ValueError("grid omega_mod was built with a different sigma")

    def boson_omega(self) -> np.ndarray:
        return self.grid.omega_mod if self.use_modified else self.grid.omega_free

    def coupling_samples(self) -> np.ndarray:
        return self.ff.kappa_sigma(self.grid.knorm())


def _wrap(p, width: float | None):
    if width is None:
        return p
    return (p + width / 2.0) % width - width / 2.0


def fiber_diagonal(ms: ModelSpec, P, basis: OccupationBasis,
                   bz_width: float | None = None) -> np.ndarray:
    """Diagonal part Omega(P - K(n)) + sum_j n_j omega_j per basis state."""
    P = np.atleast_1d(np.asarray(P, dtype=float))
    K = basis.boson_momenta()
    pe = _wrap(P[None, :] - K, bz_width)
    occ = np.array(basis.states, dtype=float)
    return ms.disp.omega(pe) + occ @ ms.boson_omega()


def build_fiber_H(ms: ModelSpec, P, basis: OccupationBasis,
                  bz_width: float | None = None) -> SparseOperator:
    """Fiber Hamiltonian at total momentum P on the occupation basis."""
    diag = fiber_diagonal(ms, P, basis, bz_width)
    H = sp.diags(diag.astype(complex), format="csr")
    if ms.g != 0.0:
        H = H + ms.g * field_op(basis, ms.coupling_samples()).mat
    op = SparseOperator(H.tocsr(), True, basis, basis)
    op.info["P"] = np.atleast_1d(P).tolist()
    op.info["use_modified"] = ms.use_modified
    op.info["omega_samples"] = ms.boson_omega()
    return op


# ---------------------------------------------------------------------------
# Full d = 1 lattice model
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FullBasis:
    """Electron-momentum x occupation product basis on an L-site chain.

    Index layout: i = e_idx * boson.size + b_idx.  Electron momenta are
    2 pi m / L for m = -L/2 .. L/2 - 1; positions are -L/2 .. L/2 - 1.
    """

    n_sites: int
    momenta: np.ndarray
    mode_m: np.ndarray
    boson: OccupationBasis

    @property
    def size(self) -> int:
        return self.n_sites * self.boson.size

    def positions(self) -> np.ndarray:
        L = self.n_sites
        return np.arange(-L // 2, L - L // 2, dtype=float)

    def to_position(self, vec: np.ndarray) -> np.ndarray:
        """(L, nb) position-basis amplitudes of the electron leg (unitary DFT)."""
        L = self.n_sites
        psi = vec.reshape(L, self.boson.size)
        x = self.positions()
        phase = np.exp(1j * np.outer(x, self.momenta)) / math.sqrt(L)
        return phase @ psi

    def electron_position_density(self, vec: np.ndarray) -> np.ndarray:
        pos = self.to_position(vec)
        return np.sum(np.abs(pos) ** 2, axis=1)


def full_basis(ms: ModelSpec, n_sites: int, n_max: int,
               e_cap: float | None = None) -> FullBasis:
    """Product basis, validating that boson modes sit on the dual lattice."""
    from .fock import build_basis

    L = n_sites
    k = np.atleast_2d(ms.grid.points)[:, 0]
    m = k * L / (2.0 * np.pi)
    m_int = np.rint(m).astype(int)
    if ms.grid.dim != 1 or np.any(np.abs(m - m_int) > 1e-9):
        raise IncompatibleGridError("boson modes must be dual-lattice momenta 2 pi m / L")
    momenta = 2.0 * np.pi * np.arange(-L // 2, L - L // 2) / L
    boson = build_basis(ms.grid, n_max, e_cap)
    return FullBasis(n_sites=L, momenta=momenta, mode_m=m_int, boson=boson)


def build_full_H(ms: ModelSpec, fb: FullBasis) -> SparseOperator:
    """Full Hamiltonian Omega(p) x 1 + 1 x dGamma(omega) + g phi(G_x).

    The interaction shifts the electron momentum by -k_j (mod 2 pi) when a
    mode-j boson is created, so total momentum is conserved exactly.
    """
    L = fb.n_sites
    nb = fb.boson.size
    om_e = ms.disp.omega(fb.momenta[:, None])
    om_b = np.array(fb.boson.states, dtype=float) @ ms.boson_omega()
    diag = (om_e[:, None] + om_b[None, :]).ravel().astype(complex)
    rows, cols, data = [], [], []
    if ms.g != 0.0:
        amp = np.sqrt(ms.grid.weights) * ms.coupling_samples() * ms.g / math.sqrt(2.0)
        m_e = np.rint(fb.momenta * L / (2 * np.pi)).astype(int)
        idx_of_m = {mm: i for i, mm in enumerate(m_e)}
        for b_idx, state in enumerate(fb.boson.states):
            if sum(state) >= fb.boson.n_max:
                continue
            for j in np.nonzero(amp)[0]:
                target = state[:j] + (state[j] + 1,) + state[j + 1:]
                t_idx = fb.boson.index.get(target)
                if t_idx is None:
                    continue
                val = amp[j] * math.sqrt(state[j] + 1)
                dm = int(fb.mode_m[j])
                for e_idx in range(L):
                    # e^{-i k x}: electron momentum p -> p - k (wrapped)
                    e_t = idx_of_m[((m_e[e_idx] - dm) + L // 2) % L - L // 2]
                    r = e_t * nb + t_idx
                    c = e_idx * nb + b_idx
                    rows.append(r)
                    cols.append(c)
                    data.append(val)
    mat = sp.coo_matrix((data, (rows, cols)), shape=(fb.size, fb.size), dtype=complex)
    mat = (sp.diags(diag) + mat + mat.conj().T).tocsr()
    return SparseOperator(mat, True, None, None,
                          info={"n_sites": L, "use_modified": ms.use_modified,
                                "omega_samples": ms.boson_omega()})


def total_momentum_op(fb: FullBasis, wrapped: bool = True) -> SparseOperator:
    """Diagonal total momentum p + dGamma(k), reduced to the zone when wrapped."""
    L = fb.n_sites
    m_e = np.rint(fb.momenta * L / (2 * np.pi)).astype(int)
    m_b = np.array(fb.boson.states, dtype=int) @ fb.mode_m
    tot = m_e[:, None] + m_b[None, :]
    if wrapped:
        tot = (tot + L // 2) % L - L // 2
    vals = (2.0 * np.pi / L) * tot.ravel()
    return SparseOperator(sp.diags(vals.astype(complex), format="csr"), True)


def momentum_blocks(fb: FullBasis) -> dict:
    """Indices of the product basis grouped by wrapped total momentum index."""
    L = fb.n_sites
    m_e = np.rint(fb.momenta * L / (2 * np.pi)).astype(int)
    m_b = np.array(fb.boson.states, dtype=int) @ fb.mode_m
    blocks: dict[int, list[int]] = {}
    for e_idx in range(L):
        for b_idx in range(fb.boson.size):
            tot = ((m_e[e_idx] + m_b[b_idx]) + L // 2) % L - L // 2
            blocks.setdefault(int(tot), []).append(e_idx * fb.boson.size + b_idx)
    return blocks


# ---------------------------------------------------------------------------
# Interaction decay report
# ---------------------------------------------------------------------------

def interaction_decay_report(ms: ModelSpec, n_positions: int,
                             r_values, mu: float = 2.0) -> dict:
    """Position-space tail mass of the coupling function against radius.

    The Fourier transform of kappa_sigma is sampled on an n_positions chain;
    the report tabulates T(R) = (sum_{|y| >= R} |g(y)|^2)^(1/2) and fits the
    decay exponent on the requested R window.
    """
    L = n_positions
    m = np.arange(-L // 2, L - L // 2)
    k = 2.0 * np.pi * m / L
    kap = ms.ff.kappa_sigma(np.abs(k))
    y = np.arange(-L // 2, L - L // 2, dtype=float)
    phase = np.exp(1j * np.outer(y, k))
    ghat = (phase @ kap) * (1.0 / L)
    dens = np.abs(ghat) ** 2
    rows = []
    for R in r_values:
        mask = np.abs(y) >= R
        rows.append((float(R), math.sqrt(float(np.sum(dens[mask])))))
    rs = np.array([r for r, _ in rows if r > 0])
    ts = np.array([t for r, t in rows if r > 0])
    good = ts > 1e-14
    if np.sum(good) >= 2:
        slope, _ = np.polyfit(np.log(rs[good]), np.log(ts[good]), 1)
        exponent = -float(slope)
    else:
        exponent = math.inf
    return {
        "table": rows,
        "fitted_exponent": exponent,
        "exceeds_mu": bool(exponent >= mu),
        "full_norm": math.sqrt(float(np.sum(dens))),
    }
