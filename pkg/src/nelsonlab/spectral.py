"""Dressed one-electron states and spectral verification utilities.

Ground states are computed by Lanczos with full reorthogonalization from a
fixed, deterministic start vector (vacuum plus a small seeded perturbation);
below dimension 2000 a dense eigendecomposition is used instead and doubles
as the cross-check oracle for the iterative path.  Functional calculus for
energy cutoffs f(H) and spectral windows E_Sigma is spectral-projection
based throughout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .fock import FockVector, OccupationBasis, SparseOperator
from .model import ModelSpec, build_fiber_H, fiber_diagonal, o_beta, quadrature_C

DENSE_CUTOFF = 2000


class ConvergenceError(RuntimeError):
    """Eigen-iteration failed to reach the requested residual tolerance."""

    def __init__(self, msg, diagnostics=None):
        super().__init__(msg)
        self.diagnostics = diagnostics or {}


# ---------------------------------------------------------------------------
# Eigensolvers
# ---------------------------------------------------------------------------

def _start_vector(n: int, seed: int = 7) -> np.ndarray:
    """Vacuum plus a small deterministic perturbation (reproducible runs)."""
    rng = np.random.default_rng(seed)
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    v *= 1e-2 / np.linalg.norm(v)
    v[0] += 1.0
    return v / np.linalg.norm(v)


def lanczos_lowest(mat: sp.csr_matrix, k: int, tol: float,
                   max_iter: int = 500, seed: int = 7):
    """k lowest eigenpairs by Lanczos with full reorthogonalization."""
    n = mat.shape[0]
    m_cap = min(n, max_iter)
    V = np.zeros((n, m_cap), dtype=complex)
    alpha = np.zeros(m_cap)
    beta = np.zeros(m_cap)
    v = _start_vector(n, seed)
    V[:, 0] = v
    prev_vals = None
    for m in range(1, m_cap + 1):
        w = mat @ V[:, m - 1]
        a = float(np.real(np.vdot(V[:, m - 1], w)))
        alpha[m - 1] = a
        w = w - a * V[:, m - 1]
        if m > 1:
            w = w - beta[m - 2] * V[:, m - 2]
        # full reorthogonalization, twice for stability
        for _ in range(2):
            w = w - V[:, :m] @ (V[:, :m].conj().T @ w)
        b = float(np.linalg.norm(w))
        if m >= k:
            T = np.diag(alpha[:m]) + np.diag(beta[:m - 1], 1) + np.diag(beta[:m - 1], -1)
            vals, vecs = np.linalg.eigh(T)
            resid_est = np.abs(b * vecs[m - 1, :k])
            converged = np.all(resid_est <= tol)
            stalled = prev_vals is not None and np.allclose(vals[:k], prev_vals[:k],
                                                            rtol=0, atol=1e-16)
            if converged or b < 1e-14 or m == m_cap or (stalled and b < 1e-12):
                X = V[:, :m] @ vecs[:, :k]
                return vals[:k], X, m
            prev_vals = vals
        if b < 1e-14:
            # invariant subspace smaller than k: pad deterministically
            extra = _start_vector(n, seed + m)
            extra = extra - V[:, :m] @ (V[:, :m].conj().T @ extra)
            b = float(np.linalg.norm(extra))
            w = extra
        beta[m - 1] = b
        if m < m_cap:
            V[:, m] = w / b
    raise ConvergenceError("lanczos did not converge", {"iterations": m_cap})


@dataclass
class SpectralResult:
    """Eigenvalue/eigenvector bundle with residuals and solver provenance."""

    eigenvalues: np.ndarray
    eigenvectors: list
    residuals: np.ndarray
    gap: float
    meta: dict = field(default_factory=dict)

    @property
    def ground_energy(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def ground_vector(self) -> FockVector:
        return self.eigenvectors[0]

    def is_simple(self, rel: float = 1e-8) -> bool:
        return self.gap > rel * (1.0 + abs(self.ground_energy))


def ground_state(H: SparseOperator, k: int = 2, tol: float = 1e-10,
                 max_iter: int = 500, seed: int = 7) -> SpectralResult:
    """k lowest eigenpairs of a Hermitian-flagged operator.

    Dense path below DENSE_CUTOFF; Lanczos with full reorthogonalization
    above.  The ground-state phase is fixed so that the vacuum amplitude
    (or, if it vanishes, the largest amplitude) is nonnegative real.
    """
    if not H.hermitian:
        raise ValueError("ground_state requires a Hermitian-flagged operator")
    n = H.shape[0]
    k = min(k, n)
    if n <= DENSE_CUTOFF:
        vals, vecs = np.linalg.eigh(H.dense())
        vals, vecs = vals[:k], vecs[:, :k]
        iters = 0
        method = "dense"
    else:
        vals, vecs, iters = lanczos_lowest(H.mat, k, tol, max_iter, seed)
        method = "lanczos"
    resid = np.array([
        float(np.linalg.norm(H.mat @ vecs[:, i] - vals[i] * vecs[:, i]))
        for i in range(k)
    ])
    if np.any(resid > max(tol, 1e-9) * (1.0 + np.abs(vals))):
        raise ConvergenceError(
            "eigen residuals above tolerance",
            {"residuals": resid.tolist(), "iterations": iters, "method": method})
    for i in range(k):
        a = vecs[0, i]
        ref = a if abs(a) > 1e-12 else vecs[np.argmax(np.abs(vecs[:, i])), i]
        phase = ref / abs(ref)
        vecs[:, i] = vecs[:, i] / phase
    gap = float(vals[1] - vals[0]) if k >= 2 else math.nan
    basis = H.basis_out
    fvs = [FockVector(basis, vecs[:, i]) if basis is not None else vecs[:, i]
           for i in range(k)]
    return SpectralResult(
        eigenvalues=vals, eigenvectors=fvs, residuals=resid, gap=gap,
        meta={"method": method, "iterations": iters, "tol": tol, "dim": n},
    )


# ---------------------------------------------------------------------------
# Spectral-projection functional calculus
# ---------------------------------------------------------------------------

class SpectralCalculus:
    """Dense eigendecomposition of a Hermitian operator, reused for f(H)."""

    def __init__(self, H: SparseOperator, limit: int = DENSE_CUTOFF):
        if not H.hermitian:
            raise ValueError("functional calculus needs a Hermitian operator")
        if H.shape[0] > limit:
            raise ValueError(f"dense functional calculus capped at dimension {limit}")
        self.vals, self.vecs = np.linalg.eigh(H.dense())

    def fn(self, f) -> np.ndarray:
        return (self.vecs * f(self.vals)[None, :]) @ self.vecs.conj().T

    def projector(self, sigma: float) -> np.ndarray:
        keep = (self.vals <= sigma).astype(float)
        return (self.vecs * keep[None, :]) @ self.vecs.conj().T

    def window_vectors(self, sigma: float) -> np.ndarray:
        return self.vecs[:, self.vals <= sigma]

    def count_below(self, sigma: float) -> int:
        return int(np.sum(self.vals <= sigma))


# ---------------------------------------------------------------------------
# Scans and bounds
# ---------------------------------------------------------------------------

def soft_boson_occupancy(psi: FockVector, sigma: float | None = None) -> float:
    """Probability mass on basis states with any soft-mode occupation."""
    basis = psi.basis
    soft = basis.grid.soft_mask(sigma)
    if not np.any(soft):
        return 0.0
    mass = 0.0
    nrm2 = float(np.vdot(psi.amps, psi.amps).real)
    for i, state in enumerate(basis.states):
        if any(n > 0 for n, s in zip(state, soft) if s):
            mass += abs(psi.amps[i]) ** 2
    return mass / nrm2 if nrm2 > 0 else 0.0


def pt_ground_energy(ms: ModelSpec, P, basis: OccupationBasis) -> float:
    """Second-order perturbative ground energy from the diagonal data.

    With the symmetric field normalization the vacuum couples to the
    one-boson state of mode j with amplitude g sqrt(w_j / 2) kappa_sigma_j,
    so the level shift carries a factor 1/2 relative to the bare
    sum_j w_j kappa_sigma_j^2 / denom.
    """
    P = np.atleast_1d(np.asarray(P, dtype=float))
    grid = ms.grid
    omega = ms.boson_omega()
    kap = ms.coupling_samples()
    e0 = float(ms.disp.omega(P))
    denom = ms.disp.omega(P[None, :] - np.atleast_2d(grid.points)) + omega - e0
    shift = float(np.sum(grid.weights * kap ** 2 / denom)) / 2.0
    return e0 - ms.g ** 2 * shift


@dataclass
class DispersionCurve:
    """Per-momentum ground data with sandwich margins and convergence flags."""

    momenta: list
    energies: np.ndarray
    free_energies: np.ndarray
    upper_margins: np.ndarray
    lower_margins: np.ndarray
    gaps: np.ndarray
    soft_occupancies: np.ndarray
    free_mod_agree: np.ndarray
    converged: np.ndarray
    alphas: tuple
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        lines = ["P,E_g,E_0,upper_margin,lower_margin,gap,soft_occupancy"]
        for i, P in enumerate(self.momenta):
            pstr = ";".join(f"{x:.17g}" for x in np.atleast_1d(P))
            lines.append(
                f"{pstr},{self.energies[i]:.17g},{self.free_energies[i]:.17g},"
                f"{self.upper_margins[i]:.17g},{self.lower_margins[i]:.17g},"
                f"{self.gaps[i]:.17g},{self.soft_occupancies[i]:.17g}")
        return "\n".join(lines) + "\n"


def dispersion_scan(ms: ModelSpec, momenta, basis: OccupationBasis,
                    tol: float = 1e-10, beta: float | None = None,
                    workers: int = 1) -> DispersionCurve:
    """Ground energies over a momentum list with sandwich-bound margins.

    Lower bounds (1 - a) E_0(P) - (g^2/a) C are evaluated at
    a in {|g|, 1/2, 1}; E_0(P) is the free ground energy on the same
    truncated basis, so every margin is an exact matrix statement up to
    eigensolver noise.  Scan momenta must satisfy Omega(P) <= O_beta.
    """
    momenta = [np.atleast_1d(np.asarray(P, dtype=float)) for P in momenta]
    if beta is not None:
        ob = o_beta(ms.disp, beta)
        for P in momenta:
            if float(ms.disp.omega(P)) > ob:
                raise ValueError(f"scan momentum {P} violates Omega(P) <= O_beta")
    C = quadrature_C(ms.ff, ms.grid)
    alphas = tuple(a for a in (abs(ms.g), 0.5, 1.0) if a > 0)
    ms_free = ModelSpec(ms.disp, ms.ff, ms.grid,
                        0.0, use_modified=ms.use_modified)
    ms_other = ModelSpec(ms.disp, ms.ff, ms.grid,
                         ms.g, use_modified=not ms.use_modified)

    def solve_point(P):
        H = build_fiber_H(ms, P, basis)
        try:
            res = ground_state(H, k=2, tol=tol)
        except ConvergenceError:
            return None
        e0 = float(np.min(fiber_diagonal(ms_free, P, basis)))
        eg = res.ground_energy
        upper = float(ms.disp.omega(P)) - eg
        lower = min(eg - ((1 - a) * e0 - (ms.g ** 2 / a) * C) for a in alphas) \
            if alphas else math.inf
        soft = soft_boson_occupancy(res.ground_vector, ms.ff.sigma)
        H2 = build_fiber_H(ms_other, P, basis)
        eg2 = ground_state(H2, k=1, tol=tol).ground_energy
        return (eg, e0, upper, lower, res.gap, soft, abs(eg - eg2))

    results = _parallel_map(solve_point, momenta, workers)
    rows = []
    conv = []
    for r in results:
        if r is None:
            rows.append((math.nan,) * 7)
            conv.append(False)
        else:
            rows.append(r)
            conv.append(True)
    arr = np.array(rows, dtype=float)
    return DispersionCurve(
        momenta=momenta,
        energies=arr[:, 0], free_energies=arr[:, 1],
        upper_margins=arr[:, 2], lower_margins=arr[:, 3],
        gaps=arr[:, 4], soft_occupancies=arr[:, 5],
        free_mod_agree=arr[:, 6], converged=np.array(conv),
        alphas=alphas,
        meta={"C": C, "n_max": basis.n_max, "tol": tol},
    )


def _parallel_map(fn, items, workers: int):
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ThreadPoolExecutor
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))


def lipschitz_gap(ms: ModelSpec, P, eps: float, basis: OccupationBasis,
                  tol: float = 1e-10) -> float:
    """min over grid offsets |k| >= eps of E_g(P - k) + |k| - E_g(P)."""
    P = np.atleast_1d(np.asarray(P, dtype=float))
    eg = ground_state(build_fiber_H(ms, P, basis), k=1, tol=tol).ground_energy
    best = math.inf
    for j in range(ms.grid.n_modes):
        k = ms.grid.points[j]
        kn = ms.grid.omega_free[j]
        if kn < eps:
            continue
        e = ground_state(build_fiber_H(ms, P - k, basis), k=1, tol=tol).ground_energy
        best = min(best, e + kn - eg)
    return best


def delta_gap(ms: ModelSpec, P, basis: OccupationBasis, tol: float = 1e-10) -> float:
    """min over all grid offsets of E_mod(P - k) + omega(k) - E_mod(P)."""
    if not ms.use_modified:
        raise ValueError("delta_gap is defined for the modified dispersion")
    P = np.atleast_1d(np.asarray(P, dtype=float))
    eg = ground_state(build_fiber_H(ms, P, basis), k=1, tol=tol).ground_energy
    best = math.inf
    for j in range(ms.grid.n_modes):
        k = ms.grid.points[j]
        om = ms.grid.omega_mod[j]
        e = ground_state(build_fiber_H(ms, P - k, basis), k=1, tol=tol).ground_energy
        best = min(best, e + om - eg)
    return best


def grad_bound_check(ms: ModelSpec, sigma_win: float, P,
                     basis: OccupationBasis) -> dict:
    """Spectral norm of |grad Omega(P - dGamma(k))| on the window vs closed form.

    The measured value compresses the diagonal velocity matrix to the span
    of eigenvectors with energy <= sigma_win; the bound is
    sqrt(2 (Sigma + g^2 C)/M) (nonrelativistic) or
    sqrt(1 - M^2/(Sigma + g^2 C)^2) (relativistic).
    """
    P = np.atleast_1d(np.asarray(P, dtype=float))
    C = quadrature_C(ms.ff, ms.grid)
    M = ms.disp.mass
    s = sigma_win + ms.g ** 2 * C
    if ms.disp.kind == "nonrel":
        bound = math.sqrt(max(2.0 * s / M, 0.0))
        window = (0.0, M / 18.0)
    elif ms.disp.kind == "rel":
        bound = math.sqrt(max(1.0 - (M / s) ** 2, 0.0)) if s > M else 0.0
        window = (M, 3.0 * M / math.sqrt(8.0))
    else:
        raise ValueError("closed-form bound needs a built-in dispersion")
    H = build_fiber_H(ms, P, basis)
    calc = SpectralCalculus(H)
    V = calc.window_vectors(sigma_win)
    K = basis.boson_momenta()
    vel = ms.disp.grad_norm(P[None, :] - K)
    measured = float(np.linalg.norm((V.conj().T * vel[None, :]) @ V, 2)) if V.size else 0.0
    return {
        "measured": measured,
        "bound": bound,
        "margin": bound - measured,
        "admissible_sigma_window": window,
        "window_dim": int(V.shape[1]),
    }
