import math

import numpy as np
import pytest

from nelsonlab import fock


def _grid_from_points(points, sigma=0.2):
    pts = np.asarray(points, dtype=float)[:, None]
    kn = np.abs(pts[:, 0])
    return fock.ModeGrid(dim=1, points=pts, weights=np.ones(len(pts)),
                         omega_free=kn, omega_mod=fock.omega_modified(kn, sigma),
                         sigma=sigma, meta={"kind": "line", "spacing": 1.0})


def test_basis_counts_stars_and_bars():
    # three modes, two bosons: binomial(3 + 2, 2) = 10 states
    g3 = _grid_from_points([0.3, 0.7, 1.1])
    assert fock.build_basis(g3, 2).size == 10
    grid = fock.line_grid(6, 1.0, 0.2)
    assert fock.build_basis(grid, 2).size == math.comb(6 + 2, 2)


def test_basis_nmax_zero_is_vacuum(grid4):
    basis = fock.build_basis(grid4, 0)
    assert basis.size == 1
    assert basis.states[0] == (0, 0, 0, 0)


def test_energy_cap_prunes_to_vacuum(grid4):
    cap = 0.5 * float(grid4.omega_mod.min())
    basis = fock.build_basis(grid4, 2, e_cap=cap)
    assert basis.size == 1


def test_energy_cap_below_vacuum_raises(grid4):
    with pytest.raises(fock.BasisError):
        fock.build_basis(grid4, 2, e_cap=-1.0)


def test_basis_ordering_graded_then_lex(basis4):
    totals = basis4.total_numbers()
    assert np.all(np.diff(totals) >= 0)
    for n in range(4):
        sector = [s for s in basis4.states if sum(s) == n]
        assert sector == sorted(sector)
    for i, s in enumerate(basis4.states):
        assert basis4.index[s] == i


def test_basis_determinism_bit_exact(grid4):
    a = fock.build_basis(grid4, 3).to_csv()
    b = fock.build_basis(fock.line_grid(4, 1.0, 0.2), 3).to_csv()
    assert a == b


def test_grid_rejects_zero_mode():
    with pytest.raises(fock.GridError):
        fock.line_grid(5, 1.0, 0.2)  # odd midpoint grid hits k = 0
    with pytest.raises(fock.GridError):
        fock.lattice_grid(8, [0, 1], 0.2)


def test_single_mode_ladder_matrix():
    grid = fock.ModeGrid(dim=1, points=np.array([[0.5]]), weights=np.array([1.0]),
                         omega_free=np.array([0.5]), omega_mod=np.array([0.5]),
                         sigma=0.2, meta={"kind": "line", "spacing": 1.0})
    basis = fock.build_basis(grid, 2)
    a_dag = fock.creation_op(basis, np.array([1.0])).dense()
    expect = np.zeros((3, 3))
    expect[1, 0] = 1.0
    expect[2, 1] = math.sqrt(2.0)
    assert np.abs(a_dag - expect).max() == 0.0


def test_creation_on_vacuum_gives_weighted_profile(basis4, grid4, rng):
    h = rng.normal(size=4) + 1j * rng.normal(size=4)
    out = fock.creation_op(basis4, h).apply(fock.FockVector.vacuum(basis4))
    for j in range(4):
        idx = basis4.index[tuple(1 if i == j else 0 for i in range(4))]
        assert out.amps[idx] == pytest.approx(math.sqrt(grid4.weights[j]) * h[j], abs=1e-15)


def test_annihilation_kills_vacuum(basis4, rng):
    h = rng.normal(size=4)
    out = fock.annihilation_op(basis4, h).apply(fock.FockVector.vacuum(basis4))
    assert np.abs(out.amps).max() == 0.0


def test_ccr_on_guarded_sector(basis4, grid4, rng):
    guard = fock.guarded_projector(basis4)
    ident = fock.identity_op(basis4)
    for _ in range(5):
        g = rng.normal(size=4) + 1j * rng.normal(size=4)
        h = rng.normal(size=4) + 1j * rng.normal(size=4)
        comm = (fock.annihilation_op(basis4, g) @ fock.creation_op(basis4, h)
                - fock.creation_op(basis4, h) @ fock.annihilation_op(basis4, g))
        dev = (comm - fock.weighted_inner(grid4, g, h) * ident) @ guard
        assert np.abs(dev.dense()).max() < 1e-12


def test_same_type_commutators_vanish_everywhere(basis4, rng):
    g = rng.normal(size=4) + 1j * rng.normal(size=4)
    h = rng.normal(size=4) + 1j * rng.normal(size=4)
    c1, c2 = fock.creation_op(basis4, g), fock.creation_op(basis4, h)
    assert np.abs(((c1 @ c2) - (c2 @ c1)).dense()).max() < 1e-13
    a1, a2 = c1.adjoint(), c2.adjoint()
    assert np.abs(((a1 @ a2) - (a2 @ a1)).dense()).max() < 1e-13


def test_field_op_hermitian_and_vacuum_moments(grid4, rng):
    basis = fock.build_basis(grid4, 2)
    h = rng.normal(size=4) + 1j * rng.normal(size=4)
    phi = fock.field_op(basis, h)
    assert phi.hermitian and phi.hermiticity_defect() == 0.0
    vac = fock.FockVector.vacuum(basis).amps
    first = np.vdot(vac, phi.mat @ vac)
    assert abs(first) == 0.0
    # <Omega, phi(h)^2 Omega> = ||h||_w^2 / 2 (dense evaluation oracle)
    second = np.vdot(vac, (phi.mat @ (phi.mat @ vac)))
    expect = fock.weighted_norm(grid4, h) ** 2 / 2.0
    assert complex(second).real == pytest.approx(expect, rel=1e-13)


def test_field_relative_bound_matrix_inequality(grid4, basis4, rng):
    """+-phi(h) <= alpha dGamma(|k|) + (1/alpha) sum w |h|^2/|k| as matrices."""
    kn = grid4.knorm()
    dg = fock.dGamma(basis4, kn).dense()
    for alpha in (0.5, 1.0, 2.0):
        h = rng.normal(size=4) + 1j * rng.normal(size=4)
        phi = fock.field_op(basis4, h).dense()
        c = float(np.sum(grid4.weights * np.abs(h) ** 2 / kn))
        bound = alpha * dg + (c / alpha) * np.eye(basis4.size)
        for sign in (1, -1):
            evals = np.linalg.eigvalsh(bound - sign * phi)
            assert evals.min() >= -1e-10


def test_annihilation_estim_bound(grid4, basis4, rng):
    """||a(h) psi|| <= (sum w |h|^2/|k|)^(1/2) ||dGamma(|k|)^(1/2) psi||."""
    kn = grid4.knorm()
    dg = fock.dGamma(basis4, kn).dense()
    sq = np.diag(np.sqrt(np.diag(dg).real))
    for _ in range(5):
        h = rng.normal(size=4) + 1j * rng.normal(size=4)
        psi = rng.normal(size=basis4.size) + 1j * rng.normal(size=basis4.size)
        lhs = np.linalg.norm(fock.annihilation_op(basis4, h).mat @ psi)
        c = math.sqrt(float(np.sum(grid4.weights * np.abs(h) ** 2 / kn)))
        assert lhs <= c * np.linalg.norm(sq @ psi) + 1e-12


def test_creation_number_bound(grid4, basis4, rng):
    """||a*(h)(N+1)^(-1/2)|| <= ||h||_w (dense norm on a small basis)."""
    n = basis4.total_numbers()
    scale = np.diag(1.0 / np.sqrt(n + 1.0))
    h = rng.normal(size=4) + 1j * rng.normal(size=4)
    op = fock.creation_op(basis4, h).dense() @ scale
    assert np.linalg.norm(op, 2) <= fock.weighted_norm(grid4, h) + 1e-12


def test_dgamma_identity_is_number(basis4):
    N = fock.dGamma(basis4, np.ones(4))
    assert np.abs((N - fock.number_op(basis4)).dense()).max() == 0.0


def test_dgamma_hermitian_flag_consistency(grid4, basis4, rng):
    b = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    bw = (b + fock.weighted_adjoint(grid4, grid4, b)) / 2
    op = fock.dGamma(basis4, bw)
    assert op.hermitian and op.hermiticity_defect() == 0.0
    op2 = fock.dGamma(basis4, b)
    assert not op2.hermitian


def test_dgamma_number_bound(grid4, basis4, rng):
    """||dGamma(b)(N+1)^(-1)|| <= ||b|| for random b (dense check)."""
    n = basis4.total_numbers()
    scale = np.diag(1.0 / (n + 1.0))
    for _ in range(3):
        b = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
        lhs = np.linalg.norm(fock.dGamma(basis4, b).dense() @ scale, 2)
        assert lhs <= fock.weighted_opnorm(grid4, grid4, b) + 1e-10


def test_dgamma_positivity(grid4, basis4):
    evals = np.linalg.eigvalsh(fock.dGamma(basis4, grid4.knorm()).dense())
    assert evals.min() >= -1e-14


def test_gamma_on_vacuum(basis4, rng):
    b = rng.normal(size=(4, 4))
    col = fock.Gamma(basis4, b).mat[:, 0].toarray().ravel()
    expect = np.zeros(basis4.size)
    expect[0] = 1.0
    assert np.abs(col - expect).max() == 0.0


def test_gamma_indicator_is_soft_projector():
    grid = fock.line_grid(8, 1.2, 0.3)  # two soft modes at |k| = 0.15
    basis = fock.build_basis(grid, 2)
    chi = (grid.knorm() > 0.3).astype(float)
    G = fock.Gamma(basis, chi).dense()
    P = fock.interacting_projector(basis).dense()
    assert np.abs(G - P).max() < 1e-13
    assert np.count_nonzero(np.abs(np.diag(P)) > 0.5) < basis.size


def test_weighted_norm_omega_examples():
    grid = fock.ModeGrid(dim=1, points=np.array([[1.0]]), weights=np.array([1.0]),
                         omega_free=np.array([1.0]), omega_mod=np.array([1.0]),
                         sigma=0.2, meta={"kind": "line", "spacing": 1.0})
    assert fock.weighted_norm_omega(grid, np.array([0.0])) == 0.0
    assert fock.weighted_norm_omega(grid, np.array([1.0])) == pytest.approx(math.sqrt(2.0))


def test_weighted_norm_omega_refinement_convergence():
    """Quadrature of (1 + 1/|k|)|h|^2 converges under grid refinement.

    The profile vanishes at k = 0 (as every coupling with an infrared switch
    does), keeping the 1/|k| weight integrable on the line."""
    h_fn = lambda k: k * np.exp(-(k ** 2))
    vals = []
    for M in (16, 32, 64, 512):
        g = fock.line_grid(M, 2.0, 0.2)
        vals.append(fock.weighted_norm_omega(g, h_fn(g.points[:, 0])))
    ref = vals[-1]
    errs = [abs(v - ref) for v in vals[:-1]]
    assert errs[0] / errs[1] > 3.0 and errs[1] / errs[2] > 3.0  # ~O(mesh^2)
    assert errs[2] < 5e-4


def test_omega_modified_hypothesis_bounds():
    sigma = 0.2
    s = np.linspace(1e-9, 3 * sigma, 4001)
    w = fock.omega_modified(s, sigma)
    assert np.all(w >= s - 1e-14)
    assert np.all(w >= sigma / 2 - 1e-10)
    assert np.abs(w[s >= sigma] - s[s >= sigma]).max() == 0.0
    slopes = np.diff(w) / np.diff(s)
    assert slopes.min() > 0.0
    assert slopes.max() <= 1.0 + 1e-12


def test_omega_modified_subadditive_on_grid():
    sigma = 0.2
    ks = np.linspace(-0.8, 0.8, 33)
    om = lambda s: fock.omega_modified(np.abs(s), sigma)
    worst = max(float(om(a + b) - om(a) - om(b)) for a in ks for b in ks)
    assert worst <= 1e-12


def test_dimension_mismatch_errors(basis4):
    with pytest.raises(fock.DimensionMismatchError):
        fock.creation_op(basis4, np.ones(3))
    with pytest.raises(fock.DimensionMismatchError):
        fock.dGamma(basis4, np.ones((3, 3)))


def test_operator_csv_roundtrip_format(basis4, rng):
    h = rng.normal(size=4)
    text = fock.creation_op(basis4, h).to_csv()
    lines = text.strip().split("\n")
    assert lines[0] == "row,col,re,im"
    row, col, re, im = lines[1].split(",")
    int(row), int(col), float(re), float(im)


def test_radial_grid_structure():
    g = fock.radial_grid(4, 1.2, 0.2)
    assert g.dim == 3
    assert g.n_modes == 24
    assert np.all(g.weights > 0)
    basis = fock.build_basis(g, 1)
    assert basis.size == 25
