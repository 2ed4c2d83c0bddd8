import math

import numpy as np
import pytest

from nelsonlab import fock, model


def numeric_o_beta(disp, beta, p_max=6.0, n=200001):
    """Independent threshold oracle: largest sampled energy level such that
    the sampled velocity sup below it stays under beta."""
    p = np.linspace(-p_max, p_max, n)[:, None]
    om = disp.omega(p)
    vel = disp.grad_norm(p)
    order = np.argsort(om, kind="stable")
    run_vel = np.maximum.accumulate(vel[order])
    ok = run_vel <= beta + 1e-12
    if not ok[0]:
        return math.nan
    return float(om[order][np.max(np.nonzero(ok)[0])])


class TestDispersion:
    def test_o_beta_nonrel_closed_form(self, nonrel):
        assert model.o_beta(nonrel, 1.0) == pytest.approx(0.5, abs=1e-15)
        assert model.o_beta(nonrel, 1.0) == pytest.approx(
            numeric_o_beta(nonrel, 1.0), rel=1e-4)

    def test_o_beta_rel_closed_form(self, relativistic):
        assert model.o_beta(relativistic, 0.6) == pytest.approx(1.25, abs=1e-12)
        assert model.o_beta(relativistic, 0.6) == pytest.approx(
            numeric_o_beta(relativistic, 0.6), rel=1e-4)
        assert model.o_beta(relativistic, 1.0) == math.inf

    def test_o_beta_small_beta_limit(self, nonrel, relativistic):
        assert model.o_beta(nonrel, 1e-8) == pytest.approx(0.0, abs=1e-15)
        assert model.o_beta(relativistic, 1e-8) == pytest.approx(1.0, rel=1e-10)

    def test_o_beta_monotone_left_continuous(self, nonrel, relativistic):
        betas = np.linspace(0.05, 0.95, 19)
        for disp in (nonrel, relativistic):
            vals = [model.o_beta(disp, b) for b in betas]
            assert all(a <= b + 1e-15 for a, b in zip(vals, vals[1:]))

    def test_tabulated_matches_closed_form(self, nonrel):
        p = np.linspace(0.0, 4.0, 20001)
        tab = model.DispersionLaw("tabulated", table_p=p, table_omega=p * p / 2.0)
        for beta in (0.3, 0.6, 1.0):
            assert model.o_beta(tab, beta) == pytest.approx(
                model.o_beta(nonrel, beta), rel=1e-3, abs=1e-4)

    def test_tabulated_nonmonotone_velocity_unsupported(self):
        p = np.linspace(0.0, 4.0, 401)
        om = np.sin(3 * p) + 3.5  # velocity never below any small beta near inf
        tab = model.DispersionLaw("tabulated", table_p=p, table_omega=om)
        with pytest.raises(model.UnsupportedDispersionError):
            model.o_beta(tab, 1e-6)

    def test_hessian_sup(self, nonrel, relativistic):
        assert nonrel.hessian_sup() == 1.0
        assert relativistic.hessian_sup() == 1.0

    def test_hyp2low_sampled(self, nonrel, relativistic, rng):
        """Omega(p - k) >= Omega(p) - beta |k| whenever Omega(p) <= O_beta."""
        for disp in (nonrel, relativistic):
            for beta in (0.3, 0.7):
                ob = model.o_beta(disp, beta)
                for _ in range(300):
                    p = rng.uniform(-3, 3, size=(1,))
                    if float(disp.omega(p)) > ob:
                        continue
                    k = rng.uniform(-3, 3, size=(1,))
                    lhs = float(disp.omega(p - k))
                    rhs = float(disp.omega(p)) - beta * abs(float(k[0]))
                    assert lhs >= rhs - 1e-12


class TestGBeta:
    def test_closed_form_example(self):
        """B=1, C=1, beta=1/2, O_beta=0.125 -> 2/27 (exact-fraction oracle)."""
        from fractions import Fraction

        B, C, Ob = Fraction(1), Fraction(1), Fraction(1, 8)
        branch3 = Fraction(1, 4) / (3 * B * (C + Ob))
        assert branch3 == Fraction(2, 27)
        val = min(1.0, (0.5) ** 1.5 / 3.0, float(branch3))
        assert val == pytest.approx(2.0 / 27.0, rel=1e-15)
        # same numbers through the implementation with a synthetic setup
        disp = model.DispersionLaw("nonrel", 1.0)  # B = 1
        grid = fock.ModeGrid(dim=1, points=np.array([[1.0]]), weights=np.array([1.0]),
                             omega_free=np.array([1.0]), omega_mod=np.array([1.0]),
                             sigma=0.2, meta={"kind": "line", "spacing": 1.0})
        ff = model.FormFactor(kappa0=math.exp(1.0 / (1.0 - 1.0 / 4.0)), lam=2.0, sigma=0.2)
        assert model.quadrature_C(ff, grid) == pytest.approx(1.0, rel=1e-12)
        beta = 0.5
        got = model.g_beta(disp, ff, beta, grid)
        ob = model.o_beta(disp, beta)
        expect = min(1.0, 0.5 ** 1.5 / 3.0, 0.25 / (3.0 * (1.0 + ob)))
        assert got == pytest.approx(expect, rel=1e-12)

    def test_g_beta_vanishes_as_beta_to_one(self, nonrel, ff, grid12):
        assert model.g_beta(nonrel, ff, 1.0 - 1e-9, grid12) < 1e-12

    def test_c_independent_of_sigma(self, nonrel, grid12):
        ff1 = model.FormFactor(1.0, 1.0, 0.2)
        ff2 = model.FormFactor(1.0, 1.0, 0.1)
        assert model.quadrature_C(ff1, grid12) == model.quadrature_C(ff2, grid12)
        g1 = model.g_beta(nonrel, ff1, 0.5, grid12)
        g2 = model.g_beta(nonrel, ff2, 0.5, grid12)
        assert g1 == g2


class TestFormFactor:
    def test_kappa_compact_support_and_positivity(self, ff):
        k = np.linspace(0, 2, 101)
        vals = ff.kappa(k)
        assert np.all(vals >= 0)
        assert np.all(vals[k >= 1.0] == 0.0)

    def test_kappa_sigma_vanishes_below_sigma(self, ff):
        k = np.linspace(0, 0.2, 51)
        assert np.all(ff.kappa_sigma(k) == 0.0)

    def test_kappa_sigma_dominated_by_kappa(self, ff):
        k = np.linspace(0, 1.5, 301)
        assert np.all(ff.kappa_sigma(k) <= ff.kappa(k) + 1e-15)


class TestFiberHamiltonian:
    def test_g_zero_is_diagonal_with_vacuum_floor(self, nonrel, ff, grid12, basis12):
        ms = model.ModelSpec(nonrel, ff, grid12, 0.0)
        P = np.array([0.3])
        H = model.build_fiber_H(ms, P, basis12).dense()
        assert np.abs(H - np.diag(np.diag(H))).max() == 0.0
        assert np.argmin(np.diag(H).real) == 0
        assert np.diag(H)[0].real == pytest.approx(float(nonrel.omega(P)), abs=1e-15)

    def test_free_vs_modified_agree_on_interacting_sector(self, ms_default, basis12):
        ms_free = model.ModelSpec(ms_default.disp, ms_default.ff, ms_default.grid,
                                  ms_default.g, use_modified=False)
        H1 = model.build_fiber_H(ms_default, [0.25], basis12).dense()
        H2 = model.build_fiber_H(ms_free, [0.25], basis12).dense()
        keep = np.abs(np.diag(fock.interacting_projector(basis12).dense())) > 0.5
        assert np.abs((H1 - H2)[np.ix_(keep, keep)]).max() == 0.0

    def test_commutes_with_interacting_projector(self, ms_default, basis12):
        H = model.build_fiber_H(ms_default, [0.25], basis12)
        Pi = fock.interacting_projector(basis12)
        assert np.abs((H @ Pi - Pi @ H).dense()).max() == 0.0

    def test_hermitian_exactly(self, ms_default, basis12):
        H = model.build_fiber_H(ms_default, [0.25], basis12)
        assert H.hermitian and H.hermiticity_defect() == 0.0

    def test_omega_below_h_plus_g2c(self, ms_default, basis12):
        """Omega(P - K) <= H + g^2 C as a matrix inequality on the fiber."""
        C = model.quadrature_C(ms_default.ff, ms_default.grid)
        P = np.array([0.25])
        H = model.build_fiber_H(ms_default, P, basis12).dense()
        K = basis12.boson_momenta()
        om = np.diag(ms_default.disp.omega(P[None, :] - K))
        evals = np.linalg.eigvalsh(H + (ms_default.g ** 2 * C) * np.eye(len(om)) - om)
        assert evals.min() >= -1e-10

    def test_number_bounded_by_modified_energy(self, ms_default, basis12):
        """N <= (2/sigma) dGamma(omega) as diagonal matrices."""
        N = basis12.total_numbers()
        dgo = np.array(basis12.states) @ ms_default.grid.omega_mod
        assert np.all(N <= (2.0 / ms_default.ff.sigma) * dgo + 1e-12)

    def test_d3_radial_fiber_smoke(self, nonrel):
        ff = model.FormFactor(1.0, 1.0, 0.2)
        grid = fock.radial_grid(3, 1.2, 0.2)
        ms = model.ModelSpec(nonrel, ff, grid, 0.05)
        basis = fock.build_basis(grid, 1)
        H = model.build_fiber_H(ms, np.array([0.1, 0.0, 0.0]), basis)
        assert H.hermiticity_defect() == 0.0
        evals = np.linalg.eigvalsh(H.dense())
        assert evals[0] <= float(nonrel.omega(np.array([0.1, 0.0, 0.0])))


@pytest.fixture(scope="module")
def lattice_setup(nonrel, ff):
    L = 32
    grid = fock.lattice_grid(L, [-6, -3, 3, 6], 0.2)
    ms = model.ModelSpec(nonrel, ff, grid, 0.05)
    fb = model.full_basis(ms, L, 2)
    H = model.build_full_H(ms, fb)
    return ms, fb, H


class TestFullModel:
    def test_g_zero_block_diagonal_spectrum(self, nonrel, ff):
        L = 16
        grid = fock.lattice_grid(L, [-2, 2], 0.2)
        ms = model.ModelSpec(nonrel, ff, grid, 0.0)
        fb = model.full_basis(ms, L, 1)
        H = model.build_full_H(ms, fb).dense()
        evals = np.sort(np.linalg.eigvalsh(H))
        expect = []
        for p in fb.momenta:
            for state in fb.boson.states:
                expect.append(float(nonrel.omega(np.array([p])))
                              + float(np.dot(state, ms.boson_omega())))
        assert np.abs(evals - np.sort(expect)).max() < 1e-12

    def test_total_momentum_commutes_exactly(self, lattice_setup):
        _, fb, H = lattice_setup
        Pt = model.total_momentum_op(fb)
        comm = H.mat @ Pt.mat - Pt.mat @ H.mat
        assert comm.nnz == 0 or np.abs(comm.toarray()).max() == 0.0

    def test_fiber_consistency(self, lattice_setup):
        ms, fb, H = lattice_setup
        blocks = model.momentum_blocks(fb)
        Hd = H.dense()
        for m_tot in (0, 2, -3):
            idx = blocks[m_tot]
            ev_block = np.linalg.eigvalsh(Hd[np.ix_(idx, idx)])
            P = 2 * np.pi * m_tot / fb.n_sites
            Hf = model.build_fiber_H(ms, [P], fb.boson, bz_width=2 * np.pi)
            ev_fiber = np.linalg.eigvalsh(Hf.dense())
            assert np.abs(ev_block - ev_fiber).max() < 1e-10

    def test_off_lattice_mode_rejected(self, nonrel, ff):
        grid = fock.line_grid(4, 1.0, 0.2)  # midpoints are not dual-lattice points
        ms = model.ModelSpec(nonrel, ff, grid, 0.05)
        with pytest.raises(model.IncompatibleGridError):
            model.full_basis(ms, 32, 1)


class TestDecayReport:
    def test_r_zero_gives_full_norm_and_monotonicity(self, ms_default):
        rep = model.interaction_decay_report(ms_default, 512, [0, 4, 8, 16, 32])
        table = rep["table"]
        assert table[0][1] == pytest.approx(rep["full_norm"], rel=1e-12)
        tails = [t for _, t in table]
        assert all(a >= b - 1e-15 for a, b in zip(tails, tails[1:]))

    def test_fitted_exponent_exceeds_two(self, ms_default):
        rep = model.interaction_decay_report(ms_default, 1024,
                                             [8, 16, 32, 64, 128, 256], mu=2.0)
        assert rep["fitted_exponent"] > 2.0
        assert rep["exceeds_mu"]
