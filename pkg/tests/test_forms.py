import math

import numpy as np
import pytest

from hcfem import (
    Basis,
    FormPair,
    SymMatrix,
    check_assumptions,
    load_form_pair,
    quadratic_functional,
    random_form_pair,
    save_form_pair,
)
from hcfem.errors import DimensionMismatch, InvalidDimensions

from conftest import random_spd


class TestCheckAssumptions:
    def test_decoupled_diagonal(self, diag_pair):
        rep = check_assumptions(diag_pair)
        assert rep.alpha == pytest.approx(1.0)
        assert rep.alpha2 == pytest.approx(1.0)
        assert rep.C1 == pytest.approx(1.0)
        assert rep.C2 == pytest.approx(1.0)
        assert rep.kernel_match
        assert rep.passed

    def test_coupled_hand_eigenvalues(self, coupled_pair):
        # S1 + S2 = [[3,1],[1,2]] -> alpha = (5 - sqrt 5)/2;
        # S2 eigenvalues (3 +- sqrt 5)/2 -> C2 = (3 + sqrt 5)/2; alpha2 = S2[1,1].
        rep = check_assumptions(coupled_pair)
        assert rep.alpha2 == pytest.approx(2.0, abs=1e-12)
        assert rep.C2 == pytest.approx((3.0 + math.sqrt(5.0)) / 2.0, abs=1e-12)
        assert rep.alpha == pytest.approx((5.0 - math.sqrt(5.0)) / 2.0, abs=1e-12)
        assert rep.C1 == pytest.approx(2.0, abs=1e-12)
        assert rep.kernel_match
        assert rep.passed

    def test_violated_subspace_coercivity(self):
        # S2 vanishes on the subspace: alpha2 = 0, so the check fails.
        S1 = SymMatrix(np.diag([1.0, 0.0]))
        S2 = SymMatrix(np.diag([1.0, 0.0]))
        fp = FormPair(S1, S2, Basis(np.array([[0.0], [1.0]])))
        rep = check_assumptions(fp)
        assert rep.alpha2 == pytest.approx(0.0, abs=1e-12)
        assert not rep.passed

    def test_kernel_mismatch_detected(self):
        # ker S1 is two-dimensional but the declared subspace has only one
        # column, so the rank condition fails.
        S1 = SymMatrix(np.diag([1.0, 0.0, 0.0]))
        S2 = SymMatrix(np.eye(3))
        fp = FormPair(S1, S2, Basis(np.eye(3)[:, [2]]))
        rep = check_assumptions(fp)
        assert not rep.kernel_match
        assert not rep.passed

    def test_trivial_subspace(self):
        # Empty basis: S1 must be SPD and alpha2 is vacuously +inf.
        rng = np.random.default_rng(0)
        S1 = SymMatrix(random_spd(4, rng))
        S2 = SymMatrix(random_spd(4, rng))
        fp = FormPair(S1, S2, Basis(np.zeros((4, 0))))
        rep = check_assumptions(fp)
        assert rep.alpha2 == math.inf
        assert rep.kernel_match
        assert rep.passed


class TestFormPairConstruction:
    def test_rejects_nonvanishing_s1(self):
        S1 = SymMatrix(np.eye(2))
        S2 = SymMatrix(np.eye(2))
        with pytest.raises(ValueError, match="vanish"):
            FormPair(S1, S2, Basis(np.array([[0.0], [1.0]])))

    def test_rejects_mismatched_dims(self):
        with pytest.raises(DimensionMismatch):
            FormPair(SymMatrix(np.zeros((2, 2))), SymMatrix(np.zeros((3, 3))),
                     Basis(np.zeros((2, 0))))


class TestRandomFormPair:
    def test_generator_self_check(self):
        fp = random_form_pair(2, 1, seed=7)
        assert check_assumptions(fp).passed

    def test_rank_matches(self):
        fp = random_form_pair(50, 10, seed=1)
        w = np.linalg.eigvalsh(fp.S1.dense())
        thresh = 1e-10 * w[-1]
        assert int((w <= thresh).sum()) == 10

    def test_invalid_dimensions(self):
        with pytest.raises(InvalidDimensions):
            random_form_pair(2, 2, seed=0)
        with pytest.raises(InvalidDimensions):
            random_form_pair(3, 0, seed=0)

    def test_generator_soundness_100_cases(self):
        rng = np.random.default_rng(99)
        for case in range(100):
            n = int(rng.integers(2, 61))
            m = int(rng.integers(1, n))
            fp = random_form_pair(n, m, seed=case)
            assert fp.assumptions().passed, (n, m, case)

    def test_determinism(self):
        a = random_form_pair(9, 3, seed=5)
        b = random_form_pair(9, 3, seed=5)
        np.testing.assert_array_equal(a.S1.dense(), b.S1.dense())
        np.testing.assert_array_equal(a.S2.dense(), b.S2.dense())
        np.testing.assert_array_equal(a.B.mat, b.B.mat)


class TestQuadraticFunctional:
    def test_scalar_case(self):
        # S = [[2]], eta = 4: minimum at xi = 2 with value -8 = -eta^2 / S.
        assert quadratic_functional([[2.0]], [4.0], [2.0]) == pytest.approx(-8.0)

    def test_zero_load_nonnegative(self):
        assert quadratic_functional(np.eye(2), np.zeros(2), np.ones(2)) == pytest.approx(2.0)

    def test_2x2_minimum(self):
        # S = [[2,1],[1,2]], eta = (1,1): minimizer (1/3,1/3), value -2/3.
        S = np.array([[2.0, 1.0], [1.0, 2.0]])
        eta = np.ones(2)
        xi_star = np.array([1 / 3, 1 / 3])
        v_star = quadratic_functional(S, eta, xi_star)
        assert v_star == pytest.approx(-2 / 3, abs=1e-14)
        rng = np.random.default_rng(1)
        for _ in range(10):
            delta = rng.standard_normal(2) * 0.1
            assert quadratic_functional(S, eta, xi_star + delta) > v_star

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatch):
            quadratic_functional(np.eye(2), np.zeros(3), np.zeros(2))

    def test_minimum_property_50_seeded(self):
        # Unique minimum at S^{-1} eta of value -eta' S^{-1} eta.
        for seed in range(50):
            rng = np.random.default_rng(1000 + seed)
            fp = random_form_pair(int(rng.integers(3, 20)), 1, seed=seed)
            S = fp.S1.dense() + fp.S2.dense()
            n = S.shape[0]
            eta = rng.standard_normal(n)
            xi_star = np.linalg.solve(S, eta)
            v_star = quadratic_functional(S, eta, xi_star)
            expected = -float(eta @ xi_star)
            assert v_star == pytest.approx(expected, rel=1e-9, abs=1e-12)
            for _ in range(20):
                delta = rng.standard_normal(n)
                delta *= 0.5 / np.linalg.norm(delta)
                assert quadratic_functional(S, eta, xi_star + delta) > v_star

    def test_form_bound_property(self):
        # |xi' S_i eta| <= C_i ||xi|| ||eta|| + slack for both forms.
        for seed in range(10):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(3, 30))
            fp = random_form_pair(n, max(1, n // 3), seed=seed)
            rep = fp.assumptions()
            for S, C in ((fp.S1.dense(), rep.C1), (fp.S2.dense(), rep.C2)):
                for _ in range(100):
                    x = rng.standard_normal(n)
                    y = rng.standard_normal(n)
                    bound = C * np.linalg.norm(x) * np.linalg.norm(y) + 1e-9
                    assert abs(x @ S @ y) <= bound


class TestSerialization:
    def test_round_trip(self, tmp_path, coupled_pair):
        save_form_pair(coupled_pair, tmp_path / "pair")
        back = load_form_pair(tmp_path / "pair")
        np.testing.assert_allclose(back.S1.dense(), coupled_pair.S1.dense(), atol=0)
        np.testing.assert_allclose(back.S2.dense(), coupled_pair.S2.dense(), atol=0)
        np.testing.assert_allclose(back.B.mat, coupled_pair.B.mat, atol=0)

    def test_round_trip_random(self, tmp_path):
        fp = random_form_pair(17, 5, seed=11)
        save_form_pair(fp, tmp_path / "pair")
        back = load_form_pair(tmp_path / "pair")
        assert back.assumptions().passed
        np.testing.assert_allclose(back.B.mat, fp.B.mat, atol=0)
        np.testing.assert_allclose(back.S1.dense(), fp.S1.dense(), atol=0)

    def test_files_exist(self, tmp_path, diag_pair):
        save_form_pair(diag_pair, tmp_path / "d")
        assert (tmp_path / "d" / "S1.mtx").exists()
        assert (tmp_path / "d" / "S2.mtx").exists()
        assert (tmp_path / "d" / "basis.csv").exists()
