import numpy as np
import pytest

from hcfem import (
    Basis,
    FormPair,
    SymMatrix,
    constrained_solve,
    expansion_error_sweep,
    laurent_coefficients,
    random_form_pair,
    solve_direct,
    subspace_solve,
)
from hcfem.errors import (
    AssumptionsViolated,
    FunctionalNotInKernel,
    InvalidDimensions,
)
from hcfem.expansion import FLOOR_FACTOR, epsilon_scaled_limit_gap

from conftest import random_spd

ETA = np.array([1.0, 1.0])


def trivial_subspace_pair(n, seed):
    """SPD S1 with an empty subspace: the solve reduces to a Neumann series."""
    rng = np.random.default_rng(seed)
    S1 = SymMatrix(random_spd(n, rng))
    S2 = SymMatrix(random_spd(n, rng))
    return FormPair(S1, S2, Basis(np.zeros((n, 0))))


class TestSolveDirect:
    def test_decoupled_diagonal(self, diag_pair):
        np.testing.assert_allclose(
            solve_direct(diag_pair, ETA, 0.5), [1.0, 2.0], atol=1e-13
        )

    def test_coupled_closed_form_eps1(self, coupled_pair):
        # (S1 + eps S2)^{-1} (1,1) = (1/(4+eps), 2/(eps (4+eps))).
        np.testing.assert_allclose(
            solve_direct(coupled_pair, ETA, 1.0), [0.2, 0.4], atol=1e-13
        )

    def test_coupled_closed_form_small_eps(self, coupled_pair):
        eps = 1e-6
        xi = solve_direct(coupled_pair, ETA, eps)
        expected = np.array([1.0 / (4.0 + eps), 2.0 / (eps * (4.0 + eps))])
        np.testing.assert_allclose(xi, expected, rtol=1e-12)

    def test_rejects_eps_zero(self, diag_pair):
        with pytest.raises(InvalidDimensions):
            solve_direct(diag_pair, ETA, 0.0)
        with pytest.raises(InvalidDimensions):
            solve_direct(diag_pair, ETA, -1.0)

    def test_rejects_failed_assumptions(self):
        S1 = SymMatrix(np.diag([1.0, 0.0]))
        S2 = SymMatrix(np.diag([1.0, 0.0]))
        fp = FormPair(S1, S2, Basis(np.array([[0.0], [1.0]])))
        with pytest.raises(AssumptionsViolated):
            solve_direct(fp, ETA, 0.5)

    def test_agrees_with_dense_oracle(self):
        for seed in range(20):
            rng = np.random.default_rng(seed)
            n = int(rng.integers(3, 30))
            fp = random_form_pair(n, max(1, n // 3), seed=seed)
            eta = rng.standard_normal(n)
            for eps in (1.0, 1e-2, 1e-5):
                ref = np.linalg.solve(fp.S1.dense() + eps * fp.S2.dense(), eta)
                got = solve_direct(fp, eta, eps)
                assert np.linalg.norm(got - ref) <= 1e-9 * np.linalg.norm(ref)


class TestSubspaceSolve:
    def test_diagonal(self, diag_pair):
        np.testing.assert_allclose(subspace_solve(diag_pair, ETA), [0.0, 1.0],
                                   atol=1e-14)

    def test_coupled_hand(self, coupled_pair):
        # B'S2B = 2, B'eta = 1 -> (0, 1/2).
        np.testing.assert_allclose(subspace_solve(coupled_pair, ETA),
                                   [0.0, 0.5], atol=1e-14)

    def test_orthogonal_load(self, diag_pair):
        np.testing.assert_allclose(
            subspace_solve(diag_pair, np.array([1.0, 0.0])), [0.0, 0.0],
            atol=1e-14,
        )

    def test_defining_equations(self):
        # B'S2 xi = B'eta and xi in span(B), for random pairs.
        for seed in range(10):
            fp = random_form_pair(12, 4, seed=seed)
            eta = np.random.default_rng(seed).standard_normal(12)
            xi = subspace_solve(fp, eta)
            np.testing.assert_allclose(fp.B.coeffs(fp.S2 @ xi),
                                       fp.B.coeffs(eta), atol=1e-10)
            leak = xi - fp.B.project(xi)
            assert np.linalg.norm(leak) <= 1e-12 * (1.0 + np.linalg.norm(xi))


class TestConstrainedSolve:
    def test_diagonal_no_correction(self, diag_pair):
        np.testing.assert_allclose(
            constrained_solve(diag_pair, np.array([2.0, 0.0])), [2.0, 0.0],
            atol=1e-14,
        )

    def test_coupled_hand_construction(self, coupled_pair):
        # Reduced solve gives (0.25, 0), correction subtracts B/8.
        np.testing.assert_allclose(
            constrained_solve(coupled_pair, np.array([0.5, 0.0])),
            [0.25, -0.125], atol=1e-14,
        )

    def test_zero_rhs(self, coupled_pair):
        np.testing.assert_allclose(
            constrained_solve(coupled_pair, np.zeros(2)), [0.0, 0.0],
            atol=1e-14,
        )

    def test_precondition_enforced(self, coupled_pair):
        with pytest.raises(FunctionalNotInKernel):
            constrained_solve(coupled_pair, np.array([0.0, 1.0]))

    def test_uniqueness_repeat_runs(self):
        fp = random_form_pair(20, 6, seed=3)
        rng = np.random.default_rng(3)
        w = rng.standard_normal(20)
        w -= fp.B.project(w)
        a = constrained_solve(fp, w)
        b = constrained_solve(fp, w)
        assert np.linalg.norm(a - b) <= 1e-12

    def test_defining_equations(self):
        for seed in range(10):
            fp = random_form_pair(15, 5, seed=seed)
            rng = np.random.default_rng(seed)
            w = rng.standard_normal(15)
            w -= fp.B.project(w)
            xi = constrained_solve(fp, w)
            # S1 xi = w to a scaled residual, and B'S2 xi = 0.
            res = np.linalg.norm(fp.S1 @ xi - w)
            assert res <= 1e-9 * (1.0 + np.linalg.norm(w))
            orth = np.linalg.norm(fp.B.coeffs(fp.S2 @ xi))
            assert orth <= 1e-9 * (1.0 + np.linalg.norm(xi)) * fp.S2.frob_norm()


class TestLaurentCoefficients:
    def test_diagonal_terminates(self, diag_pair):
        res = laurent_coefficients(diag_pair, ETA, 1)
        np.testing.assert_allclose(res.coeff(-1), [0.0, 1.0], atol=1e-14)
        np.testing.assert_allclose(res.coeff(0), [1.0, 0.0], atol=1e-14)
        np.testing.assert_allclose(res.coeff(1), [0.0, 0.0], atol=1e-14)
        # The sum is exact for every eps.
        for eps in (0.5, 1e-3):
            direct = solve_direct(diag_pair, ETA, eps)
            np.testing.assert_allclose(res.truncated_sum(eps), direct,
                                       atol=1e-12)

    def test_coupled_hand_recursion(self, coupled_pair):
        res = laurent_coefficients(coupled_pair, ETA, 1)
        np.testing.assert_allclose(res.coeff(-1), [0.0, 0.5], atol=1e-14)
        np.testing.assert_allclose(res.coeff(0), [0.25, -0.125], atol=1e-14)
        np.testing.assert_allclose(res.coeff(1), [-0.0625, 0.03125], atol=1e-14)

    def test_bound_constant_formula(self, coupled_pair):
        res = laurent_coefficients(coupled_pair, ETA, 1)
        rep = coupled_pair.assumptions()
        expected = rep.C2 / rep.alpha * np.linalg.norm(res.coeff(1))
        assert res.bound_constant == pytest.approx(expected, rel=1e-14)

    def test_trivial_subspace_neumann_series(self):
        # Empty subspace: xi_{-1} = 0 and xi_j = (-S1^{-1} S2)^j S1^{-1} eta.
        fp = trivial_subspace_pair(6, seed=4)
        rng = np.random.default_rng(4)
        eta = rng.standard_normal(6)
        res = laurent_coefficients(fp, eta, 3)
        np.testing.assert_allclose(res.coeff(-1), np.zeros(6), atol=1e-14)
        S1inv = np.linalg.inv(fp.S1.dense())
        step = -S1inv @ fp.S2.dense()
        expected = S1inv @ eta
        for j in range(4):
            np.testing.assert_allclose(
                res.coeff(j), expected,
                atol=1e-9 * (1.0 + np.linalg.norm(expected)),
            )
            expected = step @ expected

    def test_order_cap(self, diag_pair):
        with pytest.raises(InvalidDimensions):
            laurent_coefficients(diag_pair, ETA, 9)
        with pytest.raises(InvalidDimensions):
            laurent_coefficients(diag_pair, ETA, -2)

    def test_order_minus_one(self, coupled_pair):
        res = laurent_coefficients(coupled_pair, ETA, -1)
        assert len(res.coeffs) == 1
        np.testing.assert_allclose(res.coeff(-1), [0.0, 0.5], atol=1e-14)

    def test_orthogonality_chain(self):
        # B'(eta - S2 xi_{-1}) ~ 0 and B'S2 xi_j ~ 0 for j >= 0.
        for seed in range(10):
            fp = random_form_pair(18, 5, seed=seed)
            eta = np.random.default_rng(seed).standard_normal(18)
            res = laurent_coefficients(fp, eta, 2)
            w0 = eta - fp.S2 @ res.coeff(-1)
            assert np.linalg.norm(fp.B.coeffs(w0)) <= 1e-9 * (
                1.0 + np.linalg.norm(w0)
            )
            for j in range(0, 3):
                xi = res.coeff(j)
                orth = np.linalg.norm(fp.B.coeffs(fp.S2 @ xi))
                assert orth <= 1e-9 * (1.0 + np.linalg.norm(xi)) * fp.S2.frob_norm()

    def test_csv_export(self, tmp_path, coupled_pair):
        res = laurent_coefficients(coupled_pair, ETA, 1)
        path = tmp_path / "exp.csv"
        res.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "xi_-1,xi_0,xi_1"
        values = [[float(v) for v in row.split(",")] for row in lines[1:]]
        np.testing.assert_allclose(np.asarray(values),
                                   np.column_stack(res.coeffs), rtol=0)


class TestErrorSweep:
    def test_diagonal_exact_all_eps(self, diag_pair):
        table = expansion_error_sweep(diag_pair, ETA, 1,
                                      [1e-1, 1e-2, 1e-3, 1e-4])
        assert all(err <= 1e-12 for err in table.errors)

    def test_coupled_fitted_order(self, coupled_pair):
        for k in (0, 1):
            table = expansion_error_sweep(coupled_pair, ETA, k,
                                          [1e-1, 1e-2, 1e-3, 1e-4])
            assert (k + 1) * 0.9 <= table.fitted_order <= (k + 1) * 1.1

    def test_coupled_errors_within_bound(self, coupled_pair):
        table = expansion_error_sweep(coupled_pair, ETA, 1,
                                      [10.0 ** (-j) for j in range(1, 7)])
        for err, bnd, ok in zip(table.errors, table.bounds, table.above_floor):
            if ok:
                assert err <= bnd * (1.0 + 1e-8)

    def test_epsilons_validated(self, diag_pair):
        with pytest.raises(InvalidDimensions):
            expansion_error_sweep(diag_pair, ETA, 0, [1e-3, 1e-2])
        with pytest.raises(InvalidDimensions):
            expansion_error_sweep(diag_pair, ETA, 0, [1e-2, -1e-3])

    def test_floor_guard_excludes_noise(self, coupled_pair):
        # At k=2 and tiny eps the bound sinks below what floats can resolve;
        # those points must be flagged below the floor.
        table = expansion_error_sweep(coupled_pair, ETA, 2,
                                      [1e-1, 1e-5, 1e-6])
        assert table.above_floor[0]
        assert not table.above_floor[-1]

    def test_csv_round_trip(self, tmp_path, coupled_pair):
        table = expansion_error_sweep(coupled_pair, ETA, 1, [1e-1, 1e-2])
        path = tmp_path / "sweep.csv"
        table.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "epsilon,error,bound,ratio"
        row = [float(v) for v in lines[1].split(",")]
        assert row[0] == table.epsilons[0]
        assert row[1] == table.errors[0]
        assert row[2] == table.bounds[0]

    def test_exact_bound_property_seeded(self):
        # The certified truncation bound holds at every measurable point.
        rng = np.random.default_rng(2024)
        for case in range(25):
            n = int(rng.integers(5, 51))
            m = int(rng.integers(1, max(2, n // 2) + 1))
            fp = random_form_pair(n, m, seed=5000 + case)
            eta = np.random.default_rng(case).standard_normal(n)
            for k in (0, 1, 2):
                table = expansion_error_sweep(
                    fp, eta, k, [10.0 ** (-j) for j in range(1, 7)]
                )
                for err, bnd, ok in zip(table.errors, table.bounds,
                                        table.above_floor):
                    if ok:
                        assert err <= bnd * (1.0 + 1e-8)


class TestScaledLimit:
    def test_eps_xi_eps_approaches_leading_coefficient(self):
        # ||eps xi_eps - xi_{-1}|| decays at least linearly in eps.
        for seed in (0, 1, 2):
            fp = random_form_pair(16, 4, seed=seed)
            eta = np.random.default_rng(seed).standard_normal(16)
            epsilons = [1e-2, 1e-3, 1e-4, 1e-5]
            gaps = [epsilon_scaled_limit_gap(fp, eta, e) for e in epsilons]
            slope = np.polyfit(np.log(epsilons), np.log(gaps), 1)[0]
            assert slope >= 0.9
