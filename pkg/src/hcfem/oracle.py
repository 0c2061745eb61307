"""Brute-force dense reference computations and the cross-check suite.

Every operation here is written directly against numpy's dense solvers
(solve, lstsq, inv) without any of the package's own factorizations, so the
suite provides an independent route to the same answers. The production
implementations use hand-rolled Cholesky/CG on reduced systems; agreement of
the two routes on small random instances is the package's strongest
whole-pipeline check.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diffusion import GeometryConfig, assemble_operator, build_mesh
from .expansion import constrained_solve, laurent_coefficients, solve_direct, subspace_solve
from .forms import FormPair, random_form_pair
from .precond import build_expansion_preconditioner, build_frozen_limit_preconditioner


def oracle_direct(fp: FormPair, eta, eps: float) -> np.ndarray:
    A = fp.S1.dense() + eps * fp.S2.dense()
    return np.linalg.solve(A, np.asarray(eta, dtype=float))


def oracle_subspace(fp: FormPair, eta) -> np.ndarray:
    if fp.m == 0:
        return np.zeros(fp.n)
    B = fp.B.mat
    T21 = B.T @ fp.S2.dense() @ B
    return B @ np.linalg.solve(T21, B.T @ np.asarray(eta, dtype=float))


def oracle_constrained(fp: FormPair, w) -> np.ndarray:
    # Stack the defining equations S1 xi = w, B'S2 xi = 0; the stacked
    # operator is injective, so least squares returns the unique solution.
    S1 = fp.S1.dense()
    rows = [S1]
    rhs = [np.asarray(w, dtype=float)]
    if fp.m > 0:
        rows.append(fp.B.mat.T @ fp.S2.dense())
        rhs.append(np.zeros(fp.m))
    stacked = np.vstack(rows)
    target = np.concatenate(rhs)
    xi, *_ = np.linalg.lstsq(stacked, target, rcond=None)
    return xi


def oracle_coefficients(fp: FormPair, eta, k: int) -> list:
    eta = np.asarray(eta, dtype=float)
    coeffs = [oracle_subspace(fp, eta)]
    S2 = fp.S2.dense()
    if k >= 0:
        coeffs.append(oracle_constrained(fp, eta - S2 @ coeffs[0]))
    for _ in range(1, k + 1):
        coeffs.append(oracle_constrained(fp, -(S2 @ coeffs[-1])))
    return coeffs


def oracle_truncated_apply(fp: FormPair, eta, k: int, eps: float) -> np.ndarray:
    coeffs = oracle_coefficients(fp, eta, k)
    total = coeffs[0] / eps
    p = 1.0
    for c in coeffs[1:]:
        total = total + p * c
        p *= eps
    return total


@dataclass
class OracleReport:
    """Outcome of the cross-check suite; ``failures`` lists every mismatch."""

    cases: int
    checks: int = 0
    failures: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures


def _rel_err(got, want) -> float:
    scale = max(float(np.linalg.norm(want)), 1e-30)
    return float(np.linalg.norm(np.asarray(got) - np.asarray(want))) / scale


def run_oracle_suite(cases: int = 100, max_n: int = 12, seed: int = 20240901,
                     tol: float = 1e-9) -> OracleReport:
    """Compare every operation against dense brute force on small instances.

    Covers the direct solve, the subspace solve, the constrained solve, the
    coefficient recursion, the expansion-preconditioner application, and the
    frozen-limit preconditioner application.
    """
    rng = np.random.default_rng(seed)
    report = OracleReport(cases=cases)

    def check(tag, got, want):
        report.checks += 1
        err = _rel_err(got, want)
        if not np.isfinite(err) or err > tol:
            report.failures.append(f"{tag}: relative error {err:g}")

    for case in range(cases):
        n = int(rng.integers(3, max_n + 1))
        m = int(rng.integers(1, n))
        fp = random_form_pair(n, m, seed=int(rng.integers(0, 2**31)))
        eta = rng.standard_normal(n)
        eps = float(rng.choice([1.0, 0.1, 1e-3]))
        k = int(rng.integers(0, 3))

        check(f"case {case}: direct solve",
              solve_direct(fp, eta, eps), oracle_direct(fp, eta, eps))
        check(f"case {case}: subspace solve",
              subspace_solve(fp, eta), oracle_subspace(fp, eta))

        # Project eta off the subspace so the constrained solve is admissible.
        w = eta - fp.B.project(eta)
        check(f"case {case}: constrained solve",
              constrained_solve(fp, w), oracle_constrained(fp, w))

        got = laurent_coefficients(fp, eta, k)
        want = oracle_coefficients(fp, eta, k)
        for j, (g, o) in enumerate(zip(got.coeffs, want), start=-1):
            check(f"case {case}: coefficient xi_{j}", g, o)

        M = build_expansion_preconditioner(fp, k, eps)
        check(f"case {case}: preconditioner apply",
              M.apply(eta), oracle_truncated_apply(fp, eta, k, eps))

    # Frozen-limit preconditioner against a dense inverse on a small mesh.
    mesh = build_mesh(1, 8, GeometryConfig.interior_box((0.25, 0.75)))
    pbar = 1.0 + 0.5 * mesh.centroids()[:, 0]
    A = assemble_operator(mesh, 1.0 / pbar)
    M = build_frozen_limit_preconditioner(mesh, pbar)
    A_inv = np.linalg.inv(A.dense())
    for trial in range(5):
        v = rng.standard_normal(mesh.num_interior)
        check(f"frozen-limit apply {trial}", M.apply(v), A_inv @ v)

    return report
