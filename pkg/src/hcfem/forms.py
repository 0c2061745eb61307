"""Form pairs (S1, S2) with a distinguished subspace, and their checks.

A :class:`FormPair` bundles two symmetric positive-semidefinite matrices with
an orthonormal basis B of the subspace X1 on which the first form vanishes.
:func:`check_assumptions` certifies the structural conditions the expansion
machinery relies on and reports exact coercivity/boundedness constants
(extremal eigenvalues, not sampled Rayleigh quotients), so downstream error
bounds are certified rather than estimated.
"""

from __future__ import annotations

import csv
import math
import os
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, InvalidDimensions, NotPositiveDefinite
from .linalg import (
    Basis,
    SymMatrix,
    cholesky,
    orthonormal_complement,
    read_matrix_market,
    write_matrix_market,
)

# Eigenvalue threshold for counting the null space of S1, relative to its
# largest eigenvalue. Separates exact zero rows from discretization noise.
KERNEL_RTOL = 1e-10

# Admissible relative size of S1 @ B at construction.
VANISH_RTOL = 1e-10


@dataclass(frozen=True)
class AssumptionReport:
    """Certified constants and pass/fail flags for a form pair.

    alpha        smallest eigenvalue of S1 + S2 (joint coercivity),
    alpha2       smallest eigenvalue of B' S2 B (coercivity of the second
                 form on the subspace; +inf when the subspace is trivial),
    C1, C2       largest eigenvalues of S1 and S2 (form bounds),
    kernel_match True iff rank(S1) == n - m and the computed null space of
                 S1 coincides with span(B).
    """

    alpha: float
    alpha2: float
    C1: float
    C2: float
    kernel_match: bool
    passed: bool


class FormPair:
    """Two PSD forms and the subspace the first one vanishes on.

    Construction enforces the cheap structural invariant ||S1 B||_F <=
    1e-10 ||S1||_F; spectral conditions are certified separately by
    :func:`check_assumptions` (cached on first use).
    """

    def __init__(self, S1: SymMatrix, S2: SymMatrix, basis: Basis):
        if not isinstance(S1, SymMatrix):
            S1 = SymMatrix(S1)
        if not isinstance(S2, SymMatrix):
            S2 = SymMatrix(S2)
        if S1.n != S2.n:
            raise DimensionMismatch(f"S1 is {S1.n}x{S1.n} but S2 is {S2.n}x{S2.n}")
        if basis.n != S1.n:
            raise DimensionMismatch(
                f"basis lives in dimension {basis.n}, forms in {S1.n}"
            )
        if basis.m > 0:
            S1B = S1.dense() @ basis.mat if S1.is_dense else S1._data @ basis.mat
            vanish = float(np.linalg.norm(S1B, "fro"))
            if vanish > VANISH_RTOL * max(S1.frob_norm(), 1e-300):
                raise ValueError(
                    f"S1 does not vanish on the subspace: ||S1 B||_F = {vanish:g}"
                )
        self.S1 = S1
        self.S2 = S2
        self.B = basis
        self.n = S1.n
        self._report = None
        self._reduced = None

    @property
    def m(self) -> int:
        return self.B.m

    def assumptions(self) -> AssumptionReport:
        """Certified assumption report, computed once and cached."""
        if self._report is None:
            self._report = check_assumptions(self)
        return self._report

    def reduced_ops(self):
        """Cached factorizations for subspace/constrained solves."""
        if self._reduced is None:
            self._reduced = _ReducedOps(self)
        return self._reduced

    def __repr__(self):
        return f"FormPair(n={self.n}, m={self.m})"


class _ReducedOps:
    """Factorizations shared by the constrained-solve machinery.

    Q spans the orthogonal complement of the subspace; Q'S1Q and B'S2B are
    factored once and reused across solves and preconditioner applications.
    """

    def __init__(self, fp: FormPair):
        self.Q = orthonormal_complement(fp.B)
        Qm = self.Q.mat
        S1Q = fp.S1.dense() @ Qm if fp.S1.is_dense else fp.S1._data @ Qm
        self.chol_S1Q = cholesky(Qm.T @ S1Q) if self.Q.m > 0 else None
        if fp.m > 0:
            Bm = fp.B.mat
            S2B = fp.S2.dense() @ Bm if fp.S2.is_dense else fp.S2._data @ Bm
            self.S2B = S2B
            self.chol_T21 = cholesky(Bm.T @ S2B)
        else:
            self.S2B = np.zeros((fp.n, 0))
            self.chol_T21 = None


def check_assumptions(fp: FormPair) -> AssumptionReport:
    """Compute certified constants and flags; failures are reported, not raised.

    The subspace condition is checked through its matrix surrogate: the null
    space of S1 (eigenvalues below 1e-10 * lambda_max) must have dimension
    n - m and every computed null vector must lie in span(B) to 1e-8.
    """
    S1d = fp.S1.dense()
    S2d = fp.S2.dense()
    B = fp.B

    w1, V1 = np.linalg.eigh(S1d)
    w2 = np.linalg.eigvalsh(S2d)
    ws = np.linalg.eigvalsh(S1d + S2d)

    C1 = float(w1[-1])
    C2 = float(w2[-1])
    alpha = float(ws[0])

    if B.m > 0:
        T21 = B.mat.T @ (S2d @ B.mat)
        alpha2 = float(np.linalg.eigvalsh(T21)[0])
    else:
        alpha2 = math.inf

    psd1 = w1[0] >= -KERNEL_RTOL * max(C1, 0.0)
    psd2 = w2[0] >= -KERNEL_RTOL * max(C2, 0.0)

    thresh = KERNEL_RTOL * max(C1, 0.0)
    null_mask = w1 <= thresh
    kernel_match = int(null_mask.sum()) == B.m
    if kernel_match and B.m > 0:
        nulls = V1[:, null_mask]
        leak = nulls - B.mat @ (B.mat.T @ nulls)
        kernel_match = bool(np.all(np.linalg.norm(leak, axis=0) <= 1e-8))
    if kernel_match:
        vanish = np.linalg.norm(S1d @ B.mat, "fro") if B.m else 0.0
        kernel_match = vanish <= VANISH_RTOL * max(fp.S1.frob_norm(), 1e-300)

    passed = bool(alpha > 0.0 and alpha2 > 0.0 and kernel_match and psd1 and psd2)
    return AssumptionReport(alpha, alpha2, C1, C2, bool(kernel_match), passed)


def random_form_pair(n: int, m: int, seed: int) -> FormPair:
    """Random form pair that satisfies all assumptions by construction.

    Draws a random orthonormal [B | Q]; S1 = Q diag(D1) Q' with D1 uniform in
    [0.5, 2] (so ker S1 = span B exactly) and S2 = G'G + 0.1 I with G uniform
    in [-1, 1] (so S2 is positive definite).
    """
    if not (1 <= m < n):
        raise InvalidDimensions(f"need 1 <= m < n, got n={n}, m={m}")
    rng = np.random.default_rng(seed)
    full, _ = np.linalg.qr(rng.standard_normal((n, n)))
    B = Basis(full[:, :m])
    Q = full[:, m:]
    d1 = rng.uniform(0.5, 2.0, n - m)
    S1 = SymMatrix(Q @ (d1[:, None] * Q.T))
    G = rng.uniform(-1.0, 1.0, (n, n))
    S2 = SymMatrix(G.T @ G + 0.1 * np.eye(n))
    return FormPair(S1, S2, B)


def quadratic_functional(S, eta, xi) -> float:
    """Energy functional xi' S xi - 2 eta' xi.

    For SPD S its unique minimizer is S^{-1} eta with value -eta' S^{-1} eta.
    """
    A = S.dense() if isinstance(S, SymMatrix) else np.asarray(S, dtype=float)
    eta = np.asarray(eta, dtype=float)
    xi = np.asarray(xi, dtype=float)
    if A.shape[0] != eta.shape[0] or A.shape[0] != xi.shape[0]:
        raise DimensionMismatch(
            f"shapes disagree: S is {A.shape}, eta {eta.shape}, xi {xi.shape}"
        )
    return float(xi @ (A @ xi) - 2.0 * (eta @ xi))


# ---------------------------------------------------------------------------
# Serialization: a directory with S1.mtx, S2.mtx and basis.csv

def save_form_pair(fp: FormPair, dirpath) -> None:
    os.makedirs(dirpath, exist_ok=True)
    write_matrix_market(fp.S1, os.path.join(dirpath, "S1.mtx"))
    write_matrix_market(fp.S2, os.path.join(dirpath, "S2.mtx"))
    with open(os.path.join(dirpath, "basis.csv"), "w", newline="") as fh:
        writer = csv.writer(fh)
        for j in range(fp.B.m):
            writer.writerow(f"{v:.17g}" for v in fp.B.mat[:, j])


def load_form_pair(dirpath) -> FormPair:
    S1 = read_matrix_market(os.path.join(dirpath, "S1.mtx"))
    S2 = read_matrix_market(os.path.join(dirpath, "S2.mtx"))
    cols = []
    with open(os.path.join(dirpath, "basis.csv"), newline="") as fh:
        for row in csv.reader(fh):
            if row:
                cols.append([float(v) for v in row])
    if cols:
        mat = np.asarray(cols).T
    else:
        mat = np.zeros((S1.n, 0))
    return FormPair(S1, S2, Basis(mat))
