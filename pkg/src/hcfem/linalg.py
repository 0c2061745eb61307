"""Dense and sparse symmetric linear-algebra kernels.

Cholesky factorization, (preconditioned) conjugate gradients, extremal
eigenvalue estimation, orthonormal complements, and Matrix Market
interchange. Everything here is real and symmetric; dense storage is used
up to ``DENSE_LIMIT`` rows, compressed sparse rows beyond that.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.linalg import eigh_tridiagonal, solve_triangular

from .errors import (
    BreakdownNonSPD,
    DimensionMismatch,
    NoConvergence,
    NotPositiveDefinite,
)

# Dense/sparse layout switch: desk-scale problems stay dense where exactness
# is easiest to reason about, large sweeps go through sparse CG.
DENSE_LIMIT = 512

# Relative asymmetry admitted at construction before the input is rejected.
SYMMETRY_RTOL = 1e-12

# Cholesky pivot floor is n * PIVOT_RTOL * max diagonal.
PIVOT_RTOL = 1e-14


class SymMatrix:
    """Real symmetric matrix with layout chosen by size.

    The upper triangle is authoritative: after the symmetry check the lower
    triangle is mirrored from it, so stored entries are exactly symmetric.
    Entries must be finite.
    """

    def __init__(self, data):
        if sp.issparse(data):
            mat = data.tocsr().astype(float)
        else:
            mat = np.asarray(data, dtype=float)
            if mat.ndim != 2:
                raise DimensionMismatch(f"expected a 2-d array, got ndim={mat.ndim}")
        if mat.shape[0] != mat.shape[1]:
            raise DimensionMismatch(f"matrix must be square, got {mat.shape}")
        self._n = mat.shape[0]

        if sp.issparse(mat):
            if not np.isfinite(mat.data).all():
                raise ValueError("matrix entries must be finite")
            scale = abs(mat).max() if mat.nnz else 0.0
            asym = abs(mat - mat.T).max() if mat.nnz else 0.0
        else:
            if not np.isfinite(mat).all():
                raise ValueError("matrix entries must be finite")
            scale = np.abs(mat).max() if mat.size else 0.0
            asym = np.abs(mat - mat.T).max() if mat.size else 0.0
        if asym > SYMMETRY_RTOL * max(scale, 1e-300):
            raise ValueError(
                f"matrix is not symmetric: max|M - M'| = {asym:g} "
                f"exceeds {SYMMETRY_RTOL:g} * max|M| = {SYMMETRY_RTOL * scale:g}"
            )

        # Mirror the upper triangle.
        if sp.issparse(mat):
            upper = sp.triu(mat, k=0, format="csr")
            strict = sp.triu(mat, k=1, format="csr")
            mat = (upper + strict.T).tocsr()
        else:
            mat = np.triu(mat) + np.triu(mat, k=1).T

        if self._n <= DENSE_LIMIT:
            self._data = mat.toarray() if sp.issparse(mat) else mat
        else:
            self._data = mat if sp.issparse(mat) else sp.csr_matrix(mat)

    @property
    def n(self) -> int:
        return self._n

    @property
    def shape(self):
        return (self._n, self._n)

    @property
    def is_dense(self) -> bool:
        return not sp.issparse(self._data)

    def dense(self) -> np.ndarray:
        """Dense view of the entries (copy only when stored sparse)."""
        if self.is_dense:
            return self._data
        return self._data.toarray()

    def matvec(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape[0] != self._n:
            raise DimensionMismatch(f"operand length {x.shape[0]} != {self._n}")
        return self._data @ x

    def __matmul__(self, x):
        if isinstance(x, SymMatrix):
            return NotImplemented
        return self.matvec(x)

    def __add__(self, other):
        if not isinstance(other, SymMatrix):
            return NotImplemented
        if other.n != self._n:
            raise DimensionMismatch("size mismatch in matrix sum")
        if self.is_dense and other.is_dense:
            return SymMatrix(self._data + other._data)
        a = self._data if sp.issparse(self._data) else sp.csr_matrix(self._data)
        b = other._data if sp.issparse(other._data) else sp.csr_matrix(other._data)
        return SymMatrix(a + b)

    def __mul__(self, c):
        if not np.isscalar(c):
            return NotImplemented
        return SymMatrix(self._data * float(c))

    __rmul__ = __mul__

    def diagonal(self) -> np.ndarray:
        if self.is_dense:
            return np.diag(self._data).copy()
        return self._data.diagonal()

    def max_abs(self) -> float:
        if self.is_dense:
            return float(np.abs(self._data).max()) if self._n else 0.0
        return float(abs(self._data).max()) if self._data.nnz else 0.0

    def frob_norm(self) -> float:
        if self.is_dense:
            return float(np.linalg.norm(self._data, "fro"))
        return float(np.sqrt((self._data.data ** 2).sum()))

    def __repr__(self):
        layout = "dense" if self.is_dense else "csr"
        return f"SymMatrix(n={self._n}, layout={layout})"


class Basis:
    """Orthonormal columns spanning a subspace of R^n. ``m`` may be zero."""

    def __init__(self, mat):
        mat = np.asarray(mat, dtype=float)
        if mat.ndim != 2:
            raise DimensionMismatch("basis must be a 2-d array of columns")
        n, m = mat.shape
        if m > n:
            raise DimensionMismatch(f"more columns ({m}) than ambient dimension ({n})")
        if m > 0:
            gram = mat.T @ mat
            if np.abs(gram - np.eye(m)).max() > 1e-12:
                raise ValueError("basis columns are not orthonormal to 1e-12")
        self.mat = mat
        self.n = n
        self.m = m

    @classmethod
    def from_indices(cls, n: int, indices) -> "Basis":
        """Coordinate basis e_i for the given (sorted, unique) indices."""
        indices = np.asarray(indices, dtype=int)
        mat = np.zeros((n, len(indices)))
        mat[indices, np.arange(len(indices))] = 1.0
        return cls(mat)

    def coeffs(self, v) -> np.ndarray:
        """B' v."""
        return self.mat.T @ np.asarray(v, dtype=float)

    def project(self, v) -> np.ndarray:
        """Orthogonal projection B B' v onto the subspace."""
        return self.mat @ self.coeffs(v)

    def __repr__(self):
        return f"Basis(n={self.n}, m={self.m})"


@dataclass
class CholeskyFactor:
    """Lower-triangular factor L with L L' equal to the factored matrix."""

    n: int
    L: np.ndarray

    def solve(self, b) -> np.ndarray:
        b = np.asarray(b, dtype=float)
        if b.shape[0] != self.n:
            raise DimensionMismatch(f"rhs length {b.shape[0]} != {self.n}")
        y = solve_triangular(self.L, b, lower=True)
        return solve_triangular(self.L.T, y, lower=False)

    def reconstruct(self) -> np.ndarray:
        return self.L @ self.L.T


def cholesky(M) -> CholeskyFactor:
    """Cholesky factorization of a symmetric positive definite matrix.

    Sparse input is densified (factors here are desk scale). Raises
    :class:`NotPositiveDefinite` as soon as a pivot falls at or below
    ``n * 1e-14 * max(diag)``, which signals violated coercivity upstream.
    """
    A = M.dense() if isinstance(M, SymMatrix) else np.asarray(M, dtype=float)
    if sp.issparse(A):
        A = A.toarray()
    n = A.shape[0]
    if n == 0:
        return CholeskyFactor(0, np.zeros((0, 0)))
    floor = n * PIVOT_RTOL * float(np.max(np.diag(A)))
    L = np.zeros_like(A)
    for j in range(n):
        d = A[j, j] - L[j, :j] @ L[j, :j]
        if d <= floor:
            raise NotPositiveDefinite(
                f"pivot {d:g} at column {j} is below the floor {floor:g}"
            )
        L[j, j] = np.sqrt(d)
        if j + 1 < n:
            L[j + 1 :, j] = (A[j + 1 :, j] - L[j + 1 :, :j] @ L[j, :j]) / L[j, j]
    return CholeskyFactor(n, L)


def solve_spd(M, b) -> np.ndarray:
    """Direct SPD solve with symmetric diagonal equilibration.

    Scaling by 1/sqrt(diag) before factoring keeps the factorization
    accurate for strongly graded systems (for example singularly perturbed
    ones); one step of iterative refinement polishes the result.
    """
    A = M.dense() if isinstance(M, SymMatrix) else np.asarray(M, dtype=float)
    b = np.asarray(b, dtype=float)
    d = np.diag(A)
    if np.any(d <= 0.0):
        raise NotPositiveDefinite("non-positive diagonal entry in SPD solve")
    s = 1.0 / np.sqrt(d)
    As = (A * s[None, :]) * s[:, None]
    As = 0.5 * (As + As.T)
    factor = cholesky(As)
    x = s * factor.solve(s * b)
    r = b - A @ x
    x = x + s * factor.solve(s * r)
    return x


def _as_operator(op, n=None):
    """Normalize a matrix-like or callable into a matvec callable."""
    if op is None:
        return None
    if callable(op) and not isinstance(op, (SymMatrix, np.ndarray)):
        return op
    if isinstance(op, SymMatrix):
        return op.matvec
    if sp.issparse(op):
        return lambda v, _m=op.tocsr(): _m @ v
    mat = np.asarray(op, dtype=float)
    return lambda v, _m=mat: _m @ v


@dataclass
class CGResult:
    """Outcome of a conjugate-gradient solve.

    ``converged`` is False when the iteration cap was reached; the best
    iterate is still returned.
    """

    x: np.ndarray
    iterations: int
    residuals: list = field(default_factory=list)
    converged: bool = True


def cg_solve(apply, rhs, tol=1e-10, maxit=None, precond=None) -> CGResult:
    """Conjugate gradients for symmetric positive definite operators.

    ``apply`` and ``precond`` may be matrices or matvec callables. Stops when
    the true residual satisfies ||rhs - A x|| <= tol * ||rhs||. Raises
    :class:`BreakdownNonSPD` if a search direction has non-positive curvature.
    """
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.shape[0]
    A = _as_operator(apply, n)
    M = _as_operator(precond, n)
    if maxit is None:
        maxit = max(10 * n, 100)

    x = np.zeros(n)
    r = rhs.copy()
    norm_b = float(np.linalg.norm(rhs))
    residuals = [float(np.linalg.norm(r))]
    if norm_b == 0.0:
        return CGResult(x, 0, residuals, True)

    z = M(r) if M is not None else r
    p = z.copy()
    rz = float(r @ z)
    for it in range(1, maxit + 1):
        Ap = A(p)
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise BreakdownNonSPD(f"p'Ap = {pAp:g} at iteration {it}")
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        rn = float(np.linalg.norm(r))
        residuals.append(rn)
        if rn <= tol * norm_b:
            return CGResult(x, it, residuals, True)
        z = M(r) if M is not None else r
        rz_new = float(r @ z)
        beta = rz_new / rz
        rz = rz_new
        p = z + beta * p
    return CGResult(x, maxit, residuals, False)


def _lanczos_extremal(matvec, n, maxsteps=200, restol=1e-9):
    """Extremal Ritz values by Lanczos with full reorthogonalization."""
    rng = np.random.default_rng(0x5EED)
    v = rng.standard_normal(n)
    v /= np.linalg.norm(v)
    V = np.zeros((n, maxsteps))
    alphas: list[float] = []
    betas: list[float] = []
    v_prev = np.zeros(n)
    beta_prev = 0.0
    for j in range(maxsteps):
        V[:, j] = v
        w = matvec(v)
        alpha = float(v @ w)
        alphas.append(alpha)
        w = w - alpha * v - beta_prev * v_prev
        # Full reorthogonalization, twice for safety.
        w -= V[:, : j + 1] @ (V[:, : j + 1].T @ w)
        w -= V[:, : j + 1] @ (V[:, : j + 1].T @ w)
        beta = float(np.linalg.norm(w))

        theta, S = eigh_tridiagonal(np.asarray(alphas), np.asarray(betas))
        spread = max(abs(theta[0]), abs(theta[-1]), 1e-300)
        res_lo = beta * abs(S[-1, 0])
        res_hi = beta * abs(S[-1, -1])
        if j >= 1 and res_lo <= restol * spread and res_hi <= restol * spread:
            return float(theta[0]), float(theta[-1])
        if beta <= 1e-14 * spread:
            # Invariant subspace found; Ritz values are exact eigenvalues.
            return float(theta[0]), float(theta[-1])
        betas.append(beta)
        v_prev = v
        beta_prev = beta
        v = w / beta
    raise NoConvergence(f"Lanczos did not settle within {maxsteps} steps")


def extremal_eigs(M) -> tuple[float, float]:
    """(lambda_min, lambda_max) of a symmetric matrix.

    Dense storage gets a full symmetric eigensolve; sparse storage runs
    Lanczos with full reorthogonalization capped at 200 steps, raising
    :class:`NoConvergence` at the cap (caller may densify).
    """
    if isinstance(M, SymMatrix):
        if M.is_dense:
            w = np.linalg.eigvalsh(M.dense())
            return float(w[0]), float(w[-1])
        return _lanczos_extremal(M.matvec, M.n)
    A = np.asarray(M, dtype=float)
    w = np.linalg.eigvalsh(0.5 * (A + A.T))
    return float(w[0]), float(w[-1])


def orthonormal_complement(B: Basis) -> Basis:
    """Orthonormal basis of the orthogonal complement of span(B)."""
    n, m = B.n, B.m
    if m == 0:
        return Basis(np.eye(n))
    if m == n:
        return Basis(np.zeros((n, 0)))
    Q, _ = np.linalg.qr(B.mat, mode="complete")
    return Basis(Q[:, m:])


# ---------------------------------------------------------------------------
# Matrix Market interchange (coordinate, real, symmetric)

def write_matrix_market(M: SymMatrix, path) -> None:
    """Write the lower triangle in Matrix Market coordinate format."""
    n = M.n
    if M.is_dense:
        A = M.dense()
        rows, cols = np.nonzero(np.tril(A))
        vals = A[rows, cols]
    else:
        low = sp.tril(M._data, k=0, format="coo")
        rows, cols, vals = low.row, low.col, low.data
    order = np.lexsort((rows, cols))
    with open(path, "w") as fh:
        fh.write("%%MatrixMarket matrix coordinate real symmetric\n")
        fh.write(f"{n} {n} {len(rows)}\n")
        for k in order:
            fh.write(f"{rows[k] + 1} {cols[k] + 1} {vals[k]:.17g}\n")


def read_matrix_market(path) -> SymMatrix:
    """Read a symmetric coordinate Matrix Market file."""
    with open(path) as fh:
        header = fh.readline()
        if "coordinate" not in header or "symmetric" not in header:
            raise ValueError(f"unsupported Matrix Market header: {header.strip()}")
        line = fh.readline()
        while line.startswith("%"):
            line = fh.readline()
        nrows, ncols, nnz = (int(t) for t in line.split())
        if nrows != ncols:
            raise DimensionMismatch("symmetric matrix must be square")
        rows = np.empty(nnz, dtype=int)
        cols = np.empty(nnz, dtype=int)
        vals = np.empty(nnz)
        for k in range(nnz):
            i, j, v = fh.readline().split()
            rows[k] = int(i) - 1
            cols[k] = int(j) - 1
            vals[k] = float(v)
    mask = rows != cols
    coo = sp.coo_matrix(
        (
            np.concatenate([vals, vals[mask]]),
            (
                np.concatenate([rows, cols[mask]]),
                np.concatenate([cols, rows[mask]]),
            ),
        ),
        shape=(nrows, ncols),
    )
    return SymMatrix(coo)
