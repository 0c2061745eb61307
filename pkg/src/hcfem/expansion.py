"""Singular-perturbation solves and the Laurent-coefficient recursion.

For a form pair (S1, S2) with subspace basis B, the perturbed system

    (S1 + eps * S2) xi_eps = eta,   eps > 0,

behaves like a Laurent series in eps as the perturbation vanishes:

    xi_eps ~ eps^{-1} xi_{-1} + xi_0 + eps xi_1 + ...

The coefficients are produced by a recursion built from two primitives: a
solve of the second form restricted to the subspace (for xi_{-1}) and a
constrained solve of the singular first form (for the higher coefficients).
Truncating after xi_k leaves the exact remainder identity

    (S1 + eps*S2) (xi_trunc - xi_eps) = eps^{k+1} S2 xi_k,

hence the certified truncation bound

    ||xi_trunc - xi_eps||  <=  (C2 / lambda_min(S1 + eps*S2)) ||xi_k|| eps^{k+1},

which is exact in exact arithmetic for every eps > 0. Error sweeps certify
against this contrast-dependent constant. The scalar
(C2 / lambda_min(S1 + S2)) ||xi_k|| carried on every
:class:`ExpansionResult` is the same bound specialized to eps = 1; it is
valid uniformly for eps >= 1 (where the perturbed coercivity constant is at
least the joint one) but can undershoot slightly for eps < 1, where the
per-eps constant must be used instead.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    AssumptionsViolated,
    FunctionalNotInKernel,
    InvalidDimensions,
    SolverFailure,
)
from .forms import FormPair
from .linalg import cg_solve, solve_spd

# Coefficient growth makes orders beyond this numerically meaningless at
# desk scale.
MAX_ORDER = 8

# Points with error below 1e3 * machine epsilon * ||xi_eps|| sit on the
# floating-point floor and are excluded from order fits and bound checks.
FLOOR_FACTOR = 1e3 * np.finfo(float).eps


def _require_assumptions(fp: FormPair):
    report = fp.assumptions()
    if not report.passed:
        raise AssumptionsViolated(
            f"form pair fails its assumption check: {report}"
        )
    return report


def _solve_direct_dense(fp: FormPair, A, eta, eps: float) -> np.ndarray:
    """Dense perturbed solve in the subspace-split scaled basis.

    In the orthogonal basis [B | Q] the system is block-graded: the
    subspace block scales like eps while the complement block stays O(1).
    Symmetric scaling of the subspace block by eps^{-1/2} removes the
    grading, so the factored matrix has an eps-uniform condition number and
    the recovered solution is accurate to O(machine eps * ||xi||) absolutely.
    The scaled blocks are built structurally from S1 and S2 (the S1 blocks
    against B vanish by the form-pair invariant); forming S1 + eps*S2 first
    and conjugating would pollute the eps-block with roundoff of size
    machine eps * ||S1||, which the scaling would amplify by 1/eps.
    """
    if fp.m == 0:
        return solve_spd(A.dense(), eta)
    ops = fp.reduced_ops()
    B = fp.B.mat
    Q = ops.Q.mat
    S1d = fp.S1.dense()
    S2d = fp.S2.dense()
    if ops.Q.m == 0:
        return B @ solve_spd(B.T @ S2d @ B, B.T @ eta / eps)
    se = np.sqrt(eps)
    T21 = B.T @ (S2d @ B)
    C = B.T @ (S2d @ Q)
    QQ = Q.T @ (S1d @ Q) + eps * (Q.T @ (S2d @ Q))
    At = np.block([[T21, se * C], [se * C.T, QQ]])
    At = 0.5 * (At + At.T)
    bt = np.concatenate([B.T @ eta / se, Q.T @ eta])
    xt = solve_spd(At, bt)
    return B @ (xt[: fp.m] / se) + Q @ xt[fp.m :]


def solve_direct(fp: FormPair, eta, eps: float) -> np.ndarray:
    """Solve (S1 + eps*S2) xi = eta for a fixed perturbation eps > 0.

    Dense systems are solved by Cholesky in a subspace-split scaled basis
    (see :func:`_solve_direct_dense`); sparse ones by Jacobi-preconditioned
    CG. The residual is verified in the mixed sense
    ||r|| <= tol * (||eta|| + ||A|| ||xi||), which is the achievable measure
    for strongly graded systems in double precision.
    """
    if eps <= 0.0:
        raise InvalidDimensions(f"eps must be positive, got {eps}")
    _require_assumptions(fp)
    eta = np.asarray(eta, dtype=float)
    A = fp.S1 + eps * fp.S2
    if A.is_dense:
        x = _solve_direct_dense(fp, A, eta, eps)
        tol = 1e-12
    else:
        d = A.diagonal()
        result = cg_solve(A, eta, tol=1e-10, maxit=20 * fp.n,
                          precond=lambda v: v / d)
        if not result.converged:
            raise SolverFailure(
                f"CG stalled at relative residual {result.residuals[-1]:g}"
            )
        x = result.x
        tol = 1e-10
    r = eta - A @ x
    scale = np.linalg.norm(eta) + A.max_abs() * fp.n * np.linalg.norm(x)
    if np.linalg.norm(r) > tol * max(scale, 1e-300):
        raise SolverFailure(f"residual {np.linalg.norm(r):g} above target")
    return x


def subspace_solve(fp: FormPair, eta) -> np.ndarray:
    """Leading coefficient: solve the second form restricted to the subspace.

    Returns xi = B (B'S2B)^{-1} B' eta, the unique subspace element with
    B'S2 xi = B' eta. Returns zero when the subspace is trivial.
    """
    _require_assumptions(fp)
    eta = np.asarray(eta, dtype=float)
    if fp.m == 0:
        return np.zeros(fp.n)
    ops = fp.reduced_ops()
    c = ops.chol_T21.solve(fp.B.coeffs(eta))
    return fp.B.mat @ c


def constrained_solve(fp: FormPair, w) -> np.ndarray:
    """Solve S1 xi = w subject to B'S2 xi = 0.

    Requires B'w ~ 0 (the right-hand side must annihilate the subspace).
    Reduced-space method: solve the SPD system Q'S1Q y = Q'w on the
    orthogonal complement, then correct inside the subspace to restore
    S2-orthogonality, xi = Qy - B (B'S2B)^{-1} B'S2 Qy. The correction lies
    in ker S1, so S1 xi = w is preserved; the result is the unique solution.
    """
    _require_assumptions(fp)
    w = np.asarray(w, dtype=float)
    if fp.m > 0:
        leak = np.linalg.norm(fp.B.coeffs(w))
        if leak > 1e-8 * (1.0 + np.linalg.norm(w)):
            raise FunctionalNotInKernel(
                f"||B'w|| = {leak:g} exceeds tolerance for ||w|| = "
                f"{np.linalg.norm(w):g}"
            )
    ops = fp.reduced_ops()
    if ops.Q.m == 0:
        return np.zeros(fp.n)
    y = ops.chol_S1Q.solve(ops.Q.coeffs(w))
    xi = ops.Q.mat @ y
    if fp.m > 0:
        c = ops.chol_T21.solve(ops.S2B.T @ xi)
        xi = xi - fp.B.mat @ c
    return xi


@dataclass
class ExpansionResult:
    """Laurent coefficients xi_{-1}, ..., xi_k and the certified bound constant.

    ``coeffs[0]`` holds xi_{-1}; use :meth:`coeff` for index-by-order access.
    ``bound_constant`` is (C2/alpha) ||xi_k||, so that the truncation error
    at eps is at most bound_constant * eps^{k+1}.
    """

    k: int
    coeffs: list = field(default_factory=list)
    bound_constant: float = 0.0

    def coeff(self, j: int) -> np.ndarray:
        if not (-1 <= j <= self.k):
            raise IndexError(f"order {j} outside [-1, {self.k}]")
        return self.coeffs[j + 1]

    def truncated_sum(self, eps: float) -> np.ndarray:
        """Evaluate sum_{j=-1}^{k} eps^j xi_j."""
        total = self.coeffs[0] / eps
        p = 1.0
        for c in self.coeffs[1:]:
            total = total + p * c
            p *= eps
        return total

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"xi_{j}" for j in range(-1, self.k + 1)])
            for row in np.column_stack(self.coeffs):
                writer.writerow(f"{v:.17g}" for v in row)


def laurent_coefficients(fp: FormPair, eta, k: int) -> ExpansionResult:
    """Run the coefficient recursion up to order k (k >= -1, capped at 8).

    xi_{-1} solves the subspace problem for eta; xi_0 is the constrained
    solve of eta - S2 xi_{-1}; each later xi_j is the constrained solve of
    -S2 xi_{j-1}. The intermediate right-hand sides satisfy the subspace
    orthogonality by construction, so a precondition failure inside the
    recursion signals an assembly bug and aborts.
    """
    if k < -1 or k > MAX_ORDER:
        raise InvalidDimensions(f"order k must be in [-1, {MAX_ORDER}], got {k}")
    report = _require_assumptions(fp)
    eta = np.asarray(eta, dtype=float)

    coeffs = [subspace_solve(fp, eta)]
    if k >= 0:
        w = eta - fp.S2 @ coeffs[0]
        coeffs.append(constrained_solve(fp, w))
    for _ in range(1, k + 1):
        w = -(fp.S2 @ coeffs[-1])
        coeffs.append(constrained_solve(fp, w))

    bound = (report.C2 / report.alpha) * float(np.linalg.norm(coeffs[-1]))
    return ExpansionResult(k=k, coeffs=coeffs, bound_constant=bound)


@dataclass
class ErrorTable:
    """Measured truncation errors against the certified bound, per eps.

    ``bounds[i]`` is (C2 / lambda_min(S1 + eps_i S2)) ||xi_k|| eps_i^{k+1},
    the proof-exact constant for that contrast. ``fitted_order`` is the
    least-squares slope of log(error) against log(eps), computed only over
    points above the floating-point floor (``above_floor`` marks them).
    """

    epsilons: list
    errors: list
    bounds: list
    fitted_order: float
    above_floor: list

    def ratios(self) -> list:
        return [e / b if b > 0 else float("nan")
                for e, b in zip(self.errors, self.bounds)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["epsilon", "error", "bound", "ratio"])
            for eps, err, bnd, rat in zip(
                self.epsilons, self.errors, self.bounds, self.ratios()
            ):
                writer.writerow(
                    [f"{eps:.17g}", f"{err:.17g}", f"{bnd:.17g}", f"{rat:.17g}"]
                )


def expansion_error_sweep(fp: FormPair, eta, k: int, epsilons) -> ErrorTable:
    """Measure ||truncated sum - direct solve|| across a descending eps list."""
    epsilons = [float(e) for e in epsilons]
    if any(e <= 0.0 for e in epsilons):
        raise InvalidDimensions("epsilons must be positive")
    if any(a <= b for a, b in zip(epsilons, epsilons[1:])):
        raise InvalidDimensions("epsilons must be sorted descending")
    result = laurent_coefficients(fp, eta, k)

    errors = []
    bounds = []
    above = []
    for eps in epsilons:
        xi_eps = solve_direct(fp, eta, eps)
        err = float(np.linalg.norm(result.truncated_sum(eps) - xi_eps))
        errors.append(err)
        bounds.append(result.bound_constant * eps ** (k + 1))
        above.append(err > FLOOR_FACTOR * float(np.linalg.norm(xi_eps)))

    good = [i for i, ok in enumerate(above) if ok]
    if len(good) >= 2:
        logs_e = np.log([epsilons[i] for i in good])
        logs_err = np.log([errors[i] for i in good])
        slope = np.polyfit(logs_e, logs_err, 1)[0]
        fitted = float(slope)
    else:
        fitted = float("nan")
    return ErrorTable(epsilons, errors, bounds, fitted, above)


def epsilon_scaled_limit_gap(fp: FormPair, eta, eps: float) -> float:
    """||eps * xi_eps - xi_{-1}||, the distance to the leading coefficient."""
    xi_eps = solve_direct(fp, eta, eps)
    xi_m1 = subspace_solve(fp, eta)
    return float(np.linalg.norm(eps * xi_eps - xi_m1))
