"""Asymptotic-limit preconditioners and the PCG contrast benchmark.

Two preconditioners built from the asymptotic structure of the contrast
problem: the expansion preconditioner applies the truncated Laurent solve
(matrix-free, reusing the cached reduced factorizations), and the frozen
limit preconditioner factors the operator of a nearby reference coefficient
once. The benchmark records CG/PCG iteration counts over a contrast sweep
together with an operator-deviation estimate ||M A - I||.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .diffusion import Mesh, _element_values, assemble_operator
from .errors import CoefficientBelowFloor, InvalidDimensions
from .expansion import MAX_ORDER, laurent_coefficients, _require_assumptions
from .forms import FormPair
from .linalg import SymMatrix, cg_solve, cholesky


class Preconditioner:
    """A symmetric linear map eta -> M eta used inside PCG.

    ``spd_ok`` is False when construction-time Rayleigh sampling found a
    non-positive quotient; the object is still usable for diagnostics.
    """

    def __init__(self, kind: str, n: int, apply_fn, spd_ok: bool = True):
        self.kind = kind
        self.n = n
        self._apply = apply_fn
        self.spd_ok = spd_ok

    def apply(self, v) -> np.ndarray:
        return self._apply(np.asarray(v, dtype=float))

    __call__ = apply

    def __repr__(self):
        return f"Preconditioner(kind={self.kind!r}, n={self.n})"


def identity_preconditioner(n: int) -> Preconditioner:
    return Preconditioner("identity", n, lambda v: v.copy())


def build_expansion_preconditioner(fp: FormPair, k: int, eps: float) -> Preconditioner:
    """Truncated Laurent solve as a preconditioner for S1 + eps*S2.

    Applies eta -> sum_{j=-1}^{k} eps^j xi_j(eta); every recursion step is
    linear in eta and built from symmetric solves, so the map is linear and
    symmetric, and M (S1 + eps*S2) = I + O(eps^{k+1}) columnwise. Twenty
    seeded Rayleigh quotients are sampled at construction; a non-positive
    sample flags (but does not reject) the preconditioner.
    """
    if eps <= 0.0:
        raise InvalidDimensions(f"eps must be positive, got {eps}")
    if k < -1 or k > MAX_ORDER:
        raise InvalidDimensions(f"order k must be in [-1, {MAX_ORDER}], got {k}")
    _require_assumptions(fp)
    fp.reduced_ops()  # factor Q'S1Q and B'S2B once, before first application

    def apply_fn(eta):
        return laurent_coefficients(fp, eta, k).truncated_sum(eps)

    rng = np.random.default_rng(0xA5A5)
    spd_ok = True
    for _ in range(20):
        x = rng.standard_normal(fp.n)
        if float(x @ apply_fn(x)) <= 0.0:
            spd_ok = False
            break
    if not spd_ok:
        warnings.warn(
            "expansion preconditioner failed Rayleigh sampling; "
            "returned for diagnostic use only",
            stacklevel=2,
        )
    return Preconditioner("expansion", fp.n, apply_fn, spd_ok)


def build_frozen_limit_preconditioner(mesh: Mesh, pbar_inf) -> Preconditioner:
    """Inverse of the operator at a frozen reference coefficient.

    Factors the stiffness matrix assembled with diffusivity 1/pbar_inf once;
    each application is two triangular solves. For a nearby coefficient pbar
    the preconditioned operator deviates from the identity proportionally to
    the measure-weighted l1 distance between pbar and pbar_inf.
    """
    values = _element_values(mesh, pbar_inf)
    if np.any(values <= 0.0):
        raise CoefficientBelowFloor(
            f"pbar_inf must be positive, min = {values.min():g}"
        )
    A_inf = assemble_operator(mesh, 1.0 / values)
    factor = cholesky(A_inf)
    return Preconditioner("frozen_limit", mesh.num_interior, factor.solve)


def operator_deviation(precond: Preconditioner, A: SymMatrix, steps: int = 30) -> float:
    """Estimate ||M A - I||_2 by power iteration on (MA - I)'(MA - I)."""
    n = A.n

    def E(v):
        return precond.apply(A @ v) - v

    def Et(v):
        return A @ precond.apply(v) - v

    rng = np.random.default_rng(0xDE7)
    x = rng.standard_normal(n)
    x /= np.linalg.norm(x)
    lam = 0.0
    for _ in range(steps):
        y = Et(E(x))
        ny = float(np.linalg.norm(y))
        if ny == 0.0:
            return 0.0
        lam = float(x @ y)
        x = y / ny
    return math.sqrt(max(lam, 0.0))


def l1_coefficient_distance(mesh: Mesh, pbar, pbar_inf) -> float:
    """Measure-weighted elementwise l1 distance between coefficient fields."""
    a = _element_values(mesh, pbar)
    b = _element_values(mesh, pbar_inf)
    return float(np.sum(np.abs(a - b) * mesh.element_measures()))


@dataclass
class BenchReport:
    """Per-contrast iteration counts and deviation estimates.

    ``l1_distance`` entries are NaN where the notion does not apply (for
    example expansion preconditioners, which have no reference coefficient).
    """

    epsilons: list
    iters_plain: list
    iters_precond: list
    deviation: list
    l1_distance: list
    plain_converged: list = field(default_factory=list)
    precond_converged: list = field(default_factory=list)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(
                ["epsilon", "iters_plain", "iters_precond", "deviation",
                 "l1_distance"]
            )
            for row in zip(self.epsilons, self.iters_plain, self.iters_precond,
                           self.deviation, self.l1_distance):
                writer.writerow(
                    [f"{row[0]:.17g}", str(row[1]), str(row[2]),
                     f"{row[3]:.17g}", f"{row[4]:.17g}"]
                )


def pcg_benchmark(epsilons, system_for, precond_for, rhs, tol: float = 1e-10,
                  maxit=None, l1_for=None) -> BenchReport:
    """Run plain CG and PCG across a contrast sweep.

    ``system_for(eps)`` builds the system matrix, ``precond_for(eps)`` the
    preconditioner (None for identity), and ``l1_for(eps)`` an optional
    coefficient distance. Solver stalls are recorded per entry (count = cap,
    converged flag False), never fatal.
    """
    rhs = np.asarray(rhs, dtype=float)
    epsilons = [float(e) for e in epsilons]
    report = BenchReport(epsilons, [], [], [], [])
    for eps in epsilons:
        A = system_for(eps)
        M = precond_for(eps) if precond_for is not None else None
        cap = maxit if maxit is not None else 20 * A.n

        plain = cg_solve(A, rhs, tol=tol, maxit=cap)
        report.iters_plain.append(plain.iterations)
        report.plain_converged.append(plain.converged)

        if M is None:
            M = identity_preconditioner(A.n)
        pre = cg_solve(A, rhs, tol=tol, maxit=cap, precond=M.apply)
        report.iters_precond.append(pre.iterations)
        report.precond_converged.append(pre.converged)

        report.deviation.append(operator_deviation(M, A))
        report.l1_distance.append(
            float(l1_for(eps)) if l1_for is not None else float("nan")
        )
    return report
