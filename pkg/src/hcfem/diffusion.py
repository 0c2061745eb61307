"""Meshes, subdomain geometry, and P1 finite-element assembly.

The domain is the unit interval or unit square with homogeneous Dirichlet
conditions; boundary nodes are eliminated from all assembled systems. Each
element carries a subdomain label (1 or 2) and the interface between the two
subdomains must lie on mesh lines, so the two assembled forms have exactly
disjoint supports. Coefficients are evaluated at element centroids
(one-point quadrature), which is exact for piecewise-constant fields.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp

from .errors import (
    AssumptionCheckFailed,
    CoefficientBelowFloor,
    DimensionMismatch,
    InvalidDimensions,
    MisalignedGeometry,
    NonPositiveCoefficient,
)
from .forms import FormPair
from .linalg import Basis, SymMatrix, cg_solve, solve_spd

_ALIGN_TOL = 1e-12


@dataclass(frozen=True)
class GeometryConfig:
    """Subdomain-2 placement: an interior box or the complement of a strip.

    interior_box    subdomain 2 is a box with corners on grid lines, strictly
                    inside the domain, so subdomain 1 touches the boundary
                    everywhere.
    boundary_strip  subdomain 1 is the slab [0, fraction] along one axis;
                    subdomain 2 is the remainder.
    """

    kind: str
    box: tuple = None
    axis: int = 0
    fraction: float = None

    @classmethod
    def interior_box(cls, *bounds) -> "GeometryConfig":
        """bounds: one (lo, hi) pair per axis."""
        return cls(kind="interior_box", box=tuple((float(a), float(b)) for a, b in bounds))

    @classmethod
    def boundary_strip(cls, axis: int, fraction: float) -> "GeometryConfig":
        return cls(kind="boundary_strip", axis=int(axis), fraction=float(fraction))


class Mesh:
    """Uniform partition of [0,1]^dim with per-element subdomain labels.

    1D: cells are intervals; 2D: each grid square is split along its main
    diagonal into two triangles. ``elements`` lists node indices per element,
    ``element_labels`` holds 1 or 2, and ``interior_nodes`` indexes the
    degrees of freedom left after Dirichlet elimination.
    """

    def __init__(self, dim, cells_per_side, nodes, elements, element_labels,
                 interior_nodes):
        self.dim = dim
        self.cells_per_side = cells_per_side
        self.nodes = nodes
        self.elements = elements
        self.element_labels = element_labels
        self.interior_nodes = interior_nodes
        self.h = 1.0 / cells_per_side
        self.num_nodes = nodes.shape[0]
        self.num_elements = elements.shape[0]
        self.num_interior = len(interior_nodes)
        self._dof = np.full(self.num_nodes, -1, dtype=int)
        self._dof[interior_nodes] = np.arange(self.num_interior)

    def dof_of_node(self, node: int) -> int:
        """Interior dof index of a node, or -1 on the Dirichlet boundary."""
        return int(self._dof[node])

    def centroids(self) -> np.ndarray:
        return self.nodes[self.elements].mean(axis=1)

    def element_measures(self) -> np.ndarray:
        if self.dim == 1:
            return np.full(self.num_elements, self.h)
        return np.full(self.num_elements, 0.5 * self.h * self.h)

    def full_vector(self, u_interior) -> np.ndarray:
        """Embed an interior-dof vector into all nodes with boundary zeros."""
        u_interior = np.asarray(u_interior, dtype=float)
        if u_interior.shape[0] != self.num_interior:
            raise DimensionMismatch(
                f"expected {self.num_interior} interior values, got "
                f"{u_interior.shape[0]}"
            )
        full = np.zeros(self.num_nodes)
        full[self.interior_nodes] = u_interior
        return full

    def node_star_labels(self):
        """For each node, the set of labels of its incident elements."""
        stars = [set() for _ in range(self.num_nodes)]
        for e in range(self.num_elements):
            lab = self.element_labels[e]
            for node in self.elements[e]:
                stars[node].add(int(lab))
        return stars

    def __repr__(self):
        return (f"Mesh(dim={self.dim}, cells={self.cells_per_side}, "
                f"interior={self.num_interior})")


def _grid_aligned(value: float, cells: int) -> bool:
    scaled = value * cells
    return abs(scaled - round(scaled)) <= _ALIGN_TOL * cells


def _label_for_centroid(c, geometry: GeometryConfig, dim: int) -> int:
    if geometry.kind == "interior_box":
        inside = all(lo < c[a] < hi for a, (lo, hi) in enumerate(geometry.box))
        return 2 if inside else 1
    # boundary_strip: subdomain 1 is [0, fraction] along the axis
    return 1 if c[geometry.axis] < geometry.fraction else 2


def _validate_geometry(geometry: GeometryConfig, dim: int, cells: int) -> None:
    if geometry.kind == "interior_box":
        if geometry.box is None or len(geometry.box) != dim:
            raise MisalignedGeometry(
                f"interior_box needs {dim} (lo, hi) pairs"
            )
        for lo, hi in geometry.box:
            if not (0.0 < lo < hi < 1.0):
                raise MisalignedGeometry(f"box side ({lo}, {hi}) not inside (0, 1)")
            if not (_grid_aligned(lo, cells) and _grid_aligned(hi, cells)):
                raise MisalignedGeometry(
                    f"box side ({lo}, {hi}) does not lie on mesh lines for "
                    f"{cells} cells"
                )
    elif geometry.kind == "boundary_strip":
        frac = geometry.fraction
        if frac is None or not (0.0 < frac < 1.0):
            raise MisalignedGeometry(f"strip fraction {frac} not inside (0, 1)")
        if not _grid_aligned(frac, cells):
            raise MisalignedGeometry(
                f"strip fraction {frac} does not lie on mesh lines for "
                f"{cells} cells"
            )
        if not (0 <= geometry.axis < dim):
            raise MisalignedGeometry(f"axis {geometry.axis} out of range")
    else:
        raise MisalignedGeometry(f"unknown geometry kind {geometry.kind!r}")


def build_mesh(dim: int, cells_per_side: int, geometry: GeometryConfig) -> Mesh:
    """Uniform mesh of [0,1]^dim with labels induced by the geometry."""
    if dim not in (1, 2):
        raise InvalidDimensions(f"dim must be 1 or 2, got {dim}")
    if cells_per_side < 2:
        raise InvalidDimensions("need at least 2 cells per side")
    _validate_geometry(geometry, dim, cells_per_side)
    N = cells_per_side

    if dim == 1:
        nodes = (np.arange(N + 1) / N).reshape(-1, 1)
        elements = np.column_stack([np.arange(N), np.arange(1, N + 1)])
        interior = np.arange(1, N)
    else:
        xs = np.arange(N + 1) / N
        X, Y = np.meshgrid(xs, xs, indexing="xy")
        nodes = np.column_stack([X.ravel(), Y.ravel()])

        def nid(i, j):
            return j * (N + 1) + i

        tris = []
        for j in range(N):
            for i in range(N):
                # Split along the main diagonal (i, j) -- (i+1, j+1).
                tris.append([nid(i, j), nid(i + 1, j), nid(i + 1, j + 1)])
                tris.append([nid(i, j), nid(i + 1, j + 1), nid(i, j + 1)])
        elements = np.asarray(tris, dtype=int)
        ii, jj = np.meshgrid(np.arange(1, N), np.arange(1, N), indexing="xy")
        interior = (jj.ravel() * (N + 1) + ii.ravel()).astype(int)
        interior.sort()

    centroids = nodes[elements].mean(axis=1)
    labels = np.asarray(
        [_label_for_centroid(c, geometry, dim) for c in centroids], dtype=int
    )
    return Mesh(dim, N, nodes, elements, labels, interior)


def _element_values(mesh: Mesh, coeff, mask=None) -> np.ndarray:
    """Per-element values from a constant, array, or centroid callable."""
    if callable(coeff):
        cents = mesh.centroids()
        if mask is None:
            mask = np.ones(mesh.num_elements, dtype=bool)
        vals = np.zeros(mesh.num_elements)
        sel = cents[mask]
        if mesh.dim == 1:
            vals[mask] = np.broadcast_to(
                np.asarray(coeff(sel[:, 0]), dtype=float), (mask.sum(),)
            )
        else:
            vals[mask] = np.broadcast_to(
                np.asarray(coeff(sel[:, 0], sel[:, 1]), dtype=float),
                (mask.sum(),),
            )
        return vals
    arr = np.asarray(coeff, dtype=float)
    if arr.ndim == 0:
        return np.full(mesh.num_elements, float(arr))
    if arr.shape[0] != mesh.num_elements:
        raise DimensionMismatch(
            f"expected {mesh.num_elements} element values, got {arr.shape[0]}"
        )
    return arr.copy()


def _local_stiffness(mesh: Mesh, e: int) -> np.ndarray:
    """Unit-coefficient P1 element stiffness matrix (exact gradients)."""
    verts = mesh.nodes[mesh.elements[e]]
    if mesh.dim == 1:
        h = verts[1, 0] - verts[0, 0]
        return np.array([[1.0, -1.0], [-1.0, 1.0]]) / h
    x = verts[:, 0]
    y = verts[:, 1]
    b = np.array([y[1] - y[2], y[2] - y[0], y[0] - y[1]])
    c = np.array([x[2] - x[1], x[0] - x[2], x[1] - x[0]])
    det = x[1] * y[2] - x[2] * y[1] - x[0] * (y[2] - y[1]) + y[0] * (x[2] - x[1])
    area = 0.5 * abs(det)
    grads = np.column_stack([b, c]) / det
    return area * (grads @ grads.T)


def _assemble(mesh: Mesh, values: np.ndarray) -> SymMatrix:
    """Galerkin matrix of the weighted gradient form on interior nodes."""
    rows, cols, data = [], [], []
    nloc = mesh.dim + 1
    for e in range(mesh.num_elements):
        v = values[e]
        if v == 0.0:
            continue
        K = v * _local_stiffness(mesh, e)
        dofs = mesh._dof[mesh.elements[e]]
        for a in range(nloc):
            if dofs[a] < 0:
                continue
            for b in range(nloc):
                if dofs[b] < 0:
                    continue
                rows.append(dofs[a])
                cols.append(dofs[b])
                data.append(K[a, b])
    n = mesh.num_interior
    mat = sp.coo_matrix((data, (rows, cols)), shape=(n, n))
    return SymMatrix(mat)


def assemble_operator(mesh: Mesh, coeff) -> SymMatrix:
    """Stiffness matrix of -div(d grad u) with per-element diffusivity d."""
    values = _element_values(mesh, coeff)
    if np.any(values <= 0.0):
        raise NonPositiveCoefficient(
            f"diffusivity must be positive, min = {values.min():g}"
        )
    return _assemble(mesh, values)


@dataclass
class DiffusivitySpec:
    """Piecewise coefficients, contrast, and which subdomain carries it.

    p1 and p2 are constants or centroid callables on subdomains 1 and 2.
    ``orientation`` is 'lions_interior' (the contrast multiplies the form on
    subdomain 2) or 'swapped' (it multiplies the form on subdomain 1); the
    two are related by rescaling the assembled system by 1/eps.
    """

    p1: object
    p2: object
    eps: float = 1.0
    orientation: str = "lions_interior"

    def __post_init__(self):
        if self.orientation not in ("lions_interior", "swapped"):
            raise InvalidDimensions(
                f"unknown orientation {self.orientation!r}"
            )
        if self.eps <= 0.0:
            raise InvalidDimensions(f"contrast eps must be positive, got {self.eps}")


def assemble_forms(mesh: Mesh, spec: DiffusivitySpec) -> FormPair:
    """Assemble the form pair (S1 on subdomain 1, S2 on subdomain 2).

    The subspace basis consists of the coordinate vectors of interior nodes
    whose entire element star carries label 2 (discrete zero-extension
    subspace), which makes S1 vanish on it exactly. Raises
    :class:`AssumptionCheckFailed` when the subspace is empty or the
    assembled pair fails its assumption check.
    """
    mask1 = mesh.element_labels == 1
    mask2 = mesh.element_labels == 2
    vals1 = _element_values(mesh, spec.p1, mask1)
    vals2 = _element_values(mesh, spec.p2, mask2)
    if np.any(vals1[mask1] <= 0.0):
        raise NonPositiveCoefficient("p1 must be positive on subdomain 1")
    if np.any(vals2[mask2] <= 0.0):
        raise NonPositiveCoefficient("p2 must be positive on subdomain 2")
    vals1[~mask1] = 0.0
    vals2[~mask2] = 0.0

    S1 = _assemble(mesh, vals1)
    S2 = _assemble(mesh, vals2)

    stars = mesh.node_star_labels()
    x1_nodes = [node for node in mesh.interior_nodes if stars[node] == {2}]
    if not x1_nodes:
        raise AssumptionCheckFailed(
            "no interior node has its full element star in subdomain 2"
        )
    dofs = sorted(mesh.dof_of_node(node) for node in x1_nodes)
    basis = Basis.from_indices(mesh.num_interior, dofs)

    fp = FormPair(S1, S2, basis)
    report = fp.assumptions()
    if not report.passed:
        raise AssumptionCheckFailed(f"assembled pair fails assumptions: {report}")
    return fp


def epsilon_system(fp: FormPair, eps: float, orientation: str = "lions_interior") -> SymMatrix:
    """The contrast-weighted system matrix for either orientation.

    lions_interior gives S1 + eps*S2; swapped gives eps*S1 + S2, which equals
    eps * (S1 + (1/eps) * S2) -- the identity behind the scaling duality of
    the two configurations.
    """
    if eps <= 0.0:
        raise InvalidDimensions(f"eps must be positive, got {eps}")
    if orientation == "lions_interior":
        return fp.S1 + eps * fp.S2
    if orientation == "swapped":
        return eps * fp.S1 + fp.S2
    raise InvalidDimensions(f"unknown orientation {orientation!r}")


def load_vector(mesh: Mesh, f) -> np.ndarray:
    """Mass-lumped load vector on interior nodes: f(x_i) * |star_i| / (dim+1)."""
    weights = np.zeros(mesh.num_nodes)
    measures = mesh.element_measures()
    for e in range(mesh.num_elements):
        share = measures[e] / (mesh.dim + 1)
        for node in mesh.elements[e]:
            weights[node] += share
    coords = mesh.nodes[mesh.interior_nodes]
    if callable(f):
        if mesh.dim == 1:
            fvals = np.broadcast_to(
                np.asarray(f(coords[:, 0]), dtype=float), (mesh.num_interior,)
            )
        else:
            fvals = np.broadcast_to(
                np.asarray(f(coords[:, 0], coords[:, 1]), dtype=float),
                (mesh.num_interior,),
            )
    else:
        arr = np.asarray(f, dtype=float)
        if arr.ndim == 0:
            fvals = np.full(mesh.num_interior, float(arr))
        else:
            if arr.shape[0] != mesh.num_interior:
                raise DimensionMismatch(
                    f"expected {mesh.num_interior} nodal values, got {arr.shape[0]}"
                )
            fvals = arr
    return fvals * weights[mesh.interior_nodes]


def flux(mesh: Mesh, coeff, u) -> np.ndarray:
    """Per-element flux -d grad(u) of a P1 field (constant per element).

    ``u`` may be given on all nodes or on interior nodes only (boundary
    values are then zero). Returns shape (num_elements,) in 1D and
    (num_elements, 2) in 2D.
    """
    u = np.asarray(u, dtype=float)
    if u.shape[0] == mesh.num_interior:
        u = mesh.full_vector(u)
    elif u.shape[0] != mesh.num_nodes:
        raise DimensionMismatch(
            f"u has length {u.shape[0]}, expected {mesh.num_interior} or "
            f"{mesh.num_nodes}"
        )
    values = _element_values(mesh, coeff)
    if mesh.dim == 1:
        out = np.zeros(mesh.num_elements)
        for e in range(mesh.num_elements):
            a, b = mesh.elements[e]
            h = mesh.nodes[b, 0] - mesh.nodes[a, 0]
            out[e] = -values[e] * (u[b] - u[a]) / h
        return out
    out = np.zeros((mesh.num_elements, 2))
    for e in range(mesh.num_elements):
        verts = mesh.nodes[mesh.elements[e]]
        x, y = verts[:, 0], verts[:, 1]
        b = np.array([y[1] - y[2], y[2] - y[0], y[0] - y[1]])
        c = np.array([x[2] - x[1], x[0] - x[2], x[1] - x[0]])
        det = x[1] * y[2] - x[2] * y[1] - x[0] * (y[2] - y[1]) + y[0] * (x[2] - x[1])
        local = u[mesh.elements[e]]
        grad = np.array([b @ local, c @ local]) / det
        out[e] = -values[e] * grad
    return out


class TwoMaterialSolution:
    """Closed-form solution of -(d u')' = f on (0,1), u(0) = u(1) = 0.

    The diffusivity is d1 on (0, a) and d2 on (a, 1), the load f is constant;
    the solution is piecewise quadratic with u and d*u' continuous at a.
    Callable for u(x); :meth:`flux` gives -d(x) u'(x), which is continuous.
    """

    def __init__(self, a: float, d1: float, d2: float, f: float):
        if not (0.0 < a < 1.0):
            raise InvalidDimensions(f"interface a must be inside (0,1), got {a}")
        if d1 <= 0.0 or d2 <= 0.0:
            raise NonPositiveCoefficient("d1 and d2 must be positive")
        self.a, self.d1, self.d2, self.f = a, d1, d2, f
        # u(x) = -f x^2 / (2 d1) + c1 x          on [0, a]
        # u(x) = -f (1-x)^2 / (2 d2) + c2 (1-x)  on [a, 1]
        # matched so that u and the flux f x - d1 c1 are continuous at a:
        A = np.array([[d1, d2], [a, -(1.0 - a)]])
        rhs = np.array(
            [f, f * a * a / (2.0 * d1) - f * (1.0 - a) ** 2 / (2.0 * d2)]
        )
        self.c1, self.c2 = np.linalg.solve(A, rhs)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        left = -self.f * x * x / (2.0 * self.d1) + self.c1 * x
        right = -self.f * (1.0 - x) ** 2 / (2.0 * self.d2) + self.c2 * (1.0 - x)
        return np.where(x <= self.a, left, right)

    def flux(self, x):
        """-d(x) u'(x); one-sided limits agree at the interface."""
        x = np.asarray(x, dtype=float)
        left = self.f * x - self.d1 * self.c1
        right = -self.f * (1.0 - x) + self.d2 * self.c2
        return np.where(x <= self.a, left, right)


def exact_1d_two_material(a: float, d1: float, d2: float, f: float) -> TwoMaterialSolution:
    """Closed-form two-material oracle for assembly validation."""
    return TwoMaterialSolution(a, d1, d2, f)


def monotone_experiment(mesh: Mesh, pbar_limit, r, deltas, f) -> list:
    """Energy values f' A_nu^{-1} f along a decreasing coefficient schedule.

    The coefficient fields pbar_nu = pbar_limit + delta_nu * r decrease
    monotonically (deltas strictly decreasing, r >= 0), the assembled
    operators use diffusivity 1/pbar_nu, and the returned energies are
    non-increasing in nu.
    """
    deltas = [float(d) for d in deltas]
    if any(d <= 0.0 for d in deltas):
        raise InvalidDimensions("deltas must be positive")
    if any(a <= b for a, b in zip(deltas, deltas[1:])):
        raise InvalidDimensions("deltas must be strictly decreasing")
    base = _element_values(mesh, pbar_limit)
    bump = _element_values(mesh, r)
    if np.any(bump < 0.0):
        raise InvalidDimensions("r must be nonnegative")
    rhs = load_vector(mesh, f) if callable(f) else np.asarray(f, dtype=float)
    if rhs.shape[0] != mesh.num_interior:
        raise DimensionMismatch(
            f"load has length {rhs.shape[0]}, expected {mesh.num_interior}"
        )

    values = []
    for delta in deltas:
        pbar = base + delta * bump
        if np.any(pbar <= 0.0):
            raise CoefficientBelowFloor(
                f"pbar dropped to {pbar.min():g} at delta = {delta:g}"
            )
        A = _assemble(mesh, 1.0 / pbar)
        if A.is_dense:
            u = solve_spd(A, rhs)
        else:
            d = A.diagonal()
            res = cg_solve(A, rhs, tol=1e-12, maxit=20 * mesh.num_interior,
                           precond=lambda v: v / d)
            u = res.x
        values.append(float(rhs @ u))
    return values


def export_solution_csv(mesh: Mesh, u, path) -> None:
    """Write nodal coordinates and values as CSV (x[,y],u over all nodes)."""
    u = np.asarray(u, dtype=float)
    if u.shape[0] == mesh.num_interior:
        u = mesh.full_vector(u)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "u"] if mesh.dim == 1 else ["x", "y", "u"])
        for node in range(mesh.num_nodes):
            coords = [f"{c:.17g}" for c in mesh.nodes[node]]
            writer.writerow(coords + [f"{u[node]:.17g}"])
