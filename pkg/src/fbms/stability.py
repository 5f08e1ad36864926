"""Second-variation quadratic form and its lowest eigenpair.

Q(f) = integral |grad f|^2 - |A|^2 f^2 over the surface, minus the Robin-type
boundary term (second form of the constraint in the surface-normal direction)
integrated along the constrained boundary. The ambient is flat, so the Ricci
contribution is a parameter fixed to zero. Stability means Q >= 0 on all
scalar fields, certified by the lowest generalized eigenvalue.
"""

from __future__ import annotations

import json
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .mesh import (
    TriangleMesh,
    VertexField,
    cotangent_laplacian,
    second_fundamental_norm,
    vertex_normals,
)
from .variation import verify_minimal

EIGEN_MAX_ITERATIONS = 10000


@dataclass(frozen=True)
class StabilityForm:
    """Assembled matrices of the quadratic form Q(f) = f^T (K - P - B) f.

    stiffness K carries the Dirichlet energy, potential P the lumped |A|^2
    term, boundary B the lumped constraint second-form term (supported on
    constrained boundary vertices only), mass M the lumped vertex areas.
    ricci_normal is the flat-ambient placeholder, identically zero here.
    """

    stiffness: sp.csr_matrix
    potential: sp.csr_matrix
    boundary: sp.csr_matrix
    mass: sp.csr_matrix
    ricci_normal: float = 0.0

    def __post_init__(self):
        n = self.mass.shape[0]
        for m in (self.stiffness, self.potential, self.boundary, self.mass):
            if m.shape != (n, n):
                raise ValueError("form matrices must share one size")
            if (m != m.T).nnz:
                raise ValueError("form matrices must be symmetric")
        if np.any(self.mass.diagonal() <= 0):
            raise ValueError("mass diagonal must be strictly positive")

    def operator(self) -> sp.csr_matrix:
        return (self.stiffness - self.potential - self.boundary).tocsr()


@dataclass
class StabilityReport:
    lambda_min: float
    eigenfunction: VertexField
    stable: bool
    tol: float
    residual: float

    def to_json_dict(self):
        return {
            "lambda_min": self.lambda_min,
            "stable": bool(self.stable),
            "tol": self.tol,
            "residual": self.residual,
            "eigenfunction": [float(v) for v in self.eigenfunction.values],
        }

    def to_json(self):
        return json.dumps(self.to_json_dict(), sort_keys=True)


def _boundary_second_form_values(mesh: TriangleMesh, constraint):
    """Constraint second form in the surface-normal direction, per constrained
    boundary vertex, evaluated at the projected foot point."""
    idx = np.nonzero(mesh.constrained)[0]
    if len(idx) == 0:
        return idx, np.zeros(0)
    nu = vertex_normals(mesh).values[idx]
    feet = constraint.project(mesh.vertices[idx])
    nhat = constraint.unit_normal(feet)
    # the surface normal is tangent to N only up to the orthogonality
    # residual; project it before evaluating the second form
    vals = np.empty(len(idx))
    for k in range(len(idx)):
        v = nu[k] - (nu[k] @ nhat[k]) * nhat[k]
        vn = np.linalg.norm(v)
        if vn < 1e-12:
            vals[k] = 0.0
            continue
        vals[k] = constraint.normal_second_form(feet[k], v / vn)
    return idx, vals


def assemble_stability_form(mesh: TriangleMesh, constraint) -> StabilityForm:
    """Lumped finite-element assembly of the second-variation form."""
    check = verify_minimal(mesh, constraint)
    if not check["passes"]:
        warnings.warn(
            "mesh does not verify as minimal "
            f"(max|H|={check['max_interior_H']:.3g}, "
            f"ortho={check['free_boundary_residual']:.3g}); "
            "the form is assembled anyway",
            stacklevel=2,
        )
    n = mesh.n_vertices
    stiffness = cotangent_laplacian(mesh)
    areas = mesh.vertex_areas()
    a2, unreliable = second_fundamental_norm(mesh)
    if unreliable:
        warnings.warn(
            f"unreliable |A|^2 at vertices {unreliable}", stacklevel=2
        )
    potential = sp.diags(a2.values * areas, format="csr")
    bvals = np.zeros(n)
    idx, second = _boundary_second_form_values(mesh, constraint)
    if len(idx):
        lengths = mesh.boundary_length_weights()
        bvals[idx] = second * lengths[idx]
    boundary = sp.diags(bvals, format="csr")
    mass = sp.diags(areas, format="csr")
    return StabilityForm(stiffness, potential, boundary, mass)


def quadratic_form_value(form: StabilityForm, f) -> float:
    vals = f.values if isinstance(f, VertexField) else np.asarray(f, dtype=float)
    if vals.shape != (form.mass.shape[0],):
        raise ValueError("field length does not match the form")
    if not np.all(np.isfinite(vals)):
        raise ValueError("field must be finite")
    return float(vals @ (form.operator() @ vals))


def lowest_eigenpair(form: StabilityForm, tol: float = 1e-10, seed: int = 0):
    """Minimal eigenvalue of (K - P - B) f = lambda M f.

    Shifted inverse power iteration: the operator is made positive definite
    by a Gershgorin-based shift, factored once, and iterated from a seeded
    start vector. Deterministic given the seed.
    """
    A = form.operator()
    m = form.mass.diagonal()
    n = A.shape[0]
    # generalized Gershgorin lower bound: row sums scaled by the lumped mass
    absA = abs(A)
    radii = np.asarray(absA.sum(axis=1)).ravel() - np.abs(A.diagonal())
    lower = float(np.min((A.diagonal() - radii) / m))
    shift = 1.0 + abs(lower) if lower < 0 else 1.0
    shifted = (A + shift * form.mass).tocsc()
    solve = spla.splu(shifted).solve

    rng = np.random.default_rng(seed)
    x = rng.standard_normal(n)
    x /= np.sqrt(x @ (m * x))
    lam = float(x @ (A @ x))
    for _ in range(EIGEN_MAX_ITERATIONS):
        y = solve(m * x)
        y /= np.sqrt(y @ (m * y))
        lam_new = float(y @ (A @ y))
        res = np.linalg.norm(A @ y - lam_new * (m * y)) / np.linalg.norm(m * y)
        x = y
        if abs(lam_new - lam) <= tol * (1.0 + abs(lam_new)) and res <= 1e-8:
            return lam_new, VertexField(x, "scalar"), float(res)
        lam = lam_new
    raise RuntimeError("iteration stagnated")


def is_stable(mesh: TriangleMesh, constraint, tol: float = 1e-8) -> StabilityReport:
    form = assemble_stability_form(mesh, constraint)
    lam, f, res = lowest_eigenpair(form)
    return StabilityReport(
        lambda_min=lam,
        eigenfunction=f,
        stable=bool(lam >= -tol),
        tol=tol,
        residual=res,
    )
