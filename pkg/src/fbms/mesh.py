"""Triangle meshes with marked boundary and their discrete differential operators.

Conventions used throughout the package:
  * vertex areas are one-third barycentric (also at the boundary),
  * boundary length weights are half the sum of incident boundary edge lengths,
  * the mean curvature vector H points so that the first variation of area is
    dA(X) = -sum_i (X_i . H_i) a_i over interior vertices (H points inward on a
    sphere with outward-oriented faces).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

COT_CLAMP = 1e4  # cotangent weight clamp for near-degenerate triangles
DEGENERATE_AREA_REL = 1e-14


@dataclass(frozen=True)
class VertexField:
    """One scalar or one 3-vector per vertex."""

    values: np.ndarray
    kind: str  # "scalar" | "vector"

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float)
        object.__setattr__(self, "values", v)
        if self.kind not in ("scalar", "vector"):
            raise ValueError(f"unknown field kind {self.kind!r}")
        if not np.all(np.isfinite(v)):
            raise ValueError("vertex field has non-finite entries")


class TriangleMesh:
    """Immersed surface with boundary, stored as an immutable indexed face set.

    `constrained` flags boundary vertices whose position must satisfy the
    constraint equation; it is carried by the mesh but interpreted elsewhere.
    """

    def __init__(self, vertices, faces, constrained=None):
        self.vertices = np.ascontiguousarray(vertices, dtype=float)
        self.faces = np.ascontiguousarray(faces, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != 3:
            raise ValueError("vertices must be (n, 3)")
        if self.faces.ndim != 2 or self.faces.shape[1] != 3:
            raise ValueError("faces must be (m, 3)")
        n = len(self.vertices)
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= n):
            raise ValueError("face index out of range")
        if constrained is None:
            constrained = np.zeros(n, dtype=bool)
        self.constrained = np.asarray(constrained, dtype=bool).copy()
        if len(self.constrained) != n:
            raise ValueError("constrained flags must match vertex count")
        self.vertices.setflags(write=False)
        self.faces.setflags(write=False)
        self.constrained.setflags(write=False)
        self._cache = {}

    # -- basic combinatorics -------------------------------------------------

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_faces(self):
        return len(self.faces)

    def _edge_tables(self):
        """Directed and undirected edge incidence, cached."""
        if "edges" in self._cache:
            return self._cache["edges"]
        directed = {}
        for fi, (a, b, c) in enumerate(self.faces):
            for u, v in ((a, b), (b, c), (c, a)):
                directed.setdefault((int(u), int(v)), []).append(fi)
        undirected = {}
        for (u, v), fis in directed.items():
            key = (u, v) if u < v else (v, u)
            undirected.setdefault(key, []).extend(fis)
        self._cache["edges"] = (directed, undirected)
        return directed, undirected

    def boundary_edges(self):
        """Directed boundary edges (u, v), each on exactly one face."""
        _, undirected = self._edge_tables()
        directed, _ = self._edge_tables()
        out = []
        for (u, v), fis in undirected.items():
            if len(fis) == 1:
                # keep the orientation in which the face uses the edge
                out.append((u, v) if (u, v) in directed else (v, u))
        return out

    @property
    def boundary_loops(self):
        """Ordered boundary vertex loops, following face orientation."""
        if "loops" in self._cache:
            return self._cache["loops"]
        nxt = {}
        for u, v in self.boundary_edges():
            nxt[u] = v
        loops = []
        seen = set()
        for start in sorted(nxt):
            if start in seen:
                continue
            loop = [start]
            seen.add(start)
            cur = nxt.get(start)
            while cur is not None and cur != start and cur not in seen:
                loop.append(cur)
                seen.add(cur)
                cur = nxt.get(cur)
            loops.append(loop)
        self._cache["loops"] = loops
        return loops

    def boundary_vertices(self):
        idx = sorted({v for loop in self.boundary_loops for v in loop})
        return np.array(idx, dtype=np.int64)

    def is_boundary_vertex(self):
        mask = np.zeros(self.n_vertices, dtype=bool)
        mask[self.boundary_vertices()] = True
        return mask

    def diameter(self):
        lo = self.vertices.min(axis=0)
        hi = self.vertices.max(axis=0)
        return float(np.linalg.norm(hi - lo))

    def with_vertices(self, vertices):
        """Same connectivity, new positions; combinatorial caches are shared."""
        m = TriangleMesh(vertices, self.faces, self.constrained)
        for key in ("edges", "loops", "bedge_faces"):
            if key in self._cache:
                m._cache[key] = self._cache[key]
        return m

    # -- metric quantities ---------------------------------------------------

    def face_corner_vectors(self):
        v = self.vertices
        f = self.faces
        return v[f[:, 1]] - v[f[:, 0]], v[f[:, 2]] - v[f[:, 0]]

    def face_normals_raw(self):
        e1, e2 = self.face_corner_vectors()
        return np.cross(e1, e2)  # |.| = 2 * face area

    def face_areas(self):
        return 0.5 * np.linalg.norm(self.face_normals_raw(), axis=1)

    def vertex_areas(self):
        """One-third barycentric lumped vertex areas."""
        areas = np.zeros(self.n_vertices)
        fa = self.face_areas() / 3.0
        for k in range(3):
            np.add.at(areas, self.faces[:, k], fa)
        return areas

    def boundary_length_weights(self):
        """Half the incident boundary edge lengths, per vertex (0 off-boundary)."""
        w = np.zeros(self.n_vertices)
        for u, v in self.boundary_edges():
            ell = np.linalg.norm(self.vertices[u] - self.vertices[v])
            w[u] += 0.5 * ell
            w[v] += 0.5 * ell
        return w


# -- validation ---------------------------------------------------------------


def validate_mesh(mesh: TriangleMesh) -> list[str]:
    """Invariant check; returns a list of violations (empty iff valid)."""
    violations = []
    directed, undirected = mesh._edge_tables()

    for (u, v), fis in undirected.items():
        if len(fis) > 2:
            violations.append(f"edge ({u},{v}) shared by {len(fis)} faces")
    for (u, v), fis in directed.items():
        if len(fis) > 1:
            violations.append(
                f"edge appears twice in same direction ({u},{v}): "
                "inconsistent face orientation"
            )

    diam = mesh.diameter()
    if diam == 0.0:
        violations.append("mesh has zero diameter")
        return violations
    areas = mesh.face_areas()
    for fi in np.nonzero(areas <= DEGENERATE_AREA_REL * diam * diam)[0]:
        violations.append(f"degenerate face {fi} (area {areas[fi]:.3g})")

    for fi, (a, b, c) in enumerate(mesh.faces):
        if len({int(a), int(b), int(c)}) < 3:
            violations.append(f"degenerate face {fi} (repeated vertex)")

    # boundary loops must close and partition the boundary vertex set
    bverts = {v for loop in mesh.boundary_loops for v in loop}
    edge_bverts = {w for e in mesh.boundary_edges() for w in e}
    if bverts != edge_bverts:
        violations.append("boundary loops do not partition the boundary vertices")
    if mesh.constrained.any():
        bad = set(np.nonzero(mesh.constrained)[0]) - edge_bverts
        if bad:
            violations.append(f"constrained flag on non-boundary vertices {sorted(bad)}")
    return violations


# -- discrete operators -------------------------------------------------------


def vertex_normals(mesh: TriangleMesh) -> VertexField:
    """Area-weighted average of incident face normals, unit length."""
    raw = mesh.face_normals_raw()  # already area-weighted
    acc = np.zeros((mesh.n_vertices, 3))
    for k in range(3):
        np.add.at(acc, mesh.faces[:, k], raw)
    norms = np.linalg.norm(acc, axis=1)
    if np.any(norms < 1e-12):
        bad = np.nonzero(norms < 1e-12)[0]
        raise ValueError(f"vertex normal undefined (fold/cusp) at vertices {bad.tolist()}")
    return VertexField(acc / norms[:, None], "vector")


def cotangent_laplacian(mesh: TriangleMesh) -> sp.csr_matrix:
    """Positive semi-definite cotangent Laplacian, weights clamped for slivers."""
    v = mesh.vertices
    f = mesh.faces
    rows, cols, vals = [], [], []
    for k in range(3):
        i = f[:, k]
        j = f[:, (k + 1) % 3]
        o = f[:, (k + 2) % 3]  # vertex opposite edge (i, j)
        a = v[i] - v[o]
        b = v[j] - v[o]
        cross = np.linalg.norm(np.cross(a, b), axis=1)
        cross = np.maximum(cross, 1e-300)
        cot = np.einsum("ij,ij->i", a, b) / cross
        w = 0.5 * np.clip(cot, -COT_CLAMP, COT_CLAMP)
        rows.extend([i, j])
        cols.extend([j, i])
        vals.extend([-w, -w])
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    L = sp.csr_matrix((vals, (rows, cols)), shape=(mesh.n_vertices,) * 2)
    L = L + sp.diags(-np.asarray(L.sum(axis=1)).ravel())
    return L.tocsr()


def mean_curvature_vector(mesh: TriangleMesh) -> VertexField:
    """Discrete mean curvature vector H (cotangent formula over lumped areas).

    At boundary vertices the same formula is returned; there the value carries
    the conormal contribution of the first variation rather than curvature.
    """
    L = cotangent_laplacian(mesh)
    areas = mesh.vertex_areas()
    H = -(L @ mesh.vertices) / areas[:, None]
    return VertexField(H, "vector")


def area_gradient_raw(mesh: TriangleMesh) -> np.ndarray:
    """Exact gradient of total discrete area with respect to vertex positions."""
    v = mesh.vertices
    f = mesh.faces
    n = mesh.face_normals_raw()
    nrm = np.maximum(np.linalg.norm(n, axis=1), 1e-300)
    nhat = n / nrm[:, None]
    grad = np.zeros_like(v)
    for k in range(3):
        i = f[:, k]
        j = f[:, (k + 1) % 3]
        o = f[:, (k + 2) % 3]
        # d(face area)/d(x_i) = 0.5 * nhat x (x_o - x_j)
        np.add.at(grad, i, 0.5 * np.cross(nhat, v[o] - v[j]))
    return grad


def second_fundamental_norm(mesh: TriangleMesh):
    """Per-vertex |A|^2 from a least-squares shape-operator fit over the 1-ring.

    Returns (field, unreliable) where `unreliable` lists vertices with fewer
    than 3 distinct 1-ring directions.
    """
    normals = vertex_normals(mesh).values
    neighbors = [set() for _ in range(mesh.n_vertices)]
    for a, b, c in mesh.faces:
        neighbors[a].update((b, c))
        neighbors[b].update((a, c))
        neighbors[c].update((a, b))

    values = np.zeros(mesh.n_vertices)
    unreliable = []
    for i in range(mesh.n_vertices):
        nb = sorted(neighbors[i])
        nu = normals[i]
        t1 = _any_orthonormal(nu)
        t2 = np.cross(nu, t1)
        U, W = [], []
        for j in nb:
            e = mesh.vertices[j] - mesh.vertices[i]
            u = np.array([e @ t1, e @ t2])
            dn = normals[j] - normals[i]
            w = np.array([dn @ t1, dn @ t2])
            U.append(u)
            W.append(w)
        U = np.array(U)
        W = np.array(W)
        if len(nb) < 3 or np.linalg.matrix_rank(U, tol=1e-10) < 2:
            unreliable.append(i)
            values[i] = 0.0
            continue
        S, *_ = np.linalg.lstsq(U, W, rcond=None)
        S = 0.5 * (S + S.T)  # shape operator, symmetrized
        values[i] = float(np.sum(S * S))
    return VertexField(values, "scalar"), unreliable


def boundary_conormal(mesh: TriangleMesh):
    """Outward unit conormal eta per boundary vertex.

    Averages the in-plane outward edge normals of the incident boundary edges,
    projects tangent to the surface, and renormalizes. Returns a dict
    {vertex index: unit vector}.
    """
    normals = vertex_normals(mesh).values
    if "bedge_faces" in mesh._cache:
        face_of_edge = mesh._cache["bedge_faces"]
    else:
        directed, _ = mesh._edge_tables()
        # locate, for each boundary edge, the single face using it
        face_of_edge = {}
        for (u, v), fis in directed.items():
            if (v, u) not in directed:
                face_of_edge[(u, v)] = fis[0]
        mesh._cache["bedge_faces"] = face_of_edge

    per_vertex = {}
    for (u, v), fi in face_of_edge.items():
        a, b, c = (int(x) for x in mesh.faces[fi])
        opp = ({a, b, c} - {u, v}).pop()
        d = mesh.vertices[v] - mesh.vertices[u]
        dn = np.linalg.norm(d)
        if dn < 1e-300:
            continue
        dhat = d / dn
        w = 0.5 * (mesh.vertices[u] + mesh.vertices[v]) - mesh.vertices[opp]
        w = w - (w @ dhat) * dhat
        wn = np.linalg.norm(w)
        if wn < 1e-14:
            continue
        w /= wn
        for x in (u, v):
            per_vertex.setdefault(x, []).append(w)

    eta = {}
    for i, ws in per_vertex.items():
        m = np.mean(ws, axis=0)
        m = m - (m @ normals[i]) * normals[i]  # tangent to the surface
        mn = np.linalg.norm(m)
        if mn < 1e-12:
            raise ValueError(f"undefined conormal at boundary vertex {i}")
        eta[i] = m / mn
    return eta


def total_area(mesh: TriangleMesh) -> float:
    return float(mesh.face_areas().sum())


def refine(mesh: TriangleMesh) -> TriangleMesh:
    """Midpoint 1-to-4 subdivision; no re-projection of constrained midpoints."""
    _, undirected = mesh._edge_tables()
    edge_keys = sorted(undirected)
    mid_index = {e: mesh.n_vertices + k for k, e in enumerate(edge_keys)}
    mids = np.array(
        [0.5 * (mesh.vertices[u] + mesh.vertices[v]) for u, v in edge_keys]
    ).reshape(-1, 3)
    verts = np.vstack([mesh.vertices, mids])

    bedges = {tuple(sorted(e)) for e in mesh.boundary_edges()}
    constrained = np.zeros(len(verts), dtype=bool)
    constrained[: mesh.n_vertices] = mesh.constrained
    for (u, v), k in mid_index.items():
        if (u, v) in bedges and mesh.constrained[u] and mesh.constrained[v]:
            constrained[k] = True

    faces = []
    for a, b, c in mesh.faces:
        ab = mid_index[tuple(sorted((int(a), int(b))))]
        bc = mid_index[tuple(sorted((int(b), int(c))))]
        ca = mid_index[tuple(sorted((int(c), int(a))))]
        faces.extend([(a, ab, ca), (ab, b, bc), (ca, bc, c), (ab, bc, ca)])
    return TriangleMesh(verts, np.array(faces, dtype=np.int64), constrained)


def _any_orthonormal(n):
    """A unit vector orthogonal to unit n."""
    k = np.argmin(np.abs(n))
    e = np.zeros(3)
    e[k] = 1.0
    t = np.cross(n, e)
    return t / np.linalg.norm(t)
