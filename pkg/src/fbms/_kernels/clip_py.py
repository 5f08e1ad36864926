"""NumPy fallback for the triangle/ball clipping kernels.

Level-synchronous midpoint subdivision: triangles entirely inside a ball are
accumulated whole (balls are convex, so the vertex test is exact), triangles
provably outside are dropped, small crossing triangles are classified by
their centroid.
"""

from __future__ import annotations

import numpy as np


def _tri_arrays(a, b, c):
    a = np.asarray(a, dtype=float).reshape(-1, 3)
    b = np.asarray(b, dtype=float).reshape(-1, 3)
    c = np.asarray(c, dtype=float).reshape(-1, 3)
    return a, b, c


def _areas(a, b, c):
    return 0.5 * np.linalg.norm(np.cross(b - a, c - a), axis=1)


def _longest_edge(a, b, c):
    return np.maximum.reduce(
        [
            np.linalg.norm(b - a, axis=1),
            np.linalg.norm(c - b, axis=1),
            np.linalg.norm(a - c, axis=1),
        ]
    )


def _split4(a, b, c, extra=None):
    ab = 0.5 * (a + b)
    bc = 0.5 * (b + c)
    ca = 0.5 * (c + a)
    na = np.concatenate([a, ab, ca, ab])
    nb = np.concatenate([ab, b, bc, bc])
    nc = np.concatenate([ca, bc, c, ca])
    if extra is None:
        return na, nb, nc
    return na, nb, nc, np.concatenate([extra] * 4)


def mass_in_ball_tris(a, b, c, p, r, edge_tol_rel=1e-3, max_levels=40):
    """(area inside open ball B(p, r), crossing-triangle count at input level)."""
    a, b, c = _tri_arrays(a, b, c)
    p = np.asarray(p, dtype=float)
    mass = 0.0
    crossing0 = 0
    level = 0
    while len(a):
        da = np.linalg.norm(a - p, axis=1)
        db = np.linalg.norm(b - p, axis=1)
        dc = np.linalg.norm(c - p, axis=1)
        longest = _longest_edge(a, b, c)
        inside = (da < r) & (db < r) & (dc < r)
        outside = ~inside & (np.minimum.reduce([da, db, dc]) - longest >= r)
        small = ~inside & ~outside & (longest < edge_tol_rel * r)
        if inside.any():
            mass += float(_areas(a[inside], b[inside], c[inside]).sum())
        if small.any():
            cen = (a[small] + b[small] + c[small]) / 3.0
            hit = np.linalg.norm(cen - p, axis=1) < r
            if hit.any():
                mass += float(_areas(a[small][hit], b[small][hit], c[small][hit]).sum())
        split = ~inside & ~outside & ~small
        if level == 0:
            crossing0 = int((~inside & ~outside).sum())
        if level >= max_levels:
            # degenerate leftovers: classify by centroid
            cen = (a[split] + b[split] + c[split]) / 3.0
            hit = np.linalg.norm(cen - p, axis=1) < r
            if hit.any():
                mass += float(_areas(a[split][hit], b[split][hit], c[split][hit]).sum())
            break
        if not split.any():
            break
        a, b, c = _split4(a[split], b[split], c[split])
        level += 1
    return mass, crossing0


def deficit_sum_tris(a, b, c, normals, p, sigma, rho, lambda1, gamma, k=2,
                     quad_edge_rel=0.02, max_levels=40):
    """Midpoint quadrature of the weighted normal-deficit integrand over the
    part of the triangle soup inside the annulus sigma < |x-p| < rho.

    `normals` are unit normals of the triangle planes (the k-plane S); the
    integrand is exp(lambda1 r) |n . grad r|^2 / ((1 + gamma r) r^k).
    """
    a, b, c = _tri_arrays(a, b, c)
    n = np.asarray(normals, dtype=float).reshape(-1, 3)
    p = np.asarray(p, dtype=float)
    total = 0.0
    quad_edge = quad_edge_rel * sigma
    level = 0
    while len(a):
        da = np.linalg.norm(a - p, axis=1)
        db = np.linalg.norm(b - p, axis=1)
        dc = np.linalg.norm(c - p, axis=1)
        longest = _longest_edge(a, b, c)
        inside_inner = (da < sigma) & (db < sigma) & (dc < sigma)
        beyond_outer = np.minimum.reduce([da, db, dc]) - longest >= rho
        drop = inside_inner | beyond_outer
        leaf = ~drop & ((longest <= quad_edge) | (level >= max_levels))
        if leaf.any():
            cen = (a[leaf] + b[leaf] + c[leaf]) / 3.0
            r = np.linalg.norm(cen - p, axis=1)
            ok = (r > sigma) & (r < rho)
            if ok.any():
                rr = r[ok]
                gr = (cen[ok] - p) / rr[:, None]
                perp2 = np.einsum("ij,ij->i", n[leaf][ok], gr) ** 2
                w = np.exp(lambda1 * rr) * perp2 / ((1.0 + gamma * rr) * rr**k)
                total += float((w * _areas(a[leaf][ok], b[leaf][ok], c[leaf][ok])).sum())
        split = ~drop & ~leaf
        if not split.any():
            break
        a, b, c, n = _split4(a[split], b[split], c[split], n[split])
        level += 1
    return total
