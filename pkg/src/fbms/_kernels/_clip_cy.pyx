# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled clipping kernels: same subdivision algorithm as clip_py, plain
depth-first recursion per input triangle."""

import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt, exp

cnp.import_array()


cdef inline double _dist(double[3] q, double[3] p) noexcept:
    cdef double dx = q[0] - p[0]
    cdef double dy = q[1] - p[1]
    cdef double dz = q[2] - p[2]
    return sqrt(dx * dx + dy * dy + dz * dz)


cdef inline double _area(double[3] a, double[3] b, double[3] c) noexcept:
    cdef double ux = b[0] - a[0], uy = b[1] - a[1], uz = b[2] - a[2]
    cdef double vx = c[0] - a[0], vy = c[1] - a[1], vz = c[2] - a[2]
    cdef double nx = uy * vz - uz * vy
    cdef double ny = uz * vx - ux * vz
    cdef double nz = ux * vy - uy * vx
    return 0.5 * sqrt(nx * nx + ny * ny + nz * nz)


cdef inline double _longest(double[3] a, double[3] b, double[3] c) noexcept:
    cdef double e1 = _dist(b, a)
    cdef double e2 = _dist(c, b)
    cdef double e3 = _dist(a, c)
    if e2 > e1:
        e1 = e2
    if e3 > e1:
        e1 = e3
    return e1


cdef double _mass_rec(double[3] a, double[3] b, double[3] c, double[3] p,
                      double r, double edge_tol, int depth, int max_depth,
                      bint* crossed) noexcept:
    cdef double da = _dist(a, p), db = _dist(b, p), dc = _dist(c, p)
    cdef double longest = _longest(a, b, c)
    cdef double dmin = da
    if db < dmin:
        dmin = db
    if dc < dmin:
        dmin = dc
    if da < r and db < r and dc < r:
        return _area(a, b, c)
    if dmin - longest >= r:
        return 0.0
    crossed[0] = True
    cdef double[3] cen
    cdef int i
    if longest < edge_tol or depth >= max_depth:
        for i in range(3):
            cen[i] = (a[i] + b[i] + c[i]) / 3.0
        if _dist(cen, p) < r:
            return _area(a, b, c)
        return 0.0
    cdef double[3] ab, bc, ca
    for i in range(3):
        ab[i] = 0.5 * (a[i] + b[i])
        bc[i] = 0.5 * (b[i] + c[i])
        ca[i] = 0.5 * (c[i] + a[i])
    cdef double s = 0.0
    s += _mass_rec(a, ab, ca, p, r, edge_tol, depth + 1, max_depth, crossed)
    s += _mass_rec(ab, b, bc, p, r, edge_tol, depth + 1, max_depth, crossed)
    s += _mass_rec(ca, bc, c, p, r, edge_tol, depth + 1, max_depth, crossed)
    s += _mass_rec(ab, bc, ca, p, r, edge_tol, depth + 1, max_depth, crossed)
    return s


def mass_in_ball_tris(a, b, c, p, double r, double edge_tol_rel=1e-3,
                      int max_levels=40):
    cdef cnp.ndarray[double, ndim=2] A = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 3)
    cdef cnp.ndarray[double, ndim=2] B = np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 3)
    cdef cnp.ndarray[double, ndim=2] C = np.ascontiguousarray(c, dtype=np.float64).reshape(-1, 3)
    cdef cnp.ndarray[double, ndim=1] P = np.ascontiguousarray(p, dtype=np.float64)
    cdef double[3] ta, tb, tc, tp
    cdef int i, j
    cdef double mass = 0.0
    cdef int crossing = 0
    cdef bint crossed
    cdef double edge_tol = edge_tol_rel * r
    for j in range(3):
        tp[j] = P[j]
    for i in range(A.shape[0]):
        for j in range(3):
            ta[j] = A[i, j]
            tb[j] = B[i, j]
            tc[j] = C[i, j]
        crossed = False
        mass += _mass_rec(ta, tb, tc, tp, r, edge_tol, 0, max_levels, &crossed)
        if crossed:
            crossing += 1
    return mass, crossing


cdef double _deficit_rec(double[3] a, double[3] b, double[3] c, double[3] n,
                         double[3] p, double sigma, double rho,
                         double lambda1, double gamma, int k,
                         double quad_edge, int depth, int max_depth) noexcept:
    cdef double da = _dist(a, p), db = _dist(b, p), dc = _dist(c, p)
    cdef double longest = _longest(a, b, c)
    cdef double dmin = da
    if db < dmin:
        dmin = db
    if dc < dmin:
        dmin = dc
    if da < sigma and db < sigma and dc < sigma:
        return 0.0
    if dmin - longest >= rho:
        return 0.0
    cdef double[3] cen
    cdef double r, dot, w
    cdef int i
    if longest <= quad_edge or depth >= max_depth:
        for i in range(3):
            cen[i] = (a[i] + b[i] + c[i]) / 3.0
        r = _dist(cen, p)
        if r <= sigma or r >= rho:
            return 0.0
        dot = 0.0
        for i in range(3):
            dot += n[i] * (cen[i] - p[i]) / r
        w = exp(lambda1 * r) * dot * dot / (1.0 + gamma * r)
        for i in range(k):
            w /= r
        return w * _area(a, b, c)
    cdef double[3] ab, bc, ca
    for i in range(3):
        ab[i] = 0.5 * (a[i] + b[i])
        bc[i] = 0.5 * (b[i] + c[i])
        ca[i] = 0.5 * (c[i] + a[i])
    cdef double s = 0.0
    s += _deficit_rec(a, ab, ca, n, p, sigma, rho, lambda1, gamma, k, quad_edge, depth + 1, max_depth)
    s += _deficit_rec(ab, b, bc, n, p, sigma, rho, lambda1, gamma, k, quad_edge, depth + 1, max_depth)
    s += _deficit_rec(ca, bc, c, n, p, sigma, rho, lambda1, gamma, k, quad_edge, depth + 1, max_depth)
    s += _deficit_rec(ab, bc, ca, n, p, sigma, rho, lambda1, gamma, k, quad_edge, depth + 1, max_depth)
    return s


def deficit_sum_tris(a, b, c, normals, p, double sigma, double rho,
                     double lambda1, double gamma, int k=2,
                     double quad_edge_rel=0.02, int max_levels=40):
    cdef cnp.ndarray[double, ndim=2] A = np.ascontiguousarray(a, dtype=np.float64).reshape(-1, 3)
    cdef cnp.ndarray[double, ndim=2] B = np.ascontiguousarray(b, dtype=np.float64).reshape(-1, 3)
    cdef cnp.ndarray[double, ndim=2] C = np.ascontiguousarray(c, dtype=np.float64).reshape(-1, 3)
    cdef cnp.ndarray[double, ndim=2] N = np.ascontiguousarray(normals, dtype=np.float64).reshape(-1, 3)
    cdef cnp.ndarray[double, ndim=1] P = np.ascontiguousarray(p, dtype=np.float64)
    cdef double[3] ta, tb, tc, tn, tp
    cdef int i, j
    cdef double total = 0.0
    cdef double quad_edge = quad_edge_rel * sigma
    for j in range(3):
        tp[j] = P[j]
    for i in range(A.shape[0]):
        for j in range(3):
            ta[j] = A[i, j]
            tb[j] = B[i, j]
            tc[j] = C[i, j]
            tn[j] = N[i, j]
        total += _deficit_rec(ta, tb, tc, tn, tp, sigma, rho, lambda1, gamma,
                              k, quad_edge, 0, max_levels)
    return total
