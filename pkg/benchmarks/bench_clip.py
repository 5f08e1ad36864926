"""Benchmark: compiled clipping kernels vs the NumPy fallback.

Runs the ball-mass and deficit kernels on a catenoid mesh over a radius
sweep and reports per-call timings for both backends plus the agreement
between their results.

Usage: python benchmarks/bench_clip.py [--repeat N]
"""

import argparse
import time

import numpy as np

from fbms import clip_backend
from fbms._kernels import clip_py, deficit_sum_tris, mass_in_ball_tris
from fbms.samplers import critical_catenoid


def timed(fn, repeat):
    best = np.inf
    result = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - t0)
    return best, result


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    mesh = critical_catenoid(64, 64)
    v, f = mesh.vertices, mesh.faces
    a, b, c = v[f[:, 0]], v[f[:, 1]], v[f[:, 2]]
    n = np.cross(b - a, c - a)
    n /= np.linalg.norm(n, axis=1, keepdims=True)
    p = mesh.vertices[int(np.argmax(v[:, 2]))]

    print(f"active backend: {clip_backend}")
    print(f"mesh: {len(f)} faces; base point {np.round(p, 4)}")
    print()
    print(f"{'kernel':<22}{'radius':>8}{'active ms':>11}{'numpy ms':>11}{'ratio':>8}  agree")

    for r in (0.1, 0.2, 0.4):
        t_active, (m1, _) = timed(lambda: mass_in_ball_tris(a, b, c, p, r), args.repeat)
        t_py, (m2, _) = timed(lambda: clip_py.mass_in_ball_tris(a, b, c, p, r), args.repeat)
        agree = abs(m1 - m2) <= 1e-10 * (1 + abs(m2))
        print(f"{'mass_in_ball':<22}{r:>8.2f}{t_active * 1e3:>11.2f}{t_py * 1e3:>11.2f}"
              f"{t_py / t_active:>8.1f}  {agree}")

    for sigma, rho in ((0.1, 0.2), (0.2, 0.4)):
        t_active, d1 = timed(
            lambda: deficit_sum_tris(a, b, c, n, p, sigma, rho, 12.0, 2.0), args.repeat
        )
        t_py, d2 = timed(
            lambda: clip_py.deficit_sum_tris(a, b, c, n, p, sigma, rho, 12.0, 2.0),
            args.repeat,
        )
        agree = abs(d1 - d2) <= 1e-8 * (1 + abs(d2))
        print(f"{'deficit_sum':<22}{sigma:>4.2f}-{rho:<3.2f}{t_active * 1e3:>11.2f}{t_py * 1e3:>11.2f}"
              f"{t_py / t_active:>8.1f}  {agree}")


if __name__ == "__main__":
    main()
