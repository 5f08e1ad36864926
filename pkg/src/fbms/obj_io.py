"""Wavefront OBJ subset I/O (v/f records, 1-based indices).

Constrained boundary flags travel in a JSON sidecar of the form
{"constrained": [vertex indices]}.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .mesh import TriangleMesh


def write_obj(mesh: TriangleMesh, path, sidecar=True):
    path = Path(path)
    lines = []
    for v in mesh.vertices:
        lines.append(f"v {v[0]:.17g} {v[1]:.17g} {v[2]:.17g}")
    for f in mesh.faces:
        lines.append(f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}")
    path.write_text("\n".join(lines) + "\n")
    if sidecar:
        idx = np.nonzero(mesh.constrained)[0].tolist()
        path.with_suffix(".constrained.json").write_text(
            json.dumps({"constrained": idx}, separators=(",", ":")) + "\n"
        )


def read_obj(path) -> TriangleMesh:
    path = Path(path)
    verts, faces = [], []
    for line in path.read_text().splitlines():
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "v":
            verts.append([float(x) for x in parts[1:4]])
        elif parts[0] == "f":
            idx = [int(p.split("/")[0]) - 1 for p in parts[1:]]
            if len(idx) != 3:
                raise ValueError("only triangle faces are supported")
            faces.append(idx)
    constrained = None
    sidecar = path.with_suffix(".constrained.json")
    if sidecar.exists():
        idx = json.loads(sidecar.read_text())["constrained"]
        constrained = np.zeros(len(verts), dtype=bool)
        constrained[idx] = True
    return TriangleMesh(np.array(verts), np.array(faces, dtype=np.int64), constrained)
