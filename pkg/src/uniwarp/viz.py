"""Contour extraction, field-arrow tables, and PGM previews.

Contours come from a standard marching-squares pass over the lattice at
five equal-density levels; segments are chained into polylines so closed
level sets come out as closed polygons.  Previews are 8-bit binary PGM
(P5), the smallest image format that needs no dependencies.
"""

from __future__ import annotations

import numpy as np

from .grid import ScalarGrid, VectorGrid


def contour_levels(grid: ScalarGrid, n: int = 5) -> list[float]:
    """n density levels evenly spaced strictly between min and max."""
    lo = float(grid.data.min())
    hi = float(grid.data.max())
    if hi <= lo:
        return []
    return [lo + (hi - lo) * k / (n + 1) for k in range(1, n + 1)]


def _interp_crossing(p0, p1, v0, v1, level):
    t = (level - v0) / (v1 - v0)
    return (p0[0] + t * (p1[0] - p0[0]), p0[1] + t * (p1[1] - p0[1]))


def marching_squares(grid: ScalarGrid, level: float) -> list[list[tuple[float, float]]]:
    """Polylines (x, y) of the level set, closed where the set is closed."""
    a = grid.data
    h, w = a.shape
    segments = []
    for i in range(h - 1):
        for j in range(w - 1):
            corners = ((j, i), (j + 1, i), (j + 1, i + 1), (j, i + 1))
            vals = (a[i, j], a[i, j + 1], a[i + 1, j + 1], a[i + 1, j])
            idx = sum(1 << k for k, v in enumerate(vals) if v > level)
            if idx in (0, 15):
                continue
            # edge k joins corner k and corner (k+1) % 4
            crossings = {}
            for k in range(4):
                v0, v1 = vals[k], vals[(k + 1) % 4]
                if (v0 > level) != (v1 > level):
                    crossings[k] = _interp_crossing(
                        corners[k], corners[(k + 1) % 4], v0, v1, level)
            pairs = _CASES[idx]
            if pairs is None:  # saddle: disambiguate with the cell average
                center_above = (sum(vals) / 4.0) > level
                if idx == 5:
                    pairs = ((0, 1), (2, 3)) if center_above else ((3, 0), (1, 2))
                else:  # idx == 10
                    pairs = ((3, 0), (1, 2)) if center_above else ((0, 1), (2, 3))
            for e0, e1 in pairs:
                segments.append((crossings[e0], crossings[e1]))
    return _chain_segments(segments)


# marching-squares connectivity: which crossed edges pair up per case index
_CASES = {
    1: ((3, 0),), 2: ((0, 1),), 3: ((3, 1),), 4: ((1, 2),),
    5: None, 6: ((0, 2),), 7: ((3, 2),), 8: ((2, 3),),
    9: ((2, 0),), 10: None, 11: ((2, 1),), 12: ((1, 3),),
    13: ((0, 1),), 14: ((0, 3),),
}


def _key(pt, scale=1e9):
    return (round(pt[0] * scale), round(pt[1] * scale))


def _chain_segments(segments) -> list[list[tuple[float, float]]]:
    """Join segments end-to-end into polylines."""
    adj: dict = {}
    for seg in segments:
        for end, other in ((seg[0], seg[1]), (seg[1], seg[0])):
            adj.setdefault(_key(end), []).append((end, other))
    used = set()
    polylines = []
    for seg in segments:
        if (_key(seg[0]), _key(seg[1])) in used or (_key(seg[1]), _key(seg[0])) in used:
            continue
        line = [seg[0], seg[1]]
        used.add((_key(seg[0]), _key(seg[1])))
        for grow_end in (True, False):
            while True:
                tip = line[-1] if grow_end else line[0]
                nxt = None
                for end, other in adj.get(_key(tip), ()):
                    pair = (_key(end), _key(other))
                    if pair in used or (pair[1], pair[0]) in used:
                        continue
                    nxt = other
                    used.add(pair)
                    break
                if nxt is None:
                    break
                if grow_end:
                    line.append(nxt)
                else:
                    line.insert(0, nxt)
                if _key(line[0]) == _key(line[-1]) and len(line) > 2:
                    break
        polylines.append(line)
    return polylines


def contours_csv(grid: ScalarGrid, n_levels: int = 5) -> str:
    """CSV of 'level,poly_id,x,y' rows for n equal-density level sets."""
    rows = ["level,poly_id,x,y"]
    poly_id = 0
    for level in contour_levels(grid, n_levels):
        for line in marching_squares(grid, level):
            for x, y in line:
                rows.append(f"{level:.17g},{poly_id},{x:.17g},{y:.17g}")
            poly_id += 1
    return "\n".join(rows) + "\n"


def field_arrows_csv(field: VectorGrid, max_arrows_per_axis: int = 24) -> str:
    """Subsampled 'x,y,dx,dy' arrow table, magnitude-scaled for display."""
    h, w = field.shape
    stride = max(1, int(np.ceil(max(h, w) / max_arrows_per_axis)))
    mags = np.hypot(field.dx, field.dy)
    peak = float(mags.max())
    scale = 0.8 * stride / peak if peak > 0.0 else 1.0
    rows = ["x,y,dx,dy"]
    for i in range(0, h, stride):
        for j in range(0, w, stride):
            rows.append(f"{j},{i},{field.dx[i, j] * scale:.17g},{field.dy[i, j] * scale:.17g}")
    return "\n".join(rows) + "\n"


def grid_to_pgm(grid: ScalarGrid) -> bytes:
    """8-bit binary PGM (P5) of the min-max normalized grid."""
    a = grid.data
    lo = float(a.min())
    hi = float(a.max())
    if hi > lo:
        q = np.rint((a - lo) / (hi - lo) * 255.0).astype(np.uint8)
    else:
        q = np.zeros(a.shape, dtype=np.uint8)
    header = f"P5\n{a.shape[1]} {a.shape[0]}\n255\n".encode("ascii")
    return header + q.tobytes()


def pgm_to_array(data: bytes) -> np.ndarray:
    """Parse a binary P5 PGM back to floats in [0, 1] (for round-trip tests)."""
    parts = data.split(b"\n", 3)
    if parts[0] != b"P5":
        raise ValueError("not a binary PGM")
    w, h = (int(t) for t in parts[1].split())
    maxval = int(parts[2])
    pixels = np.frombuffer(parts[3], dtype=np.uint8, count=h * w).reshape(h, w)
    return pixels.astype(np.float64) / maxval
