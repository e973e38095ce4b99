"""Everything downstream of a solved potential.

The forward displacement field is the potential's gradient; the map
T(x) = x + f(x) carries the data density to uniform.  Its inverse warps a
uniform lattice back into an estimate of the data density: each warped
quad cell carries equal mass, density is mass over warped area, and the
cell-centroid densities are regridded onto a regular lattice for
comparison and scoring with the Bhattacharyya coefficient.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .diffops import DerivativeKernel, DerivativeSet, gradient_passes
from .grid import (Rect, ScalarGrid, VectorGrid, _bilinear_vector,
                   _bilinear_with_gradient)
from .pde import h_of_g


class FieldInversionError(RuntimeError):
    """Fixed-point inversion failed to converge on too many nodes."""

    def __init__(self, message: str, mask: np.ndarray | None = None):
        super().__init__(message)
        self.mask = mask


class FoldedCellError(RuntimeError):
    """The warped lattice contains nonpositive cell areas."""

    def __init__(self, message: str, mask: np.ndarray | None = None):
        super().__init__(message)
        self.mask = mask


@dataclass(frozen=True)
class TransportMap:
    """A potential on its valid region together with its gradient field."""

    g: ScalarGrid
    forward: VectorGrid
    kernel: DerivativeKernel

    @property
    def domain(self) -> Rect:
        return Rect(0, 0, self.g.height, self.g.width)

    @property
    def shape(self) -> tuple[int, int]:
        return self.g.shape


@dataclass
class InversionDiagnostics:
    residual_inf: float        # max |y + f(y) - x_hat| over all nodes
    unconverged_fraction: float
    iterations: int


def forward_field(g: ScalarGrid, kernel: DerivativeKernel | None = None) -> TransportMap:
    """Displacement field f = grad g by one derivative pass per axis."""
    k = kernel if kernel is not None else DerivativeKernel.matched_5tap()
    fx, fy = gradient_passes(g.data, k)
    return TransportMap(g=g, forward=VectorGrid(dx=fx, dy=fy), kernel=k)


def field_from_components(dx: np.ndarray, dy: np.ndarray,
                          kernel: DerivativeKernel | None = None) -> TransportMap:
    """Wrap an explicit displacement field (no potential) as a TransportMap.

    Used when a field arrives from a file or a synthetic test; ``g`` is a
    zero placeholder of the right shape.
    """
    k = kernel if kernel is not None else DerivativeKernel.matched_5tap()
    field = VectorGrid(dx=dx, dy=dy)
    return TransportMap(g=ScalarGrid(np.zeros(field.shape)), forward=field, kernel=k)


def _interp_field(field: VectorGrid, ys, xs):
    return _bilinear_vector(field.dx, field.dy, ys, xs)


def _invert_at(f: VectorGrid, ys: np.ndarray, xs: np.ndarray,
               tol: float = 1e-6, max_iter: int = 100):
    """Inversion of x -> x + f(x) at arbitrary query points.

    Newton iteration on y + f(y) - x_hat = 0 with the bilinear cells'
    exact Jacobians and residual backtracking.  Where the Jacobian is
    unsafe the step falls back to the plain fixed point y <- x_hat - f(y);
    backtracking keeps every accepted step a strict residual decrease, so
    the near-singular cells of an almost-collapsing map (volume factor
    ~ 0 over empty density regions) cannot trap the iteration in a limit
    cycle.  Returns the displacements (y - x_hat) and diagnostics.
    """
    y_y = ys.astype(np.float64).copy()
    y_x = xs.astype(np.float64).copy()
    step = np.full_like(y_y, np.inf)
    iterations = 0
    for iterations in range(1, max_iter + 1):
        fx_i, dfx_dy, dfx_dx = _bilinear_with_gradient(f.dx, y_y, y_x)
        fy_i, dfy_dy, dfy_dx = _bilinear_with_gradient(f.dy, y_y, y_x)
        ry = y_y + fy_i - ys
        rx = y_x + fx_i - xs
        rnorm = np.hypot(ry, rx)
        det = (1.0 + dfy_dy) * (1.0 + dfx_dx) - dfy_dx * dfx_dy
        safe = np.abs(det) > 1e-12
        det_s = np.where(safe, det, 1.0)
        dy = np.where(safe, -((1.0 + dfx_dx) * ry - dfy_dx * rx) / det_s, -ry)
        dx = np.where(safe, -(-dfx_dy * ry + (1.0 + dfy_dy) * rx) / det_s, -rx)
        scale = np.ones_like(y_y)
        for _ in range(10):
            cy_t = y_y + scale * dy
            cx_t = y_x + scale * dx
            fx_c, fy_c = _interp_field(f, cy_t, cx_t)
            r_c = np.hypot(cy_t + fy_c - ys, cx_t + fx_c - xs)
            ok = (r_c <= rnorm * (1.0 - 1e-4 * scale)) | (rnorm < tol)
            if ok.all():
                break
            scale = np.where(ok, scale, scale * 0.5)
        dy *= scale
        dx *= scale
        step = np.hypot(dy, dx)
        y_y = y_y + dy
        y_x = y_x + dx
        if float(step.max()) < tol:
            break
    fx_i, fy_i = _interp_field(f, y_y, y_x)
    res = np.hypot(y_y + fy_i - ys, y_x + fx_i - xs)
    bad = step >= tol
    ok_res = res[~bad]
    diag = InversionDiagnostics(
        residual_inf=float(ok_res.max()) if ok_res.size else
        (float(res.max()) if res.size else 0.0),
        unconverged_fraction=float(bad.mean()) if bad.size else 0.0,
        iterations=iterations)
    return y_y - ys, y_x - xs, diag, bad


def invert_field(tmap: TransportMap, tol: float = 1e-6, max_iter: int = 100,
                 full_output: bool = False):
    """Inverse displacement at every lattice node.

    For each node x_hat, finds y with y + f(y) = x_hat and returns the
    displacement y - x_hat as a VectorGrid.

    Raises:
        FieldInversionError: if more than 0.1% of nodes fail to converge.
    """
    f = tmap.forward
    h, w = f.shape
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    inv_dy, inv_dx, diag, bad = _invert_at(f, yy, xx, tol, max_iter)
    if diag.unconverged_fraction > 1e-3:
        raise FieldInversionError(
            f"non-invertible field: {diag.unconverged_fraction:.2%} of nodes "
            f"did not converge", mask=bad)
    inv = VectorGrid(dx=inv_dx, dy=inv_dy)
    return (inv, diag) if full_output else inv


def _quad_areas(py: np.ndarray, px: np.ndarray) -> np.ndarray:
    """Signed areas of lattice quads, each split into two triangles along
    the (i,j)-(i+1,j+1) diagonal (shoelace per triangle); +1 for identity."""
    ay, ax = py[:-1, :-1], px[:-1, :-1]
    by, bx = py[:-1, 1:], px[:-1, 1:]
    cy, cx = py[1:, 1:], px[1:, 1:]
    dy, dx = py[1:, :-1], px[1:, :-1]
    t1 = 0.5 * ((bx - ax) * (cy - ay) - (cx - ax) * (by - ay))
    t2 = 0.5 * ((cx - ax) * (dy - ay) - (dx - ax) * (cy - ay))
    return t1 + t2


def _geometric_det(f: VectorGrid, qy, qx):
    """Volume factor det(I + Jf) of the interpolated map at query points."""
    _, dfx_dy, dfx_dx = _bilinear_with_gradient(f.dx, qy, qx)
    _, dfy_dy, dfy_dx = _bilinear_with_gradient(f.dy, qy, qx)
    return (1.0 + dfx_dx) * (1.0 + dfy_dy) - dfx_dy * dfy_dx


def _warped_cell_density(tmap: TransportMap, tol: float):
    """Centroids and per-cell density of the inverse-warped uniform lattice.

    Every cell carries the same mass (the uniform level, since cells have
    unit area), so the warped cells total exactly unit mass.  Cells whose
    warped area degenerates outside the domain come from querying the
    inverse beyond the map's image and are dropped (NaN density);
    nonpositive areas inside the domain are genuine folds and raise.
    """
    f = tmap.forward
    h, w = tmap.shape
    inv = invert_field(tmap, tol=tol)
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    py = yy + inv.dy
    px = xx + inv.dx

    areas = _quad_areas(py, px)
    cy = 0.25 * (py[:-1, :-1] + py[:-1, 1:] + py[1:, 1:] + py[1:, :-1])
    cx = 0.25 * (px[:-1, :-1] + px[:-1, 1:] + px[1:, 1:] + px[1:, :-1])
    inside = (cy > -0.5) & (cy < h - 0.5) & (cx > -0.5) & (cx < w - 0.5)
    folded = (areas <= 0.0) & inside
    if folded.any():
        raise FoldedCellError(
            f"folded cells: {int(folded.sum())} quads with nonpositive area",
            mask=folded)
    cell_mass = 1.0 / float((h - 1) * (w - 1))  # uniform level x unit cell
    with np.errstate(divide="ignore", invalid="ignore"):
        density = np.where(areas > 1e-9, cell_mass / np.maximum(areas, 1e-300), np.nan)
    return cy, cx, density, cell_mass


def _regrid(tmap: TransportMap, cy, cx, density, u_level, out_shape):
    h, w = tmap.shape
    out_h, out_w = out_shape
    tys = np.linspace(0.0, h - 1.0, out_h)
    txs = np.linspace(0.0, w - 1.0, out_w)
    tyy, txx = np.meshgrid(tys, txs, indexing="ij")
    return _interp_warped_mesh(cy, cx, density, tmap.forward, tyy, txx, u_level)


def reconstruct_density(tmap: TransportMap, out_shape: tuple[int, int],
                        tol: float = 1e-6) -> ScalarGrid:
    """Warp a uniform lattice by the inverse field and read density off
    the warped cell areas; regrid to ``out_shape`` and normalize to unit
    mass (sum of samples = 1)."""
    cy, cx, density, u_level = _warped_cell_density(tmap, tol)
    values = _regrid(tmap, cy, cx, density, u_level, out_shape)
    total = values.sum()
    if total <= 0.0:
        raise FoldedCellError("reconstruction produced no positive mass")
    return ScalarGrid(values / total)


def reconstruction_mass(tmap: TransportMap, out_shape: tuple[int, int],
                        tol: float = 1e-6) -> float:
    """Pre-normalization mass of the regridded reconstruction over the
    domain; ~1 for a healthy solve since the warped cells tile the
    domain's image with the uniform density."""
    h, w = tmap.shape
    cy, cx, density, u_level = _warped_cell_density(tmap, tol)
    values = _regrid(tmap, cy, cx, density, u_level, out_shape)
    return float(values.mean() * (h - 1) * (w - 1))


def _interp_warped_mesh(cy: np.ndarray, cx: np.ndarray, values: np.ndarray,
                        forward: VectorGrid, qy: np.ndarray, qx: np.ndarray,
                        u_level: float) -> np.ndarray:
    """Barycentric interpolation over the warped centroid mesh.

    The mesh is the centroid grid warped by the inverse map, so a query
    point q lies near mesh cell index ~ T(q) - 0.5, which the forward
    field supplies directly; a small neighborhood around that guess is
    searched.  Triangles match the split used for the areas: (a, b, c)
    and (a, c, d) for corners a=(i,j), b=(i,j+1), c=(i+1,j+1), d=(i+1,j);
    triangles with dropped (NaN) vertices never match.

    Interpolation only makes sense where the warped mesh resolves the
    density at least as finely as the output lattice; a triangle wider
    than a couple of lattice cells (a stretched near-empty region) cannot
    say how the density varies across itself.  Queries there, and queries
    not covered by any cell (the rim band a windowed solve swallows past
    the lattice), read the same geometry measured locally instead: the
    uniform level times the interpolated map's volume factor.
    """
    mh, mw = cy.shape
    fx_q, fy_q = _interp_field(forward, qy, qx)
    gy = np.clip(np.floor(qy + fy_q - 0.5).astype(np.intp), 0, mh - 2)
    gx = np.clip(np.floor(qx + fx_q - 0.5).astype(np.intp), 0, mw - 2)

    out = np.full(qy.shape, np.nan)
    eps = 1e-9
    max_span = 2.0
    for oy in (0, -1, 1, -2, 2):
        for ox in (0, -1, 1, -2, 2):
            if not np.isnan(out).any():
                break
            iy = np.clip(gy + oy, 0, mh - 2)
            ix = np.clip(gx + ox, 0, mw - 2)
            corners = {
                "a": (cy[iy, ix], cx[iy, ix], values[iy, ix]),
                "b": (cy[iy, ix + 1], cx[iy, ix + 1], values[iy, ix + 1]),
                "c": (cy[iy + 1, ix + 1], cx[iy + 1, ix + 1], values[iy + 1, ix + 1]),
                "d": (cy[iy + 1, ix], cx[iy + 1, ix], values[iy + 1, ix]),
            }
            for names in (("a", "b", "c"), ("a", "c", "d")):
                todo = np.isnan(out)
                if not todo.any():
                    break
                (ay, ax_, av), (by, bx, bv), (ccy, ccx, cv) = (corners[n] for n in names)
                fine = (np.maximum.reduce([np.abs(by - ay), np.abs(ccy - ay),
                                           np.abs(bx - ax_), np.abs(ccx - ax_)])
                        <= max_span)
                det = (bx - ax_) * (ccy - ay) - (ccx - ax_) * (by - ay)
                det = np.where(det == 0.0, np.nan, det)
                l1 = ((qx - ax_) * (ccy - ay) - (ccx - ax_) * (qy - ay)) / det
                l2 = ((bx - ax_) * (qy - ay) - (qx - ax_) * (by - ay)) / det
                l0 = 1.0 - l1 - l2
                inside = todo & fine & (l0 >= -eps) & (l1 >= -eps) & (l2 >= -eps)
                if inside.any():
                    val = l0 * av + l1 * bv + l2 * cv
                    out[inside] = val[inside]

    nan = np.isnan(out)
    if nan.any():
        det = _geometric_det(forward, qy[nan], qx[nan])
        out[nan] = u_level * np.maximum(det, 0.0)
    return out


def bhattacharyya(p: ScalarGrid, q: ScalarGrid) -> float:
    """Bhattacharyya coefficient of two same-lattice densities, in [0, 1].

    Both inputs are renormalized to unit mass over the shared lattice, so
    the coefficient is 1 exactly when the distributions agree and 0 when
    their supports are disjoint.
    """
    if p.shape != q.shape:
        raise ValueError(f"shape mismatch: {p.shape} vs {q.shape}")
    if np.any(p.data < 0.0) or np.any(q.data < 0.0):
        raise ValueError("negative density samples")
    ps = p.data.sum()
    qs = q.data.sum()
    if ps <= 0.0 or qs <= 0.0:
        raise ValueError("density with no mass")
    return float(np.sqrt((p.data / ps) * (q.data / qs)).sum())


def draw_samples(tmap: TransportMap, n: int, seed: int,
                 tol: float = 1e-6) -> np.ndarray:
    """n points distributed per the map's density: uniform points pushed
    through the inverse map.  Returns an (n, 2) array of (x, y) in lattice
    units; bit-reproducible for a fixed seed (counter-based generator)."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    h, w = tmap.shape
    rng = np.random.Generator(np.random.Philox(seed))
    xs = rng.uniform(0.0, w - 1.0, size=n)
    ys = rng.uniform(0.0, h - 1.0, size=n)
    if n == 0:
        return np.empty((0, 2))
    inv_dy, inv_dx, diag, _bad = _invert_at(tmap.forward, ys, xs, tol=tol)
    if diag.unconverged_fraction > 1e-3:
        raise FieldInversionError("non-invertible field while sampling")
    return np.column_stack([xs + inv_dx, ys + inv_dy])


def boundary_normal_residual(tmap: TransportMap) -> float:
    """Max |normal component of f| on the domain boundary (lattice units)."""
    f = tmap.forward
    return float(max(np.abs(f.dy[0, :]).max(), np.abs(f.dy[-1, :]).max(),
                     np.abs(f.dx[:, 0]).max(), np.abs(f.dx[:, -1]).max()))


def jacobian_positive_fraction(tmap: TransportMap) -> float:
    """Fraction of samples where the map's volume factor |I + H(g)| > 0."""
    ops = DerivativeSet.from_kernel(tmap.kernel)
    det = h_of_g(tmap.g.data, ops) + 1.0
    return float(np.mean(det > 0.0))


def roundtrip_residual(tmap: TransportMap, tol: float = 1e-6) -> float:
    """Max |T(T^-1(x_hat)) - x_hat| over the lattice nodes with a converged
    inverse (the <= 0.1% the inversion contract may leave unconverged lie
    outside the map's image and have no round trip to measure)."""
    h, w = tmap.shape
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64),
                         np.arange(w, dtype=np.float64), indexing="ij")
    inv_dy, inv_dx, diag, bad = _invert_at(tmap.forward, yy, xx, tol=tol)
    if bad.size and float(bad.mean()) > 1e-3:
        raise FieldInversionError(
            f"non-invertible field: {float(bad.mean()):.2%} of nodes did not converge")
    y_y = yy + inv_dy
    y_x = xx + inv_dx
    fx_i, fy_i = _interp_field(tmap.forward, y_y, y_x)
    res = np.hypot(y_y + fy_i - yy, y_x + fx_i - xx)
    return float(res[~bad].max()) if (~bad).any() else float(res.max())
