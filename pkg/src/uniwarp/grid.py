"""Regular-lattice scalar and vector fields.

Conventions used across the whole package, stated once:

* Grids are stored row-major with ``data[row, col] == data[y, x]``; axis 0
  is y, axis 1 is x.
* Derivatives and displacements are expressed in lattice units (sample
  spacing = 1).  Conversion to physical units is the caller's concern.
* Grids are immutable after construction and all operations are pure
  functions, so values can be shared freely between threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class DensityError(ValueError):
    """Raised for densities that cannot be normalized (negative or empty)."""


def _as_grid_array(data) -> np.ndarray:
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError(f"grid data must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 2 or arr.shape[1] < 2:
        raise ValueError(f"grid must be at least 2x2, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("grid data contains NaN or Inf")
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ScalarGrid:
    """H x W samples of a scalar field (density, potential, or residual)."""

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _as_grid_array(self.data))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


@dataclass(frozen=True)
class VectorGrid:
    """H x W samples of a 2-vector field; dx along x (axis 1), dy along y."""

    dx: np.ndarray
    dy: np.ndarray

    def __post_init__(self):
        dx = _as_grid_array(self.dx)
        dy = _as_grid_array(self.dy)
        if dx.shape != dy.shape:
            raise ValueError(f"component shapes differ: {dx.shape} vs {dy.shape}")
        object.__setattr__(self, "dx", dx)
        object.__setattr__(self, "dy", dy)

    @property
    def height(self) -> int:
        return self.dx.shape[0]

    @property
    def width(self) -> int:
        return self.dx.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.dx.shape


@dataclass(frozen=True)
class Rect:
    """Axis-aligned index rectangle: rows [top, top+height), cols [left, left+width)."""

    top: int
    left: int
    height: int
    width: int

    def slices(self) -> tuple[slice, slice]:
        return (slice(self.top, self.top + self.height),
                slice(self.left, self.left + self.width))


@dataclass(frozen=True)
class DensityPair:
    """A normalized density and the constant uniform level sharing its support.

    After :func:`normalize_density`, ``mean(p) == u_level == 1`` up to
    accumulated rounding, so the normalized change in density is ``p - 1``.
    """

    p: ScalarGrid
    u_level: float = 1.0


# One lattice mean computed after rescaling is accurate to ~log2(N)*eps,
# far below this tolerance, so a second normalize pass is a bitwise no-op.
_MEAN_TOL = 1e-13


def normalize_density(raw: ScalarGrid) -> DensityPair:
    """Scale a nonnegative density so its lattice mean is 1.

    Raises:
        DensityError: if any sample is negative or all samples are zero.
    """
    data = np.array(raw.data, dtype=np.float64)
    if np.any(data < 0.0):
        raise DensityError("invalid density: negative samples")
    m = float(data.mean())
    if m == 0.0:
        raise DensityError("empty density: all samples are zero")
    for _ in range(4):
        if abs(m - 1.0) <= _MEAN_TOL:
            break
        data = data / m
        m = float(data.mean())
    else:
        raise DensityError("density normalization did not converge")
    return DensityPair(p=ScalarGrid(data), u_level=1.0)


def compute_rho(d: DensityPair) -> ScalarGrid:
    """Normalized change in density, ``p / u_level - 1``; sums to ~0."""
    return ScalarGrid(d.p.data / d.u_level - 1.0)


def resample_bilinear(src: ScalarGrid, out_h: int, out_w: int) -> ScalarGrid:
    """Bilinear resampling over the unit-square parameterization of ``src``.

    Constant fields map to constant fields exactly, and the output range is
    clipped to the source range so interpolation rounding cannot escape it.
    """
    if out_h < 2 or out_w < 2:
        raise ValueError(f"degenerate target shape ({out_h}, {out_w})")
    a = src.data
    h, w = a.shape
    # linspace pins both endpoints exactly
    ys = np.linspace(0.0, h - 1.0, out_h)
    xs = np.linspace(0.0, w - 1.0, out_w)
    out = _bilinear_lattice(a, ys[:, None], xs[None, :])
    np.clip(out, a.min(), a.max(), out=out)
    return ScalarGrid(out)


def _bilinear_lattice(a: np.ndarray, ys, xs) -> np.ndarray:
    """Evaluate bilinear interpolation of ``a`` at lattice coords (ys, xs).

    Coordinates are clamped to the lattice; ys/xs broadcast together.
    The lerp form keeps constant fields exact.
    """
    h, w = a.shape
    ys = np.clip(ys, 0.0, h - 1.0)
    xs = np.clip(xs, 0.0, w - 1.0)
    y0 = np.minimum(np.floor(ys).astype(np.intp), h - 2)
    x0 = np.minimum(np.floor(xs).astype(np.intp), w - 2)
    fy = ys - y0
    fx = xs - x0
    a00 = a[y0, x0]
    a01 = a[y0, x0 + 1]
    a10 = a[y0 + 1, x0]
    a11 = a[y0 + 1, x0 + 1]
    top = a00 + fx * (a01 - a00)
    bot = a10 + fx * (a11 - a10)
    return top + fy * (bot - top)


def _bilinear_vector(dx: np.ndarray, dy: np.ndarray, ys, xs):
    """Sample both components of a vector field at lattice coords."""
    return (_bilinear_lattice(dx, ys, xs), _bilinear_lattice(dy, ys, xs))


def _bilinear_with_gradient(a: np.ndarray, ys, xs):
    """Bilinear value and its (d/dy, d/dx) of the clamped interpolant.

    Matches :func:`_bilinear_lattice` exactly; the gradient vanishes in a
    clamped direction outside the lattice.
    """
    h, w = a.shape
    ys_q = np.clip(np.asarray(ys, dtype=np.float64), 0.0, h - 1.0)
    xs_q = np.clip(np.asarray(xs, dtype=np.float64), 0.0, w - 1.0)
    y0 = np.minimum(np.floor(ys_q).astype(np.intp), h - 2)
    x0 = np.minimum(np.floor(xs_q).astype(np.intp), w - 2)
    fy = ys_q - y0
    fx = xs_q - x0
    a00 = a[y0, x0]
    a01 = a[y0, x0 + 1]
    a10 = a[y0 + 1, x0]
    a11 = a[y0 + 1, x0 + 1]
    top = a00 + fx * (a01 - a00)
    bot = a10 + fx * (a11 - a10)
    val = top + fy * (bot - top)
    d_dy = bot - top
    d_dx = (a01 - a00) + fy * ((a11 - a10) - (a01 - a00))
    clamped_y = np.not_equal(ys, ys_q)
    clamped_x = np.not_equal(xs, xs_q)
    if np.any(clamped_y):
        d_dy = np.where(clamped_y, 0.0, d_dy)
    if np.any(clamped_x):
        d_dx = np.where(clamped_x, 0.0, d_dx)
    return val, d_dy, d_dx
