"""Analytic baselines and test densities.

In one dimension the cumulative distribution already uniformizes a
density, and for separable products of 1-D densities the per-axis
cumulative does the same in 2-D.  Both are implemented here as oracles
for the full 2-D solver, along with generators for the four builtin test
distributions (gaussian, bimodal, concave crescent, ring).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .grid import ScalarGrid

BUILTIN_KINDS = ("uniform", "gaussian", "bimodal", "concave", "ring")


@dataclass(frozen=True)
class Density1D:
    """Nonnegative samples on a uniform 1-D lattice, unit trapezoid mass."""

    samples: np.ndarray
    support: tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=np.float64)
        if s.ndim != 1 or len(s) < 2:
            raise ValueError("need a 1-D array of at least 2 samples")
        if np.any(s < 0.0) or not np.all(np.isfinite(s)):
            raise ValueError("density samples must be finite and nonnegative")
        lo, hi = self.support
        if not hi > lo:
            raise ValueError("empty support interval")
        dx = (hi - lo) / (len(s) - 1)
        mass = np.trapezoid(s, dx=dx)
        if mass <= 0.0:
            raise ValueError("density has no mass")
        s = s / mass
        s.flags.writeable = False
        object.__setattr__(self, "samples", s)

    @property
    def lattice(self) -> np.ndarray:
        lo, hi = self.support
        return np.linspace(lo, hi, len(self.samples))

    def cumulative(self) -> np.ndarray:
        """Trapezoidal cumulative at the lattice nodes, pinned to [0, 1]."""
        s = self.samples
        dx = (self.support[1] - self.support[0]) / (len(s) - 1)
        c = np.concatenate([[0.0], np.cumsum(0.5 * (s[1:] + s[:-1]) * dx)])
        return c / c[-1]


def cdf_transform_1d(d: Density1D, x) -> np.ndarray:
    """Push points through a*P(x) + b, the support-aligned cumulative.

    P is the trapezoidal cumulative of ``d`` evaluated by monotone linear
    interpolation; (a, b) map [0, 1] back onto the support interval.
    """
    x = np.asarray(x, dtype=np.float64)
    lo, hi = d.support
    if np.any(x < lo) or np.any(x > hi):
        raise ValueError("point outside support")
    cum = np.interp(x, d.lattice, d.cumulative())
    return lo + (hi - lo) * cum


@dataclass(frozen=True)
class SeparableDensity:
    """Product of independent per-axis 1-D densities, axes ordered (x, y)."""

    factors: tuple[Density1D, ...]

    def __post_init__(self):
        object.__setattr__(self, "factors", tuple(self.factors))
        if not self.factors:
            raise ValueError("need at least one factor")

    @property
    def affine(self) -> list[tuple[float, float]]:
        """Per-axis (scale, offset) aligning [0,1] onto each support."""
        return [(f.support[1] - f.support[0], f.support[0]) for f in self.factors]


def separable_cdf_transform(d: SeparableDensity, pts) -> np.ndarray:
    """Apply the per-axis cumulative transform to an (n, dim) point array."""
    pts = np.asarray(pts, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != len(d.factors):
        raise ValueError(f"expected (n, {len(d.factors)}) points")
    out = np.empty_like(pts)
    for i, f in enumerate(d.factors):
        out[:, i] = cdf_transform_1d(f, pts[:, i])
    return out


@dataclass(frozen=True)
class TestDistributionSpec:
    """Parameterized builtin density over the unit square.

    Parameters are in domain (unit-square) units.  Defaults are chosen so
    that at least 99.9% of the mass lies inside the domain.
    """

    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in BUILTIN_KINDS:
            raise ValueError(f"kind must be one of {BUILTIN_KINDS}, got {self.kind!r}")


# Every non-uniform builtin is mixed with a small uniform floor.  The
# transport map's volume factor equals p/u, so a floor keeps it bounded
# away from zero where the feature density vanishes; without it the rim
# of the domain sits at the fold threshold and solver noise flips cells.
_UNIFORM_FLOOR = 0.05

_DEFAULTS = {
    "uniform": {},
    # sigma_y capped at 0.15: at 0.5/sigma = 3.33 the tail mass outside the
    # unit square stays below the 0.1% escape budget
    "gaussian": {"center": (0.5, 0.5), "sigma": (0.12, 0.15)},
    "bimodal": {"modes": ((0.35, 0.5), (0.65, 0.5)), "sigma": 0.08,
                "weights": (0.5, 0.5)},
    "concave": {"center": (0.5, 0.5), "radius": 0.25, "radial_sigma": 0.06,
                "concentration": 2.0, "opening_angle": 0.0},
    "ring": {"center": (0.5, 0.5), "radius": 0.25, "radial_sigma": 0.06},
}


def _params(spec: TestDistributionSpec) -> dict:
    p = dict(_DEFAULTS[spec.kind])
    p.update(spec.params)
    return p


def evaluator(spec: TestDistributionSpec):
    """Analytic density as a callable of unit-square (y, x) coordinates.

    The feature part is normalized to unit mass over the domain (by a
    fixed quadrature) and mixed with the uniform floor, so the returned
    values are directly comparable across kinds.
    """
    raw = _feature_evaluator(spec)
    lam = _params(spec).get("uniform_fraction",
                            0.0 if spec.kind == "uniform" else _UNIFORM_FLOOR)
    if spec.kind == "uniform" or lam == 0.0:
        return raw
    coords = np.linspace(0.0, 1.0, 801)
    yy, xx = np.meshgrid(coords, coords, indexing="ij")
    vals = raw(yy, xx)
    mass = float(np.trapezoid(np.trapezoid(vals, coords, axis=1), coords))

    def mixed(y, x, _raw=raw, _mass=mass, _lam=lam):
        return (1.0 - _lam) * _raw(y, x) / _mass + _lam
    return mixed


def _feature_evaluator(spec: TestDistributionSpec):
    """The unnormalized feature density, before the uniform floor."""
    p = _params(spec)
    kind = spec.kind

    if kind == "uniform":
        return lambda y, x: np.ones(np.broadcast(y, x).shape)

    if kind == "gaussian":
        (cx, cy) = p["center"]
        (sx, sy) = p["sigma"]

        def f(y, x):
            return np.exp(-0.5 * (((x - cx) / sx) ** 2 + ((y - cy) / sy) ** 2))
        return f

    if kind == "bimodal":
        modes = p["modes"]
        s = p["sigma"]
        ws = p["weights"]

        def f(y, x):
            out = np.zeros(np.broadcast(y, x).shape)
            for (mx, my), wt in zip(modes, ws):
                out = out + wt * np.exp(
                    -0.5 * (((x - mx) / s) ** 2 + ((y - my) / s) ** 2))
            return out
        return f

    # ring and concave share the radial profile; concave adds a von Mises
    # angular weight that carves a concavity opposite the opening angle
    (cx, cy) = p["center"]
    radius = p["radius"]
    sr = p["radial_sigma"]
    kappa = p.get("concentration", 0.0) if kind == "concave" else 0.0
    theta0 = p.get("opening_angle", 0.0)

    def f(y, x):
        r = np.hypot(x - cx, y - cy)
        out = np.exp(-0.5 * ((r - radius) / sr) ** 2)
        if kappa != 0.0:
            theta = np.arctan2(y - cy, x - cx)
            out = out * np.exp(kappa * np.cos(theta - theta0)) / math.exp(kappa)
        return out
    return f


def _mass_inside_fraction(f, extent: float = 1.0, factor: int = 3,
                          n: int = 901) -> float:
    """Fraction of the density's mass that lies inside the unit square,
    estimated by trapezoid quadrature over a ``factor``x larger region."""
    lo = 0.5 - factor * 0.5 * extent
    hi = 0.5 + factor * 0.5 * extent
    coords = np.linspace(lo, hi, n)
    yy, xx = np.meshgrid(coords, coords, indexing="ij")
    vals = f(yy, xx)
    total = np.trapezoid(np.trapezoid(vals, coords, axis=1), coords)
    inside = (coords >= 0.0) & (coords <= 1.0)
    c_in = coords[inside]
    v_in = vals[np.ix_(inside, inside)]
    part = np.trapezoid(np.trapezoid(v_in, c_in, axis=1), c_in)
    return float(part / total)


def generate(spec: TestDistributionSpec, shape: tuple[int, int]) -> ScalarGrid:
    """Sample an analytic density on a node-centered lattice over the unit
    square and normalize it to unit mass (sum of samples * cell area = 1).

    Raises:
        ValueError: if less than 99.9% of the analytic mass falls inside
            the domain (the transform would have to push mass through the
            boundary).
    """
    h, w = shape
    f = evaluator(spec)
    # the escape check applies to the feature part; the floor never leaks
    if spec.kind != "uniform" and _mass_inside_fraction(_feature_evaluator(spec)) < 0.999:
        raise ValueError("mass-escape check failed: density leaks outside the domain")
    ys = np.linspace(0.0, 1.0, h)
    xs = np.linspace(0.0, 1.0, w)
    yy, xx = np.meshgrid(ys, xs, indexing="ij")
    vals = np.asarray(f(yy, xx), dtype=np.float64)
    if np.any(vals < 0.0):
        raise ValueError("negative density")
    cell = (1.0 / (h - 1)) * (1.0 / (w - 1))
    total = vals.sum() * cell
    if total <= 0.0:
        raise ValueError("generated density has no mass")
    return ScalarGrid(vals / total)


def marginal_1d(spec: TestDistributionSpec, axis: int, n: int) -> Density1D:
    """Exact 1-D factor of the gaussian feature density.

    ``axis`` = 0 for x, 1 for y; sampled on n lattice nodes over [0, 1].
    Only valid as a factorization when the spec's uniform_fraction is 0,
    since the uniform floor breaks separability.
    """
    if spec.kind != "gaussian":
        raise ValueError("only the gaussian builtin is separable")
    p = _params(spec)
    c = p["center"][axis]
    s = p["sigma"][axis]
    t = np.linspace(0.0, 1.0, n)
    return Density1D(np.exp(-0.5 * ((t - c) / s) ** 2), support=(0.0, 1.0))
