"""Coarse-to-fine solve driver.

The density pyramid doubles the lattice side per level (e.g. 44 -> 88 ->
176 -> 352) and every level's rho is rebuilt from the source density at
that level's resolution rather than coarsened from the finest grid.  The
potential starts at zero on the coarsest level; each finer level starts
from the previous solution, upsampled in index space by the growth factor
and rescaled by growth^2 so its curvature per lattice unit (and hence the
determinant response) carries over unchanged.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Union

import numpy as np
from scipy.ndimage import map_coordinates

from .diffops import DerivativeKernel, gradient_passes
from .grid import (ScalarGrid, VectorGrid, _bilinear_lattice, compute_rho,
                   normalize_density, resample_bilinear)
from .optimizer import NcgConfig, SolveTrace, minimize
from .pde import PdeProblem, WindowSpec, energy_and_gradient, h_of_g, window_rho

DensitySource = Union[ScalarGrid, Callable[[np.ndarray, np.ndarray], np.ndarray]]


@dataclass(frozen=True)
class PyramidConfig:
    base_size: int = 44
    levels: int = 4
    growth: int = 2
    target_size: int | None = 351

    def __post_init__(self):
        if self.levels < 1:
            raise ValueError("levels must be >= 1")
        if self.growth != 2:
            raise ValueError("growth is fixed at 2")
        if self.base_size < 15:  # 3x the 5-tap filter support
            raise ValueError("base_size must be at least 3x the filter support")
        if self.target_size is not None and self.target_size > self.finest_size:
            raise ValueError("target_size exceeds the finest level")

    @property
    def finest_size(self) -> int:
        return self.base_size * self.growth ** (self.levels - 1)

    def level_size(self, k: int) -> int:
        return self.base_size * self.growth ** k


@dataclass
class LevelResult:
    level_index: int
    size: int
    pad: int
    g: ScalarGrid  # padded-lattice potential
    trace: SolveTrace
    energy_full: float
    energy_valid: float
    rho_sq_full: float
    rho_sq_valid: float
    wall_time: float


@dataclass
class SolveReport:
    levels: list[LevelResult] = field(default_factory=list)
    total_time: float = 0.0
    # finest-level outputs, all computed on the padded lattice and then
    # cropped, so crop-edge convolution artifacts never enter them
    final_field: "VectorGrid | None" = None
    final_det: ScalarGrid | None = None

    @property
    def termination_flags(self) -> list[str]:
        return [lv.trace.terminated_by for lv in self.levels]


def _sample_source(source: DensitySource, size: int) -> ScalarGrid:
    if isinstance(source, ScalarGrid):
        return resample_bilinear(source, size, size)
    # analytic evaluator over the unit square, node-centered lattice
    coords = np.linspace(0.0, 1.0, size)
    yy, xx = np.meshgrid(coords, coords, indexing="ij")
    vals = np.asarray(source(yy, xx), dtype=np.float64)
    if vals.shape != (size, size):
        raise ValueError("analytic source returned a wrong-shaped array")
    return ScalarGrid(vals)


def _level_window(window: WindowSpec, cfg: PyramidConfig, k: int) -> WindowSpec:
    """Shrink the taper in exact proportion to the level's lattice.

    The scaling uses the node-spacing ratio so the taper ring occupies
    the same relative band at every level and the prolonged potential's
    ring lands exactly on the finer level's; the floor only guards the
    coarsest levels against dropping below the filter support.
    """
    scale = (cfg.level_size(k) - 1) / (cfg.finest_size - 1)
    transition = max(3.0, window.transition * scale)
    pad = None
    if window.pad is not None:
        pad = max(6, round(window.pad * scale), math.ceil(transition))
    return WindowSpec(pad=pad, transition=transition, shape=window.shape,
                      zero_sum=window.zero_sum)


def build_pyramid(p_source: DensitySource, cfg: PyramidConfig,
                  window: WindowSpec | None = None,
                  kernel: DerivativeKernel | None = None) -> list[PdeProblem]:
    """One windowed problem per level, coarsest first."""
    if isinstance(p_source, ScalarGrid) and min(p_source.shape) < cfg.base_size:
        raise ValueError(
            f"source resolution {p_source.shape} below coarsest level {cfg.base_size}")
    window = window if window is not None else WindowSpec()
    problems = []
    for k in range(cfg.levels):
        size = cfg.level_size(k)
        p = _sample_source(p_source, size)
        pair = normalize_density(p)
        rho = compute_rho(pair)
        problems.append(window_rho(rho, _level_window(window, cfg, k), kernel))
    return problems


def prolong(g_coarse: ScalarGrid, fine_shape: tuple[int, int],
            growth: int = 2) -> ScalarGrid:
    """Upsample a potential in index space and rescale it by growth^2.

    Fine node i samples the coarse lattice at i/growth (clamped at the far
    edge), so lattice spacing exactly halves and the rescale keeps h(g)
    unchanged across the resolution change.
    """
    hc, wc = g_coarse.shape
    hf, wf = fine_shape
    if not (growth * (hc - 1) < hf <= growth * hc and growth * (wc - 1) < wf <= growth * wc):
        raise ValueError(f"incompatible shapes: {g_coarse.shape} -> {fine_shape}")
    ys = np.arange(hf) / growth
    xs = np.arange(wf) / growth
    out = _bilinear_lattice(g_coarse.data, ys[:, None], xs[None, :])
    return ScalarGrid(out * float(growth * growth))


def _prolong_padded(g_pad: np.ndarray, pad_coarse: int, size_coarse: int,
                    fine_shape: tuple[int, int], pad_fine: int,
                    size_fine: int) -> np.ndarray:
    """Prolong a padded-lattice potential onto the next padded lattice.

    The valid regions are aligned by their shared unit-square geometry
    (fine valid node i maps to coarse valid coordinate i*(Nc-1)/(Nf-1)),
    and the amplitude is rescaled by the squared spacing ratio so the
    curvature per lattice unit carries over exactly.  The coarse pad band
    is carried along whole, and interpolation is cubic: the fine level's
    conjugate gradient removes short-wavelength initializer error
    quickly but long-wavelength error only at a rate set by the lattice
    size, so the prolongation must not leak low-mode error (bilinear's
    few-percent smooth-mode droop costs a whole level's budget).
    """
    hc, wc = g_pad.shape
    hf, wf = fine_shape
    ratio = (size_coarse - 1) / (size_fine - 1)
    ys = (np.arange(hf) - pad_fine) * ratio + pad_coarse
    xs = (np.arange(wf) - pad_fine) * ratio + pad_coarse
    yy, xx = np.meshgrid(np.clip(ys, 0, hc - 1), np.clip(xs, 0, wc - 1),
                         indexing="ij")
    out = map_coordinates(g_pad, [yy, xx], order=_PROLONG_ORDER, mode="nearest")
    return out / (ratio * ratio)


_PROLONG_ORDER = 3


def solve(p_source: DensitySource, pcfg: PyramidConfig | None = None,
          ncfg: NcgConfig | None = None, window: WindowSpec | None = None,
          kernel: DerivativeKernel | None = None,
          gradient_mode: str = "exact") -> tuple[ScalarGrid, SolveReport]:
    """Coarse-to-fine solve; returns the finest potential on the valid
    region (cropped to ``target_size``) and a per-level report."""
    pcfg = pcfg if pcfg is not None else PyramidConfig()
    ncfg = ncfg if ncfg is not None else NcgConfig()
    problems = build_pyramid(p_source, pcfg, window, kernel)

    t_start = time.perf_counter()
    report = SolveReport()
    g_pad_prev: np.ndarray | None = None
    pad_prev = 0
    for k, problem in enumerate(problems):
        t0 = time.perf_counter()
        size = pcfg.level_size(k)
        pad = problem.valid_region.top
        if g_pad_prev is None:
            x0 = np.zeros(problem.shape)
        else:
            x0 = _prolong_padded(g_pad_prev, pad_prev, pcfg.level_size(k - 1),
                                 problem.shape, pad, size)

        def eval_fn(g, _problem=problem):
            return energy_and_gradient(g, _problem, gradient_mode)

        g_pad, trace = minimize(x0, None, None, ncfg, eval_fn=eval_fn)
        vs = problem.valid_region.slices()
        h_err = _residual(g_pad, problem)
        rho = problem.rho.data
        lv = LevelResult(
            level_index=k, size=size, pad=pad, g=ScalarGrid(g_pad),
            trace=trace,
            energy_full=float(np.sum(h_err * h_err)),
            energy_valid=float(np.sum(h_err[vs] * h_err[vs])),
            rho_sq_full=float(np.sum(rho * rho)),
            rho_sq_valid=float(np.sum(rho[vs] * rho[vs])),
            wall_time=time.perf_counter() - t0,
        )
        report.levels.append(lv)
        g_pad_prev = g_pad
        pad_prev = pad

    report.total_time = time.perf_counter() - t_start
    final = problems[-1]
    kernel = final.ops.kernel
    vs = final.valid_region.slices()
    fx, fy = gradient_passes(g_pad_prev, kernel)
    det = h_of_g(g_pad_prev, final.ops) + 1.0
    g_final = g_pad_prev[vs]
    fx, fy, det = fx[vs], fy[vs], det[vs]
    if pcfg.target_size is not None and pcfg.target_size < g_final.shape[0]:
        t = pcfg.target_size
        g_final, fx, fy, det = g_final[:t, :t], fx[:t, :t], fy[:t, :t], det[:t, :t]
    report.final_field = VectorGrid(dx=fx, dy=fy)
    report.final_det = ScalarGrid(det)
    return ScalarGrid(g_final), report


def _residual(g: np.ndarray, problem: PdeProblem) -> np.ndarray:
    return h_of_g(g, problem.ops) - problem.rho.data
