"""Nonlinear conjugate gradient with a Wolfe-Powell line search.

Direction updates use the Polak-Ribiere coefficient, reset to steepest
descent whenever the coefficient is nonpositive or the update stops being
a descent direction.  The line search brackets and zooms with quadratic
interpolation first and cubic refinement thereafter; a step is accepted
only if it satisfies both the sufficient-decrease and strong curvature
conditions, so the trace of accepted energies is strictly decreasing.

The minimizer is generic: it sees only an energy callback and a gradient
callback over a flat or 2-D array, nothing PDE-specific.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import ScalarGrid


@dataclass(frozen=True)
class NcgConfig:
    max_line_searches: int = 1000
    wolfe_c1: float = 0.01
    wolfe_c2: float = 0.5
    max_evals_per_search: int = 20
    grad_tol: float = 1e-9  # relative to the initial gradient norm
    restart_on_nonnegative_beta: bool = True

    def __post_init__(self):
        if not (0.0 < self.wolfe_c1 < self.wolfe_c2 < 1.0):
            raise ValueError("need 0 < c1 < c2 < 1")
        if self.max_line_searches < 1 or self.max_evals_per_search < 2:
            raise ValueError("budgets must be positive")


@dataclass
class AcceptedStep:
    """Scalar record of one accepted line search, enough to re-check Wolfe."""

    alpha: float
    energy: float
    slope0: float  # directional derivative at the step origin
    slope1: float  # directional derivative at the accepted point


@dataclass
class SolveTrace:
    energies: list[float] = field(default_factory=list)
    line_searches_used: int = 0
    terminated_by: str = ""
    steps: list[AcceptedStep] = field(default_factory=list)
    iterates: list[np.ndarray] = field(default_factory=list)
    directions: list[np.ndarray] = field(default_factory=list)
    n_evals: int = 0


def _dot(a: np.ndarray, b: np.ndarray) -> float:
    return float(np.dot(a.ravel(), b.ravel()))


def _cubic_min(a, fa, da, b, fb, db):
    """Minimizer of the cubic through (a, fa, da), (b, fb, db), or None."""
    d1 = da + db - 3.0 * (fa - fb) / (a - b)
    disc = d1 * d1 - da * db
    if disc < 0.0:
        return None
    s = np.sqrt(disc)
    # root selection keeps the minimizer (second derivative > 0)
    t = b - (b - a) * ((db + s - d1) / (db - da + 2.0 * s))
    return t if np.isfinite(t) else None


def _quad_min(a, fa, da, b, fb):
    """Minimizer of the quadratic through (a, fa, da) and (b, fb)."""
    denom = fb - fa - da * (b - a)
    if denom == 0.0:
        return None
    t = a + 0.5 * da * (b - a) ** 2 / -denom
    return t if np.isfinite(t) else None


class _LineSearchFailure(Exception):
    pass


def _wolfe_search(eval_fn, x, d, e0, g0, alpha0, cfg: NcgConfig):
    """Strong Wolfe line search.  Returns (alpha, x1, e1, g1, slope1, evals)."""
    c1, c2 = cfg.wolfe_c1, cfg.wolfe_c2
    slope0 = _dot(g0, d)
    if slope0 >= 0.0:
        raise _LineSearchFailure("not a descent direction")
    evals = 0

    def phi(alpha):
        nonlocal evals
        evals += 1
        e, g = eval_fn(x + alpha * d)
        return e, g, _dot(g, d)

    def wolfe_ok(e, slope, alpha):
        return (e <= e0 + c1 * alpha * slope0) and (abs(slope) <= c2 * abs(slope0))

    def zoom(lo, e_lo, s_lo, hi, e_hi, s_hi, first_quad):
        nonlocal evals
        use_quad = first_quad
        while evals < cfg.max_evals_per_search:
            a, b = (lo, hi) if lo < hi else (hi, lo)
            span = b - a
            if use_quad:
                t = _quad_min(lo, e_lo, s_lo, hi, e_hi)
                use_quad = False
            else:
                t = _cubic_min(lo, e_lo, s_lo, hi, e_hi, s_hi)
            if t is None or not (a + 0.1 * span <= t <= b - 0.1 * span):
                t = 0.5 * (lo + hi)  # safeguarded bisection
            e_t, g_t, s_t = phi(t)
            if wolfe_ok(e_t, s_t, t):
                return t, e_t, g_t, s_t
            if e_t > e0 + c1 * t * slope0 or e_t >= e_lo:
                hi, e_hi, s_hi = t, e_t, s_t
            else:
                if s_t * (hi - lo) >= 0.0:
                    hi, e_hi, s_hi = lo, e_lo, s_lo
                lo, e_lo, s_lo = t, e_t, s_t
        raise _LineSearchFailure("zoom budget exhausted")

    alpha_prev, e_prev, s_prev = 0.0, e0, slope0
    alpha = alpha0
    first = True
    while evals < cfg.max_evals_per_search:
        e_a, g_a, s_a = phi(alpha)
        if e_a > e0 + c1 * alpha * slope0 or (not first and e_a >= e_prev):
            t, e_t, g_t, s_t = zoom(alpha_prev, e_prev, s_prev, alpha, e_a, s_a,
                                    first_quad=True)
            return t, x + t * d, e_t, g_t, s_t, evals
        if wolfe_ok(e_a, s_a, alpha):
            return alpha, x + alpha * d, e_a, g_a, s_a, evals
        if s_a >= 0.0:
            t, e_t, g_t, s_t = zoom(alpha, e_a, s_a, alpha_prev, e_prev, s_prev,
                                    first_quad=True)
            return t, x + t * d, e_t, g_t, s_t, evals
        # still descending: extrapolate, capped at x10 per step
        t = _cubic_min(alpha_prev, e_prev, s_prev, alpha, e_a, s_a)
        lo, hi = 1.5 * alpha, 10.0 * alpha
        if t is None or not np.isfinite(t):
            t = hi
        alpha_prev, e_prev, s_prev = alpha, e_a, s_a
        alpha = min(max(t, lo), hi)
        first = False
    raise _LineSearchFailure("evaluation budget exhausted")


def minimize(x0, energy_fn, gradient_fn, cfg: NcgConfig | None = None, *,
             eval_fn=None, record_iterates: bool = False):
    """Minimize an energy from ``x0``; returns ``(x, SolveTrace)``.

    ``eval_fn(x) -> (energy, gradient)`` may be supplied to share work
    between the two callbacks; otherwise it is built from them.  Accepts a
    ScalarGrid or a plain ndarray and returns the matching type.
    """
    cfg = cfg if cfg is not None else NcgConfig()
    wrap = isinstance(x0, ScalarGrid)
    x = np.array(x0.data if wrap else x0, dtype=np.float64)
    if eval_fn is None:
        eval_fn = lambda z: (float(energy_fn(z)), np.asarray(gradient_fn(z), dtype=np.float64))

    trace = SolveTrace()
    e, g = eval_fn(x)
    trace.n_evals += 1
    trace.energies.append(e)
    if record_iterates:
        trace.iterates.append(x.copy())
    g0_norm = float(np.linalg.norm(g))
    if g0_norm == 0.0:
        trace.terminated_by = "gradient-tolerance"
        return (ScalarGrid(x) if wrap else x), trace

    d = -g
    alpha_next = 1.0 / (1.0 + g0_norm)
    tried_steepest_restart = False

    while True:
        if trace.line_searches_used >= cfg.max_line_searches:
            trace.terminated_by = "budget"
            break
        slope = _dot(g, d)
        if slope >= 0.0:  # not a descent direction: reset
            d = -g
            slope = _dot(g, d)
        try:
            alpha, x_new, e_new, g_new, slope_new, evals = _wolfe_search(
                eval_fn, x, d, e, g, alpha_next, cfg)
        except _LineSearchFailure:
            if not tried_steepest_restart and not np.array_equal(d, -g):
                tried_steepest_restart = True
                d = -g
                alpha_next = 1.0 / (1.0 + float(np.linalg.norm(g)))
                continue
            trace.terminated_by = "line-search-failure"
            break
        trace.line_searches_used += 1
        trace.n_evals += evals
        trace.energies.append(e_new)
        trace.steps.append(AcceptedStep(alpha=alpha, energy=e_new,
                                        slope0=slope, slope1=slope_new))
        if record_iterates:
            trace.iterates.append(x_new.copy())
            trace.directions.append(d.copy())
        tried_steepest_restart = False

        beta = _dot(g_new, g_new - g) / _dot(g, g)
        if cfg.restart_on_nonnegative_beta and beta <= 0.0:
            d_new = -g_new
        else:
            d_new = -g_new + beta * d
        slope_next = _dot(d_new, g_new)
        if slope_next >= 0.0:
            d_new = -g_new
            slope_next = _dot(d_new, g_new)

        # warm start: previous accepted step scaled by the ratio of the
        # successive searches' initial directional derivatives
        if slope_next < 0.0:
            alpha_next = alpha * min(max(slope / slope_next, 0.01), 100.0)
        else:
            alpha_next = alpha
        x, e, g, d = x_new, e_new, g_new, d_new

        if float(np.linalg.norm(g)) <= cfg.grad_tol * g0_norm:
            trace.terminated_by = "gradient-tolerance"
            break

    return (ScalarGrid(x) if wrap else x), trace
