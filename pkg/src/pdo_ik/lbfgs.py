"""Limited-memory BFGS with a strong-Wolfe line search.

Line search follows Nocedal & Wright, Numerical Optimization (2nd ed.),
Algorithms 3.5/3.6, with safeguarded cubic interpolation in the zoom phase.
"""

from __future__ import annotations

import math
import time
from collections import deque
from dataclasses import dataclass
from typing import Callable

import numpy as np

ValueGrad = Callable[[np.ndarray], "tuple[float, np.ndarray]"]


@dataclass(frozen=True)
class InnerOptions:
    history: int = 10
    gtol: float = 1e-8
    max_iter: int = 500
    max_ls: int = 25
    c1: float = 1e-4
    c2: float = 0.9
    ftol: float = 1e-15
    xtol: float = 1e-14


@dataclass
class LBFGSResult:
    x: np.ndarray
    fun: float
    grad: np.ndarray
    nit: int
    nfev: int
    status: str  # "gtol", "ftol", "xtol", "max-iterations", "line-search", "time-limit"

    @property
    def converged(self) -> bool:
        return self.status in ("gtol", "ftol", "xtol")


def _cubic_min(x1, f1, g1, x2, f2, g2, lo, hi):
    d1 = g1 + g2 - 3.0 * (f1 - f2) / (x1 - x2)
    sq = d1 * d1 - g1 * g2
    if sq >= 0.0:
        d2 = math.sqrt(sq)
        if x1 <= x2:
            xm = x2 - (x2 - x1) * (g2 + d2 - d1) / (g2 - g1 + 2.0 * d2)
        else:
            xm = x1 - (x1 - x2) * (g1 + d2 - d1) / (g1 - g2 + 2.0 * d2)
        if math.isfinite(xm):
            return min(max(xm, lo), hi)
    return 0.5 * (lo + hi)


def strong_wolfe(fg: ValueGrad, x, f0, g0, d, t=1.0, c1=1e-4, c2=0.9, max_ls=25):
    """Step length satisfying the strong Wolfe conditions along ``d``.

    Returns ``(t, f, g, nfev, ok)``; when ``ok`` is False the best point seen
    is returned (which may be ``t = 0``).
    """
    gtd0 = float(g0 @ d)
    nfev = 0
    t_prev, f_prev, gtd_prev, g_prev = 0.0, f0, gtd0, g0
    best = (0.0, f0, g0)

    def probe(step):
        nonlocal nfev, best
        f, g = fg(x + step * d)
        nfev += 1
        if math.isfinite(f) and f < best[1]:
            best = (step, f, g)
        return f, g

    bracket = None
    for i in range(max_ls):
        f, g = probe(t)
        if not math.isfinite(f):
            bracket = (t_prev, f_prev, gtd_prev, g_prev, t, math.inf, math.inf, None)
            break
        gtd = float(g @ d)
        if f > f0 + c1 * t * gtd0 or (i > 0 and f >= f_prev):
            bracket = (t_prev, f_prev, gtd_prev, g_prev, t, f, gtd, g)
            break
        if abs(gtd) <= -c2 * gtd0:
            return t, f, g, nfev, True
        if gtd >= 0:
            bracket = (t, f, gtd, g, t_prev, f_prev, gtd_prev, g_prev)
            break
        t_new = _cubic_min(t_prev, f_prev, gtd_prev, t, f, gtd, t + 0.01 * (t - t_prev), 10.0 * t)
        t_prev, f_prev, gtd_prev, g_prev = t, f, gtd, g
        t = t_new
    if bracket is None:
        bt, bf, bg = best
        return bt, bf, bg, nfev, False

    # zoom: (lo) always satisfies sufficient decrease and has the lowest value
    t_lo, f_lo, gtd_lo, g_lo, t_hi, f_hi, gtd_hi, _ = bracket
    for _ in range(max_ls):
        if abs(t_hi - t_lo) * float(np.max(np.abs(d))) < 1e-16:
            break
        a, b = min(t_lo, t_hi), max(t_lo, t_hi)
        if math.isfinite(f_hi) and math.isfinite(gtd_hi):
            t = _cubic_min(t_lo, f_lo, gtd_lo, t_hi, f_hi, gtd_hi, a, b)
        else:
            t = 0.5 * (a + b)
        # keep away from the bracket ends
        margin = 0.1 * (b - a)
        if t - a < margin or b - t < margin:
            t = 0.5 * (a + b)
        f, g = probe(t)
        gtd = float(g @ d) if math.isfinite(f) else math.inf
        if not math.isfinite(f) or f > f0 + c1 * t * gtd0 or f >= f_lo:
            t_hi, f_hi, gtd_hi = t, f, gtd
        else:
            if abs(gtd) <= -c2 * gtd0:
                return t, f, g, nfev, True
            if gtd * (t_hi - t_lo) >= 0:
                t_hi, f_hi, gtd_hi = t_lo, f_lo, gtd_lo
            t_lo, f_lo, gtd_lo, g_lo = t, f, gtd, g
    bt, bf, bg = best
    return bt, bf, bg, nfev, False


def lbfgs_minimize(
    fg: ValueGrad,
    x0,
    options: InnerOptions = InnerOptions(),
    deadline: float | None = None,
) -> LBFGSResult:
    """Minimize ``fg`` (returning value and gradient) from ``x0``.

    Accepted steps never increase the value.  ``deadline`` is an absolute
    ``time.perf_counter()`` instant.
    """
    x = np.array(x0, dtype=float)
    f, g = fg(x)
    g = np.asarray(g, dtype=float)
    if not (math.isfinite(f) and np.all(np.isfinite(g))):
        raise ValueError("objective or gradient is not finite at the starting point")
    nfev = 1
    s_hist: deque = deque(maxlen=options.history)
    y_hist: deque = deque(maxlen=options.history)
    rho_hist: deque = deque(maxlen=options.history)
    status = "max-iterations"
    nit = 0

    if np.max(np.abs(g), initial=0.0) <= options.gtol:
        return LBFGSResult(x, f, g, 0, nfev, "gtol")

    while nit < options.max_iter:
        if deadline is not None and time.perf_counter() > deadline:
            status = "time-limit"
            break
        # two-loop recursion
        q = -g
        alphas = []
        for s, y, r in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
            a = r * (s @ q)
            alphas.append(a)
            q = q - a * y
        if s_hist:
            y_last = y_hist[-1]
            q = q * (float(s_hist[-1] @ y_last) / float(y_last @ y_last))
        for (s, y, r), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
            b = r * (y @ q)
            q = q + (a - b) * s
        d = q
        gtd = float(g @ d)
        if not gtd < 0.0:
            s_hist.clear(); y_hist.clear(); rho_hist.clear()
            d = -g
            gtd = -float(g @ g)
        t0 = 1.0 if s_hist else min(1.0, 1.0 / float(np.sum(np.abs(g))))

        t, f_new, g_new, nf, ok = strong_wolfe(fg, x, f, g, d, t0, options.c1, options.c2, options.max_ls)
        nfev += nf
        nit += 1
        if t == 0.0 or not f_new < f:
            if s_hist:
                # stale curvature pairs; retry once from steepest descent
                s_hist.clear(); y_hist.clear(); rho_hist.clear()
                continue
            status = "line-search"
            break
        g_new = np.asarray(g_new, dtype=float)
        step = t * d
        y = g_new - g
        sy = float(step @ y)
        if sy > 1e-12 * float(np.sqrt((step @ step) * (y @ y))):
            s_hist.append(step)
            y_hist.append(y)
            rho_hist.append(1.0 / sy)
        x = x + step
        f_old, f, g = f, f_new, g_new

        if np.max(np.abs(g)) <= options.gtol:
            status = "gtol"
            break
        if f_old - f <= options.ftol * max(abs(f_old), abs(f), 1.0):
            status = "ftol"
            break
        if np.max(np.abs(step)) <= options.xtol:
            status = "xtol"
            break
    return LBFGSResult(x, f, g, nit, nfev, status)
