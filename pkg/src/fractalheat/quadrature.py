"""Small quadrature toolkit used by the heat-content integrals.

Two workhorses:

* ``panel_integrate`` -- globally adaptive Gauss-Legendre panels with an
  embedded lower-order error estimate, vectorized over a batch axis (one
  theta-integral evaluated for many target points at once).
* ``trapezoid_refined`` -- trapezoid sums on a uniform grid with one
  Richardson extrapolation step (Simpson-equivalent) and the level
  difference as the error proxy.

Error estimates are multiplied by a safety factor before being reported;
they are honest working bounds, not formal interval arithmetic.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .errors import QuadratureNotConverged

SAFETY = 8.0


@lru_cache(maxsize=None)
def _gl_nodes(n: int):
    x, w = np.polynomial.legendre.leggauss(n)
    return x, w


def _panel_pair(f, a, b, n_hi=15, n_lo=7):
    """Integrate f over [a, b] with GL(n_hi); error vs GL(n_lo).

    f maps a node array of shape (m,) to shape (m,) or (m, k).
    """
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    xh, wh = _gl_nodes(n_hi)
    xl, wl = _gl_nodes(n_lo)
    fh = f(mid + half * xh)
    fl = f(mid + half * xl)
    hi = half * np.tensordot(wh, fh, axes=(0, 0))
    lo = half * np.tensordot(wl, fl, axes=(0, 0))
    return hi, np.abs(hi - lo)


def panel_integrate(f, a, b, rel_tol=1e-12, abs_tol=1e-300, max_panels=400):
    """Adaptive bisection of [a, b]; returns (value, error_bound).

    For batched integrands both outputs have the batch shape; a panel is
    refined while its error estimate is significant for *any* batch entry.
    """
    panels = [(a, b, *_panel_pair(f, a, b))]
    for _ in range(max_panels):
        total = sum(p[2] for p in panels)
        err = sum(p[3] for p in panels)
        target = np.maximum(rel_tol * np.abs(total), abs_tol)
        if np.all(err <= target):
            return total, SAFETY * err
        # split the panel with the largest worst-case error
        worst = max(range(len(panels)), key=lambda i: np.max(panels[i][3]))
        lo, hi, _, _ = panels.pop(worst)
        mid = 0.5 * (lo + hi)
        panels.append((lo, mid, *_panel_pair(f, lo, mid)))
        panels.append((mid, hi, *_panel_pair(f, mid, hi)))
    total = sum(p[2] for p in panels)
    err = sum(p[3] for p in panels)
    raise QuadratureNotConverged(
        "panel quadrature did not converge", value=total, bound=SAFETY * err
    )


def trapezoid_refined(f, lo, hi, step, rel_tol=1e-10, abs_tol=0.0, max_levels=6):
    """Uniform trapezoid + Richardson on [lo, hi], refining until stable.

    ``f`` maps a 1-d node array to integrand values.  Returns
    (value, error_bound) where the bound is the scaled difference between
    the two finest Richardson values.
    """
    n = max(8, int(np.ceil((hi - lo) / step)))
    xs = np.linspace(lo, hi, n + 1)
    fx = f(xs)
    h = xs[1] - xs[0]
    t_prev = h * (np.sum(fx) - 0.5 * (fx[0] + fx[-1]))
    s_prev = None
    for _ in range(max_levels):
        mids = 0.5 * (xs[:-1] + xs[1:])
        fm = f(mids)
        t_cur = 0.5 * t_prev + 0.5 * h * np.sum(fm)
        s_cur = (4.0 * t_cur - t_prev) / 3.0
        if s_prev is not None:
            diff = abs(s_cur - s_prev)
            if diff <= max(rel_tol * abs(s_cur), abs_tol):
                return s_cur, SAFETY * diff + 1e-18 * abs(s_cur)
        # interleave for the next level
        xs = np.sort(np.concatenate([xs, mids]))
        h *= 0.5
        t_prev, s_prev = t_cur, s_cur
    raise QuadratureNotConverged(
        "trapezoid refinement did not converge",
        value=s_cur,
        bound=SAFETY * abs(s_cur - s_prev) if s_prev is not None else None,
    )
