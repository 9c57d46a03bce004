"""Monte Carlo estimation of Q^(2) and Qtilde^(alpha) for planar domains.

Experimental by design: the acceptance tolerances downstream are loose.
The domain is truncated at a word depth; each path lives in exactly one
convex piece (the pieces are disjoint open sets, so exiting the piece is
exiting the domain), which reduces the killing test to the piece's own
edges.  Steps are Gaussian with variance 2*dt per coordinate (generator
Delta) and killing uses a Brownian-bridge crossing test per edge:
P(cross | endpoints at distances d0, d1 > 0) = exp(-d0 d1 / dt).

For the subordinated estimator every path draws S_t = t^{2/alpha} S_1 and
is checked for survival at that clock; paths are simulated in the base
frame of their piece (exit times scale by the squared piece ratio), so a
single triangle geometry serves the whole domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .brownian_heat import TabulatedCurve, interval_loss_vec
from .errors import DepthOverflow, ValidationError
from .geometry import IFSDomain, validate_domain, word_cap
from .subordinator import as_params, philox_rng, sample

Z_CI = 3.0  # reported half-widths are 3-sigma binomial


@dataclass
class PathConfig:
    depth: int = 4
    dt: float = 1e-4
    bridge_correction: bool = True
    seed: int = 1
    n_paths: int = 100_000

    def __post_init__(self):
        if self.dt <= 0:
            raise ValidationError("dt must be positive")
        if self.depth < 1:
            raise ValidationError("depth must be >= 1")


def _float_pieces(domain: IFSDomain, depth: int):
    """Word images of the base polygon up to depth, as float vertex arrays."""
    base = np.array(
        [[float(v[0]), float(v[1])] for v in domain.base.polygon], dtype=float
    )
    maps = []
    for m in domain.maps:
        rot = np.array([[float(e) for e in row] for row in m.rotation], dtype=float)
        tr = np.array([float(e) for e in m.translation], dtype=float)
        maps.append((float(m.ratio), rot, tr))
    pieces = [(base, 1.0)]
    prev = pieces[:]
    for _ in range(depth):
        cur = []
        for poly, ratio in prev:
            for r, rot, tr in maps:
                cur.append(((r * (poly @ rot.T)) + tr, ratio * r))
        pieces.extend(cur)
        prev = cur
        if len(pieces) > word_cap():
            raise DepthOverflow(f"{len(pieces)} pieces at depth {depth}")
    polys = [p for p, _ in pieces]
    ratios = np.array([r for _, r in pieces])
    areas = np.array([_poly_area(p) for p in polys])
    return polys, ratios, areas


def _poly_area(p):
    x, y = p[:, 0], p[:, 1]
    return 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def _edges_inward(poly):
    """(normals, offsets) with x inside iff normals @ x - offsets > 0."""
    n = len(poly)
    nm, off = [], []
    area2 = np.dot(poly[:, 0], np.roll(poly[:, 1], -1)) - np.dot(
        poly[:, 1], np.roll(poly[:, 0], -1)
    )
    ccw = area2 > 0
    for i in range(n):
        a, b = poly[i], poly[(i + 1) % n]
        t = b - a
        nv = np.array([-t[1], t[0]]) if ccw else np.array([t[1], -t[0]])
        nv = nv / np.hypot(*nv)
        nm.append(nv)
        off.append(nv @ a)
    return np.array(nm), np.array(off)


def _uniform_in_triangle(rng, verts, n):
    a, b, c = verts
    u = rng.random(n)
    v = rng.random(n)
    flip = u + v > 1.0
    u[flip], v[flip] = 1.0 - u[flip], 1.0 - v[flip]
    return a[None, :] + u[:, None] * (b - a)[None, :] + v[:, None] * (c - a)[None, :]


def _uniform_in_polygon(rng, poly, n):
    if len(poly) == 3:
        return _uniform_in_triangle(rng, poly, n)
    # fan triangulation, area-weighted
    tris = [(poly[0], poly[i], poly[i + 1]) for i in range(1, len(poly) - 1)]
    w = np.array([_poly_area(np.array(t)) for t in tris])
    w = w / w.sum()
    pick = rng.choice(len(tris), size=n, p=w)
    out = np.empty((n, 2))
    for k, t in enumerate(tris):
        m = pick == k
        if np.any(m):
            out[m] = _uniform_in_triangle(rng, np.array(t), int(np.sum(m)))
    return out


def _survive_thresholds(normals, offsets, start, thresholds, substeps, rng, bridge):
    """Alive flags at each path's increasing threshold times.

    normals: (3, 2) shared edge normals; offsets: (3,); start: (n, 2);
    thresholds: (n, J) increasing along axis 1.  Each segment between
    consecutive thresholds is stepped in ``substeps`` Gaussian increments
    of variance 2*dt (dt varies per path).
    """
    n, j_count = thresholds.shape
    pos = start.copy()
    alive = np.ones(n, dtype=bool)
    out = np.empty((n, j_count), dtype=bool)
    d_old = pos @ normals.T - offsets[None, :]
    alive &= np.all(d_old > 0, axis=1)
    t_prev = np.zeros(n)
    for j in range(j_count):
        seg = np.maximum(thresholds[:, j] - t_prev, 0.0)
        dt = seg / substeps
        sd = np.sqrt(2.0 * dt)
        for _ in range(substeps):
            idx = np.nonzero(alive)[0]
            if idx.size == 0:
                break
            step = rng.standard_normal((idx.size, 2)) * sd[idx, None]
            pos[idx] += step
            d_new = pos[idx] @ normals.T - offsets[None, :]
            ok = np.all(d_new > 0, axis=1)
            if bridge:
                with np.errstate(divide="ignore", over="ignore"):
                    p_no = 1.0 - np.exp(
                        -np.maximum(d_old[idx] * d_new, 0.0) / dt[idx, None]
                    )
                p_surv = np.where(ok[:, None], np.prod(p_no, axis=1)[:, None], 0.0)[:, 0]
                ok &= rng.random(idx.size) <= p_surv
            alive[idx] = ok
            d_old[idx[ok]] = d_new[ok]
        out[:, j] = alive
        t_prev = thresholds[:, j]
    return out


def _piece_assignment(rng, areas, n):
    p = areas / areas.sum()
    return rng.choice(len(areas), size=n, p=p)


def estimate_q2_2d(domain: IFSDomain, config: PathConfig, t_grid):
    """Tabulated Brownian heat content curve with 3-sigma binomial CIs.

    Returns (TabulatedCurve, info dict); info carries the depth-truncation
    bias bound tail_measure(depth).
    """
    _prepare(domain, config)
    ts = np.asarray(sorted(float(t) for t in t_grid))
    polys, ratios, areas = _float_pieces(domain, config.depth)
    total_area = float(areas.sum())
    rng = philox_rng(config.seed, 0)
    n = config.n_paths
    pick = _piece_assignment(rng, areas, n)

    # simulate in the base frame: thresholds scale by 1/ratio^2
    base = polys[0]
    normals, offsets = _edges_inward(base)
    start = _uniform_in_polygon(rng, base, n)
    thresholds = ts[None, :] / (ratios[pick] ** 2)[:, None]
    substeps = max(1, int(math.ceil(float(ts[-1]) / config.dt / len(ts))))
    alive = _survive_thresholds(
        normals, offsets, start, thresholds, substeps, rng, config.bridge_correction
    )
    frac = alive.mean(axis=0)
    q = total_area * frac
    ci = total_area * Z_CI * np.sqrt(np.maximum(frac * (1 - frac), 0.0) / n)
    curve = TabulatedCurve(
        np.concatenate([[0.0], ts]),
        np.concatenate([[total_area], q]),
        np.concatenate([[0.0], ci]),
        measure=total_area,
        description=f"mc2d q2 {domain.name} depth={config.depth}",
    )
    info = {
        "truncation_bias": float(domain.tail_measure_exact(config.depth)),
        "measure_truncated": total_area,
        "n_paths": n,
        "seed": config.seed,
    }
    return curve, info


def estimate_shc_2d(domain: IFSDomain, alpha, config: PathConfig, t_grid, substeps=16):
    """Subordinated heat content estimates on t_grid with 3-sigma CIs."""
    params = as_params(alpha)
    _prepare(domain, config)
    ts = np.asarray(sorted(float(t) for t in t_grid))
    polys, ratios, areas = _float_pieces(domain, config.depth)
    total_area = float(areas.sum())
    rng = philox_rng(config.seed, 0)
    n = config.n_paths
    pick = _piece_assignment(rng, areas, n)
    s1 = sample(params, config.seed, n, stream=1)

    base = polys[0]
    normals, offsets = _edges_inward(base)
    start = _uniform_in_polygon(rng, base, n)
    clocks = (ts[None, :] ** (2.0 / params.alpha)) * (s1 / ratios[pick] ** 2)[:, None]
    alive = _survive_thresholds(
        normals, offsets, start, clocks, substeps, rng, config.bridge_correction
    )
    frac = alive.mean(axis=0)
    q = total_area * frac
    ci = total_area * Z_CI * np.sqrt(np.maximum(frac * (1 - frac), 0.0) / n)
    curve = TabulatedCurve(
        np.concatenate([[0.0], ts]),
        np.concatenate([[total_area], q]),
        np.concatenate([[0.0], ci]),
        measure=total_area,
        description=f"mc2d shc {domain.name} alpha={params.alpha}",
    )
    info = {
        "truncation_bias": float(domain.tail_measure_exact(config.depth)),
        "measure_truncated": total_area,
        "n_paths": n,
        "seed": config.seed,
        "alpha": params.alpha,
        "c11_flag": "base set boundary is polygonal, not C^{1,1}; simulated as-is",
    }
    return curve, info


def _prepare(domain, config):
    if domain.dim != 2:
        raise ValidationError("mc2d requires a d=2 domain")
    report = validate_domain(domain)
    report.raise_for_failure()


def interval_mc_sanity(L, t, n, seed, dt=1e-4, bridge=True):
    """1D variant of the stepper, for validating against the exact curve."""
    rng = philox_rng(seed, 0)
    x = rng.random(n) * L
    steps = max(1, int(math.ceil(t / dt)))
    dt_eff = t / steps
    sd = math.sqrt(2.0 * dt_eff)
    alive = np.ones(n, dtype=bool)
    for _ in range(steps):
        idx = np.nonzero(alive)[0]
        if idx.size == 0:
            break
        x_new = x[idx] + rng.standard_normal(idx.size) * sd
        ok = (x_new > 0) & (x_new < L)
        if bridge:
            with np.errstate(over="ignore"):
                p_no = (
                    1.0 - np.exp(-np.maximum(x[idx] * x_new, 0.0) / dt_eff)
                ) * (1.0 - np.exp(-np.maximum((L - x[idx]) * (L - x_new), 0.0) / dt_eff))
            ok &= rng.random(idx.size) <= np.where(ok, p_no, 0.0)
        alive[idx] = ok
        x[idx[ok]] = x_new[ok]
    frac = alive.mean()
    q = L * frac
    se = L * math.sqrt(max(frac * (1 - frac), 0.0) / n)
    return q, se
