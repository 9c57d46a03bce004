"""Brownian (generator Delta) spectral heat content curves.

Convention: the Brownian motion here has generator Delta, i.e. transition
variance 2t per coordinate.  Exponents in every small-time law are
unaffected by this choice; constants are consistent throughout the library
because the same convention feeds both the Brownian curves and the
subordination clock (the subordinate process then has symbol |xi|^alpha).

The interval curve Q_{(0,L)}(t) is evaluated by two independent series:

* spectral:    Q = sum_{n odd} (8 L / (n pi)^2) exp(-(n pi / L)^2 t)
* reflection:  the method-of-images sum, written in terms of
               T(z) = E (L - |Z - z|)_+ with Z ~ N(0, 2t), which gives the
               heat loss directly and keeps full relative precision as
               t -> 0 (loss ~ 4 sqrt(t/pi)).

Both carry truncation bounds; they must agree to ~1e-10, which the tests
enforce across t/L^2 in [1e-8, 10].
"""

from __future__ import annotations

import csv as _csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc

from .errors import QuadratureNotConverged, ToleranceUnreachable, ValidationError
from .geometry import (
    IFSDomain,
    classify_log_ratios,
    expand_words,
    minkowski_dimension,
    validate_domain,
    word_cap,
)
from .quadrature import trapezoid_refined

_CROSSOVER = 0.1       # t/L^2; below -> reflection series, above -> spectral
_SQRT_PI = math.sqrt(math.pi)
_K_HALF = 4.0 / _SQRT_PI   # loss(u) <= (4/sqrt(pi)) sqrt(u), all u >= 0


# ---------------------------------------------------------------------------
# interval evaluators
# ---------------------------------------------------------------------------


def _interval_loss_reflection(L, t):
    """Heat loss of (0, L) by the image series; exact up to the returned bound."""
    t = np.asarray(t, dtype=float)
    loss = np.zeros_like(t)
    err = np.zeros_like(t)
    pos = t > 0
    if not np.any(pos):
        return loss, err
    tp = t[pos]
    x1 = L / (2.0 * np.sqrt(tp))
    spi = np.sqrt(tp / math.pi)
    erfc1 = erfc(np.minimum(x1, 27.0))
    ex = np.exp(-np.minimum(x1 * x1, 745.0))

    acc = L * erfc1 + 2.0 * spi * (1.0 - ex)
    # far field x1 > 9: every image term beyond T(L) is below 1e-140 and
    # T(L) = spi (1 - ex) + L erfc1 - spi ex exactly to that accuracy
    far = x1 > 9.0
    if np.any(far):
        t1 = spi[far] * (1.0 - 2.0 * ex[far]) + L * erfc1[far]
        acc[far] += 2.0 * t1
    near = ~far
    if np.any(near):
        xn1 = x1[near]
        sp = spi[near]
        m_max = int(np.ceil(8.7 / max(float(np.min(xn1)), 1e-12))) + 1
        m_max = min(max(m_max, 2), 100_000)
        sub = np.zeros_like(xn1)
        erfc_prev = np.ones_like(xn1)      # erfc(x_0) = 1
        exp_prev = np.ones_like(xn1)       # exp(-x_0^2) = 1
        erfc_cur = erfc1[near]
        exp_cur = ex[near]
        sign = 1.0
        for m in range(1, m_max + 1):
            xn = (m + 1) * xn1
            erfc_next = erfc(np.minimum(xn, 27.0))
            exp_next = np.exp(-np.minimum(xn * xn, 745.0))
            m_lo = 0.5 * (erfc_prev - erfc_cur)
            m_hi = 0.5 * (erfc_cur - erfc_next)
            v_lo = sp * (exp_prev - exp_cur)
            v_hi = sp * (exp_cur - exp_next)
            term = L * (1 - m) * m_lo + v_lo + L * (1 + m) * m_hi - v_hi
            sub = sub + 2.0 * sign * term
            sign = -sign
            erfc_prev, erfc_cur = erfc_cur, erfc_next
            exp_prev, exp_cur = exp_cur, exp_next
        acc[near] += sub
        # remaining images: sum_{m > M} T(mL) <= L erfc(x_M) (1 + geometric)
        err_near = 2.0 * L * erfc(np.minimum(m_max * xn1, 27.0))
        e = err[pos]
        e[near] = err_near
        err[pos] = e
    loss[pos] = acc
    err[pos] += 32.0 * np.finfo(float).eps * L
    return loss, err


def _interval_q_spectral(L, t):
    """Q_{(0,L)}(t) by the Dirichlet eigenfunction series, with tail bound."""
    t = np.asarray(t, dtype=float)
    theta = t / (L * L)
    th_min = max(float(np.min(theta)), 1e-300)
    n_max = int(np.ceil(math.sqrt(46.0 / (math.pi ** 2 * th_min))))
    if n_max % 2 == 0:
        n_max += 1
    n_max = min(n_max, 200_001)
    q = np.zeros_like(t)
    for n in range(1, n_max + 1, 2):
        q += (8.0 * L / (n * n * math.pi ** 2)) * np.exp(
            -np.minimum((n * math.pi) ** 2 * theta, 745.0)
        )
    n2 = n_max + 2
    tail = (8.0 * L / (math.pi ** 2 * n2 ** 2)) * np.exp(
        -np.minimum(n2 ** 2 * math.pi ** 2 * theta, 745.0)
    )
    tail = tail / np.maximum(1.0 - np.exp(-np.minimum(4 * n2 * math.pi ** 2 * theta, 745.0)), 0.5)
    err = tail + 16.0 * np.finfo(float).eps * L * (n_max // 2 + 1)
    return q, err


def interval_loss_vec(L, t, method="auto"):
    """Vectorized heat loss L - Q of the interval (0, L); returns (loss, err)."""
    if L <= 0:
        raise ValidationError("interval length must be positive")
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < 0):
        raise ValidationError("time must be nonnegative")
    if method == "reflection":
        return _interval_loss_reflection(L, t)
    if method == "spectral":
        q, err = _interval_q_spectral(L, t)
        return L - q, err
    loss = np.empty_like(t)
    err = np.empty_like(t)
    small = t <= _CROSSOVER * L * L
    if np.any(small):
        loss[small], err[small] = _interval_loss_reflection(L, t[small])
    if np.any(~small):
        q, e = _interval_q_spectral(L, t[~small])
        loss[~small], err[~small] = L - q, e
    return loss, err


def interval_heat_content(L, t, method="auto"):
    """Q_{(0,L)}^(2)(t) with a certified truncation bound.

    t = 0 returns (L, 0) exactly.
    """
    loss, err = interval_loss_vec(L, np.array([float(t)]), method=method)
    return L - float(loss[0]), float(err[0])


# ---------------------------------------------------------------------------
# curve objects
# ---------------------------------------------------------------------------


class HeatContentCurve:
    """Evaluator t -> (Q(t), error bound) with total measure |G|.

    Subclasses expose the heat *loss* as the primitive (it is the quantity
    every small-time law describes, and evaluating it directly avoids the
    catastrophic cancellation of |G| - Q at tiny t).
    """

    measure: float
    description: str

    def loss_vec(self, t, rel_tol=1e-9, abs_tol=1e-14):
        raise NotImplementedError

    def loss(self, t, **kw):
        ls, es = self.loss_vec(np.array([float(t)]), **kw)
        return float(ls[0]), float(es[0])

    def value(self, t, **kw):
        q, e = self.value_vec(np.array([float(t)]), **kw)
        return float(q[0]), float(e[0])

    def value_vec(self, t, **kw):
        ls, es = self.loss_vec(t, **kw)
        return self.measure - ls, es

    def q_upper_bound(self, u):
        """Certified upper bound for Q(u), decaying exponentially in u."""
        raise NotImplementedError

    def small_time_envelope(self):
        """(c, p, u_max): certified loss(u) <= c * u**p for u <= u_max."""
        raise NotImplementedError

    def to_csv(self, t_grid, path_or_buf):
        ts = np.asarray(t_grid, dtype=float)
        q, e = self.value_vec(ts)
        close = False
        if isinstance(path_or_buf, (str, bytes)):
            fh = open(path_or_buf, "w", newline="")
            close = True
        else:
            fh = path_or_buf
        try:
            w = _csv.writer(fh)
            w.writerow(["t", "Q", "err"])
            for row in zip(ts, q, e):
                w.writerow([repr(float(v)) for v in row])
        finally:
            if close:
                fh.close()


class IntervalCurve(HeatContentCurve):
    def __init__(self, length, method="auto"):
        self.length = float(length)
        self.measure = float(length)
        self.method = method
        self.description = f"interval L={length}"

    def loss_vec(self, t, rel_tol=1e-9, abs_tol=1e-14):
        return interval_loss_vec(self.length, t, method=self.method)

    def q_upper_bound(self, u):
        # Q(u) = sum_{n odd} 8L/(n pi)^2 e^{-n^2 pi^2 u / L^2} <= L e^{-pi^2 u/L^2}
        L = self.length
        return L * math.exp(-min(math.pi ** 2 * u / (L * L), 700.0))

    def small_time_envelope(self):
        return _K_HALF, 0.5, math.inf


class FractalCurve1D(HeatContentCurve):
    """Q_G for a validated d=1 self-similar domain.

    Q_G(t) = sum over words w of r_w * Q_{G0}(t / r_w^2) (scaling plus
    additivity over the disjoint copies).  Words are aggregated by exact
    composite ratio; the depth is extended adaptively until the certified
    two-sided bound on the dropped tail meets the requested tolerance:

    * dropped loss <= sum over deeper levels of min(level measure,
      word count * 4 sqrt(t/pi)),
    * dropped loss >= tail_measure - (bound on the dropped Q mass).
    """

    def __init__(self, domain: IFSDomain, method="auto"):
        if domain.dim != 1:
            raise ValidationError("FractalCurve1D requires a d=1 domain")
        validate_domain(domain).raise_for_failure()
        self.domain = domain
        self.method = method
        self.measure = domain.measure
        self.L0 = float(domain.base.interval_length)
        self.a = float(domain.contraction_sum)          # sum r_j
        self.N = len(domain.maps)
        self.r_max = float(max(domain.ratios))
        self.description = f"fractal domain {domain.name or '1d'}"
        self._expansion = expand_words(domain, 0)
        self._rebuild_flat()

    # -- word bookkeeping ---------------------------------------------------

    def _rebuild_flat(self):
        self._flat_r, self._flat_m = self._expansion.flat()
        self._tm = float(self._expansion.tail_measure)

    def _ensure_depth(self, depth):
        if self._expansion.depth >= depth:
            return
        cap = word_cap()
        levels = self._expansion.levels
        total = sum(len(l) for l in levels)
        while len(levels) - 1 < depth:
            nxt = {}
            for r, mult in levels[-1].items():
                for rj in self.domain.ratios:
                    key = r * rj
                    nxt[key] = nxt.get(key, 0) + mult
            levels.append(nxt)
            total += len(nxt)
            if total > cap:
                raise ToleranceUnreachable(
                    f"word aggregation cap {cap} hit at depth {len(levels) - 1}"
                )
        self._expansion.tail_measure = self.domain.tail_measure_exact(len(levels) - 1)
        self._rebuild_flat()

    @property
    def depth(self):
        return self._expansion.depth

    # -- certified tail bounds ----------------------------------------------

    def _tail_upper(self, u, depth):
        """sum_{|w| > depth} r_w loss0(u / r_w^2) <= level-sum bound."""
        u = np.asarray(u, dtype=float)
        g0 = self.L0
        k = _K_HALF * np.sqrt(np.maximum(u, 0.0))
        ln_a, ln_n = math.log(self.a), math.log(self.N)
        m0 = depth + 1
        with np.errstate(divide="ignore"):
            n_c = np.where(
                k > 0, (np.log(np.maximum(k, 1e-300)) - math.log(g0)) / (ln_a - ln_n), -1.0
            )
        nc = np.floor(n_c)
        out = np.empty_like(u)
        # fully saturated: every deeper level contributes its measure
        sat = nc < m0
        out[sat] = g0 * self.a ** m0 / (1.0 - self.a)
        ns = ~sat
        if np.any(ns):
            ncn = nc[ns]
            kk = k[ns]
            # unsaturated block m0..nc: word count N^n each losing <= k
            geo = (np.exp((ncn + 1) * ln_n) - np.exp(m0 * ln_n)) / (self.N - 1)
            hi = kk * (geo + np.exp(ncn * ln_n))
            # saturated block nc+1.. : level measures
            hi += g0 * np.exp((ncn + 1) * ln_a) / (1.0 - self.a)
            out[ns] = hi
        return np.minimum(out, self._tm)

    def _tail_lower(self, u, depth):
        """tail loss >= tail_measure - bound(dropped Q mass)."""
        u = np.asarray(u, dtype=float)
        g0 = self.L0
        qdef = np.zeros_like(u)
        level_meas = g0 * self.a ** (depth + 1)
        # arg = pi^2 u / (r_max^(2 n') L0^2), grown multiplicatively
        scale0 = math.exp(min(-2.0 * (depth + 1) * math.log(self.r_max), 690.0))
        arg = np.minimum(math.pi ** 2 * u / (self.L0 ** 2) * scale0, 1e30)
        grow = self.r_max ** -2
        for step in range(400):
            factor = np.exp(-np.minimum(arg, 700.0))
            qdef += level_meas * factor
            if np.all(factor > 0.999):
                # everything deeper contributes ~ fully; close with the measure tail
                qdef += level_meas * self.a / (1.0 - self.a)
                break
            level_meas *= self.a
            arg = np.minimum(arg * grow, 1e30)
            if level_meas < 1e-300:
                break
        else:
            qdef += level_meas * self.a / (1.0 - self.a)
        return np.maximum(self._tm - qdef, 0.0)

    # -- evaluation -----------------------------------------------------------

    def _partial_loss(self, u):
        u = np.asarray(u, dtype=float)
        loss = np.zeros_like(u)
        err = np.zeros_like(u)
        block = max(1, int(4_000_000 // max(len(u), 1)))
        r, m = self._flat_r, self._flat_m
        for i in range(0, len(r), block):
            rb = r[i : i + block, None]
            mb = m[i : i + block, None]
            ls, es = interval_loss_vec(self.L0, u[None, :] / rb ** 2, method=self.method)
            loss += np.sum(mb * rb * ls, axis=0)
            err += np.sum(mb * rb * es, axis=0)
        return loss, err

    def loss_vec(self, t, rel_tol=1e-9, abs_tol=1e-14):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        pos = t > 0
        loss = np.zeros_like(t)
        err = np.zeros_like(t)
        if not np.any(pos):
            return loss, err
        u = t[pos]

        # initial depth: resolve the smallest time scale plus slack
        u_min = float(np.min(u))
        k = _K_HALF * math.sqrt(u_min)
        if k < self.L0:
            n_guess = int(math.log(k / self.L0) / math.log(self.a / self.N)) + 6
        else:
            n_guess = 4
        depth = max(self.depth, min(n_guess, 4000))

        for _ in range(60):
            self._ensure_depth(depth)
            part, perr = self._partial_loss(u)
            hi = self._tail_upper(u, depth)
            lo = self._tail_lower(u, depth)
            lo = np.minimum(lo, hi)
            mid = 0.5 * (hi + lo)
            tot_err = perr + 0.5 * (hi - lo)
            target = np.maximum(rel_tol * (part + mid), abs_tol)
            if np.all(tot_err <= target):
                loss[pos] = part + mid
                err[pos] = tot_err
                return loss, err
            depth = depth + max(6, depth // 3)
        raise ToleranceUnreachable(
            "fractal curve depth extension exhausted",
            value=float(np.max(part + mid)),
            bound=float(np.max(tot_err)),
        )

    def q_upper_bound(self, u):
        # every copy has length <= L0, so Q_G(u) <= |G| e^{-pi^2 u / L0^2}
        return self.measure * math.exp(-min(math.pi ** 2 * u / (self.L0 ** 2), 700.0))

    def small_time_envelope(self):
        e_prime = math.log(1.0 / self.a) / math.log(self.N / self.a)
        c = (
            self.L0 ** (1.0 - e_prime)
            * _K_HALF ** e_prime
            * (self.N / (self.N - 1.0) + self.a / (1.0 - self.a))
        )
        u_max = (self.L0 / _K_HALF) ** 2
        return c, e_prime / 2.0, u_max


class UnionCurve(HeatContentCurve):
    """Disjoint union: losses and measures add (additivity of heat content)."""

    def __init__(self, curves):
        self.curves = list(curves)
        self.measure = float(sum(c.measure for c in self.curves))
        self.description = "disjoint union of " + ", ".join(c.description for c in self.curves)

    def loss_vec(self, t, **kw):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        loss = np.zeros_like(t)
        err = np.zeros_like(t)
        for c in self.curves:
            ls, es = c.loss_vec(t, **kw)
            loss += ls
            err += es
        return loss, err

    def q_upper_bound(self, u):
        return sum(c.q_upper_bound(u) for c in self.curves)

    def small_time_envelope(self):
        parts = [c.small_time_envelope() for c in self.curves]
        return (
            sum(p[0] for p in parts),
            min(p[1] for p in parts),
            min(p[2] for p in parts),
        )


class TabulatedCurve(HeatContentCurve):
    """Curve backed by a (t, Q, err) table, e.g. a Monte Carlo estimate.

    Loss is interpolated linearly in ln t; the reported bound folds the
    tabulated error with a local curvature allowance.
    """

    def __init__(self, t, q, err, measure=None, description="tabulated"):
        t = np.asarray(t, dtype=float)
        q = np.asarray(q, dtype=float)
        err = np.asarray(err, dtype=float)
        order = np.argsort(t)
        self.t = t[order]
        self.q = q[order]
        self.err = err[order]
        if measure is None:
            if self.t[0] == 0.0:
                measure = self.q[0]
            else:
                raise ValidationError("tabulated curve needs measure or a t=0 row")
        self.measure = float(measure)
        self.description = description
        mask = self.t > 0
        self._lt = np.log(self.t[mask])
        self._loss = self.measure - self.q[mask]
        self._lerr = self.err[mask]
        d2 = np.abs(np.diff(self._loss, n=2)) if len(self._loss) > 2 else np.array([0.0])
        self._curv = np.concatenate([[0.0], d2, [0.0]]) if len(self._loss) > 2 else np.zeros_like(self._loss)

    @classmethod
    def from_csv(cls, path, measure=None, description=None):
        ts, qs, es = [], [], []
        with open(path, "r") as fh:
            for row in _csv.reader(l for l in fh if not l.startswith("#")):
                if row and row[0] == "t":
                    continue
                if len(row) >= 3:
                    ts.append(float(row[0]))
                    qs.append(float(row[1]))
                    es.append(float(row[2]))
        return cls(ts, qs, es, measure=measure, description=description or str(path))

    def loss_vec(self, t, **kw):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        lt = np.log(np.clip(t, self.t[self.t > 0].min(), self.t.max()))
        loss = np.interp(lt, self._lt, self._loss)
        err = np.interp(lt, self._lt, self._lerr) + np.interp(lt, self._lt, self._curv)
        return loss, err

    def q_upper_bound(self, u):
        return self.measure

    def small_time_envelope(self):
        raise ValidationError("tabulated curves carry no certified envelope")


def fractal_heat_content_1d(domain: IFSDomain, t, tol=1e-10):
    """Q_G^(2)(t) for a d=1 domain; error bound <= tol plus series error."""
    curve = FractalCurve1D(domain)
    if float(t) == 0.0:
        return curve.measure, 0.0
    ls, es = curve.loss_vec(np.array([float(t)]), rel_tol=0.0, abs_tol=tol)
    return curve.measure - float(ls[0]), float(es[0])


# ---------------------------------------------------------------------------
# Mellin-type integral of the heat loss (shared by several law constants)
# ---------------------------------------------------------------------------


def heat_loss_mellin(curve: HeatContentCurve, eta, rel_tol=1e-10):
    """integral_0^inf (|G| - Q(u)) u^(-1-eta) du, via u = exp(-z).

    Requires the curve's certified small-time envelope exponent to exceed
    eta (otherwise the integral diverges).  Returns (value, error_bound).
    """
    c_env, p_env, u_env = curve.small_time_envelope()
    if p_env <= eta:
        raise QuadratureNotConverged(
            f"loss envelope exponent {p_env} does not dominate eta={eta}"
        )
    meas = curve.measure

    def one_pass(scale_guess):
        tol_abs = rel_tol * scale_guess
        # left cutoff: measure saturation; Q-bound drives the window
        z0 = -math.log(4.0 * u_sat_guess)
        for _ in range(40):
            w = curve.q_upper_bound(math.exp(-z0)) * math.exp(eta * z0) / eta
            if w <= 0.25 * tol_abs:
                break
            z0 -= 0.5
        left = meas * math.exp(eta * z0) / eta - 0.5 * w
        err = 0.5 * w
        # right cutoff from the envelope
        gap = p_env - eta
        z1 = max(
            -math.log(min(u_env, 1.0)) + 1.0,
            math.log(max(c_env / (gap * 0.25 * tol_abs), 2.0)) / gap,
        )
        tail = c_env * math.exp(-gap * z1) / gap
        err += 0.5 * tail

        curve_err = [0.0]

        def f(zs):
            u = np.exp(-zs)
            ls, es = curve.loss_vec(u, rel_tol=1e-12, abs_tol=1e-16 * max(meas, 1.0))
            w = np.exp(eta * zs)
            curve_err[0] = max(curve_err[0], float(np.max(es / np.maximum(ls, 1e-300))))
            return ls * w

        val, qerr = trapezoid_refined(
            f, z0, z1, step=0.02, rel_tol=max(rel_tol, 1e-13), abs_tol=0.1 * tol_abs
        )
        err += qerr + curve_err[0] * abs(val)
        return left + val + 0.5 * tail, err

    # crude scale guess, then the real pass
    u_sat_guess = 1.0
    v0, _ = one_pass(max(meas, 1e-6))
    value, err = one_pass(abs(v0) + 1e-300)
    return value, err


# ---------------------------------------------------------------------------
# log-periodic lattice sums (renewal-theorem limit objects)
# ---------------------------------------------------------------------------


class LogPeriodicSum:
    """Evaluator of pref * sum_n loss(e^{-(z - nP)}) e^{rate (z - nP)}.

    Periodic with period P by construction.  Both tails are certified:
    loss <= measure controls y -> -infinity at geometric rate exp(-rate*P),
    the curve envelope (c_R, p_R), valid for t <= u_max, controls
    y -> +infinity at rate exp(-(p_R - rate) P).
    """

    def __init__(self, loss_fn, measure, pref, period, rate, right_env, tol=1e-10):
        c_r, p_r, u_max = right_env
        if p_r <= rate:
            raise QuadratureNotConverged("lattice sum envelope does not decay")
        self.loss_fn = loss_fn
        self.measure = float(measure)
        self.pref = float(pref)
        self.period = float(period)
        self.rate = float(rate)
        self.c_r, self.p_r, self.u_max = float(c_r), float(p_r), float(u_max)
        self.tol = tol

    def _y_window(self, tol_abs):
        P, rate = self.period, self.rate
        gap = self.p_r - rate
        y_hi = max(
            -math.log(min(self.u_max, 1.0)) + P,
            math.log(max(self.c_r / (tol_abs * (1.0 - math.exp(-gap * P))), 2.0)) / gap,
        )
        y_lo = -max(
            math.log(max(self.measure / (tol_abs * (1.0 - math.exp(-rate * P))), 2.0)) / rate,
            P,
        )
        return y_lo, y_hi

    def eval_vec(self, zs, tol_rel=None):
        """Batched evaluation; one loss_fn call covers the whole lattice."""
        zs = np.atleast_1d(np.asarray(zs, dtype=float))
        tol_abs = 1e-13 * max(self.measure, 1.0)
        y_lo, y_hi = self._y_window(tol_abs)
        P = self.period
        n_lo = int(math.floor((np.min(zs) - y_hi) / P))
        n_hi = int(math.ceil((np.max(zs) - y_lo) / P))
        ns = np.arange(n_lo, n_hi + 1)
        out = np.empty_like(zs)
        errs = np.empty_like(zs)
        gap = self.p_r - self.rate
        chunk = max(1, 4_000_000 // max(len(ns), 1))
        for i0 in range(0, len(zs), chunk):
            zc = zs[i0 : i0 + chunk]
            ys = zc[:, None] - P * ns[None, :]
            ts = np.exp(-np.clip(ys, -700.0, 700.0))
            ls, es = self.loss_fn(ts.ravel())
            w = np.exp(self.rate * ys)
            terms = ls.reshape(ys.shape) * w
            terrs = es.reshape(ys.shape) * w
            # per-z certified tails at this chunk's own lattice edges
            edge_hi = zc - P * n_lo
            edge_lo = zc - P * n_hi
            tail_hi = self.c_r * np.exp(-gap * edge_hi) / (1.0 - math.exp(-gap * P))
            tail_lo = self.measure * np.exp(self.rate * edge_lo) / (
                1.0 - math.exp(-self.rate * P)
            )
            out[i0 : i0 + chunk] = np.sum(terms, axis=1)
            errs[i0 : i0 + chunk] = np.sum(terrs, axis=1) + tail_hi + tail_lo
        return self.pref * out, self.pref * errs

    def __call__(self, z):
        v, _ = self.eval_vec(np.array([z]))
        return float(v[0])

    def extrema(self, n_grid=2048):
        """(min, max) over one period on an n_grid-point grid."""
        zs = np.linspace(0.0, self.period, n_grid, endpoint=False)
        vals, _ = self.eval_vec(zs)
        return float(np.min(vals)), float(np.max(vals))


# ---------------------------------------------------------------------------
# the Brownian small-time law
# ---------------------------------------------------------------------------


@dataclass
class BrownianLaw:
    """Small-time behavior |G| - Q(t) ~ s(-ln t) t^exponent (or C t^exponent)."""

    exponent: float
    arithmetic: bool
    constant: float | None = None       # non-arithmetic
    profile: LogPeriodicSum | None = None  # arithmetic; period 2*rho in z
    period: float | None = None
    amplitude_max: float | None = None  # A = sup s
    amplitude_min: float | None = None  # B = inf s
    meta: dict | None = None

    def predicted_loss(self, t):
        t = np.asarray(t, dtype=float)
        if self.arithmetic:
            vals, _ = self.profile.eval_vec(-np.log(t))
            return vals * t ** self.exponent
        return self.constant * t ** self.exponent


def brownian_law(domain: IFSDomain, base_curve=None, grid=2048) -> BrownianLaw:
    """Constants of the Brownian fractal small-time law for a d=1 domain.

    Non-arithmetic ratios give a single constant
    C = mellin(loss0, (d-b)/2) / sum_j r_j^b ln(1/r_j^2); arithmetic ratios
    give the 2*rho-periodic profile s(z) plus its grid extrema A, B.
    """
    if base_curve is None:
        if domain.dim != 1:
            raise ValidationError("d=2 domains require an explicitly tabulated base curve")
        base_curve = IntervalCurve(float(domain.base.interval_length))
    dim = minkowski_dimension(domain)
    b = dim.b
    d = domain.dim
    eta = 0.5 * (d - b)
    cls = classify_log_ratios(domain)
    denom = 2.0 * math.fsum(float(r) ** b * math.log(1.0 / float(r)) for r in domain.ratios)
    meta = {"b": b, "denominator": denom, "classification": cls.tag}
    if not cls.arithmetic:
        num, nerr = heat_loss_mellin(base_curve, eta)
        return BrownianLaw(
            exponent=eta,
            arithmetic=False,
            constant=num / denom,
            meta={**meta, "numerator_bound": nerr},
        )
    rho = cls.span
    profile = LogPeriodicSum(
        loss_fn=lambda ts: base_curve.loss_vec(ts),
        measure=base_curve.measure,
        pref=2.0 * rho / denom,
        period=2.0 * rho,
        rate=eta,
        right_env=base_curve.small_time_envelope(),
    )
    lo, hi = profile.extrema(grid)
    return BrownianLaw(
        exponent=eta,
        arithmetic=True,
        profile=profile,
        period=2.0 * rho,
        amplitude_max=hi,
        amplitude_min=lo,
        meta=meta,
    )
