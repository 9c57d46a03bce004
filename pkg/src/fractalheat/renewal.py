"""Renewal equation f = L f + phi with L f(z) = sum_j c_j f(z - gamma_j).

The truncated series solution f(z) = sum_n L^n phi(z) is evaluated by
dynamic programming over *aggregated* shift sums: shifts are given as
gamma_j = scale * ln(1/q_j) with exact rational bases q_j in (0, 1), so a
word's total shift is determined by the exact rational product of its
bases.  Equal products are merged, which collapses the naive N^n word
explosion to a lattice in the arithmetic case and to a slowly growing set
of exact values otherwise.

The two renewal-theorem limits (z -> +infinity):

* non-arithmetic:  integral(phi) / sum_j c_j gamma_j
* arithmetic, span g:  (g / sum_j c_j gamma_j) * sum_k phi(z - k g)

are evaluated with tails certified by the source's exponential-decay
certificate |phi(z)| <= c1 exp(-c2 |z|).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
from scipy.integrate import quad

from .errors import (
    CertificateViolated,
    QuadratureNotConverged,
    ToleranceUnreachable,
    ValidationError,
    WrongClassification,
)
from .geometry import LogRatioClass, classify_ratio_logs, word_cap


@dataclass
class RenewalProblem:
    """Weights c_j (sum 1), shifts scale * ln(1/q_j), source phi.

    ``phi`` must be vectorized (ndarray -> ndarray); ``decay = (c1, c2)``
    certifies |phi(z)| <= c1 exp(-c2 |z|), spot-checked on construction.
    """

    weights: tuple
    shift_bases: tuple          # exact rationals in (0,1), distinct
    phi: callable
    decay: tuple                # (c1, c2), both > 0
    shift_scale: float = 1.0
    classification: LogRatioClass = field(init=False)

    def __post_init__(self):
        w = [float(c) for c in self.weights]
        if any(c <= 0 for c in w):
            raise ValidationError("weights must be positive")
        if abs(math.fsum(w) - 1.0) > 1e-14:
            raise ValidationError(f"weights must sum to 1, got {math.fsum(w)!r}")
        qs = [Fraction(q) for q in self.shift_bases]
        if len(set(qs)) != len(qs):
            raise ValidationError("shifts must be distinct")
        if any(not (0 < q < 1) for q in qs):
            raise ValidationError("shift bases must lie in (0,1)")
        if self.shift_scale <= 0:
            raise ValidationError("shift scale must be positive")
        c1, c2 = self.decay
        if c1 <= 0 or c2 <= 0:
            raise ValidationError("decay certificate constants must be positive")
        self.weights = tuple(w)
        self.shift_bases = tuple(qs)
        self.classification = classify_ratio_logs(list(qs))
        self._spot_check_certificate()

    def _spot_check_certificate(self):
        c1, c2 = self.decay
        zs = np.linspace(-30.0, 30.0, 121)
        vals = np.abs(np.asarray(self.phi(zs), dtype=float))
        env = c1 * np.exp(-c2 * np.abs(zs)) * (1.0 + 1e-9) + 1e-300
        if np.any(vals > env):
            k = int(np.argmax(vals - env))
            raise CertificateViolated(
                f"|phi({zs[k]})| = {vals[k]} exceeds {env[k]}"
            )

    @property
    def shifts(self) -> tuple:
        return tuple(
            self.shift_scale * math.log(1.0 / float(q)) for q in self.shift_bases
        )

    @property
    def mean_shift(self) -> float:
        return math.fsum(c * g for c, g in zip(self.weights, self.shifts))

    @property
    def span(self) -> float | None:
        if not self.classification.arithmetic:
            return None
        return self.shift_scale * self.classification.span


def _base_log(q: Fraction) -> float:
    # ln q for possibly huge-denominator rationals, via num/den separately
    return math.log(q.numerator) - math.log(q.denominator)


def solve_series(problem: RenewalProblem, z, tol=1e-10):
    """Evaluate f(z) = sum_n L^n phi(z); returns (value, certified bound).

    Levels are added until the certificate tail (all level weights are 1)
    drops below tol: levels with n * gamma_min > z contribute at most
    c1 exp(-c2 (n gamma_min - z)), a geometric series.
    """
    z = float(z)
    c1, c2 = problem.decay
    scale = problem.shift_scale
    gammas = problem.shifts
    g_min = min(gammas)
    ratio = math.exp(-c2 * g_min)

    level: dict[Fraction, tuple[float, float]] = {Fraction(1): (1.0, 0.0)}
    acc = 0.0
    n = 0
    cap = word_cap()
    while True:
        zs = np.array([z - scale * (-lq) for (_, lq) in level.values()])
        ws = np.array([w for (w, _) in level.values()])
        acc += float(np.dot(ws, np.asarray(problem.phi(zs), dtype=float)))
        n += 1
        if n * g_min > z:
            tail = c1 * math.exp(-c2 * (n * g_min - z)) / (1.0 - ratio)
            if tail < tol:
                return acc, tail + 1e-14 * abs(acc)
        if n > 20_000:
            raise ToleranceUnreachable("renewal series level cap hit", value=acc)
        nxt: dict[Fraction, tuple[float, float]] = {}
        for q, (w, lq) in level.items():
            for cj, qj in zip(problem.weights, problem.shift_bases):
                key = q * qj
                if key in nxt:
                    w0, l0 = nxt[key]
                    nxt[key] = (w0 + w * cj, l0)
                else:
                    nxt[key] = (w * cj, lq + _base_log(qj))
        if len(nxt) > cap:
            raise ToleranceUnreachable("renewal aggregation cap hit", value=acc)
        level = nxt


def limit_nonarithmetic(problem: RenewalProblem, tol=1e-10):
    """Renewal limit integral(phi) / sum_j c_j gamma_j (non-arithmetic)."""
    if problem.classification.arithmetic:
        raise WrongClassification("problem is arithmetic; use limit_arithmetic")
    c1, c2 = problem.decay
    z_max = math.log(max(c1 / (c2 * 1e-16), 10.0)) / c2
    val, est = quad(
        lambda x: float(problem.phi(np.array([x]))[0]),
        -z_max,
        z_max,
        epsabs=1e-13,
        epsrel=1e-12,
        limit=400,
        points=[0.0],
    )
    tail = 2.0 * c1 * math.exp(-c2 * z_max) / c2
    err = 10.0 * est + tail
    denom = problem.mean_shift
    if err > max(tol * abs(val), 1e-11):
        raise QuadratureNotConverged(
            "phi integral not converged", value=val / denom, bound=err / denom
        )
    return val / denom


def limit_arithmetic(problem: RenewalProblem, z, tol=1e-12):
    """Renewal limit (g / sum c_j gamma_j) sum_k phi(z - k g), arithmetic."""
    if not problem.classification.arithmetic:
        raise WrongClassification("problem is non-arithmetic; use limit_nonarithmetic")
    g = problem.span
    c1, c2 = problem.decay
    z = float(z)
    # certified bilateral truncation: |phi(z - kg)| <= c1 e^{-c2 (|k| g - |z|)}
    k_reach = (
        int(
            math.ceil(
                (math.log(max(c1, 1.0) / (tol * (1 - math.exp(-c2 * g)))) / c2 + abs(z)) / g
            )
        )
        + 2
    )
    ks = np.arange(-k_reach, k_reach + 1)
    vals = np.asarray(problem.phi(z - g * ks), dtype=float)
    pref = g / problem.mean_shift
    return pref * float(np.sum(vals))
