"""Self-similar open sets generated by similitudes.

A domain is the disjoint union G = (U_j R_j G) u G0 of scaled copies of a
base set G0 under N contraction maps R_j with exact rational ratios r_j.
This module validates the defining inequalities sum(r_j^d) < 1 < sum(r_j^(d-1)),
computes the interior Minkowski dimension as the root of sum(r_j^b) = 1,
classifies the log-ratio set {ln(1/r_j)} as arithmetic or not (exactly, via
prime factorization), and expands the word tree to finite depth.
"""

from __future__ import annotations

import itertools
import json
import math
import os
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from math import gcd

import numpy as np

from .errors import (
    DepthOverflow,
    OverlapDetected,
    RatioConditionViolated,
    ValidationError,
)
from .exact import QuadExt, fraction_exponents, parse_rational, parse_scalar

DEFAULT_WORD_CAP = 2_000_000
WORD_CAP_ENV = "FRACTAL_SHC_WORD_CAP"


def word_cap() -> int:
    raw = os.environ.get(WORD_CAP_ENV)
    return int(raw) if raw else DEFAULT_WORD_CAP


# ---------------------------------------------------------------------------
# domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Similitude:
    """Contraction x -> ratio * (rotation @ x) + translation.

    For d=1 the rotation is the sign +-1 and the translation a rational;
    for d=2 the rotation is a 2x2 orthogonal matrix over the domain's
    coordinate field and the translation a 2-vector.
    """

    ratio: Fraction
    rotation: tuple = (1,)
    translation: tuple = (Fraction(0),)

    def __post_init__(self):
        if not (0 < self.ratio < 1):
            raise ValidationError(f"ratio must lie in (0,1), got {self.ratio}")

    @property
    def dim(self) -> int:
        return 1 if len(self.translation) == 1 else 2

    def check_orthogonal(self):
        """Exact check rotation^T rotation = identity."""
        if self.dim == 1:
            if self.rotation not in ((1,), (-1,)):
                raise ValidationError(f"1d rotation must be +-1, got {self.rotation}")
            return
        m = self.rotation
        for i in range(2):
            for j in range(2):
                acc = m[0][i] * m[0][j] + m[1][i] * m[1][j]
                want = 1 if i == j else 0
                if acc != want:
                    raise ValidationError("rotation matrix is not orthogonal")

    def apply(self, point):
        """Map one point (tuple of exact scalars)."""
        if self.dim == 1:
            return (self.ratio * self.rotation[0] * point[0] + self.translation[0],)
        m = self.rotation
        x = m[0][0] * point[0] + m[0][1] * point[1]
        y = m[1][0] * point[0] + m[1][1] * point[1]
        r = self.ratio
        return (r * x + self.translation[0], r * y + self.translation[1])


@dataclass(frozen=True)
class BaseSet:
    """G0: an interval of given length (d=1) or a convex polygon (d=2).

    In one dimension only the length is stored: the Dirichlet heat content
    of a disjoint union of intervals depends on the multiset of lengths
    alone, so the embedding is immaterial.
    """

    dim: int
    interval_length: Fraction | None = None
    polygon: tuple | None = None  # tuple of (QuadExt, QuadExt) vertices, CCW

    def validate(self):
        if self.dim == 1:
            if self.interval_length is None or self.interval_length <= 0:
                raise ValidationError("interval length must be positive")
        else:
            poly = self.polygon
            if poly is None or len(poly) < 3:
                raise ValidationError("polygon needs at least 3 vertices")
            if polygon_signed_area(poly).sign() <= 0:
                raise ValidationError("polygon must be CCW with positive area")
            if not polygon_is_strictly_convex(poly):
                raise ValidationError("polygon must be simple and strictly convex")

    def measure_exact(self):
        if self.dim == 1:
            return QuadExt(self.interval_length)
        return polygon_signed_area(self.polygon)


@dataclass
class IFSDomain:
    """A validated-on-demand self-similar domain specification."""

    dim: int
    base: BaseSet
    maps: tuple[Similitude, ...]
    disjointness_depth: int = 3
    name: str = ""

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValidationError("only d in {1, 2} is supported")
        if len(self.maps) < 2:
            raise ValidationError("need at least N = 2 similitudes")
        self.maps = tuple(self.maps)

    # -- exact aggregates ---------------------------------------------------

    @property
    def ratios(self) -> tuple[Fraction, ...]:
        return tuple(m.ratio for m in self.maps)

    @property
    def contraction_sum(self) -> Fraction:
        """sum r_j^d (exact)."""
        return sum((r ** self.dim for r in self.ratios), Fraction(0))

    @property
    def boundary_sum(self) -> Fraction:
        """sum r_j^(d-1) (exact)."""
        return sum((r ** (self.dim - 1) for r in self.ratios), Fraction(0))

    def measure_exact(self):
        """|G| = |G0| / (1 - sum r_j^d), exact in the coordinate field."""
        return self.base.measure_exact() / (1 - self.contraction_sum)

    @property
    def measure(self) -> float:
        return float(self.measure_exact())

    @property
    def base_measure(self) -> float:
        return float(self.base.measure_exact())

    def tail_measure_exact(self, depth: int):
        """Exact measure of all copies deeper than ``depth`` words."""
        return self.measure_exact() * self.contraction_sum ** (depth + 1)


@dataclass(frozen=True)
class DimensionResult:
    b: float
    residual: float


@dataclass(frozen=True)
class LogRatioClass:
    """Arithmetic classification of {ln(1/r_j)}.

    In the arithmetic case every ratio is an integer power of a common
    rational span_base < 1, the span is ln(1/span_base) and the integer
    multipliers have gcd 1.
    """

    arithmetic: bool
    span: float | None = None
    span_base: Fraction | None = None
    multipliers: tuple[int, ...] | None = None

    @property
    def tag(self) -> str:
        return "arithmetic" if self.arithmetic else "non-arithmetic"


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    def add(self, name: str, passed: bool, detail: str = ""):
        self.checks.append({"name": name, "passed": bool(passed), "detail": detail})

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def raise_for_failure(self):
        for c in self.checks:
            if not c["passed"]:
                if c["name"].startswith("ratio"):
                    raise RatioConditionViolated(c["detail"])
                if c["name"].startswith("disjoint"):
                    # detail carries (depth, word pair) text from the checker
                    raise ValidationError(c["detail"])
                raise ValidationError(f"{c['name']}: {c['detail']}")

    def to_dict(self):
        return {"passed": self.passed, "checks": self.checks}


@dataclass
class WordExpansion:
    """Aggregated composite ratios per word length n = 0..depth.

    ``levels[n]`` maps the exact composite ratio r_w = r_{j1}...r_{jn} to its
    multiplicity; equal products are merged, which is what keeps arithmetic
    families (all ratios powers of one rational) linear instead of
    exponential in depth.
    """

    levels: list[dict[Fraction, int]]
    tail_measure: object  # exact scalar
    domain: IFSDomain

    @property
    def depth(self) -> int:
        return len(self.levels) - 1

    def flat(self):
        """(ratio, multiplicity) float arrays over all words up to depth."""
        rs, ms = [], []
        for lev in self.levels:
            for r, m in sorted(lev.items()):
                rs.append(float(r))
                ms.append(float(m))
        return np.array(rs), np.array(ms)


# ---------------------------------------------------------------------------
# polygon predicates (exact)
# ---------------------------------------------------------------------------


def polygon_signed_area(poly):
    twice = QuadExt(0, 0, poly[0][0].d)
    n = len(poly)
    for i in range(n):
        x1, y1 = poly[i]
        x2, y2 = poly[(i + 1) % n]
        twice = twice + (x1 * y2 - x2 * y1)
    return twice / 2


def polygon_is_strictly_convex(poly) -> bool:
    n = len(poly)
    for i in range(n):
        ax, ay = poly[i]
        bx, by = poly[(i + 1) % n]
        cx, cy = poly[(i + 2) % n]
        cross = (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)
        if cross.sign() <= 0:
            return False
    return True


def _projection_range(poly, nx, ny):
    lo = hi = poly[0][0] * nx + poly[0][1] * ny
    for x, y in poly[1:]:
        v = x * nx + y * ny
        if v < lo:
            lo = v
        elif v > hi:
            hi = v
    return lo, hi


def convex_interiors_disjoint(p, q) -> bool:
    """Exact separating-axis test: True iff int(p) and int(q) are disjoint.

    Touching along edges or vertices counts as disjoint.  Candidate axes are
    the edge normals of both polygons, which suffices because the Minkowski
    difference of two convex polygons has only those facet normals.
    """
    for poly in (p, q):
        n = len(poly)
        for i in range(n):
            ax, ay = poly[i]
            bx, by = poly[(i + 1) % n]
            nx, ny = ay - by, bx - ax
            plo, phi = _projection_range(p, nx, ny)
            qlo, qhi = _projection_range(q, nx, ny)
            if phi <= qlo or qhi <= plo:
                return True
    return False


def _float_bbox(poly):
    xs = [float(v[0]) for v in poly]
    ys = [float(v[1]) for v in poly]
    return min(xs), max(xs), min(ys), max(ys)


# ---------------------------------------------------------------------------
# operations
# ---------------------------------------------------------------------------


def validate_domain(domain: IFSDomain) -> ValidationReport:
    """Check every defining invariant; never raises, see raise_for_failure.

    d=2 disjointness is verified by exact polygon-intersection tests on all
    word images up to ``domain.disjointness_depth`` (a cheap float bounding
    box pre-filter with a generous margin only skips pairs that are far
    apart; verdicts come from exact arithmetic).
    """
    rep = ValidationReport()
    d = domain.dim

    try:
        domain.base.validate()
        rep.add("base", True)
    except ValidationError as e:
        rep.add("base", False, str(e))

    for i, m in enumerate(domain.maps):
        try:
            if m.dim != d:
                raise ValidationError(f"map {i} has dimension {m.dim}, domain has {d}")
            m.check_orthogonal()
        except ValidationError as e:
            rep.add(f"map[{i}]", False, str(e))

    s_d = domain.contraction_sum
    s_b = domain.boundary_sum
    rep.add(
        "ratio_upper",
        s_d < 1,
        f"sum r_j^d = {s_d} must be < 1" if s_d >= 1 else f"sum r_j^d = {s_d} < 1",
    )
    rep.add(
        "ratio_lower",
        s_b > 1,
        f"sum r_j^(d-1) = {s_b} must be > 1" if s_b <= 1 else f"sum r_j^(d-1) = {s_b} > 1",
    )

    if d == 2 and rep.passed:
        try:
            _check_disjoint_2d(domain, domain.disjointness_depth)
            rep.add("disjoint", True, f"depth {domain.disjointness_depth}")
        except OverlapDetected as e:
            rep.add("disjoint", False, str(e))

    return rep


def _check_disjoint_2d(domain: IFSDomain, depth: int):
    """All word images R_w G0, |w| <= depth, must have disjoint interiors."""
    pieces = [(domain.base.polygon, ())]
    prev = pieces[:]
    for level in range(1, depth + 1):
        cur = []
        for poly, word in prev:
            for j, m in enumerate(domain.maps):
                cur.append((tuple(m.apply(v) for v in poly), (j,) + word))
        pieces.extend(cur)
        prev = cur
        if len(pieces) > word_cap():
            raise DepthOverflow(f"{len(pieces)} pieces exceeds word cap")

    boxes = np.array([_float_bbox(p) for p, _ in pieces])
    margin = 1e-9
    n = len(pieces)
    # bbox prefilter, vectorized; exact SAT only on candidates
    for i in range(n):
        xi0, xi1, yi0, yi1 = boxes[i]
        sep = (
            (boxes[i + 1 :, 0] > xi1 + margin)
            | (boxes[i + 1 :, 1] < xi0 - margin)
            | (boxes[i + 1 :, 2] > yi1 + margin)
            | (boxes[i + 1 :, 3] < yi0 - margin)
        )
        for k in np.nonzero(~sep)[0]:
            j = i + 1 + k
            if not convex_interiors_disjoint(pieces[i][0], pieces[j][0]):
                raise OverlapDetected(depth, pieces[i][1], pieces[j][1])


def minkowski_dimension(domain: IFSDomain) -> DimensionResult:
    """Unique root b in (d-1, d) of sum r_j^b = 1.

    sum r_j^b is strictly decreasing in b, so bisection cannot fail under
    the ratio condition; a Newton step polishes the bracket midpoint.
    """
    ratios = [float(r) for r in domain.ratios]
    logs = [math.log(r) for r in ratios]

    def g(b):
        return math.fsum(r ** b for r in ratios) - 1.0

    lo, hi = float(domain.dim - 1), float(domain.dim)
    # the ratio condition guarantees g(lo) > 0 > g(hi)
    while hi - lo > 1e-13:
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    b = 0.5 * (lo + hi)
    deriv = math.fsum(r ** b * lg for r, lg in zip(ratios, logs))
    b -= g(b) / deriv
    return DimensionResult(b=b, residual=abs(g(b)))


def total_measure(domain: IFSDomain):
    return domain.measure_exact()


def classify_ratio_logs(values: list[Fraction]) -> LogRatioClass:
    """Classify {ln(1/q_j)} for positive rationals q_j in (0,1), exactly.

    The set is arithmetic iff all exponent vectors (over the primes of the
    q_j) are integer multiples of one primitive vector; log-independence of
    distinct primes makes this equivalent to all pairwise ratios being
    rational.
    """
    vecs = [fraction_exponents(q) for q in values]
    primes = sorted({p for v in vecs for p in v})
    mat = [[v.get(p, 0) for p in primes] for v in vecs]

    for va, vb in itertools.combinations(mat, 2):
        for (i, j) in itertools.combinations(range(len(primes)), 2):
            if va[i] * vb[j] != va[j] * vb[i]:
                return LogRatioClass(arithmetic=False)

    # all vectors parallel; build the primitive direction from the first
    w0 = mat[0]
    content = 0
    for e in w0:
        content = gcd(content, abs(e))
    prim = [e // content for e in w0]

    ks = []
    pivot = next(i for i, e in enumerate(prim) if e != 0)
    for v in mat:
        if v[pivot] % prim[pivot] != 0:
            return LogRatioClass(arithmetic=False)
        k = v[pivot] // prim[pivot]
        if any(v[i] != k * prim[i] for i in range(len(primes))):
            return LogRatioClass(arithmetic=False)
        ks.append(k)

    # orient so multipliers are positive (each ln(1/q_j) > 0)
    if ks[0] < 0:
        prim = [-e for e in prim]
        ks = [-k for k in ks]
    g = 0
    for k in ks:
        g = gcd(g, k)
    mult = tuple(k // g for k in ks)

    base = Fraction(1)
    for p, e in zip(primes, prim):
        base *= Fraction(p) ** (e * g)
    # base is the common ratio q with q_j = base^(m_j); span = ln(1/base)
    span = -math.log(float(base)) if base < 1 else math.log(float(1 / base))
    if base > 1:
        base = 1 / base
    return LogRatioClass(
        arithmetic=True, span=span, span_base=base, multipliers=mult
    )


def classify_log_ratios(domain: IFSDomain) -> LogRatioClass:
    return classify_ratio_logs(list(domain.ratios))


def expand_words(domain: IFSDomain, depth: int) -> WordExpansion:
    """Aggregated composite-ratio multisets for n = 0..depth.

    tail_measure(depth) = |G| * (sum r_j^d)^(depth+1) is the exact measure
    of every copy strictly deeper than ``depth``.
    """
    if depth < 0:
        raise ValidationError("depth must be >= 0")
    cap = word_cap()
    levels: list[dict[Fraction, int]] = [{Fraction(1): 1}]
    total = 1
    for _ in range(depth):
        nxt: dict[Fraction, int] = {}
        for r, mult in levels[-1].items():
            for rj in domain.ratios:
                key = r * rj
                nxt[key] = nxt.get(key, 0) + mult
        levels.append(nxt)
        total += len(nxt)
        if total > cap:
            raise DepthOverflow(
                f"aggregate word count {total} exceeds cap {cap} at depth {len(levels)-1}"
            )
    return WordExpansion(
        levels=levels, tail_measure=domain.tail_measure_exact(depth), domain=domain
    )


# ---------------------------------------------------------------------------
# JSON ingestion
# ---------------------------------------------------------------------------


def domain_from_dict(spec: dict, name: str = "") -> IFSDomain:
    d = int(spec["d"])
    radicand = int(spec.get("radicand", 1))
    if d == 1:
        base = BaseSet(dim=1, interval_length=parse_rational(spec["base"]["interval_length"]))
        maps = []
        for m in spec["maps"]:
            rot = (int(m.get("rotation", 1)),)
            tr = (parse_rational(m.get("translation", "0")),)
            maps.append(Similitude(ratio=parse_rational(m["ratio"]), rotation=rot, translation=tr))
    else:
        verts = tuple(
            (parse_scalar(v[0], radicand), parse_scalar(v[1], radicand))
            for v in spec["base"]["polygon"]
        )
        base = BaseSet(dim=2, polygon=verts)
        maps = []
        for m in spec["maps"]:
            rot_rows = m.get("rotation", [["1", "0"], ["0", "1"]])
            rot = tuple(
                tuple(parse_scalar(e, radicand) for e in row) for row in rot_rows
            )
            tr_row = m.get("translation", ["0", "0"])
            tr = tuple(parse_scalar(e, radicand) for e in tr_row)
            maps.append(Similitude(ratio=parse_rational(m["ratio"]), rotation=rot, translation=tr))
    return IFSDomain(
        dim=d,
        base=base,
        maps=tuple(maps),
        disjointness_depth=int(spec.get("disjointness_depth", 3)),
        name=name or spec.get("name", ""),
    )


BUNDLED = ("cantor", "gasket", "nonarith_3_4")


def load_domain(path_or_name: str) -> IFSDomain:
    """Load a domain spec JSON from a path or a bundled name."""
    name = str(path_or_name)
    if name in BUNDLED:
        text = resources.files("fractalheat").joinpath(f"domains/{name}.json").read_text()
        return domain_from_dict(json.loads(text), name=name)
    with open(name, "r") as fh:
        return domain_from_dict(json.load(fh), name=os.path.basename(name))
