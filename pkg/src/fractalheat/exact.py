"""Exact scalar arithmetic over Q and real quadratic extensions Q(sqrt(D)).

Geometric inputs (contraction ratios, polygon vertices, similitude entries)
are kept exact so that every validation predicate -- the ratio condition,
pairwise disjointness of word images, arithmeticity of log-ratios -- is
decided without floating point.  Plain rationals use ``fractions.Fraction``;
planar domains whose natural coordinates involve a single square root
(e.g. an equilateral triangle needs sqrt(3)) use :class:`QuadExt`.
"""

from __future__ import annotations

from fractions import Fraction
from math import sqrt


def parse_rational(text) -> Fraction:
    """Parse "p/q" or "p" (also accepts ints / Fractions passthrough)."""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, str):
        return Fraction(text.strip())
    raise ValueError(f"not an exact rational: {text!r}")


def is_square_free(n: int) -> bool:
    if n <= 0:
        return False
    k = 2
    while k * k <= n:
        if n % (k * k) == 0:
            return False
        k += 1
    return True


class QuadExt:
    """Element a + b*sqrt(d) of the real quadratic field Q(sqrt(d)).

    ``d`` is a square-free positive integer; ``d == 1`` degenerates to a
    plain rational (b is folded into a).  Sign determination, and hence all
    comparisons, are exact.
    """

    __slots__ = ("a", "b", "d")

    def __init__(self, a, b=0, d=1):
        a = Fraction(a)
        b = Fraction(b)
        if d == 1:
            a, b = a + b, Fraction(0)
        if d < 1 or not is_square_free(int(d)):
            raise ValueError(f"radicand must be square-free positive, got {d}")
        self.a = a
        self.b = b
        self.d = int(d)

    # -- helpers -----------------------------------------------------------

    def _coerce(self, other) -> "QuadExt":
        if isinstance(other, QuadExt):
            if self.b != 0 and other.b != 0 and self.d != other.d:
                raise ValueError("mixed radicands")
            return other
        if isinstance(other, (int, Fraction)):
            return QuadExt(other, 0, self.d)
        return NotImplemented

    def _field(self, other: "QuadExt") -> int:
        return self.d if self.b != 0 else (other.d if other.b != 0 else self.d)

    def sign(self) -> int:
        a, b, d = self.a, self.b, self.d
        if b == 0:
            return (a > 0) - (a < 0)
        if a == 0:
            return (b > 0) - (b < 0)
        if a > 0 and b > 0:
            return 1
        if a < 0 and b < 0:
            return -1
        # opposite signs: compare a^2 against d*b^2
        lhs, rhs = a * a, d * b * b
        if lhs == rhs:  # a = -b*sqrt(d) impossible for square-free d>1
            return 0
        return (1 if a > 0 else -1) if lhs > rhs else (1 if b > 0 else -1)

    # -- arithmetic ---------------------------------------------------------

    def __add__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return QuadExt(self.a + o.a, self.b + o.b, self._field(o))

    __radd__ = __add__

    def __neg__(self):
        return QuadExt(-self.a, -self.b, self.d)

    def __sub__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return self + (-o)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        d = self._field(o)
        return QuadExt(
            self.a * o.a + d * self.b * o.b,
            self.a * o.b + self.b * o.a,
            d,
        )

    __rmul__ = __mul__

    def __truediv__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        d = self._field(o)
        norm = o.a * o.a - d * o.b * o.b
        if norm == 0:
            raise ZeroDivisionError("division by zero in Q(sqrt(d))")
        # 1/(a + b sqrt d) = (a - b sqrt d) / (a^2 - d b^2)
        inv = QuadExt(o.a / norm, -o.b / norm, d)
        return self * inv

    def __rtruediv__(self, other):
        return QuadExt(other, 0, self.d) / self

    # -- comparisons (exact) -------------------------------------------------

    def __eq__(self, other):
        o = self._coerce(other)
        if o is NotImplemented:
            return NotImplemented
        return (self - o).sign() == 0

    def __lt__(self, other):
        return (self - self._coerce(other)).sign() < 0

    def __le__(self, other):
        return (self - self._coerce(other)).sign() <= 0

    def __gt__(self, other):
        return (self - self._coerce(other)).sign() > 0

    def __ge__(self, other):
        return (self - self._coerce(other)).sign() >= 0

    def __hash__(self):
        if self.b == 0:
            return hash(self.a)
        return hash((self.a, self.b, self.d))

    def __float__(self):
        return float(self.a) + float(self.b) * sqrt(self.d)

    def __repr__(self):
        if self.b == 0:
            return f"{self.a}"
        return f"({self.a} + {self.b}*sqrt({self.d}))"

    def is_rational(self) -> bool:
        return self.b == 0

    def as_fraction(self) -> Fraction:
        if self.b != 0:
            raise ValueError(f"{self!r} is irrational")
        return self.a


def parse_scalar(value, radicand: int = 1) -> QuadExt:
    """Parse a JSON scalar: "p/q" or {"rat": "p/q", "irr": "r/s"}."""
    if isinstance(value, QuadExt):
        return value
    if isinstance(value, dict):
        rat = parse_rational(value.get("rat", "0"))
        irr = parse_rational(value.get("irr", "0"))
        return QuadExt(rat, irr, radicand)
    return QuadExt(parse_rational(value), 0, radicand)


def factorize(n: int) -> dict[int, int]:
    """Prime factorization by trial division (inputs here are small)."""
    if n <= 0:
        raise ValueError("factorize expects a positive integer")
    out: dict[int, int] = {}
    for p in (2, 3):
        while n % p == 0:
            out[p] = out.get(p, 0) + 1
            n //= p
    k = 5
    while k * k <= n:
        for p in (k, k + 2):
            while n % p == 0:
                out[p] = out.get(p, 0) + 1
                n //= p
        k += 6
    if n > 1:
        out[n] = out.get(n, 0) + 1
    return out


def fraction_exponents(q: Fraction) -> dict[int, int]:
    """Exponent vector of a positive rational over its prime support."""
    if q <= 0:
        raise ValueError("need a positive rational")
    vec = dict(factorize(q.numerator))
    for p, e in factorize(q.denominator).items():
        vec[p] = vec.get(p, 0) - e
    return {p: e for p, e in vec.items() if e != 0}
