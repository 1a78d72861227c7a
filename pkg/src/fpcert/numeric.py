"""Exact dyadic arithmetic and interval arithmetic with outward rounding.

Dyadic numbers (m * 2**e with arbitrary-precision m) are the endpoint type of
every interval the engine manipulates.  All operations here are exact except
where an explicit working precision is passed, in which case results are
rounded *outward* so that enclosures never lose soundness.
"""

from __future__ import annotations

from fractions import Fraction

__all__ = [
    "Dyadic",
    "Interval",
    "EMPTY",
    "DivisionByZeroRange",
    "ExponentRangeError",
    "dyadic_from_rational",
    "interval_arith",
    "interval_intersect",
    "interval_hull",
    "render_decimal",
]

# Exponents are capped so arithmetic stays total; hitting the cap is a bug in
# the input, not something to saturate silently.
EXPONENT_LIMIT = 1 << 30


class ExponentRangeError(ArithmeticError):
    """A dyadic exponent left the supported range (|e| > 2**30)."""


class DivisionByZeroRange(ZeroDivisionError):
    """Interval division by a range containing zero; the evaluation path is unusable."""


class Dyadic:
    """An exact binary rational m * 2**e, kept canonical (m odd, or m = e = 0)."""

    __slots__ = ("m", "e")

    def __init__(self, m: int, e: int = 0):
        if m == 0:
            self.m = 0
            self.e = 0
            return
        # strip trailing zero bits so equal values have equal representation
        if m & 1 == 0:
            shift = (m & -m).bit_length() - 1
            m >>= shift
            e += shift
        if not -EXPONENT_LIMIT <= e <= EXPONENT_LIMIT:
            raise ExponentRangeError(f"exponent {e} out of range")
        self.m = m
        self.e = e

    @staticmethod
    def zero() -> "Dyadic":
        return _ZERO

    @staticmethod
    def one() -> "Dyadic":
        return _ONE

    @staticmethod
    def power_of_two(e: int) -> "Dyadic":
        return Dyadic(1, e)

    @staticmethod
    def from_int(n: int) -> "Dyadic":
        return Dyadic(n, 0)

    def is_zero(self) -> bool:
        return self.m == 0

    @property
    def sign(self) -> int:
        return (self.m > 0) - (self.m < 0)

    def to_fraction(self) -> Fraction:
        if self.e >= 0:
            return Fraction(self.m << self.e)
        return Fraction(self.m, 1 << -self.e)

    def bit_length(self) -> int:
        """Number of significant mantissa bits (0 for zero)."""
        return abs(self.m).bit_length()

    # magnitude exponent: value v satisfies 2**(mag-1) <= |v| < 2**mag
    def mag(self) -> int:
        if self.m == 0:
            raise ValueError("mag of zero")
        return abs(self.m).bit_length() + self.e

    def is_power_of_two(self) -> bool:
        return abs(self.m) == 1

    def _cmp(self, other: "Dyadic") -> int:
        sa, sb = self.sign, other.sign
        if sa != sb:
            return -1 if sa < sb else 1
        if sa == 0:
            return 0
        # align exponents with shifts; both nonzero and same sign
        ea, eb = self.e, other.e
        if ea >= eb:
            lhs = self.m << (ea - eb)
            rhs = other.m
        else:
            lhs = self.m
            rhs = other.m << (eb - ea)
        return (lhs > rhs) - (lhs < rhs)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dyadic):
            return NotImplemented
        return self.m == other.m and self.e == other.e

    def __hash__(self) -> int:
        return hash((self.m, self.e))

    def __lt__(self, other: "Dyadic") -> bool:
        return self._cmp(other) < 0

    def __le__(self, other: "Dyadic") -> bool:
        return self._cmp(other) <= 0

    def __gt__(self, other: "Dyadic") -> bool:
        return self._cmp(other) > 0

    def __ge__(self, other: "Dyadic") -> bool:
        return self._cmp(other) >= 0

    def __neg__(self) -> "Dyadic":
        return Dyadic(-self.m, self.e)

    def __abs__(self) -> "Dyadic":
        return Dyadic(abs(self.m), self.e)

    def __add__(self, other: "Dyadic") -> "Dyadic":
        if self.m == 0:
            return other
        if other.m == 0:
            return self
        ea, eb = self.e, other.e
        if ea >= eb:
            return Dyadic((self.m << (ea - eb)) + other.m, eb)
        return Dyadic(self.m + (other.m << (eb - ea)), ea)

    def __sub__(self, other: "Dyadic") -> "Dyadic":
        return self + (-other)

    def __mul__(self, other: "Dyadic") -> "Dyadic":
        if self.m == 0 or other.m == 0:
            return _ZERO
        return Dyadic(self.m * other.m, self.e + other.e)

    def scale2(self, k: int) -> "Dyadic":
        """Exact multiplication by 2**k."""
        if self.m == 0:
            return self
        return Dyadic(self.m, self.e + k)

    def round(self, precision: int, direction: str) -> "Dyadic":
        """Round to at most `precision` mantissa bits, toward -inf ('down') or +inf ('up')."""
        if self.m == 0 or abs(self.m).bit_length() <= precision:
            return self
        shift = abs(self.m).bit_length() - precision
        neg = self.m < 0
        q, r = divmod(abs(self.m), 1 << shift)
        if r and ((direction == "up") != neg):
            q += 1
        return Dyadic(-q if neg else q, self.e + shift)

    def cmp_fraction(self, num: int, den: int) -> int:
        """Exact comparison of self against the rational num/den (den > 0)."""
        if self.e >= 0:
            lhs = (self.m << self.e) * den
            rhs = num
        else:
            lhs = self.m * den
            rhs = num << -self.e
        return (lhs > rhs) - (lhs < rhs)

    def __float__(self) -> float:
        # only for diagnostics; may overflow for huge exponents
        try:
            return self.m * 2.0 ** self.e
        except OverflowError:
            return float("inf") if self.m > 0 else float("-inf")

    def __repr__(self) -> str:
        return f"Dyadic({self.m}, {self.e})"

    def __str__(self) -> str:
        return f"{self.m}b{self.e}"


_ZERO = object.__new__(Dyadic)
_ZERO.m = 0
_ZERO.e = 0
_ONE = object.__new__(Dyadic)
_ONE.m = 1
_ONE.e = 0


def dyadic_from_rational(q: Fraction, precision: int, direction: str) -> Dyadic:
    """Nearest dyadic with at most `precision` mantissa bits on the given side of q.

    Exact (equal to q) whenever q is a dyadic that fits in `precision` bits.
    """
    if precision < 2:
        raise ValueError("precision must be >= 2")
    if direction not in ("down", "up"):
        raise ValueError(f"bad direction {direction!r}")
    num, den = q.numerator, q.denominator
    if num == 0:
        return _ZERO
    neg = num < 0
    num = abs(num)
    # scale num/den so that the integer quotient has exactly `precision` bits
    e = num.bit_length() - den.bit_length() - precision
    # adjust: we want 2**(precision-1) <= (num / den) / 2**e < 2**precision
    if e >= 0:
        n, d = num, den << e
    else:
        n, d = num << -e, den
    quot, rem = divmod(n, d)
    if quot.bit_length() > precision:
        e += 1
        quot, rem2 = divmod(quot, 2)
        rem = rem2 * d + rem  # nonzero iff anything was lost overall
    # round according to direction (on the absolute value, so flip for negatives)
    if rem and ((direction == "up") != neg):
        quot += 1
    return Dyadic(-quot if neg else quot, e)


class Interval:
    """Closed interval [lo, hi] with dyadic endpoints, lo <= hi."""

    __slots__ = ("lo", "hi")

    def __init__(self, lo: Dyadic, hi: Dyadic):
        if lo > hi:
            raise ValueError(f"inverted interval [{lo}, {hi}]")
        self.lo = lo
        self.hi = hi

    @staticmethod
    def point(d: Dyadic) -> "Interval":
        return Interval(d, d)

    @staticmethod
    def from_ints(lo: int, hi: int) -> "Interval":
        return Interval(Dyadic(lo), Dyadic(hi))

    def is_point(self) -> bool:
        return self.lo == self.hi

    def contains(self, d: Dyadic) -> bool:
        return self.lo <= d <= self.hi

    def contains_zero(self) -> bool:
        return self.lo.sign <= 0 <= self.hi.sign

    def contains_interval(self, other: "Interval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi

    def strictly_inside(self, other: "Interval") -> bool:
        """self is a strict subset of other (tighter on at least one side)."""
        return other.contains_interval(self) and (self.lo > other.lo or self.hi < other.hi)

    def abs_lower(self) -> Dyadic:
        """Greatest d >= 0 with d <= |x| for all x in the interval."""
        if self.lo.sign > 0:
            return self.lo
        if self.hi.sign < 0:
            return -self.hi
        return _ZERO

    def abs_upper(self) -> Dyadic:
        a, b = abs(self.lo), abs(self.hi)
        return a if a > b else b

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Interval):
            return NotImplemented
        return self.lo == other.lo and self.hi == other.hi

    def __hash__(self) -> int:
        return hash((self.lo, self.hi))

    def __repr__(self) -> str:
        return f"Interval({self.lo}, {self.hi})"

    def __str__(self) -> str:
        return f"[{self.lo}, {self.hi}]"


class _Empty:
    """Distinct marker for an empty intersection (a contradiction witness)."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "EMPTY"


EMPTY = _Empty()


def _out(lo: Dyadic, hi: Dyadic, precision: int) -> Interval:
    return Interval(lo.round(precision, "down"), hi.round(precision, "up"))


def iadd(a: Interval, b: Interval, precision: int) -> Interval:
    return _out(a.lo + b.lo, a.hi + b.hi, precision)


def isub(a: Interval, b: Interval, precision: int) -> Interval:
    return _out(a.lo - b.hi, a.hi - b.lo, precision)


def imul(a: Interval, b: Interval, precision: int) -> Interval:
    products = (a.lo * b.lo, a.lo * b.hi, a.hi * b.lo, a.hi * b.hi)
    return _out(min(products), max(products), precision)


def isquare(a: Interval, precision: int) -> Interval:
    """Enclosure of x*x for x in a; tighter than imul(a, a) around zero."""
    lo_abs = a.abs_lower()
    hi_abs = a.abs_upper()
    return _out(lo_abs * lo_abs, hi_abs * hi_abs, precision)


def _div_endpoint(num: Dyadic, den: Dyadic, direction: str, precision: int) -> Dyadic:
    # exact rational num/den rounded directionally to `precision` bits
    n = num.m * (1 << max(0, num.e - den.e)) if num.e >= den.e else num.m
    d = den.m * (1 << max(0, den.e - num.e)) if den.e > num.e else den.m
    if d < 0:
        n, d = -n, -d
    return dyadic_from_rational(Fraction(n, d), precision, direction)


def idiv(a: Interval, b: Interval, precision: int) -> Interval:
    if b.contains_zero():
        raise DivisionByZeroRange(f"division by {b} containing zero")
    quotients_lo = []
    quotients_hi = []
    for num in (a.lo, a.hi):
        for den in (b.lo, b.hi):
            quotients_lo.append(_div_endpoint(num, den, "down", precision))
            quotients_hi.append(_div_endpoint(num, den, "up", precision))
    return Interval(min(quotients_lo), max(quotients_hi))


def ineg(a: Interval) -> Interval:
    return Interval(-a.hi, -a.lo)


def iabs(a: Interval) -> Interval:
    return Interval(a.abs_lower(), a.abs_upper())


def interval_arith(op: str, a: Interval, b: Interval, precision: int) -> Interval:
    """Inclusion-sound interval op with endpoints outward-rounded to `precision` bits."""
    if op == "add":
        return iadd(a, b, precision)
    if op == "sub":
        return isub(a, b, precision)
    if op == "mul":
        return imul(a, b, precision)
    if op == "div":
        return idiv(a, b, precision)
    raise ValueError(f"unknown op {op!r}")


def interval_intersect(a: Interval, b: Interval):
    """Exact intersection; EMPTY when the sets are disjoint."""
    lo = a.lo if a.lo >= b.lo else b.lo
    hi = a.hi if a.hi <= b.hi else b.hi
    if lo > hi:
        return EMPTY
    return Interval(lo, hi)


def interval_hull(a: Interval, b: Interval) -> Interval:
    lo = a.lo if a.lo <= b.lo else b.lo
    hi = a.hi if a.hi >= b.hi else b.hi
    return Interval(lo, hi)


def rel_compose(i1: Interval, i2: Interval, precision: int) -> Interval:
    """Enclosure of (1+x)(1+y)-1 over x in i1, y in i2."""
    return iadd(iadd(i1, i2, precision), imul(i1, i2, precision), precision)


def rel_invert(i: Interval, precision: int) -> Interval:
    """Enclosure of 1/(1+x)-1 over x in i; requires i.lo > -1."""
    if i.lo <= Dyadic(-1):
        raise ValueError("relative error must stay above -1")
    one = Interval.point(_ONE)
    return isub(idiv(one, iadd(one, i, precision), precision), one, precision)


# ---------------------------------------------------------------------------
# decimal rendering
# ---------------------------------------------------------------------------


def _decimal_digits(d: Dyadic, sig: int, roundup: bool) -> tuple[int, int, bool]:
    """Return (digits, exp10, exact) with value(d) ~ digits * 10**exp10, |digits| < 10**sig."""
    assert d.m != 0
    neg = d.m < 0
    m, e = abs(d.m), d.e
    # estimate the decimal exponent of |d| then correct
    k = (m.bit_length() + e) * 30103 // 100000  # log10(2) ~ 0.30103, bias safe
    while True:
        # want: digits = floor(|d| * 10**(sig-1-k)) having exactly sig digits
        shift10 = sig - 1 - k
        num = m * 10**shift10 if shift10 >= 0 else m
        den = 1 if shift10 >= 0 else 10**-shift10
        if e >= 0:
            num <<= e
        else:
            den <<= -e
        digits, rem = divmod(num, den)
        if digits >= 10**sig:
            k += 1
            continue
        if digits < 10 ** (sig - 1):
            k -= 1
            continue
        break
    exact = rem == 0
    if rem and (roundup != neg):
        digits += 1
        if digits == 10**sig:
            digits //= 10
            k += 1
    return (-digits if neg else digits, k - (sig - 1), exact)


def render_decimal(d: Dyadic, direction: str, sig: int = 6) -> str:
    """Decimal string with `sig` significant digits, rounded outward per `direction`.

    `direction` is 'down' (result <= value) or 'up' (result >= value), so a
    printed interval [render(lo,'down'), render(hi,'up')] still encloses the set.
    """
    if d.m == 0:
        return "0"
    digits, exp10, _ = _decimal_digits(d, sig, roundup=(direction == "up"))
    neg = digits < 0
    s = str(abs(digits)).rstrip("0") or "0"
    # decimal point position relative to first digit
    point = len(str(abs(digits))) + exp10  # value = 0.s * 10**point
    if 0 < point <= sig + 1 and point >= len(s):
        text = s + "0" * (point - len(s))
    elif 0 < point <= sig + 1:
        text = s[:point] + "." + s[point:]
    elif -3 < point <= 0:
        text = "0." + "0" * -point + s
    else:
        mant = s[0] if len(s) == 1 else s[0] + "." + s[1:]
        text = f"{mant}e{point - 1:+03d}"
    return "-" + text if neg else text
