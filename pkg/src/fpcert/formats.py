"""IEEE-style rounding operators as exact functions on dyadic numbers.

A format has a mantissa width p and a minimal ulp exponent e_min; the
representable set is {m * 2**e : |m| < 2**p, e >= e_min}.  There is no upper
exponent bound in the model, but crossing the hardware overflow threshold
raises instead of silently diverging from IEEE behaviour.
"""

from __future__ import annotations

from .numeric import Dyadic, Interval

__all__ = ["FpFormat", "FORMATS", "RoundingOverflowError", "round_value",
           "round_enclosure", "rel_error_bound", "abs_error_bound", "is_representable"]

MODES = ("ne", "zr", "up", "dn")


class RoundingOverflowError(ArithmeticError):
    """Rounded magnitude crossed the format's overflow threshold."""


class FpFormat:
    __slots__ = ("name", "p", "e_min", "mode", "max_exp")

    def __init__(self, name: str, p: int, e_min: int, mode: str, max_exp: int):
        if p < 2:
            raise ValueError("precision must be >= 2")
        if mode not in MODES:
            raise ValueError(f"bad rounding mode {mode!r}")
        self.name = name
        self.p = p
        self.e_min = e_min
        self.mode = mode
        self.max_exp = max_exp  # overflow iff |result| >= 2**max_exp

    def with_mode(self, mode: str) -> "FpFormat":
        return FpFormat(self.name, self.p, self.e_min, mode, self.max_exp)

    def smallest_normal_exp(self) -> int:
        # |x| >= 2**(e_min + p - 1) guarantees a normal result
        return self.e_min + self.p - 1

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, FpFormat):
            return NotImplemented
        return (self.p, self.e_min, self.mode, self.max_exp) == (
            other.p, other.e_min, other.mode, other.max_exp)

    def __hash__(self) -> int:
        return hash((self.p, self.e_min, self.mode, self.max_exp))

    def __repr__(self) -> str:
        return f"float<{self.name},{self.mode}>"


def make_format(name: str, gmode: str) -> FpFormat:
    if name == "ieee_32":
        return FpFormat(name, 24, -149, gmode, 128)
    if name == "ieee_64":
        return FpFormat(name, 53, -1074, gmode, 1024)
    raise ValueError(f"unknown format {name!r}")


FORMATS = ("ieee_32", "ieee_64")


def round_value(f: FpFormat, x: Dyadic) -> Dyadic:
    """Correctly rounded value of x in format f under f.mode (ties to even for ne)."""
    if x.m == 0:
        return x
    neg = x.m < 0
    m, e = abs(x.m), x.e
    ulp_exp = max(f.e_min, m.bit_length() + e - f.p)
    shift = ulp_exp - e
    if shift <= 0:
        result = x  # already representable (mantissa fits, exponent in range)
    else:
        q, r = divmod(m, 1 << shift)
        if r:
            mode = f.mode
            if mode == "ne":
                half = 1 << (shift - 1)
                if r > half or (r == half and q & 1):
                    q += 1
            elif mode == "up":
                if not neg:
                    q += 1
            elif mode == "dn":
                if neg:
                    q += 1
            # zr: truncate
        result = Dyadic(-q if neg else q, ulp_exp)
    if result.m != 0 and result.mag() > f.max_exp:
        raise RoundingOverflowError(f"|{x}| overflows {f!r}")
    return result


def is_representable(f: FpFormat, x: Dyadic) -> bool:
    if x.m == 0:
        return True
    return x.bit_length() <= f.p and x.e >= f.e_min and x.mag() <= f.max_exp


def round_enclosure(f: FpFormat, i: Interval) -> Interval:
    """Image enclosure [round(lo), round(hi)]; sound because rounding is monotone."""
    return Interval(round_value(f, i.lo), round_value(f, i.hi))


def rel_error_bound(f: FpFormat) -> Interval:
    """Enclosure of (round(x)-x)/x, valid when the rounding stays in the normal
    range, and unconditionally for additions of values representable in f."""
    k = -f.p if f.mode == "ne" else 1 - f.p
    b = Dyadic.power_of_two(k)
    return Interval(-b, b)


def _half_ulp_exp(f: FpFormat, bound: Dyadic) -> int:
    # exponent of the worst-case half-ulp for |x| <= bound
    if bound.is_power_of_two():
        binade = bound.mag() - 2  # values below an exact power sit one binade down
    else:
        binade = bound.mag() - 1
    return max(f.e_min - 1, binade - f.p + 1)


def abs_error_bound(f: FpFormat, i: Interval) -> Interval:
    """Enclosure of round(x)-x valid for every x in i."""
    hi = i.abs_upper()
    if hi.m == 0:
        return Interval.point(Dyadic.zero())
    he = _half_ulp_exp(f, hi)
    if f.mode == "ne":
        b = Dyadic.power_of_two(he)
        return Interval(-b, b)
    u = Dyadic.power_of_two(he + 1)
    if f.mode == "dn":
        return Interval(-u, Dyadic.zero())
    if f.mode == "up":
        return Interval(Dyadic.zero(), u)
    # zr: toward zero, error sign depends on the operand sign
    if i.lo.sign >= 0:
        return Interval(-u, Dyadic.zero())
    if i.hi.sign <= 0:
        return Interval(Dyadic.zero(), u)
    return Interval(-u, u)
