"""Exact integer/rational helpers shared by the set, measure and witness modules."""
from fractions import Fraction
from math import ceil, floor, isqrt
from typing import Annotated, Any, Dict, Tuple

from pydantic import BeforeValidator, PlainSerializer, WithJsonSchema


def to_fraction(value: Any) -> Fraction:
    """Accept ints, Fractions and "p/q" strings; floats are rejected to keep verdict paths exact"""
    if isinstance(value, bool):
        raise ValueError("booleans are not rationals")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError):
            raise ValueError(f"not a rational literal: {value!r}")
    if isinstance(value, float):
        raise ValueError("floating point values are not accepted, write the rational as a string such as \"1/3\"")
    raise ValueError(f"cannot read {type(value).__name__} as a rational")


Rational = Annotated[
    Fraction,
    BeforeValidator(to_fraction),
    PlainSerializer(lambda value: str(value), return_type=str),
    WithJsonSchema({"type": "string", "examples": ["1/2", "3"]}),
]


def plain(value: Any) -> Any:
    """JSON-ready copy: rationals become "p/q" strings, tuples and sets become lists"""
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, dict):
        return {k if isinstance(k, (str, int)) else str(k): plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [plain(v) for v in value]
    if isinstance(value, (set, frozenset)):
        return sorted(plain(v) for v in value)
    if hasattr(value, "model_dump"):
        return value.model_dump(mode="json", by_alias=True)
    return value


# free-form report fields; may hold rationals at any depth
Payload = Annotated[Dict[str, Any], PlainSerializer(plain, when_used="json")]


def nearest_int(x: Fraction) -> int:
    """[x]: nearest integer, halves rounded up"""
    return floor(x + Fraction(1, 2))


def iroot(n: int, k: int) -> int:
    """Floor of the k-th root of a nonnegative integer"""
    if n < 0:
        raise ValueError("iroot of a negative number")
    if k < 1:
        raise ValueError("root order must be positive")
    if n < 2 or k == 1:
        return n
    if k == 2:
        return isqrt(n)
    x = 1 << ((n.bit_length() + k - 1) // k)
    while True:
        y = ((k - 1) * x + n // x ** (k - 1)) // k
        if y >= x:
            return x
        x = y


def exact_root(n: int, k: int):
    """The integer r with r**k == n, or None"""
    if n < 0:
        return None
    r = iroot(n, k)
    return r if r ** k == n else None


def power_bounds(base: Fraction, exponent: Fraction, bits: int) -> Tuple[Fraction, Fraction]:
    """Rational lo <= base**exponent <= hi for positive base and exponent"""
    if base <= 0 or exponent <= 0:
        raise ValueError("power_bounds needs a positive base and exponent")
    p, q = exponent.numerator, exponent.denominator
    t = base ** p
    if q == 1:
        return t, t
    scale = 1 << bits
    r = iroot(t.numerator * scale ** q // t.denominator, q)
    return Fraction(r, scale), Fraction(r + 1, scale)


def round_down(x: Fraction, bits: int) -> Fraction:
    scale = 1 << bits
    return Fraction(floor(x * scale), scale)


def round_up(x: Fraction, bits: int) -> Fraction:
    scale = 1 << bits
    return Fraction(ceil(x * scale), scale)


def dyadic_checkpoints(bound: int, first: int = 1):
    """Powers of two in [first, bound] plus bound itself"""
    points = []
    k = max(first, 1)
    power = 1
    while power < k:
        power <<= 1
    while power < bound:
        points.append(power)
        power <<= 1
    if bound >= 1:
        points.append(bound)
    return points


class Bounds:
    """Running lower/upper sums; exact until the denominators outgrow the precision"""

    def __init__(self, bits: int):
        self.bits = bits
        self.lower = Fraction(0)
        self.upper = Fraction(0)

    @property
    def exact(self) -> bool:
        return self.lower == self.upper

    def add(self, lower: Fraction, upper: Fraction = None):
        self.lower += lower
        self.upper += lower if upper is None else upper
        limit = 4 * self.bits
        if self.lower.denominator.bit_length() > limit or self.upper.denominator.bit_length() > limit:
            self.lower = round_down(self.lower, self.bits)
            self.upper = round_up(self.upper, self.bits)
        return self

    def scaled(self, factor: Fraction) -> Tuple[Fraction, Fraction]:
        return self.lower * factor, self.upper * factor
