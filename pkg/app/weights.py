"""Nonnegative weight functions w: omega -> Q used by summable and Erdős–Ulam ideals."""
import logging
from fractions import Fraction
from typing import Annotated, Literal, Optional, Tuple, Union

from pydantic import Field

from app.arith import Rational
from app.errors import MalformedExpressionError
from app.expressions import Node
from app.schedules import GridSchedule

logger = logging.getLogger(__name__)


class WeightNode(Node):
    def value(self, n: int) -> Fraction:
        raise NotImplementedError

    def check(self):
        pass

    def monotone(self) -> Optional[str]:
        """"nonincreasing", "nondecreasing" or None"""
        return None

    def prefix(self, n: int) -> Optional[Fraction]:
        """Closed form of Σ_{k<n} w(k), when there is one"""
        return None

    def tail(self, cut: int) -> Optional[Fraction]:
        """Closed-form upper bound on Σ_{k>=cut} w(k), None if unknown or infinite"""
        return None

    def converges(self) -> Optional[bool]:
        return None

    def bounds(self) -> Optional[tuple]:
        """(inf, sup) of w when both are known and inf > 0"""
        return None

    def scale(self) -> Fraction:
        return self.value(0)

    def block_schedule(self) -> Optional[GridSchedule]:
        """Schedule on whose intervals w is constant"""
        return None


class ConstantWeight(WeightNode):
    kind: Literal["constant"] = "constant"
    c: Rational = Fraction(1)

    def check(self):
        if self.c <= 0:
            raise MalformedExpressionError("constant weight must be positive", position="c")

    def value(self, n):
        return self.c

    def monotone(self):
        return "nonincreasing"

    def prefix(self, n):
        return self.c * max(n, 0)

    def converges(self):
        return False

    def bounds(self):
        return self.c, self.c

    def describe(self):
        return f"w={self.c}"


class ReciprocalWeight(WeightNode):
    """w(n) = numerator / (n + offset)^power"""

    kind: Literal["reciprocal"] = "reciprocal"
    offset: int = 1
    power: int = 1
    numerator: Rational = Fraction(1)

    def check(self):
        if self.offset < 1 or self.power < 1 or self.numerator <= 0:
            raise MalformedExpressionError("reciprocal weights need offset >= 1, power >= 1, numerator > 0")

    def value(self, n):
        return self.numerator / Fraction(n + self.offset) ** self.power

    def monotone(self):
        return "nonincreasing"

    def converges(self):
        return self.power >= 2

    def tail(self, cut):
        if self.power < 2:
            return None
        # Σ_{k>=m} 1/k^p <= 1/m^p + 1/((p-1) m^(p-1))
        m = cut + self.offset
        return self.numerator * (Fraction(1, m ** self.power) + Fraction(1, (self.power - 1) * m ** (self.power - 1)))

    def describe(self):
        head = "" if self.numerator == 1 else f"{self.numerator}·"
        exp = "" if self.power == 1 else f"^{self.power}"
        return f"w={head}1/(n+{self.offset}){exp}"


class GeometricWeight(WeightNode):
    """w(n) = base^-n"""

    kind: Literal["geometric"] = "geometric"
    base: int = 2

    def check(self):
        if self.base < 2:
            raise MalformedExpressionError("geometric weights need base >= 2", position="base")

    def value(self, n):
        return Fraction(1, self.base ** n)

    def monotone(self):
        return "nonincreasing"

    def prefix(self, n):
        n = max(n, 0)
        return (1 - Fraction(1, self.base ** n)) * Fraction(self.base, self.base - 1)

    def tail(self, cut):
        return Fraction(1, self.base ** cut) * Fraction(self.base, self.base - 1)

    def converges(self):
        return True

    def describe(self):
        return f"w={self.base}^-n"


class LinearWeight(WeightNode):
    """w(n) = min(slope*n + offset, cap)"""

    kind: Literal["linear"] = "linear"
    slope: Rational = Fraction(1)
    offset: Rational = Fraction(1)
    cap: Optional[Rational] = None

    def check(self):
        if self.slope < 0 or self.offset <= 0:
            raise MalformedExpressionError("linear weights need slope >= 0 and offset > 0")
        if self.cap is not None and self.cap < self.offset:
            raise MalformedExpressionError("linear weight cap must be >= offset", position="cap")

    def value(self, n):
        w = self.slope * n + self.offset
        return w if self.cap is None else min(w, self.cap)

    def monotone(self):
        return "nondecreasing"

    def converges(self):
        return False

    def bounds(self):
        if self.cap is None and self.slope > 0:
            return None
        return self.offset, self.cap if self.cap is not None else self.offset

    def describe(self):
        tail = "" if self.cap is None else f", cap {self.cap}"
        return f"w={self.slope}n+{self.offset}{tail}"


class BlockWeight(WeightNode):
    """Constant on each interval I_n: |I_n|, 1/|I_n|, the block scale s_n or a listed value"""

    kind: Literal["block"] = "block"
    schedule: GridSchedule
    mode: Literal["length", "reciprocal-length", "scale", "listed"] = "length"
    values: Tuple[Rational, ...] = ()

    def check(self):
        if self.mode == "listed" and (not self.values or any(v <= 0 for v in self.values)):
            raise MalformedExpressionError("listed block weights must be positive", position="values")

    def block_value(self, n: int) -> Fraction:
        if self.mode == "length":
            return Fraction(self.schedule.length(n))
        if self.mode == "reciprocal-length":
            return Fraction(1, self.schedule.length(n))
        if self.mode == "scale":
            return Fraction(self.schedule.scale(n))
        return self.values[min(n, len(self.values) - 1)]

    def value(self, n):
        return self.block_value(self.schedule.locate(n))

    def monotone(self):
        if self.mode in ("length", "scale") and self.schedule.is_growing():
            return "nondecreasing"
        if self.mode == "reciprocal-length" and self.schedule.is_growing():
            return "nonincreasing"
        return None

    def prefix(self, n):
        if n <= 0:
            return Fraction(0)
        total = Fraction(0)
        for m in self.schedule.blocks_between(0, n):
            lo, hi = self.schedule.bounds(m)
            total += self.block_value(m) * (min(hi, n) - lo)
        return total

    def converges(self):
        return False

    def block_schedule(self):
        return self.schedule

    def describe(self):
        return f"w=block({self.schedule.describe()}, {self.mode})"


Weight = Annotated[
    Union[ConstantWeight, ReciprocalWeight, GeometricWeight, LinearWeight, BlockWeight],
    Field(discriminator="kind"),
]

UNIT = ConstantWeight()
HARMONIC = ReciprocalWeight()
