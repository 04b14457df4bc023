"""Symbolic subsets of a base space and symbolic injections, evaluated on finite windows.

Both trees are frozen pydantic models tagged by ``kind`` so that the JSON text
format of the CLI and the HTTP API is exactly their serialized form. Every
element is an integer code; product spaces decode codes through their
``BaseSpace``.
"""
import logging
from bisect import bisect_left
from fractions import Fraction
from math import ceil, floor, isqrt
from typing import Annotated, Dict, FrozenSet, List, Literal, Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, Field

from app.arith import Rational, exact_root, iroot, nearest_int
from app.cache import memoized
from app.config import settings
from app.errors import (
    EffortExceededError,
    MalformedExpressionError,
    PreconditionError,
)
from app.schedules import GridSchedule
from app.spaces import OMEGA, OMEGA_SQUARED, BaseSpace, Point, SpaceKind

logger = logging.getLogger(__name__)

PAIRS = (SpaceKind.OMEGA_SQUARED, SpaceKind.OMEGA_TIMES_OMEGA)


class Node(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", arbitrary_types_allowed=True)

    def describe(self) -> str:
        return self.kind


def _too_large(what: str, size: int):
    raise EffortExceededError(
        f"{what} needs {size} elements, above the enumeration cap {settings.enumeration_cap}",
        size=size,
        cap=settings.enumeration_cap,
    )


def _shared_bound(hi: int) -> int:
    """Round a window bound up to a power of two so repeated counts share one window"""
    bound = 1024
    while bound < hi:
        bound <<= 1
    return bound


# ---------------------------------------------------------------- count rules


class CountRule(Node):
    """How many points a block-rule selects in interval I_n"""

    kind: Literal["constant", "length-fraction", "scale-fraction", "listed"] = "constant"
    value: int = 1
    ratio: Rational = Fraction(0)
    rounding: Optional[Literal["floor", "nearest", "ceil"]] = None
    lag: int = 0
    decay: Literal["none", "reciprocal"] = "none"
    values: Tuple[int, ...] = ()

    def check(self):
        if self.value < 0 or any(v < 0 for v in self.values):
            raise MalformedExpressionError("block counts must be nonnegative", position="count")
        if self.ratio < 0:
            raise MalformedExpressionError("count ratio must be nonnegative", position="count.ratio")
        if self.lag < 0:
            raise MalformedExpressionError("count lag must be nonnegative", position="count.lag")

    def _round(self, x: Fraction, default: str) -> int:
        mode = self.rounding or default
        if mode == "floor":
            return floor(x)
        if mode == "ceil":
            return ceil(x)
        return nearest_int(x)

    def effective_ratio(self, m: int) -> Fraction:
        if self.decay == "reciprocal" and m >= 1:
            return self.ratio / m
        return self.ratio

    def count(self, schedule: GridSchedule, n: int) -> int:
        length = schedule.length(n)
        if self.kind == "constant":
            c = self.value
        elif self.kind == "listed":
            c = self.values[n] if n < len(self.values) else self.value
        elif self.kind == "length-fraction":
            c = self._round(self.effective_ratio(n) * length, "floor")
        else:
            m = n - self.lag
            if m < 0:
                return 0
            c = self._round(self.effective_ratio(m) * schedule.scale(m), "nearest")
        return max(0, min(c, length))

    def describe(self) -> str:
        if self.kind == "constant":
            return str(self.value)
        if self.kind == "listed":
            return f"listed{list(self.values)}"
        return f"{self.kind}({self.ratio})"


# ---------------------------------------------------------------- set nodes


class SetNode(Node):
    def contains(self, x: int, space: BaseSpace = OMEGA) -> bool:
        raise NotImplementedError

    def check(self, space: BaseSpace):
        """Parameter and base-space validation, raised before any evaluation"""

    def window(self, bound: int, space: BaseSpace = OMEGA) -> Tuple[int, ...]:
        """Sorted codes below bound"""
        if bound < 0:
            raise MalformedExpressionError(f"window bound must be >= 0, got {bound}")
        _checked(self, space)
        if bound == 0:
            return ()
        return _window(self, bound, space)

    def count(self, lo: int, hi: int, space: BaseSpace = OMEGA) -> int:
        """|expr ∩ [lo, hi)|"""
        lo = max(lo, 0)
        if hi <= lo:
            return 0
        _checked(self, space)
        return _count(self, lo, hi, space)

    def compute_window(self, bound: int, space: BaseSpace) -> Tuple[int, ...]:
        if bound > settings.enumeration_cap:
            _too_large(f"window of {self.describe()}", bound)
        return tuple(x for x in range(bound) if self.contains(x, space))

    def compute_count(self, lo: int, hi: int, space: BaseSpace) -> int:
        shared = _shared_bound(hi)
        if shared <= settings.enumeration_cap:
            codes = self.window(shared, space)
            return bisect_left(codes, hi) - bisect_left(codes, lo)
        if hi - lo <= settings.enumeration_cap:
            return sum(1 for x in range(lo, hi) if self.contains(x, space))
        raise EffortExceededError(
            f"no closed-form count for {self.describe()} on [{lo}, {hi})", lo=lo, hi=hi
        )

    def finiteness(self, space: BaseSpace = OMEGA) -> Optional[bool]:
        """True if structurally finite, False if structurally infinite, None if unknown"""
        return None

    def known_density(self, space: BaseSpace = OMEGA) -> Optional[Fraction]:
        return None

    def upper_bound(self, space: BaseSpace = OMEGA) -> Optional[int]:
        """A code bound above every element, for structurally finite sets"""
        return None


@memoized("window")
def _window(expr: SetNode, bound: int, space: BaseSpace) -> Tuple[int, ...]:
    return expr.compute_window(bound, space)


@memoized("count")
def _count(expr: SetNode, lo: int, hi: int, space: BaseSpace) -> int:
    return expr.compute_count(lo, hi, space)


@memoized("checked")
def _checked(expr: SetNode, space: BaseSpace) -> bool:
    expr.check(space)
    return True


def _require_pairs(space: BaseSpace, what: str):
    space.require(*PAIRS, what=what)


class ExplicitSet(SetNode):
    kind: Literal["explicit"] = "explicit"
    elements: Tuple[Point, ...] = ()

    def codes(self, space: BaseSpace) -> Tuple[Tuple[int, ...], FrozenSet[int]]:
        return _explicit_codes(self, space)

    def check(self, space):
        self.codes(space)

    def contains(self, x, space=OMEGA):
        return x in self.codes(space)[1]

    def compute_window(self, bound, space):
        ordered = self.codes(space)[0]
        return ordered[: bisect_left(ordered, bound)]

    def compute_count(self, lo, hi, space):
        ordered = self.codes(space)[0]
        return bisect_left(ordered, hi) - bisect_left(ordered, lo)

    def finiteness(self, space=OMEGA):
        return True

    def known_density(self, space=OMEGA):
        return Fraction(0)

    def upper_bound(self, space=OMEGA):
        ordered = self.codes(space)[0]
        return ordered[-1] + 1 if ordered else 0

    def describe(self):
        shown = ", ".join(str(e) for e in self.elements[:6])
        more = ", ..." if len(self.elements) > 6 else ""
        return f"{{{shown}{more}}}"


@memoized("explicit-codes")
def _explicit_codes(expr: ExplicitSet, space: BaseSpace):
    codes = sorted({space.encode(e) for e in expr.elements})
    return tuple(codes), frozenset(codes)


class CofiniteSet(SetNode):
    kind: Literal["cofinite"] = "cofinite"
    excluded: Tuple[Point, ...] = ()

    def _hole(self, space) -> ExplicitSet:
        return ExplicitSet(elements=self.excluded)

    def check(self, space):
        self._hole(space).codes(space)

    def contains(self, x, space=OMEGA):
        return not self._hole(space).contains(x, space)

    def compute_window(self, bound, space):
        if bound > settings.enumeration_cap:
            _too_large("cofinite window", bound)
        holes = self._hole(space).codes(space)[1]
        return tuple(x for x in range(bound) if x not in holes)

    def compute_count(self, lo, hi, space):
        return (hi - lo) - self._hole(space).count(lo, hi, space)

    def finiteness(self, space=OMEGA):
        return False

    def known_density(self, space=OMEGA):
        return Fraction(1)

    def describe(self):
        return f"cofinite(minus {len(self.excluded)})"


class AllSet(SetNode):
    kind: Literal["all"] = "all"

    def contains(self, x, space=OMEGA):
        return True

    def compute_window(self, bound, space):
        if bound > settings.enumeration_cap:
            _too_large("full window", bound)
        return tuple(range(bound))

    def compute_count(self, lo, hi, space):
        return hi - lo

    def finiteness(self, space=OMEGA):
        return False

    def known_density(self, space=OMEGA):
        return Fraction(1)


class IntervalSet(SetNode):
    kind: Literal["interval"] = "interval"
    start: int = 0
    stop: Optional[int] = None

    def check(self, space):
        if self.start < 0 or (self.stop is not None and self.stop < self.start):
            raise MalformedExpressionError(
                f"bad interval [{self.start}, {self.stop})", position="interval"
            )

    def contains(self, x, space=OMEGA):
        return x >= self.start and (self.stop is None or x < self.stop)

    def _clip(self, lo, hi):
        lo = max(lo, self.start)
        if self.stop is not None:
            hi = min(hi, self.stop)
        return lo, hi

    def compute_window(self, bound, space):
        lo, hi = self._clip(0, bound)
        if hi - lo > settings.enumeration_cap:
            _too_large("interval window", hi - lo)
        return tuple(range(lo, hi))

    def compute_count(self, lo, hi, space):
        lo, hi = self._clip(lo, hi)
        return max(0, hi - lo)

    def finiteness(self, space=OMEGA):
        return self.stop is not None

    def known_density(self, space=OMEGA):
        return Fraction(0) if self.stop is not None else Fraction(1)

    def upper_bound(self, space=OMEGA):
        return self.stop

    def describe(self):
        return f"[{self.start}, {'inf' if self.stop is None else self.stop})"


def _squares_below(n: int) -> int:
    return isqrt(n - 1) + 1 if n > 0 else 0


class Squares(SetNode):
    kind: Literal["squares"] = "squares"

    def contains(self, x, space=OMEGA):
        return x >= 0 and isqrt(x) ** 2 == x

    def compute_window(self, bound, space):
        size = _squares_below(bound)
        if size > settings.enumeration_cap:
            _too_large("squares window", size)
        return tuple(k * k for k in range(size))

    def compute_count(self, lo, hi, space):
        return _squares_below(hi) - _squares_below(lo)

    def finiteness(self, space=OMEGA):
        return False

    def known_density(self, space=OMEGA):
        return Fraction(0)


class Powers(SetNode):
    """{base^k : k >= 0}"""

    kind: Literal["powers"] = "powers"
    base: int = 2

    def check(self, space):
        if self.base < 2:
            raise MalformedExpressionError(f"powers need base >= 2, got {self.base}", position="base")

    def _below(self, n: int) -> int:
        k, p = 0, 1
        while p < n:
            k += 1
            p *= self.base
        return k

    def contains(self, x, space=OMEGA):
        if x < 1:
            return False
        while x % self.base == 0:
            x //= self.base
        return x == 1

    def compute_window(self, bound, space):
        return tuple(self.base ** k for k in range(self._below(bound)))

    def compute_count(self, lo, hi, space):
        return self._below(hi) - self._below(lo)

    def finiteness(self, space=OMEGA):
        return False

    def known_density(self, space=OMEGA):
        return Fraction(0)

    def describe(self):
        return f"powers({self.base})"


class Progression(SetNode):
    """{start + k*step : k >= 0}"""

    kind: Literal["progression"] = "progression"
    start: int = 0
    step: int = 1

    def check(self, space):
        if self.step < 1:
            raise MalformedExpressionError(f"progression step must be >= 1, got {self.step}", position="step")
        if self.start < 0:
            raise MalformedExpressionError(f"progression start must be >= 0, got {self.start}", position="start")

    def _below(self, n: int) -> int:
        return (n - self.start + self.step - 1) // self.step if n > self.start else 0

    def contains(self, x, space=OMEGA):
        return x >= self.start and (x - self.start) % self.step == 0

    def compute_window(self, bound, space):
        size = self._below(bound)
        if size > settings.enumeration_cap:
            _too_large("progression window", size)
        return tuple(range(self.start, bound, self.step))

    def compute_count(self, lo, hi, space):
        return self._below(hi) - self._below(lo)

    def finiteness(self, space=OMEGA):
        return False

    def known_density(self, space=OMEGA):
        return Fraction(1, self.step)

    def describe(self):
        return f"progression({self.start}, {self.step})"


def finite_sums(generators: Tuple[int, ...]) -> Tuple[int, ...]:
    """FS(B): sums of the nonempty subsets of B, sorted"""
    if len(generators) > 30:
        raise MalformedExpressionError("finite-sums generators are capped at 30", position="generators")
    sums = set()
    for g in generators:
        sums |= {s + g for s in sums}
        sums.add(g)
        if len(sums) > settings.enumeration_cap:
            _too_large("finite-sums listing", len(sums))
    return tuple(sorted(sums))


class FsSet(SetNode):
    kind: Literal["fs-set"] = "fs-set"
    generators: Tuple[int, ...]

    def _sums(self) -> Tuple[int, ...]:
        return _fs_sums(self)

    def check(self, space):
        if any(g < 0 for g in self.generators):
            raise MalformedExpressionError("finite-sums generators must be >= 0", position="generators")
        self._sums()

    def contains(self, x, space=OMEGA):
        return x in _fs_lookup(self)

    def compute_window(self, bound, space):
        sums = self._sums()
        return sums[: bisect_left(sums, bound)]

    def compute_count(self, lo, hi, space):
        sums = self._sums()
        return bisect_left(sums, hi) - bisect_left(sums, lo)

    def finiteness(self, space=OMEGA):
        return True

    def known_density(self, space=OMEGA):
        return Fraction(0)

    def upper_bound(self, space=OMEGA):
        return sum(self.generators) + 1

    def describe(self):
        return f"FS{set(self.generators) or '{}'}"


@memoized("fs-sums")
def _fs_sums(expr: FsSet):
    return finite_sums(expr.generators)


@memoized("fs-lookup")
def _fs_lookup(expr: FsSet):
    return frozenset(_fs_sums(expr))


class BlockRule(SetNode):
    """Per-interval selection over a GridSchedule, counted in closed form"""

    kind: Literal["block-rule"] = "block-rule"
    schedule: GridSchedule
    rule: Literal["all", "none", "first", "last", "arithmetic"] = "all"
    count_rule: CountRule = Field(default_factory=CountRule, alias="count")
    step: int = 1
    indices: Optional["SetExpr"] = None

    model_config = ConfigDict(populate_by_name=True)

    def check(self, space):
        if self.rule == "arithmetic" and self.step < 1:
            raise MalformedExpressionError(f"block step must be >= 1, got {self.step}", position="step")
        self.count_rule.check()
        if self.indices is not None:
            _checked(self.indices, OMEGA)

    def active(self, n: int) -> bool:
        return self.indices is None or self.indices.contains(n, OMEGA)

    def block_count(self, n: int) -> int:
        """|expr ∩ I_n| straight from the rule"""
        if self.rule == "none" or not self.active(n):
            return 0
        length = self.schedule.length(n)
        if self.rule == "all":
            return length
        c = self.count_rule.count(self.schedule, n)
        if self.rule == "arithmetic":
            return min(c, (length + self.step - 1) // self.step)
        return c

    def _selected(self, n: int) -> Tuple[int, int, int, int]:
        """(first, stop, step, size) of the positions chosen in I_n"""
        s, e = self.schedule.bounds(n)
        c = self.block_count(n)
        if self.rule in ("all", "first"):
            return s, s + c, 1, c
        if self.rule == "last":
            return e - c, e, 1, c
        return s, s + c * self.step, self.step, c

    def _overlap(self, n: int, lo: int, hi: int) -> int:
        first, stop, step, size = self._selected(n)
        if size == 0:
            return 0
        lo, hi = max(lo, first), min(hi, stop)
        if hi <= lo:
            return 0
        i_lo = -((first - lo) // step)
        i_hi = -((first - hi) // step)
        return max(0, min(i_hi, size) - max(i_lo, 0))

    def contains(self, x, space=OMEGA):
        n = self.schedule.locate(x)
        return self._overlap(n, x, x + 1) == 1

    def _blocks(self, lo: int, hi: int) -> List[int]:
        first, last = self.schedule.locate(lo), self.schedule.locate(hi - 1)
        if last - first > settings.enumeration_cap:
            _too_large("block iteration", last - first)
        return list(range(first, last + 1))

    def compute_count(self, lo, hi, space):
        total = 0
        for n in self._blocks(lo, hi):
            s, e = self.schedule.bounds(n)
            total += self.block_count(n) if lo <= s and e <= hi else self._overlap(n, lo, hi)
        return total

    def compute_window(self, bound, space):
        size = self.compute_count(0, bound, space)
        if size > settings.enumeration_cap:
            _too_large("block-rule window", size)
        codes: List[int] = []
        for n in self._blocks(0, bound):
            first, stop, step, c = self._selected(n)
            codes.extend(range(first, min(stop, bound), step))
        return tuple(codes)

    def finiteness(self, space=OMEGA):
        if self.rule == "none":
            return True
        if self.indices is not None:
            inner = self.indices.finiteness(OMEGA)
            if inner is not False:
                return inner
        if self.rule == "all":
            return False
        if self.count_rule.kind == "constant":
            return self.count_rule.value == 0
        if self.count_rule.kind in ("length-fraction", "scale-fraction"):
            if self.count_rule.ratio == 0:
                return True
            if self.count_rule.decay == "none" and self.schedule.is_growing():
                return False
        return None

    def upper_bound(self, space=OMEGA):
        if self.rule == "none":
            return 0
        if self.indices is not None and self.indices.finiteness(OMEGA) is True:
            top = self.indices.upper_bound(OMEGA)
            if top is not None:
                return self.schedule.end(top - 1) if top > 0 else 0
        return None

    def describe(self):
        return f"block-rule({self.schedule.describe()}, {self.rule} {self.count_rule.describe()})"


# -------------------------------------------------------- product-space nodes


class Triangle(SetNode):
    """D = {(i, j) : i >= j}"""

    kind: Literal["triangle"] = "triangle"

    def check(self, space):
        _require_pairs(space, "triangle")

    def contains(self, x, space=OMEGA_SQUARED):
        i, j = space.decode(x)
        return i >= j

    def finiteness(self, space=OMEGA):
        return False


class ProductSet(SetNode):
    """first x second"""

    kind: Literal["product"] = "product"
    first: "SetExpr"
    second: "SetExpr"

    def check(self, space):
        _require_pairs(space, "product")
        _checked(self.first, OMEGA)
        _checked(self.second, OMEGA)

    def contains(self, x, space=OMEGA_SQUARED):
        i, j = space.decode(x)
        return self.first.contains(i, OMEGA) and self.second.contains(j, OMEGA)

    def finiteness(self, space=OMEGA):
        a, b = self.first.finiteness(OMEGA), self.second.finiteness(OMEGA)
        if a is True and b is True:
            return True
        return None


class Column(SetNode):
    """{index} x inner"""

    kind: Literal["column"] = "column"
    index: int
    inner: "SetExpr" = Field(default_factory=AllSet)

    def check(self, space):
        _require_pairs(space, "column")
        _checked(self.inner, OMEGA)

    def contains(self, x, space=OMEGA_SQUARED):
        i, j = space.decode(x)
        return i == self.index and self.inner.contains(j, OMEGA)

    def finiteness(self, space=OMEGA):
        return self.inner.finiteness(OMEGA)

    def describe(self):
        return f"column({self.index})"


class Columns(SetNode):
    """Points whose column index lies in indices"""

    kind: Literal["columns"] = "columns"
    indices: "SetExpr"

    def check(self, space):
        _require_pairs(space, "columns")
        _checked(self.indices, OMEGA)

    def contains(self, x, space=OMEGA_SQUARED):
        return self.indices.contains(space.decode(x)[0], OMEGA)


class Rows(SetNode):
    """Points whose second coordinate lies in indices"""

    kind: Literal["rows"] = "rows"
    indices: "SetExpr"

    def check(self, space):
        _require_pairs(space, "rows")
        _checked(self.indices, OMEGA)

    def contains(self, x, space=OMEGA_SQUARED):
        return self.indices.contains(space.decode(x)[1], OMEGA)


class CopySet(SetNode):
    """{index} x inner inside {0,1} x omega"""

    kind: Literal["copy"] = "copy"
    index: Literal[0, 1]
    inner: "SetExpr"

    def check(self, space):
        space.require(SpaceKind.TWO_COPIES, what="copy")
        _checked(self.inner, OMEGA)

    def contains(self, x, space=OMEGA):
        c, n = space.decode(x)
        return c == self.index and self.inner.contains(n, OMEGA)

    def compute_window(self, bound, space):
        limit = (bound - self.index + 1) // 2
        return tuple(2 * n + self.index for n in self.inner.window(limit, OMEGA))

    def compute_count(self, lo, hi, space):
        def below(b):
            return (b - self.index + 1) // 2 if b > self.index else 0

        return self.inner.count(below(lo), below(hi), OMEGA)

    def finiteness(self, space=OMEGA):
        return self.inner.finiteness(OMEGA)

    def upper_bound(self, space=OMEGA):
        top = self.inner.upper_bound(OMEGA)
        return None if top is None else 2 * top + 1


class Section(SetNode):
    """{j : (index, j) in of}, a subset of omega cut out of a product or two-copies set"""

    kind: Literal["section"] = "section"
    index: int
    of: "SetExpr"
    space: BaseSpace = OMEGA_SQUARED

    def check(self, space):
        if not self.space.has_sections:
            raise MalformedExpressionError(f"{self.space.label()} has no sections", position="space")
        _checked(self.of, self.space)

    def contains(self, x, space=OMEGA):
        return self.of.contains(self.space.encode((self.index, x)), self.space)

    def finiteness(self, space=OMEGA):
        if isinstance(self.of, Triangle):
            return True
        if isinstance(self.of, (Column, CopySet)):
            if self.of.index != self.index:
                return True
            return self.of.inner.finiteness(OMEGA)
        if isinstance(self.of, ProductSet):
            if not self.of.first.contains(self.index, OMEGA):
                return True
            return self.of.second.finiteness(OMEGA)
        return True if self.of.finiteness(self.space) is True else None

    def upper_bound(self, space=OMEGA):
        if isinstance(self.of, Triangle):
            return self.index + 1
        if isinstance(self.of, (Column, CopySet)):
            return 0 if self.of.index != self.index else self.of.inner.upper_bound(OMEGA)
        top = self.of.upper_bound(self.space)
        return None if top is None else top

    def describe(self):
        return f"section({self.index}, {self.of.describe()})"


class SumFilter(SetNode):
    """Points whose coordinates sum into inner"""

    kind: Literal["sum-filter"] = "sum-filter"
    inner: "SetExpr"

    def check(self, space):
        _checked(self.inner, OMEGA)

    def contains(self, x, space=OMEGA):
        point = space.decode(x)
        total = point if isinstance(point, int) else sum(point)
        return self.inner.contains(total, OMEGA)


# ------------------------------------------------------------ boolean nodes


class UnionSet(SetNode):
    kind: Literal["union"] = "union"
    parts: Tuple["SetExpr", ...]

    def check(self, space):
        for part in self.parts:
            _checked(part, space)

    def contains(self, x, space=OMEGA):
        return any(part.contains(x, space) for part in self.parts)

    def compute_window(self, bound, space):
        merged = set()
        for part in self.parts:
            merged.update(part.window(bound, space))
        return tuple(sorted(merged))

    def finiteness(self, space=OMEGA):
        flags = [part.finiteness(space) for part in self.parts]
        if any(flag is False for flag in flags):
            return False
        if all(flag is True for flag in flags):
            return True
        return None

    def known_density(self, space=OMEGA):
        densities = [part.known_density(space) for part in self.parts]
        if all(d == 0 for d in densities):
            return Fraction(0)
        if any(d == 1 for d in densities):
            return Fraction(1)
        return None

    def upper_bound(self, space=OMEGA):
        bounds = [part.upper_bound(space) for part in self.parts]
        if any(b is None for b in bounds):
            return None
        return max(bounds, default=0)

    def describe(self):
        return " ∪ ".join(part.describe() for part in self.parts) or "∅"


class IntersectionSet(SetNode):
    kind: Literal["intersection"] = "intersection"
    parts: Tuple["SetExpr", ...]

    def check(self, space):
        if not self.parts:
            raise MalformedExpressionError("intersection needs at least one part", position="parts")
        for part in self.parts:
            _checked(part, space)

    def contains(self, x, space=OMEGA):
        return all(part.contains(x, space) for part in self.parts)

    def _driver(self, space) -> int:
        for i, part in enumerate(self.parts):
            if part.finiteness(space) is True:
                return i
        return 0

    def compute_window(self, bound, space):
        d = self._driver(space)
        others = self.parts[:d] + self.parts[d + 1:]
        return tuple(
            x for x in self.parts[d].window(bound, space) if all(p.contains(x, space) for p in others)
        )

    def finiteness(self, space=OMEGA):
        flags = [part.finiteness(space) for part in self.parts]
        return True if any(flag is True for flag in flags) else None

    def known_density(self, space=OMEGA):
        densities = [part.known_density(space) for part in self.parts]
        if any(d == 0 for d in densities):
            return Fraction(0)
        rest = [d for d in densities if d != 1]
        if not rest:
            return Fraction(1)
        return None

    def upper_bound(self, space=OMEGA):
        bounds = [b for b in (part.upper_bound(space) for part in self.parts) if b is not None]
        return min(bounds) if bounds else None

    def describe(self):
        return " ∩ ".join(part.describe() for part in self.parts)


class DifferenceSet(SetNode):
    kind: Literal["difference"] = "difference"
    first: "SetExpr"
    second: "SetExpr"

    def check(self, space):
        _checked(self.first, space)
        _checked(self.second, space)

    def contains(self, x, space=OMEGA):
        return self.first.contains(x, space) and not self.second.contains(x, space)

    def compute_window(self, bound, space):
        return tuple(x for x in self.first.window(bound, space) if not self.second.contains(x, space))

    def compute_count(self, lo, hi, space):
        top = self.second.upper_bound(space)
        if self.second.finiteness(space) is True and top is not None:
            removed = sum(
                1
                for x in self.second.window(min(hi, top), space)
                if x >= lo and self.first.contains(x, space)
            )
            return self.first.count(lo, hi, space) - removed
        return super().compute_count(lo, hi, space)

    def finiteness(self, space=OMEGA):
        a = self.first.finiteness(space)
        if a is True:
            return True
        if a is False and self.second.finiteness(space) is True:
            return False
        return None

    def known_density(self, space=OMEGA):
        a = self.first.known_density(space)
        if a == 0:
            return Fraction(0)
        b = self.second.known_density(space)
        if b == 0 and self.second.finiteness(space) is True:
            return a
        if b == 1:
            return Fraction(0)
        return None

    def upper_bound(self, space=OMEGA):
        return self.first.upper_bound(space)

    def describe(self):
        return f"{self.first.describe()} ∖ {self.second.describe()}"


class ComplementSet(SetNode):
    kind: Literal["complement"] = "complement"
    inner: "SetExpr"

    def check(self, space):
        _checked(self.inner, space)

    def contains(self, x, space=OMEGA):
        return not self.inner.contains(x, space)

    def compute_window(self, bound, space):
        if bound > settings.enumeration_cap:
            _too_large("complement window", bound)
        taken = set(self.inner.window(bound, space))
        return tuple(x for x in range(bound) if x not in taken)

    def compute_count(self, lo, hi, space):
        return (hi - lo) - self.inner.count(lo, hi, space)

    def finiteness(self, space=OMEGA):
        return False if self.inner.finiteness(space) is True else None

    def known_density(self, space=OMEGA):
        d = self.inner.known_density(space)
        return None if d is None else 1 - d

    def describe(self):
        return f"complement({self.inner.describe()})"


class ImageSet(SetNode):
    """f[inner]"""

    kind: Literal["image"] = "image"
    map: "InjectionExpr"
    inner: "SetExpr"

    def check(self, space):
        self.map.check()
        _checked(self.inner, space)

    def contains(self, x, space=OMEGA):
        pre = self.map.invert(x)
        return pre is not None and self.inner.contains(pre, space)

    def compute_window(self, bound, space):
        if self.map.increasing():
            limit = self.map.bound_below(bound)
            return tuple(self.map.values_on(self.inner.window(limit, space)))
        top = self.inner.upper_bound(space)
        if self.inner.finiteness(space) is True and top is not None:
            return tuple(sorted(y for y in self.map.values_on(self.inner.window(top, space)) if y < bound))
        return super().compute_window(bound, space)

    def compute_count(self, lo, hi, space):
        if self.map.increasing():
            return self.inner.count(self.map.bound_below(lo), self.map.bound_below(hi), space)
        return super().compute_count(lo, hi, space)

    def finiteness(self, space=OMEGA):
        return self.inner.finiteness(space)

    def known_density(self, space=OMEGA):
        image = self.map.image_density()
        if image == 0:
            return Fraction(0)
        factor = self.map.density_factor()
        inner = self.inner.known_density(space)
        if factor is not None and inner is not None:
            return inner * factor
        return None

    def describe(self):
        return f"{self.map.describe()}[{self.inner.describe()}]"


class PreimageSet(SetNode):
    """f^-1[inner]"""

    kind: Literal["preimage"] = "preimage"
    map: "InjectionExpr"
    inner: "SetExpr"

    def check(self, space):
        self.map.check()
        _checked(self.inner, space)

    def contains(self, x, space=OMEGA):
        return self.inner.contains(self.map.apply(x), space)

    def compute_count(self, lo, hi, space):
        if isinstance(self.map, ShiftMap):
            return self.inner.count(lo + self.map.by, hi + self.map.by, space)
        return super().compute_count(lo, hi, space)

    def finiteness(self, space=OMEGA):
        return True if self.inner.finiteness(space) is True else None

    def known_density(self, space=OMEGA):
        if isinstance(self.map, (IdentityMap, ShiftMap)):
            return self.inner.known_density(space)
        return None

    def describe(self):
        return f"{self.map.describe()}^-1[{self.inner.describe()}]"


class AnnotatedSet(SetNode):
    """A set carrying analytic claims; omega_sets.check_annotations cross-checks them"""

    kind: Literal["annotated"] = "annotated"
    inner: "SetExpr"
    density: Optional[Rational] = None
    envelope: Rational = Fraction(1, 16)
    column_bound: Optional[int] = None
    ap_bound: Optional[int] = None
    weight_sum_bound: Optional[Rational] = None
    justification: str = ""

    def check(self, space):
        if self.density is not None and not 0 <= self.density <= 1:
            raise MalformedExpressionError("annotated density must lie in [0, 1]", position="density")
        if self.envelope <= 0:
            raise MalformedExpressionError("annotation envelope must be positive", position="envelope")
        _checked(self.inner, space)

    def contains(self, x, space=OMEGA):
        return self.inner.contains(x, space)

    def compute_window(self, bound, space):
        return self.inner.window(bound, space)

    def compute_count(self, lo, hi, space):
        return self.inner.count(lo, hi, space)

    def finiteness(self, space=OMEGA):
        return self.inner.finiteness(space)

    def known_density(self, space=OMEGA):
        if self.density is not None:
            return self.density
        return self.inner.known_density(space)

    def upper_bound(self, space=OMEGA):
        return self.inner.upper_bound(space)

    def describe(self):
        return self.inner.describe()


# ------------------------------------------------------------ injection nodes


class MapNode(Node):
    def apply(self, x: int) -> int:
        raise NotImplementedError

    def invert(self, y: int) -> Optional[int]:
        """The x with f(x) = y, or None when y is outside the range"""
        raise NotImplementedError

    def check(self):
        pass

    def increasing(self) -> bool:
        return False

    def bound_below(self, n: int) -> int:
        """#{x : f(x) < n} for increasing maps"""
        if not self.increasing():
            raise PreconditionError(f"{self.describe()} is not known to be increasing")
        if n <= 0 or self.apply(0) >= n:
            return 0
        lo, hi = 0, 1
        while self.apply(hi) < n:
            lo, hi = hi, hi * 2
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if self.apply(mid) < n:
                lo = mid
            else:
                hi = mid
        return hi

    def values(self, n: int) -> List[int]:
        """[f(0), ..., f(n-1)]"""
        if n > settings.enumeration_cap:
            _too_large(f"values of {self.describe()}", n)
        return [self.apply(x) for x in range(n)]

    def values_on(self, points) -> List[int]:
        return [self.apply(x) for x in points]

    def image_density(self) -> Optional[Fraction]:
        return None

    def density_factor(self) -> Optional[Fraction]:
        return None


class IdentityMap(MapNode):
    kind: Literal["identity"] = "identity"

    def apply(self, x):
        return x

    def invert(self, y):
        return y

    def increasing(self):
        return True

    def bound_below(self, n):
        return max(n, 0)

    def image_density(self):
        return Fraction(1)

    def density_factor(self):
        return Fraction(1)


class ShiftMap(MapNode):
    kind: Literal["shift"] = "shift"
    by: int = 1

    def check(self):
        if self.by < 0:
            raise MalformedExpressionError("shift must be >= 0", position="by")

    def apply(self, x):
        return x + self.by

    def invert(self, y):
        return y - self.by if y >= self.by else None

    def increasing(self):
        return True

    def bound_below(self, n):
        return max(0, n - self.by)

    def image_density(self):
        return Fraction(1)

    def density_factor(self):
        return Fraction(1)

    def describe(self):
        return f"n+{self.by}"


class AffineMap(MapNode):
    kind: Literal["affine"] = "affine"
    scale: int = 2
    offset: int = 0

    def check(self):
        if self.scale < 1 or self.offset < 0:
            raise MalformedExpressionError("affine maps need scale >= 1 and offset >= 0", position="scale")

    def apply(self, x):
        return self.scale * x + self.offset

    def invert(self, y):
        if y < self.offset or (y - self.offset) % self.scale:
            return None
        return (y - self.offset) // self.scale

    def increasing(self):
        return True

    def bound_below(self, n):
        return max(0, -((self.offset - n) // self.scale))

    def image_density(self):
        return Fraction(1, self.scale)

    def density_factor(self):
        return Fraction(1, self.scale)

    def describe(self):
        return f"{self.scale}n+{self.offset}"


class MonomialMap(MapNode):
    kind: Literal["monomial"] = "monomial"
    power: int = 2

    def check(self):
        if self.power < 1:
            raise MalformedExpressionError("monomial power must be >= 1", position="power")

    def apply(self, x):
        return x ** self.power

    def invert(self, y):
        return exact_root(y, self.power)

    def increasing(self):
        return True

    def bound_below(self, n):
        return iroot(n - 1, self.power) + 1 if n > 0 else 0

    def image_density(self):
        return Fraction(0) if self.power >= 2 else Fraction(1)

    def density_factor(self):
        return None if self.power >= 2 else Fraction(1)

    def describe(self):
        return f"n^{self.power}"


class ExponentialMap(MapNode):
    kind: Literal["exponential"] = "exponential"
    base: int = 2

    def check(self):
        if self.base < 2:
            raise MalformedExpressionError("exponential base must be >= 2", position="base")

    def apply(self, x):
        return self.base ** x

    def invert(self, y):
        if y < 1:
            return None
        k = 0
        while y % self.base == 0:
            y //= self.base
            k += 1
        return k if y == 1 else None

    def increasing(self):
        return True

    def image_density(self):
        return Fraction(0)

    def describe(self):
        return f"{self.base}^n"


class SwapPairsMap(MapNode):
    """2k <-> 2k+1"""

    kind: Literal["swap-pairs"] = "swap-pairs"

    def apply(self, x):
        return x ^ 1

    def invert(self, y):
        return y ^ 1

    def image_density(self):
        return Fraction(1)


class EnumerationMap(MapNode):
    """n -> the n-th element (from 0) of a set, in increasing order"""

    kind: Literal["enumeration"] = "enumeration"
    of: "SetExpr"
    space: BaseSpace = OMEGA

    def check(self):
        _checked(self.of, self.space)

    def _window_holding(self, n: int) -> Tuple[int, ...]:
        bound = _shared_bound(2 * (n + 1))
        while True:
            codes = self.of.window(bound, self.space)
            if len(codes) > n:
                return codes
            top = self.of.upper_bound(self.space)
            if self.of.finiteness(self.space) is True and top is not None and bound >= top:
                raise PreconditionError(
                    f"{self.of.describe()} has only {len(codes)} elements, no element number {n}"
                )
            bound *= 2

    def apply(self, x):
        return self._window_holding(x)[x]

    def values(self, n):
        return list(self._window_holding(n - 1)[:n]) if n > 0 else []

    def values_on(self, points):
        points = list(points)
        if not points:
            return []
        codes = self._window_holding(max(points))
        return [codes[x] for x in points]

    def invert(self, y):
        if not self.of.contains(y, self.space):
            return None
        return self.of.count(0, y, self.space)

    def increasing(self):
        return True

    def bound_below(self, n):
        return self.of.count(0, n, self.space)

    def image_density(self):
        return self.of.known_density(self.space)

    def describe(self):
        return f"enum({self.of.describe()})"


class TableMap(MapNode):
    """Finite table of overrides on top of a default map"""

    kind: Literal["table"] = "table"
    pairs: Tuple[Tuple[int, int], ...]
    default: "InjectionExpr" = Field(default_factory=IdentityMap)

    def _forward(self) -> Dict[int, int]:
        return _table_dicts(self)[0]

    def check(self):
        forward, backward = _table_dicts(self)
        if len(forward) != len(self.pairs) or len(backward) != len(self.pairs):
            raise MalformedExpressionError("table maps need distinct sources and targets", position="pairs")
        self.default.check()

    def apply(self, x):
        forward = self._forward()
        return forward[x] if x in forward else self.default.apply(x)

    def invert(self, y):
        forward, backward = _table_dicts(self)
        if y in backward:
            return backward[y]
        x = self.default.invert(y)
        return None if x is None or x in forward else x

    def describe(self):
        return f"table({len(self.pairs)} pairs)"


@memoized("table-dicts")
def _table_dicts(expr: TableMap):
    forward = dict(expr.pairs)
    backward = {y: x for x, y in expr.pairs}
    return forward, backward


class Piece(Node):
    kind: Literal["piece"] = "piece"
    on: "SetExpr"
    map: "InjectionExpr"


class PiecewiseMap(MapNode):
    """First piece whose set holds x decides; otherwise the default map"""

    kind: Literal["piecewise"] = "piecewise"
    pieces: Tuple[Piece, ...]
    default: "InjectionExpr" = Field(default_factory=IdentityMap)
    space: BaseSpace = OMEGA

    def check(self):
        for piece in self.pieces:
            _checked(piece.on, self.space)
            piece.map.check()
        self.default.check()

    def _owner(self, x: int) -> Optional[int]:
        for i, piece in enumerate(self.pieces):
            if piece.on.contains(x, self.space):
                return i
        return None

    def apply(self, x):
        owner = self._owner(x)
        return self.default.apply(x) if owner is None else self.pieces[owner].map.apply(x)

    def invert(self, y):
        for i, piece in enumerate(self.pieces):
            x = piece.map.invert(y)
            if x is not None and self._owner(x) == i:
                return x
        x = self.default.invert(y)
        if x is not None and self._owner(x) is None:
            return x
        return None

    def describe(self):
        return f"piecewise({len(self.pieces)} pieces)"


class ComposeMap(MapNode):
    """outer ∘ inner"""

    kind: Literal["compose"] = "compose"
    outer: "InjectionExpr"
    inner: "InjectionExpr"

    def check(self):
        self.outer.check()
        self.inner.check()

    def apply(self, x):
        return self.outer.apply(self.inner.apply(x))

    def invert(self, y):
        z = self.outer.invert(y)
        return None if z is None else self.inner.invert(z)

    def increasing(self):
        return self.outer.increasing() and self.inner.increasing()

    def density_factor(self):
        a, b = self.outer.density_factor(), self.inner.density_factor()
        return a * b if a is not None and b is not None else None

    def image_density(self):
        if self.outer.image_density() == 0:
            return Fraction(0)
        a, b = self.outer.density_factor(), self.inner.image_density()
        return a * b if a is not None and b is not None else None

    def describe(self):
        return f"{self.outer.describe()}∘{self.inner.describe()}"


class InverseMap(MapNode):
    """of^-1, defined on the range of of"""

    kind: Literal["inverse"] = "inverse"
    of: "InjectionExpr"

    def check(self):
        self.of.check()

    def apply(self, x):
        y = self.of.invert(x)
        if y is None:
            raise PreconditionError(f"{x} is outside the range of {self.of.describe()}", point=x)
        return y

    def invert(self, y):
        return self.of.apply(y)

    def describe(self):
        return f"({self.of.describe()})^-1"


class PairMap(MapNode):
    """(i, j) -> (outer(i), rows[i](j)) on a pair space"""

    kind: Literal["pair-map"] = "pair-map"
    outer: "InjectionExpr" = Field(default_factory=IdentityMap)
    rows: Tuple["InjectionExpr", ...] = ()
    default_row: "InjectionExpr" = Field(default_factory=IdentityMap)
    space: BaseSpace = OMEGA_SQUARED

    def check(self):
        self.space.require(*PAIRS, what="pair-map")
        self.outer.check()
        for row in self.rows:
            row.check()
        self.default_row.check()

    def row(self, i: int) -> MapNode:
        return self.rows[i] if i < len(self.rows) else self.default_row

    def apply(self, x):
        i, j = self.space.decode(x)
        return self.space.encode((self.outer.apply(i), self.row(i).apply(j)))

    def invert(self, y):
        a, b = self.space.decode(y)
        i = self.outer.invert(a)
        if i is None:
            return None
        j = self.row(i).invert(b)
        return None if j is None else self.space.encode((i, j))

    def describe(self):
        return f"pair-map({self.outer.describe()}, {len(self.rows)} rows)"


class BlockShiftMap(MapNode):
    """x + c_n on the last c_n points of I_n, x + c_(n-1) on the rest of I_n"""

    kind: Literal["block-shift"] = "block-shift"
    schedule: GridSchedule
    tail: CountRule
    first_block: int = 1

    def check(self):
        self.tail.check()

    def shift(self, n: int) -> int:
        if n < self.first_block:
            return 0
        return self.tail.count(self.schedule, n)

    def apply(self, x):
        n = self.schedule.locate(x)
        if n >= self.first_block and x >= self.schedule.end(n) - self.shift(n):
            return x + self.shift(n)
        return x + self.shift(n - 1)

    def invert(self, y):
        n = self.schedule.locate(y)
        for m in (n, n - 1, n - 2):
            if m < 0:
                continue
            for s in (self.shift(m), self.shift(m - 1)):
                x = y - s
                if x >= 0 and self.apply(x) == y:
                    return x
        return None

    def increasing(self):
        return True

    def density_factor(self):
        return Fraction(1)

    def image_density(self):
        return Fraction(1)

    def describe(self):
        return f"block-shift({self.schedule.describe()}, {self.tail.describe()})"


SetExpr = Annotated[
    Union[
        ExplicitSet,
        CofiniteSet,
        AllSet,
        IntervalSet,
        Squares,
        Powers,
        Progression,
        FsSet,
        BlockRule,
        Triangle,
        ProductSet,
        Column,
        Columns,
        Rows,
        CopySet,
        Section,
        SumFilter,
        UnionSet,
        IntersectionSet,
        DifferenceSet,
        ComplementSet,
        ImageSet,
        PreimageSet,
        AnnotatedSet,
    ],
    Field(discriminator="kind"),
]

InjectionExpr = Annotated[
    Union[
        IdentityMap,
        ShiftMap,
        AffineMap,
        MonomialMap,
        ExponentialMap,
        SwapPairsMap,
        EnumerationMap,
        TableMap,
        PiecewiseMap,
        ComposeMap,
        InverseMap,
        PairMap,
        BlockShiftMap,
    ],
    Field(discriminator="kind"),
]

for _model in (
    BlockRule,
    ProductSet,
    Column,
    Columns,
    Rows,
    CopySet,
    Section,
    SumFilter,
    UnionSet,
    IntersectionSet,
    DifferenceSet,
    ComplementSet,
    ImageSet,
    PreimageSet,
    AnnotatedSet,
    EnumerationMap,
    TableMap,
    Piece,
    PiecewiseMap,
    ComposeMap,
    InverseMap,
    PairMap,
):
    _model.model_rebuild()
