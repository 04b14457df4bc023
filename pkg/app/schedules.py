import logging
from enum import Enum
from math import factorial
from typing import List, Tuple

from pydantic import BaseModel, ConfigDict, model_validator

from app.cache import memoized
from app.errors import EffortExceededError, MalformedExpressionError

logger = logging.getLogger(__name__)

# (2^n)! past this argument is no longer desk scale
MAX_FACTORIAL_ARGUMENT = 1 << 16


class ScheduleKind(str, Enum):
    FACTORIAL = "factorial"
    TWO_POW_FACTORIAL = "two-pow-factorial"
    DYADIC_KN = "dyadic-kn"
    FOUR_POWER = "four-power"
    CUSTOM = "custom"


def _factorial(m: int) -> int:
    if m > MAX_FACTORIAL_ARGUMENT:
        raise EffortExceededError(
            f"{m}! is beyond the exact arithmetic limit ({MAX_FACTORIAL_ARGUMENT}!)", argument=m
        )
    return factorial(m)


@memoized("dyadic-k")
def dyadic_k(n: int) -> int:
    """k_0 = 0 and k_n is the least x with 2^x >= n * 2^(k_{n-1})"""
    k = 0
    for m in range(1, n + 1):
        k += (m - 1).bit_length()
    return k


class GridSchedule(BaseModel):
    """Consecutive intervals I_0, I_1, ... partitioning omega, offsets exact"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: ScheduleKind
    lengths: Tuple[int, ...] = ()

    @model_validator(mode="after")
    def _check_lengths(self):
        if self.kind == ScheduleKind.CUSTOM:
            if not self.lengths:
                raise ValueError("custom schedules need at least one length")
            if any(length < 1 for length in self.lengths):
                raise ValueError("custom lengths must be positive")
        elif self.lengths:
            raise ValueError(f"{self.kind.value} schedules take no lengths")
        return self

    def start(self, n: int) -> int:
        if n < 0:
            raise MalformedExpressionError(f"negative interval index {n}")
        return _start(self, n)

    def length(self, n: int) -> int:
        if self.kind == ScheduleKind.FACTORIAL:
            return _factorial(n)
        if self.kind == ScheduleKind.TWO_POW_FACTORIAL:
            if n > MAX_FACTORIAL_ARGUMENT.bit_length():
                raise EffortExceededError(f"(2^{n})! is beyond exact arithmetic", index=n)
            return _factorial(1 << n)
        if self.kind == ScheduleKind.CUSTOM:
            return self.lengths[min(n, len(self.lengths) - 1)]
        return self.end(n) - self.start(n)

    def end(self, n: int) -> int:
        if self.kind == ScheduleKind.DYADIC_KN:
            return 1 << dyadic_k(n + 1) if n >= 1 else 1
        if self.kind == ScheduleKind.FOUR_POWER:
            return 4 ** (n + 1)
        return self.start(n) + self.length(n)

    def bounds(self, n: int) -> Tuple[int, int]:
        return self.start(n), self.end(n)

    def scale(self, n: int) -> int:
        """Block scale s_n = max(min I_n, 1); equals 2^(k_n) for dyadic-kn"""
        return max(self.start(n), 1)

    def locate(self, x: int) -> int:
        """Index n with x in I_n"""
        if x < 0:
            raise MalformedExpressionError(f"negative point {x}")
        if self.kind == ScheduleKind.CUSTOM:
            prefix = 0
            for n, length in enumerate(self.lengths):
                if x < prefix + length:
                    return n
                prefix += length
            last = len(self.lengths) - 1
            return last + (x - prefix) // self.lengths[-1] + 1
        if self.kind == ScheduleKind.FOUR_POWER:
            n = 0
            while 4 ** (n + 1) <= x:
                n += 1
            return n
        n = 0
        while self.end(n) <= x:
            n += 1
        return n

    def blocks_between(self, lo: int, hi: int) -> List[int]:
        """Indices of the intervals meeting [lo, hi)"""
        if hi <= lo:
            return []
        first, last = self.locate(lo), self.locate(hi - 1)
        return list(range(first, last + 1))

    def is_growing(self) -> bool:
        """Lengths are nondecreasing and unbounded"""
        return self.kind != ScheduleKind.CUSTOM

    def describe(self) -> str:
        if self.kind == ScheduleKind.CUSTOM:
            return f"custom{list(self.lengths)}"
        return self.kind.value


@memoized("schedule-start")
def _start(schedule: GridSchedule, n: int) -> int:
    if schedule.kind == ScheduleKind.DYADIC_KN:
        return 1 << dyadic_k(n) if n >= 1 else 0
    if schedule.kind == ScheduleKind.FOUR_POWER:
        return 4 ** n if n >= 1 else 0
    if schedule.kind == ScheduleKind.CUSTOM:
        head = schedule.lengths[:n]
        return sum(head) + max(0, n - len(schedule.lengths)) * schedule.lengths[-1]
    if n == 0:
        return 0
    return _start(schedule, n - 1) + schedule.length(n - 1)


FACTORIAL = GridSchedule(kind=ScheduleKind.FACTORIAL)
TWO_POW_FACTORIAL = GridSchedule(kind=ScheduleKind.TWO_POW_FACTORIAL)
DYADIC_KN = GridSchedule(kind=ScheduleKind.DYADIC_KN)
FOUR_POWER = GridSchedule(kind=ScheduleKind.FOUR_POWER)
