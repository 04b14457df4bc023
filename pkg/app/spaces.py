import logging
from enum import Enum
from math import comb, isqrt
from typing import Optional, Tuple, Union

from pydantic import BaseModel, ConfigDict, model_validator

from app.errors import BaseSpaceMismatchError, MalformedExpressionError

logger = logging.getLogger(__name__)

Point = Union[int, Tuple[int, ...]]


class SpaceKind(str, Enum):
    OMEGA = "omega"
    OMEGA_SQUARED = "omega-squared"
    TWO_COPIES = "two-copies"
    N_SUBSETS = "n-subsets"
    OMEGA_TIMES_OMEGA = "omega-times-omega"


PAIR_KINDS = (SpaceKind.OMEGA_SQUARED, SpaceKind.OMEGA_TIMES_OMEGA)


def pair_encode(i: int, j: int) -> int:
    """Square-shell pairing: [0,K)^2 is exactly [0,K^2)"""
    return j * j + i if i < j else i * i + i + j


def pair_decode(z: int) -> Tuple[int, int]:
    s = isqrt(z)
    r = z - s * s
    return (r, s) if r < s else (s, r - s)


def colex_encode(points: Tuple[int, ...]) -> int:
    return sum(comb(c, i + 1) for i, c in enumerate(points))


def colex_decode(z: int, n: int) -> Tuple[int, ...]:
    points = []
    for i in range(n, 0, -1):
        lo, hi = i - 1, i
        while comb(hi, i) <= z:
            hi *= 2
        # largest c with comb(c, i) <= z lies in [lo, hi)
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if comb(mid, i) <= z:
                lo = mid
            else:
                hi = mid
        points.append(lo)
        z -= comb(lo, i)
    return tuple(reversed(points))


class BaseSpace(BaseModel):
    """A countable base space together with its fixed encoding into omega"""

    model_config = ConfigDict(frozen=True, extra="forbid")

    kind: SpaceKind = SpaceKind.OMEGA
    n: Optional[int] = None

    @model_validator(mode="after")
    def _check_arity(self):
        if self.kind == SpaceKind.N_SUBSETS:
            if self.n is None or self.n < 1:
                raise ValueError("n-subsets needs an arity n >= 1")
        elif self.n is not None:
            raise ValueError(f"{self.kind.value} takes no arity")
        return self

    @property
    def is_pairs(self) -> bool:
        return self.kind in PAIR_KINDS

    @property
    def has_sections(self) -> bool:
        return self.is_pairs or self.kind == SpaceKind.TWO_COPIES

    def label(self) -> str:
        if self.kind == SpaceKind.N_SUBSETS:
            return f"[omega]^{self.n}"
        return self.kind.value

    def encode(self, point: Point) -> int:
        if self.kind == SpaceKind.OMEGA:
            if isinstance(point, tuple):
                if len(point) != 1:
                    raise MalformedExpressionError(f"{point} is not a point of omega")
                point = point[0]
            if point < 0:
                raise MalformedExpressionError(f"negative point {point}")
            return point
        if not isinstance(point, tuple):
            raise MalformedExpressionError(f"{self.label()} points are tuples, got {point!r}")
        if any(c < 0 for c in point):
            raise MalformedExpressionError(f"negative coordinate in {point}")
        if self.is_pairs:
            if len(point) != 2:
                raise MalformedExpressionError(f"{point} is not a pair")
            return pair_encode(point[0], point[1])
        if self.kind == SpaceKind.TWO_COPIES:
            if len(point) != 2 or point[0] not in (0, 1):
                raise MalformedExpressionError(f"{point} is not a point of {{0,1}} x omega")
            return 2 * point[1] + point[0]
        if len(point) != self.n or any(a >= b for a, b in zip(point, point[1:])):
            raise MalformedExpressionError(f"{point} is not an increasing {self.n}-tuple")
        return colex_encode(point)

    def decode(self, z: int) -> Point:
        if z < 0:
            raise MalformedExpressionError(f"negative code {z}")
        if self.kind == SpaceKind.OMEGA:
            return z
        if self.is_pairs:
            return pair_decode(z)
        if self.kind == SpaceKind.TWO_COPIES:
            return (z % 2, z // 2)
        return colex_decode(z, self.n)

    def section_of(self, z: int) -> int:
        """Index of the section (column or copy) holding the encoded point"""
        if not self.has_sections:
            raise BaseSpaceMismatchError(f"{self.label()} has no sections", space=self.label())
        return self.decode(z)[0]

    def bound_for_side(self, side: int) -> int:
        """Code bound whose window is the natural box of the given side"""
        if self.kind == SpaceKind.OMEGA:
            return side
        if self.is_pairs:
            return side * side
        if self.kind == SpaceKind.TWO_COPIES:
            return 2 * side
        return comb(side, self.n)

    def require(self, *kinds: SpaceKind, what: str = "expression"):
        if self.kind not in kinds:
            allowed = ", ".join(k.value for k in kinds)
            raise BaseSpaceMismatchError(
                f"{what} lives on {allowed}, not on {self.label()}", space=self.label()
            )


OMEGA = BaseSpace()
OMEGA_SQUARED = BaseSpace(kind=SpaceKind.OMEGA_SQUARED)
OMEGA_TIMES_OMEGA = BaseSpace(kind=SpaceKind.OMEGA_TIMES_OMEGA)
TWO_COPIES = BaseSpace(kind=SpaceKind.TWO_COPIES)


def n_subsets(n: int) -> BaseSpace:
    return BaseSpace(kind=SpaceKind.N_SUBSETS, n=n)
