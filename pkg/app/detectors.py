"""Finite witness search: arithmetic progressions, grids, finite sums, Ramsey blocks, columns."""
import logging
from itertools import combinations
from typing import Any, Dict, Iterable, List, Optional, Sequence, Set, Tuple

import networkx as nx

from app.config import settings
from app.errors import EffortExceededError, MalformedExpressionError
from app.expressions import SetNode, finite_sums
from app.models import ApWitness, ColumnProfile, FsWitness, GridWitness, RamseyWitness
from app.spaces import OMEGA, OMEGA_SQUARED, PAIR_KINDS, BaseSpace, SpaceKind, n_subsets

logger = logging.getLogger(__name__)

MAX_RAMSEY_BLOCK = 12


def longest_ap(window: Sequence[int]) -> Tuple[int, ApWitness]:
    """Longest AP inside a finite set; ties go to the smallest step, then the smallest start"""
    points = sorted(set(window))
    if not points:
        return 0, ApWitness(start=0, step=1, length=0)
    members = set(points)
    top = points[-1]
    best = (1, 1, points[0])
    for i, a in enumerate(points):
        for b in points[i + 1:]:
            d = b - a
            if a + (best[0] - 1) * d > top:
                break
            if a - d in members:
                continue
            length = 2
            while a + length * d in members:
                length += 1
            if (-length, d, a) < (-best[0], best[1], best[2]):
                best = (length, d, a)
    length, step, start = best
    return length, ApWitness(start=start, step=step, length=length)


def find_ap(window: Sequence[int], length: int) -> Optional[ApWitness]:
    """AP of the requested length with the least step, then the least start"""
    points = sorted(set(window))
    if length <= 0:
        return ApWitness(start=0, step=1, length=0)
    if not points:
        return None
    if length == 1:
        return ApWitness(start=points[0], step=1, length=1)
    members = set(points)
    span = points[-1] - points[0]
    for d in range(1, span // (length - 1) + 1):
        for a in points:
            if a + (length - 1) * d > points[-1]:
                break
            if all(a + t * d in members for t in range(1, length)):
                return ApWitness(start=a, step=d, length=length)
    return None


def find_grid_copy(points: Iterable[Tuple[int, ...]], k: int) -> Optional[GridWitness]:
    """v + α·{1..k}^n inside the points; α ascending, then v lexicographic"""
    if k < 1:
        raise MalformedExpressionError(f"grid side must be >= 1, got {k}")
    members = set(points)
    if not members:
        return None
    ordered = sorted(members)
    width = max(max(p) for p in ordered) + 1
    for alpha in range(1, width // k + 1):
        for p in ordered:
            v = tuple(c - alpha for c in p)
            if min(v) < 0:
                continue
            candidate = GridWitness(v=v, alpha=alpha, k=k)
            if all(q in members for q in candidate.points()):
                return candidate
    return None


def fs_contained(generators: Sequence[int], target: SetNode, space: BaseSpace = None) -> Tuple[bool, Tuple[int, ...]]:
    """Whether FS(B) ⊆ target, with the FS(B) listing"""
    sums = finite_sums(tuple(sorted(set(generators))))
    if space is None:
        return all(target.contains(s) for s in sums), sums
    return all(target.contains(s, space) for s in sums), sums


def find_fs_generator(window: Sequence[int], n: int, bound: Optional[int] = None) -> Optional[FsWitness]:
    """Lexicographically least B, |B| = n, with distinct subset sums and FS(B) inside the window"""
    if n < 1:
        raise MalformedExpressionError(f"generator size must be >= 1, got {n}")
    points = sorted(set(window))
    members = set(points)
    limit = bound if bound is not None else (points[-1] + 1 if points else 0)
    budget = [settings.enumeration_cap]

    def extend(chosen: List[int], sums: Set[int], start: int) -> Optional[List[int]]:
        if len(chosen) == n:
            return chosen
        for idx in range(start, len(points)):
            x = points[idx]
            budget[0] -= 1
            if budget[0] < 0:
                raise EffortExceededError(f"finite-sums search for n={n} ran out of steps", n=n)
            if x in sums or x == 0:
                continue
            fresh = {s + x for s in sums}
            if any(s >= limit or s not in members or s in sums for s in fresh):
                continue
            found = extend(chosen + [x], sums | fresh | {x}, idx + 1)
            if found is not None:
                return found
        return None

    found = extend([], set(), 0)
    if found is None:
        return None
    return FsWitness(generators=found, sums=list(finite_sums(tuple(found))))


def _clique_pruned_graph(edges: Iterable[Tuple[int, int]], m: int) -> nx.Graph:
    graph = nx.Graph()
    graph.add_edges_from(edges)
    return nx.k_core(graph, m - 1) if m >= 2 else graph


def ramsey_block(codes: Sequence[int], n: int, m: int) -> Optional[RamseyWitness]:
    """Colex-least B with |B| = m and every n-subset of B among the encoded points"""
    if n not in (2, 3):
        raise MalformedExpressionError(f"Ramsey blocks are searched for n in (2, 3), got {n}")
    if m > MAX_RAMSEY_BLOCK:
        raise EffortExceededError(f"block size {m} is above the clique-search cap {MAX_RAMSEY_BLOCK}", m=m)
    space = n_subsets(n)
    tuples = {space.decode(z) for z in codes}
    if m < n:
        # no n-subsets to check
        return RamseyWitness(block=list(range(m)), n=n)
    if n == 2:
        graph = _clique_pruned_graph(tuples, m)
        if graph.number_of_nodes() == 0 or max(len(c) for c in nx.find_cliques(graph)) < m:
            return None
        vertices = sorted(graph.nodes())
        adjacent = {v: set(graph.neighbors(v)) for v in vertices}
    else:
        vertices = sorted({v for t in tuples for v in t})
        adjacent = None

    def fits(x: int, chosen: List[int]) -> bool:
        if adjacent is not None:
            return all(c in adjacent[x] for c in chosen)
        return all(tuple(sorted((x,) + pair)) in tuples for pair in combinations(chosen, n - 1))

    def search(chosen: List[int], below: int) -> Optional[List[int]]:
        if len(chosen) == m:
            return chosen
        for x in vertices:
            if x >= below:
                break
            if fits(x, chosen):
                found = search(chosen + [x], x)
                if found is not None:
                    return found
        return None

    # colex order compares the largest element first
    for top in vertices:
        found = search([top], top)
        if found is not None:
            return RamseyWitness(block=sorted(found), n=n)
    return None


def column_profile(codes: Sequence[int], space: BaseSpace = OMEGA_SQUARED) -> ColumnProfile:
    """Point counts per column k of a pair-space window"""
    space.require(*PAIR_KINDS, what="column profile")
    counts: Dict[int, int] = {}
    for z in codes:
        column = space.decode(z)[0]
        counts[column] = counts.get(column, 0) + 1
    if not counts:
        return ColumnProfile(counts={}, max=0)
    top = max(counts.values())
    argmax = min(column for column, count in counts.items() if count == top)
    return ColumnProfile(counts=dict(sorted(counts.items())), max=top, argmax=argmax)


DETECTORS = ("ap", "grid", "fs", "ramsey", "columns")


def run_detector(
    name: str,
    expr: SetNode,
    bound: int,
    space: BaseSpace = OMEGA,
    length: Optional[int] = None,
    side: int = 2,
    size: int = 2,
    block: int = 3,
) -> Dict[str, Any]:
    """One detector over expr ∩ [0, bound), in the shape the CLI and the HTTP routes report"""
    if name not in DETECTORS:
        raise MalformedExpressionError(
            f"unknown detector {name!r}, expected one of {', '.join(DETECTORS)}", position="detector"
        )
    codes = expr.window(bound, space)
    if name == "ap":
        space.require(SpaceKind.OMEGA, what="AP search")
        if length is None:
            best, witness = longest_ap(codes)
            return {"length": best, "witness": witness}
        witness = find_ap(codes, length)
        return {"length": length, "found": witness is not None, "witness": witness}
    if name == "grid":
        points = [p if isinstance(p, tuple) else (p,) for p in map(space.decode, codes)]
        witness = find_grid_copy(points, side)
        return {"side": side, "found": witness is not None, "witness": witness}
    if name == "fs":
        space.require(SpaceKind.OMEGA, what="finite-sums search")
        witness = find_fs_generator(codes, size, bound)
        return {"size": size, "found": witness is not None, "witness": witness}
    if name == "ramsey":
        space.require(SpaceKind.N_SUBSETS, what="Ramsey block search")
        witness = ramsey_block(codes, space.n, block)
        return {"arity": space.n, "block": block, "found": witness is not None, "witness": witness}
    return {"profile": column_profile(codes, space)}
