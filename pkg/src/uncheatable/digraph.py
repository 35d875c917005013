"""Constant-degree resilient digraphs.

A digraph on ``n`` vertices is (alpha, beta)-resilient when every vertex
subset of size at least ``alpha * n`` induces a strongly connected component
with at least ``beta * n`` vertices.  The graphs used by the diagnosis
protocols are unions of ``d`` random directed Hamiltonian cycles.

Vertices are ``0 .. n-1``.  Subset checks use Python ints as bitmasks, which
keeps exhaustive enumeration cheap for the small ``n`` it is meant for.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Iterator, TextIO

import numpy as np

Fractional = int | float | Fraction | str


class ResilienceNotFound(RuntimeError):
    """No sampled graph passed verification within the attempt budget."""


def as_fraction(x: Fractional) -> Fraction:
    """Exact rational for ``x``; accepts ``"p/q"`` strings and floats.

    Floats are snapped to the nearest fraction with a small denominator so
    that ``0.8 * 5`` rounds up to 4 rather than 5.
    """
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x.strip())
    return Fraction(x).limit_denominator(1_000_000)


def ceil_part(frac: Fractional, n: int) -> int:
    """``ceil(frac * n)`` computed exactly."""
    return math.ceil(as_fraction(frac) * n)


def _check_fraction(name: str, value: Fraction, *, allow_one: bool = True) -> None:
    upper_ok = value <= 1 if allow_one else value < 1
    if not (0 < value and upper_ok):
        bound = "(0, 1]" if allow_one else "(0, 1)"
        raise ValueError(f"{name} must lie in {bound}, got {value}")


def _bits(mask: int) -> Iterator[int]:
    while mask:
        low = mask & -mask
        yield low.bit_length() - 1
        mask ^= low


@dataclass(frozen=True)
class Digraph:
    """Simple directed graph: no self-loops, no parallel edges."""

    n: int
    edges: frozenset[tuple[int, int]] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("a digraph needs at least one vertex")
        edges = frozenset((int(u), int(v)) for u, v in self.edges)
        for u, v in edges:
            if u == v:
                raise ValueError(f"self-loop at vertex {u}")
            if not (0 <= u < self.n and 0 <= v < self.n):
                raise ValueError(f"edge ({u}, {v}) out of range for n={self.n}")
        object.__setattr__(self, "edges", edges)

    @classmethod
    def complete(cls, n: int) -> Digraph:
        return cls(n, frozenset((u, v) for u in range(n) for v in range(n) if u != v))

    @classmethod
    def cycle(cls, order: Iterable[int]) -> Digraph:
        order = list(order)
        k = len(order)
        return cls(k, frozenset((order[i], order[(i + 1) % k]) for i in range(k) if k > 1))

    @cached_property
    def successors(self) -> tuple[tuple[int, ...], ...]:
        out: list[list[int]] = [[] for _ in range(self.n)]
        for u, v in sorted(self.edges):
            out[u].append(v)
        return tuple(tuple(s) for s in out)

    @cached_property
    def out_masks(self) -> tuple[int, ...]:
        masks = [0] * self.n
        for u, v in self.edges:
            masks[u] |= 1 << v
        return tuple(masks)

    @cached_property
    def in_masks(self) -> tuple[int, ...]:
        masks = [0] * self.n
        for u, v in self.edges:
            masks[v] |= 1 << u
        return tuple(masks)

    def out_degree(self, v: int) -> int:
        return self.out_masks[v].bit_count()

    def in_degree(self, v: int) -> int:
        return self.in_masks[v].bit_count()

    @property
    def degree(self) -> int:
        """Maximum in- or out-degree over all vertices."""
        return max(max(m.bit_count() for m in self.out_masks), max(m.bit_count() for m in self.in_masks))

    def relabel(self, mapping: list[int]) -> Digraph:
        return Digraph(self.n, frozenset((mapping[u], mapping[v]) for u, v in self.edges))

    # -- edge-list text format -------------------------------------------------

    def to_edgelist(self) -> str:
        lines = [f"{self.n} {len(self.edges)}"]
        lines.extend(f"{u} {v}" for u, v in sorted(self.edges))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edgelist(cls, text: str | TextIO) -> Digraph:
        if not isinstance(text, str):
            text = text.read()
        rows = [line.split() for line in text.splitlines() if line.strip()]
        if not rows or len(rows[0]) != 2:
            raise ValueError("edge list must start with a 'n m' header line")
        n, m = int(rows[0][0]), int(rows[0][1])
        body = rows[1:]
        if len(body) != m:
            raise ValueError(f"header declares {m} edges, found {len(body)}")
        edges = []
        for row in body:
            if len(row) != 2:
                raise ValueError(f"malformed edge line: {' '.join(row)!r}")
            edges.append((int(row[0]), int(row[1])))
        if len(set(edges)) != len(edges):
            raise ValueError("duplicate edges in edge list")
        return cls(n, frozenset(edges))


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_hamiltonian_union(n: int, d: int, seed=None) -> Digraph:
    """Union of ``d`` independent uniform directed Hamiltonian cycles.

    Each cycle follows the order of a fresh uniform permutation drawn from a
    PCG64 generator; coinciding edges collapse, so degrees may fall below d.
    ``seed`` may be an int or an existing ``numpy.random.Generator``.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if d < 1:
        raise ValueError(f"need d >= 1, got {d}")
    rng = _rng(seed)
    edges = set()
    for _ in range(d):
        perm = rng.permutation(n).tolist()
        edges.update((perm[i], perm[(i + 1) % n]) for i in range(n))
    return Digraph(n, frozenset(edges))


def scc_partition(g: Digraph) -> list[frozenset[int]]:
    """Strongly connected components (iterative Tarjan), in reverse topological order."""
    index: dict[int, int] = {}
    lowlink: dict[int, int] = {}
    on_stack: set[int] = set()
    stack: list[int] = []
    components: list[frozenset[int]] = []
    counter = itertools.count()
    succ = g.successors

    for root in range(g.n):
        if root in index:
            continue
        index[root] = lowlink[root] = next(counter)
        stack.append(root)
        on_stack.add(root)
        work = [(root, iter(succ[root]))]
        while work:
            v, it = work[-1]
            for w in it:
                if w not in index:
                    index[w] = lowlink[w] = next(counter)
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(succ[w])))
                    break
                if w in on_stack:
                    lowlink[v] = min(lowlink[v], index[w])
            else:
                work.pop()
                if work:
                    parent = work[-1][0]
                    lowlink[parent] = min(lowlink[parent], lowlink[v])
                if lowlink[v] == index[v]:
                    comp = set()
                    while True:
                        w = stack.pop()
                        on_stack.discard(w)
                        comp.add(w)
                        if w == v:
                            break
                    components.append(frozenset(comp))
    return components


def _reach(masks: tuple[int, ...], start: int, within: int) -> int:
    seen = 1 << start
    frontier = seen
    while frontier:
        nxt = 0
        for v in _bits(frontier):
            nxt |= masks[v]
        nxt &= within & ~seen
        seen |= nxt
        frontier = nxt
    return seen


def induced_scc_masks(g: Digraph, subset: int) -> list[int]:
    """SCCs of the subgraph induced by the bitmask ``subset``, as bitmasks."""
    out = []
    remaining = subset
    while remaining:
        v = (remaining & -remaining).bit_length() - 1
        comp = _reach(g.out_masks, v, remaining) & _reach(g.in_masks, v, remaining)
        out.append(comp)
        remaining &= ~comp
    return out


def has_large_induced_scc(g: Digraph, subset: int, size: int) -> bool:
    """True iff the induced subgraph on ``subset`` has an SCC of >= ``size`` vertices."""
    remaining = subset
    while remaining.bit_count() >= size:
        v = (remaining & -remaining).bit_length() - 1
        comp = _reach(g.out_masks, v, remaining) & _reach(g.in_masks, v, remaining)
        if comp.bit_count() >= size:
            return True
        remaining &= ~comp
    return False


def _subset_masks(n: int, k: int) -> Iterator[int]:
    for combo in itertools.combinations(range(n), k):
        mask = 0
        for v in combo:
            mask |= 1 << v
        yield mask


def is_resilient(g: Digraph, alpha: Fractional, beta: Fractional) -> bool:
    """Exhaustive (alpha, beta)-resilience check.

    Only subsets of exactly ``ceil(alpha*n)`` vertices are examined: an SCC
    of an induced subgraph survives when more vertices are added.  Cost is
    ``C(n, ceil(alpha*n))`` SCC computations.
    """
    a, b = as_fraction(alpha), as_fraction(beta)
    _check_fraction("alpha", a)
    _check_fraction("beta", b)
    if b > a:
        raise ValueError(f"beta ({b}) must not exceed alpha ({a})")
    k = ceil_part(a, g.n)
    m = ceil_part(b, g.n)
    return all(has_large_induced_scc(g, mask, m) for mask in _subset_masks(g.n, k))


def cut_condition_holds(g: Digraph, lam: Fractional, gamma: Fractional) -> bool:
    """Two-way edge condition that certifies resilience.

    True iff for every pair of disjoint vertex sets A, B with
    ``|A| + |B| = ceil(lam*n)`` and ``|A|, |B| <= ceil((1+gamma)/2 * lam * n)``
    there is an edge from A to B and an edge from B to A.  When it holds,
    every ``ceil(lam*n)``-subset induces an SCC of size ``ceil(gamma*lam*n)``.
    """
    lam_f, gamma_f = as_fraction(lam), as_fraction(gamma)
    _check_fraction("lambda", lam_f)
    _check_fraction("gamma", gamma_f)
    total = ceil_part(lam_f, g.n)
    cap = ceil_part((1 + gamma_f) / 2 * lam_f, g.n)
    lo = max(0, total - cap)
    out = g.out_masks

    def spread(mask: int) -> int:
        acc = 0
        for v in _bits(mask):
            acc |= out[v]
        return acc

    for w in _subset_masks(g.n, total):
        members = list(_bits(w))
        for size_a in range(lo, min(cap, total) + 1):
            for combo in itertools.combinations(members, size_a):
                a = 0
                for v in combo:
                    a |= 1 << v
                b = w & ~a
                if not (spread(a) & b) or not (spread(b) & a):
                    return False
    return True


def union_failure_exponent(gamma: Fractional, lam: Fractional, d: int) -> float:
    """Coefficient ``c`` of the failure bound ``exp(c*n + O(1))`` for a d-cycle union.

    ``c = (1+lam) ln 2 + d (a ln a + b ln b - (1-lam) ln(1-lam))`` where
    ``a = 1 - (1-gamma) lam / 2`` and ``b = 1 - (1+gamma) lam / 2``.  A
    non-negative result means the bound is vacuous.
    """
    g_f, l_f = as_fraction(gamma), as_fraction(lam)
    _check_fraction("gamma", g_f, allow_one=False)
    _check_fraction("lambda", l_f, allow_one=False)
    if d < 0:
        raise ValueError(f"d must be non-negative, got {d}")
    a = 1 - (1 - g_f) * l_f / 2
    b = 1 - (1 + g_f) * l_f / 2
    if not (0 < a < 1 and 0 < b < 1):
        raise ValueError(f"derived terms must lie in (0, 1): a={a}, b={b}")
    a, b, lam_x = float(a), float(b), float(l_f)
    inner = a * math.log(a) + b * math.log(b) - (1 - lam_x) * math.log(1 - lam_x)
    return (1 + lam_x) * math.log(2) + d * inner


@dataclass(frozen=True)
class ResilientGraph:
    graph: Digraph
    verified: bool
    attempts: int


def monte_carlo_resilient(
    n: int,
    d: int,
    alpha: Fractional,
    beta: Fractional,
    max_attempts: int = 50,
    seed=None,
    verify_limit: int = 24,
) -> ResilientGraph:
    """Draw Hamiltonian-cycle unions until one is verified resilient.

    Above ``verify_limit`` vertices the first draw is returned with
    ``verified=False``: exhaustive checking is infeasible there and the
    construction is only correct with high probability.
    """
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if max_attempts < 1:
        raise ValueError("max_attempts must be at least 1")
    rng = _rng(seed)
    if n > verify_limit:
        return ResilientGraph(random_hamiltonian_union(n, d, rng), False, 1)
    for attempt in range(1, max_attempts + 1):
        g = random_hamiltonian_union(n, d, rng)
        if is_resilient(g, alpha, beta):
            return ResilientGraph(g, True, attempt)
    raise ResilienceNotFound(
        f"no ({alpha}, {beta})-resilient union of {d} cycles on {n} vertices "
        f"in {max_attempts} attempts"
    )
