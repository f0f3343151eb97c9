"""Directed communication graphs, robustness certification, and MEDAGs.

Nodes are 1-indexed. An edge (j, i) means node j can transmit to node i,
so ``in_neighbors(i)`` is the set of nodes i can hear from. Robustness
checks run on the kernel backend selected in ``_kernels`` (compiled when
available, pure Python otherwise).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, FrozenSet, Iterable, List, Optional, Tuple

from . import _kernels
from .errors import EmptySet, NotRobust, TooLarge

BRUTE_FORCE_GUARD = 20  # max |V \ S| for exhaustive subset enumeration


class Digraph:
    """Immutable digraph with bitmask-backed neighbor lookups."""

    __slots__ = ("n", "edges", "_in_masks", "_out_masks")

    def __init__(self, n: int, edges: Iterable[Tuple[int, int]]):
        if n < 1:
            raise ValueError("node count must be >= 1")
        in_masks = [0] * n
        out_masks = [0] * n
        edge_set = set()
        for j, i in edges:
            if not (1 <= j <= n and 1 <= i <= n):
                raise ValueError(f"edge ({j},{i}) outside 1..{n}")
            if j == i:
                raise ValueError(f"self-loop at node {j}")
            edge_set.add((j, i))
            in_masks[i - 1] |= 1 << (j - 1)
            out_masks[j - 1] |= 1 << (i - 1)
        self.n = n
        self.edges = frozenset(edge_set)
        self._in_masks = tuple(in_masks)
        self._out_masks = tuple(out_masks)

    @classmethod
    def complete(cls, n: int) -> "Digraph":
        return cls(n, [(j, i) for j in range(1, n + 1) for i in range(1, n + 1) if i != j])

    def in_neighbors(self, i: int) -> FrozenSet[int]:
        return _mask_to_set(self._in_masks[i - 1])

    def out_neighbors(self, j: int) -> FrozenSet[int]:
        return _mask_to_set(self._out_masks[j - 1])

    def has_edge(self, j: int, i: int) -> bool:
        return (j, i) in self.edges

    def nodes(self) -> range:
        return range(1, self.n + 1)

    def __eq__(self, other):
        return isinstance(other, Digraph) and self.n == other.n and self.edges == other.edges

    def __hash__(self):
        return hash((self.n, self.edges))

    def __repr__(self):
        return f"Digraph(n={self.n}, edges={len(self.edges)})"


def _set_to_mask(nodes: Iterable[int]) -> int:
    mask = 0
    for v in nodes:
        mask |= 1 << (v - 1)
    return mask


def _mask_to_set(mask: int) -> FrozenSet[int]:
    out = []
    i = 1
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return frozenset(out)


def parse_edge_list(text: str) -> Digraph:
    """Parse the "j i" edge-list format: one directed edge per line,
    1-indexed, whitespace-separated; '#' starts a comment line."""
    edges = []
    n = 0
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValueError(f"line {lineno}: expected 'j i', got {raw!r}")
        try:
            j, i = int(parts[0]), int(parts[1])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: non-integer node id in {raw!r}") from exc
        if j < 1 or i < 1:
            raise ValueError(f"line {lineno}: node ids are 1-indexed")
        edges.append((j, i))
        n = max(n, j, i)
    if n == 0:
        raise ValueError("edge list is empty")
    return Digraph(n, edges)


def is_r_reachable(g: Digraph, c: Iterable[int], r: int) -> bool:
    """True iff some node of c has at least r in-neighbors outside c."""
    c = frozenset(c)
    if not c:
        raise EmptySet("r-reachability is defined for non-empty sets")
    c_mask = _set_to_mask(c)
    return any(
        (g._in_masks[i - 1] & ~c_mask).bit_count() >= r for i in c
    )


def is_strongly_r_robust(g: Digraph, sources: Iterable[int], r: int) -> bool:
    """Peeling check: grow the source set by absorbing every node with
    >= r absorbed in-neighbors; robust iff the closure covers all nodes."""
    s_mask = _set_to_mask(sources)
    if s_mask == 0:
        raise EmptySet("source set must be non-empty")
    return _kernels.peel_robust(g._in_masks, s_mask, r)


def strong_robustness_residual(g: Digraph, sources: Iterable[int], r: int) -> FrozenSet[int]:
    """Nodes the peeling closure cannot absorb; empty iff strongly r-robust.

    The residual is the witness set: every member has fewer than r
    in-neighbors outside it, so it blocks information flow at level r.
    """
    s_mask = _set_to_mask(sources)
    if s_mask == 0:
        raise EmptySet("source set must be non-empty")
    reached = s_mask
    changed = True
    while changed:
        changed = False
        for i in g.nodes():
            if not (reached >> (i - 1)) & 1 and (g._in_masks[i - 1] & reached).bit_count() >= r:
                reached |= 1 << (i - 1)
                changed = True
    return _mask_to_set(((1 << g.n) - 1) & ~reached)


def brute_force_strongly_r_robust(g: Digraph, sources: Iterable[int], r: int) -> bool:
    """Definition-level check enumerating every nonempty subset of V\\S.

    Exponential; guarded at |V\\S| <= 20. Kept as the independent oracle for
    the peeling implementation.
    """
    s_mask = _set_to_mask(sources)
    if s_mask == 0:
        raise EmptySet("source set must be non-empty")
    rest = ((1 << g.n) - 1) & ~s_mask
    if rest.bit_count() > BRUTE_FORCE_GUARD:
        raise TooLarge(f"{rest.bit_count()} non-source nodes exceeds guard {BRUTE_FORCE_GUARD}")
    return _kernels.brute_robust(g._in_masks, s_mask, r)


@dataclass(frozen=True)
class Medag:
    """Per-mode information-flow DAG: levels radiating out of the sources.

    ``neighbors[i]`` is the restricted in-neighbor set a non-source node
    listens to (all baseline in-neighbors in strictly lower levels; empty
    for sources). ``min_indegree`` is the peeling threshold the DAG was
    built with (2f+1, or mf+1 for the erasure-channel protocol).
    """

    n: int
    sources: FrozenSet[int]
    levels: Tuple[FrozenSet[int], ...]
    neighbors: Dict[int, FrozenSet[int]]
    f: int
    min_indegree: int
    mode: Optional[int] = None
    level_of: Dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.level_of:
            object.__setattr__(
                self,
                "level_of",
                {i: m for m, lvl in enumerate(self.levels) for i in lvl},
            )

    @property
    def depth(self) -> int:
        return len(self.levels) - 1


def build_medag(
    g: Digraph,
    sources: Iterable[int],
    f: int,
    mode: Optional[int] = None,
    min_indegree: Optional[int] = None,
) -> Medag:
    """Construct the synchronized-peeling MEDAG for one mode.

    Level 0 is the source set; each later level is every still-unassigned
    node with at least ``min_indegree`` (default 2f+1) in-neighbors in
    lower levels, all joining simultaneously. A node's restricted neighbor
    set is all of its in-neighbors in strictly lower levels.

    Raises NotRobust (with the stuck residual set) when peeling stalls,
    which happens exactly when the graph is not strongly
    ``min_indegree``-robust w.r.t. the sources.
    """
    sources = frozenset(sources)
    if not sources:
        raise EmptySet("source set must be non-empty")
    if f < 0:
        raise ValueError("f must be >= 0")
    r = (2 * f + 1) if min_indegree is None else min_indegree

    levels: List[FrozenSet[int]] = [sources]
    assigned = set(sources)
    assigned_mask = _set_to_mask(sources)
    while len(assigned) < g.n:
        nxt = frozenset(
            i
            for i in g.nodes()
            if i not in assigned and (g._in_masks[i - 1] & assigned_mask).bit_count() >= r
        )
        if not nxt:
            raise NotRobust(set(g.nodes()) - assigned)
        levels.append(nxt)
        assigned |= nxt
        assigned_mask |= _set_to_mask(nxt)

    level_of = {i: m for m, lvl in enumerate(levels) for i in lvl}
    neighbors = {}
    for i in g.nodes():
        if i in sources:
            neighbors[i] = frozenset()
        else:
            mi = level_of[i]
            neighbors[i] = frozenset(
                l for l in g.in_neighbors(i) if level_of[l] < mi
            )
    return Medag(
        n=g.n,
        sources=sources,
        levels=tuple(levels),
        neighbors=neighbors,
        f=f,
        min_indegree=r,
        mode=mode,
    )


def verify_medag_diagnostic(
    g: Digraph,
    m: Medag,
    sources: Iterable[int],
    f: int,
    adversaries: Iterable[int],
) -> Tuple[bool, str]:
    """Check the defining properties of a MEDAG against an adversary set.

    (i) every regular non-source node keeps >= 2f+1 restricted in-neighbors;
    (ii) restricted to the regular nodes, the levels partition them, level 0
    is exactly the regular sources, and every regular restricted neighbor of
    a level-m node sits strictly below level m.

    Returns (ok, reason); reason is "" when ok.
    """
    sources = frozenset(sources)
    adversaries = frozenset(adversaries)
    regular = frozenset(g.nodes()) - adversaries

    seen = set()
    for lvl in m.levels:
        for i in lvl:
            if i in seen:
                return False, f"node {i} appears in two levels"
            seen.add(i)
    missing = regular - seen
    if missing:
        return False, f"regular nodes {sorted(missing)} unassigned to any level"

    if m.levels[0] & regular != sources & regular:
        return False, "level 0 restricted to regular nodes differs from the regular sources"

    threshold = 2 * f + 1
    for i in sorted(regular - sources):
        nbrs = m.neighbors.get(i, frozenset())
        if len(nbrs) < threshold:
            return False, f"node {i} keeps {len(nbrs)} restricted in-neighbors < {threshold}"
        if any(l not in g.in_neighbors(i) for l in nbrs):
            return False, f"node {i} lists a restricted neighbor that is not a baseline in-neighbor"
        mi = m.level_of.get(i)
        if mi is None:
            return False, f"node {i} has no level"
        for l in nbrs & regular:
            if m.level_of.get(l, mi) >= mi:
                return False, f"regular neighbor {l} of node {i} is not in a strictly lower level"
    return True, ""


def verify_medag(
    g: Digraph,
    m: Medag,
    sources: Iterable[int],
    f: int,
    adversaries: Iterable[int] = frozenset(),
) -> bool:
    return verify_medag_diagnostic(g, m, sources, f, adversaries)[0]
