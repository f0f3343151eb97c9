"""Communication-loss models for the inter-node links.

All models share one contract: ``begin_step(k)`` draws the step-k
realization of every baseline link (one draw per link per step, in sorted
link order, from per-link seeded streams), and ``deliver(link, msgs, k)``
maps a packet to a list of (arrival_step, msg) outcomes. An empty list is
a drop; arrival steps later than k are queued by the simulation engine.

Per-link streams are derived from (master seed, sender, receiver), so the
realization on one link never depends on how many other links exist.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, UnknownLink
from .graphs import Digraph, Medag
from .protocol import EstimateMsg

Link = Tuple[int, int]

_LINK_TAG = 11
_SCHEDULE_TAG = 13


def _link_rng(seed: int, link: Link) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((seed, _LINK_TAG, link[0], link[1])))


@dataclass(frozen=True)
class WindowSchedule:
    """Round-robin activation of the information-flow edges.

    The union of all per-mode DAG edges is partitioned into T+1 groups;
    step k activates group k mod (T+1) plus a random half of the remaining
    baseline edges. Any T+1 consecutive steps therefore cover every DAG
    edge, which is exactly the windowed-union guarantee the sliding-window
    protocol needs.
    """

    window: int
    groups: Tuple[Tuple[Link, ...], ...]
    others: Tuple[Link, ...]
    seed: int

    def active(self, k: int) -> FrozenSet[Link]:
        group = self.groups[k % (self.window + 1)]
        extras: List[Link] = []
        if self.others:
            rng = np.random.default_rng(np.random.SeedSequence((self.seed, _SCHEDULE_TAG, k)))
            draw = rng.random(len(self.others))
            extras = [e for e, u in zip(self.others, draw) if u < 0.5]
        return frozenset(group) | frozenset(extras)


def medag_edge_union(medags: Iterable[Medag]) -> FrozenSet[Link]:
    edges = set()
    for md in medags:
        for i, nbrs in md.neighbors.items():
            for l in nbrs:
                edges.add((l, i))
    return frozenset(edges)


def make_window_schedule(
    g: Digraph, medags: Sequence[Medag], window: int, seed: int = 0
) -> WindowSchedule:
    """Build a schedule satisfying the windowed-union guarantee for the
    given DAGs. window = 0 degenerates to all DAG edges active every step."""
    if window < 0:
        raise DomainError("window must be >= 0")
    dag_edges = sorted(medag_edge_union(medags))
    groups = tuple(tuple(dag_edges[m:: window + 1]) for m in range(window + 1))
    others = tuple(sorted(set(g.edges) - set(dag_edges)))
    return WindowSchedule(window=window, groups=groups, others=others, seed=seed)


class ChannelModel:
    """Base class: per-step realizations, delivery, and a running digest."""

    kind = "ideal"

    def __init__(self, graph: Digraph, seed: int = 0):
        self.graph = graph
        self.seed = seed
        self._links = tuple(sorted(graph.edges))
        self._rngs: Dict[Link, np.random.Generator] = {}
        self._outcomes: Dict[Link, tuple] = {}
        self._step: Optional[int] = None
        self._hash = hashlib.sha256()

    def _rng(self, link: Link) -> np.random.Generator:
        rng = self._rngs.get(link)
        if rng is None:
            rng = _link_rng(self.seed, link)
            self._rngs[link] = rng
        return rng

    def _draw(self, link: Link, k: int) -> tuple:
        return ("now",)

    def begin_step(self, k: int):
        """Draw the step-k realization of every link, in sorted order."""
        self._step = k
        self._outcomes = {link: self._draw(link, k) for link in self._links}
        self._hash.update(repr((k, sorted(self._outcomes.items()))).encode())

    def outcome(self, link: Link, k: int) -> tuple:
        if self._step != k:
            self.begin_step(k)
        return self._outcomes[link]

    def delivers_now(self, link: Link, k: int) -> bool:
        """Whether a step-k emission on this link arrives at step k."""
        return self.outcome(link, k)[0] == "now"

    def deliver(self, link: Link, msgs: Sequence[EstimateMsg], k: int):
        """Apply the step-k realization to a packet; returns
        [(arrival_step, msg), ...]."""
        if link not in self.graph.edges:
            raise UnknownLink(f"link {link} is not a baseline edge")
        out = self.outcome(link, k)
        if out[0] == "now":
            return [(k, m) for m in msgs]
        return []

    def digest_hex(self) -> str:
        return self._hash.hexdigest()


def transmit(model: "ChannelModel", link: Link, msg: EstimateMsg, k: int):
    """Single-message delivery outcome: [(arrival_step, msg)] or [] (drop).

    Messages sharing a link and step see one channel realization, so this
    is exactly ``deliver`` with a one-element packet.
    """
    return model.deliver(link, [msg], k)


class IdealChannel(ChannelModel):
    kind = "ideal"


class WindowedUnionChannel(ChannelModel):
    """Deterministic link activation from a window schedule; packets on
    inactive links are lost that step."""

    kind = "windowed_union"

    def __init__(self, graph: Digraph, schedule: WindowSchedule, seed: int = 0):
        super().__init__(graph, seed)
        self.schedule = schedule
        self.window = schedule.window
        self._active: FrozenSet[Link] = frozenset()

    def begin_step(self, k: int):
        self._active = self.schedule.active(k)
        super().begin_step(k)

    def _draw(self, link: Link, k: int) -> tuple:
        return ("now",) if link in self._active else ("drop",)


class BoundedDelayChannel(ChannelModel):
    """Every packet arrives, delayed by an integer sampled in [0, T]."""

    kind = "bounded_delay"

    def __init__(self, graph: Digraph, window: int, seed: int = 0, sampler=None):
        if window < 0:
            raise DomainError("delay bound must be >= 0")
        super().__init__(graph, seed)
        self.window = window
        self._sampler = sampler

    def _draw(self, link: Link, k: int) -> tuple:
        rng = self._rng(link)
        if self._sampler is not None:
            tau = int(self._sampler(rng))
            if not 0 <= tau <= self.window:
                raise DomainError(f"sampled delay {tau} outside [0, {self.window}]")
        else:
            tau = int(rng.integers(0, self.window + 1))
        return ("delay", tau)

    def deliver(self, link: Link, msgs: Sequence[EstimateMsg], k: int):
        if link not in self.graph.edges:
            raise UnknownLink(f"link {link} is not a baseline edge")
        _, tau = self.outcome(link, k)
        return [(k + tau, m) for m in msgs]


class BernoulliErasureChannel(ChannelModel):
    """I.i.d. per-link packet drops: erased with probability p, otherwise
    delivered instantly and perfectly."""

    kind = "bernoulli_erasure"

    def __init__(self, graph: Digraph, p: float, seed: int = 0):
        if not 0.0 <= p <= 1.0:
            raise DomainError(f"erasure probability must be in [0,1], got {p}")
        super().__init__(graph, seed)
        self.p = p

    def _draw(self, link: Link, k: int) -> tuple:
        return ("drop",) if self._rng(link).random() < self.p else ("now",)


class ErasureWithDelayChannel(ChannelModel):
    """Erasures replaced by stale packets: with probability 1-e the current
    packet arrives, otherwise the packet sent tau steps ago (tau uniform in
    [1, T]) is replayed. The receiver gets exactly one packet per step with
    age at most T, once the link has been up for T steps."""

    kind = "erasure_with_delay"

    def __init__(self, graph: Digraph, e: float, window: int, seed: int = 0, sampler=None):
        if not 0.0 <= e <= 1.0:
            raise DomainError(f"erasure probability must be in [0,1], got {e}")
        if window < 1:
            raise DomainError("delay bound must be >= 1")
        super().__init__(graph, seed)
        self.e = e
        self.window = window
        self._sampler = sampler
        self._history: Dict[Link, Dict[int, Tuple[EstimateMsg, ...]]] = {}

    def _draw(self, link: Link, k: int) -> tuple:
        rng = self._rng(link)
        if rng.random() < self.e:
            if self._sampler is not None:
                tau = int(self._sampler(rng))
                if not 1 <= tau <= self.window:
                    raise DomainError(f"sampled delay {tau} outside [1, {self.window}]")
            else:
                tau = int(rng.integers(1, self.window + 1))
            return ("old", tau)
        return ("now",)

    def deliver(self, link: Link, msgs: Sequence[EstimateMsg], k: int):
        if link not in self.graph.edges:
            raise UnknownLink(f"link {link} is not a baseline edge")
        hist = self._history.setdefault(link, {})
        hist[k] = tuple(msgs)
        for old in [kk for kk in hist if kk < k - self.window]:
            del hist[old]
        out = self.outcome(link, k)
        if out[0] == "now":
            return [(k, m) for m in msgs]
        replay = hist.get(k - out[1])
        if replay is None:
            return []
        return [(k, m) for m in replay]
