"""Per-node estimation state machine and the trimmed-consensus updates.

Two consensus variants exist for the modes a node cannot detect locally:

* sliding-window: rescale the freshest buffered estimate of each restricted
  neighbor back to "now" through the mode dynamics, discard the f largest
  and f smallest, take a convex combination, multiply by the eigenvalue;
* memoryless: use only estimates received this step when at least 2f+1
  restricted neighbors delivered, otherwise propagate the own estimate
  open-loop through the dynamics.

Stable undetectable modes always run open-loop (their truth decays anyway).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, FrozenSet, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .errors import DomainError, TooFewValues
from .lti import ObserverGains, observer_step

WEIGHT_RULES = ("uniform", "median")

SWLFSE = "swlfse"
LFSE = "lfse"
PROTOCOLS = (SWLFSE, LFSE)


@dataclass(frozen=True, slots=True)
class EstimateMsg:
    """A time-stamped per-mode estimate in flight.

    Regular nodes always stamp the emission step; adversaries may forge the
    stamp or omit it (``timestamp_missing``).
    """

    sender: int
    mode: int
    value: float
    timestamp: int
    timestamp_missing: bool = False


class NodeBuffer:
    """Latest received (value, timestamp) per (mode, sender).

    Entries only move forward in time: a message is stored iff its
    timestamp is strictly newer than what is already held. Missing slots
    read as None (the "no message yet" sentinel).
    """

    __slots__ = ("_slots",)

    def __init__(self):
        self._slots: Dict[Tuple[int, int], Tuple[float, int]] = {}

    def store(self, mode: int, sender: int, value: float, timestamp: int) -> bool:
        key = (mode, sender)
        prev = self._slots.get(key)
        if prev is not None and timestamp <= prev[1]:
            return False
        self._slots[key] = (value, timestamp)
        return True

    def get(self, mode: int, sender: int) -> Optional[Tuple[float, int]]:
        return self._slots.get((mode, sender))

    def view(self, mode: int, senders: Iterable[int]) -> Dict[int, Optional[Tuple[float, int]]]:
        return {l: self._slots.get((mode, l)) for l in senders}


@dataclass(frozen=True)
class TrimResult:
    kept: Tuple[Tuple[int, float], ...]
    discarded_high: Tuple[Tuple[int, float], ...]
    discarded_low: Tuple[Tuple[int, float], ...]


def rescale_delayed(lambda_j: float, tau: int, value: Optional[float]) -> float:
    """Propagate a tau-steps-old estimate to the present through the mode
    dynamics; the None sentinel (nothing received yet) maps to 0."""
    if value is None:
        return 0.0
    return (lambda_j ** tau) * value


def trim_extremes(values: Sequence[Tuple[int, float]], f: int) -> TrimResult:
    """Discard the f largest and f smallest of (node, value) pairs.

    Sorted descending by value, ties broken by ascending node id, so the
    outcome is deterministic for replay.
    """
    if f < 0:
        raise DomainError("f must be >= 0")
    vals = list(values)
    if len(vals) < 2 * f + 1:
        raise TooFewValues(f"need at least {2 * f + 1} values, got {len(vals)}")
    ordered = sorted(vals, key=lambda nv: (-nv[1], nv[0]))
    return TrimResult(
        kept=tuple(ordered[f: len(ordered) - f]),
        discarded_high=tuple(ordered[:f]),
        discarded_low=tuple(ordered[len(ordered) - f:]) if f else (),
    )


def _combine(kept: Sequence[Tuple[int, float]], weight_rule: str) -> float:
    if weight_rule == "uniform":
        return sum(v for _, v in kept) / len(kept)
    if weight_rule == "median":
        vals = [v for _, v in kept]   # already sorted descending
        m = len(vals)
        if m % 2:
            return vals[m // 2]
        return 0.5 * (vals[m // 2 - 1] + vals[m // 2])
    raise DomainError(f"unknown weight rule {weight_rule!r}; expected one of {WEIGHT_RULES}")


def swlfse_update(
    lambda_j: float,
    entries: Mapping[int, Optional[Tuple[float, int]]],
    k: int,
    f: int,
    weight_rule: str = "uniform",
) -> float:
    """Sliding-window consensus step for one mode.

    ``entries`` maps each restricted neighbor to its buffered
    (value, timestamp) or None; every neighbor contributes a rescaled value
    (0 for the sentinel), so the trim precondition holds whenever the
    restricted neighborhood has at least 2f+1 members.
    """
    vals: List[Tuple[int, float]] = []
    for l in sorted(entries):
        e = entries[l]
        if e is None:
            vals.append((l, 0.0))
        else:
            value, ts = e
            vals.append((l, rescale_delayed(lambda_j, k - ts, value)))
    kept = trim_extremes(vals, f).kept
    return lambda_j * _combine(kept, weight_rule)


def lfse_update(
    lambda_j: float,
    received: Sequence[Tuple[int, float]],
    f: int,
    current: float,
    weight_rule: str = "uniform",
) -> float:
    """Memoryless consensus step: trimmed combination when at least 2f+1
    estimates arrived this step, open-loop propagation otherwise."""
    if len(received) >= 2 * f + 1:
        kept = trim_extremes(received, f).kept
        return lambda_j * _combine(kept, weight_rule)
    return lambda_j * current


class RegularNode:
    """State machine of one non-compromised node.

    Holds the full modal estimate vector, the local observer for the
    detectable modes, and per-mode consensus machinery for the unstable
    undetectable ones. All inter-node interaction goes through
    ``emit``/``receive``; ``update`` advances the estimate one step.
    """

    def __init__(
        self,
        node_id: int,
        lambdas: np.ndarray,
        gains: ObserverGains,
        consensus_neighbors: Mapping[int, FrozenSet[int]],
        f: int,
        variant: str = SWLFSE,
        weight_rule: str = "uniform",
    ):
        if variant not in PROTOCOLS:
            raise DomainError(f"unknown protocol variant {variant!r}")
        if weight_rule not in WEIGHT_RULES:
            raise DomainError(f"unknown weight rule {weight_rule!r}")
        self.node_id = node_id
        self.lambdas = np.asarray(lambdas, dtype=float)
        self.gains = gains
        self.consensus_neighbors = {j: frozenset(s) for j, s in consensus_neighbors.items()}
        self.f = f
        self.variant = variant
        self.weight_rule = weight_rule
        self.estimate = np.zeros(self.lambdas.shape[0])

        n = self.lambdas.shape[0]
        detectable = set(gains.modes)
        self.consensus_modes = tuple(sorted(self.consensus_neighbors))
        self.open_loop_modes = tuple(
            j
            for j in range(1, n + 1)
            if j not in detectable and j not in self.consensus_neighbors
        )
        self.buffer = NodeBuffer()
        self._received_now: Dict[int, Dict[int, float]] = {j: {} for j in self.consensus_modes}

    def emit(self, k: int) -> Tuple[EstimateMsg, ...]:
        """Time-stamped estimates of all modes, for every out-neighbor."""
        return tuple(
            EstimateMsg(self.node_id, j, float(self.estimate[j - 1]), k)
            for j in range(1, self.lambdas.shape[0] + 1)
        )

    def receive(self, msg: EstimateMsg, now: int):
        """First-stage filter + store: only restricted neighbors of the
        message's mode are heard.

        Sliding-window mode buffers (value, timestamp); a missing or future
        stamp is clamped to a zero estimate stamped ``now``. Memoryless mode
        ignores stamps entirely: whatever arrives this step counts as this
        step's estimate."""
        nbrs = self.consensus_neighbors.get(msg.mode)
        if nbrs is None or msg.sender not in nbrs:
            return
        if self.variant == SWLFSE:
            value, ts = msg.value, msg.timestamp
            if msg.timestamp_missing or ts > now:
                value, ts = 0.0, now
            self.buffer.store(msg.mode, msg.sender, value, ts)
        else:
            self._received_now[msg.mode][msg.sender] = msg.value

    def update(self, k: int, y_i: np.ndarray):
        """Advance the estimate from step k to k+1 using the measurement
        y_i[k] and whatever has been received up to and including step k."""
        new = observer_step(self.gains, self.estimate, y_i)
        for j in self.consensus_modes:
            lam = float(self.lambdas[j - 1])
            if self.variant == SWLFSE:
                entries = self.buffer.view(j, self.consensus_neighbors[j])
                new[j - 1] = swlfse_update(lam, entries, k, self.f, self.weight_rule)
            else:
                received = sorted(self._received_now[j].items())
                new[j - 1] = lfse_update(
                    lam, received, self.f, float(self.estimate[j - 1]), self.weight_rule
                )
                self._received_now[j] = {}
        for j in self.open_loop_modes:
            new[j - 1] = float(self.lambdas[j - 1]) * self.estimate[j - 1]
        self.estimate = new
