"""Byzantine adversary strategies.

Adversaries are omniscient: each step they see the whole simulator state
(true modal state, every estimate, topology, and the current step's channel
realizations) and may send different values to different receivers. Values
are capped at VALUE_CAP to keep floating point finite; trimming discards
extremes regardless of magnitude, so the cap does not weaken the attack.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Dict, FrozenSet, Iterable, List, Mapping, Optional, Tuple

import numpy as np

from .errors import DomainError
from .graphs import Digraph, Medag
from .protocol import EstimateMsg

VALUE_CAP = 1e12


def f_local_check(g: Digraph, adversaries: Iterable[int], f: int) -> bool:
    """True iff every regular node has at most f adversarial in-neighbors."""
    adv = frozenset(adversaries)
    return all(
        len(g.in_neighbors(i) & adv) <= f for i in g.nodes() if i not in adv
    )


@dataclass(frozen=True)
class AdversaryContext:
    """Read-only omniscient view handed to strategies each step."""

    k: int
    lambdas: np.ndarray
    true_z: np.ndarray
    estimates: Mapping[int, np.ndarray]
    medags: Mapping[int, Medag]
    graph: Digraph
    adversaries: FrozenSet[int]
    f: int
    link_delivers: Callable[[int, int], bool]
    rng_for: Callable[[int], np.random.Generator]

    @property
    def n_modes(self) -> int:
        return self.lambdas.shape[0]


def _cap(value: float) -> float:
    return float(np.clip(value, -VALUE_CAP, VALUE_CAP))


class AdversaryStrategy:
    """Base strategy; subclasses emit per-receiver messages at each step."""

    name = "base"

    def emit(self, ctx: AdversaryContext, node: int) -> List[Tuple[int, EstimateMsg]]:
        raise NotImplementedError

    def params(self) -> dict:
        return {}


class Silent(AdversaryStrategy):
    """Never transmits; receivers keep the no-message-yet sentinel."""

    name = "silent"

    def emit(self, ctx, node):
        return []


class ConstantSpoof(AdversaryStrategy):
    """Consistent fake trajectory: mode j reads initial[j] propagated
    through the true dynamics, identical for every receiver. This is the
    indistinguishable-alternate-trajectory attack a compromised source can
    mount when the topology lacks source redundancy."""

    name = "constant_spoof"

    def __init__(self, initial=1.0):
        self.initial = initial

    def params(self):
        return {"initial": self.initial}

    def emit(self, ctx, node):
        init = np.broadcast_to(np.asarray(self.initial, dtype=float), (ctx.n_modes,))
        out = []
        for recv in sorted(ctx.graph.out_neighbors(node)):
            for j in range(1, ctx.n_modes + 1):
                value = _cap((ctx.lambdas[j - 1] ** ctx.k) * init[j - 1])
                out.append((recv, EstimateMsg(node, j, value, ctx.k)))
        return out


class RandomNoise(AdversaryStrategy):
    """Per-receiver uniform noise in [-magnitude, magnitude] (equivocating)."""

    name = "random_noise"

    def __init__(self, magnitude=10.0):
        if magnitude < 0:
            raise DomainError("magnitude must be >= 0")
        self.magnitude = float(magnitude)

    def params(self):
        return {"magnitude": self.magnitude}

    def emit(self, ctx, node):
        rng = ctx.rng_for(node)
        out = []
        for recv in sorted(ctx.graph.out_neighbors(node)):
            for j in range(1, ctx.n_modes + 1):
                value = _cap(rng.uniform(-self.magnitude, self.magnitude))
                out.append((recv, EstimateMsg(node, j, value, ctx.k)))
        return out


class FalseTimestamp(AdversaryStrategy):
    """Sends the current true state stamped k+offset. Negative offsets make
    receivers inflate the value through the mode dynamics; positive offsets
    (physically impossible) exercise the receiver-side clamping."""

    name = "false_timestamp"

    def __init__(self, offset=-3):
        self.offset = int(offset)

    def params(self):
        return {"offset": self.offset}

    def emit(self, ctx, node):
        stamp = max(0, ctx.k + self.offset)
        out = []
        for recv in sorted(ctx.graph.out_neighbors(node)):
            for j in range(1, ctx.n_modes + 1):
                value = _cap(float(ctx.true_z[j - 1]))
                out.append((recv, EstimateMsg(node, j, value, stamp)))
        return out


class CollusiveExtremes(AdversaryStrategy):
    """All adversaries coordinate to push receiver-specific extreme values,
    stressing the trimming stage. direction: "high", "low", or "split"
    (adversaries alternate sign by rank)."""

    name = "collusive_extremes"

    def __init__(self, direction="split"):
        if direction not in ("high", "low", "split"):
            raise DomainError(f"unknown direction {direction!r}")
        self.direction = direction

    def params(self):
        return {"direction": self.direction}

    def emit(self, ctx, node):
        base = 1.0
        for est in ctx.estimates.values():
            m = float(np.max(np.abs(est))) if est.size else 0.0
            base = max(base, m)
        base = max(base, float(np.max(np.abs(ctx.true_z))) if ctx.true_z.size else 0.0)
        if self.direction == "split":
            rank = sorted(ctx.adversaries).index(node)
            sign = 1.0 if rank % 2 == 0 else -1.0
        else:
            sign = 1.0 if self.direction == "high" else -1.0
        out = []
        for ridx, recv in enumerate(sorted(ctx.graph.out_neighbors(node))):
            magnitude = _cap(base * 1e3 * (1.0 + 0.5 * ridx))
            for j in range(1, ctx.n_modes + 1):
                out.append((recv, EstimateMsg(node, j, sign * magnitude, ctx.k)))
        return out


class ScriptedHook(AdversaryStrategy):
    """User-supplied behavior: fn(ctx, node) -> [(receiver, EstimateMsg)].
    Available only through the Python API, not scenario files."""

    name = "scripted"

    def __init__(self, fn: Callable[[AdversaryContext, int], List[Tuple[int, EstimateMsg]]]):
        self.fn = fn

    def emit(self, ctx, node):
        return list(self.fn(ctx, node))


STRATEGIES: Dict[str, type] = {
    cls.name: cls
    for cls in (Silent, ConstantSpoof, RandomNoise, FalseTimestamp, CollusiveExtremes)
}


def strategy_from_config(kind: str, params: Optional[dict] = None) -> AdversaryStrategy:
    """Instantiate a built-in strategy from its tag and parameter dict."""
    params = dict(params or {})
    cls = STRATEGIES.get(kind)
    if cls is None:
        raise DomainError(
            f"unknown adversary strategy {kind!r}; expected one of {sorted(STRATEGIES)}"
        )
    try:
        return cls(**params)
    except TypeError as exc:
        raise DomainError(f"bad parameters for strategy {kind!r}: {exc}") from exc
