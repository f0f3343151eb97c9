"""Synchronous simulation engine and the quantitative analysis layer.

A simulation advances in deterministic rounds: the plant steps, sensors
measure, regular nodes emit time-stamped estimates, adversaries emit
whatever their strategy dictates, channels apply their loss process, and
every regular node updates (local observer for detectable modes, trimmed
consensus for unstable undetectable ones, open loop for stable ones).
Everything is a pure function of (config, seed), so traces replay
bit-identically.

The analysis layer provides the per-level geometric convergence envelope
for the sliding-window protocol, and the effective-drop-probability /
mean-square-stability criterion for the memoryless protocol over Bernoulli
erasure channels, including its Monte Carlo validation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from .adversary import AdversaryContext, AdversaryStrategy, f_local_check
from .channels import (
    BernoulliErasureChannel,
    BoundedDelayChannel,
    ChannelModel,
    ErasureWithDelayChannel,
    IdealChannel,
    WindowedUnionChannel,
    make_window_schedule,
)
from .errors import ConfigInvalid, DomainError, NotRobust
from .graphs import Digraph, Medag, build_medag, is_strongly_r_robust
from .lti import ModalPlant, ObserverGains, Plant, design_local_observer, diagonalize, source_set
from .protocol import LFSE, PROTOCOLS, SWLFSE, WEIGHT_RULES, RegularNode

EPS_GAMMA = 1e-6        # clamp for deadbeat observers in envelope formulas
_ADV_TAG = 23

CHANNEL_KINDS = ("ideal", "windowed_union", "bounded_delay", "bernoulli_erasure", "erasure_with_delay")


@dataclass(frozen=True)
class ChannelSpec:
    """Declarative channel description; the stateful model is built per run."""

    kind: str
    window: Optional[int] = None   # T, for the windowed / delayed variants
    p: Optional[float] = None      # Bernoulli erasure probability
    e: Optional[float] = None      # erasure-with-delay replay probability

    def validate(self):
        if self.kind not in CHANNEL_KINDS:
            raise ConfigInvalid(f"unknown channel kind {self.kind!r}; expected one of {CHANNEL_KINDS}")
        if self.kind in ("windowed_union", "bounded_delay", "erasure_with_delay"):
            if self.window is None or self.window < 0:
                raise ConfigInvalid(f"channel {self.kind} requires a window T >= 0")
            if self.kind == "erasure_with_delay" and self.window < 1:
                raise ConfigInvalid("erasure_with_delay requires T >= 1")
        if self.kind == "bernoulli_erasure":
            if self.p is None or not 0.0 <= self.p <= 1.0:
                raise ConfigInvalid("bernoulli_erasure requires p in [0,1]")
        if self.kind == "erasure_with_delay":
            if self.e is None or not 0.0 <= self.e <= 1.0:
                raise ConfigInvalid("erasure_with_delay requires e in [0,1]")

    def envelope_window(self) -> Optional[int]:
        """Delay bound entering the convergence envelope; None when the
        channel gives no deterministic delivery guarantee."""
        if self.kind == "ideal":
            return 0
        if self.kind in ("windowed_union", "bounded_delay", "erasure_with_delay"):
            return self.window
        return None


@dataclass(eq=False)
class SimConfig:
    """Everything one simulation run depends on."""

    plant: Plant
    graph: Digraph
    f: int
    adversaries: Dict[int, AdversaryStrategy]
    channel: ChannelSpec
    protocol: str
    x0: np.ndarray
    horizon: Optional[int] = None
    gamma_local: float = 0.5
    weight_rule: str = "uniform"
    m: int = 3
    seed: int = 0
    trials: int = 100
    name: str = "scenario"

    def regular_nodes(self) -> Tuple[int, ...]:
        return tuple(i for i in self.graph.nodes() if i not in self.adversaries)

    def robustness_threshold(self) -> int:
        if self.protocol == LFSE:
            return self.m * self.f + 1
        return 2 * self.f + 1


@dataclass
class SimMeta:
    """Design-time objects attached to a trace for analysis."""

    mp: ModalPlant
    medags: Dict[int, Medag]
    gains: Dict[int, ObserverGains]
    beta_gamma: Dict[int, Tuple[float, float]]
    window: Optional[int]


@dataclass
class Trace:
    """Per-step, per-regular-node, per-mode estimation record."""

    ks: np.ndarray
    nodes: Tuple[int, ...]
    modes: Tuple[int, ...]
    estimates: np.ndarray    # (K+1, n_regular, n_modes), modal coordinates
    truth: np.ndarray        # (K+1, n_modes)
    state_err: np.ndarray    # (K+1, n_regular): ||x_hat - x|| in plant coordinates
    seed: int
    channel_digest: str
    meta: Optional[SimMeta] = None

    def mode_error(self, node: int, j: int) -> np.ndarray:
        i = self.nodes.index(node)
        return np.abs(self.estimates[:, i, j - 1] - self.truth[:, j - 1])

    def final_max_state_error(self) -> float:
        return float(np.max(self.state_err[-1]))

    def to_csv_bytes(self) -> bytes:
        lines = ["k,node,mode,estimate,truth,abs_error"]
        for ki, k in enumerate(self.ks):
            for ni, node in enumerate(self.nodes):
                for mi, mode in enumerate(self.modes):
                    est = float(self.estimates[ki, ni, mi])
                    tru = float(self.truth[ki, mi])
                    lines.append(
                        f"{int(k)},{node},{mode},{est!r},{tru!r},{abs(est - tru)!r}"
                    )
        return ("\n".join(lines) + "\n").encode()

    def summary(self) -> dict:
        return {
            "seed": self.seed,
            "horizon": int(self.ks[-1]),
            "regular_nodes": list(self.nodes),
            "final_max_state_error": self.final_max_state_error(),
            "max_state_error": float(np.max(self.state_err)),
            "channel_digest": self.channel_digest,
        }


@dataclass
class MssReport:
    """Monte Carlo mean-square error summary across independent trials."""

    ks: np.ndarray
    nodes: Tuple[int, ...]
    mean_sq: np.ndarray       # (K+1, n_regular)
    half_width: np.ndarray    # normal-approximation 95% half-widths
    trials: int
    rho: float
    pbar_value: float
    seed: int

    @property
    def criterion_product(self) -> float:
        return self.rho ** 2 * self.pbar_value

    @property
    def criterion_ok(self) -> bool:
        return mss_criterion(self.rho, self.pbar_value)

    def decay_ratio(self, node: int) -> float:
        i = self.nodes.index(node)
        return float(self.mean_sq[-1, i] / self.mean_sq[0, i])

    def to_csv_bytes(self) -> bytes:
        lines = ["k,node,mean_sq_error,ci_half_width"]
        for ki, k in enumerate(self.ks):
            for ni, node in enumerate(self.nodes):
                lines.append(
                    f"{int(k)},{node},{float(self.mean_sq[ki, ni])!r},{float(self.half_width[ki, ni])!r}"
                )
        return ("\n".join(lines) + "\n").encode()

    def summary(self) -> dict:
        return {
            "trials": self.trials,
            "seed": self.seed,
            "rho": self.rho,
            "pbar": self.pbar_value,
            "rho2_pbar": self.criterion_product,
            "criterion_satisfied": bool(self.criterion_ok),
            "decay_ratios": {str(n): self.decay_ratio(n) for n in self.nodes},
        }


def validate_config(cfg: SimConfig, mp: Optional[ModalPlant] = None) -> ModalPlant:
    """Check every hypothesis a run relies on; raises ConfigInvalid naming
    the violated one."""
    if cfg.f < 0:
        raise ConfigInvalid("f must be >= 0")
    if cfg.protocol not in PROTOCOLS:
        raise ConfigInvalid(f"unknown protocol {cfg.protocol!r}; expected one of {PROTOCOLS}")
    if cfg.weight_rule not in WEIGHT_RULES:
        raise ConfigInvalid(f"unknown weight rule {cfg.weight_rule!r}")
    if cfg.m < 1:
        raise ConfigInvalid("robustness multiplier m must be >= 1")
    cfg.channel.validate()
    if cfg.plant.n_nodes != cfg.graph.n:
        raise ConfigInvalid(
            f"plant has {cfg.plant.n_nodes} sensor nodes but graph has {cfg.graph.n}"
        )
    x0 = np.asarray(cfg.x0, dtype=float).reshape(-1)
    if x0.shape[0] != cfg.plant.n:
        raise ConfigInvalid(f"x0 must have length {cfg.plant.n}")
    if cfg.horizon is not None and cfg.horizon < 1:
        raise ConfigInvalid("horizon must be >= 1")
    if cfg.horizon is None and cfg.channel.envelope_window() is None:
        raise ConfigInvalid(
            f"horizon required: channel {cfg.channel.kind} has no deterministic delay bound"
        )
    bad_adv = [a for a in cfg.adversaries if not 1 <= a <= cfg.graph.n]
    if bad_adv:
        raise ConfigInvalid(f"adversary nodes {bad_adv} outside the graph")

    mp = mp or diagonalize(cfg.plant)
    for j in sorted(mp.unstable_set):
        if not source_set(mp, j):
            raise ConfigInvalid(f"unstable mode {j} is detectable by no node")
    if not f_local_check(cfg.graph, cfg.adversaries, cfg.f):
        raise ConfigInvalid(f"adversary set {sorted(cfg.adversaries)} is not {cfg.f}-local")
    r = cfg.robustness_threshold()
    for j in sorted(mp.consensus_set):
        if not is_strongly_r_robust(cfg.graph, source_set(mp, j), r):
            raise ConfigInvalid(
                f"graph is not strongly ({r})-robust w.r.t. the source set of mode {j}"
            )
    return mp


def _build_medags(cfg: SimConfig, mp: ModalPlant) -> Dict[int, Medag]:
    r = cfg.robustness_threshold()
    return {
        j: build_medag(cfg.graph, source_set(mp, j), cfg.f, mode=j, min_indegree=r)
        for j in sorted(mp.consensus_set)
    }


def _build_channel(cfg: SimConfig, medags: Mapping[int, Medag]) -> ChannelModel:
    spec = cfg.channel
    if spec.kind == "ideal":
        return IdealChannel(cfg.graph, cfg.seed)
    if spec.kind == "windowed_union":
        schedule = make_window_schedule(cfg.graph, list(medags.values()), spec.window, cfg.seed)
        return WindowedUnionChannel(cfg.graph, schedule, cfg.seed)
    if spec.kind == "bounded_delay":
        return BoundedDelayChannel(cfg.graph, spec.window, cfg.seed)
    if spec.kind == "bernoulli_erasure":
        return BernoulliErasureChannel(cfg.graph, spec.p, cfg.seed)
    if spec.kind == "erasure_with_delay":
        return ErasureWithDelayChannel(cfg.graph, spec.e, spec.window, cfg.seed)
    raise ConfigInvalid(f"unknown channel kind {spec.kind!r}")


def rate_bound(
    q: int, k: int, n_nodes: int, f: int, window: int, beta: float, gamma: float, lam: float
) -> float:
    """Geometric convergence envelope for a level-q node of a mode DAG,
    valid for k >= (window+1)*q."""
    if not 0.0 < gamma < 1.0:
        raise DomainError(f"gamma must be in (0,1), got {gamma}")
    level_factor = (n_nodes - (2 * f + 1)) * (abs(lam) / gamma) ** (window + 1)
    return beta * level_factor ** q * gamma ** k


def _derive_beta_gamma(
    mp: ModalPlant,
    medags: Mapping[int, Medag],
    gains: Mapping[int, ObserverGains],
    z0: np.ndarray,
    regular: Sequence[int],
) -> Dict[int, Tuple[float, float]]:
    out = {}
    regular = set(regular)
    for j, md in medags.items():
        srcs = sorted(set(md.sources) & regular)
        if not srcs:
            continue   # no regular source: envelope constants undefined
        gamma = max(gains[l].mode_contraction(j) for l in srcs)
        beta = max(abs(float(z0[j - 1])) for _ in srcs)
        out[j] = (beta, max(gamma, EPS_GAMMA))
    return out


def derive_beta_gamma(cfg: SimConfig) -> Dict[int, Tuple[float, float]]:
    """Envelope constants (beta_j, gamma_j) per consensus mode, from the
    design alone (no trace): gamma is the worst observer contraction among
    regular sources (clamped away from 0 so the envelope stays well-defined
    for deadbeat designs), beta the worst initial source error."""
    mp = diagonalize(cfg.plant)
    medags = _build_medags(cfg, mp)
    regular = cfg.regular_nodes()
    gains = {i: design_local_observer(mp, i, cfg.gamma_local) for i in regular}
    z0 = mp.v @ np.asarray(cfg.x0, dtype=float).reshape(-1)
    return _derive_beta_gamma(mp, medags, gains, z0, regular)


def envelope_horizon(
    cfg: SimConfig,
    mp: ModalPlant,
    medags: Mapping[int, Medag],
    gains: Mapping[int, ObserverGains],
    tol: float = 1e-6,
    max_k: int = 200000,
) -> int:
    """Smallest K at which the combined per-mode envelopes push every
    regular node's state error below tol."""
    window = cfg.channel.envelope_window()
    if window is None:
        raise ConfigInvalid("envelope horizon undefined for channels without a delay bound")
    z0 = mp.v @ np.asarray(cfg.x0, dtype=float).reshape(-1)
    regular = cfg.regular_nodes()
    bg = _derive_beta_gamma(mp, medags, gains, z0, regular)
    vnorm = float(np.linalg.norm(mp.v_inv, 2))
    n = mp.n

    min_k = 1 + max(
        [(window + 1) * md.level_of[i] for j, md in medags.items() for i in regular],
        default=0,
    )

    def node_env(i: int, k: int) -> float:
        total = 0.0
        for j in range(1, n + 1):
            lam = mp.lam(j)
            a0 = abs(float(z0[j - 1]))
            if j in mp.detect_sets[i - 1]:
                c = gains[i].mode_contraction(j)
                env = a0 * c ** k if k > 0 else a0
            elif j in medags:
                beta, gamma = bg[j]
                q = medags[j].level_of[i]
                if k < (window + 1) * q:
                    return math.inf
                env = rate_bound(q, k, cfg.graph.n, cfg.f, window, beta, gamma, lam)
            else:
                env = a0 * abs(lam) ** k
            total += env * env
        return vnorm * math.sqrt(total)

    for k in range(min_k, max_k + 1):
        if all(node_env(i, k) < tol for i in regular):
            return k
    raise ConfigInvalid(f"envelope does not reach {tol} within {max_k} steps")


def run_simulation(
    cfg: SimConfig,
    validate: bool = True,
    medags: Optional[Dict[int, Medag]] = None,
) -> Trace:
    """Run one simulation; deterministic given (config, seed).

    ``medags`` overrides the design-phase DAG construction (used by tests
    that deliberately exercise invalid information-flow patterns together
    with validate=False).
    """
    mp = diagonalize(cfg.plant)
    if validate:
        validate_config(cfg, mp)
    if medags is None:
        medags = _build_medags(cfg, mp)
    regular = cfg.regular_nodes()
    gains = {i: design_local_observer(mp, i, cfg.gamma_local) for i in regular}

    horizon = cfg.horizon
    if horizon is None:
        horizon = envelope_horizon(cfg, mp, medags, gains)

    nodes: Dict[int, RegularNode] = {}
    for i in regular:
        consensus_nbrs = {
            j: md.neighbors[i] for j, md in medags.items() if j not in mp.detect_sets[i - 1]
        }
        nodes[i] = RegularNode(
            i, mp.lambdas, gains[i], consensus_nbrs, cfg.f, cfg.protocol, cfg.weight_rule
        )

    channel = _build_channel(cfg, medags)
    adv_rngs = {
        a: np.random.default_rng(np.random.SeedSequence((cfg.seed, _ADV_TAG, a)))
        for a in cfg.adversaries
    }
    adversaries = frozenset(cfg.adversaries)

    n = mp.n
    x0 = np.asarray(cfg.x0, dtype=float).reshape(-1)
    z = mp.v @ x0
    n_reg = len(regular)
    estimates = np.empty((horizon + 1, n_reg, n))
    truth = np.empty((horizon + 1, n))
    state_err = np.empty((horizon + 1, n_reg))

    def record(k: int):
        truth[k] = z
        for ni, i in enumerate(regular):
            estimates[k, ni] = nodes[i].estimate
            state_err[k, ni] = np.linalg.norm(mp.v_inv @ (nodes[i].estimate - z))

    pending: Dict[int, List[Tuple[int, object]]] = {}
    out_nbrs = {i: tuple(sorted(cfg.graph.out_neighbors(i))) for i in cfg.graph.nodes()}

    for k in range(horizon):
        record(k)
        channel.begin_step(k)

        packets: Dict[Tuple[int, int], list] = {}
        for i in regular:
            msgs = nodes[i].emit(k)
            for w in out_nbrs[i]:
                packets.setdefault((i, w), []).extend(msgs)
        if adversaries:
            ctx = AdversaryContext(
                k=k,
                lambdas=mp.lambdas,
                true_z=z.copy(),
                estimates={i: nodes[i].estimate.copy() for i in regular},
                medags=medags,
                graph=cfg.graph,
                adversaries=adversaries,
                f=cfg.f,
                link_delivers=lambda s, r, _k=k: channel.delivers_now((s, r), _k),
                rng_for=adv_rngs.__getitem__,
            )
            for a in sorted(adversaries):
                for recv, msg in cfg.adversaries[a].emit(ctx, a):
                    packets.setdefault((a, recv), []).append(msg)

        arrivals = pending.pop(k, [])
        for link in sorted(packets):
            for arrival_k, msg in channel.deliver(link, packets[link], k):
                if arrival_k == k:
                    arrivals.append((link[1], msg))
                else:
                    pending.setdefault(arrival_k, []).append((link[1], msg))
        for recv, msg in arrivals:
            node = nodes.get(recv)
            if node is not None:
                node.receive(msg, k)

        for i in regular:
            nodes[i].update(k, mp.cbar[i - 1] @ z)
        z = mp.lambdas * z

    record(horizon)

    bg = _derive_beta_gamma(mp, medags, gains, mp.v @ x0, regular) if medags else {}
    meta = SimMeta(
        mp=mp,
        medags=dict(medags),
        gains=gains,
        beta_gamma=bg,
        window=cfg.channel.envelope_window(),
    )
    return Trace(
        ks=np.arange(horizon + 1),
        nodes=tuple(regular),
        modes=tuple(range(1, n + 1)),
        estimates=estimates,
        truth=truth,
        state_err=state_err,
        seed=cfg.seed,
        channel_digest=channel.digest_hex(),
        meta=meta,
    )


def check_rate_envelope(
    trace: Trace, graph_n: int, f: int, rel_slack: float = 1e-9, noise_floor: float = 1e-12
) -> List[str]:
    """Pointwise check of the per-level convergence envelope along a trace.

    Returns a list of human-readable violations (empty when the envelope
    holds). Consensus modes are checked at each node's DAG level from step
    (window+1)*level on; source nodes are level 0.

    Source nodes sit exactly on the bound, so the comparison allows the
    floating-point noise of k iterated updates: an absolute floor of
    noise_floor * (1 + |truth|), orders of magnitude below the convergence
    tolerances asserted elsewhere.
    """
    meta = trace.meta
    if meta is None or meta.window is None:
        raise DomainError("trace has no envelope context")
    violations = []
    for j, md in meta.medags.items():
        if j not in meta.beta_gamma:
            continue
        beta, gamma = meta.beta_gamma[j]
        lam = meta.mp.lam(j)
        for node in trace.nodes:
            q = md.level_of[node]
            start = (meta.window + 1) * q
            err = trace.mode_error(node, j)
            for k in range(start, err.shape[0]):
                bound = rate_bound(q, k, graph_n, f, meta.window, beta, gamma, lam)
                floor = noise_floor * (1.0 + abs(float(trace.truth[k, j - 1])))
                if err[k] > bound * (1.0 + rel_slack) + floor:
                    violations.append(
                        f"mode {j} node {node} level {q} step {k}: "
                        f"error {err[k]:.3e} > bound {bound:.3e}"
                    )
    return violations


def pbar(p: float, m: int, f: int) -> float:
    """Effective packet-drop probability: chance that fewer than 2f+1 of a
    node's (m-1)f+1 guaranteed-regular in-links deliver in one step."""
    if not 0.0 <= p <= 1.0:
        raise DomainError(f"p must be in [0,1], got {p}")
    if m < 3:
        raise DomainError(f"robustness multiplier m >= 3 required, got {m}")
    if f < 0:
        raise DomainError("f must be >= 0")
    n_links = (m - 1) * f + 1
    success = sum(
        math.comb(n_links, l) * (1.0 - p) ** l * p ** (n_links - l)
        for l in range(2 * f + 1, n_links + 1)
    )
    return 1.0 - success


def mss_criterion(rho: float, pbar_val: float) -> bool:
    """Sufficient condition for mean-square stability."""
    return rho ** 2 * pbar_val < 1.0


def sweep_mss_margin(
    rho: float, f: int, m_values: Sequence[int], p_grid: Sequence[float]
) -> np.ndarray:
    """Table of rho^2 * pbar over a p grid (rows) and m values (columns)."""
    if any(m < 3 for m in m_values):
        raise DomainError("all m values must be >= 3")
    p_grid = np.asarray(list(p_grid), dtype=float)
    table = np.empty((p_grid.shape[0], len(m_values)))
    for ci, m in enumerate(m_values):
        for ri, p in enumerate(p_grid):
            table[ri, ci] = rho ** 2 * pbar(float(p), int(m), f)
    return table


def monte_carlo_mss(cfg: SimConfig, trials: Optional[int] = None) -> MssReport:
    """Empirical mean-square error across independent seeded trials.

    Requires the memoryless protocol over a Bernoulli erasure channel (the
    setting the MSS criterion speaks about). Trial t runs with seed
    cfg.seed + t.
    """
    if cfg.channel.kind != "bernoulli_erasure":
        raise ConfigInvalid("mean-square analysis requires a bernoulli_erasure channel")
    if cfg.protocol != LFSE:
        raise ConfigInvalid("mean-square analysis requires the lfse protocol")
    trials = cfg.trials if trials is None else trials
    if trials < 2:
        raise ConfigInvalid("at least 2 trials required")

    mp = validate_config(cfg)
    rho = float(np.max(np.abs(mp.lambdas)))
    pb = pbar(cfg.channel.p, cfg.m, cfg.f)

    samples = []
    ks = nodes = None
    for t in range(trials):
        trial_cfg = replace(cfg, seed=cfg.seed + t)
        tr = run_simulation(trial_cfg, validate=False)
        samples.append(tr.state_err ** 2)
        if ks is None:
            ks, nodes = tr.ks, tr.nodes
    stacked = np.stack(samples)          # (trials, K+1, n_regular)
    mean = stacked.mean(axis=0)
    # two-pass variance: stable when trials coincide (e.g. p = 0)
    var = stacked.var(axis=0, ddof=1)
    half = 1.96 * np.sqrt(var / trials)
    return MssReport(
        ks=ks,
        nodes=nodes,
        mean_sq=mean,
        half_width=half,
        trials=trials,
        rho=rho,
        pbar_value=pb,
        seed=cfg.seed,
    )
