"""Attack-resilient distributed state estimation over unreliable networks.

Simulation library and CLI for trimmed-consensus distributed observers of
LTI plants: per-mode information-flow DAG (MEDAG) certification and
construction, Byzantine adversary strategies, deterministic and stochastic
communication-loss channels, convergence-rate envelopes, and Monte Carlo
mean-square stability analysis.
"""

from ._kernels import BACKEND
from .adversary import (
    AdversaryContext,
    AdversaryStrategy,
    CollusiveExtremes,
    ConstantSpoof,
    FalseTimestamp,
    RandomNoise,
    ScriptedHook,
    Silent,
    f_local_check,
    strategy_from_config,
)
from .channels import (
    BernoulliErasureChannel,
    BoundedDelayChannel,
    ChannelModel,
    ErasureWithDelayChannel,
    IdealChannel,
    WindowedUnionChannel,
    WindowSchedule,
    make_window_schedule,
    transmit,
)
from .engine import (
    ChannelSpec,
    MssReport,
    SimConfig,
    Trace,
    check_rate_envelope,
    derive_beta_gamma,
    envelope_horizon,
    monte_carlo_mss,
    mss_criterion,
    pbar,
    rate_bound,
    run_simulation,
    sweep_mss_margin,
    validate_config,
)
from .errors import (
    ConfigInvalid,
    DimensionMismatch,
    DomainError,
    EmptySet,
    ModeNotDetectable,
    NonRealSpectrum,
    NotRobust,
    RepeatedEigenvalue,
    ResilientObserverError,
    TooFewValues,
    TooLarge,
    UnknownLink,
)
from .graphs import (
    Digraph,
    Medag,
    brute_force_strongly_r_robust,
    build_medag,
    is_r_reachable,
    is_strongly_r_robust,
    parse_edge_list,
    strong_robustness_residual,
    verify_medag,
    verify_medag_diagnostic,
)
from .lti import (
    ModalPlant,
    ObserverGains,
    Plant,
    design_local_observer,
    diagonalize,
    observer_step,
    source_set,
)
from .protocol import (
    EstimateMsg,
    NodeBuffer,
    RegularNode,
    TrimResult,
    lfse_update,
    rescale_delayed,
    swlfse_update,
    trim_extremes,
)
from .scenario import (
    bundled_path,
    bundled_scenarios,
    config_digest,
    dump_scenario,
    load_scenario,
    scenario_from_dict,
    scenario_to_dict,
)

__version__ = "0.1.0"
