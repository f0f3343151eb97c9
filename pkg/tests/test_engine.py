"""Engine-level behavior: validation, convergence, envelopes, MSS math."""

import math
from dataclasses import replace

import numpy as np
import pytest

from resilient_observer import (
    ChannelSpec,
    ConfigInvalid,
    Digraph,
    DomainError,
    Plant,
    Silent,
    SimConfig,
    check_rate_envelope,
    derive_beta_gamma,
    design_local_observer,
    diagonalize,
    monte_carlo_mss,
    mss_criterion,
    pbar,
    rate_bound,
    run_simulation,
    source_set,
    sweep_mss_margin,
    validate_config,
)
from resilient_observer.engine import _build_medags, envelope_horizon

from conftest import load_bundled


def test_rate_bound_examples():
    # level 0 reduces to the source envelope beta * gamma^k
    assert rate_bound(0, 7, 5, 1, 0, beta=2.0, gamma=0.5, lam=1.1) == pytest.approx(2.0 * 0.5 ** 7)
    # hand arithmetic: N=5, f=1, q=1, T=0 -> (5-3) * (1.1/0.5) = 4.4
    for k in (0, 3, 9):
        assert rate_bound(1, k, 5, 1, 0, 1.0, 0.5, 1.1) == pytest.approx(4.4 * 0.5 ** k)
    # T=1 squares the per-level ratio factor
    assert rate_bound(1, 4, 5, 1, 1, 1.0, 0.5, 1.1) == pytest.approx(2 * 2.2 ** 2 * 0.5 ** 4)
    with pytest.raises(DomainError):
        rate_bound(1, 4, 5, 1, 0, 1.0, 1.0, 1.1)


def test_derive_beta_gamma():
    cfg = load_bundled("clique5_swlfse")
    bg = derive_beta_gamma(cfg)
    assert bg[1] == (pytest.approx(3.0), pytest.approx(0.5))
    # deadbeat sources: gamma clamped away from zero
    bg0 = derive_beta_gamma(replace(cfg, gamma_local=0.0))
    assert bg0[1][1] == pytest.approx(1e-6)


def test_pbar_closed_form():
    assert pbar(0.0, 3, 1) == 0.0
    assert pbar(1.0, 3, 1) == 1.0
    assert abs(pbar(0.1, 3, 1) - 0.271) < 1e-12
    assert abs(pbar(0.5, 3, 1) - 0.875) < 1e-12
    assert pbar(0.3, 3, 0) == pytest.approx(0.3)   # no adversaries: plain erasure
    with pytest.raises(DomainError):
        pbar(0.1, 2, 1)
    with pytest.raises(DomainError):
        pbar(1.5, 3, 1)


def test_pbar_against_binomial_sampling():
    rng = np.random.default_rng(12)
    n = 100_000
    for p, m, f in ((0.1, 3, 1), (0.5, 3, 1), (0.35, 4, 2)):
        links = (m - 1) * f + 1
        successes = rng.binomial(links, 1.0 - p, size=n)
        est = np.mean(successes < 2 * f + 1)
        exact = pbar(p, m, f)
        sigma = math.sqrt(max(exact * (1 - exact), 1e-12) / n)
        assert abs(est - exact) <= 3 * sigma + 1e-9


def test_mss_criterion():
    assert mss_criterion(1.1, 0.271)
    assert not mss_criterion(2.0, 0.875)
    assert mss_criterion(123.0, 0.0)


def test_sweep_margin_monotonicity():
    p_grid = np.arange(0.0, 1.0001, 0.01)
    table = sweep_mss_margin(2.0, 3, [3, 4, 5, 6], p_grid)
    assert np.all(table[0] == 0.0)                      # p = 0 row
    assert np.all(np.diff(table, axis=0) >= -1e-12)     # nondecreasing in p
    assert np.all(np.diff(table, axis=1) <= 1e-12)      # nonincreasing in m
    with pytest.raises(DomainError):
        sweep_mss_margin(2.0, 3, [2, 3], [0.1])


def test_validate_config_names_the_hypothesis():
    cfg = load_bundled("clique5_swlfse")
    validate_config(cfg)
    # break robustness: only two sources measure
    bad = replace(cfg)
    bad.plant = Plant(
        [[1.1]],
        [np.array([[1.0]]) if i <= 2 else np.zeros((0, 1)) for i in range(1, 6)],
    )
    with pytest.raises(ConfigInvalid, match="strongly \\(3\\)-robust"):
        validate_config(bad)
    # break f-locality
    bad2 = replace(cfg)
    bad2.adversaries = {4: Silent(), 5: Silent()}
    with pytest.raises(ConfigInvalid, match="local"):
        validate_config(bad2)
    # undetectable unstable mode
    bad3 = replace(cfg)
    bad3.plant = Plant([[1.1]], [np.zeros((0, 1))] * 5)
    with pytest.raises(ConfigInvalid, match="detectable by no node"):
        validate_config(bad3)


def test_pure_observer_run_when_all_nodes_detect():
    g = Digraph.complete(3)
    cfg = SimConfig(
        plant=Plant([[1.1]], [np.array([[1.0]])] * 3),
        graph=g,
        f=0,
        adversaries={},
        channel=ChannelSpec(kind="ideal"),
        protocol="swlfse",
        x0=np.array([3.0]),
        horizon=30,
    )
    trace = run_simulation(cfg)
    assert trace.meta.medags == {}
    for node in trace.nodes:
        err = trace.mode_error(node, 1)
        for k in range(31):
            assert err[k] <= 3.0 * 0.5 ** k * (1 + 1e-9) + 1e-12 * (1 + trace.truth[k, 0])


def test_clique5_scenario_converges_fast():
    cfg = load_bundled("clique5_swlfse")
    cfg.horizon = 200
    trace = run_simulation(cfg)
    assert trace.final_max_state_error() < 1e-6
    assert not check_rate_envelope(trace, cfg.graph.n, cfg.f)


def test_determinism_same_seed_same_bytes():
    cfg = load_bundled("layered10_swlfse")
    a = run_simulation(cfg).to_csv_bytes()
    b = run_simulation(cfg).to_csv_bytes()
    assert a == b
    # the windowed schedule's random extras feed only edges outside the
    # restricted neighbor sets, so this scenario is seed-insensitive; the
    # erasure channel is not
    cfg_e = load_bundled("layered10_erasure_delay")
    base = run_simulation(cfg_e).to_csv_bytes()
    assert run_simulation(cfg_e).to_csv_bytes() == base
    assert run_simulation(replace(cfg_e, seed=cfg_e.seed + 1)).to_csv_bytes() != base


def test_envelope_horizon_matches_tolerance():
    cfg = load_bundled("layered10_swlfse")
    mp = diagonalize(cfg.plant)
    medags = _build_medags(cfg, mp)
    gains = {i: design_local_observer(mp, i, cfg.gamma_local) for i in cfg.regular_nodes()}
    k = envelope_horizon(cfg, mp, medags, gains, tol=1e-6)
    assert k >= 1
    trace = run_simulation(replace(cfg, horizon=k))
    assert trace.final_max_state_error() < 1e-6


def test_monte_carlo_requires_erasure_lfse():
    cfg = load_bundled("clique5_swlfse")
    with pytest.raises(ConfigInvalid):
        monte_carlo_mss(cfg, 3)


def test_monte_carlo_zero_erasure_has_zero_variance():
    cfg = load_bundled("clique7_lfse_mss")
    cfg.channel = ChannelSpec(kind="bernoulli_erasure", p=0.0)
    cfg.horizon = 40
    rep = monte_carlo_mss(cfg, trials=5)
    assert np.all(rep.half_width == 0.0)
    assert rep.pbar_value == 0.0 and rep.criterion_ok


def test_monte_carlo_disjoint_seed_ranges_agree():
    cfg = load_bundled("clique7_lfse_mss")
    cfg.horizon = 60
    rep_a = monte_carlo_mss(replace(cfg, seed=0), trials=120)
    rep_b = monte_carlo_mss(replace(cfg, seed=120), trials=120)
    # pick a step where the error is still stochastic
    k = 12
    for ni in range(len(rep_a.nodes)):
        delta = abs(rep_a.mean_sq[k, ni] - rep_b.mean_sq[k, ni])
        sigma = math.sqrt(rep_a.half_width[k, ni] ** 2 + rep_b.half_width[k, ni] ** 2) / 1.96
        assert delta <= 3 * sigma + 1e-12


def test_mode_truth_follows_diagonal_dynamics():
    cfg = load_bundled("layered10_modal")
    trace = run_simulation(cfg)
    lam = trace.meta.mp.lambdas
    for k in range(len(trace.ks) - 1):
        assert np.allclose(trace.truth[k + 1], lam * trace.truth[k], rtol=0, atol=0)
