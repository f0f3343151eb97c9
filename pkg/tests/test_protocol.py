"""Trimming, consensus updates, buffers, and the node state machine."""

from itertools import combinations

import numpy as np
import pytest

from resilient_observer import (
    EstimateMsg,
    NodeBuffer,
    Plant,
    RegularNode,
    TooFewValues,
    design_local_observer,
    diagonalize,
    lfse_update,
    rescale_delayed,
    swlfse_update,
    trim_extremes,
)


def test_rescale_delayed():
    assert rescale_delayed(2.0, 2, 3.0) == 12.0
    assert rescale_delayed(1.7, 0, 5.5) == 5.5
    assert rescale_delayed(2.0, 4, None) == 0.0


def test_trim_extremes_basic():
    values = [(1, 9.0), (2, 5.0), (3, 3.0), (4, 2.0), (5, -7.0)]
    t = trim_extremes(values, 1)
    assert [v for _, v in t.kept] == [5.0, 3.0, 2.0]
    assert t.discarded_high == ((1, 9.0),)
    assert t.discarded_low == ((5, -7.0),)
    assert set(t.kept) | set(t.discarded_high) | set(t.discarded_low) == set(values)


def test_trim_extremes_f0_identity():
    values = [(2, 4.0), (1, 8.0)]
    t = trim_extremes(values, 0)
    assert set(t.kept) == set(values)
    assert t.discarded_high == () and t.discarded_low == ()


def test_trim_extremes_tie_break_by_node_id():
    values = [(n, 4.0) for n in (3, 1, 5, 2, 4)]
    t = trim_extremes(values, 1)
    assert t.discarded_high == ((1, 4.0),)
    assert t.discarded_low == ((5, 4.0),)
    assert sorted(n for n, _ in t.kept) == [2, 3, 4]


def test_trim_extremes_too_few():
    with pytest.raises(TooFewValues):
        trim_extremes([(1, 1.0), (2, 2.0)], 1)


def test_trimming_safety_randomized():
    # kept values stay inside the regular hull for any f-local corruption
    rng = np.random.default_rng(9)
    for size in range(3, 8):
        for f in (1, 2):
            if size < 2 * f + 1:
                continue
            for n_bad in range(0, f + 1):
                for bad_nodes in combinations(range(1, size + 1), n_bad):
                    vals = {n: rng.normal() for n in range(1, size + 1)}
                    for b in bad_nodes:
                        vals[b] = rng.choice([-1.0, 1.0]) * rng.uniform(10, 1e6)
                    regular = [v for n, v in vals.items() if n not in bad_nodes]
                    kept = trim_extremes(sorted(vals.items()), f).kept
                    for _, v in kept:
                        assert min(regular) <= v <= max(regular)


def test_swlfse_update_arithmetic():
    # four neighbors, extremes trimmed, kept {5, 3} -> 2 * mean = 8
    entries = {1: (9.0, 5), 2: (5.0, 5), 3: (3.0, 5), 4: (-7.0, 5)}
    assert swlfse_update(2.0, entries, k=5, f=1) == pytest.approx(8.0)


def test_swlfse_update_equal_values_any_weight_rule():
    entries = {l: (4.0, 3) for l in range(1, 6)}
    for rule in ("uniform", "median"):
        assert swlfse_update(1.3, entries, k=3, f=1, weight_rule=rule) == pytest.approx(1.3 * 4.0)


def test_swlfse_update_discards_adversarial_extremes():
    entries = {1: (10.0, 2), 2: (2.0, 2), 3: (2.0, 2), 4: (2.0, 2), 5: (-10.0, 2)}
    assert swlfse_update(1.1, entries, k=2, f=1) == pytest.approx(1.1 * 2.0)


def test_swlfse_update_rescales_stale_entries():
    # neighbor 2's value is two steps old: rescaled to 2^2 * 3 = 12
    entries = {1: (12.0, 4), 2: (3.0, 2), 3: (12.0, 4)}
    out = swlfse_update(2.0, entries, k=4, f=1)
    assert out == pytest.approx(2.0 * 12.0)


def test_swlfse_update_sentinel_counts_as_zero():
    entries = {1: None, 2: (6.0, 1), 3: (6.0, 1)}
    # values are [6, 6, 0]; f=1 keeps the middle 6
    assert swlfse_update(1.0, entries, k=1, f=1) == pytest.approx(6.0)


def test_combination_is_convex_for_both_weight_rules():
    # the update divided by lambda must stay inside [min, max] of the kept
    # values (weights non-negative, summing to one)
    rng = np.random.default_rng(31)
    for _ in range(200):
        size = int(rng.integers(3, 9))
        f = int(rng.integers(0, (size - 1) // 2 + 1))
        entries = {l: (float(rng.normal()), 7) for l in range(1, size + 1)}
        kept = trim_extremes([(l, v[0]) for l, v in entries.items()], f).kept
        lo = min(v for _, v in kept)
        hi = max(v for _, v in kept)
        for rule in ("uniform", "median"):
            out = swlfse_update(1.7, entries, k=7, f=f, weight_rule=rule) / 1.7
            assert lo - 1e-12 <= out <= hi + 1e-12


def test_swlfse_result_in_regular_hull_under_corruption():
    # with at most f adversarial neighbors the rescaled update stays in the
    # convex hull of the regular neighbors' contributions
    rng = np.random.default_rng(63)
    lam = 1.3
    for _ in range(300):
        size = int(rng.integers(3, 8))
        f = 1 if size < 5 else int(rng.integers(1, 3))
        if size < 2 * f + 1:
            continue
        n_bad = int(rng.integers(0, f + 1))
        bad = set(int(v) for v in rng.choice(size, size=n_bad, replace=False) + 1)
        entries = {}
        for l in range(1, size + 1):
            if l in bad:
                entries[l] = (float(rng.choice([-1, 1]) * rng.uniform(10, 1e9)), 5)
            else:
                entries[l] = (float(rng.normal()), 5)
        regular_vals = [v for l, (v, _) in entries.items() if l not in bad]
        out = swlfse_update(lam, entries, k=5, f=f) / lam
        assert min(regular_vals) - 1e-12 <= out <= max(regular_vals) + 1e-12


def test_lfse_update_examples():
    assert lfse_update(2.0, [(1, 7.0), (2, 4.0), (3, 1.0)], 1, current=0.0) == pytest.approx(8.0)
    assert lfse_update(1.1, [(1, 7.0), (2, 4.0)], 1, current=5.0) == pytest.approx(5.5)
    assert lfse_update(1.1, [], 1, current=0.0) == 0.0


def test_buffer_monotonic_timestamps():
    buf = NodeBuffer()
    assert buf.store(1, 2, 5.0, 3)
    assert not buf.store(1, 2, 9.0, 3)     # same stamp: rejected
    assert not buf.store(1, 2, 9.0, 1)     # older: rejected
    assert buf.store(1, 2, 9.0, 4)
    assert buf.get(1, 2) == (9.0, 4)
    assert buf.get(1, 9) is None
    assert buf.view(1, [2, 9]) == {2: (9.0, 4), 9: None}


def _scalar_node(lam=1.1, detectable=False, variant="swlfse", f=1, nbrs=(1, 2, 3)):
    sensors = [np.array([[1.0]]) if detectable else np.zeros((0, 1))]
    mp = diagonalize(Plant([[lam]], sensors))
    gains = design_local_observer(mp, 1, 0.5)
    consensus = {} if detectable else {1: frozenset(nbrs)}
    return RegularNode(9, mp.lambdas, gains, consensus, f, variant), mp


def test_node_pure_observer_when_everything_detectable():
    node, mp = _scalar_node(detectable=True)
    assert node.consensus_modes == () and node.open_loop_modes == ()
    z = 3.0
    for k in range(12):
        node.update(k, np.array([z]))
        z = 1.1 * z
    assert abs(node.estimate[0] - z) <= 3.0 * 0.5 ** 12 * (1 + 1e-9)


def test_node_stable_undetectable_runs_open_loop():
    sensors = [np.zeros((0, 1))]
    mp = diagonalize(Plant([[0.5]], sensors))
    gains = design_local_observer(mp, 1, 0.5)
    node = RegularNode(1, mp.lambdas, gains, {}, f=1)
    node.estimate[0] = 8.0
    for k in range(6):
        node.update(k, np.zeros(0))
    assert node.estimate[0] == pytest.approx(8.0 * 0.5 ** 6)


def test_node_swlfse_reproduces_direct_formula():
    node, mp = _scalar_node()
    k = 4
    for l, v in ((1, 9.0), (2, 5.0), (3, -7.0)):
        node.receive(EstimateMsg(l, 1, v, k), now=k)
    node.update(k, np.zeros(0))
    entries = {1: (9.0, k), 2: (5.0, k), 3: (-7.0, k)}
    assert node.estimate[0] == pytest.approx(swlfse_update(1.1, entries, k, 1))


def test_node_ignores_non_restricted_senders():
    node, mp = _scalar_node(nbrs=(1, 2, 3))
    node.receive(EstimateMsg(7, 1, 1e9, 2), now=2)
    assert node.buffer.get(1, 7) is None


def test_node_clamps_future_and_missing_timestamps():
    node, mp = _scalar_node()
    node.receive(EstimateMsg(1, 1, 123.0, 99), now=2)        # future stamp
    assert node.buffer.get(1, 1) == (0.0, 2)
    node.receive(EstimateMsg(2, 1, 5.0, 1, timestamp_missing=True), now=2)
    assert node.buffer.get(1, 2) == (0.0, 2)


def test_node_lfse_open_loop_below_quorum():
    node, mp = _scalar_node(variant="lfse")
    node.estimate[0] = 5.0
    node.receive(EstimateMsg(1, 1, 7.0, 3), now=3)
    node.receive(EstimateMsg(2, 1, 4.0, 3), now=3)
    node.update(3, np.zeros(0))
    assert node.estimate[0] == pytest.approx(1.1 * 5.0)
    # with a quorum the trimmed value is used
    for l, v in ((1, 7.0), (2, 4.0), (3, 1.0)):
        node.receive(EstimateMsg(l, 1, v, 4), now=4)
    node.update(4, np.zeros(0))
    assert node.estimate[0] == pytest.approx(1.1 * 4.0)
