"""Cross-checks between the compiled kernel and its pure-Python twin."""

import numpy as np
import pytest

from resilient_observer._kernels import BACKEND, robust_py

try:
    from resilient_observer._kernels import robust_cy
except ImportError:
    robust_cy = None

BACKENDS = [robust_py] + ([robust_cy] if robust_cy is not None else [])


def _masks(n, edges):
    masks = [0] * n
    for j, i in edges:
        masks[i - 1] |= 1 << (j - 1)
    return masks


@pytest.mark.parametrize("impl", BACKENDS)
def test_clique_examples(impl):
    n = 5
    masks = _masks(n, [(j, i) for j in range(1, 6) for i in range(1, 6) if i != j])
    s_123 = 0b00111
    assert impl.peel_robust(masks, s_123, 3)
    assert impl.brute_robust(masks, s_123, 3)
    assert not impl.peel_robust(masks, s_123, 4)
    assert not impl.brute_robust(masks, s_123, 4)
    # two sources only: the whole non-source set blocks r=3
    s_12 = 0b00011
    assert not impl.peel_robust(masks, s_12, 3)
    assert not impl.brute_robust(masks, s_12, 3)
    assert impl.peel_robust(masks, s_12, 2)


@pytest.mark.parametrize("impl", BACKENDS)
def test_vacuous_when_sources_cover_everything(impl):
    masks = _masks(3, [(1, 2), (2, 3)])
    assert impl.peel_robust(masks, 0b111, 5)
    assert impl.brute_robust(masks, 0b111, 5)


def test_backends_agree_on_random_graphs():
    if robust_cy is None:
        pytest.skip("compiled kernel not built")
    rng = np.random.default_rng(7)
    for _ in range(400):
        n = int(rng.integers(2, 8))
        p = rng.choice([0.2, 0.5, 0.8])
        edges = [
            (j, i)
            for j in range(1, n + 1)
            for i in range(1, n + 1)
            if j != i and rng.random() < p
        ]
        masks = _masks(n, edges)
        s = int(rng.integers(1, 1 << n))
        r = int(rng.integers(1, 4))
        expected = robust_py.peel_robust(masks, s, r)
        assert robust_cy.peel_robust(masks, s, r) == expected
        assert robust_py.brute_robust(masks, s, r) == robust_cy.brute_robust(masks, s, r)


def test_exhaustive_agreement_small_n_both_backends():
    checks, bad = robust_py.exhaustive_agreement(3)
    assert (checks, bad) == (1344, 0)
    if robust_cy is not None:
        assert robust_cy.exhaustive_agreement(3) == (1344, 0)
        assert robust_cy.exhaustive_agreement(4) == (172032, 0)


def test_backend_selected():
    assert BACKEND in ("cython", "python")
