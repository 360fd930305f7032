import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from vpmgame.game_model import (
    MonitoringStructure,
    ProductDistribution,
    binary_entropy,
    noisy_binary_monitoring,
    pd_instance,
    prisoners_dilemma,
)
from vpmgame.info_constraint import (
    compute_rstar,
    entropy_term,
    in_constraint_set,
    pd_closed_form,
    rstar_batch,
)

P91 = ProductDistribution((np.array([0.9, 0.1]), np.array([0.9, 0.1])))
UNIFORM = ProductDistribution.uniform((2, 2))


def full_support():
    return st.floats(0.01, 0.99).map(lambda p: np.array([p, 1 - p]))


def test_entropy_term_examples():
    game, mon = pd_instance(1.0)
    assert entropy_term(game, mon, UNIFORM, 0, 1, 0) == 0.0
    for a in range(2):
        assert entropy_term(game, mon, UNIFORM, 0, 0, a) == pytest.approx(1.0)
    game, mon = pd_instance(0.5)
    assert entropy_term(game, mon, P91, 0, 0, 0) == pytest.approx(0.3990, abs=1e-4)
    with pytest.raises(IndexError):
        entropy_term(game, mon, P91, 0, 2, 0)


def test_compute_rstar_examples():
    game, mon = pd_instance(1.0)
    r = compute_rstar(game, mon, UNIFORM)
    assert r.rstar == pytest.approx(2.0) and not r.satisfied
    assert r.chromatic_numbers == (2, 2)
    game, mon = pd_instance(0.0)
    r = compute_rstar(game, mon, P91)
    assert r.rstar == 0.0 and r.satisfied and r.chromatic_numbers == (1, 1)
    game, mon = pd_instance(0.5)
    r = compute_rstar(game, mon, P91)
    assert r.rstar == pytest.approx(1.399, abs=1e-3) and r.satisfied
    assert r.threshold == pytest.approx(math.log2(3))


def test_in_constraint_set_examples():
    assert not in_constraint_set(*pd_instance(1.0), UNIFORM)
    assert in_constraint_set(*pd_instance(0.0), P91)
    assert in_constraint_set(*pd_instance(0.5), P91)
    # |S_0| = 1: threshold 0, chi = 2 makes R* ≥ 1
    assert not in_constraint_set(*pd_instance(0.5, public_alphabet_size=1), P91)
    # deterministic channel with |S_0| = 1: R* = 0 is not < 0
    assert not in_constraint_set(*pd_instance(0.0, public_alphabet_size=1), P91)


def test_strict_inequality_at_equality():
    # delta=1 with P*_2 uniform: R* = 2 exactly; |S_0| = 4 has threshold exactly 2
    game, mon = pd_instance(1.0, public_alphabet_size=4)
    r = compute_rstar(game, mon, UNIFORM)
    assert r.rstar == r.threshold == 2.0
    assert not r.satisfied


def test_report_recomputes_and_serializes():
    game, mon = pd_instance(0.5)
    r = compute_rstar(game, mon, P91)
    assert r.recompute_rstar() == pytest.approx(r.rstar, abs=1e-12)
    assert r.to_text(game).startswith("R*=1.399 bits, threshold=1.585, SATISFIED")
    d = r.to_dict()
    assert d["satisfied"] and len(d["terms"]) == 8


def test_closed_form_examples():
    assert pd_closed_form(1.0, UNIFORM) == pytest.approx(2.0)
    with pytest.raises(ValueError):
        pd_closed_form(0.0, UNIFORM)
    # delta=1: R* = H_b(p) + 1; the boundary sits where H_b(p) = log2(3) - 1
    p_star = brentq(lambda p: binary_entropy(p) - (math.log2(3) - 1), 1e-6, 0.5)
    assert p_star == pytest.approx(0.1403, abs=1e-4)
    for p in (0.05, 0.14, 0.3):
        dist = ProductDistribution((np.array([0.5, 0.5]), np.array([p, 1 - p])))
        q = ProductDistribution((np.array([p, 1 - p]), np.array([p, 1 - p])))
        assert pd_closed_form(1.0, q) == pytest.approx(binary_entropy(p) + 1.0, abs=1e-12)
        assert pd_closed_form(1.0, dist) == pytest.approx(2.0)
    below = ProductDistribution((np.array([p_star - 1e-3, 1 - p_star + 1e-3]),) * 2)
    above = ProductDistribution((np.array([p_star + 1e-3, 1 - p_star - 1e-3]),) * 2)
    game, mon = pd_instance(1.0)
    assert in_constraint_set(game, mon, below)
    assert not in_constraint_set(game, mon, above)


@settings(max_examples=100, deadline=None)
@given(st.floats(0.05, 1.0), full_support(), full_support())
def test_closed_form_oracle_equivalence(delta, p1, p2):
    game, mon = pd_instance(delta)
    dist = ProductDistribution((p1, p2))
    assert abs(compute_rstar(game, mon, dist).rstar - pd_closed_form(delta, dist)) < 1e-9


@settings(max_examples=30, deadline=None)
@given(full_support(), full_support())
def test_rstar_nondecreasing_in_delta(p1, p2):
    dist = ProductDistribution((p1, p2))
    game = prisoners_dilemma()
    vals = [compute_rstar(game, noisy_binary_monitoring(d), dist).rstar for d in np.arange(1, 21) * 0.05]
    assert all(b >= a - 1e-12 for a, b in zip(vals, vals[1:]))


@settings(max_examples=40, deadline=None)
@given(st.floats(0.0, 1.0), full_support(), full_support())
def test_term_bounds_and_k2_reduction(delta, p1, p2):
    game, mon = pd_instance(delta)
    dist = ProductDistribution((p1, p2))
    r = compute_rstar(game, mon, dist)
    for (i, k, a), v in r.terms.items():
        assert -1e-12 <= v <= 1.0 + 1e-12
        if k != i:
            assert v == 0.0


def test_batch_matches_scalar():
    rng = np.random.default_rng(5)
    for delta in (0.0, 0.3, 1.0):
        game, mon = pd_instance(delta)
        p = rng.random((25, 2))
        p[:3] = [[1, 0], [0, 1], [0.5, 0.5]]
        q = rng.random((25, 2))
        m1, m2 = p / p.sum(1, keepdims=True), q / q.sum(1, keepdims=True)
        batch = rstar_batch(game, mon, [m1, m2])
        for r in range(25):
            scalar = compute_rstar(game, mon, ProductDistribution((m1[r], m2[r]))).rstar
            assert batch[r] == pytest.approx(scalar, abs=1e-12)


def test_three_player_batch_matches_scalar():
    rng = np.random.default_rng(2)
    u = rng.normal(size=(3, 2, 2, 2))
    from vpmgame.game_model import StageGame

    game = StageGame((("a", "b"),) * 3, u)
    table = rng.random((2, 2, 2, 2, 2, 2))
    table /= table.sum(axis=(3, 4, 5), keepdims=True)
    mon = MonitoringStructure(table, (("x", "y"),) * 3, 16)
    margs = [rng.dirichlet(np.ones(2), size=6) for _ in range(3)]
    batch = rstar_batch(game, mon, margs)
    for r in range(6):
        dist = ProductDistribution(tuple(m[r] for m in margs))
        assert batch[r] == pytest.approx(compute_rstar(game, mon, dist).rstar, abs=1e-12)
