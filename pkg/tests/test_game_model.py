import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from vpmgame.game_model import (
    DeviationSpec,
    GameSpecError,
    JointDistribution,
    ProductDistribution,
    binary_entropy,
    conditional_entropy,
    empirical_type,
    entropy,
    exact_type_sequence,
    expected_utility,
    noisy_binary_monitoring,
    game_to_dict,
    is_jointly_typical,
    is_typical,
    mutual_information,
    pd_instance,
    prisoners_dilemma,
    signal_channel,
    typical_set_size,
    validate_game,
)

PD_RAW = {
    "players": 2,
    "actions": [["T", "B"], ["L", "R"]],
    "utilities": [[3, 3], [0, 4], [4, 0], [1, 1]],
    "monitoring": {"type": "noisy_binary", "delta": 0.5},
    "public_alphabet_size": 3,
}


def simplex(n):
    return st.lists(st.floats(0.01, 1.0), min_size=n, max_size=n).map(
        lambda v: np.asarray(v) / np.sum(v))


# --- validation --------------------------------------------------------------

def test_validate_pd_payoffs():
    game, mon = validate_game(PD_RAW)
    assert game.payoff((0, 0)).tolist() == [3, 3]
    assert game.payoff((0, 1)).tolist() == [0, 4]
    assert game.payoff((1, 0)).tolist() == [4, 0]
    assert game.payoff((1, 1)).tolist() == [1, 1]
    assert mon.public_alphabet_size == 3


def test_validate_rejects_non_stochastic_row():
    raw = dict(PD_RAW)
    table = np.full((4, 4), 0.25)
    table[2] = [0.25, 0.25, 0.25, 0.23]
    raw["monitoring"] = {"type": "joint", "signals": [["a", "b"], ["c", "d"]], "table": table.tolist()}
    with pytest.raises(GameSpecError, match="row not stochastic"):
        validate_game(raw)


def test_validate_rejects_single_player():
    with pytest.raises(GameSpecError, match="K ≥ 2 required"):
        validate_game({"actions": [["a", "b"]], "utilities": [[1], [2]],
                       "monitoring": {"type": "noisy_binary", "delta": 0}, "public_alphabet_size": 2})


def test_validate_rejects_duplicate_labels_and_bad_shape():
    raw = dict(PD_RAW, actions=[["T", "T"], ["L", "R"]])
    with pytest.raises(GameSpecError, match="duplicate"):
        validate_game(raw)
    raw = dict(PD_RAW, utilities=[[3, 3], [0, 4], [4, 0]])
    with pytest.raises(GameSpecError, match="dimension mismatch"):
        validate_game(raw)


def test_game_dict_roundtrip():
    game, mon = pd_instance(0.3)
    g2, m2 = validate_game(game_to_dict(game, mon))
    assert np.array_equal(g2.utilities, game.utilities)
    assert np.allclose(m2.joint_table, mon.joint_table)


# --- channel -----------------------------------------------------------------

def test_signal_channel_noisy_binary_delta04():
    mon = noisy_binary_monitoring(0.4)
    ch = signal_channel(mon, 0)  # (a1, a2, s1)
    for a1 in range(2):
        assert ch[a1, 0].tolist() == pytest.approx([0.8, 0.2])
        assert ch[a1, 1].tolist() == pytest.approx([0.2, 0.8])


def test_signal_channel_delta1_uniform_and_rows_stochastic():
    ch = signal_channel(noisy_binary_monitoring(1.0), 1)
    assert np.allclose(ch, 0.5)
    for d in (0.0, 0.3, 0.9):
        for k in range(2):
            assert np.allclose(signal_channel(noisy_binary_monitoring(d), k).sum(-1), 1.0)


def test_signal_channel_factorized_marginal():
    mon = noisy_binary_monitoring(0.6)
    ch1 = signal_channel(mon, 0)
    ch2 = signal_channel(mon, 1)
    assert np.allclose(np.einsum("abx,aby->abxy", ch1, ch2), mon.joint_table)


# --- utilities ---------------------------------------------------------------

def test_expected_utility_examples():
    game = prisoners_dilemma()
    assert expected_utility(game, ProductDistribution.pure((2, 2), (0, 0))).tolist() == [3, 3]
    P = ProductDistribution((np.array([0.9, 0.1]), np.array([0.9, 0.1])))
    # direct summation over the four profiles
    direct = sum(P[0][a] * P[1][b] * game.payoff((a, b)) for a in range(2) for b in range(2))
    assert np.allclose(expected_utility(game, P), direct)
    assert np.allclose(expected_utility(game, P), [2.8, 2.8])


@given(st.integers(0, 1), st.integers(0, 1))
def test_expected_utility_degenerate(a, b):
    game = prisoners_dilemma()
    assert np.array_equal(expected_utility(game, ProductDistribution.pure((2, 2), (a, b))),
                          game.payoff((a, b)))


# --- entropy -----------------------------------------------------------------

def test_entropy_examples():
    assert entropy(np.full(4, 0.25)) == pytest.approx(2.0)
    assert entropy(np.array([1.0, 0.0])) == 0.0
    assert entropy(np.array([0.9, 0.1])) == pytest.approx(0.4690, abs=1e-4)


def test_conditional_entropy_examples():
    x = np.array([0.3, 0.7])
    y = np.array([0.6, 0.4])
    indep = JointDistribution(np.outer(x, y), ("x", "y"))
    assert conditional_entropy(indep, ["x"], ["y"]) == pytest.approx(entropy(x))
    ident = JointDistribution(np.diag([0.5, 0.5]), ("x", "y"))
    assert conditional_entropy(ident, ["x"], ["y"]) == pytest.approx(0.0)
    # PD channel delta=0.5: a_2 ~ (0.9, 0.1) seen through flip 0.25
    bsc = np.array([[0.75, 0.25], [0.25, 0.75]])
    j = JointDistribution(np.array([0.9, 0.1])[:, None] * bsc, ("a2", "s1"))
    assert conditional_entropy(j, ["a2"], ["s1"]) == pytest.approx(0.3990, abs=1e-4)
    with pytest.raises(ValueError):
        conditional_entropy(j, ["a2"], ["a2"])


def test_mutual_information_examples():
    ident = JointDistribution(np.diag([0.25, 0.75]), ("x", "y"))
    assert mutual_information(ident, ["x"], ["y"]) == pytest.approx(entropy(np.array([0.25, 0.75])))
    indep = JointDistribution(np.outer([0.5, 0.5], [0.2, 0.8]), ("x", "y"))
    assert mutual_information(indep, ["x"], ["y"]) == pytest.approx(0.0, abs=1e-12)
    bsc = np.array([[0.75, 0.25], [0.25, 0.75]])
    j = JointDistribution(0.5 * bsc, ("x", "y"))
    assert mutual_information(j, ["x"], ["y"]) == pytest.approx(1 - binary_entropy(0.25), abs=1e-12)
    assert mutual_information(j, ["x"], ["y"]) == pytest.approx(0.1887, abs=1e-4)


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 4), st.integers(2, 4), st.data())
def test_entropy_chain_rule_and_bounds(nx, ny, data):
    raw = np.asarray(data.draw(st.lists(st.floats(0.0, 1.0), min_size=nx * ny, max_size=nx * ny)))
    if raw.sum() < 1e-3:
        raw = raw + 1.0
    table = (raw / raw.sum()).reshape(nx, ny)
    j = JointDistribution(table, ("x", "y"))
    hxy, hy, hx = entropy(table), entropy(table.sum(0)), entropy(table.sum(1))
    hxgy = conditional_entropy(j, ["x"], ["y"])
    assert hxy == pytest.approx(hy + hxgy, abs=1e-10)
    assert -1e-12 <= hxgy <= hx + 1e-10 <= math.log2(nx) + 2e-10
    assert mutual_information(j, ["x"], ["y"]) == pytest.approx(
        mutual_information(j, ["y"], ["x"]), abs=1e-10)


# --- types and typicality ----------------------------------------------------

def test_empirical_type_examples():
    assert empirical_type(["T", "T", "B", "B"], ["T", "B"]).tolist() == [0.5, 0.5]
    assert empirical_type([1, 1, 1], 2).tolist() == [0.0, 1.0]
    assert empirical_type([0] * 6 + [1] * 4, 2).tolist() == pytest.approx([0.6, 0.4])
    with pytest.raises(ValueError):
        empirical_type([], 2)


def test_is_typical_examples():
    q = np.array([0.75, 0.25])
    assert is_typical([0, 0, 0, 1], q, 0.0)
    assert not is_typical([0, 0, 1, 2], np.array([0.5, 0.5, 0.0]), 10.0)
    seq = [0] * 6 + [1] * 4
    assert not is_typical(seq, np.array([0.5, 0.5]), 0.05)
    assert is_typical(seq, np.array([0.5, 0.5]), 0.2)


def test_is_jointly_typical_examples():
    joint = np.array([[0.25, 0.25], [0.25, 0.25]])
    x, y = [0, 0, 1, 1], [0, 1, 0, 1]
    assert is_jointly_typical(x, y, joint, 0.0)
    # marginally exact but pair counts concentrated on the diagonal
    x2 = [0, 0, 1, 1, 0, 1, 0, 1, 0, 1]
    y2 = [0, 0, 1, 1, 0, 1, 0, 1, 1, 0]
    assert is_typical(x2, [0.5, 0.5], 0.0) and is_typical(y2, [0.5, 0.5], 0.0)
    pair = np.bincount(np.array(x2) * 2 + np.array(y2), minlength=4) / 10
    assert np.abs(pair - 0.25).sum() > 0.3 - 1e-12
    assert not is_jointly_typical(x2, y2, joint, 0.1)
    with pytest.raises(ValueError):
        is_jointly_typical([0, 1], [0], joint, 0.1)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.integers(0, 3), min_size=1, max_size=40), simplex(4), st.floats(0, 1))
def test_typicality_matches_type_distance(seq, q, eps):
    t = empirical_type(seq, 4)
    expected = np.abs(t - q).sum() <= eps + 1e-12 and not ((q <= 0) & (t > 0)).any()
    assert is_typical(seq, q, eps) == expected


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 2)), min_size=1, max_size=30),
       st.floats(0, 0.6), st.data())
def test_joint_typicality_implies_marginal(pairs, eps, data):
    raw = np.asarray(data.draw(st.lists(st.floats(0.05, 1), min_size=6, max_size=6)))
    joint = (raw / raw.sum()).reshape(2, 3)
    x = [p[0] for p in pairs]
    y = [p[1] for p in pairs]
    if is_jointly_typical(x, y, joint, eps):
        assert is_typical(x, joint.sum(1), eps)
        assert is_typical(y, joint.sum(0), eps)


def test_typical_fraction_grows_with_n():
    rng = np.random.default_rng(11)
    q = np.array([0.5, 0.3, 0.2])
    fracs = []
    for n in (50, 200, 800):
        draws = rng.choice(3, size=(10_000, n), p=q)
        counts = np.stack([(draws == s).sum(1) for s in range(3)], 1)
        fracs.append(float((np.abs(counts / n - q).sum(1) <= 0.1).mean()))
    assert fracs[0] <= fracs[1] <= fracs[2]
    assert fracs[2] >= 0.99


def test_typical_set_size_matches_enumeration():
    q = np.array([0.5, 0.5])
    n, eps = 10, 0.2
    brute = sum(is_typical(s, q, eps) for s in itertools.product(range(2), repeat=n))
    assert typical_set_size(q, n, eps) == brute


def test_exact_type_sequence_has_target_type():
    seq = exact_type_sequence([0.9, 0.1], 200)
    assert empirical_type(seq, 2).tolist() == [0.9, 0.1]
    assert is_typical(seq, [0.9, 0.1], 0.0)


# --- deviations --------------------------------------------------------------

def test_deviation_generators_are_valid():
    rng = np.random.default_rng(0)
    target = np.array([0.9, 0.1])
    specs = [DeviationSpec.constant(0, 1), DeviationSpec.iid(0, [0.5, 0.5]),
             DeviationSpec.periodic(0, [0, 1, 1]), DeviationSpec.scripted(0, [1, 0, 0, 1]),
             DeviationSpec.typical_shuffle(0), DeviationSpec.none()]
    for spec in specs:
        for t in range(5):
            d = spec.stage_distribution(t, target)
            assert d.min() >= 0 and d.sum() == pytest.approx(1.0)
        seq = spec.sample(rng, 20, target)
        assert seq.shape == (20,) and set(seq.tolist()) <= {0, 1}
    assert DeviationSpec.constant(0, 1).sample(rng, 4, target).tolist() == [1, 1, 1, 1]
    assert DeviationSpec.periodic(0, [0, 1, 1]).sample(rng, 5, target, offset=1).tolist() == [1, 1, 0, 1, 1]
    assert empirical_type(DeviationSpec.typical_shuffle(0).sample(rng, 50, target), 2).tolist() == [0.9, 0.1]


def test_deviation_validation():
    with pytest.raises(ValueError):
        DeviationSpec(0, "bogus")
    with pytest.raises(ValueError):
        DeviationSpec.iid(0, [0.5, 0.6])
    with pytest.raises(ValueError):
        DeviationSpec.constant(0, 1, start_block=0)
