import numpy as np
import pytest
from scipy.stats import binom

from vpmgame.game_model import DeviationSpec, ProductDistribution, pd_instance
from vpmgame.equilibrium_region import minmax_levels
from vpmgame.repeated_game_sim import (
    SimConfig,
    epsilon_equilibrium_check,
    punishment_profile,
    run_match,
    run_matches,
    standard_deviation_library,
    statistical_block_test,
)

P91 = ProductDistribution((np.array([0.9, 0.1]), np.array([0.9, 0.1])))
GAME, MON = pd_instance(0.5)


def exact_false_alarm(n, eps):
    # one player's block is atypical when 2 |c/n - 0.1| > eps, c ~ Bin(n, 0.1)
    c = np.arange(n + 1)
    typical = 2 * np.abs(c / n - 0.1) <= eps + 1e-12
    p_ok = binom.pmf(c, n, 0.1)[typical].sum()
    return 1 - p_ok ** 2


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(n=10, blocks=2, target=P91)
    with pytest.raises(ValueError):
        SimConfig(n=0, blocks=3, target=P91)
    with pytest.raises(ValueError):
        SimConfig(n=10, blocks=3, target=P91, mode="oracle")
    cfg = SimConfig(n=10, blocks=5, target=P91, epsilon_test=0.15)
    assert cfg.test_epsilon == 0.15 and cfg.horizon == 50
    assert SimConfig(n=10, blocks=5, target=P91).test_epsilon == cfg.epsilon


def test_block_test_examples():
    assert statistical_block_test([0] * 9 + [1], P91[0], 0.05) == 0
    assert statistical_block_test([0] * 10, P91[0], 0.15) == 1
    assert statistical_block_test([0] * 10, P91[0], 0.2) == 0
    assert statistical_block_test([1] * 10, P91[0], 0.5) == 1


def test_punishment_profile_pd():
    lv = minmax_levels(GAME)
    prof = punishment_profile(GAME, 0, lv)
    assert prof[0] is None and prof[1].tolist() == [0.0, 1.0]
    assert punishment_profile(GAME, 1)[0].tolist() == [0.0, 1.0]


def test_three_blocks_give_one_tested_block():
    tr = run_match(GAME, MON, SimConfig(n=20, blocks=3, target=P91))
    assert tr.tested_blocks() == [2]
    assert (tr.tests[0] == -1).all() and (tr.tests[2] == -1).all()
    assert tr.actions.shape == (3, 20, 2) and tr.utilities.shape == (3, 20, 2)
    assert (tr.public == -1).all()  # ideal mode renders nothing


def test_gamma_replays_from_actions():
    tr = run_match(GAME, MON, SimConfig(n=30, blocks=6, target=P91, master_seed=4), match=2)
    u = GAME.utilities
    manual = np.array([[u[k][tuple(tr.actions[b, t])] for k in range(2)]
                       for b in range(6) for t in range(30)]).mean(axis=0)
    assert np.allclose(tr.gamma, manual)


def test_detection_delay_and_absorbing_punishment():
    dev = DeviationSpec.constant(0, 1, start_block=3)
    cfg = SimConfig(n=100, blocks=8, target=P91, deviation=dev, epsilon_test=0.15)
    tr = run_match(GAME, MON, cfg)
    assert tr.first_offtype_block == 3
    # block 3 is tested at the end of block 4; punishment starts in block 5
    assert tr.detection_block(0) == 4
    assert tr.tests[2, 1, 0] == 1
    assert (tr.punishing[4:, 1] == 0).all() and (tr.punishing[:4, 1] == -1).all()
    # the punisher plays R, the minmax action against player 1, from then on
    assert (tr.actions[4:, :, 1] == 1).all()
    # the honest player is flagged only once punishing makes its own play off-type,
    # and the deviation keeps overriding player 1's actions regardless
    assert (tr.punishing[:6, 0] == -1).all() and tr.tests[4, 0, 1] == 1
    assert (tr.actions[2:, :, 0] == 1).all()
    csv_text = tr.to_csv()
    assert csv_text.splitlines()[0] == "block,tested,E_1_2,E_2_1,punish_1,punish_2,u1,u2"
    assert len(csv_text.splitlines()) == 9


def test_honest_false_alarm_matches_binomial_oracle_and_decreases():
    rates = []
    for n in (50, 200, 800):
        traces = run_matches(GAME, MON, SimConfig(n=n, blocks=3, target=P91, epsilon_test=0.08), 400)
        est = np.mean([t.event for t in traces])
        exact = exact_false_alarm(n, 0.08)
        assert abs(est - exact) <= 4 * np.sqrt(exact * (1 - exact) / 400) + 1e-9
        rates.append(exact)
    assert rates[0] > rates[1] > rates[2]


def test_matches_deterministic_and_jobs_invariant():
    cfg = SimConfig(n=40, blocks=5, target=P91, master_seed=3,
                    deviation=DeviationSpec.iid(1, [0.5, 0.5], 3))
    a = run_matches(GAME, MON, cfg, 6)
    b = run_matches(GAME, MON, cfg, 6, jobs=3)
    assert [t.to_csv() for t in a] == [t.to_csv() for t in b]
    with pytest.raises(ValueError):
        run_matches(GAME, MON, cfg, 0)


def test_codec_mode_runs_and_renders_public_sequences():
    cfg = SimConfig(n=12, blocks=4, target=P91, mode="codec", master_seed=1)
    tr = run_match(GAME, MON, cfg)
    assert (tr.public[0] == 0).all()
    assert tr.public[1:].min() >= 0 and tr.public.max() < 3
    for b in tr.tested_blocks():
        assert len(tr.decode_status[b - 1]) == 2
        for k, st in enumerate(tr.decode_status[b - 1]):
            if st == "ok":
                assert np.array_equal(tr.decoded[b - 1, k], tr.actions[b - 1])


def test_typical_reshuffle_gains_nothing():
    dev = DeviationSpec.typical_shuffle(0, 3)
    cfg = SimConfig(n=100, blocks=10, target=P91, epsilon_test=0.15)
    rep = epsilon_equilibrium_check(GAME, MON, cfg, [dev], matches=40)
    assert abs(rep.results[0].gain) <= 0.05 + rep.results[0].half_width


def test_equilibrium_check_and_library():
    lib = standard_deviation_library(GAME, P91)
    assert len(lib) == 8 and all(d.start_block == 3 for d in lib)
    cfg = SimConfig(n=100, blocks=30, target=P91, epsilon_test=0.15)
    rep = epsilon_equilibrium_check(GAME, MON, cfg, [lib[1]], matches=20)
    assert rep.passed and rep.results[0].detection_rate == 1.0
    assert rep.results[0].gain < 0
    assert "PASS" in rep.to_text()
    with pytest.raises(ValueError, match="empty"):
        epsilon_equilibrium_check(GAME, MON, cfg, [], matches=5)
    with pytest.raises(ValueError):
        epsilon_equilibrium_check(GAME, MON, cfg, lib, matches=0)
