"""Block-structured repeated game with a public encoder, tests and punishment.

Schedule for B blocks of n stages:

* blocks 1 and 2: everybody plays the target mixed action; block 1 carries
  an all-zero public sequence;
* during block b ≥ 2 the public sequence encodes the profiles of block b-1;
* at the end of block b ≥ 3 every player decodes block b-1 and tests each
  opponent's reconstructed sequence for typicality;
* a player that flags someone punishes the lowest-index flagged opponent
  with its min-max strategy from block b+1 until the end of the match.

Two monitoring modes are available: ``codec`` runs the real encoder and
decoders, ``ideal`` hands every decoder the true profiles (a perfect public
channel), which is what makes long blocks tractable.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .avs_codec_sim import Codebook, build_code, decode, encode, sample_signals
from .equilibrium_region import MinmaxLevels, minmax_levels
from .game_model import (
    DEFAULT_EPSILON,
    DeviationSpec,
    MonitoringStructure,
    ProductDistribution,
    StageGame,
    expected_utility,
    is_typical,
)

MODES = ("ideal", "codec")


@dataclass(frozen=True)
class SimConfig:
    n: int
    blocks: int
    target: ProductDistribution
    epsilon: float = DEFAULT_EPSILON
    epsilon_test: float | None = None
    deviation: DeviationSpec = field(default_factory=DeviationSpec.none)
    master_seed: int = 0
    epsilon_eq: float = 0.15
    mode: str = "ideal"
    decode_failure_flags: bool = True
    codebook_seed: int = 0
    nbar1: int | None = None

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError("block length n must be ≥ 1")
        if self.blocks < 3:
            raise ValueError("at least 3 blocks are needed (two warm-up blocks + play)")
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}")
        if self.epsilon <= 0 or self.test_epsilon <= 0:
            raise ValueError("epsilons must be > 0")

    @property
    def test_epsilon(self) -> float:
        return self.epsilon if self.epsilon_test is None else self.epsilon_test

    @property
    def horizon(self) -> int:
        return self.n * self.blocks

    def recommended_blocks(self, game: StageGame) -> int:
        return math.ceil(8 * game.max_abs_utility() / self.epsilon_eq)


@dataclass
class MatchTrace:
    """Everything that happened in one match.

    ``tests[b, k, i]`` is player k's verdict on player i for the content of
    block b+1 (-1 when untested); ``punishing[b, k]`` is the player that k
    punishes during block b+1 (-1 for none).  ``public`` rows are -1 when
    no public sequence was rendered (ideal mode).
    """

    n: int
    blocks: int
    actions: np.ndarray
    signals: np.ndarray
    public: np.ndarray
    decoded: np.ndarray
    tests: np.ndarray
    punishing: np.ndarray
    utilities: np.ndarray
    decode_status: list[list[str]]
    first_offtype_block: int | None
    deviator: int | None

    @property
    def gamma(self) -> np.ndarray:
        return self.utilities.reshape(-1, self.utilities.shape[-1]).mean(axis=0)

    @property
    def event(self) -> bool:
        return bool((self.tests == 1).any())

    def tested_blocks(self) -> list[int]:
        return [b + 1 for b in range(self.blocks) if (self.tests[b] >= 0).any()]

    def detection_block(self, player: int | None = None) -> int | None:
        """Block at whose end a test first flagged ``player`` (any player if None)."""
        for b in range(self.blocks):
            flags = self.tests[b] == 1
            hit = flags.any() if player is None else flags[:, player].any()
            if hit:
                return b + 2  # content of block b+1 is tested at the end of block b+2
        return None

    def block_utilities(self) -> np.ndarray:
        return self.utilities.mean(axis=1)

    def to_csv(self) -> str:
        K = self.actions.shape[-1]
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["block", "tested"]
                   + [f"E_{k + 1}_{i + 1}" for k in range(K) for i in range(K) if i != k]
                   + [f"punish_{k + 1}" for k in range(K)]
                   + [f"u{k + 1}" for k in range(K)])
        bu = self.block_utilities()
        for b in range(self.blocks):
            tested = int((self.tests[b] >= 0).any())
            bits = [int(self.tests[b, k, i]) if tested else "" for k in range(K)
                    for i in range(K) if i != k]
            pun = [int(p) + 1 if p >= 0 else "" for p in self.punishing[b]]
            w.writerow([b + 1, tested] + bits + pun + [f"{x:.12g}" for x in bu[b]])
        return buf.getvalue()


def statistical_block_test(decoded_i, target_i, epsilon: float) -> int:
    """1 when the reconstructed sequence is not typical for the target mixed action."""
    return 0 if is_typical(np.asarray(decoded_i, dtype=np.int64), target_i, epsilon) else 1


def punishment_profile(game: StageGame, i: int,
                       levels: MinmaxLevels | None = None) -> tuple[np.ndarray | None, ...]:
    levels = levels or minmax_levels(game)
    return levels.punishments[i]


def _decode_flags(k: int, status_suspect: int | None, K: int) -> int:
    """Opponent blamed by k when decoding fails."""
    if status_suspect is not None and status_suspect != k:
        return status_suspect
    return min(j for j in range(K) if j != k)


def run_match(game: StageGame, monitoring: MonitoringStructure, config: SimConfig,
              match: int = 0, code: Codebook | None = None,
              levels: MinmaxLevels | None = None) -> MatchTrace:
    """Play one match; the generator is ``default_rng([master_seed, match])``."""
    if code is None:
        code = build_code(game, monitoring, config.target, config.n, config.epsilon,
                          config.codebook_seed, config.nbar1)
    levels = levels or minmax_levels(game)
    n, B, K = config.n, config.blocks, game.n_players
    P = config.target
    dev = config.deviation
    rng = np.random.default_rng([config.master_seed, match])

    actions = np.zeros((B, n, K), dtype=np.int64)
    signals = np.zeros((B, n, K), dtype=np.int64)
    public = np.full((B, n), -1, dtype=np.int64)
    decoded = np.full((B, K, n, K), -1, dtype=np.int64)
    tests = np.full((B, K, K), -1, dtype=np.int8)
    punishing = np.full((B, K), -1, dtype=np.int64)
    status: list[list[str]] = [[] for _ in range(B)]
    target_of = [-1] * K  # absorbing punishment target per player
    first_off: int | None = None

    for b in range(B):
        punishing[b] = target_of
        for k in range(K):
            if dev.active and dev.player == k and b + 1 >= dev.start_block:
                actions[b, :, k] = dev.sample(rng, n, P[k], offset=b * n)
            elif target_of[k] >= 0:
                q = levels.punishments[target_of[k]][k]
                actions[b, :, k] = rng.choice(len(q), size=n, p=q)
            else:
                actions[b, :, k] = rng.choice(len(P[k]), size=n, p=P[k])
        signals[b] = sample_signals(monitoring, actions[b], rng)
        if dev.active and first_off is None and b + 1 >= dev.start_block:
            if not is_typical(actions[b, :, dev.player], P[dev.player], config.test_epsilon):
                first_off = b + 1

        if b == 0:
            if config.mode == "codec":
                public[0] = 0
            continue
        if config.mode == "codec":
            public[b] = encode(code, actions[b - 1]).public
        if b < 2:
            continue

        # end of block b+1: decode and test block b
        tb = b - 1
        for k in range(K):
            if config.mode == "ideal":
                rec, st, sus = actions[tb], "ok", None
            else:
                res = decode(code, k, public[b], signals[tb, :, k], actions[tb, :, k])
                rec, st, sus = res.actions, res.status, res.suspect
            status[tb].append(st)
            if rec is None:
                for i in range(K):
                    if i != k:
                        tests[tb, k, i] = 0
                if config.decode_failure_flags:
                    tests[tb, k, _decode_flags(k, sus, K)] = 1
            else:
                decoded[tb, k] = rec
                for i in range(K):
                    if i != k:
                        tests[tb, k, i] = statistical_block_test(rec[:, i], P[i],
                                                                 config.test_epsilon)
            if target_of[k] < 0:
                flagged = [i for i in range(K) if i != k and tests[tb, k, i] == 1]
                if flagged:
                    target_of[k] = flagged[0]

    util = game.utilities[(slice(None),) + tuple(actions[..., j] for j in range(K))]
    util = np.moveaxis(util, 0, -1)
    return MatchTrace(n, B, actions, signals, public, decoded, tests, punishing, util, status,
                      first_off, dev.player if dev.active else None)


def _match_chunk(args) -> list[MatchTrace]:
    game, monitoring, config, indices, code, levels = args
    return [run_match(game, monitoring, config, m, code, levels) for m in indices]


def run_matches(game: StageGame, monitoring: MonitoringStructure, config: SimConfig,
                matches: int, jobs: int = 1) -> list[MatchTrace]:
    """Independent matches 0..matches-1, returned in index order."""
    if matches < 1:
        raise ValueError("matches must be ≥ 1")
    code = build_code(game, monitoring, config.target, config.n, config.epsilon,
                      config.codebook_seed, config.nbar1)
    levels = minmax_levels(game)
    idx = list(range(matches))
    if jobs <= 1:
        return _match_chunk((game, monitoring, config, idx, code, levels))
    chunks = [idx[j::jobs] for j in range(jobs) if idx[j::jobs]]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        parts = pool.map(_match_chunk, [(game, monitoring, config, c, code, levels) for c in chunks])
        traces = [t for p in parts for t in p]
    order = [m for c in chunks for m in c]
    return [t for _, t in sorted(zip(order, traces), key=lambda x: x[0])]


# ---------------------------------------------------------------------------
# Equilibrium check
# ---------------------------------------------------------------------------


def standard_deviation_library(game: StageGame, target: ProductDistribution,
                               start_block: int = 3) -> list[DeviationSpec]:
    """Constant actions, a uniform i.i.d. deviation and a typical reshuffle per player."""
    lib: list[DeviationSpec] = []
    for i, m in enumerate(game.action_counts):
        lib += [DeviationSpec.constant(i, a, start_block) for a in range(m)]
        lib.append(DeviationSpec.iid(i, np.full(m, 1.0 / m), start_block))
        lib.append(DeviationSpec.typical_shuffle(i, start_block))
    return lib


@dataclass(frozen=True)
class DeviationResult:
    deviation: DeviationSpec
    utility: float
    half_width: float
    gain: float
    detection_rate: float


@dataclass(frozen=True)
class EquilibriumReport:
    honest_utilities: np.ndarray
    honest_half_width: np.ndarray
    target_utilities: np.ndarray
    false_alarm_rate: float
    results: tuple[DeviationResult, ...]
    epsilon_eq: float

    @property
    def max_gain(self) -> float:
        return max(r.gain for r in self.results)

    @property
    def worst(self) -> DeviationResult:
        return max(self.results, key=lambda r: r.gain)

    @property
    def passed(self) -> bool:
        w = self.worst
        return w.gain <= self.epsilon_eq + w.half_width

    @property
    def distance(self) -> np.ndarray:
        return np.abs(self.honest_utilities - self.target_utilities)

    def to_text(self) -> str:
        lines = [f"honest utilities: {np.round(self.honest_utilities, 4).tolist()} "
                 f"(target {np.round(self.target_utilities, 4).tolist()}, "
                 f"distance {np.round(self.distance, 4).tolist()})",
                 f"honest false-alarm rate: {self.false_alarm_rate:.4f}"]
        for r in self.results:
            lines.append(f"  {r.deviation.label()}: utility={r.utility:.4f} ± {r.half_width:.4f} "
                         f"gain={r.gain:+.4f} detected={r.detection_rate:.3f}")
        lines.append(f"max gain={self.max_gain:+.4f} epsilon_eq={self.epsilon_eq} "
                     f"{'PASS' if self.passed else 'FAIL'}")
        return "\n".join(lines)


def _mean_hw(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    x = np.asarray(x, dtype=float)
    if len(x) < 2:
        return x.mean(axis=0), np.zeros(x.shape[1:])
    return x.mean(axis=0), 1.96 * x.std(axis=0, ddof=1) / math.sqrt(len(x))


def epsilon_equilibrium_check(game: StageGame, monitoring: MonitoringStructure,
                              config: SimConfig, deviation_library: Sequence[DeviationSpec],
                              matches: int = 100, jobs: int = 1) -> EquilibriumReport:
    """Monte Carlo check that no library deviation gains more than epsilon_eq.

    A deviation passes when its gain is at most epsilon_eq plus the 95%
    half-width of the difference of means.
    """
    if not deviation_library:
        raise ValueError("deviation library is empty")
    if matches < 1:
        raise ValueError("an honest baseline needs at least one match")
    honest = run_matches(game, monitoring, replace(config, deviation=DeviationSpec.none()),
                         matches, jobs)
    h_util = np.array([t.gamma for t in honest])
    h_mean, h_hw = _mean_hw(h_util)
    results = []
    for dev in deviation_library:
        traces = run_matches(game, monitoring, replace(config, deviation=dev), matches, jobs)
        d = np.array([t.gamma[dev.player] for t in traces])
        d_mean, d_hw = _mean_hw(d[:, None])
        hw = float(math.hypot(float(d_hw[0]), float(h_hw[dev.player])))
        detected = np.mean([t.detection_block(dev.player) is not None for t in traces])
        results.append(DeviationResult(dev, float(d_mean[0]), hw,
                                       float(d_mean[0] - h_mean[dev.player]), float(detected)))
    return EquilibriumReport(h_mean, h_hw, expected_utility(game, config.target),
                             float(np.mean([t.event for t in honest])), tuple(results),
                             config.epsilon_eq)


__all__ = [
    "MODES", "SimConfig", "MatchTrace", "statistical_block_test", "punishment_profile",
    "run_match", "run_matches", "standard_deviation_library", "DeviationResult",
    "EquilibriumReport", "epsilon_equilibrium_check",
]
