"""Resilient source code for the public channel, and Monte Carlo error estimation.

Encoding of a block of action profiles a^n:

1. pick the suspect i by the L1 type statistic (lowest index on ties);
2. send the color of a_i at every stage (a minimal coloring of i's
   confusability graph);
3. split the stages by the value of a_i; for each action class send the
   opponents' segment verbatim if the class is short (≤ ``nbar1`` stages),
   otherwise send a seeded-hash bin index.

Message layout (least significant field first): suspect (radix K), the n
colors (radix chi_i), then one payload per action of i in index order.
The packed integer plus one is written as n base-|S_0| digits, most
significant first.  The all-zero public sequence is reserved for encoder
errors.
"""

from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np
from scipy.stats import binomtest

from .game_model import (
    PROB_TOL,
    DeviationSpec,
    MonitoringStructure,
    ProductDistribution,
    StageGame,
    game_to_dict,
    is_typical,
    mutual_information,
    JointDistribution,
    signal_channel,
    validate_game,
)
from .info_constraint import compute_rstar
from .monitoring_graph import Coloring

SEARCH_CAP = 2 ** 20
_MASK = (1 << 64) - 1


class RateInfeasibleError(ValueError):
    pass


# ---------------------------------------------------------------------------
# Hashing
# ---------------------------------------------------------------------------


def _splitmix(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK
    return x ^ (x >> 31)


def segment_hash(seed: int, i: int, a_i: int, m: int, value: int) -> int:
    """64-bit hash of a segment value, keyed by (seed, suspect, class, length)."""
    h = _splitmix(seed & _MASK)
    for word in (i, a_i, m):
        h = _splitmix(h ^ word)
    limbs = max(1, (value.bit_length() + 63) // 64)
    for l in range(limbs):
        h = _splitmix(h ^ ((value >> (64 * l)) & _MASK))
    return h


def _splitmix_array(x: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        x = x + np.uint64(0x9E3779B97F4A7C15)
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return x ^ (x >> np.uint64(31))


def segment_hash_array(seed: int, i: int, a_i: int, m: int, values: np.ndarray) -> np.ndarray:
    """Vectorized :func:`segment_hash` for values below 2^64."""
    h = _splitmix(seed & _MASK)
    for word in (i, a_i, m):
        h = _splitmix(h ^ word)
    return _splitmix_array(np.uint64(h) ^ np.asarray(values, dtype=np.uint64))


def _seq_value(seq: Sequence[int], radix: int) -> int:
    v = 0
    for x in seq:
        v = v * radix + int(x)
    return v


def _value_seq(v: int, radix: int, m: int) -> list[int]:
    out = [0] * m
    for t in range(m - 1, -1, -1):
        v, out[t] = divmod(v, radix)
    return out


# ---------------------------------------------------------------------------
# Codebook
# ---------------------------------------------------------------------------


@dataclass
class Codebook:
    game: StageGame
    monitoring: MonitoringStructure
    dist: ProductDistribution
    n: int
    epsilon: float
    seed: int
    nbar1: int
    colorings: tuple[Coloring, ...]
    max_terms: tuple[tuple[float, ...], ...]
    rstar: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    # structural helpers -------------------------------------------------

    @property
    def n_players(self) -> int:
        return self.game.n_players

    @property
    def alphabet(self) -> int:
        return self.monitoring.public_alphabet_size

    @property
    def capacity(self) -> int:
        return self.alphabet ** self.n

    def others(self, i: int) -> list[int]:
        return [j for j in range(self.n_players) if j != i]

    def joint_radix(self, i: int) -> int:
        return int(np.prod([self.game.action_counts[j] for j in self.others(i)]))

    def chi(self, i: int) -> int:
        return self.colorings[i].n_colors

    def is_raw(self, m: int) -> bool:
        return m <= self.nbar1

    def bin_count(self, i: int, a_i: int, m: int) -> int:
        x = m * (self.max_terms[i][a_i] + self.epsilon)
        return int(math.ceil(2.0 ** x)) if x < 1000 else 1 << math.ceil(x)

    def bin_of(self, i: int, a_i: int, m: int, value: int) -> int:
        bins = self.bin_count(i, a_i, m)
        if bins >= self.joint_radix(i) ** m:
            return value
        return segment_hash(self.seed, i, a_i, m, value) % bins

    def prior(self, i: int) -> np.ndarray:
        key = ("prior", i)
        if key not in self._cache:
            self._cache[key] = self.dist.joint(self.others(i)).reshape(-1)
        return self._cache[key]

    def pair_table(self, i: int, k: int, a_i: int) -> np.ndarray:
        """Law of (a_{-i} joint index, s_k) when i plays a_i."""
        key = ("pair", i, k, a_i)
        if key not in self._cache:
            chan = np.take(signal_channel(self.monitoring, k), a_i, axis=i)
            S = chan.shape[-1]
            self._cache[key] = self.prior(i)[:, None] * chan.reshape(-1, S)
        return self._cache[key]

    def likelihood(self, i: int, k: int) -> np.ndarray:
        """lik[a_i, a_k, s_k], averaging the remaining players over P*."""
        key = ("lik", i, k)
        if key not in self._cache:
            chan = np.moveaxis(signal_channel(self.monitoring, k), (i, k), (0, 1))
            for j in sorted(self.others(i), reverse=True):
                if j == k:
                    continue
                # remaining axes follow players other than i, k in order
                pos = 2 + [x for x in range(self.n_players) if x not in (i, k)].index(j)
                chan = np.tensordot(chan, self.dist[j], axes=([pos], [0]))
            self._cache[key] = chan
        return self._cache[key]

    def search_size(self, i: int, k: int, m: int) -> int:
        targets = [j for j in self.others(i) if j != k]
        if not targets:
            return 1
        return int(np.prod([self.game.action_counts[j] for j in targets])) ** m

    def n_bar2(self, i: int) -> float:
        K = self.n_players
        return (math.log2(K) + self.nbar1 * self.game.action_counts[i]
                * math.log2(self.joint_radix(i))) / self.epsilon

    # serialization ------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "game": game_to_dict(self.game, self.monitoring),
            "target": self.dist.as_lists(),
            "n": self.n,
            "epsilon": self.epsilon,
            "seed": self.seed,
            "nbar1": self.nbar1,
            "rstar": self.rstar,
            "colorings": [list(c.colors) for c in self.colorings],
            "max_terms": [list(t) for t in self.max_terms],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> "Codebook":
        game, monitoring = validate_game(data["game"])
        dist = ProductDistribution(tuple(np.asarray(m, float) for m in data["target"]))
        code = build_code(game, monitoring, dist, int(data["n"]), float(data["epsilon"]),
                          int(data["seed"]), nbar1=int(data["nbar1"]))
        if [list(c.colors) for c in code.colorings] != data.get("colorings", [list(c.colors) for c in code.colorings]):
            raise ValueError("stored colorings do not match the rebuilt codebook")
        return code

    @classmethod
    def from_json(cls, text: str) -> "Codebook":
        return cls.from_dict(json.loads(text))


def default_nbar1(n: int) -> int:
    return max(4, math.ceil(math.log2(max(n, 2))))


def build_code(game: StageGame, monitoring: MonitoringStructure, dist: ProductDistribution,
               n: int, epsilon: float, seed: int = 0, nbar1: int | None = None) -> Codebook:
    """Codebook for blocks of length n; refuses unless R* + 2 eps ≤ log2 |S_0|."""
    if n < 1:
        raise ValueError("block length must be ≥ 1")
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    report = compute_rstar(game, monitoring, dist)
    cap = monitoring.capacity_bits
    if not report.rstar + 2 * epsilon <= cap:
        raise RateInfeasibleError(
            f"rate infeasible: R*={report.rstar:.6f} + 2*eps={2 * epsilon:.6f} "
            f"exceeds log2|S_0|={cap:.6f} (margin {cap - report.rstar:.6f} bits)")
    nb = default_nbar1(n) if nbar1 is None else int(nbar1)
    if nb < 1:
        raise ValueError("nbar1 must be ≥ 1")
    K = game.n_players
    max_terms = tuple(
        tuple(max(report.terms[(i, k, a)] for k in range(K)) for a in range(game.action_counts[i]))
        for i in range(K))
    return Codebook(game, monitoring, dist, n, float(epsilon), int(seed), nb,
                    report.colorings, max_terms, report.rstar)


# ---------------------------------------------------------------------------
# Suspect identification
# ---------------------------------------------------------------------------


def _joint_index(actions: np.ndarray, players: Sequence[int], counts: Sequence[int]) -> np.ndarray:
    if not players:
        return np.zeros(actions.shape[0], dtype=np.int64)
    return np.ravel_multi_index(tuple(actions[:, j] for j in players),
                                tuple(counts[j] for j in players))


def suspect_scores(actions, dist: ProductDistribution) -> np.ndarray:
    """sum_{a_{-k}} |N(a_{-k})/n - P*_{-k}(a_{-k})| for every k."""
    a = np.asarray(actions, dtype=np.int64)
    if a.ndim != 2 or a.shape[0] < 1:
        raise ValueError("actions must be an (n, K) array with n ≥ 1")
    n, K = a.shape
    counts = [len(m) for m in dist.marginals]
    scores = np.empty(K)
    for k in range(K):
        others = [j for j in range(K) if j != k]
        q = dist.joint(others).reshape(-1)
        idx = _joint_index(a, others, counts)
        scores[k] = np.abs(np.bincount(idx, minlength=q.size) / n - q).sum()
    return scores


def identify_suspect(actions, dist: ProductDistribution) -> int:
    """Player whose opponents look most typical; lowest index among ties."""
    s = suspect_scores(actions, dist)
    return int(np.flatnonzero(s <= s.min() + 1e-12)[0])


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Payload:
    action: int
    length: int
    kind: str  # "raw" or "bin"
    value: int
    radix: int


@dataclass(frozen=True)
class EncodedMessage:
    status: str  # "ok", "encoder_error", "overflow"
    suspect: int
    colors: tuple[int, ...]
    payloads: tuple[Payload, ...]
    index: int
    public: np.ndarray
    packed_count: int = 0

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def _render(index: int, base: int, n: int) -> np.ndarray:
    return np.asarray(_value_seq(index, base, n), dtype=np.int64)


def _check_actions(code: Codebook, actions) -> np.ndarray:
    a = np.asarray(actions, dtype=np.int64)
    if a.shape != (code.n, code.n_players):
        raise ValueError(f"expected actions of shape {(code.n, code.n_players)}, got {a.shape}")
    counts = np.asarray(code.game.action_counts)
    if (a < 0).any() or (a >= counts).any():
        raise ValueError("action index out of range")
    return a


def encode(code: Codebook, actions) -> EncodedMessage:
    a = _check_actions(code, actions)
    n, K = a.shape
    counts = code.game.action_counts
    i = identify_suspect(a, code.dist)
    colors = tuple(code.colorings[i].colors[x] for x in a[:, i])
    others = code.others(i)
    joint = _joint_index(a, others, counts)
    R = code.joint_radix(i)
    prior = code.prior(i)

    payloads: list[Payload] = []
    failed = False
    for a_i in range(counts[i]):
        seg = joint[a[:, i] == a_i]
        m = len(seg)
        value = _seq_value(seg, R)
        if code.is_raw(m):
            payloads.append(Payload(a_i, m, "raw", value, R ** m))
            continue
        if not is_typical(seg, prior, code.epsilon):
            failed = True
        payloads.append(Payload(a_i, m, "bin", code.bin_of(i, a_i, m, value),
                                code.bin_count(i, a_i, m)))

    fields = [(i, K)] + [(c, code.chi(i)) for c in colors] + [(p.value, p.radix) for p in payloads]
    index, scale = 0, 1
    for v, r in fields:
        index += v * scale
        scale *= r
    zero = np.zeros(n, dtype=np.int64)
    if failed:
        return EncodedMessage("encoder_error", i, colors, tuple(payloads), 0, zero, scale)
    if scale + 1 > code.capacity:
        return EncodedMessage("overflow", i, colors, tuple(payloads), 0, zero, scale)
    return EncodedMessage("ok", i, colors, tuple(payloads), index + 1,
                          _render(index + 1, code.alphabet, n), scale)


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------


@dataclass
class DecodeResult:
    status: str
    actions: np.ndarray | None = None
    suspect: int | None = None
    candidates: dict[int, int] = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "ok"


def _typical_rows(x: np.ndarray, s: np.ndarray, table: np.ndarray, eps: float) -> np.ndarray:
    """Joint typicality of each row of x (N, m) with the fixed s (m,)."""
    N, m = x.shape
    S = table.shape[1]
    C = table.size
    pair = x * S + s[None, :]
    flat = (pair + (np.arange(N) * C)[:, None]).reshape(-1)
    counts = np.bincount(flat, minlength=N * C).reshape(N, C)
    q = table.reshape(-1)
    dist = np.abs(counts / m - q).sum(axis=1)
    forbidden = ((q <= 0) & (counts > 0).astype(bool)).any(axis=1)
    return (dist <= eps + PROB_TOL) & ~forbidden


def _search_segment(code: Codebook, i: int, k: int, a_i: int, bin_index: int,
                    s_seg: np.ndarray, known: np.ndarray) -> list[np.ndarray]:
    """All segments in the bin that are jointly typical with s_seg.

    ``known`` holds player k's actions on the segment (ignored when k == i).
    Returns the matching segments as arrays of joint indices over A_{-i}.
    """
    m = len(s_seg)
    counts = code.game.action_counts
    others = code.others(i)
    targets = [j for j in others if j != k]
    R = code.joint_radix(i)
    if not targets:
        # nothing unknown: the side information already fixes the segment
        seg = np.asarray(known, dtype=np.int64)
        return [seg] if code.bin_of(i, a_i, m, _seq_value(seg, R)) == bin_index else []
    R_T = int(np.prod([counts[j] for j in targets]))
    size = R_T ** m
    if size > SEARCH_CAP:
        raise ValueError(f"decoder search space {R_T}^{m} exceeds 2^20; use a smaller block length")
    y = np.arange(size, dtype=np.int64)
    powers = R_T ** np.arange(m - 1, -1, -1, dtype=np.int64)
    digits = (y[:, None] // powers[None, :]) % R_T
    parts = dict(zip(targets, np.unravel_index(digits, tuple(counts[j] for j in targets))))
    if k != i:
        parts[k] = np.broadcast_to(known, digits.shape)
    x = np.ravel_multi_index(tuple(parts[j] for j in others), tuple(counts[j] for j in others))
    bins = code.bin_count(i, a_i, m)
    if R ** m < 2 ** 64 and bins < R ** m:
        values = (x.astype(np.uint64) * (np.uint64(R) ** np.arange(m - 1, -1, -1, dtype=np.uint64))).sum(
            axis=1, dtype=np.uint64)
        x = x[segment_hash_array(code.seed, i, a_i, m, values) % np.uint64(bins) == np.uint64(bin_index)]
    else:
        x = x[[code.bin_of(i, a_i, m, _seq_value(row, R)) == bin_index for row in x]]
    keep = _typical_rows(x, s_seg, code.pair_table(i, k, a_i), code.epsilon)
    return list(x[keep])


def decode(code: Codebook, k: int, public, signals_k, actions_k) -> DecodeResult:
    """Reconstruct the block of action profiles at decoder k."""
    n, K = code.n, code.n_players
    counts = code.game.action_counts
    s0 = np.asarray(public, dtype=np.int64).reshape(-1)
    sk = np.asarray(signals_k, dtype=np.int64).reshape(-1)
    ak = np.asarray(actions_k, dtype=np.int64).reshape(-1)
    if not (len(s0) == len(sk) == len(ak) == n):
        raise ValueError("all sequences must have the block length")
    index = _seq_value(s0, code.alphabet)
    if index == 0:
        return DecodeResult("encoder_error")
    rest = index - 1
    rest, i = divmod(rest, K)
    chi = code.chi(i)
    colors = np.empty(n, dtype=np.int64)
    for t in range(n):
        rest, colors[t] = divmod(rest, chi)

    # suspect's actions
    if k == i:
        a_i = ak.copy()
        if any(code.colorings[i].colors[x] != c for x, c in zip(a_i, colors)):
            return DecodeResult("inconsistent", suspect=i)
    else:
        lik = code.likelihood(i, k)[:, ak, sk]  # (A_i, n)
        col = np.asarray(code.colorings[i].colors)
        ok = (lik > PROB_TOL) & (col[:, None] == colors[None, :])
        hits = ok.sum(axis=0)
        if (hits == 0).any():
            return DecodeResult("color_none", suspect=i)
        if (hits > 1).any():
            return DecodeResult("color_ambiguity", suspect=i)
        a_i = ok.argmax(axis=0)

    others = code.others(i)
    R = code.joint_radix(i)
    out = np.zeros((n, K), dtype=np.int64)
    out[:, i] = a_i
    n_cand: dict[int, int] = {}
    for act in range(counts[i]):
        stages = np.flatnonzero(a_i == act)
        m = len(stages)
        if code.is_raw(m):
            rest, value = divmod(rest, R ** m)
            seg = np.asarray(_value_seq(value, R, m), dtype=np.int64)
        else:
            rest, bin_index = divmod(rest, code.bin_count(i, act, m))
            found = _search_segment(code, i, k, act, bin_index, sk[stages], ak[stages])
            n_cand[act] = len(found)
            if not found:
                return DecodeResult("no_candidate", suspect=i, candidates=n_cand)
            if len(found) > 1:
                return DecodeResult("collision", suspect=i, candidates=n_cand)
            seg = found[0]
        if m:
            parts = np.unravel_index(seg, tuple(counts[j] for j in others))
            for j, col_ in zip(others, parts):
                out[stages, j] = col_
    if rest != 0:
        return DecodeResult("malformed", suspect=i, candidates=n_cand)
    if k != i and not np.array_equal(out[:, k], ak):
        return DecodeResult("inconsistent", suspect=i, candidates=n_cand)
    return DecodeResult("ok", out, i, n_cand)


# ---------------------------------------------------------------------------
# Rate accounting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateLink:
    name: str
    lhs: float
    rhs: float
    holds: bool
    checked: bool  # False for links that only hold asymptotically or are informational


@dataclass(frozen=True)
class RateAccounting:
    suspect: int
    class_sizes: tuple[int, ...]
    raw_classes: tuple[int, ...]
    ideal_rate: float
    packed_rate: float
    bound: float
    pre_asymptotic_overhead: float
    n_bar2: float
    encode_status: str
    links: tuple[RateLink, ...]

    @property
    def pre_asymptotic(self) -> bool:
        return any(l.name == "bound<=rstar+2eps" and not l.holds for l in self.links)

    def violations(self) -> list[RateLink]:
        return [l for l in self.links if l.checked and not l.holds]

    @property
    def flags(self) -> list[str]:
        return ["pre-asymptotic, capacity overflow possible"] if self.pre_asymptotic else []

    def to_text(self) -> str:
        lines = [f"suspect={self.suspect} classes={list(self.class_sizes)} raw={list(self.raw_classes)}",
                 f"ideal_rate={self.ideal_rate:.6f} packed_rate={self.packed_rate:.6f} "
                 f"bound={self.bound:.6f} n_bar2={self.n_bar2:.2f} encode={self.encode_status}"]
        for l in self.links:
            tag = "ok" if l.holds else ("VIOLATED" if l.checked else "not met (unchecked)")
            lines.append(f"  {l.name}: {l.lhs:.6f} <= {l.rhs:.6f} {tag}")
        lines += [f"  flag: {f}" for f in self.flags]
        return "\n".join(lines)


def rate_accounting(code: Codebook, actions) -> RateAccounting:
    """Evaluate every step of the cardinality chain for one realized block.

    Links (bits per stage):
      ideal <= packed             the real-valued count vs the integer radices
      ideal <= bound              bound = R* + eps + (log K + nbar1 |A_i| log|A_-i|) / n
      packed <= bound + rounding  rounding = (#binned classes) / n from ceilings
      bound <= R* + 2 eps         holds only once n ≥ n_bar2 (not checked below it)
      R* + 2 eps <= log2 |S_0|    parameter choice enforced by build_code
      packed <= log2 |S_0|        checked on successful encodes (index 0 reserved)
      R* + 3 eps <= log2 |S_0|    informational
    """
    a = _check_actions(code, actions)
    n, K = a.shape
    msg = encode(code, a)
    i = msg.suspect
    R = code.joint_radix(i)
    A_i = code.game.action_counts[i]
    sizes = tuple(int((a[:, i] == x).sum()) for x in range(A_i))
    raw = tuple(x for x in range(A_i) if code.is_raw(sizes[x]))
    ideal_bits = (math.log2(K) + n * math.log2(code.chi(i))
                  + sum(sizes[x] for x in raw) * math.log2(R)
                  + sum(sizes[x] * (code.max_terms[i][x] + code.epsilon)
                        for x in range(A_i) if x not in raw))
    packed_bits = math.log2(msg.packed_count)
    overhead = (math.log2(K) + code.nbar1 * A_i * math.log2(R)) / n
    eps = code.epsilon
    ideal, packed = ideal_bits / n, packed_bits / n
    bound = code.rstar + eps + overhead
    rounding = (A_i - len(raw)) / n
    cap = code.monitoring.capacity_bits
    tol = 1e-9
    links = (
        RateLink("ideal<=packed", ideal, packed, ideal <= packed + tol, True),
        RateLink("ideal<=bound", ideal, bound, ideal <= bound + tol, True),
        RateLink("packed<=bound+rounding", packed, bound + rounding,
                 packed <= bound + rounding + tol, True),
        RateLink("bound<=rstar+2eps", bound, code.rstar + 2 * eps,
                 bound <= code.rstar + 2 * eps + tol, n >= code.n_bar2(i)),
        RateLink("rstar+2eps<=capacity", code.rstar + 2 * eps, cap,
                 code.rstar + 2 * eps <= cap + tol, True),
        RateLink("packed<=capacity", math.log2(msg.packed_count + 1) / n, cap,
                 msg.packed_count + 1 <= code.capacity, msg.ok),
        RateLink("rstar+3eps<=capacity", code.rstar + 3 * eps, cap,
                 code.rstar + 3 * eps <= cap + tol, False),
    )
    return RateAccounting(i, sizes, raw, ideal, packed, bound, overhead, code.n_bar2(i),
                          msg.status, links)


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------


def sample_block(code_or_game, monitoring: MonitoringStructure, dist: ProductDistribution,
                 n: int, deviation: DeviationSpec, rng: np.random.Generator,
                 offset: int = 0) -> tuple[np.ndarray, np.ndarray]:
    """Draw n stages of actions (with the deviation override) and signals.

    Players are drawn in index order, then the signals stage by stage.
    """
    K = monitoring.n_players
    actions = np.empty((n, K), dtype=np.int64)
    for k in range(K):
        if deviation.active and deviation.player == k:
            actions[:, k] = deviation.sample(rng, n, dist[k], offset)
        else:
            actions[:, k] = rng.choice(len(dist[k]), size=n, p=dist[k])
    return actions, sample_signals(monitoring, actions, rng)


def sample_signals(monitoring: MonitoringStructure, actions: np.ndarray,
                   rng: np.random.Generator) -> np.ndarray:
    K = monitoring.n_players
    S = monitoring.signal_counts
    table = monitoring.joint_table.reshape(monitoring.action_counts + (-1,))
    probs = table[tuple(actions[:, k] for k in range(K))]
    cdf = np.cumsum(probs, axis=1)
    u = rng.random(len(actions)) * cdf[:, -1]
    flat = np.minimum((cdf <= u[:, None]).sum(axis=1), cdf.shape[1] - 1)
    return np.stack(np.unravel_index(flat, S), axis=1).astype(np.int64)


@dataclass(frozen=True)
class TrialRecord:
    trial: int
    deviation: str
    deviator: int
    suspect: int
    encode_status: str
    decoder_status: tuple[str, ...]
    mismatch: bool
    e1: bool
    e2: bool
    misidentified: bool
    overflow: bool
    color_ambiguity: bool

    @property
    def error_class(self) -> str:
        for name in ("overflow", "misidentified", "e1", "e2", "color_ambiguity"):
            if getattr(self, name):
                return name
        return "mismatch" if self.mismatch else "ok"


def _run_trial(code: Codebook, deviation: DeviationSpec, master_seed: int, t: int,
               do_decode: bool) -> TrialRecord:
    rng = np.random.default_rng([master_seed, t])
    a, s = sample_block(code.game, code.monitoring, code.dist, code.n, deviation, rng)
    deviator = deviation.player if deviation.active else -1
    if not do_decode:
        sus = identify_suspect(a, code.dist)
        return TrialRecord(t, deviation.label(), deviator, sus, "skipped", (), False,
                           False, False, deviator >= 0 and sus != deviator, False, False)
    msg = encode(code, a)
    i = msg.suspect
    statuses, mismatch, e1, e2, amb = [], False, msg.status == "encoder_error", False, False
    joint = _joint_index(a, code.others(i), code.game.action_counts)
    for k in range(code.n_players):
        res = decode(code, k, msg.public, s[:, k], a[:, k])
        statuses.append(res.status)
        if not (res.ok and np.array_equal(res.actions, a)):
            mismatch = True
        if res.status == "collision":
            e2 = True
        if res.status == "color_ambiguity":
            amb = True
        if not msg.ok:
            continue
        # E1: the true segment is not jointly typical at a searching decoder
        for p in msg.payloads:
            if p.kind != "bin" or code.search_size(i, k, p.length) == 1:
                continue
            stages = a[:, i] == p.action
            x = joint[stages][None, :]
            if not _typical_rows(x, s[stages, k], code.pair_table(i, k, p.action), code.epsilon)[0]:
                e1 = True
    return TrialRecord(t, deviation.label(), deviator, i, msg.status, tuple(statuses),
                       mismatch, e1, e2, deviator >= 0 and i != deviator,
                       msg.status == "overflow", amb)


def _run_chunk(args) -> list[TrialRecord]:
    code, deviation, master_seed, trials, do_decode = args
    return [_run_trial(code, deviation, master_seed, t, do_decode) for t in trials]


@dataclass(frozen=True)
class ErrorEstimate:
    trials: int
    mismatches: int
    e1: int
    e2: int
    misidentified: int
    overflow: int
    encoder_errors: int
    color_ambiguity: int
    per_decoder: tuple[int, ...]
    decoded: bool
    records: tuple[TrialRecord, ...] = field(default=(), repr=False)

    @property
    def estimate(self) -> float:
        return self.mismatches / self.trials

    @property
    def misidentification_rate(self) -> float:
        return self.misidentified / self.trials

    def interval(self, count: int | None = None) -> tuple[float, float]:
        c = self.mismatches if count is None else count
        ci = binomtest(c, self.trials).proportion_ci(confidence_level=0.95, method="wilson")
        return float(ci.low), float(ci.high)

    def to_dict(self) -> dict[str, Any]:
        lo, hi = self.interval()
        return {"trials": self.trials, "mismatches": self.mismatches, "estimate": self.estimate,
                "ci95": [lo, hi], "e1": self.e1, "e2": self.e2,
                "misidentified": self.misidentified, "overflow": self.overflow,
                "encoder_errors": self.encoder_errors, "color_ambiguity": self.color_ambiguity,
                "per_decoder": list(self.per_decoder), "decoded": self.decoded}

    def to_text(self) -> str:
        lo, hi = self.interval()
        return (f"trials={self.trials} errors={self.mismatches} estimate={self.estimate:.4f} "
                f"ci95=[{lo:.4f}, {hi:.4f}] E1={self.e1} E2={self.e2} "
                f"misidentified={self.misidentified} overflow={self.overflow} "
                f"encoder_errors={self.encoder_errors} per_decoder={list(self.per_decoder)}")

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        K = max((len(r.decoder_status) for r in self.records), default=0)
        w.writerow(["trial", "deviation", "deviator", "suspect", "encode_status", "error_class",
                    "mismatch", "e1", "e2", "misidentified", "overflow"]
                   + [f"decoder{k + 1}" for k in range(K)])
        for r in self.records:
            w.writerow([r.trial, r.deviation, r.deviator + 1 if r.deviator >= 0 else "",
                        r.suspect + 1, r.encode_status, r.error_class, int(r.mismatch),
                        int(r.e1), int(r.e2), int(r.misidentified), int(r.overflow)]
                       + list(r.decoder_status))
        return buf.getvalue()


def estimate_error_probability(code: Codebook, deviation: DeviationSpec | None = None,
                               trials: int = 1000, master_seed: int = 0, decode: bool = True,
                               jobs: int = 1, keep_records: bool = True) -> ErrorEstimate:
    """Monte Carlo estimate of the block error probability.

    With ``decode=False`` only the suspect test runs (no encoding), which
    allows large n.  Trial t uses ``default_rng([master_seed, t])``.
    """
    if trials < 1:
        raise ValueError("trials must be ≥ 1")
    deviation = deviation or DeviationSpec.none()
    if decode:
        for i in range(code.n_players):
            for k in range(code.n_players):
                if code.search_size(i, k, code.n) > SEARCH_CAP and not code.is_raw(code.n):
                    raise ValueError(
                        f"decoder search space exceeds 2^20 at n={code.n}; "
                        "use decode=False or a smaller block length")
    idx = list(range(trials))
    if jobs > 1:
        chunks = [idx[j::jobs] for j in range(jobs) if idx[j::jobs]]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            parts = pool.map(_run_chunk, [(code, deviation, master_seed, c, decode) for c in chunks])
            records = sorted((r for p in parts for r in p), key=lambda r: r.trial)
    else:
        records = _run_chunk((code, deviation, master_seed, idx, decode))
    K = code.n_players
    per_dec = tuple(sum(1 for r in records if r.decoder_status and r.decoder_status[k] != "ok")
                    for k in range(K)) if decode else (0,) * K
    return ErrorEstimate(
        trials=trials,
        mismatches=sum(r.mismatch for r in records),
        e1=sum(r.e1 for r in records),
        e2=sum(r.e2 for r in records),
        misidentified=sum(r.misidentified for r in records),
        overflow=sum(r.overflow for r in records),
        encoder_errors=sum(r.encode_status == "encoder_error" for r in records),
        color_ambiguity=sum(r.color_ambiguity for r in records),
        per_decoder=per_dec,
        decoded=decode,
        records=tuple(records) if keep_records else (),
    )


# ---------------------------------------------------------------------------
# Binning collisions
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CollisionEstimate:
    trials: int
    length: int
    bin_count: int
    collisions: int
    typical_pairs: int
    mutual_information_bits: float

    @property
    def rate(self) -> float:
        return self.collisions / self.trials

    @property
    def pair_rate(self) -> float:
        """Rate at which an independent sequence is jointly typical (no bin filter)."""
        return self.typical_pairs / self.trials

    def interval(self) -> tuple[float, float]:
        ci = binomtest(self.collisions, self.trials).proportion_ci(method="wilson")
        return float(ci.low), float(ci.high)


def estimate_binning_collision(code: Codebook, i: int, a_i: int, trials: int, seed: int = 0,
                               length: int | None = None, decoder: int | None = None,
                               bin_count: int | None = None) -> CollisionEstimate:
    """Probability that an independent, different, P*-typical segment shares
    the true segment's bin and is jointly typical with fresh side information.

    ``length`` defaults to the expected class size round(n P*_i(a_i));
    ``decoder`` defaults to the decoder with the largest entropy term.
    """
    if trials < 1:
        raise ValueError("trials must be ≥ 1")
    m = int(round(code.n * code.dist[i][a_i])) if length is None else int(length)
    if code.is_raw(m):
        raise ValueError(f"class of length {m} ≤ nbar1={code.nbar1} is raw; binning not applicable")
    if decoder is None:
        terms = compute_rstar(code.game, code.monitoring, code.dist).terms
        decoder = max(range(code.n_players), key=lambda k: (terms[(i, k, a_i)], -k))
    k = decoder
    bins = code.bin_count(i, a_i, m) if bin_count is None else int(bin_count)
    table = code.pair_table(i, k, a_i)
    prior = code.prior(i)
    R = code.joint_radix(i)
    cond = table / table.sum(axis=1, keepdims=True).clip(min=PROB_TOL)
    info = mutual_information(JointDistribution(table, ("x", "s")), ["x"], ["s"])
    rng = np.random.default_rng(seed)
    hits = pairs = 0

    def bin_of(v: int) -> int:
        return segment_hash(code.seed, i, a_i, m, v) % bins

    for _ in range(trials):
        x = rng.choice(R, size=m, p=prior)
        u = rng.random(m)
        s = np.minimum((np.cumsum(cond[x], axis=1) <= u[:, None]).sum(axis=1), table.shape[1] - 1)
        y = rng.choice(R, size=m, p=prior)
        if np.array_equal(x, y) or not is_typical(y, prior, code.epsilon):
            continue
        if not _typical_rows(y[None, :], s, table, code.epsilon)[0]:
            continue
        pairs += 1
        if bin_of(_seq_value(y, R)) == bin_of(_seq_value(x, R)):
            hits += 1
    return CollisionEstimate(trials, m, bins, hits, pairs, info)


__all__ = [
    "SEARCH_CAP", "RateInfeasibleError", "segment_hash", "segment_hash_array", "Codebook", "default_nbar1",
    "build_code", "suspect_scores", "identify_suspect", "Payload", "EncodedMessage", "encode",
    "DecodeResult", "decode", "RateLink", "RateAccounting", "rate_accounting", "sample_block",
    "sample_signals", "TrialRecord", "ErrorEstimate", "estimate_error_probability",
    "CollisionEstimate", "estimate_binning_collision",
]
