"""Stage games, monitoring structures and discrete information measures.

All probabilities are float64 numpy arrays.  Actions and signals are
referred to by their position in the label lists given at construction
time (file order), never by label after validation.

Logarithms are base 2 throughout, with ``0 log 0 = 0``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

PROB_TOL = 1e-12
DEFAULT_EPSILON = 0.05


class GameSpecError(ValueError):
    """Raised when a game or monitoring description is malformed."""


def _check_simplex(vec: np.ndarray, what: str) -> None:
    if vec.ndim != 1 or vec.size == 0:
        raise GameSpecError(f"{what}: expected a nonempty probability vector")
    if np.any(~np.isfinite(vec)) or np.any(vec < -PROB_TOL):
        raise GameSpecError(f"{what}: negative or non-finite probability")
    if abs(vec.sum() - 1.0) > PROB_TOL:
        raise GameSpecError(f"{what}: row not stochastic (sums to {vec.sum():.12g})")


def _check_labels(labels: Sequence[str], what: str) -> tuple[str, ...]:
    labels = tuple(str(x) for x in labels)
    if not labels:
        raise GameSpecError(f"{what}: empty label list")
    if len(set(labels)) != len(labels):
        raise GameSpecError(f"{what}: duplicate labels {labels}")
    return labels


# ---------------------------------------------------------------------------
# Domain types
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class StageGame:
    """Finite K-player game.

    ``utilities[k][a_1, ..., a_K]`` is player k's payoff for the profile.
    """

    action_labels: tuple[tuple[str, ...], ...]
    utilities: np.ndarray
    player_labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        labels = tuple(_check_labels(a, f"actions of player {k + 1}")
                       for k, a in enumerate(self.action_labels))
        if len(labels) < 2:
            raise GameSpecError("K ≥ 2 required")
        util = np.array(self.utilities, dtype=float)
        shape = (len(labels),) + tuple(len(a) for a in labels)
        if util.shape != shape:
            raise GameSpecError(
                f"dimension mismatch: utilities have shape {util.shape}, expected {shape}")
        if not np.all(np.isfinite(util)):
            raise GameSpecError("utilities must be finite")
        util.setflags(write=False)
        object.__setattr__(self, "action_labels", labels)
        object.__setattr__(self, "utilities", util)
        players = tuple(self.player_labels) or tuple(f"P{k + 1}" for k in range(len(labels)))
        if len(players) != len(labels):
            raise GameSpecError("dimension mismatch: player labels")
        object.__setattr__(self, "player_labels", players)

    @property
    def n_players(self) -> int:
        return len(self.action_labels)

    @property
    def action_counts(self) -> tuple[int, ...]:
        return tuple(len(a) for a in self.action_labels)

    def profiles(self) -> Iterable[tuple[int, ...]]:
        """All action profiles in row-major order (last player fastest)."""
        return itertools.product(*(range(m) for m in self.action_counts))

    def payoff(self, profile: Sequence[int]) -> np.ndarray:
        return self.utilities[(slice(None),) + tuple(profile)].copy()

    def max_abs_utility(self) -> float:
        return float(np.max(np.abs(self.utilities)))


@dataclass(frozen=True, eq=False)
class MonitoringStructure:
    """Conditional law of the private signal profile given the action profile.

    ``joint_table`` has shape ``A_1 x ... x A_K x S_1 x ... x S_K``.
    """

    joint_table: np.ndarray
    signal_labels: tuple[tuple[str, ...], ...]
    public_alphabet_size: int

    def __post_init__(self) -> None:
        labels = tuple(_check_labels(s, f"signals of player {k + 1}")
                       for k, s in enumerate(self.signal_labels))
        table = np.array(self.joint_table, dtype=float)
        K = len(labels)
        if table.ndim != 2 * K:
            raise GameSpecError(
                f"dimension mismatch: monitoring table has {table.ndim} axes, expected {2 * K}")
        if table.shape[K:] != tuple(len(s) for s in labels):
            raise GameSpecError("dimension mismatch: signal axes do not match signal labels")
        if int(self.public_alphabet_size) < 1:
            raise GameSpecError("public alphabet size must be ≥ 1")
        rows = table.reshape(int(np.prod(table.shape[:K])), -1)
        for r, row in enumerate(rows):
            _check_simplex(row, f"monitoring row {r}")
        table.setflags(write=False)
        object.__setattr__(self, "joint_table", table)
        object.__setattr__(self, "signal_labels", labels)
        object.__setattr__(self, "public_alphabet_size", int(self.public_alphabet_size))

    @property
    def n_players(self) -> int:
        return len(self.signal_labels)

    @property
    def action_counts(self) -> tuple[int, ...]:
        return self.joint_table.shape[: self.n_players]

    @property
    def signal_counts(self) -> tuple[int, ...]:
        return tuple(len(s) for s in self.signal_labels)

    @property
    def capacity_bits(self) -> float:
        return math.log2(self.public_alphabet_size)

    def check_against(self, game: StageGame) -> None:
        if self.action_counts != game.action_counts:
            raise GameSpecError(
                f"dimension mismatch: monitoring actions {self.action_counts} "
                f"vs game actions {game.action_counts}")


@dataclass(frozen=True, eq=False)
class ProductDistribution:
    """Independent mixed actions, one simplex vector per player."""

    marginals: tuple[np.ndarray, ...]

    def __post_init__(self) -> None:
        vecs = []
        for k, p in enumerate(self.marginals):
            v = np.array(p, dtype=float).reshape(-1)
            _check_simplex(v, f"mixed action of player {k + 1}")
            v = np.clip(v, 0.0, None)
            v.setflags(write=False)
            vecs.append(v)
        object.__setattr__(self, "marginals", tuple(vecs))

    @classmethod
    def pure(cls, counts: Sequence[int], profile: Sequence[int]) -> "ProductDistribution":
        return cls(tuple(np.eye(m)[a] for m, a in zip(counts, profile)))

    @classmethod
    def uniform(cls, counts: Sequence[int]) -> "ProductDistribution":
        return cls(tuple(np.full(m, 1.0 / m) for m in counts))

    @property
    def n_players(self) -> int:
        return len(self.marginals)

    def __getitem__(self, k: int) -> np.ndarray:
        return self.marginals[k]

    def joint(self, players: Sequence[int] | None = None) -> np.ndarray:
        """Outer product of the selected marginals (all players by default)."""
        players = range(self.n_players) if players is None else players
        out = np.ones(())
        for k in players:
            out = np.multiply.outer(out, self.marginals[k])
        return out

    def support(self, k: int, threshold: float = PROB_TOL) -> np.ndarray:
        return np.flatnonzero(self.marginals[k] > threshold)

    def as_lists(self) -> list[list[float]]:
        return [m.tolist() for m in self.marginals]


@dataclass(frozen=True, eq=False)
class JointDistribution:
    """Probability table over a finite product of alphabets."""

    table: np.ndarray
    axis_names: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        t = np.array(self.table, dtype=float)
        if np.any(t < -PROB_TOL) or not np.all(np.isfinite(t)):
            raise GameSpecError("joint distribution has negative entries")
        if abs(t.sum() - 1.0) > PROB_TOL:
            raise GameSpecError(f"joint distribution sums to {t.sum():.12g}")
        t = np.clip(t, 0.0, None)
        t.setflags(write=False)
        object.__setattr__(self, "table", t)
        if self.axis_names and len(self.axis_names) != t.ndim:
            raise GameSpecError("one name per axis required")

    def axis(self, a: int | str) -> int:
        if isinstance(a, str):
            return self.axis_names.index(a)
        return int(a)

    def marginal(self, axes: Iterable[int | str]) -> np.ndarray:
        keep = sorted({self.axis(a) for a in axes})
        drop = tuple(ax for ax in range(self.table.ndim) if ax not in keep)
        return self.table.sum(axis=drop) if drop else self.table


@dataclass(frozen=True)
class DeviationSpec:
    """How a single deviating player chooses actions.

    ``kind`` is one of ``none``, ``constant``, ``iid``, ``periodic``,
    ``scripted`` or ``typical_shuffle``.  ``start_block`` only matters to
    the repeated-game simulator (1-based block index).
    """

    player: int | None = None
    kind: str = "none"
    action: int | None = None
    distribution: tuple[float, ...] | None = None
    pattern: tuple[int, ...] | None = None
    start_block: int = 1

    KINDS = ("none", "constant", "iid", "periodic", "scripted", "typical_shuffle")

    def __post_init__(self) -> None:
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown deviation kind {self.kind!r}")
        if self.kind != "none" and self.player is None:
            raise ValueError("deviation needs a player index")
        if self.kind == "constant" and self.action is None:
            raise ValueError("constant deviation needs an action")
        if self.kind == "iid":
            if self.distribution is None:
                raise ValueError("iid deviation needs a distribution")
            _check_simplex(np.asarray(self.distribution, float), "deviation distribution")
        if self.kind in ("periodic", "scripted") and not self.pattern:
            raise ValueError(f"{self.kind} deviation needs a nonempty pattern")
        if self.start_block < 1:
            raise ValueError("start_block is 1-based")

    @classmethod
    def none(cls) -> "DeviationSpec":
        return cls()

    @classmethod
    def constant(cls, player: int, action: int, start_block: int = 1) -> "DeviationSpec":
        return cls(player, "constant", action=action, start_block=start_block)

    @classmethod
    def iid(cls, player: int, distribution: Sequence[float], start_block: int = 1) -> "DeviationSpec":
        return cls(player, "iid", distribution=tuple(float(x) for x in distribution),
                   start_block=start_block)

    @classmethod
    def periodic(cls, player: int, pattern: Sequence[int], start_block: int = 1) -> "DeviationSpec":
        return cls(player, "periodic", pattern=tuple(int(x) for x in pattern),
                   start_block=start_block)

    @classmethod
    def scripted(cls, player: int, sequence: Sequence[int], start_block: int = 1) -> "DeviationSpec":
        return cls(player, "scripted", pattern=tuple(int(x) for x in sequence),
                   start_block=start_block)

    @classmethod
    def typical_shuffle(cls, player: int, start_block: int = 1) -> "DeviationSpec":
        return cls(player, "typical_shuffle", start_block=start_block)

    @property
    def active(self) -> bool:
        return self.kind != "none"

    def label(self) -> str:
        if not self.active:
            return "none"
        detail = {
            "constant": f"{self.action}",
            "iid": ",".join(f"{x:g}" for x in self.distribution or ()),
            "periodic": "".join(map(str, self.pattern or ())),
            "scripted": f"len{len(self.pattern or ())}",
            "typical_shuffle": "",
        }[self.kind]
        return f"p{self.player + 1}:{self.kind}({detail})@b{self.start_block}"

    def stage_distribution(self, t: int, target: np.ndarray) -> np.ndarray:
        """Per-stage mixed action at (0-based) stage t.

        ``target`` is the prescribed mixed action of the deviator; it is
        used by ``typical_shuffle`` whose stage marginal equals the target.
        """
        m = len(target)
        if self.kind == "constant":
            return np.eye(m)[self.action]
        if self.kind == "iid":
            return np.asarray(self.distribution, float)
        if self.kind in ("periodic", "scripted"):
            return np.eye(m)[self.pattern[t % len(self.pattern)]]
        return np.asarray(target, float)

    def sample(self, rng: np.random.Generator, n: int, target: np.ndarray,
               offset: int = 0) -> np.ndarray:
        """Draw the deviator's actions for stages ``offset .. offset+n-1``."""
        m = len(target)
        if self.kind == "constant":
            return np.full(n, self.action, dtype=np.int64)
        if self.kind == "iid":
            return rng.choice(m, size=n, p=np.asarray(self.distribution, float))
        if self.kind in ("periodic", "scripted"):
            idx = (np.arange(n) + offset) % len(self.pattern)
            return np.asarray(self.pattern, dtype=np.int64)[idx]
        if self.kind == "typical_shuffle":
            return rng.permutation(exact_type_sequence(target, n))
        return rng.choice(m, size=n, p=target)


# ---------------------------------------------------------------------------
# Construction and validation
# ---------------------------------------------------------------------------


def noisy_binary_monitoring(delta: float, public_alphabet_size: int = 3,
                            signal_labels: Sequence[Sequence[str]] | None = None) -> MonitoringStructure:
    """Two-player binary monitoring: each player sees the opponent's action
    through a binary symmetric channel with crossover ``delta / 2``.

    The two noises are independent.  Signal j of player k is the "right"
    signal for opponent action j.
    """
    if not 0.0 <= delta <= 1.0:
        raise GameSpecError(f"delta must lie in [0, 1], got {delta}")
    flip = delta / 2.0
    bsc = np.array([[1 - flip, flip], [flip, 1 - flip]])
    # table[a1, a2, s1, s2] = bsc[a2, s1] * bsc[a1, s2]
    table = np.einsum("jx,iy->ijxy", bsc, bsc)
    labels = signal_labels or (("s1", "s1'"), ("s2", "s2'"))
    return MonitoringStructure(table, tuple(tuple(s) for s in labels), public_alphabet_size)


def prisoners_dilemma() -> StageGame:
    """The 2x2 prisoner's dilemma with actions (T, B) and (L, R)."""
    u = np.array([[[3, 0], [4, 1]], [[3, 4], [0, 1]]], dtype=float)
    return StageGame((("T", "B"), ("L", "R")), u)


def pd_instance(delta: float, public_alphabet_size: int = 3) -> tuple[StageGame, MonitoringStructure]:
    return prisoners_dilemma(), noisy_binary_monitoring(delta, public_alphabet_size)


def validate_game(raw: Mapping[str, Any]) -> tuple[StageGame, MonitoringStructure]:
    """Build and check a game + monitoring pair from a parsed JSON document.

    Expected keys: ``actions`` (list of label lists), ``utilities`` (one
    payoff vector per action profile, row-major with the last player
    varying fastest), ``monitoring`` and ``public_alphabet_size``.
    ``monitoring`` is ``{"type": "noisy_binary", "delta": d}`` or
    ``{"type": "joint", "signals": [...], "table": [...]}`` where ``table``
    lists, per action profile, the probabilities of all signal profiles
    (row-major).
    """
    if not isinstance(raw, Mapping):
        raise GameSpecError("game description must be a JSON object")
    try:
        actions = raw["actions"]
        utilities = raw["utilities"]
    except KeyError as exc:
        raise GameSpecError(f"missing field {exc.args[0]!r}") from None
    if not isinstance(actions, (list, tuple)) or len(actions) < 2:
        raise GameSpecError("K ≥ 2 required")
    K = len(actions)
    if "players" in raw and int(raw["players"]) != K:
        raise GameSpecError(f"dimension mismatch: players={raw['players']} but {K} action lists")
    labels = tuple(_check_labels(a, f"actions of player {k + 1}") for k, a in enumerate(actions))
    counts = tuple(len(a) for a in labels)
    n_profiles = int(np.prod(counts))

    util = np.asarray(utilities, dtype=float)
    if util.shape != (n_profiles, K):
        raise GameSpecError(
            f"dimension mismatch: utilities must be {n_profiles} rows of {K} payoffs, "
            f"got shape {util.shape}")
    u_tensor = np.moveaxis(util.reshape(counts + (K,)), -1, 0)
    game = StageGame(labels, u_tensor, tuple(raw.get("player_names", ())))

    mon = raw.get("monitoring")
    if mon is None:
        raise GameSpecError("missing field 'monitoring'")
    s0 = raw.get("public_alphabet_size", mon.get("public_alphabet_size") if isinstance(mon, Mapping) else None)
    if s0 is None:
        raise GameSpecError("missing field 'public_alphabet_size'")
    kind = mon.get("type", "joint")
    if kind == "noisy_binary":
        if counts != (2, 2):
            raise GameSpecError("noisy_binary monitoring needs a 2-player binary game")
        monitoring = noisy_binary_monitoring(float(mon["delta"]), int(s0), mon.get("signals"))
    elif kind == "joint":
        sig = mon.get("signals")
        if sig is None or len(sig) != K:
            raise GameSpecError("dimension mismatch: one signal label list per player required")
        sig = tuple(_check_labels(s, f"signals of player {k + 1}") for k, s in enumerate(sig))
        scounts = tuple(len(s) for s in sig)
        table = np.asarray(mon.get("table"), dtype=float)
        if table.shape != (n_profiles, int(np.prod(scounts))):
            raise GameSpecError(
                f"dimension mismatch: monitoring table must be {n_profiles} rows of "
                f"{int(np.prod(scounts))} probabilities, got shape {table.shape}")
        for r, row in enumerate(table):
            if abs(row.sum() - 1.0) > PROB_TOL:
                raise GameSpecError(f"row not stochastic: monitoring row {r} sums to {row.sum():.12g}")
        monitoring = MonitoringStructure(table.reshape(counts + scounts), sig, int(s0))
    else:
        raise GameSpecError(f"unknown monitoring type {kind!r}")
    monitoring.check_against(game)
    return game, monitoring


def game_to_dict(game: StageGame, monitoring: MonitoringStructure) -> dict[str, Any]:
    """Inverse of :func:`validate_game` (always emits an explicit joint table)."""
    K = game.n_players
    util = np.moveaxis(game.utilities, 0, -1).reshape(-1, K)
    n_prof = int(np.prod(game.action_counts))
    return {
        "players": K,
        "actions": [list(a) for a in game.action_labels],
        "utilities": util.tolist(),
        "monitoring": {
            "type": "joint",
            "signals": [list(s) for s in monitoring.signal_labels],
            "table": monitoring.joint_table.reshape(n_prof, -1).tolist(),
        },
        "public_alphabet_size": monitoring.public_alphabet_size,
    }


# ---------------------------------------------------------------------------
# Channel and payoff operations
# ---------------------------------------------------------------------------


def signal_channel(monitoring: MonitoringStructure, k: int) -> np.ndarray:
    """Marginal law of player k's signal, shape ``A_1 x ... x A_K x S_k``."""
    K = monitoring.n_players
    if not 0 <= k < K:
        raise IndexError(f"player index {k} out of range")
    drop = tuple(K + j for j in range(K) if j != k)
    return monitoring.joint_table.sum(axis=drop)


def expected_utility(game: StageGame, dist: ProductDistribution) -> np.ndarray:
    """Vector of E[u_k] under independent play of ``dist``."""
    if dist.n_players != game.n_players:
        raise GameSpecError("dimension mismatch: distribution vs game")
    joint = dist.joint()
    return np.tensordot(game.utilities, joint, axes=game.n_players)


# ---------------------------------------------------------------------------
# Entropy and mutual information (bits)
# ---------------------------------------------------------------------------


def _plogp_sum(p: np.ndarray, axis=None) -> np.ndarray:
    p = np.asarray(p, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)
    return -terms.sum(axis=axis)


def entropy(dist: Any) -> float:
    """Shannon entropy in bits of a probability vector (or table)."""
    p = np.asarray(dist, dtype=float).reshape(-1)
    if p.size == 0:
        return 0.0
    return max(float(_plogp_sum(p)), 0.0)


def _axes_set(joint: JointDistribution, axes: Iterable[int | str]) -> set[int]:
    out = {joint.axis(a) for a in axes}
    for a in out:
        if not 0 <= a < joint.table.ndim:
            raise IndexError(f"axis {a} out of range")
    return out


def conditional_entropy(joint: JointDistribution, target_axes: Iterable[int | str],
                        given_axes: Iterable[int | str] = ()) -> float:
    """H(X | Y) = H(X, Y) - H(Y) for axis groups X (target) and Y (given)."""
    tx, gy = _axes_set(joint, target_axes), _axes_set(joint, given_axes)
    if tx & gy:
        raise ValueError(f"overlapping axes {sorted(tx & gy)}")
    if not tx:
        return 0.0
    h_xy = entropy(joint.marginal(tx | gy))
    h_y = entropy(joint.marginal(gy)) if gy else 0.0
    return max(h_xy - h_y, 0.0)


def mutual_information(joint: JointDistribution, axes_x: Iterable[int | str],
                       axes_y: Iterable[int | str]) -> float:
    """I(X; Y) = H(X) - H(X | Y)."""
    x, y = _axes_set(joint, axes_x), _axes_set(joint, axes_y)
    if x & y:
        raise ValueError(f"overlapping axes {sorted(x & y)}")
    if not x or not y:
        return 0.0
    return max(entropy(joint.marginal(x)) - conditional_entropy(joint, x, y), 0.0)


def binary_entropy(p: float) -> float:
    return entropy([p, 1.0 - p])


# ---------------------------------------------------------------------------
# Types and typicality
# ---------------------------------------------------------------------------


def _encode_symbols(sequence: Sequence[Any], alphabet: int | Sequence[Any] | None) -> tuple[np.ndarray, int]:
    seq = list(sequence)
    if alphabet is None:
        if all(isinstance(x, (int, np.integer)) for x in seq):
            return np.asarray(seq, dtype=np.int64), (max(seq) + 1 if seq else 0)
        alphabet = list(dict.fromkeys(seq))
    if isinstance(alphabet, (int, np.integer)):
        idx = np.asarray(seq, dtype=np.int64)
        if idx.size and (idx.min() < 0 or idx.max() >= alphabet):
            raise ValueError("symbol outside alphabet")
        return idx, int(alphabet)
    lookup = {a: i for i, a in enumerate(alphabet)}
    try:
        return np.asarray([lookup[x] for x in seq], dtype=np.int64), len(lookup)
    except KeyError as exc:
        raise ValueError(f"symbol {exc.args[0]!r} outside alphabet") from None


def empirical_type(sequence: Sequence[Any], alphabet: int | Sequence[Any] | None = None) -> np.ndarray:
    """Relative frequencies N(x | x^n) / n.

    ``alphabet`` is the alphabet size (integer symbols) or the ordered
    label list; when omitted it is inferred.
    """
    idx, size = _encode_symbols(sequence, alphabet)
    if idx.size == 0:
        raise ValueError("empirical type of an empty sequence")
    return np.bincount(idx, minlength=size) / idx.size


def type_distance(counts: np.ndarray, q: np.ndarray) -> np.ndarray:
    """L1 distance between count vectors (last axis) and ``q``; +inf when a
    zero-probability symbol occurs."""
    counts = np.asarray(counts, dtype=float)
    n = counts.sum(axis=-1, keepdims=True)
    dist = np.abs(counts / n - q).sum(axis=-1)
    forbidden = ((q <= 0) & (counts > 0)).any(axis=-1)
    return np.where(forbidden, np.inf, dist)


def is_typical(sequence: Sequence[Any], dist: Any, epsilon: float = DEFAULT_EPSILON,
               alphabet: Sequence[Any] | None = None) -> bool:
    """L1 strong typicality with the zero-support exclusion."""
    if epsilon < 0:
        raise ValueError("epsilon must be ≥ 0")
    q = np.asarray(dist, dtype=float).reshape(-1)
    idx, _ = _encode_symbols(sequence, alphabet if alphabet is not None else len(q))
    if idx.size == 0:
        return False
    counts = np.bincount(idx, minlength=len(q))
    return bool(type_distance(counts, q) <= epsilon + PROB_TOL)


def is_jointly_typical(x: Sequence[int], y: Sequence[int], joint: Any,
                       epsilon: float = DEFAULT_EPSILON) -> bool:
    """Joint typicality of (x^n, y^n) w.r.t. a 2-D table ``joint[x, y]``."""
    q = np.asarray(joint.table if isinstance(joint, JointDistribution) else joint, dtype=float)
    if q.ndim != 2:
        raise ValueError("joint typicality needs a 2-D table")
    x = np.asarray(x, dtype=np.int64)
    y = np.asarray(y, dtype=np.int64)
    if x.shape != y.shape:
        raise ValueError(f"length mismatch: {x.size} vs {y.size}")
    pair = x * q.shape[1] + y
    return is_typical(pair, q.reshape(-1), epsilon)


def exact_type_sequence(dist: Any, n: int) -> np.ndarray:
    """A sorted length-n sequence whose type is the largest-remainder
    rounding of ``dist``."""
    q = np.asarray(dist, dtype=float)
    raw = q * n
    counts = np.floor(raw).astype(np.int64)
    short = n - counts.sum()
    if short:
        order = np.argsort(-(raw - counts), kind="stable")
        counts[order[:short]] += 1
    return np.repeat(np.arange(len(q)), counts)


def typical_set_size(dist: Any, n: int, epsilon: float) -> int:
    """Exact |A*_eps| by summing multinomial coefficients over types."""
    q = np.asarray(dist, dtype=float)
    m = len(q)
    total = 0
    for counts in _compositions(n, m):
        c = np.asarray(counts)
        if type_distance(c, q) <= epsilon + PROB_TOL:
            total += _multinomial(counts)
    return total


def _compositions(n: int, m: int):
    if m == 1:
        yield (n,)
        return
    for first in range(n + 1):
        for rest in _compositions(n - first, m - 1):
            yield (first,) + rest


def _multinomial(counts: Sequence[int]) -> int:
    out, total = 1, 0
    for c in counts:
        total += c
        out *= math.comb(total, c)
    return out


__all__ = [
    "DEFAULT_EPSILON", "PROB_TOL", "GameSpecError", "StageGame", "MonitoringStructure",
    "ProductDistribution", "JointDistribution", "DeviationSpec", "noisy_binary_monitoring",
    "prisoners_dilemma", "pd_instance", "validate_game", "game_to_dict", "signal_channel",
    "expected_utility", "entropy", "conditional_entropy", "mutual_information",
    "binary_entropy", "empirical_type", "type_distance", "is_typical",
    "is_jointly_typical", "exact_type_sequence", "typical_set_size",
]
