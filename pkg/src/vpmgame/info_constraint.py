"""The public-channel rate constraint for resilient action reconstruction.

For a prescribed product mixed action, the required rate is

    R* = max_i [ max_{k, a_i} H(a_{-i,k} | s_k(a_i), a_k) + log2 chi_i ]

where chi_i is the chromatic number of player i's confusability graph.
The constraint holds when R* < log2 |S_0| (strict).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .game_model import (
    PROB_TOL,
    JointDistribution,
    MonitoringStructure,
    ProductDistribution,
    StageGame,
    conditional_entropy,
    signal_channel,
)
from .monitoring_graph import Coloring, build_auxiliary_graph, minimal_coloring


@dataclass(frozen=True)
class InfoConstraintReport:
    terms: dict[tuple[int, int, int], float]
    chromatic_numbers: tuple[int, ...]
    coloring_exact: tuple[bool, ...]
    rstar: float
    threshold: float
    witness: tuple[int, int, int]
    colorings: tuple[Coloring, ...] = field(default=(), repr=False)

    @property
    def satisfied(self) -> bool:
        return self.rstar < self.threshold

    @property
    def margin(self) -> float:
        return self.threshold - self.rstar

    def per_player_rate(self, i: int) -> float:
        worst = max(v for (j, _, _), v in self.terms.items() if j == i)
        return worst + math.log2(self.chromatic_numbers[i])

    def max_term(self, i: int) -> float:
        return max(v for (j, _, _), v in self.terms.items() if j == i)

    def recompute_rstar(self) -> float:
        return max(self.per_player_rate(i) for i in range(len(self.chromatic_numbers)))

    def to_text(self, game: StageGame | None = None) -> str:
        def name(i: int) -> str:
            return game.player_labels[i] if game else f"P{i + 1}"

        def act(i: int, a: int) -> str:
            return game.action_labels[i][a] if game else str(a)

        verdict = "SATISFIED" if self.satisfied else "VIOLATED"
        lines = [f"R*={self.rstar:.3f} bits, threshold={self.threshold:.3f}, {verdict}",
                 f"margin_bits={self.margin:.6f}"]
        for i, chi in enumerate(self.chromatic_numbers):
            exact = "exact" if self.coloring_exact[i] else "upper-bound"
            lines.append(f"deviator {name(i)}: chi={chi} ({exact}), "
                         f"rate={self.per_player_rate(i):.6f}")
            for (j, k, a), v in sorted(self.terms.items()):
                if j == i:
                    lines.append(f"  H(a_-{name(i)},{name(k)} | s_{name(k)}({act(i, a)}), "
                                 f"a_{name(k)}) = {v:.6f}")
        i, k, a = self.witness
        lines.append(f"argmax: deviator={name(i)} decoder={name(k)} action={act(i, a)}")
        return "\n".join(lines)

    def to_dict(self) -> dict:
        return {
            "rstar_bits": self.rstar,
            "threshold_bits": self.threshold,
            "satisfied": self.satisfied,
            "chromatic_numbers": list(self.chromatic_numbers),
            "coloring_exact": list(self.coloring_exact),
            "witness": list(self.witness),
            "terms": [{"deviator": i, "decoder": k, "action": a, "bits": v}
                      for (i, k, a), v in sorted(self.terms.items())],
        }


def _term_joint(monitoring: MonitoringStructure, dist: ProductDistribution,
                i: int, k: int, a_i: int) -> JointDistribution:
    """Joint law of (a_{-i}, s_k) with a_i fixed, axes in player order then s_k."""
    K = monitoring.n_players
    others = [j for j in range(K) if j != i]
    chan = np.take(signal_channel(monitoring, k), a_i, axis=i)  # (A_{-i}..., S_k)
    prior = dist.joint(others)
    table = prior[..., None] * chan
    names = tuple(f"a{j}" for j in others) + (f"s{k}",)
    return JointDistribution(table / table.sum(), names)


def entropy_term(game: StageGame, monitoring: MonitoringStructure,
                 dist: ProductDistribution, i: int, k: int, a_i: int) -> float:
    """H(a_{-i,k} | s_k(a_i), a_k) in bits under P*_{-i} and the channel with a_i fixed.

    For k == i the conditioning is on s_i alone (a_i is fixed, not random).
    """
    K = game.n_players
    if not (0 <= i < K and 0 <= k < K):
        raise IndexError("player index out of range")
    if not 0 <= a_i < game.action_counts[i]:
        raise IndexError("action index out of range")
    joint = _term_joint(monitoring, dist, i, k, a_i)
    target = [f"a{j}" for j in range(K) if j not in (i, k)]
    given = [f"s{k}"] + ([f"a{k}"] if k != i else [])
    if not target:
        return 0.0
    return conditional_entropy(joint, target, given)


def player_colorings(game: StageGame, monitoring: MonitoringStructure,
                     dist: ProductDistribution,
                     support_threshold: float = PROB_TOL) -> tuple[Coloring, ...]:
    return tuple(
        minimal_coloring(build_auxiliary_graph(game, monitoring, dist, i, support_threshold))
        for i in range(game.n_players))


def compute_rstar(game: StageGame, monitoring: MonitoringStructure,
                  dist: ProductDistribution,
                  support_threshold: float = PROB_TOL) -> InfoConstraintReport:
    """Evaluate every entropy term, the chromatic numbers and R*.

    The inner maximum runs over all actions of the deviator (including
    those outside its prescribed support) and over all decoders k,
    including k == i.
    """
    monitoring.check_against(game)
    K = game.n_players
    colorings = player_colorings(game, monitoring, dist, support_threshold)
    terms: dict[tuple[int, int, int], float] = {}
    for i in range(K):
        for k in range(K):
            for a_i in range(game.action_counts[i]):
                terms[(i, k, a_i)] = entropy_term(game, monitoring, dist, i, k, a_i)
    best, witness = -math.inf, (0, 0, 0)
    for i in range(K):
        log_chi = math.log2(colorings[i].n_colors)
        for k in range(K):
            for a_i in range(game.action_counts[i]):
                v = terms[(i, k, a_i)] + log_chi
                if v > best + 1e-15:
                    best, witness = v, (i, k, a_i)
    return InfoConstraintReport(
        terms=terms,
        chromatic_numbers=tuple(c.n_colors for c in colorings),
        coloring_exact=tuple(c.exact for c in colorings),
        rstar=float(best),
        threshold=monitoring.capacity_bits,
        witness=witness,
        colorings=colorings,
    )


def in_constraint_set(game: StageGame, monitoring: MonitoringStructure,
                      dist: ProductDistribution) -> bool:
    return compute_rstar(game, monitoring, dist).satisfied


# ---------------------------------------------------------------------------
# Batched evaluation for grid sweeps
# ---------------------------------------------------------------------------


def _batched_entropy(p: np.ndarray) -> np.ndarray:
    """Entropy over all but the leading axis."""
    flat = p.reshape(p.shape[0], -1)
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(flat > 0, flat * np.log2(np.where(flat > 0, flat, 1.0)), 0.0)
    return np.maximum(-t.sum(axis=1), 0.0)


def rstar_batch(game: StageGame, monitoring: MonitoringStructure,
                marginals: Sequence[np.ndarray],
                support_threshold: float = PROB_TOL) -> np.ndarray:
    """R* for N product distributions at once.

    ``marginals[k]`` has shape (N, |A_k|).  Chromatic numbers are computed
    once per distinct support pattern.
    """
    monitoring.check_against(game)
    K = game.n_players
    P = [np.asarray(m, dtype=float) for m in marginals]
    N = P[0].shape[0]
    chans = [signal_channel(monitoring, k) for k in range(K)]

    best_term = np.zeros((K, N))
    for i in range(K):
        others = [j for j in range(K) if j != i]
        prior = np.ones((N,))
        for j in others:
            prior = prior[..., None] * P[j].reshape((N,) + (1,) * (prior.ndim - 1) + (-1,))
        for k in range(K):
            target_pos = [pos for pos, j in enumerate(others) if j != k]
            if not target_pos:
                continue
            # axes: 0 batch, 1..len(others) actions, last signal
            drop = tuple(1 + pos for pos in target_pos)
            for a_i in range(game.action_counts[i]):
                chan = np.take(chans[k], a_i, axis=i)
                joint = prior[..., None] * chan[None]
                h_cond = _batched_entropy(joint) - _batched_entropy(joint.sum(axis=drop))
                best_term[i] = np.maximum(best_term[i], np.maximum(h_cond, 0.0))

    # chromatic numbers per support pattern
    supp = np.concatenate([p > support_threshold for p in P], axis=1)
    patterns, inverse = np.unique(supp, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    log_chi = np.zeros((K, len(patterns)))
    offsets = np.cumsum([0] + [p.shape[1] for p in P])
    for r, pat in enumerate(patterns):
        dist = ProductDistribution(tuple(
            _support_proxy(pat[offsets[k]:offsets[k + 1]]) for k in range(K)))
        for i in range(K):
            g = build_auxiliary_graph(game, monitoring, dist, i, support_threshold)
            log_chi[i, r] = math.log2(minimal_coloring(g).n_colors)
    rates = best_term + log_chi[:, inverse]
    return rates.max(axis=0)


def _support_proxy(mask: np.ndarray) -> np.ndarray:
    """Uniform distribution on a support mask (only the support matters to the graph)."""
    v = mask.astype(float)
    return v / v.sum()


# ---------------------------------------------------------------------------
# Closed form for the 2x2 prisoner's dilemma family
# ---------------------------------------------------------------------------


def _xlog_ratio(weight: float, num: float, den: float) -> float:
    if weight <= 0.0:
        return 0.0
    return weight * math.log2(num / den)


def _pd_side(p: float, p_prime: float, delta: float) -> float:
    """Four-term expression for H(a_opp | s) with opponent law (p, p')."""
    right, wrong = 1.0 - delta / 2.0, delta / 2.0
    y0 = p * right + p_prime * wrong
    y1 = p * wrong + p_prime * right
    return (_xlog_ratio(p * right, y0, p * right)
            + _xlog_ratio(p_prime * wrong, y0, p_prime * wrong)
            + _xlog_ratio(p * wrong, y1, p * wrong)
            + _xlog_ratio(p_prime * right, y1, p_prime * right))


def pd_closed_form(delta: float, dist: ProductDistribution) -> float:
    """R* for the 2x2 game under the symmetric-flip monitoring, delta > 0.

    Uses the explicit four-term sums with chi_1 = chi_2 = 2; this is an
    independent check on :func:`compute_rstar` for that family.
    """
    if not 0.0 < delta <= 1.0:
        raise ValueError("closed form requires 0 < delta <= 1")
    if dist.n_players != 2 or any(len(m) != 2 for m in dist.marginals):
        raise ValueError("closed form is for 2 players with binary actions")
    p1, p2 = dist.marginals
    side_1 = _pd_side(p2[0], p2[1], delta)  # deviator 1, decoder 1 learns a_2
    side_2 = _pd_side(p1[0], p1[1], delta)
    return max(side_1, side_2) + 1.0


__all__ = [
    "InfoConstraintReport", "entropy_term", "player_colorings", "compute_rstar",
    "in_constraint_set", "rstar_batch", "pd_closed_form",
]
