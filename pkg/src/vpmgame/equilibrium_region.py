"""Min-max levels, grid sweeps of the constraint set, and 2-D hull geometry."""

from __future__ import annotations

import csv
import io
import itertools
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .game_model import MonitoringStructure, ProductDistribution, StageGame
from .info_constraint import rstar_batch

GEOM_TOL = 1e-9


# ---------------------------------------------------------------------------
# Min-max levels
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MinmaxLevels:
    """Independent min-max levels and the opponents' punishment profiles.

    ``punishments[i][k]`` is player k's mixed action when punishing i
    (``None`` for k == i).
    """

    levels: np.ndarray
    punishments: tuple[tuple[np.ndarray | None, ...], ...]
    exact: bool = True

    def punisher_action(self, i: int, k: int) -> np.ndarray:
        if k == i:
            raise ValueError("a player does not punish itself")
        return self.punishments[i][k]


def _best_response_value(payoff: np.ndarray, opp: np.ndarray) -> float:
    """max over own actions of payoff[a, :] @ opp (two-player case)."""
    return float(np.max(payoff @ opp))


def _minmax_two_player(payoff: np.ndarray) -> tuple[float, np.ndarray]:
    """min_q max_a payoff[a] @ q by LP; pure minimizers preferred in index order."""
    m_own, m_opp = payoff.shape
    # variables (q_1..q_m, v): minimize v s.t. payoff q - v <= 0, sum q = 1
    c = np.zeros(m_opp + 1)
    c[-1] = 1.0
    A_ub = np.hstack([payoff, -np.ones((m_own, 1))])
    A_eq = np.hstack([np.ones((1, m_opp)), np.zeros((1, 1))])
    bounds = [(0, None)] * m_opp + [(None, None)]
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(m_own), A_eq=A_eq, b_eq=[1.0],
                  bounds=bounds, method="highs")
    if not res.success:
        raise RuntimeError(f"min-max LP failed: {res.message}")
    value = float(res.x[-1])
    for j in range(m_opp):
        if payoff[:, j].max() <= value + GEOM_TOL:
            return float(payoff[:, j].max()), np.eye(m_opp)[j]
    q = np.clip(res.x[:-1], 0.0, None)
    q /= q.sum()
    return _best_response_value(payoff, q), q


def _coordinate_minmax(game: StageGame, k: int, restarts: int = 8,
                       sweeps: int = 50, seed: int = 0) -> tuple[float, list[np.ndarray]]:
    """Approximate min over independent opponents by alternating LPs."""
    K = game.n_players
    opps = [j for j in range(K) if j != k]
    counts = game.action_counts
    u = game.utilities[k]
    rng = np.random.default_rng(seed)

    def value(profile: dict[int, np.ndarray]) -> float:
        joint = np.ones(())
        for j in opps:
            joint = np.multiply.outer(joint, profile[j])
        tk = np.moveaxis(u, k, 0)
        return float(np.max(np.tensordot(tk, joint, axes=len(opps))))

    starts: list[dict[int, np.ndarray]] = [{j: np.full(counts[j], 1.0 / counts[j]) for j in opps}]
    for pure in itertools.islice(itertools.product(*(range(counts[j]) for j in opps)), restarts):
        starts.append({j: np.eye(counts[j])[a] for j, a in zip(opps, pure)})
    for _ in range(restarts):
        starts.append({j: rng.dirichlet(np.ones(counts[j])) for j in opps})

    best_val, best_prof = math.inf, None
    for prof in starts:
        prof = dict(prof)
        cur = value(prof)
        for _ in range(sweeps):
            improved = False
            for j in opps:
                rest = [x for x in opps if x != j]
                joint = np.ones(())
                for x in rest:
                    joint = np.multiply.outer(joint, prof[x])
                # matrix M[a_k, a_j] after averaging the other opponents
                t = np.moveaxis(u, (k, j), (0, 1))
                M = np.tensordot(t, joint, axes=len(rest)) if rest else t
                v, q = _minmax_two_player(M)
                if v < cur - 1e-12:
                    prof[j], cur, improved = q, v, True
            if not improved:
                break
        if cur < best_val - 1e-12:
            best_val, best_prof = cur, prof
    assert best_prof is not None
    return best_val, [best_prof.get(j) if j != k else None for j in range(K)]


def minmax_levels(game: StageGame) -> MinmaxLevels:
    """Min-max level of every player.

    Exact (zero-sum LP) for two players; for three or more players the
    independent-opponents minimum is approximated by alternating LPs and
    the result is flagged ``exact=False``.
    """
    K = game.n_players
    levels = np.zeros(K)
    punish: list[tuple[np.ndarray | None, ...]] = []
    if K == 2:
        for k in range(2):
            payoff = game.utilities[k] if k == 0 else game.utilities[k].T
            v, q = _minmax_two_player(payoff)
            levels[k] = v
            punish.append((None, q) if k == 0 else (q, None))
        return MinmaxLevels(levels, tuple(punish), exact=True)
    for k in range(K):
        v, prof = _coordinate_minmax(game, k)
        levels[k] = v
        punish.append(tuple(prof))
    return MinmaxLevels(levels, tuple(punish), exact=False)


def is_individually_rational(u_vec: Sequence[float], levels: MinmaxLevels | Sequence[float],
                             tol: float = GEOM_TOL) -> bool:
    lv = np.asarray(levels.levels if isinstance(levels, MinmaxLevels) else levels, dtype=float)
    u = np.asarray(u_vec, dtype=float)
    if u.shape != lv.shape:
        raise ValueError(f"length mismatch: {u.shape} vs {lv.shape}")
    return bool(np.all(u >= lv - tol))


# ---------------------------------------------------------------------------
# Planar geometry
# ---------------------------------------------------------------------------


def _cross(o: np.ndarray, a: np.ndarray, b: np.ndarray) -> float:
    return float((a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]))


def convex_hull(points) -> np.ndarray:
    """Andrew's monotone chain; counterclockwise, collinear points dropped."""
    pts = np.unique(np.round(np.asarray(points, dtype=float).reshape(-1, 2), 12), axis=0)
    if len(pts) <= 2:
        return pts
    lower: list[np.ndarray] = []
    for p in pts:
        while len(lower) >= 2 and _cross(lower[-2], lower[-1], p) <= GEOM_TOL:
            lower.pop()
        lower.append(p)
    upper: list[np.ndarray] = []
    for p in pts[::-1]:
        while len(upper) >= 2 and _cross(upper[-2], upper[-1], p) <= GEOM_TOL:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def clip_halfplane(polygon: np.ndarray, axis: int, level: float) -> np.ndarray:
    """Keep the part of a convex polygon with coordinate ``axis`` ≥ ``level``."""
    poly = np.asarray(polygon, dtype=float).reshape(-1, 2)
    if len(poly) == 0:
        return poly
    if len(poly) == 1:
        return poly if poly[0, axis] >= level - GEOM_TOL else poly[:0]
    out: list[np.ndarray] = []
    n = len(poly)
    for idx in range(n):
        cur, nxt = poly[idx], poly[(idx + 1) % n]
        cur_in = cur[axis] >= level - GEOM_TOL
        nxt_in = nxt[axis] >= level - GEOM_TOL
        if cur_in:
            out.append(cur)
        if cur_in != nxt_in:
            t = (level - cur[axis]) / (nxt[axis] - cur[axis])
            cross_pt = cur + t * (nxt - cur)
            cross_pt[axis] = level
            out.append(cross_pt)
        if len(poly) == 2:
            break
    return _clean_polygon(np.array(out) if out else poly[:0])


def _clean_polygon(poly: np.ndarray) -> np.ndarray:
    if len(poly) == 0:
        return poly.reshape(0, 2)
    return convex_hull(poly)


def convex_hull_clip(points, levels) -> np.ndarray:
    """Convex hull of ``points`` intersected with {x ≥ levels[0], y ≥ levels[1]}."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    if len(pts) == 0:
        return pts
    lv = np.asarray(levels.levels if isinstance(levels, MinmaxLevels) else levels, dtype=float)
    poly = convex_hull(pts)
    for axis in (0, 1):
        poly = clip_halfplane(poly, axis, float(lv[axis]))
        if len(poly) == 0:
            break
    return poly


def ir_point_hull(points, levels) -> np.ndarray:
    """Convex hull of the individually rational points only."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    lv = np.asarray(levels.levels if isinstance(levels, MinmaxLevels) else levels, dtype=float)
    keep = np.all(pts >= lv - GEOM_TOL, axis=1)
    return convex_hull(pts[keep]) if keep.any() else pts[:0]


def polygon_area(poly) -> float:
    p = np.asarray(poly, dtype=float).reshape(-1, 2)
    if len(p) < 3:
        return 0.0
    x, y = p[:, 0], p[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def is_convex_ccw(poly) -> bool:
    p = np.asarray(poly, dtype=float).reshape(-1, 2)
    n = len(p)
    if n < 3:
        return True
    return all(_cross(p[i], p[(i + 1) % n], p[(i + 2) % n]) > -GEOM_TOL for i in range(n))


def point_in_polygon(pt, poly, tol: float = 1e-7) -> bool:
    """Membership in a convex counterclockwise polygon (boundary included)."""
    p = np.asarray(poly, dtype=float).reshape(-1, 2)
    q = np.asarray(pt, dtype=float)
    if len(p) == 0:
        return False
    if len(p) == 1:
        return bool(np.linalg.norm(q - p[0]) <= tol)
    if len(p) == 2:
        d = p[1] - p[0]
        t = np.clip(np.dot(q - p[0], d) / np.dot(d, d), 0, 1)
        return bool(np.linalg.norm(p[0] + t * d - q) <= tol)
    return all(_cross(p[i], p[(i + 1) % len(p)], q) >= -tol for i in range(len(p)))


# ---------------------------------------------------------------------------
# Grid sweep
# ---------------------------------------------------------------------------


def simplex_grid(n_actions: int, step: float, floor: float = 0.0) -> np.ndarray:
    """All mixed actions whose entries are multiples of ``step`` and ≥ ``floor``.

    Rows are ordered by the first coordinate ascending, then the next, etc.
    """
    units = round(1.0 / step)
    if abs(units * step - 1.0) > 1e-9:
        raise ValueError(f"grid step {step} must divide 1")
    lo = math.ceil(floor / step - 1e-9)
    rows = [c for c in itertools.product(range(lo, units + 1), repeat=n_actions - 1)
            if units - sum(c) >= lo]
    grid = np.array([list(c) + [units - sum(c)] for c in rows], dtype=float) / units
    return grid.reshape(-1, n_actions)


def _utilities_batch(game: StageGame, marginals: Sequence[np.ndarray]) -> np.ndarray:
    N = marginals[0].shape[0]
    joint = np.ones((N,))
    for m in marginals:
        joint = joint[..., None] * m.reshape((N,) + (1,) * (joint.ndim - 1) + (-1,))
    return np.tensordot(joint, game.utilities, axes=(list(range(1, joint.ndim)),
                                                     list(range(1, game.utilities.ndim))))


def _rstar_chunk(args):
    game, monitoring, marginals = args
    return rstar_batch(game, monitoring, marginals)


@dataclass
class RegionResult:
    """Outcome of a grid sweep.

    ``hull`` is the convex hull of u(P*) over in-region grid points clipped
    to the individually rational quadrant; ``ir_hull`` is the hull of the
    in-region points that are themselves individually rational.  The
    ``folk_*`` polygons ignore the information constraint.
    """

    grid_step: float
    support_floor: float
    threshold: float
    marginals: list[np.ndarray]
    utilities: np.ndarray
    rstar: np.ndarray
    in_region: np.ndarray
    individually_rational: np.ndarray
    levels: MinmaxLevels
    hull: np.ndarray | None = None
    ir_hull: np.ndarray | None = None
    folk_hull: np.ndarray | None = None
    grid_folk_hull: np.ndarray | None = None
    action_labels: tuple[tuple[str, ...], ...] = field(default=())

    @property
    def n_points(self) -> int:
        return len(self.rstar)

    def area(self, which: str = "ir_hull") -> float:
        poly = getattr(self, which)
        return polygon_area(poly) if poly is not None else float("nan")

    def area_ratio(self, which: str = "ir_hull", reference: str = "grid_folk_hull") -> float:
        ref = self.area(reference)
        return self.area(which) / ref if ref > 0 else float("nan")

    def cell_area(self) -> float:
        """Largest utility-space area of one grid cell (2 players, binary actions)."""
        if len(self.marginals) != 2 or any(m.shape[1] != 2 for m in self.marginals):
            raise ValueError("cell area is defined for 2x2 games")
        p = np.unique(self.marginals[0][:, 0])
        q = np.unique(self.marginals[1][:, 0])
        U = self.utilities.reshape(len(p), len(q), 2)
        corners = [U[:-1, :-1], U[1:, :-1], U[1:, 1:], U[:-1, 1:]]
        x = np.stack([c[..., 0] for c in corners], -1)
        y = np.stack([c[..., 1] for c in corners], -1)
        area = 0.5 * np.abs((x * np.roll(y, -1, -1) - y * np.roll(x, -1, -1)).sum(-1))
        return float(area.max()) if area.size else 0.0

    def region_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        K = len(self.marginals)
        labels = self.action_labels or tuple(tuple(str(a) for a in range(m.shape[1]))
                                             for m in self.marginals)
        head = ["floor"] + [f"p{k + 1}_{a}" for k in range(K) for a in labels[k]]
        head += [f"u{k + 1}" for k in range(K)] + ["rstar", "in_R", "IR"]
        if header:
            w.writerow(head)
        for r in range(self.n_points):
            row = [f"{self.support_floor:.12g}"]
            row += [f"{x:.12g}" for k in range(K) for x in self.marginals[k][r]]
            row += [f"{x:.12g}" for x in self.utilities[r]]
            row += [f"{self.rstar[r]:.12g}", int(self.in_region[r]), int(self.individually_rational[r])]
            w.writerow(row)
        return buf.getvalue()

    def hull_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(["floor", "polygon", "vertex", "u1", "u2"])
        for name in ("hull", "ir_hull", "folk_hull", "grid_folk_hull"):
            poly = getattr(self, name)
            if poly is None:
                continue
            for v, (x, y) in enumerate(poly):
                w.writerow([f"{self.support_floor:.12g}", name, v, f"{x:.12g}", f"{y:.12g}"])
        return buf.getvalue()


def sweep_region(game: StageGame, monitoring: MonitoringStructure, grid_step: float = 0.01,
                 support_floor: float = 0.0, hull: bool = True, jobs: int = 1) -> RegionResult:
    """Evaluate the constraint and payoffs on the product grid of mixed actions."""
    if not 0.0 < grid_step <= 0.5:
        raise ValueError(f"grid step must lie in (0, 0.5], got {grid_step}")
    if support_floor < 0:
        raise ValueError("support floor must be ≥ 0")
    monitoring.check_against(game)
    K = game.n_players
    if hull and K != 2:
        raise NotImplementedError("hull computation is only supported for 2 players")
    grids = [simplex_grid(m, grid_step, support_floor) for m in game.action_counts]
    if any(len(g) == 0 for g in grids):
        raise ValueError("support floor leaves an empty grid")
    idx = np.array(list(itertools.product(*(range(len(g)) for g in grids))), dtype=np.int64)
    marginals = [grids[k][idx[:, k]] for k in range(K)]

    if jobs > 1 and len(idx) > 1:
        bounds = np.linspace(0, len(idx), jobs + 1).astype(int)
        chunks = [(game, monitoring, [m[a:b] for m in marginals])
                  for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rstar = np.concatenate(list(pool.map(_rstar_chunk, chunks)))
    else:
        rstar = rstar_batch(game, monitoring, marginals)

    util = _utilities_batch(game, marginals)
    levels = minmax_levels(game)
    threshold = monitoring.capacity_bits
    in_region = rstar < threshold
    ir = np.all(util >= levels.levels - GEOM_TOL, axis=1)
    result = RegionResult(grid_step, support_floor, threshold, marginals, util, rstar,
                          in_region, ir, levels, action_labels=game.action_labels)
    if hull:
        pure = np.array([game.payoff(a) for a in game.profiles()])
        result.folk_hull = convex_hull_clip(pure, levels)
        result.grid_folk_hull = ir_point_hull(util, levels)
        result.hull = convex_hull_clip(util[in_region], levels)
        result.ir_hull = ir_point_hull(util[in_region], levels)
    return result


def sweep_both_conventions(game: StageGame, monitoring: MonitoringStructure,
                           grid_step: float = 0.01, jobs: int = 1) -> dict[float, RegionResult]:
    """Sweeps with support floor 0 and with floor equal to the grid step."""
    return {floor: sweep_region(game, monitoring, grid_step, floor, jobs=jobs)
            for floor in (0.0, grid_step)}


def full_region_tolerance(result: RegionResult) -> float:
    """Relative area of one grid cell w.r.t. the grid folk region."""
    return result.cell_area() / result.area("grid_folk_hull")


__all__ = [
    "GEOM_TOL", "MinmaxLevels", "minmax_levels", "is_individually_rational", "convex_hull",
    "clip_halfplane", "convex_hull_clip", "ir_point_hull", "polygon_area", "is_convex_ccw",
    "point_in_polygon", "simplex_grid", "RegionResult", "sweep_region",
    "sweep_both_conventions", "full_region_tolerance",
]
