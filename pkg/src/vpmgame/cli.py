"""Command-line front end: ``python -m vpmgame <command> ...``.

Commands: analyze, region, simulate-coding, simulate-game, schema.
Every command that writes files also writes ``manifest.json`` next to them.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import __version__
from .avs_codec_sim import RateInfeasibleError, build_code, estimate_error_probability
from .equilibrium_region import full_region_tolerance, sweep_region
from .game_model import (
    DeviationSpec,
    GameSpecError,
    MonitoringStructure,
    ProductDistribution,
    StageGame,
    noisy_binary_monitoring,
    validate_game,
)
from .info_constraint import compute_rstar
from .repeated_game_sim import (
    SimConfig,
    epsilon_equilibrium_check,
    run_matches,
    standard_deviation_library,
)

SCHEMA = """\
Game file (JSON)
  players               number of players (optional, checked against actions)
  actions               list of action-label lists, one per player
  utilities             one row [u_1, ..., u_K] per action profile, profiles in
                        row-major order (last player's action varies fastest)
  monitoring            {"type": "noisy_binary", "delta": d}  two-player binary channel
                        {"type": "joint", "signals": [[...], ...], "table": [[...], ...]}
                        one row per action profile over all signal profiles
  public_alphabet_size  |S_0|

Target mixed action: --target "0.9,0.1;0.9,0.1" (players separated by ';'),
or a JSON file holding a list of probability lists.  Default: uniform.

Deviation strings (players and actions are 1-based):
  none | constant:P:A | iid:P:p1,p2,... | periodic:P:a1,a2,... | typical:P
  an optional "@B" suffix sets the first deviating block (repeated game only)

region CSV (region_d<delta>.csv), one row per grid point and floor:
  floor, p<k>_<action> ..., u1, u2, rstar, in_R, IR
hull CSV (hull_d<delta>.csv), ordered counterclockwise vertices:
  floor, polygon, vertex, u1, u2
  polygon in {hull, ir_hull, folk_hull, grid_folk_hull}

coding trace CSV (coding_trace.csv), one row per trial:
  trial, deviation, deviator, suspect, encode_status, error_class, mismatch,
  e1, e2, misidentified, overflow, decoder<k> ...

match trace CSV (match_<m>.csv), one row per block:
  block, tested, E_<k>_<i> ..., punish_<k> ..., u<k> ...

Repeated-game config (JSON): n, blocks, target, epsilon, epsilon_test,
  epsilon_eq, mode ("ideal" | "codec"), matches, deviation, check (bool),
  decode_failure_flags (bool), traces (number of match CSVs to write)
"""


class CliError(Exception):
    pass


@dataclass
class RunManifest:
    command: str
    config: dict[str, Any]
    seed: int
    version: str = __version__
    outputs: list[str] = field(default_factory=list)
    duration_s: float = 0.0

    def write(self, out_dir: Path) -> Path:
        path = out_dir / "manifest.json"
        self.outputs.append(str(path))
        path.write_text(json.dumps(self.__dict__, indent=2, default=str) + "\n")
        return path


# ---------------------------------------------------------------------------
# Parsing helpers
# ---------------------------------------------------------------------------


def load_json(path: str | Path) -> Any:
    p = Path(path)
    if not p.exists():
        raise CliError(f"file not found: {p}")
    try:
        return json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise CliError(f"{p}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def load_game(path: str | Path, delta: float | None = None) -> tuple[StageGame, MonitoringStructure]:
    raw = load_json(path)
    try:
        game, mon = validate_game(raw)
    except (GameSpecError, KeyError, TypeError, ValueError) as exc:
        raise CliError(f"{path}: {exc}") from None
    if delta is not None:
        mon = with_delta(raw, game, mon, delta)
    return game, mon


def with_delta(raw: dict, game: StageGame, mon: MonitoringStructure, delta: float) -> MonitoringStructure:
    if raw.get("monitoring", {}).get("type") != "noisy_binary":
        raise CliError("--delta only applies to games with noisy_binary monitoring")
    return noisy_binary_monitoring(delta, mon.public_alphabet_size, mon.signal_labels)


def parse_target(text: str | None, game: StageGame) -> ProductDistribution:
    if text is None:
        return ProductDistribution.uniform(game.action_counts)
    if Path(text).suffix == ".json":
        rows = load_json(text)
    else:
        try:
            rows = [[float(x) for x in part.split(",")] for part in text.split(";")]
        except ValueError:
            raise CliError(f"cannot parse target {text!r}") from None
    if len(rows) != game.n_players:
        raise CliError(f"target needs {game.n_players} mixed actions, got {len(rows)}")
    try:
        return ProductDistribution(tuple(np.asarray(r, dtype=float) for r in rows))
    except ValueError as exc:
        raise CliError(f"target: {exc}") from None


def _action_index(game: StageGame, player: int, token: str) -> int:
    labels = game.action_labels[player]
    if token in labels:
        return labels.index(token)
    try:
        idx = int(token) - 1
    except ValueError:
        raise CliError(f"unknown action {token!r} for player {player + 1}") from None
    if not 0 <= idx < len(labels):
        raise CliError(f"action index {token} out of range for player {player + 1}")
    return idx


def parse_deviation(text: str | None, game: StageGame) -> DeviationSpec:
    if not text or text == "none":
        return DeviationSpec.none()
    body, _, start = text.partition("@")
    start_block = int(start) if start else 1
    parts = body.split(":")
    kind = parts[0]
    try:
        player = int(parts[1]) - 1
    except (IndexError, ValueError):
        raise CliError(f"deviation {text!r}: expected kind:player[:args]") from None
    if not 0 <= player < game.n_players:
        raise CliError(f"deviation {text!r}: player out of range")
    arg = parts[2] if len(parts) > 2 else ""
    if kind == "constant":
        return DeviationSpec.constant(player, _action_index(game, player, arg), start_block)
    if kind == "iid":
        return DeviationSpec.iid(player, [float(x) for x in arg.split(",")], start_block)
    if kind == "periodic":
        return DeviationSpec.periodic(player, [_action_index(game, player, x) for x in arg.split(",")],
                                      start_block)
    if kind in ("typical", "typical_shuffle"):
        return DeviationSpec.typical_shuffle(player, start_block)
    raise CliError(f"unknown deviation kind {kind!r}")


def _fmt(x: float) -> str:
    return f"{x:g}"


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_analyze(args: argparse.Namespace) -> int:
    game, mon = load_game(args.game, args.delta)
    dist = parse_target(args.target, game)
    report = compute_rstar(game, mon, dist)
    text = report.to_text(game)
    print(text)
    if args.out:
        out = Path(args.out)
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(json.dumps(report.to_dict(), indent=2) + "\n")
    return 0


def cmd_region(args: argparse.Namespace) -> int:
    t0 = time.perf_counter()
    if not 0 < args.step <= 0.5:
        raise CliError(f"grid step must lie in (0, 0.5], got {args.step}")
    raw = load_json(args.game)
    game, mon = load_game(args.game)
    if game.n_players != 2:
        raise CliError("hull output requires a two-player game")
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    deltas = args.delta if args.delta else [None]
    floors = [args.floor] if args.floor is not None else [0.0, args.step]
    manifest = RunManifest("region", {"game": str(args.game), "delta": args.delta,
                                      "step": args.step, "floors": floors, "jobs": args.jobs},
                           args.seed)
    for d in deltas:
        m = with_delta(raw, game, mon, d) if d is not None else mon
        tag = f"d{_fmt(d)}" if d is not None else "game"
        region_rows, hull_rows = [], []
        for j, floor in enumerate(floors):
            res = sweep_region(game, m, args.step, floor, jobs=args.jobs)
            region_rows.append(res.region_csv(header=j == 0))
            hull_rows.append(res.hull_csv(header=j == 0))
            ratio = res.area_ratio()
            try:
                tol = full_region_tolerance(res)
                extra = f" cell_tol={tol:.2e}"
            except ValueError:
                extra = ""
            print(f"delta={_fmt(d) if d is not None else '-'} floor={_fmt(floor)} "
                  f"points={res.n_points} in_R={int(res.in_region.sum())} "
                  f"area_ratio={ratio:.6f}{extra}")
        for name, rows in ((f"region_{tag}.csv", region_rows), (f"hull_{tag}.csv", hull_rows)):
            path = out_dir / name
            path.write_text("".join(rows))
            manifest.outputs.append(str(path))
    manifest.duration_s = time.perf_counter() - t0
    manifest.write(out_dir)
    return 0


def cmd_simulate_coding(args: argparse.Namespace) -> int:
    t0 = time.perf_counter()
    game, mon = load_game(args.game, args.delta)
    dist = parse_target(args.target, game)
    deviation = parse_deviation(args.deviation, game)
    try:
        code = build_code(game, mon, dist, args.n, args.epsilon, args.seed, args.nbar1)
    except RateInfeasibleError as exc:
        raise CliError(str(exc)) from None
    est = estimate_error_probability(code, deviation, args.trials, args.seed,
                                     decode=not args.no_decode, jobs=args.jobs)
    print(est.to_text())
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest("simulate-coding",
                           {"game": str(args.game), "delta": args.delta, "target": dist.as_lists(),
                            "n": args.n, "epsilon": args.epsilon, "trials": args.trials,
                            "deviation": deviation.label(), "decode": not args.no_decode,
                            "nbar1": code.nbar1, "jobs": args.jobs}, args.seed)
    files = {"coding_trace.csv": est.trace_csv(),
             "codebook.json": code.to_json() + "\n",
             "error_estimate.json": json.dumps(est.to_dict(), indent=2) + "\n"}
    for name, content in files.items():
        (out_dir / name).write_text(content)
        manifest.outputs.append(str(out_dir / name))
    manifest.duration_s = time.perf_counter() - t0
    manifest.write(out_dir)
    return 0


def cmd_simulate_game(args: argparse.Namespace) -> int:
    t0 = time.perf_counter()
    game, mon = load_game(args.game, args.delta)
    cfg_raw = load_json(args.config)
    try:
        n, blocks = int(cfg_raw["n"]), int(cfg_raw["blocks"])
    except KeyError as exc:
        raise CliError(f"{args.config}: missing field {exc.args[0]!r}") from None
    target = cfg_raw.get("target")
    dist = (ProductDistribution(tuple(np.asarray(r, float) for r in target)) if target
            else ProductDistribution.uniform(game.action_counts))
    deviation = parse_deviation(cfg_raw.get("deviation"), game)
    try:
        config = SimConfig(n=n, blocks=blocks, target=dist,
                           epsilon=float(cfg_raw.get("epsilon", 0.05)),
                           epsilon_test=cfg_raw.get("epsilon_test"),
                           deviation=deviation, master_seed=args.seed,
                           epsilon_eq=float(cfg_raw.get("epsilon_eq", 0.15)),
                           mode=cfg_raw.get("mode", "ideal"),
                           decode_failure_flags=bool(cfg_raw.get("decode_failure_flags", True)))
    except ValueError as exc:
        raise CliError(f"{args.config}: {exc}") from None
    matches = int(cfg_raw.get("matches", 10))
    try:
        traces = run_matches(game, mon, config, matches, args.jobs)
    except RateInfeasibleError as exc:
        raise CliError(str(exc)) from None
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = RunManifest("simulate-game", {"game": str(args.game), "delta": args.delta,
                                             **cfg_raw, "jobs": args.jobs}, args.seed)
    for m, tr in enumerate(traces[: int(cfg_raw.get("traces", 1))]):
        path = out_dir / f"match_{m}.csv"
        path.write_text(tr.to_csv())
        manifest.outputs.append(str(path))
    gam = np.array([t.gamma for t in traces])
    lines = [f"matches={matches} n={n} blocks={blocks} mode={config.mode} "
             f"deviation={deviation.label()}",
             f"mean utilities={np.round(gam.mean(axis=0), 6).tolist()}",
             f"event rate={np.mean([t.event for t in traces]):.4f}"]
    if cfg_raw.get("check"):
        report = epsilon_equilibrium_check(
            game, mon, config, standard_deviation_library(game, dist, 3), matches, args.jobs)
        lines.append(report.to_text())
    summary = "\n".join(lines) + "\n"
    print(summary, end="")
    (out_dir / "summary.txt").write_text(summary)
    manifest.outputs.append(str(out_dir / "summary.txt"))
    manifest.duration_s = time.perf_counter() - t0
    manifest.write(out_dir)
    return 0


def cmd_schema(args: argparse.Namespace) -> int:
    print(SCHEMA, end="")
    return 0


# ---------------------------------------------------------------------------
# Entry point
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="vpmgame", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, out: bool = True) -> None:
        p.add_argument("--seed", type=int, default=0, help="64-bit master seed")
        p.add_argument("--jobs", type=int, default=1, help="worker processes")
        if out:
            p.add_argument("--out-dir", default="out")

    p = sub.add_parser("analyze", help="evaluate R* and the rate constraint")
    p.add_argument("game")
    p.add_argument("--target")
    p.add_argument("--delta", type=float)
    p.add_argument("--out", help="write the report as JSON")
    common(p, out=False)
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("region", help="grid sweep of the constraint set")
    p.add_argument("game")
    p.add_argument("--delta", type=float, nargs="*")
    p.add_argument("--step", type=float, default=0.01)
    p.add_argument("--floor", type=float, help="support floor (default: 0 and the step)")
    common(p)
    p.set_defaults(func=cmd_region)

    p = sub.add_parser("simulate-coding", help="Monte Carlo error of the public code")
    p.add_argument("game")
    p.add_argument("--target")
    p.add_argument("--delta", type=float)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--epsilon", type=float, default=0.05)
    p.add_argument("--trials", type=int, default=1000)
    p.add_argument("--deviation", default="none")
    p.add_argument("--nbar1", type=int)
    p.add_argument("--no-decode", action="store_true", help="suspect test only")
    common(p)
    p.set_defaults(func=cmd_simulate_coding)

    p = sub.add_parser("simulate-game", help="repeated-game matches")
    p.add_argument("game")
    p.add_argument("--config", required=True)
    p.add_argument("--delta", type=float)
    common(p)
    p.set_defaults(func=cmd_simulate_game)

    p = sub.add_parser("schema", help="describe file formats and CSV columns")
    p.set_defaults(func=cmd_schema)
    return ap


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (GameSpecError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
