"""Command-line front end: ``nfcce gen|solve|verify|bench``."""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .colgen import ColumnGeneration, Solution, TraceWriter
from .game import GameError, load_game, save_game
from .generators import (
    GoofspielConfig,
    GoofspielVariant,
    RandomGameConfig,
    gen_coarse_gap_game,
    gen_goofspiel,
    gen_random_game,
)
from .oracles.base import UnsupportedGame
from .oracles.milrc import MilpOracle
from .oracles.plansearch import PlanSearchOracle
from .seqform import SequenceForm, build_sequence_form
from .verify import check_nfcce

ORACLES = {"plrc": PlanSearchOracle, "milrc": MilpOracle}
SUITES = {"r5-3": (5, 3), "r10-2": (10, 2), "goofspiel": None}


def make_oracle(name: str, sf: SequenceForm):
    try:
        return ORACLES[name](sf)
    except KeyError:
        raise ValueError(f"unknown oracle {name!r}") from None


def solve_game(sf: SequenceForm, oracle: str, *, tol: float = 1e-6, time_limit: float | None = None,
               trace: str | None = None) -> Solution:
    writer = TraceWriter(trace) if trace else None
    try:
        return ColumnGeneration(sf, make_oracle(oracle, sf), tol=tol, time_limit=time_limit, trace=writer).solve()
    finally:
        if writer is not None:
            writer.close()


# -- gen -----------------------------------------------------------------

def cmd_gen(args: argparse.Namespace) -> int:
    if args.kind == "random":
        game = gen_random_game(RandomGameConfig(depth=args.depth, branching=args.branching, seed=args.seed,
                                                infoset_merge_prob=args.merge_prob, players=args.players))
    elif args.kind == "goofspiel":
        game = gen_goofspiel(GoofspielConfig(ranks=args.ranks, variant=GoofspielVariant(args.variant)))
    else:
        game = gen_coarse_gap_game(args.k)
    if args.out:
        save_game(game, args.out)
    else:
        sys.stdout.write(game.dumps() + "\n")
    return 0


# -- solve ---------------------------------------------------------------

def cmd_solve(args: argparse.Namespace) -> int:
    sf = build_sequence_form(load_game(args.game))
    try:
        sol = solve_game(sf, args.oracle, tol=args.tol, time_limit=args.time_limit, trace=args.trace)
    except UnsupportedGame as exc:
        print(f"error: oracle {args.oracle} cannot solve this game: {exc}", file=sys.stderr)
        return 2
    text = json.dumps(sol.to_json(sf), indent=1) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    st = sol.stats
    print(f"{sol.status}: objective {sol.objective:.9g}, phase1 {st.phase1_iters} pivots / "
          f"{st.phase1_columns} columns, phase2 {st.phase2_iters} pivots / {st.phase2_columns} columns, "
          f"{st.oracle_calls} oracle calls, {st.seconds:.2f}s", file=sys.stderr)
    return 0 if sol.solved else 1


# -- verify --------------------------------------------------------------

def cmd_verify(args: argparse.Namespace) -> int:
    sf = build_sequence_form(load_game(args.game))
    try:
        data = json.loads(Path(args.solution).read_text())
        sol = Solution.from_json(data, sf)
        report = check_nfcce(sf, sol, args.eps)
    except (ValueError, KeyError, GameError) as exc:
        print(f"error: solution does not match game: {exc}", file=sys.stderr)
        return 2
    print(report.dumps())
    return 0 if report.passed else 1


# -- bench ---------------------------------------------------------------

@dataclass
class BenchRecord:
    suite: str
    instance: str
    game: str
    oracle: str
    q1: float
    q2: float
    h1: float
    h2: float
    phase1_steps: float
    phase2_steps: float
    phase1_columns: float
    phase2_columns: float
    oracle_calls: float
    seconds: float
    solved: str
    objective: float
    verified: str
    max_gain: float

    @classmethod
    def header(cls) -> list[str]:
        return [f.name for f in fields(cls)]


def _bench_games(suite: str, instances: int, seed: int) -> list[tuple[str, object]]:
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; choose from {sorted(SUITES)}")
    if suite == "goofspiel":
        variants = list(GoofspielVariant)[:max(0, instances)]
        return [(f"G3{v.value.upper()}", GoofspielConfig(3, v)) for v in variants]
    depth, branching = SUITES[suite]
    return [(str(k), RandomGameConfig(depth, branching, seed + k)) for k in range(instances)]


def _has_chance(cfg) -> bool:
    # tree search has no chance support
    return isinstance(cfg, GoofspielConfig) and GoofspielVariant(cfg.variant) != GoofspielVariant.REVEALED_ORDER


def _bench_one(job: tuple[str, str, object, str, float | None]) -> BenchRecord:
    suite, instance, cfg, oracle, time_limit = job
    game = gen_goofspiel(cfg) if isinstance(cfg, GoofspielConfig) else gen_random_game(cfg)
    sf = build_sequence_form(game)
    sol = solve_game(sf, oracle, time_limit=time_limit)
    st = sol.stats
    verified, gain = "", math.nan
    if sol.solved:
        report = check_nfcce(sf, sol, 1e-6)
        verified, gain = ("yes" if report.passed else "no"), report.max_gain
    return BenchRecord(suite=suite, instance=instance, game=game.name, oracle=oracle,
                       q1=sf.n_seqs(0), q2=sf.n_seqs(1), h1=sf.n_infosets(0), h2=sf.n_infosets(1),
                       phase1_steps=st.phase1_iters, phase2_steps=st.phase2_iters,
                       phase1_columns=st.phase1_columns, phase2_columns=st.phase2_columns,
                       oracle_calls=st.oracle_calls, seconds=round(st.seconds, 3),
                       solved="yes" if sol.solved else "no", objective=sol.objective,
                       verified=verified, max_gain=gain)


def _averages(records: list[BenchRecord]) -> BenchRecord:
    def mean(name: str) -> float:
        vals = [getattr(r, name) for r in records if not math.isnan(getattr(r, name))]
        return round(sum(vals) / len(vals), 6) if vals else math.nan

    solved = sum(r.solved == "yes" for r in records)
    return BenchRecord(suite=records[0].suite, instance="average", game="", oracle=records[0].oracle,
                       q1=mean("q1"), q2=mean("q2"), h1=mean("h1"), h2=mean("h2"),
                       phase1_steps=mean("phase1_steps"), phase2_steps=mean("phase2_steps"),
                       phase1_columns=mean("phase1_columns"), phase2_columns=mean("phase2_columns"),
                       oracle_calls=mean("oracle_calls"), seconds=mean("seconds"),
                       solved=f"{solved}/{len(records)}", objective=math.nan, verified="", max_gain=math.nan)


def run_bench(suite: str, instances: int, seed: int, oracle: str, time_limit: float | None,
              threads: int = 1) -> list[BenchRecord]:
    names = ["plrc", "milrc"] if oracle == "both" else [oracle]
    if oracle not in ("plrc", "milrc", "both"):
        raise ValueError(f"unknown oracle {oracle!r}")
    jobs = [(suite, inst, cfg, name, time_limit) for inst, cfg in _bench_games(suite, instances, seed)
            for name in names if not (name == "plrc" and _has_chance(cfg))]
    if threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(_bench_one, jobs))
    else:
        records = [_bench_one(j) for j in jobs]
    records.sort(key=lambda r: (r.suite, names.index(r.oracle), _instance_key(r.instance)))
    out: list[BenchRecord] = []
    for name in names:
        group = [r for r in records if r.oracle == name]
        out.extend(group)
        if group:
            out.append(_averages(group))
    return out


def _instance_key(instance: str):
    return (0, int(instance), "") if instance.isdigit() else (1, 0, instance)


def write_bench_csv(records: list[BenchRecord], fh) -> None:
    w = csv.writer(fh, lineterminator="\r\n")
    w.writerow(BenchRecord.header())
    for r in records:
        row = asdict(r)
        w.writerow(["" if isinstance(v, float) and math.isnan(v) else v for v in row.values()])


def cmd_bench(args: argparse.Namespace) -> int:
    threads = max(1, int(os.environ.get("NFCCE_THREADS", "1")))
    instances = args.instances
    if instances is None:
        instances = 3 if args.suite == "goofspiel" else 20
    records = run_bench(args.suite, instances, args.seed, args.oracle, args.time_limit, threads)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            write_bench_csv(records, fh)
    else:
        write_bench_csv(records, sys.stdout)
    return 0


# -- parser --------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="nfcce", description="Optimal coarse correlated equilibria of extensive-form games")
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen", help="generate a game JSON file")
    gsub = g.add_subparsers(dest="kind", required=True)
    r = gsub.add_parser("random", help="random uniform-depth game")
    r.add_argument("--depth", type=int, required=True)
    r.add_argument("--branching", type=int, required=True)
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--merge-prob", type=float, default=0.5)
    r.add_argument("--players", type=int, default=2)
    r.add_argument("--out")
    gs = gsub.add_parser("goofspiel", help="Goofspiel")
    gs.add_argument("--ranks", type=int, default=3)
    gs.add_argument("--variant", choices=[v.value for v in GoofspielVariant], default="r")
    gs.add_argument("--out")
    cg = gsub.add_parser("coarse-gap", help="2x3 game separating coarse and plain correlated equilibria")
    cg.add_argument("--k", type=float, default=3.0)
    cg.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("solve", help="compute a welfare-maximizing coarse correlated equilibrium")
    s.add_argument("--game", required=True)
    s.add_argument("--oracle", choices=sorted(ORACLES), default="plrc")
    s.add_argument("--tol", type=float, default=1e-6)
    s.add_argument("--time-limit", type=float)
    s.add_argument("--trace", help="CSV log of oracle calls")
    s.add_argument("--out")
    s.set_defaults(func=cmd_solve)

    v = sub.add_parser("verify", help="check a solution for profitable deviations")
    v.add_argument("--game", required=True)
    v.add_argument("--solution", required=True)
    v.add_argument("--eps", type=float, default=1e-6)
    v.set_defaults(func=cmd_verify)

    b = sub.add_parser("bench", help="benchmark suite to CSV")
    b.add_argument("--suite", choices=sorted(SUITES), required=True)
    b.add_argument("--instances", type=int)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--oracle", choices=["plrc", "milrc", "both"], default="both")
    b.add_argument("--time-limit", type=float)
    b.add_argument("--out")
    b.set_defaults(func=cmd_bench)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (GameError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
