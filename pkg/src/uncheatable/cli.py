"""Command line entry point.

::

    uncheatable graph gen --n 16 --d 4 --seed 1 > h4.txt
    uncheatable graph verify --alpha 15/16 --beta 7/16 h4.txt
    uncheatable graph exponent --gamma 7/15 --lambda 15/16 --d 4
    uncheatable diagnose 3round --scenario scen.yaml --seed 3
    uncheatable econ threshold --B 1 --U 2 --C 2
    uncheatable simulate delayed --config sim.yaml --seeds 0:5 --csv

Every command prints JSON (one document) unless ``--csv`` is given.
Exit codes: 0 success, 1 failed verification or inexact diagnosis,
2 invalid input or refused precondition.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from datetime import datetime, timezone
from fractions import Fraction

from . import digraph, economics, replication
from .config import ConfigError, load_config
from .diagnosis import OutOfContract, ResilientGraphSource, run_scenario
from .digraph import ResilienceNotFound

EXIT_FAIL = 1
EXIT_USAGE = 2


def fraction(text: str) -> Fraction:
    """Accept ``0.5``, ``1/2`` or ``7/16``."""
    try:
        return digraph.as_fraction(text)
    except (ValueError, ZeroDivisionError):
        raise argparse.ArgumentTypeError(f"not a fraction: {text!r}") from None


def seed_range(text: str) -> list[int]:
    """``5`` -> [5]; ``0:4`` -> [0, 1, 2, 3]."""
    try:
        if ":" in text:
            lo, hi = text.split(":", 1)
            return list(range(int(lo), int(hi)))
        return [int(text)]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a seed or seed range: {text!r}") from None


def _emit(doc: dict, args) -> None:
    if not getattr(args, "no_timestamp", False):
        doc = {**doc, "generated_at": datetime.now(timezone.utc).isoformat(timespec="seconds")}
    print(json.dumps(doc, sort_keys=True, indent=2, default=str))


# -- graph -----------------------------------------------------------------------


def cmd_graph(args) -> int:
    if args.graph_cmd == "gen":
        g = digraph.random_hamiltonian_union(args.n, args.d, args.seed)
        text = g.to_edgelist()
        if args.out:
            with open(args.out, "w") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return 0

    if args.graph_cmd == "verify":
        source = open(args.file) if args.file and args.file != "-" else sys.stdin
        with source:
            g = digraph.Digraph.from_edgelist(source)
        ok = digraph.is_resilient(g, args.alpha, args.beta)
        _emit({
            "command": "graph verify",
            "n": g.n,
            "edges": len(g.edges),
            "degree": g.degree if g.edges else 0,
            "alpha": str(args.alpha),
            "beta": str(args.beta),
            "subset_size": digraph.ceil_part(args.alpha, g.n),
            "scc_threshold": digraph.ceil_part(args.beta, g.n),
            "resilient": ok,
        }, args)
        return 0 if ok else EXIT_FAIL

    c = digraph.union_failure_exponent(args.gamma, args.lam, args.d)
    _emit({
        "command": "graph exponent",
        "gamma": str(args.gamma),
        "lambda": str(args.lam),
        "d": args.d,
        "exponent": c,
        "bound_vacuous": c >= 0,
    }, args)
    return 0


# -- diagnose --------------------------------------------------------------------


def cmd_diagnose(args) -> int:
    cfg = load_config(args.scenario)
    scenario = cfg.build_scenario(args.seed)
    protocol = args.protocol
    d, alpha, beta = (4, Fraction(15, 16), Fraction(7, 16)) if protocol == "3round" else (8, Fraction(7, 8), Fraction(7, 16))
    graph_seed = cfg.graph.seed if cfg.graph.seed is not None else scenario.seed
    source = ResilientGraphSource(d, alpha, beta, graph_seed, cfg.graph.verify_limit, cfg.graph.max_attempts)
    try:
        result, sc = run_scenario(protocol, scenario, source, args.allow_out_of_contract)
    except OutOfContract as exc:
        print(f"refused: {exc} (pass --allow-out-of-contract to run anyway)", file=sys.stderr)
        return EXIT_USAGE
    except ResilienceNotFound as exc:
        print(f"aborted: {exc}", file=sys.stderr)
        return EXIT_FAIL
    summary = {
        "exact_match": "yes" if sc.exact_match else "no",
        "false_accusations": sc.false_accusations,
        "missed_forgeries": sc.missed_forgeries,
        "scc_homogeneous": sc.scc_homogeneous,
    }
    _emit({
        "command": f"diagnose {protocol}",
        "scenario": {
            "participants": scenario.participants,
            "cheaters": scenario.cheaters,
            "coalitions": scenario.coalitions,
            "coalition_sizes": scenario.coalition_sizes,
            "strategy": scenario.strategy,
            "strategy_params": scenario.strategy_params,
            "seed": scenario.seed,
        },
        "result": result.to_dict(),
        "ground_truth": summary,
    }, args)
    if not sc.exact_match and not result.out_of_contract:
        return EXIT_FAIL
    return 0


# -- econ ------------------------------------------------------------------------


def cmd_econ(args) -> int:
    if args.econ_cmd == "deter":
        value = economics.cooperation_preferred(float(args.B), float(args.U), float(args.C), float(args.P))
        doc = {"command": "econ deter", "cooperation_preferred": value}
    elif args.econ_cmd == "threshold":
        try:
            value = economics.deterrence_threshold(float(args.B), float(args.U), float(args.C))
        except economics.Undeterrable as exc:
            doc = {"command": "econ threshold", "threshold": None, "undeterrable": True, "reason": str(exc)}
        else:
            doc = {"command": "econ threshold", "threshold": value, "undeterrable": False}
    elif args.econ_cmd == "sybil":
        value = economics.sybil_replication_prob(args.t, args.P, args.G, args.ramp)
        doc = {"command": "econ sybil", "replication_prob": float(value)}
    else:
        e = load_config(args.config).econ
        for key in ("B", "C", "L", "S", "G", "tolerance"):
            override = getattr(args, key)
            if override is not None:
                setattr(e, key, float(override))
        dist = economics.UtilityDistribution.from_samples([tuple(p) for p in e.cdf])
        r = economics.default_replication(e.G)
        point = economics.solve_balance(e.L, e.S, e.B, e.C, dist, r, e.tolerance)
        doc = {
            "command": "econ balance",
            "params": {"B": e.B, "C": e.C, "L": e.L, "S": e.S, "G": e.G},
            "balance": None if point is None else {
                "P": point.P, "residual": point.residual, "step_boundary": point.step_boundary,
            },
        }
    _emit(doc, args)
    return 0


# -- simulate --------------------------------------------------------------------


def _simulate_one(mode: str, sim, seed: int) -> dict:
    if mode == "same_round":
        m = replication.run_same_round_duplication(sim.population, sim.coalition_fraction, sim.n_tasks, seed)
    elif mode == "delayed":
        m = replication.run_delayed_duplication(
            sim.population, sim.coalition_fraction, sim.replication_prob, sim.n_tasks, seed,
            cheat_prob=sim.cheat_prob)
    else:
        m, trace = replication.run_sybil_ramp(
            sim.population, sim.coalition_fraction, sim.P, sim.G, sim.n_tasks, seed, sim.ramp,
            sim.initial_completed, sim.fresh_identity_completed, keep_traces=False)
        m.extra["caught_within_10"] = trace.caught_within(10)
    return m.to_dict()


def _aggregate(records: list[dict]) -> dict:
    forged = sum(r["tasks_forged"] for r in records)
    caught = sum(r["forged_caught"] for r in records)
    total = sum(r["tasks_total"] for r in records)
    undetected = sum(r["forged_undetected"] for r in records)
    rate = replication.binomial_interval(caught, forged)
    leak = replication.binomial_interval(undetected, total)
    return {
        "runs": len(records),
        "tasks_total": total,
        "tasks_forged": forged,
        "catch_rate": None if not forged else {"mean": rate[0], "lo_3sigma": rate[1], "hi_3sigma": rate[2]},
        "undetected_fraction": None if not total else {"mean": leak[0], "lo_3sigma": leak[1], "hi_3sigma": leak[2]},
        "false_accusations": sum(r["false_accusations"] for r in records),
    }


def cmd_simulate(args) -> int:
    cfg = load_config(args.config)
    sim = cfg.simulation
    for key in ("population", "n_tasks"):
        if getattr(args, key) is not None:
            setattr(sim, key, getattr(args, key))
    for key in ("coalition_fraction", "replication_prob"):
        if getattr(args, key) is not None:
            setattr(sim, key, float(getattr(args, key)))
    seeds = args.seeds if args.seeds is not None else [cfg.seed]
    try:
        records = [_simulate_one(args.mode, sim, s) for s in seeds]
    except ValueError as exc:
        print(f"invalid simulation config: {exc}", file=sys.stderr)
        return EXIT_USAGE
    if args.csv:
        buf = io.StringIO()
        columns = list(records[0])
        writer = csv.DictWriter(buf, fieldnames=columns, lineterminator="\n")
        writer.writeheader()
        writer.writerows(records)
        sys.stdout.write(buf.getvalue())
        return 0
    _emit({"command": f"simulate {args.mode}", "records": records, "aggregate": _aggregate(records)}, args)
    return 0


# -- parser ----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="uncheatable", description="Cheater detection for pipelined grid computations.")
    parser.add_argument("--no-timestamp", action="store_true", help="omit the generated_at field")
    # leaf commands accept the flag too, after the subcommand
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--no-timestamp", action="store_true", default=argparse.SUPPRESS)
    sub = parser.add_subparsers(dest="command", required=True)

    graph = sub.add_parser("graph", help="resilient digraph tools")
    gsub = graph.add_subparsers(dest="graph_cmd", required=True)
    gen = gsub.add_parser("gen", parents=[common], help="write a union of random Hamiltonian cycles as an edge list")
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--d", type=int, required=True)
    gen.add_argument("--seed", type=int, default=0)
    gen.add_argument("--out")
    ver = gsub.add_parser("verify", parents=[common], help="exhaustively check (alpha, beta)-resilience")
    ver.add_argument("file", nargs="?", help="edge list file (default: stdin)")
    ver.add_argument("--alpha", type=fraction, required=True)
    ver.add_argument("--beta", type=fraction, required=True)
    exp = gsub.add_parser("exponent", parents=[common], help="failure-bound exponent for a union of d cycles")
    exp.add_argument("--gamma", type=fraction, required=True)
    exp.add_argument("--lambda", dest="lam", type=fraction, required=True)
    exp.add_argument("--d", type=int, required=True)

    diag = sub.add_parser("diagnose", parents=[common], help="run a diagnosis protocol on a scenario")
    diag.add_argument("protocol", choices=["3round", "5round"])
    diag.add_argument("--scenario", required=True, help="YAML/JSON scenario or experiment config")
    diag.add_argument("--seed", type=int)
    diag.add_argument("--allow-out-of-contract", action="store_true")

    econ = sub.add_parser("econ", help="deterrence economics")
    esub = econ.add_subparsers(dest="econ_cmd", required=True)
    deter = esub.add_parser("deter", parents=[common], help="does a rational user prefer to cooperate?")
    for name in ("B", "U", "C", "P"):
        deter.add_argument(f"--{name}", type=fraction, required=True)
    thr = esub.add_parser("threshold", parents=[common], help="catch probability that deters cheating")
    for name in ("B", "U", "C"):
        thr.add_argument(f"--{name}", type=fraction, required=True)
    syb = esub.add_parser("sybil", parents=[common], help="per-user replication probability")
    syb.add_argument("--t", type=int, required=True)
    syb.add_argument("--P", type=fraction, required=True)
    syb.add_argument("--G", type=fraction, required=True)
    syb.add_argument("--ramp", type=int, default=20)
    bal = esub.add_parser("balance", parents=[common], help="solve the supervisor's balance equation for P")
    bal.add_argument("--config")
    for name in ("B", "C", "L", "S", "G", "tolerance"):
        bal.add_argument(f"--{name}", type=fraction)

    sim = sub.add_parser("simulate", parents=[common], help="replication experiments")
    sim.add_argument("mode", choices=["same_round", "delayed", "sybil"])
    sim.add_argument("--config")
    sim.add_argument("--seeds", type=seed_range, help="seed or half-open range lo:hi")
    sim.add_argument("--population", type=int)
    sim.add_argument("--n-tasks", dest="n_tasks", type=int)
    sim.add_argument("--coalition-fraction", type=fraction)
    sim.add_argument("--replication-prob", type=fraction)
    sim.add_argument("--csv", action="store_true")
    return parser


HANDLERS = {"graph": cmd_graph, "diagnose": cmd_diagnose, "econ": cmd_econ, "simulate": cmd_simulate}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return HANDLERS[args.command](args)
    except (ConfigError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
