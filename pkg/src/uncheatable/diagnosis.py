"""Collusion-proof diagnosis protocols.

After a commit round, participants re-run each other's tasks.  Groups whose
internal tests all match are homogeneous (all honest or all colluding) and
become super-vertices.  Tests along the edges of a resilient digraph then
expose a large all-honest strongly connected block of agreement, and proven
honest participants settle everything that is left in one final round.

Two layouts are provided: 4-cycles plus a degree-4 graph (three rounds,
tolerates 5% cheaters) and pair/quad/octet doubling plus a degree-8 graph
(five rounds, tolerates 10%).
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable

import numpy as np

from .digraph import Digraph, ResilientGraph, monte_carlo_resilient, scc_partition
from .engine import CommitRecord, GridEngine, Scenario, build_engine
from .grid_model import Match, compare


class OutOfContract(ValueError):
    """Scenario violates a protocol precondition."""


# -- resilient graph supply ------------------------------------------------------


class ResilientGraphSource:
    """Hands out a resilient ``N``-vertex digraph for each super-vertex count.

    Graphs are drawn with :func:`monte_carlo_resilient` from a generator
    seeded by ``(seed, N)`` and cached, so a source is deterministic and a
    verified graph is only searched for once per ``N``.
    """

    def __init__(self, d: int, alpha, beta, seed: int = 0, verify_limit: int = 24,
                 max_attempts: int = 200, cache: bool = True):
        self.d = d
        self.alpha = alpha
        self.beta = beta
        self.seed = seed
        self.verify_limit = verify_limit
        self.max_attempts = max_attempts
        self._cache: dict[int, ResilientGraph] | None = {} if cache else None

    def __call__(self, n: int) -> ResilientGraph:
        if self._cache is not None and n in self._cache:
            return self._cache[n]
        if n < 2:
            rg = ResilientGraph(Digraph(max(n, 1)), True, 0)
        else:
            rg = monte_carlo_resilient(
                n, self.d, self.alpha, self.beta,
                max_attempts=self.max_attempts,
                seed=np.random.default_rng([self.seed, n]),
                verify_limit=self.verify_limit,
            )
        if self._cache is not None:
            self._cache[n] = rg
        return rg


def h4_source(seed: int = 0, **kwargs) -> ResilientGraphSource:
    return ResilientGraphSource(4, Fraction(15, 16), Fraction(7, 16), seed, **kwargs)


def h8_source(seed: int = 0, **kwargs) -> ResilientGraphSource:
    return ResilientGraphSource(8, Fraction(7, 8), Fraction(7, 16), seed, **kwargs)


GraphSource = Callable[[int], ResilientGraph]


# -- agreement graph -------------------------------------------------------------


@dataclass
class AgreementGraph:
    """Super-vertices joined by labelled test edges."""

    n: int
    labels: dict[tuple[int, int], Match] = field(default_factory=dict)

    def match_graph(self) -> Digraph:
        return Digraph(max(self.n, 1), frozenset(e for e, lab in self.labels.items() if lab is Match.MATCH))


@dataclass(frozen=True)
class Classification:
    good: frozenset[int]
    unresolved: frozenset[int]
    sccs: tuple[frozenset[int], ...]


def classify_homogeneous_sccs(ag: AgreementGraph, bad_bound: int) -> Classification:
    """Mark every match-SCC with more than ``bad_bound`` super-vertices as good.

    A good tester never matches a forged answer, so no match edge leads from
    a good super-vertex to a bad one and each match-SCC is homogeneous.  An
    SCC larger than the number of bad super-vertices must be all good.
    """
    if ag.n == 0:
        return Classification(frozenset(), frozenset(), ())
    sccs = tuple(scc_partition(ag.match_graph()))
    good = frozenset(v for comp in sccs if len(comp) > bad_bound for v in comp)
    unresolved = frozenset(range(ag.n)) - good
    return Classification(good, unresolved, sccs)


# -- results ---------------------------------------------------------------------


@dataclass
class DiagnosisResult:
    protocol: str
    participant_verdicts: dict[int, str]
    task_verdicts: dict[int, str]
    rounds_used: int
    tests_issued: int
    max_replication_per_task: int
    replication_histogram: dict[int, int]
    supervertices: list[list[int]] = field(default_factory=list)
    match_sccs: list[list[int]] = field(default_factory=list)
    discarded: list[int] = field(default_factory=list)
    set_aside: list[int] = field(default_factory=list)
    classified_good: list[int] = field(default_factory=list)
    unresolved: list[int] = field(default_factory=list)
    graph_verified: bool = True
    graph_degree: int = 0
    max_tester_load: int = 0
    padded_to: int = 0
    checks: dict[str, bool] = field(default_factory=dict)
    out_of_contract: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def forged(self) -> set[int]:
        return {t for t, v in self.task_verdicts.items() if v == "forged"}

    def to_dict(self) -> dict:
        return {
            "protocol": self.protocol,
            "rounds_used": self.rounds_used,
            "tests_issued": self.tests_issued,
            "max_replication_per_task": self.max_replication_per_task,
            "replication_histogram": {str(k): v for k, v in sorted(self.replication_histogram.items())},
            "participant_verdicts": {str(k): v for k, v in sorted(self.participant_verdicts.items())},
            "task_verdicts": {str(k): v for k, v in sorted(self.task_verdicts.items())},
            "forged_tasks": sorted(self.forged),
            "supervertices": self.supervertices,
            "match_sccs": self.match_sccs,
            "discarded": self.discarded,
            "set_aside": self.set_aside,
            "classified_good": self.classified_good,
            "unresolved": self.unresolved,
            "graph_verified": self.graph_verified,
            "graph_degree": self.graph_degree,
            "max_tester_load": self.max_tester_load,
            "padded_to": self.padded_to,
            "checks": dict(sorted(self.checks.items())),
            "out_of_contract": self.out_of_contract,
            "notes": self.notes,
        }


# -- protocol machinery ----------------------------------------------------------


def commit_phase(tasks, participants, engine: GridEngine) -> CommitRecord:
    """Give participant ``participants[i]`` task ``tasks[i]`` and record the answers."""
    tasks, participants = list(tasks), list(participants)
    if len(tasks) != len(participants):
        raise ValueError("commit phase needs exactly one task per participant")
    task_ids = [t.task_id if hasattr(t, "task_id") else int(t) for t in tasks]
    pids = [p.participant_id if hasattr(p, "participant_id") else int(p) for p in participants]
    return engine.commit(dict(zip(pids, task_ids)))


@dataclass(frozen=True)
class _Layout:
    name: str
    modulus: int
    group_size: int
    bad_divisor: int
    rounds: int


THREE_ROUND = _Layout("3round", 20, 4, 16, 3)
FIVE_ROUND = _Layout("5round", 40, 8, 8, 5)


class _Supervisor:
    """Issues test rounds and keeps only what the supervisor may know."""

    def __init__(self, committed: CommitRecord, engine: GridEngine):
        self.engine = engine
        self.task_of = dict(committed.task_of)
        self.responses = dict(committed.responses)
        self.copies: Counter[int] = Counter()
        self.tests_issued = 0
        self.rounds = 0

    def pad(self, modulus: int) -> int:
        extra = -len(self.task_of) % modulus
        if extra:
            rec = self.engine.add_virtual_participants(extra)
            self.task_of.update(rec.task_of)
            self.responses.update(rec.responses)
        return len(self.task_of)

    def test_round(self, pairs: list[tuple[int, int]], phase: str) -> list[Match]:
        """Each ``(tester, subject)`` re-runs the subject's task; compare with the commitment."""
        self.rounds += 1
        replies = self.engine.run_round([(t, self.task_of[s]) for t, s in pairs], phase)
        self.tests_issued += len(pairs)
        out = []
        for (_, subject), reply in zip(pairs, replies):
            self.copies[self.task_of[subject]] += 1
            out.append(compare(reply, self.responses[subject]))
        return out


def _all_match(outcomes: list[Match]) -> bool:
    return all(o is Match.MATCH for o in outcomes)


def _cycle_grouping(sup: _Supervisor, pids: list[int], rng) -> tuple[list[list[int]], list[int]]:
    order = [pids[i] for i in rng.permutation(len(pids))]
    cycles = [order[i:i + 4] for i in range(0, len(order), 4)]
    pairs = [(c[i], c[(i + 1) % len(c)]) for c in cycles for i in range(len(c))]
    results = sup.test_round(pairs, "grouping")
    survivors, discarded = [], []
    pos = 0
    for c in cycles:
        ok = _all_match(results[pos:pos + len(c)])
        pos += len(c)
        (survivors.append(c) if ok else discarded.extend(c))
    return survivors, discarded


def _mutual_test(sup: _Supervisor, groups: list[list[int]], rng) -> tuple[list[list[int]], list[int], list[int]]:
    """Pair up equal-size groups; member i of each side tests member i of the other."""
    order = [groups[i] for i in rng.permutation(len(groups))]
    leftover = order.pop() if len(order) % 2 else []
    couples = [(order[i], order[i + 1]) for i in range(0, len(order), 2)]
    pairs = []
    for a, b in couples:
        pairs.extend((x, y) for x, y in zip(a, b))
        pairs.extend((y, x) for x, y in zip(a, b))
    results = sup.test_round(pairs, "grouping")
    merged, discarded = [], []
    pos = 0
    for a, b in couples:
        ok = _all_match(results[pos:pos + 2 * len(a)])
        pos += 2 * len(a)
        (merged.append(a + b) if ok else discarded.extend(a + b))
    return merged, discarded, list(leftover)


def _doubling_grouping(sup: _Supervisor, pids: list[int], rng) -> tuple[list[list[int]], list[int], list[int]]:
    singles = [[p] for p in pids]
    groups, discarded, set_aside = singles, [], []
    for _ in range(3):
        groups, lost, left = _mutual_test(sup, groups, rng)
        discarded.extend(lost)
        set_aside.extend(left)
    return groups, discarded, set_aside


def _run(layout: _Layout, committed: CommitRecord, engine: GridEngine,
         graph_source: GraphSource, rng) -> DiagnosisResult:
    rng = rng if isinstance(rng, np.random.Generator) else np.random.default_rng(rng)
    sup = _Supervisor(committed, engine)
    real = set(committed.task_of)
    n = sup.pad(layout.modulus)
    pids = sorted(sup.task_of)
    notes: list[str] = []

    # grouping rounds
    if layout is THREE_ROUND:
        groups, discarded = _cycle_grouping(sup, pids, rng)
        set_aside: list[int] = []
    else:
        groups, discarded, set_aside = _doubling_grouping(sup, pids, rng)

    # resilient-graph round
    big_n = len(groups)
    bad_bound = big_n // layout.bad_divisor
    ag = AgreementGraph(big_n)
    graph_verified, graph_degree = True, 0
    if big_n:
        rg = graph_source(big_n)
        graph_verified = rg.verified
        relabel = rng.permutation(big_n).tolist()
        h = rg.graph.relabel(relabel) if rg.graph.n == big_n else Digraph(big_n)
        graph_degree = h.degree if h.edges else 0
        edges = sorted(h.edges)
        pairs = [(groups[x][i], groups[y][i]) for x, y in edges for i in range(layout.group_size)]
        results = sup.test_round(pairs, "graph")
        k = layout.group_size
        for j, e in enumerate(edges):
            ag.labels[e] = Match.MATCH if _all_match(results[j * k:(j + 1) * k]) else Match.MISMATCH
    else:
        sup.test_round([], "graph")
        notes.append("no super-vertex survived grouping")
    cls = classify_homogeneous_sccs(ag, bad_bound)

    # final round: proven-good participants settle the rest
    pool = sorted(p for v in cls.good for p in groups[v])
    pool = [pool[i] for i in rng.permutation(len(pool))]
    loose = sorted(discarded + set_aside)
    representatives = {v: min(groups[v]) for v in sorted(cls.unresolved)}
    targets = loose + list(representatives.values())
    load = math.ceil(len(targets) / len(pool)) if pool and targets else 0
    if targets and not pool:
        notes.append("no proven-good testers; remaining participants left unresolved")
        outcomes: dict[int, Match] = {}
        sup.test_round([], "final")
    else:
        pairs = [(pool[j % len(pool)], t) for j, t in enumerate(targets)]
        outcomes = dict(zip(targets, sup.test_round(pairs, "final")))

    verdict: dict[int, str] = {}
    for v in cls.good:
        for p in groups[v]:
            verdict[p] = "good"
    for v, rep in representatives.items():
        label = {Match.MATCH: "good", Match.MISMATCH: "bad"}.get(outcomes.get(rep), "unresolved")
        for p in groups[v]:
            verdict[p] = label
    for p in loose:
        verdict[p] = {Match.MATCH: "good", Match.MISMATCH: "bad"}.get(outcomes.get(p), "unresolved")

    task_label = {"good": "correct", "bad": "forged", "unresolved": "unresolved"}
    participant_verdicts = {p: verdict[p] for p in sorted(real)}
    task_verdicts = {sup.task_of[p]: task_label[verdict[p]] for p in sorted(real)}
    real_tasks = {sup.task_of[p] for p in real}
    copies = [sup.copies.get(t, 0) for t in real_tasks]
    histogram = Counter(copies)

    checks = {
        "discarded_within_fifth": 5 * len(discarded) <= n,
        "proven_good_at_least_7n_20": 20 * len(pool) >= 7 * n,
        "unresolved_within_3n_20": 20 * len(cls.unresolved) <= 3 * n,
        "tester_load_one": load <= 1,
        "all_resolved": all(v != "unresolved" for v in participant_verdicts.values()),
    }
    if not graph_verified:
        notes.append(f"resilient graph on {big_n} vertices used unverified")

    return DiagnosisResult(
        protocol=layout.name,
        participant_verdicts=participant_verdicts,
        task_verdicts=task_verdicts,
        rounds_used=sup.rounds,
        tests_issued=sup.tests_issued,
        max_replication_per_task=max(copies, default=0),
        replication_histogram=dict(histogram),
        supervertices=[list(g) for g in groups],
        match_sccs=sorted(sorted(c) for c in cls.sccs),
        discarded=sorted(discarded),
        set_aside=sorted(set_aside),
        classified_good=sorted(cls.good),
        unresolved=sorted(cls.unresolved),
        graph_verified=graph_verified,
        graph_degree=graph_degree,
        max_tester_load=load,
        padded_to=n,
        checks=checks,
        out_of_contract=not (checks["tester_load_one"] and checks["all_resolved"]),
        notes=notes,
    )


def three_round_protocol(committed: CommitRecord, engine: GridEngine,
                         graph_source: GraphSource | None = None, rng=None) -> DiagnosisResult:
    """4-cycles, one degree-4 resilient-graph round, one settling round."""
    return _run(THREE_ROUND, committed, engine, graph_source or h4_source(), rng)


def five_round_protocol(committed: CommitRecord, engine: GridEngine,
                        graph_source: GraphSource | None = None, rng=None) -> DiagnosisResult:
    """Pairs, quads and octets, one degree-8 resilient-graph round, one settling round."""
    return _run(FIVE_ROUND, committed, engine, graph_source or h8_source(), rng)


PROTOCOLS = {"3round": (three_round_protocol, 20), "5round": (five_round_protocol, 10)}


def cheater_limit(protocol: str, participants: int) -> int:
    """Largest bad-participant count the protocol is guaranteed to handle."""
    return participants // PROTOCOLS[protocol][1]


# -- scoring against ground truth -----------------------------------------------


@dataclass(frozen=True)
class DiagnosisScore:
    exact_match: bool
    false_accusations: int
    missed_forgeries: int
    scc_homogeneous: bool
    bad_supervertices: int
    bad_bound_respected: bool

    def to_dict(self) -> dict:
        return {
            "exact_match": self.exact_match,
            "false_accusations": self.false_accusations,
            "missed_forgeries": self.missed_forgeries,
            "scc_homogeneous": self.scc_homogeneous,
            "bad_supervertices": self.bad_supervertices,
            "bad_bound_respected": self.bad_bound_respected,
        }


def score(result: DiagnosisResult, engine: GridEngine) -> DiagnosisScore:
    """Compare verdicts with the simulator's ground truth."""
    truth = engine.forged_tasks() & set(result.task_verdicts)
    flagged = result.forged
    false_acc = sum(1 for p, v in result.participant_verdicts.items() if v == "bad" and not engine.is_bad(p))
    homogeneous = True
    for comp in result.match_sccs:
        members = [p for v in comp for p in result.supervertices[v]]
        if len({engine.is_bad(p) for p in members}) > 1:
            homogeneous = False
    bad_sv = sum(1 for g in result.supervertices if engine.is_bad(g[0]))
    divisor = 16 if result.protocol == "3round" else 8
    return DiagnosisScore(
        exact_match=flagged == truth and all(v != "unresolved" for v in result.task_verdicts.values()),
        false_accusations=false_acc,
        missed_forgeries=len(truth - flagged),
        scc_homogeneous=homogeneous,
        bad_supervertices=bad_sv,
        bad_bound_respected=bad_sv <= len(result.supervertices) // divisor,
    )


def run_scenario(protocol: str, scenario: Scenario, graph_source: GraphSource | None = None,
                 allow_out_of_contract: bool = False) -> tuple[DiagnosisResult, DiagnosisScore]:
    """Build the population, commit, diagnose and score one scenario."""
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}; choose from {sorted(PROTOCOLS)}")
    bad = scenario.cheaters + scenario.traitors
    limit = cheater_limit(protocol, scenario.participants)
    problems = []
    if bad > limit:
        problems.append(f"{bad} bad participants exceeds the limit of {limit} for n={scenario.participants}")
    if scenario.traitors:
        problems.append("traitors are not admitted to diagnosis runs")
    if problems and not allow_out_of_contract:
        raise OutOfContract("; ".join(problems))

    engine = build_engine(scenario)
    committed = engine.commit({p: p for p in range(scenario.participants)})
    run = PROTOCOLS[protocol][0]
    result = run(committed, engine, graph_source, np.random.default_rng([scenario.seed, 0xD1A6]))
    if problems:
        result.out_of_contract = True
        result.notes.extend(problems)
    return result, score(result, engine)


def report_json(result: DiagnosisResult, sc: DiagnosisScore, scenario: Scenario | None = None) -> str:
    doc = {"result": result.to_dict(), "ground_truth": sc.to_dict()}
    if scenario is not None:
        doc["scenario"] = {
            "participants": scenario.participants,
            "cheaters": scenario.cheaters,
            "traitors": scenario.traitors,
            "coalitions": scenario.coalitions,
            "coalition_sizes": scenario.coalition_sizes,
            "strategy": scenario.strategy,
            "strategy_params": scenario.strategy_params,
            "seed": scenario.seed,
        }
    return json.dumps(doc, sort_keys=True, indent=2)
