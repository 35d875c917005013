"""Cheater detection for pipelined grid computations."""

from .digraph import (
    Digraph,
    ResilienceNotFound,
    cut_condition_holds,
    is_resilient,
    monte_carlo_resilient,
    random_hamiltonian_union,
    scc_partition,
    union_failure_exponent,
)
from .diagnosis import (
    DiagnosisResult,
    five_round_protocol,
    run_scenario,
    three_round_protocol,
)
from .engine import GridEngine, Scenario, build_engine

__version__ = "0.1.0"
