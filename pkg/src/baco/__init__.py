"""Bivalent ant colony optimization with exact Markov-chain runtime analysis."""
from .engine import (
    DEFAULT_MAX_ITERS,
    PheromoneState,
    Problem,
    RunRecord,
    chain_walk,
    fpp,
    leading_ones,
    one_max,
    permutation_walk,
    run_baco,
    update_pheromones,
)
from .markov import (
    AnalyticResult,
    MarkovModel,
    TransitionMatrix,
    expected_time_explicit,
    expected_time_matrix,
    lo_expected_time_closed,
    onemax_upper_bound,
    optimal_ratio,
    sort_bounds,
    sort_expected_time_closed,
    truncated_expected_time,
)
from .ratio import RatioExpression

__version__ = "0.1.0"
