"""Fair happiness maximizing sets: exact 2D and bicriteria greedy solvers."""

from .baselines import BaselineKind, allocate_group_sizes, f_greedy, greedy_unfair, per_group_adapt
from .bigreedy import AdaptiveConfig, GreedyConfig, bigreedy, bigreedy_plus, effective_k, mr_greedy
from .dataset import (
    DataError,
    Dataset,
    FairnessSpec,
    InfeasibleSpecError,
    Point,
    Solution,
    balanced_bounds,
    err,
    exact_bounds,
    free_bounds,
    generate_anticorrelated,
    group_skyline,
    is_independent,
    load_csv,
    normalize,
    proportional_bounds,
)
from .harness import RunConfig, run, sweep
from .intcov import build_candidates, dynprog_cover, interval_for, intcov, upper_envelope
from .report import RunReport, emit
from .utility import (
    UtilityNet,
    UtilityVector,
    hr,
    marginal_gain,
    mhr_exact_2d,
    mhr_on_net,
    mhr_truncated,
    net_size_for,
    sample_net,
    score,
    verify_net_coverage,
)

__version__ = "0.1.0"
