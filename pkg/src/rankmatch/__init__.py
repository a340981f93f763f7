"""Online absolute ranking of streamed candidates by maximum-likelihood matching."""

from .assignment import (
    AssignmentProblem,
    MatchingResult,
    brute_force_matching,
    certificate_violation,
    expand_grouped,
    solve_max_matching,
    solve_nk_naive,
    verify_certificate,
)
from .distributions import (
    BinAxis,
    CombinedScoreSpec,
    DiscreteDistribution,
    GridScoreSampler,
    JointGrid,
    MvnScoreSampler,
    OrderStatisticTable,
    RankLikelihoodModel,
    axis_for_step,
    build_rank_likelihood_model,
    combined_score_spec,
    discretize,
    fit_gaussian,
    fit_mvn,
    gaussian_distribution,
    order_statistic_table,
    quantize,
    simulated_order_statistic_table,
    uniform_distribution,
)
from .ranking import (
    CandidateRecord,
    HireEvent,
    HiringLog,
    RankingSnapshot,
    StreamConfig,
    aadr,
    hiring_rule,
    model_predictor,
    predict_ranks_delayed,
    predict_ranks_full_info,
    random_rank_baseline,
    stream_records,
    table_predictor,
    true_ranks,
)
from .sparse import (
    GroupedProblem,
    SparseGraph,
    SparseInfeasibleError,
    SparseSolveReport,
    SurvivalStats,
    bench_sparse_vs_naive,
    solve_nk_sparse,
    sparsify,
    survival_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "AssignmentProblem",
    "BinAxis",
    "CandidateRecord",
    "CombinedScoreSpec",
    "DiscreteDistribution",
    "GridScoreSampler",
    "GroupedProblem",
    "HireEvent",
    "HiringLog",
    "JointGrid",
    "MatchingResult",
    "MvnScoreSampler",
    "OrderStatisticTable",
    "RankLikelihoodModel",
    "RankingSnapshot",
    "SparseGraph",
    "SparseInfeasibleError",
    "SparseSolveReport",
    "StreamConfig",
    "SurvivalStats",
    "aadr",
    "axis_for_step",
    "bench_sparse_vs_naive",
    "brute_force_matching",
    "build_rank_likelihood_model",
    "certificate_violation",
    "combined_score_spec",
    "discretize",
    "expand_grouped",
    "fit_gaussian",
    "fit_mvn",
    "gaussian_distribution",
    "hiring_rule",
    "model_predictor",
    "order_statistic_table",
    "predict_ranks_delayed",
    "predict_ranks_full_info",
    "quantize",
    "random_rank_baseline",
    "simulated_order_statistic_table",
    "solve_max_matching",
    "solve_nk_naive",
    "solve_nk_sparse",
    "sparsify",
    "stream_records",
    "survival_experiment",
    "table_predictor",
    "true_ranks",
    "uniform_distribution",
]
