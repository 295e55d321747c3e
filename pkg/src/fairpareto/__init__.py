"""Multi-objective, multi-fidelity black-box search for jointly accurate
and fair face-identification models.

Public surface: search spaces (`space`), fairness metrics over embeddings
(`metrics`), Pareto statistics (`pareto`), ParEGO scalarization
(`scalarize`), the ASHA scheduler (`asha`), the tree-ensemble surrogate
(`surrogate`), objective backends (`backends`), the search loop
(`search`), and the run log (`runlog`).
"""
from fairpareto.asha import AshaScheduler, Job, ladder
from fairpareto.backends import (BackendError, BackendFailure, BuiltinBackend,
                                 EmbeddingBackend, ProtocolError,
                                 WorkerBackend, WorkerMessage, parse_backend,
                                 zdt1_mf)
from fairpareto.metrics import (EmbeddingSet, FairnessValue,
                                IdentificationReport, METRICS, MetricError,
                                compute_ranks, fairness_metric,
                                multi_group_metric, pearson)
from fairpareto.pareto import (AggregatedPoint, ParetoError, aggregate_seeds,
                               dominates, hypervolume2d, non_dominated_mask,
                               pareto_front)
from fairpareto.records import (STATUS_FAILED, STATUS_REPORTED,
                                STATUS_RUNNING, TrialRecord,
                                highest_fidelity_per_config)
from fairpareto.runlog import RunLog, RunLogError, load_records
from fairpareto.scalarize import (NormalizationState, parego, sample_weights,
                                  scalarize_objectives)
from fairpareto.search import SearchBudget, SearchResult, run_search
from fairpareto.space import (BLOCK_OPS, Configuration, SearchSpace,
                              SpaceError, config_key, get_space, load_space)
from fairpareto.surrogate import (CostModel, expected_improvement, fit,
                                  suggest)

__version__ = "0.1.0"

__all__ = [
    "AggregatedPoint", "AshaScheduler", "BLOCK_OPS", "BackendError",
    "BackendFailure", "BuiltinBackend", "Configuration", "CostModel",
    "EmbeddingBackend", "EmbeddingSet", "FairnessValue",
    "IdentificationReport", "Job", "METRICS", "MetricError",
    "NormalizationState", "ParetoError", "ProtocolError", "RunLog",
    "RunLogError", "STATUS_FAILED", "STATUS_REPORTED", "STATUS_RUNNING",
    "SearchBudget", "SearchResult", "SearchSpace", "SpaceError",
    "TrialRecord", "WorkerBackend", "WorkerMessage", "aggregate_seeds",
    "compute_ranks", "config_key", "dominates", "expected_improvement",
    "fairness_metric", "fit", "get_space", "highest_fidelity_per_config",
    "hypervolume2d", "ladder", "load_records", "load_space",
    "multi_group_metric", "non_dominated_mask", "parego", "pareto_front",
    "parse_backend", "pearson", "run_search", "sample_weights",
    "scalarize_objectives", "suggest", "zdt1_mf",
]
