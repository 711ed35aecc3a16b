"""Multi-agent hyperparameter optimization with native classifiers and TPE/random baselines."""

from .agents import (
    Decision,
    HeuristicDecider,
    HeuristicRecommender,
    OptimizationHistory,
    Recommendation,
    RunGoals,
    TerminationReason,
    TrialRecord,
    check_termination,
    exploration_ratio,
)
from .baselines import compare, random_search, tpe_propose, tpe_search
from .data import Dataset, builtin, load_csv, stratified_folds, summarize
from .evaluation import EvaluationReport, MetricSet, compute_metrics, evaluate
from .orchestrator import EventLog, replay, run
from .search_space import Configuration, ModelFamily, SearchSpace, default_space, distance, sample, validate

__all__ = [
    "Configuration", "Dataset", "Decision", "EvaluationReport", "EventLog", "HeuristicDecider",
    "HeuristicRecommender", "MetricSet", "ModelFamily", "OptimizationHistory", "Recommendation",
    "RunGoals", "SearchSpace", "TerminationReason", "TrialRecord", "builtin", "check_termination",
    "compare", "compute_metrics", "default_space", "distance", "evaluate", "exploration_ratio",
    "load_csv", "random_search", "replay", "run", "sample", "stratified_folds", "summarize",
    "tpe_propose", "tpe_search", "validate",
]

__version__ = "0.1.0"
