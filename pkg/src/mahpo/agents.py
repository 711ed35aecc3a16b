"""Agent messages, the shared trial history, and deterministic heuristic agents."""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Optional, Protocol, Sequence

import numpy as np

from .data import DatasetSummary
from .evaluation import EvaluationReport
from .search_space import (
    FAMILY_ORDER,
    Categorical,
    Configuration,
    ModelFamily,
    default_space,
    sample,
    validate,
)


class AgentError(RuntimeError):
    """An agent could not produce a usable message."""


class TerminationReason(str, enum.Enum):
    TARGET_REACHED = "target_reached"
    MAX_ITERATIONS = "max_iterations"
    EXPLORATION_SATISFIED = "exploration_satisfied"


class Verdict(str, enum.Enum):
    ACCEPT = "accept"
    REJECT = "reject"


class NextAction(str, enum.Enum):
    REFINE = "refine"
    EXPLORE = "explore"
    TERMINATE = "terminate"


@dataclass(frozen=True)
class Recommendation:
    candidates: tuple
    reasoning: str
    explore_flags: tuple

    def __post_init__(self):
        object.__setattr__(self, "candidates", tuple(self.candidates))
        object.__setattr__(self, "explore_flags", tuple(bool(f) for f in self.explore_flags))
        if not 1 <= len(self.candidates) <= 3:
            raise ValueError("a recommendation carries 1 to 3 candidates")
        if len(self.explore_flags) != len(self.candidates):
            raise ValueError("one explore flag per candidate")
        for cand in self.candidates:
            problems = validate(default_space(cand.family), cand)
            if problems:
                raise ValueError("invalid candidate: " + "; ".join(problems))

    def to_json(self):
        return {"candidates": [c.to_json() for c in self.candidates],
                "explore_flags": list(self.explore_flags),
                "reasoning": self.reasoning}


@dataclass(frozen=True)
class Decision:
    verdict: Verdict
    next_action: NextAction
    guidance: str = ""
    reason: Optional[TerminationReason] = None

    def __post_init__(self):
        object.__setattr__(self, "verdict", Verdict(self.verdict))
        object.__setattr__(self, "next_action", NextAction(self.next_action))
        if self.reason is not None:
            object.__setattr__(self, "reason", TerminationReason(self.reason))
        if (self.next_action is NextAction.TERMINATE) != (self.reason is not None):
            raise ValueError("a termination reason is required exactly when next_action is terminate")

    @property
    def terminates(self) -> bool:
        return self.next_action is NextAction.TERMINATE

    def to_json(self):
        return {"verdict": self.verdict.value, "next_action": self.next_action.value,
                "reason": self.reason.value if self.reason else None, "guidance": self.guidance}

    @classmethod
    def from_json(cls, obj):
        return cls(obj["verdict"], obj["next_action"], obj.get("guidance", ""), obj.get("reason"))


@dataclass(frozen=True)
class RunGoals:
    target_accuracy: float = 0.98
    max_iterations: int = 10
    exploration_ratio_threshold: float = 0.5
    min_trials: int = 5
    patience: int = 3

    def __post_init__(self):
        if not 0 < self.target_accuracy <= 1:
            raise ValueError("target_accuracy must lie in (0, 1]")
        if self.max_iterations < 1 or self.min_trials < 1 or self.patience < 1:
            raise ValueError("max_iterations, min_trials and patience must be >= 1")
        if not 0 <= self.exploration_ratio_threshold <= 1:
            raise ValueError("exploration_ratio_threshold must lie in [0, 1]")
        if self.min_trials > self.max_iterations:
            raise ValueError("min_trials cannot exceed max_iterations")

    def to_json(self):
        return {"target_accuracy": self.target_accuracy, "max_iterations": self.max_iterations,
                "exploration_ratio_threshold": self.exploration_ratio_threshold,
                "min_trials": self.min_trials, "patience": self.patience}

    @classmethod
    def from_json(cls, obj):
        return cls(**obj)


@dataclass(frozen=True)
class TrialRecord:
    trial_id: int
    config: Configuration
    report: EvaluationReport
    decision: Decision
    explore_flag: bool
    started_at: float
    ended_at: float


@dataclass(frozen=True)
class OptimizationHistory:
    """Append-only trial log; ``append`` returns a new history."""

    records: tuple = ()
    incumbent: Optional[int] = None

    def __len__(self):
        return len(self.records)

    def __iter__(self):
        return iter(self.records)

    def __getitem__(self, i):
        return self.records[i]

    @property
    def best(self) -> Optional[TrialRecord]:
        return None if self.incumbent is None else self.records[self.incumbent]

    @property
    def best_accuracy(self) -> Optional[float]:
        best = self.best
        return None if best is None else best.report.mean_accuracy

    def append(self, record: TrialRecord) -> "OptimizationHistory":
        if record.trial_id != len(self.records):
            raise ValueError(f"trial ids must be contiguous: expected {len(self.records)}, got {record.trial_id}")
        incumbent = self.incumbent
        if record.report.succeeded and (incumbent is None
                                        or record.report.mean_accuracy > self.records[incumbent].report.mean_accuracy):
            incumbent = record.trial_id
        return OptimizationHistory(self.records + (record,), incumbent)

    def improvement_ids(self) -> list[int]:
        """Trials that raised the incumbent's accuracy when they were appended."""
        ids, best = [], None
        for rec in self.records:
            if rec.report.succeeded and (best is None or rec.report.mean_accuracy > best):
                best = rec.report.mean_accuracy
                ids.append(rec.trial_id)
        return ids

    def stagnant(self, patience: int) -> bool:
        """True when none of the last ``patience`` trials improved the incumbent."""
        n = len(self.records)
        if n < patience:
            return False
        return all(i < n - patience for i in self.improvement_ids())


def exploration_ratio(history: OptimizationHistory) -> float:
    if not len(history):
        return 0.0
    return sum(1 for r in history if r.explore_flag) / len(history)


def check_termination(history: OptimizationHistory, goals: RunGoals) -> Optional[TerminationReason]:
    """First satisfied criterion in priority order target > budget > exploration."""
    best = history.best_accuracy
    if best is not None and best >= goals.target_accuracy:
        return TerminationReason.TARGET_REACHED
    if len(history) >= goals.max_iterations:
        return TerminationReason.MAX_ITERATIONS
    if (len(history) >= goals.min_trials
            and exploration_ratio(history) >= goals.exploration_ratio_threshold
            and history.stagnant(goals.patience)):
        return TerminationReason.EXPLORATION_SATISFIED
    return None


def provisional_record(history: OptimizationHistory, report: EvaluationReport, explore_flag: bool) -> TrialRecord:
    """Placeholder record for the trial under decision, used to evaluate goals before it is final."""
    placeholder = Decision(Verdict.REJECT, NextAction.REFINE)
    return TrialRecord(len(history), report.config, report, placeholder, explore_flag, 0.0, 0.0)


class RecommenderAgent(Protocol):
    def recommend(self, summary: DatasetSummary, history: OptimizationHistory, guidance: str,
                  retry_feedback: Optional[str] = None) -> Recommendation: ...


class DecisionAgent(Protocol):
    def decide(self, history: OptimizationHistory, latest: EvaluationReport, goals: RunGoals,
               latest_explore: bool = True, retry_feedback: Optional[str] = None) -> Decision: ...


# -- heuristic agents --------------------------------------------------------

def _least_recently_tried(history: OptimizationHistory, families: Sequence[ModelFamily]) -> ModelFamily:
    last_seen = {f: -1 for f in families}
    for rec in history:
        if rec.config.family in last_seen:
            last_seen[rec.config.family] = rec.trial_id
    # min() keeps the first family in fixed order on ties
    return min(families, key=lambda f: last_seen[f])


def perturb(config: Configuration, rng: np.random.Generator, sigma: float = 0.1,
            resample_prob: float = 0.1) -> Configuration:
    """Gaussian step in normalized coordinates, clipped; categoricals resampled with ``resample_prob``."""
    space = default_space(config.family)
    values = {}
    for name, dom in space.params.items():
        if isinstance(dom, Categorical):
            values[name] = dom.sample(rng) if rng.random() < resample_prob else config.values[name]
        else:
            u = dom.normalize(config.values[name]) + rng.normal(0.0, sigma)
            values[name] = dom.denormalize(u)
    return Configuration(config.family, values)


def heuristic_recommend(summary: DatasetSummary, history: OptimizationHistory, guidance: str,
                        rng: np.random.Generator, families: Sequence[ModelFamily] = FAMILY_ORDER) -> Recommendation:
    families = [ModelFamily(f) for f in families]
    n = len(history)
    if n < 2:
        family = families[n % len(families)]
        cand = sample(default_space(family), rng)
        return Recommendation((cand,), f"warm-start: sample {family.value} (trial {n} of 2 fixed-order openers)", (True,))
    incumbent = history.best
    if "explore" in guidance.lower().split() or incumbent is None:
        family = _least_recently_tried(history, families)
        why = "no incumbent yet" if incumbent is None else "guidance requested exploration"
        cand = sample(default_space(family), rng)
        return Recommendation((cand,), f"explore: fresh {family.value} sample, least recently tried ({why})", (True,))
    cand = perturb(incumbent.config, rng)
    return Recommendation(
        (cand,),
        f"exploit: perturb incumbent trial {incumbent.trial_id} (accuracy {incumbent.report.mean_accuracy:.4f}) "
        "with sigma 0.1 in normalized space",
        (False,),
    )


def heuristic_decide(history: OptimizationHistory, latest: EvaluationReport, goals: RunGoals,
                     latest_explore: bool = True) -> Decision:
    prior_best = history.best_accuracy
    improved = latest.succeeded and (prior_best is None or latest.mean_accuracy > prior_best)
    verdict = Verdict.ACCEPT if improved else Verdict.REJECT
    after = history.append(provisional_record(history, latest, latest_explore))
    reason = check_termination(after, goals)
    if reason is not None:
        return Decision(verdict, NextAction.TERMINATE, f"stop: {reason.value}", reason)
    if after.stagnant(goals.patience):
        return Decision(verdict, NextAction.EXPLORE, "explore")
    return Decision(verdict, NextAction.REFINE, "refine incumbent")


class HeuristicRecommender:
    """Rule-based recommender; its stream for trial ``i`` is ``default_rng([seed, i, retry])``."""

    def __init__(self, seed: int = 0, families: Sequence = FAMILY_ORDER):
        self.seed = seed
        self.families = tuple(ModelFamily(f) for f in families)

    def recommend(self, summary, history, guidance, retry_feedback=None):
        rng = np.random.default_rng([self.seed, len(history), 0 if retry_feedback is None else 1])
        return heuristic_recommend(summary, history, guidance, rng, self.families)


class HeuristicDecider:
    def decide(self, history, latest, goals, latest_explore=True, retry_feedback=None):
        return heuristic_decide(history, latest, goals, latest_explore)
