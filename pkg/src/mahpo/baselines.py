"""Random search and TPE baselines over the same evaluation stack, plus the comparison harness.

TPE here maximizes: the "good" set is the top ``gamma`` fraction of
observations by objective, and proposals maximize l(x) / g(x) where l is the
good-set density and g the rest.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.special import ndtr, ndtri

from .agents import (
    Decision,
    HeuristicDecider,
    HeuristicRecommender,
    NextAction,
    OptimizationHistory,
    RunGoals,
    TrialRecord,
    Verdict,
)
from .data import Dataset
from .evaluation import EvaluationReport, evaluate
from .search_space import (
    FAMILY_ORDER,
    Categorical,
    Configuration,
    Continuous,
    Integer,
    SearchSpace,
    default_space,
    sample,
)


# -- Parzen estimators -------------------------------------------------------

def _numeric_bounds(dom):
    """Continuous support in the estimator's working coordinates."""
    if isinstance(dom, Integer):
        return dom.low - 0.5, dom.high + 0.5
    if dom.log:
        return math.log10(dom.low), math.log10(dom.high)
    return float(dom.low), float(dom.high)


def _to_working(dom, value) -> float:
    if isinstance(dom, Continuous) and dom.log:
        return math.log10(value)
    return float(value)


def _from_working(dom, w: float):
    lo, hi = _numeric_bounds(dom)
    w = min(max(w, lo), hi)
    if isinstance(dom, Integer):
        return int(min(max(round(w), dom.low), dom.high))
    if dom.log:
        return min(max(10.0 ** w, dom.low), dom.high)
    return min(max(w, dom.low), dom.high)


@dataclass(frozen=True)
class NumericParzen:
    """Equal-weight mixture of truncated Gaussians plus one uniform prior component."""

    low: float
    high: float
    mus: np.ndarray
    sigmas: np.ndarray
    integer: bool = False

    @classmethod
    def fit(cls, dom, values) -> "NumericParzen":
        low, high = _numeric_bounds(dom)
        mus = np.array(sorted(_to_working(dom, v) for v in values), dtype=float)
        n = mus.size
        if n:
            padded = np.concatenate([[low], mus, [high]])
            gaps = np.maximum(padded[1:-1] - padded[:-2], padded[2:] - padded[1:-1])
            floor = (high - low) / min(100, n)
            sigmas = np.maximum(gaps, floor)
        else:
            sigmas = np.empty(0)
        return cls(low, high, mus, sigmas, isinstance(dom, Integer))

    @property
    def n_components(self) -> int:
        return self.mus.size + 1

    def _mass(self):
        return ndtr((self.high - self.mus) / self.sigmas) - ndtr((self.low - self.mus) / self.sigmas)

    def density(self, w: float) -> float:
        """Density at working value ``w``; for integers the probability of its rounding cell."""
        width = self.high - self.low
        if self.integer:
            a, b = max(w - 0.5, self.low), min(w + 0.5, self.high)
            prior = (b - a) / width
            if self.mus.size:
                cdf_b = ndtr((b - self.mus) / self.sigmas)
                cdf_a = ndtr((a - self.mus) / self.sigmas)
                kern = ((cdf_b - cdf_a) / self._mass()).sum()
            else:
                kern = 0.0
        else:
            prior = 1.0 / width
            if self.mus.size:
                z = (w - self.mus) / self.sigmas
                pdf = np.exp(-0.5 * z * z) / (math.sqrt(2 * math.pi) * self.sigmas)
                kern = (pdf / self._mass()).sum()
            else:
                kern = 0.0
        return float((kern + prior) / self.n_components)

    def draw(self, rng: np.random.Generator) -> float:
        comp = int(rng.integers(self.n_components))
        if comp == self.mus.size:
            return float(rng.uniform(self.low, self.high))
        mu, sigma = self.mus[comp], self.sigmas[comp]
        # inverse-CDF draw from the truncated normal
        lo_c, hi_c = ndtr((self.low - mu) / sigma), ndtr((self.high - mu) / sigma)
        u = rng.uniform(lo_c, hi_c)
        w = mu + sigma * float(ndtri(u))
        return min(max(w, self.low), self.high)


@dataclass(frozen=True)
class CategoricalParzen:
    choices: tuple
    probs: np.ndarray

    @classmethod
    def fit(cls, dom: Categorical, values) -> "CategoricalParzen":
        counts = np.ones(len(dom.choices))
        for v in values:
            counts[dom.choices.index(v)] += 1
        return cls(dom.choices, counts / counts.sum())

    def density(self, value) -> float:
        return float(self.probs[self.choices.index(value)])

    def draw(self, rng: np.random.Generator):
        return self.choices[int(rng.choice(len(self.choices), p=self.probs))]


def fit_parzen(dom, values):
    if isinstance(dom, Categorical):
        return CategoricalParzen.fit(dom, values)
    return NumericParzen.fit(dom, values)


@dataclass(frozen=True)
class ParzenModel:
    """Product of per-parameter estimators over one search space."""

    space: SearchSpace
    dims: dict

    @classmethod
    def fit(cls, space: SearchSpace, configs: Sequence[Configuration]) -> "ParzenModel":
        return cls(space, {name: fit_parzen(dom, [c.values[name] for c in configs])
                           for name, dom in space.params.items()})

    def log_density(self, config: Configuration) -> float:
        total = 0.0
        for name, dom in self.space.params.items():
            est = self.dims[name]
            v = config.values[name]
            total += math.log(est.density(v if isinstance(dom, Categorical) else _to_working(dom, v)))
        return total

    def draw(self, rng: np.random.Generator) -> Configuration:
        values = {}
        for name, dom in self.space.params.items():
            est = self.dims[name]
            raw = est.draw(rng)
            values[name] = raw if isinstance(dom, Categorical) else _from_working(dom, raw)
        return Configuration(self.space.family, values)


# -- TPE ---------------------------------------------------------------------

@dataclass
class TPEState:
    gamma: float = 0.25
    n_startup: int = 5
    n_candidates: int = 24
    observations: list = field(default_factory=list)
    y_star: Optional[float] = None

    def observe(self, config: Configuration, y: float):
        self.observations.append((config, float(y)))

    @property
    def best_y(self) -> Optional[float]:
        return max((y for _, y in self.observations), default=None)

    def split(self):
        """(good, bad) configurations; good is the top ceil(gamma * n), ties kept in arrival order."""
        n = len(self.observations)
        n_good = min(n, math.ceil(self.gamma * n))
        order = sorted(range(n), key=lambda i: -self.observations[i][1])
        good = [self.observations[i][0] for i in order[:n_good]]
        bad = [self.observations[i][0] for i in order[n_good:]]
        self.y_star = self.observations[order[n_good - 1]][1] if n_good else None
        return good, bad


@dataclass(frozen=True)
class TPEProposal:
    config: Configuration
    candidates: tuple
    scores: tuple          # log l(x) - log g(x) per candidate
    good: ParzenModel
    bad: ParzenModel


def tpe_proposal(state: TPEState, space: SearchSpace, rng: np.random.Generator) -> TPEProposal:
    if len(state.observations) < state.n_startup or not state.observations:
        raise ValueError("TPE needs at least n_startup observations; sample randomly before that")
    good_cfgs, bad_cfgs = state.split()
    if not good_cfgs:
        raise ValueError("empty good set")
    good = ParzenModel.fit(space, good_cfgs)
    bad = ParzenModel.fit(space, bad_cfgs)
    candidates = tuple(good.draw(rng) for _ in range(state.n_candidates))
    scores = tuple(good.log_density(c) - bad.log_density(c) for c in candidates)
    best = max(range(len(candidates)), key=lambda i: (scores[i], -i))
    return TPEProposal(candidates[best], candidates, scores, good, bad)


def tpe_propose(state: TPEState, space: SearchSpace, rng: np.random.Generator) -> Configuration:
    return tpe_proposal(state, space, rng).config


# -- search drivers ----------------------------------------------------------

Objective = Callable[[Configuration], EvaluationReport]


def _trial(history: OptimizationHistory, trial_id: int, report: EvaluationReport, explore: bool,
           started: float) -> TrialRecord:
    """Record for a baseline trial; the verdict marks whether it raised the incumbent."""
    best = history.best_accuracy
    improved = report.succeeded and (best is None or report.mean_accuracy > best)
    decision = Decision(Verdict.ACCEPT if improved else Verdict.REJECT, NextAction.REFINE, "")
    return TrialRecord(trial_id, report.config, report, decision, explore, started, time.time())


def random_search_objective(objective: Objective, spaces: Sequence[SearchSpace], n_trials: int,
                            seed: int) -> OptimizationHistory:
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    rng = np.random.default_rng(seed)
    history = OptimizationHistory()
    for t in range(n_trials):
        started = time.time()
        space = spaces[int(rng.integers(len(spaces)))]
        report = objective(sample(space, rng))
        history = history.append(_trial(history, t, report, True, started))
    return history


def random_search(dataset: Dataset, spaces: Sequence[SearchSpace], n_trials: int, k: int = 5,
                  seed: int = 0) -> OptimizationHistory:
    return random_search_objective(lambda cfg: evaluate(dataset, cfg, k, seed), spaces, n_trials, seed)


def tpe_search_objective(objective: Objective, spaces: Sequence[SearchSpace], n_trials: int, seed: int,
                         gamma: float = 0.25, n_startup: int = 5, n_candidates: int = 24,
                         score: Callable[[EvaluationReport], float] = None) -> OptimizationHistory:
    """Per-family TPE with greedy family choice once every family is past startup.

    Failed evaluations are observed with objective 0 so they land in the bad set.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    score = score or (lambda r: r.mean_accuracy if r.succeeded else 0.0)
    rng = np.random.default_rng(seed)
    states = [TPEState(gamma, n_startup, n_candidates) for _ in spaces]
    history = OptimizationHistory()
    for t in range(n_trials):
        started = time.time()
        in_startup = any(len(s.observations) < n_startup for s in states)
        if in_startup or len(spaces) == 1:
            j = t % len(spaces)
            if len(states[j].observations) >= n_startup:
                # this family is warm; keep alternating among those still in startup
                cold = [i for i, s in enumerate(states) if len(s.observations) < n_startup]
                j = cold[0] if cold else j
        else:
            bests = [s.best_y for s in states]
            top = max(bests)
            leaders = [i for i, b in enumerate(bests) if b == top]
            j = leaders[t % len(leaders)]
        state, space = states[j], spaces[j]
        explore = len(state.observations) < n_startup
        config = sample(space, rng) if explore else tpe_propose(state, space, rng)
        report = objective(config)
        state.observe(config, score(report))
        history = history.append(_trial(history, t, report, explore, started))
    return history


def tpe_search(dataset: Dataset, spaces: Sequence[SearchSpace], n_trials: int, k: int = 5, seed: int = 0,
               gamma: float = 0.25, n_startup: int = 5, n_candidates: int = 24) -> OptimizationHistory:
    return tpe_search_objective(lambda cfg: evaluate(dataset, cfg, k, seed), spaces, n_trials, seed,
                                gamma, n_startup, n_candidates)


# -- comparison --------------------------------------------------------------

METHODS = ("random", "tpe", "multiagent")
REPORT_COLUMNS = ("method", "model", "accuracy", "time_s", "trials_per_s", "n_trials")


@dataclass(frozen=True)
class ComparisonRow:
    method: str
    model: str
    accuracy: Optional[float]
    time_s: float
    trials_per_s: float
    n_trials: int
    termination: Optional[str] = None

    def to_json(self):
        return {c: getattr(self, c) for c in REPORT_COLUMNS}


@dataclass(frozen=True)
class ComparisonReport:
    dataset: str
    budget: int
    rows: tuple

    def to_markdown(self) -> str:
        lines = [f"| {' | '.join(REPORT_COLUMNS)} |", "|" + "---|" * len(REPORT_COLUMNS)]
        for r in self.rows:
            acc = "n/a" if r.accuracy is None else f"{100 * r.accuracy:.2f}%"
            lines.append(f"| {r.method} | {r.model} | {acc} | {r.time_s:.2f} | {r.trials_per_s:.2f} | {r.n_trials} |")
        return "\n".join(lines)


def parse_method(name: str) -> str:
    if name not in METHODS:
        raise ValueError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")
    return name


def compare(dataset: Dataset, methods: Sequence[str], budget: int, k: int = 5, seed: int = 0,
            families: Sequence = FAMILY_ORDER, goals: Optional[RunGoals] = None) -> ComparisonReport:
    """Run each method on ``dataset`` and tabulate best accuracy, time and trial throughput."""
    from . import orchestrator

    if budget < 1:
        raise ValueError("budget must be >= 1")
    methods = [parse_method(m) for m in methods]
    spaces = [default_space(f) for f in families]
    rows = []
    for method in methods:
        t0 = time.perf_counter()
        termination = None
        if method == "random":
            history = random_search(dataset, spaces, budget, k, seed)
        elif method == "tpe":
            history = tpe_search(dataset, spaces, budget, k, seed)
        else:
            run_goals = goals or RunGoals(max_iterations=budget, min_trials=min(RunGoals.min_trials, budget))
            result = orchestrator.run(dataset, run_goals, HeuristicRecommender(seed, families), HeuristicDecider(),
                                      k=k, seed=seed, families=families)
            history, termination = result.history, result.termination.value
        elapsed = time.perf_counter() - t0
        best = history.best
        rows.append(ComparisonRow(
            method=method,
            model=best.config.family.value if best else "none",
            accuracy=best.report.mean_accuracy if best else None,
            time_s=elapsed,
            trials_per_s=len(history) / elapsed if elapsed > 0 else float("inf"),
            n_trials=len(history),
            termination=termination,
        ))
    return ComparisonReport(dataset.name, budget, tuple(rows))
