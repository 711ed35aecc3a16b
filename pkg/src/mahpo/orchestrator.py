"""The recommend -> evaluate -> decide loop, its JSONL audit log, and log replay."""

from __future__ import annotations

import json
import logging
import os
import secrets
import time
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path
from typing import IO, NamedTuple, Optional, Sequence, Union

from .agents import (
    Decision,
    HeuristicDecider,
    HeuristicRecommender,
    NextAction,
    OptimizationHistory,
    Recommendation,
    RunGoals,
    TerminationReason,
    TrialRecord,
    check_termination,
    provisional_record,
)
from .data import Dataset, summarize
from .evaluation import EvaluationReport, evaluate
from .search_space import FAMILY_ORDER, Configuration, ModelFamily, default_space, validate

logger = logging.getLogger(__name__)

EVENT_KINDS = ("run_started", "recommendation", "evaluation", "decision", "termination")


class LogWriteError(RuntimeError):
    """The audit log could not be written; the run must stop."""


class ReplayError(ValueError):
    pass


def utc_now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds").replace("+00:00", "Z")


def new_run_id() -> str:
    return datetime.now(timezone.utc).strftime("%Y%m%dT%H%M%S%fZ") + "-" + secrets.token_hex(2)


@dataclass(frozen=True)
class LogEvent:
    ts: str
    run_id: str
    seq: int
    kind: str
    payload: dict

    def to_line(self) -> str:
        # json.dumps escapes embedded newlines, so one event is always one line
        return json.dumps({"ts": self.ts, "run_id": self.run_id, "seq": self.seq, "kind": self.kind,
                           "payload": self.payload}, ensure_ascii=False)


class EventLog:
    """Sequencing writer over a text stream; each event is flushed (and fsynced) before returning."""

    def __init__(self, stream: IO[str], run_id: str):
        self.stream = stream
        self.run_id = run_id
        self.next_seq = 0
        self.events: list[LogEvent] = []

    @classmethod
    def open(cls, directory: Union[str, Path], run_id: str) -> "EventLog":
        path = Path(directory) / f"{run_id}.jsonl"
        try:
            stream = open(path, "x", encoding="utf-8")
        except OSError as exc:
            raise LogWriteError(f"cannot create log {path}: {exc}") from exc
        log = cls(stream, run_id)
        log.path = path
        return log

    def log(self, kind: str, payload: dict) -> LogEvent:
        event = LogEvent(utc_now(), self.run_id, self.next_seq, kind, payload)
        emit(self, event)
        return event

    def close(self):
        try:
            self.stream.close()
        except OSError:
            pass


def emit(sink: EventLog, event: LogEvent) -> None:
    if event.seq != sink.next_seq:
        raise ValueError(f"event seq {event.seq} out of order (expected {sink.next_seq})")
    if event.kind not in EVENT_KINDS:
        raise ValueError(f"unknown event kind {event.kind!r}")
    try:
        sink.stream.write(event.to_line() + "\n")
        sink.stream.flush()
        try:
            fd = sink.stream.fileno()
        except (AttributeError, OSError, ValueError):
            fd = None
        if fd is not None:
            os.fsync(fd)
    except (OSError, ValueError) as exc:
        raise LogWriteError(f"failed to write log event {event.seq}: {exc}") from exc
    sink.next_seq += 1
    sink.events.append(event)


@dataclass(frozen=True)
class RunResult:
    history: OptimizationHistory
    best: Optional[TrialRecord]
    termination: TerminationReason
    total_wall_time_s: float
    trials_per_second: float
    run_id: str = ""


def _first_valid(rec: Recommendation, families) -> Optional[int]:
    for i, cand in enumerate(rec.candidates):
        if cand.family in families and not validate(default_space(cand.family), cand):
            return i
    return None


def _describe(exc: BaseException) -> str:
    return f"{type(exc).__name__}: {exc}"


def run(dataset: Dataset, goals: RunGoals, recommender, decider, k: int = 5, seed: int = 0,
        log_sink: Optional[EventLog] = None, families: Sequence = FAMILY_ORDER,
        run_id: Optional[str] = None) -> RunResult:
    """Drive the agents until a termination criterion holds.

    Agent failures get one retry (with the error fed back) and then fall back
    to the heuristic agents; evaluation failures become failed trials.
    """
    families = tuple(ModelFamily(f) for f in families)
    if log_sink is None:
        import io
        log_sink = EventLog(io.StringIO(), run_id or new_run_id())
    run_id = log_sink.run_id
    fallback_rec = HeuristicRecommender(seed, families)
    fallback_dec = HeuristicDecider()

    t0 = time.perf_counter()
    summary = summarize(dataset)
    log_sink.log("run_started", {
        "dataset": dataset.name, "summary": summary.to_json(), "goals": goals.to_json(),
        "k": k, "seed": seed, "families": [f.value for f in families],
        "recommender": type(recommender).__name__, "decider": type(decider).__name__,
    })
    history = OptimizationHistory()
    guidance = ""
    while True:
        trial_id = len(history)
        started = time.time()

        rec, source, errors, index = None, "agent", [], None
        feedback = None
        for _ in range(2):
            try:
                rec = recommender.recommend(summary, history, guidance, retry_feedback=feedback)
                index = _first_valid(rec, families)
                if index is None:
                    raise ValueError("no candidate is valid for the allowed model families")
                break
            except Exception as exc:
                errors.append(_describe(exc))
                feedback = str(exc)
                rec = None
        if rec is None:
            source = "fallback"
            rec = fallback_rec.recommend(summary, history, guidance)
            index = _first_valid(rec, families)
        config = rec.candidates[index]
        explore = rec.explore_flags[index]
        log_sink.log("recommendation", {
            "trial_id": trial_id, "source": source, "errors": errors, "guidance": guidance,
            "recommendation": rec.to_json(), "selected": index,
            "config": config.to_json(), "explore_flag": explore,
        })

        report = evaluate(dataset, config, k, seed)
        log_sink.log("evaluation", {"trial_id": trial_id, "report": report.to_json()})

        decision, source, errors, feedback = None, "agent", [], None
        for _ in range(2):
            try:
                decision = decider.decide(history, report, goals, latest_explore=explore, retry_feedback=feedback)
                break
            except Exception as exc:
                errors.append(_describe(exc))
                feedback = str(exc)
        if decision is None:
            source = "fallback"
            decision = fallback_dec.decide(history, report, goals, latest_explore=explore)

        # the loop's own criteria are authoritative; a disagreeing agent is overridden
        required = check_termination(history.append(provisional_record(history, report, explore)), goals)
        override = None
        if decision.terminates and required is None:
            override = decision.to_json()
            decision = replace(decision, next_action=NextAction.REFINE, reason=None)
        elif required is not None and decision.reason is not required:
            override = decision.to_json()
            decision = Decision(decision.verdict, NextAction.TERMINATE, decision.guidance, required)
        if override is not None:
            logger.info("trial %d: agent decision %s overridden", trial_id, override)

        ended = time.time()
        record = TrialRecord(trial_id, config, report, decision, explore, started, ended)
        history = history.append(record)
        log_sink.log("decision", {
            "trial_id": trial_id, "source": source, "errors": errors, "decision": decision.to_json(),
            "overridden": override, "explore_flag": explore, "started_at": started, "ended_at": ended,
        })
        if decision.terminates:
            break
        guidance = decision.guidance

    total = time.perf_counter() - t0
    n = len(history)
    log_sink.log("termination", {
        "reason": decision.reason.value, "n_trials": n, "best_trial_id": history.incumbent,
        "best_accuracy": history.best_accuracy, "total_wall_time_s": total,
    })
    return RunResult(history, history.best, decision.reason, total, n / total if total > 0 else float("inf"), run_id)


class Replay(NamedTuple):
    goals: RunGoals
    history: OptimizationHistory
    termination: Optional[TerminationReason]

    @property
    def complete(self) -> bool:
        return self.termination is not None


def replay(log_path: Union[str, Path]) -> Replay:
    """Rebuild goals, history and termination from a run log.

    A log cut short of its termination event replays as incomplete, keeping
    every trial whose decision was written.
    """
    path = Path(log_path)
    events = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
                events.append((lineno, obj["seq"], obj["kind"], obj["payload"]))
            except (ValueError, KeyError, TypeError) as exc:
                if not line.endswith("\n"):
                    # a partially written final line is a truncated tail, not corruption
                    break
                raise ReplayError(f"{path}:{lineno}: malformed log line ({exc})") from None
    if not events or events[0][2] != "run_started":
        raise ReplayError(f"{path}: missing run_started")
    goals = RunGoals.from_json(events[0][3]["goals"])
    history = OptimizationHistory()
    termination = None
    pending: dict = {}
    for expected, (lineno, seq, kind, payload) in enumerate(events):
        if seq != expected:
            raise ReplayError(f"{path}:{lineno}: seq {seq} breaks the contiguous sequence (expected {expected})")
        if kind == "recommendation":
            pending = {"config": Configuration.from_json(payload["config"]), "explore": payload["explore_flag"]}
        elif kind == "evaluation":
            pending["report"] = EvaluationReport.from_json(payload["report"])
        elif kind == "decision":
            if "report" not in pending:
                raise ReplayError(f"{path}:{lineno}: decision without a preceding evaluation")
            history = history.append(TrialRecord(
                payload["trial_id"], pending["config"], pending["report"],
                Decision.from_json(payload["decision"]), pending["explore"],
                payload["started_at"], payload["ended_at"]))
            pending = {}
        elif kind == "termination":
            termination = TerminationReason(payload["reason"])
        elif kind != "run_started" or seq != 0:
            raise ReplayError(f"{path}:{lineno}: unexpected event kind {kind!r}")
    return Replay(goals, history, termination)
