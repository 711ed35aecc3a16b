"""Chat-completion transports, prompt rendering and strict JSON parsing for the LLM agents.

Prompt templates and the reply schemas below are this package's own
convention; they are plain text so any OpenAI-compatible endpoint can serve them.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import random
import threading
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import httpx

from .agents import (
    AgentError,
    Decision,
    NextAction,
    OptimizationHistory,
    Recommendation,
    RunGoals,
    TerminationReason,
    Verdict,
    exploration_ratio,
)
from .data import DatasetSummary
from .evaluation import EvaluationReport
from .search_space import (
    FAMILY_ORDER,
    Configuration,
    Continuous,
    Integer,
    ModelFamily,
    default_space,
)

logger = logging.getLogger(__name__)

DEFAULT_API_KEY_ENV = "OPTIMIND_API_KEY"
RETRYABLE_STATUS = {429, 500, 502, 503, 504}
HISTORY_WINDOW = 10


class LLMError(AgentError):
    pass


class TransportError(LLMError):
    """The endpoint could not be reached or kept failing after retries."""


class ConfigurationError(LLMError):
    """The transport is misconfigured (for example the API key is missing)."""


class ParseError(LLMError):
    def __init__(self, message, field=None):
        self.field = field
        super().__init__(message)


class ReplayMiss(LLMError):
    pass


@dataclass(frozen=True)
class ChatRequest:
    system_prompt: str
    user_message: str
    temperature: float = 0.2
    max_output_tokens: int = 512

    def __post_init__(self):
        if not (self.system_prompt or self.user_message):
            raise ValueError("a chat request needs a non-empty message")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")

    def sha256(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()

    def with_feedback(self, feedback: Optional[str]) -> "ChatRequest":
        if not feedback:
            return self
        note = (f"\n\nYour previous reply was rejected: {feedback}\n"
                "Reply again with exactly one JSON object that follows the output contract.")
        return ChatRequest(self.system_prompt, self.user_message + note, self.temperature, self.max_output_tokens)


@dataclass(frozen=True)
class TransportConfig:
    endpoint_url: str = "https://generativelanguage.googleapis.com/v1beta/openai/chat/completions"
    model_name: str = "gemini-2.0-flash"
    api_key_env_var: str = DEFAULT_API_KEY_ENV
    timeout_s: float = 60.0
    max_retries: int = 3
    min_request_interval_s: float = 0.0
    backoff_base_s: float = 1.0

    def __post_init__(self):
        if not self.timeout_s > 0:
            raise ValueError("timeout_s must be > 0")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")


class LiveTransport:
    """OpenAI-compatible HTTP chat transport with backoff and a minimum call interval.

    ``client``, ``sleep``, ``clock`` and ``rng`` are injectable for offline tests.
    """

    def __init__(self, config: TransportConfig, client: Optional[httpx.Client] = None,
                 sleep: Callable[[float], None] = time.sleep, clock: Callable[[], float] = time.monotonic,
                 rng: Optional[random.Random] = None):
        self.config = config
        self.api_key = os.environ.get(config.api_key_env_var)
        if not self.api_key:
            raise ConfigurationError(f"environment variable {config.api_key_env_var} is not set")
        self.client = client or httpx.Client(timeout=config.timeout_s)
        self.sleep = sleep
        self.clock = clock
        self.rng = rng or random.Random()
        self.attempts = 0
        self.call_times: list[float] = []
        self._last_call: Optional[float] = None
        self._lock = threading.Lock()

    def _wait_for_slot(self):
        if self._last_call is not None and self.config.min_request_interval_s > 0:
            wait = self._last_call + self.config.min_request_interval_s - self.clock()
            if wait > 0:
                self.sleep(wait)
        self._last_call = self.clock()
        self.call_times.append(self._last_call)

    def _payload(self, request: ChatRequest) -> dict:
        messages = []
        if request.system_prompt:
            messages.append({"role": "system", "content": request.system_prompt})
        messages.append({"role": "user", "content": request.user_message})
        return {"model": self.config.model_name, "messages": messages,
                "temperature": request.temperature, "max_tokens": request.max_output_tokens}

    def complete(self, request: ChatRequest) -> str:
        with self._lock:
            headers = {"Authorization": f"Bearer {self.api_key}"}
            last_problem = "no attempt made"
            for attempt in range(self.config.max_retries + 1):
                if attempt:
                    delay = self.config.backoff_base_s * 2 ** (attempt - 1)
                    self.sleep(delay * (0.5 + 0.5 * self.rng.random()))
                self._wait_for_slot()
                self.attempts += 1
                try:
                    resp = self.client.post(self.config.endpoint_url, json=self._payload(request),
                                            headers=headers, timeout=self.config.timeout_s)
                except httpx.TimeoutException as exc:
                    last_problem = f"timeout: {exc}"
                    continue
                except httpx.HTTPError as exc:
                    raise TransportError(f"HTTP error: {exc}") from exc
                if resp.status_code in RETRYABLE_STATUS:
                    last_problem = f"HTTP {resp.status_code}"
                    logger.info("retryable response %s (attempt %d)", resp.status_code, attempt + 1)
                    continue
                if resp.status_code != 200:
                    raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
                try:
                    return resp.json()["choices"][0]["message"]["content"]
                except (KeyError, IndexError, TypeError, ValueError) as exc:
                    raise TransportError(f"unexpected response shape: {exc}") from exc
            raise TransportError(f"gave up after {self.config.max_retries + 1} attempts ({last_problem})")


def complete(config: TransportConfig, request: ChatRequest, client: Optional[httpx.Client] = None) -> str:
    """One-shot live completion; raises ConfigurationError before any network use if the key is missing."""
    return LiveTransport(config, client=client).complete(request)


class ScriptedTransport:
    """Offline transport answering from a script.

    ``script`` is either a sequence of replies (strings, or exceptions to raise)
    consumed in order, or a callable ``(request, call_index) -> str``.
    """

    def __init__(self, script: Union[Sequence, Callable[[ChatRequest, int], str]]):
        self.script = script if callable(script) else list(script)
        self.requests: list[ChatRequest] = []

    def complete(self, request: ChatRequest) -> str:
        index = len(self.requests)
        self.requests.append(request)
        if callable(self.script):
            reply = self.script(request, index)
        else:
            if index >= len(self.script):
                raise TransportError("scripted transport ran out of replies")
            reply = self.script[index]
        if isinstance(reply, BaseException):
            raise reply
        return reply


class RecordReplayTransport:
    """Record live answers keyed by request hash, or serve them back without a network.

    The store is a JSON-lines file of ``{"request_sha256", "response_text"}``.
    """

    def __init__(self, mode: str, store: Union[str, Path], inner=None):
        if mode not in ("record", "replay"):
            raise ValueError("mode must be 'record' or 'replay'")
        self.mode = mode
        self.store = Path(store)
        self.inner = inner
        self.responses: dict[str, str] = {}
        if mode == "record" and inner is None:
            raise ValueError("record mode needs an inner transport")
        if mode == "replay":
            if not self.store.is_file():
                raise FileNotFoundError(f"replay store {self.store} does not exist")
            self.responses = load_store(self.store)

    def complete(self, request: ChatRequest) -> str:
        key = request.sha256()
        if self.mode == "replay":
            if key not in self.responses:
                raise ReplayMiss(f"no recorded response for request {key[:12]}")
            return self.responses[key]
        text = self.inner.complete(request)
        self.responses[key] = text
        with open(self.store, "a", encoding="utf-8") as fh:
            fh.write(json.dumps({"request_sha256": key, "response_text": text}, ensure_ascii=False) + "\n")
            fh.flush()
        return text


def load_store(path: Union[str, Path]) -> dict:
    responses = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
                responses.setdefault(row["request_sha256"], row["response_text"])
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{path}:{lineno}: malformed store line ({exc})") from None
    return responses


def record_replay(mode: str, store, inner=None) -> RecordReplayTransport:
    return RecordReplayTransport(mode, store, inner)


# -- prompts -----------------------------------------------------------------

RECOMMENDER_SYSTEM = (
    "You are the Recommender agent in a hyperparameter optimization team. "
    "You study the dataset statistics and past trials, then propose one model "
    "configuration to evaluate next, with a short explanation."
)

DECISION_SYSTEM = (
    "You are the Decision agent in a hyperparameter optimization team. "
    "You judge the latest cross-validated result against the run goals, accept or "
    "reject it, and choose whether to refine, explore, or terminate."
)


def _domain_text(name, dom) -> str:
    if isinstance(dom, Continuous):
        return f"  - {name}: real in [{dom.low:g}, {dom.high:g}] ({dom.scale} scale)"
    if isinstance(dom, Integer):
        return f"  - {name}: integer in [{dom.low}, {dom.high}]"
    return f"  - {name}: one of {', '.join(dom.choices)}"


def _trial_line(rec) -> str:
    row = {"trial": rec.trial_id, "model": rec.config.family.value,
           "hyperparameters": rec.config.to_json()["values"],
           "status": rec.report.status, "explore": rec.explore_flag,
           "verdict": rec.decision.verdict.value}
    if rec.report.succeeded:
        row["mean_accuracy"] = round(rec.report.mean_accuracy, 6)
        row["mean_f1_macro"] = round(rec.report.mean_f1_macro, 6)
    else:
        row["failure"] = rec.report.failure_reason
    return json.dumps(row, separators=(",", ":"))


def _history_block(history: OptimizationHistory) -> list[str]:
    if not len(history):
        return ["No trials yet."]
    return [_trial_line(rec) for rec in history.records[-HISTORY_WINDOW:]]


def render_recommender_prompt(summary: DatasetSummary, history: OptimizationHistory, guidance: str,
                              families: Sequence = FAMILY_ORDER) -> ChatRequest:
    lines = ["## Dataset",
             f"samples: {summary.n_samples}, features: {summary.n_features}, classes: {summary.n_classes}",
             f"class counts: {list(summary.class_counts)}",
             "feature statistics (population std):",
             "| feature | mean | std | min | max |",
             "|---|---|---|---|---|"]
    names = summary.feature_names or tuple(f"x{i}" for i in range(summary.n_features))
    for name, st in zip(names, summary.feature_stats):
        lines.append(f"| {name} | {st.mean:.6g} | {st.std:.6g} | {st.min:.6g} | {st.max:.6g} |")
    lines += ["", f"## Recent trials (last {HISTORY_WINDOW} at most)"]
    lines += _history_block(history)
    lines += ["", "## Guidance from the Decision agent", guidance or "(none)", "", "## Allowed models and domains"]
    for fam in families:
        space = default_space(fam)
        lines.append(f"{space.family.value}:")
        lines += [_domain_text(n, d) for n, d in space.params.items()]
    lines += ["", "## Output contract",
              "Reply with exactly one JSON object and nothing else:",
              '{"model": "<one allowed model>", "hyperparameters": {<every parameter of that model>}, '
              '"reasoning": "<why>", "explore": <true if this is an exploratory suggestion, else false>}']
    return ChatRequest(RECOMMENDER_SYSTEM, "\n".join(lines))


def render_decision_prompt(history: OptimizationHistory, latest: EvaluationReport, goals: RunGoals,
                           latest_explore: bool = True) -> ChatRequest:
    best = history.best
    lines = ["## Goals",
             f"target_accuracy: {goals.target_accuracy}",
             f"max_iterations: {goals.max_iterations}",
             f"exploration_ratio_threshold: {goals.exploration_ratio_threshold}",
             f"min_trials: {goals.min_trials}",
             f"patience: {goals.patience}",
             "", f"## History ({len(history)} completed trials, exploration ratio {exploration_ratio(history):.4f})"]
    lines += _history_block(history)
    lines.append("incumbent: none" if best is None else
                 f"incumbent: trial {best.trial_id} with mean_accuracy {best.report.mean_accuracy:.6f}")
    latest_row = {"model": latest.config.family.value, "hyperparameters": latest.config.to_json()["values"],
                  "status": latest.status, "explore": latest_explore}
    if latest.succeeded:
        latest_row["mean_accuracy"] = round(latest.mean_accuracy, 6)
        latest_row["fold_accuracy"] = [round(m.accuracy, 6) for m in latest.fold_metrics]
    else:
        latest_row["failure"] = latest.failure_reason
    lines += ["", "## Latest evaluation", json.dumps(latest_row, separators=(",", ":")),
              "", "## Output contract",
              "Reply with exactly one JSON object and nothing else:",
              '{"verdict": "accept" | "reject", "next_action": "refine" | "explore" | "terminate", '
              '"reason": "target_reached" | "max_iterations" | "exploration_satisfied" (only with terminate), '
              '"guidance": "<advice for the Recommender>"}']
    return ChatRequest(DECISION_SYSTEM, "\n".join(lines))


# -- parsing -----------------------------------------------------------------

def _balanced_objects(text: str):
    """Yield substrings that form brace-balanced objects, string-literal aware."""
    start = text.find("{")
    while start != -1:
        depth, in_str, escape = 0, False, False
        for i in range(start, len(text)):
            ch = text[i]
            if in_str:
                if escape:
                    escape = False
                elif ch == "\\":
                    escape = True
                elif ch == '"':
                    in_str = False
            elif ch == '"':
                in_str = True
            elif ch == "{":
                depth += 1
            elif ch == "}":
                depth -= 1
                if depth == 0:
                    yield start, text[start:i + 1]
                    break
        start = text.find("{", start + 1)


def _fenced_blocks(text: str):
    parts = text.split("```")
    # odd-indexed parts sit between fence markers
    for block in parts[1::2]:
        first, _, rest = block.partition("\n")
        yield rest if first.strip().isalpha() or not first.strip() else block


def extract_json_object(text: str) -> dict:
    """First top-level JSON object in ``text``, looking inside code fences first."""
    for source in list(_fenced_blocks(text)) + [text]:
        for _, candidate in _balanced_objects(source):
            try:
                obj = json.loads(candidate)
            except ValueError:
                continue
            if isinstance(obj, dict):
                return obj
    raise ParseError("no JSON object found in reply")


def _coerce(name, dom, value):
    if isinstance(value, bool):
        raise ParseError(f"hyperparameters.{name}: booleans are not valid values", f"hyperparameters.{name}")
    if isinstance(dom, Continuous):
        if not isinstance(value, (int, float)):
            raise ParseError(f"hyperparameters.{name}: expected a number", f"hyperparameters.{name}")
        value = float(value)
    elif isinstance(dom, Integer):
        if isinstance(value, float) and value.is_integer():
            value = int(value)
        if not isinstance(value, int):
            raise ParseError(f"hyperparameters.{name}: expected an integer", f"hyperparameters.{name}")
    elif not isinstance(value, str):
        raise ParseError(f"hyperparameters.{name}: expected a string", f"hyperparameters.{name}")
    if not dom.contains(value):
        raise ParseError(f"hyperparameters.{name}: {value!r} is outside its domain", f"hyperparameters.{name}")
    return value


def parse_recommendation(text: str) -> Recommendation:
    obj = extract_json_object(text)
    model = obj.get("model")
    try:
        family = ModelFamily(model)
    except ValueError:
        raise ParseError(f"model: {model!r} is not one of {[f.value for f in FAMILY_ORDER]}", "model") from None
    hp = obj.get("hyperparameters")
    if not isinstance(hp, dict):
        raise ParseError("hyperparameters: expected an object", "hyperparameters")
    space = default_space(family)
    unknown = [k for k in hp if k not in space.params]
    if unknown:
        raise ParseError(f"hyperparameters: unknown parameter(s) {unknown}", "hyperparameters")
    values = {}
    for name, dom in space.params.items():
        if name not in hp:
            raise ParseError(f"hyperparameters.{name}: missing", f"hyperparameters.{name}")
        values[name] = _coerce(name, dom, hp[name])
    reasoning = obj.get("reasoning")
    if not isinstance(reasoning, str) or not reasoning.strip():
        raise ParseError("reasoning: expected a non-empty string", "reasoning")
    explore = obj.get("explore", True)
    if not isinstance(explore, bool):
        raise ParseError("explore: expected a boolean", "explore")
    return Recommendation((Configuration(family, values),), reasoning, (explore,))


def parse_decision(text: str) -> Decision:
    obj = extract_json_object(text)
    try:
        verdict = Verdict(obj.get("verdict"))
    except ValueError:
        raise ParseError(f"verdict: {obj.get('verdict')!r} must be accept or reject", "verdict") from None
    try:
        action = NextAction(obj.get("next_action"))
    except ValueError:
        raise ParseError(f"next_action: {obj.get('next_action')!r} is not refine/explore/terminate",
                         "next_action") from None
    reason = obj.get("reason")
    if action is NextAction.TERMINATE:
        if reason is None:
            raise ParseError("reason: required when next_action is terminate", "reason")
        try:
            reason = TerminationReason(reason)
        except ValueError:
            raise ParseError(f"reason: {reason!r} is not a termination reason", "reason") from None
    else:
        reason = None
    guidance = obj.get("guidance", "")
    if not isinstance(guidance, str):
        raise ParseError("guidance: expected a string", "guidance")
    return Decision(verdict, action, guidance, reason)


# -- agents ------------------------------------------------------------------

class LLMRecommender:
    """Recommender backed by a chat transport; parse failures surface as ParseError."""

    def __init__(self, transport, families: Sequence = FAMILY_ORDER):
        self.transport = transport
        self.families = tuple(ModelFamily(f) for f in families)

    def recommend(self, summary, history, guidance, retry_feedback=None):
        request = render_recommender_prompt(summary, history, guidance, self.families).with_feedback(retry_feedback)
        rec = parse_recommendation(self.transport.complete(request))
        if rec.candidates[0].family not in self.families:
            raise ParseError(f"model: {rec.candidates[0].family.value} is not in the allowed list", "model")
        return rec


class LLMDecider:
    def __init__(self, transport):
        self.transport = transport

    def decide(self, history, latest, goals, latest_explore=True, retry_feedback=None):
        request = render_decision_prompt(history, latest, goals, latest_explore).with_feedback(retry_feedback)
        return parse_decision(self.transport.complete(request))
