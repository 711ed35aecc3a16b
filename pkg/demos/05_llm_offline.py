"""
Drive the LLM agents offline: a scripted transport stands in for the chat
endpoint, and a record/replay store makes the run repeatable.
"""
import json
import tempfile
from pathlib import Path

from mahpo.agents import RunGoals
from mahpo.data import builtin
from mahpo.llm import LLMDecider, LLMRecommender, RecordReplayTransport, ScriptedTransport
from mahpo.orchestrator import run
from mahpo.search_space import ModelFamily


def fake_model(request, index):
    if "Recommender" in request.system_prompt:
        n = request.user_message.count('{"trial"')
        reply = {"model": "random_forest",
                 "hyperparameters": {"n_estimators": 20 + 20 * n, "max_depth": 4 + n,
                                     "min_samples_split": 2, "max_features": "sqrt"},
                 "reasoning": "grow the forest a little each trial", "explore": n == 0}
        # chat models like to wrap JSON in fences and chatter
        return "Here you go:\n```json\n" + json.dumps(reply) + "\n```"
    return '{"verdict": "accept", "next_action": "refine", "guidance": "deeper trees"}'


goals = RunGoals(target_accuracy=0.99, max_iterations=4, min_trials=4)
families = [ModelFamily.RANDOM_FOREST]
with tempfile.TemporaryDirectory() as tmp:
    store = Path(tmp) / "replies.jsonl"
    recorder = RecordReplayTransport("record", store, ScriptedTransport(fake_model))
    first = run(builtin("iris"), goals, LLMRecommender(recorder, families), LLMDecider(recorder), families=families)

    # second run answers every prompt from the store, with no transport behind it
    player = RecordReplayTransport("replay", store)
    second = run(builtin("iris"), goals, LLMRecommender(player, families), LLMDecider(player), families=families)

print([r.config.values["n_estimators"] for r in first.history])
print([round(r.report.mean_accuracy, 4) for r in first.history])
print([round(r.report.mean_accuracy, 4) for r in second.history])
print("termination:", second.termination.value)
