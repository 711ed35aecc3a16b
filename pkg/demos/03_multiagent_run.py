"""
A full recommend -> evaluate -> decide run with the heuristic agents,
logged to JSONL and replayed from disk.
"""
import tempfile

from mahpo.agents import HeuristicDecider, HeuristicRecommender, RunGoals
from mahpo.data import builtin
from mahpo.orchestrator import EventLog, replay, run

iris = builtin("iris")
goals = RunGoals(target_accuracy=0.97, max_iterations=10)

with tempfile.TemporaryDirectory() as tmp:
    sink = EventLog.open(tmp, "demo")
    result = run(iris, goals, HeuristicRecommender(seed=1), HeuristicDecider(), k=5, seed=1, log_sink=sink)
    sink.close()

    for rec in result.history:
        acc = rec.report.mean_accuracy
        print(rec.trial_id, rec.config.family.value, f"{acc:.4f}",
              rec.decision.verdict.value, rec.decision.next_action.value,
              "explore" if rec.explore_flag else "exploit")
    print("termination:", result.termination.value, "best trial:", result.best.trial_id)

    again = replay(sink.path)
    print("replay matches:", again.history == result.history, "complete:", again.complete)
