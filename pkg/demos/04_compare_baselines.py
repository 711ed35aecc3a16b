"""
Random search, TPE and the multi-agent loop under the same 10-trial budget.
"""
from mahpo.baselines import compare
from mahpo.data import builtin

for name in ("iris", "wine"):
    report = compare(builtin(name), ["random", "tpe", "multiagent"], budget=10, seed=0)
    print(f"\n{name}")
    print(report.to_markdown())
