"""Learn names for one set of objects, then a second set sensed on other channels.

The words for the first set are untouched while the second is learned,
so the first test score holds.

    python demos/continual.py
"""
from langgame.config import parse_config
from langgame.experiment import run_experiment


def blobs(name, first):
    names = [f"c{j}" for j in range(first, first + 5)]
    return {"name": name, "synthetic": {"clusters": 8, "channels": 5, "per_cluster": 100,
                                        "channel_names": names}}


half = 30_000
cfg = parse_config({
    "name": "continual", "seed": 0, "games": 2 * half,
    "datasets": [blobs("A", 1), blobs("B", 6)],
    "schedule": [{"at": half, "kind": "switch_dataset", "dataset": "B"}],
    "evaluations": [{"after": half, "dataset": "A", "games": 5000, "label": "A"},
                    {"after": 2 * half, "dataset": "B", "games": 5000, "label": "B"},
                    {"after": 2 * half, "dataset": "A", "games": 5000, "label": "A again"}],
    "output": {"records": False},
})
summary = run_experiment(cfg).summary
for label in ("A", "B", "A again"):
    print(f"{label:8s} success {summary[label]['success']:.3f}")
