"""A population of ten agents converging on a lexicon for synthetic objects.

Prints the rolling success, coherence and inventory size, then the frozen
test score on scenes made from held-out objects. Takes about a minute.

    python demos/convergence.py [games]
"""
import sys
import tempfile

from langgame.config import parse_config
from langgame.experiment import run_experiment

games = int(sys.argv[1]) if len(sys.argv) > 1 else 50_000
cfg = parse_config({
    "name": "convergence", "seed": 0, "games": games,
    "datasets": [{"name": "blobs", "synthetic": {"clusters": 8, "channels": 5, "per_cluster": 100}}],
    "evaluations": [{"after": games, "dataset": "blobs", "games": 5000, "label": "test"}],
    "output": {"records": False, "stride": games // 10},
})
with tempfile.TemporaryDirectory() as out:
    result = run_experiment(cfg, out)

print(f"{'game':>8} {'success':>8} {'coherence':>10} {'words':>6}")
for row in result.series:
    print(f"{row['game']:>8} {row['success']:>8.3f} {row['coherence']:>10.3f} {row['inventory_size']:>6.1f}")
print(f"frozen test success: {result.summary['test']['success']:.3f}")
