"""Every agent loses two of its five sensors halfway through and recovers.

    python demos/sensor_defect.py
"""
import tempfile

from langgame.config import parse_config
from langgame.experiment import run_experiment

games, at = 60_000, 30_000
cfg = parse_config({
    "name": "defect", "seed": 0, "games": games,
    "datasets": [{"name": "blobs", "synthetic": {"clusters": 8, "channels": 5, "per_cluster": 100}}],
    "schedule": [{"at": at, "kind": "sensor_defect", "lost": 2}],
    "output": {"records": False, "stride": 5000},
})
with tempfile.TemporaryDirectory() as out:
    result = run_experiment(cfg, out)
for row in result.series:
    mark = "  <- sensors lost" if row["game"] == at + 5000 else ""
    print(f"{row['game']:>6}  success {row['success']:.3f}  words {row['inventory_size']:5.1f}{mark}")
for agent in result.population[:3]:
    print(f"agent {agent.id} still senses {sorted(agent.sensors)}")
