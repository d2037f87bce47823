"""Communicative success, linguistic coherence and inventory size over rolling windows."""
from __future__ import annotations

import csv
import json
from collections import Counter, deque
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

SERIES_HEADER = ["game", "success", "coherence", "inventory_size"]
METRICS = ("success", "coherence", "inventory_size")


class RollingWindow:
    """Mean of the last ``capacity`` observations."""

    def __init__(self, capacity: int = 1000):
        self.capacity = capacity
        self.entries: deque = deque()
        self._total = 0

    def add(self, x: int | float) -> None:
        self.entries.append(x)
        self._total += x
        if len(self.entries) > self.capacity:
            self._total -= self.entries.popleft()

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def mean(self) -> float | None:
        if not self.entries:
            return None
        return self._total / len(self.entries)


class SpeakerHistory:
    """Forms uttered in an agent's last ``capacity`` speaker turns, with O(1) distinct count."""

    def __init__(self, capacity: int | None = 1000):
        self.capacity = capacity
        self.forms: deque[str] = deque()
        self.counts: Counter = Counter()

    def add(self, form: str) -> None:
        self.forms.append(form)
        self.counts[form] += 1
        if self.capacity is not None and len(self.forms) > self.capacity:
            old = self.forms.popleft()
            self.counts[old] -= 1
            if not self.counts[old]:
                del self.counts[old]

    @property
    def distinct(self) -> int:
        return len(self.counts)


def communicative_success(records: Sequence) -> float | None:
    if not records:
        return None
    return sum(bool(_get(r, "success")) for r in records) / len(records)


def coherence(records: Sequence) -> float | None:
    if not records:
        return None
    return sum(bool(_get(r, "coherent")) for r in records) / len(records)


def _get(record, key):
    return record[key] if isinstance(record, dict) else getattr(record, key)


def coherence_probe(utterance: str | None, listener, listener_view, topic: int) -> bool:
    """Would the listener, speaking about the same topic, have said the same word?"""
    if utterance is None:
        return False
    return listener.produce_read_only(listener_view, topic).utterance == utterance


def inventory_size(histories: Iterable[SpeakerHistory]) -> float | None:
    """Mean distinct forms per agent, over agents that have spoken at least once."""
    sizes = [h.distinct for h in histories if h.forms]
    if not sizes:
        return None
    return sum(sizes) / len(sizes)


class MetricsTracker:
    """Streaming metrics over a record stream.

    Speaker histories are kept here rather than on the agents so that frozen
    evaluation can measure inventory size without touching agent state.
    """

    def __init__(self, window: int = 1000, history: int | None = 1000):
        self.success = RollingWindow(window)
        self.coherence = RollingWindow(window)
        self.history_capacity = history
        self.histories: dict[int, SpeakerHistory] = {}
        self.games = 0
        self.totals = {"success": 0, "coherence": 0}
        self.peak_inventory = 0.0

    def observe(self, record) -> None:
        self.games += 1
        self.success.add(int(record.success))
        self.coherence.add(int(bool(record.coherent)))
        self.totals["success"] += int(record.success)
        self.totals["coherence"] += int(bool(record.coherent))
        if record.utterance is not None:
            hist = self.histories.get(record.speaker_id)
            if hist is None:
                hist = self.histories[record.speaker_id] = SpeakerHistory(self.history_capacity)
            hist.add(record.utterance)
        inv = self.inventory_size
        if inv is not None and inv > self.peak_inventory:
            self.peak_inventory = inv

    @property
    def inventory_size(self) -> float | None:
        return inventory_size(self.histories.values())

    def snapshot(self) -> dict:
        return {"game": self.games, "success": self.success.mean,
                "coherence": self.coherence.mean, "inventory_size": self.inventory_size}

    def overall(self) -> dict:
        if not self.games:
            return {"success": None, "coherence": None}
        return {k: v / self.games for k, v in self.totals.items()}


class SeriesWriter:
    """Delimited time series of the windowed metrics, one row every ``stride`` games."""

    def __init__(self, path, stride: int = 1000):
        self.stride = stride
        self.fh = open(path, "w", newline="")
        self.writer = csv.writer(self.fh)
        self.writer.writerow(SERIES_HEADER)
        self.rows: list[dict] = []

    def maybe_write(self, tracker: MetricsTracker) -> None:
        if tracker.games % self.stride == 0:
            snap = tracker.snapshot()
            self.rows.append(snap)
            self.writer.writerow([snap["game"]] + [_fmt(snap[k]) for k in METRICS])

    def close(self) -> None:
        self.fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def _fmt(v):
    return "" if v is None else repr(float(v))


def export_series(records: Iterable, stride: int, path, window: int = 1000) -> list[dict]:
    """Replay a record stream and write the windowed series; returns the sampled rows."""
    tracker = MetricsTracker(window)
    with SeriesWriter(path, stride) as out:
        for record in records:
            tracker.observe(record)
            out.maybe_write(tracker)
    return out.rows


def read_series(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = []
        for row in csv.DictReader(fh):
            rows.append({"game": int(row["game"]),
                         **{k: (float(row[k]) if row[k] else None) for k in METRICS}})
        return rows


def aggregate_summaries(summaries: Sequence[dict]) -> dict:
    """Mean and two standard deviations per metric across runs.

    Each summary maps a section name (``"train"`` or an evaluation label)
    to ``{metric: value}``. Sections missing from some runs aggregate over the
    runs that have them.
    """
    sections: dict[str, dict[str, list[float]]] = {}
    for summary in summaries:
        for section, metrics in summary.items():
            if not isinstance(metrics, dict):
                continue
            bucket = sections.setdefault(section, {})
            for key, value in metrics.items():
                if isinstance(value, (int, float)) and not isinstance(value, bool):
                    bucket.setdefault(key, []).append(float(value))
    out = {}
    for section, metrics in sections.items():
        out[section] = {}
        for key, values in metrics.items():
            arr = np.asarray(values)
            std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
            out[section][key] = {"mean": float(arr.mean()), "two_std": 2.0 * std, "runs": len(arr)}
    return out


def write_aggregate(aggregate: dict, out_dir) -> None:
    out_dir = Path(out_dir)
    (out_dir / "aggregate.json").write_text(json.dumps(aggregate, indent=2, sort_keys=True) + "\n")
    with open(out_dir / "aggregate.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["section", "metric", "mean", "two_std", "runs"])
        for section in sorted(aggregate):
            for metric in sorted(aggregate[section]):
                row = aggregate[section][metric]
                w.writerow([section, metric, repr(row["mean"]), repr(row["two_std"]), row["runs"]])


def load_summary(path) -> dict:
    return json.loads(Path(path).read_text())

