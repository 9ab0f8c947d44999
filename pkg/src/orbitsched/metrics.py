"""Per-image metrics and run summaries."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

LATENCY_DEFINITION = (
    "latency = downlink time - start of the first contact at or after capture; "
    "population: images whose ground-truth priority exceeds 2; images still queued "
    "at the end of the run are counted with the run end as their downlink time"
)


@dataclass
class ImageRecord:
    id: int
    satellite: int
    capture_time: float
    first_contact: float | None  # None: no contact before the run ended
    first_window_end: float | None
    downlink_time: float | None  # None: still queued at run end
    compute_time: float | None  # None: never prioritized on board
    filters_run: int
    assigned: float
    truth: float

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "sat": self.satellite,
            "capture": round(self.capture_time, 6),
            "first_contact": None if self.first_contact is None else round(self.first_contact, 6),
            "downlink": None if self.downlink_time is None else round(self.downlink_time, 6),
            "compute": None if self.compute_time is None else round(self.compute_time, 9),
            "filters_run": self.filters_run,
            "assigned": self.assigned,
            "truth": self.truth,
        }


def percentile(values: Sequence[float], q: float) -> float:
    """Nearest-rank percentile (``q`` in [0, 100])."""
    if not len(values):
        return float("nan")
    s = sorted(values)
    k = max(0, math.ceil(q / 100.0 * len(s)) - 1)
    return float(s[k])


@dataclass
class EnergyLog:
    generated: float = 0.0
    adacs: float = 0.0
    camera: float = 0.0
    receiver: float = 0.0
    transmitter: float = 0.0
    compute: float = 0.0
    curtailed: float = 0.0  # generation lost to a full battery
    shortfall: float = 0.0  # demand not covered by an empty battery

    def add(self, generated, adacs, camera, receiver, transmitter, compute) -> None:
        self.generated += generated
        self.adacs += adacs
        self.camera += camera
        self.receiver += receiver
        self.transmitter += transmitter
        self.compute += compute

    def consumed(self) -> float:
        return self.adacs + self.camera + self.receiver + self.transmitter + self.compute

    def to_dict(self) -> dict:
        return {k: round(v, 6) for k, v in self.__dict__.items()}


@dataclass
class MetricsLog:
    images: list = field(default_factory=list)
    energy: list = field(default_factory=list)  # EnergyLog per satellite (whole run)
    energy_window: list = field(default_factory=list)  # EnergyLog per satellite, first 6 h
    end_time: float = 0.0
    alpha_trace: list = field(default_factory=list)  # (time, satellite, alpha)
    forecasts: list = field(default_factory=list)  # (satellite, time, Forecast dict)

    def write_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.images:
                fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")


def latency_samples(images: Sequence[ImageRecord], end_time: float, min_truth: float = 2.0) -> list[float]:
    out = []
    for r in images:
        if r.truth <= min_truth or r.first_contact is None:
            continue
        t = r.downlink_time if r.downlink_time is not None else end_time
        out.append(max(0.0, t - r.first_contact))
    return out


def cdf(samples: Sequence[float]) -> list[tuple[float, float]]:
    s = sorted(samples)
    n = len(s)
    return [(v, (i + 1) / n) for i, v in enumerate(s)]


def summarize(log: MetricsLog) -> dict:
    images = log.images
    if not images:
        return {"n_images": 0}
    lat = latency_samples(images, log.end_time)
    hp = [r for r in images if r.truth > 2 and r.first_contact is not None]
    sent_first = [r for r in hp if r.downlink_time is not None and r.downlink_time <= r.first_window_end]
    comp = np.array([r.compute_time for r in images if r.compute_time is not None])
    gen = sum(e.generated for e in log.energy_window)
    cmp_e = sum(e.compute for e in log.energy_window)
    delivered = sum(1 for r in images if r.downlink_time is not None)
    report = {
        "definition": LATENCY_DEFINITION,
        "n_images": len(images),
        "n_delivered": delivered,
        "n_high_priority": len(hp),
        "n_high_priority_delivered": sum(1 for r in hp if r.downlink_time is not None),
        "latency_p50_s": percentile(lat, 50) if lat else None,
        "latency_p90_s": percentile(lat, 90) if lat else None,
        "latency_p95_s": percentile(lat, 95) if lat else None,
        "latency_mean_s": float(np.mean(lat)) if lat else None,
        "high_priority_sent_first": len(sent_first) / len(hp) if hp else None,
        "n_prioritized": int(len(comp)),
        "prioritization_mean_s": float(comp.mean()) if len(comp) else None,
        "prioritization_std_s": float(comp.std()) if len(comp) else None,
        "compute_energy_fraction": cmp_e / gen if gen > 0 else None,
    }
    return report
