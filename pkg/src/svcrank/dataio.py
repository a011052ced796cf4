"""Flat-file formats and the seeded synthetic dataset generator.

Observation CSV::

    consumer_id,service_id,response_time_ms
    u01,s03,118.25

A generated dataset keeps its ground-truth ordering in a JSON sidecar next
to the CSV (``data.csv`` -> ``data.truth.json``), which ``load_observations``
picks up automatically.
"""

from __future__ import annotations

import csv
import json
import math
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path
from statistics import NormalDist
from typing import Any

import numpy as np

from . import __version__
from .errors import DuplicateObservationError, InvalidParameterError, InvalidValueError, ParseError
from .ranking import ObservationSet, RankedList
from .sim import SimTrace

CSV_HEADER = ("consumer_id", "service_id", "response_time_ms")
GENERATED_BY = f"svcrank {__version__}"

# base latency of the best service and growth factor per rank position
BASE_LATENCY_MS = 100.0
LATENCY_RATIO = 1.2


@dataclass(frozen=True)
class Dataset:
    services: tuple[str, ...]
    consumers: tuple[ObservationSet, ...] = ()
    ground_truth: RankedList | None = None
    params: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "services", tuple(dict.fromkeys(self.services)))
        object.__setattr__(self, "consumers", tuple(self.consumers))
        known = set(self.services)
        for obs in self.consumers:
            stray = obs.samples.keys() - known
            if stray:
                raise InvalidValueError(f"consumer {obs.consumer!r} sampled unknown services {sorted(stray)}")
        if self.ground_truth is not None and self.ground_truth.services != known:
            raise InvalidValueError("ground truth is not a permutation of the dataset's services")

    def consumer(self, consumer_id: str) -> ObservationSet:
        for obs in self.consumers:
            if obs.consumer == consumer_id:
                return obs
        raise KeyError(consumer_id)


def format_number(value: float) -> str:
    """Decimal text with at most 6 fractional digits, trailing zeros dropped."""
    text = f"{float(value):.6f}".rstrip("0").rstrip(".")
    return "0" if text == "-0" else text


def _json_number(value: Any) -> float | int | None:
    if value is None:
        return None
    value = round(float(value), 6)
    return int(value) if value.is_integer() else value


def truth_path(csv_path: str | Path) -> Path:
    path = Path(csv_path)
    return path.with_name(path.stem + ".truth.json")


def load_observations(path: str | Path, truth: str | Path | None = None) -> Dataset:
    """Parse an observation CSV (plus its ground-truth sidecar, if present)."""
    path = Path(path)
    samples: dict[str, dict[str, float]] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise ParseError("file is empty; expected a header row", line=1)
        if tuple(header) != CSV_HEADER:
            raise ParseError(f"header must be {','.join(CSV_HEADER)!r}, got {','.join(header)!r}", line=1)
        for row in reader:
            line = reader.line_num
            if not row:
                continue
            if len(row) != len(CSV_HEADER):
                raise ParseError(f"expected {len(CSV_HEADER)} fields, got {len(row)}", line=line)
            consumer, service, raw = (cell.strip() for cell in row)
            if not consumer or not service:
                raise ParseError("consumer_id and service_id must be non-empty", line=line)
            try:
                rt = float(raw)
            except ValueError:
                raise ParseError(f"response_time_ms {raw!r} is not a number", line=line) from None
            if not math.isfinite(rt) or rt <= 0:
                raise InvalidValueError(f"response_time_ms must be positive and finite, got {raw!r}", line=line)
            per_consumer = samples.setdefault(consumer, {})
            if service in per_consumer:
                raise DuplicateObservationError(f"second sample for ({consumer}, {service})", line=line)
            per_consumer[service] = rt

    consumers = [ObservationSet(c, s) for c, s in samples.items()]
    sampled = sorted({s for per in samples.values() for s in per})
    truth = truth_path(path) if truth is None else Path(truth)
    if truth.exists():
        meta = json.loads(truth.read_text(encoding="utf-8"))
        try:
            gt = RankedList(tuple(meta["ground_truth"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError(f"malformed ground-truth file {truth}: {exc}") from None
        services = sorted(gt.services | set(sampled))
        return Dataset(tuple(services), consumers, gt, meta.get("params", {}))
    return Dataset(tuple(sampled), consumers)


def save_observations(dataset: Dataset, path: str | Path) -> None:
    """Write the CSV (and the sidecar when the dataset has a ground truth)."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for obs in dataset.consumers:
            for service, rt in obs.samples.items():
                writer.writerow((obs.consumer, service, format_number(rt)))
    if dataset.ground_truth is not None:
        meta = {
            "ground_truth": list(dataset.ground_truth.ordering),
            "params": dict(dataset.params),
            "generated_by": GENERATED_BY,
        }
        _write_json(truth_path(path), meta)


def _write_json(path: str | Path, doc: Any) -> None:
    Path(path).write_text(json.dumps(doc, indent=2) + "\n", encoding="utf-8")


def save_ranking(r: RankedList, pv: Mapping[str, Any], path: str | Path) -> None:
    """Write the ranking JSON. Services without evidence may map to ``None``."""
    if set(pv) != r.services:
        raise ValueError(
            f"priority values cover {sorted(pv)} but the ranking covers {sorted(r.services)}"
        )
    doc = {
        "ordering": list(r.ordering),
        "priority_values": {s: _json_number(pv[s]) for s in r.ordering},
        "generated_by": GENERATED_BY,
    }
    _write_json(path, doc)


def load_ranking(path: str | Path) -> tuple[RankedList, dict[str, float | None]]:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    try:
        return RankedList(tuple(doc["ordering"])), dict(doc["priority_values"])
    except (KeyError, TypeError) as exc:
        raise ParseError(f"malformed ranking file {path}: {exc}") from None


def save_trace(trace: SimTrace, path: str | Path) -> None:
    _write_json(path, trace.to_dict())


def load_trace(path: str | Path) -> SimTrace:
    return SimTrace.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _noise_sigma(p: float) -> float:
    """Log-normal spread at which two neighbouring services swap with probability p.

    Neighbours differ by a factor LATENCY_RATIO, so they swap when the
    difference of two N(0, sigma^2) draws exceeds ln(ratio):
    p = Phi(-ln(ratio) / (sigma * sqrt(2))).
    """
    if p == 0:
        return 0.0
    return math.log(LATENCY_RATIO) / (math.sqrt(2) * NormalDist().inv_cdf(1 - p))


def generate_synthetic(
    seed: int,
    n_services: int,
    n_consumers: int,
    noise: float,
    observe_prob: float = 0.8,
) -> Dataset:
    """Synthetic observations around a planted ground-truth ordering.

    The service at ground-truth position k has base latency
    ``BASE_LATENCY_MS * LATENCY_RATIO**k``; each consumer sees each service
    with probability ``observe_prob`` and multiplicative log-normal noise
    tuned so adjacent services swap with probability ``noise``. For
    ``noise > 0.5`` the base order is reversed and the noise mirrored, and at
    exactly 0.5 latencies are drawn independently of rank.
    """
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or not 0 <= seed < 2**64:
        raise InvalidParameterError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    if n_services < 2:
        raise InvalidParameterError(f"need at least 2 services, got {n_services}")
    if n_consumers < 1:
        raise InvalidParameterError(f"need at least 1 consumer, got {n_consumers}")
    if not 0.0 <= noise <= 1.0:
        raise InvalidParameterError(f"noise must lie in [0, 1], got {noise}")
    if not 0.0 < observe_prob <= 1.0:
        raise InvalidParameterError(f"observe_prob must lie in (0, 1], got {observe_prob}")

    rng = np.random.default_rng(seed)
    width = len(str(n_services))
    services = [f"s{i:0{width}d}" for i in range(1, n_services + 1)]
    truth = [services[i] for i in rng.permutation(n_services)]

    positions = np.arange(n_services)
    if noise > 0.5:
        positions = positions[::-1]
    base = BASE_LATENCY_MS * LATENCY_RATIO ** positions
    sigma = _noise_sigma(min(noise, 1.0 - noise)) if noise != 0.5 else 0.0

    cwidth = len(str(n_consumers))
    consumers = []
    for c in range(1, n_consumers + 1):
        seen = rng.random(n_services) < observe_prob
        if seen.sum() < 2:
            seen[rng.choice(n_services, size=2, replace=False)] = True
        if noise == 0.5:
            latency = rng.uniform(base.min(), base.max(), n_services)
        else:
            latency = base * np.exp(sigma * rng.standard_normal(n_services))
        # keep values representable with 6 fractional digits and positive
        latency = np.maximum(latency, 1e-6)
        samples = {
            truth[k]: float(format_number(latency[k]))
            for k in range(n_services) if seen[k]
        }
        consumers.append(ObservationSet(f"u{c:0{cwidth}d}", dict(sorted(samples.items()))))

    params = {"seed": int(seed), "n_services": n_services, "n_consumers": n_consumers,
              "noise": noise, "observe_prob": observe_prob}
    return Dataset(tuple(services), tuple(consumers), RankedList(tuple(truth)), params)
