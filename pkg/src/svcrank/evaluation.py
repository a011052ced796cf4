"""Leave-information-out evaluation of the rank predictor."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataio import Dataset
from .errors import DataError, InvalidParameterError
from .ranking import (
    CorrespondenceValue,
    ObservationSet,
    RankingContext,
    predict_ranking,
    rank_correlation,
    rank_from_observations,
)


@dataclass(frozen=True)
class EvalReport:
    per_consumer: dict[str, CorrespondenceValue]
    mean_cv: float
    reference: str  # "ground_truth" or "self"


def mask_samples(obs: ObservationSet, holdout: float, rng: np.random.Generator) -> ObservationSet:
    """Copy of ``obs`` with ``floor(holdout * n)`` samples hidden, keeping at least one."""
    services = sorted(obs.samples)
    k = min(int(holdout * len(services)), max(len(services) - 1, 0))
    hidden = set(rng.choice(services, size=k, replace=False).tolist()) if k else set()
    return ObservationSet(obs.consumer, {s: rt for s, rt in obs.samples.items() if s not in hidden})


def evaluate(dataset: Dataset, holdout: float = 0.0, seed: int = 0) -> EvalReport:
    """Predict every consumer's ranking from everyone else plus a masked copy
    of its own samples, and score it against the ground truth (or, without
    one, against the consumer's own full-information ranking)."""
    if not 0.0 <= holdout < 1.0:
        raise InvalidParameterError(f"holdout must lie in [0, 1), got {holdout}")
    if not dataset.consumers or (dataset.ground_truth is None and len(dataset.consumers) < 2):
        raise DataError("evaluation needs a ground truth or at least two consumers")

    per_consumer = {}
    for i, obs in enumerate(dataset.consumers):
        rng = np.random.default_rng([seed, i])
        ctx = RankingContext(
            mask_samples(obs, holdout, rng),
            tuple(o for o in dataset.consumers if o.consumer != obs.consumer),
        )
        predicted = predict_ranking(ctx, dataset.services)
        if dataset.ground_truth is not None:
            reference = dataset.ground_truth
        else:
            reference = rank_from_observations(obs, obs.samples) if obs.samples else predicted
        per_consumer[obs.consumer] = rank_correlation(predicted, reference)

    mean = math.fsum(v.cv for v in per_consumer.values()) / len(per_consumer)
    return EvalReport(per_consumer, mean, "ground_truth" if dataset.ground_truth is not None else "self")
