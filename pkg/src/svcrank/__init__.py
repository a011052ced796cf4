"""Cloud service rank prediction and a checkpoint-based load-balancing simulator."""

__version__ = "0.1.0"

from .ranking import (  # noqa: E402
    CorrespondenceValue,
    ObservationSet,
    PreferenceMatrix,
    Prediction,
    PriorityVector,
    QualityScore,
    RankedList,
    RankingContext,
    assemble_ranking,
    correspondence_value,
    count_pairs,
    predict,
    predict_ranking,
    preference_matrix,
    prefer_value,
    priority_values,
    quality_scores,
    rank_correlation,
    rank_from_observations,
    select_correspondent_nodes,
)
from .sim import Checkpoint, SimConfig, SimTrace, Simulator, observations_from_trace, run  # noqa: E402

__all__ = [
    "Checkpoint",
    "CorrespondenceValue",
    "ObservationSet",
    "PreferenceMatrix",
    "Prediction",
    "PriorityVector",
    "QualityScore",
    "RankedList",
    "RankingContext",
    "SimConfig",
    "SimTrace",
    "Simulator",
    "assemble_ranking",
    "correspondence_value",
    "count_pairs",
    "observations_from_trace",
    "predict",
    "predict_ranking",
    "preference_matrix",
    "prefer_value",
    "priority_values",
    "quality_scores",
    "rank_correlation",
    "rank_from_observations",
    "run",
    "select_correspondent_nodes",
]
