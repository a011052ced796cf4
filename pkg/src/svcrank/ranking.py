"""Predict a consumer's ranking of cloud services from response-time observations.

Past consumers whose service orderings agree with the active consumer
(positive correspondence value) are treated as evidence. Each source turns
its ordering into per-service quality scores, the scores are averaged, and
pairwise score differences (prefer values) are summed into priority values.
Sorting by priority value gives the predicted ranking.

Scores are kept as :class:`fractions.Fraction` so that prefer and priority
values are exact; comparisons on arbitrary real inputs use ``TOLERANCE``.
"""

from __future__ import annotations

import math
from bisect import bisect_right
from collections import defaultdict
from collections.abc import Collection, Iterable, Iterator, Mapping
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Real

from .errors import (
    EmptyUniverseError,
    InsufficientOverlapError,
    InvalidContextError,
    InvalidValueError,
    NoServicesError,
)

TOLERANCE = 1e-9

ServiceId = str


@dataclass(frozen=True)
class ObservationSet:
    """Response times (ms) one consumer observed, at most one per service."""

    consumer: str
    samples: Mapping[ServiceId, float]

    def __post_init__(self):
        samples = dict(self.samples)
        for service, rt in samples.items():
            if not isinstance(service, str) or not service:
                raise InvalidValueError(f"invalid service id {service!r}")
            if not math.isfinite(rt) or rt <= 0:
                raise InvalidValueError(
                    f"response time for {self.consumer}/{service} must be positive and finite, got {rt!r}"
                )
        object.__setattr__(self, "samples", samples)

    def __len__(self) -> int:
        return len(self.samples)


@dataclass(frozen=True)
class QualityScore:
    service: ServiceId
    score: Real


@dataclass(frozen=True)
class RankedList:
    """A strict ordering of services, rank 1 first."""

    ordering: tuple[ServiceId, ...]
    rank_of: Mapping[ServiceId, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        ordering = tuple(self.ordering)
        rank_of = {s: pos for pos, s in enumerate(ordering, 1)}
        if len(rank_of) != len(ordering):
            raise ValueError(f"ordering contains duplicate services: {ordering}")
        object.__setattr__(self, "ordering", ordering)
        object.__setattr__(self, "rank_of", rank_of)

    def __len__(self) -> int:
        return len(self.ordering)

    def __iter__(self) -> Iterator[ServiceId]:
        return iter(self.ordering)

    @property
    def services(self) -> frozenset[ServiceId]:
        return frozenset(self.ordering)


@dataclass(frozen=True)
class CorrespondenceValue:
    n: int
    a: int
    b: int
    cv: float


@dataclass(frozen=True)
class PreferenceMatrix:
    services: tuple[ServiceId, ...]
    p: Mapping[tuple[ServiceId, ServiceId], Real]

    def __getitem__(self, pair: tuple[ServiceId, ServiceId]) -> Real:
        return self.p[pair]


@dataclass(frozen=True)
class PriorityVector:
    pv: Mapping[ServiceId, Real]

    def __getitem__(self, service: ServiceId) -> Real:
        return self.pv[service]

    def __len__(self) -> int:
        return len(self.pv)

    def total(self) -> Real:
        return sum(self.pv.values())


@dataclass(frozen=True)
class RankingContext:
    active: ObservationSet
    history: tuple[ObservationSet, ...] = ()
    implicit: frozenset[ServiceId] = frozenset()

    def __post_init__(self):
        history = tuple(self.history)
        implicit = frozenset(self.implicit)
        object.__setattr__(self, "history", history)
        object.__setattr__(self, "implicit", implicit)
        stray = implicit - self.active.samples.keys()
        if stray:
            raise InvalidContextError(
                f"implicit services {sorted(stray)} were never observed by consumer {self.active.consumer!r}"
            )
        ids = [h.consumer for h in history]
        if len(set(ids)) != len(ids):
            raise InvalidContextError("history contains duplicate consumer ids")


@dataclass(frozen=True)
class Prediction:
    """Output of :func:`predict` with the intermediates that produced it.

    ``priorities`` covers every ranked service; services nobody observed map
    to ``None``.
    """

    ranking: RankedList
    priorities: Mapping[ServiceId, Real | None]
    correspondents: frozenset[str]
    scores: Mapping[ServiceId, QualityScore]


def _unique(services: Iterable[ServiceId]) -> list[ServiceId]:
    return list(dict.fromkeys(services))


def rank_from_observations(obs: ObservationSet, universe: Iterable[ServiceId]) -> RankedList:
    """Order ``universe`` by ascending response time.

    Ties break by service id. Services without a sample go last, in id order.
    """
    universe = _unique(universe)
    if not universe:
        raise EmptyUniverseError("cannot rank an empty set of services")
    samples = obs.samples
    sampled = sorted((s for s in universe if s in samples), key=lambda s: (samples[s], s))
    unsampled = sorted(s for s in universe if s not in samples)
    return RankedList(tuple(sampled + unsampled))


def _inversions(seq: list[int]) -> int:
    """Number of pairs i < j with seq[i] > seq[j]; O(n log n) comparisons."""
    seen: list[int] = []
    count = 0
    for x in seq:
        pos = bisect_right(seen, x)
        count += len(seen) - pos
        seen.insert(pos, x)
    return count


def count_pairs(r1: RankedList, r2: RankedList, common: Collection[ServiceId]) -> tuple[int, int]:
    """Count (consistent, variant) pairs of ``common`` between two rankings."""
    common = _unique(common)
    n = len(common)
    if n < 2:
        raise InsufficientOverlapError(f"need at least 2 shared services, got {n}")
    rank1, rank2 = r1.rank_of, r2.rank_of
    missing = [s for s in common if s not in rank1 or s not in rank2]
    if missing:
        raise ValueError(f"services {missing} are not ranked by both lists")
    # r2's ranks read in r1's order; every inversion is a variant pair
    seq = [rank2[s] for s in sorted(common, key=rank1.__getitem__)]
    b = _inversions(seq)
    return n * (n - 1) // 2 - b, b


def _correspondence(n: int, a: int, b: int) -> CorrespondenceValue:
    return CorrespondenceValue(n=n, a=a, b=b, cv=(a - b) / (n * (n - 1) // 2))


def correspondence_value(obs_x: ObservationSet, obs_y: ObservationSet) -> CorrespondenceValue:
    """Rank correlation of two consumers over the services both observed.

    Fewer than two shared services carry no pair evidence and give ``cv = 0``.
    """
    common = [s for s in obs_x.samples if s in obs_y.samples]
    n = len(common)
    if n < 2:
        return CorrespondenceValue(n=n, a=0, b=0, cv=0.0)
    # same orderings rank_from_observations gives when restricted to common
    x, y = obs_x.samples, obs_y.samples
    rank_y = {s: pos for pos, s in enumerate(sorted(common, key=lambda s: (y[s], s)))}
    b = _inversions([rank_y[s] for s in sorted(common, key=lambda s: (x[s], s))])
    return _correspondence(n, n * (n - 1) // 2 - b, b)


def rank_correlation(r1: RankedList, r2: RankedList) -> CorrespondenceValue:
    """Correspondence value of two rankings over the services they share."""
    common = [s for s in r1.ordering if s in r2.rank_of]
    n = len(common)
    if n < 2:
        return CorrespondenceValue(n=n, a=0, b=0, cv=0.0)
    a, b = count_pairs(r1, r2, common)
    return _correspondence(n, a, b)


def correspondences(ctx: RankingContext) -> dict[str, CorrespondenceValue]:
    return {h.consumer: correspondence_value(ctx.active, h) for h in ctx.history}


def select_correspondent_nodes(ctx: RankingContext) -> frozenset[str]:
    """Historical consumers with strictly positive correspondence to the active one."""
    return frozenset(c for c, v in correspondences(ctx).items() if v.cv > 0)


def quality_scores(ctx: RankingContext, correspondents: Collection[str]) -> dict[ServiceId, QualityScore]:
    """Average per-source scores ``n - position + 1`` over the active consumer
    and the selected correspondents; each source ranks only what it sampled."""
    sources = [ctx.active] + [h for h in ctx.history if h.consumer in correspondents]
    totals: dict[ServiceId, int] = defaultdict(int)
    counts: dict[ServiceId, int] = defaultdict(int)
    for src in sources:
        if not src.samples:
            continue
        ranking = rank_from_observations(src, src.samples)
        n = len(ranking)
        for pos, service in enumerate(ranking.ordering, 1):
            totals[service] += n - pos + 1
            counts[service] += 1
    return {s: QualityScore(s, Fraction(totals[s], counts[s])) for s in sorted(totals)}


def prefer_value(sx: QualityScore, sy: QualityScore) -> Real:
    """Positive when ``sx`` is preferred over ``sy``."""
    if sx.service == sy.service:
        raise ValueError(f"prefer value needs two distinct services, got {sx.service!r} twice")
    return sx.score - sy.score


def preference_matrix(scores: Mapping[ServiceId, QualityScore]) -> PreferenceMatrix:
    if not scores:
        raise NoServicesError("preference matrix needs at least one scored service")
    services = tuple(scores)
    p: dict[tuple[ServiceId, ServiceId], Real] = {}
    for x in services:
        for y in services:
            p[x, y] = 0 if x == y else prefer_value(scores[x], scores[y])
    return PreferenceMatrix(services, p)


def priority_values(m: PreferenceMatrix) -> PriorityVector:
    return PriorityVector({x: sum(m.p[x, y] for y in m.services) for x in m.services})


def assemble_ranking(pv: PriorityVector | Mapping[ServiceId, Real],
                     implicit: Collection[ServiceId] = frozenset()) -> RankedList:
    """Sort services by descending priority value.

    Services within ``TOLERANCE`` of the highest value in their group count as
    tied; ties put implicit services first, then fall back to service id.
    """
    values = pv.pv if isinstance(pv, PriorityVector) else pv
    if not values:
        raise NoServicesError("cannot assemble a ranking from an empty priority vector")
    implicit = frozenset(implicit)
    items = sorted(values.items(), key=lambda kv: (-kv[1], kv[0]))
    ordering: list[ServiceId] = []
    i = 0
    while i < len(items):
        # groups are anchored at their top value so a group never spans more than TOLERANCE
        top = items[i][1]
        j = i + 1
        while j < len(items) and items[j][1] >= top - TOLERANCE:
            j += 1
        group = sorted(items[i:j], key=lambda kv: (kv[0] not in implicit, kv[0]))
        ordering.extend(s for s, _ in group)
        i = j
    return RankedList(tuple(ordering))


def predict(ctx: RankingContext, universe: Iterable[ServiceId]) -> Prediction:
    universe = _unique(universe)
    if not universe:
        raise EmptyUniverseError("cannot rank an empty set of services")
    in_universe = set(universe)
    correspondents = select_correspondent_nodes(ctx)
    scores = {s: q for s, q in quality_scores(ctx, correspondents).items() if s in in_universe}

    ordering: list[ServiceId] = []
    priorities: dict[ServiceId, Real | None] = {}
    if scores:
        pv = priority_values(preference_matrix(scores))
        ordering.extend(assemble_ranking(pv, ctx.implicit & scores.keys()).ordering)
        priorities.update(pv.pv)
    for service in sorted(in_universe - scores.keys()):
        ordering.append(service)
        priorities[service] = None
    ranking = RankedList(tuple(ordering))
    priorities = {s: priorities[s] for s in ranking.ordering}
    return Prediction(ranking, priorities, correspondents, scores)


def predict_ranking(ctx: RankingContext, universe: Iterable[ServiceId]) -> RankedList:
    """Predicted ranking of ``universe`` for the active consumer in ``ctx``."""
    return predict(ctx, universe).ranking
