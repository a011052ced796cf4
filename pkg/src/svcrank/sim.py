"""Deterministic discrete-event simulator of sub-clouds under automatic checkpointing.

Jobs arrive at the cloud service provider, are placed on a sub-cloud and run
non-preemptively once their resource demand fits. While running, a job
snapshots its progress every ``checkpoint_interval`` ms of work (paying
``checkpoint_overhead`` ms per snapshot). A sub-cloud failure rolls each of its
running jobs back to the latest snapshot. When a checkpoint completes, the
load of the job's sub-cloud is evaluated and the job may migrate, carrying
that checkpoint, to a less loaded sub-cloud.

Time is integer milliseconds; the event loop uses no randomness.
"""

from __future__ import annotations

import bisect
from collections import defaultdict
from collections.abc import Iterable, Mapping
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np

from .errors import (
    CapacityExceededError,
    InvalidValueError,
    InvariantViolation,
    NotRunningError,
    UnknownSubCloudError,
    UnschedulableJobError,
)
from .ranking import ObservationSet

PENDING, QUEUED, RUNNING, DONE = "pending", "queued", "running", "done"

# processing order for job transitions that fall on the same millisecond
_COMPLETE, _CHECKPOINT, _RESUME = 0, 1, 2


@dataclass(frozen=True)
class SubCloudSpec:
    id: str
    capacity: int


@dataclass(frozen=True)
class JobSpec:
    id: str
    consumer: str
    service: str
    arrival_time: int
    total_work: int
    demand: int = 1
    subcloud: str | None = None  # pin placement; None lets the provider choose


@dataclass(frozen=True)
class FailureSpec:
    subcloud: str
    time: int


def _int(value: Any, name: str, minimum: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < minimum:
        raise InvalidValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return value


@dataclass(frozen=True)
class SimConfig:
    subclouds: tuple[SubCloudSpec, ...]
    jobs: tuple[JobSpec, ...]
    checkpoint_interval: int
    checkpoint_overhead: int = 0
    failures: tuple[FailureSpec, ...] = ()
    migration_policy_threshold: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "subclouds", tuple(self.subclouds))
        object.__setattr__(self, "jobs", tuple(self.jobs))
        object.__setattr__(self, "failures", tuple(self.failures))
        _int(self.checkpoint_interval, "checkpoint_interval", 1)
        _int(self.checkpoint_overhead, "checkpoint_overhead", 0)
        _int(self.seed, "seed", 0)
        if self.seed >= 2**64:
            raise InvalidValueError(f"seed must fit in 64 bits, got {self.seed}")
        if not 0.0 <= self.migration_policy_threshold <= 1.0:
            raise InvalidValueError(
                f"migration_policy_threshold must lie in [0, 1], got {self.migration_policy_threshold!r}"
            )
        if not self.subclouds:
            raise InvalidValueError("at least one sub-cloud is required")
        ids = set()
        for sc in self.subclouds:
            _int(sc.capacity, f"capacity of sub-cloud {sc.id!r}", 1)
            if sc.id in ids:
                raise InvalidValueError(f"duplicate sub-cloud id {sc.id!r}")
            ids.add(sc.id)
        job_ids = set()
        for job in self.jobs:
            if job.id in job_ids:
                raise InvalidValueError(f"duplicate job id {job.id!r}")
            job_ids.add(job.id)
            _int(job.arrival_time, f"arrival_time of job {job.id!r}", 0)
            _int(job.total_work, f"total_work of job {job.id!r}", 1)
            _int(job.demand, f"demand of job {job.id!r}", 1)
            if job.subcloud is not None and job.subcloud not in ids:
                raise UnknownSubCloudError(f"job {job.id!r} is pinned to unknown sub-cloud {job.subcloud!r}")
        for f in self.failures:
            _int(f.time, "failure time", 0)
            if f.subcloud not in ids:
                raise UnknownSubCloudError(f"failure targets unknown sub-cloud {f.subcloud!r}")

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SimConfig:
        known = {"seed", "checkpoint_interval", "checkpoint_overhead", "subclouds", "jobs",
                 "failures", "migration_policy_threshold"}
        unknown = set(data) - known
        if unknown:
            raise InvalidValueError(f"unknown config keys: {sorted(unknown)}")
        try:
            return cls(
                subclouds=[SubCloudSpec(**sc) for sc in data["subclouds"]],
                jobs=[JobSpec(**job) for job in data.get("jobs", [])],
                checkpoint_interval=data["checkpoint_interval"],
                checkpoint_overhead=data.get("checkpoint_overhead", 0),
                failures=[FailureSpec(**f) for f in data.get("failures", [])],
                migration_policy_threshold=float(data.get("migration_policy_threshold", 1.0)),
                seed=data.get("seed", 0),
            )
        except (KeyError, TypeError) as exc:
            raise InvalidValueError(f"malformed simulation config: {exc}") from None

    def to_dict(self) -> dict[str, Any]:
        return {
            "seed": self.seed,
            "checkpoint_interval": self.checkpoint_interval,
            "checkpoint_overhead": self.checkpoint_overhead,
            "migration_policy_threshold": self.migration_policy_threshold,
            "subclouds": [asdict(sc) for sc in self.subclouds],
            "jobs": [asdict(job) for job in self.jobs],
            "failures": [asdict(f) for f in self.failures],
        }


@dataclass(frozen=True)
class Checkpoint:
    job: str
    taken_at: int
    progress_snapshot: int


@dataclass
class SubCloud:
    id: str
    capacity: int
    allocated: int = 0
    run_queue: list[str] = field(default_factory=list)
    running: list[str] = field(default_factory=list)

    @property
    def load(self) -> float:
        return self.allocated / self.capacity


@dataclass
class Job:
    id: str
    consumer: str
    service: str
    arrival_time: int
    total_work: int
    demand: int
    progress: int = 0
    migrations: int = 0
    state: str = PENDING
    location: str | None = None
    checkpoint: Checkpoint | None = None
    checkpoints_taken: int = 0
    # while computing, progress is exact as of `mark`; during checkpoint overhead
    # progress is frozen until `busy_until`
    mark: int = 0
    busy_until: int | None = None
    completion_time: int | None = None

    @property
    def queue_key(self) -> tuple[int, str, str]:
        return (self.arrival_time, self.service, self.id)


@dataclass(frozen=True)
class Event:
    t: int
    seq: int
    kind: str
    detail: Mapping[str, Any]

    def to_dict(self) -> dict[str, Any]:
        return {"t": self.t, "kind": self.kind, "detail": dict(self.detail)}


@dataclass(frozen=True)
class Observation:
    consumer: str
    service: str
    response_time_ms: int


@dataclass(frozen=True)
class SimTrace:
    events: tuple[Event, ...]
    observations: tuple[Observation, ...]
    migration_counts: Mapping[str, int]

    def to_dict(self) -> dict[str, Any]:
        return {
            "events": [e.to_dict() for e in self.events],
            "observations": [asdict(o) for o in self.observations],
            "migration_counts": dict(self.migration_counts),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> SimTrace:
        events = tuple(Event(e["t"], seq, e["kind"], e["detail"]) for seq, e in enumerate(data["events"]))
        observations = tuple(Observation(**o) for o in data["observations"])
        return cls(events, observations, dict(data["migration_counts"]))


class Simulator:
    """Mutable simulation state plus the event loop that drives it.

    ``run()`` executes to quiescence. The individual operations (``allocate``,
    ``take_checkpoint``, ``inject_failure``, ``migrate``) act at the current
    simulated time and may be called between ``advance_to`` calls.
    """

    def __init__(self, config: SimConfig):
        self.config = config
        self.now = 0
        self.subclouds = {sc.id: SubCloud(sc.id, sc.capacity) for sc in sorted(config.subclouds, key=lambda s: s.id)}
        largest = max(sc.capacity for sc in self.subclouds.values())
        self.jobs: dict[str, Job] = {}
        for spec in config.jobs:
            limit = self.subclouds[spec.subcloud].capacity if spec.subcloud else largest
            if spec.demand > limit:
                raise UnschedulableJobError(spec.id, spec.demand)
            self.jobs[spec.id] = Job(spec.id, spec.consumer, spec.service, spec.arrival_time,
                                     spec.total_work, spec.demand)
        self._pins = {spec.id: spec.subcloud for spec in config.jobs}
        self._arrivals = sorted(self.jobs.values(), key=lambda j: j.queue_key)
        self._failures = sorted((f.time, f.subcloud) for f in config.failures)
        self.events: list[Event] = []
        self.observations: list[Observation] = []

    # -- public operations --------------------------------------------------

    def evaluate_load(self) -> dict[str, float]:
        return {sc.id: sc.load for sc in self.subclouds.values()}

    def allocate(self, subcloud_id: str, demand: int) -> bool:
        """Reserve ``demand`` units if they fit; return whether they did."""
        if demand <= 0:
            raise ValueError(f"demand must be positive, got {demand}")
        sc = self._subcloud(subcloud_id)
        if sc.allocated + demand > sc.capacity:
            return False
        sc.allocated += demand
        return True

    def progress_of(self, job_id: str) -> int:
        job = self._job(job_id)
        if job.state == RUNNING and job.busy_until is None:
            return job.progress + (self.now - job.mark)
        return job.progress

    def take_checkpoint(self, job_id: str) -> Checkpoint:
        job = self._job(job_id)
        if job.state != RUNNING:
            raise NotRunningError(f"job {job_id!r} is {job.state}, not running")
        self._sync(job)
        cp = Checkpoint(job.id, self.now, job.progress)
        job.checkpoint = cp
        job.checkpoints_taken += 1
        overhead = self.config.checkpoint_overhead
        if overhead:
            job.busy_until = (job.busy_until or self.now) + overhead
        self._emit("checkpoint", job=job.id, subcloud=job.location, progress=job.progress)
        return cp

    def inject_failure(self, subcloud_id: str, at: int | None = None) -> list[str]:
        """Fail a sub-cloud now, or schedule the failure for a later time.

        Running jobs roll back to their latest checkpoint (or to zero) and
        re-enter the run queue. Returns the ids of the rolled-back jobs.
        """
        sc = self._subcloud(subcloud_id)
        if at is not None and at != self.now:
            if at < self.now:
                raise ValueError(f"cannot inject a failure at {at}, clock is already at {self.now}")
            bisect.insort(self._failures, (at, subcloud_id))
            return []
        victims = sorted(sc.running)
        self._emit("failure", subcloud=sc.id, running=victims)
        for job_id in victims:
            job = self.jobs[job_id]
            before, restored = self._roll_back(job)
            sc.running.remove(job_id)
            sc.allocated -= job.demand
            self._enqueue(sc, job)
            self._emit("rollback", job=job.id, subcloud=sc.id, from_progress=before,
                       to_progress=restored, lost=before - restored)
        return victims

    def migrate(self, job_id: str, src: str, dst: str) -> None:
        """Move a job to ``dst``; it resumes there from its latest checkpoint."""
        source, dest = self._subcloud(src), self._subcloud(dst)
        job = self._job(job_id)
        if job.location != src or job.state not in (RUNNING, QUEUED):
            raise NotRunningError(f"job {job_id!r} is not placed on sub-cloud {src!r}")
        if src == dst:
            raise ValueError("source and destination sub-cloud are the same")
        if dest.capacity - dest.allocated < job.demand:
            raise CapacityExceededError(
                f"sub-cloud {dst!r} has {dest.capacity - dest.allocated} free units, job {job_id!r} needs {job.demand}"
            )
        before, restored = self._roll_back(job)
        if job.state == RUNNING:
            source.running.remove(job_id)
            source.allocated -= job.demand
        else:
            source.run_queue.remove(job_id)
        job.migrations += 1
        self._enqueue(dest, job)
        self._emit("migration", job=job.id, source=src, destination=dst,
                   from_progress=before, to_progress=restored)

    # -- event loop ---------------------------------------------------------

    def quiescent(self) -> bool:
        return all(job.state == DONE for job in self.jobs.values())

    def step(self) -> bool:
        """Process every event at the next event time. False once quiescent."""
        self._dispatch()
        if self.quiescent():
            return False
        t = self._next_time()
        if t is None:
            raise InvariantViolation(f"jobs are waiting at t={self.now} but nothing can make progress")
        self.now = t
        self._process(t)
        self._dispatch()
        self._check_capacity()
        return True

    def advance_to(self, t: int) -> None:
        """Process all events up to and including ``t`` and move the clock to ``t``."""
        if t < self.now:
            raise ValueError(f"cannot move the clock back from {self.now} to {t}")
        while True:
            self._dispatch()
            nxt = None if self.quiescent() else self._next_time()
            if nxt is None or nxt > t:
                break
            self.step()
        self.now = t

    def run(self) -> SimTrace:
        while self.step():
            pass
        return self.trace()

    def trace(self) -> SimTrace:
        return SimTrace(
            events=tuple(self.events),
            observations=tuple(self.observations),
            migration_counts={job_id: self.jobs[job_id].migrations for job_id in sorted(self.jobs)},
        )

    # -- internals ----------------------------------------------------------

    def _subcloud(self, subcloud_id: str) -> SubCloud:
        try:
            return self.subclouds[subcloud_id]
        except KeyError:
            raise UnknownSubCloudError(f"unknown sub-cloud {subcloud_id!r}") from None

    def _job(self, job_id: str) -> Job:
        try:
            return self.jobs[job_id]
        except KeyError:
            raise KeyError(f"unknown job {job_id!r}") from None

    def _emit(self, kind: str, **detail: Any) -> None:
        self.events.append(Event(self.now, len(self.events), kind, detail))

    def _sync(self, job: Job) -> None:
        if job.state == RUNNING and job.busy_until is None:
            job.progress += self.now - job.mark
            job.mark = self.now

    def _roll_back(self, job: Job) -> tuple[int, int]:
        self._sync(job)
        before = job.progress
        job.progress = job.checkpoint.progress_snapshot if job.checkpoint else 0
        job.busy_until = None
        return before, job.progress

    def _enqueue(self, sc: SubCloud, job: Job) -> None:
        job.state = QUEUED
        job.location = sc.id
        keys = [self.jobs[j].queue_key for j in sc.run_queue]
        sc.run_queue.insert(bisect.bisect(keys, job.queue_key), job.id)

    def _target(self, job: Job) -> int:
        # next checkpoint on the interval grid; none is taken at completion
        interval = self.config.checkpoint_interval
        nxt = (job.progress // interval + 1) * interval
        return nxt if nxt < job.total_work else job.total_work

    def _transition(self, job: Job) -> tuple[int, int]:
        if job.busy_until is not None:
            return job.busy_until, _RESUME
        target = self._target(job)
        kind = _COMPLETE if target == job.total_work else _CHECKPOINT
        return job.mark + (target - job.progress), kind

    def _running(self) -> list[Job]:
        return [self.jobs[j] for sc in self.subclouds.values() for j in sc.running]

    def _next_time(self) -> int | None:
        times = [self._transition(job)[0] for job in self._running()]
        pending = [job for job in self._arrivals if job.state == PENDING]
        if pending:
            times.append(pending[0].arrival_time)
        if self._failures:
            times.append(self._failures[0][0])
        return min(times) if times else None

    def _process(self, t: int) -> None:
        due = []
        for job in self._running():
            when, kind = self._transition(job)
            if when == t:
                due.append((kind, job.id))
        for kind, job_id in sorted(due):
            job = self.jobs[job_id]
            if kind == _COMPLETE:
                self._complete(job)
            elif kind == _CHECKPOINT:
                self._sync(job)
                self.take_checkpoint(job.id)
                if job.busy_until is None:
                    self._after_checkpoint(job)
            else:
                job.busy_until = None
                job.mark = t
                self._after_checkpoint(job)

        while self._failures and self._failures[0][0] == t:
            _, subcloud_id = self._failures.pop(0)
            self.inject_failure(subcloud_id)

        for job in self._arrivals:
            if job.state == PENDING and job.arrival_time == t:
                sc = self._place(job)
                self._enqueue(sc, job)
                self._emit("arrival", job=job.id, consumer=job.consumer, service=job.service, subcloud=sc.id)

    def _complete(self, job: Job) -> None:
        self._sync(job)
        if job.progress != job.total_work:
            raise InvariantViolation(f"job {job.id} completed with progress {job.progress}/{job.total_work}")
        sc = self.subclouds[job.location]
        sc.running.remove(job.id)
        sc.allocated -= job.demand
        job.state = DONE
        job.completion_time = self.now
        response = self.now - job.arrival_time
        self.observations.append(Observation(job.consumer, job.service, response))
        self._emit("complete", job=job.id, subcloud=sc.id, response_time_ms=response)

    def _after_checkpoint(self, job: Job) -> None:
        threshold = self.config.migration_policy_threshold
        src = self.subclouds[job.location]
        if src.load <= threshold:
            return
        # only destinations that can start the job at once and stay at or under the threshold
        options = [
            sc for sc in self.subclouds.values()
            if sc.id != src.id and not sc.run_queue and (sc.allocated + job.demand) / sc.capacity <= threshold
        ]
        if options:
            dest = min(options, key=lambda sc: (sc.load, sc.id))
            self.migrate(job.id, src.id, dest.id)

    def _place(self, job: Job) -> SubCloud:
        pinned = self._pins.get(job.id)
        if pinned is not None:
            return self.subclouds[pinned]
        fits = [sc for sc in self.subclouds.values() if sc.capacity >= job.demand]

        def pressure(sc: SubCloud) -> tuple[float, str]:
            queued = sum(self.jobs[j].demand for j in sc.run_queue)
            return (sc.allocated + queued) / sc.capacity, sc.id

        return min(fits, key=pressure)

    def _dispatch(self) -> None:
        # strict FIFO per sub-cloud: a head job that does not fit blocks the rest
        for sc in self.subclouds.values():
            while sc.run_queue:
                job = self.jobs[sc.run_queue[0]]
                if not self.allocate(sc.id, job.demand):
                    break
                sc.run_queue.pop(0)
                sc.running.append(job.id)
                job.state = RUNNING
                job.mark = self.now
                job.busy_until = None
                self._emit("dispatch", job=job.id, subcloud=sc.id, progress=job.progress)

    def _check_capacity(self) -> None:
        for sc in self.subclouds.values():
            used = sum(self.jobs[j].demand for j in sc.running)
            if used != sc.allocated or not 0 <= sc.allocated <= sc.capacity:
                raise InvariantViolation(
                    f"sub-cloud {sc.id} at t={self.now}: allocated {sc.allocated}, "
                    f"running demand {used}, capacity {sc.capacity}"
                )


def run(config: SimConfig) -> SimTrace:
    return Simulator(config).run()


def observations_from_trace(trace: SimTrace) -> list[ObservationSet]:
    """Group completed-job response times by consumer, averaging repeats."""
    times: dict[str, dict[str, list[int]]] = defaultdict(lambda: defaultdict(list))
    for obs in trace.observations:
        times[obs.consumer][obs.service].append(obs.response_time_ms)
    return [
        ObservationSet(consumer, {s: sum(v) / len(v) for s, v in sorted(per_service.items())})
        for consumer, per_service in sorted(times.items())
    ]


def random_config(
    seed: int,
    *,
    max_subclouds: int = 4,
    max_jobs: int = 16,
    checkpoint_overhead: int | None = None,
    failures: bool = True,
    migration_policy_threshold: float | None = None,
    n_consumers: int = 4,
    services: Iterable[str] = ("s1", "s2", "s3", "s4", "s5"),
) -> SimConfig:
    """Seeded random scenario; arguments left as None are drawn at random."""
    rng = np.random.default_rng(seed)
    services = list(services)
    n_sub = int(rng.integers(1, max_subclouds + 1))
    subclouds = [SubCloudSpec(f"sc{i}", int(rng.integers(1, 11))) for i in range(n_sub)]
    largest = max(sc.capacity for sc in subclouds)
    jobs = [
        JobSpec(
            id=f"j{i:03d}",
            consumer=f"u{int(rng.integers(n_consumers))}",
            service=services[int(rng.integers(len(services)))],
            arrival_time=int(rng.integers(0, 20_000)),
            total_work=int(rng.integers(500, 20_001)),
            demand=int(rng.integers(1, largest + 1)),
        )
        for i in range(int(rng.integers(1, max_jobs + 1)))
    ]
    interval = int(rng.integers(500, 5_001))
    overhead = int(rng.integers(0, 201)) if checkpoint_overhead is None else checkpoint_overhead
    failure_specs = []
    if failures:
        failure_specs = [
            FailureSpec(f"sc{int(rng.integers(n_sub))}", int(rng.integers(0, 60_000)))
            for _ in range(int(rng.integers(0, 6)))
        ]
    if migration_policy_threshold is None:
        migration_policy_threshold = round(float(rng.uniform(0.3, 1.0)), 2)
    return SimConfig(
        subclouds=subclouds,
        jobs=jobs,
        checkpoint_interval=interval,
        checkpoint_overhead=overhead,
        failures=failure_specs,
        migration_policy_threshold=migration_policy_threshold,
        seed=seed,
    )
