"""Discrete-event simulation of a volunteer computing grid running the ANM driver.

The server side follows the usual work generator / validator / assimilator
split. Workers pull work when idle, take a lognormal amount of virtual time
per evaluation, may silently drop a workunit (``p_fail``) or return a
corrupted fitness (``p_malicious``). Lost work is recovered through deadlines.

Every evaluation handed to a worker is a :class:`Workunit`. Workunits that
evaluate the same point for validation belong to one validation group. Three
validation policies are supported:

``none``
    every returned result is trusted.
``lazy``
    results enter the phase pool unvalidated; only results the driver will
    actually consume (the whole regression pool, or the line-search winner)
    get one confirming replica on a different worker.
``full``
    every point needs ``replicas_required`` matching results before it
    enters the pool.

A phase completes on the first ``m`` pooled results (after any required
validation); later results for that phase are discarded stragglers.
"""
from __future__ import annotations

import heapq
import itertools
import json
import logging
from collections import deque
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from .anm import ANMConfig, ANMDriver, LINE_SEARCHING, REGRESSING
from .core import EvaluationRecord, ObjectiveSpec, fork_rng
from .line_search import select_best
from .trace import Trace

log = logging.getLogger(__name__)

PENDING = "pending"
RETURNED = "returned"
VALIDATED = "validated"
ACCEPTED = "accepted"
INVALIDATED = "invalidated"
EXPIRED = "expired"
DISCARDED = "discarded"

POLICIES = ("none", "lazy", "full")


@dataclass(frozen=True)
class WorkerProfile:
    worker_id: int
    speed_factor: float
    latency_mu: float
    latency_sigma: float
    p_fail: float
    p_malicious: float
    request_rate: float

    def __post_init__(self):
        # p_fail == 1 is allowed so liveness guards can be exercised
        if not 0 <= self.p_fail <= 1 or not 0 <= self.p_malicious < 1:
            raise ValueError("worker probabilities out of range")
        if self.speed_factor <= 0 or self.request_rate <= 0:
            raise ValueError("speed factor and request rate must be positive")

    @property
    def mean_latency(self) -> float:
        return float(np.exp(self.latency_mu + 0.5 * self.latency_sigma ** 2))


@dataclass
class GridConfig:
    num_workers: int = 100
    validation: str = "lazy"
    # matching results per point under full validation
    replicas_required: int = 2
    deadline_multiplier: float = 10.0
    fuzzy_tolerance: float = 1e-9
    p_fail: float = 0.0
    p_malicious: float = 0.0
    # lognormal spread of per-worker speed factors (median 1)
    speed_sigma: float = 0.5
    # lognormal spread of per-evaluation latency; the mean latency is 1
    latency_sigma: float = 0.5
    # mean work requests per unit virtual time for an idle worker
    request_rate: float = 10.0
    max_virtual_time: float = 1e6
    rng_seed: int = 0
    plan_quantum: int = 1
    # most copies of one point in flight while it awaits validation
    hedge_limit: int = 3
    # mean virtual time before a worker that got no work asks again
    idle_retry: float = 1.0
    replay_stragglers: bool = False
    record_events: bool = True

    def __post_init__(self):
        if self.num_workers < 1:
            raise ValueError("num_workers must be at least 1")
        if self.validation not in POLICIES:
            raise ValueError(f"validation must be one of {POLICIES}")
        if self.validation == "full" and self.replicas_required < 2:
            raise ValueError("full validation needs replicas_required >= 2")
        if not 0 <= self.p_malicious < 1 or not 0 <= self.p_fail <= 1:
            raise ValueError("p_fail must lie in [0, 1] and p_malicious in [0, 1)")
        if self.deadline_multiplier <= 0 or self.fuzzy_tolerance < 0 or self.plan_quantum < 1:
            raise ValueError("invalid deadline, tolerance or plan quantum")

    def make_workers(self) -> list[WorkerProfile]:
        rng = fork_rng(self.rng_seed, 1)
        speeds = rng.lognormal(0.0, self.speed_sigma, self.num_workers) if self.speed_sigma > 0 \
            else np.ones(self.num_workers)
        mu = -0.5 * self.latency_sigma ** 2
        return [WorkerProfile(i, float(speeds[i]), mu, self.latency_sigma, self.p_fail,
                              self.p_malicious, self.request_rate)
                for i in range(self.num_workers)]


@dataclass(frozen=True)
class ResultRecord:
    workunit_id: int
    worker_id: int
    fitness: float
    returned_at: float
    # ground truth for tests; the server never reads it
    corrupted: bool = False


@dataclass(eq=False)
class Workunit:
    id: int
    point: np.ndarray
    kind: str
    iteration: int
    tag: tuple
    group: int
    worker_id: int
    issued_at: float
    deadline: float
    replica: bool = False
    status: str = PENDING
    result: Optional[ResultRecord] = None


@dataclass(eq=False)
class _Group:
    id: int
    point: np.ndarray
    tag: tuple
    needed: int
    members: list = field(default_factory=list)
    results: list = field(default_factory=list)
    outstanding: int = 0
    queued: int = 0
    validated: bool = False
    dead: bool = False
    pooled: bool = False

    @property
    def shortfall(self) -> int:
        return self.needed - len(self.results) - self.outstanding - self.queued


@dataclass
class GridStats:
    issued: int = 0
    replicas_issued: int = 0
    returned: int = 0
    lost: int = 0
    validated: int = 0
    accepted: int = 0
    invalidated: int = 0
    expired: int = 0
    discarded: int = 0
    in_flight: int = 0
    wasted_evaluations: int = 0
    consumed: int = 0
    consumed_corrupted: int = 0
    delivered_unvalidated_corrupted: int = 0
    corrupted_returned: int = 0
    phase_transitions: int = 0
    makespan: float = 0.0
    timed_out: bool = False
    per_worker: dict = field(default_factory=dict)
    events: list = field(default_factory=list)

    def summary(self) -> dict:
        d = asdict(self)
        d.pop("events")
        return d

    def to_jsonl(self) -> str:
        return "".join(json.dumps(e, sort_keys=True) + "\n" for e in self.events)


def fuzzy_match(a: float, b: float, tolerance: float) -> bool:
    return a == b or abs(a - b) <= tolerance * max(abs(a), abs(b))


class GridServer:
    """Work generation, validation and assimilation for one ANM driver."""

    def __init__(self, driver: ANMDriver, config: GridConfig, workers: list[WorkerProfile]):
        self.driver = driver
        self.config = config
        self.workers = {w.worker_id: w for w in workers}
        self.stats = GridStats(per_worker={w.worker_id: dict(issued=0, returned=0, lost=0, invalidated=0)
                                           for w in workers})
        self.workunits: dict[int, Workunit] = {}
        self._groups: dict[int, _Group] = {}
        self._ids = itertools.count()
        self._gids = itertools.count()
        self._planned: deque = deque()
        self._queue: deque = deque()  # groups waiting for another member
        self._pool: list[_Group] = []
        self._deadlines: list = []
        self._tag = driver.tag
        self._phase_groups: list[_Group] = []
        self._waiting: list[_Group] = []
        self.now = 0.0

    def _log(self, event: str, **kw) -> None:
        if self.config.record_events:
            self.stats.events.append({"t": self.now, "event": event, **kw})

    @property
    def _needed_per_point(self) -> int:
        return self.config.replicas_required if self.config.validation == "full" else 1

    def _new_group(self, point: np.ndarray) -> _Group:
        g = _Group(next(self._gids), point, self._tag, self._needed_per_point)
        self._groups[g.id] = g
        self._phase_groups.append(g)
        return g

    def _enqueue(self, g: _Group) -> None:
        for _ in range(max(g.shortfall, 0)):
            g.queued += 1
            self._queue.append(g)

    def _issue(self, g: _Group, worker: WorkerProfile, cost: float) -> Workunit:
        expected = worker.speed_factor * cost * worker.mean_latency
        wu = Workunit(next(self._ids), g.point, "regression" if self._tag[1] == REGRESSING else "line_search",
                      self._tag[0], self._tag, g.id, worker.worker_id, self.now,
                      self.now + self.config.deadline_multiplier * expected, replica=bool(g.members))
        g.members.append(wu.id)
        g.outstanding += 1
        self.workunits[wu.id] = wu
        heapq.heappush(self._deadlines, (wu.deadline, wu.id))
        self.stats.issued += 1
        self.stats.replicas_issued += wu.replica
        self.stats.per_worker[worker.worker_id]["issued"] += 1
        self._log("issue", wu=wu.id, worker=worker.worker_id, kind=wu.kind, iteration=wu.iteration,
                  replica=wu.replica, deadline=wu.deadline)
        return wu

    def _holds(self, g: _Group, worker: WorkerProfile) -> bool:
        # a replica must come from a worker without a live or returned copy of the point
        return any(self.workunits[m].worker_id == worker.worker_id
                   and self.workunits[m].status in (PENDING, RETURNED) for m in g.members)

    def generate_work(self, worker: WorkerProfile) -> Optional[Workunit]:
        """Hand the requesting worker a replica/reissue if one is waiting, else a fresh point."""
        if self.driver.terminal:
            return None
        cost = self.driver.objective.simulated_cost
        solo = len(self.workers) == 1
        for _ in range(len(self._queue)):
            g = self._queue.popleft()
            if g.dead or g.tag != self._tag:
                continue
            if not solo and self._holds(g, worker):
                self._queue.append(g)
                continue
            g.queued -= 1
            return self._issue(g, worker, cost)
        if len(self._pool) < self.driver.results_needed:
            if not self._planned:
                self._planned.extend(self.driver.plan_batch(self.config.plan_quantum))
            g = self._new_group(self._planned.popleft())
            wu = self._issue(g, worker, cost)
            self._enqueue(g)
            return wu
        # enough results are in; hedge against lost replicas of results awaiting validation
        for g in self._waiting:
            if (not g.validated and not g.dead and g.outstanding < self.config.hedge_limit
                    and (solo or not self._holds(g, worker))):
                return self._issue(g, worker, cost)
        return None

    def submit_result(self, result: ResultRecord) -> str:
        """Route a returned result; returns what happened to it."""
        wu = self.workunits[result.workunit_id]
        self.stats.returned += 1
        self.stats.corrupted_returned += result.corrupted
        self.stats.per_worker[result.worker_id]["returned"] += 1
        self._log("return", wu=wu.id, worker=result.worker_id, fitness=result.fitness)
        if wu.status != PENDING:
            # expired (and possibly reissued) before this arrived
            self.stats.wasted_evaluations += 1
            return "late"
        wu.result = result
        g = self._groups[wu.group]
        g.outstanding -= 1
        if g.tag != self._tag or g.dead or g.validated:
            wu.status = DISCARDED
            self.stats.wasted_evaluations += 1
            if g.tag != self._tag and self.config.replay_stragglers:
                self.driver.accept_results([EvaluationRecord(wu.point, result.fitness, result.worker_id, wu.tag)])
            self._log("discard", wu=wu.id)
            return "discarded"
        wu.status = RETURNED
        g.results.append(wu)
        outcome = self._check_group(g)
        self._maybe_complete()
        return outcome

    def _add_to_pool(self, g: _Group) -> None:
        if not g.pooled:
            g.pooled = True
            self._pool.append(g)

    def _check_group(self, g: _Group) -> str:
        if len(g.results) < g.needed:
            if len(g.results) == 1 and self.config.validation != "full":
                self._add_to_pool(g)
            return "pooled"
        if g.needed == 1:
            if self.config.validation == "none":
                g.validated = True
            self._add_to_pool(g)
            return "pooled"
        first = g.results[0].result.fitness
        if all(fuzzy_match(first, w.result.fitness, self.config.fuzzy_tolerance) for w in g.results[1:]):
            g.validated = True
            self._log("validate", group=g.id, wus=[w.id for w in g.results])
            self._add_to_pool(g)
            return "validated"
        g.dead = True
        for w in g.results:
            w.status = INVALIDATED
            self.stats.per_worker[w.worker_id]["invalidated"] += 1
        if g.pooled:
            self._pool.remove(g)
            g.pooled = False
        self._log("invalidate", group=g.id, wus=[w.id for w in g.results])
        self._enqueue(self._new_group(g.point))
        return "invalidated"

    def check_deadlines(self, now: float) -> list[Workunit]:
        """Expire pending workunits whose deadline has passed; returns the expired ones."""
        expired = []
        while self._deadlines and self._deadlines[0][0] <= now:
            _, wid = heapq.heappop(self._deadlines)
            wu = self.workunits[wid]
            if wu.status != PENDING:
                continue
            wu.status = EXPIRED
            expired.append(wu)
            g = self._groups[wu.group]
            g.outstanding -= 1
            self._log("expire", wu=wu.id, worker=wu.worker_id)
            if g.tag == self._tag and not g.dead and not g.validated:
                self._enqueue(g)
        return expired

    def _maybe_complete(self) -> None:
        needed = self.driver.results_needed
        if needed == 0 or len(self._pool) < needed:
            return
        active = self._pool[:needed]
        if self.config.validation == "lazy":
            if self._tag[1] == LINE_SEARCHING:
                records = [self._record(g) for g in active]
                best = select_best(records)
                consumed = [next(g for g, r in zip(active, records) if r is best)]
            else:
                consumed = active
            waiting = self._waiting = [g for g in consumed if not g.validated]
            if waiting:
                for g in waiting:
                    if g.needed < 2:
                        g.needed = 2
                        self._enqueue(g)
                return
        else:
            consumed = active
        self._deliver(active, consumed)

    def _record(self, g: _Group) -> EvaluationRecord:
        first = g.results[0]
        return EvaluationRecord(g.point, first.result.fitness, first.worker_id, g.tag)

    def _deliver(self, active: list, consumed: list) -> None:
        consumed_ids = {g.id for g in consumed}
        for g in active:
            is_consumed = g.id in consumed_ids
            corrupted = g.results[0].result.corrupted
            for w in g.results:
                w.status = VALIDATED if g.validated and len(g.results) > 1 else ACCEPTED
            if is_consumed:
                self.stats.consumed += 1
                self.stats.consumed_corrupted += corrupted
            else:
                self.stats.delivered_unvalidated_corrupted += corrupted
        old_tag = self._tag
        self._pool = self._pool[len(active):]
        self.driver.accept_results([self._record(g) for g in active])
        if self.driver.tag == old_tag:
            # regression asked for more points; keep pooling
            return
        self.stats.phase_transitions += 1
        self._log("phase", iteration=self.driver.state.iteration, phase=self.driver.phase)
        leftovers = [self._record(g) for g in self._pool]
        for g in self._phase_groups:
            for w in g.results:
                if w.status == RETURNED:
                    w.status = DISCARDED
                    self.stats.wasted_evaluations += 1
        self._phase_groups = []
        self._pool = []
        self._waiting = []
        self._queue.clear()
        self._planned.clear()
        self._tag = self.driver.tag
        if self.config.replay_stragglers and leftovers:
            self.driver.accept_results(leftovers)

    def finalize(self) -> GridStats:
        s = self.stats
        for wu in self.workunits.values():
            if wu.status == RETURNED:
                wu.status = DISCARDED
        counts = {k: 0 for k in (PENDING, VALIDATED, ACCEPTED, INVALIDATED, EXPIRED, DISCARDED)}
        for wu in self.workunits.values():
            counts[wu.status] += 1
        s.validated, s.accepted = counts[VALIDATED], counts[ACCEPTED]
        s.invalidated, s.expired = counts[INVALIDATED], counts[EXPIRED]
        s.discarded, s.in_flight = counts[DISCARDED], counts[PENDING]
        s.makespan = self.now
        return s


def run_simulation(objective: ObjectiveSpec, anm_config: ANMConfig, grid_config: GridConfig,
                   start=None) -> tuple[Trace, GridStats]:
    """Run ANM on the simulated grid until the driver stops or virtual time runs out."""
    backend = GridBackend(grid_config)
    driver = ANMDriver(objective, anm_config, start)
    backend.drive(driver)
    return driver.trace, backend.stats


class GridBackend:
    """ANM backend that evaluates points on the simulated grid."""

    def __init__(self, config: GridConfig):
        self.config = config
        self.stats: Optional[GridStats] = None
        self.server: Optional[GridServer] = None

    def drive(self, driver: ANMDriver) -> None:
        cfg = self.config
        workers = cfg.make_workers()
        server = self.server = GridServer(driver, cfg, workers)
        rng = fork_rng(cfg.rng_seed, 2)
        f = driver.objective
        seq = itertools.count()
        events: list = []

        def push(t, kind, payload):
            heapq.heappush(events, (t, next(seq), kind, payload))

        for w in workers:
            push(rng.exponential(1.0 / w.request_rate), "request", w.worker_id)

        while events and not driver.terminal:
            t, _, kind, payload = heapq.heappop(events)
            if t > cfg.max_virtual_time:
                server.now = cfg.max_virtual_time
                server.stats.timed_out = True
                driver.fail("virtual time limit reached")
                break
            server.now = t
            server.check_deadlines(t)
            if kind == "request":
                w = server.workers[payload]
                wu = server.generate_work(w)
                if wu is None:
                    push(t + rng.exponential(cfg.idle_retry), "request", w.worker_id)
                    continue
                duration = rng.lognormal(w.latency_mu, w.latency_sigma) * w.speed_factor * f.simulated_cost
                done = t + duration
                if rng.random() < w.p_fail:
                    server.stats.lost += 1
                    server.stats.per_worker[w.worker_id]["lost"] += 1
                else:
                    fitness = f(wu.point)
                    corrupted = bool(rng.random() < w.p_malicious)
                    if corrupted:
                        noise = rng.uniform(1e3, 1e4) * max(abs(fitness), 1.0)
                        fitness += noise if rng.random() < 0.5 else -noise
                    push(done, "return", ResultRecord(wu.id, w.worker_id, fitness, done, corrupted))
                push(wu.deadline, "deadline", wu.id)
                push(done + rng.exponential(1.0 / w.request_rate), "request", w.worker_id)
            elif kind == "return":
                server.submit_result(payload)
            # deadline events only wake the loop; check_deadlines above does the work
        if not driver.terminal:
            server.stats.timed_out = True
            driver.fail("event queue drained")
        self.stats = server.finalize()
