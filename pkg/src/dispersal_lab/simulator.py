"""Event-driven Monte Carlo of the colony/catastrophe processes.

Only colony sizes at catastrophe instants matter, so a colony is a single
event: it is created, lives an Exp(1) time, and at its catastrophe leaves N
survivors (drawn from the survivor law) that disperse over its boxes.
"""
from __future__ import annotations

import csv
import enum
import heapq
import io
import json
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional, Sequence

from .dispersal import DispersalVariant, Graph, Variant, occupied_boxes
from .errors import DomainError
from .laws import SurvivorLaw, law_to_json
from .rng import UniformStream, derive_replica_seed

__all__ = [
    "Status",
    "SimConfig",
    "SimOutcome",
    "GenealogyRecord",
    "SimSummary",
    "run_replica",
    "run_replicas",
    "estimate",
    "wilson_interval",
    "outcomes_to_csv",
    "default_threads",
]

Z95 = 1.959963984540054
_SIM_FIELDS = ("replica_index", "status", "extinction_time", "reach", "colonies_created")


class Status(str, enum.Enum):
    EXTINCT = "extinct"
    CENSORED = "censored-survival"


@dataclass(frozen=True)
class SimConfig:
    variant: DispersalVariant
    law: SurvivorLaw
    graph: Graph | None = None  # defaults: HALF for the auxiliary processes, FULL for full-tree
    max_colonies: int = 10_000
    max_events: int = 1_000_000
    max_time: float = math.inf
    master_seed: int = 0
    record_genealogy: bool = False

    def __post_init__(self):
        if self.graph is None:
            default = Graph.FULL if self.variant.kind is Variant.FULL_TREE else Graph.HALF
            object.__setattr__(self, "graph", default)
        else:
            object.__setattr__(self, "graph", Graph(self.graph))
        if not (self.max_colonies >= 1 and self.max_events >= 1 and self.max_time > 0):
            raise DomainError(
                f"caps must be positive (max_colonies={self.max_colonies}, "
                f"max_events={self.max_events}, max_time={self.max_time})"
            )
        if not 0 <= int(self.master_seed) < 1 << 64:
            raise DomainError("master_seed must fit in 64 unsigned bits")


@dataclass(frozen=True)
class GenealogyRecord:
    colony: int
    parent: int  # -1 for the initial colony
    birth: float
    death: float
    depth: int


@dataclass(frozen=True)
class SimOutcome:
    status: Status
    extinction_time: Optional[float]
    reach: int
    colonies_created: int
    events: int
    genealogy: Optional[tuple[GenealogyRecord, ...]] = field(default=None, compare=False, repr=False)


def _root_boxes(config: SimConfig) -> tuple[int, bool]:
    """(number of boxes at the origin, whether the last box is lethal)."""
    kind, d = config.variant.kind, config.variant.d
    if config.graph is Graph.FULL:
        return d + 1, False
    if kind is Variant.MOVE_FORWARD_OR_DIE:
        return d + 1, True
    return d, False


def run_replica(config: SimConfig, replica_index: int) -> SimOutcome:
    """Simulate one replica with its own Philox stream."""
    rng = UniformStream(derive_replica_seed(config.master_seed, replica_index))
    if config.variant.kind is Variant.FULL_TREE:
        return _run_full_tree(config, rng)
    return _run_branching(config, rng)


def _survivors_to_boxes(kind: Variant, n: int, k: int, rng: UniformStream) -> list[int]:
    if kind is Variant.INDEPENDENT:
        return sorted({int(rng.random() * k) for _ in range(n)})
    return occupied_boxes(n, k, rng)


def _run_branching(config: SimConfig, rng: UniformStream) -> SimOutcome:
    """Self-avoiding, move-forward-or-die and independent processes: no occupancy."""
    kind, d = config.variant.kind, config.variant.d
    law = config.law
    lethal_forward = kind is Variant.MOVE_FORWARD_OR_DIE
    genealogy = [] if config.record_genealogy else None
    # heap entries: (death time, colony id, depth, birth time, parent id)
    first = rng.exponential()
    heap = [(first, 0, 0, 0.0, -1)]
    created = 1
    reach = 0
    events = 0
    root_k, root_lethal = _root_boxes(config)
    now = 0.0
    while heap:
        if len(heap) > config.max_colonies or events >= config.max_events:
            return _censored(reach, created, events, genealogy)
        now, cid, depth, birth, parent = heapq.heappop(heap)
        if now > config.max_time:
            return _censored(reach, created, events, genealogy)
        events += 1
        if genealogy is not None:
            genealogy.append(GenealogyRecord(cid, parent, birth, now, depth))
        if depth == 0:
            k, lethal = root_k, root_lethal
        elif lethal_forward:
            k, lethal = d + 1, True
        else:
            k, lethal = d, False
        n = law.sample(rng)
        if n == 0:
            continue
        for box in _survivors_to_boxes(kind, n, k, rng):
            if lethal and box == k - 1:
                continue
            heapq.heappush(heap, (now + rng.exponential(), created, depth + 1, now, cid))
            created += 1
            if depth + 1 > reach:
                reach = depth + 1
    return SimOutcome(Status.EXTINCT, now, reach, created, events, _freeze(genealogy))


def _run_full_tree(config: SimConfig, rng: UniformStream) -> SimOutcome:
    """Full model: one colony per vertex; groups landing on an occupied vertex die."""
    d = config.variant.d
    law = config.law
    genealogy = [] if config.record_genealogy else None
    origin_children = d + 1 if config.graph is Graph.FULL else d
    occupied = {(): 0}
    heap = [(rng.exponential(), 0, (), 0.0, -1)]
    created = 1
    reach = 0
    events = 0
    now = 0.0
    while heap:
        if len(heap) > config.max_colonies or events >= config.max_events:
            return _censored(reach, created, events, genealogy)
        now, cid, path, birth, parent = heapq.heappop(heap)
        if now > config.max_time:
            return _censored(reach, created, events, genealogy)
        events += 1
        del occupied[path]
        depth = len(path)
        if genealogy is not None:
            genealogy.append(GenealogyRecord(cid, parent, birth, now, depth))
        n = law.sample(rng)
        if n == 0:
            continue
        # boxes 0..c-1 are children, box c (if any) is the parent
        k = origin_children if depth == 0 else d + 1
        n_children = origin_children if depth == 0 else d
        for box in occupied_boxes(n, k, rng):
            target = path + (box,) if box < n_children else path[:-1]
            if target in occupied:
                continue
            occupied[target] = created
            heapq.heappush(heap, (now + rng.exponential(), created, target, now, cid))
            created += 1
            if len(target) > reach:
                reach = len(target)
    return SimOutcome(Status.EXTINCT, now, reach, created, events, _freeze(genealogy))


def _freeze(genealogy):
    return None if genealogy is None else tuple(genealogy)


def _censored(reach, created, events, genealogy) -> SimOutcome:
    return SimOutcome(Status.CENSORED, None, reach, created, events, _freeze(genealogy))


# -- replication and aggregation -------------------------------------------------


def default_threads() -> int:
    env = os.environ.get("DISPERSAL_LAB_THREADS")
    if env:
        try:
            value = int(env)
        except ValueError:
            raise DomainError(f"DISPERSAL_LAB_THREADS must be an integer, got {env!r}") from None
        if value >= 1:
            return value
    return os.cpu_count() or 1


def _run_chunk(config: SimConfig, start: int, stop: int) -> list[SimOutcome]:
    return [run_replica(config, i) for i in range(start, stop)]


def run_replicas(config: SimConfig, replicas: int, threads: int = 1) -> list[SimOutcome]:
    """Outcomes for replica indices 0..replicas-1, in index order."""
    if replicas < 1:
        raise DomainError("replicas must be >= 1")
    threads = max(1, min(int(threads), replicas))
    if threads == 1:
        return _run_chunk(config, 0, replicas)
    chunks = min(replicas, threads * 4)
    bounds = [replicas * j // chunks for j in range(chunks + 1)]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        futures = [pool.submit(_run_chunk, config, a, b) for a, b in zip(bounds, bounds[1:])]
        out: list[SimOutcome] = []
        for fut in futures:
            out.extend(fut.result())
    return out


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    if trials <= 0:
        raise DomainError("trials must be positive")
    phat = successes / trials
    denom = 1.0 + z * z / trials
    centre = (phat + z * z / (2 * trials)) / denom
    half = z * math.sqrt(phat * (1 - phat) / trials + z * z / (4 * trials * trials)) / denom
    lo = 0.0 if successes == 0 else max(0.0, centre - half)
    hi = 1.0 if successes == trials else min(1.0, centre + half)
    return lo, hi


@dataclass(frozen=True)
class MeanEstimate:
    mean: Optional[float]
    se: Optional[float]
    count: int

    @classmethod
    def of(cls, values: Sequence[float]) -> "MeanEstimate":
        n = len(values)
        if n == 0:
            return cls(None, None, 0)
        mean = math.fsum(values) / n
        if n == 1:
            return cls(mean, None, 1)
        var = math.fsum((v - mean) ** 2 for v in values) / (n - 1)
        return cls(mean, math.sqrt(var / n), n)

    def ci(self, z: float = Z95) -> Optional[tuple[float, float]]:
        if self.mean is None or self.se is None:
            return None
        return self.mean - z * self.se, self.mean + z * self.se


@dataclass(frozen=True)
class SimSummary:
    config: dict
    replicas: int
    extinct: int
    censored: int
    survival_proportion: float
    survival_ci95: tuple[float, float]
    extinction_time: MeanEstimate
    reach: MeanEstimate
    colonies_created: MeanEstimate
    reach_cdf: tuple[float, ...]  # P(extinct and reach <= n), n = 0..max observed

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("extinction_time", "reach", "colonies_created"):
            est = getattr(self, key)
            out[key]["ci95"] = est.ci()
        out["survival_ci95"] = list(self.survival_ci95)
        out["reach_cdf"] = list(self.reach_cdf)
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=False) + "\n"


def _config_record(config: SimConfig, replicas: int) -> dict:
    return {
        "variant": config.variant.kind.value,
        "d": config.variant.d,
        "graph": config.graph.value,
        "law": law_to_json(config.law),
        "max_colonies": config.max_colonies,
        "max_events": config.max_events,
        "max_time": None if math.isinf(config.max_time) else config.max_time,
        "master_seed": int(config.master_seed),
        "replicas": replicas,
    }


def summarise(config: SimConfig, outcomes: Sequence[SimOutcome]) -> SimSummary:
    """Deterministic reduction in replica-index order.

    Means of extinction time, reach and colony count use extinct replicas
    only; censored replicas are counted separately.
    """
    n = len(outcomes)
    extinct = [o for o in outcomes if o.status is Status.EXTINCT]
    censored = n - len(extinct)
    max_reach = max((o.reach for o in extinct), default=0)
    counts = [0] * (max_reach + 1)
    for o in extinct:
        counts[o.reach] += 1
    cdf, running = [], 0
    for c in counts:
        running += c
        cdf.append(running / n)
    return SimSummary(
        config=_config_record(config, n),
        replicas=n,
        extinct=len(extinct),
        censored=censored,
        survival_proportion=censored / n,
        survival_ci95=wilson_interval(censored, n),
        extinction_time=MeanEstimate.of([o.extinction_time for o in extinct]),
        reach=MeanEstimate.of([float(o.reach) for o in extinct]),
        colonies_created=MeanEstimate.of([float(o.colonies_created) for o in extinct]),
        reach_cdf=tuple(cdf),
    )


def estimate(config: SimConfig, replicas: int, threads: int = 1) -> tuple[SimSummary, list[SimOutcome]]:
    outcomes = run_replicas(config, replicas, threads)
    return summarise(config, outcomes), outcomes


def outcomes_to_csv(outcomes: Iterable[SimOutcome], stream: io.TextIOBase | None = None) -> str:
    buf = stream if stream is not None else io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_SIM_FIELDS)
    for i, o in enumerate(outcomes):
        writer.writerow(
            [i, o.status.value, "" if o.extinction_time is None else repr(o.extinction_time), o.reach, o.colonies_created]
        )
    return buf.getvalue() if stream is None else ""
