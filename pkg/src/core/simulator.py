"""
Event-driven replay of a request workload against one substrate.

Departures are processed before arrivals at equal timestamps, ties broken
by request id. The substrate is mutated in place while requests are alive
and returns to its initial residuals once every accepted request departs.
"""

import heapq
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from src.core.errors import InputError, SimulationError
from src.core.mepde import SolveParams, Solver, solve
from src.core.netmodel import Mapping, SubstrateNetwork, VNRequest, allocate, release
from src.core.objectives import cost, revenue, snf
from src.core.validator import validate, validate_residual_bounds, validate_workload_order


logger = logging.getLogger(__name__)

ARRIVAL = "arrival"
DEPARTURE = "departure"
_PRIORITY = {DEPARTURE: 0, ARRIVAL: 1}


@dataclass(frozen=True)
class Event:
    time: float
    kind: str
    request_id: int

    def sort_key(self) -> Tuple[float, int, int]:
        return self.time, _PRIORITY[self.kind], self.request_id


@dataclass
class TraceSample:
    time: float
    kind: str
    request_id: int
    revenue_rate: int
    cost_rate: int
    snf: float
    cpu_utilization: float
    bw_utilization: float
    active_nodes: int
    active_requests: int
    cpu_allocated: int
    bw_allocated: int
    cpu_residual: int
    bw_residual: int


@dataclass
class RequestRecord:
    request_id: int
    arrival_time: float
    lifetime: float
    accepted: bool
    revenue: int
    cost: int
    cpu_demand: int
    bw_demand: int
    solve_time: float
    fragmentation: Optional[float] = None
    reason: Optional[str] = None


SAMPLE_COLUMNS = [f.name for f in fields(TraceSample)]
RECORD_COLUMNS = [f.name for f in fields(RequestRecord)]


@dataclass
class SimTrace:
    solver: str = "mepde"
    seed: int = 0
    initial_snf: float = 0.0
    initial_cpu_utilization: float = 0.0
    initial_bw_utilization: float = 0.0
    initial_active_nodes: int = 0
    samples: List[TraceSample] = field(default_factory=list)
    records: List[RequestRecord] = field(default_factory=list)

    @property
    def end_time(self) -> float:
        return self.samples[-1].time if self.samples else 0.0

    def samples_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([asdict(s) for s in self.samples], columns=SAMPLE_COLUMNS)
        frame.insert(0, "seed", self.seed)
        return frame

    def records_frame(self) -> pd.DataFrame:
        frame = pd.DataFrame([asdict(r) for r in self.records], columns=RECORD_COLUMNS)
        frame.insert(0, "seed", self.seed)
        return frame


@dataclass
class SimSummary:
    solver: str
    seed: int
    total_time: float
    request_count: int
    accepted_count: int
    acceptance_ratio: float
    resource_acceptance_ratio: float
    cpu_acceptance_ratio: float
    bw_acceptance_ratio: float
    long_term_avg_revenue: float
    long_term_avg_cost: float
    revenue_cost_ratio: float
    long_term_avg_snf: float
    long_term_cpu_utilization: float
    long_term_bw_utilization: float
    avg_active_nodes: float
    mean_solve_time: float


SampleSink = Callable[[TraceSample], None]


def request_seed(seed: int, request_id: int) -> int:
    """Independent 64-bit seed for one request's solver run."""
    state = np.random.SeedSequence([seed, request_id]).generate_state(1, np.uint64)
    return int(state[0])


def _name_of(solver: Solver) -> str:
    if solver is solve:
        return "mepde"
    return getattr(solver, "__name__", "custom").removesuffix("_solve")


def run(sn: SubstrateNetwork, workload: Sequence[VNRequest], solver: Solver = solve,
        params: SolveParams = SolveParams(), sink: Optional[SampleSink] = None,
        solver_name: Optional[str] = None) -> SimTrace:
    """Replay workload on sn, sampling the substrate after every event."""
    validate_workload_order(workload)
    requests = {r.request_id: r for r in workload}
    trace = SimTrace(
        solver=solver_name or _name_of(solver),
        seed=params.seed,
        initial_snf=snf(sn, params.fragmentation),
        initial_cpu_utilization=sn.cpu_utilization(),
        initial_bw_utilization=sn.bw_utilization(),
        initial_active_nodes=sn.loaded_node_count(),
    )

    queue: List[Tuple[float, int, int]] = []
    for r in workload:
        heapq.heappush(queue, Event(r.arrival_time, ARRIVAL, r.request_id).sort_key())

    active: Dict[int, Tuple[Mapping, int, int, int, int]] = {}
    logger.info(f"Simulating {len(workload)} requests with solver {trace.solver}")

    while queue:
        time, priority, request_id = heapq.heappop(queue)
        request = requests[request_id]
        if priority == _PRIORITY[DEPARTURE]:
            mapping = active.pop(request_id)[0]
            release(sn, mapping)
            kind = DEPARTURE
        else:
            kind = ARRIVAL
            record = _admit(sn, request, solver, params, active)
            trace.records.append(record)
            if record.accepted:
                heapq.heappush(
                    queue, Event(request.departure_time, DEPARTURE, request_id).sort_key()
                )

        try:
            validate_residual_bounds(sn)
        except InputError as e:
            raise SimulationError(f"Substrate left inconsistent after {kind} of request {request_id}",
                                  [str(e)]) from e

        sample = _sample(sn, time, kind, request_id, active, params)
        trace.samples.append(sample)
        if sink is not None:
            sink(sample)

    accepted = sum(r.accepted for r in trace.records)
    logger.info(f"Simulation finished at t={trace.end_time:.2f}: "
                f"{accepted}/{len(trace.records)} requests accepted")
    return trace


def _admit(sn: SubstrateNetwork, request: VNRequest, solver: Solver,
           params: SolveParams, active: Dict) -> RequestRecord:
    vn = request.vn
    outcome = solver(sn, request, replace(params, seed=request_seed(params.seed, request.request_id)))
    record = RequestRecord(
        request_id=request.request_id,
        arrival_time=request.arrival_time,
        lifetime=request.lifetime,
        accepted=outcome.success,
        revenue=0,
        cost=0,
        cpu_demand=vn.cpu_demand,
        bw_demand=vn.bw_demand,
        solve_time=outcome.stats.duration,
    )
    if not outcome.success:
        record.reason = outcome.reason or "rejected"
        logger.warning(f"Request {request.request_id} rejected: {record.reason}")
        return record

    mapping = outcome.mapping
    report = validate(mapping, sn)
    if not report:
        raise SimulationError(
            f"Solver returned an invalid mapping for request {request.request_id}",
            report.violations,
        )
    allocate(sn, mapping)

    record.revenue = revenue(vn)
    record.cost = cost(vn, mapping)
    if outcome.objectives is not None:
        record.fragmentation = outcome.objectives.fragmentation
    cpu_load = sum(mapping.cpu_load().values())
    bw_load = sum(mapping.bw_load().values())
    active[request.request_id] = (mapping, record.revenue, record.cost, cpu_load, bw_load)
    return record


def _sample(sn: SubstrateNetwork, time: float, kind: str, request_id: int,
            active: Dict, params: SolveParams) -> TraceSample:
    entries = active.values()
    return TraceSample(
        time=time,
        kind=kind,
        request_id=request_id,
        revenue_rate=sum(e[1] for e in entries),
        cost_rate=sum(e[2] for e in entries),
        snf=snf(sn, params.fragmentation),
        cpu_utilization=sn.cpu_utilization(),
        bw_utilization=sn.bw_utilization(),
        active_nodes=sn.loaded_node_count(),
        active_requests=len(active),
        cpu_allocated=sum(e[3] for e in entries),
        bw_allocated=sum(e[4] for e in entries),
        cpu_residual=sn.cpu_residual,
        bw_residual=sn.bw_residual,
    )


def _time_average(trace: SimTrace, column: str, initial: float, until: float) -> float:
    """Integral of a piecewise-constant sample column over [0, until], divided by until."""
    times = np.array([0.0] + [s.time for s in trace.samples])
    values = np.array([initial] + [getattr(s, column) for s in trace.samples], dtype=float)
    edges = np.clip(np.append(times, until), 0.0, until)
    return float(np.dot(values, np.diff(edges)) / until)


def _ratio(numerator: float, denominator: float) -> float:
    return numerator / denominator if denominator else 0.0


def long_term_metrics(trace: SimTrace, until: Optional[float] = None) -> SimSummary:
    """
    Long-term averages over [0, T]; T defaults to the last event, which is the
    last departure whenever a request was accepted.
    """
    total_time = trace.end_time if until is None else float(until)
    records = trace.records
    accepted = [r for r in records if r.accepted]

    if total_time > 0:
        avg_revenue = _time_average(trace, "revenue_rate", 0.0, total_time)
        avg_cost = _time_average(trace, "cost_rate", 0.0, total_time)
        avg_snf = _time_average(trace, "snf", trace.initial_snf, total_time)
        avg_cpu = _time_average(trace, "cpu_utilization", trace.initial_cpu_utilization, total_time)
        avg_bw = _time_average(trace, "bw_utilization", trace.initial_bw_utilization, total_time)
        avg_nodes = _time_average(trace, "active_nodes", trace.initial_active_nodes, total_time)
    else:
        avg_revenue = avg_cost = avg_snf = avg_cpu = avg_bw = avg_nodes = 0.0

    cpu_total = sum(r.cpu_demand for r in records)
    bw_total = sum(r.bw_demand for r in records)
    cpu_accepted = sum(r.cpu_demand for r in accepted)
    bw_accepted = sum(r.bw_demand for r in accepted)

    return SimSummary(
        solver=trace.solver,
        seed=trace.seed,
        total_time=total_time,
        request_count=len(records),
        accepted_count=len(accepted),
        acceptance_ratio=_ratio(len(accepted), len(records)),
        resource_acceptance_ratio=_ratio(cpu_accepted + bw_accepted, cpu_total + bw_total),
        cpu_acceptance_ratio=_ratio(cpu_accepted, cpu_total),
        bw_acceptance_ratio=_ratio(bw_accepted, bw_total),
        long_term_avg_revenue=avg_revenue,
        long_term_avg_cost=avg_cost,
        revenue_cost_ratio=_ratio(avg_revenue, avg_cost),
        long_term_avg_snf=avg_snf,
        long_term_cpu_utilization=avg_cpu,
        long_term_bw_utilization=avg_bw,
        avg_active_nodes=avg_nodes,
        mean_solve_time=float(np.mean([r.solve_time for r in records])) if records else 0.0,
    )
