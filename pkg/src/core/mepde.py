"""
MEPDE-VNE solver (also published as MEPE-VNE).

Seeds a population with a backtracking embedder under a growing hop limit,
improves every individual with a dominance-accepting local search, and
evolves it with roulette selection, single-point crossover and mutation
under NSGA-II elitist selection. A greedy baseline shares the seeding step.
"""

import logging
import time
from dataclasses import dataclass, field, replace
from typing import Callable, Dict, List, Optional, Sequence, Set, Tuple

import numpy as np

from src.core.errors import InputError
from src.core.netmodel import (
    Mapping,
    SubstrateNetwork,
    SubstratePath,
    VirtualNetwork,
    VNRequest,
    feasible_reach,
    shortest_feasible_path,
)
from src.core.objectives import (
    FragmentationParams,
    ObjectiveVector,
    evaluate,
    measure,
)
from src.core.pareto import (
    RankedIndividual,
    best_solution,
    dominates,
    environmental_selection,
    rank_population,
)


logger = logging.getLogger(__name__)


# --- Parameters and results --------------------------------------------------

@dataclass(frozen=True)
class SolveParams:
    iterations_max: int = 5
    population_size: int = 10
    max_backtrack: Optional[int] = None  # None means 3 * |N_v|
    hops_max: int = 2
    q: int = 2
    mutation_probability: float = 0.1
    seed: int = 0

    def __post_init__(self):
        if self.iterations_max < 0:
            raise InputError("iterations_max must be non-negative")
        if self.population_size < 1:
            raise InputError("population_size must be positive")
        if self.max_backtrack is not None and self.max_backtrack < 1:
            raise InputError("max_backtrack must be positive")
        if self.hops_max < 0:
            raise InputError("hops_max must be non-negative")
        if not 0.0 <= self.mutation_probability <= 1.0:
            raise InputError("mutation_probability must lie in [0, 1]")
        if not 0 <= self.seed < 2 ** 64:
            raise InputError("seed must be a 64-bit unsigned integer")
        FragmentationParams(self.q)

    @property
    def fragmentation(self) -> FragmentationParams:
        return FragmentationParams(self.q)

    def backtrack_limit(self, vn: VirtualNetwork) -> int:
        if self.max_backtrack is not None:
            return self.max_backtrack
        return 3 * len(vn.nodes)


@dataclass
class Chromosome(Mapping):
    """A mapping whose genes follow the virtual network's breadth-first order."""
    order: Tuple[int, ...] = ()
    objectives: Optional[ObjectiveVector] = None
    feasible: bool = False

    @property
    def genes(self) -> Tuple[Optional[int], ...]:
        return tuple(self.hosts.get(v) for v in self.order)

    def key(self) -> Tuple:
        routes = tuple(
            (link_id, None if route is None else frozenset(route.links))
            for link_id, route in sorted(self.routes.items())
        )
        return self.genes, routes

    def clone(self) -> "Chromosome":
        return Chromosome(
            vn=self.vn,
            hosts=dict(self.hosts),
            routes=dict(self.routes),
            order=self.order,
            objectives=self.objectives,
            feasible=self.feasible,
        )


@dataclass
class SolveStats:
    generations: int = 0
    evaluations: int = 0
    backtracks: int = 0
    duration: float = 0.0
    population_size: int = 0
    best_cost_history: List[int] = field(default_factory=list)


@dataclass
class SolveOutcome:
    success: bool
    mapping: Optional[Chromosome]
    stats: SolveStats
    solver: str = "mepde"
    reason: Optional[str] = None

    @property
    def objectives(self) -> Optional[ObjectiveVector]:
        return self.mapping.objectives if self.mapping is not None else None


@dataclass
class BacktrackBudget:
    limit: int
    count: int = 0

    @property
    def exhausted(self) -> bool:
        return self.count > self.limit


# --- Virtual node ordering ---------------------------------------------------

def vn_bfs_order(vn: VirtualNetwork) -> List[int]:
    """
    Breadth-first order rooted at the most demanding virtual node; each level
    sorted by non-increasing demand (CPU plus incident bandwidth), ties by id.
    """
    if not vn.is_connected():
        raise InputError("Virtual network must be connected")

    demand = {v: vn.node_demand(v) for v in vn.nodes}
    root = min(vn.nodes, key=lambda v: (-demand[v], v))
    order = [root]
    seen = {root}
    level = [root]
    while level:
        next_level = []
        for u in level:
            for _, w in vn.incident(u):
                if w not in seen:
                    seen.add(w)
                    next_level.append(w)
        next_level.sort(key=lambda v: (-demand[v], v))
        order.extend(next_level)
        level = next_level
    return order


# --- Backtracking embedder ---------------------------------------------------

class _Embedder:
    """Depth-first placement over a fixed order on a private residual copy."""

    def __init__(self, sn: SubstrateNetwork, vn: VirtualNetwork, order: Sequence[int],
                 hops: int, budget: BacktrackBudget, taboo: Set[Tuple]):
        self.work = sn.copy()
        self.vn = vn
        self.order = tuple(order)
        self.hops = hops
        self.budget = budget
        self.taboo = taboo
        self.ch = Chromosome(vn=vn, order=self.order)

        position = {v: i for i, v in enumerate(self.order)}
        self.back_links: List[List[int]] = []
        for i, v in enumerate(self.order):
            self.back_links.append([
                link_id for link_id, w in vn.incident(v) if position[w] < i
            ])

    def candidates(self, i: int) -> List[int]:
        v = self.order[i]
        demand = self.vn.nodes[v].cpu_demand
        reaches: List[Tuple[int, Dict[int, int]]] = []
        for link_id in self.back_links[i]:
            link = self.vn.links[link_id]
            anchor = self.ch.hosts[link.other(v)]
            reaches.append((link.bw_demand, feasible_reach(self.work, anchor, link.bw_demand, self.hops)))
        hosts = [
            n.id for n in self.work.nodes.values()
            if n.cpu_residual >= demand and all(n.id in reach for _, reach in reaches)
        ]
        # bandwidth-hops to the placed neighbours first; co-location costs nothing
        link_cost = {h: sum(bw * reach[h] for bw, reach in reaches) for h in hosts}
        hosts.sort(key=lambda n: (link_cost[n], -self.work.node_resources(n), n))
        return hosts

    def place(self, i: int, host: int) -> bool:
        v = self.order[i]
        demand = self.vn.nodes[v].cpu_demand
        if self.work.nodes[host].cpu_residual < demand:
            return False
        self.work.claim_cpu(host, demand)
        claimed: List[Tuple[int, SubstratePath]] = []
        for link_id in self.back_links[i]:
            link = self.vn.links[link_id]
            anchor = self.ch.hosts[link.other(v)]
            path = shortest_feasible_path(self.work, host, anchor, link.bw_demand, self.hops)
            if path is None:
                for done_id, done in claimed:
                    self.work.free_path(done, self.vn.links[done_id].bw_demand)
                self.work.free_cpu(host, demand)
                return False
            self.work.claim_path(path, link.bw_demand)
            claimed.append((link_id, path))
        self.ch.hosts[v] = host
        for link_id, path in claimed:
            self.ch.routes[link_id] = path
        return True

    def unplace(self, i: int) -> None:
        v = self.order[i]
        for link_id in self.back_links[i]:
            path = self.ch.routes.pop(link_id)
            self.work.free_path(path, self.vn.links[link_id].bw_demand)
        self.work.free_cpu(self.ch.hosts.pop(v), self.vn.nodes[v].cpu_demand)

    def search(self, i: int) -> bool:
        last = len(self.order) - 1
        for host in self.candidates(i):
            if not self.place(i, host):
                continue
            if i == last:
                if self.ch.key() not in self.taboo:
                    return True
            elif self.search(i + 1):
                return True
            self.unplace(i)
            if self.budget.exhausted:
                return False
        self.budget.count += 1
        return False


def embed_backtracking(sn: SubstrateNetwork, vn: VirtualNetwork, order: Sequence[int],
                       hops: int, budget: BacktrackBudget,
                       taboo: Optional[Set[Tuple]] = None,
                       root_host: Optional[int] = None) -> Optional[Chromosome]:
    """
    Place the virtual nodes in order, backtracking when a candidate list runs
    dry. Returns a feasible chromosome not already in taboo, or None when the
    budget or the search space is exhausted. root_host pins the first gene.
    """
    embedder = _Embedder(sn, vn, order, hops, budget, taboo or set())
    start = 0
    if root_host is not None:
        if not embedder.place(0, root_host):
            return None
        start = 1
    if start == len(embedder.order):
        found = embedder.ch.key() not in embedder.taboo
    else:
        found = embedder.search(start)
    if not found:
        return None
    embedder.ch.feasible = True
    return embedder.ch


def init_population(sn: SubstrateNetwork, vn: VirtualNetwork, params: SolveParams,
                    order: Optional[Sequence[int]] = None,
                    stats: Optional[SolveStats] = None) -> List[Chromosome]:
    """
    Sweep hop limits 0..hops_max and, for each, every root host by
    non-increasing resources until population_size distinct chromosomes
    exist. A shorter list is the effective population; empty means reject.
    """
    order = list(order) if order is not None else vn_bfs_order(vn)
    root_demand = vn.nodes[order[0]].cpu_demand
    roots = sorted(
        (n.id for n in sn.nodes.values() if n.cpu_residual >= root_demand),
        key=lambda n: (-sn.node_resources(n), n),
    )
    limit = params.backtrack_limit(vn)
    population: List[Chromosome] = []
    taboo: Set[Tuple] = set()

    for hops in range(params.hops_max + 1):
        for host in roots:
            budget = BacktrackBudget(limit)
            ch = embed_backtracking(sn, vn, order, hops, budget, taboo, root_host=host)
            if stats is not None:
                stats.backtracks += budget.count
            if ch is not None:
                population.append(ch)
                taboo.add(ch.key())
            if len(population) >= params.population_size:
                return population
    return population


# --- Local search ------------------------------------------------------------

class _LocalSearch:
    """Repair, then first-improvement moves accepted only on Pareto dominance."""

    def __init__(self, ch: Chromosome, sn: SubstrateNetwork, params: SolveParams,
                 stats: Optional[SolveStats]):
        self.ch = ch.clone()
        self.vn = ch.vn
        self.work = sn.copy()
        self.params = params
        self.stats = stats
        self.current: Optional[ObjectiveVector] = None

    def run(self) -> Chromosome:
        if not self.repair():
            self.ch.feasible = False
            self.ch.objectives = None
            return self.ch

        self.current = self.measure()
        cap = 10 * (len(self.vn.nodes) + len(self.vn.links))
        for _ in range(cap):
            if not self.improvement_pass():
                break
        self.ch.feasible = True
        self.ch.objectives = self.current
        return self.ch

    def measure(self) -> ObjectiveVector:
        if self.stats is not None:
            self.stats.evaluations += 1
        return measure(self.work, self.vn, self.ch, self.params.fragmentation)

    # repair

    def repair(self) -> bool:
        hosts, routes = self.ch.hosts, self.ch.routes
        displaced = []
        for v in self.ch.order:
            demand = self.vn.nodes[v].cpu_demand
            host = hosts.get(v)
            if host in self.work.nodes and self.work.nodes[host].cpu_residual >= demand:
                self.work.claim_cpu(host, demand)
            else:
                displaced.append(v)

        for v in displaced:
            demand = self.vn.nodes[v].cpu_demand
            new_host = self.nearest_host(hosts.get(v), demand)
            if new_host is None:
                return False
            self.work.claim_cpu(new_host, demand)
            hosts[v] = new_host
            for link_id in self.vn.incident_links(v):
                routes[link_id] = None

        pending = []
        for link_id in sorted(self.vn.links):
            link = self.vn.links[link_id]
            route = routes.get(link_id)
            if self.route_usable(link_id, route):
                self.work.claim_path(route, link.bw_demand)
            else:
                pending.append(link_id)

        for link_id in pending:
            link = self.vn.links[link_id]
            path = shortest_feasible_path(
                self.work, hosts[link.source], hosts[link.target],
                link.bw_demand, self.params.hops_max,
            )
            if path is None:
                return False
            self.work.claim_path(path, link.bw_demand)
            routes[link_id] = path
        return True

    def nearest_host(self, origin: Optional[int], demand: int) -> Optional[int]:
        if origin in self.work.nodes:
            ordered = feasible_reach(self.work, origin, 0, len(self.work.nodes))
        else:
            ordered = sorted(self.work.nodes, key=lambda n: (-self.work.node_resources(n), n))
        for host in ordered:
            if self.work.nodes[host].cpu_residual >= demand:
                return host
        return None

    def route_usable(self, link_id: int, route: Optional[SubstratePath]) -> bool:
        if route is None:
            return False
        link = self.vn.links[link_id]
        ends = frozenset((self.ch.hosts[link.source], self.ch.hosts[link.target]))
        return (
            route.endpoints == ends
            and len(route) <= self.params.hops_max
            and route.is_simple()
            and route.is_walk_in(self.work)
            and self.work.path_fits(route, link.bw_demand)
        )

    # improvement

    def improvement_pass(self) -> bool:
        improved = False
        for v in self.ch.order:
            if self.improve_node(v):
                improved = True
        for link_id in sorted(self.vn.links):
            if self.improve_link(link_id):
                improved = True
        return improved

    def improve_node(self, v: int) -> bool:
        origin = self.ch.hosts[v]
        reach = feasible_reach(self.work, origin, 0, self.params.hops_max)
        partners = [self.ch.hosts[self.vn.links[l].other(v)] for l in self.vn.incident_links(v)]
        preferred = [h for h in dict.fromkeys(partners) if h in reach]
        for candidate in preferred + [h for h in reach if h not in preferred]:
            if candidate != origin and self.try_move(v, candidate):
                return True
        return False

    def try_move(self, v: int, candidate: int) -> bool:
        hosts, routes = self.ch.hosts, self.ch.routes
        demand = self.vn.nodes[v].cpu_demand
        if self.work.nodes[candidate].cpu_residual < demand:
            return False

        origin = hosts[v]
        incident = self.vn.incident_links(v)
        old_routes = {link_id: routes[link_id] for link_id in incident}
        old_share = sum(self.vn.links[l].bw_demand * len(p) for l, p in old_routes.items())

        self.work.free_cpu(origin, demand)
        for link_id, path in old_routes.items():
            self.work.free_path(path, self.vn.links[link_id].bw_demand)
        self.work.claim_cpu(candidate, demand)

        new_routes: Dict[int, SubstratePath] = {}
        new_share = 0
        ok = True
        for link_id in incident:
            link = self.vn.links[link_id]
            path = shortest_feasible_path(
                self.work, candidate, hosts[link.other(v)],
                link.bw_demand, self.params.hops_max,
            )
            if path is None:
                ok = False
                break
            new_share += link.bw_demand * len(path)
            if new_share > old_share:
                ok = False
                break
            self.work.claim_path(path, link.bw_demand)
            new_routes[link_id] = path

        if ok:
            hosts[v] = candidate
            vector = ObjectiveVector(
                self.current.cost - old_share + new_share,
                self.measure().fragmentation,
            )
            if dominates(vector, self.current):
                routes.update(new_routes)
                self.current = vector
                return True
            hosts[v] = origin

        for link_id, path in new_routes.items():
            self.work.free_path(path, self.vn.links[link_id].bw_demand)
        self.work.free_cpu(candidate, demand)
        self.work.claim_cpu(origin, demand)
        for link_id, path in old_routes.items():
            self.work.claim_path(path, self.vn.links[link_id].bw_demand)
        return False

    def improve_link(self, link_id: int) -> bool:
        link = self.vn.links[link_id]
        old = self.ch.routes[link_id]
        if len(old) == 0:
            return False

        self.work.free_path(old, link.bw_demand)
        path = shortest_feasible_path(
            self.work, old.source, old.target, link.bw_demand, self.params.hops_max
        )
        if path is None or frozenset(path.links) == frozenset(old.links):
            self.work.claim_path(old, link.bw_demand)
            return False

        self.work.claim_path(path, link.bw_demand)
        self.ch.routes[link_id] = path
        vector = ObjectiveVector(
            self.current.cost + link.bw_demand * (len(path) - len(old)),
            self.measure().fragmentation,
        )
        if dominates(vector, self.current):
            self.current = vector
            return True

        self.ch.routes[link_id] = old
        self.work.free_path(path, link.bw_demand)
        self.work.claim_path(old, link.bw_demand)
        return False


def optimize(ch: Chromosome, sn: SubstrateNetwork, params: SolveParams,
             stats: Optional[SolveStats] = None) -> Chromosome:
    """
    Repair CPU overloads and missing routes, then improve node hosts and
    link routes round-robin until a full pass changes nothing. Returns a new
    chromosome; feasible is False when repair fails.
    """
    return _LocalSearch(ch, sn, params, stats).run()


# --- Reproduction ------------------------------------------------------------

def select_parent(pop: Sequence[RankedIndividual], rng: np.random.Generator) -> Chromosome:
    """Roulette wheel over fitness 1 / (1 + rank)."""
    weights = np.array([1.0 / (1 + ind.rank) for ind in pop])
    index = int(rng.choice(len(pop), p=weights / weights.sum()))
    return pop[index].item


def crossover(p1: Chromosome, p2: Chromosome, sn: SubstrateNetwork,
              rng: np.random.Generator, hops_max: int,
              midpoint: Optional[int] = None) -> Chromosome:
    """
    Single-point crossover: genes before the midpoint from p1, the rest from
    p2. Links inside one parent's part keep that parent's route; links across
    the cut get a fresh shortest feasible route or None.
    """
    order = p1.order
    vn = p1.vn
    if len(order) < 2:
        k = len(order)
    elif midpoint is not None:
        k = midpoint
    else:
        k = int(rng.integers(1, len(order)))

    donor = {v: (p1 if i < k else p2) for i, v in enumerate(order)}
    hosts = {v: donor[v].hosts[v] for v in order}
    routes: Dict[int, Optional[SubstratePath]] = {}
    for link_id in sorted(vn.links):
        link = vn.links[link_id]
        parent = donor[link.source]
        if parent is donor[link.target]:
            routes[link_id] = parent.routes.get(link_id)
        else:
            routes[link_id] = shortest_feasible_path(
                sn, hosts[link.source], hosts[link.target], link.bw_demand, hops_max
            )
    return Chromosome(vn=vn, hosts=hosts, routes=routes, order=order)


def mutate(ch: Chromosome, pop: Sequence[Chromosome], sn: SubstrateNetwork,
           rng: np.random.Generator, params: SolveParams) -> Chromosome:
    """
    With probability mutation_probability move one random virtual node to a
    random substrate node unused by the whole population and reroute its
    links; any unroutable link rolls the mutation back.
    """
    if rng.random() >= params.mutation_probability:
        return ch

    vn = ch.vn
    v = ch.order[int(rng.integers(len(ch.order)))]
    demand = vn.nodes[v].cpu_demand
    used = {host for member in pop for host in member.hosts.values()}
    candidates = sorted(
        n.id for n in sn.nodes.values() if n.id not in used and n.cpu_residual >= demand
    )
    if not candidates:
        return ch
    host = candidates[int(rng.integers(len(candidates)))]

    mutant = ch.clone()
    mutant.hosts[v] = host
    scratch = sn.copy()
    for link_id in vn.incident_links(v):
        link = vn.links[link_id]
        path = shortest_feasible_path(
            scratch, host, mutant.hosts[link.other(v)], link.bw_demand, params.hops_max
        )
        if path is None:
            return ch
        scratch.claim_path(path, link.bw_demand)
        mutant.routes[link_id] = path
    mutant.objectives = None
    mutant.feasible = False
    return mutant


# --- Solvers -----------------------------------------------------------------

def _rank(population: Sequence[Chromosome]) -> List[RankedIndividual]:
    return rank_population([c.objectives for c in population], population)


def _front_cost(ranked: Sequence[RankedIndividual]) -> int:
    return min(ind.objectives.cost for ind in ranked if ind.rank == 0)


def _rejected(stats: SolveStats, started: float, solver: str) -> SolveOutcome:
    stats.duration = time.perf_counter() - started
    return SolveOutcome(False, None, stats, solver, reason="no feasible initial embedding")


def solve(sn: SubstrateNetwork, vnr: VNRequest, params: SolveParams = SolveParams()) -> SolveOutcome:
    """Run MEPDE-VNE for one request; sn is read, never modified."""
    started = time.perf_counter()
    stats = SolveStats()
    base = sn.copy()
    vn = vnr.vn
    order = vn_bfs_order(vn)
    rng = np.random.default_rng(params.seed)

    population = init_population(base, vn, params, order=order, stats=stats)
    if not population:
        logger.info(f"Request {vnr.request_id}: rejected, no initial embedding")
        return _rejected(stats, started, "mepde")

    population = [c for c in (optimize(c, base, params, stats) for c in population) if c.feasible]
    if not population:
        return _rejected(stats, started, "mepde")
    size = len(population)
    stats.population_size = size
    logger.debug(f"Request {vnr.request_id}: initial population of {size}")

    ranked = _rank(population)
    stats.best_cost_history.append(_front_cost(ranked))

    for generation in range(params.iterations_max):
        offspring = []
        while len(offspring) < size:
            first = select_parent(ranked, rng)
            second = select_parent(ranked, rng)
            child = crossover(first, second, base, rng, params.hops_max)
            offspring.append(mutate(child, population, base, rng, params))

        offspring = [optimize(c, base, params, stats) for c in offspring]
        survivors = [c for c in offspring if c.feasible]
        # cheapest first, so index ties in selection keep the lowest cost
        combined = _rank(sorted(population + survivors, key=lambda c: tuple(c.objectives)))
        population = [ind.item for ind in environmental_selection(combined, size)]
        ranked = _rank(population)
        stats.generations += 1
        stats.best_cost_history.append(_front_cost(ranked))
        logger.debug(
            f"Request {vnr.request_id}: generation {generation + 1}, "
            f"{len(survivors)}/{len(offspring)} feasible offspring, "
            f"best cost {stats.best_cost_history[-1]}"
        )

    best = ranked[best_solution(ranked)].item.clone()
    stats.duration = time.perf_counter() - started
    logger.info(
        f"Request {vnr.request_id}: embedded with cost {best.objectives.cost}, "
        f"fragmentation {best.objectives.fragmentation:.4f} in {stats.duration:.3f}s"
    )
    return SolveOutcome(True, best, stats, "mepde")


def greedy_solve(sn: SubstrateNetwork, vnr: VNRequest,
                 params: SolveParams = SolveParams()) -> SolveOutcome:
    """Baseline: the first chromosome of the seeding sweep, no evolution."""
    started = time.perf_counter()
    stats = SolveStats()
    base = sn.copy()
    vn = vnr.vn
    population = init_population(base, vn, replace(params, population_size=1), stats=stats)
    if not population:
        logger.info(f"Request {vnr.request_id}: rejected by greedy baseline")
        return _rejected(stats, started, "greedy")

    ch = population[0]
    ch.objectives = evaluate(base, vn, ch, params.fragmentation)
    stats.evaluations += 1
    stats.population_size = 1
    stats.best_cost_history.append(ch.objectives.cost)
    stats.duration = time.perf_counter() - started
    return SolveOutcome(True, ch, stats, "greedy")


Solver = Callable[[SubstrateNetwork, VNRequest, SolveParams], SolveOutcome]

SOLVERS: Dict[str, Solver] = {
    "mepde": solve,
    "greedy": greedy_solve,
}
