import itertools

import numpy as np
import pytest

from src.core.mepde import (
    SOLVERS,
    BacktrackBudget,
    Chromosome,
    SolveParams,
    crossover,
    embed_backtracking,
    greedy_solve,
    init_population,
    mutate,
    optimize,
    select_parent,
    solve,
    vn_bfs_order,
)
from src.core.netmodel import (
    Mapping,
    SubstrateNetwork,
    SubstratePath,
    VirtualNetwork,
    VNRequest,
    shortest_feasible_path,
)
from src.core.objectives import evaluate
from src.core.pareto import RankedIndividual, dominates
from src.core.validator import validate
from src.core.workload import VN_CPU_CHOICES, WaxmanParams, waxman_substrate, waxman_virtual


# --- Fixtures ----------------------------------------------------------------

@pytest.fixture
def line_sn():
    """Four substrate nodes in a line: 0 - 1 - 2 - 3."""
    sn = SubstrateNetwork()
    for i in range(4):
        sn.add_node(i, 100)
    for i in range(3):
        sn.add_link(i, i, i + 1, 10)
    return sn


@pytest.fixture
def pair_vn():
    vn = VirtualNetwork()
    vn.add_node(0, 30)
    vn.add_node(1, 20)
    vn.add_link(0, 0, 1, 5)
    return vn


@pytest.fixture
def pair_request(pair_vn):
    return VNRequest(0, pair_vn, 0.0, 100.0)


def generated_instance(seed: int, nodes: int = 6, links: int = 8, vn_max: int = 3):
    """Small Waxman substrate plus one Waxman request, both from one seed."""
    rng = np.random.default_rng(seed)
    sn = waxman_substrate(WaxmanParams(nodes, links), rng)
    size = int(rng.integers(2, vn_max + 1))
    vn = waxman_virtual(size, 0.5, VN_CPU_CHOICES, (1, 50), rng)
    return sn, VNRequest(seed, vn, 0.0, 100.0)


def oracle_vectors(sn: SubstrateNetwork, vn: VirtualNetwork):
    """Objective vectors of every node assignment routed by shortest feasible paths."""
    vectors = []
    virtual = sorted(vn.nodes)
    for assignment in itertools.product(sorted(sn.nodes), repeat=len(virtual)):
        hosts = dict(zip(virtual, assignment))
        load = {}
        for v, h in hosts.items():
            load[h] = load.get(h, 0) + vn.nodes[v].cpu_demand
        if any(amount > sn.nodes[h].cpu_residual for h, amount in load.items()):
            continue
        work = sn.copy()
        routes = {}
        for link_id in sorted(vn.links):
            link = vn.links[link_id]
            path = shortest_feasible_path(
                work, hosts[link.source], hosts[link.target], link.bw_demand, len(sn.nodes)
            )
            if path is None:
                break
            work.claim_path(path, link.bw_demand)
            routes[link_id] = path
        else:
            vectors.append(evaluate(sn, vn, Mapping(vn, hosts, routes)))
    return vectors


# --- SolveParams tests -------------------------------------------------------

@pytest.mark.parametrize("kwargs", [
    {"iterations_max": -1},
    {"population_size": 0},
    {"max_backtrack": 0},
    {"hops_max": -1},
    {"q": 1},
    {"mutation_probability": 1.5},
    {"seed": -1},
    {"seed": 2 ** 64},
])
def test_solve_params_validation(kwargs):
    """SolveParams should reject values outside their ranges."""
    with pytest.raises(ValueError):
        SolveParams(**kwargs)


def test_solve_params_defaults(pair_vn):
    """Defaults should be 5 iterations, 10 individuals, 2 hops and 3n backtracks."""
    params = SolveParams()
    assert (params.iterations_max, params.population_size, params.hops_max, params.q) == (5, 10, 2, 2)
    assert params.backtrack_limit(pair_vn) == 6
    assert SolveParams(max_backtrack=4).backtrack_limit(pair_vn) == 4


# --- ordering and seeding tests ----------------------------------------------

def test_vn_bfs_order_by_demand():
    """The root should be the most demanding node; levels sorted by demand."""
    vn = VirtualNetwork()
    vn.add_node(0, 10)
    vn.add_node(1, 50)
    vn.add_node(2, 20)
    vn.add_link(0, 0, 1, 1)
    vn.add_link(1, 1, 2, 1)
    assert vn_bfs_order(vn) == [1, 2, 0]


def test_vn_bfs_order_rejects_disconnected():
    """A disconnected virtual network should raise ValueError."""
    vn = VirtualNetwork()
    vn.add_node(0, 10)
    vn.add_node(1, 10)
    with pytest.raises(ValueError):
        vn_bfs_order(vn)


def test_budget_exhaustion():
    """The budget should be exhausted only once the count exceeds the limit."""
    budget = BacktrackBudget(limit=1)
    budget.count = 1
    assert not budget.exhausted
    budget.count = 2
    assert budget.exhausted


def test_embed_with_zero_hops_colocates(line_sn, pair_vn):
    """With a hop limit of 0 every virtual node should share the root's host."""
    ch = embed_backtracking(line_sn, pair_vn, [0, 1], 0, BacktrackBudget(10))
    assert ch.feasible
    assert ch.hosts == {0: 1, 1: 1}
    assert len(ch.routes[0]) == 0
    assert validate(ch, line_sn)


def test_embed_prefers_colocation_over_roomier_neighbour(line_sn, pair_vn):
    """A host shared with the placed neighbour should come before a roomier adjacent one."""
    ch = embed_backtracking(line_sn, pair_vn, [0, 1], 1, BacktrackBudget(10), root_host=0)
    assert ch.hosts == {0: 0, 1: 0}
    assert len(ch.routes[0]) == 0


def test_embed_orders_candidates_by_link_cost(line_sn, pair_vn):
    """When the anchor is full the one-hop host should beat the two-hop one."""
    line_sn.nodes[0].cpu_residual = 30
    line_sn.nodes[1].cpu_residual = 25
    ch = embed_backtracking(line_sn, pair_vn, [0, 1], 2, BacktrackBudget(10), root_host=0)
    assert ch.hosts == {0: 0, 1: 1}
    assert ch.routes[0].links == (0,)


def test_embed_skips_taboo(line_sn, pair_vn):
    """A mapping already in the taboo set should not be returned again."""
    first = embed_backtracking(line_sn, pair_vn, [0, 1], 1, BacktrackBudget(10))
    second = embed_backtracking(line_sn, pair_vn, [0, 1], 1, BacktrackBudget(10), taboo={first.key()})
    assert second is not None
    assert second.key() != first.key()
    assert validate(second, line_sn)


def test_embed_impossible_returns_none(line_sn):
    """A node larger than every host should make the embedder give up."""
    vn = VirtualNetwork()
    vn.add_node(0, 500)
    assert embed_backtracking(line_sn, vn, [0], 2, BacktrackBudget(3)) is None


def test_embed_leaves_substrate_untouched(line_sn, pair_vn):
    """The embedder should work on a private copy of the residuals."""
    before = line_sn.snapshot()
    embed_backtracking(line_sn, pair_vn, [0, 1], 2, BacktrackBudget(6))
    assert line_sn.snapshot() == before


def test_init_population_distinct_and_valid(line_sn, pair_vn):
    """The initial population should hold distinct, valid chromosomes."""
    population = init_population(line_sn, pair_vn, SolveParams())
    assert 4 <= len(population) <= 10
    assert len({c.key() for c in population}) == len(population)
    assert all(validate(c, line_sn) for c in population)
    # hop limit 0 comes first, so the leading chromosomes are fully co-located
    assert len(set(population[0].hosts.values())) == 1


def test_init_population_empty_when_infeasible(line_sn):
    """No feasible embedding should give an empty population."""
    vn = VirtualNetwork()
    vn.add_node(0, 101)
    assert init_population(line_sn, vn, SolveParams()) == []


# --- local search tests ------------------------------------------------------

def test_optimize_repairs_and_improves(line_sn, pair_vn):
    """optimize should rehost an overloaded node and end on the cheapest mapping."""
    line_sn.nodes[0].cpu_residual = 40
    broken = Chromosome(
        vn=pair_vn, hosts={0: 0, 1: 0}, routes={0: SubstratePath.colocated(0)}, order=(0, 1)
    )
    result = optimize(broken, line_sn, SolveParams())
    assert result.feasible
    assert validate(result, line_sn)
    assert result.objectives.cost == 50
    assert broken.hosts == {0: 0, 1: 0}


def test_optimize_moves_next_to_partner_first(line_sn, pair_vn):
    """A node move should try the host of its virtual neighbour before other hosts."""
    spread = Chromosome(
        vn=pair_vn, hosts={0: 0, 1: 2}, routes={0: SubstratePath((0, 1, 2), (0, 1))}, order=(0, 1)
    )
    result = optimize(spread, line_sn, SolveParams())
    assert result.hosts == {0: 2, 1: 2}
    assert result.objectives.cost == 50


def test_optimize_reports_unrepairable(line_sn):
    """A chromosome that cannot be repaired should come back infeasible."""
    vn = VirtualNetwork()
    vn.add_node(0, 150)
    ch = Chromosome(vn=vn, hosts={0: 0}, routes={}, order=(0,))
    result = optimize(ch, line_sn, SolveParams())
    assert not result.feasible
    assert result.objectives is None


def test_optimize_never_worsens(line_sn, pair_vn):
    """The optimized vector should equal or dominate the starting vector."""
    for ch in init_population(line_sn, pair_vn, SolveParams()):
        start = evaluate(line_sn, pair_vn, ch)
        end = optimize(ch, line_sn, SolveParams()).objectives
        assert end == start or dominates(end, start)


# --- operator tests ----------------------------------------------------------

def test_select_parent_prefers_low_ranks(line_sn, pair_vn):
    """Roulette selection should favour rank 0 in proportion 1 / (1 + rank)."""
    good = Chromosome(vn=pair_vn, order=(0, 1))
    bad = Chromosome(vn=pair_vn, order=(0, 1))
    pop = [RankedIndividual((1, 0.0), rank=0, item=good), RankedIndividual((2, 0.0), rank=3, item=bad)]
    rng = np.random.default_rng(5)
    picks = [select_parent(pop, rng) for _ in range(2000)]
    share = sum(p is good for p in picks) / len(picks)
    assert 0.75 <= share <= 0.85


def test_crossover_combines_parents(line_sn, pair_vn):
    """Genes before the midpoint come from p1, the rest from p2; crossing links are rerouted."""
    p1 = Chromosome(vn=pair_vn, hosts={0: 1, 1: 1}, routes={0: SubstratePath.colocated(1)}, order=(0, 1))
    p2 = Chromosome(vn=pair_vn, hosts={0: 2, 1: 2}, routes={0: SubstratePath.colocated(2)}, order=(0, 1))
    child = crossover(p1, p2, line_sn, np.random.default_rng(0), 2, midpoint=1)
    assert child.hosts == {0: 1, 1: 2}
    assert child.routes[0].links == (1,)
    assert not child.feasible
    assert child.objectives is None


def test_crossover_keeps_intra_parent_routes(line_sn, pair_vn):
    """A midpoint past every gene should copy p1's routes."""
    p1 = Chromosome(vn=pair_vn, hosts={0: 0, 1: 1}, routes={0: SubstratePath((0, 1), (0,))}, order=(0, 1))
    child = crossover(p1, p1.clone(), line_sn, np.random.default_rng(0), 2, midpoint=2)
    assert child.routes[0] == p1.routes[0]


def test_mutate_probability_zero_is_identity(line_sn, pair_vn):
    """With probability 0 the chromosome should come back unchanged."""
    ch = init_population(line_sn, pair_vn, SolveParams())[0]
    params = SolveParams(mutation_probability=0.0)
    assert mutate(ch, [ch], line_sn, np.random.default_rng(1), params) is ch


def test_mutate_moves_to_unused_host(line_sn, pair_vn):
    """A mutation should move one gene to a host unused by the population."""
    ch = init_population(line_sn, pair_vn, SolveParams())[0]
    used = set(ch.hosts.values())
    params = SolveParams(mutation_probability=1.0)
    mutant = mutate(ch, [ch], line_sn, np.random.default_rng(1), params)
    assert mutant is not ch
    changed = [v for v in ch.order if mutant.hosts[v] != ch.hosts[v]]
    assert len(changed) == 1
    assert mutant.hosts[changed[0]] not in used
    assert validate(mutant, line_sn)


def test_mutate_without_free_hosts_rolls_back(line_sn, pair_vn):
    """When the population already uses every host the mutation should be dropped."""
    ch = init_population(line_sn, pair_vn, SolveParams())[0]
    others = [Chromosome(vn=pair_vn, hosts={0: h, 1: h}, order=(0, 1)) for h in range(4)]
    params = SolveParams(mutation_probability=1.0)
    assert mutate(ch, [ch] + others, line_sn, np.random.default_rng(1), params) is ch


# --- solver tests ------------------------------------------------------------

def test_solve_returns_valid_mapping(line_sn, pair_request):
    """solve should accept a feasible request with a valid mapping and leave sn alone."""
    before = line_sn.snapshot()
    outcome = solve(line_sn, pair_request, SolveParams())
    assert outcome.success
    assert outcome.solver == "mepde"
    assert validate(outcome.mapping, line_sn)
    assert outcome.objectives.cost == 50
    assert outcome.stats.generations == 5
    assert len(outcome.stats.best_cost_history) == 6
    assert line_sn.snapshot() == before


def test_solve_rejects_infeasible(line_sn):
    """An unembeddable request should be rejected with a reason."""
    vn = VirtualNetwork()
    vn.add_node(0, 500)
    outcome = solve(line_sn, VNRequest(0, vn, 0.0, 1.0), SolveParams())
    assert not outcome.success
    assert outcome.mapping is None
    assert outcome.reason


def test_solve_without_generations(line_sn, pair_request):
    """iterations_max = 0 should return the best of the optimized seed population."""
    outcome = solve(line_sn, pair_request, SolveParams(iterations_max=0))
    assert outcome.success
    assert outcome.stats.generations == 0


def test_solve_is_deterministic():
    """Equal inputs and seed should give an identical mapping and vector."""
    sn, request = generated_instance(4, nodes=10, links=15, vn_max=5)
    first = solve(sn, request, SolveParams(seed=9))
    second = solve(sn, request, SolveParams(seed=9))
    assert first.success == second.success
    if first.success:
        assert first.mapping.key() == second.mapping.key()
        assert first.objectives == second.objectives


def test_greedy_solve(line_sn, pair_request):
    """The greedy baseline should report its name and a single individual."""
    outcome = greedy_solve(line_sn, pair_request)
    assert outcome.success
    assert outcome.solver == "greedy"
    assert outcome.stats.population_size == 1
    assert validate(outcome.mapping, line_sn)
    assert set(SOLVERS) == {"mepde", "greedy"}


def test_solve_never_costs_more_than_greedy():
    """MEPDE should match or beat the greedy baseline's cost on every instance."""
    for seed in range(20):
        sn, request = generated_instance(seed, nodes=10, links=16, vn_max=5)
        greedy = greedy_solve(sn, request, SolveParams(seed=seed))
        mepde = solve(sn, request, SolveParams(seed=seed))
        assert mepde.success == greedy.success
        if greedy.success:
            assert mepde.objectives.cost <= greedy.objectives.cost


def test_elitism_keeps_best_cost():
    """The best front cost should never increase from one generation to the next."""
    violations = 0
    for seed in range(100):
        sn, request = generated_instance(seed, nodes=8, links=12, vn_max=3)
        outcome = solve(sn, request, SolveParams(seed=seed))
        history = outcome.stats.best_cost_history
        violations += sum(1 for a, b in zip(history, history[1:]) if b > a)
    assert violations == 0


def test_small_instances_against_oracle():
    """Returned vectors should be feasible always and non-dominated in at least 90% of instances."""
    solved = 0
    non_dominated = 0
    for seed in range(50):
        sn, request = generated_instance(1000 + seed)
        outcome = solve(sn, request, SolveParams(seed=seed))
        if not outcome.success:
            continue
        solved += 1
        assert validate(outcome.mapping, sn)
        vectors = oracle_vectors(sn, request.vn)
        if not any(dominates(v, outcome.objectives) for v in vectors):
            non_dominated += 1
    assert solved > 0
    assert non_dominated >= 0.9 * solved
