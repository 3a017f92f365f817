"""
Substrate and virtual network model.

Substrate networks carry CPU/bandwidth capacities with mutable residuals;
virtual networks carry demands. Paths, connected fragments and the
allocate/release pair that moves a mapping in and out of the residuals
live here as well.
"""

import bisect
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, FrozenSet, Generic, Iterator, List, Optional, Tuple, TypeVar

import networkx as nx

from src.core.errors import AllocationStateError, InputError, RejectionError


logger = logging.getLogger(__name__)


# --- Nodes and links ---------------------------------------------------------

@dataclass
class SubstrateNode:
    id: int
    cpu_capacity: int
    cpu_residual: Optional[int] = None
    x: float = 0.0
    y: float = 0.0

    def __post_init__(self):
        if self.cpu_capacity < 0:
            raise InputError(f"Node {self.id}: CPU capacity must be non-negative")
        if self.cpu_residual is None:
            self.cpu_residual = self.cpu_capacity
        if not 0 <= self.cpu_residual <= self.cpu_capacity:
            raise InputError(f"Node {self.id}: CPU residual out of [0, capacity]")


@dataclass
class SubstrateLink:
    id: int
    source: int
    target: int
    bw_capacity: int
    bw_residual: Optional[int] = None

    def __post_init__(self):
        if self.bw_capacity < 0:
            raise InputError(f"Link {self.id}: bandwidth capacity must be non-negative")
        if self.bw_residual is None:
            self.bw_residual = self.bw_capacity
        if not 0 <= self.bw_residual <= self.bw_capacity:
            raise InputError(f"Link {self.id}: bandwidth residual out of [0, capacity]")

    @property
    def endpoints(self) -> FrozenSet[int]:
        return frozenset((self.source, self.target))

    def other(self, node_id: int) -> int:
        return self.target if node_id == self.source else self.source


@dataclass
class VirtualNode:
    id: int
    cpu_demand: int
    x: float = 0.0
    y: float = 0.0

    def __post_init__(self):
        if self.cpu_demand <= 0:
            raise InputError(f"Virtual node {self.id}: CPU demand must be positive")


@dataclass
class VirtualLink:
    id: int
    source: int
    target: int
    bw_demand: int

    def __post_init__(self):
        if self.bw_demand <= 0:
            raise InputError(f"Virtual link {self.id}: bandwidth demand must be positive")

    @property
    def endpoints(self) -> FrozenSet[int]:
        return frozenset((self.source, self.target))

    def other(self, node_id: int) -> int:
        return self.target if node_id == self.source else self.source


# --- Graph containers --------------------------------------------------------

NodeT = TypeVar("NodeT", SubstrateNode, VirtualNode)
LinkT = TypeVar("LinkT", SubstrateLink, VirtualLink)


class _Graph(Generic[NodeT, LinkT]):
    """Undirected simple graph keyed by integer node and link ids."""

    def __init__(self):
        self.nodes: Dict[int, NodeT] = {}
        self.links: Dict[int, LinkT] = {}
        self._adjacency: Dict[int, List[int]] = {}
        self._pairs: Dict[FrozenSet[int], int] = {}

    def _register_node(self, node: NodeT) -> None:
        if node.id in self.nodes:
            raise InputError(f"Duplicate node id {node.id}")
        self.nodes[node.id] = node
        self._adjacency[node.id] = []

    def _register_link(self, link: LinkT) -> None:
        if link.id in self.links:
            raise InputError(f"Duplicate link id {link.id}")
        if link.source == link.target:
            raise InputError(f"Link {link.id} is a self-loop on node {link.source}")
        for end in (link.source, link.target):
            if end not in self.nodes:
                raise InputError(f"Link {link.id} references unknown node {end}")
        pair = link.endpoints
        if pair in self._pairs:
            raise InputError(
                f"Link {link.id} duplicates link {self._pairs[pair]} between "
                f"{link.source} and {link.target}"
            )
        self.links[link.id] = link
        self._pairs[pair] = link.id
        bisect.insort(self._adjacency[link.source], link.id)
        bisect.insort(self._adjacency[link.target], link.id)

    def incident(self, node_id: int) -> Iterator[Tuple[int, int]]:
        """Yield (link id, neighbour id) pairs in ascending link-id order."""
        try:
            link_ids = self._adjacency[node_id]
        except KeyError:
            raise InputError(f"Unknown node id {node_id}")
        for link_id in link_ids:
            yield link_id, self.links[link_id].other(node_id)

    def incident_links(self, node_id: int) -> List[int]:
        if node_id not in self._adjacency:
            raise InputError(f"Unknown node id {node_id}")
        return list(self._adjacency[node_id])

    def link_between(self, a: int, b: int) -> Optional[int]:
        return self._pairs.get(frozenset((a, b)))

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(self.nodes)
        g.add_edges_from((l.source, l.target) for l in self.links.values())
        return g

    def is_connected(self) -> bool:
        if not self.nodes:
            return False
        return nx.is_connected(self.to_networkx())

    def __eq__(self, other) -> bool:
        if type(self) is not type(other):
            return NotImplemented
        return self.nodes == other.nodes and self.links == other.links

    __hash__ = None

    def __repr__(self) -> str:
        return f"{type(self).__name__}({len(self.nodes)} nodes, {len(self.links)} links)"


@dataclass(frozen=True)
class SubstratePath:
    """Loop-free substrate walk; a single node and no links means co-location."""
    nodes: Tuple[int, ...]
    links: Tuple[int, ...] = ()

    def __post_init__(self):
        if len(self.nodes) != len(self.links) + 1:
            raise InputError("Path must have exactly one more node than links")

    @classmethod
    def colocated(cls, node_id: int) -> "SubstratePath":
        return cls(nodes=(node_id,))

    def __len__(self) -> int:
        return len(self.links)

    @property
    def source(self) -> int:
        return self.nodes[0]

    @property
    def target(self) -> int:
        return self.nodes[-1]

    @property
    def endpoints(self) -> FrozenSet[int]:
        return frozenset((self.source, self.target))

    def is_simple(self) -> bool:
        return len(set(self.nodes)) == len(self.nodes)

    def is_walk_in(self, sn: "SubstrateNetwork") -> bool:
        for i, link_id in enumerate(self.links):
            link = sn.links.get(link_id)
            if link is None or link.endpoints != frozenset(self.nodes[i:i + 2]):
                return False
        return True


@dataclass
class Mapping:
    """Virtual node -> substrate host and virtual link -> substrate path."""
    vn: "VirtualNetwork"
    hosts: Dict[int, int] = field(default_factory=dict)
    routes: Dict[int, Optional[SubstratePath]] = field(default_factory=dict)

    def cpu_load(self) -> Dict[int, int]:
        """CPU demand per substrate host, co-located demands summed."""
        load: Dict[int, int] = {}
        for node in self.vn.nodes.values():
            if node.id not in self.hosts:
                raise InputError(f"Virtual node {node.id} has no host")
            host = self.hosts[node.id]
            load[host] = load.get(host, 0) + node.cpu_demand
        return load

    def bw_load(self) -> Dict[int, int]:
        """Bandwidth demand per substrate link over all routes."""
        load: Dict[int, int] = {}
        for link in self.vn.links.values():
            route = self.routes.get(link.id)
            if route is None:
                raise InputError(f"Virtual link {link.id} has no route")
            for link_id in route.links:
                load[link_id] = load.get(link_id, 0) + link.bw_demand
        return load


class SubstrateNetwork(_Graph[SubstrateNode, SubstrateLink]):
    """Physical network whose residuals are shared by all embedded requests."""

    def __init__(self):
        super().__init__()
        self._active: Dict[int, Tuple[Mapping, Dict[int, int], Dict[int, int]]] = {}
        self._component_cache: Dict[Tuple[int, int, FrozenSet[int]], List[FrozenSet[int]]] = {}

    def add_node(self, node_id: int, cpu_capacity: int,
                 x: float = 0.0, y: float = 0.0) -> SubstrateNode:
        node = SubstrateNode(node_id, cpu_capacity, x=x, y=y)
        self._register_node(node)
        self._component_cache.clear()
        return node

    def add_link(self, link_id: int, source: int, target: int,
                 bw_capacity: int) -> SubstrateLink:
        link = SubstrateLink(link_id, source, target, bw_capacity)
        self._register_link(link)
        self._component_cache.clear()
        return link

    # --- residual bookkeeping -------------------------------------------------

    def node_resources(self, node_id: int) -> int:
        """Residual CPU plus residual bandwidth of incident links."""
        node = self.nodes[node_id]
        return node.cpu_residual + sum(
            self.links[link_id].bw_residual for link_id in self._adjacency[node_id]
        )

    def claim_cpu(self, node_id: int, amount: int) -> None:
        node = self.nodes[node_id]
        if node.cpu_residual < amount:
            raise RejectionError(
                f"Insufficient CPU on node {node_id}: requested={amount}, "
                f"available={node.cpu_residual}", "node", node_id
            )
        node.cpu_residual -= amount

    def free_cpu(self, node_id: int, amount: int) -> None:
        node = self.nodes[node_id]
        if node.cpu_residual + amount > node.cpu_capacity:
            raise AllocationStateError(f"Releasing {amount} CPU overflows node {node_id}")
        node.cpu_residual += amount

    def claim_path(self, path: SubstratePath, amount: int) -> None:
        for link_id in path.links:
            link = self.links[link_id]
            if link.bw_residual < amount:
                raise RejectionError(
                    f"Insufficient bandwidth on link {link_id}: requested={amount}, "
                    f"available={link.bw_residual}", "link", link_id
                )
        for link_id in path.links:
            self.links[link_id].bw_residual -= amount

    def free_path(self, path: SubstratePath, amount: int) -> None:
        for link_id in path.links:
            link = self.links[link_id]
            if link.bw_residual + amount > link.bw_capacity:
                raise AllocationStateError(
                    f"Releasing {amount} bandwidth overflows link {link_id}"
                )
        for link_id in path.links:
            self.links[link_id].bw_residual += amount

    def path_fits(self, path: SubstratePath, amount: int) -> bool:
        return all(self.links[l].bw_residual >= amount for l in path.links)

    # --- snapshots and totals -------------------------------------------------

    def copy(self) -> "SubstrateNetwork":
        """Independent copy of topology and residuals (active allocations excluded)."""
        clone = SubstrateNetwork()
        clone.nodes = {k: replace(v) for k, v in self.nodes.items()}
        clone.links = {k: replace(v) for k, v in self.links.items()}
        clone._adjacency = {k: list(v) for k, v in self._adjacency.items()}
        clone._pairs = dict(self._pairs)
        return clone

    def snapshot(self) -> Tuple[Tuple[Tuple[int, int], ...], Tuple[Tuple[int, int], ...]]:
        return (
            tuple((n.id, n.cpu_residual) for n in self.nodes.values()),
            tuple((l.id, l.bw_residual) for l in self.links.values()),
        )

    @property
    def cpu_capacity(self) -> int:
        return sum(n.cpu_capacity for n in self.nodes.values())

    @property
    def cpu_residual(self) -> int:
        return sum(n.cpu_residual for n in self.nodes.values())

    @property
    def bw_capacity(self) -> int:
        return sum(l.bw_capacity for l in self.links.values())

    @property
    def bw_residual(self) -> int:
        return sum(l.bw_residual for l in self.links.values())

    def cpu_utilization(self) -> float:
        total = self.cpu_capacity
        return (total - self.cpu_residual) / total if total else 0.0

    def bw_utilization(self) -> float:
        total = self.bw_capacity
        return (total - self.bw_residual) / total if total else 0.0

    def loaded_node_count(self) -> int:
        """Substrate nodes currently hosting at least one virtual node."""
        return sum(1 for n in self.nodes.values() if n.cpu_residual < n.cpu_capacity)


class VirtualNetwork(_Graph[VirtualNode, VirtualLink]):

    def add_node(self, node_id: int, cpu_demand: int,
                 x: float = 0.0, y: float = 0.0) -> VirtualNode:
        node = VirtualNode(node_id, cpu_demand, x=x, y=y)
        self._register_node(node)
        return node

    def add_link(self, link_id: int, source: int, target: int,
                 bw_demand: int) -> VirtualLink:
        link = VirtualLink(link_id, source, target, bw_demand)
        self._register_link(link)
        return link

    def node_demand(self, node_id: int) -> int:
        """Demanded CPU plus demanded bandwidth of incident links."""
        return self.nodes[node_id].cpu_demand + sum(
            self.links[link_id].bw_demand for link_id in self._adjacency[node_id]
        )

    @property
    def cpu_demand(self) -> int:
        return sum(n.cpu_demand for n in self.nodes.values())

    @property
    def bw_demand(self) -> int:
        return sum(l.bw_demand for l in self.links.values())


@dataclass
class VNRequest:
    request_id: int
    vn: VirtualNetwork
    arrival_time: float
    lifetime: float

    def __post_init__(self):
        if self.arrival_time < 0:
            raise InputError(f"Request {self.request_id}: arrival time must be non-negative")
        if self.lifetime <= 0:
            raise InputError(f"Request {self.request_id}: lifetime must be positive")

    @property
    def departure_time(self) -> float:
        return self.arrival_time + self.lifetime


# --- Path finding ------------------------------------------------------------

def _check_node(sn: SubstrateNetwork, node_id: int) -> None:
    if node_id not in sn.nodes:
        raise InputError(f"Unknown substrate node {node_id}")


def shortest_feasible_path(sn: SubstrateNetwork, src: int, dst: int,
                           bw_demand: int, max_hops: int) -> Optional[SubstratePath]:
    """
    Minimum-hop loop-free path from src to dst whose links all have at least
    bw_demand residual bandwidth, or None. Neighbours are expanded in
    ascending link-id order, so ties resolve the same way on every run.
    """
    _check_node(sn, src)
    _check_node(sn, dst)
    if src == dst:
        return SubstratePath.colocated(src)

    parent: Dict[int, Optional[Tuple[int, int]]] = {src: None}
    frontier = [src]
    depth = 0
    while frontier and depth < max_hops:
        depth += 1
        next_frontier = []
        for u in frontier:
            for link_id in sn._adjacency[u]:
                link = sn.links[link_id]
                v = link.other(u)
                if v in parent or link.bw_residual < bw_demand:
                    continue
                parent[v] = (u, link_id)
                if v == dst:
                    return _unwind(parent, dst)
                next_frontier.append(v)
        frontier = next_frontier
    return None


def _unwind(parent: Dict[int, Optional[Tuple[int, int]]], dst: int) -> SubstratePath:
    nodes = [dst]
    links = []
    step = parent[dst]
    while step is not None:
        prev, link_id = step
        nodes.append(prev)
        links.append(link_id)
        step = parent[prev]
    nodes.reverse()
    links.reverse()
    return SubstratePath(nodes=tuple(nodes), links=tuple(links))


def feasible_reach(sn: SubstrateNetwork, src: int, bw_demand: int,
                   max_hops: int) -> Dict[int, int]:
    """
    Hop distance from src to every node reachable within max_hops over links
    with at least bw_demand residual. Keys are in breadth-first discovery order.
    """
    _check_node(sn, src)
    dist = {src: 0}
    frontier = [src]
    depth = 0
    while frontier and depth < max_hops:
        depth += 1
        next_frontier = []
        for u in frontier:
            for link_id in sn._adjacency[u]:
                link = sn.links[link_id]
                v = link.other(u)
                if v in dist or link.bw_residual < bw_demand:
                    continue
                dist[v] = depth
                next_frontier.append(v)
        frontier = next_frontier
    return dist


# --- Fragments ---------------------------------------------------------------

def residual_components(sn: SubstrateNetwork) -> List[FrozenSet[int]]:
    """
    Connected components over all nodes and the links with positive residual
    bandwidth, ordered by smallest member id. CPU residual plays no part.
    """
    saturated = frozenset(l.id for l in sn.links.values() if l.bw_residual <= 0)
    key = (len(sn.nodes), len(sn.links), saturated)
    cached = sn._component_cache.get(key)
    if cached is not None:
        return list(cached)

    g = nx.Graph()
    g.add_nodes_from(sn.nodes)
    g.add_edges_from(
        (l.source, l.target) for l in sn.links.values() if l.bw_residual > 0
    )
    components = sorted((frozenset(c) for c in nx.connected_components(g)), key=min)

    if len(sn._component_cache) >= 256:
        sn._component_cache.clear()
    sn._component_cache[key] = components
    return list(components)


# --- Allocation --------------------------------------------------------------

def allocate(sn: SubstrateNetwork, mapping: Mapping) -> None:
    """Subtract a mapping's demands from the residuals; all or nothing."""
    if id(mapping) in sn._active:
        raise AllocationStateError("Mapping is already allocated on this substrate")

    cpu = mapping.cpu_load()
    bw = mapping.bw_load()
    for host, amount in sorted(cpu.items()):
        node = sn.nodes.get(host)
        if node is None:
            raise InputError(f"Unknown substrate node {host}")
        if node.cpu_residual < amount:
            raise RejectionError(
                f"Insufficient CPU on node {host}: requested={amount}, "
                f"available={node.cpu_residual}", "node", host
            )
    for link_id, amount in sorted(bw.items()):
        link = sn.links.get(link_id)
        if link is None:
            raise InputError(f"Unknown substrate link {link_id}")
        if link.bw_residual < amount:
            raise RejectionError(
                f"Insufficient bandwidth on link {link_id}: requested={amount}, "
                f"available={link.bw_residual}", "link", link_id
            )

    for host, amount in cpu.items():
        sn.nodes[host].cpu_residual -= amount
    for link_id, amount in bw.items():
        sn.links[link_id].bw_residual -= amount
    sn._active[id(mapping)] = (mapping, cpu, bw)
    logger.debug(f"Allocated {sum(cpu.values())} CPU on {len(cpu)} nodes, "
                 f"{sum(bw.values())} bandwidth on {len(bw)} links")


def release(sn: SubstrateNetwork, mapping: Mapping) -> None:
    """Give back exactly what allocate took for this mapping."""
    entry = sn._active.pop(id(mapping), None)
    if entry is None:
        raise AllocationStateError("Mapping is not allocated on this substrate")
    _, cpu, bw = entry
    for host, amount in cpu.items():
        sn.nodes[host].cpu_residual += amount
    for link_id, amount in bw.items():
        sn.links[link_id].bw_residual += amount
    logger.debug(f"Released {sum(cpu.values())} CPU and {sum(bw.values())} bandwidth")
