"""
Waxman topologies and timed request workloads.

Exact link counts come from a random spanning tree plus Waxman-weighted
sampling without replacement over the remaining node pairs.
"""

import logging
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from src.core.errors import InputError
from src.core.netmodel import SubstrateNetwork, VirtualNetwork, VNRequest


logger = logging.getLogger(__name__)

# two-core servers at 1860 and 2660 MHz, cores pooled
SUBSTRATE_CPU_PROFILE: Tuple[int, ...] = (3720, 5320)
VN_CPU_CHOICES: Tuple[int, ...] = (2500, 2000, 1000, 500)


@dataclass(frozen=True)
class WaxmanParams:
    node_count: int
    link_count: int
    alpha: float = 0.5
    beta: float = 0.2
    plane_size: float = 100.0

    def __post_init__(self):
        if self.node_count < 1:
            raise InputError("node_count must be positive")
        max_links = self.node_count * (self.node_count - 1) // 2
        if not self.node_count - 1 <= self.link_count <= max_links:
            raise InputError(
                f"link_count must lie in [{self.node_count - 1}, {max_links}] "
                f"for {self.node_count} nodes, got {self.link_count}"
            )
        if not 0 < self.alpha <= 1 or not 0 < self.beta <= 1:
            raise InputError("alpha and beta must lie in (0, 1]")
        if self.plane_size <= 0:
            raise InputError("plane_size must be positive")


@dataclass(frozen=True)
class WorkloadParams:
    request_count: int = 1000
    vn_size_min: int = 2
    vn_size_max: int = 20
    connectivity: float = 0.5
    cpu_choices: Tuple[int, ...] = VN_CPU_CHOICES
    bw_min: int = 1
    bw_max: int = 50
    arrival_rate: float = 0.1
    lifetime_min: float = 300.0
    lifetime_max: float = 700.0
    seed: int = 0
    alpha: float = 0.5
    beta: float = 0.2

    def __post_init__(self):
        if self.request_count < 0:
            raise InputError("request_count must be non-negative")
        if not 1 <= self.vn_size_min <= self.vn_size_max:
            raise InputError("VN size range must satisfy 1 <= min <= max")
        if not 0 < self.connectivity <= 1:
            raise InputError("connectivity must lie in (0, 1]")
        if not self.cpu_choices or min(self.cpu_choices) <= 0:
            raise InputError("cpu_choices must be non-empty and positive")
        if not 1 <= self.bw_min <= self.bw_max:
            raise InputError("bandwidth range must satisfy 1 <= min <= max")
        if self.arrival_rate <= 0:
            raise InputError("arrival_rate must be positive")
        if not 0 < self.lifetime_min <= self.lifetime_max:
            raise InputError("lifetime range must satisfy 0 < min <= max")


def _waxman_layout(n: int, m: int, alpha: float, beta: float, plane: float,
                   rng: np.random.Generator) -> Tuple[np.ndarray, List[Tuple[int, int]]]:
    positions = np.round(rng.uniform(0.0, plane, size=(n, 2)), 6)
    if n == 1:
        return positions, []

    perm = rng.permutation(n)
    tree = set()
    for i in range(1, n):
        parent = int(perm[int(rng.integers(i))])
        tree.add(tuple(sorted((int(perm[i]), parent))))

    extra = m - (n - 1)
    if extra <= 0:
        return positions, sorted(tree)

    pairs = [(a, b) for a in range(n) for b in range(a + 1, n) if (a, b) not in tree]
    index = np.array(pairs)
    dist = np.linalg.norm(positions[index[:, 0]] - positions[index[:, 1]], axis=1)
    span = float(np.linalg.norm(positions[:, None, :] - positions[None, :, :], axis=2).max())
    if span > 0:
        weights = alpha * np.exp(-dist / (beta * span))
    else:
        weights = np.ones(len(pairs))
    chosen = rng.choice(len(pairs), size=extra, replace=False, p=weights / weights.sum())
    return positions, sorted(tree | {pairs[int(i)] for i in chosen})


def waxman_substrate(params: WaxmanParams, rng: np.random.Generator,
                     cpu_profile: Sequence[int] = SUBSTRATE_CPU_PROFILE,
                     bw_range: Tuple[int, int] = (50, 100)) -> SubstrateNetwork:
    """Connected substrate with exactly node_count nodes and link_count links."""
    lo, hi = bw_range
    if not 0 <= lo <= hi:
        raise InputError(f"Invalid bandwidth range {bw_range}")
    if not cpu_profile:
        raise InputError("CPU profile must not be empty")

    positions, edges = _waxman_layout(
        params.node_count, params.link_count, params.alpha, params.beta,
        params.plane_size, rng,
    )
    cpu = rng.choice(np.asarray(cpu_profile), size=params.node_count)
    bw = rng.integers(lo, hi + 1, size=len(edges))

    sn = SubstrateNetwork()
    for i in range(params.node_count):
        sn.add_node(i, int(cpu[i]), x=float(positions[i, 0]), y=float(positions[i, 1]))
    for link_id, (a, b) in enumerate(edges):
        sn.add_link(link_id, a, b, int(bw[link_id]))
    logger.debug(f"Generated substrate with {len(sn.nodes)} nodes and {len(sn.links)} links")
    return sn


def virtual_link_count(size: int, connectivity: float) -> int:
    """round(connectivity * max pairs), half up, clamped to [size - 1, max pairs]."""
    max_links = size * (size - 1) // 2
    target = math.floor(connectivity * max_links + 0.5)
    return min(max(target, size - 1), max_links)


def waxman_virtual(size: int, connectivity: float, cpu_choices: Sequence[int],
                   bw_range: Tuple[int, int], rng: np.random.Generator,
                   alpha: float = 0.5, beta: float = 0.2,
                   plane_size: float = 100.0) -> VirtualNetwork:
    if size < 1:
        raise InputError("Virtual network size must be positive")
    lo, hi = bw_range
    if not 1 <= lo <= hi:
        raise InputError(f"Invalid bandwidth range {bw_range}")

    positions, edges = _waxman_layout(
        size, virtual_link_count(size, connectivity), alpha, beta, plane_size, rng
    )
    cpu = rng.choice(np.asarray(cpu_choices), size=size)
    bw = rng.integers(lo, hi + 1, size=len(edges))

    vn = VirtualNetwork()
    for i in range(size):
        vn.add_node(i, int(cpu[i]), x=float(positions[i, 0]), y=float(positions[i, 1]))
    for link_id, (a, b) in enumerate(edges):
        vn.add_link(link_id, a, b, int(bw[link_id]))
    return vn


def generate_workload(params: WorkloadParams, rng: np.random.Generator) -> List[VNRequest]:
    """Poisson arrivals, uniform lifetimes and sizes, Waxman virtual networks."""
    requests = []
    clock = 0.0
    for request_id in range(params.request_count):
        clock += float(rng.exponential(1.0 / params.arrival_rate))
        size = int(rng.integers(params.vn_size_min, params.vn_size_max + 1))
        lifetime = float(rng.uniform(params.lifetime_min, params.lifetime_max))
        vn = waxman_virtual(
            size, params.connectivity, params.cpu_choices,
            (params.bw_min, params.bw_max), rng, params.alpha, params.beta,
        )
        requests.append(VNRequest(request_id, vn, clock, lifetime))
    logger.debug(f"Generated {len(requests)} requests up to t={clock:.2f}")
    return requests
