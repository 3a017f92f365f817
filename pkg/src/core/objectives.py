"""
Revenue, embedding cost and substrate fragmentation.

The evolutionary search minimises the pair (cost, fragmentation); revenue
only feeds the simulator's long-term metrics.
"""

from dataclasses import dataclass
from fractions import Fraction
from typing import FrozenSet, NamedTuple

from src.core.errors import EvaluationError, InputError, RejectionError
from src.core.netmodel import (
    Mapping,
    SubstrateNetwork,
    VirtualNetwork,
    allocate,
    release,
    residual_components,
)


class ObjectiveVector(NamedTuple):
    cost: int
    fragmentation: float


@dataclass(frozen=True)
class FragmentationParams:
    q: int = 2

    def __post_init__(self):
        if int(self.q) != self.q or self.q < 2:
            raise InputError(f"Fragmentation exponent q must be an integer >= 2, got {self.q}")


def revenue(vn: VirtualNetwork, active: bool = True) -> int:
    """Demanded CPU plus demanded bandwidth while the request is alive."""
    if not active:
        return 0
    return vn.cpu_demand + vn.bw_demand


def cost(vn: VirtualNetwork, mapping: Mapping, active: bool = True) -> int:
    """Allocated CPU plus bandwidth times path length; co-located links are free."""
    for node_id in vn.nodes:
        if node_id not in mapping.hosts:
            raise InputError(f"Virtual node {node_id} is not mapped")
    total = vn.cpu_demand
    for link in vn.links.values():
        route = mapping.routes.get(link.id)
        if route is None:
            raise InputError(f"Virtual link {link.id} is not routed")
        total += link.bw_demand * len(route)
    return total if active else 0


def residual_sum(sn: SubstrateNetwork, component: FrozenSet[int]) -> int:
    """Residual CPU of the component nodes plus residual bandwidth of the links inside it."""
    total = sum(sn.nodes[n].cpu_residual for n in component)
    total += sum(
        l.bw_residual for l in sn.links.values()
        if l.source in component and l.target in component
    )
    return total


def snf(sn: SubstrateNetwork, params: FragmentationParams = FragmentationParams()) -> float:
    """
    Substrate network fragmentation: 1 - sum(r_i^q) / (sum r_i)^q over the
    residual fragments. Zero for a single fragment and, by convention, for a
    substrate with no residual left at all.
    """
    components = residual_components(sn)
    if len(components) <= 1:
        return 0.0

    sums = [residual_sum(sn, component) for component in components]
    total = sum(sums)
    if total == 0:
        return 0.0
    ratio = Fraction(sum(r ** params.q for r in sums), total ** params.q)
    return float(1 - ratio)


def measure(sn: SubstrateNetwork, vn: VirtualNetwork, mapping: Mapping,
            params: FragmentationParams = FragmentationParams()) -> ObjectiveVector:
    """Objective vector when the mapping is already applied to sn."""
    return ObjectiveVector(cost(vn, mapping), snf(sn, params))


def evaluate(sn: SubstrateNetwork, vn: VirtualNetwork, mapping: Mapping,
             params: FragmentationParams = FragmentationParams()) -> ObjectiveVector:
    """Apply the mapping, measure (cost, fragmentation), roll back."""
    try:
        allocate(sn, mapping)
    except (RejectionError, InputError) as e:
        raise EvaluationError(f"Mapping cannot be evaluated: {e}") from e
    try:
        return measure(sn, vn, mapping, params)
    finally:
        release(sn, mapping)
