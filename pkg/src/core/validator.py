from dataclasses import dataclass, field
from typing import Dict, List, Sequence

from src.core.errors import InputError
from src.core.netmodel import Mapping, SubstrateNetwork, VNRequest


@dataclass
class ValidationReport:
    valid: bool
    violations: List[str] = field(default_factory=list)

    def __bool__(self) -> bool:
        return self.valid


def validate(ch: Mapping, sn: SubstrateNetwork) -> ValidationReport:
    """Check a mapping's structure and its joint fit on sn; report every violation."""
    violations: List[str] = []
    vn = ch.vn

    order = getattr(ch, "order", None)
    if order is not None and (len(order) != len(vn.nodes) or set(order) != set(vn.nodes)):
        violations.append(
            f"gene order covers {len(order)} entries for {len(vn.nodes)} virtual nodes"
        )

    cpu: Dict[int, int] = {}
    for v in sorted(vn.nodes):
        host = ch.hosts.get(v)
        if host is None:
            violations.append(f"virtual node {v} has no host")
        elif host not in sn.nodes:
            violations.append(f"virtual node {v} is hosted on unknown substrate node {host}")
        else:
            cpu[host] = cpu.get(host, 0) + vn.nodes[v].cpu_demand

    bw: Dict[int, int] = {}
    for link_id in sorted(vn.links):
        link = vn.links[link_id]
        route = ch.routes.get(link_id)
        if route is None:
            violations.append(f"virtual link {link_id} has no route")
            continue
        ends = frozenset((ch.hosts.get(link.source), ch.hosts.get(link.target)))
        if route.endpoints != ends:
            violations.append(
                f"virtual link {link_id}: route ends {sorted(route.endpoints)} "
                f"do not match hosts {sorted(ends, key=str)}"
            )
        if len(ends) == 1 and len(route) > 0:
            violations.append(f"virtual link {link_id}: co-located endpoints need an empty route")
        if not route.is_walk_in(sn):
            violations.append(f"virtual link {link_id}: route is not a walk in the substrate")
            continue
        if not route.is_simple():
            violations.append(f"virtual link {link_id}: route repeats a substrate node")
        for substrate_link in route.links:
            bw[substrate_link] = bw.get(substrate_link, 0) + link.bw_demand

    for host, amount in sorted(cpu.items()):
        residual = sn.nodes[host].cpu_residual
        if amount > residual:
            violations.append(
                f"substrate node {host}: CPU demand {amount} exceeds residual {residual}"
            )
    for substrate_link, amount in sorted(bw.items()):
        residual = sn.links[substrate_link].bw_residual
        if amount > residual:
            violations.append(
                f"substrate link {substrate_link}: bandwidth demand {amount} "
                f"exceeds residual {residual}"
            )

    return ValidationReport(valid=not violations, violations=violations)


def validate_residual_bounds(sn: SubstrateNetwork) -> bool:
    """Validate 0 <= residual <= capacity on every node and link."""
    bad_nodes = [n.id for n in sn.nodes.values() if not 0 <= n.cpu_residual <= n.cpu_capacity]
    bad_links = [l.id for l in sn.links.values() if not 0 <= l.bw_residual <= l.bw_capacity]
    if bad_nodes or bad_links:
        raise InputError(f"Residuals out of bounds: nodes {bad_nodes}, links {bad_links}")
    return True


def validate_workload_order(workload: Sequence[VNRequest]) -> bool:
    """Validate that requests are sorted by arrival time and ids are unique."""
    ids = set()
    previous = 0.0
    for request in workload:
        if request.arrival_time < previous:
            raise InputError(f"Request {request.request_id} arrives out of order")
        if request.request_id in ids:
            raise InputError(f"Duplicate request id {request.request_id}")
        ids.add(request.request_id)
        previous = request.arrival_time
    return True
