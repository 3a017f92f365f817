"""
Writers for topology, workload, trace and summary files.

Topology grammar (ids dense from 0, sorted, LF line endings):

    Topology: ( <N> Nodes, <M> Edges )
    Nodes:
    <id> <x> <y> <cpu>
    Edges:
    <id> <from> <to> <bw>

Coordinates carry six decimals; <cpu> is the capacity of a substrate node or
the demand of a virtual node, <bw> likewise for links.
"""

from dataclasses import fields
from pathlib import Path
from typing import List, Sequence, Union

from src.core.errors import InputError
from src.core.netmodel import SubstrateNetwork, VirtualNetwork, VNRequest
from src.core.simulator import SimSummary, SimTrace


Topology = Union[SubstrateNetwork, VirtualNetwork]


def _write_text(filepath: str, text: str, overwrite: bool) -> None:
    path = Path(filepath)
    if path.exists() and not overwrite:
        raise FileExistsError(f"File {filepath} already exists. Set overwrite=True to replace.")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(text)


def _topology_lines(g: Topology) -> List[str]:
    if sorted(g.nodes) != list(range(len(g.nodes))) or sorted(g.links) != list(range(len(g.links))):
        raise InputError("Node and link ids must be dense from 0 to be written")

    lines = [f"Topology: ( {len(g.nodes)} Nodes, {len(g.links)} Edges )", "Nodes:"]
    for node_id in sorted(g.nodes):
        node = g.nodes[node_id]
        amount = node.cpu_capacity if isinstance(g, SubstrateNetwork) else node.cpu_demand
        lines.append(f"{node.id} {node.x:.6f} {node.y:.6f} {amount}")
    lines.append("Edges:")
    for link_id in sorted(g.links):
        link = g.links[link_id]
        amount = link.bw_capacity if isinstance(g, SubstrateNetwork) else link.bw_demand
        lines.append(f"{link.id} {link.source} {link.target} {amount}")
    return lines


def write_topology(g: Topology) -> str:
    """Serialize a substrate (capacities) or virtual network (demands)."""
    return "\n".join(_topology_lines(g)) + "\n"


def save_topology(g: Topology, filepath: str, overwrite: bool = False) -> None:
    _write_text(filepath, write_topology(g), overwrite)


def write_workload(workload: Sequence[VNRequest], seed: int = 0) -> str:
    """Header plus one `Request:` line and topology block per request, in list order."""
    lines = [f"Workload: ( {len(workload)} Requests, seed {seed} )"]
    for request in workload:
        lines.append(f"Request: {request.request_id} {request.arrival_time!r} {request.lifetime!r}")
        lines.extend(_topology_lines(request.vn))
    return "\n".join(lines) + "\n"


def save_workload(workload: Sequence[VNRequest], filepath: str, seed: int = 0,
                  overwrite: bool = False) -> None:
    _write_text(filepath, write_workload(workload, seed), overwrite)


def write_trace(trace: SimTrace) -> str:
    """One sample per row; an empty trace yields the header row only."""
    return trace.samples_frame().to_csv(index=False, lineterminator="\n")


def write_records(trace: SimTrace) -> str:
    return trace.records_frame().to_csv(index=False, lineterminator="\n")


def export_trace(trace: SimTrace, filepath: str, overwrite: bool = False) -> None:
    _write_text(filepath, write_trace(trace), overwrite)


def export_records(trace: SimTrace, filepath: str, overwrite: bool = False) -> None:
    _write_text(filepath, write_records(trace), overwrite)


def write_summary(summary: SimSummary) -> str:
    lines = []
    for f in fields(SimSummary):
        value = getattr(summary, f.name)
        text = f"{value:.6f}" if isinstance(value, float) else str(value)
        lines.append(f"{f.name}: {text}")
    return "\n".join(lines) + "\n"


def export_summary(summary: SimSummary, filepath: str, overwrite: bool = False) -> None:
    _write_text(filepath, write_summary(summary), overwrite)
