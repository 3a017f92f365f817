"""Readers for the topology, workload and summary files written by the exporter."""

import re
from dataclasses import fields
from typing import List, Literal, Tuple, Union

from src.core.errors import InputError, ParseError
from src.core.netmodel import SubstrateNetwork, VirtualNetwork, VNRequest
from src.core.simulator import SimSummary


TopologyKind = Literal["substrate", "virtual"]

_TOPOLOGY_HEADER = re.compile(r"^Topology: \( (\d+) Nodes, (\d+) Edges \)$")
_WORKLOAD_HEADER = re.compile(r"^Workload: \( (\d+) Requests, seed (\d+) \)$")
_REQUEST = re.compile(r"^Request: (\d+) (\S+) (\S+)$")

Lines = List[Tuple[int, str]]


def _numbered_lines(text: str) -> Lines:
    """Non-blank lines with their 1-based line numbers."""
    return [(i, line.strip()) for i, line in enumerate(text.splitlines(), start=1) if line.strip()]


def _read_file(filepath: str) -> str:
    try:
        with open(filepath, "r", encoding="utf-8") as f:
            return f.read()
    except FileNotFoundError:
        raise FileNotFoundError("File not found")


def _fields(line: str, lineno: int, count: int, what: str) -> List[str]:
    parts = line.split()
    if len(parts) != count:
        raise ParseError(f"{what} line needs {count} fields, got {len(parts)}", lineno)
    return parts


def _parse_topology(lines: Lines, start: int,
                    kind: TopologyKind) -> Tuple[Union[SubstrateNetwork, VirtualNetwork], int]:
    """Parse one topology block beginning at lines[start]; return it and the next index."""
    if start >= len(lines):
        last = lines[-1][0] if lines else 0
        raise ParseError("expected a topology header", last + 1)

    header_no, header = lines[start]
    match = _TOPOLOGY_HEADER.match(header)
    if not match:
        raise ParseError(f"malformed topology header: {header!r}", header_no)
    node_count, link_count = int(match.group(1)), int(match.group(2))

    g = SubstrateNetwork() if kind == "substrate" else VirtualNetwork()
    i = start + 1

    def section(title: str) -> None:
        nonlocal i
        if i >= len(lines) or lines[i][1] != title:
            found = lines[i][0] if i < len(lines) else header_no
            raise ParseError(f"expected {title!r} section", found)
        i += 1

    section("Nodes:")
    for expected in range(node_count):
        if i >= len(lines) or lines[i][1] == "Edges:":
            raise ParseError(
                f"header declares {node_count} nodes, section has {expected}", header_no
            )
        lineno, line = lines[i]
        parts = _fields(line, lineno, 4, "node")
        try:
            node_id, x, y, amount = int(parts[0]), float(parts[1]), float(parts[2]), int(parts[3])
        except ValueError as e:
            raise ParseError(f"bad node field: {e}", lineno)
        if node_id != expected:
            raise ParseError(f"node ids must be dense from 0, expected {expected}", lineno)
        try:
            g.add_node(node_id, amount, x=x, y=y)
        except InputError as e:
            raise ParseError(str(e), lineno)
        i += 1

    section("Edges:")
    for expected in range(link_count):
        if i >= len(lines) or not lines[i][1][:1].isdigit():
            raise ParseError(
                f"header declares {link_count} edges, section has {expected}", header_no
            )
        lineno, line = lines[i]
        parts = _fields(line, lineno, 4, "edge")
        try:
            link_id, source, target, amount = (int(p) for p in parts)
        except ValueError as e:
            raise ParseError(f"bad edge field: {e}", lineno)
        if link_id != expected:
            raise ParseError(f"edge ids must be dense from 0, expected {expected}", lineno)
        if source not in g.nodes or target not in g.nodes:
            raise ParseError(f"edge {link_id} references an unknown node", lineno)
        try:
            g.add_link(link_id, source, target, amount)
        except InputError as e:
            raise ParseError(str(e), lineno)
        i += 1

    return g, i


def read_topology(text: str, kind: TopologyKind = "substrate") -> Union[SubstrateNetwork, VirtualNetwork]:
    lines = _numbered_lines(text)
    g, end = _parse_topology(lines, 0, kind)
    if end < len(lines):
        raise ParseError("unexpected content after the edge section", lines[end][0])
    return g


def load_topology(filepath: str, kind: TopologyKind = "substrate") -> Union[SubstrateNetwork, VirtualNetwork]:
    return read_topology(_read_file(filepath), kind)


def read_workload(text: str) -> Tuple[List[VNRequest], int]:
    """Requests in file order plus the seed recorded in the header."""
    lines = _numbered_lines(text)
    if not lines:
        raise ParseError("empty workload file", 1)
    match = _WORKLOAD_HEADER.match(lines[0][1])
    if not match:
        raise ParseError(f"malformed workload header: {lines[0][1]!r}", lines[0][0])
    count, seed = int(match.group(1)), int(match.group(2))

    requests: List[VNRequest] = []
    i = 1
    previous = 0.0
    while i < len(lines):
        lineno, line = lines[i]
        request = _REQUEST.match(line)
        if not request:
            raise ParseError(f"expected a Request line, got {line!r}", lineno)
        try:
            arrival, lifetime = float(request.group(2)), float(request.group(3))
        except ValueError as e:
            raise ParseError(f"bad request field: {e}", lineno)
        if arrival < previous:
            raise ParseError("requests must be ordered by arrival time", lineno)
        vn, i = _parse_topology(lines, i + 1, "virtual")
        try:
            requests.append(VNRequest(int(request.group(1)), vn, arrival, lifetime))
        except InputError as e:
            raise ParseError(str(e), lineno)
        previous = arrival

    if len(requests) != count:
        raise ParseError(f"header declares {count} requests, file has {len(requests)}", lines[0][0])
    return requests, seed


def load_workload(filepath: str) -> Tuple[List[VNRequest], int]:
    return read_workload(_read_file(filepath))


def parse_summary(text: str) -> SimSummary:
    values = {}
    types = {f.name: f.type for f in fields(SimSummary)}
    lines = _numbered_lines(text)
    for lineno, line in lines:
        key, sep, value = line.partition(":")
        key = key.strip()
        if not sep or key not in types:
            raise ParseError(f"unknown summary entry: {line!r}", lineno)
        cast = types[key] if types[key] in (int, float) else str
        try:
            values[key] = cast(value.strip())
        except ValueError as e:
            raise ParseError(f"bad value for {key}: {e}", lineno)

    missing = [name for name in types if name not in values]
    if missing:
        raise ParseError(f"summary is missing {missing}", (lines[-1][0] if lines else 0) + 1)
    return SimSummary(**values)


def load_summary(filepath: str) -> SimSummary:
    return parse_summary(_read_file(filepath))
