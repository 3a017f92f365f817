import numpy as np
import pytest

from src.core.errors import ParseError
from src.core.exporter import write_summary, write_topology, write_workload
from src.core.loader import (
    load_summary,
    load_topology,
    load_workload,
    parse_summary,
    read_topology,
    read_workload,
)
from src.core.netmodel import SubstrateNetwork, VirtualNetwork
from src.core.simulator import SimSummary
from src.core.workload import (
    VN_CPU_CHOICES,
    WaxmanParams,
    WorkloadParams,
    generate_workload,
    waxman_substrate,
    waxman_virtual,
)


# --- Fixtures ----------------------------------------------------------------

@pytest.fixture
def tiny_text():
    return (
        "Topology: ( 2 Nodes, 1 Edges )\n"
        "Nodes:\n"
        "0 12.500000 40.000000 3720\n"
        "1 80.000000 10.250000 5320\n"
        "Edges:\n"
        "0 0 1 75\n"
    )


# --- read_topology tests -----------------------------------------------------

def test_read_topology(tiny_text):
    """read_topology should rebuild nodes, links, capacities and coordinates."""
    sn = read_topology(tiny_text)
    assert isinstance(sn, SubstrateNetwork)
    assert sn.nodes[1].cpu_capacity == 5320
    assert sn.nodes[1].y == 10.25
    assert sn.links[0].bw_capacity == 75
    assert sn.links[0].bw_residual == 75


def test_read_topology_virtual(tiny_text):
    """kind='virtual' should produce demands instead of capacities."""
    vn = read_topology(tiny_text, "virtual")
    assert isinstance(vn, VirtualNetwork)
    assert vn.nodes[0].cpu_demand == 3720
    assert vn.links[0].bw_demand == 75


def test_substrate_round_trip():
    """Generated substrates should survive write and read unchanged."""
    rng = np.random.default_rng(31)
    for _ in range(100):
        n = int(rng.integers(2, 15))
        m = int(rng.integers(n - 1, n * (n - 1) // 2 + 1))
        sn = waxman_substrate(WaxmanParams(n, m), rng)
        assert read_topology(write_topology(sn)) == sn


def test_virtual_round_trip():
    """Generated virtual networks should survive write and read unchanged."""
    rng = np.random.default_rng(32)
    for _ in range(100):
        vn = waxman_virtual(int(rng.integers(1, 12)), 0.5, VN_CPU_CHOICES, (1, 50), rng)
        assert read_topology(write_topology(vn), "virtual") == vn


@pytest.mark.parametrize("text,line", [
    ("Topology: ( 3 Nodes, 0 Edges )\nNodes:\n0 0 0 1\n1 0 0 1\nEdges:\n", 1),
    ("Topology ( 1 Nodes, 0 Edges )\nNodes:\n0 0 0 1\nEdges:\n", 1),
    ("Topology: ( 2 Nodes, 1 Edges )\nNodes:\n0 0 0 1\n1 0 0 1\nEdges:\n0 0 5 3\n", 6),
    ("Topology: ( 2 Nodes, 1 Edges )\nNodes:\n0 0 0 1\n1 0 0\nEdges:\n0 0 1 3\n", 4),
    ("Topology: ( 2 Nodes, 0 Edges )\nNodes:\n0 0 0 1\n2 0 0 1\nEdges:\n", 4),
    ("Topology: ( 1 Nodes, 0 Edges )\nNodes:\n0 0 0 x\nEdges:\n", 3),
    ("Topology: ( 1 Nodes, 0 Edges )\n0 0 0 1\nEdges:\n", 2),
    ("Topology: ( 1 Nodes, 0 Edges )\nNodes:\n0 0 0 1\nEdges:\n0 0 0 1\n", 5),
])
def test_read_topology_errors_carry_line_numbers(text, line):
    """Malformed files should raise ParseError pointing at the offending line."""
    with pytest.raises(ParseError) as info:
        read_topology(text)
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}:")


def test_parse_error_is_value_error():
    """ParseError should be catchable as ValueError."""
    with pytest.raises(ValueError):
        read_topology("")


def test_load_topology_missing_file():
    """load_topology should raise FileNotFoundError for a missing file."""
    with pytest.raises(FileNotFoundError):
        load_topology("missing.topo")


def test_load_topology_from_file(tmp_path, tiny_text):
    """load_topology should read the file it is pointed at."""
    file = tmp_path / "sn.topo"
    file.write_text(tiny_text, encoding="utf-8")
    assert len(load_topology(str(file)).nodes) == 2


# --- workload tests ----------------------------------------------------------

def test_workload_round_trip(tmp_path):
    """Workloads should round-trip exactly, including float times and the seed."""
    workload = generate_workload(WorkloadParams(request_count=25), np.random.default_rng(6))
    file = tmp_path / "wl.txt"
    file.write_text(write_workload(workload, seed=6), encoding="utf-8")

    loaded, seed = load_workload(str(file))
    assert seed == 6
    assert len(loaded) == 25
    for original, copy in zip(workload, loaded):
        assert copy.request_id == original.request_id
        assert copy.arrival_time == original.arrival_time
        assert copy.lifetime == original.lifetime
        assert copy.vn == original.vn


def test_workload_count_mismatch():
    """A header count that disagrees with the body should raise ParseError on line 1."""
    text = write_workload([], seed=0).replace("0 Requests", "2 Requests")
    with pytest.raises(ParseError) as info:
        read_workload(text)
    assert info.value.line == 1


def test_workload_out_of_order():
    """Requests out of arrival order should be rejected."""
    block = "Topology: ( 1 Nodes, 0 Edges )\nNodes:\n0 0 0 5\nEdges:\n"
    text = (
        "Workload: ( 2 Requests, seed 0 )\n"
        f"Request: 0 5.0 1.0\n{block}"
        f"Request: 1 2.0 1.0\n{block}"
    )
    with pytest.raises(ParseError) as info:
        read_workload(text)
    assert info.value.line == 7


def test_workload_bad_header():
    with pytest.raises(ParseError):
        read_workload("Requests: 3\n")


# --- summary tests -----------------------------------------------------------

def test_summary_round_trip(tmp_path):
    """Summaries should parse back with six-decimal precision."""
    summary = SimSummary(
        solver="greedy", seed=3, total_time=1000.0, request_count=10, accepted_count=7,
        acceptance_ratio=0.7, resource_acceptance_ratio=0.6, cpu_acceptance_ratio=0.65,
        bw_acceptance_ratio=0.55, long_term_avg_revenue=512.1234567, long_term_avg_cost=600.0,
        revenue_cost_ratio=0.85, long_term_avg_snf=0.05, long_term_cpu_utilization=0.4,
        long_term_bw_utilization=0.3, avg_active_nodes=12.0, mean_solve_time=0.002,
    )
    file = tmp_path / "summary.txt"
    file.write_text(write_summary(summary), encoding="utf-8")
    loaded = load_summary(str(file))
    assert loaded.solver == "greedy"
    assert loaded.seed == 3
    assert loaded.accepted_count == 7
    assert loaded.long_term_avg_revenue == pytest.approx(512.123457, abs=1e-9)
    assert loaded.acceptance_ratio == 0.7


def test_summary_missing_field():
    """A summary without every field should raise ParseError."""
    with pytest.raises(ParseError):
        parse_summary("solver: mepde\nseed: 1\n")


def test_summary_unknown_field():
    """Unknown keys should be reported with their line number."""
    with pytest.raises(ParseError) as info:
        parse_summary("solver: mepde\nbogus: 1\n")
    assert info.value.line == 2
