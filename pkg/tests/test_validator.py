import pytest

from src.core import validator
from src.core.mepde import Chromosome
from src.core.netmodel import Mapping, SubstrateNetwork, SubstratePath, VirtualNetwork, VNRequest


# --- Fixtures ----------------------------------------------------------------

@pytest.fixture
def line_sn():
    """Three substrate nodes in a line, 50 CPU each, links of 10."""
    sn = SubstrateNetwork()
    for i in range(3):
        sn.add_node(i, 50)
    sn.add_link(0, 0, 1, 10)
    sn.add_link(1, 1, 2, 10)
    return sn


@pytest.fixture
def pair_vn():
    vn = VirtualNetwork()
    vn.add_node(0, 30)
    vn.add_node(1, 20)
    vn.add_link(0, 0, 1, 5)
    return vn


def mapping(vn, hosts, routes):
    return Mapping(vn=vn, hosts=hosts, routes=routes)


# --- validate tests ----------------------------------------------------------

def test_validate_accepts_spread_mapping(line_sn, pair_vn):
    """A mapping routed over existing links within residuals should be valid."""
    report = validator.validate(
        mapping(pair_vn, {0: 0, 1: 2}, {0: SubstratePath((0, 1, 2), (0, 1))}), line_sn
    )
    assert report.valid
    assert report
    assert report.violations == []


def test_validate_accepts_colocation(line_sn, pair_vn):
    """Co-located endpoints with an empty route should be valid."""
    report = validator.validate(mapping(pair_vn, {0: 1, 1: 1}, {0: SubstratePath.colocated(1)}), line_sn)
    assert report.valid


def test_validate_flags_joint_cpu_overload(line_sn, pair_vn):
    """Two virtual nodes that fit alone but not together should be flagged."""
    line_sn.nodes[1].cpu_residual = 40
    report = validator.validate(mapping(pair_vn, {0: 1, 1: 1}, {0: SubstratePath.colocated(1)}), line_sn)
    assert not report
    assert any("CPU demand 50 exceeds residual 40" in v for v in report.violations)


def test_validate_flags_bandwidth(line_sn, pair_vn):
    """A route crossing a link with too little residual bandwidth should be flagged."""
    line_sn.links[1].bw_residual = 4
    report = validator.validate(
        mapping(pair_vn, {0: 0, 1: 2}, {0: SubstratePath((0, 1, 2), (0, 1))}), line_sn
    )
    assert report.violations == ["substrate link 1: bandwidth demand 5 exceeds residual 4"]


def test_validate_flags_missing_host_and_route(line_sn, pair_vn):
    """Every unassigned node and unrouted link should be reported."""
    report = validator.validate(mapping(pair_vn, {0: 0}, {}), line_sn)
    assert "virtual node 1 has no host" in report.violations
    assert "virtual link 0 has no route" in report.violations


def test_validate_flags_unknown_host(line_sn, pair_vn):
    report = validator.validate(mapping(pair_vn, {0: 0, 1: 9}, {0: SubstratePath((0, 1), (0,))}), line_sn)
    assert any("unknown substrate node 9" in v for v in report.violations)


def test_validate_flags_mismatched_route(line_sn, pair_vn):
    """A route that does not join the two hosts should be flagged."""
    report = validator.validate(
        mapping(pair_vn, {0: 0, 1: 2}, {0: SubstratePath((0, 1), (0,))}), line_sn
    )
    assert any("do not match hosts" in v for v in report.violations)


def test_validate_flags_broken_walk(line_sn, pair_vn):
    """Links that do not connect consecutive path nodes should be flagged."""
    report = validator.validate(
        mapping(pair_vn, {0: 0, 1: 2}, {0: SubstratePath((0, 1, 2), (1, 0))}), line_sn
    )
    assert any("not a walk" in v for v in report.violations)


def test_validate_flags_bad_gene_order(line_sn, pair_vn):
    """A chromosome whose gene order misses a virtual node should be flagged."""
    ch = Chromosome(vn=pair_vn, hosts={0: 1, 1: 1}, routes={0: SubstratePath.colocated(1)}, order=(0,))
    report = validator.validate(ch, line_sn)
    assert any("gene order" in v for v in report.violations)


def test_validate_does_not_mutate(line_sn, pair_vn):
    """Validation should leave the substrate residuals untouched."""
    before = line_sn.snapshot()
    validator.validate(mapping(pair_vn, {0: 0, 1: 2}, {0: SubstratePath((0, 1, 2), (0, 1))}), line_sn)
    assert line_sn.snapshot() == before


# --- validate_residual_bounds tests ------------------------------------------

def test_validate_residual_bounds_ok(line_sn):
    assert validator.validate_residual_bounds(line_sn) is True


@pytest.mark.parametrize("cpu,bw", [(-1, 10), (51, 10), (50, -2), (50, 11)])
def test_validate_residual_bounds_raises(line_sn, cpu, bw):
    """Residuals below zero or above capacity should raise ValueError."""
    line_sn.nodes[0].cpu_residual = cpu
    line_sn.links[0].bw_residual = bw
    with pytest.raises(ValueError):
        validator.validate_residual_bounds(line_sn)


# --- validate_workload_order tests -------------------------------------------

def one_node(request_id, arrival):
    vn = VirtualNetwork()
    vn.add_node(0, 10)
    return VNRequest(request_id, vn, arrival, 5.0)


def test_validate_workload_order_ok():
    assert validator.validate_workload_order([one_node(0, 0.0), one_node(1, 0.0), one_node(2, 3.5)])


def test_validate_workload_order_unsorted():
    """Requests that go back in time should raise ValueError."""
    with pytest.raises(ValueError):
        validator.validate_workload_order([one_node(0, 4.0), one_node(1, 1.0)])


def test_validate_workload_order_duplicate_ids():
    """Reused request ids should raise ValueError."""
    with pytest.raises(ValueError):
        validator.validate_workload_order([one_node(0, 1.0), one_node(0, 2.0)])
