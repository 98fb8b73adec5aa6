"""Tests for the resource estimator."""

from __future__ import annotations

import json

import pytest

from patflow import (
    divisor_refinements,
    estimate_resources,
    simulate_schedule,
    size_fifos,
)
from patflow.estimate import render_report, report_to_json
from patflow.fixtures import load_graph

from conftest import make_dotp


# ---------------------------------------------------------------------------
# Dot-product resource column
# ---------------------------------------------------------------------------

class TestDotProductColumn:
    @pytest.mark.parametrize(
        "name, dsp",
        [
            ("dotp-1x20", 1),
            ("dotp-5555", 5),
            ("dotp-1010", 10),
            ("dotp-20", 20),
        ],
    )
    def test_multiplier_count_tracks_parallelism(self, name, dsp):
        assert estimate_resources(load_graph(name)).dsp_count == dsp

    @pytest.mark.parametrize(
        "name", ["dotp-1x20", "dotp-5555", "dotp-1010", "dotp-20"]
    )
    def test_source_memory_is_invariant(self, name):
        # folding the datapath changes multipliers, never the source buffers:
        # both FIFOs hold one full 20-element firing of 18-bit tokens
        r = estimate_resources(load_graph(name))
        assert r.memory_bits == 720
        src_bits = [info["bits"] for eid, info in r.per_edge.items()
                    if info["kind"] == "fifo"]
        assert src_bits == [360, 360]

    def test_multiplier_work_is_conserved(self):
        # dsp * phases = element count for every refinement of the pattern
        for pattern in divisor_refinements(20):
            g = make_dotp(list(pattern.phases))
            r = estimate_resources(g)
            assert r.dsp_count * len(pattern) == 20, pattern


# ---------------------------------------------------------------------------
# Composition of the totals
# ---------------------------------------------------------------------------

class TestTotals:
    def test_register_bits_sum_nodes_and_edges(self):
        r = estimate_resources(load_graph("dotp-1010"))
        node_bits = sum(info["register_bits"] for info in r.per_node.values())
        edge_bits = sum(
            info["bits"] for info in r.per_edge.values()
            if info["kind"] == "pipeline" or info.get("flavor") == "register"
        )
        assert r.register_bits == node_bits + edge_bits == 202

    def test_memory_bits_sum_memory_fifos(self):
        r = estimate_resources(load_graph("dotp-1010"))
        mem = sum(info["bits"] for info in r.per_edge.values()
                  if info.get("flavor") == "memory")
        assert r.memory_bits == mem == 720

    def test_controllers_count_computes_and_fifos(self):
        # one firing controller per compute node, one threshold controller
        # per FIFO edge; pipelines and sink wires need none
        r = estimate_resources(load_graph("dotp-1010"))
        assert r.controller_count == 2 + 2

        r = estimate_resources(load_graph("fig2"))
        assert r.controller_count == 2 + 1

    def test_pure_adder_designs_use_no_dsp(self):
        for name in ("fig2", "alg1-worked", "moments"):
            assert estimate_resources(load_graph(name)).dsp_count == 0

    def test_fold_accumulator_is_counted(self):
        r = estimate_resources(load_graph("dotp-1010"))
        # 18-bit accumulator plus the 2-bit phase counter
        assert r.per_node["fl"]["register_bits"] == 20
        assert r.per_node["zw"]["register_bits"] == 2

    def test_not_modeled_is_declared(self):
        r = estimate_resources(load_graph("fig2"))
        assert r.not_modeled == ("lut", "alm", "fmax")


# ---------------------------------------------------------------------------
# Sized capacities
# ---------------------------------------------------------------------------

class TestSizedEstimates:
    def test_observed_peaks_cannot_shrink_buffers(self):
        g = load_graph("dotp-1010")
        s = simulate_schedule(g)
        r = estimate_resources(g, capacities=size_fifos(s, g))
        # peaks (10) stay below the gate lower bound (20), so nothing changes
        assert r.memory_bits == 720

    def test_larger_peaks_grow_buffers(self):
        g = load_graph("dotp-1010")
        r = estimate_resources(g, capacities={"xs.0->zw.0": 40})
        assert r.per_edge["xs.0->zw.0"]["bits"] == 720
        assert r.memory_bits == 720 + 360


# ---------------------------------------------------------------------------
# Rendering
# ---------------------------------------------------------------------------

class TestRendering:
    def test_report_json_round_trips(self):
        r = estimate_resources(load_graph("dotp-1010"))
        parsed = json.loads(json.dumps(report_to_json(r)))
        assert parsed["dsp_count"] == 10
        assert parsed["memory_bits"] == 720
        assert parsed["per_node"]["zw"]["ops"] == {"mul": 10}
        assert parsed["not_modeled"] == ["lut", "alm", "fmax"]

    def test_text_report_mentions_everything(self):
        text = render_report(estimate_resources(load_graph("dotp-1010")))
        for needle in ("zw", "fl", "xs.0->zw.0", "fifo/memory", "pipeline",
                       "totals: dsp=10", "memory_bits=720", "not modeled"):
            assert needle in text, needle
