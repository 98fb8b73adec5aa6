"""Self-timed (ASAP) cycle-accurate scheduling and FIFO sizing.

One shared machine steps the graph cycle by cycle; the schedule view runs it
on token counts alone, and the value simulator (:mod:`patflow.valuesim`)
runs the same machine carrying concrete values, so both always agree on
firing decisions.

Timing semantics
----------------
* Nodes are visited in topological order within a cycle, so a consumer can
  observe a producer firing that starts in the same cycle.
* Tokens leaving a *source* port are visible in the cycle they are supplied
  (the environment drives them combinationally into the input FIFO); tokens
  leaving a *compute* node sit behind its output register and become visible
  at the start of the next cycle.  Each edge is gated by the matching
  threshold table (see :func:`patflow.lowering.edge_gate_table`).
* An idle node starts a firing exactly when every input edge held, at the
  start of the cycle, at least the threshold indexed by its producer's
  current phase (or the idle entry when the producer is between firings).
  Once started, a firing runs to completion, one phase per cycle; the
  thresholds guarantee it never stalls.
* Sources and input-less compute nodes fire back to back while they still
  owe firings for the requested iteration count.
* Edges into sinks are plain wiring: tokens are delivered in the cycle they
  are produced.

Occupancy traces record each FIFO at the moment its consumer samples it
(after the producer's same-cycle supply, before consumption), which is the
quantity the thresholds gate on.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from io import StringIO

from .errors import Deadlock, FifoOverflow, HorizonExceeded, ShapeMismatch
from .exprs import eval_expr
from .graphs import Graph, NodeKind, compute_repetition_vector
from .lowering import DatapathPlan, edge_gate_table, lower_hof_node

__all__ = [
    "Schedule",
    "TimingReport",
    "simulate_schedule",
    "timing_report",
    "size_fifos",
    "render_gantt",
    "schedule_to_json",
]


@dataclass
class Schedule:
    """Result of a cycle-accurate run on token counts."""

    graph: str
    iterations: int
    firing_starts: dict[str, list[int]]
    horizon: int
    per_edge_occupancy: dict[str, list[int]]
    last_sink_cycle: int | None

    @property
    def first_start(self) -> int | None:
        starts = [v[0] for v in self.firing_starts.values() if v]
        return min(starts) if starts else None


@dataclass(frozen=True)
class TimingReport:
    """Latency/throughput summary of a schedule."""

    latency_cycles: int
    throughput: float
    fifo_capacities: dict[str, int]


# ---------------------------------------------------------------------------
# The shared machine


class _NodeRT:
    __slots__ = (
        "spec", "plan", "owed", "fired", "active", "phase",
        "stepped_cycle", "phase_now", "inbufs", "acc", "acc_seeded",
        "stim", "out_prefix", "in_prefix",
    )

    def __init__(self, spec, plan: DatapathPlan | None, owed: int):
        self.spec = spec
        self.plan = plan
        self.owed = owed
        self.fired = 0
        self.active = False
        self.phase = 0
        self.stepped_cycle = -1
        self.phase_now = 0
        self.inbufs: list[list[int]] = []
        self.acc: int | None = None
        self.acc_seeded = False
        self.stim: list[int] | None = None
        # Token offsets at the start of each phase, per output port.
        self.out_prefix = [
            [sum(p.phases[:k]) for k in range(len(p) + 1)]
            for p in spec.patterns.outputs
        ]
        self.in_prefix = [
            [sum(p.phases[:k]) for k in range(len(p) + 1)]
            for p in spec.patterns.inputs
        ]


class _EdgeRT:
    __slots__ = (
        "spec", "gate", "is_sink", "source_fed", "occupancy", "occ_start",
        "fifo", "pending_count", "pending_vals", "trace", "underflow",
    )

    def __init__(self, spec, gate, is_sink: bool, source_fed: bool):
        self.spec = spec
        self.gate = gate
        self.is_sink = is_sink
        self.source_fed = source_fed
        self.occupancy = 0
        self.occ_start = 0
        self.fifo: deque[int] = deque()
        self.pending_count = 0
        self.pending_vals: list[int] = []
        self.trace: list[int] = []
        self.underflow = False


class Machine:
    """Cycle-stepped execution of a graph.

    Not part of the public API surface; use :func:`simulate_schedule` or
    :func:`patflow.valuesim.simulate_clocked`.
    """

    def __init__(
        self,
        g: Graph,
        iterations: int,
        *,
        values: bool = False,
        stimulus: dict[str, list[list[int]]] | None = None,
        gate_offset: int = 0,
        horizon: int | None = None,
        capacities: dict[str, int] | None = None,
        plans: dict[str, DatapathPlan] | None = None,
    ):
        if iterations < 0:
            raise ValueError("iterations must be >= 0")
        self.g = g
        self.iterations = iterations
        self.values = values
        self.gate_offset = gate_offset
        self.capacities = capacities
        self.topo = g.topo_order()
        reps = compute_repetition_vector(g)

        if plans is None and values:
            plans = {n.name: lower_hof_node(n) for n in g.computes}
        self.nodes: dict[str, _NodeRT] = {}
        for name in self.topo:
            spec = g.nodes[name]
            owed = 0 if spec.kind is NodeKind.SINK else reps[name] * iterations
            plan = plans.get(name) if plans and spec.kind is NodeKind.COMPUTE else None
            self.nodes[name] = _NodeRT(spec, plan, owed)

        self.edges: dict[str, _EdgeRT] = {}
        self.in_rt: dict[str, list[_EdgeRT]] = {n: [] for n in g.nodes}
        self.out_rt: dict[str, list[list[_EdgeRT]]] = {
            n: [[] for _ in g.nodes[n].patterns.outputs] for n in g.nodes
        }
        for e in g.edges:
            rt = _EdgeRT(
                e,
                edge_gate_table(g, e),
                is_sink=g.nodes[e.consumer].kind is NodeKind.SINK,
                source_fed=g.nodes[e.producer].kind is NodeKind.SOURCE,
            )
            self.edges[e.id] = rt
            self.out_rt[e.producer][e.producer_port].append(rt)
        for name in g.nodes:
            self.in_rt[name] = [self.edges[e.id] for e in g.in_edges(name)]

        if values:
            self._bind_stimulus(stimulus or {})

        if horizon is None:
            work = sum(
                reps[n.name] * max(1, n.length)
                for n in g.nodes.values()
                if n.kind is not NodeKind.SINK
            )
            horizon = 4 * iterations * work + 8
        self.horizon_limit = horizon

        self.starts: dict[str, list[int]] = {
            n: [] for n in g.nodes if g.nodes[n].kind is not NodeKind.SINK
        }
        self.arrivals: dict[str, list[tuple[int, int]]] = {
            e.id: [] for e in g.edges if self.edges[e.id].is_sink
        }
        self.fold_trace: dict[str, list[int]] = {}
        self.last_sink_cycle: int | None = None
        self.cycles = 0

    # -- setup -------------------------------------------------------------

    def _bind_stimulus(self, stimulus: dict[str, list[list[int]]]) -> None:
        for src in self.g.sources:
            vecs = stimulus.get(src.name)
            if vecs is None:
                raise ShapeMismatch(f"stimulus missing source '{src.name}'")
            need = self.nodes[src.name].owed
            if len(vecs) != need:
                raise ShapeMismatch(
                    f"source '{src.name}' needs {need} firing vectors "
                    f"({self.iterations} iterations), got {len(vecs)}"
                )
            per_firing = sum(p.total for p in src.patterns.outputs)
            for k, v in enumerate(vecs):
                if len(v) != per_firing:
                    raise ShapeMismatch(
                        f"source '{src.name}' firing {k}: expected {per_firing} "
                        f"tokens, got {len(v)}"
                    )
        extra = set(stimulus) - {s.name for s in self.g.sources}
        if extra:
            raise ShapeMismatch(f"stimulus for non-source nodes: {sorted(extra)}")
        self.stimulus = stimulus

    # -- firing decisions ----------------------------------------------------

    def _gate_entry(self, ert: _EdgeRT, t: int) -> int:
        prt = self.nodes[ert.spec.producer]
        if prt.active and prt.stepped_cycle == t:
            entry = ert.gate[prt.phase_now]
        elif not prt.active and prt.stepped_cycle == t:
            # Producer finished its firing this very cycle; during cycle t it
            # was still in its last phase.
            entry = ert.gate[prt.phase_now]
        else:
            entry = ert.gate.idle
        return max(0, entry + self.gate_offset)

    def _can_start(self, name: str, t: int) -> bool:
        # Thresholds are defined against the tokens buffered before the
        # producer's same-cycle supply, so the gate reads the cycle-start
        # snapshot; consumption afterwards may still use same-cycle tokens,
        # which is exactly the alignment the tables promise.
        nrt = self.nodes[name]
        if nrt.spec.kind is NodeKind.SOURCE:
            return True
        for ert in self.in_rt[name]:
            if ert.occ_start < self._gate_entry(ert, t):
                return False
        return True

    # -- stepping ------------------------------------------------------------

    def _begin_firing(self, nrt: _NodeRT, t: int) -> None:
        nrt.active = True
        nrt.phase = 0
        self.starts[nrt.spec.name].append(t)
        if self.values:
            nrt.inbufs = [[] for _ in nrt.spec.patterns.inputs]
            nrt.acc = None
            nrt.acc_seeded = False
            if nrt.spec.kind is NodeKind.SOURCE:
                nrt.stim = self.stimulus[nrt.spec.name][nrt.fired]

    def _consume(self, nrt: _NodeRT, ph: int) -> None:
        for port, ert in enumerate(self.in_rt[nrt.spec.name]):
            c = ert.spec.cp[ph]
            if not c:
                continue
            got = min(c, ert.occupancy)
            missing = c - got
            ert.occupancy -= got
            if missing:
                ert.underflow = True
            if self.values:
                vals = [ert.fifo.popleft() for _ in range(min(got, len(ert.fifo)))]
                vals += [0] * (c - len(vals))
                nrt.inbufs[port].extend(vals)

    def _phase_outputs(self, nrt: _NodeRT, ph: int) -> list[list[int]]:
        """Concrete output tokens per port for this phase (value mode)."""
        spec = nrt.spec
        width = spec.width
        counts = [p[ph] for p in spec.patterns.outputs]

        if spec.kind is NodeKind.SOURCE:
            # Stimulus vector covers all output ports, port-major.
            out = []
            base = 0
            for port, p in enumerate(spec.patterns.outputs):
                off = base + nrt.out_prefix[port][ph]
                out.append(list(nrt.stim[off : off + counts[port]]))
                base += p.total
            return out

        plan = nrt.plan
        assert plan is not None
        if plan.mode == "fold":
            new = nrt.inbufs[plan.fold_input][
                nrt.in_prefix[plan.fold_input][ph] : nrt.in_prefix[plan.fold_input][ph + 1]
            ]
            acc = nrt.acc
            seeded = nrt.acc_seeded
            if ph == 0 and plan.fold_init is not None:
                acc, seeded = plan.fold_init, True
            fn = plan.fold_fn
            for tok in new:
                if not seeded:
                    acc, seeded = tok, True
                else:
                    acc = eval_expr(
                        fn.body,
                        [],
                        width,
                        env={fn.params[0]: acc, fn.params[1]: tok},
                    )
            nrt.acc, nrt.acc_seeded = acc, seeded
            self.fold_trace.setdefault(spec.name, []).append(acc if acc is not None else 0)
            return [[acc] * c if c else [] for c in counts]

        if plan.mode == "elementwise":
            out = []
            for port, c in enumerate(counts):
                lo = nrt.out_prefix[port][ph]
                vals = []
                for k in range(lo, lo + c):
                    elems = [buf[k] for buf in nrt.inbufs]
                    vals.append(eval_expr(plan.scalar_exprs[port], elems, width))
                out.append(vals)
            return out

        # general: single phase, everything is available at once
        vectors = [tuple(buf) for buf in nrt.inbufs]
        result = eval_expr(spec.body, vectors, width)
        ports = len(spec.patterns.outputs)
        values = list(result) if ports > 1 else [result]
        out = []
        for port in range(ports):
            v = values[port]
            out.append(list(v) if isinstance(v, tuple) else [v])
        return out

    def _produce(self, nrt: _NodeRT, ph: int, t: int) -> None:
        spec = nrt.spec
        vals = self._phase_outputs(nrt, ph) if self.values else None
        for port, p in enumerate(spec.patterns.outputs):
            count = p[ph]
            if not count:
                continue
            port_vals = vals[port] if vals is not None else None
            for ert in self.out_rt[spec.name][port]:
                if ert.is_sink:
                    self.last_sink_cycle = t
                    if port_vals is not None:
                        for v in port_vals:
                            self.arrivals[ert.spec.id].append((t, v))
                elif ert.source_fed:
                    ert.occupancy += count
                    if port_vals is not None:
                        ert.fifo.extend(port_vals)
                else:
                    ert.pending_count += count
                    if port_vals is not None:
                        ert.pending_vals.extend(port_vals)

    def _step(self, nrt: _NodeRT, t: int) -> None:
        ph = nrt.phase
        nrt.phase_now = ph
        nrt.stepped_cycle = t
        self._consume(nrt, ph)
        self._produce(nrt, ph, t)
        nrt.phase += 1
        if nrt.phase >= nrt.spec.length:
            nrt.active = False
            nrt.fired += 1

    def _done(self) -> bool:
        return all(
            n.fired >= n.owed and not n.active for n in self.nodes.values()
        ) and all(e.pending_count == 0 for e in self.edges.values())

    def run(self) -> "Machine":
        t = 0
        while not self._done():
            if t >= self.horizon_limit:
                raise HorizonExceeded(
                    f"no completion within {self.horizon_limit} cycles"
                )
            stepped = False
            for ert in self.edges.values():
                ert.occ_start = ert.occupancy
            for name in self.topo:
                nrt = self.nodes[name]
                if nrt.spec.kind is NodeKind.SINK:
                    continue
                for ert in self.in_rt[name]:
                    ert.trace.append(ert.occupancy)
                if not nrt.active and nrt.fired < nrt.owed and self._can_start(name, t):
                    self._begin_firing(nrt, t)
                if nrt.active:
                    self._step(nrt, t)
                    stepped = True
            for ert in self.edges.values():
                if ert.pending_count:
                    ert.occupancy += ert.pending_count
                    ert.pending_count = 0
                    if self.values:
                        ert.fifo.extend(ert.pending_vals)
                        ert.pending_vals.clear()
                if self.capacities is not None and not ert.is_sink:
                    cap = self.capacities.get(ert.spec.id)
                    if cap is not None and ert.occupancy > cap:
                        raise FifoOverflow(
                            f"edge '{ert.spec.id}' holds {ert.occupancy} tokens, "
                            f"sized for {cap}"
                        )
            if not stepped:
                blocked = [
                    n for n, rt in self.nodes.items()
                    if rt.fired < rt.owed and rt.spec.kind is not NodeKind.SINK
                ]
                occ = {e.spec.id: e.occupancy for e in self.edges.values() if not e.is_sink}
                raise Deadlock(
                    f"no progress at cycle {t}; waiting nodes {blocked}, occupancy {occ}"
                )
            t += 1
        self.cycles = t
        return self

    # -- exports -------------------------------------------------------------

    def traces(self) -> dict[str, list[int]]:
        return {
            eid: list(rt.trace) for eid, rt in self.edges.items() if not rt.is_sink
        }

    def underflows(self) -> list[str]:
        return [eid for eid, rt in self.edges.items() if rt.underflow]


# ---------------------------------------------------------------------------
# Public operations


def simulate_schedule(
    g: Graph,
    iterations: int | None = None,
    *,
    horizon: int | None = None,
    gate_offset: int = 0,
) -> Schedule:
    """Run the self-timed schedule for ``iterations`` graph iterations.

    Parameters
    ----------
    g : Graph
        A graph that passed validation.
    iterations : int, optional
        Defaults to the document's ``meta.iterations``.
    horizon : int, optional
        Cycle budget override; the default scales with the repetition
        vector and pattern lengths.
    gate_offset : int
        Added to every firing threshold.  0 for normal operation; negative
        values deliberately corrupt the thresholds (fault injection) and
        positive values over-constrain them (may deadlock).

    Raises
    ------
    Deadlock, HorizonExceeded
    """
    if iterations is None:
        iterations = g.iterations
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    m = Machine(
        g, iterations, values=False, horizon=horizon, gate_offset=gate_offset
    ).run()
    return Schedule(
        graph=g.name,
        iterations=iterations,
        firing_starts={k: list(v) for k, v in m.starts.items()},
        horizon=m.cycles,
        per_edge_occupancy=m.traces(),
        last_sink_cycle=m.last_sink_cycle,
    )


def size_fifos(s: Schedule, g: Graph) -> dict[str, int]:
    """Peak observed occupancy per non-sink edge.

    Run the schedule for at least two iterations before trusting these as
    steady-state capacities; allocation additionally never drops below one
    full firing of the consumer (see :func:`patflow.lowering.lower_edges`).
    """
    return {eid: max(trace, default=0) for eid, trace in s.per_edge_occupancy.items()}


def timing_report(s: Schedule, g: Graph) -> TimingReport:
    """Latency and average throughput of a completed schedule.

    Latency counts the inclusive cycle span from the first firing start to
    the cycle in which the last sink token is produced.
    """
    first = s.first_start
    if first is None:
        return TimingReport(0, 0.0, size_fifos(s, g))
    last = s.last_sink_cycle if s.last_sink_cycle is not None else s.horizon - 1
    latency = last - first + 1
    throughput = s.iterations / latency if latency > 0 else 0.0
    return TimingReport(latency, throughput, size_fifos(s, g))


def render_gantt(s: Schedule, g: Graph) -> str:
    """Fixed-width text chart: one row per node, one column per cycle,
    ``#`` while the node is firing."""
    horizon = s.horizon
    names = [n for n in g.topo_order() if g.nodes[n].kind is not NodeKind.SINK]
    label_w = max([len(n) for n in names] + [5]) + 2
    out = StringIO()
    ruler = "".join(str(t % 10) for t in range(horizon))
    out.write("cycle".ljust(label_w) + ruler + "\n")
    for name in names:
        length = g.nodes[name].length
        row = ["."] * horizon
        for start in s.firing_starts.get(name, []):
            for k in range(length):
                if start + k < horizon:
                    row[start + k] = "#"
        out.write(name.ljust(label_w) + "".join(row) + "\n")
    return out.getvalue()


def schedule_to_json(s: Schedule) -> dict:
    """JSON-ready view of a schedule."""
    return {
        "graph": s.graph,
        "iterations": s.iterations,
        "horizon": s.horizon,
        "firing_starts": {k: list(v) for k, v in s.firing_starts.items()},
        "fifo_peaks": {
            eid: max(trace, default=0)
            for eid, trace in s.per_edge_occupancy.items()
        },
        "last_sink_cycle": s.last_sink_cycle,
    }
