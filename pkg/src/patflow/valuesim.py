"""Value-level simulation and clocked-vs-functional equivalence checking.

Two executions of the same graph:

* :func:`eval_combinational` ignores time entirely.  Every node fires its
  full repetition count in topological order, consuming and producing whole
  token streams.  This is the functional meaning of the graph.
* :func:`simulate_clocked` drives the cycle-accurate machine from
  :mod:`patflow.schedule` with concrete values, so every firing decision is
  the one the generated hardware would take.

:func:`equivalence_check` runs both on random stimulus and compares the
token streams delivered to each sink input.  With ``gate_offset=0`` the two
must agree on every legal graph; a negative offset corrupts the firing
thresholds and lets tests confirm that the comparison actually detects
premature firings.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .errors import ShapeMismatch
from .exprs import eval_expr
from .graphs import Graph, NodeKind, compute_repetition_vector
from .schedule import Machine

__all__ = [
    "SimResult",
    "EquivalenceReport",
    "random_stimulus",
    "eval_combinational",
    "simulate_clocked",
    "equivalence_check",
]


@dataclass
class SimResult:
    """Outcome of a clocked value simulation."""

    arrivals: dict[str, list[tuple[int, int]]]
    edge_arrivals: dict[str, list[tuple[int, int]]]
    cycles: int
    firing_starts: dict[str, list[int]]
    underflow_edges: list[str]
    fold_trace: dict[str, list[int]]

    def values(self, sink: str) -> list[int]:
        """Token values delivered to ``sink`` in arrival order."""
        return [v for _, v in self.arrivals[sink]]


@dataclass
class EquivalenceReport:
    """Summary of repeated random-stimulus comparisons."""

    trials: int
    mismatches: int
    gate_offset: int
    counterexamples: list[dict] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.mismatches == 0


def _infer_iterations(g: Graph, stimulus: dict[str, list[list[int]]],
                      reps: dict[str, int]) -> int | None:
    counts = set()
    for src in g.sources:
        vecs = stimulus.get(src.name)
        if vecs is None:
            raise ShapeMismatch(f"stimulus missing source '{src.name}'")
        r = reps[src.name]
        if len(vecs) % r:
            raise ShapeMismatch(
                f"source '{src.name}' takes {r} firing vectors per iteration, "
                f"got {len(vecs)}"
            )
        counts.add(len(vecs) // r)
    if not counts:
        return None
    if len(counts) > 1:
        raise ShapeMismatch(
            f"stimulus lengths disagree on the iteration count: {sorted(counts)}"
        )
    return counts.pop()


def random_stimulus(
    g: Graph, iterations: int = 1, seed: int | None = None
) -> dict[str, list[list[int]]]:
    """Uniform random tokens for every source, ``iterations`` rounds deep."""
    rng = random.Random(seed)
    reps = compute_repetition_vector(g)
    out: dict[str, list[list[int]]] = {}
    for src in g.sources:
        hi = (1 << src.width) - 1
        per_firing = sum(p.total for p in src.patterns.outputs)
        out[src.name] = [
            [rng.randint(0, hi) for _ in range(per_firing)]
            for _ in range(reps[src.name] * iterations)
        ]
    return out


def _firing_outputs(spec, vectors: list[tuple[int, ...]]) -> list[list[int]]:
    """Evaluate one whole firing of a compute node; tokens per output port."""
    result = eval_expr(spec.body, vectors, spec.width)
    ports = len(spec.patterns.outputs)
    values = list(result) if ports > 1 else [result]
    out = []
    for port in range(ports):
        v = values[port]
        out.append(list(v) if isinstance(v, tuple) else [v])
    return out


def _combinational_streams(
    g: Graph, stimulus: dict[str, list[list[int]]], iterations: int
) -> dict[str, list[int]]:
    """Token stream per edge id under the untimed functional semantics."""
    reps = compute_repetition_vector(g)
    streams: dict[str, list[int]] = {e.id: [] for e in g.edges}
    for name in g.topo_order():
        spec = g.nodes[name]
        if spec.kind is NodeKind.SINK:
            continue
        firings = reps[name] * iterations
        in_edges = g.in_edges(name)
        cursors = [0] * len(in_edges)
        for k in range(firings):
            if spec.kind is NodeKind.SOURCE:
                vec = stimulus[name][k]
                per_port: list[list[int]] = []
                base = 0
                for p in spec.patterns.outputs:
                    per_port.append(list(vec[base : base + p.total]))
                    base += p.total
            else:
                vectors = []
                for i, e in enumerate(in_edges):
                    need = e.cp.total
                    s = streams[e.id]
                    vectors.append(tuple(s[cursors[i] : cursors[i] + need]))
                    cursors[i] += need
                per_port = _firing_outputs(spec, vectors)
            for port, vals in enumerate(per_port):
                for e in g.out_edges(name, port):
                    streams[e.id].extend(vals)
    return streams


def eval_combinational(
    g: Graph,
    stimulus: dict[str, list[list[int]]] | None = None,
    *,
    iterations: int | None = None,
) -> dict[str, list[int]]:
    """Functional reference output: token values per sink.

    A sink with several input ports reports the streams concatenated in
    port order.  The iteration count is inferred from the stimulus depth
    when not given.
    """
    stimulus = stimulus or {}
    reps = compute_repetition_vector(g)
    inferred = _infer_iterations(g, stimulus, reps)
    if iterations is None:
        iterations = inferred if inferred is not None else 1
    elif inferred is not None and inferred != iterations:
        raise ShapeMismatch(
            f"stimulus holds {inferred} iterations, {iterations} requested"
        )
    streams = _combinational_streams(g, stimulus, iterations)
    out: dict[str, list[int]] = {}
    for sink in g.sinks:
        vals: list[int] = []
        for e in g.in_edges(sink.name):
            vals.extend(streams[e.id])
        out[sink.name] = vals
    return out


def simulate_clocked(
    g: Graph,
    stimulus: dict[str, list[list[int]]] | None = None,
    *,
    iterations: int | None = None,
    gate_offset: int = 0,
    horizon: int | None = None,
    capacities: dict[str, int] | None = None,
) -> SimResult:
    """Cycle-accurate run carrying concrete token values.

    Raises :class:`~patflow.errors.FifoOverflow` when ``capacities`` are
    supplied and any FIFO exceeds its allocation; records (rather than
    raises on) underflows, which can only happen under a non-zero
    ``gate_offset``.
    """
    stimulus = stimulus or {}
    reps = compute_repetition_vector(g)
    inferred = _infer_iterations(g, stimulus, reps)
    if iterations is None:
        iterations = inferred if inferred is not None else 1
    elif inferred is not None and inferred != iterations:
        raise ShapeMismatch(
            f"stimulus holds {inferred} iterations, {iterations} requested"
        )
    m = Machine(
        g,
        iterations,
        values=True,
        stimulus=stimulus,
        gate_offset=gate_offset,
        horizon=horizon,
        capacities=capacities,
    ).run()
    merged: dict[str, list[tuple[int, int]]] = {n.name: [] for n in g.sinks}
    for sink in g.sinks:
        for e in g.in_edges(sink.name):
            merged[sink.name].extend(m.arrivals[e.id])
        merged[sink.name].sort(key=lambda tv: tv[0])
    return SimResult(
        arrivals=merged,
        edge_arrivals={k: list(v) for k, v in m.arrivals.items()},
        cycles=m.cycles,
        firing_starts={k: list(v) for k, v in m.starts.items()},
        underflow_edges=m.underflows(),
        fold_trace={k: list(v) for k, v in m.fold_trace.items()},
    )


def equivalence_check(
    g: Graph,
    trials: int,
    *,
    seed: int | None = 0,
    iterations: int = 1,
    gate_offset: int = 0,
    max_counterexamples: int = 3,
) -> EquivalenceReport:
    """Compare clocked and functional outputs over random stimulus.

    Every sink input edge must deliver the exact same token stream in both
    executions; each failing trial contributes one mismatch and, up to
    ``max_counterexamples`` times, a counterexample record with the
    stimulus and both streams.
    """
    rng = random.Random(seed)
    report = EquivalenceReport(trials=trials, mismatches=0, gate_offset=gate_offset)
    sink_edges = [
        e for e in g.edges if g.nodes[e.consumer].kind is NodeKind.SINK
    ]
    for _ in range(trials):
        stim = random_stimulus(g, iterations, seed=rng.getrandbits(64))
        streams = _combinational_streams(g, stim, iterations)
        clocked = simulate_clocked(g, stim, iterations=iterations, gate_offset=gate_offset)
        bad = False
        for e in sink_edges:
            expected = streams[e.id]
            got = [v for _, v in clocked.edge_arrivals[e.id]]
            if expected != got:
                bad = True
                if len(report.counterexamples) < max_counterexamples:
                    report.counterexamples.append(
                        {
                            "edge": e.id,
                            "stimulus": stim,
                            "expected": expected,
                            "clocked": got,
                            "underflows": clocked.underflow_edges,
                        }
                    )
        if bad:
            report.mismatches += 1
    return report
