"""A small structural RTL form: modules, nets, registers, continuous
assignments, clocked processes and instances.

The expression nodes cover exactly what the lowering emits; rendering
parenthesizes everything, so operator precedence never matters.
"""

from __future__ import annotations

from dataclasses import dataclass, field

__all__ = [
    "Port", "Net", "RegDecl", "Param",
    "RExpr", "RRef", "RLit", "RBin", "RNot", "RMux", "RIndex", "RSlice", "RConcat",
    "SAssign", "SIf",
    "Assign", "AlwaysFF", "Instance", "RtlModule", "RtlDesign",
    "check_design",
]


@dataclass(frozen=True)
class Port:
    name: str
    width: int
    direction: str  # "input" | "output"


@dataclass(frozen=True)
class Net:
    name: str
    width: int


@dataclass(frozen=True)
class RegDecl:
    name: str
    width: int
    depth: int | None = None  # a depth makes this a memory array


@dataclass(frozen=True)
class Param:
    name: str
    value: int


class RExpr:
    __slots__ = ()


@dataclass(frozen=True)
class RRef(RExpr):
    name: str


@dataclass(frozen=True)
class RLit(RExpr):
    value: int
    width: int | None = None


@dataclass(frozen=True)
class RBin(RExpr):
    op: str
    left: RExpr
    right: RExpr


@dataclass(frozen=True)
class RNot(RExpr):
    operand: RExpr


@dataclass(frozen=True)
class RMux(RExpr):
    cond: RExpr
    then: RExpr
    orelse: RExpr


@dataclass(frozen=True)
class RIndex(RExpr):
    base: str
    index: RExpr


@dataclass(frozen=True)
class RSlice(RExpr):
    base: str
    hi: int
    lo: int


@dataclass(frozen=True)
class RConcat(RExpr):
    parts: tuple[RExpr, ...]  # most significant first


@dataclass(frozen=True)
class SAssign:
    target: RExpr  # RRef or RIndex
    value: RExpr


@dataclass(frozen=True)
class SIf:
    cond: RExpr
    then: tuple = ()
    orelse: tuple = ()


@dataclass(frozen=True)
class Assign:
    target: str
    value: RExpr


@dataclass(frozen=True)
class AlwaysFF:
    body: tuple  # statements, applied at posedge clk


@dataclass(frozen=True)
class Instance:
    module: str
    name: str
    conns: tuple[tuple[str, RExpr], ...]


@dataclass
class RtlModule:
    name: str
    ports: list[Port] = field(default_factory=list)
    params: list[Param] = field(default_factory=list)
    nets: list[Net] = field(default_factory=list)
    regs: list[RegDecl] = field(default_factory=list)
    assigns: list[Assign] = field(default_factory=list)
    always: list[AlwaysFF] = field(default_factory=list)
    instances: list[Instance] = field(default_factory=list)
    comment: str = ""

    def port(self, name: str, width: int, direction: str) -> str:
        self.ports.append(Port(name, width, direction))
        return name

    def net(self, name: str, width: int) -> str:
        self.nets.append(Net(name, width))
        return name


@dataclass
class RtlDesign:
    name: str
    top: str
    modules: dict[str, RtlModule] = field(default_factory=dict)
    manifest: dict = field(default_factory=dict)

    def add(self, module: RtlModule) -> RtlModule:
        self.modules[module.name] = module
        return module


def _decl_widths(m: RtlModule) -> dict[str, int]:
    widths: dict[str, int] = {}
    for p in m.ports:
        widths[p.name] = p.width
    for n in m.nets:
        widths[n.name] = n.width
    for r in m.regs:
        if r.depth is None:
            widths[r.name] = r.width
    return widths


def _expr_width(e: RExpr, widths: dict[str, int]) -> int | None:
    if isinstance(e, RRef):
        return widths.get(e.name)
    if isinstance(e, RLit):
        return e.width
    if isinstance(e, RSlice):
        return e.hi - e.lo + 1
    if isinstance(e, RConcat):
        total = 0
        for p in e.parts:
            w = _expr_width(p, widths)
            if w is None:
                return None
            total += w
        return total
    return None


def _referenced_names(e, acc: set[str]) -> None:
    if isinstance(e, RRef):
        acc.add(e.name)
    elif isinstance(e, RBin):
        _referenced_names(e.left, acc)
        _referenced_names(e.right, acc)
    elif isinstance(e, RNot):
        _referenced_names(e.operand, acc)
    elif isinstance(e, RMux):
        _referenced_names(e.cond, acc)
        _referenced_names(e.then, acc)
        _referenced_names(e.orelse, acc)
    elif isinstance(e, RIndex):
        acc.add(e.base)
        _referenced_names(e.index, acc)
    elif isinstance(e, RSlice):
        acc.add(e.base)
    elif isinstance(e, RConcat):
        for p in e.parts:
            _referenced_names(p, acc)


def _statement_names(stmt, acc: set[str]) -> None:
    if isinstance(stmt, SAssign):
        _referenced_names(stmt.target, acc)
        _referenced_names(stmt.value, acc)
    elif isinstance(stmt, SIf):
        _referenced_names(stmt.cond, acc)
        for s in stmt.then:
            _statement_names(s, acc)
        for s in stmt.orelse:
            _statement_names(s, acc)


def check_design(design: RtlDesign) -> list[str]:
    """Structural consistency problems; empty when the design is sound.

    Checks that the top module exists, that every instance references a
    defined module, connects only declared ports, drives every input, that
    every referenced name resolves to a declaration, and that connection
    widths agree wherever both sides are known.
    """
    problems: list[str] = []
    if design.top not in design.modules:
        problems.append(f"top module '{design.top}' is not defined")
    for m in design.modules.values():
        widths = _decl_widths(m)
        seen: set[str] = set()
        declared = (
            [p.name for p in m.ports]
            + [n.name for n in m.nets]
            + [r.name for r in m.regs]
        )
        for decl in declared:
            if decl in seen:
                problems.append(f"{m.name}: duplicate declaration '{decl}'")
            seen.add(decl)
        known = seen | {p.name for p in m.params}
        used: set[str] = set()
        for a in m.assigns:
            used.add(a.target)
            _referenced_names(a.value, used)
        for blk in m.always:
            for stmt in blk.body:
                _statement_names(stmt, used)
        for inst in m.instances:
            for _, expr in inst.conns:
                _referenced_names(expr, used)
        for name in sorted(used - known):
            problems.append(f"{m.name}: reference to undeclared name '{name}'")
        for inst in m.instances:
            child = design.modules.get(inst.module)
            if child is None:
                problems.append(
                    f"{m.name}: instance '{inst.name}' references undefined "
                    f"module '{inst.module}'"
                )
                continue
            child_ports = {p.name: p for p in child.ports}
            connected = set()
            for port_name, expr in inst.conns:
                port = child_ports.get(port_name)
                if port is None:
                    problems.append(
                        f"{m.name}.{inst.name}: no port '{port_name}' on "
                        f"'{inst.module}'"
                    )
                    continue
                connected.add(port_name)
                got = _expr_width(expr, widths)
                if got is not None and got != port.width:
                    problems.append(
                        f"{m.name}.{inst.name}: port '{port_name}' is "
                        f"{port.width} bits, connected to {got}"
                    )
            for missing in sorted(set(child_ports) - connected):
                if child_ports[missing].direction == "input":
                    problems.append(
                        f"{m.name}.{inst.name}: input '{missing}' unconnected"
                    )
    return problems
