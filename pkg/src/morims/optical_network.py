"""Optical feed network: elements, graph validation and power propagation.

Powers are in mW throughout.  The network is a tree rooted at the single
source: every other element has one input, and only Y-branches fan out.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from graphlib import CycleError, TopologicalSorter
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

from .netlist import NetlistAst, Statement

DEFAULT_COUPLING = {"tapered": 0.84, "through": 0.67}

KINDS = ("source", "waveguide", "ybranch", "tap")


class NetworkError(ValueError):
    """Invalid optical network topology or element parameters."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


def db_to_transmission(loss_db: float) -> float:
    return 10.0 ** (-loss_db / 10.0)


@dataclass(frozen=True)
class OpticalElement:
    id: str
    kind: str
    input_power: float = 0.0
    excess_loss: float = 0.0
    split_fraction: float = 0.5
    device_type: str | None = None
    coupling_fraction: float | None = None
    inputs: tuple[str, ...] = ()
    outputs: tuple[str, ...] = ()
    line: int | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise NetworkError(f"unknown optical element kind {self.kind!r}", self.line)
        if self.input_power < 0:
            raise NetworkError(f"{self.id}: input power must be >= 0", self.line)
        if self.excess_loss < 0:
            raise NetworkError(f"{self.id}: excess loss must be >= 0 dB", self.line)
        if not 0.0 <= self.split_fraction <= 1.0:
            raise NetworkError(f"{self.id}: split fraction must lie in [0, 1]", self.line)
        if self.kind == "tap":
            if self.device_type not in DEFAULT_COUPLING:
                raise NetworkError(f"{self.id}: tap device type must be tapered or through", self.line)
            if self.coupling_fraction is None:
                object.__setattr__(self, "coupling_fraction", DEFAULT_COUPLING[self.device_type])
            if not 0.0 <= self.coupling_fraction <= 1.0:
                raise NetworkError(f"{self.id}: coupling fraction must lie in [0, 1]", self.line)
            n_out = 0 if self.device_type == "tapered" else 1
            if len(self.outputs) != n_out:
                raise NetworkError(
                    f"{self.id}: a {self.device_type} tap has {n_out} downstream port(s)", self.line
                )
        expected_in = 0 if self.kind == "source" else 1
        if len(self.inputs) != expected_in:
            raise NetworkError(f"{self.id}: {self.kind} takes {expected_in} input port(s)", self.line)
        if self.kind == "ybranch" and len(self.outputs) != 2:
            raise NetworkError(f"{self.id}: a Y-branch has two output ports", self.line)
        if self.kind in ("source", "waveguide") and len(self.outputs) != 1:
            raise NetworkError(f"{self.id}: {self.kind} has one output port", self.line)


@dataclass(frozen=True)
class OpticalGraph:
    """Validated, immutable optical network.

    ``edges`` maps a net name to ``(driver_id, consumer_id or None)``; a net
    without a consumer is an open (terminated) output.
    """

    elements: Mapping[str, OpticalElement]
    edges: Mapping[str, tuple[str, str | None]]
    order: tuple[str, ...]
    source_id: str

    def children(self, ident: str) -> list[str]:
        el = self.elements[ident]
        return [c for net in el.outputs if (c := self.edges[net][1]) is not None]

    def parent(self, ident: str) -> str | None:
        el = self.elements[ident]
        return self.edges[el.inputs[0]][0] if el.inputs else None

    @property
    def taps(self) -> list[str]:
        return [i for i in self.order if self.elements[i].kind == "tap"]


@dataclass(frozen=True)
class PowerSolution:
    """Result of :func:`propagate`.

    ``absorbed`` is the power coupled into each tap's patch; ``residual`` the
    power an element transmits downstream; ``incident`` what reaches its input.
    ``terminated`` collects power leaving the network unabsorbed (open output
    nets and the uncoupled remainder at tapered taps) and ``dissipated`` the
    excess loss of waveguides and Y-branches.
    """

    absorbed: Mapping[str, float]
    residual: Mapping[str, float]
    incident: Mapping[str, float]
    net_power: Mapping[str, float]
    terminated: Mapping[str, float]
    dissipated: Mapping[str, float]


def split_ybranch(p_in: float, split_fraction: float = 0.5, excess_loss_db: float = 0.0) -> tuple[float, float]:
    """Split ``p_in`` into two arms after excess loss; ratio ``s : 1 - s``."""
    if p_in < 0:
        raise ValueError("p_in must be >= 0")
    p = p_in * db_to_transmission(excess_loss_db)
    return p * split_fraction, p * (1.0 - split_fraction)


def _element_from_statement(st: Statement) -> OpticalElement:
    common = dict(id=st.id, line=st.line)
    if st.kind == "source":
        out = st.port("out") or (st.id,)
        return OpticalElement(kind="source", input_power=st.attr("power_mw"), outputs=out, **common)
    if st.kind == "waveguide":
        return OpticalElement(
            kind="waveguide",
            excess_loss=st.attr("loss_db", 0.0),
            inputs=st.port("in"),
            outputs=st.port("out"),
            **common,
        )
    if st.kind == "ybranch":
        return OpticalElement(
            kind="ybranch",
            split_fraction=st.attr("split", 0.5),
            excess_loss=st.attr("loss_db", 0.0),
            inputs=st.port("in"),
            outputs=st.port("out"),
            **common,
        )
    return OpticalElement(
        kind="tap",
        device_type=st.attr("type"),
        coupling_fraction=st.attr("coupling"),
        inputs=st.port("in"),
        outputs=st.port("out"),
        **common,
    )


def build_graph(elements: Iterable[OpticalElement]) -> OpticalGraph:
    """Validate elements wired by shared net names and order them topologically."""
    elements = list(elements)
    by_id: dict[str, OpticalElement] = {}
    for el in elements:
        if el.id in by_id:
            raise NetworkError(f"duplicate element id {el.id!r}", el.line)
        by_id[el.id] = el

    sources = [el for el in elements if el.kind == "source"]
    if len(sources) != 1:
        names = ", ".join(s.id for s in sources) or "none"
        raise NetworkError(f"network needs exactly one source, found {len(sources)} ({names})")

    drivers: dict[str, str] = {}
    for el in elements:
        for net in el.outputs:
            if net in drivers:
                raise NetworkError(
                    f"net {net!r} is driven by both {drivers[net]} and {el.id}", el.line
                )
            drivers[net] = el.id

    consumers: dict[str, str] = {}
    for el in elements:
        for net in el.inputs:
            if net not in drivers:
                raise NetworkError(f"{el.id}: dangling port reference, nothing drives net {net!r}", el.line)
            if net in consumers:
                # one output feeding two inputs means fan-out outside a Y-branch
                drv = by_id[drivers[net]]
                raise NetworkError(
                    f"fan-out from non-ybranch element {drv.id} (net {net!r} feeds "
                    f"{consumers[net]} and {el.id})",
                    el.line,
                )
            consumers[net] = el.id

    edges = {net: (drv, consumers.get(net)) for net, drv in drivers.items()}
    deps = {el.id: {drivers[n] for n in el.inputs} for el in elements}
    try:
        order = tuple(TopologicalSorter(deps).static_order())
    except CycleError as exc:
        cycle = " -> ".join(exc.args[1])
        raise NetworkError(f"cycle detected: {cycle}") from None

    return OpticalGraph(
        elements=MappingProxyType(by_id),
        edges=MappingProxyType(edges),
        order=order,
        source_id=sources[0].id,
    )


def build_network(ast: NetlistAst) -> OpticalGraph:
    """Build and validate an :class:`OpticalGraph` from a parsed netlist."""
    return build_graph(_element_from_statement(st) for st in ast)


def topological_orders_ok(graph: OpticalGraph, order: Sequence[str]) -> bool:
    pos = {k: i for i, k in enumerate(order)}
    if set(pos) != set(graph.elements):
        return False
    return all(pos[drv] < pos[con] for drv, con in graph.edges.values() if con is not None)


def propagate(graph: OpticalGraph, order: Sequence[str] | None = None) -> PowerSolution:
    """Propagate source power through the network.

    ``order`` may be any topological order of the element ids; the result
    does not depend on which one is used.
    """
    if order is None:
        order = graph.order
    elif not topological_orders_ok(graph, order):
        raise NetworkError("order is not a topological order of the graph")

    net_power: dict[str, float] = {}
    absorbed: dict[str, float] = {}
    residual: dict[str, float] = {}
    incident: dict[str, float] = {}
    terminated: dict[str, float] = {}
    dissipated: dict[str, float] = {}

    for ident in order:
        el = graph.elements[ident]
        p_in = net_power[el.inputs[0]] if el.inputs else 0.0
        incident[ident] = p_in
        absorbed[ident] = 0.0
        dissipated[ident] = 0.0
        if el.kind == "source":
            outs = [el.input_power]
        elif el.kind == "waveguide":
            p = p_in * db_to_transmission(el.excess_loss)
            dissipated[ident] = p_in - p
            outs = [p]
        elif el.kind == "ybranch":
            a, b = split_ybranch(p_in, el.split_fraction, el.excess_loss)
            dissipated[ident] = p_in - (a + b)
            outs = [a, b]
        else:
            absorbed[ident] = p_in * el.coupling_fraction
            rest = p_in * (1.0 - el.coupling_fraction)
            if el.device_type == "tapered":
                terminated[ident] = rest
                outs = []
            else:
                outs = [rest]
        residual[ident] = sum(outs)
        for net, p in zip(el.outputs, outs):
            net_power[net] = p
            if graph.edges[net][1] is None:
                terminated[net] = p

    ro = MappingProxyType
    return PowerSolution(
        absorbed=ro(absorbed),
        residual=ro(residual),
        incident=ro(incident),
        net_power=ro(net_power),
        terminated=ro(terminated),
        dissipated=ro(dissipated),
    )


def with_source_power(graph: OpticalGraph, power_mw: float) -> OpticalGraph:
    """Copy of ``graph`` with the source power replaced."""
    src = graph.elements[graph.source_id]
    elements = dict(graph.elements)
    elements[src.id] = OpticalElement(
        id=src.id, kind="source", input_power=power_mw, outputs=src.outputs, line=src.line
    )
    return OpticalGraph(MappingProxyType(elements), graph.edges, graph.order, graph.source_id)
