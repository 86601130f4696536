"""Line-oriented netlist language describing the optical feed of a switch circuit.

Grammar, one statement per line (``#`` starts a comment)::

    source   <id> power_mw=<f> [out=<port>]
    waveguide <id> in=<port> out=<port> [loss_db=<f>]
    ybranch  <id> in=<port> out=<port>,<port> [split=<f>] [loss_db=<f>]
    switch   <id> type=tapered|through in=<port> [out=<port>] [coupling=<f>]

Ports are net names.  A source without ``out=`` drives the net named after its id.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

KINDS = ("source", "waveguide", "ybranch", "switch")

# key -> (is_port, required)
_SCHEMA: dict[str, dict[str, tuple[bool, bool]]] = {
    "source": {"power_mw": (False, True), "out": (True, False)},
    "waveguide": {"in": (True, True), "out": (True, True), "loss_db": (False, False)},
    "ybranch": {
        "in": (True, True),
        "out": (True, True),
        "split": (False, False),
        "loss_db": (False, False),
    },
    "switch": {
        "type": (False, True),
        "in": (True, True),
        "out": (True, False),
        "coupling": (False, False),
    },
}

_NUMERIC = {"power_mw", "loss_db", "split", "coupling"}
_ID_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_.\-]*$")


class NetlistError(ValueError):
    """Syntax or semantic error in a netlist, with 1-based source position."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None):
        self.message = message
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}" + (f", column {column}" if column is not None else "") + ": "
        super().__init__(where + message)


@dataclass(frozen=True)
class Statement:
    kind: str
    id: str
    attrs: tuple[tuple[str, float | str], ...] = ()
    ports: tuple[tuple[str, tuple[str, ...]], ...] = ()
    line: int = field(default=0, compare=False)
    column: int = field(default=0, compare=False)

    def attr(self, key: str, default=None):
        return dict(self.attrs).get(key, default)

    def port(self, key: str) -> tuple[str, ...]:
        return dict(self.ports).get(key, ())


@dataclass(frozen=True)
class NetlistAst:
    statements: tuple[Statement, ...] = ()

    def __len__(self) -> int:
        return len(self.statements)

    def __iter__(self):
        return iter(self.statements)

    def by_id(self, ident: str) -> Statement:
        for st in self.statements:
            if st.id == ident:
                return st
        raise KeyError(ident)


def _parse_number(text: str, lineno: int, col: int, key: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise NetlistError(f"malformed attribute {key}={text!r}: not a number", lineno, col) from None
    if value != value or value in (float("inf"), float("-inf")):
        raise NetlistError(f"malformed attribute {key}={text!r}: not finite", lineno, col)
    return value


def _parse_line(raw: str, lineno: int) -> Statement | None:
    text = raw.split("#", 1)[0]
    if not text.strip():
        return None
    # token -> 1-based column
    tokens = [(m.group(0), m.start() + 1) for m in re.finditer(r"\S+", text)]
    (kind, kcol) = tokens[0]
    if kind not in _SCHEMA:
        raise NetlistError(f"unknown element kind {kind!r}", lineno, kcol)
    if len(tokens) < 2:
        raise NetlistError(f"{kind} statement needs an id", lineno, kcol)
    ident, icol = tokens[1]
    if "=" in ident or not _ID_RE.match(ident):
        raise NetlistError(f"invalid element id {ident!r}", lineno, icol)

    schema = _SCHEMA[kind]
    attrs: dict[str, float | str] = {}
    ports: dict[str, tuple[str, ...]] = {}
    for tok, col in tokens[2:]:
        key, eq, value = tok.partition("=")
        if not eq or not key or not value:
            raise NetlistError(f"malformed attribute {tok!r}, expected key=value", lineno, col)
        if key not in schema:
            raise NetlistError(f"attribute {key!r} is not valid for {kind}", lineno, col)
        if key in attrs or key in ports:
            raise NetlistError(f"attribute {key!r} given twice", lineno, col)
        is_port, _ = schema[key]
        if is_port:
            names = tuple(value.split(","))
            if any(not _ID_RE.match(n) for n in names):
                raise NetlistError(f"malformed port list {value!r}", lineno, col)
            want = 2 if (kind == "ybranch" and key == "out") else 1
            if len(names) != want:
                raise NetlistError(f"{kind} {key}= takes {want} port(s), got {len(names)}", lineno, col)
            ports[key] = names
        elif key in _NUMERIC:
            attrs[key] = _parse_number(value, lineno, col, key)
        else:
            attrs[key] = value

    for key, (is_port, required) in schema.items():
        if required and key not in attrs and key not in ports:
            raise NetlistError(f"{kind} {ident} is missing required attribute {key!r}", lineno, icol)

    if kind == "switch":
        dtype = attrs["type"]
        if dtype not in ("tapered", "through"):
            raise NetlistError(f"switch type must be tapered or through, got {dtype!r}", lineno, icol)
        if dtype == "tapered" and "out" in ports:
            raise NetlistError("tapered tap has no through port", lineno, icol)

    # canonical key order keeps printed output stable
    order = list(schema)
    return Statement(
        kind=kind,
        id=ident,
        attrs=tuple(sorted(attrs.items(), key=lambda kv: order.index(kv[0]))),
        ports=tuple(sorted(ports.items(), key=lambda kv: order.index(kv[0]))),
        line=lineno,
        column=kcol,
    )


def parse_netlist(text: str) -> NetlistAst:
    """Parse netlist text into a :class:`NetlistAst`.

    Raises
    ------
    NetlistError
        On unknown kinds, duplicate ids, malformed or invalid attributes.
    """
    statements = []
    seen: dict[str, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        st = _parse_line(raw, lineno)
        if st is None:
            continue
        if st.id in seen:
            raise NetlistError(f"duplicate id {st.id!r} (first defined on line {seen[st.id]})", lineno, st.column)
        seen[st.id] = lineno
        statements.append(st)
    return NetlistAst(tuple(statements))


def _fmt_value(value: float | str) -> str:
    if isinstance(value, str):
        return value
    return repr(float(value))


def format_netlist(ast: NetlistAst) -> str:
    """Print an AST back to canonical netlist text."""
    lines = []
    for st in ast:
        parts = [st.kind, st.id]
        items = [(k, _fmt_value(v)) for k, v in st.attrs] + [(k, ",".join(v)) for k, v in st.ports]
        order = list(_SCHEMA[st.kind])
        items.sort(key=lambda kv: order.index(kv[0]))
        parts += [f"{k}={v}" for k, v in items]
        lines.append(" ".join(parts))
    return "\n".join(lines) + ("\n" if lines else "")


CASCADE_NETLIST = """\
# One input waveguide split by a 3-dB Y-branch.  Arm a feeds two cascaded
# through-type switches (M1 then M2); arm b feeds M3.
source IN power_mw=2 out=n0
ybranch Y1 in=n0 out=a,b split=0.5
switch M1 type=through in=a out=c
switch M2 type=through in=c out=d
switch M3 type=through in=b out=e
"""
