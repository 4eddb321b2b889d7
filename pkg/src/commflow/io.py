"""Readers and writers for LPs, flow networks, solutions and transcripts.

Flow networks use DIMACS with an ownership extension: an arc line may end
with ``o a`` or ``o b``.  Min-cost files (``p min``) carry
``a U V LOW CAP COST`` arcs and ``n ID SUPPLY`` nodes; max-flow files
(``p max``) carry ``a U V CAP`` arcs and ``n ID s|t`` nodes.  Node ids are
1-based on disk and 0-based in memory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from commflow.commsim import Party, RowPartition
from commflow.flow import FlowNetwork
from commflow.ipm import DistributedLP


class ParseError(ValueError):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


_OWNER = {"a": Party.ALICE, "alice": Party.ALICE, "b": Party.BOB, "bob": Party.BOB}


def _owner(token, line=None):
    try:
        return _OWNER[str(token).lower()]
    except KeyError:
        raise ParseError(f"unknown owner {token!r}", line) from None


def _text(source) -> str:
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and Path(source).exists()):
        return Path(source).read_text()
    return source


# ---------------------------------------------------------------------------
# LP json


def lp_from_dict(doc: dict) -> DistributedLP:
    try:
        m, n = int(doc["m"]), int(doc["n"])
        rows = doc["rows"]
        b = doc["b"]
    except KeyError as exc:
        raise ParseError(f"missing key {exc.args[0]!r}") from None
    if len(rows) != m:
        raise ParseError(f"expected {m} rows, found {len(rows)}")
    if len(b) != n:
        raise ParseError(f"expected b of length {n}, found {len(b)}")
    A = np.zeros((m, n))
    c, lo, hi, owners = [], [], [], []
    for i, row in enumerate(rows):
        cols, vals = row.get("cols", []), row.get("vals", [])
        if len(cols) != len(vals):
            raise ParseError(f"row {i}: cols and vals differ in length")
        for j, v in zip(cols, vals):
            if not 0 <= int(j) < n:
                raise ParseError(f"row {i}: column {j} out of range")
            if A[i, int(j)] != 0:
                raise ParseError(f"row {i}: duplicate column {j}")
            A[i, int(j)] = float(v)
        c.append(float(row["c"]))
        lo.append(float(row["l"]))
        hi.append(float(row["u"]))
        owners.append(_owner(row.get("owner", "alice")))
    return DistributedLP(A, b, c, lo, hi, RowPartition(owners), int(doc.get("L", 32)))


def lp_to_dict(lp: DistributedLP) -> dict:
    rows = []
    for i in range(lp.m):
        cols = np.flatnonzero(lp.A[i])
        rows.append(
            {
                "owner": str(lp.owners.owners[i]),
                "cols": [int(j) for j in cols],
                "vals": [float(lp.A[i, j]) for j in cols],
                "c": float(lp.c[i]),
                "l": float(lp.l[i]),
                "u": float(lp.u[i]),
            }
        )
    return {"m": lp.m, "n": lp.n, "rows": rows, "b": [float(v) for v in lp.b], "L": lp.L}


def read_lp(source) -> DistributedLP:
    text = _text(source)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno) from None
    return lp_from_dict(doc)


# ---------------------------------------------------------------------------
# flow networks


@dataclass
class FlowInput:
    network: FlowNetwork
    source: int | None = None
    sink: int | None = None
    kind: str = "min"


def read_dimacs(source) -> FlowInput:
    text = _text(source)
    kind = None
    n = None
    arcs = []
    supply = {}
    s = t = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        parts = raw.split()
        if not parts or parts[0] == "c":
            continue
        tag = parts[0]
        if tag == "p":
            if kind is not None:
                raise ParseError("duplicate problem line", lineno)
            if len(parts) != 4 or parts[1] not in ("min", "max"):
                raise ParseError("expected 'p min|max NODES ARCS'", lineno)
            kind = parts[1]
            n = _int(parts[2], lineno)
            expected_arcs = _int(parts[3], lineno)
            continue
        if kind is None:
            raise ParseError("data before the problem line", lineno)
        if tag == "n":
            if len(parts) != 3:
                raise ParseError("expected 'n ID VALUE'", lineno)
            v = _node(parts[1], n, lineno)
            if kind == "max":
                if parts[2] == "s":
                    s = v
                elif parts[2] == "t":
                    t = v
                else:
                    raise ParseError("max-flow node designator must be s or t", lineno)
            else:
                supply[v] = supply.get(v, 0) + _int(parts[2], lineno)
        elif tag == "a":
            owner = Party.ALICE
            body = parts[1:]
            if len(body) >= 2 and body[-2] == "o":
                owner = _owner(body[-1], lineno)
                body = body[:-2]
            if kind == "min":
                if len(body) != 5:
                    raise ParseError("expected 'a U V LOW CAP COST [o a|b]'", lineno)
                a, b = _node(body[0], n, lineno), _node(body[1], n, lineno)
                low, cap, cost = (_int(x, lineno) for x in body[2:])
                if low != 0:
                    raise ParseError("nonzero lower bounds are not supported", lineno)
            else:
                if len(body) != 3:
                    raise ParseError("expected 'a U V CAP [o a|b]'", lineno)
                a, b = _node(body[0], n, lineno), _node(body[1], n, lineno)
                cap, cost = _int(body[2], lineno), 0
            if cap < 0:
                raise ParseError("negative capacity", lineno)
            arcs.append((a, b, cap, cost, owner))
        else:
            raise ParseError(f"unknown line type {tag!r}", lineno)
    if kind is None:
        raise ParseError("missing problem line")
    if len(arcs) != expected_arcs:
        raise ParseError(f"problem line announces {expected_arcs} arcs, found {len(arcs)}")
    demands = np.zeros(n, dtype=np.int64)
    for v, d in supply.items():
        demands[v] = d
    net = FlowNetwork.from_edges(n, arcs, demands)
    if kind == "max" and (s is None or t is None):
        raise ParseError("max-flow file needs both an s and a t node")
    return FlowInput(net, s, t, kind)


def _int(token, line):
    try:
        return int(token)
    except ValueError:
        raise ParseError(f"expected an integer, got {token!r}", line) from None


def _node(token, n, line):
    v = _int(token, line)
    if not 1 <= v <= n:
        raise ParseError(f"node {v} out of range 1..{n}", line)
    return v - 1


def write_dimacs(inp: FlowInput) -> str:
    net = inp.network
    out = [f"p {inp.kind} {net.n} {net.m}"]
    if inp.kind == "max":
        out += [f"n {inp.source + 1} s", f"n {inp.sink + 1} t"]
    else:
        out += [f"n {v + 1} {int(d)}" for v, d in enumerate(net.demands) if d != 0]
    for a, b, u, c, o in zip(net.tails, net.heads, net.caps, net.costs, net.owners):
        own = "a" if o is Party.ALICE else "b"
        if inp.kind == "max":
            out.append(f"a {a + 1} {b + 1} {u} o {own}")
        else:
            out.append(f"a {a + 1} {b + 1} 0 {u} {int(c)} o {own}")
    return "\n".join(out) + "\n"


def network_to_dict(inp: FlowInput) -> dict:
    net = inp.network
    doc = {
        "n": net.n,
        "edges": [
            {"tail": int(a), "head": int(b), "cap": int(u), "cost": int(c), "owner": str(o)}
            for a, b, u, c, o in zip(net.tails, net.heads, net.caps, net.costs, net.owners)
        ],
        "demands": [int(d) for d in net.demands],
    }
    if inp.source is not None:
        doc["source"] = inp.source
        doc["sink"] = inp.sink
    return doc


def network_from_dict(doc: dict) -> FlowInput:
    try:
        n = int(doc["n"])
        edges = [(int(e["tail"]), int(e["head"]), int(e["cap"]), int(e.get("cost", 0)), _owner(e.get("owner", "alice"))) for e in doc["edges"]]
    except KeyError as exc:
        raise ParseError(f"missing key {exc.args[0]!r}") from None
    net = FlowNetwork.from_edges(n, edges, doc.get("demands"))
    s, t = doc.get("source"), doc.get("sink")
    return FlowInput(net, s, t, "max" if s is not None else "min")


def read_network(source, fmt: str = "dimacs") -> FlowInput:
    text = _text(source)
    if fmt == "dimacs":
        return read_dimacs(text)
    if fmt == "json":
        try:
            return network_from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ParseError(exc.msg, exc.lineno) from None
    raise ValueError(f"unknown format {fmt!r}")


# ---------------------------------------------------------------------------
# output


def dumps(doc) -> str:
    """Deterministic JSON (sorted keys, fixed float repr)."""
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"
