"""Integration pattern contract graphs: typed nodes, characteristics,
per-edge contracts, structural validation and isomorphism.

An IPCG is a directed acyclic graph of integration patterns.  Every node has
a pattern type (closed enumeration), a characteristic record, and one
contract per incident edge.  Edge positions are significant: the i-th
inbound contract of a node belongs to the i-th incoming edge in the graph's
edge order, and analogously for outbound contracts (conditional forks route
branch k under condition k, so branch order carries meaning).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence

from .contracts import Contract, match_contract
from .expr import Expr

PATTERN_TYPES = (
    "start",
    "end",
    "message-processor",
    "fork",
    "structural-join",
    "condition",
    "merge",
    "external-call",
)

INF = Fraction(-1)  # sentinel for an unbounded timing-window end


def tm_end_is_inf(value: Fraction) -> bool:
    return value == INF


@dataclass(frozen=True)
class Characteristics:
    """Per-node characteristic record; at most one entry per tag.

    mc: message cardinality (in, out); acc: ro|rw; mg: message generating;
    cnd: ordered condition list; prg: program; schema: storage schema
    program; qry/actn: query and action expression sets; tm: timing window
    (start, end) with end possibly INF.
    """

    mc: Optional[tuple[int, int]] = None
    acc: Optional[str] = None
    mg: Optional[bool] = None
    cnd: Optional[tuple[Expr, ...]] = None
    prg: Optional[Expr] = None
    schema: Optional[Expr] = None
    qry: Optional[tuple[Expr, ...]] = None
    actn: Optional[tuple[Expr, ...]] = None
    tm: Optional[tuple[Fraction, Fraction]] = None

    def __post_init__(self):
        if self.acc is not None and self.acc not in ("ro", "rw"):
            raise ValueError(f"bad access mode {self.acc!r}")
        if self.mc is not None and (self.mc[0] < 0 or self.mc[1] < 0):
            raise ValueError("message cardinality must be non-negative")
        if self.tm is not None:
            lo, hi = self.tm
            if lo < 0:
                raise ValueError("timing window start must be non-negative")
            if not tm_end_is_inf(hi) and hi < lo:
                raise ValueError("timing window start must not exceed end")

    def tags(self) -> set[str]:
        out = set()
        for tag in ("mc", "acc", "mg", "cnd", "prg", "schema", "qry", "actn", "tm"):
            if getattr(self, tag) is not None:
                out.add(tag)
        return out


NO_CHARS = Characteristics()


@dataclass(frozen=True)
class Node:
    """One integration pattern: id, type, optional concrete kind (e.g.
    "content_enricher"), characteristics, and edge-ordered contracts."""

    id: str
    type: str
    kind: Optional[str] = None
    chars: Characteristics = NO_CHARS
    in_contracts: tuple[Contract, ...] = ()
    out_contracts: tuple[Contract, ...] = ()

    def __post_init__(self):
        if self.type not in PATTERN_TYPES:
            raise ValueError(f"unknown pattern type {self.type!r}")

    def label(self) -> tuple:
        """Everything isomorphism must preserve, except the id."""
        return (self.type, self.kind, self.chars, self.in_contracts, self.out_contracts)


class GraphError(Exception):
    pass


@dataclass(frozen=True)
class Ipcg:
    """Immutable pattern graph; edges keep authoring order."""

    nodes: tuple[Node, ...]
    edges: tuple[tuple[str, str], ...]

    def __post_init__(self):
        ids = [n.id for n in self.nodes]
        if len(ids) != len(set(ids)):
            raise GraphError("duplicate node ids")
        known = set(ids)
        seen = set()
        for src, dst in self.edges:
            if src not in known or dst not in known:
                raise GraphError(f"edge ({src},{dst}) references unknown node")
            if src == dst:
                raise GraphError(f"self-loop on {src}")
            if (src, dst) in seen:
                raise GraphError(f"duplicate edge ({src},{dst})")
            seen.add((src, dst))

    @staticmethod
    def of(nodes: Iterable[Node], edges: Iterable[tuple[str, str]]) -> "Ipcg":
        return Ipcg(tuple(nodes), tuple(edges))

    def node(self, node_id: str) -> Node:
        for n in self.nodes:
            if n.id == node_id:
                return n
        raise GraphError(f"no node {node_id!r}")

    def has_node(self, node_id: str) -> bool:
        return any(n.id == node_id for n in self.nodes)

    def in_edges(self, node_id: str) -> list[tuple[str, str]]:
        return [e for e in self.edges if e[1] == node_id]

    def out_edges(self, node_id: str) -> list[tuple[str, str]]:
        return [e for e in self.edges if e[0] == node_id]

    def predecessors(self, node_id: str) -> list[str]:
        return [s for s, _ in self.in_edges(node_id)]

    def successors(self, node_id: str) -> list[str]:
        return [d for _, d in self.out_edges(node_id)]

    def in_contract_for_edge(self, edge: tuple[str, str]) -> Contract:
        node = self.node(edge[1])
        idx = self.in_edges(edge[1]).index(edge)
        return node.in_contracts[idx]

    def out_contract_for_edge(self, edge: tuple[str, str]) -> Contract:
        node = self.node(edge[0])
        idx = self.out_edges(edge[0]).index(edge)
        return node.out_contracts[idx]

    def replace_node(self, node: Node) -> "Ipcg":
        return Ipcg(tuple(node if n.id == node.id else n for n in self.nodes), self.edges)

    def topo_order(self) -> list[str]:
        """Node ids in a deterministic topological order; raises on cycles."""
        indeg = {n.id: 0 for n in self.nodes}
        for _, dst in self.edges:
            indeg[dst] += 1
        ready = sorted([i for i, d in indeg.items() if d == 0])
        out: list[str] = []
        while ready:
            cur = ready.pop(0)
            out.append(cur)
            added = []
            for nxt in self.successors(cur):
                indeg[nxt] -= 1
                if indeg[nxt] == 0:
                    added.append(nxt)
            ready = sorted(ready + added)
        if len(out) != len(self.nodes):
            raise GraphError("graph has a cycle")
        return out

    def is_acyclic(self) -> bool:
        try:
            self.topo_order()
            return True
        except GraphError:
            return False


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class Violation:
    clause: str
    node: Optional[str]
    message: str

    def __str__(self):
        where = f" [{self.node}]" if self.node else ""
        return f"{self.clause}{where}: {self.message}"


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[Violation, ...]

    def ok(self) -> bool:
        return not self.violations

    def __bool__(self):
        return self.ok()

    def __str__(self):
        if self.ok():
            return "ok"
        return "\n".join(str(v) for v in self.violations)


def validate_iptg(g: Ipcg) -> ValidationReport:
    """Structural (typed-graph) correctness: degrees, endpoints,
    connectedness and acyclicity."""
    out: list[Violation] = []
    types = {n.id: n.type for n in g.nodes}
    if not any(t == "start" for t in types.values()):
        out.append(Violation("endpoints", None, "no start node"))
    if not any(t == "end" for t in types.values()):
        out.append(Violation("endpoints", None, "no end node"))
    for n in g.nodes:
        indeg = len(g.in_edges(n.id))
        outdeg = len(g.out_edges(n.id))
        if n.type == "start" and indeg != 0:
            out.append(Violation("degree", n.id, f"start has in-degree {indeg}"))
        if n.type == "end" and outdeg != 0:
            out.append(Violation("degree", n.id, f"end has out-degree {outdeg}"))
        if n.type in ("fork", "condition") and not (indeg == 1 and outdeg > 1):
            out.append(Violation("degree", n.id,
                                 f"{n.type} needs in 1/out >1, has {indeg}/{outdeg}"))
        if n.type == "structural-join" and not (indeg > 1 and outdeg == 1):
            out.append(Violation("degree", n.id,
                                 f"structural-join needs in >1/out 1, has {indeg}/{outdeg}"))
        if n.type in ("message-processor", "merge") and not (indeg == 1 and outdeg == 1):
            out.append(Violation("degree", n.id,
                                 f"{n.type} needs in 1/out 1, has {indeg}/{outdeg}"))
        if n.type == "external-call" and not (indeg == 2 and outdeg == 2):
            out.append(Violation("degree", n.id,
                                 f"external-call needs in 2/out 2, has {indeg}/{outdeg}"))
        if len(n.in_contracts) != indeg:
            out.append(Violation("contracts", n.id,
                                 f"{len(n.in_contracts)} inbound contracts for in-degree {indeg}"))
        if len(n.out_contracts) != outdeg:
            out.append(Violation("contracts", n.id,
                                 f"{len(n.out_contracts)} outbound contracts for out-degree {outdeg}"))
    if g.nodes and not _connected(g):
        out.append(Violation("connected", None, "graph is not connected"))
    if not g.is_acyclic():
        out.append(Violation("acyclic", None, "graph has a cycle"))
    return ValidationReport(tuple(out))


def _connected(g: Ipcg) -> bool:
    ids = [n.id for n in g.nodes]
    adj: dict[str, set[str]] = {i: set() for i in ids}
    for s, d in g.edges:
        adj[s].add(d)
        adj[d].add(s)
    seen = {ids[0]}
    stack = [ids[0]]
    while stack:
        cur = stack.pop()
        for nxt in adj[cur]:
            if nxt not in seen:
                seen.add(nxt)
                stack.append(nxt)
    return len(seen) == len(ids)


def validate_ipcg(g: Ipcg) -> ValidationReport:
    """Full correctness: IPTG checks plus edge-wise contract matching.

    Each inbound contract is matched against the outbound contract of the
    predecessor wired to that specific edge.
    """
    out = list(validate_iptg(g).violations)
    degree_ok = {v.node for v in out if v.clause in ("degree", "contracts")}
    for n in g.nodes:
        if n.type == "start" or n.id in degree_ok:
            continue
        for idx, edge in enumerate(g.in_edges(n.id)):
            inbound = n.in_contracts[idx]
            try:
                outbound = g.out_contract_for_edge(edge)
            except (IndexError, GraphError):
                continue
            if not match_contract(inbound, [outbound]):
                out.append(Violation(
                    "match", n.id,
                    f"inbound contract {idx} does not match outbound contract of {edge[0]}"))
    return ValidationReport(tuple(out))


# ---------------------------------------------------------------------------
# Isomorphism


def isomorphic(g1: Ipcg, g2: Ipcg) -> Optional[dict[str, str]]:
    """Return a node bijection witnessing isomorphism, or None.

    The bijection must preserve types, kinds, characteristics, contract
    lists, and the per-node ordering of incident edges (edge position is
    semantically significant, e.g. condition branches).
    """
    if len(g1.nodes) != len(g2.nodes) or len(g1.edges) != len(g2.edges):
        return None
    by_label: dict[tuple, list[str]] = {}
    for n in g2.nodes:
        by_label.setdefault(n.label(), []).append(n.id)
    for n in g1.nodes:
        if n.label() not in by_label:
            return None

    order = sorted(g1.nodes, key=lambda n: (len(by_label[n.label()]), n.id))
    mapping: dict[str, str] = {}
    used: set[str] = set()

    def feasible(a: str, b: str) -> bool:
        # Edge-position correspondence against already-mapped neighbours.
        ins1, ins2 = g1.predecessors(a), g2.predecessors(b)
        outs1, outs2 = g1.successors(a), g2.successors(b)
        if len(ins1) != len(ins2) or len(outs1) != len(outs2):
            return False
        for i, p in enumerate(ins1):
            if p in mapping and mapping[p] != ins2[i]:
                return False
        for i, s in enumerate(outs1):
            if s in mapping and mapping[s] != outs2[i]:
                return False
        for i, p in enumerate(ins2):
            if p in used and ins1[i] not in mapping:
                return False
        return True

    def backtrack(i: int) -> bool:
        if i == len(order):
            return _check_iso(g1, g2, mapping)
        n = order[i]
        for cand in by_label[n.label()]:
            if cand in used:
                continue
            if not feasible(n.id, cand):
                continue
            mapping[n.id] = cand
            used.add(cand)
            if backtrack(i + 1):
                return True
            del mapping[n.id]
            used.discard(cand)
        return False

    if backtrack(0):
        return dict(mapping)
    return None


def _check_iso(g1: Ipcg, g2: Ipcg, mapping: Mapping[str, str]) -> bool:
    for n in g1.nodes:
        m = g2.node(mapping[n.id])
        if n.label() != m.label():
            return False
        if [mapping[p] for p in g1.predecessors(n.id)] != g2.predecessors(m.id):
            return False
        if [mapping[s] for s in g1.successors(n.id)] != g2.successors(m.id):
            return False
    mapped = {(mapping[s], mapping[d]) for s, d in g1.edges}
    return mapped == set(g2.edges)


# ---------------------------------------------------------------------------
# Node-level dataflow footprints (used by rewrite side conditions)


def node_reads(node: Node) -> set[tuple[str, str]]:
    out: set[tuple[str, str]] = set()
    if node.chars.prg is not None:
        out |= node.chars.prg.reads()
    if node.chars.cnd:
        for c in node.chars.cnd:
            out |= c.reads()
    return out


def node_writes(node: Node) -> set[tuple[str, str]]:
    if node.chars.prg is None:
        return set()
    return node.chars.prg.writes()


def side_effect_free(g: Ipcg, node_ids: Iterable[str]) -> bool:
    """No external calls and no persistence actions in the given region."""
    for nid in node_ids:
        n = g.node(nid)
        if n.type == "external-call":
            return False
        if n.chars.actn or n.chars.qry or n.chars.schema:
            return False
    return True


def region_graph(g: Ipcg, node_ids: Sequence[str]) -> Ipcg:
    """Induced subgraph over the given nodes, keeping full node labels.

    Only internal edges are kept; nodes retain their complete contract lists
    so that region isomorphism compares contracts too.
    """
    keep = set(node_ids)
    nodes = tuple(n for n in g.nodes if n.id in keep)
    edges = tuple(e for e in g.edges if e[0] in keep and e[1] in keep)
    return Ipcg(nodes, edges)


def regions_isomorphic(g: Ipcg, a_ids: Sequence[str], b_ids: Sequence[str]) -> bool:
    return isomorphic(region_graph(g, a_ids), region_graph(g, b_ids)) is not None
