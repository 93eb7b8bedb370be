"""Abstract cost model: per-pattern cardinality-parameterized formulas,
measured latency overrides, and the sum / critical-path aggregates.

All arithmetic is exact rational (`fractions.Fraction`) so that guard
comparisons in the rewrite engine never depend on float rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional

from .graph import Ipcg, Node

Rat = Fraction


class CostError(Exception):
    pass


@dataclass(frozen=True)
class NodeCardinality:
    """Element cardinalities for one node: per-inbound-edge and
    per-outbound-edge element counts plus the external-resource count."""

    d_in: tuple[int, ...] = (1,)
    d_out: tuple[int, ...] = (1,)
    d_r: int = 0
    avg_seq_len: Optional[int] = None

    def __post_init__(self):
        if any(x < 0 for x in self.d_in) or any(x < 0 for x in self.d_out) or self.d_r < 0:
            raise CostError("cardinalities must be non-negative")
        if self.avg_seq_len is not None and self.avg_seq_len < 2:
            raise CostError("average sequence length must be at least 2")


@dataclass(frozen=True)
class CardinalityProfile:
    per_node: tuple[tuple[str, NodeCardinality], ...] = ()

    @staticmethod
    def of(per_node: Mapping[str, NodeCardinality] | None = None) -> "CardinalityProfile":
        return CardinalityProfile(tuple(sorted((per_node or {}).items())))

    def get(self, node: Node, g: Ipcg) -> NodeCardinality:
        for nid, card in self.per_node:
            if nid == node.id:
                return card
        # Default unit cardinalities shaped to the node's degrees.
        return NodeCardinality(
            d_in=tuple(1 for _ in g.in_edges(node.id)),
            d_out=tuple(1 for _ in g.out_edges(node.id)),
            d_r=0,
            avg_seq_len=None,
        )


EMPTY_PROFILE = CardinalityProfile.of()

# Pattern kinds with a formula in the cost table, keyed by the kind tag a
# node carries (node.kind), with fallbacks per pattern type.
KIND_BY_TYPE = {
    "start": "receive",
    "end": "send",
    "fork": "multicast",
    "structural-join": "join_router",
    "condition": "content_based_router",
    "merge": "aggregator",
    "external-call": "external_call",
    "message-processor": "mapping",
}


@dataclass(frozen=True)
class CostProfile:
    """Costing inputs: node-id latency overrides (strongest), per-kind
    measured latencies, and the per-channel processing-unit constant used by
    multicast / join-router formulas."""

    latency_overrides: tuple[tuple[str, Rat], ...] = ()
    kind_latency: tuple[tuple[str, Rat], ...] = ()
    channel_unit_cost: Rat = Fraction(0)

    @staticmethod
    def of(latency_overrides: Mapping[str, Rat | str] | None = None,
           kind_latency: Mapping[str, Rat | str] | None = None,
           channel_unit_cost: Rat | str = 0) -> "CostProfile":
        def rat(x):
            return x if isinstance(x, Fraction) else Fraction(str(x))
        return CostProfile(
            tuple(sorted((k, rat(v)) for k, v in (latency_overrides or {}).items())),
            tuple(sorted((k, rat(v)) for k, v in (kind_latency or {}).items())),
            rat(channel_unit_cost),
        )

    def override_for(self, node_id: str) -> Optional[Rat]:
        for nid, v in self.latency_overrides:
            if nid == node_id:
                return v
        return None

    def kind_latency_for(self, kind: str) -> Optional[Rat]:
        for k, v in self.kind_latency:
            if k == kind:
                return v
        return None


EMPTY_COSTS = CostProfile.of()


def _formula_cost(kind: str, node: Node, card: NodeCardinality, costs: CostProfile,
                  g: Ipcg) -> Rat:
    din = sum(card.d_in)
    dout = sum(card.d_out)
    dr = card.d_r
    if kind == "content_based_router":
        return Fraction(sum(card.d_in), 2)
    if kind == "message_filter":
        return Fraction(din)
    if kind == "aggregator":
        seq_len = card.avg_seq_len or 2
        return 2 * Fraction(din) + Fraction(din + dr, seq_len)
    if kind == "claim_check":
        return Fraction(2 * dr)
    if kind in ("splitter", "content_filter", "send"):
        return Fraction(dout)
    if kind == "mapping":
        return Fraction(din + dout)
    if kind == "content_enricher":
        return Fraction(din + dr + dout)
    if kind in ("external_call",):
        return Fraction(dout + din)
    if kind == "receive":
        return Fraction(din)
    if kind in ("multicast", "join_router"):
        channels = max(len(g.in_edges(node.id)), len(g.out_edges(node.id)), 1)
        return channels * costs.channel_unit_cost
    raise CostError(f"no cost formula for kind {kind!r} (node {node.id})")


def pattern_cost(node: Node, g: Ipcg, prof: CardinalityProfile = EMPTY_PROFILE,
                 costs: CostProfile = EMPTY_COSTS) -> Rat:
    """Cost of one pattern: latency override if present, else the measured
    per-kind latency, else the abstract formula on the cardinality profile."""
    override = costs.override_for(node.id)
    if override is not None:
        return override
    kind = node.kind or KIND_BY_TYPE.get(node.type)
    if kind is None:
        raise CostError(f"node {node.id} has no kind and no formula fallback")
    measured = costs.kind_latency_for(kind)
    if measured is not None:
        return measured
    card = prof.get(node, g)
    return _formula_cost(kind, node, card, costs, g)


def graph_cost_sum(g: Ipcg, prof: CardinalityProfile = EMPTY_PROFILE,
                   costs: CostProfile = EMPTY_COSTS) -> Rat:
    return sum((pattern_cost(n, g, prof, costs) for n in g.nodes), Fraction(0))


def graph_latency(g: Ipcg, prof: CardinalityProfile = EMPTY_PROFILE,
                  costs: CostProfile = EMPTY_COSTS) -> Rat:
    """Critical-path latency: the maximum over start-to-end paths of the sum
    of node costs along the path (parallel branches contribute their max)."""
    node_cost = {n.id: pattern_cost(n, g, prof, costs) for n in g.nodes}
    best: dict[str, Rat] = {}
    for nid in g.topo_order():
        preds = g.predecessors(nid)
        base = max((best[p] for p in preds), default=Fraction(0))
        best[nid] = base + node_cost[nid]
    ends = [n.id for n in g.nodes if not g.successors(n.id)]
    if not ends:
        return Fraction(0)
    return max(best[e] for e in ends)
