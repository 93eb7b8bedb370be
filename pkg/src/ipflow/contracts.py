"""Pattern contracts: integration-concept flags plus per-slot data elements.

A contract declares what a pattern accepts on an inbound edge or guarantees
on an outbound edge: three concept flags (signed / encrypted / encoded, each
yes, no or any) and, per message slot, the exact set of data-element names
that travel on the edge.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

CONCEPTS = ("signed", "encrypted", "encoded")
YES, NO, ANY = "yes", "no", "any"
CONCEPT_VALUES = (YES, NO, ANY)

SLOTS = ("HDR", "PL", "ATTCH")


@dataclass(frozen=True)
class Contract:
    """cpt: concept -> yes|no|any (unlisted concepts default to any).
    el: per-slot element-name sets; a slot may be absent (unconstrained)."""

    cpt: tuple[tuple[str, str], ...] = ()
    el: tuple[tuple[str, tuple[str, ...]], ...] = ()

    @staticmethod
    def of(cpt: Mapping[str, str] | None = None,
           el: Mapping[str, Iterable[str]] | None = None) -> "Contract":
        cpt = dict(cpt or {})
        for k, v in cpt.items():
            if k not in CONCEPTS:
                raise ValueError(f"unknown concept {k!r}")
            if v not in CONCEPT_VALUES:
                raise ValueError(f"bad concept value {v!r}")
        cpt_t = tuple(sorted((k, v) for k, v in cpt.items() if v != ANY))
        el = el or {}
        for s in el:
            if s not in SLOTS:
                raise ValueError(f"unknown slot {s!r}")
        el_t = tuple(sorted((s, tuple(sorted(set(ns)))) for s, ns in el.items()))
        for _, names in el_t:
            for n in names:
                if not n:
                    raise ValueError("empty data element name")
        return Contract(cpt_t, el_t)

    def concept(self, name: str) -> str:
        for k, v in self.cpt:
            if k == name:
                return v
        return ANY

    def elements(self) -> dict[str, frozenset[str]]:
        return {s: frozenset(ns) for s, ns in self.el}

    def all_elements(self) -> frozenset[tuple[str, str]]:
        return frozenset((s, n) for s, ns in self.el for n in ns)

    def with_elements(self, el: Mapping[str, Iterable[str]]) -> "Contract":
        return Contract.of(dict(self.cpt), el)

    def map_elements(self, fn) -> "Contract":
        """Rewrite each slot's element set with fn(slot, names) -> names."""
        new = {}
        for s, ns in self.el:
            new[s] = fn(s, frozenset(ns))
        return Contract.of(dict(self.cpt), new)


TRIVIAL = Contract.of()


def match_contract(inbound: Contract, outs: Iterable[Contract]) -> bool:
    """Contract matching: concept correctness and data-element correctness.

    True iff (i) for every concept the inbound contract pins (not any), every
    outbound contract either agrees or is any; and (ii) for every slot the
    inbound contract mentions, its element set equals the union of the
    outbound contracts' sets for that slot.
    """
    outs = list(outs)
    for concept in CONCEPTS:
        want = inbound.concept(concept)
        if want == ANY:
            continue
        for c in outs:
            have = c.concept(concept)
            if have not in (want, ANY):
                return False
    for slot, names in inbound.el:
        union: set[str] = set()
        for c in outs:
            union |= set(c.elements().get(slot, frozenset()))
        if set(names) != union:
            return False
    return True


def contract_to_json(c: Contract) -> dict:
    return {
        "cpt": {k: v for k, v in c.cpt},
        "el": {s: list(ns) for s, ns in c.el},
    }


def contract_from_json(data: Mapping) -> Contract:
    return Contract.of(data.get("cpt") or {}, data.get("el") or {})
