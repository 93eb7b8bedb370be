"""Composition algebra for open nets: sequential gluing, parallel tensor,
and identities.

Layers are merged by name: entries with equal names and equal definitions
unify; a genuine clash gets the incoming entry a fresh suffixed name before
the union is taken.  Control-layer names are kept disjoint the same way.
"""

from __future__ import annotations

from dataclasses import replace
from fractions import Fraction
from typing import Callable

from .model import (
    Action,
    ArcIn,
    ArcOut,
    ControlLayer,
    DataLogicLayer,
    DataType,
    NetError,
    OpenNet,
    PersistenceLayer,
    Place,
    Query,
    Relation,
    Transition,
    TypeDomain,
)


def _fresh(name: str, taken: set[str]) -> str:
    if name not in taken:
        return name
    i = 2
    while f"{name}~{i}" in taken:
        i += 1
    return f"{name}~{i}"


def _merge_named(a_items, b_items, key, same, rename_refs):
    """Union two named collections; true clashes rename the b-side entry.

    Returns (merged list, b-side rename map)."""
    out = list(a_items)
    taken = {key(x) for x in a_items}
    renames: dict[str, str] = {}
    for item in b_items:
        name = key(item)
        existing = next((x for x in out if key(x) == name), None)
        if existing is not None and same(existing, item):
            continue
        if existing is None:
            out.append(item)
            taken.add(name)
        else:
            new = _fresh(name, taken)
            renames[name] = new
            out.append(rename_refs(item, new))
            taken.add(new)
    return out, renames


def _rename_type_refs(net_types: tuple[DataType, ...], renames: dict[str, str]):
    return net_types


def _merge_layers(a: OpenNet, b: OpenNet):
    """Merge type domains, persistence and logic layers of two nets.

    Returns merged layers plus rename maps to apply to b's control layer."""
    types, type_ren = _merge_named(
        a.domain.types, b.domain.types, lambda t: t.name,
        lambda x, y: x == y,
        lambda t, new: replace(t, name=new))

    def ret(rel: Relation, new: str) -> Relation:
        return replace(rel, name=new)

    def fix_rel_cols(rel: Relation) -> Relation:
        cols = tuple((c, type_ren.get(t, t)) for c, t in rel.columns)
        return replace(rel, columns=cols)

    b_rels = [fix_rel_cols(r) for r in b.persistence.relations]
    rels, rel_ren = _merge_named(
        a.persistence.relations, b_rels, lambda r: r.name,
        lambda x, y: x == y, ret)

    def fix_constraint(c):
        rel = rel_ren.get(c.rel, c.rel)
        inner = rel_ren.get(c.inner_rel, c.inner_rel) if c.inner_rel else None
        return replace(c, rel=rel, inner_rel=inner)

    b_cons = [fix_constraint(c) for c in b.persistence.constraints]
    cons, _ = _merge_named(
        a.persistence.constraints, b_cons, lambda c: c.name,
        lambda x, y: x == y, lambda c, new: replace(c, name=new))

    def fix_query(q: Query) -> Query:
        return replace(q, rel=rel_ren.get(q.rel, q.rel))

    b_qs = [fix_query(q) for q in b.logic.queries]
    queries, q_ren = _merge_named(
        a.logic.queries, b_qs, lambda q: q.name,
        lambda x, y: x == y, lambda q, new: replace(q, name=new))

    def fix_action(act: Action) -> Action:
        fix = lambda pairs: tuple((rel_ren.get(r, r), ts) for r, ts in pairs)
        return replace(act, inserts=fix(act.inserts), deletes=fix(act.deletes),
                       delete_where=tuple((rel_ren.get(r, r), e) for r, e in act.delete_where))

    b_acts = [fix_action(x) for x in b.logic.actions]
    actions, a_ren = _merge_named(
        a.logic.actions, b_acts, lambda x: x.name,
        lambda x, y: x == y, lambda x, new: replace(x, name=new))

    domain = TypeDomain(tuple(types))
    persistence = PersistenceLayer(tuple(rels), tuple(cons))
    logic = DataLogicLayer(tuple(queries), tuple(actions))
    return domain, persistence, logic, type_ren, q_ren, a_ren


def _rename_control(ctl: ControlLayer, place_map: dict[str, str],
                    trans_map: dict[str, str], type_ren: dict[str, str],
                    q_ren: dict[str, str], a_ren: dict[str, str]) -> ControlLayer:
    places = tuple(
        replace(p,
                name=place_map.get(p.name, p.name),
                color=tuple(type_ren.get(t, t) for t in p.color),
                query=q_ren.get(p.query, p.query) if p.query else None)
        for p in ctl.places)
    transitions = tuple(
        replace(t,
                name=trans_map.get(t.name, t.name),
                action=(a_ren.get(t.action[0], t.action[0]), t.action[1]) if t.action else None)
        for t in ctl.transitions)
    arcs_in = tuple(
        ArcIn(place_map.get(a.place, a.place), trans_map.get(a.transition, a.transition), a.pat)
        for a in ctl.arcs_in)
    arcs_out = tuple(
        ArcOut(trans_map.get(a.transition, a.transition), place_map.get(a.place, a.place), a.terms)
        for a in ctl.arcs_out)
    arcs_rb = tuple(
        ArcOut(trans_map.get(a.transition, a.transition), place_map.get(a.place, a.place), a.terms)
        for a in ctl.arcs_rb)
    return ControlLayer(places, transitions, arcs_in, arcs_out, arcs_rb)


def _disjoint_maps(a: OpenNet, b: OpenNet, glue: dict[str, str]):
    """Name maps making b's control layer disjoint from a's (modulo glue)."""
    taken_places = {p.name for p in a.control.places}
    place_map: dict[str, str] = {}
    for p in b.control.places:
        if p.name in glue:
            place_map[p.name] = glue[p.name]
        else:
            new = _fresh(p.name, taken_places)
            place_map[p.name] = new
            taken_places.add(new)
    taken_trans = {t.name for t in a.control.transitions}
    trans_map: dict[str, str] = {}
    for t in b.control.transitions:
        new = _fresh(t.name, taken_trans)
        trans_map[t.name] = new
        taken_trans.add(new)
    return place_map, trans_map


def compose_seq(a: OpenNet, b: OpenNet) -> OpenNet:
    """Glue a's output boundary to b's input boundary, position by position.

    Requires the boundary configurations to agree pointwise; raises NetError
    naming the first mismatching position otherwise.
    """
    _, a_out = a.boundary_config()
    b_in, _ = b.boundary_config()
    if len(a_out) != len(b_in):
        raise NetError(
            f"boundary length mismatch: {len(a_out)} outputs vs {len(b_in)} inputs")
    domain, persistence, logic, type_ren, q_ren, a_ren = _merge_layers(a, b)
    for k, (ca, cb) in enumerate(zip(a_out, b_in)):
        cb_m = tuple(type_ren.get(t, t) for t in cb)
        if ca != cb_m:
            raise NetError(
                f"boundary mismatch at position {k}: {ca} vs {cb_m}")

    glue = {bi: ao for ao, bi in zip(a.out_boundary, b.in_boundary)}
    place_map, trans_map = _disjoint_maps(a, b, glue)
    b_ctl = _rename_control(b.control, place_map, trans_map, type_ren, q_ren, a_ren)

    glued_names = set(glue.values())
    b_places = tuple(p for p in b_ctl.places if p.name not in glued_names)
    control = ControlLayer(
        a.control.places + b_places,
        a.control.transitions + b_ctl.transitions,
        a.control.arcs_in + b_ctl.arcs_in,
        a.control.arcs_out + b_ctl.arcs_out,
        a.control.arcs_rb + b_ctl.arcs_rb,
    )
    return OpenNet(domain, persistence, logic, control,
                   a.in_boundary,
                   tuple(place_map[p] for p in b.out_boundary))


def compose_par(a: OpenNet, b: OpenNet) -> OpenNet:
    """Parallel tensor: stack the control layers, concatenate boundaries."""
    domain, persistence, logic, type_ren, q_ren, a_ren = _merge_layers(a, b)
    place_map, trans_map = _disjoint_maps(a, b, {})
    b_ctl = _rename_control(b.control, place_map, trans_map, type_ren, q_ren, a_ren)
    control = ControlLayer(
        a.control.places + b_ctl.places,
        a.control.transitions + b_ctl.transitions,
        a.control.arcs_in + b_ctl.arcs_in,
        a.control.arcs_out + b_ctl.arcs_out,
        a.control.arcs_rb + b_ctl.arcs_rb,
    )
    return OpenNet(domain, persistence, logic, control,
                   a.in_boundary + tuple(place_map[p] for p in b.in_boundary),
                   a.out_boundary + tuple(place_map[p] for p in b.out_boundary))


def identity_net(config: list[tuple[str, ...]], domain: TypeDomain) -> OpenNet:
    """The identity net: one place per boundary position, each both an input
    and an output boundary, and no transitions."""
    places = tuple(Place(f"id{i}", color) for i, color in enumerate(config))
    names = tuple(p.name for p in places)
    return OpenNet(domain, PersistenceLayer(), DataLogicLayer(),
                   ControlLayer(places=places), names, names)


UNIT = identity_net([], TypeDomain())
