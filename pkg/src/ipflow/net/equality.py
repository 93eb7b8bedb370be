"""Structural equality of open nets up to a canonical renaming.

Two nets are structurally equal when there is a bijection over places,
transitions, relations, queries and actions that preserves every layer,
every flow, and the boundary orders.  The search is signature-guided: nodes
are bucketed by a structural fingerprint refined from the boundaries, which
makes the residual backtracking negligible at desk scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

from ..expr import expr_to_json
from .model import AllRows, ArcIn, ArcOut, MultiTake, OpenNet, TuplePat


def _expr_key(e) -> str:
    import json
    return json.dumps(expr_to_json(e), sort_keys=True) if e is not None else ""


def _pat_key(pat) -> str:
    if isinstance(pat, TuplePat):
        return "T:" + "|".join(_expr_key(t) for t in pat.terms)
    if isinstance(pat, AllRows):
        return f"A:{pat.var}"
    if isinstance(pat, MultiTake):
        return f"M:{pat.count}:{pat.var}"
    return repr(pat)


def _terms_key(terms) -> str:
    return "|".join(_expr_key(t) for t in terms)


class _Sig:
    """Iteratively refined structural signatures for places/transitions."""

    def __init__(self, net: OpenNet):
        self.net = net
        ctl = net.control
        self.p_sig: dict[str, tuple] = {}
        self.t_sig: dict[str, tuple] = {}
        in_pos = {p: i for i, p in enumerate(net.in_boundary)}
        out_pos = {p: i for i, p in enumerate(net.out_boundary)}
        for p in ctl.places:
            qsig = None
            if p.query is not None:
                q = net.logic.query(p.query)
                qsig = (q.rel and "", q.count, q.select, _expr_key(q.filter))
            self.p_sig[p.name] = (p.color, p.view, qsig,
                                  in_pos.get(p.name, -1), out_pos.get(p.name, -1))
        for t in ctl.transitions:
            asig = None
            if t.action is not None:
                name, args = t.action
                act = net.logic.action(name)
                asig = (len(act.params), len(act.inserts), len(act.deletes),
                        len(act.delete_where), _terms_key(args))
            self.t_sig[t.name] = (_expr_key(t.guard), asig, t.timed)
        self.refine()

    def refine(self):
        ctl = self.net.control
        for _ in range(max(len(ctl.places) + len(ctl.transitions), 1)):
            new_p = {}
            for p in ctl.places:
                ins = sorted((_pat_key(a.pat), self.t_sig[a.transition])
                             for a in ctl.arcs_in if a.place == p.name)
                outs = sorted((_terms_key(a.terms), self.t_sig[a.transition])
                              for a in ctl.arcs_out if a.place == p.name)
                rbs = sorted((_terms_key(a.terms), self.t_sig[a.transition])
                             for a in ctl.arcs_rb if a.place == p.name)
                new_p[p.name] = (self.p_sig[p.name], tuple(ins), tuple(outs), tuple(rbs))
            new_t = {}
            for t in ctl.transitions:
                ins = sorted((_pat_key(a.pat), self.p_sig[a.place])
                             for a in ctl.arcs_in if a.transition == t.name)
                outs = sorted((_terms_key(a.terms), self.p_sig[a.place])
                              for a in ctl.arcs_out if a.transition == t.name)
                rbs = sorted((_terms_key(a.terms), self.p_sig[a.place])
                             for a in ctl.arcs_rb if a.transition == t.name)
                new_t[t.name] = (self.t_sig[t.name], tuple(ins), tuple(outs), tuple(rbs))
            if new_p == self.p_sig and new_t == self.t_sig:
                break
            self.p_sig, self.t_sig = new_p, new_t


def structurally_equal(a: OpenNet, b: OpenNet) -> bool:
    return find_net_isomorphism(a, b) is not None


def find_net_isomorphism(a: OpenNet, b: OpenNet) -> Optional[dict[str, str]]:
    """Place bijection witnessing structural equality, or None."""
    actl, bctl = a.control, b.control
    if (len(actl.places) != len(bctl.places)
            or len(actl.transitions) != len(bctl.transitions)
            or len(actl.arcs_in) != len(bctl.arcs_in)
            or len(actl.arcs_out) != len(bctl.arcs_out)
            or len(actl.arcs_rb) != len(bctl.arcs_rb)
            or len(a.in_boundary) != len(b.in_boundary)
            or len(a.out_boundary) != len(b.out_boundary)):
        return None
    # Layers must agree as multisets of definitions (names are part of the
    # definitions; composition keeps shared names shared).
    if sorted(map(repr, a.domain.types)) != sorted(map(repr, b.domain.types)):
        return None
    if sorted(map(repr, a.persistence.relations)) != sorted(map(repr, b.persistence.relations)):
        return None
    if sorted(map(repr, a.persistence.constraints)) != sorted(map(repr, b.persistence.constraints)):
        return None
    if sorted(map(repr, a.logic.queries)) != sorted(map(repr, b.logic.queries)):
        return None
    if sorted(map(repr, a.logic.actions)) != sorted(map(repr, b.logic.actions)):
        return None

    sa, sb = _Sig(a), _Sig(b)
    if sorted(map(repr, sa.p_sig.values())) != sorted(map(repr, sb.p_sig.values())):
        return None
    if sorted(map(repr, sa.t_sig.values())) != sorted(map(repr, sb.t_sig.values())):
        return None

    by_sig_p: dict[str, list[str]] = {}
    for name, sig in sb.p_sig.items():
        by_sig_p.setdefault(repr(sig), []).append(name)
    by_sig_t: dict[str, list[str]] = {}
    for name, sig in sb.t_sig.items():
        by_sig_t.setdefault(repr(sig), []).append(name)

    p_map: dict[str, str] = {}
    t_map: dict[str, str] = {}
    # Boundary positions are forced.
    for pa, pb in zip(a.in_boundary + a.out_boundary, b.in_boundary + b.out_boundary):
        if p_map.get(pa, pb) != pb:
            return None
        if repr(sa.p_sig[pa]) != repr(sb.p_sig[pb]):
            return None
        p_map[pa] = pb

    free_places = [p.name for p in actl.places if p.name not in p_map]
    free_places.sort(key=lambda n: (len(by_sig_p.get(repr(sa.p_sig[n]), [])), n))
    trans_order = sorted((t.name for t in actl.transitions),
                         key=lambda n: (len(by_sig_t.get(repr(sb.t_sig.get(n, '')), [])), n))
    trans_order = [t.name for t in actl.transitions]

    def arcs_consistent() -> bool:
        def key_in(ctl, pm, tm, arc):
            return (pm.get(arc.place, None), tm.get(arc.transition, None), _pat_key(arc.pat))
        got = {key_in(actl, p_map, t_map, x) for x in actl.arcs_in
               if x.place in p_map and x.transition in t_map}
        want = {(x.place, x.transition, _pat_key(x.pat)) for x in bctl.arcs_in}
        if not got <= want:
            return False
        for arcs_a, arcs_b in ((actl.arcs_out, bctl.arcs_out), (actl.arcs_rb, bctl.arcs_rb)):
            got2 = {(p_map.get(x.place), t_map.get(x.transition), _terms_key(x.terms))
                    for x in arcs_a if x.place in p_map and x.transition in t_map}
            want2 = {(x.place, x.transition, _terms_key(x.terms)) for x in arcs_b}
            if not {g for g in got2} <= want2:
                return False
        return True

    order: list[tuple[str, str]] = [("p", n) for n in free_places] + \
                                   [("t", n) for n in trans_order]

    def backtrack(i: int) -> bool:
        if i == len(order):
            return _verify(a, b, p_map, t_map)
        kind, name = order[i]
        if kind == "p":
            for cand in by_sig_p.get(repr(sa.p_sig[name]), []):
                if cand in p_map.values():
                    continue
                p_map[name] = cand
                if arcs_consistent() and backtrack(i + 1):
                    return True
                del p_map[name]
        else:
            for cand in by_sig_t.get(repr(sa.t_sig[name]), []):
                if cand in t_map.values():
                    continue
                t_map[name] = cand
                if arcs_consistent() and backtrack(i + 1):
                    return True
                del t_map[name]
        return False

    if backtrack(0):
        return dict(p_map)
    return None


def _verify(a: OpenNet, b: OpenNet, p_map: dict[str, str], t_map: dict[str, str]) -> bool:
    actl, bctl = a.control, b.control
    for p in actl.places:
        q = bctl.place(p_map[p.name])
        if (p.color, p.view, p.query) != (q.color, q.view, q.query):
            return False
    for t in actl.transitions:
        u = bctl.transition(t_map[t.name])
        if (_expr_key(t.guard), t.action, t.timed) != (_expr_key(u.guard), u.action, u.timed):
            return False
    def norm_in(ctl, pm, tm):
        return sorted((pm[x.place], tm[x.transition], _pat_key(x.pat)) for x in ctl.arcs_in)
    def norm_in_b(ctl):
        return sorted((x.place, x.transition, _pat_key(x.pat)) for x in ctl.arcs_in)
    if norm_in(actl, p_map, t_map) != norm_in_b(bctl):
        return False
    for arcs_a, arcs_b in ((actl.arcs_out, bctl.arcs_out), (actl.arcs_rb, bctl.arcs_rb)):
        na = sorted((t_map[x.transition], p_map[x.place], _terms_key(x.terms)) for x in arcs_a)
        nb = sorted((x.transition, x.place, _terms_key(x.terms)) for x in arcs_b)
        if na != nb:
            return False
    if [p_map[p] for p in a.in_boundary] != list(b.in_boundary):
        return False
    if [p_map[p] for p in a.out_boundary] != list(b.out_boundary):
        return False
    return True
