"""Open timed db-nets: three-layer nets with ordered boundary places.

A net has a persistence layer (schema + constraints), a data logic layer
(queries + actions) and a control layer (colored places and guarded, timed
transitions with input, output and rollback flows).  Open nets additionally
carry ordered lists of input and output boundary places, which is what makes
sequential gluing and the parallel tensor well-defined.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Any, Iterable, Mapping, Optional

from ..expr import Expr, Lit, Var, expr_from_json, expr_to_json

INF = Fraction(-1)  # unbounded upper end of a timed window

CARRIERS = ("int", "str", "bool", "rat", "record", "list")


@dataclass(frozen=True)
class DataType:
    name: str
    carrier: str
    # named boolean relations over the carrier: (name, param, body)
    predicates: tuple[tuple[str, str, Expr], ...] = ()

    def __post_init__(self):
        if self.carrier not in CARRIERS:
            raise ValueError(f"unknown carrier {self.carrier!r}")


@dataclass(frozen=True)
class TypeDomain:
    types: tuple[DataType, ...] = ()

    def get(self, name: str) -> DataType:
        for t in self.types:
            if t.name == name:
                return t
        raise KeyError(f"no data type {name!r}")

    def has(self, name: str) -> bool:
        return any(t.name == name for t in self.types)


@dataclass(frozen=True)
class Relation:
    name: str
    columns: tuple[tuple[str, str], ...]  # (column name, type name)


@dataclass(frozen=True)
class Constraint:
    """First-order constraint, desk scale: for all rows of `rel`, `body`
    holds, where body may nest an inner quantifier over `inner_rel`."""

    name: str
    rel: str
    body: Expr  # over env {col: value, ...} of the outer row
    inner_rel: Optional[str] = None  # body then sees inner columns prefixed "_"


@dataclass(frozen=True)
class PersistenceLayer:
    relations: tuple[Relation, ...] = ()
    constraints: tuple[Constraint, ...] = ()

    def relation(self, name: str) -> Relation:
        for r in self.relations:
            if r.name == name:
                return r
        raise KeyError(f"no relation {name!r}")


@dataclass(frozen=True)
class Query:
    """Filtered scan of one relation.  Returns the selected columns per row,
    or a single count tuple when `count` is set."""

    name: str
    rel: str
    filter: Optional[Expr] = None  # over env of column values
    select: tuple[str, ...] = ()
    count: bool = False


@dataclass(frozen=True)
class Action:
    """Parameterized update: fact insertions, exact deletions, and filtered
    deletions.  Terms are expressions over the action parameters."""

    name: str
    params: tuple[str, ...] = ()
    inserts: tuple[tuple[str, tuple[Expr, ...]], ...] = ()
    deletes: tuple[tuple[str, tuple[Expr, ...]], ...] = ()
    delete_where: tuple[tuple[str, Expr], ...] = ()  # filter over columns + params


@dataclass(frozen=True)
class DataLogicLayer:
    queries: tuple[Query, ...] = ()
    actions: tuple[Action, ...] = ()

    def query(self, name: str) -> Query:
        for q in self.queries:
            if q.name == name:
                return q
        raise KeyError(f"no query {name!r}")

    def action(self, name: str) -> Action:
        for a in self.actions:
            if a.name == name:
                return a
        raise KeyError(f"no action {name!r}")


@dataclass(frozen=True)
class Place:
    name: str
    color: tuple[str, ...]  # tuple of type names
    view: bool = False
    query: Optional[str] = None  # required iff view


# Input-arc inscriptions -----------------------------------------------------


@dataclass(frozen=True)
class TuplePat:
    """Bind one token; terms are Var (binds component) or Lit (must equal)."""

    terms: tuple[Expr, ...]


@dataclass(frozen=True)
class AllRows:
    """View-place read: bind `var` to the full, canonically sorted answer
    list (single-column answers are unwrapped)."""

    var: str


@dataclass(frozen=True)
class MultiTake:
    """Consume `count` tokens from an arity-1 place at once; bind `var` to
    the canonically sorted list of their values."""

    count: int
    var: str


Inscription = Any  # TuplePat | AllRows | MultiTake


@dataclass(frozen=True)
class ArcIn:
    place: str
    transition: str
    pat: Inscription


@dataclass(frozen=True)
class ArcOut:
    transition: str
    place: str
    terms: tuple[Expr, ...]  # one per color component; arity-1 list values spread


@dataclass(frozen=True)
class Transition:
    name: str
    guard: Optional[Expr] = None
    action: Optional[tuple[str, tuple[Expr, ...]]] = None  # (action name, args)
    timed: tuple[Fraction, Fraction] = (Fraction(0), INF)


@dataclass(frozen=True)
class ControlLayer:
    places: tuple[Place, ...] = ()
    transitions: tuple[Transition, ...] = ()
    arcs_in: tuple[ArcIn, ...] = ()
    arcs_out: tuple[ArcOut, ...] = ()
    arcs_rb: tuple[ArcOut, ...] = ()

    def place(self, name: str) -> Place:
        for p in self.places:
            if p.name == name:
                return p
        raise KeyError(f"no place {name!r}")

    def transition(self, name: str) -> Transition:
        for t in self.transitions:
            if t.name == name:
                return t
        raise KeyError(f"no transition {name!r}")

    def inputs_of(self, t: str) -> list[ArcIn]:
        return [a for a in self.arcs_in if a.transition == t]

    def outputs_of(self, t: str) -> list[ArcOut]:
        return [a for a in self.arcs_out if a.transition == t]

    def rollbacks_of(self, t: str) -> list[ArcOut]:
        return [a for a in self.arcs_rb if a.transition == t]


@dataclass(frozen=True)
class OpenNet:
    """Open timed db-net with ordered input/output boundaries."""

    domain: TypeDomain = TypeDomain()
    persistence: PersistenceLayer = PersistenceLayer()
    logic: DataLogicLayer = DataLogicLayer()
    control: ControlLayer = ControlLayer()
    in_boundary: tuple[str, ...] = ()
    out_boundary: tuple[str, ...] = ()

    def boundary_config(self) -> tuple[tuple[tuple[str, ...], ...], tuple[tuple[str, ...], ...]]:
        cin = tuple(self.control.place(p).color for p in self.in_boundary)
        cout = tuple(self.control.place(p).color for p in self.out_boundary)
        return cin, cout

    def place_names(self) -> list[str]:
        return [p.name for p in self.control.places]

    def transition_names(self) -> list[str]:
        return [t.name for t in self.control.transitions]


class NetError(Exception):
    pass


# ---------------------------------------------------------------------------
# Validation


@dataclass(frozen=True)
class NetViolation:
    where: str
    message: str

    def __str__(self):
        return f"{self.where}: {self.message}"


@dataclass(frozen=True)
class NetReport:
    violations: tuple[NetViolation, ...]

    def ok(self) -> bool:
        return not self.violations

    def __str__(self):
        return "ok" if self.ok() else "\n".join(str(v) for v in self.violations)


def _pattern_vars(pat: Inscription) -> set[str]:
    if isinstance(pat, TuplePat):
        return {t.name for t in pat.terms if isinstance(t, Var)}
    if isinstance(pat, (AllRows, MultiTake)):
        return {pat.var}
    return set()


def validate_net(net: OpenNet) -> NetReport:
    out: list[NetViolation] = []
    ctl = net.control
    place_names = set(net.place_names())
    trans_names = set(net.transition_names())

    for p in ctl.places:
        for tname in p.color:
            if not net.domain.has(tname):
                out.append(NetViolation(p.name, f"color references unknown type {tname!r}"))
        if p.view:
            if p.query is None:
                out.append(NetViolation(p.name, "view place without query"))
            else:
                try:
                    net.logic.query(p.query)
                except KeyError:
                    out.append(NetViolation(p.name, f"unknown query {p.query!r}"))
        elif p.query is not None:
            out.append(NetViolation(p.name, "control place with a query assignment"))

    for b in net.in_boundary + net.out_boundary:
        if b not in place_names:
            out.append(NetViolation(b, "boundary references unknown place"))
        elif ctl.place(b).view:
            out.append(NetViolation(b, "boundary place must be a control place"))

    views = {p.name for p in ctl.places if p.view}
    for a in ctl.arcs_in:
        if a.place not in place_names or a.transition not in trans_names:
            out.append(NetViolation(f"{a.place}->{a.transition}", "dangling arc"))
            continue
        if a.place in net.out_boundary:
            out.append(NetViolation(a.place, "input flow from an output boundary place"))
        p = ctl.place(a.place)
        if isinstance(a.pat, TuplePat):
            if len(a.pat.terms) != len(p.color):
                out.append(NetViolation(
                    f"{a.place}->{a.transition}",
                    f"inscription arity {len(a.pat.terms)} != color arity {len(p.color)}"))
            for t in a.pat.terms:
                if not isinstance(t, (Var, Lit)):
                    out.append(NetViolation(
                        f"{a.place}->{a.transition}", "input terms must be variables or constants"))
        elif isinstance(a.pat, AllRows):
            if not p.view:
                out.append(NetViolation(
                    f"{a.place}->{a.transition}", "AllRows reads require a view place"))
        elif isinstance(a.pat, MultiTake):
            if p.view or len(p.color) != 1:
                out.append(NetViolation(
                    f"{a.place}->{a.transition}", "MultiTake needs an arity-1 control place"))

    for kind, arcs in (("out", ctl.arcs_out), ("rollback", ctl.arcs_rb)):
        for a in arcs:
            if a.place not in place_names or a.transition not in trans_names:
                out.append(NetViolation(f"{a.transition}->{a.place}", f"dangling {kind} arc"))
                continue
            if a.place in net.in_boundary:
                out.append(NetViolation(a.place, f"{kind} flow into an input boundary place"))
            p = ctl.place(a.place)
            if p.view:
                out.append(NetViolation(a.place, f"{kind} flow into a view place"))
            elif len(a.terms) != len(p.color):
                out.append(NetViolation(
                    f"{a.transition}->{a.place}",
                    f"inscription arity {len(a.terms)} != color arity {len(p.color)}"))

    for t in ctl.transitions:
        lo, hi = t.timed
        if lo < 0:
            out.append(NetViolation(t.name, "timed window start below zero"))
        if hi != INF and hi < lo:
            out.append(NetViolation(t.name, "timed window start exceeds end"))
        bound: set[str] = set()
        for a in ctl.inputs_of(t.name):
            bound |= _pattern_vars(a.pat)
        if t.guard is not None:
            free = _free_vars(t.guard)
            if not free <= bound:
                out.append(NetViolation(
                    t.name, f"guard uses unbound variables {sorted(free - bound)}"))
        if t.action is not None:
            name, args = t.action
            try:
                act = net.logic.action(name)
                if len(act.params) != len(args):
                    out.append(NetViolation(t.name, f"action {name!r} arity mismatch"))
            except KeyError:
                out.append(NetViolation(t.name, f"unknown action {name!r}"))
            for arg in args:
                if not _free_vars(arg) <= bound:
                    out.append(NetViolation(t.name, "action argument uses unbound variables"))
        for a in ctl.outputs_of(t.name) + ctl.rollbacks_of(t.name):
            for term in a.terms:
                if not _free_vars(term) <= bound:
                    out.append(NetViolation(
                        t.name, f"output inscription to {a.place} uses unbound variables"))

    for q in net.logic.queries:
        try:
            rel = net.persistence.relation(q.rel)
            cols = {c for c, _ in rel.columns}
            for s in q.select:
                if s not in cols:
                    out.append(NetViolation(q.name, f"selects unknown column {s!r}"))
        except KeyError:
            out.append(NetViolation(q.name, f"query over unknown relation {q.rel!r}"))
    for act in net.logic.actions:
        for rel, _ in act.inserts + act.deletes:
            if not any(r.name == rel for r in net.persistence.relations):
                out.append(NetViolation(act.name, f"action touches unknown relation {rel!r}"))
        for rel, _ in act.delete_where:
            if not any(r.name == rel for r in net.persistence.relations):
                out.append(NetViolation(act.name, f"action touches unknown relation {rel!r}"))
    for c in net.persistence.constraints:
        for rel in (c.rel, c.inner_rel):
            if rel is not None and not any(r.name == rel for r in net.persistence.relations):
                out.append(NetViolation(c.name, f"constraint over unknown relation {rel!r}"))

    return NetReport(tuple(out))


def _free_vars(e: Expr) -> set[str]:
    if isinstance(e, Var):
        return {e.name}
    out: set[str] = set()
    for child in e._children():
        out |= _free_vars(child)
    # compound nodes that hold exprs outside _children
    from ..expr import SetFields, RecordOf, FieldRef, HasField
    if isinstance(e, SetFields):
        out |= _free_vars(e.base)
        for _, x in e.fields:
            out |= _free_vars(x)
    if isinstance(e, RecordOf):
        for _, fs in e.fields:
            for _, x in fs:
                out |= _free_vars(x)
    if isinstance(e, (FieldRef, HasField)):
        out.add(e.var)
    return out
