"""Small total expression language over message records.

Messages are immutable records with three slots (HDR, PL, ATTCH), each a
mapping from data-element names to values.  Expressions evaluate against an
environment of bound variables; the only defined failure mode is accessing a
field that is not present (:class:`MissingFieldError`).

A handful of named builtins cover the aggregate/segment operations that the
pattern library needs; they are registered by name so expressions stay
serializable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Iterable, Mapping

SLOTS = ("HDR", "PL", "ATTCH")


class ExprError(Exception):
    """Base class for evaluation errors."""


class MissingFieldError(ExprError):
    def __init__(self, slot: str, name: str):
        super().__init__(f"message has no field {slot}.{name}")
        self.slot = slot
        self.name = name


@dataclass(frozen=True)
class Message:
    """Immutable message record: three slots of named data elements."""

    hdr: tuple[tuple[str, Any], ...] = ()
    pl: tuple[tuple[str, Any], ...] = ()
    attch: tuple[tuple[str, Any], ...] = ()

    @staticmethod
    def of(hdr: Mapping[str, Any] | None = None,
           pl: Mapping[str, Any] | None = None,
           attch: Mapping[str, Any] | None = None) -> "Message":
        def norm(m):
            return tuple(sorted((m or {}).items()))
        return Message(norm(hdr), norm(pl), norm(attch))

    def slot(self, slot: str) -> dict[str, Any]:
        if slot == "HDR":
            return dict(self.hdr)
        if slot == "PL":
            return dict(self.pl)
        if slot == "ATTCH":
            return dict(self.attch)
        raise ExprError(f"unknown slot {slot!r}")

    def with_slot(self, slot: str, values: Mapping[str, Any]) -> "Message":
        parts = {"HDR": dict(self.hdr), "PL": dict(self.pl), "ATTCH": dict(self.attch)}
        parts[slot] = dict(values)
        return Message.of(parts["HDR"], parts["PL"], parts["ATTCH"])

    def get(self, slot: str, name: str) -> Any:
        values = self.slot(slot)
        if name not in values:
            raise MissingFieldError(slot, name)
        return values[name]

    def has(self, slot: str, name: str) -> bool:
        return name in self.slot(slot)

    def elements(self) -> set[tuple[str, str]]:
        return {(s, n) for s in SLOTS for n in self.slot(s)}


def merge_messages(msgs: Iterable[Message]) -> Message:
    """Fold a list of messages into one by slot-wise field union.

    Messages are canonically ordered first so the result does not depend on
    arrival order; on conflicting values the canonically-last message wins.
    """
    ordered = sorted(msgs, key=lambda m: repr(m))
    parts: dict[str, dict[str, Any]] = {s: {} for s in SLOTS}
    for m in ordered:
        for s in SLOTS:
            parts[s].update(m.slot(s))
    return Message.of(parts["HDR"], parts["PL"], parts["ATTCH"])


# ---------------------------------------------------------------------------
# Expression AST


class Expr:
    """Marker base class; concrete nodes are the frozen dataclasses below."""

    def eval(self, env: Mapping[str, Any]) -> Any:
        raise NotImplementedError

    # Static introspection used by rewrite side conditions: which message
    # fields an expression may read, and which it sets/removes.
    def reads(self) -> set[tuple[str, str]]:
        out: set[tuple[str, str]] = set()
        for child in self._children():
            out |= child.reads()
        return out

    def writes(self) -> set[tuple[str, str]]:
        out: set[tuple[str, str]] = set()
        for child in self._children():
            out |= child.writes()
        return out

    def _children(self) -> Iterable["Expr"]:
        return ()


@dataclass(frozen=True)
class Lit(Expr):
    value: Any

    def eval(self, env):
        return self.value


@dataclass(frozen=True)
class Var(Expr):
    name: str

    def eval(self, env):
        if self.name not in env:
            raise ExprError(f"unbound variable {self.name!r}")
        return env[self.name]


@dataclass(frozen=True)
class FieldRef(Expr):
    """Field access into the message bound to variable `var` (default "msg")."""

    slot: str
    name: str
    var: str = "msg"

    def eval(self, env):
        msg = Var(self.var).eval(env)
        return msg.get(self.slot, self.name)

    def reads(self):
        return {(self.slot, self.name)}


@dataclass(frozen=True)
class HasField(Expr):
    slot: str
    name: str
    var: str = "msg"

    def eval(self, env):
        return Var(self.var).eval(env).has(self.slot, self.name)

    def reads(self):
        return {(self.slot, self.name)}


_CMP: dict[str, Callable[[Any, Any], bool]] = {
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
}


@dataclass(frozen=True)
class Cmp(Expr):
    op: str
    lhs: Expr
    rhs: Expr

    def eval(self, env):
        return _CMP[self.op](self.lhs.eval(env), self.rhs.eval(env))

    def _children(self):
        return (self.lhs, self.rhs)


@dataclass(frozen=True)
class And(Expr):
    lhs: Expr
    rhs: Expr

    def eval(self, env):
        return bool(self.lhs.eval(env)) and bool(self.rhs.eval(env))

    def _children(self):
        return (self.lhs, self.rhs)


@dataclass(frozen=True)
class Or(Expr):
    lhs: Expr
    rhs: Expr

    def eval(self, env):
        return bool(self.lhs.eval(env)) or bool(self.rhs.eval(env))

    def _children(self):
        return (self.lhs, self.rhs)


@dataclass(frozen=True)
class Not(Expr):
    arg: Expr

    def eval(self, env):
        return not bool(self.arg.eval(env))

    def _children(self):
        return (self.arg,)


@dataclass(frozen=True)
class SetFields(Expr):
    """Copy the base message and set named fields in one slot."""

    base: Expr
    slot: str
    fields: tuple[tuple[str, Expr], ...]

    @staticmethod
    def of(base: Expr, slot: str, fields: Mapping[str, Expr]) -> "SetFields":
        return SetFields(base, slot, tuple(sorted(fields.items())))

    def eval(self, env):
        msg = self.base.eval(env)
        values = msg.slot(self.slot)
        for name, e in self.fields:
            values[name] = e.eval(env)
        return msg.with_slot(self.slot, values)

    def writes(self):
        out = {(self.slot, name) for name, _ in self.fields}
        for _, e in self.fields:
            out |= e.writes()
        return out | self.base.writes()

    def reads(self):
        out = self.base.reads()
        for _, e in self.fields:
            out |= e.reads()
        return out


@dataclass(frozen=True)
class DropFields(Expr):
    base: Expr
    slot: str
    names: tuple[str, ...]

    def eval(self, env):
        msg = self.base.eval(env)
        values = msg.slot(self.slot)
        for name in self.names:
            values.pop(name, None)
        return msg.with_slot(self.slot, values)

    def writes(self):
        return {(self.slot, n) for n in self.names} | self.base.writes()

    def _children(self):
        return (self.base,)


@dataclass(frozen=True)
class KeepFields(Expr):
    """Project slots down to the named elements; unlisted slots pass through."""

    base: Expr
    keep: tuple[tuple[str, tuple[str, ...]], ...]

    @staticmethod
    def of(base: Expr, keep: Mapping[str, Iterable[str]]) -> "KeepFields":
        return KeepFields(base, tuple(sorted((s, tuple(sorted(ns))) for s, ns in keep.items())))

    def eval(self, env):
        msg = self.base.eval(env)
        for slot, names in self.keep:
            values = {n: v for n, v in msg.slot(slot).items() if n in names}
            msg = msg.with_slot(slot, values)
        return msg

    def writes(self):
        # Dropping is a write on everything outside the kept set; the exact
        # complement is unknown statically, so report the kept slots wholesale.
        return {(slot, "*") for slot, _ in self.keep} | self.base.writes()

    def _children(self):
        return (self.base,)


@dataclass(frozen=True)
class RecordOf(Expr):
    """Build a fresh message from per-slot field expressions."""

    fields: tuple[tuple[str, tuple[tuple[str, Expr], ...]], ...]

    @staticmethod
    def of(spec: Mapping[str, Mapping[str, Expr]]) -> "RecordOf":
        return RecordOf(tuple(sorted((s, tuple(sorted(fs.items()))) for s, fs in spec.items())))

    def eval(self, env):
        parts: dict[str, dict[str, Any]] = {s: {} for s in SLOTS}
        for slot, fields in self.fields:
            for name, e in fields:
                parts[slot][name] = e.eval(env)
        return Message.of(parts["HDR"], parts["PL"], parts["ATTCH"])

    def writes(self):
        return {(slot, name) for slot, fields in self.fields for name, _ in fields}

    def reads(self):
        out: set[tuple[str, str]] = set()
        for _, fields in self.fields:
            for _, e in fields:
                out |= e.reads()
        return out


@dataclass(frozen=True)
class ListOf(Expr):
    items: tuple[Expr, ...]

    def eval(self, env):
        return [e.eval(env) for e in self.items]

    def _children(self):
        return self.items


@dataclass(frozen=True)
class Builtin(Expr):
    """Named library function; see `BUILTINS` for the registry."""

    name: str
    args: tuple[Expr, ...] = ()

    def eval(self, env):
        if self.name not in BUILTINS:
            raise ExprError(f"unknown builtin {self.name!r}")
        return BUILTINS[self.name]([a.eval(env) for a in self.args])

    def reads(self):
        out = set().union(*(a.reads() for a in self.args)) if self.args else set()
        extra = _BUILTIN_READS.get(self.name)
        if extra:
            out |= set(extra)
        return out

    def writes(self):
        out = set().union(*(a.writes() for a in self.args)) if self.args else set()
        extra = _BUILTIN_WRITES.get(self.name)
        if extra:
            out |= set(extra)
        return out

    def _children(self):
        return self.args


# ---------------------------------------------------------------------------
# Builtin registry


def _bi_merge_records(args):
    [msgs] = args
    return merge_messages(list(msgs))


def _bi_wrap_batch(args):
    [msgs] = args
    ordered = sorted(msgs, key=lambda m: repr(m))
    return Message.of(pl={"__batch": tuple(ordered)})


def _bi_unwrap_batch(args):
    [msg] = args
    return list(msg.get("PL", "__batch"))


def _bi_split_segments(args):
    [msg] = args
    segs = msg.get("PL", "__segs")
    out = []
    for i, seg in enumerate(segs):
        m = msg.with_slot("PL", dict(msg.slot("PL"), __segs=(seg,), __segidx=i))
        out.append(m)
    return out


def _bi_reassemble_segments(args):
    [msgs] = args
    ordered = sorted(msgs, key=lambda m: m.get("PL", "__segidx"))
    segs: list[Any] = []
    for m in ordered:
        segs.extend(m.get("PL", "__segs"))
    base = ordered[0] if ordered else Message.of()
    values = dict(base.slot("PL"))
    values.pop("__segidx", None)
    values["__segs"] = tuple(segs)
    return base.with_slot("PL", values)


def _bi_claim_key(args):
    [msg] = args
    return "claim:" + repr(tuple(sorted(msg.slot("PL").items())))


def _bi_identity(args):
    [value] = args
    return value


BUILTINS: dict[str, Callable[[list], Any]] = {
    "merge_records": _bi_merge_records,
    "wrap_batch": _bi_wrap_batch,
    "unwrap_batch": _bi_unwrap_batch,
    "split_segments": _bi_split_segments,
    "reassemble_segments": _bi_reassemble_segments,
    "claim_key": _bi_claim_key,
    "identity": _bi_identity,
}

# Conservative read/write footprints for side-condition analysis.
_BUILTIN_READS = {
    "unwrap_batch": {("PL", "__batch")},
    "split_segments": {("PL", "__segs")},
    "reassemble_segments": {("PL", "__segs"), ("PL", "__segidx")},
    "claim_key": {("PL", "*")},
}
_BUILTIN_WRITES = {
    "wrap_batch": {("PL", "__batch")},
    "split_segments": {("PL", "__segs"), ("PL", "__segidx")},
    "reassemble_segments": {("PL", "__segs"), ("PL", "__segidx")},
}


# ---------------------------------------------------------------------------
# JSON serialization (used by the scenario and net file formats)


def expr_to_json(e: Expr) -> Any:
    if isinstance(e, Lit):
        v = e.value
        if isinstance(v, Fraction):
            return {"op": "lit", "rat": str(v)}
        return {"op": "lit", "value": v}
    if isinstance(e, Var):
        return {"op": "var", "name": e.name}
    if isinstance(e, FieldRef):
        return {"op": "field", "slot": e.slot, "name": e.name, "var": e.var}
    if isinstance(e, HasField):
        return {"op": "has", "slot": e.slot, "name": e.name, "var": e.var}
    if isinstance(e, Cmp):
        return {"op": "cmp", "cmp": e.op, "lhs": expr_to_json(e.lhs), "rhs": expr_to_json(e.rhs)}
    if isinstance(e, And):
        return {"op": "and", "lhs": expr_to_json(e.lhs), "rhs": expr_to_json(e.rhs)}
    if isinstance(e, Or):
        return {"op": "or", "lhs": expr_to_json(e.lhs), "rhs": expr_to_json(e.rhs)}
    if isinstance(e, Not):
        return {"op": "not", "arg": expr_to_json(e.arg)}
    if isinstance(e, SetFields):
        return {"op": "set", "slot": e.slot, "base": expr_to_json(e.base),
                "fields": {n: expr_to_json(x) for n, x in e.fields}}
    if isinstance(e, DropFields):
        return {"op": "drop", "slot": e.slot, "base": expr_to_json(e.base),
                "names": list(e.names)}
    if isinstance(e, KeepFields):
        return {"op": "keep", "base": expr_to_json(e.base),
                "keep": {s: list(ns) for s, ns in e.keep}}
    if isinstance(e, RecordOf):
        return {"op": "record",
                "fields": {s: {n: expr_to_json(x) for n, x in fs} for s, fs in e.fields}}
    if isinstance(e, ListOf):
        return {"op": "list", "items": [expr_to_json(x) for x in e.items]}
    if isinstance(e, Builtin):
        return {"op": "builtin", "name": e.name, "args": [expr_to_json(a) for a in e.args]}
    raise ExprError(f"unserializable expression {e!r}")


def expr_from_json(data: Any) -> Expr:
    op = data.get("op")
    if op == "lit":
        if "rat" in data:
            return Lit(Fraction(data["rat"]))
        return Lit(data["value"])
    if op == "var":
        return Var(data["name"])
    if op == "field":
        return FieldRef(data["slot"], data["name"], data.get("var", "msg"))
    if op == "has":
        return HasField(data["slot"], data["name"], data.get("var", "msg"))
    if op == "cmp":
        return Cmp(data["cmp"], expr_from_json(data["lhs"]), expr_from_json(data["rhs"]))
    if op == "and":
        return And(expr_from_json(data["lhs"]), expr_from_json(data["rhs"]))
    if op == "or":
        return Or(expr_from_json(data["lhs"]), expr_from_json(data["rhs"]))
    if op == "not":
        return Not(expr_from_json(data["arg"]))
    if op == "set":
        return SetFields(expr_from_json(data["base"]), data["slot"],
                         tuple(sorted((n, expr_from_json(x)) for n, x in data["fields"].items())))
    if op == "drop":
        return DropFields(expr_from_json(data["base"]), data["slot"], tuple(data["names"]))
    if op == "keep":
        return KeepFields(expr_from_json(data["base"]),
                          tuple(sorted((s, tuple(ns)) for s, ns in data["keep"].items())))
    if op == "record":
        return RecordOf(tuple(sorted(
            (s, tuple(sorted((n, expr_from_json(x)) for n, x in fs.items())))
            for s, fs in data["fields"].items())))
    if op == "list":
        return ListOf(tuple(expr_from_json(x) for x in data["items"]))
    if op == "builtin":
        return Builtin(data["name"], tuple(expr_from_json(a) for a in data["args"]))
    raise ExprError(f"bad expression json: {data!r}")
