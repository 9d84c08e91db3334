"""Channel ownership resources, actions, and their semantics.

A resource is a finite partial map from channel constants to ``pub`` or
``pri``.  Actions are interpreted as deterministic resource transformers
whose result is a new resource, ``IMPERMISSIBLE`` (the action faults) or
``IMPOSSIBLE`` (the step silently cannot happen).
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass
from typing import Iterable, Iterator, Mapping, Optional, Union

PUB = "pub"
PRI = "pri"
OWNERSHIPS = (PUB, PRI)

SEND_DIR = "!"
RECV_DIR = "?"


class Resource:
    """Immutable finite map channel -> ownership.  Hashable, ordered by key."""

    __slots__ = ("_items", "_map", "_hash")

    def __init__(self, entries: Union[Mapping[str, str], Iterable, None] = None):
        m = dict(entries or {})
        for c, own in m.items():
            if own not in OWNERSHIPS:
                raise ValueError(f"bad ownership {own!r} for channel {c!r}")
        self._items = tuple(sorted(m.items()))
        self._map = m
        self._hash = hash(self._items)

    def get(self, c: str) -> Optional[str]:
        return self._map.get(c)

    def __getitem__(self, c: str) -> str:
        return self._map[c]

    def __contains__(self, c: str) -> bool:
        return c in self._map

    def __iter__(self) -> Iterator[str]:
        return (c for c, _ in self._items)

    def __len__(self) -> int:
        return len(self._items)

    def items(self):
        return self._items

    def domain(self) -> frozenset:
        return frozenset(self._map)

    def set(self, c: str, own: str) -> "Resource":
        m = dict(self._map)
        m[c] = own
        return Resource(m)

    def without(self, chans: Iterable[str]) -> "Resource":
        drop = set(chans)
        return Resource({c: o for c, o in self._items if c not in drop})

    def __eq__(self, other):
        return isinstance(other, Resource) and self._items == other._items

    def __hash__(self):
        return self._hash

    def __le__(self, other: "Resource") -> bool:
        """Partial-map inclusion."""
        return all(other.get(c) == o for c, o in self._items)

    def __repr__(self):
        return f"Resource({dict(self._items)!r})"

    def __str__(self):
        return render_resource(self)


EMPTY = Resource()


# ---------------------------------------------------------------------------
# Actions
# ---------------------------------------------------------------------------

@dataclass(frozen=True, slots=True)
class Output:
    chan: str
    payload: str


@dataclass(frozen=True, slots=True)
class Input:
    chan: str
    payload: str


@dataclass(frozen=True, slots=True)
class Alloc:
    chan: str


@dataclass(frozen=True, slots=True)
class Tau:
    pass


@dataclass(frozen=True, slots=True)
class Fault:
    pass


@dataclass(frozen=True, slots=True)
class Block:
    dirs: frozenset


@dataclass(frozen=True, slots=True)
class BoundOutput:
    """Observable form of sending a private channel: ``nu d`` then ``c!d``."""
    chan: str
    payload: str


Action = Union[Output, Input, Alloc, Tau, Fault, Block]
Element = Union[Output, Input, BoundOutput, Fault]  # observable trace elements

TAU = Tau()
FAULT = Fault()


@dataclass(frozen=True, slots=True)
class Ok:
    next: Resource


class _Verdict:
    __slots__ = ("name",)

    def __init__(self, name):
        self.name = name

    def __repr__(self):
        return self.name


IMPERMISSIBLE = _Verdict("IMPERMISSIBLE")
IMPOSSIBLE = _Verdict("IMPOSSIBLE")


def dual(a) -> Optional[Action]:
    if isinstance(a, Output):
        return Input(a.chan, a.payload)
    if isinstance(a, Input):
        return Output(a.chan, a.payload)
    return None


def reverse_dirs(dirs: Iterable) -> frozenset:
    flip = {SEND_DIR: RECV_DIR, RECV_DIR: SEND_DIR}
    return frozenset((c, flip[d]) for c, d in dirs)


def apply_action(a, sigma: Resource):
    """The resource transformer of an action."""
    if isinstance(a, Output):
        if a.chan not in sigma or a.payload not in sigma:
            return IMPERMISSIBLE
        if sigma.get(a.chan) == PUB:
            return Ok(sigma if sigma.get(a.payload) == PUB else sigma.set(a.payload, PUB))
        return IMPOSSIBLE
    if isinstance(a, Input):
        own = sigma.get(a.chan)
        if own is None:
            return IMPERMISSIBLE
        if own == PUB and sigma.get(a.payload) != PRI:
            return Ok(sigma if sigma.get(a.payload) == PUB else sigma.set(a.payload, PUB))
        return IMPOSSIBLE
    if isinstance(a, Alloc):
        return IMPOSSIBLE if a.chan in sigma else Ok(sigma.set(a.chan, PRI))
    if isinstance(a, Tau):
        return Ok(sigma)
    if isinstance(a, Fault):
        return IMPERMISSIBLE
    if isinstance(a, Block):
        if any(c not in sigma for c, _ in a.dirs):
            return IMPERMISSIBLE
        return Ok(sigma)
    raise TypeError(f"not an action: {a!r}")


def observe_action(a, sigma: Resource) -> tuple:
    """Observable trace contributed by ``a`` when taken under ``sigma``."""
    if isinstance(a, (Tau, Alloc)):
        return ()
    if isinstance(a, Output):
        if sigma.get(a.payload) == PRI:
            return (BoundOutput(a.chan, a.payload),)
        return (a,)
    if isinstance(a, Block):
        return (Block(frozenset(d for d in a.dirs if sigma.get(d[0]) == PUB)),)
    return (a,)


def primitives(e) -> tuple:
    """Split an observable element back into primitive actions."""
    if isinstance(e, BoundOutput):
        return (Alloc(e.payload), Output(e.chan, e.payload))
    return (e,)


def public_lift(sigma: Resource) -> Resource:
    if all(o == PUB for _, o in sigma.items()):
        return sigma
    return Resource({c: PUB for c in sigma})


def check_separation(sigma: Resource, s1: Resource, s2: Resource) -> bool:
    if sigma.domain() != s1.domain() | s2.domain():
        return False
    for mine, other in ((s1, s2), (s2, s1)):
        for c, o in mine.items():
            if o == PRI and (sigma.get(c) != PRI or c in other):
                return False
    return True


def check_invariant_rel(s_op: Resource, s_den: Resource, s1: Resource, s2: Resource) -> bool:
    if not check_separation(s_op, s1, s2):
        return False
    hidden = {c for s in (s1, s2) for c, o in s.items() if o == PRI}
    return s_den == s_op.without(hidden)


def enumerate_separations(sigma: Resource) -> set:
    """All ``(s1, s2)`` with ``sigma`` in ``s1 || s2``."""
    per_chan = []
    for c, o in sigma.items():
        if o == PUB:
            opts = [({c: PUB}, {}), ({}, {c: PUB}), ({c: PUB}, {c: PUB})]
        else:
            opts = [({c: PRI}, {}), ({}, {c: PRI}), ({c: PUB}, {c: PUB}),
                    ({c: PUB}, {}), ({}, {c: PUB})]
        per_chan.append(opts)
    out = set()
    for combo in itertools.product(*per_chan):
        a, b = {}, {}
        for x, y in combo:
            a.update(x)
            b.update(y)
        out.add((Resource(a), Resource(b)))
    return out


def all_resources(universe: Iterable[str]) -> list:
    """Every resource whose domain lies within ``universe`` (3^n of them)."""
    chans = sorted(universe)
    out = []
    for choice in itertools.product((None, PUB, PRI), repeat=len(chans)):
        out.append(Resource({c: o for c, o in zip(chans, choice) if o is not None}))
    return out


def all_actions(universe: Iterable[str]) -> list:
    """Every non-blocking action over ``universe`` plus all blocking actions."""
    chans = sorted(universe)
    acts = [TAU, FAULT]
    acts += [Alloc(c) for c in chans]
    acts += [Output(c, d) for c in chans for d in chans]
    acts += [Input(c, d) for c in chans for d in chans]
    dirs = [(c, s) for c in chans for s in (SEND_DIR, RECV_DIR)]
    for r in range(len(dirs) + 1):
        acts += [Block(frozenset(ds)) for ds in itertools.combinations(dirs, r)]
    return acts


# ---------------------------------------------------------------------------
# Rendering and parsing of literals
# ---------------------------------------------------------------------------

def render_dirs(dirs: Iterable) -> str:
    return ", ".join(f"#{c}{d}" for c, d in sorted(dirs))


def render_action(a) -> str:
    if isinstance(a, Output):
        return f"#{a.chan}!#{a.payload}"
    if isinstance(a, Input):
        return f"#{a.chan}?#{a.payload}"
    if isinstance(a, BoundOutput):
        return f"nu #{a.payload}, #{a.chan}!#{a.payload}"
    if isinstance(a, Alloc):
        return f"nu #{a.chan}"
    if isinstance(a, Tau):
        return "tau"
    if isinstance(a, Fault):
        return "FAULT"
    if isinstance(a, Block):
        return "delta{" + render_dirs(a.dirs) + "}"
    raise TypeError(a)


def render_trace(t: Iterable) -> str:
    return ", ".join(render_action(a) for a in t)


def render_resource(sigma: Resource) -> str:
    return "{" + ", ".join(f"#{c}: {o}" for c, o in sigma.items()) + "}"


_RES_ENTRY = re.compile(r"\s*#([A-Za-z0-9_][A-Za-z0-9_']*)\s*:\s*(pub|pri)\s*")


def parse_resource(text: str, universe: Optional[Iterable[str]] = None) -> Resource:
    s = text.strip()
    if not (s.startswith("{") and s.endswith("}")):
        raise ValueError(f"resource literal must be braced: {text!r}")
    body = s[1:-1].strip()
    entries = {}
    if body:
        for part in body.split(","):
            m = _RES_ENTRY.fullmatch(part)
            if not m:
                raise ValueError(f"bad resource entry {part.strip()!r}")
            entries[m.group(1)] = m.group(2)
    if universe is not None:
        extra = set(entries) - set(universe)
        if extra:
            raise ValueError(f"resource mentions channels outside the universe: {sorted(extra)}")
    return Resource(entries)


def parse_universe(text: str) -> tuple:
    chans = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if not re.fullmatch(r"#?[A-Za-z0-9_][A-Za-z0-9_']*", part):
            raise ValueError(f"bad channel {part!r}")
        chans.append(part.lstrip("#"))
    if not chans:
        raise ValueError("universe must be nonempty")
    return tuple(sorted(set(chans)))
