"""Operational semantics in two layers.

Layer one generates actions from syntax alone.  Layer two runs those
actions against a resource, turning impermissible ones into faults and
dropping impossible ones.

Each step also carries a cost: the number of prefixes it fires.  Sends,
receives and faults cost 1, an internal communication costs 2, and
allocation, internal choice and recursion unfolding are free.  The depth
bound used by the trace semantics is a budget in this currency.
"""

from __future__ import annotations

from functools import lru_cache
from typing import NamedTuple, Optional

from .resources import (
    FAULT, RECV_DIR, SEND_DIR, TAU, Alloc, Fault, IMPERMISSIBLE, Input, Ok,
    Output, Resource, apply_action, dual,
)
from .syntax import (
    NIL, Const, IChoice, New, OpenProcessError, Par, PVar, Process, Rec,
    Send, Sum, is_closed, print_process, subst_chan, subst_proc,
)


class GenStep(NamedTuple):
    action: object
    successor: Process
    via_comm: bool = False


class ResStep(NamedTuple):
    action: object
    successor: Process
    next_resource: Resource
    via_comm: bool = False


def step_cost(action, via_comm: bool = False) -> int:
    if via_comm:
        return 2
    if isinstance(action, (Output, Input, Fault)):
        return 1
    return 0


def _require_closed(p: Process) -> None:
    if not is_closed(p):
        raise OpenProcessError(f"process is not closed: {print_process(p)}")


def _const(e) -> str:
    if not isinstance(e, Const):
        raise OpenProcessError(f"unbound channel variable {e.name!r}")
    return e.name


@lru_cache(maxsize=1 << 17)
def _gen(p: Process, universe: tuple) -> frozenset:
    out = set()
    if isinstance(p, Sum):
        for pre, cont in p.branches:
            c = _const(pre.chan)
            if isinstance(pre, Send):
                out.add(GenStep(Output(c, _const(pre.payload)), cont))
            else:
                for d in universe:
                    out.add(GenStep(Input(c, d), subst_chan(cont, pre.binder, d)))
    elif isinstance(p, IChoice):
        out.add(GenStep(TAU, p.left))
        out.add(GenStep(TAU, p.right))
    elif isinstance(p, New):
        for c in universe:
            out.add(GenStep(Alloc(c), subst_chan(p.body, p.binder, c)))
    elif isinstance(p, Rec):
        out.add(GenStep(TAU, subst_proc(p.body, p.binder, p)))
    elif isinstance(p, Par):
        left = _gen(p.left, universe)
        right = _gen(p.right, universe)
        for s in left:
            out.add(GenStep(s.action, Par(s.successor, p.right), s.via_comm))
        for s in right:
            out.add(GenStep(s.action, Par(p.left, s.successor), s.via_comm))
        by_action = {}
        for s in right:
            if isinstance(s.action, (Output, Input)):
                by_action.setdefault(s.action, []).append(s.successor)
        for s in left:
            partner = dual(s.action)
            for succ in by_action.get(partner, ()) if partner is not None else ():
                out.add(GenStep(TAU, Par(s.successor, succ), True))
    elif isinstance(p, PVar):
        raise OpenProcessError(f"unbound process variable {p.name!r}")
    return frozenset(out)


def gen_steps(p: Process, universe) -> frozenset:
    """All steps derivable by the action-generation rules."""
    _require_closed(p)
    return _gen(p, tuple(sorted(universe)))


@lru_cache(maxsize=1 << 17)
def _res(p: Process, sigma: Resource, universe: tuple) -> frozenset:
    out = set()
    for s in _gen(p, universe):
        v = apply_action(s.action, sigma)
        if isinstance(v, Ok):
            out.add(ResStep(s.action, s.successor, v.next, s.via_comm))
        elif v is IMPERMISSIBLE:
            out.add(ResStep(FAULT, NIL, sigma))
    return frozenset(out)


def res_steps(p: Process, sigma: Resource, universe) -> frozenset:
    """Resource-sensitive steps of ``p`` running with ``sigma``."""
    _require_closed(p)
    return _res(p, sigma, tuple(sorted(universe)))


def top_prefixes(p: Process):
    """Prefixes available without any silent step (through ``|`` only)."""
    if isinstance(p, Sum):
        for pre, _ in p.branches:
            yield pre
    elif isinstance(p, Par):
        yield from top_prefixes(p.left)
        yield from top_prefixes(p.right)


def has_top_new(p: Process) -> bool:
    if isinstance(p, New):
        return True
    if isinstance(p, Par):
        return has_top_new(p.left) or has_top_new(p.right)
    return False


def saturated(p: Process, sigma: Resource, universe) -> bool:
    """A ``new`` is waiting but every channel of the universe is taken.

    Over an unbounded channel supply this never happens; here it marks a
    state whose behaviour is an artifact of the finite universe.
    """
    return has_top_new(p) and sigma.domain() >= frozenset(universe)


def blocked_set(p: Process, sigma: Resource, universe) -> Optional[frozenset]:
    """Directions offered by ``p`` if it can only communicate, else ``None``."""
    _require_closed(p)
    for s in _res(p, sigma, tuple(sorted(universe))):
        if not isinstance(s.action, (Output, Input)):
            return None
    dirs = set()
    for pre in top_prefixes(p):
        c = _const(pre.chan)
        if c in sigma:
            dirs.add((c, SEND_DIR if isinstance(pre, Send) else RECV_DIR))
    return frozenset(dirs)


def clear_caches() -> None:
    _gen.cache_clear()
    _res.cache_clear()


@lru_cache(maxsize=1 << 17)
def canonical(p: Process) -> Process:
    """A representative of ``p`` up to ``P | 0 = P`` and associativity and
    commutativity of ``|``.  Observers key their memo tables on it; both
    trace semantics are invariant under these laws."""
    if not isinstance(p, Par):
        return p
    parts = []
    stack = [p]
    while stack:
        q = stack.pop()
        if isinstance(q, Par):
            stack.append(q.left)
            stack.append(q.right)
        elif q != NIL:
            parts.append(q)
    if not parts:
        return NIL
    parts.sort(key=lambda q: (hash(q), print_process(q)))
    out = parts[0]
    for q in parts[1:]:
        out = Par(out, q)
    return out
