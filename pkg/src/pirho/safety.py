"""Safety trace semantics: operational observation and the compositional
denotation, both cut off at a depth bound.

Traces are tuples of observable elements (``Output``, ``Input``,
``BoundOutput``, with ``FAULT`` only last).  A trace set is kept as a dict
from trace to the least number of prefixes fired to produce it, so the two
semantics can be truncated at the same budget and compared exactly.
"""

from __future__ import annotations

from collections import deque
from typing import Callable, Dict, Iterable, Mapping, Optional

from .opsem import _res, canonical, saturated, step_cost
from .resources import (
    FAULT, IMPERMISSIBLE, Alloc, Fault, Input, Ok, Output, Resource,
    all_resources, apply_action, dual, observe_action, primitives, public_lift,
)
from .syntax import (
    Const, IChoice, New, OpenProcessError, Par, PVar, Process, Rec, Send, Sum,
    analyze, print_process,
)

Trace = tuple
Costed = Dict[Trace, int]

EPS: Costed = {(): 0}


class BudgetExhausted(RuntimeError):
    """Silent exploration hit its depth or state budget."""


class UnboundVariable(KeyError):
    pass


# ---------------------------------------------------------------------------
# Operational observation
# ---------------------------------------------------------------------------

class Observer:
    """Computes the observed traces of closed processes by running them."""

    def __init__(self, universe: Iterable[str], silent_budget: Optional[int] = None,
                 state_budget: int = 20_000):
        self.universe = tuple(sorted(universe))
        self.silent_budget = silent_budget
        self.state_budget = state_budget
        self.saw_saturation = False
        self._closures: dict = {}
        self._memo: dict = {}

    def closure(self, p: Process, sigma: Resource, depth_cap: int) -> dict:
        """States reachable by free steps, mapped to their BFS depth."""
        key = (p, sigma)
        hit = self._closures.get(key)
        if hit is not None:
            return hit
        seen = {(p, sigma): 0}
        queue = deque([(p, sigma)])
        while queue:
            q, s = queue.popleft()
            d = seen[(q, s)]
            for st in _res(q, s, self.universe):
                if step_cost(st.action, st.via_comm) != 0:
                    continue
                nxt = (canonical(st.successor), st.next_resource)
                if nxt in seen:
                    continue
                if d + 1 > depth_cap or len(seen) >= self.state_budget:
                    raise BudgetExhausted(
                        f"silent exploration exceeded its budget from {print_process(p)}")
                seen[nxt] = d + 1
                queue.append(nxt)
        self._closures[key] = seen
        return seen

    def observe(self, p: Process, sigma: Resource, n: int) -> frozenset:
        key = (p, sigma, n)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        cap = self.silent_budget if self.silent_budget is not None else 4 * max(n, 1) * len(self.universe)
        out = {()}
        for q, s in self.closure(p, sigma, cap):
            if saturated(q, s, self.universe):
                self.saw_saturation = True
            for st in _res(q, s, self.universe):
                c = step_cost(st.action, st.via_comm)
                if c == 0 or c > n:
                    continue
                if isinstance(st.action, Fault):
                    out.add((FAULT,))
                    continue
                obs = () if st.via_comm else observe_action(st.action, s)
                for t in self.observe(canonical(st.successor), st.next_resource, n - c):
                    out.add(obs + t)
        res = frozenset(out)
        self._memo[key] = res
        return res


def observe_traces(p: Process, sigma: Resource, k: int, universe: Iterable[str],
                   silent_budget: Optional[int] = None, state_budget: int = 20_000) -> frozenset:
    """Observed traces of ``p`` from ``sigma`` within ``k`` fired prefixes.

    Raises ``BudgetExhausted`` when silent exploration does not settle.
    """
    if not analyze(p).closed:
        raise OpenProcessError(f"process is not closed: {print_process(p)}")
    return Observer(universe, silent_budget, state_budget).observe(p, sigma, k)


# ---------------------------------------------------------------------------
# Behaviours
# ---------------------------------------------------------------------------

class Behavior:
    """A lazily tabulated map from resources to costed trace sets."""

    __slots__ = ("_fn", "_memo", "universe", "bound", "__weakref__")

    def __init__(self, fn: Callable[[Resource], Costed], universe: tuple, bound: int):
        self._fn = fn
        self._memo: dict = {}
        self.universe = universe
        self.bound = bound

    def __call__(self, sigma: Resource) -> Costed:
        hit = self._memo.get(sigma)
        if hit is None:
            hit = self._fn(sigma)
            self._memo[sigma] = hit
        return hit

    def traces(self, sigma: Resource, k: Optional[int] = None) -> frozenset:
        d = self(sigma)
        if k is None:
            return frozenset(d)
        return frozenset(t for t, c in d.items() if c <= k)

    def table(self) -> dict:
        return {s: self(s) for s in all_resources(self.universe)}

    def __repr__(self):
        return f"<Behavior over {self.universe} bound {self.bound}>"


def constant_behavior(d: Costed, universe, bound) -> Behavior:
    return Behavior(lambda s: d, tuple(universe), bound)


def _merge(into: Costed, trace: Trace, cost: int) -> None:
    old = into.get(trace)
    if old is None or cost < old:
        into[trace] = cost


def prefix_behavior(a, b: Behavior) -> Behavior:
    """Semantic prefixing: run ``a`` on the resource, then continue with ``b``."""
    ca = step_cost(a)
    bound = b.bound

    def fn(sigma):
        out = dict(EPS)
        v = apply_action(a, sigma)
        if isinstance(v, Ok):
            obs = observe_action(a, sigma)
            for t, c in b(v.next).items():
                if c + ca <= bound:
                    _merge(out, obs + t, c + ca)
        elif v is IMPERMISSIBLE and bound >= 1:
            _merge(out, (FAULT,), 1)
        return out

    return Behavior(fn, b.universe, bound)


def join_behaviors(bs: Iterable[Behavior], universe=None, bound=None) -> Behavior:
    bs = list(bs)
    if not bs:
        if universe is None or bound is None:
            raise ValueError("empty join needs universe and bound")
        return constant_behavior(EPS, universe, bound)
    if len(bs) == 1:
        return bs[0]

    def fn(sigma):
        out = dict(EPS)
        for b in bs:
            for t, c in b(sigma).items():
                _merge(out, t, c)
        return out

    return Behavior(fn, bs[0].universe, bs[0].bound)


# ---------------------------------------------------------------------------
# Interleaving and parallel composition
# ---------------------------------------------------------------------------

class Trie:
    """Prefix tree over primitive actions with the cost of reaching each node."""

    __slots__ = ("cost", "edges", "index")

    def __init__(self, traces: Costed):
        self.cost = [traces.get((), 0)]
        self.edges = [{}]
        self.index = index = {(): 0}
        for t in sorted(traces, key=len):
            self._walk(index, t)
        named = {node: traces.get(t) for t, node in index.items()}
        # a bound send splits into two edges; the middle node inherits the
        # parent's cost.  Costs never drop along a path, so pruning is sound.
        stack = [0]
        while stack:
            n = stack.pop()
            for m in self.edges[n].values():
                own = named.get(m)
                self.cost[m] = self.cost[n] if own is None else max(own, self.cost[n])
                stack.append(m)

    def node_of(self, t) -> int:
        return self._walk(self.index, t)

    def _walk(self, index, t) -> int:
        hit = index.get(t)
        if hit is not None:
            return hit
        node = self._walk(index, t[:-1])
        for a in primitives(t[-1]):
            nxt = self.edges[node].get(a)
            if nxt is None:
                nxt = len(self.cost)
                self.cost.append(0)
                self.edges.append({})
                self.edges[node][a] = nxt
            node = nxt
        index[t] = node
        return node


def _product(t1: Trie, t2: Trie, bound: float):
    """Evaluate all interleavings of the two tries at a resource."""
    memo: dict = {}

    def explore(n1: int, n2: int, sigma: Resource) -> Costed:
        key = (n1, n2, sigma)
        hit = memo.get(key)
        if hit is not None:
            return hit
        out: Costed = {}
        base = t1.cost[n1] + t2.cost[n2]
        if base <= bound:
            out[()] = base
            for side, (here, other) in enumerate(((t1, t2), (t2, t1))):
                n_here, n_other = (n1, n2) if side == 0 else (n2, n1)
                for a, m in here.edges[n_here].items():
                    c = here.cost[m] + other.cost[n_other]
                    if c > bound:
                        continue
                    v = apply_action(a, sigma)
                    if isinstance(v, Ok):
                        obs = observe_action(a, sigma)
                        sub = explore(m, n2, v.next) if side == 0 else explore(n1, m, v.next)
                        for t, ct in sub.items():
                            _merge(out, obs + t, ct)
                    elif v is IMPERMISSIBLE:
                        _merge(out, (FAULT,), c)
            for a, m1 in t1.edges[n1].items():
                if isinstance(a, (Output, Input)):
                    m2 = t2.edges[n2].get(dual(a))
                    if m2 is not None and t1.cost[m1] + t2.cost[m2] <= bound:
                        for t, ct in explore(m1, m2, sigma).items():
                            _merge(out, t, ct)
        memo[key] = out
        return out

    return explore


def _single_trace_costs(t: Trace) -> Costed:
    return {t[:i]: i for i in range(len(t) + 1)}


def interleave_traces(t: Trace, u: Trace, universe: Iterable[str]) -> Behavior:
    """All interleavings of two traces, including communications between them."""
    t1, t2 = Trie(_single_trace_costs(t)), Trie(_single_trace_costs(u))
    bound = len(t) + len(u)
    universe = tuple(sorted(universe))

    def fn(sigma):
        return _product(t1, t2, bound)(0, 0, sigma)

    return Behavior(fn, universe, bound)


def parallel_behaviors(b1: Behavior, b2: Behavior) -> Behavior:
    """Run both sides on the public lift, then interleave at the real resource."""
    bound = b1.bound
    tries: dict = {}

    def trie(b, s):
        key = (id(b), s)
        hit = tries.get(key)
        if hit is None:
            hit = tries[key] = Trie(b(s))
        return hit

    def fn(sigma):
        lifted = public_lift(sigma)
        return _product(trie(b1, lifted), trie(b2, lifted), bound)(0, 0, sigma)

    return Behavior(fn, b1.universe, bound)


# ---------------------------------------------------------------------------
# Denotation
# ---------------------------------------------------------------------------

class Env:
    """Channel and process-variable bindings."""

    __slots__ = ("chan", "proc")

    def __init__(self, chan: Optional[Mapping[str, str]] = None,
                 proc: Optional[Mapping[str, object]] = None):
        self.chan = dict(chan or {})
        self.proc = dict(proc or {})

    def bind_chan(self, x: str, c: str) -> "Env":
        e = Env(self.chan, self.proc)
        e.chan[x] = c
        return e

    def bind_proc(self, X: str, b) -> "Env":
        e = Env(self.chan, self.proc)
        e.proc[X] = b
        return e

    def resolve(self, e) -> str:
        if isinstance(e, Const):
            return e.name
        try:
            return self.chan[e.name]
        except KeyError:
            raise UnboundVariable(f"unbound channel variable {e.name!r}") from None


class Denoter:
    """Computes denotations for one universe and depth bound, with sharing."""

    def __init__(self, universe: Iterable[str], bound: int, max_rec_iterations: int = 200):
        self.universe = tuple(sorted(universe))
        self.bound = bound
        self.max_rec_iterations = max_rec_iterations
        self._cache: dict = {}
        self.eps = constant_behavior(EPS, self.universe, bound)

    def _key(self, p: Process, env: Env):
        rep = analyze(p)
        try:
            chans = tuple(sorted((x, env.chan[x]) for x in rep.free_chan_vars))
            procs = tuple(sorted(((X, env.proc[X]) for X in rep.free_proc_vars),
                                 key=lambda kv: kv[0]))
        except KeyError as e:
            raise UnboundVariable(f"unbound variable {e.args[0]!r}") from None
        return (p, chans, procs)

    def denote(self, p: Process, env: Optional[Env] = None) -> Behavior:
        env = env or Env()
        key = self._key(p, env)
        hit = self._cache.get(key)
        if hit is None:
            hit = self._cache[key] = self._denote(p, env)
        return hit

    def _denote(self, p: Process, env: Env) -> Behavior:
        if isinstance(p, Sum):
            parts = []
            for pre, cont in p.branches:
                c = env.resolve(pre.chan)
                if isinstance(pre, Send):
                    d = env.resolve(pre.payload)
                    parts.append(prefix_behavior(Output(c, d), self.denote(cont, env)))
                else:
                    for d in self.universe:
                        parts.append(prefix_behavior(
                            Input(c, d), self.denote(cont, env.bind_chan(pre.binder, d))))
            return join_behaviors(parts, self.universe, self.bound)
        if isinstance(p, IChoice):
            return join_behaviors([self.denote(p.left, env), self.denote(p.right, env)])
        if isinstance(p, New):
            return join_behaviors(
                [prefix_behavior(Alloc(c), self.denote(p.body, env.bind_chan(p.binder, c)))
                 for c in self.universe], self.universe, self.bound)
        if isinstance(p, Par):
            return parallel_behaviors(self.denote(p.left, env), self.denote(p.right, env))
        if isinstance(p, Rec):
            return self._lfp(p, env)
        if isinstance(p, PVar):
            try:
                return env.proc[p.name]
            except KeyError:
                raise UnboundVariable(f"unbound process variable {p.name!r}") from None
        raise TypeError(p)

    def _lfp(self, p: Rec, env: Env) -> Behavior:
        cur = self.eps
        cur_tab = cur.table()
        for _ in range(self.max_rec_iterations):
            nxt = self.denote(p.body, env.bind_proc(p.binder, cur))
            nxt_tab = nxt.table()
            if nxt_tab == cur_tab:
                return nxt
            cur, cur_tab = nxt, nxt_tab
        raise RuntimeError("recursion did not stabilise")


def denote(p: Process, rho: Optional[Env] = None, universe: Iterable[str] = (),
           k: int = 4) -> Behavior:
    return Denoter(universe, k).denote(p, rho)


def congruence_diff(p: Process, sigma: Resource, universe, k: int,
                    silent_budget: Optional[int] = None, state_budget: int = 20_000,
                    denoter: Optional[Denoter] = None):
    """Both safety semantics of ``p`` at ``sigma``, and their symmetric difference."""
    op = observe_traces(p, sigma, k, universe, silent_budget, state_budget)
    den = (denoter or Denoter(universe, k)).denote(p).traces(sigma, k)
    return op, den, op ^ den
