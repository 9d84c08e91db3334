"""Liveness traces: complete traces ending blocked, faulted or cut off.

A liveness trace is a pair ``(actions, terminal)``.  Terminals are a
``Block`` action (blocked on the given directions), ``FAULTED`` (fault or
divergence), ``TRUNCATED`` (the depth bound stopped a live run) and
``UNKNOWN`` (the state budget ran out before divergence could be decided).
Only the first two are compared; the others are reported.
"""

from __future__ import annotations

from typing import Dict, Iterable, Optional

from .opsem import _res, canonical, blocked_set, saturated, step_cost
from .resources import (
    FAULT, IMPERMISSIBLE, Alloc, Block, Fault, Input, Ok, Output, Resource,
    all_resources, apply_action, dual, observe_action, public_lift, render_dirs,
    render_trace, reverse_dirs, RECV_DIR, SEND_DIR,
)
from .safety import Behavior, Denoter, Env, Trie, UnboundVariable, _merge
from .syntax import (
    IChoice, New, OpenProcessError, Par, PVar, Process, Rec, Send, Sum, analyze,
    print_process,
)


class _Marker:
    __slots__ = ("name", "text")

    def __init__(self, name, text):
        self.name = name
        self.text = text

    def __repr__(self):
        return self.name

    def __reduce__(self):
        return (_marker, (self.name,))


def _marker(name):
    return {"TRUNCATED": TRUNCATED, "UNKNOWN": UNKNOWN}[name]


FAULTED = FAULT
TRUNCATED = _Marker("TRUNCATED", "...")
UNKNOWN = _Marker("UNKNOWN", "?")

LCosted = Dict[tuple, int]


def blocked(dirs: Iterable = ()) -> Block:
    return Block(frozenset(dirs))


def is_complete(lt) -> bool:
    return isinstance(lt[1], (Block, Fault))


def render_ltrace(lt) -> str:
    acts, term = lt
    if isinstance(term, _Marker):
        tail = term.text
    elif isinstance(term, Fault):
        tail = "FAULT"
    else:
        tail = "delta{" + render_dirs(term.dirs) + "}"
    head = render_trace(acts)
    return f"{head}, {tail}" if head else tail


def normalize(ts) -> set:
    """Drop every trace that extends a faulted one: divergence and faults
    already admit all continuations."""
    ts = set(ts)
    faulted = {t for t, term in ts if isinstance(term, Fault)}
    if not faulted:
        return ts
    out = set()
    for t, term in ts:
        if any(t[:i] in faulted for i in range(len(t))):
            continue
        if t in faulted and not isinstance(term, Fault):
            continue
        out.add((t, term))
    return out


def _normalize_costed(d: LCosted) -> LCosted:
    keep = normalize(d)
    return {lt: c for lt, c in d.items() if lt in keep}


def comparable(ts) -> frozenset:
    """The complete traces of a set, after fault absorption."""
    return frozenset(lt for lt in normalize(ts) if is_complete(lt))


def has_unknown(ts) -> bool:
    return any(term is UNKNOWN for _, term in ts)


# ---------------------------------------------------------------------------
# Operational observation
# ---------------------------------------------------------------------------

class LObserver:
    def __init__(self, universe: Iterable[str], state_budget: int = 20_000):
        self.universe = tuple(sorted(universe))
        self.state_budget = state_budget
        self._closures: dict = {}
        self._memo: dict = {}

    def closure(self, p: Process, sigma: Resource):
        """Free-step closure, or ``"cycle"`` / ``None`` (budget) markers."""
        key = (p, sigma)
        if key in self._closures:
            return self._closures[key]
        start = (p, sigma)
        succ: dict = {}
        stack = [start]
        result = None
        while stack:
            st = stack.pop()
            if st in succ:
                continue
            if len(succ) >= self.state_budget:
                break
            nxt = []
            for s in _res(st[0], st[1], self.universe):
                if step_cost(s.action, s.via_comm) == 0:
                    nxt.append((canonical(s.successor), s.next_resource))
            succ[st] = nxt
            stack.extend(n for n in nxt if n not in succ)
        else:
            result = "cycle" if _has_cycle(succ) else list(succ)
        self._closures[key] = result
        return result

    def lobserve(self, p: Process, sigma: Resource, n: int) -> frozenset:
        key = (p, sigma, n)
        hit = self._memo.get(key)
        if hit is not None:
            return hit
        states = self.closure(p, sigma)
        if states is None:
            res = frozenset({((), UNKNOWN)})
        elif states == "cycle":
            res = frozenset({((), FAULTED)})
        else:
            out = set()
            for q, s in states:
                steps = _res(q, s, self.universe)
                if any(isinstance(st.action, Fault) for st in steps):
                    out.add(((), FAULTED if n >= 1 else TRUNCATED))
                if saturated(q, s, self.universe):
                    out.add(((), TRUNCATED))
                else:
                    dirs = blocked_set(q, s, self.universe)
                    if dirs is not None:
                        out.add(((), observe_action(Block(dirs), s)[0]))
                for st in steps:
                    c = step_cost(st.action, st.via_comm)
                    if c == 0 or isinstance(st.action, Fault):
                        continue
                    if c > n:
                        out.add(((), TRUNCATED))
                        continue
                    obs = () if st.via_comm else observe_action(st.action, s)
                    for t, term in self.lobserve(canonical(st.successor), st.next_resource, n - c):
                        out.add((obs + t, term))
            res = frozenset(normalize(out))
        self._memo[key] = res
        return res


def _has_cycle(succ: dict) -> bool:
    WHITE, GREY, BLACK = 0, 1, 2
    color = dict.fromkeys(succ, WHITE)
    for root in succ:
        if color[root] != WHITE:
            continue
        stack = [(root, iter(succ[root]))]
        color[root] = GREY
        while stack:
            node, it = stack[-1]
            for m in it:
                cm = color.get(m, BLACK)
                if cm == GREY:
                    return True
                if cm == WHITE:
                    color[m] = GREY
                    stack.append((m, iter(succ[m])))
                    break
            else:
                color[node] = BLACK
                stack.pop()
    return False


def lobserve(p: Process, sigma: Resource, k: int, universe: Iterable[str],
             state_budget: int = 20_000) -> frozenset:
    if not analyze(p).closed:
        raise OpenProcessError(f"process is not closed: {print_process(p)}")
    return LObserver(universe, state_budget).lobserve(p, sigma, k)


# ---------------------------------------------------------------------------
# Denotation
# ---------------------------------------------------------------------------

class LBehavior:
    """Complete traces per resource, paired with the safety behaviour that
    supplies the cost of every prefix (needed to interleave)."""

    __slots__ = ("prefix", "_fn", "_memo", "universe", "bound")

    def __init__(self, prefix: Behavior, fn, universe, bound):
        self.prefix = prefix
        self._fn = fn
        self._memo: dict = {}
        self.universe = universe
        self.bound = bound

    def complete(self, sigma: Resource) -> LCosted:
        hit = self._memo.get(sigma)
        if hit is None:
            hit = self._memo[sigma] = _normalize_costed(self._fn(sigma))
        return hit

    def __call__(self, sigma: Resource) -> frozenset:
        return frozenset(self.complete(sigma))

    def table(self) -> dict:
        return {s: self.complete(s) for s in all_resources(self.universe)}


def _lprefix(a, b: LBehavior, prefix: Behavior) -> LBehavior:
    ca = step_cost(a)
    bound = b.bound

    def fn(sigma):
        out: LCosted = {}
        v = apply_action(a, sigma)
        if isinstance(v, Ok):
            obs = observe_action(a, sigma)
            for (t, term), c in b.complete(v.next).items():
                if c + ca <= bound:
                    _merge(out, (obs + t, term), c + ca)
                else:
                    _merge(out, (obs, TRUNCATED), bound)
        elif v is IMPERMISSIBLE:
            _merge(out, ((), FAULTED if bound >= 1 else TRUNCATED), 1)
        return out

    return LBehavior(prefix, fn, b.universe, bound)


def _block_behavior(dirs: frozenset, universe, bound) -> LBehavior:
    """Executes a blocking action and stops."""
    a = Block(dirs)

    def fn(sigma):
        v = apply_action(a, sigma)
        if isinstance(v, Ok):
            return {((), observe_action(a, sigma)[0]): 0}
        return {((), FAULTED if bound >= 1 else TRUNCATED): 1}

    return LBehavior(None, fn, universe, bound)


def _ljoin(bs, prefix: Behavior, universe, bound) -> LBehavior:
    bs = list(bs)

    def fn(sigma):
        out: LCosted = {}
        for b in bs:
            for lt, c in b.complete(sigma).items():
                _merge(out, lt, c)
        return out

    return LBehavior(prefix, fn, universe, bound)


def _prefix_trie(prefix: Costed, complete: LCosted) -> tuple:
    """Trie over the action parts, with terminals attached to nodes."""
    base = {t: c for t, c in prefix.items() if not (t and isinstance(t[-1], Fault))}
    for (t, _), c in complete.items():
        if t not in base:
            base[t] = c
            for i in range(len(t)):
                base.setdefault(t[:i], c)
    trie = Trie(base)
    terms: dict = {}
    for (t, term), c in complete.items():
        node = trie.node_of(t)
        terms.setdefault(node, {})
        old = terms[node].get(term)
        if old is None or c < old:
            terms[node][term] = c
    return trie, terms


Costed = Dict[tuple, int]


def _lproduct(t1: Trie, k1: dict, t2: Trie, k2: dict, bound: float):
    memo: dict = {}

    def explore(n1: int, n2: int, sigma: Resource) -> LCosted:
        key = (n1, n2, sigma)
        hit = memo.get(key)
        if hit is not None:
            return hit
        out: LCosted = {}
        c_here = t1.cost[n1] + t2.cost[n2]
        if c_here > bound:
            memo[key] = {((), TRUNCATED): bound}
            return memo[key]
        terms1 = k1.get(n1, {})
        terms2 = k2.get(n2, {})
        for terms, other_cost in ((terms1, t2.cost[n2]), (terms2, t1.cost[n1])):
            for term, c in terms.items():
                if isinstance(term, Fault):
                    if c + other_cost <= bound:
                        _merge(out, ((), FAULTED), c + other_cost)
                    else:
                        _merge(out, ((), TRUNCATED), bound)
                elif term is TRUNCATED or term is UNKNOWN:
                    _merge(out, ((), term), bound)
        for d1, c1 in terms1.items():
            if not isinstance(d1, Block):
                continue
            for d2, c2 in terms2.items():
                if not isinstance(d2, Block) or not reverse_dirs(d1.dirs).isdisjoint(d2.dirs):
                    continue
                merged = Block(d1.dirs | d2.dirs)
                v = apply_action(merged, sigma)
                if c1 + c2 > bound:
                    continue
                if isinstance(v, Ok):
                    _merge(out, ((), observe_action(merged, sigma)[0]), c1 + c2)
                else:
                    _merge(out, ((), FAULTED), c1 + c2)
        for side in (0, 1):
            here, other = (t1, t2) if side == 0 else (t2, t1)
            n_here, n_other = (n1, n2) if side == 0 else (n2, n1)
            for a, m in here.edges[n_here].items():
                if isinstance(a, Fault):
                    continue
                c = here.cost[m] + other.cost[n_other]
                if c > bound:
                    _merge(out, ((), TRUNCATED), bound)
                    continue
                v = apply_action(a, sigma)
                if isinstance(v, Ok):
                    obs = observe_action(a, sigma)
                    sub = explore(m, n2, v.next) if side == 0 else explore(n1, m, v.next)
                    for (t, term), ct in sub.items():
                        _merge(out, (obs + t, term), ct)
                elif v is IMPERMISSIBLE:
                    _merge(out, ((), FAULTED), c)
        for a, m1 in t1.edges[n1].items():
            if isinstance(a, (Output, Input)):
                m2 = t2.edges[n2].get(dual(a))
                if m2 is None:
                    continue
                if t1.cost[m1] + t2.cost[m2] > bound:
                    _merge(out, ((), TRUNCATED), bound)
                    continue
                for lt, ct in explore(m1, m2, sigma).items():
                    _merge(out, lt, ct)
        memo[key] = out
        return out

    return explore


def _lparallel(b1: LBehavior, b2: LBehavior, prefix: Behavior) -> LBehavior:
    bound = b1.bound
    tries: dict = {}

    def trie(b, s):
        key = (id(b), s)
        hit = tries.get(key)
        if hit is None:
            hit = tries[key] = _prefix_trie(b.prefix(s), b.complete(s))
        return hit

    def fn(sigma):
        lifted = public_lift(sigma)
        (tr1, k1), (tr2, k2) = trie(b1, lifted), trie(b2, lifted)
        return _lproduct(tr1, k1, tr2, k2, bound)(0, 0, sigma)

    return LBehavior(prefix, fn, b1.universe, bound)


def linterleave(t, u, universe: Iterable[str]) -> LBehavior:
    """Interleavings of two liveness traces.

    Each trace costs one unit per action, and its terminal costs nothing.
    """
    universe = tuple(sorted(universe))
    bound = len(t[0]) + len(u[0]) + 2

    def single(lt):
        acts, term = lt
        pre = {acts[:i]: i for i in range(len(acts) + 1)}
        return _prefix_trie(pre, {(acts, term): len(acts)})

    tr1, k1 = single(t)
    tr2, k2 = single(u)

    def fn(sigma):
        return _lproduct(tr1, k1, tr2, k2, bound)(0, 0, sigma)

    return LBehavior(None, fn, universe, bound)


def dir_of(prefix, rho: Optional[Env] = None) -> tuple:
    rho = rho or Env()
    return (rho.resolve(prefix.chan), SEND_DIR if isinstance(prefix, Send) else RECV_DIR)


class LDenoter:
    """Liveness denotations for one universe and depth bound."""

    def __init__(self, universe: Iterable[str], bound: int, state_budget: int = 20_000,
                 max_rec_iterations: int = 200):
        self.universe = tuple(sorted(universe))
        self.bound = bound
        self.state_budget = state_budget
        self.max_rec_iterations = max_rec_iterations
        self.safety = Denoter(self.universe, bound)
        self._cache: dict = {}
        self.top_fn = lambda s: {((), FAULTED): 0}

    def _senv(self, env: Env) -> Env:
        return Env(env.chan, {X: b.prefix for X, b in env.proc.items()})

    def _key(self, p, env):
        rep = analyze(p)
        try:
            chans = tuple(sorted((x, env.chan[x]) for x in rep.free_chan_vars))
            procs = tuple(sorted(((X, env.proc[X]) for X in rep.free_proc_vars),
                                 key=lambda kv: kv[0]))
        except KeyError as e:
            raise UnboundVariable(f"unbound variable {e.args[0]!r}") from None
        return (p, chans, procs)

    def ldenote(self, p: Process, env: Optional[Env] = None) -> LBehavior:
        env = env or Env()
        key = self._key(p, env)
        hit = self._cache.get(key)
        if hit is None:
            hit = self._cache[key] = self._ldenote(p, env)
        return hit

    def _ldenote(self, p: Process, env: Env) -> LBehavior:
        U, N = self.universe, self.bound
        prefix = self.safety.denote(p, self._senv(env))
        if isinstance(p, Sum):
            parts, dirs = [], set()
            for pre, cont in p.branches:
                dirs.add(dir_of(pre, env))
                c = env.resolve(pre.chan)
                if isinstance(pre, Send):
                    a = Output(c, env.resolve(pre.payload))
                    parts.append(_lprefix(a, self.ldenote(cont, env), None))
                else:
                    for d in U:
                        parts.append(_lprefix(
                            Input(c, d), self.ldenote(cont, env.bind_chan(pre.binder, d)), None))
            parts.append(_block_behavior(frozenset(dirs), U, N))
            return _ljoin(parts, prefix, U, N)
        if isinstance(p, IChoice):
            return _ljoin([self.ldenote(p.left, env), self.ldenote(p.right, env)], prefix, U, N)
        if isinstance(p, New):
            parts = [_lprefix(Alloc(c), self.ldenote(p.body, env.bind_chan(p.binder, c)), None)
                     for c in U]
            inner = _ljoin(parts, prefix, U, N)

            def fn(sigma):
                if sigma.domain() >= frozenset(U):
                    return {((), TRUNCATED): 0}
                return inner.complete(sigma)

            return LBehavior(prefix, fn, U, N)
        if isinstance(p, Par):
            return _lparallel(self.ldenote(p.left, env), self.ldenote(p.right, env), prefix)
        if isinstance(p, Rec):
            return self._gfp(p, env, prefix)
        if isinstance(p, PVar):
            try:
                return env.proc[p.name]
            except KeyError:
                raise UnboundVariable(f"unbound process variable {p.name!r}") from None
        raise TypeError(p)

    def _gfp(self, p: Rec, env: Env, prefix: Behavior) -> LBehavior:
        cur = LBehavior(prefix, self.top_fn, self.universe, self.bound)
        cur_tab = cur.table()
        for _ in range(self.max_rec_iterations):
            nxt = self.ldenote(p.body, env.bind_proc(p.binder, cur))
            nxt = LBehavior(prefix, nxt.complete, self.universe, self.bound)
            nxt_tab = nxt.table()
            if nxt_tab == cur_tab:
                return nxt
            cur, cur_tab = nxt, nxt_tab
        raise RuntimeError("greatest fixpoint did not stabilise")


def ldenote(p: Process, rho: Optional[Env] = None, universe: Iterable[str] = (),
            k: int = 3, state_budget: int = 20_000) -> LBehavior:
    return LDenoter(universe, k, state_budget).ldenote(p, rho)


# ---------------------------------------------------------------------------
# Refinement
# ---------------------------------------------------------------------------

def trace_refines(t, u) -> bool:
    """``t`` refines ``u``: equal, a smaller blocked set, or ``u`` faulted earlier."""
    (ta, tt), (ua, ut) = t, u
    if isinstance(ut, Fault) and ta[:len(ua)] == ua:
        return True
    if ta != ua:
        return False
    if isinstance(tt, Block) and isinstance(ut, Block):
        return ut.dirs <= tt.dirs
    return tt == ut


class IncomparableSets(ValueError):
    pass


def set_refines(T, V) -> bool:
    if has_unknown(T) or has_unknown(V):
        raise IncomparableSets("cannot compare trace sets with unknown entries")
    V = list(V)
    return all(any(trace_refines(t, u) for u in V) for t in T)
