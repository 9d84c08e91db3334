"""Seeded random and exhaustive generation of small closed processes, and the
congruence cross-checks that compare the two semantics on them."""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass
from typing import Iterator, List, Optional, Tuple

from .resources import PRI, PUB, Resource
from .safety import BudgetExhausted, Denoter, Observer
from .syntax import (
    NIL, Const, IChoice, New, Par, PVar, Process, Rec, Recv, Send, Sum,
    Var, analyze, safety_check,
)


@dataclass(frozen=True)
class GenConfig:
    universe: Tuple[str, ...] = ("c1", "c2", "c3")
    max_depth: int = 4
    max_sum_width: int = 2
    allow_rec: bool = True
    seed: int = 0
    pri_rate: float = 0.25

    def __post_init__(self):
        if not self.universe:
            raise ValueError("universe must be nonempty")
        if self.max_depth < 1:
            raise ValueError("max_depth must be at least 1")


class _Gen:
    def __init__(self, cfg: GenConfig, rng: random.Random):
        self.cfg = cfg
        self.rng = rng
        self.fresh = itertools.count()

    def chan(self, cvars):
        pool = [Const(c) for c in self.cfg.universe] + [v for v in cvars]
        return self.rng.choice(pool)

    def prefix(self, cvars):
        vs = tuple(Var(x) for x in cvars)
        if self.rng.random() < 0.5:
            return Send(self.chan(vs), self.chan(vs)), cvars
        x = f"x{next(self.fresh)}"
        return Recv(self.chan(vs), x), cvars + (x,)

    def proc(self, depth, cvars, pvars, guarded, under_rec) -> Process:
        r = self.rng
        if depth <= 0:
            if pvars and guarded and r.random() < 0.5:
                return PVar(r.choice(pvars))
            return NIL
        opts = ["nil", "sum", "sum", "sum", "ichoice", "par", "par"]
        if not under_rec:
            opts += ["new", "new"]
        if self.cfg.allow_rec:
            opts.append("rec")
        if pvars and guarded:
            opts.append("pvar")
        kind = r.choice(opts)
        if kind == "nil":
            return NIL
        if kind == "pvar":
            return PVar(r.choice(pvars))
        if kind == "sum":
            width = r.randint(1, self.cfg.max_sum_width)
            branches = []
            for _ in range(width):
                pre, inner = self.prefix(cvars)
                branches.append((pre, self.proc(depth - 1, inner, pvars, True, under_rec)))
            return Sum(tuple(branches))
        if kind == "ichoice":
            return IChoice(self.proc(depth - 1, cvars, pvars, guarded, under_rec),
                           self.proc(depth - 1, cvars, pvars, guarded, under_rec))
        if kind == "par":
            return Par(self.proc(depth - 1, cvars, pvars, guarded, under_rec),
                       self.proc(depth - 1, cvars, pvars, guarded, under_rec))
        if kind == "new":
            x = f"x{next(self.fresh)}"
            return New(x, self.proc(depth - 1, cvars + (x,), pvars, guarded, under_rec))
        X = f"X{next(self.fresh)}"
        return Rec(X, self.proc(depth - 1, cvars, pvars + (X,), False, True))


def gen_process(cfg: GenConfig, rng: Optional[random.Random] = None) -> Process:
    """A closed process over ``cfg.universe``; recursion is always guarded.

    Without an explicit ``rng`` the result depends only on ``cfg.seed``.
    """
    rng = rng or random.Random(cfg.seed)
    return _Gen(cfg, rng).proc(cfg.max_depth, (), (), False, False)


def gen_open_process(cfg: GenConfig, rng: random.Random, cvars: tuple = (),
                     pvars: tuple = ()) -> Process:
    """Like ``gen_process`` but free to use the given channel and process
    variables.  Process variables only appear guarded."""
    return _Gen(cfg, rng).proc(cfg.max_depth, tuple(cvars), tuple(pvars), False, bool(pvars))


def gen_resource(p: Process, cfg: GenConfig, rng: random.Random) -> Resource:
    """Own every constant of ``p``, mostly publicly."""
    return Resource({c: (PRI if rng.random() < cfg.pri_rate else PUB)
                     for c in sorted(analyze(p).constants)})


@dataclass
class Instance:
    index: int
    process: Process
    sigma: Resource


def corpus(count: int, cfg: GenConfig, k: int, reject_saturating: bool = True,
           silent_budget: Optional[int] = None, state_budget: int = 20_000) -> List[Instance]:
    """``count`` safe instances.  Instances whose run ever finds the universe
    exhausted at a pending ``new``, or whose silent exploration overruns its
    budget, are redrawn."""
    rng = random.Random(cfg.seed)
    out = []
    seen = set()
    attempts = 0
    while len(out) < count:
        attempts += 1
        if attempts > 50 * count + 100:
            raise RuntimeError("generator exhausted: too many rejected draws")
        p = gen_process(cfg, rng)
        sigma = gen_resource(p, cfg, rng)
        if (p, sigma) in seen:
            continue
        assert safety_check(sigma, p)
        if reject_saturating:
            obs = Observer(cfg.universe, silent_budget, state_budget)
            try:
                obs.observe(p, sigma, k)
            except BudgetExhausted:
                continue
            if obs.saw_saturation:
                continue
        seen.add((p, sigma))
        out.append(Instance(len(out), p, sigma))
    return out


# ---------------------------------------------------------------------------
# Exhaustive enumeration
# ---------------------------------------------------------------------------

def enumerate_processes(universe, depth: int, max_sum_width: int = 2,
                        cvars: tuple = (), pvars: tuple = (), guarded: bool = False,
                        under_rec: bool = False) -> Iterator[Process]:
    """Every process up to ``depth`` under the generator's shape rules.

    Binders are named by depth so that the enumeration stays finite.
    """
    from .syntax import Var
    if pvars and guarded:
        for X in pvars:
            yield PVar(X)
    yield NIL
    if depth <= 0:
        return
    chans = [Const(c) for c in sorted(universe)] + [Var(x) for x in cvars]
    x = f"x{len(cvars)}"
    branch_opts = []
    for c in chans:
        for d in chans:
            branch_opts.extend((Send(c, d), q) for q in enumerate_processes(
                universe, depth - 1, max_sum_width, cvars, pvars, True, under_rec))
        branch_opts.extend((Recv(c, x), q) for q in enumerate_processes(
            universe, depth - 1, max_sum_width, cvars + (x,), pvars, True, under_rec))
    for w in range(1, max_sum_width + 1):
        for combo in itertools.product(branch_opts, repeat=w):
            yield Sum(tuple(combo))
    subs = list(enumerate_processes(universe, depth - 1, max_sum_width, cvars, pvars,
                                    guarded, under_rec))
    for a, b in itertools.product(subs, repeat=2):
        yield IChoice(a, b)
        yield Par(a, b)
    if not under_rec:
        for q in enumerate_processes(universe, depth - 1, max_sum_width, cvars + (x,),
                                     pvars, guarded, under_rec):
            yield New(x, q)
    X = f"X{len(pvars)}"
    for q in enumerate_processes(universe, depth - 1, max_sum_width, cvars,
                                 pvars + (X,), False, True):
        yield Rec(X, q)


def productions(p: Process) -> set:
    """Grammar productions used anywhere in ``p``."""
    seen = set()

    def go(p):
        if isinstance(p, Sum):
            seen.add("nil" if not p.branches else "sum")
            if len(p.branches) > 1:
                seen.add("choice")
            for pre, cont in p.branches:
                seen.add("send" if isinstance(pre, Send) else "recv")
                go(cont)
        elif isinstance(p, (IChoice, Par)):
            seen.add("ichoice" if isinstance(p, IChoice) else "par")
            go(p.left)
            go(p.right)
        elif isinstance(p, (New, Rec)):
            seen.add("new" if isinstance(p, New) else "rec")
            go(p.body)
        else:
            seen.add("pvar")

    go(p)
    return seen


ALL_PRODUCTIONS = frozenset(
    {"nil", "sum", "choice", "send", "recv", "ichoice", "par", "new", "rec", "pvar"})


# ---------------------------------------------------------------------------
# Congruence cross-checks
# ---------------------------------------------------------------------------

@dataclass
class CheckReport:
    equal: Optional[bool]
    operational: frozenset = frozenset()
    denotational: frozenset = frozenset()
    diff: frozenset = frozenset()
    skipped: Optional[str] = None

    @property
    def size(self) -> int:
        return len(self.operational)


def congruence_check(p: Process, sigma: Resource, universe, k: int, mode: str = "safety",
                     silent_budget: Optional[int] = None, state_budget: int = 20_000,
                     denoter=None) -> CheckReport:
    """Compare operational and denotational semantics of ``p`` at ``sigma``."""
    if not safety_check(sigma, p):
        return CheckReport(None, skipped="unsafe: some constant is not owned")
    if mode == "safety":
        try:
            op = Observer(universe, silent_budget, state_budget).observe(p, sigma, k)
        except BudgetExhausted as e:
            return CheckReport(None, skipped=str(e))
        den = (denoter or Denoter(universe, k)).denote(p).traces(sigma, k)
    elif mode == "liveness":
        from .liveness import LDenoter, LObserver, UNKNOWN, comparable
        op_all = LObserver(universe, state_budget).lobserve(p, sigma, k)
        if any(term == UNKNOWN for _, term in op_all):
            return CheckReport(None, operational=frozenset(op_all), skipped="unknown")
        op = comparable(op_all)
        den = comparable((denoter or LDenoter(universe, k, state_budget)).ldenote(p)(sigma))
    else:
        raise ValueError(f"unknown mode {mode!r}")
    diff = frozenset(op) ^ frozenset(den)
    return CheckReport(not diff, frozenset(op), frozenset(den), diff)
