"""Resource assertions and assertion-qualified refinement between processes.

``check_refinement`` decides ``Gamma |= p |> P <= Q`` at a depth bound by
enumerating channel environments and resources.  Containment is checked
cost-respecting: a trace that ``P`` produces by firing ``c`` prefixes must
be producible by ``Q`` within ``c + slack`` prefixes.  With ``slack = 0`` this
relation is preserved by every process constructor, so bounded checks of
the proof rules cannot be fooled by truncation.
"""

from __future__ import annotations

import itertools
import random
import re
from dataclasses import dataclass, field
from typing import Iterable, List, Optional, Sequence, Tuple

from .resources import (
    FAULT, PRI, PUB, BoundOutput, Input, Ok, Output, Resource, all_resources,
    apply_action, render_resource, render_trace,
)
from .safety import Behavior, Denoter, Env, UnboundVariable
from .syntax import (
    IChoice, New, Par, PVar, Process, Rec, Recv, Send, Sum, Var, analyze,
    print_process,
)


# ---------------------------------------------------------------------------
# Assertions
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ATrue:
    pass


@dataclass(frozen=True)
class AFalse:
    pass


@dataclass(frozen=True)
class And:
    left: object
    right: object


@dataclass(frozen=True)
class Or:
    left: object
    right: object


@dataclass(frozen=True)
class Star:
    left: object
    right: object


@dataclass(frozen=True)
class Pub:
    var: str


@dataclass(frozen=True)
class Pri:
    var: str


@dataclass(frozen=True)
class Eq:
    left: str
    right: str


@dataclass(frozen=True)
class Neq:
    left: str
    right: str


TRUE = ATrue()
FALSE = AFalse()


def Known(x: str) -> Or:
    return Or(Pub(x), Pri(x))


def assertion_vars(p) -> frozenset:
    if isinstance(p, (Pub, Pri)):
        return frozenset({p.var})
    if isinstance(p, (Eq, Neq)):
        return frozenset({p.left, p.right})
    if isinstance(p, (And, Or, Star)):
        return assertion_vars(p.left) | assertion_vars(p.right)
    return frozenset()


def _own(rho, x):
    try:
        return rho[x]
    except KeyError:
        raise UnboundVariable(f"unbound channel variable {x!r}") from None


def disjoint_splits(sigma: Resource):
    items = sigma.items()
    for mask in itertools.product((0, 1), repeat=len(items)):
        yield (Resource(kv for kv, m in zip(items, mask) if m == 0),
               Resource(kv for kv, m in zip(items, mask) if m == 1))


def eval_assertion(rho, sigma: Resource, p) -> bool:
    """``rho, sigma |= p``; ``rho`` maps channel variables to constants."""
    if isinstance(rho, Env):
        rho = rho.chan
    if isinstance(p, ATrue):
        return True
    if isinstance(p, AFalse):
        return False
    if isinstance(p, And):
        return eval_assertion(rho, sigma, p.left) and eval_assertion(rho, sigma, p.right)
    if isinstance(p, Or):
        return eval_assertion(rho, sigma, p.left) or eval_assertion(rho, sigma, p.right)
    if isinstance(p, Star):
        return any(eval_assertion(rho, s1, p.left) and eval_assertion(rho, s2, p.right)
                   for s1, s2 in disjoint_splits(sigma))
    if isinstance(p, Pub):
        return sigma.get(_own(rho, p.var)) == PUB
    if isinstance(p, Pri):
        return sigma.get(_own(rho, p.var)) == PRI
    if isinstance(p, Eq):
        return _own(rho, p.left) == _own(rho, p.right)
    if isinstance(p, Neq):
        return _own(rho, p.left) != _own(rho, p.right)
    raise TypeError(f"not an assertion: {p!r}")


def lift_assertion(p):
    """Public lifting: every ``x pri`` becomes ``x pub``."""
    if isinstance(p, Pri):
        return Pub(p.var)
    if isinstance(p, (And, Or, Star)):
        return type(p)(lift_assertion(p.left), lift_assertion(p.right))
    return p


def entails(p, q, universe: Iterable[str], variables: Iterable[str] = ()) -> bool:
    """``p |= q`` over every environment and resource within ``universe``."""
    universe = tuple(sorted(universe))
    vs = sorted(set(variables) | assertion_vars(p) | assertion_vars(q))
    sigmas = all_resources(universe)
    for combo in itertools.product(universe, repeat=len(vs)):
        rho = dict(zip(vs, combo))
        for s in sigmas:
            if eval_assertion(rho, s, p) and not eval_assertion(rho, s, q):
                return False
    return True


_ASSERT_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<and>/\\)
  | (?P<or>\\/)
  | (?P<star>\*)
  | (?P<lp>\()
  | (?P<rp>\))
  | (?P<own>[a-z][A-Za-z0-9_']*@(?:pub|pri|known))
  | (?P<neq>[a-z][A-Za-z0-9_']*\s*!=\s*[a-z][A-Za-z0-9_']*)
  | (?P<eq>[a-z][A-Za-z0-9_']*\s*=\s*[a-z][A-Za-z0-9_']*)
  | (?P<kw>true|false)
""", re.VERBOSE)


class AssertionSyntaxError(ValueError):
    pass


def parse_assertion(text: str):
    toks = []
    pos = 0
    while pos < len(text):
        m = _ASSERT_TOKEN.match(text, pos)
        if not m:
            raise AssertionSyntaxError(f"unexpected input at column {pos + 1}: {text[pos:pos + 10]!r}")
        pos = m.end()
        if m.lastgroup != "ws":
            toks.append((m.lastgroup, m.group()))
    toks.append(("eof", ""))
    i = 0

    def peek():
        return toks[i][0]

    def take(kind):
        nonlocal i
        if toks[i][0] != kind:
            raise AssertionSyntaxError(f"expected {kind}, found {toks[i][1]!r}")
        i += 1
        return toks[i - 1][1]

    def disj():
        left = conj()
        while peek() == "or":
            take("or")
            left = Or(left, conj())
        return left

    def conj():
        left = star()
        while peek() == "and":
            take("and")
            left = And(left, star())
        return left

    def star():
        left = atom()
        while peek() == "star":
            take("star")
            left = Star(left, atom())
        return left

    def atom():
        kind = peek()
        if kind == "lp":
            take("lp")
            a = disj()
            take("rp")
            return a
        if kind == "kw":
            return TRUE if take("kw") == "true" else FALSE
        if kind == "own":
            x, own = take("own").split("@")
            return {"pub": Pub, "pri": Pri}[own](x) if own != "known" else Known(x)
        if kind == "neq":
            x, y = (s.strip() for s in take("neq").split("!="))
            return Neq(x, y)
        if kind == "eq":
            x, y = (s.strip() for s in take("eq").split("="))
            return Eq(x, y)
        raise AssertionSyntaxError(f"unexpected {toks[i][1]!r}")

    result = disj()
    take("eof")
    return result


def render_assertion(p, level: int = 0) -> str:
    """Concrete syntax; levels are 0 for \\/, 1 for /\\, 2 for *."""
    if isinstance(p, ATrue):
        return "true"
    if isinstance(p, AFalse):
        return "false"
    if isinstance(p, Or) and p.left == Pub(getattr(p.right, "var", None)) and isinstance(p.right, Pri):
        return f"{p.right.var}@known"
    if isinstance(p, Pub):
        return f"{p.var}@pub"
    if isinstance(p, Pri):
        return f"{p.var}@pri"
    if isinstance(p, Eq):
        return f"{p.left}={p.right}"
    if isinstance(p, Neq):
        return f"{p.left}!={p.right}"
    ops = {Or: (" \\/ ", 0), And: (" /\\ ", 1), Star: (" * ", 2)}
    sym, mine = ops[type(p)]
    s = render_assertion(p.left, mine) + sym + render_assertion(p.right, mine + 1)
    return s if level <= mine else f"({s})"


# ---------------------------------------------------------------------------
# Refinement checking
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ContextEntry:
    assertion: object
    proc_var: str
    bound: Process


@dataclass
class RefinementVerdict:
    holds: bool
    counterexample: Optional[Tuple[dict, Resource, tuple]] = None
    exhausted: bool = True
    checked: int = 0

    def describe(self) -> str:
        if self.holds:
            return "HOLDS" if self.exhausted else "HOLDS (enumeration not exhausted)"
        rho, sigma, t = self.counterexample
        env = ", ".join(f"{x}=#{c}" for x, c in sorted(rho.items()))
        return (f"FAILS\nenv: {{{env}}}\nsigma: {render_resource(sigma)}\n"
                f"trace: {render_trace(t)}")


class Refiner:
    """Shared denotation caches for many refinement checks at one bound."""

    def __init__(self, universe: Iterable[str], k: int, slack: int = 0):
        self.universe = tuple(sorted(universe))
        self.k = k
        self.slack = slack
        self.den_p = Denoter(self.universe, k)
        self.den_q = Denoter(self.universe, k + slack) if slack else self.den_p
        self._chaos: dict = {}

    def chaos(self, bound: int) -> Behavior:
        """The top behaviour: every trace, each element costing one prefix."""
        hit = self._chaos.get(bound)
        if hit is None:
            U = self.universe
            alphabet = ([Output(c, d) for c in U for d in U] + [Input(c, d) for c in U for d in U]
                        + [BoundOutput(c, d) for c in U for d in U])
            table = {(): 0}
            layer = [()]
            for n in range(1, bound + 1):
                nxt = []
                for t in layer:
                    table[t + (FAULT,)] = n
                    for a in alphabet:
                        nxt.append(t + (a,))
                for t in nxt:
                    table[t] = n
                layer = nxt
            hit = self._chaos[bound] = Behavior(lambda s, d=table: d, U, bound)
        return hit

    def _context_env(self, gamma: Sequence[ContextEntry], rho: dict, den: Denoter) -> Env:
        env = Env(rho)
        for entry in gamma:
            bound_beh = den.denote(entry.bound, env)
            top = self.chaos(den.bound)
            a = entry.assertion

            def fn(sigma, a=a, bb=bound_beh, top=top):
                return bb(sigma) if eval_assertion(rho, sigma, a) else top(sigma)

            env = env.bind_proc(entry.proc_var, Behavior(fn, self.universe, den.bound))
        return env

    def check(self, gamma: Sequence[ContextEntry], p, P: Process, Q: Process,
              cap: int = 100_000) -> RefinementVerdict:
        gamma = list(gamma or [])
        names = set(assertion_vars(p))
        for proc in (P, Q):
            names |= analyze(proc).free_chan_vars
        for e in gamma:
            names |= assertion_vars(e.assertion) | analyze(e.bound).free_chan_vars
        bound_pvars = {e.proc_var for e in gamma}
        for proc in (P, Q):
            missing = analyze(proc).free_proc_vars - bound_pvars
            if missing:
                raise UnboundVariable(f"process variables not in context: {sorted(missing)}")
        vs = sorted(names)
        sigmas = all_resources(self.universe)
        checked = 0
        for combo in itertools.product(self.universe, repeat=len(vs)):
            rho = dict(zip(vs, combo))
            env_p = self._context_env(gamma, rho, self.den_p)
            env_q = self._context_env(gamma, rho, self.den_q) if self.slack else env_p
            bp = self.den_p.denote(P, env_p)
            bq = self.den_q.denote(Q, env_q)
            for s in sigmas:
                if checked >= cap:
                    return RefinementVerdict(True, exhausted=False, checked=checked)
                if not eval_assertion(rho, s, p):
                    continue
                checked += 1
                tq = bq(s)
                bad = [t for t, c in bp(s).items()
                       if c <= self.k and tq.get(t, c + self.slack + 1) > c + self.slack]
                if bad:
                    t = min(bad, key=lambda t: (len(t), render_trace(t)))
                    return RefinementVerdict(False, (rho, s, t), checked=checked)
        return RefinementVerdict(True, checked=checked)


def check_refinement(gamma, p, P: Process, Q: Process, universe: Iterable[str], k: int,
                     slack: int = 0, cap: int = 100_000,
                     refiner: Optional[Refiner] = None) -> RefinementVerdict:
    """Decide ``gamma |= p |> P <= Q`` by enumeration at depth ``k``."""
    refiner = refiner or Refiner(universe, k, slack)
    return refiner.check(gamma, p, P, Q, cap)


# ---------------------------------------------------------------------------
# Proof rules
# ---------------------------------------------------------------------------

RULES = ("send-pub", "send-pri", "recv-pub", "recv-pri", "new", "par",
         "hypothesis", "rec", "consequence")


@dataclass
class RuleReport:
    rule: str
    samples: int
    premises_held: int = 0
    violations: List[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations


def random_assertion(rng: random.Random, variables: Sequence[str], depth: int = 2):
    if depth <= 0 or rng.random() < 0.4:
        kind = rng.choice(["true", "pub", "pri", "known", "eq", "neq", "pub", "known"])
        if kind == "true" or not variables:
            return TRUE
        x = rng.choice(variables)
        if kind == "pub":
            return Pub(x)
        if kind == "pri":
            return Pri(x)
        if kind == "known":
            return Known(x)
        y = rng.choice(variables)
        return Eq(x, y) if kind == "eq" else Neq(x, y)
    ctor = rng.choice([And, Or, Star, And])
    return ctor(random_assertion(rng, variables, depth - 1),
                random_assertion(rng, variables, depth - 1))


class _RuleSampler:
    def __init__(self, universe, k, seed, depth=2):
        from .generator import GenConfig, _Gen
        self.rng = random.Random(seed)
        self.cfg = GenConfig(universe=tuple(sorted(universe)), max_depth=depth, seed=seed)
        self.gen = _Gen(self.cfg, self.rng)
        self.refiner = Refiner(universe, k)
        self.universe = tuple(sorted(universe))

    def proc(self, free=("x", "y"), pvars=(), guarded=False, depth=None):
        d = self.cfg.max_depth if depth is None else depth
        return self.gen.proc(d, tuple(free), tuple(pvars), guarded, bool(pvars))

    def related(self, P, free=("x", "y"), pvars=()):
        """A process likely, but not certain, to be refined by ``P``."""
        r = self.rng.random()
        if r < 0.35:
            return P
        if r < 0.7:
            other = self.proc(free, pvars, guarded=True)
            return IChoice(P, other) if self.rng.random() < 0.5 else IChoice(other, P)
        return self.proc(free, pvars, guarded=True)

    def assertion(self, variables=("x", "y")):
        return random_assertion(self.rng, list(variables))

    def holds(self, gamma, p, P, Q) -> bool:
        return self.refiner.check(gamma, p, P, Q).holds


def _send(x, y, P):
    return Sum(((Send(Var(x), Var(y)), P),))


def _recv(x, y, P):
    return Sum(((Recv(Var(x), y), P),))


def _fmt(**parts) -> str:
    out = []
    for k, v in parts.items():
        if isinstance(v, (ATrue, AFalse, And, Or, Star, Pub, Pri, Eq, Neq)):
            out.append(f"{k}={render_assertion(v)}")
        elif hasattr(v, "__dataclass_fields__") and not isinstance(v, ContextEntry):
            out.append(f"{k}={print_process(v)}")
        else:
            out.append(f"{k}={v!r}")
    return "; ".join(out)


def _sample_rule(rule: str, s: _RuleSampler, report: RuleReport) -> None:
    """One instantiation of ``rule``: if its premises hold, so must its conclusion."""
    xs = ("x", "y")
    if rule == "send-pub":
        p = s.assertion(("z",))
        P = s.proc(("x", "y", "z"))
        Q = s.related(P, ("x", "y", "z"))
        pre = Star(p, And(Pub("x"), Pub("y")))
        if not s.holds([], pre, P, Q):
            return
        concl = (Star(p, And(Pub("x"), Known("y"))), _send("x", "y", P), _send("x", "y", Q))
    elif rule == "send-pri":
        concl = (And(Pri("x"), Known("y")), _send("x", "y", s.proc(xs)), s.proc(xs))
    elif rule == "recv-pub":
        p = s.assertion(("z",))
        P = s.proc(("x", "y", "z"))
        Q = s.related(P, ("x", "y", "z"))
        if not s.holds([], And(Star(p, Pub("x")), Pub("y")), P, Q):
            return
        concl = (Star(p, Pub("x")), _recv("x", "y", P), _recv("x", "y", Q))
    elif rule == "recv-pri":
        concl = (Pri("x"), _recv("x", "y", s.proc(xs)), s.proc(xs))
    elif rule == "new":
        p = s.assertion(("y",))
        P = s.proc(xs)
        Q = s.related(P, xs)
        if not s.holds([], Star(p, Pri("x")), P, Q):
            return
        concl = (p, New("x", P), New("x", Q))
    elif rule == "par":
        p = s.assertion(xs)
        P1, P2 = s.proc(xs), s.proc(xs)
        Q1, Q2 = s.related(P1, xs), s.related(P2, xs)
        lp = lift_assertion(p)
        if not (s.holds([], lp, P1, Q1) and s.holds([], lp, P2, Q2)):
            return
        concl = (p, Par(P1, P2), Par(Q1, Q2))
    elif rule == "hypothesis":
        p = s.assertion(xs)
        B = s.proc(xs)
        gamma = [ContextEntry(p, "X", B)]
        report.premises_held += 1
        v = s.refiner.check(gamma, p, PVar("X"), B)
        if not v.holds:
            report.violations.append(_fmt(p=p, bound=B))
        return
    elif rule == "rec":
        p = s.assertion(xs) if s.rng.random() < 0.5 else TRUE
        body = s.proc(xs, pvars=("X",))
        R = Rec("X", body)
        r = s.rng.random()
        if r < 0.4:
            Q = R
        elif r < 0.7:
            Q = IChoice(R, s.proc(xs, guarded=True))
        else:
            Q = s.proc(xs, guarded=True)
        if not s.holds([ContextEntry(p, "X", Q)], p, body, Q):
            return
        concl = (p, R, Q)
    elif rule == "consequence":
        p2 = s.assertion(xs)
        p = And(p2, s.assertion(xs)) if s.rng.random() < 0.6 else s.assertion(xs)
        if not entails(p, p2, s.universe, xs):
            return
        P = s.proc(xs)
        Q = s.related(P, xs)
        if not s.holds([], p2, P, Q):
            return
        concl = (p, P, Q)
    else:
        raise ValueError(f"unknown rule {rule!r}")
    report.premises_held += 1
    a, P, Q = concl
    v = s.refiner.check([], a, P, Q)
    if not v.holds:
        rho, sigma, t = v.counterexample
        report.violations.append(
            _fmt(assertion=a, P=P, Q=Q) + f"; env={rho}; sigma={render_resource(sigma)}; "
            f"trace={render_trace(t)}")


def check_rule_soundness(rule_id: str, samples: int = 100, universe: Iterable[str] = ("c", "d"),
                         k: int = 3, seed: int = 0, depth: int = 2) -> RuleReport:
    if rule_id not in RULES:
        raise ValueError(f"unknown rule {rule_id!r}; expected one of {', '.join(RULES)}")
    sampler = _RuleSampler(universe, k, seed, depth)
    report = RuleReport(rule_id, samples)
    for _ in range(samples):
        _sample_rule(rule_id, sampler, report)
    return report


# ---------------------------------------------------------------------------
# The send Hoare triple and the interference-free expansion law
# ---------------------------------------------------------------------------

def send_triple_holds(frame, universe: Iterable[str], variables=("x", "y", "z")) -> Tuple[bool, int]:
    """``{frame * (x pub /\\ y known)} x!y {frame * (x pub /\\ y pub)}`` for all
    environments and resources.  Returns the verdict and the number of
    pre-states checked."""
    universe = tuple(sorted(universe))
    vs = sorted(set(variables) | assertion_vars(frame))
    pre = Star(frame, And(Pub("x"), Known("y")))
    post = Star(frame, And(Pub("x"), Pub("y")))
    n = 0
    for combo in itertools.product(universe, repeat=len(vs)):
        rho = dict(zip(vs, combo))
        for s in all_resources(universe):
            if not eval_assertion(rho, s, pre):
                continue
            n += 1
            v = apply_action(Output(rho["x"], rho["y"]), s)
            if not (isinstance(v, Ok) and eval_assertion(rho, v.next, post)):
                return False, n
    return True, n


def expansion_instance(P: Process, Q: Process, z: str = "z") -> Tuple[Process, Process]:
    """``x!y.P | x(z).Q`` and ``P | Q{y/z}``."""
    lhs = Par(_send("x", "y", P), _recv("x", z, Q))
    rhs = Par(P, _subst_var(Q, z, "y"))
    return lhs, rhs


def _subst_var(p: Process, z: str, y: str) -> Process:
    """Rename free channel variable ``z`` to variable ``y`` (``y`` must not be rebound)."""
    def ch(e):
        return Var(y) if isinstance(e, Var) and e.name == z else e

    def go(p):
        if isinstance(p, Sum):
            out = []
            for pre, cont in p.branches:
                if isinstance(pre, Send):
                    out.append((Send(ch(pre.chan), ch(pre.payload)), go(cont)))
                else:
                    out.append((Recv(ch(pre.chan), pre.binder),
                                cont if pre.binder == z else go(cont)))
            return Sum(tuple(out))
        if isinstance(p, (IChoice, Par)):
            return type(p)(go(p.left), go(p.right))
        if isinstance(p, New):
            return p if p.binder == z else New(p.binder, go(p.body))
        if isinstance(p, Rec):
            return Rec(p.binder, go(p.body))
        return p

    return go(p)
