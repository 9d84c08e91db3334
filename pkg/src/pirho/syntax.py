"""Process syntax: AST, parser, printer, substitution and name analysis.

Concrete grammar, loosest binding first::

    P ::= P | P          parallel
        | P (+) P        internal choice
        | B + B + ...    external choice over prefixed terms
        | new x. P       extends as far right as possible
        | rec X. P       extends as far right as possible
        | pi.P | 0 | X | (P)
    pi ::= e!e' | e?(x)
    e  ::= #const | var

Channel constants carry a leading ``#``; channel variables start lowercase,
process variables uppercase.  ``--`` starts a comment.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Mapping, Optional, Union

__all__ = [
    "Var", "Const", "ChanExpr", "Send", "Recv", "Prefix",
    "Sum", "IChoice", "New", "Par", "Rec", "PVar", "Process", "NIL",
    "NameReport", "ParseError", "LexError", "OpenProcessError",
    "parse", "print_process", "substitute", "analyze", "safety_check",
    "constants", "is_closed",
]


# ---------------------------------------------------------------------------
# AST
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    name: str


ChanExpr = Union[Var, Const]


@dataclass(frozen=True)
class Send:
    chan: ChanExpr
    payload: ChanExpr


@dataclass(frozen=True)
class Recv:
    chan: ChanExpr
    binder: str


Prefix = Union[Send, Recv]


class _Node:
    """Mixin caching the structural hash; processes are used as memo keys."""

    __slots__ = ()

    def __hash__(self):
        try:
            return self.__dict__["_hash"]
        except KeyError:
            h = hash((type(self).__name__,) + tuple(
                getattr(self, f) for f in self.__dataclass_fields__))
            self.__dict__["_hash"] = h
            return h

    def __str__(self):
        return print_process(self)


@dataclass(frozen=True, eq=True)
class Sum(_Node):
    branches: tuple = ()

    __hash__ = _Node.__hash__


@dataclass(frozen=True, eq=True)
class IChoice(_Node):
    left: "Process"
    right: "Process"

    __hash__ = _Node.__hash__


@dataclass(frozen=True, eq=True)
class New(_Node):
    binder: str
    body: "Process"

    __hash__ = _Node.__hash__


@dataclass(frozen=True, eq=True)
class Par(_Node):
    left: "Process"
    right: "Process"

    __hash__ = _Node.__hash__


@dataclass(frozen=True, eq=True)
class Rec(_Node):
    binder: str
    body: "Process"

    __hash__ = _Node.__hash__


@dataclass(frozen=True, eq=True)
class PVar(_Node):
    name: str

    __hash__ = _Node.__hash__


Process = Union[Sum, IChoice, New, Par, Rec, PVar]

NIL = Sum(())


@dataclass(frozen=True)
class NameReport:
    free_chan_vars: frozenset = field(default_factory=frozenset)
    free_proc_vars: frozenset = field(default_factory=frozenset)
    constants: frozenset = field(default_factory=frozenset)

    @property
    def closed(self) -> bool:
        return not self.free_chan_vars and not self.free_proc_vars


class ParseError(ValueError):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class LexError(ParseError):
    pass


class OpenProcessError(ValueError):
    """Raised when an operation requires a closed process."""


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>--[^\n]*)
  | (?P<ichoice>\(\+\))
  | (?P<const>\#[A-Za-z0-9_][A-Za-z0-9_']*)
  | (?P<badconst>\#)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<zero>0(?![0-9A-Za-z_]))
  | (?P<punct>[!?().+|])
""", re.VERBOSE)

_KEYWORDS = {"new", "rec"}


@dataclass(frozen=True)
class _Tok:
    kind: str
    text: str
    line: int
    col: int


def _tokenize(text: str) -> list:
    toks = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        col = pos - line_start + 1
        if m is None or m.lastgroup == "badconst":
            raise LexError(f"unexpected character {text[pos]!r}", line, col)
        kind, s = m.lastgroup, m.group()
        if kind == "ident":
            if s in _KEYWORDS:
                kind = s
            elif s[0].isupper():
                kind = "pvar"
            elif s[0].islower():
                kind = "var"
            else:
                raise LexError(f"malformed identifier {s!r}", line, col)
        if kind not in ("ws", "comment"):
            toks.append(_Tok(kind if kind != "punct" else s, s, line, col))
        nl = s.count("\n")
        if nl:
            line += nl
            line_start = pos + s.rfind("\n") + 1
        pos = m.end()
    toks.append(_Tok("eof", "", line, pos - line_start + 1))
    return toks


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------

class _Parser:
    def __init__(self, text: str, universe: Optional[Iterable[str]]):
        self.toks = _tokenize(text)
        self.i = 0
        self.universe = None if universe is None else frozenset(universe)

    @property
    def tok(self) -> _Tok:
        return self.toks[self.i]

    def error(self, msg: str, tok: Optional[_Tok] = None):
        tok = tok or self.tok
        return ParseError(msg, tok.line, tok.col)

    def expect(self, kind: str) -> _Tok:
        tok = self.tok
        if tok.kind != kind:
            shown = tok.text or "end of input"
            raise self.error(f"expected {kind!r}, found {shown!r}")
        self.i += 1
        return tok

    def parse(self):
        p = self.par()
        if self.tok.kind != "eof":
            raise self.error(f"unexpected {self.tok.text!r}")
        return p

    def par(self):
        p = self.ichoice()
        while self.tok.kind == "|":
            self.i += 1
            p = Par(p, self.ichoice())
        return p

    def ichoice(self):
        p = self.sum()
        while self.tok.kind == "ichoice":
            self.i += 1
            p = IChoice(p, self.sum())
        return p

    def sum(self):
        start = self.tok
        p = self.unary()
        if self.tok.kind != "+":
            return p
        branches = [self._single_branch(p, start)]
        while self.tok.kind == "+":
            self.i += 1
            start = self.tok
            branches.append(self._single_branch(self.unary(), start))
        return Sum(tuple(branches))

    def _single_branch(self, p, tok):
        if isinstance(p, Sum) and len(p.branches) == 1:
            return p.branches[0]
        raise self.error("'+' combines prefixed terms only", tok)

    def unary(self):
        tok = self.tok
        if tok.kind == "zero":
            self.i += 1
            return NIL
        if tok.kind == "(":
            self.i += 1
            p = self.par()
            self.expect(")")
            return p
        if tok.kind == "new":
            self.i += 1
            x = self.expect("var").text
            self.expect(".")
            return New(x, self.par())
        if tok.kind == "rec":
            self.i += 1
            x = self.expect("pvar").text
            self.expect(".")
            return Rec(x, self.par())
        if tok.kind == "pvar":
            self.i += 1
            return PVar(tok.text)
        if tok.kind in ("var", "const"):
            pre = self.prefix()
            self.expect(".")
            return Sum(((pre, self.unary()),))
        raise self.error(f"unexpected {tok.text or 'end of input'!r}")

    def chan(self):
        tok = self.tok
        if tok.kind == "var":
            self.i += 1
            return Var(tok.text)
        if tok.kind == "const":
            self.i += 1
            name = tok.text[1:]
            if self.universe is not None and name not in self.universe:
                raise self.error(f"channel {tok.text} is outside the universe", tok)
            return Const(name)
        raise self.error(f"expected a channel, found {tok.text or 'end of input'!r}")

    def prefix(self):
        subject = self.chan()
        if self.tok.kind == "!":
            self.i += 1
            return Send(subject, self.chan())
        if self.tok.kind == "?":
            self.i += 1
            self.expect("(")
            x = self.expect("var").text
            self.expect(")")
            return Recv(subject, x)
        raise self.error("expected '!' or '?' after channel")


def parse(text: str, universe: Optional[Iterable[str]] = None) -> Process:
    """Parse concrete syntax.  Constants outside ``universe`` are rejected
    when a universe is given."""
    return _Parser(text, universe).parse()


# ---------------------------------------------------------------------------
# Printer
# ---------------------------------------------------------------------------

def _chan_str(e: ChanExpr) -> str:
    return f"#{e.name}" if isinstance(e, Const) else e.name


def _prefix_str(pre: Prefix) -> str:
    if isinstance(pre, Send):
        return f"{_chan_str(pre.chan)}!{_chan_str(pre.payload)}"
    return f"{_chan_str(pre.chan)}?({pre.binder})"


# precedence levels: 0 par, 1 ichoice, 2 sum, 3 unary
def _pp(p: Process, level: int) -> str:
    if isinstance(p, Sum):
        if not p.branches:
            return "0"
        parts = [f"{_prefix_str(pre)}.{_pp(cont, 3)}" for pre, cont in p.branches]
        s = " + ".join(parts)
        return s if len(parts) == 1 or level <= 2 else f"({s})"
    if isinstance(p, PVar):
        return p.name
    if isinstance(p, Par):
        s = f"{_pp(p.left, 0)} | {_pp(p.right, 1)}"
        return s if level <= 0 else f"({s})"
    if isinstance(p, IChoice):
        s = f"{_pp(p.left, 1)} (+) {_pp(p.right, 2)}"
        return s if level <= 1 else f"({s})"
    if isinstance(p, New):
        s = f"new {p.binder}. {_pp(p.body, -1)}"
    else:
        s = f"rec {p.binder}. {_pp(p.body, -1)}"
    # binders extend to the right, so they are only bare at the very top
    return s if level == -1 else f"({s})"


def print_process(p: Process) -> str:
    return _pp(p, -1)


# ---------------------------------------------------------------------------
# Substitution and names
# ---------------------------------------------------------------------------

def _subst_chan(e: ChanExpr, x: str, c: Const) -> ChanExpr:
    return c if isinstance(e, Var) and e.name == x else e


def _subst_prefix(pre: Prefix, x: str, c: Const) -> Prefix:
    if isinstance(pre, Send):
        return Send(_subst_chan(pre.chan, x, c), _subst_chan(pre.payload, x, c))
    return Recv(_subst_chan(pre.chan, x, c), pre.binder)


def subst_chan(p: Process, x: str, c: str) -> Process:
    """``p{c/x}``: replace free occurrences of channel variable ``x``."""
    const = Const(c)

    def go(p):
        if isinstance(p, Sum):
            return Sum(tuple(
                (_subst_prefix(pre, x, const),
                 cont if isinstance(pre, Recv) and pre.binder == x else go(cont))
                for pre, cont in p.branches))
        if isinstance(p, IChoice):
            return IChoice(go(p.left), go(p.right))
        if isinstance(p, Par):
            return Par(go(p.left), go(p.right))
        if isinstance(p, New):
            return p if p.binder == x else New(p.binder, go(p.body))
        if isinstance(p, Rec):
            return Rec(p.binder, go(p.body))
        return p

    return _cached_subst_chan(p, x, c, go)


def _cached_subst_chan(p, x, c, go):
    key = (p, x, c)
    hit = _SUBST_CACHE.get(key)
    if hit is None:
        hit = go(p)
        if len(_SUBST_CACHE) > 200_000:
            _SUBST_CACHE.clear()
        _SUBST_CACHE[key] = hit
    return hit


_SUBST_CACHE: dict = {}


def subst_proc(p: Process, X: str, q: Process) -> Process:
    """``p{q/X}`` for a closed replacement ``q``."""

    def go(p):
        if isinstance(p, PVar):
            return q if p.name == X else p
        if isinstance(p, Sum):
            return Sum(tuple((pre, go(cont)) for pre, cont in p.branches))
        if isinstance(p, IChoice):
            return IChoice(go(p.left), go(p.right))
        if isinstance(p, Par):
            return Par(go(p.left), go(p.right))
        if isinstance(p, New):
            return New(p.binder, go(p.body))
        return p if p.binder == X else Rec(p.binder, go(p.body))

    return go(p)


def substitute(p: Process, subst: Mapping[str, Union[str, Const, Process]]) -> Process:
    """Apply a substitution.  Keys naming channel variables map to channel
    constants (``"c"`` or ``Const("c")``); keys naming process variables map
    to closed processes."""
    for name, repl in subst.items():
        if name[:1].isupper():
            if not analyze(repl).closed:
                raise OpenProcessError("process substitution needs a closed replacement")
            p = subst_proc(p, name, repl)
        else:
            p = subst_chan(p, name, repl.name if isinstance(repl, Const) else repl)
    return p


@lru_cache(maxsize=1 << 16)
def analyze(p: Process) -> NameReport:
    fcv, fpv, consts = set(), set(), set()

    def chan(e, bound):
        if isinstance(e, Const):
            consts.add(e.name)
        elif e.name not in bound:
            fcv.add(e.name)

    def go(p, bound, pbound):
        if isinstance(p, Sum):
            for pre, cont in p.branches:
                chan(pre.chan, bound)
                if isinstance(pre, Send):
                    chan(pre.payload, bound)
                    go(cont, bound, pbound)
                else:
                    go(cont, bound | {pre.binder}, pbound)
        elif isinstance(p, (IChoice, Par)):
            go(p.left, bound, pbound)
            go(p.right, bound, pbound)
        elif isinstance(p, New):
            go(p.body, bound | {p.binder}, pbound)
        elif isinstance(p, Rec):
            go(p.body, bound, pbound | {p.binder})
        elif p.name not in pbound:
            fpv.add(p.name)

    go(p, frozenset(), frozenset())
    return NameReport(frozenset(fcv), frozenset(fpv), frozenset(consts))


def constants(p: Process) -> frozenset:
    return analyze(p).constants


def is_closed(p: Process) -> bool:
    return analyze(p).closed


def safety_check(sigma, p: Process) -> bool:
    """The judgment: ``p`` is closed and owns every constant it mentions."""
    if not is_closed(p):
        raise OpenProcessError(f"safety_check needs a closed process: {print_process(p)}")
    return constants(p) <= sigma.domain()
