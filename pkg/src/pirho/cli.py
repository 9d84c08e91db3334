"""Command-line entry point: ``pirho <subcommand> ...``.

Exit status is 0 on success or equality, 1 on a semantic difference or a
failed refinement, and 2 on usage, parse or input errors.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import dataclass
from typing import List, Optional, Sequence

from . import __version__
from .generator import GenConfig, congruence_check, corpus
from .liveness import (
    LDenoter, LObserver, UNKNOWN, comparable, normalize, render_ltrace,
)
from .logic import (
    RULES, AssertionSyntaxError, Refiner, check_rule_soundness, parse_assertion,
)
from .opsem import res_steps
from .resources import (
    parse_resource, parse_universe, render_action, render_resource, render_trace,
)
from .safety import BudgetExhausted, Denoter, Observer
from .syntax import ParseError, analyze, parse, print_process

DEFAULT_UNIVERSE = ("c", "d")
CONFIG_KEYS = {"universe", "depth", "silent_budget", "state_budget", "seed"}


class UsageError(Exception):
    pass


@dataclass
class RunConfig:
    universe: tuple
    depth: int
    silent_budget: Optional[int]
    state_budget: int
    seed: int


def load_config(path: str) -> dict:
    out = {}
    with open(path, encoding="utf-8") as fh:
        for n, line in enumerate(fh, 1):
            line = line.strip()
            if not line or line.startswith("--"):
                continue
            if "=" not in line:
                raise UsageError(f"{path}:{n}: expected key=value")
            key, value = (s.strip() for s in line.split("=", 1))
            key = key.replace("-", "_")
            if key not in CONFIG_KEYS:
                raise UsageError(f"{path}:{n}: unknown key {key!r}")
            out[key] = value
    return out


def _trace_key(t):
    return (len(t), render_trace(t))


def _ltrace_key(lt):
    return (len(lt[0]), render_ltrace(lt))


def _emit(lines: Sequence[str], out) -> None:
    for line in lines:
        out.write(line + "\n")


def _read_process(path: str, universe):
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e.strerror}") from None
    try:
        return parse(text, universe)
    except ParseError as e:
        raise UsageError(f"{path}:{e}") from None


def _resolve(args, files: Sequence[str] = ()) -> RunConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else {}
    uni_text = args.universe or cfg.get("universe") or os.environ.get("PIRHO_UNIVERSE")
    if uni_text:
        try:
            universe = parse_universe(uni_text)
        except ValueError as e:
            raise UsageError(str(e)) from None
    else:
        # the defaults, widened by whatever the inputs mention
        chans = set(DEFAULT_UNIVERSE)
        for f in files:
            chans |= analyze(_read_process(f, None)).constants
        if getattr(args, "sigma", None):
            try:
                chans |= parse_resource(args.sigma).domain()
            except ValueError as e:
                raise UsageError(str(e)) from None
        universe = tuple(sorted(chans))

    def pick(name, default, conv=int):
        v = getattr(args, name, None)
        if v is None:
            v = cfg.get(name)
        if v is None:
            return default
        try:
            return conv(v)
        except ValueError:
            raise UsageError(f"bad value for {name}: {v!r}") from None

    depth = pick("depth", getattr(args, "default_depth", 4))
    if depth < 0:
        raise UsageError("depth must be nonnegative")
    return RunConfig(universe, depth, pick("silent_budget", None),
                     pick("state_budget", 20_000), pick("seed", 0))


def _sigma(args, universe):
    try:
        return parse_resource(args.sigma or "{}", universe)
    except ValueError as e:
        raise UsageError(str(e)) from None


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_parse(args, out) -> int:
    rc = _resolve(args, [args.file])
    p = _read_process(args.file, rc.universe)
    rep = analyze(p)
    out.write(print_process(p) + "\n")
    if args.names:
        out.write("free channel variables: " + " ".join(sorted(rep.free_chan_vars)) + "\n")
        out.write("free process variables: " + " ".join(sorted(rep.free_proc_vars)) + "\n")
        out.write("constants: " + " ".join("#" + c for c in sorted(rep.constants)) + "\n")
    return 0


def cmd_steps(args, out) -> int:
    rc = _resolve(args, [args.file])
    p = _read_process(args.file, rc.universe)
    sigma = _sigma(args, rc.universe)
    lines = sorted(f"--{render_action(s.action)}--> {print_process(s.successor)} ; "
                   f"{render_resource(s.next_resource)}"
                   for s in res_steps(p, sigma, rc.universe))
    _emit(lines, out)
    return 0


def _safety_sets(p, sigma, rc, which):
    op = den = None
    if which in ("op", "both"):
        op = Observer(rc.universe, rc.silent_budget, rc.state_budget).observe(p, sigma, rc.depth)
    if which in ("den", "both"):
        den = Denoter(rc.universe, rc.depth).denote(p).traces(sigma, rc.depth)
    return op, den


def _print_diff(op, den, render, key, out) -> int:
    lines = [("< " + render(t), key(t)) for t in op - den]
    lines += [("> " + render(t), key(t)) for t in den - op]
    _emit([s for s, _ in sorted(lines, key=lambda x: (x[1], x[0]))], out)
    return 1 if lines else 0


def _trace_cmd(args, out, which) -> int:
    rc = _resolve(args, [args.file])
    p = _read_process(args.file, rc.universe)
    if not analyze(p).closed:
        raise UsageError("the process must be closed")
    sigma = _sigma(args, rc.universe)
    if args.diff:
        op, den = _safety_sets(p, sigma, rc, "both")
        return _print_diff(op, den, render_trace, _trace_key, out)
    op, den = _safety_sets(p, sigma, rc, which)
    _emit([render_trace(t) for t in sorted(op if which == "op" else den, key=_trace_key)], out)
    return 0


def cmd_otrace(args, out) -> int:
    return _trace_cmd(args, out, "op")


def cmd_dtrace(args, out) -> int:
    return _trace_cmd(args, out, "den")


def cmd_ltrace(args, out) -> int:
    rc = _resolve(args, [args.file])
    p = _read_process(args.file, rc.universe)
    if not analyze(p).closed:
        raise UsageError("the process must be closed")
    sigma = _sigma(args, rc.universe)

    def op():
        return LObserver(rc.universe, rc.state_budget).lobserve(p, sigma, rc.depth)

    def den():
        return frozenset(LDenoter(rc.universe, rc.depth, rc.state_budget).ldenote(p)(sigma))

    if args.diff:
        o = op()
        if any(term is UNKNOWN for _, term in o):
            out.write("UNKNOWN (state budget exhausted)\n")
            return 1
        return _print_diff(comparable(o), comparable(den()), render_ltrace, _ltrace_key, out)
    ts = op() if args.semantics == "operational" else den()
    _emit([render_ltrace(t) for t in sorted(normalize(ts), key=_ltrace_key)], out)
    return 0


def cmd_compare(args, out) -> int:
    rc = _resolve(args, [args.file])
    p = _read_process(args.file, rc.universe)
    if not analyze(p).closed:
        raise UsageError("the process must be closed")
    sigma = _sigma(args, rc.universe)
    rep = congruence_check(p, sigma, rc.universe, rc.depth, mode=args.mode,
                           silent_budget=rc.silent_budget, state_budget=rc.state_budget)
    if rep.skipped:
        out.write(f"SKIPPED ({rep.skipped})\n")
        return 1
    if rep.equal:
        out.write(f"EQUAL ({rep.size} traces)\n")
        return 0
    out.write(f"DIFFERENT ({len(rep.diff)} traces differ)\n")
    render, key = (render_trace, _trace_key) if args.mode == "safety" else (render_ltrace, _ltrace_key)
    _print_diff(rep.operational, rep.denotational, render, key, out)
    return 1


def cmd_refine(args, out) -> int:
    rc = _resolve(args, [args.impl, args.abstract])
    try:
        a = parse_assertion(args.assertion)
    except AssertionSyntaxError as e:
        raise UsageError(f"assertion: {e}") from None
    P = _read_process(args.impl, rc.universe)
    Q = _read_process(args.abstract, rc.universe)
    if analyze(P).free_proc_vars or analyze(Q).free_proc_vars:
        raise UsageError("processes may not have free process variables here")
    v = Refiner(rc.universe, rc.depth, args.slack).check([], a, P, Q, args.cap)
    out.write(v.describe() + "\n")
    return 0 if v.holds else 1


def cmd_rules(args, out) -> int:
    rc = _resolve(args)
    rules = args.rule or list(RULES)
    bad = 0
    for r in rules:
        rep = check_rule_soundness(r, args.samples, rc.universe, rc.depth, rc.seed)
        status = "OK" if rep.ok else f"VIOLATED ({len(rep.violations)})"
        out.write(f"{r}: {status}, premises held in {rep.premises_held}/{rep.samples} samples\n")
        for v in rep.violations:
            out.write(f"  {v}\n")
        bad += not rep.ok
    return 1 if bad else 0


def cmd_fuzz(args, out) -> int:
    rc = _resolve(args)
    cfg = GenConfig(universe=rc.universe, max_depth=args.ast_depth, seed=rc.seed)
    insts = corpus(args.count, cfg, rc.depth, silent_budget=rc.silent_budget,
                   state_budget=rc.state_budget)
    den = (Denoter(rc.universe, rc.depth) if args.mode == "safety"
           else LDenoter(rc.universe, rc.depth, rc.state_budget))
    failures = 0
    for inst in insts:
        rep = congruence_check(inst.process, inst.sigma, rc.universe, rc.depth, mode=args.mode,
                               silent_budget=rc.silent_budget, state_budget=rc.state_budget,
                               denoter=den)
        verdict = "skipped" if rep.skipped else ("equal" if rep.equal else "different")
        out.write(json.dumps({"instance": inst.index, "verdict": verdict,
                              "diff": len(rep.diff), "process": print_process(inst.process),
                              "sigma": render_resource(inst.sigma)}, sort_keys=True) + "\n")
        if verdict == "different":
            failures += 1
            if args.fail_fast:
                break
    return 1 if failures else 0


# ---------------------------------------------------------------------------
# Argument parsing
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pirho", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"pirho {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key=value file (universe, depth, budgets, seed)")
    common.add_argument("--universe", help="channel universe, e.g. '#c,#d'")
    common.add_argument("--depth", type=int, help="depth bound k (prefixes fired)")
    common.add_argument("--silent-budget", dest="silent_budget", type=int)
    common.add_argument("--state-budget", dest="state_budget", type=int)
    common.add_argument("--seed", type=int)
    sub = ap.add_subparsers(dest="cmd", required=True)

    def add(name, fn, help, sigma=True, file=True):
        p = sub.add_parser(name, parents=[common], help=help)
        if file:
            p.add_argument("file")
        if sigma:
            p.add_argument("--sigma", default="{}", help="resource literal, e.g. '{#c: pub}'")
        p.set_defaults(fn=fn)
        return p

    p = add("parse", cmd_parse, "parse and pretty-print a process", sigma=False)
    p.add_argument("--names", action="store_true", help="also print the name report")
    add("steps", cmd_steps, "resource-sensitive steps")
    for name, fn in (("otrace", cmd_otrace), ("dtrace", cmd_dtrace)):
        p = add(name, fn, f"{'operational' if name == 'otrace' else 'denotational'} safety traces")
        p.add_argument("--diff", action="store_true", help="print the symmetric difference")
    p = add("ltrace", cmd_ltrace, "liveness traces")
    p.add_argument("--semantics", choices=("operational", "denotational"), default="operational")
    p.add_argument("--diff", action="store_true")
    p.set_defaults(default_depth=3)
    p = add("compare", cmd_compare, "compare operational and denotational semantics")
    p.add_argument("--mode", choices=("safety", "liveness"), default="safety")
    p = sub.add_parser("refine", parents=[common], help="check an assertion-qualified refinement")
    p.add_argument("--assert", dest="assertion", required=True)
    p.add_argument("impl")
    p.add_argument("abstract")
    p.add_argument("--slack", type=int, default=0,
                   help="extra prefixes the abstract process may fire per trace")
    p.add_argument("--cap", type=int, default=100_000, help="max (env, resource) pairs")
    p.set_defaults(fn=cmd_refine, default_depth=3)
    p = sub.add_parser("rules", parents=[common], help="spot-check the proof rules")
    p.add_argument("--samples", type=int, default=100)
    p.add_argument("--rule", action="append", choices=RULES)
    p.set_defaults(fn=cmd_rules, default_depth=3)
    p = sub.add_parser("fuzz", parents=[common], help="congruence cross-check on a random corpus")
    p.add_argument("--count", type=int, default=500)
    p.add_argument("--ast-depth", dest="ast_depth", type=int, default=4)
    p.add_argument("--mode", choices=("safety", "liveness"), default="safety")
    p.add_argument("--fail-fast", dest="fail_fast", action="store_true")
    p.set_defaults(fn=cmd_fuzz)
    return ap


def run(argv: Optional[List[str]] = None, out=None, err=None) -> int:
    out = out or sys.stdout
    err = err or sys.stderr
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        return args.fn(args, out)
    except UsageError as e:
        err.write(f"pirho: error: {e}\n")
        return 2
    except BudgetExhausted as e:
        err.write(f"pirho: budget exhausted: {e}\n")
        return 2


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
