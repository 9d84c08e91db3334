import random

from hypothesis import given, settings, strategies as st

from pirho.generator import (
    ALL_PRODUCTIONS, GenConfig, congruence_check, corpus, enumerate_processes, gen_process,
    productions,
)
from pirho.resources import PUB, Resource
from pirho.syntax import NIL, IChoice, New, Par, PVar, Rec, Sum, analyze, parse, safety_check

U = ("c", "d")


def test_same_seed_same_process():
    cfg = GenConfig(seed=42)
    assert gen_process(cfg) == gen_process(cfg)
    assert gen_process(cfg, random.Random(42)) == gen_process(cfg)


def _children(p):
    if isinstance(p, Sum):
        return [q for _, q in p.branches]
    if isinstance(p, (IChoice, Par)):
        return [p.left, p.right]
    if isinstance(p, (New, Rec)):
        return [p.body]
    return []


def test_depth_one_draws_are_leaves():
    for seed in range(50):
        p = gen_process(GenConfig(universe=("c",), max_depth=1, seed=seed))
        assert all(q == NIL for q in _children(p)), str(p)
        assert analyze(p).closed


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**64 - 1))
def test_generated_processes_are_closed_and_safe(seed):
    cfg = GenConfig(seed=seed)
    p = gen_process(cfg)
    rep = analyze(p)
    assert rep.closed
    assert rep.constants <= set(cfg.universe)
    assert safety_check(Resource({c: PUB for c in rep.constants}), p)


def _guarded(p, X, under_prefix=False):
    if isinstance(p, PVar):
        return p.name != X or under_prefix
    if isinstance(p, Sum):
        return all(_guarded(q, X, True) for _, q in p.branches)
    if isinstance(p, (IChoice, Par)):
        return _guarded(p.left, X, under_prefix) and _guarded(p.right, X, under_prefix)
    if isinstance(p, (New, Rec)):
        return _guarded(p.body, X, under_prefix)
    return True


def _recs(p):
    if isinstance(p, Rec):
        yield p
        yield from _recs(p.body)
    elif isinstance(p, Sum):
        for _, q in p.branches:
            yield from _recs(q)
    elif isinstance(p, (IChoice, Par)):
        yield from _recs(p.left)
        yield from _recs(p.right)
    elif isinstance(p, New):
        yield from _recs(p.body)


def test_recursion_is_guarded():
    for seed in range(300):
        p = gen_process(GenConfig(seed=seed, max_depth=5))
        for r in _recs(p):
            assert _guarded(r.body, r.binder), str(r)


def test_corpus_instances_are_safe_and_distinct():
    insts = corpus(50, GenConfig(universe=U, max_depth=3, seed=2), 3)
    assert len(insts) == 50
    assert len({(i.process, i.sigma) for i in insts}) == 50
    assert [i.index for i in insts] == list(range(50))
    for i in insts:
        assert safety_check(i.sigma, i.process)


def test_corpus_is_deterministic():
    a = corpus(20, GenConfig(universe=U, max_depth=3, seed=9), 3)
    b = corpus(20, GenConfig(universe=U, max_depth=3, seed=9), 3)
    assert [(i.process, i.sigma) for i in a] == [(i.process, i.sigma) for i in b]


def test_exhaustive_coverage():
    seen = set()
    for p in enumerate_processes(("c",), 2):
        seen |= productions(p)
    assert seen >= ALL_PRODUCTIONS


def test_check_examples():
    p = parse("new x. x!x.0", U)
    rep = congruence_check(p, Resource(), U, 2)
    assert rep.equal and rep.operational == {()}


def test_private_exchange_never_sends():
    p = parse("new x.(x!x.0 | x?(y).y!x.0)", U)
    rep = congruence_check(p, Resource(), U, 4)
    assert rep.equal
    assert rep.operational == {()}


def test_lucky_capture_is_skipped():
    p = parse("new x. #c!x.0 | #c?(y).#c!y.#d!y.0", U)
    rep = congruence_check(p, Resource({"c": PUB}), U, 4)
    assert rep.equal is None and rep.skipped


def test_liveness_mode():
    rep = congruence_check(parse("#c!#c.0", U), Resource({"c": PUB}), U, 3, mode="liveness")
    assert rep.equal
