import pytest

from lemmas import blocking_congruence, faulted_top, refinement_preorder
from pirho.generator import GenConfig, congruence_check, corpus
from pirho.liveness import (
    FAULTED, TRUNCATED, UNKNOWN, IncomparableSets, LDenoter, blocked, comparable, dir_of,
    ldenote, linterleave, lobserve, normalize, render_ltrace, set_refines, trace_refines,
)
from pirho.resources import PRI, PUB, Block, Input, Output, Resource, all_resources
from pirho.safety import Env
from pirho.syntax import NIL, Const, Recv, Send, Var, parse

U = ("c", "d")
E = Resource()
PUB_C = Resource({"c": PUB})
PRI_C = Resource({"c": PRI})


def P(text):
    return parse(text, U)


def both(p, sigma, k=3):
    return comparable(lobserve(p, sigma, k, U)), comparable(ldenote(p, None, U, k)(sigma))


def test_inert_blocks_on_nothing():
    for s in all_resources(U):
        op, den = both(NIL, s)
        assert op == den == {((), blocked())}


def test_private_send_blocks_unobservably():
    op, den = both(P("#c!#c.0"), PRI_C)
    assert op == den == {((), blocked())}


def test_public_send_offers_its_direction():
    op, den = both(P("#c!#c.0"), PUB_C)
    assert op == den
    assert ((), blocked({("c", "!")})) in op


def test_divergence_is_catastrophic():
    for text in ("rec X. X", "rec X. X (+) X", "rec X. (X | 0)"):
        for s in (E, PUB_C):
            op, den = both(P(text), s)
            assert op == den == {((), FAULTED)}


def test_immediately_diverging_processes_agree():
    for s in all_resources(U):
        assert lobserve(P("rec X. X"), s, 3, U) == lobserve(P("rec X. X (+) X"), s, 3, U)


def test_divergence_after_a_step():
    op, den = both(P("#c!#c.(rec X. X)"), PUB_C)
    assert op == den
    assert ((Output("c", "c"),), FAULTED) in op


def test_fault_absorbs_extensions():
    ts = {((), FAULTED), ((Output("c", "c"),), blocked()), ((), blocked())}
    assert normalize(ts) == {((), FAULTED)}


def test_truncation_marks_live_runs():
    ts = lobserve(P("rec X. #c!#c.X"), PUB_C, 2, U)
    assert any(term is TRUNCATED for _, term in ts)
    send = Output("c", "c")
    assert comparable(ts) == {(acts, blocked({("c", "!")}))
                              for acts in ((), (send,), (send, send))}


def test_unknown_when_budget_runs_out():
    ts = lobserve(P("rec X. (X | 0 (+) 0)"), E, 2, U, state_budget=5)
    assert ts == {((), UNKNOWN)}
    with pytest.raises(IncomparableSets):
        set_refines(ts, ts)


def test_render():
    assert render_ltrace(((), blocked())) == "delta{}"
    assert render_ltrace(((Output("c", "d"),), FAULTED)) == "#c!#d, FAULT"
    assert render_ltrace(((Input("c", "d"),), TRUNCATED)) == "#c?#d, ..."
    assert render_ltrace(((), UNKNOWN)) == "?"


def test_dir_of():
    assert dir_of(Send(Const("c"), Const("d"))) == ("c", "!")
    assert dir_of(Recv(Const("c"), "x")) == ("c", "?")
    assert dir_of(Send(Var("x"), Var("y")), Env({"x": "c", "y": "d"})) == ("c", "!")


def test_linterleave_merges_compatible_blocks():
    s = Resource({"c": PUB, "d": PUB})
    got = linterleave(((), blocked({("c", "!")})), ((), blocked({("d", "?")})), U)(s)
    assert got == {((), blocked({("c", "!"), ("d", "?")}))}


def test_linterleave_opposite_blocks_vanish():
    b = linterleave(((), blocked({("c", "!")})), ((), blocked({("c", "?")})), U)
    for s in all_resources(U):
        assert b(s) == frozenset()


def test_linterleave_communication_continues():
    s = Resource({"c": PUB, "d": PUB})
    got = linterleave(((Output("c", "d"),), blocked()), ((Input("c", "d"),), blocked()), U)(s)
    assert ((), blocked()) in got


def test_linterleave_fault_side():
    s = Resource({"c": PUB, "d": PUB})
    got = linterleave(((), FAULTED), ((Output("c", "d"),), blocked()), U)(s)
    assert ((), FAULTED) in got


def test_ldenote_rec_identity_is_top():
    b = ldenote(P("rec X. X"), None, U, 3)
    for s in all_resources(U):
        assert comparable(b(s)) == {((), FAULTED)}


def test_trace_refines_examples():
    t = ((Output("c", "d"),), blocked())
    assert trace_refines(t, t)
    assert trace_refines(((), blocked({("c", "!"), ("c", "?")})), ((), blocked({("c", "!")})))
    assert not trace_refines(((), blocked({("c", "!")})), ((), blocked({("c", "!"), ("c", "?")})))
    assert trace_refines(t, ((), FAULTED))
    assert not trace_refines(((), FAULTED), t)


def test_set_refines_examples():
    T = {((), blocked({("c", "!")})), ((Output("c", "c"),), FAULTED)}
    assert set_refines(T, T)
    assert set_refines(T, {((), FAULTED)})
    # a larger blocked set refines a smaller one, never the reverse
    assert set_refines({((), blocked({("c", "!")}))}, {((), blocked())})
    assert not set_refines({((), blocked())}, {((), blocked({("c", "!")}))})


def test_refinement_is_a_preorder():
    _, interesting, failures = refinement_preorder(triples=300, seed=1)
    assert interesting > 30
    assert failures == []


def test_fault_at_start_is_top():
    assert faulted_top(samples=50, seed=2)[1] == []


def test_blocking_congruence_lemma():
    checked, failures = blocking_congruence()
    assert checked > 1000
    assert failures == []


SMALL = corpus(40, GenConfig(universe=U, max_depth=3, seed=31), 3)


def test_observed_blocks_mention_only_public_channels():
    for inst in SMALL:
        for acts, term in lobserve(inst.process, inst.sigma, 3, U):
            if isinstance(term, Block) and not acts:
                assert all(inst.sigma.get(c) == PUB for c, _ in term.dirs)


def test_liveness_congruence_small_corpus():
    den = LDenoter(U, 3)
    for inst in SMALL:
        rep = congruence_check(inst.process, inst.sigma, U, 3, mode="liveness", denoter=den)
        assert rep.skipped or rep.equal, (str(inst.process), inst.sigma, rep.diff)
