import pytest
from hypothesis import given, strategies as st

from pirho.resources import (
    FAULT, IMPERMISSIBLE, IMPOSSIBLE, PRI, PUB, TAU, Alloc, Block, BoundOutput, Input, Ok,
    Output, Resource, all_actions, all_resources, apply_action, check_invariant_rel,
    check_separation, dual, enumerate_separations, observe_action, parse_resource,
    parse_universe, public_lift, render_action, render_resource,
)

U2 = ("c", "d")
E = Resource()


def R(**kw):
    return Resource(kw)


def test_dual():
    assert dual(Output("c", "d")) == Input("c", "d")
    assert dual(Input("c", "d")) == Output("c", "d")
    for a in (Alloc("c"), TAU, FAULT, Block(frozenset())):
        assert dual(a) is None


@pytest.mark.parametrize("a, sigma, expected", [
    (Alloc("c"), E, Ok(R(c=PRI))),
    (Output("c", "c"), R(c=PRI), IMPOSSIBLE),
    (Output("c", "d"), E, IMPERMISSIBLE),
    (Input("c", "d"), R(c=PUB), Ok(R(c=PUB, d=PUB))),
    (TAU, R(c=PRI, d=PUB), Ok(R(c=PRI, d=PUB))),
    (Block(frozenset({("c", "!")})), R(c=PUB), Ok(R(c=PUB))),
    (Block(frozenset({("d", "?")})), R(c=PUB), IMPERMISSIBLE),
    (FAULT, R(c=PUB), IMPERMISSIBLE),
    (Alloc("c"), R(c=PUB), IMPOSSIBLE),
    (Input("c", "d"), R(c=PUB, d=PRI), IMPOSSIBLE),
    (Output("c", "d"), R(c=PUB, d=PRI), Ok(R(c=PUB, d=PUB))),
])
def test_apply_action(a, sigma, expected):
    assert apply_action(a, sigma) == expected


def test_observe_action():
    assert observe_action(Alloc("c"), E) == ()
    assert observe_action(TAU, R(c=PUB)) == ()
    assert observe_action(Output("c", "d"), R(c=PUB, d=PRI)) == (BoundOutput("c", "d"),)
    assert observe_action(Output("c", "d"), R(c=PUB, d=PUB)) == (Output("c", "d"),)
    assert observe_action(Block(frozenset({("c", "!")})), R(c=PRI)) == (Block(frozenset()),)
    assert observe_action(FAULT, E) == (FAULT,)


def test_observation_erases_silent_actions():
    for sigma in all_resources(U2):
        assert observe_action(TAU, sigma) == ()
        for c in U2:
            assert observe_action(Alloc(c), sigma) == ()


def test_public_lift():
    assert public_lift(R(c=PRI)) == R(c=PUB)
    assert public_lift(E) == E
    assert public_lift(R(c=PUB, d=PRI)) == R(c=PUB, d=PUB)
    for sigma in all_resources(("c", "d", "e")):
        lifted = public_lift(sigma)
        assert public_lift(lifted) == lifted
        assert lifted.domain() == sigma.domain()


def test_check_separation_examples():
    assert check_separation(R(c=PRI), R(c=PUB), R(c=PUB))
    assert not check_separation(R(c=PUB), R(c=PRI), E)
    assert check_separation(E, E, E)


def test_invariant_relation_examples():
    s = R(c=PUB)
    assert check_invariant_rel(s, s, public_lift(s), public_lift(s))
    assert check_invariant_rel(R(c=PRI), E, R(c=PRI), E)
    assert not check_invariant_rel(R(c=PRI), R(c=PRI), R(c=PRI), E)


def _brute_separations(sigma, universe):
    return {(a, b) for a in all_resources(universe) for b in all_resources(universe)
            if check_separation(sigma, a, b)}


def test_enumerate_separations_empty():
    assert enumerate_separations(E) == {(E, E)}


def test_enumerate_separations_private_channel():
    got = enumerate_separations(R(c=PRI))
    assert {(R(c=PRI), E), (E, R(c=PRI)), (R(c=PUB), R(c=PUB))} <= got
    # one side may also hold the channel publicly while the other lacks it
    assert got == {(R(c=PRI), E), (E, R(c=PRI)), (R(c=PUB), R(c=PUB)),
                   (R(c=PUB), E), (E, R(c=PUB))}


@pytest.mark.parametrize("universe", [("c",), ("c", "d"), ("c", "d", "e")])
def test_enumerate_separations_matches_brute_force(universe):
    for sigma in all_resources(universe):
        assert enumerate_separations(sigma) == _brute_separations(sigma, universe)


def _separated_triples(universe):
    for sigma in all_resources(universe):
        for s1, s2 in enumerate_separations(sigma):
            yield sigma, s1, s2


def test_apply_action_deterministic():
    for sigma in all_resources(U2):
        for a in all_actions(U2):
            assert apply_action(a, sigma) == apply_action(a, sigma)


def test_locality_lemma():
    for sigma, s1, s2 in _separated_triples(U2):
        for a in all_actions(U2):
            whole, part = apply_action(a, sigma), apply_action(a, s1)
            if whole is IMPERMISSIBLE:
                assert part is IMPERMISSIBLE, (a, sigma, s1, s2)
            elif isinstance(whole, Ok):
                assert part is IMPERMISSIBLE or (
                    isinstance(part, Ok) and check_separation(whole.next, part.next, s2)
                ), (a, sigma, s1, s2)


def test_communication_lemma():
    comm = [a for a in all_actions(U2) if isinstance(a, (Output, Input))]
    for sigma, s1, s2 in _separated_triples(U2):
        for a in comm:
            r1, r2 = apply_action(a, s1), apply_action(dual(a), s2)
            if isinstance(r1, Ok) and isinstance(r2, Ok):
                assert check_separation(sigma, r1.next, r2.next), (a, sigma, s1, s2)


def test_rendering():
    assert render_action(Output("c", "d")) == "#c!#d"
    assert render_action(Input("c", "d")) == "#c?#d"
    assert render_action(Alloc("c")) == "nu #c"
    assert render_action(TAU) == "tau"
    assert render_action(FAULT) == "FAULT"
    assert render_action(Block(frozenset({("d", "?"), ("c", "!")}))) == "delta{#c!, #d?}"
    assert render_action(BoundOutput("c", "d")) == "nu #d, #c!#d"


@given(st.dictionaries(st.sampled_from(["c", "d", "e"]), st.sampled_from([PUB, PRI])))
def test_resource_literal_round_trip(entries):
    sigma = Resource(entries)
    assert parse_resource(render_resource(sigma)) == sigma


def test_resource_literal_errors():
    with pytest.raises(ValueError):
        parse_resource("#c: pub")
    with pytest.raises(ValueError):
        parse_resource("{#c: own}")
    with pytest.raises(ValueError):
        parse_resource("{#e: pub}", universe=U2)


def test_parse_universe():
    assert parse_universe("#d, #c,#d") == ("c", "d")
    with pytest.raises(ValueError):
        parse_universe(" , ")


def test_all_resources_count():
    for n in range(4):
        universe = tuple("cde"[:n])
        rs = all_resources(universe)
        assert len(rs) == len(set(rs)) == 3 ** n
        assert all(r.domain() <= set(universe) for r in rs)
