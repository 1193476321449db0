import itertools

import pytest
from hypothesis import given, settings, strategies as st

from gen import random_tbox, rng_for
from semantics import is_model, satisfies, small_models
from obdarew.dl import (Reasoner, and_name, dllite_closure, entails_ci, is_exhaustive, norm_and,
                        norm_exists, saturate_atomic_cis, saturate_existential_cis)
from obdarew.chase import Chase, ABox
from obdarew.errors import ValidationError
from obdarew.formats import parse_tbox
from obdarew.syntax import (AtMost1, Atom, Bottom, CI, DLDisjoint, DLInclusion, Exists, ExistsRole,
                            Forall, RI, Role, RoleDisjoint, TBox, is_dllite, is_normal)

SEEDS = st.integers(0, 10_000)


def ci(lhs, rhs):
    return CI(frozenset(lhs.split()) if lhs else frozenset(), rhs)


def candidates(t):
    cs = sorted(t.sig.concepts)
    roles = [Role(p, inv) for p in sorted(t.sig.roles) for inv in (False, True)]
    lhss = [frozenset(c) for n in range(0, 3) for c in itertools.combinations(cs, n)]
    rhss = [Bottom()] + [Atom(c) for c in cs]
    rhss += [Exists(r, f) for r in roles for f in [()] + [(c,) for c in cs]]
    rhss += [Forall(r, c) for r in roles for c in cs]
    return [CI(lhs, rhs) for lhs in lhss for rhs in rhss]


def as_interp(model):
    return model.elements, model.concepts, model.roles


# ---------------------------------------------------------------------------
# normalization


def test_structural_normalization_introduces_fresh_names():
    t = parse_tbox("A <= exists R . (B & C)\nexists R . B <= C\n")
    assert all(is_normal(a) for a in t.axioms)
    assert set(t.fresh_registry) == {"_X1", "_X2"}
    assert ci("A", Exists(Role("R"), ("_X1",))) in t.axioms
    assert ci("B", Forall(Role("R", True), "_X2")) in t.axioms


def test_top_and_bottom_on_the_left():
    t = parse_tbox("top <= A\nbot <= B\n")
    assert t.axioms == {ci("", Atom("A"))}


@pytest.mark.parametrize("text", ["A or B <= C", "A <= B or C", "A <= forall R . (B & C)",
                                  "forall R . A <= B", "A <= atmost1 R . (B & C)"])
def test_outside_horn_is_rejected(text):
    with pytest.raises(ValidationError):
        parse_tbox(text)


def test_normalization_is_conservative_on_small_models():
    # every model of the normal form is a model of the original axioms
    t = parse_tbox("A <= exists R . (B & C)\nexists R . B <= C\n")
    original = [ci("B", Forall(Role("R", True), "C"))]
    for m in small_models(t, 2):
        assert all(satisfies(m, a) for a in original)
        for x in m[1]["A"]:
            assert any(y in m[1]["B"] and y in m[1]["C"] for a, y in m[2]["R"] if a == x)


# ---------------------------------------------------------------------------
# entailment


@pytest.mark.parametrize("text,axiom,expected", [
    ("A <= exists R . B\nB <= forall inv(R) . D", ci("A", Atom("D")), True),
    ("A <= exists R . B\nB <= forall inv(R) . D", ci("B", Atom("D")), False),
    ("A <= exists R\nR <= S\ntop <= forall S . B", ci("A", Exists(Role("S"), ("B",))), True),
    ("A <= exists R . B\nB & C <= bot\ntop <= forall R . C", ci("A", Bottom()), True),
    ("A <= B\nB <= C", ci("A", Atom("C")), True),
    ("A <= B\nB <= C", ci("C", Atom("A")), False),
    ("role R S T\nR <= S\nS <= T", RI(Role("R"), Role("T")), True),
    ("role R S\nR <= inv(S)", RI(Role("R", True), Role("S")), True),
    ("role R S\nR <= inv(S)", RI(Role("S"), Role("R", True)), False),
    ("role P R S\nR & S <= bot\nP <= R\nP <= S", RoleDisjoint(Role("P"), Role("P")), True),
    ("A <= atmost1 R\nA <= forall R . B", ci("A", AtMost1(Role("R"), "B")), True),
])
def test_known_entailments(text, axiom, expected):
    t = parse_tbox(text)
    assert entails_ci(t, axiom) is expected


def test_names_outside_signature_raise():
    t = parse_tbox("A <= B")
    with pytest.raises(ValidationError):
        entails_ci(t, ci("A", Atom("Z")))


def test_cyclic_tbox_terminates_by_blocking():
    t = parse_tbox("A <= exists R . A\nA <= exists inv(R) . B\nB <= forall R . C")
    r = Reasoner(t)
    assert r.entails(ci("A", Exists(Role("R"), ("A", "C"))))
    assert r.entails(ci("A", Atom("C")))
    assert not r.entails(ci("B", Atom("A")))
    assert not r.unknown


@settings(max_examples=25, deadline=None)
@given(SEEDS)
def test_entailment_sound_against_small_models(seed):
    rng = rng_for(seed)
    t = random_tbox(rng, n_concepts=3, n_roles=1, n_axioms=rng.randint(1, 5), acyclic=False,
                    bottom=0.2, atmost=0.3)
    models = small_models(t, 2)
    r = Reasoner(t)
    for axiom in candidates(t):
        if r.entails(axiom):
            assert all(satisfies(m, axiom) for m in models), (str(t), str(axiom))


@settings(max_examples=25, deadline=None)
@given(SEEDS)
def test_nonentailment_witnessed_by_chase_model(seed):
    rng = rng_for(seed)
    t = random_tbox(rng, n_concepts=4, n_roles=2, acyclic=True, bottom=0.1)
    for lhs in [frozenset(), frozenset(["A0"]), frozenset(["A0", "A1"])]:
        a = ABox()
        for n in lhs:
            a.add_concept(n, "r")
        ch = Chase(t, a, ["r"])
        ch.run(10)
        m = ch.model()
        if m.inconsistent or not m.saturated_at_depth:
            continue
        assert is_model(as_interp(m), t)
        for axiom in candidates(t):
            if axiom.lhs == lhs and isinstance(axiom.rhs, Atom) and axiom.rhs.name not in m.type_of("r"):
                assert not entails_ci(t, axiom)


# ---------------------------------------------------------------------------
# the four compilation steps


@settings(max_examples=20, deadline=None)
@given(SEEDS)
def test_saturation_only_adds_entailed_axioms(seed):
    rng = rng_for(seed)
    t = random_tbox(rng, n_concepts=3, n_roles=1, acyclic=False, bottom=0.1)
    r = Reasoner(t)
    t1 = saturate_atomic_cis(saturate_existential_cis(t, 3, r), 3, r)
    assert t.axioms <= t1.axioms
    models = small_models(t, 2)
    for axiom in t1.axioms - t.axioms:
        assert all(satisfies(m, axiom) for m in models), str(axiom)


def test_saturation_finds_existential_with_conjunctive_filler():
    t = parse_tbox("A <= exists R . B\nA <= forall R . C")
    t1 = saturate_existential_cis(t, 2)
    assert ci("A", Exists(Role("R"), ("B", "C"))) in t1.axioms


def test_saturation_finds_atomic_consequence_through_anonymous_element():
    t = parse_tbox("B & C <= exists P\nB & C <= A\nA <= exists R . D\nD <= forall inv(R) . E")
    t1 = saturate_atomic_cis(saturate_existential_cis(t, 3), 3)
    assert ci("A", Atom("E")) in t1.axioms


def test_norm_exists_replaces_qualified_fillers():
    t = parse_tbox("A <= exists R . (B & C)")
    t1 = saturate_existential_cis(t, 1)
    t2 = norm_exists(t1)
    fresh = [n for n in t2.fresh_registry if n.startswith("_R")]
    assert fresh
    for a in t2.axioms:
        if isinstance(a, CI) and isinstance(a.rhs, Exists):
            assert not a.rhs.filler
    p = Role(fresh[0])
    assert RI(p, Role("R")) in t2.axioms
    assert ci("", Forall(p, "B")) in t2.axioms


def test_norm_exists_models_satisfy_input():
    t = TBox(frozenset([ci("A", Exists(Role("R"), ("B", "C")))]))
    t2 = norm_exists(t)
    for m in small_models(t2, 2):
        assert all(satisfies(m, a) for a in t.axioms)


def test_norm_and_defines_conjunctions():
    t = parse_tbox("A & B <= C\nC <= D")
    t3 = norm_and(t)
    n = and_name(["A", "B"])
    assert n == "_AND__A_B"
    assert {ci("A B", Atom(n)), ci(n, Atom("A")), ci(n, Atom("B"))} <= t3.axioms


def test_norm_and_collision_is_an_error():
    t = TBox(frozenset([ci("A B", Atom("C")), ci("_AND__A_B", Atom("C"))]))
    with pytest.raises(ValidationError):
        norm_and(t)


@settings(max_examples=20, deadline=None)
@given(SEEDS)
def test_dllite_closure_is_sound_and_in_the_fragment(seed):
    rng = rng_for(seed)
    t = random_tbox(rng, n_concepts=3, n_roles=1, acyclic=False, bottom=0.2)
    tr = dllite_closure(t)
    assert all(is_dllite(a) for a in tr.axioms)
    models = small_models(t, 2)
    for a in tr.axioms:
        assert all(satisfies(m, a) for m in models), str(a)


def test_dllite_closure_contents():
    t = parse_tbox("A <= exists R . B\nexists inv(R) . top <= C\nA & C <= bot")
    tr = dllite_closure(t)
    assert DLInclusion("A", ExistsRole(Role("R"))) in tr.axioms
    assert DLInclusion(ExistsRole(Role("R", True)), "C") in tr.axioms
    assert DLDisjoint("A", "C") in tr.axioms
    assert DLInclusion("A", "A") in tr.axioms
    assert DLInclusion("A", "B") not in tr.axioms


def test_exhaustiveness_rule():
    flat = parse_tbox("A & B <= C\nC <= forall R . D")
    assert is_exhaustive(flat, 1)
    ex = parse_tbox("A <= exists R . B\nB <= C")
    assert not is_exhaustive(ex, 2)
    assert is_exhaustive(ex, 3)


def test_step1_rejects_nonpositive_bound():
    with pytest.raises(ValidationError):
        saturate_existential_cis(parse_tbox("A <= B"), 0)
