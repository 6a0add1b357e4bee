import pytest

from proofscore.errors import ArityMismatch, CyclicSubsorts, IllSorted, NonRegular, UnknownSort
from proofscore.kernel import (App, OpDecl, SortPoset, Var, apply_substitution, build_signature, canonicalize,
                               constants_in, rename_constants, term_compare)


def nat_sig():
    return build_signature(
        ["Zero", "NzNat", "Nat"], [("Zero", "Nat"), ("NzNat", "Nat")],
        [OpDecl("0", (), "Zero", constr=True), OpDecl("s_", ("Nat",), "NzNat", constr=True),
         OpDecl("_+_", ("Nat", "Nat"), "Nat", assoc=True, comm=True),
         OpDecl("_+_", ("NzNat", "Nat"), "NzNat", assoc=True, comm=True)])


def test_poset_closure_and_components():
    p = SortPoset(["A", "B", "C", "D"], [("A", "B"), ("B", "C")])
    assert p.leq("A", "C") and not p.leq("C", "A")
    assert p.same_component("A", "C") and not p.same_component("A", "D")
    assert p.upper_bounds("A", "B") == ["B"]
    assert len(p.components()) == 2


def test_cycle_is_named():
    with pytest.raises(CyclicSubsorts) as exc:
        SortPoset(["A", "B", "C"], [("A", "B"), ("B", "C"), ("C", "A")])
    assert "A" in str(exc.value) and "C" in str(exc.value)


def test_unknown_sort_in_subsort():
    with pytest.raises(UnknownSort):
        SortPoset(["A"], [("A", "B")])


def test_placeholder_count_must_match_arity():
    with pytest.raises(ArityMismatch):
        OpDecl("_+_", ("Nat",), "Nat")


def test_non_regular_signature_rejected():
    # f(a-ish) has two incomparable least declarations
    with pytest.raises(NonRegular):
        build_signature(["A", "B", "C", "D", "E"], [("A", "B"), ("A", "C")],
                        [OpDecl("f", ("B",), "D"), OpDecl("f", ("C",), "E"), OpDecl("a", (), "A")])


def test_least_sort_and_overloading():
    sig = nat_sig()
    zero = sig.make("0")
    one = sig.make("s_", [zero])
    assert zero.sort == "Zero" and one.sort == "NzNat"
    assert sig.make("_+_", [one, zero]).sort == "NzNat"
    assert sig.make("_+_", [zero, zero]).sort == "Nat"


def test_ill_sorted_application():
    sig = build_signature(["A", "B"], [], [OpDecl("a", (), "A"), OpDecl("f", ("B",), "B")])
    with pytest.raises(IllSorted):
        sig.make("f", [sig.make("a")])


def test_hash_consing_gives_identity():
    sig = nat_sig()
    assert sig.make("s_", [sig.make("0")]) is sig.make("s_", [sig.make("0")])
    assert Var("X", "Nat") is Var("X", "Nat")


def test_ac_canonical_form_is_order_independent():
    sig = nat_sig()
    x, y, z = (Var(n, "Nat") for n in "XYZ")
    t1 = sig.make("_+_", [sig.make("_+_", [x, y]), z])
    t2 = sig.make("_+_", [z, sig.make("_+_", [y, x])])
    c1, c2 = canonicalize(sig, t1), canonicalize(sig, t2)
    assert c1 is c2
    assert len(c1.args) == 3


def test_term_order_is_size_first():
    sig = nat_sig()
    zero = sig.make("0")
    big = sig.make("s_", [sig.make("s_", [zero])])
    assert term_compare(Var("X", "Nat"), zero) < 0
    assert term_compare(zero, big) < 0
    assert term_compare(big, big) == 0


def test_substitution_and_renaming():
    sig = nat_sig().extend([], [], [OpDecl("c", (), "Nat"), OpDecl("d", (), "Nat")])
    x = Var("X", "Nat")
    t = sig.make("s_", [x])
    assert apply_substitution(sig, t, {x: sig.make("c")}) is sig.make("s_", [sig.make("c")])
    r = rename_constants(sig, sig.make("s_", [sig.make("c")]), {"c": "d"})
    assert constants_in(r) == {"d"}
    assert isinstance(r, App) and r.op == "s_"


def test_deep_terms_do_not_overflow():
    sig = nat_sig()
    t = sig.make("0")
    for _ in range(20000):
        t = sig.make("s_", [t])
    assert t.depth == 20001
    assert canonicalize(sig, t) is t
