from fractions import Fraction
from random import Random

from odeliveness import arith, topology
from odeliveness.normal import atoms_of, nnf
from odeliveness.syntax import TRUE, Cmp, parse_formula
from odeliveness.symbolic import Polynomial

UV = ("u", "v")


def test_closed_nonstrict_atom():
    assert topology.check_closed(parse_formula("u^2 + v^2 >= 2"), UV).holds


def test_closed_annulus():
    assert topology.check_closed(parse_formula("1 <= u^2 + v^2 & u^2 + v^2 <= 2"), UV).holds


def test_closed_mixed_strictness_unknown():
    v = topology.check_closed(parse_formula("u > 0 | u >= 1"), UV)
    assert not v.holds


def test_open_checks():
    assert topology.check_open(parse_formula("u^2 + v^2 > 1/4"), UV).holds
    assert topology.check_open(parse_formula("u > 0"), UV).holds
    assert not topology.check_open(parse_formula("u >= 0"), UV).holds


def test_negation_normalizes_before_classification():
    # !(u^2+v^2 >= 2) is an open set even though it is written negated
    assert topology.check_open(parse_formula("!(u^2 + v^2 >= 2)"), UV).holds


def test_bounded_annulus_with_witness_two():
    v = topology.check_bounded(parse_formula("1 <= u^2 + v^2 & u^2 + v^2 <= 2"), UV)
    assert v.holds and v.witness == 2


def test_bounded_true_unknown():
    assert not topology.check_bounded(TRUE, ("x",), max_log2=6).holds


def test_bounded_singleton_witness_one():
    v = topology.check_bounded(parse_formula("u = 0 & v = 0"), UV)
    assert v.holds and v.witness == 1


def test_compact_annulus():
    v = topology.check_compact(parse_formula("1 <= u^2 + v^2 & u^2 + v^2 <= 2"), UV)
    assert v.holds and v.witness == 2


def test_compact_open_box_unknown():
    assert not topology.check_compact(parse_formula("u > 0 & u < 1"), ("u",)).holds


def test_compact_true_unknown():
    assert not topology.check_compact(TRUE, ("x",)).holds


def test_closed_criterion_excludes_strict_atoms_syntactically():
    # soundness of Holds: no strict atom survives in the NNF
    for text in ("u^2 + v^2 >= 2", "1 <= u^2 + v^2 & u^2 + v^2 <= 2", "u = 0 & v = 0"):
        f = parse_formula(text)
        assert topology.check_closed(f, UV).holds
        atoms = atoms_of(f)
        assert atoms is not None
        assert all(a.op in (">=", "=") for a in atoms)


def test_bounded_witness_encloses_samples():
    f = parse_formula("1 <= u^2 + v^2 & u^2 + v^2 <= 2")
    witness = topology.check_bounded(f, UV).witness
    rng = Random(5)
    found = 0
    while found < 200:
        pt = {
            "u": Fraction(rng.randrange(-160, 161), 100),
            "v": Fraction(rng.randrange(-160, 161), 100),
        }
        if arith.eval_formula_exact(f, pt):
            found += 1
            assert pt["u"] ** 2 + pt["v"] ** 2 <= witness


def test_bounded_monotone_under_atom_strengthening():
    g = parse_formula("u^2 + v^2 <= 2")
    f = parse_formula("u^2 + v^2 <= 2 & u >= 0")  # f implies g atom-by-atom
    bg = topology.check_bounded(g, UV)
    bf = topology.check_bounded(f, UV)
    assert bg.holds and bf.holds
    assert bf.witness <= bg.witness
