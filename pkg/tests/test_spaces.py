"""Finite spaces, open-set sites, the converging model, demo bundles."""

import pytest

from finsite.category import validate_site
from finsite.cosheaf import check_cosheaf, constant_precosheaf, plus_cosheaf
from finsite.errors import SiteError
from finsite.spaces import (Demo, FiniteSpace, builtin_demos,
                            converging_sequence_site, demo_by_name,
                            h0_precosheaf, open_site, pi0_precosheaf,
                            pseudocircle, site_points)
from finsite.values import finset, free_ab

X = "{a,b,c,d}"


def test_one_point_space_site():
    space = FiniteSpace(("p",), frozenset())
    spec = open_site(space)
    assert len(spec.category.objects) == 2  # empty and the whole space
    for u in spec.category.objects:
        for cover in spec.declared_covers(u):
            assert cover.pieces or u == "{}"


def test_pseudocircle_has_seven_opens():
    spec = open_site(pseudocircle())
    assert len(spec.category.objects) == 7
    assert validate_site(spec).passed


def test_two_point_discrete_space():
    space = FiniteSpace(("a", "b"), frozenset())
    spec = open_site(space)
    assert len(spec.category.objects) == 4
    pieces = {c.pieces for c in spec.declared_covers("{a,b}")}
    assert ("{a}<{a,b}", "{b}<{a,b}") in pieces


def test_generated_policy_covers():
    spec = open_site(pseudocircle(), "generated")
    covers = spec.declared_covers(X)
    assert len(covers) == 2
    assert validate_site(spec).passed


def test_point_bound_enforced():
    space = FiniteSpace(tuple(f"p{i}" for i in range(11)), frozenset())
    with pytest.raises(SiteError):
        open_site(space)


def test_pi0_values():
    space = pseudocircle()
    spec = open_site(space)
    pi0 = pi0_precosheaf(spec, space)
    assert len(pi0.values[X].levels[0]) == 1
    assert len(pi0.values["{a,b}"].levels[0]) == 2
    assert len(pi0.values["{}"].levels[0]) == 0


def test_h0_free_on_components():
    space = pseudocircle()
    spec = open_site(space)
    h0 = h0_precosheaf(spec, space, free_ab(1))
    assert h0.values["{a,b}"].levels[0].invariants() == ((), 2)
    assert h0.values[X].levels[0].invariants() == ((), 1)
    assert h0.values["{}"].levels[0].is_trivial()


def test_minimal_opens_are_connected():
    """Every minimal open neighborhood is comparability-connected, which is
    the local-connectivity hypothesis behind the constant-cosheaf law."""
    for space in (pseudocircle(), FiniteSpace(("a", "b"), frozenset({("a", "b")}))):
        for x in space.points:
            comps = space.comparability_components(space.down_set(x))
            assert len(comps) == 1


def test_converging_chain_structure():
    spec = converging_sequence_site(6)
    chain = spec.chain_of("X")
    # stage m cover has m pieces with no intersections declared nonempty
    for level in range(3):
        cover = chain.cover_at(level)
        assert len(cover.pieces) == level + 2
        assert cover.intersection_map() == {}


def test_converging_plus_level_sizes():
    spec = converging_sequence_site(8)
    pt = constant_precosheaf(spec, finset("*"), 5, site_points(spec))
    plus = plus_cosheaf(pt, 5)
    assert [len(l.elements) for l in plus.precosheaf.values["X"].levels] == [2, 3, 4, 5, 6, 7]


def test_converging_costalk_chain_minimum():
    spec = converging_sequence_site(6)
    pts = {p.label: p for p in site_points(spec)}
    assert pts["pt:1/3"].chain[-1] == "S3"
    assert pts["pt:0"].chain == ("X", "V2", "V3", "V4", "V5", "V6")


def test_verdict_stability_across_model_sizes():
    """Embedding the model into the next size leaves the verdicts alone."""
    for n in (6, 7):
        spec = converging_sequence_site(n)
        pt = constant_precosheaf(spec, finset("*"), 4, site_points(spec))
        report = check_cosheaf(pt, 4)
        assert report.classification == "COSEPARATED"


def test_demo_names_and_verdicts():
    names = [d.name for d in builtin_demos()]
    assert names == ["pi0-pseudocircle", "pt-finite-space-smooth", "pt-converging",
                     "Z-converging", "constant-presheaf-sheafify"]
    with pytest.raises(SiteError):
        demo_by_name("nope")


def test_demo_pi0_runs_green():
    demo = demo_by_name("pi0-pseudocircle")
    _, data = demo.make(6)
    assert check_cosheaf(data).classification == demo.expected
