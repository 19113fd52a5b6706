import pytest
from hypothesis import given
from hypothesis import strategies as st

from dive.formula import (
    Composition,
    EmptyFormula,
    FormulaSyntaxError,
    UnbalancedGroup,
    UnknownElement,
    canonical_formula,
    parse_formula,
)


def test_multicomponent_decimal_subscripts():
    assert parse_formula("Mg2Fe0.6Co0.2Mn0.2").amounts == {
        "Mg": 2.0, "Fe": 0.6, "Co": 0.2, "Mn": 0.2,
    }


def test_group_multiplier():
    assert parse_formula("Mg(BH4)2").amounts == {"Mg": 1.0, "B": 2.0, "H": 8.0}


def test_nested_groups_and_brackets():
    assert parse_formula("K[Fe(CN)2]2").amounts == {"K": 1.0, "Fe": 2.0, "C": 4.0, "N": 4.0}


def test_substituted_ab5():
    assert parse_formula("La0.8Mg0.2Ni5").amounts == {"La": 0.8, "Mg": 0.2, "Ni": 5.0}


def test_whitespace_and_interpunct_separators_ignored():
    assert parse_formula("La Ni5").amounts == parse_formula("LaNi5").amounts
    assert parse_formula("La·Ni5").amounts == parse_formula("LaNi5").amounts


def test_unicode_subscript_digits():
    assert parse_formula("Mg₂Fe₀.₆").amounts == {"Mg": 2.0, "Fe": 0.6}


def test_unknown_element_offset():
    with pytest.raises(UnknownElement) as err:
        parse_formula("Xy2")
    assert err.value.offset == 0


def test_unknown_element_mid_formula():
    with pytest.raises(UnknownElement):
        parse_formula("MgQx2")


def test_empty_formula():
    with pytest.raises(EmptyFormula):
        parse_formula("")
    with pytest.raises(EmptyFormula):
        parse_formula("   ")


def test_unbalanced_groups():
    with pytest.raises(UnbalancedGroup):
        parse_formula("Mg(OH2")
    with pytest.raises(UnbalancedGroup):
        parse_formula("MgOH)2")
    with pytest.raises(UnbalancedGroup):
        parse_formula("Mg(BH4]2")


def test_hydrate_dot_is_a_syntax_error():
    # the separator dot is skipped, leaving a leading multiplier, which the
    # grammar rejects
    with pytest.raises(FormulaSyntaxError):
        parse_formula("MgCl2·6H2O")


def test_syntax_error_reports_byte_offset():
    with pytest.raises(FormulaSyntaxError) as err:
        parse_formula("Mg2+")
    assert err.value.offset == 3


def test_zero_subscript_rejected():
    with pytest.raises(FormulaSyntaxError):
        parse_formula("Mg0Fe2")


def test_canonical_scaling_and_sort():
    assert canonical_formula(Composition({"Mg": 4, "Fe": 2})) == "Fe1Mg2"
    assert canonical_formula(Composition({"Mg": 2, "Fe": 2})) == "Fe1Mg1"
    assert canonical_formula(Composition({"Mg": 1, "Fe": 1})) == "Fe1Mg1"


def test_canonical_fractional_amounts():
    # divide by the smallest amount 0.2 by hand: La 4, Mg 1, Ni 25
    assert canonical_formula(parse_formula("La0.8Mg0.2Ni5")) == "La4Mg1Ni25"


def test_canonical_decimal_trimming():
    assert canonical_formula(Composition({"Mg": 1, "Fe": 1.00004})) == "Fe1Mg1"
    assert canonical_formula(Composition({"Mg": 3, "Fe": 1})) == "Fe1Mg3"


_ELEMENT_POOL = ["H", "Li", "B", "Mg", "Al", "Ti", "Fe", "Co", "Ni", "La", "Y"]


@st.composite
def compositions(draw):
    symbols = draw(st.lists(st.sampled_from(_ELEMENT_POOL), min_size=1, max_size=5, unique=True))
    amounts = {
        sym: draw(st.integers(min_value=1, max_value=40)) / 10.0
        for sym in symbols
    }
    return Composition(amounts)


@given(compositions(), st.sampled_from([0.25, 0.5, 2.0, 3.0, 4.0, 10.0]))
def test_canonical_formula_scale_invariant(c, k):
    assert canonical_formula(c) == canonical_formula(c.scaled(k))


@given(compositions())
def test_parse_of_printed_amounts_round_trips(c):
    # print a composition in plain element-subscript form and parse it back
    printed = "".join(f"{sym}{amt:g}" for sym, amt in sorted(c.amounts.items()))
    reparsed = parse_formula(printed)
    assert reparsed.almost_equals(c, tol=1e-9)


def test_composition_invariants():
    with pytest.raises(ValueError):
        Composition({"Mg": 0.0})
    with pytest.raises(ValueError):
        Composition({})
    with pytest.raises(UnknownElement):
        Composition({"Zz": 1.0})


def test_fractions_sum_to_one():
    c = parse_formula("La0.8Mg0.2Ni5")
    assert abs(sum(c.fractions().values()) - 1.0) < 1e-12
