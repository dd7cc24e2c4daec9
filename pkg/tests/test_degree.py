"""The degree oracle against hand-derived local degrees."""

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from klab import gallery
from klab.degree import chart_count, degree_1d, isolating_radius, local_degree, oracle_count, regular_value_degree, winding_number
from klab.errors import VdimNonzero

F = Fraction

# Hand-derived counts: z^2 winds twice; the cusp t^2 has degree 0 and the two
# extra zeros of the jumping chart have Jacobian determinants -2 and +2; the
# symmetric zero has degree 1 and stabilizer of order 2; the chain cubic has
# slopes +2, -1, +2 at its three zeros.
HAND = {"EX-Z2": F(2), "EX-JUMP": F(0), "EX-SYM": F(1, 2), "EX-CHAIN": F(1)}


@pytest.mark.parametrize("name", sorted(HAND))
def test_oracle_matches_hand_derivation(name):
    assert oracle_count(gallery.get(name)) == HAND[name]


@given(st.integers(1, 5))
def test_winding_number_of_powers(k):
    import sympy

    x, y = sympy.symbols("x y", real=True)
    w = sympy.expand((x + sympy.I * y) ** k)
    sec = gallery.section("x y", str(sympy.re(w)), str(sympy.im(w)))
    assert winding_number(sec, (F(0), F(0)), F(1, 2)) == k


@given(st.integers(1, 4))
def test_conjugate_powers_wind_negatively(k):
    import sympy

    x, y = sympy.symbols("x y", real=True)
    w = sympy.expand((x - sympy.I * y) ** k)
    sec = gallery.section("x y", str(sympy.re(w)), str(sympy.im(w)))
    assert winding_number(sec, (F(0), F(0)), F(1, 2)) == -k


@pytest.mark.parametrize("expr,deg", [("t", 1), ("-t", -1), ("t**2", 0), ("t**3", 1), ("-t**3", -1)])
def test_one_dimensional_degree(expr, deg):
    assert degree_1d(gallery.section("t", expr), (F(0),), F(1, 2)) == deg


@pytest.mark.parametrize("exprs,deg", [(("a", "b", "c"), 1), (("a", "b", "-c"), -1), (("a**3", "b", "c"), 1),
                                       (("a**2", "b", "c"), 0)])
def test_regular_value_degree_in_three_dimensions(exprs, deg):
    sec = gallery.section("a b c", *exprs)
    assert regular_value_degree(sec, (F(0),) * 3, F(1, 2)) == deg


def test_isolating_radius_separates_zeros():
    c = gallery.get("EX-CHAIN").charts["c3"]
    r = isolating_radius(c, (F(1), F(0), F(0)))
    assert r <= F(1, 4)
    assert local_degree(c.section, (F(1), F(0), F(0)), r) == -1


def test_chart_count_of_single_charts():
    assert chart_count(gallery.get("EX-Z2").charts["Z"]) == 2
    assert chart_count(gallery.get("EX-SYM").charts["S"]) == F(1, 2)


def test_nonzero_virtual_dimension_is_rejected():
    with pytest.raises(VdimNonzero):
        local_degree(gallery.section("a b", "a"), (F(0), F(0)), F(1, 2))
