"""Tests for the expression parser, evaluator and symbolic derivative."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracvar.entities.expression import (
    FUNCTIONS,
    Binary,
    Const,
    Expression,
    Unary,
    Var,
    derivative,
    evaluate,
    parse,
    to_source,
    variables,
)
from fracvar.utils.exceptions import (
    DisallowedVariable,
    DomainFault,
    ExpressionSyntaxError,
    UnboundVariable,
    UnknownIdentifier,
)

TU = {"t", "u"}


def test_parse_and_evaluate_examples():
    """Parsed expressions evaluate to the expected numbers."""
    assert evaluate(parse("sin(t) + t^2", {"t"}), {"t": 0.0}) == 0.0
    assert evaluate(parse("-u^3 - u", TU), {"t": 0.0, "u": 1.0}) == -2.0
    assert evaluate(parse("exp(t)", {"t"}), {"t": 1.0}) == pytest.approx(math.e, rel=1e-15)
    assert evaluate(parse("t^0.5", {"t"}), {"t": 4.0}) == 2.0


def test_warp_expression_tree():
    """ln(t) parses to a function node over the variable."""
    assert parse("ln(t)", {"t"}) == Unary("ln", Var("t"))


def test_pi_is_a_constant():
    assert parse("pi", set()) == Const(math.pi)


@pytest.mark.parametrize(
    "source, expected",
    [
        ("1 + 2 * 3", 7.0),
        ("8 - 3 - 2", 3.0),
        ("8 / 4 / 2", 1.0),
        ("2^3^2", 512.0),
        ("-2^2", -4.0),
        ("2^-1", 0.5),
        ("(1 + 2) * 3", 9.0),
        ("2 * -3", -6.0),
        ("1.5e2 + .5", 150.5),
    ],
)
def test_precedence_and_associativity(source, expected):
    """Powers are right-associative and bind tighter than unary minus."""
    assert evaluate(parse(source, set()), {}) == expected


@given(
    st.floats(min_value=0.1, max_value=100.0),
    st.floats(min_value=0.1, max_value=100.0),
    st.floats(min_value=0.1, max_value=100.0),
)
def test_precedence_matches_python(a, b, c):
    """a + b * c - a / c follows the usual precedence."""
    node = parse(f"{a!r} + {b!r} * {c!r} - {a!r} / {c!r}", set())
    assert evaluate(node, {}) == pytest.approx(a + b * c - a / c, rel=1e-12)


@pytest.mark.parametrize(
    "source, error, offset",
    [
        ("sin(t", ExpressionSyntaxError, 5),
        ("t +", ExpressionSyntaxError, 3),
        ("t $ 2", ExpressionSyntaxError, 2),
        ("foo(t)", UnknownIdentifier, 0),
        ("t + u", DisallowedVariable, 4),
        ("(t))", ExpressionSyntaxError, 3),
    ],
)
def test_parse_errors_carry_offsets(source, error, offset):
    """Parse errors report the byte offset of the offending token."""
    with pytest.raises(error) as excinfo:
        parse(source, {"t"})
    assert excinfo.value.offset == offset


def test_empty_expression():
    with pytest.raises(ExpressionSyntaxError):
        parse("   ", {"t"})


@pytest.mark.parametrize(
    "source, t",
    [
        ("ln(t)", 0.0),
        ("sqrt(t)", -1.0),
        ("1 / t", 0.0),
        ("t^0.5", -1.0),
        ("t^-1", 0.0),
        ("exp(t)", 1000.0),
    ],
)
def test_domain_faults(source, t):
    """Invalid arithmetic raises DomainFault instead of producing NaN or inf."""
    with pytest.raises(DomainFault):
        evaluate(parse(source, {"t"}), {"t": t})


def test_unbound_variable():
    with pytest.raises(UnboundVariable):
        evaluate(parse("t + u", TU), {"t": 1.0})


def test_evaluate_on_arrays():
    """Bindings may be numpy arrays; constants broadcast to their shape."""
    t = np.linspace(0.0, 1.0, 5)
    np.testing.assert_allclose(Expression("t^2 + 1", {"t"})(t=t), t ** 2 + 1)
    constant = Expression("2", {"t"})(t=t)
    assert constant.shape == t.shape
    assert np.all(constant == 2.0)


@pytest.mark.parametrize(
    "source, t, expected",
    [
        ("t^2", 3.0, 6.0),
        ("ln(t)", 4.0, 0.25),
        ("sin(t)", 0.0, 1.0),
        ("3", 1.0, 0.0),
    ],
)
def test_derivative_examples(source, t, expected):
    """Symbolic derivatives of the basic functions."""
    slope = Expression(source, {"t"}).derivative("t")
    assert float(slope(t=t)) == pytest.approx(expected, rel=1e-14)


def test_partial_derivative_in_u():
    """df/du of -u^3 - u is -3u^2 - 1."""
    slope = Expression("-u^3 - u + sin(t)", TU).derivative("u")
    assert slope(t=0.3, u=2.0) == pytest.approx(-13.0, rel=1e-14)


@settings(max_examples=200)
@given(
    st.sampled_from(
        [
            "t^3 - 2*t",
            "sin(t) * exp(t)",
            "ln(t) / t",
            "sqrt(t) * cos(t^2)",
            "t^t",
            "exp(-t^2)",
            "abs(t - 3)",
            "2^t",
            "1 / (1 + t^2)",
        ]
    ),
    st.floats(min_value=0.5, max_value=2.0),
)
def test_derivative_matches_central_differences(source, t):
    """The symbolic derivative agrees with a central difference quotient."""
    expression = Expression(source, {"t"})
    h = 1e-6
    central = (expression(t=t + h) - expression(t=t - h)) / (2 * h)
    slope = expression.derivative("t")(t=t)
    assert slope == pytest.approx(central, rel=1e-5, abs=1e-6)


def _trees():
    leaves = st.one_of(
        st.floats(min_value=0.0, max_value=1e6, allow_nan=False).map(Const),
        st.sampled_from(sorted(TU)).map(Var),
    )

    def extend(children):
        return st.one_of(
            st.tuples(st.sampled_from(("neg",) + FUNCTIONS), children).map(
                lambda pair: Unary(*pair)
            ),
            st.tuples(st.sampled_from("+-*/^"), children, children).map(
                lambda triple: Binary(*triple)
            ),
        )

    return st.recursive(leaves, extend, max_leaves=12)


@given(_trees())
def test_printed_source_parses_back(tree):
    """to_source output parses to the same tree."""
    assert parse(to_source(tree), TU) == tree


@given(_trees())
def test_variables_survive_printing(tree):
    assert variables(parse(to_source(tree), TU)) == variables(tree)


def test_derivative_simplifies_constants():
    """Derivatives of constant subtrees collapse to zero."""
    assert derivative(parse("sin(2) * 3", {"t"}), "t") == Const(0.0)
    assert Expression("pi * 2", {"t"}).is_constant()
