import numpy as np
import pytest

from app.core.exceptions import (
    ExpressionDomainError,
    ExpressionSyntaxError,
    FeaturizationError,
    ModelBuildError,
    UnboundVariableError,
    UnknownIdentifierError,
)
from app.symbolic.basis import BasisRole, BasisSet, print_combination
from app.symbolic.expr import evaluate, parse


@pytest.mark.parametrize("text, row, expected", [
    ("x1^2 + x2^2", {"x1": 1.0, "x2": 2.0}, 5.0),
    ("sqrt(abs(h1 - h2))", {"h1": 0.2, "h2": 1.2}, 1.0),
    ("log10(M)", {"M": 1e3}, 3.0),
    ("M/1e6", {"M": 2.5e5}, 0.25),
    ("2*x - 3", {"x": 4.0}, 5.0),
    ("x^(-1)", {"x": 4.0}, 0.25),
    ("(x + 1)*(x - 1)", {"x": 3.0}, 8.0),
    ("1", {}, 1.0),
])
def test_evaluate(text, row, expected):
    variables = tuple(row) or ("x",)
    assert evaluate(parse(text, variables), row) == pytest.approx(expected)


def test_unary_minus_binds_looser_than_power():
    assert evaluate(parse("-x^2", ["x"]), {"x": 3.0}) == -9.0


def test_subtraction_is_left_associative():
    assert evaluate(parse("x - 1 - 1", ["x"]), {"x": 5.0}) == 3.0


@pytest.mark.parametrize("text, printed", [
    ("M/1e6", "M/1000000"),
    ("h1-h2", "h1 - h2"),
    ("x1^2+x2^2", "x1^2 + x2^2"),
    ("sqrt(abs(h1 - h2))", "sqrt(abs(h1 - h2))"),
    ("x - (y - 1)", "x - (y - 1)"),
    ("(x*y)^2", "(x*y)^2"),
])
def test_to_text(text, printed):
    variables = ("M", "h1", "h2", "x1", "x2", "x", "y")
    assert parse(text, variables).to_text() == printed


def test_printed_text_parses_to_the_same_values():
    variables = ("h1", "h2")
    expression = parse("2*sqrt(abs(h1 - h2)) - h1^3/h2", variables)
    reparsed = parse(expression.to_text(), variables)
    row = {"h1": 0.7, "h2": 1.9}
    assert reparsed.evaluate(row) == expression.evaluate(row)


def test_syntax_error_carries_offset():
    with pytest.raises(ExpressionSyntaxError) as info:
        parse("x1 + * x2", ["x1", "x2"])
    assert info.value.offset == 5


@pytest.mark.parametrize("text", ["x^2.5", "x^y", "(x + 1", "x +", "x $ 2", ""])
def test_malformed_text_is_rejected(text):
    with pytest.raises(ExpressionSyntaxError):
        parse(text, ["x", "y"])


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifierError) as info:
        parse("x + zeta", ["x"])
    assert info.value.token == "zeta"
    assert info.value.offset == 4


def test_domain_errors():
    with pytest.raises(ExpressionDomainError):
        evaluate(parse("sqrt(x)", ["x"]), {"x": -1.0})
    with pytest.raises(ExpressionDomainError):
        evaluate(parse("log10(x)", ["x"]), {"x": 0.0})
    with pytest.raises(ExpressionDomainError):
        evaluate(parse("1/x", ["x"]), {"x": 0.0})


def test_power_overflow_is_a_domain_error():
    with pytest.raises(ExpressionDomainError, match="overflow"):
        evaluate(parse("x^3", ["x"]), {"x": 1e200})
    basis = BasisSet.from_texts(["x^3"], ("x",), BasisRole.LEAF)
    with pytest.raises(FeaturizationError) as info:
        basis.featurize({"x": np.array([1.0, 1e200])}, 2)
    assert info.value.row == 1


def test_unbound_variable():
    with pytest.raises(UnboundVariableError):
        evaluate(parse("x + y", ["x", "y"]), {"x": 1.0})


def test_column_and_scalar_paths_agree():
    expression = parse("x^3 - 2*log10(x) + sqrt(x)/x", ["x"])
    values = np.array([0.3, 1.0, 7.5, 123.0])
    columns = expression.evaluate_columns({"x": values})
    scalars = [expression.evaluate({"x": v}) for v in values]
    assert columns.tolist() == scalars


# =============================================================================
# BASIS SETS
# =============================================================================

def test_featurize_preserves_order():
    basis = BasisSet.from_texts(["1", "x", "x^2"], ("x",), BasisRole.LEAF)
    phi = basis.featurize({"x": np.array([1.0, 2.0, 3.0])}, 3)
    assert phi.tolist() == [[1.0, 1.0, 1.0], [1.0, 2.0, 4.0], [1.0, 3.0, 9.0]]


def test_featurize_names_the_failing_row():
    basis = BasisSet.from_texts(["x", "log10(x)"], ("x",), BasisRole.LEAF)
    with pytest.raises(FeaturizationError) as info:
        basis.featurize({"x": np.array([1.0, 0.0, 2.0])}, 3)
    assert info.value.row == 1
    assert info.value.basis == "log10(x)"


def test_basis_with_undeclared_variable():
    expression = parse("x + y", ["x", "y"])
    with pytest.raises(ModelBuildError):
        BasisSet((expression,), ("x",), BasisRole.LEAF)


def test_index_of_variable():
    basis = BasisSet.from_texts(["h1 - h2", "h1", "h2"], ("h1", "h2"), BasisRole.BRANCHING)
    assert basis.index_of_variable("h2") == 2
    assert basis.index_of_variable("F1") == -1


@pytest.mark.parametrize("coeffs, texts, printed", [
    ([3.4, -11.28], ["log10(M)", "1"], "3.4*log10(M) - 11.28"),
    ([2.0], ["h1 - h2"], "2*(h1 - h2)"),
    ([-1.0, 1.0], ["M", "1"], "-M + 1"),
    ([0.0, 0.0], ["M", "1"], "0"),
    ([1.0, 0.0, 0.5], ["1", "M", "M/1e6"], "1 + 0.5*M/1000000"),
])
def test_print_combination(coeffs, texts, printed):
    basis = BasisSet.from_texts(texts, ("M", "h1", "h2"), BasisRole.LEAF)
    assert print_combination(coeffs, basis) == printed


def test_print_combination_length_mismatch():
    basis = BasisSet.from_texts(["1", "x"], ("x",), BasisRole.LEAF)
    with pytest.raises(ValueError):
        print_combination([1.0], basis)


def test_print_combination_drops_small_terms():
    basis = BasisSet.from_texts(["1", "x"], ("x",), BasisRole.LEAF)
    assert print_combination([1e-9, 2.0], basis, tol=1e-6) == "2*x"
