import numpy as np
import pytest

from expstencil.errors import ExpressionError
from expstencil.expr import parse_expression


@pytest.mark.parametrize(
    "text,point,expected",
    [
        ("z*(1-z)*x*y", (0.5, 0.5, 0.25), 0.25 * 0.75 * 0.5 * 0.5),
        ("sin(pi*z)*exp(-x*y)", (0.5, 0.5, 0.5), np.exp(-0.25)),
        ("1 + 2*3", (0, 0, 0), 7.0),
        ("2^3^2", (0, 0, 0), 512.0),  # right-associative power
        ("-x^2", (3, 0, 0), -9.0),
        ("2^-1", (0, 0, 0), 0.5),
        ("(x+y)/2", (1, 3, 0), 2.0),
        ("sqrt(x)", (4, 0, 0), 2.0),
        ("cos(0)", (0, 0, 0), 1.0),
        ("e", (0, 0, 0), np.e),
        ("1.5e2", (0, 0, 0), 150.0),
    ],
)
def test_values(text, point, expected):
    fn = parse_expression(text)
    assert fn(*point) == pytest.approx(expected, rel=1e-14)


def test_vectorized():
    fn = parse_expression("x*y + z")
    x = np.array([1.0, 2.0])
    assert np.allclose(fn(x, 3.0, 1.0), [4.0, 7.0])


@pytest.mark.parametrize(
    "text,needle",
    [
        ("x + * y", "'*'"),
        ("foo(x)", "foo"),
        ("x + bar", "bar"),
        ("sin(x", "')'"),
        ("x @ y", "'@'"),
        ("(x))", "end"),
        ("", "a number"),
    ],
)
def test_parse_errors_name_token(text, needle):
    with pytest.raises(ExpressionError) as exc:
        parse_expression(text)
    assert needle in str(exc.value)
