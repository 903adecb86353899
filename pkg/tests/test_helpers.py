from fractions import Fraction

import pytest

from utils_errors import InputFormatError
from utils_helpers import (
    csv_to_rows,
    decimal_to_int,
    describe_rational,
    format_rational,
    int_to_decimal,
    parse_rational,
    rows_to_csv,
)


def test_int_to_decimal_past_the_digit_limit():
    assert int_to_decimal(10 ** 5000) == "1" + "0" * 5000
    assert int_to_decimal(-(10 ** 5000) - 7) == "-1" + "0" * 4999 + "7"
    assert int_to_decimal(12345) == "12345"


def test_decimal_to_int_past_the_digit_limit():
    n = 7 ** 9000 + 3
    assert decimal_to_int(int_to_decimal(n)) == n
    assert decimal_to_int("-" + "9" * 6000) == -(10 ** 6000 - 1)
    with pytest.raises(InputFormatError):
        decimal_to_int("12a4")


def test_huge_rationals_survive_text():
    q = Fraction(3 ** 20000, 7 ** 9000)
    assert parse_rational(format_rational(q)) == q
    with pytest.raises(InputFormatError):
        parse_rational("1" * 5000 + "/0")


def test_describe_rational():
    assert describe_rational(Fraction(3, 4)) == "3/4"
    assert describe_rational(2 ** 20000).startswith("~2^20000.0")
    assert describe_rational(-Fraction(2 ** 100, 3)).startswith("-~2^")


def test_csv_accepts_long_fields():
    field = "1" * 140000
    header, rows = csv_to_rows(rows_to_csv(("x", "y"), [(field, "1")]))
    assert header == ["x", "y"]
    assert rows == [[field, "1"]]
