# utils_helpers.py
import csv
import io
import json
import math
import re
from concurrent.futures import ThreadPoolExecutor
from fractions import Fraction
from pathlib import Path
from typing import Any, Callable, Iterable, List, Sequence

from utils_errors import InputFormatError
from utils_logger import get_logger

logger = get_logger("utils")

# str(int) and int(str) refuse more than 4300 digits by default; stay well below
SAFE_DIGITS = 4000
SAFE_BITS = 13000
# csv's default field limit is 131072 characters
CSV_FIELD_LIMIT = 2 ** 31 - 1

_INT_TEXT = re.compile(r"[+-]?\d+")


def int_to_decimal(n: int) -> str:
    """Exact decimal text of an integer of any size."""
    if n < 0:
        return "-" + int_to_decimal(-n)
    if n.bit_length() <= SAFE_BITS:
        return str(n)
    k = n.bit_length() * 30103 // 200000
    hi, lo = divmod(n, 10 ** k)
    return int_to_decimal(hi) + int_to_decimal(lo).zfill(k)


def decimal_to_int(text: str) -> int:
    text = text.strip()
    if not _INT_TEXT.fullmatch(text):
        raise InputFormatError(f"not an integer literal: {text[:40]!r}")
    sign = -1 if text[0] == "-" else 1
    digits = text.lstrip("+-")
    if len(digits) <= SAFE_DIGITS:
        return sign * int(digits)
    k = len(digits) // 2
    return sign * (decimal_to_int(digits[:-k]) * 10 ** k + decimal_to_int(digits[-k:]))


def parse_rational(text) -> Fraction:
    """Parse `p/q`, an integer or a finite decimal literal into an exact Fraction."""
    if isinstance(text, Fraction):
        return text
    if isinstance(text, int):
        return Fraction(text)
    if isinstance(text, float):
        if not math.isfinite(text):
            raise InputFormatError(f"non-finite rational {text!r}")
        return Fraction(str(text))
    s = str(text).strip()
    num, sep, den = s.partition("/")
    if len(s) > SAFE_DIGITS and _INT_TEXT.fullmatch(num.strip()) and (not sep or _INT_TEXT.fullmatch(den.strip())):
        d = decimal_to_int(den) if sep else 1
        if d == 0:
            raise InputFormatError("cannot parse rational: zero denominator")
        return Fraction(decimal_to_int(num), d)
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError) as e:
        raise InputFormatError(f"cannot parse rational {s[:40]!r}: {e}") from None


def format_rational(q) -> str:
    q = Fraction(q)
    if q.denominator == 1:
        return int_to_decimal(q.numerator)
    return f"{int_to_decimal(q.numerator)}/{int_to_decimal(q.denominator)}"


def describe_rational(q) -> str:
    """Short log-friendly text: exact when small, else its binary magnitude."""
    q = Fraction(q)
    if q.numerator.bit_length() <= 64 and q.denominator.bit_length() <= 64:
        return format_rational(q)
    sign = "-" if q < 0 else ""
    return f"{sign}~2^{log2_fraction(abs(q)):.1f}"


def log2_int(n: int) -> float:
    if n <= 0:
        raise ValueError("log2 of non-positive integer")
    bits = n.bit_length()
    if bits <= 1000:
        return math.log2(n)
    shift = bits - 64
    return math.log2(n >> shift) + shift


def log2_fraction(q) -> float:
    """log2 of a positive rational, valid far beyond the float range."""
    q = Fraction(q)
    return log2_int(q.numerator) - log2_int(q.denominator)


def rational_pow2(y: float, max_den: int = 1 << 20) -> Fraction:
    """Rational approximation of 2**y for any finite y >= 0."""
    k = math.floor(y)
    frac = Fraction(2.0 ** (y - k)).limit_denominator(max_den)
    return frac * (1 << k)


def power_below(base: Fraction, exponent: Fraction, bound: Fraction) -> bool:
    """Exact test of base**exponent < bound for positive rationals.

    With exponent = a/b (b > 0) this is base**a < bound**b.
    """
    base, exponent, bound = Fraction(base), Fraction(exponent), Fraction(bound)
    a, b = exponent.numerator, exponent.denominator
    return base ** a < bound ** b


def parallel_map(fn: Callable, items: Iterable, threads: int = 1) -> List[Any]:
    """Order-preserving map, optionally over a thread pool."""
    items = list(items)
    if threads <= 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def write_json(path, payload) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=2, sort_keys=True, ensure_ascii=False) + "\n", encoding="utf-8")
    return path


def read_json(path):
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise InputFormatError(f"{path}: invalid JSON ({e})") from None


def rows_to_csv(header: Sequence[str], rows: Iterable[Sequence[Any]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow(row)
    return buf.getvalue()


def csv_to_rows(text: str):
    if csv.field_size_limit() < CSV_FIELD_LIMIT:
        csv.field_size_limit(CSV_FIELD_LIMIT)
    reader = csv.reader(io.StringIO(text))
    rows = [r for r in reader if r and any(c.strip() for c in r)]
    if not rows:
        raise InputFormatError("empty CSV document")
    return rows[0], rows[1:]
