# services_pwl.py
"""
Piecewise-linear, concave, strictly increasing functions on [1, n0] with
exact rational breakpoints, and the sample-based submultiplicativity checker.
"""

from bisect import bisect_right
from dataclasses import dataclass, field
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

from config_settings import settings
from utils_errors import DomainError, InputFormatError, InvariantError
from utils_helpers import (
    csv_to_rows,
    format_rational,
    log2_fraction,
    parallel_map,
    parse_rational,
    rational_pow2,
    rows_to_csv,
)
from utils_logger import get_logger

logger = get_logger("pwl")

CSV_HEADER = ("x", "S(x)")


@dataclass(frozen=True)
class PWLFunction:
    breakpoints: Tuple[Fraction, ...]
    values: Tuple[Fraction, ...]
    normalized: bool = True

    def __post_init__(self):
        bps = tuple(Fraction(b) for b in self.breakpoints)
        vals = tuple(Fraction(v) for v in self.values)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "values", vals)
        self._validate()

    def _validate(self):
        bps, vals = self.breakpoints, self.values
        if len(bps) != len(vals):
            raise InvariantError("breakpoints and values differ in length")
        if len(bps) < 2 or bps[0] != 1:
            raise InvariantError("breakpoints must start at 1 and contain at least two points")
        if bps[-1] < 2:
            raise InvariantError(f"domain end {format_rational(bps[-1])} < 2")
        prev_slope = None
        for i in range(1, len(bps)):
            if bps[i] <= bps[i - 1]:
                raise InvariantError(f"breakpoints not strictly increasing at index {i}")
            if vals[i] <= vals[i - 1]:
                raise InvariantError(f"values not strictly increasing at x={format_rational(bps[i])}")
            slope = (vals[i] - vals[i - 1]) / (bps[i] - bps[i - 1])
            if prev_slope is not None and slope > prev_slope:
                raise InvariantError(f"not concave at x={format_rational(bps[i - 1])}")
            prev_slope = slope
        if self.normalized:
            if vals[0] != 1 or 2 not in bps:
                raise InvariantError("normalized function must satisfy S(1)=1 and have a breakpoint at 2")
            for b, v in zip(bps, vals):
                if b > 2:
                    break
                if v != b:
                    raise InvariantError(f"normalized function must equal x on [1,2]; S({b})={v}")

    @property
    def domain_end(self) -> Fraction:
        return self.breakpoints[-1]

    @property
    def final_value(self) -> Fraction:
        return self.values[-1]

    def slopes(self) -> List[Fraction]:
        b, v = self.breakpoints, self.values
        return [(v[i] - v[i - 1]) / (b[i] - b[i - 1]) for i in range(1, len(b))]

    def eval(self, x) -> Fraction:
        x = Fraction(x)
        bps = self.breakpoints
        if x < 1 or x > bps[-1]:
            raise DomainError(f"x={format_rational(x)} outside [1, {format_rational(bps[-1])}]")
        i = bisect_right(bps, x)
        if i >= len(bps):
            return self.values[-1]
        if bps[i - 1] == x:
            return self.values[i - 1]
        x0, x1 = bps[i - 1], bps[i]
        y0, y1 = self.values[i - 1], self.values[i]
        return y0 + (y1 - y0) * (x - x0) / (x1 - x0)

    __call__ = eval

    def append_segment(self, end, value) -> "PWLFunction":
        """Return a copy extended by one linear segment ending at (end, value)."""
        return PWLFunction(self.breakpoints + (Fraction(end),), self.values + (Fraction(value),), self.normalized)

    def to_dict(self) -> dict:
        return {
            "breakpoints": [format_rational(b) for b in self.breakpoints],
            "values": [format_rational(v) for v in self.values],
            "normalized": self.normalized,
        }

    def to_csv_text(self) -> str:
        return rows_to_csv(CSV_HEADER, ((format_rational(b), format_rational(v)) for b, v in zip(self.breakpoints, self.values)))


def identity_pwl() -> PWLFunction:
    """S(x) = x on [1, 2]."""
    return PWLFunction((1, 2), (1, 2))


def pwl_from_dict(doc: dict) -> PWLFunction:
    return PWLFunction(
        tuple(parse_rational(b) for b in doc["breakpoints"]),
        tuple(parse_rational(v) for v in doc["values"]),
        bool(doc.get("normalized", True)),
    )


def pwl_from_csv_text(text: str, normalized: bool = True) -> PWLFunction:
    header, rows = csv_to_rows(text)
    if tuple(h.strip() for h in header) != CSV_HEADER:
        raise InputFormatError(f"expected CSV header {','.join(CSV_HEADER)}, got {','.join(header)}")
    try:
        xs = tuple(parse_rational(r[0]) for r in rows)
        ys = tuple(parse_rational(r[1]) for r in rows)
    except IndexError:
        raise InputFormatError("CSV row with fewer than two columns") from None
    return PWLFunction(xs, ys, normalized)


def min_final_slope(f: PWLFunction) -> Fraction:
    """Best uniform c with S(x) >= S(x-h) + c*h: by concavity, the last slope."""
    return f.slopes()[-1]


@dataclass
class SubmultReport:
    ok: bool
    violations: List[Tuple[Fraction, Fraction, Fraction]] = field(default_factory=list)
    pairs_checked: int = 0
    min_margin: Optional[Fraction] = None

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "pairs_checked": self.pairs_checked,
            "min_margin": None if self.min_margin is None else format_rational(self.min_margin),
            "violations": [
                {"x": format_rational(x), "y": format_rational(y), "margin": format_rational(g)}
                for x, y, g in self.violations
            ],
        }


def log_grid(end: Fraction, points: int) -> List[Fraction]:
    """Deterministic log-uniform rational grid on [1, end]."""
    if points < 2:
        return [Fraction(1), Fraction(end)]
    top = log2_fraction(end)
    grid = {Fraction(1), Fraction(end)}
    for i in range(1, points - 1):
        x = rational_pow2(top * i / (points - 1))
        grid.add(min(max(x, Fraction(1)), Fraction(end)))
    return sorted(grid)


def critical_pairs(f: PWLFunction) -> List[Tuple[Fraction, Fraction]]:
    """Cell vertices of g(x,y) = S(x)S(y) - S(xy): breakpoint pairs and (b/y', y')."""
    end = f.domain_end
    bps = f.breakpoints
    pairs = set()
    for y in bps:
        for b in bps:
            for x in (b, b / y):
                if x < 1 or x * y > end:
                    continue
                pairs.add((min(x, y), max(x, y)))
    return sorted(pairs)


def grid_pairs(f: PWLFunction, points: int) -> List[Tuple[Fraction, Fraction]]:
    end = f.domain_end
    grid = log_grid(end, points)
    pairs = []
    for i, x in enumerate(grid):
        for y in grid[i:]:
            if x * y > end:
                break
            pairs.append((x, y))
    return pairs


def _scan(f: PWLFunction, pairs: Sequence[Tuple[Fraction, Fraction]]):
    violations = []
    low = None
    for x, y in pairs:
        g = f.eval(x) * f.eval(y) - f.eval(x * y)
        if low is None or g < low:
            low = g
        if g < 0:
            violations.append((x, y, g))
    return violations, low


def check_submultiplicative(f: PWLFunction, grid_points: Optional[int] = None, threads: Optional[int] = None) -> SubmultReport:
    """Check S(xy) <= S(x)S(y) exactly on the critical set plus a log grid.

    g is symmetric, so only pairs with x <= y are evaluated.
    """
    grid_points = settings.grid_points if grid_points is None else grid_points
    threads = settings.threads if threads is None else threads
    pairs = sorted(set(critical_pairs(f)) | set(grid_pairs(f, grid_points)))

    chunks = max(1, threads)
    size = max(1, (len(pairs) + chunks - 1) // chunks)
    parts = parallel_map(lambda chunk: _scan(f, chunk), [pairs[i:i + size] for i in range(0, len(pairs), size)], threads)

    violations, low = [], None
    for v, m in parts:
        violations.extend(v)
        if m is not None and (low is None or m < low):
            low = m
    violations.sort(key=lambda t: (t[0], t[1]))
    report = SubmultReport(ok=not violations, violations=violations, pairs_checked=len(pairs), min_margin=low)
    if violations:
        logger.warning(f"submultiplicativity: {len(violations)} violations on {len(pairs)} pairs")
    else:
        logger.debug(f"submultiplicativity ok on {len(pairs)} pairs")
    return report
