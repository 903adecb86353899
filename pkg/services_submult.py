# services_submult.py
"""
Extension algorithms for submultiplicative functions (slowdown, speedup and
their iterated forms) and the incomparable family built from them.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple

from pydantic import BaseModel

from services_pwl import PWLFunction, check_submultiplicative, identity_pwl, min_final_slope, pwl_from_csv_text
from config_settings import settings
from utils_errors import InputFormatError, InvariantError, ParameterError
from utils_helpers import describe_rational, format_rational, log2_fraction, parse_rational, read_json, write_json
from utils_logger import get_logger

logger = get_logger("submult")


def check_domain_size(end) -> None:
    """Refuse domain ends longer than settings.max_domain_bits bits."""
    bits = math.ceil(end).bit_length()
    if bits > settings.max_domain_bits:
        raise ParameterError(f"domain end would need {bits} bits, above max_domain_bits={settings.max_domain_bits}")


def slowdown_epsilon0(f: PWLFunction, n0=None) -> Fraction:
    """eps0 = min(c/n0, S(n0)/n0^2) with c the final slope of f."""
    if n0 is not None:
        n0 = Fraction(n0)
        if n0 < 2:
            raise InvariantError(f"slowdown requires n0 >= 2, got {format_rational(n0)}")
        if n0 != f.domain_end:
            raise ParameterError(f"n0={format_rational(n0)} is not the domain end {format_rational(f.domain_end)}")
    n0 = f.domain_end
    c = min_final_slope(f)
    return min(c / n0, f.final_value / (n0 * n0))


def extend_slow(f: PWLFunction, eps) -> PWLFunction:
    """Extend to [1, n0^2] by one segment of slope eps (0 < eps < eps0)."""
    eps = Fraction(eps)
    eps0 = slowdown_epsilon0(f)
    if not 0 < eps < eps0:
        raise ParameterError(f"eps={format_rational(eps)} must lie in (0, {format_rational(eps0)})")
    n0 = f.domain_end
    end = n0 * n0
    check_domain_size(end)
    return f.append_segment(end, f.final_value + eps * (end - n0))


def extend_slow_to(f: PWLFunction, N0, eps) -> PWLFunction:
    """Submultiplicative extension to [1, N0] growing by less than eps in total.

    Step k squares the domain and uses slope min(eps0_k / 2, (eps / 2^k) / length_k);
    the last step is truncated at N0.
    """
    N0, eps = Fraction(N0), Fraction(eps)
    if N0 <= f.domain_end:
        raise ParameterError(f"N0={format_rational(N0)} must exceed the domain end {format_rational(f.domain_end)}")
    if eps <= 0:
        raise ParameterError("eps must be positive")
    g = f
    k = 0
    while g.domain_end < N0:
        k += 1
        n = g.domain_end
        end = min(n * n, N0)
        check_domain_size(end)
        allowance = eps / (2 ** k) / (end - n)
        slope = min(slowdown_epsilon0(g) / 2, allowance)
        g = g.append_segment(end, g.final_value + slope * (end - n))
        if logger.isEnabledFor(logging.DEBUG):
            logger.debug("slow step %d: [%s, %s] slope %s", k, describe_rational(n), describe_rational(end), describe_rational(slope))
    return g


@dataclass
class FastStep:
    function: PWLFunction
    branch: str
    K: Fraction
    n1: Fraction
    epsilon: Fraction
    N0: Fraction

    @property
    def guard_holds(self) -> bool:
        # K/eps >= N0, the last inequality of the speedup argument
        return self.K / self.epsilon >= self.N0

    def to_dict(self) -> dict:
        return {
            "branch": self.branch,
            "K": format_rational(self.K),
            "n1": format_rational(self.n1),
            "epsilon": format_rational(self.epsilon),
            "N0": format_rational(self.N0),
            "value": format_rational(self.function.final_value),
        }


def extend_fast_step(f: PWLFunction) -> FastStep:
    K = f.final_value
    if K < 2:
        raise ParameterError(f"speedup needs S(n0) >= 2, got {format_rational(K)}")
    n0 = f.domain_end
    n1 = n0 * n0
    g = extend_slow(f, slowdown_epsilon0(f) / 2)
    eps = slowdown_epsilon0(g) / 2
    s1 = g.final_value
    target = 3 * K / 2
    check_domain_size(2 * n1)
    if s1 + eps * n1 >= target:
        out = g.append_segment(2 * n1, s1 + eps * n1)
        step = FastStep(out, "early_stop", K, n1, eps, 2 * n1)
    else:
        N0 = n1 + (target - s1) / eps
        check_domain_size(N0)
        out = g.append_segment(N0, target)
        step = FastStep(out, "exact_target", K, n1, eps, N0)
    if logger.isEnabledFor(logging.DEBUG):
        logger.debug("fast step (%s): K=%s -> %s", step.branch, describe_rational(K), describe_rational(out.final_value))
    return step


def extend_fast(f: PWLFunction) -> PWLFunction:
    """Extension with S(N0) >= 3K/2, K = S(n0) >= 2."""
    return extend_fast_step(f).function


def extend_fast_trace(f: PWLFunction, M) -> List[FastStep]:
    M = Fraction(M)
    steps = [extend_fast_step(f)]
    while steps[-1].function.final_value <= M:
        steps.append(extend_fast_step(steps[-1].function))
    logger.info("speedup to M=%s took %d step(s)", describe_rational(M), len(steps))
    return steps


def extend_fast_to(f: PWLFunction, M) -> PWLFunction:
    """Extension to some N0 > n0 with S(N0) > M."""
    return extend_fast_trace(f, M)[-1].function


class RequestLogEntry(BaseModel):
    A: List[int]
    N: int
    witness_n: str
    ratio: str


@dataclass
class RequestRecord:
    A: Tuple[int, ...]
    N: int
    witness_n: Fraction
    ratio: Fraction

    def to_entry(self) -> RequestLogEntry:
        return RequestLogEntry(A=list(self.A), N=self.N, witness_n=format_rational(self.witness_n), ratio=format_rational(self.ratio))


@dataclass
class FamilyState:
    functions: List[PWLFunction]
    request_log: List[RequestRecord] = field(default_factory=list)

    @property
    def size(self) -> int:
        return len(self.functions)

    @property
    def domain_end(self) -> Fraction:
        return self.functions[0].domain_end

    def S(self, i: int, x) -> Fraction:
        """Value of the 1-based member i at x."""
        return self.functions[i - 1].eval(x)

    def max_over(self, subset: Sequence[int], x) -> Fraction:
        return max(self.S(i, x) for i in subset)

    def find_witness(self, A: Sequence[int], N: int) -> Optional[RequestRecord]:
        """A logged request for A with bound at least N."""
        key = tuple(sorted(A))
        for rec in self.request_log:
            if rec.A == key and rec.N >= N:
                return rec
        return None


def enumerate_requests(m: int, request_bound: int) -> Iterator[Tuple[Tuple[int, ...], int]]:
    """(A, N) with N ascending, then A by cardinality, then lexicographically."""
    for N in range(1, request_bound + 1):
        for size in range(1, m):
            for A in combinations(range(1, m + 1), size):
                yield A, N


def witness_ratio(state: FamilyState, A: Sequence[int], n) -> Fraction:
    """min over j not in A of S_j(n) / max_{i in A} S_i(n)."""
    outside = [j for j in range(1, state.size + 1) if j not in A]
    base = state.max_over(A, n)
    return min(state.S(j, n) for j in outside) / base


def serve_request(state: FamilyState, A: Sequence[int], N: int) -> RequestRecord:
    A = tuple(sorted(A))
    m = state.size
    if not A or len(A) >= m or any(not 1 <= i <= m for i in A):
        raise ParameterError(f"A={list(A)} must be a nonempty proper subset of 1..{m}")
    n0 = state.domain_end
    M = N * (state.max_over(A, n0) + 1)

    funcs = list(state.functions)
    for j in range(1, m + 1):
        if j not in A:
            funcs[j - 1] = extend_fast_to(funcs[j - 1], M)
    # integer, so the witness is the length of a constant block 1^n
    target = Fraction(math.ceil(max(f.domain_end for f in funcs)))
    for idx, f in enumerate(funcs):
        if f.domain_end < target:
            funcs[idx] = extend_slow_to(f, target, 1)
    state.functions = funcs

    ratio = witness_ratio(state, A, target)
    if not ratio > N:
        raise InvariantError(f"request A={list(A)}, N={N}: ratio {format_rational(ratio)} not above N")
    rec = RequestRecord(A, N, target, ratio)
    state.request_log.append(rec)
    logger.info("served A=%s N=%d: witness n~2^%.1f ratio %s", list(A), N, log2_fraction(target), describe_rational(ratio))
    return rec


def build_incomparable_family(m: int, request_bound: int, verify: bool = False) -> FamilyState:
    if m < 2:
        raise ParameterError("family needs at least two members")
    if request_bound < 1:
        raise ParameterError("request_bound must be at least 1")
    state = FamilyState([identity_pwl() for _ in range(m)])
    for A, N in enumerate_requests(m, request_bound):
        serve_request(state, A, N)
        if verify:
            for i, f in enumerate(state.functions, 1):
                rep = check_submultiplicative(f)
                if not rep.ok:
                    raise InvariantError(f"S_{i} lost submultiplicativity after request A={list(A)}, N={N}")
    logger.info(f"family of {m} built with {len(state.request_log)} requests")
    return state


@dataclass
class FamilyReport:
    ok: bool
    common_domain: bool
    failures: List[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"ok": self.ok, "common_domain": self.common_domain, "failures": self.failures}


def verify_family(state: FamilyState) -> FamilyReport:
    """Recheck every logged witness against the current functions."""
    common = len({f.domain_end for f in state.functions}) == 1
    failures = []
    for rec in state.request_log:
        ratio = witness_ratio(state, rec.A, rec.witness_n)
        if not ratio > rec.N:
            failures.append({"A": list(rec.A), "N": rec.N, "ratio": format_rational(ratio)})
    return FamilyReport(ok=common and not failures, common_domain=common, failures=failures)


def save_family(state: FamilyState, out_dir) -> List[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for i, f in enumerate(state.functions, 1):
        path = out_dir / f"S_{i}.csv"
        path.write_text(f.to_csv_text(), encoding="utf-8")
        written.append(path)
    written.append(write_json(out_dir / "requests.json", [rec.to_entry().model_dump() for rec in state.request_log]))
    return written


def load_family(out_dir, m: int) -> FamilyState:
    out_dir = Path(out_dir)
    funcs = [pwl_from_csv_text((out_dir / f"S_{i}.csv").read_text(encoding="utf-8")) for i in range(1, m + 1)]
    raw = read_json(out_dir / "requests.json")
    if not isinstance(raw, list):
        raise InputFormatError("requests.json must hold a list")
    log = []
    for item in raw:
        e = RequestLogEntry.model_validate(item)
        log.append(RequestRecord(tuple(e.A), e.N, parse_rational(e.witness_n), parse_rational(e.ratio)))
    return FamilyState(funcs, log)
