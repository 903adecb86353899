# services_encoder.py
"""
Encoding of a finite lattice by 0/1 patterns rho_e, one per lattice element.

The minimum gets the all-ones pattern; every other element starts with a zero
at position 1. Each (eps, A) request, A a down-set, first puts zeros on the
next d powers of two for the elements outside A (so that M_j / M_k < eps at the
last of them for j in A, k outside A) and then puts zeros on the following d
powers of two for the elements of A, which restores equal ones counts.

Zero positions stay a subset of {1, 2, 4, 8, ...}; horizons grow quickly, so
every "for all k" check is evaluated at the positions where some ones count
changes.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import Dict, List, Optional, Sequence, Tuple

from pydantic import BaseModel

from services_domination import DominationMatrix, Evidence
from services_lattice import FiniteLattice, parse_lattice
from services_orlicz import (
    OrliczFunction,
    OrliczParams,
    Pattern,
    pattern_from_rle_text,
    pointwise_compare,
    ratio_below,
    shift_minimal,
)
from utils_errors import InvariantError, ParameterError
from utils_helpers import format_rational, parallel_map, parse_rational
from utils_logger import get_logger
from config_settings import settings

logger = get_logger("encoder")


def next_powers_of_two(after: int, count: int) -> List[int]:
    """The `count` smallest powers of two strictly greater than `after`."""
    first = 1 << max(after, 0).bit_length()
    return [first << i for i in range(count)]


def is_power_of_two(n: int) -> bool:
    return n > 0 and n & (n - 1) == 0


def zero_count(params: OrliczParams, eps) -> int:
    """Least d with tau^((p - r) d) < eps, compared exactly."""
    eps = parse_rational(eps)
    if not 0 < eps < 1:
        raise ParameterError(f"eps={format_rational(eps)} must lie in (0, 1)")
    guess = math.log(eps.numerator / eps.denominator) / (float(params.gap) * params.ln_tau)
    d = max(1, math.floor(guess) + 1)
    while not ratio_below(params, params.gap * d, eps):
        d += 1
    while d > 1 and ratio_below(params, params.gap * (d - 1), eps):
        d -= 1
    return d


@dataclass(frozen=True)
class ScheduledRequest:
    eps: Fraction
    element: int
    A: frozenset


@dataclass(frozen=True)
class DominationRecord:
    eps: Fraction
    element: int
    A: Tuple[int, ...]
    start: int
    m: int
    n1: int
    d: int
    trivial: bool = False


@dataclass
class EncoderState:
    lattice: FiniteLattice
    params: OrliczParams
    patterns: List[Pattern]
    checkpoints: List[int] = field(default_factory=list)
    request_log: List[DominationRecord] = field(default_factory=list)

    @property
    def horizon(self) -> int:
        return self.patterns[0].horizon

    @property
    def active(self) -> List[int]:
        return self.lattice.non_minimum()

    def orlicz(self, e: int) -> OrliczFunction:
        return OrliczFunction(self.params, self.patterns[e])

    def ones(self, e: int, k: int) -> int:
        return self.patterns[e].ones(k)

    def events(self, elements: Optional[Sequence[int]] = None) -> List[int]:
        """0 plus every zero position of the given patterns."""
        elements = range(len(self.patterns)) if elements is None else elements
        pts = {0}
        for e in elements:
            pts.update(self.patterns[e].zero_positions)
        return sorted(pts)


def init_state(L: FiniteLattice, params: OrliczParams) -> EncoderState:
    patterns = [Pattern(1, () if e == L.minimum_index else (1,)) for e in range(L.size)]
    return EncoderState(L, params, patterns, checkpoints=[1])


def request_schedule(L: FiniteLattice, depth: int) -> List[ScheduledRequest]:
    """Diagonal enumeration of (eps = 2^-k, A = down_set(j)) over k + j <= depth + 1.

    j runs over the non-minimum elements in listed order (1-based); within a
    diagonal the coarser eps comes first.
    """
    if depth < 1:
        raise ParameterError("depth must be at least 1")
    active = L.non_minimum()
    pairs = [(k, j) for k in range(1, depth + 1) for j in range(1, len(active) + 1) if k + j <= depth + 1]
    pairs.sort(key=lambda kj: (kj[0] + kj[1], kj[0]))
    return [ScheduledRequest(Fraction(1, 2 ** k), active[j - 1], L.down_set(active[j - 1])) for k, j in pairs]


def apply_domination(state: EncoderState, eps, A) -> DominationRecord:
    eps = parse_rational(eps)
    if eps >= 1 or eps <= 0:
        raise ParameterError(f"eps={format_rational(eps)} must lie in (0, 1)")
    L = state.lattice
    A = frozenset(A)
    if not state.lattice.is_down_set(A):
        raise ParameterError(f"{sorted(L.names[i] for i in A)} is not a down-set")
    N = state.horizon
    if not state.checkpoints or state.checkpoints[-1] != N:
        raise InvariantError(f"horizon {N} is not a checkpoint")
    element = L.join_all(A)
    inside = [e for e in state.active if e in A]
    outside = [e for e in state.active if e not in A]

    if not A or not outside:
        state.patterns = [p.extended(N + 1) for p in state.patterns]
        state.checkpoints.append(N + 1)
        rec = DominationRecord(eps, element, tuple(sorted(A)), N, N, N + 1, 0, trivial=True)
        state.request_log.append(rec)
        logger.debug(f"trivial request at N={N}")
        return rec

    d = zero_count(state.params, eps)
    first = next_powers_of_two(N, d)
    m = first[-1]
    second = next_powers_of_two(m, d)
    n1 = second[-1] << 1
    new = []
    for e, pat in enumerate(state.patterns):
        zeros = first if e in outside else second if e in inside else ()
        new.append(pat.extended(n1, zeros))
    state.patterns = new

    for j in A:
        for k in outside:
            gap = state.params.gap * (state.ones(j, m) - state.ones(k, m))
            if not ratio_below(state.params, gap, eps):
                raise InvariantError(f"M_{L.names[j]}/M_{L.names[k]} not below {format_rational(eps)} at tau^{m}")
    counts = {state.ones(e, n1) for e in state.active}
    if len(counts) > 1:
        raise InvariantError(f"ones counts differ at N1={n1}")
    state.checkpoints.append(n1)
    rec = DominationRecord(eps, element, tuple(sorted(A)), N, m, n1, d)
    state.request_log.append(rec)
    logger.debug(f"request eps={format_rational(eps)} A={sorted(L.names[i] for i in A)}: d={d}, m=2^{m.bit_length() - 1}")
    return rec


def run_encoder(L: FiniteLattice, params: OrliczParams, depth: int) -> EncoderState:
    state = init_state(L, params)
    schedule = request_schedule(L, depth)
    for req in schedule:
        apply_domination(state, req.eps, req.A)
    logger.info(f"encoded {L.size}-element lattice with {len(schedule)} requests; horizon 2^{state.horizon.bit_length() - 1}")
    return state


@dataclass
class PropertyResult:
    label: str
    ok: bool
    checked: int = 0
    failure: Optional[Dict] = None
    evidence: List[Dict] = field(default_factory=list)

    def to_dict(self) -> Dict:
        out = {"label": self.label, "ok": self.ok, "checked": self.checked, "failure": self.failure}
        if self.evidence:
            out["evidence"] = self.evidence
        return out


@dataclass
class EncoderReport:
    horizon: int
    results: List[PropertyResult]

    @property
    def ok(self) -> bool:
        return all(r.ok for r in self.results)

    def get(self, label: str) -> PropertyResult:
        return next(r for r in self.results if r.label == label)

    def to_dict(self) -> Dict:
        return {
            "ok": self.ok,
            "horizon_bits": self.horizon.bit_length(),
            "results": [r.to_dict() for r in self.results],
        }


def check_minimum_pattern(state: EncoderState) -> PropertyResult:
    """(i) the minimum's exponent is p k at every k."""
    e0 = state.lattice.minimum_index
    pat = state.patterns[e0]
    M = state.orlicz(e0)
    if pat.zero_positions:
        return PropertyResult("i", False, 1, {"element": state.lattice.names[e0], "k": pat.zero_positions[0]})
    if M.exponent_at(pat.horizon) != state.params.p * pat.horizon:
        return PropertyResult("i", False, 1, {"element": state.lattice.names[e0], "k": pat.horizon})
    return PropertyResult("i", True, 1)


def check_order(state: EncoderState, threads: Optional[int] = None) -> PropertyResult:
    """(ii) pointwise M_i <= M_j iff e_i <= e_j, plus the logged eps witnesses.

    Every pair with e_i not below e_j gets evidence: the node where M_i / M_j is
    largest and the eps levels served against it. Requests for e_j serve the pair;
    for the minimum, which is never requested, any request whose A misses e_i does,
    since the minimum has a one at every position.
    """
    L = state.lattice
    funcs = [state.orlicz(e) for e in range(L.size)]
    pairs = [(i, j) for i in range(L.size) for j in range(L.size)]

    def check(pair):
        i, j = pair
        names = [L.names[i], L.names[j]]
        cmp = pointwise_compare(funcs[i], funcs[j])
        le = cmp.min_diff >= 0
        if le != L.leq(i, j):
            k = cmp.le_witness if not le else None
            return {"pair": names, "k": k, "reason": "pointwise order differs from the lattice"}, None
        if le:
            return None, None
        served = []
        for rec in state.request_log:
            if rec.trivial:
                continue
            if rec.element != j and not (j == L.minimum_index and i not in rec.A):
                continue
            gap = state.params.gap * (state.ones(j, rec.m) - state.ones(i, rec.m))
            if not ratio_below(state.params, gap, rec.eps):
                return {"pair": names, "k": rec.m, "reason": f"no eps={format_rational(rec.eps)} divergence"}, None
            served.append({"eps": format_rational(rec.eps), "m": rec.m})
        return None, {"pair": names, "k": cmp.le_witness, "served": served}

    out = parallel_map(check, pairs, settings.threads if threads is None else threads)
    failures = [f for f, _ in out if f]
    evidence = [ev for _, ev in out if ev]
    return PropertyResult("ii", not failures, len(pairs), failures[0] if failures else None, evidence)


def nonempty_subsets(items: Sequence[int]) -> List[Tuple[int, ...]]:
    return [F for size in range(1, len(items) + 1) for F in combinations(items, size)]


def _join_failure(state: EncoderState, F: Tuple[int, ...], use_exponents: bool) -> Optional[Dict]:
    L = state.lattice
    top = L.join_all(F)
    funcs = [state.orlicz(e) for e in F]
    joined = state.orlicz(top)
    for k in state.events(F + (top,)):
        if use_exponents:
            lhs = min(M.exponent_at(k) for M in funcs)
            rhs = joined.exponent_at(k)
        else:
            lhs = min(state.ones(e, k) for e in F)
            rhs = state.ones(top, k)
        if lhs != rhs:
            return {"subset": [L.names[e] for e in F], "join": L.names[top], "k": k}
    return None


def check_joins(state: EncoderState, threads: Optional[int] = None) -> PropertyResult:
    """(iii) min over F of the ones counts equals the ones count of join(F)."""
    subsets = nonempty_subsets(range(state.lattice.size))
    out = parallel_map(lambda F: _join_failure(state, F, False), subsets, settings.threads if threads is None else threads)
    failures = [f for f in out if f]
    return PropertyResult("iii", not failures, len(subsets), failures[0] if failures else None)


def check_finite_max(state: EncoderState, threads: Optional[int] = None) -> PropertyResult:
    """(iv) the pointwise max of M_j over B is attained by the single function M_join(B)."""
    subsets = nonempty_subsets(range(state.lattice.size))
    out = parallel_map(lambda B: _join_failure(state, B, True), subsets, settings.threads if threads is None else threads)
    failures = [f for f in out if f]
    return PropertyResult("iv", not failures, len(subsets), failures[0] if failures else None)


def verify_balance(state: EncoderState) -> PropertyResult:
    active = state.active
    for c in state.checkpoints:
        if c > state.horizon:
            return PropertyResult("balance", False, len(state.checkpoints), {"k": c, "reason": "checkpoint beyond horizon"})
        counts = {state.ones(e, c) for e in active}
        if len(counts) > 1:
            return PropertyResult("balance", False, len(state.checkpoints), {"k": c})
    if state.checkpoints and state.checkpoints[-1] != state.horizon:
        return PropertyResult("balance", False, len(state.checkpoints), {"k": state.horizon, "reason": "horizon is not a checkpoint"})
    return PropertyResult("balance", True, len(state.checkpoints))


def verify_shift_minimal(state: EncoderState) -> PropertyResult:
    """Zero positions are powers of two, rho_e(1) = 0 off the minimum, and the shift inequality holds."""
    L = state.lattice
    for e, pat in enumerate(state.patterns):
        if e != L.minimum_index and (not pat.zero_positions or pat.zero_positions[0] != 1):
            return PropertyResult("shift", False, e + 1, {"element": L.names[e], "k": 1, "reason": "rho(1) != 0"})
        off = next((z for z in pat.zero_positions if not is_power_of_two(z)), None)
        if off is not None:
            return PropertyResult("shift", False, e + 1, {"element": L.names[e], "k": off, "reason": "zero off the powers of two"})
        bad = shift_minimal(pat)
        if bad is not None:
            return PropertyResult("shift", False, e + 1, {"element": L.names[e], "k": bad[0], "n": bad[1]})
    return PropertyResult("shift", True, len(state.patterns))


def verify_properties(state: EncoderState, threads: Optional[int] = None) -> EncoderReport:
    results = [
        check_minimum_pattern(state),
        check_order(state, threads),
        check_joins(state, threads),
        check_finite_max(state, threads),
        verify_balance(state),
        verify_shift_minimal(state),
    ]
    report = EncoderReport(state.horizon, results)
    for r in results:
        if not r.ok:
            logger.warning(f"property {r.label} fails: {r.failure}")
    logger.info(f"encoder verification: {'pass' if report.ok else 'FAIL'}")
    return report


def domination_matrix(state: EncoderState) -> DominationMatrix:
    """Exact domination between the M_e: constant 1 from the ones counts, or the
    node tau^k where M_i / M_j is largest."""
    L = state.lattice
    funcs = [state.orlicz(e) for e in range(L.size)]
    dm = DominationMatrix(list(L.names), metadata={"params": state.params.to_dict(), "horizon_bits": state.horizon.bit_length()})
    for i in range(L.size):
        for j in range(L.size):
            cmp = pointwise_compare(funcs[i], funcs[j])
            if cmp.min_diff >= 0:
                dm.record(i, j, Evidence(constant=1, note="pointwise at every node"))
            else:
                log_ratio = float(state.params.gap) * cmp.min_diff * state.params.ln_tau
                ratio = math.exp(min(log_ratio, 700.0))
                dm.record(i, j, Evidence(witness_m=cmp.le_witness, ratio=ratio, note="M_i/M_j at tau^k"))
    return dm


class RequestEntry(BaseModel):
    eps: str
    element: str
    A: List[str]
    start: int
    m: int
    n1: int
    d: int
    trivial: bool = False


class EncoderBundle(BaseModel):
    lattice: Dict
    params: Dict[str, str]
    horizon: int
    patterns: Dict[str, str]
    checkpoints: List[int]
    request_log: List[RequestEntry]


def export_bundle(state: EncoderState) -> Dict:
    L = state.lattice
    bundle = EncoderBundle(
        lattice=L.to_document(),
        params=state.params.to_dict(),
        horizon=state.horizon,
        patterns={L.names[e]: pat.to_rle_text() for e, pat in enumerate(state.patterns)},
        checkpoints=list(state.checkpoints),
        request_log=[
            RequestEntry(
                eps=format_rational(r.eps),
                element=L.names[r.element],
                A=[L.names[i] for i in r.A],
                start=r.start,
                m=r.m,
                n1=r.n1,
                d=r.d,
                trivial=r.trivial,
            )
            for r in state.request_log
        ],
    )
    return bundle.model_dump()


def import_bundle(doc: Dict) -> EncoderState:
    bundle = EncoderBundle.model_validate(doc)
    L = parse_lattice(bundle.lattice)
    params = OrliczParams.validated(bundle.params["tau"], bundle.params["r"], bundle.params["p"])
    patterns = []
    for name in L.names:
        if name not in bundle.patterns:
            raise ParameterError(f"bundle has no pattern for {name!r}")
        pat = pattern_from_rle_text(bundle.patterns[name])
        if pat.horizon != bundle.horizon:
            raise InvariantError(f"pattern {name!r} has horizon {pat.horizon}, bundle says {bundle.horizon}")
        patterns.append(pat)
    log = [
        DominationRecord(
            parse_rational(r.eps), L.index(r.element), tuple(L.index(a) for a in r.A), r.start, r.m, r.n1, r.d, r.trivial
        )
        for r in bundle.request_log
    ]
    return EncoderState(L, params, patterns, list(bundle.checkpoints), log)
