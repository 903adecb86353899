# services_orlicz.py
"""
Orlicz functions M_eta coded by 0/1 patterns.

For fixed 0 < tau < 1 and 1 < r < p the function M_eta is piecewise linear on
(0, 1] with M(1) = 1 and M(tau^k) = tau^(r k + (p - r) ones(k)), where
ones(k) counts the ones among eta(1..k). A zero therefore makes M larger.

Exponents, pattern comparisons and ratio gaps are exact rationals; values
and the Luxemburg norm are floats.
"""

import math
from bisect import bisect_right
from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from mpmath import mp, mpf

from config_settings import settings
from utils_errors import DomainError, InputFormatError, InvariantError, ParameterError
from utils_helpers import describe_rational, format_rational, log2_int, parse_rational, power_below
from utils_logger import get_logger

logger = get_logger("orlicz")

LN2 = math.log(2.0)


class Verdict(str, Enum):
    VALID = "valid"
    INVALID = "invalid"
    INDETERMINATE = "indeterminate"


@dataclass(frozen=True)
class OrliczParams:
    tau: Fraction
    r: Fraction
    p: Fraction

    def __post_init__(self):
        for name in ("tau", "r", "p"):
            object.__setattr__(self, name, parse_rational(getattr(self, name)))
        if not 0 < self.tau < 1:
            raise ParameterError(f"tau={format_rational(self.tau)} must lie in (0,1)")
        if not 1 < self.r < self.p:
            raise ParameterError(f"need 1 < r < p, got r={format_rational(self.r)}, p={format_rational(self.p)}")

    @classmethod
    def validated(cls, tau, r, p) -> "OrliczParams":
        params = cls(tau, r, p)
        verdict = validate_params(params.tau, params.r, params.p)
        if verdict is not Verdict.VALID:
            raise ParameterError(f"parameters (tau, r, p) = {params.label()} are {verdict.value} for convexity")
        return params

    @classmethod
    def default(cls) -> "OrliczParams":
        return cls.validated(settings.tau, settings.r, settings.p)

    @property
    def gap(self) -> Fraction:
        return self.p - self.r

    @property
    def ln_tau(self) -> float:
        return math.log(self.tau.numerator) - math.log(self.tau.denominator)

    def label(self) -> str:
        return f"({format_rational(self.tau)}, {format_rational(self.r)}, {format_rational(self.p)})"

    def to_dict(self) -> dict:
        return {"tau": format_rational(self.tau), "r": format_rational(self.r), "p": format_rational(self.p)}


def validate_params(tau, r, p, margin: Optional[float] = None) -> Verdict:
    """Both chord-slope conditions
    tau^(r-1) (1 - tau^p) <= 1 - tau^r  and  tau^(p-1) (1 - tau^r) <= 1 - tau^p
    in high precision, with a margin band around the boundary."""
    margin = settings.param_margin if margin is None else margin
    tau, r, p = parse_rational(tau), parse_rational(r), parse_rational(p)
    if not (0 < tau < 1 and 1 < r < p):
        raise ParameterError("validate_params needs 0 < tau < 1 and 1 < r < p")
    with mp.workdps(settings.exact_digits):
        t = mpf(tau.numerator) / tau.denominator
        R = mpf(r.numerator) / r.denominator
        P = mpf(p.numerator) / p.denominator
        first = (1 - t ** R) - t ** (R - 1) * (1 - t ** P)
        second = (1 - t ** P) - t ** (P - 1) * (1 - t ** R)
        low = min(first, second)
    if low >= margin:
        return Verdict.VALID
    if low <= -margin:
        return Verdict.INVALID
    logger.warning(f"parameters ({tau}, {r}, {p}) are within {margin} of the convexity boundary")
    return Verdict.INDETERMINATE


@dataclass(frozen=True)
class Pattern:
    """0/1 sequence eta(1..horizon), stored by its sorted zero positions."""

    horizon: int
    zero_positions: Tuple[int, ...] = ()

    def __post_init__(self):
        zeros = tuple(int(z) for z in self.zero_positions)
        object.__setattr__(self, "horizon", int(self.horizon))
        object.__setattr__(self, "zero_positions", zeros)
        if self.horizon < 0:
            raise InvariantError("negative horizon")
        if any(b <= a for a, b in zip(zeros, zeros[1:])):
            raise InvariantError("zero positions must be strictly increasing")
        if zeros and (zeros[0] < 1 or zeros[-1] > self.horizon):
            raise InvariantError("zero positions outside [1, horizon]")

    @classmethod
    def all_ones(cls, horizon: int) -> "Pattern":
        return cls(horizon, ())

    @classmethod
    def from_zero_positions(cls, horizon: int, zeros) -> "Pattern":
        return cls(horizon, tuple(sorted(set(int(z) for z in zeros))))

    @classmethod
    def from_bits(cls, bits: Sequence[int]) -> "Pattern":
        if any(b not in (0, 1) for b in bits):
            raise InvariantError("pattern entries must be 0 or 1")
        return cls(len(bits), tuple(i for i, b in enumerate(bits, 1) if b == 0))

    @classmethod
    def from_rle(cls, runs: Sequence[Tuple[int, int]]) -> "Pattern":
        pos, zeros = 0, []
        for bit, count in runs:
            if bit not in (0, 1) or count < 1:
                raise InputFormatError(f"bad run ({bit}, {count})")
            if bit == 0:
                zeros.extend(range(pos + 1, pos + count + 1))
            pos += count
        return cls(pos, tuple(zeros))

    def bit(self, i: int) -> int:
        if not 1 <= i <= self.horizon:
            raise DomainError(f"position {describe_rational(i)} outside [1, {describe_rational(self.horizon)}]")
        j = bisect_right(self.zero_positions, i)
        return 0 if j and self.zero_positions[j - 1] == i else 1

    def zeros_upto(self, k: int) -> int:
        return bisect_right(self.zero_positions, k)

    def ones(self, k: int) -> int:
        """Cumulative ones count eta(1) + ... + eta(k)."""
        if not 0 <= k <= self.horizon:
            raise DomainError(f"k={describe_rational(k)} outside [0, {describe_rational(self.horizon)}]")
        return k - self.zeros_upto(k)

    def rle(self) -> List[Tuple[int, int]]:
        runs: List[Tuple[int, int]] = []

        def push(bit, count):
            if count <= 0:
                return
            if runs and runs[-1][0] == bit:
                runs[-1] = (bit, runs[-1][1] + count)
            else:
                runs.append((bit, count))

        prev = 0
        for z in self.zero_positions:
            push(1, z - prev - 1)
            push(0, 1)
            prev = z
        push(1, self.horizon - prev)
        return runs

    def extended(self, horizon: int, zeros: Sequence[int] = ()) -> "Pattern":
        return Pattern(horizon, self.zero_positions + tuple(zeros))

    def to_rle_text(self) -> str:
        return ",".join(f"{bit}x{count}" for bit, count in self.rle())

    def to_dict(self) -> dict:
        return {"horizon": self.horizon, "zero_positions": list(self.zero_positions), "rle": self.to_rle_text()}


def pattern_from_rle_text(text: str) -> Pattern:
    text = text.strip()
    if not text:
        return Pattern(0, ())
    runs = []
    for token in text.split(","):
        try:
            bit, count = token.strip().split("x")
            runs.append((int(bit), int(count)))
        except ValueError:
            raise InputFormatError(f"bad RLE token {token!r}") from None
    return Pattern.from_rle(runs)


def pattern_from_dict(doc: dict) -> Pattern:
    if "rle" in doc:
        pat = pattern_from_rle_text(doc["rle"])
        if "horizon" in doc and int(doc["horizon"]) != pat.horizon:
            raise InputFormatError("RLE length disagrees with the declared horizon")
        return pat
    return Pattern(int(doc["horizon"]), tuple(int(z) for z in doc.get("zero_positions", ())))


@dataclass(frozen=True)
class OrliczFunction:
    params: OrliczParams
    pattern: Pattern

    @property
    def horizon(self) -> int:
        return self.pattern.horizon

    def exponent_at(self, k: int) -> Fraction:
        """r k + (p - r) ones(k), so that M(tau^k) = tau^exponent."""
        return self.params.r * k + self.params.gap * self.pattern.ones(k)

    def value_at(self, k: int) -> float:
        return math.exp(float(self.exponent_at(k)) * self.params.ln_tau)

    def _small_zeros(self) -> np.ndarray:
        return np.asarray([z for z in self.pattern.zero_positions if z < (1 << 62)], dtype=np.int64)

    def _exponents(self, ks: np.ndarray) -> np.ndarray:
        ones = ks - np.searchsorted(self._small_zeros(), ks, side="right")
        return float(self.params.r) * ks + float(self.params.gap) * ones

    def eval_many(self, ts) -> np.ndarray:
        """Vectorised M(t) for t in (0, 1]; linear between the nodes tau^k."""
        ts = np.asarray(ts, dtype=float)
        if np.any(ts <= 0) or np.any(ts > 1):
            raise DomainError("Orlicz function evaluated outside (0, 1]")
        ln_tau = self.params.ln_tau
        ks = np.floor(np.log(ts) / ln_tau).astype(np.int64)
        ks = np.maximum(ks, 0)
        t_k = np.exp(ks * ln_tau)
        # ks from floor can overshoot by one ulp at the nodes
        over = ts > t_k
        ks = np.where(over, ks - 1, ks)
        t_k = np.exp(ks * ln_tau)
        at_node = np.isclose(ts, t_k, rtol=1e-14, atol=0.0)
        # nodes beyond 2^62 are never reached by a float t
        cap = min(self.horizon, 1 << 62)
        if np.any((ks + 1 > cap) & ~(at_node & (ks <= cap))):
            raise DomainError(f"t below tau^{describe_rational(self.horizon)}: horizon exhausted")
        k1 = np.minimum(ks + 1, cap)
        m_k = np.exp(self._exponents(ks) * ln_tau)
        m_k1 = np.exp(self._exponents(k1) * ln_tau)
        t_k1 = np.exp(k1 * ln_tau)
        span = t_k - t_k1
        with np.errstate(invalid="ignore", divide="ignore"):
            lam = np.where(span > 0, (ts - t_k1) / span, 1.0)
        return np.where(at_node, m_k, m_k1 + (m_k - m_k1) * lam)

    def eval(self, t) -> float:
        return float(self.eval_many([float(t)])[0])

    __call__ = eval

    def inverse_log(self, log_s: float) -> float:
        """ln t for the t with M(t) = s, given ln s <= 0 (works far below float range)."""
        if log_s > 0:
            raise DomainError("inverse needs s in (0, 1]")
        y = log_s / self.params.ln_tau  # target exponent, >= 0
        if float(self.exponent_at(self.horizon)) < y:
            raise DomainError("inverse beyond the resolved range: horizon exhausted")
        lo, hi = 0, self.horizon
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if float(self.exponent_at(mid)) <= y:
                lo = mid
            else:
                hi = mid
        k = lo
        if float(self.exponent_at(k)) >= y or k == self.horizon:
            return k * self.params.ln_tau
        ln_tau = self.params.ln_tau
        e_k, e_k1 = float(self.exponent_at(k)), float(self.exponent_at(k + 1))
        # t = tau^(k+1) (1 + lam (1/tau - 1)), lam = (s/M_{k+1} - 1) / (M_k/M_{k+1} - 1)
        lam = math.expm1((y - e_k1) * ln_tau) / math.expm1((e_k - e_k1) * ln_tau)
        return (k + 1) * ln_tau + math.log1p(lam * math.expm1(-ln_tau))

    def inverse_eval(self, s: float) -> float:
        return math.exp(self.inverse_log(math.log(s)))


def exponent_at(M: OrliczFunction, k: int) -> Fraction:
    return M.exponent_at(k)


def orlicz_eval(M: OrliczFunction, t) -> float:
    return M.eval(t)


def inverse_eval(M: OrliczFunction, s: float) -> float:
    return M.inverse_eval(s)


def luxemburg_norm(M: OrliczFunction, a, tol: Optional[float] = None) -> float:
    """inf{rho > 0 : sum M(|a_n| / rho) <= 1} by bisection on [max|a_n|, sum|a_n|]."""
    tol = settings.luxemburg_tol if tol is None else tol
    if tol <= 0:
        raise ParameterError("tol must be positive")
    mags = np.abs(np.asarray(a, dtype=float))
    mags = mags[mags > 0]
    if mags.size == 0:
        raise ParameterError("Luxemburg norm of the zero vector")
    lo, hi = float(mags.max()), float(mags.sum())
    if mags.size == 1:
        return lo

    def residual(rho):
        return float(np.sum(M.eval_many(np.minimum(mags / rho, 1.0)))) - 1.0

    if residual(hi) > tol:
        # M(t) <= t fails only through rounding; widen once
        hi *= 1 + 1e-12
    for _ in range(400):
        mid = 0.5 * (lo + hi)
        f = residual(mid)
        if abs(f) <= tol:
            return mid
        if f > 0:
            lo = mid
        else:
            hi = mid
        if hi - lo <= 1e-15 * hi:
            return mid
    return 0.5 * (lo + hi)


def constant_block_log_norm(M: OrliczFunction, log_n: float) -> float:
    """ln ||1^n|| = -ln M^{-1}(1/n)."""
    return -M.inverse_log(-log_n)


def constant_block_norm(M: OrliczFunction, n: int) -> float:
    return math.exp(constant_block_log_norm(M, log2_int(n) * LN2))


class Order(str, Enum):
    LE = "LE"
    GE = "GE"
    EQ = "EQ"
    INCOMPARABLE = "INCOMPARABLE"


@dataclass(frozen=True)
class Comparison:
    order: Order
    min_diff: int
    argmin: int
    max_diff: int
    argmax: int

    @property
    def le_witness(self) -> Optional[int]:
        """k with ones_i(k) < ones_j(k), i.e. M_i(tau^k) > M_j(tau^k)."""
        return self.argmin if self.min_diff < 0 else None

    @property
    def ge_witness(self) -> Optional[int]:
        return self.argmax if self.max_diff > 0 else None


def _check_pair(M_i: OrliczFunction, M_j: OrliczFunction):
    if M_i.params != M_j.params:
        raise ParameterError("Orlicz functions use different (tau, r, p)")
    if M_i.horizon != M_j.horizon:
        raise ParameterError(f"horizons differ: {M_i.horizon} vs {M_j.horizon}")


def ones_difference_extrema(P_i: Pattern, P_j: Pattern) -> Tuple[int, int, int, int]:
    """min/max over k of ones_i(k) - ones_j(k) with a k attaining each.

    The difference only changes at zero positions, so those are the events."""
    zi, zj = P_i.zero_positions, P_j.zero_positions
    events = sorted(set(zi) | set(zj))
    lo, lo_k, hi, hi_k = 0, 0, 0, 0
    a = b = 0
    for k in events:
        while a < len(zi) and zi[a] <= k:
            a += 1
        while b < len(zj) and zj[b] <= k:
            b += 1
        d = b - a  # zeros of j minus zeros of i
        if d < lo:
            lo, lo_k = d, k
        if d > hi:
            hi, hi_k = d, k
    return lo, lo_k, hi, hi_k


def pointwise_compare(M_i: OrliczFunction, M_j: OrliczFunction) -> Comparison:
    """LE iff ones_i(k) >= ones_j(k) for every k, i.e. M_i <= M_j on (tau^horizon, 1]."""
    _check_pair(M_i, M_j)
    lo, lo_k, hi, hi_k = ones_difference_extrema(M_i.pattern, M_j.pattern)
    le, ge = lo >= 0, hi <= 0
    if le and ge:
        order = Order.EQ
    elif le:
        order = Order.LE
    elif ge:
        order = Order.GE
    else:
        order = Order.INCOMPARABLE
    return Comparison(order, lo, lo_k, hi, hi_k)


def ratio_gap(M_i: OrliczFunction, M_j: OrliczFunction, k: int) -> Fraction:
    """d(k) = (p - r)(ones_i(k) - ones_j(k)); M_i(tau^k) / M_j(tau^k) = tau^d(k)."""
    _check_pair(M_i, M_j)
    return M_i.params.gap * (M_i.pattern.ones(k) - M_j.pattern.ones(k))


def ratio_below(params: OrliczParams, d, eps) -> bool:
    """tau^d < eps, exactly for rational eps, else with a 1e-12 margin on logs."""
    if isinstance(eps, (int, Fraction)):
        return power_below(params.tau, Fraction(d), Fraction(eps))
    return float(d) * params.ln_tau < math.log(eps) - 1e-12


def equivalence_gap(M_i: OrliczFunction, M_j: OrliczFunction) -> Tuple[Fraction, Fraction]:
    """Exponent gaps (g_ij, g_ji) with M_i <= tau^(-g_ij) M_j and M_j <= tau^(-g_ji) M_i
    at every node up to the horizon."""
    _check_pair(M_i, M_j)
    lo, _, hi, _ = ones_difference_extrema(M_i.pattern, M_j.pattern)
    gap = M_i.params.gap
    return gap * max(0, -lo), gap * max(0, hi)


def shift_minimal(pattern: Pattern) -> Optional[Tuple[int, int]]:
    """None when sum_{i<=n} eta(i) <= sum_{i=k+1}^{k+n} eta(i) for all k, n in range;
    otherwise a violating (k, n).

    Window of length n holds at most c zeros iff the tightest run of c zeros
    spans more than n, so it suffices that the first c zeros are the tightest run.
    """
    z = pattern.zero_positions
    for c in range(1, len(z) + 1):
        span, start = None, 0
        for t in range(len(z) - c + 1):
            s = z[t + c - 1] - z[t] + 1
            if span is None or s < span:
                span, start = s, t
        if z[c - 1] > span:
            return z[start] - 1, span
    return None


def shift_minimal_bruteforce(pattern: Pattern) -> Optional[Tuple[int, int]]:
    H = pattern.horizon
    bits = np.ones(H + 1, dtype=np.int64)
    bits[0] = 0
    for zpos in pattern.zero_positions:
        bits[zpos] = 0
    pref = np.cumsum(bits)
    for n in range(1, H + 1):
        windows = pref[n:] - pref[:-n] if n <= H else np.array([])
        # windows[k] = sum_{i=k+1}^{k+n}
        bad = np.nonzero(windows < pref[n])[0]
        if bad.size:
            return int(bad[0]), n
    return None


def single_space_pattern(positions: Sequence[int], horizon: int) -> Pattern:
    """Zeros exactly at n_1 = 1 < n_2 < ... with strictly increasing gaps."""
    ns = [int(n) for n in positions]
    if not ns or ns[0] != 1:
        raise ParameterError("the zero positions must start with n_1 = 1")
    gaps = [b - a for a, b in zip(ns, ns[1:])]
    if any(g <= 0 for g in gaps) or any(g2 <= g1 for g1, g2 in zip(gaps, gaps[1:])):
        raise ParameterError("gaps n_{k+1} - n_k must be strictly increasing")
    pattern = Pattern(horizon, tuple(n for n in ns if n <= horizon))
    bad = shift_minimal(pattern)
    if bad is not None:
        raise InvariantError(f"shift inequality fails at (k, n) = {bad}")
    return pattern


def powers_of_two_upto(horizon: int) -> List[int]:
    out, x = [], 1
    while x <= horizon:
        out.append(x)
        x <<= 1
    return out


@dataclass
class Delta2Report:
    ok: bool
    min_step: Fraction
    max_step: Fraction
    steps_per_doubling: int
    constant: float
    observed: float = 0.0
    checked: int = 0

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "min_step": format_rational(self.min_step),
            "max_step": format_rational(self.max_step),
            "steps_per_doubling": self.steps_per_doubling,
            "constant": self.constant,
            "observed": self.observed,
            "checked": self.checked,
        }


def delta2_check(M: OrliczFunction, max_nodes: int = 2000) -> Delta2Report:
    """Exponent steps e(k+1) - e(k) lie in {r, p}, so M(2t) <= 2 tau^(-j max_step) M(t)
    with j nodes per doubling; the bound is then checked at the nodes t = tau^k."""
    params, pat = M.params, M.pattern
    if pat.horizon == 0:
        return Delta2Report(True, params.p, params.p, 0, 1.0)
    has_zero = bool(pat.zero_positions)
    has_one = len(pat.zero_positions) < pat.horizon
    min_step = params.r if has_zero else params.p
    max_step = params.p if has_one else params.r
    ln_tau = params.ln_tau
    j = max(1, math.ceil(LN2 / -ln_tau - 1e-12))
    constant = 2.0 * math.exp(-float(max_step) * j * ln_tau)

    ks = np.arange(j, min(pat.horizon, max_nodes) + 1, dtype=np.int64)
    ks = ks[M._exponents(ks) * -ln_tau < 700]
    observed = 0.0
    if ks.size:
        t = np.exp(ks * ln_tau)
        ratios = M.eval_many(np.minimum(2.0 * t, 1.0)) / np.exp(M._exponents(ks) * ln_tau)
        observed = float(np.max(ratios))
    ok = params.r <= min_step and max_step <= params.p and observed <= constant * (1 + 1e-12)
    if not ok:
        logger.warning(f"delta2 check failed: steps [{min_step}, {max_step}], observed ratio {observed:.6g}, bound {constant:.6g}")
    return Delta2Report(ok, min_step, max_step, j, constant, observed, int(ks.size))


@dataclass
class ConvexityReport:
    ok: bool
    checked: int
    first_failure: Optional[int] = None


def convexity_check(M: OrliczFunction, max_nodes: int = 2000) -> ConvexityReport:
    """Chord slopes between consecutive nodes tau^k must decrease as k grows."""
    ln_tau = M.params.ln_tau
    K = min(M.horizon, max_nodes)
    ks = np.arange(0, K + 1, dtype=np.int64)
    exps = M._exponents(ks)
    keep = exps * -ln_tau < 700
    ks, exps = ks[keep], exps[keep]
    if ks.size < 3:
        return ConvexityReport(True, 0)
    t = np.exp(ks * ln_tau)
    m = np.exp(exps * ln_tau)
    slopes = (m[:-1] - m[1:]) / (t[:-1] - t[1:])
    bad = np.nonzero(slopes[1:] > slopes[:-1] * (1 + 1e-12))[0]
    if bad.size:
        return ConvexityReport(False, int(slopes.size), int(ks[bad[0] + 1]))
    return ConvexityReport(True, int(slopes.size))


@dataclass
class DilationReport:
    ok: bool
    exact_pairs: int
    sampled_pairs: int
    failures: List[Tuple] = None


def dilation_bound_check(M: OrliczFunction, max_k: int = 64, samples: int = 400, seed: int = 0) -> DilationReport:
    """M(lambda t)/M(lambda) <= tau^(-2p) M(t) on samples, and the exact node form
    M(tau^(k+n))/M(tau^k) <= M(tau^n) for a shift-minimal pattern."""
    failures = []
    K = min(max_k, M.horizon)
    exact = 0
    if shift_minimal(M.pattern) is None:
        for k in range(K + 1):
            for n in range(K + 1 - k):
                exact += 1
                if M.exponent_at(k + n) - M.exponent_at(k) < M.exponent_at(n):
                    failures.append(("node", k, n))
    rng = np.random.default_rng(seed)
    ln_tau = M.params.ln_tau
    floor = K * ln_tau / 2
    lam = np.exp(rng.uniform(floor, 0.0, samples))
    t = np.exp(rng.uniform(floor, 0.0, samples))
    lhs = M.eval_many(lam * t) / M.eval_many(lam)
    rhs = math.exp(-2 * float(M.params.p) * ln_tau) * M.eval_many(t)
    bad = np.nonzero(lhs > rhs * (1 + 1e-9))[0]
    failures.extend(("sample", float(lam[i]), float(t[i])) for i in bad)
    return DilationReport(not failures, exact, samples, failures)


def pattern_metadata(M: OrliczFunction) -> Dict:
    return {"params": M.params.to_dict(), **M.pattern.to_dict()}
