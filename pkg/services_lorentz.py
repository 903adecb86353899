# services_lorentz.py
"""
Lorentz sequence norms d(w, p), fundamental functions and the power-set
domination diagrams built on an incomparable family of weights.
"""

import math
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import combinations
from typing import List, Optional, Sequence, Tuple

import numpy as np

from services_domination import DominationMatrix, Evidence
from services_pwl import PWLFunction
from services_submult import FamilyState
from utils_errors import DomainError, InsufficientWitnessError, InvariantError, ParameterError
from utils_helpers import describe_rational, format_rational, int_to_decimal, power_below, rows_to_csv
from utils_logger import get_logger

logger = get_logger("lorentz")

# weights are materialised only up to this length
MATERIALIZE_LIMIT = 1_000_000


@dataclass(frozen=True)
class WeightSeq:
    horizon: int
    p: Fraction = Fraction(1)
    explicit: Optional[Tuple[Fraction, ...]] = None
    source: Optional[PWLFunction] = None
    _partial: Tuple[Fraction, ...] = field(default=(), repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "p", Fraction(self.p))
        if self.p < 1:
            raise ParameterError(f"p={format_rational(self.p)} must be >= 1")
        if (self.explicit is None) == (self.source is None):
            raise ParameterError("WeightSeq needs exactly one of explicit weights or a fundamental function")
        if self.explicit is not None:
            w = tuple(Fraction(x) for x in self.explicit)
            if not w or w[0] != 1:
                raise InvariantError("weights must start with w(1)=1")
            if any(x <= 0 for x in w):
                raise InvariantError("weights must be positive")
            if any(w[i] > w[i - 1] for i in range(1, len(w))):
                raise InvariantError("weights must be nonincreasing")
            object.__setattr__(self, "explicit", w)
            object.__setattr__(self, "horizon", len(w))
            acc, partial = Fraction(0), []
            for x in w:
                acc += x
                partial.append(acc)
            object.__setattr__(self, "_partial", tuple(partial))
        else:
            if self.horizon < 1 or self.horizon > self.source.domain_end:
                raise DomainError(f"horizon {describe_rational(self.horizon)} beyond domain end {describe_rational(self.source.domain_end)}")
            if self.source.eval(1) != 1:
                raise InvariantError("fundamental function must satisfy S(1)=1")

    @classmethod
    def from_weights(cls, weights: Sequence, p=1) -> "WeightSeq":
        return cls(horizon=len(weights), p=p, explicit=tuple(weights))

    def S(self, n: int) -> Fraction:
        """Fundamental function S(n) = w(1) + ... + w(n), S(0) = 0."""
        if n == 0:
            return Fraction(0)
        if not 1 <= n <= self.horizon:
            raise DomainError(f"n={describe_rational(n)} outside [1, {describe_rational(self.horizon)}]")
        if self.explicit is not None:
            return self._partial[n - 1]
        return self.source.eval(n)

    def weight(self, n: int) -> Fraction:
        return self.S(n) - self.S(n - 1)

    def weights(self, upto: Optional[int] = None) -> Tuple[Fraction, ...]:
        upto = self.horizon if upto is None else min(upto, self.horizon)
        if upto > MATERIALIZE_LIMIT:
            raise DomainError(f"refusing to materialise {describe_rational(upto)} weights")
        if self.explicit is not None:
            return self.explicit[:upto]
        return tuple(self.weight(n) for n in range(1, upto + 1))


def weights_from_fundamental(f: PWLFunction, horizon: int, p=1) -> WeightSeq:
    """w(n) = S(n) - S(n-1) with S(0) = 0."""
    if horizon > f.domain_end:
        raise DomainError(f"horizon {describe_rational(horizon)} beyond domain end {describe_rational(f.domain_end)}")
    return WeightSeq(horizon=horizon, p=p, source=f)


def _is_exact(a) -> bool:
    return all(isinstance(x, (int, Fraction)) and not isinstance(x, bool) for x in a)


def lorentz_norm(ws: WeightSeq, a: Sequence):
    """(sum a*_n^p w(n))^(1/p) over the nonincreasing rearrangement of |a|.

    Exact Fraction for p = 1 and rational input, float otherwise.
    """
    mags = sorted((abs(x) for x in a if x != 0), reverse=True)
    if len(mags) > ws.horizon:
        raise DomainError(f"support {len(mags)} exceeds horizon {describe_rational(ws.horizon)}")
    w = ws.weights(len(mags))
    if ws.p == 1 and _is_exact(mags):
        return sum((Fraction(x) * wn for x, wn in zip(mags, w)), Fraction(0))
    p = float(ws.p)
    terms = np.asarray([float(x) for x in mags], dtype=float) ** p * np.asarray([float(x) for x in w], dtype=float)
    return math.fsum(terms) ** (1.0 / p)


def constant_block_norm(ws: WeightSeq, m: int):
    """||1^m||_{w,p} = S(m)^(1/p); exact for p = 1."""
    s = ws.S(m)
    if ws.p == 1:
        return s
    return float(s) ** (1.0 / float(ws.p))


def lp_dominates_lorentz(ws: WeightSeq, a: Sequence, tol: float = 1e-12) -> bool:
    """||a||_{w,p} <= ||a||_p, which holds because every weight is at most w(1) = 1."""
    mags = np.abs(np.asarray([float(x) for x in a], dtype=float))
    if mags.size == 0:
        return True
    p = float(ws.p)
    lp = float(np.sum(mags ** p)) ** (1.0 / p)
    return float(lorentz_norm(ws, a)) <= lp * (1 + tol)


def fundamental_table(seqs: Sequence[WeightSeq], ms: Sequence[int]) -> str:
    header = ["m"] + [f"S_{i}(m)" for i in range(1, len(seqs) + 1)]
    rows = ([int_to_decimal(m)] + [format_rational(ws.S(m)) for ws in seqs] for m in ms)
    return rows_to_csv(header, rows)


def subset_label(A: Sequence[int]) -> str:
    return "{" + ",".join(str(i) for i in A) + "}"


def nonempty_subsets(n: int) -> List[Tuple[int, ...]]:
    return [A for size in range(1, n + 1) for A in combinations(range(1, n + 1), size)]


def powerset_diagram(family: FamilyState, n: int, p=1, threshold: int = 1) -> DominationMatrix:
    """Domination diagram of the nodes max_{i in A} ||.||_{w_i,p}, A nonempty in {1..n},
    plus an l_p node on top when p > 1.

    Recorded ratios are fundamental-function ratios S_A(m) / S_B(m), the p-th power
    of the norm ratio on 1^m; metadata["ratio_power"] says so. A witness needs a
    norm ratio above threshold, i.e. S_A(m) / S_B(m) > threshold^p.
    """
    p = Fraction(p)
    if p < 1:
        raise ParameterError("p must be >= 1")
    if family.size < n or n < 1:
        raise ParameterError(f"family has {family.size} members, need {n}")
    horizon = math.floor(family.domain_end)
    seqs = [weights_from_fundamental(f, horizon, p) for f in family.functions[:n]]
    subsets = nonempty_subsets(n)
    labels = [subset_label(A) for A in subsets]
    top = p > 1
    if top:
        labels.append(f"l_{format_rational(p)}")
    dm = DominationMatrix(labels, metadata={"n": n, "p": format_rational(p), "threshold": threshold, "horizon": int_to_decimal(horizon), "ratio_power": format_rational(p)})
    needed = math.ceil(threshold ** p)
    note = "norm ratio on 1^m" if p == 1 else f"norm ratio on 1^m, to the power {format_rational(p)}"

    def fmax(A, m):
        return max(seqs[i - 1].S(m) for i in A)

    for a, A in enumerate(subsets):
        for b, B in enumerate(subsets):
            if set(A) <= set(B):
                dm.record(a, b, Evidence(constant=1, note="max over a superset"))
                continue
            rec = family.find_witness(B, needed)
            if rec is None:
                raise InsufficientWitnessError(B, needed)
            m = int(rec.witness_n)
            ratio = fmax(A, m) / fmax(B, m)
            if not power_below(threshold, p, ratio):
                raise InvariantError(f"witness m~2^{m.bit_length()} for {labels[a]} vs {labels[b]} has ratio {describe_rational(ratio)}")
            dm.record(a, b, Evidence(witness_m=m, ratio=ratio, note=note))

    if top:
        t = len(labels) - 1
        dm.record(t, t, Evidence(constant=1))
        m = horizon
        for a, A in enumerate(subsets):
            dm.record(a, t, Evidence(constant=1, note="Lorentz norm below l_p norm"))
            ratio = Fraction(m) / fmax(A, m)
            if not power_below(threshold, p, ratio):
                raise InsufficientWitnessError(("l_p",) + A, threshold)
            dm.record(t, a, Evidence(witness_m=m, ratio=ratio, note=note))

    def expected(i, j):
        if top and j == len(labels) - 1:
            return True
        if top and i == len(labels) - 1:
            return False
        return set(subsets[i]) <= set(subsets[j])

    bad = dm.relation_matches(expected)
    dm.metadata["order_isomorphic"] = bad is None
    if bad is not None:
        raise InvariantError(f"diagram differs from the subset order at {labels[bad[0]]}, {labels[bad[1]]}")
    logger.info(f"power-set diagram: {len(labels)} nodes, order-isomorphic")
    return dm
