# services_sm_calculus.py
"""
Symmetric sequence norms and the combinators used to build new ones from old:
pointwise max, weighted sums, l_p-sums, plus domination estimates and the
classification of l_p-sum combinations.

Every norm can be evaluated on a finite vector and on a constant block 1^m;
the latter is computed in log-space so that m may be far beyond float range.
"""

import math
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Dict, Iterable, List, Literal, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ValidationError

from config_settings import settings
from services_encoder import EncoderState
from services_lorentz import WeightSeq, lorentz_norm
from services_orlicz import (
    OrliczFunction,
    OrliczParams,
    Pattern,
    constant_block_log_norm,
    luxemburg_norm,
    pattern_from_rle_text,
    pointwise_compare,
)
from utils_errors import DomainError, InputFormatError, ParameterError
from utils_helpers import describe_rational, format_rational, int_to_decimal, log2_fraction, log2_int, parse_rational
from utils_logger import get_logger

logger = get_logger("sm_calculus")

LN2 = math.log(2.0)
NORMALIZATION_TOL = 1e-12
DENSE_SEARCH_LIMIT = 4096


def _ln_int(m: int) -> float:
    return log2_int(m) * LN2


def _magnitudes(a) -> np.ndarray:
    return np.abs(np.asarray([float(x) for x in a], dtype=float))


class SymNorm(ABC):
    label: str = ""

    @abstractmethod
    def evaluate(self, a) -> float:
        ...

    @abstractmethod
    def log_block(self, m: int) -> float:
        """ln ||1^m||."""

    def constant_block(self, m: int) -> float:
        return math.exp(self.log_block(m))

    @property
    def horizon(self) -> Optional[int]:
        """Largest support the norm can evaluate, None when unbounded."""
        return None

    def candidate_lengths(self) -> List[int]:
        return []

    def __call__(self, a) -> float:
        return self.evaluate(a)


@dataclass(frozen=True)
class Lp(SymNorm):
    q: float
    label: str = ""

    def __post_init__(self):
        if not self.q >= 1:
            raise ParameterError(f"l_q needs q >= 1, got {self.q}")
        if not self.label:
            object.__setattr__(self, "label", f"l_{self.q:g}")

    def evaluate(self, a) -> float:
        mags = _magnitudes(a)
        if mags.size == 0:
            return 0.0
        if math.isinf(self.q):
            return float(mags.max())
        top = mags.max()
        if top == 0:
            return 0.0
        # scale first so that large q cannot overflow
        return float(top * np.sum((mags / top) ** float(self.q)) ** (1.0 / float(self.q)))

    def log_block(self, m: int) -> float:
        return 0.0 if math.isinf(self.q) else _ln_int(m) / float(self.q)


@dataclass(frozen=True)
class Lorentz(SymNorm):
    weights: WeightSeq
    label: str = "lorentz"

    def evaluate(self, a) -> float:
        return float(lorentz_norm(self.weights, a))

    def log_block(self, m: int) -> float:
        return log2_fraction(self.weights.S(m)) * LN2 / float(self.weights.p)

    @property
    def horizon(self) -> Optional[int]:
        return self.weights.horizon

    def candidate_lengths(self) -> List[int]:
        src = self.weights.source
        if src is None:
            return []
        return sorted({math.floor(b) for b in src.breakpoints if 1 <= b <= self.weights.horizon})


@dataclass(frozen=True)
class Orlicz(SymNorm):
    function: OrliczFunction
    label: str = "orlicz"

    def evaluate(self, a) -> float:
        return luxemburg_norm(self.function, a)

    def log_block(self, m: int) -> float:
        return constant_block_log_norm(self.function, _ln_int(m))


@dataclass(frozen=True)
class MaxCombo(SymNorm):
    norms: Tuple[SymNorm, ...]
    label: str = "max"
    metadata: Dict[str, Any] = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        if not self.norms:
            raise ParameterError("max of an empty family")
        object.__setattr__(self, "norms", tuple(self.norms))

    def evaluate(self, a) -> float:
        return max(n.evaluate(a) for n in self.norms)

    def log_block(self, m: int) -> float:
        return max(n.log_block(m) for n in self.norms)

    @property
    def horizon(self) -> Optional[int]:
        return _min_horizon(self.norms)

    def candidate_lengths(self) -> List[int]:
        return sorted({m for n in self.norms for m in n.candidate_lengths()})


@dataclass(frozen=True)
class WeightedSum(SymNorm):
    """W(a) = sum_n C_n^-1 ||a||_n with sum_n C_n^-1 <= 1, so ||a||_n <= C_n W(a)."""

    C: Tuple[Fraction, ...]
    norms: Tuple[SymNorm, ...]
    label: str = "weighted_sum"

    def __post_init__(self):
        C = tuple(parse_rational(c) for c in self.C)
        if len(C) != len(self.norms) or not C:
            raise ParameterError("need one constant per norm")
        if any(c <= 0 for c in C):
            raise ParameterError("constants C_n must be positive")
        if sum(1 / c for c in C) > 1:
            raise ParameterError(f"sum of C_n^-1 is {format_rational(sum(1 / c for c in C))} > 1")
        object.__setattr__(self, "C", C)
        object.__setattr__(self, "norms", tuple(self.norms))

    def evaluate(self, a) -> float:
        return math.fsum(float(1 / c) * n.evaluate(a) for c, n in zip(self.C, self.norms))

    def log_block(self, m: int) -> float:
        terms = [-math.log(float(c)) + n.log_block(m) for c, n in zip(self.C, self.norms)]
        return float(np.logaddexp.reduce(terms))

    @property
    def horizon(self) -> Optional[int]:
        return _min_horizon(self.norms)

    def candidate_lengths(self) -> List[int]:
        return sorted({m for n in self.norms for m in n.candidate_lengths()})


@dataclass(frozen=True)
class LpSum(SymNorm):
    """[sum_j c_j^p ||a||_j^p + c_0^p sum_n |a_n|^p]^(1/p)."""

    c: Tuple[float, ...]
    norms: Tuple[SymNorm, ...]
    p: float
    c0: float = 0.0
    label: str = "lp_sum"

    def __post_init__(self):
        c = tuple(float(x) for x in self.c)
        if len(c) != len(self.norms):
            raise ParameterError("need one coefficient per component")
        if self.p < 1:
            raise ParameterError("p must be >= 1")
        if any(x < 0 for x in c) or self.c0 < 0:
            raise ParameterError("coefficients must be nonnegative")
        total = math.fsum(x ** self.p for x in c) + self.c0 ** self.p
        if abs(total - 1.0) > NORMALIZATION_TOL:
            raise ParameterError(f"sum c_j^p = {total!r}, expected 1")
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "norms", tuple(self.norms))

    def _parts(self, a) -> List[Tuple[float, float]]:
        parts = [(x, n.evaluate(a)) for x, n in zip(self.c, self.norms) if x > 0]
        if self.c0 > 0:
            parts.append((self.c0, Lp(float(self.p)).evaluate(a)))
        return parts

    def evaluate(self, a) -> float:
        parts = self._parts(a)
        if len(parts) == 1:
            # a single term collapses to c * ||a||
            x, v = parts[0]
            return x * v
        p = float(self.p)
        return math.fsum((x * v) ** p for x, v in parts) ** (1.0 / p)

    def log_block(self, m: int) -> float:
        p = float(self.p)
        terms = [p * math.log(x) + p * n.log_block(m) for x, n in zip(self.c, self.norms) if x > 0]
        if self.c0 > 0:
            terms.append(p * math.log(self.c0) + _ln_int(m))
        return float(np.logaddexp.reduce(terms)) / p

    @property
    def horizon(self) -> Optional[int]:
        return _min_horizon(self.norms)


def _min_horizon(norms: Iterable[SymNorm]) -> Optional[int]:
    hs = [n.horizon for n in norms if n.horizon is not None]
    return min(hs) if hs else None


def eval_norm(N: SymNorm, a) -> float:
    return N.evaluate(a)


def max_combo(norms: Sequence[SymNorm], label: str = "max") -> MaxCombo:
    # the max is 2-equivalent to a spreading model of the sum space; the 2 is not used here
    return MaxCombo(tuple(norms), label, {"equivalence_constant": 2})


def weighted_sum_combo(C: Sequence, norms: Sequence[SymNorm], label: str = "weighted_sum") -> WeightedSum:
    return WeightedSum(tuple(C), tuple(norms), label)


def sup_family_norm(norms: Sequence[SymNorm], A: Iterable[int]) -> MaxCombo:
    """R_A = max over the members with 1-based index in A."""
    A = sorted(set(A))
    if not A or A[0] < 1 or A[-1] > len(norms):
        raise ParameterError(f"subset {A} is not a nonempty subset of 1..{len(norms)}")
    return MaxCombo(tuple(norms[i - 1] for i in A), "R_{" + ",".join(map(str, A)) + "}")


def lp_sum_combine(c: Sequence[float], norms: Sequence[SymNorm], p: float, c0: float = 0.0) -> LpSum:
    return LpSum(tuple(c), tuple(norms), float(p), float(c0))


@dataclass(frozen=True)
class GapWitness:
    """The vector 1^m / R_F(1^m), with R_all / R_F > threshold on it."""

    m: int
    ratio: float
    scale: float

    def to_dict(self) -> Dict:
        return {"m": int_to_decimal(self.m), "ratio": self.ratio, "scale": self.scale}


def search_lengths(horizon: Optional[int], hints: Iterable[int] = ()) -> List[int]:
    """1..4096, the powers of two and any hints, all within the horizon."""
    top = horizon if horizon is not None else 1 << 64
    lengths = set(range(1, min(top, DENSE_SEARCH_LIMIT) + 1))
    x = 1
    while x <= top:
        lengths.add(x)
        x <<= 1
    lengths.update(int(h) for h in hints if 1 <= int(h) <= top)
    if horizon is not None:
        lengths.add(horizon)
    return sorted(lengths)


def find_gap_witness(norms: Sequence[SymNorm], F: Iterable[int], threshold, hints: Iterable[int] = ()) -> Optional[GapWitness]:
    R_all = sup_family_norm(norms, range(1, len(norms) + 1))
    R_F = sup_family_norm(norms, F)
    log_threshold = math.log(float(threshold)) if threshold > 0 else -math.inf
    hints = list(hints) + R_all.candidate_lengths()
    for m in search_lengths(R_all.horizon, hints):
        try:
            gap = R_all.log_block(m) - R_F.log_block(m)
        except DomainError:
            continue
        if gap > log_threshold:
            scale = math.exp(-R_F.log_block(m))
            logger.debug("gap witness m=%s ratio~%.4g", describe_rational(m), math.exp(min(gap, 700)))
            return GapWitness(m, math.exp(min(gap, 700.0)), scale)
    return None


@dataclass
class DominationEstimate:
    """Outcome of comparing ||a||_a against ||a||_b over sample vectors."""

    constant: Optional[float] = None
    witness: Optional[Dict] = None
    ratio: float = 0.0
    exact: bool = False
    samples: int = 0

    @property
    def dominated(self) -> bool:
        return self.constant is not None

    def to_dict(self) -> Dict:
        return {
            "dominated": self.dominated,
            "constant": self.constant,
            "witness": self.witness,
            "ratio": self.ratio,
            "exact": self.exact,
            "samples": self.samples,
        }


def default_samples(rng: np.random.Generator, count: Optional[int] = None, length: int = 64) -> List[np.ndarray]:
    """Geometric decays q^i for q in {1/2, 3/4} and seeded random +-vectors."""
    count = settings.random_samples if count is None else count
    out = [0.5 ** np.arange(length), 0.75 ** np.arange(length)]
    for _ in range(count):
        n = int(rng.integers(1, length + 1))
        out.append(rng.choice([-1.0, 1.0], size=n) * rng.uniform(0.0, 1.0, size=n))
    return out


def _orlicz_pair(Na: SymNorm, Nb: SymNorm) -> bool:
    return (
        isinstance(Na, Orlicz)
        and isinstance(Nb, Orlicz)
        and Na.function.params == Nb.function.params
        and Na.function.horizon == Nb.function.horizon
    )


def estimate_domination(
    Na: SymNorm,
    Nb: SymNorm,
    sampler: Optional[Callable[[np.random.Generator], Iterable]] = None,
    cap: Optional[float] = None,
    seed: Optional[int] = None,
    block_lengths: Optional[Iterable[int]] = None,
) -> DominationEstimate:
    """Largest observed ||a||_a / ||a||_b: a lower bound for the domination constant,
    or a divergence witness once the ratio passes the cap.

    Orlicz pairs with shared parameters are decided exactly from the patterns.
    """
    cap = settings.domination_cap if cap is None else cap
    seed = settings.sample_seed if seed is None else seed

    if _orlicz_pair(Na, Nb):
        cmp = pointwise_compare(Na.function, Nb.function)
        if cmp.min_diff >= 0:
            return DominationEstimate(constant=1.0, ratio=1.0, exact=True)
        params = Na.function.params
        log_ratio = float(params.gap) * cmp.min_diff * params.ln_tau
        return DominationEstimate(
            witness={"kind": "node", "k": cmp.le_witness, "log_ratio": log_ratio},
            ratio=math.exp(min(log_ratio, 700.0)),
            exact=True,
        )

    horizon = _min_horizon((Na, Nb))
    lengths = search_lengths(horizon, []) if block_lengths is None else list(block_lengths)
    best, best_witness, n = 0.0, None, 0
    log_cap = math.log(cap)
    for m in lengths:
        try:
            gap = Na.log_block(m) - Nb.log_block(m)
        except DomainError:
            continue
        n += 1
        if gap > log_cap:
            logger.debug("domination diverges on 1^%s", describe_rational(m))
            return DominationEstimate(witness={"kind": "block", "m": int_to_decimal(m)}, ratio=math.exp(min(gap, 700.0)), samples=n)
        if math.exp(gap) > best:
            best, best_witness = math.exp(gap), {"kind": "block", "m": int_to_decimal(m)}

    rng = np.random.default_rng(seed)
    vectors = sampler(rng) if sampler is not None else default_samples(rng)
    for v in vectors:
        v = np.asarray(v, dtype=float)
        if not np.any(v):
            continue
        try:
            r = Na.evaluate(v) / Nb.evaluate(v)
        except DomainError:
            continue
        n += 1
        if r > best:
            best, best_witness = r, {"kind": "vector", "values": [float(x) for x in v]}
        if r > cap:
            return DominationEstimate(witness=best_witness, ratio=r, samples=n)
    if n == 0:
        raise ParameterError("no block length or sample vector could be evaluated by both norms")
    return DominationEstimate(constant=best, ratio=best, samples=n)


@dataclass(frozen=True)
class LpClassification:
    index: int
    exponent: float
    lower: float
    upper: float = 1.0

    def to_dict(self) -> Dict:
        return {"index": self.index, "exponent": self.exponent, "lower": self.lower, "upper": self.upper}


def lp_chain_norm(c: Sequence[float], p_list: Sequence[float]) -> LpSum:
    """(sum_b c_b^p ||.||_{p_b}^p)^(1/p) with outer exponent p = p_list[0]."""
    return LpSum(tuple(c), tuple(Lp(q) for q in p_list), float(p_list[0]))


def classify_lp_sum(c: Sequence[float], p_list: Sequence[float]) -> LpClassification:
    """Least supported index b; then c_b ||a||_{p_b} <= combined(a) <= ||a||_{p_b}."""
    if len(c) != len(p_list) or not p_list:
        raise ParameterError("need one coefficient per exponent")
    if any(b <= a for a, b in zip(p_list, p_list[1:])):
        raise ParameterError("exponents must increase")
    p = float(p_list[0])
    total = math.fsum(float(x) ** p for x in c)
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise ParameterError(f"sum c_b^p = {total!r}, expected 1")
    beta = next(i for i, x in enumerate(c) if x != 0)
    return LpClassification(beta, float(p_list[beta]), float(c[beta]))


@dataclass(frozen=True)
class SpreadingClassification:
    element: Optional[int]
    B: Tuple[int, ...]
    via_join: int
    lower: float
    upper: float

    @property
    def consistent(self) -> bool:
        return self.element == self.via_join

    def to_dict(self, names: Sequence[str]) -> Dict:
        return {
            "element": None if self.element is None else names[self.element],
            "B": [names[j] for j in self.B],
            "via_join": names[self.via_join],
            "consistent": self.consistent,
            "lower": self.lower,
            "upper": self.upper,
        }


COMPONENT_KINDS = ("basis", "lp")


def _min_ones_element(state: EncoderState, B: Sequence[int]) -> Optional[int]:
    """The element whose ones counts equal min over B at every k."""
    for e in range(state.lattice.size):
        if all(state.ones(e, k) == min(state.ones(j, k) for j in B) for k in state.events(tuple(B) + (e,))):
            return e
    return None


def classify_sum_spreading_model(state: EncoderState, c: Sequence[float], component_kinds: Sequence[str]) -> SpreadingClassification:
    """Element whose unit vector basis the combination is equivalent to.

    c and component_kinds are indexed by lattice element; B collects the
    elements with c_j != 0 whose component is equivalent to its basis. An
    empty B gives the minimum (the l_p node).
    """
    L = state.lattice
    if len(c) != L.size or len(component_kinds) != L.size:
        raise ParameterError(f"need {L.size} coefficients and component kinds")
    unknown = [k for k in component_kinds if k not in COMPONENT_KINDS]
    if unknown:
        raise ParameterError(f"unknown component kind {unknown[0]!r}")
    p = float(state.params.p)
    c = [float(x) for x in c]
    if any(x < 0 for x in c):
        raise ParameterError("coefficients must be nonnegative")
    total = math.fsum(x ** p for x in c)
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise ParameterError(f"sum c_j^p = {total!r}, expected 1")

    B = tuple(j for j in range(L.size) if c[j] != 0 and component_kinds[j] == "basis")
    if not B:
        e0 = L.minimum_index
        return SpreadingClassification(e0, (), e0, lower=max(c), upper=1.0)
    via_join = L.join_all(B)
    via_min = _min_ones_element(state, B)
    tau_factor = math.exp(-2 * p * state.params.ln_tau)
    inside = math.fsum(c[j] ** p for j in B) ** (1.0 / p)
    rest = math.fsum(c[j] ** p for j in range(L.size) if j not in B) ** (1.0 / p)
    result = SpreadingClassification(
        element=via_min,
        B=B,
        via_join=via_join,
        lower=min(c[j] for j in B) / len(B),
        upper=tau_factor * inside + rest,
    )
    if not result.consistent:
        logger.warning(f"min over B and join(B) disagree for B={[L.names[j] for j in B]}")
    return result


class NormSpec(BaseModel):
    kind: Literal["lp", "lorentz", "orlicz", "max", "weighted_sum", "lp_sum", "sup"]
    label: Optional[str] = None
    q: Optional[float] = None
    weights: Optional[List[str]] = None
    p: Optional[str] = None
    tau: Optional[str] = None
    r: Optional[str] = None
    rle: Optional[str] = None
    horizon: Optional[int] = None
    zero_positions: Optional[List[int]] = None
    norms: List["NormSpec"] = []
    C: Optional[List[str]] = None
    c: Optional[List[float]] = None
    c0: float = 0.0
    subset: Optional[List[int]] = None


NormSpec.model_rebuild()


def _build(spec: NormSpec) -> SymNorm:
    def need(value, name):
        if value is None:
            raise InputFormatError(f"norm of kind {spec.kind!r} needs {name!r}")
        return value

    children = [_build(s) for s in spec.norms]
    if spec.kind == "lp":
        norm = Lp(float(need(spec.q, "q")))
    elif spec.kind == "lorentz":
        norm = Lorentz(WeightSeq.from_weights([parse_rational(w) for w in need(spec.weights, "weights")], spec.p or 1))
    elif spec.kind == "orlicz":
        params = OrliczParams.validated(need(spec.tau, "tau"), need(spec.r, "r"), need(spec.p, "p"))
        if spec.rle is not None:
            pattern = pattern_from_rle_text(spec.rle)
        else:
            pattern = Pattern(need(spec.horizon, "horizon"), tuple(spec.zero_positions or ()))
        norm = Orlicz(OrliczFunction(params, pattern))
    elif spec.kind == "max":
        norm = max_combo(children)
    elif spec.kind == "weighted_sum":
        norm = weighted_sum_combo(need(spec.C, "C"), children)
    elif spec.kind == "lp_sum":
        norm = lp_sum_combine(need(spec.c, "c"), children, float(parse_rational(need(spec.p, "p"))), spec.c0)
    else:
        norm = sup_family_norm(children, need(spec.subset, "subset"))
    if spec.label:
        object.__setattr__(norm, "label", spec.label)
    return norm


def norm_from_spec(doc: Dict) -> SymNorm:
    """Build a norm from a JSON combinator tree such as
    {"kind": "max", "norms": [{"kind": "lp", "q": 1}, {"kind": "lp", "q": 2}]}."""
    try:
        spec = NormSpec.model_validate(doc)
    except ValidationError as e:
        raise InputFormatError(f"bad norm description: {e.errors()[0]['msg']}") from None
    return _build(spec)
