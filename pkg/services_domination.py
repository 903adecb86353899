# services_domination.py
"""
DominationMatrix: the pairwise domination relation between labelled norms.

Entry (i, j) answers "is node i dominated by node j", i.e. ||.||_i <= C ||.||_j.
A constant is stored when it holds; otherwise a witness showing that the
ratio ||a||_i / ||a||_j exceeds the recorded bound.
"""

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Optional, Sequence, Tuple, Union

from utils_helpers import format_rational
from utils_logger import get_logger

logger = get_logger("domination")

Number = Union[Fraction, float, int]


def _render(x):
    if isinstance(x, (Fraction, int)):
        return format_rational(x)
    return x


@dataclass(frozen=True)
class Evidence:
    constant: Optional[Number] = None
    witness_m: Optional[int] = None
    ratio: Optional[Number] = None
    note: str = ""

    @property
    def dominated(self) -> bool:
        return self.constant is not None

    def to_dict(self) -> Dict[str, Any]:
        out = {}
        if self.constant is not None:
            out["constant"] = _render(self.constant)
        if self.witness_m is not None:
            out["witness_m"] = _render(self.witness_m)
        if self.ratio is not None:
            out["ratio"] = _render(self.ratio)
        if self.note:
            out["note"] = self.note
        return out


@dataclass
class DominationMatrix:
    nodes: List[str]
    evidence: Dict[Tuple[int, int], Evidence] = field(default_factory=dict)
    metadata: Dict[str, Any] = field(default_factory=dict)

    def record(self, i: int, j: int, ev: Evidence) -> None:
        self.evidence[(i, j)] = ev

    def leq(self, i: int, j: int) -> bool:
        ev = self.evidence.get((i, j))
        return ev is not None and ev.dominated

    def strictly_below(self, i: int, j: int) -> bool:
        return self.leq(i, j) and not self.leq(j, i)

    def index(self, label: str) -> int:
        return self.nodes.index(label)

    def missing_pairs(self) -> List[Tuple[int, int]]:
        n = len(self.nodes)
        return [(i, j) for i in range(n) for j in range(n) if (i, j) not in self.evidence]

    def transitivity_violations(self, tol: float = 1e-9) -> List[Tuple[int, int, int]]:
        """Triples where a recorded constant exceeds the composed constant bound,
        or where i<=j<=k holds but i<=k is not recorded."""
        bad = []
        n = len(self.nodes)
        for i in range(n):
            for j in range(n):
                if not self.leq(i, j):
                    continue
                for k in range(n):
                    if not self.leq(j, k):
                        continue
                    if not self.leq(i, k):
                        bad.append((i, j, k))
                        continue
                    c_ik = self.evidence[(i, k)].constant
                    bound = self.evidence[(i, j)].constant * self.evidence[(j, k)].constant
                    if float(c_ik) > float(bound) * (1 + tol):
                        bad.append((i, j, k))
        return bad

    def relation_matches(self, expected) -> Optional[Tuple[int, int]]:
        """First pair (i, j) where leq(i, j) differs from expected(i, j), or None."""
        n = len(self.nodes)
        for i in range(n):
            for j in range(n):
                if self.leq(i, j) != bool(expected(i, j)):
                    return (i, j)
        return None

    def to_dict(self) -> Dict[str, Any]:
        return {
            "nodes": list(self.nodes),
            "relations": [
                {"lower": self.nodes[i], "upper": self.nodes[j], "dominated": ev.dominated, **ev.to_dict()}
                for (i, j), ev in sorted(self.evidence.items())
            ],
            "metadata": self.metadata,
        }
