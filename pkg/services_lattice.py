# services_lattice.py
"""
Finite lattices given by their cover relations.

The order is kept as a boolean matrix leq[i, j] (i <= j); joins and meets are
tabulated once at construction so that every query afterwards is a lookup.
"""

from functools import reduce
from itertools import combinations
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ValidationError

from utils_errors import InputFormatError, LatticeValidationError, ParameterError
from utils_logger import get_logger

logger = get_logger("lattice")


class LatticeDocument(BaseModel):
    elements: List[str]
    covers: List[Tuple[str, str]] = []


def transitive_closure(rel: np.ndarray) -> np.ndarray:
    """Reflexive-transitive closure of a boolean relation (Warshall)."""
    closure = rel.copy() | np.eye(rel.shape[0], dtype=bool)
    for k in range(closure.shape[0]):
        closure |= np.outer(closure[:, k], closure[k, :])
    return closure


class FiniteLattice:
    def __init__(self, names: Sequence[str], leq: np.ndarray):
        self.names = tuple(names)
        self.leq_matrix = np.array(leq, dtype=bool)
        self.leq_matrix.setflags(write=False)
        n = len(self.names)
        if self.leq_matrix.shape != (n, n):
            raise LatticeValidationError("order matrix does not match the element list")
        self._check_partial_order()
        self.minimum_index = self._find_minimum()
        self._join = self._table(upper=True)
        self._meet = self._table(upper=False)

    def __repr__(self):
        return f"FiniteLattice({list(self.names)!r})"

    def __len__(self):
        return len(self.names)

    @property
    def size(self) -> int:
        return len(self.names)

    def _pair(self, i, j):
        return self.names[i], self.names[j]

    def _check_partial_order(self):
        n = self.size
        leq = self.leq_matrix
        for i in range(n):
            if not leq[i, i]:
                raise LatticeValidationError("not reflexive", self._pair(i, i))
        for i, j in combinations(range(n), 2):
            if leq[i, j] and leq[j, i]:
                raise LatticeValidationError("not antisymmetric", self._pair(i, j))
        # i <= k <= j must give i <= j
        composed = (leq.astype(np.int64) @ leq.astype(np.int64)) > 0
        bad = np.argwhere(composed & ~leq)
        if bad.size:
            i, j = bad[0]
            raise LatticeValidationError("not transitive", self._pair(int(i), int(j)))

    def _find_minimum(self) -> int:
        below_all = np.nonzero(self.leq_matrix.all(axis=1))[0]
        if below_all.size == 0:
            minimal = [i for i in range(self.size) if not any(self.leq_matrix[k, i] for k in range(self.size) if k != i)]
            pair = self._pair(minimal[0], minimal[1]) if len(minimal) > 1 else None
            raise LatticeValidationError("no minimum element", pair)
        return int(below_all[0])

    def _table(self, upper: bool) -> np.ndarray:
        n = self.size
        leq = self.leq_matrix if upper else self.leq_matrix.T
        table = np.empty((n, n), dtype=np.int64)
        for i in range(n):
            for j in range(i, n):
                bounds = np.nonzero(leq[i] & leq[j])[0]
                least = [u for u in bounds if all(leq[u, v] for v in bounds)]
                if not least:
                    raise LatticeValidationError("no join" if upper else "no meet", self._pair(i, j))
                table[i, j] = table[j, i] = least[0]
        table.setflags(write=False)
        return table

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise ParameterError(f"unknown lattice element {name!r}") from None

    def leq(self, i: int, j: int) -> bool:
        return bool(self.leq_matrix[i, j])

    def join(self, i: int, j: int) -> int:
        return int(self._join[i, j])

    def meet(self, i: int, j: int) -> int:
        return int(self._meet[i, j])

    def join_all(self, items: Iterable[int]) -> int:
        """Join of a finite set; the empty join is the minimum."""
        return reduce(self.join, items, self.minimum_index)

    def meet_all(self, items: Iterable[int]) -> int:
        items = list(items)
        if not items:
            raise ParameterError("meet of the empty set needs a top element")
        return reduce(self.meet, items)

    def down_set(self, j: int) -> frozenset:
        return frozenset(int(i) for i in np.nonzero(self.leq_matrix[:, j])[0])

    def is_down_set(self, items: Iterable[int]) -> bool:
        items = set(items)
        return all(i in items for j in items for i in self.down_set(j))

    def non_minimum(self) -> List[int]:
        """Elements other than the minimum, in listed order."""
        return [i for i in range(self.size) if i != self.minimum_index]

    def covers(self) -> List[Tuple[int, int]]:
        """Hasse diagram: pairs i < j with nothing strictly between."""
        n = self.size
        lt = self.leq_matrix & ~np.eye(n, dtype=bool)
        between = (lt.astype(np.int64) @ lt.astype(np.int64)) > 0
        return [(int(i), int(j)) for i, j in np.argwhere(lt & ~between)]

    def is_modular(self) -> bool:
        n = self.size
        for a in range(n):
            for c in range(n):
                if not self.leq(a, c):
                    continue
                for b in range(n):
                    if self.join(a, self.meet(b, c)) != self.meet(self.join(a, b), c):
                        return False
        return True

    def to_document(self) -> Dict:
        return {"elements": list(self.names), "covers": [list(self._pair(i, j)) for i, j in self.covers()]}


def lattice_from_covers(names: Sequence[str], covers: Iterable[Tuple[str, str]]) -> FiniteLattice:
    names = [str(x) for x in names]
    if len(set(names)) != len(names):
        dup = next(x for x in names if names.count(x) > 1)
        raise LatticeValidationError("duplicate element", (dup, dup))
    if not names:
        raise LatticeValidationError("empty element list")
    pos = {name: i for i, name in enumerate(names)}
    rel = np.zeros((len(names), len(names)), dtype=bool)
    for a, b in covers:
        if a not in pos or b not in pos:
            raise LatticeValidationError("cover names an unknown element", (a, b))
        if a == b:
            raise LatticeValidationError("element covers itself", (a, b))
        rel[pos[a], pos[b]] = True
    L = FiniteLattice(names, transitive_closure(rel))
    logger.debug(f"lattice with {L.size} elements, minimum {L.names[L.minimum_index]!r}")
    return L


def parse_lattice(document) -> FiniteLattice:
    """Build a lattice from {"elements": [...], "covers": [[a, b], ...]} (a covered by b)."""
    try:
        doc = LatticeDocument.model_validate(document)
    except ValidationError as e:
        raise InputFormatError(f"bad lattice document: {e.errors()[0]['msg']}") from None
    return lattice_from_covers(doc.elements, doc.covers)


def power_set(n: int) -> FiniteLattice:
    """Subsets of {1..n} ordered by inclusion; the empty set comes first."""
    if n < 0:
        raise ParameterError("power_set needs n >= 0")
    subsets = [frozenset(c) for k in range(n + 1) for c in combinations(range(1, n + 1), k)]
    names = ["{" + ",".join(str(i) for i in sorted(s)) + "}" for s in subsets]
    leq = np.array([[a <= b for b in subsets] for a in subsets], dtype=bool)
    return FiniteLattice(names, leq)


def chain(n: int) -> FiniteLattice:
    if n < 1:
        raise ParameterError("chain needs n >= 1")
    return lattice_from_covers([str(i) for i in range(n)], [(str(i), str(i + 1)) for i in range(n - 1)])


def m3() -> FiniteLattice:
    return lattice_from_covers(
        ["bottom", "a", "b", "c", "top"],
        [("bottom", "a"), ("bottom", "b"), ("bottom", "c"), ("a", "top"), ("b", "top"), ("c", "top")],
    )


def n5() -> FiniteLattice:
    return lattice_from_covers(
        ["bottom", "a", "b", "c", "top"],
        [("bottom", "a"), ("a", "b"), ("b", "top"), ("bottom", "c"), ("c", "top")],
    )


STANDARD_LATTICES = {
    "chain2": lambda: chain(2),
    "chain4": lambda: chain(4),
    "powerset2": lambda: power_set(2),
    "powerset3": lambda: power_set(3),
    "m3": m3,
    "n5": n5,
}


def is_order_isomorphic(L: FiniteLattice, D, mapping: Optional[Sequence[int]] = None) -> Tuple[bool, Optional[Tuple[int, int]]]:
    """leq(i, j) <=> D.leq(mapping[i], mapping[j]) for all pairs; returns the first
    violating pair otherwise."""
    if L.size != len(D.nodes):
        raise ParameterError(f"lattice has {L.size} elements, matrix has {len(D.nodes)} nodes")
    mapping = list(range(L.size)) if mapping is None else list(mapping)
    if sorted(mapping) != list(range(L.size)):
        raise ParameterError("mapping must be a bijection onto the matrix nodes")
    for i in range(L.size):
        for j in range(L.size):
            if L.leq(i, j) != D.leq(mapping[i], mapping[j]):
                return False, (i, j)
    return True, None
