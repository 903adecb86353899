import math
from fractions import Fraction

import numpy as np
import pytest

from services_lorentz import (
    WeightSeq,
    constant_block_norm,
    fundamental_table,
    lorentz_norm,
    lp_dominates_lorentz,
    nonempty_subsets,
    powerset_diagram,
    weights_from_fundamental,
)
from services_submult import extend_slow
from utils_errors import DomainError, InsufficientWitnessError, InvariantError, ParameterError


def test_explicit_weights_norm_is_exact():
    ws = WeightSeq.from_weights([1, Fraction(1, 2), Fraction(1, 3)])
    value = lorentz_norm(ws, [1, -3, 2])
    assert value == Fraction(13, 3)
    assert isinstance(value, Fraction)
    assert ws.S(2) == Fraction(3, 2)
    assert ws.S(0) == 0


def test_rearrangement_invariance():
    ws = WeightSeq.from_weights([1, Fraction(1, 2), Fraction(1, 4), Fraction(1, 8)])
    a = [Fraction(1, 3), 0, -2, Fraction(5, 7)]
    assert lorentz_norm(ws, a) == lorentz_norm(ws, list(reversed(a))) == lorentz_norm(ws, [abs(x) for x in a])


@pytest.mark.parametrize("weights", [[1, 2], [2, 1], [1, 0], []])
def test_bad_weights_rejected(weights):
    with pytest.raises(InvariantError):
        WeightSeq.from_weights(weights)


def test_weights_from_fundamental(identity):
    f = extend_slow(identity, Fraction(1, 4))
    ws = weights_from_fundamental(f, 4)
    assert ws.weights() == (1, 1, Fraction(1, 4), Fraction(1, 4))
    assert lorentz_norm(ws, [1, 1, 1]) == Fraction(9, 4)
    assert constant_block_norm(ws, 4) == Fraction(5, 2)
    with pytest.raises(DomainError):
        weights_from_fundamental(f, 5)
    with pytest.raises(DomainError):
        lorentz_norm(ws, [1, 1, 1, 1, 1])


def test_float_norm_for_p_above_one():
    ws = WeightSeq.from_weights([1, Fraction(1, 2)], p=2)
    assert lorentz_norm(ws, [3, 4]) == pytest.approx(math.sqrt(16 + 9 / 2))
    assert constant_block_norm(ws, 2) == pytest.approx(math.sqrt(1.5))
    with pytest.raises(ParameterError):
        WeightSeq.from_weights([1], p=Fraction(1, 2))


def test_lorentz_below_lp():
    ws = WeightSeq.from_weights([1] + [Fraction(1, n) for n in range(2, 41)], p=2)
    rng = np.random.default_rng(3)
    for _ in range(50):
        v = rng.uniform(-1, 1, int(rng.integers(1, 40)))
        assert lp_dominates_lorentz(ws, v)


def test_fundamental_table_header():
    ws = WeightSeq.from_weights([1, Fraction(1, 2)])
    text = fundamental_table([ws, ws], [1, 2])
    assert text.splitlines() == ["m,S_1(m),S_2(m)", "1,1,1", "2,3/2,3/2"]


def test_nonempty_subsets_order():
    assert nonempty_subsets(2) == [(1,), (2,), (1, 2)]
    assert len(nonempty_subsets(3)) == 7


def test_powerset_diagram_matches_subset_order(family):
    dm = powerset_diagram(family, 2, 1, 1)
    assert dm.nodes == ["{1}", "{2}", "{1,2}"]
    assert dm.metadata["order_isomorphic"]
    assert dm.leq(0, 2) and dm.leq(1, 2)
    assert not dm.leq(2, 0) and not dm.leq(0, 1) and not dm.leq(1, 0)
    assert dm.missing_pairs() == []
    assert dm.transitivity_violations() == []
    for (i, j), ev in dm.evidence.items():
        if not ev.dominated:
            assert ev.ratio > 1


def test_powerset_diagram_lp_node_on_top(family):
    dm = powerset_diagram(family, 2, 2, 1)
    assert dm.nodes[-1] == "l_2"
    top = len(dm.nodes) - 1
    for a in range(top):
        assert dm.strictly_below(a, top)


def test_powerset_diagram_needs_witnesses(family):
    with pytest.raises(InsufficientWitnessError) as exc:
        powerset_diagram(family, 2, 1, 2)
    assert exc.value.bound == 2
    with pytest.raises(ParameterError):
        powerset_diagram(family, 3, 1, 1)


def _random_weights(rng, size, p=1) -> WeightSeq:
    cuts = sorted((Fraction(int(x), 100) for x in rng.integers(1, 101, size - 1)), reverse=True)
    return WeightSeq.from_weights([1] + cuts, p=p)


def _random_vector(rng, size):
    return [Fraction(int(x), 7) for x in rng.integers(-30, 31, int(rng.integers(1, size + 1)))]


def test_lorentz_norm_is_symmetric_and_subadditive():
    rng = np.random.default_rng(21)
    for _ in range(100):
        ws = _random_weights(rng, 12)
        a, b = _random_vector(rng, 12), _random_vector(rng, 12)
        width = max(len(a), len(b))
        a, b = a + [0] * (width - len(a)), b + [0] * (width - len(b))
        perm = rng.permutation(width)
        signs = rng.choice([-1, 1], width)
        moved = [int(s) * a[int(k)] for s, k in zip(signs, perm)]
        assert lorentz_norm(ws, moved) == lorentz_norm(ws, a)
        assert lorentz_norm(ws, [x + y for x, y in zip(a, b)]) <= lorentz_norm(ws, a) + lorentz_norm(ws, b)


@pytest.mark.parametrize("p", [Fraction(3, 2), 2, 4])
def test_lorentz_norm_triangle_inequality_for_p_above_one(p):
    rng = np.random.default_rng(22)
    for _ in range(100):
        ws = _random_weights(rng, 20, p)
        a, b = rng.uniform(-1, 1, 20), rng.uniform(-1, 1, 20)
        assert lorentz_norm(ws, a + b) <= (lorentz_norm(ws, a) + lorentz_norm(ws, b)) * (1 + 1e-12)
        assert lorentz_norm(ws, -a[::-1]) == pytest.approx(lorentz_norm(ws, a), rel=1e-12)


def test_powerset_ratios_are_labelled_with_their_power(family):
    dm = powerset_diagram(family, 2, 2, 1)
    assert dm.metadata["ratio_power"] == "2"
    witnessed = [ev for ev in dm.evidence.values() if ev.witness_m is not None]
    assert witnessed
    for ev in witnessed:
        assert ev.note == "norm ratio on 1^m, to the power 2"
        assert ev.ratio > 1
    plain = powerset_diagram(family, 2, 1, 1)
    assert plain.metadata["ratio_power"] == "1"
    assert {ev.note for ev in plain.evidence.values() if ev.witness_m is not None} == {"norm ratio on 1^m"}
