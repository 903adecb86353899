import itertools
import math
from fractions import Fraction

import numpy as np
import pytest

from services_encoder import export_bundle, import_bundle, run_encoder
from services_lattice import STANDARD_LATTICES
from services_lorentz import WeightSeq
from services_orlicz import OrliczFunction, Pattern
from services_sm_calculus import (
    Lorentz,
    Lp,
    Orlicz,
    classify_lp_sum,
    classify_sum_spreading_model,
    estimate_domination,
    eval_norm,
    find_gap_witness,
    lp_chain_norm,
    lp_sum_combine,
    max_combo,
    norm_from_spec,
    search_lengths,
    sup_family_norm,
    weighted_sum_combo,
)
from utils_errors import InputFormatError, ParameterError

P_LIST = [2, 2.25, 2.5, 2.75, 3]


def test_lp_values():
    assert eval_norm(Lp(1), [1, -2, 3]) == pytest.approx(6.0)
    assert Lp(2)([3, 4]) == pytest.approx(5.0)
    assert Lp(math.inf)([3, -7, 1]) == 7
    assert Lp(2).label == "l_2"
    assert Lp(2).constant_block(16) == pytest.approx(4.0)
    with pytest.raises(ParameterError):
        Lp(0.5)


def test_combinators():
    l1, l2 = Lp(1), Lp(2)
    assert max_combo([l1, l2])([3, 4]) == pytest.approx(7.0)
    W = weighted_sum_combo([2, 2], [l1, l2])
    assert W([3, 4]) == pytest.approx(6.0)
    assert W.constant_block(4) == pytest.approx(0.5 * 4 + 0.5 * 2)
    with pytest.raises(ParameterError):
        weighted_sum_combo([1, 1], [l1, l2])
    with pytest.raises(ParameterError):
        weighted_sum_combo([2], [l1, l2])


def test_weighted_sum_contract():
    norms = [Lp(q) for q in P_LIST]
    C = [Fraction(2) ** (n + 1) for n in range(len(norms))]
    W = weighted_sum_combo(C, norms)
    rng = np.random.default_rng(5)
    for _ in range(100):
        v = rng.standard_normal(int(rng.integers(1, 30)))
        for c, N in zip(C, norms):
            assert N(v) <= float(c) * W(v) * (1 + 1e-12)


def test_sup_family_norm():
    norms = [Lp(1), Lp(2), Lp(3)]
    R = sup_family_norm(norms, {2, 3})
    assert R.label == "R_{2,3}"
    assert R([3, 4]) == pytest.approx(5.0)
    for bad in ([], [0], [4]):
        with pytest.raises(ParameterError):
            sup_family_norm(norms, bad)


def test_lp_sum_single_component_is_exact():
    component = Lp(3)
    S = lp_sum_combine([1.0], [component], 2)
    rng = np.random.default_rng(11)
    for _ in range(1000):
        v = rng.standard_normal(int(rng.integers(1, 25)))
        assert S(v) == component(v)


def test_lp_sum_mixes_components():
    c = 2 ** -0.5
    S = lp_sum_combine([c, 0.0], [Lp(1), Lp(3)], 2, c0=c)
    v = [3.0, 4.0]
    assert S(v) == pytest.approx(math.sqrt(0.5 * 49 + 0.5 * 25))
    assert S.constant_block(9) == pytest.approx(math.sqrt(0.5 * 81 + 0.5 * 9))
    with pytest.raises(ParameterError):
        lp_sum_combine([0.5, 0.5], [Lp(1), Lp(2)], 2)


def test_gap_witness_between_l1_and_l2():
    w = find_gap_witness([Lp(1), Lp(2)], {2}, 3)
    assert w is not None
    assert w.ratio > 3
    assert w.m <= 10
    assert w.scale == pytest.approx(w.m ** -0.5)


def test_gap_witness_absent_when_f_is_everything():
    assert find_gap_witness([Lp(1), Lp(2)], {1, 2}, 1) is None


def test_search_lengths_respects_horizon():
    lengths = search_lengths(100, hints=[77, 1000])
    assert lengths[0] == 1 and lengths[-1] == 100
    assert 77 in lengths and 1000 not in lengths
    assert (1 << 64) in search_lengths(None)


def test_estimate_domination_between_lp():
    below = estimate_domination(Lp(2), Lp(1))
    assert below.dominated
    assert below.constant == pytest.approx(1.0)
    above = estimate_domination(Lp(1), Lp(2))
    assert not above.dominated
    assert above.witness["kind"] == "block"
    assert above.ratio > 1e6


def test_estimate_domination_is_seeded():
    lorentz = Lorentz(WeightSeq.from_weights([1] + [Fraction(1, n) for n in range(2, 65)]))
    a = estimate_domination(Lp(2), lorentz, seed=4)
    b = estimate_domination(Lp(2), lorentz, seed=4)
    assert a.to_dict() == b.to_dict()


def test_estimate_domination_orlicz_is_exact(m3_state):
    L = m3_state.lattice
    a, top = L.index("a"), L.index("top")
    Ma, Mtop = Orlicz(m3_state.orlicz(a)), Orlicz(m3_state.orlicz(top))
    up = estimate_domination(Ma, Mtop)
    assert up.exact and up.dominated and up.constant == 1.0
    down = estimate_domination(Mtop, Ma)
    assert down.exact and not down.dominated
    assert down.witness["kind"] == "node"


def test_orlicz_norm_of_unit_vector(m3_state):
    for e in range(m3_state.lattice.size):
        assert Orlicz(m3_state.orlicz(e))([1.0, 0.0, 0.0]) == 1.0


def test_classify_lp_sum_picks_least_support():
    c = [0.0, 0.0, 2 ** -0.5, 0.0, 2 ** -0.5]
    cls = classify_lp_sum(c, P_LIST)
    assert cls.index == 2
    assert cls.exponent == 2.5
    assert cls.lower == pytest.approx(2 ** -0.5)
    with pytest.raises(ParameterError):
        classify_lp_sum(c, [2, 2.5, 2.5, 2.75, 3])
    with pytest.raises(ParameterError):
        classify_lp_sum([1.0, 1.0, 0, 0, 0], P_LIST)


def test_classify_lp_sum_sandwich_over_all_supports():
    rng = np.random.default_rng(2)
    vectors = [rng.standard_normal(int(rng.integers(1, 30))) for _ in range(30)]
    for size in range(1, len(P_LIST) + 1):
        for support in itertools.combinations(range(len(P_LIST)), size):
            c = [size ** -0.5 if b in support else 0.0 for b in range(len(P_LIST))]
            cls = classify_lp_sum(c, P_LIST)
            assert cls.index == min(support)
            combined = lp_chain_norm(c, P_LIST)
            base = Lp(P_LIST[cls.index])
            for v in vectors:
                assert cls.lower * base(v) <= combined(v) * (1 + 1e-12)
                assert combined(v) <= base(v) * (1 + 1e-12)


def test_spreading_model_of_a_pair(m3_state):
    L = m3_state.lattice
    p = float(m3_state.params.p)
    a, b, top = L.index("a"), L.index("b"), L.index("top")
    c = [0.0] * L.size
    c[a] = c[b] = 2 ** (-1 / p)
    result = classify_sum_spreading_model(m3_state, c, ["basis"] * L.size)
    assert result.element == top
    assert result.consistent
    assert result.B == (a, b)
    assert result.lower <= result.upper


def test_spreading_model_without_basis_components(m3_state):
    L = m3_state.lattice
    c = [0.0] * L.size
    c[L.index("a")] = 1.0
    result = classify_sum_spreading_model(m3_state, c, ["lp"] * L.size)
    assert result.element == L.minimum_index
    assert result.B == ()


def test_spreading_model_preconditions(m3_state):
    n = m3_state.lattice.size
    with pytest.raises(ParameterError):
        classify_sum_spreading_model(m3_state, [1.0] + [0.0] * (n - 1), ["basis"] * (n - 1))
    with pytest.raises(ParameterError):
        classify_sum_spreading_model(m3_state, [1.0] + [0.0] * (n - 1), ["weird"] * n)
    with pytest.raises(ParameterError):
        classify_sum_spreading_model(m3_state, [0.5] * n, ["basis"] * n)


@pytest.mark.parametrize("name", ["chain4", "powerset2", "m3", "n5"])
def test_spreading_model_agrees_with_join_on_every_subset(name, params):
    state = run_encoder(STANDARD_LATTICES[name](), params, 6)
    L = state.lattice
    p = float(params.p)
    for size in range(1, L.size + 1):
        for B in itertools.combinations(range(L.size), size):
            c = [len(B) ** (-1 / p) if j in B else 0.0 for j in range(L.size)]
            result = classify_sum_spreading_model(state, c, ["basis"] * L.size)
            assert result.consistent, [L.names[j] for j in B]
            assert result.element == L.join_all(B)


def test_norm_from_spec():
    N = norm_from_spec({"kind": "max", "norms": [{"kind": "lp", "q": 1}, {"kind": "lp", "q": 2}], "label": "mx"})
    assert N.label == "mx"
    assert N([3, 4]) == pytest.approx(7.0)
    lor = norm_from_spec({"kind": "lorentz", "weights": ["1", "1/2"]})
    assert lor([1, 1]) == pytest.approx(1.5)
    orl = norm_from_spec({"kind": "orlicz", "tau": "1/2", "r": "2", "p": "5/2", "horizon": 64})
    assert orl([1.0]) == 1.0
    assert isinstance(orl, Orlicz) and orl.function.pattern == Pattern.all_ones(64)
    sup = norm_from_spec({"kind": "sup", "subset": [1], "norms": [{"kind": "lp", "q": 1}, {"kind": "lp", "q": 2}]})
    assert sup([3, 4]) == pytest.approx(7.0)


@pytest.mark.parametrize(
    "doc",
    [
        {"kind": "bogus"},
        {"kind": "lp"},
        {"kind": "orlicz", "tau": "1/2", "r": "2"},
        {"kind": "weighted_sum", "norms": [{"kind": "lp", "q": 1}]},
    ],
)
def test_norm_from_spec_rejects(doc):
    with pytest.raises(InputFormatError):
        norm_from_spec(doc)


def test_orlicz_block_matches_constant_block(params):
    M = OrliczFunction(params, Pattern.all_ones(64))
    assert Orlicz(M).constant_block(32) == pytest.approx(4.0)


def _combined_norms():
    lorentz = Lorentz(WeightSeq.from_weights([1] + [Fraction(1, n) for n in range(2, 33)], p=2))
    parts = [Lp(1), Lp(2.5), Lp(math.inf), lorentz]
    half = 2 ** (-1 / 2)
    return [
        max_combo(parts),
        weighted_sum_combo([4, 4, 4, 4], parts),
        lp_sum_combine([half, half], [Lp(1), lorentz], 2),
        lp_sum_combine([0.5, 0.5], [Lp(3), Lp(math.inf)], 3, c0=0.75 ** (1 / 3)),
    ]


@pytest.mark.parametrize("index", range(4))
def test_combined_norms_are_symmetric_and_subadditive(index):
    N = _combined_norms()[index]
    rng = np.random.default_rng(30 + index)
    for _ in range(200):
        size = int(rng.integers(1, 33))
        a, b = rng.uniform(-1, 1, size), rng.normal(0, 1, size)
        assert N(a + b) <= (N(a) + N(b)) * (1 + 1e-12)
        moved = rng.choice([-1.0, 1.0], size) * a[rng.permutation(size)]
        assert N(moved) == pytest.approx(N(a), rel=1e-12)
        assert N(3 * a) == pytest.approx(3 * N(a), rel=1e-12)


def test_spreading_model_reports_missing_element(m3_state):
    state = import_bundle(export_bundle(m3_state))
    L = state.lattice
    a, b, top = L.index("a"), L.index("b"), L.index("top")
    # with top's pattern overwritten no element matches min over {a, b}
    state.patterns[top] = state.patterns[L.minimum_index]
    p = float(state.params.p)
    c = [0.0] * L.size
    c[a] = c[b] = 2 ** (-1 / p)
    result = classify_sum_spreading_model(state, c, ["basis"] * L.size)
    assert result.element is None
    assert result.via_join == top
    assert not result.consistent
    doc = result.to_dict(L.names)
    assert doc["element"] is None
    assert doc["via_join"] == "top"


def test_estimate_domination_without_samples():
    with pytest.raises(ParameterError):
        estimate_domination(Lp(1), Lp(2), sampler=lambda rng: [], block_lengths=[])
