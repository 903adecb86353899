import json
from fractions import Fraction

import pytest

from services_encoder import (
    apply_domination,
    check_order,
    domination_matrix,
    export_bundle,
    import_bundle,
    init_state,
    is_power_of_two,
    next_powers_of_two,
    request_schedule,
    run_encoder,
    verify_balance,
    verify_properties,
    verify_shift_minimal,
    zero_count,
)
from services_lattice import chain, is_order_isomorphic, m3
from services_orlicz import Pattern
from utils_errors import InvariantError, ParameterError


def test_powers_of_two():
    assert next_powers_of_two(1, 3) == [2, 4, 8]
    assert next_powers_of_two(8, 2) == [16, 32]
    assert next_powers_of_two(0, 1) == [1]
    assert next_powers_of_two(5, 1) == [8]
    assert is_power_of_two(64) and not is_power_of_two(96) and not is_power_of_two(0)


def test_zero_count(params):
    assert zero_count(params, Fraction(1, 2)) == 3
    # tau^2 = 1/4 exactly, so the strict bound needs one more zero
    assert zero_count(params, Fraction(1, 4)) == 5
    assert zero_count(params, Fraction(1, 64)) == 13
    with pytest.raises(ParameterError):
        zero_count(params, 1)


def test_schedule_is_diagonal():
    L = m3()
    a, b = L.index("a"), L.index("b")
    schedule = request_schedule(L, 2)
    assert [(r.eps, r.element) for r in schedule] == [
        (Fraction(1, 2), a),
        (Fraction(1, 2), b),
        (Fraction(1, 4), a),
    ]
    assert schedule[0].A == L.down_set(a)
    assert len(request_schedule(L, 6)) == 18
    with pytest.raises(ParameterError):
        request_schedule(L, 0)


def test_init_state(params):
    L = m3()
    state = init_state(L, params)
    assert state.horizon == 1
    assert state.patterns[L.minimum_index] == Pattern(1, ())
    assert all(state.patterns[e] == Pattern(1, (1,)) for e in state.active)


def test_first_request(params):
    L = m3()
    a, b, c, top = (L.index(x) for x in ("a", "b", "c", "top"))
    state = init_state(L, params)
    rec = apply_domination(state, Fraction(1, 2), L.down_set(a))
    assert (rec.d, rec.m, rec.n1, rec.element) == (3, 8, 128, a)
    assert state.horizon == 128
    for e in (b, c, top):
        assert state.patterns[e].zero_positions == (1, 2, 4, 8)
    assert state.patterns[a].zero_positions == (1, 16, 32, 64)
    assert state.ones(a, 8) == 7
    assert state.ones(b, 8) == 4
    assert {state.ones(e, 128) for e in state.active} == {124}
    assert state.checkpoints == [1, 128]


def test_request_preconditions(params):
    L = m3()
    state = init_state(L, params)
    with pytest.raises(ParameterError):
        apply_domination(state, Fraction(1, 2), {L.index("a")})
    with pytest.raises(ParameterError):
        apply_domination(state, 1, L.down_set(L.index("a")))


def test_request_for_the_whole_lattice_is_trivial(params):
    L = m3()
    state = init_state(L, params)
    rec = apply_domination(state, Fraction(1, 2), L.down_set(L.index("top")))
    assert rec.trivial
    assert state.horizon == 2
    assert state.checkpoints == [1, 2]
    assert verify_balance(state).ok


def test_encoder_properties_on_standard_lattices(standard_lattice, params):
    state = run_encoder(standard_lattice, params, 6)
    report = verify_properties(state)
    assert report.ok, [r.to_dict() for r in report.results if not r.ok]
    assert [r.label for r in report.results] == ["i", "ii", "iii", "iv", "balance", "shift"]
    iso, pair = is_order_isomorphic(standard_lattice, domination_matrix(state))
    assert iso, pair


def test_every_encoder_pattern_is_shift_minimal(m3_state):
    assert verify_shift_minimal(m3_state).ok
    for pat in m3_state.patterns:
        assert all(is_power_of_two(z) for z in pat.zero_positions)


def test_thread_count_does_not_change_the_report(m3_state):
    a = verify_properties(m3_state, threads=1).to_dict()
    b = verify_properties(m3_state, threads=4).to_dict()
    assert a == b


def test_shallow_run_fails_verification(params):
    # depth 1 only separates a from the rest, so b and c stay equal
    L = m3()
    state = run_encoder(L, params, 1)
    report = verify_properties(state)
    assert not report.ok
    assert not report.get("ii").ok
    assert report.get("i").ok and report.get("balance").ok
    iso, _ = is_order_isomorphic(L, domination_matrix(state))
    assert not iso


def test_tampered_state_is_caught(m3_state):
    L = m3_state.lattice
    state = import_bundle(export_bundle(m3_state))
    b, c = L.index("b"), L.index("c")
    state.patterns[c] = state.patterns[b]
    result = check_order(state)
    assert not result.ok
    assert "c" in result.failure["pair"]


def test_order_evidence_covers_pairs_with_the_minimum(m3_state):
    L = m3_state.lattice
    result = check_order(m3_state)
    assert result.ok
    unrelated = [(i, j) for i in range(L.size) for j in range(L.size) if not L.leq(i, j)]
    assert len(unrelated) == 13
    assert len(result.evidence) == len(unrelated)
    by_pair = {tuple(ev["pair"]): ev for ev in result.evidence}
    for e in m3_state.active:
        ev = by_pair[(L.names[e], "bottom")]
        assert ev["k"] is not None
        assert ev["served"]
    assert "evidence" in result.to_dict()


def test_domination_matrix_evidence(m3_state):
    L = m3_state.lattice
    dm = domination_matrix(m3_state)
    a, b, top, bottom = (L.index(x) for x in ("a", "b", "top", "bottom"))
    assert dm.leq(bottom, a) and dm.leq(a, top)
    assert not dm.leq(a, b) and not dm.leq(top, a)
    ev = dm.evidence[(top, a)]
    assert ev.witness_m is not None and ev.ratio > 1
    assert dm.transitivity_violations() == []


def test_bundle_survives_json(m3_state, tmp_path):
    path = tmp_path / "bundle.json"
    path.write_text(json.dumps(export_bundle(m3_state)), encoding="utf-8")
    state = import_bundle(json.loads(path.read_text(encoding="utf-8")))
    assert state.patterns == m3_state.patterns
    assert state.checkpoints == m3_state.checkpoints
    assert state.request_log == m3_state.request_log
    assert verify_properties(state).ok


def test_bundle_with_wrong_horizon_is_rejected(params):
    state = run_encoder(chain(2), params, 1)
    doc = export_bundle(state)
    doc["horizon"] += 1
    with pytest.raises(InvariantError):
        import_bundle(doc)
