import json

import pytest

from main import EXIT_INPUT_ERROR, EXIT_OK, EXIT_VERIFICATION_FAILED, main
from services_pwl import pwl_from_csv_text


def _report(out, command):
    return json.loads((out / f"{command}_report.json").read_text(encoding="utf-8"))


def test_extend_slow_to(tmp_path):
    assert main(["extend", "--out", str(tmp_path), "--slow-to", "16", "--eps", "1"]) == EXIT_OK
    f = pwl_from_csv_text((tmp_path / "extended.csv").read_text(encoding="utf-8"))
    assert f.domain_end == 16
    report = _report(tmp_path, "extend")
    assert report["ok"] is True
    assert report["final_value"] == "11/4"
    assert report["steps"][0]["growth"] == "3/4"
    text = (tmp_path / "extend_report.txt").read_text(encoding="utf-8")
    assert text.startswith("EXTEND REPORT")
    assert "Verdict: PASS" in text


def test_extend_fast_from_input_file(tmp_path):
    src = tmp_path / "start.csv"
    src.write_text("x,S(x)\n1,1\n2,2\n", encoding="utf-8")
    out = tmp_path / "out"
    assert main(["extend", "--out", str(out), "--input", str(src), "--fast-to", "4", "--grid-points", "64"]) == EXIT_OK
    report = _report(out, "extend")
    assert [s["value"] for s in report["steps"][0]["steps"]] == ["3", "9/2"]
    assert report["final_value"] == "9/2"


def test_extend_input_errors(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("a,b\n1,1\n2,2\n", encoding="utf-8")
    assert main(["extend", "--out", str(tmp_path), "--input", str(bad)]) == EXIT_INPUT_ERROR
    assert main(["extend", "--out", str(tmp_path), "--input", str(tmp_path / "missing.csv")]) == EXIT_INPUT_ERROR
    assert main(["extend", "--out", str(tmp_path), "--slow-to", "16"]) == EXIT_INPUT_ERROR
    assert main(["extend", "--out", str(tmp_path), "--slow-eps", "1/2"]) == EXIT_INPUT_ERROR
    assert main(["extend", "--out", str(tmp_path), "--threads", "0"]) == EXIT_INPUT_ERROR


def test_incomparable(tmp_path):
    assert main(["incomparable", "--out", str(tmp_path), "--count", "2"]) == EXIT_OK
    assert (tmp_path / "family" / "S_1.csv").exists()
    assert (tmp_path / "family" / "requests.json").exists()
    report = _report(tmp_path, "incomparable")
    assert report["pairs"] == [{"pair": [1, 2], "incomparable": True}]
    assert report["verification"]["ok"]


@pytest.mark.parametrize("p, nodes", [("1", 3), ("2", 4)])
def test_powerset(tmp_path, p, nodes):
    assert main(["powerset", "--out", str(tmp_path), "--n", "2", "--p", p]) == EXIT_OK
    report = _report(tmp_path, "powerset")
    assert report["order_isomorphic"] is True
    assert len(report["matrix"]["nodes"]) == nodes
    assert (tmp_path / "fundamental.csv").read_text(encoding="utf-8").startswith("m,S_1(m),S_2(m)")


def test_encode_m3(tmp_path):
    assert main(["encode", "--out", str(tmp_path), "--lattice-name", "m3", "--depth", "6"]) == EXIT_OK
    report = _report(tmp_path, "encode")
    assert report["order_isomorphic"] is True
    assert report["properties"]["ok"] is True
    bundle = json.loads((tmp_path / "encoder_bundle.json").read_text(encoding="utf-8"))
    assert set(bundle["patterns"]) == {"bottom", "a", "b", "c", "top"}


def test_encode_from_file(tmp_path):
    doc = {"elements": ["0", "x", "y", "1"], "covers": [["0", "x"], ["0", "y"], ["x", "1"], ["y", "1"]]}
    path = tmp_path / "diamond.json"
    path.write_text(json.dumps(doc), encoding="utf-8")
    assert main(["encode", "--out", str(tmp_path), "--lattice", str(path), "--depth", "6"]) == EXIT_OK


def test_encode_too_shallow_fails_verification(tmp_path):
    assert main(["encode", "--out", str(tmp_path), "--lattice-name", "m3", "--depth", "1"]) == EXIT_VERIFICATION_FAILED
    report = _report(tmp_path, "encode")
    assert report["ok"] is False
    assert report["counterexample"] is not None


def test_encode_input_errors(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"elements": ["a", "b"], "covers": []}), encoding="utf-8")
    assert main(["encode", "--out", str(tmp_path), "--lattice", str(path)]) == EXIT_INPUT_ERROR
    assert main(["encode", "--out", str(tmp_path), "--lattice-name", "nope"]) == EXIT_INPUT_ERROR
    args = ["encode", "--out", str(tmp_path), "--tau", "1/2", "--r", "101/100", "--p", "3/2"]
    assert main(args) == EXIT_INPUT_ERROR


def test_norm_prints_values(tmp_path, capsys):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"kind": "orlicz", "tau": "1/2", "r": "2", "p": "5/2", "horizon": 64}), encoding="utf-8")
    vectors = tmp_path / "vectors.json"
    vectors.write_text(json.dumps([[1, 0, 0], [1, 1, 1, 1]]), encoding="utf-8")
    assert main(["norm", "--out", str(tmp_path), "--spec", str(spec), "--vectors", str(vectors)]) == EXIT_OK
    lines = [line for line in capsys.readouterr().out.splitlines() if line.startswith("orlicz\t")]
    assert lines[0].split("\t")[1] == "1"
    report = _report(tmp_path, "norm")
    assert report["values"][0]["value"] == 1.0
    assert report["values"][1]["residual"] <= 1e-8


def test_norm_rejects_bad_vectors(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"kind": "lp", "q": 2}), encoding="utf-8")
    vectors = tmp_path / "vectors.json"
    vectors.write_text(json.dumps({"a": 1}), encoding="utf-8")
    assert main(["norm", "--out", str(tmp_path), "--spec", str(spec), "--vectors", str(vectors)]) == EXIT_INPUT_ERROR


def test_chain(tmp_path):
    assert main(["chain", "--out", str(tmp_path)]) == EXIT_OK
    report = _report(tmp_path, "chain")
    assert report["reversed_chain"] is True
    assert report["upper_bound_contract"] is True
    assert len(report["supports"]) == 31
    assert all(s["index"] == s["support"][0] and s["sandwich"] for s in report["supports"])


def test_chain_rejects_exponents_outside_range(tmp_path):
    assert main(["chain", "--out", str(tmp_path), "--p-list", "2,4"]) == EXIT_INPUT_ERROR
    with pytest.raises(SystemExit):
        main(["chain", "--out", str(tmp_path), "--p-list", "two"])


def test_reports_are_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        assert main(["encode", "--out", str(out), "--lattice-name", "chain4", "--depth", "6", "--threads", "2"]) == EXIT_OK
    for name in ("encode_report.json", "encode_report.txt", "encoder_bundle.json"):
        assert (a / name).read_bytes() == (b / name).read_bytes()
