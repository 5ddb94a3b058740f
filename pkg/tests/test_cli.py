import io
import json
from pathlib import Path

import pytest

from twostage import io as tio
from twostage.cli import main

DATA = Path(__file__).resolve().parents[1] / "data"
FIXTURES = sorted(p for p in DATA.rglob("*.json") if p.parent.name != "malformed")
MALFORMED = dict(
    line.split() for line in (DATA / "malformed" / "expected-exit-codes.txt").read_text().splitlines()
)


def run(capsys, *argv, stdin=None, monkeypatch=None):
    if stdin is not None:
        monkeypatch.setattr("sys.stdin", io.StringIO(stdin))
    code = main([str(a) for a in argv])
    return code, json.loads(capsys.readouterr().out)


def write(tmp_path, doc, name="in.json"):
    p = tmp_path / name
    p.write_text(json.dumps(doc))
    return p


def test_volume_of_strip(capsys, tmp_path):
    p = write(tmp_path, {"kind": "integer-system", "payload": {"A": [[1, 1]], "b": ["3/2"]}})
    code, rep = run(capsys, "volume", p)
    assert code == 0
    assert rep["results"]["volume"] == {"value": "7/8", "tag": "exact"}
    assert len(rep["inputs"]["sha256"]) == 64


def test_count_independent_sets_of_single_edge(capsys, tmp_path, monkeypatch):
    doc = {"kind": "graph", "payload": {"n": 2, "edges": [[1, 2]]}}
    code, rep = run(capsys, "count-is", "-", stdin=json.dumps(doc), monkeypatch=monkeypatch)
    assert code == 0
    assert rep["results"]["count"] == {"value": 3, "tag": "exact"}


def test_newsvendor_expected_recourse(capsys):
    code, rep = run(capsys, "expected-recourse", DATA / "sslp" / "newsvendor-c0-1.json", "--x", "1/2")
    assert code == 0
    assert rep["results"]["expected_recourse"] == {"value": "1/8", "tag": "exact"}
    assert rep["results"]["coverage_deficit"]["value"] == "0/1"


def test_incomplete_recourse_exits_one(capsys):
    code, rep = run(capsys, "expected-recourse", DATA / "sslp" / "incomplete.json", "--x", "1/2")
    assert code == 1
    assert rep["error"]["type"] == "RecourseIncompleteError"
    assert rep["error"]["deficit"] == "1/2"


def test_solve_newsvendor(capsys):
    code, rep = run(capsys, "solve", DATA / "sslp" / "newsvendor-c1-4.json", "--epsilon", "1/1000000")
    assert code == 0
    x = tio.as_fraction(rep["results"]["x"]["value"][0])
    assert abs(x - tio.as_fraction("3/4")) <= tio.as_fraction("1/1000000")


def test_gadget_area_tags(capsys):
    code, rep = run(capsys, "gadget-area", DATA / "graphs" / "two-edge-star-3.json")
    assert code == 0
    r = rep["results"]
    assert r["area"]["tag"] == "certified-interval"
    assert set(r["area"]["value"]) == {"lo", "hi", "bits"}
    assert r["cut_bitmap"]["value"].count("1") == 3
    assert r["count"]["value"] == 5


def test_reduce_volume(capsys):
    code, rep = run(capsys, "reduce-volume", DATA / "integer-systems" / "strip.json")
    assert code == 0
    assert rep["results"]["volume"]["value"] == "7/8"
    assert rep["results"]["agree"]["value"] is True


def test_bisect_expectation(capsys):
    code, rep = run(capsys, "bisect-expectation", DATA / "graphs" / "two-edge-star-3.json")
    assert code == 0
    assert rep["diagnostics"]["oracle_calls"] <= 6
    assert rep["results"]["contains"]["value"] is True


def test_mc_check_is_statistical_and_deterministic(capsys):
    args = ("mc-check", DATA / "polytopes" / "triangle.json", "--samples", "20000", "--seed", "5")
    code, a = run(capsys, *args)
    _, b = run(capsys, *args)
    assert code == 0
    assert a["results"]["estimate"]["tag"] == "statistical"
    a["diagnostics"].pop("seconds")
    b["diagnostics"].pop("seconds")
    assert a == b


def test_moments(capsys):
    code, rep = run(capsys, "moments", DATA / "integer-systems" / "cube-corner.json")
    assert code == 0
    assert rep["results"]["1"]["value"] == "1/6"
    assert rep["results"]["x1"]["value"] == "1/24"


@pytest.mark.parametrize("family", ["graph", "integer-system", "newsvendor", "sslp"])
def test_generate_output_validates(capsys, family):
    assert main(["generate", family, "--seed", "3"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert tio.validate(doc).kind in {"graph", "integer-system", "sslp"}


def test_generate_is_seeded(capsys):
    main(["generate", "graph", "--n", "6", "--seed", "9"])
    a = capsys.readouterr().out
    main(["generate", "graph", "--n", "6", "--seed", "9"])
    assert capsys.readouterr().out == a


def test_kind_mismatch_exits_three(capsys):
    code, rep = run(capsys, "count-is", DATA / "integer-systems" / "strip.json")
    assert code == 3
    assert rep["error"]["pointer"] == "/kind"


def test_missing_first_stage_point_exits_three(capsys):
    code, _ = run(capsys, "expected-recourse", DATA / "sslp" / "newsvendor-c0-1.json")
    assert code == 3


def test_missing_file_exits_two(capsys, tmp_path):
    code, rep = run(capsys, "volume", tmp_path / "absent.json")
    assert code == 2
    assert "reason" in rep["error"]


@pytest.mark.parametrize("name", sorted(MALFORMED))
def test_malformed_fixture_exit_codes(capsys, name):
    code, rep = run(capsys, "volume", DATA / "malformed" / name)
    assert code == int(MALFORMED[name])
    assert rep["error"]["code"] == code
    if code == 3:
        assert "pointer" in rep["error"]


def test_sslp_with_wrong_w_shape_points_at_w(capsys):
    code, rep = run(capsys, "expected-recourse", DATA / "malformed" / "sslp-wrong-w.json", "--x", "0")
    assert code == 3
    assert rep["error"]["pointer"].startswith("/payload/W")


@pytest.mark.parametrize("path", FIXTURES, ids=lambda p: f"{p.parent.name}/{p.stem}")
def test_fixture_round_trip(path):
    inst = tio.parse_instance(str(path))
    buf = io.StringIO()
    tio.dump(inst, buf)
    buf.seek(0)
    again = tio.parse_instance(buf)
    assert again == inst
    assert again.digest() == inst.digest()


def test_typed_round_trip_of_sslp():
    inst = tio.parse_instance(str(DATA / "sslp" / "random-0.json"))
    sp = tio.to_sslp(inst)
    assert tio.sslp_instance(sp, inst.metadata).to_json() == inst.to_json()
