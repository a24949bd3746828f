import csv
import json

import pytest

from wavecount import cli


def _load(path):
    return json.loads(path.read_text())


def test_euclid_csv_and_json(tmp_path):
    out = tmp_path / "e.csv"
    assert cli.main(["euclid", "--r-min", "50", "--r-max", "400", "--r-steps", "12", "--out", str(out)]) == 0
    rows = list(csv.reader(out.read_bytes().decode().splitlines()))
    assert rows[0] == ["R", "exact_count", "smoothed_count", "ball_volume", "error", "epsilon"]
    assert len(rows) == 13
    assert b"\r\n" in out.read_bytes()
    rep = _load(tmp_path / "e.json")
    assert rep["subcommand"] == "euclid"
    assert 0 < rep["fitted"]["alpha"] <= 0.5
    assert rep["provenance"]["config_hash"] == cli.config_hash(rep["config"])


def test_euclid_smoothed(tmp_path):
    out = tmp_path / "e.json"
    assert cli.main(["euclid", "--r-min", "3", "--r-max", "6", "--r-steps", "4", "--smoothed", "--out", str(out)]) == 0
    recs = _load(out)["records"]
    assert all(r["smoothed_count"] is not None for r in recs)


def test_determinism(tmp_path):
    args = ["euclid", "--r-min", "50", "--r-max", "200", "--r-steps", "10"]
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    assert cli.main(args + ["--out", str(a)]) == 0
    assert cli.main(args + ["--out", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    c, d = tmp_path / "c.json", tmp_path / "d.json"
    for p in (c, d):
        assert cli.main(["mostow", "--input", str(_heisenberg(tmp_path)), "--samples", "5", "--seed", "3",
                         "--out", str(p)]) == 0
    assert c.read_bytes() == d.read_bytes()


def test_negative_radius_names_field(capsys):
    assert cli.main(["euclid", "--r-min", "-5"]) == 1
    err = capsys.readouterr().err
    assert "r_min" in err


def test_invariant_failure_exit_code(capsys):
    # on [0.5, 2] the fitted exponent exceeds the trivial (n-1)/n
    assert cli.main(["euclid", "--r-min", "0.5", "--r-max", "2", "--r-steps", "12"]) == 2
    assert "alpha_below_trivial" in capsys.readouterr().err


def test_timing_only_on_stderr(capsys):
    assert cli.main(["hyperbolic", "--r-min", "2", "--r-max", "4", "--r-steps", "3"]) == 0
    cap = capsys.readouterr()
    rep = json.loads(cap.out)
    assert "s" in cap.err and "time" not in json.dumps(rep)
    assert [r["count"] for r in rep["records"]] == sorted(r["count"] for r in rep["records"])
    assert rep["columns"][-1] == "relative_error"


def test_config_overrides_flags(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"r_min": 4.0, "r_max": 5.0, "r_steps": 2}))
    out = tmp_path / "h.json"
    assert cli.main(["hyperbolic", "--r-min", "2", "--config", str(cfg), "--out", str(out)]) == 0
    assert [r["R"] for r in _load(out)["records"]] == [4.0, 5.0]
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"radius": 3}))
    assert cli.main(["hyperbolic", "--config", str(bad)]) == 1


def test_config_round_trip(tmp_path):
    out = tmp_path / "t.json"
    assert cli.main(["triple", "--height", "1", "--out", str(out)]) == 0
    rep = _load(out)
    again = tmp_path / "cfg.json"
    cfg = {k: v for k, v in rep["config"].items()}
    again.write_text(json.dumps(cfg))
    out2 = tmp_path / "t2.json"
    assert cli.main(["triple", "--config", str(again), "--out", str(out2)]) == 0
    assert out.read_bytes() == out2.read_bytes()


def test_triple(tmp_path):
    out = tmp_path / "t.json"
    assert cli.main(["triple", "--height", "1", "--precision", "96", "--out", str(out)]) == 0
    rep = _load(out)
    assert rep["fitted"]["count"] == 4
    assert all(r["precision_bits"] == 96 for r in rep["records"])
    assert all(rep["invariants"].values())
    assert cli.main(["triple", "--precision", "8"]) == 1


def test_cone(tmp_path):
    inp = tmp_path / "a2.json"
    inp.write_text(json.dumps({"symmetric": {"kind": "split", "types": "A2"}}))
    out = tmp_path / "c.json"
    assert cli.main(["cone", "--input", str(inp), "--samples", "200", "--out", str(out)]) == 0
    rep = _load(out)
    assert rep["fitted"]["S"] == [["0", "2"], ["2", "0"]]
    assert rep["fitted"]["is_wavefront"] is True
    assert rep["invariants"] == {"M_in_N0_S": True, "faces_cover_samples": True}
    assert rep["fitted"]["face_sets_canonical"] is False


def test_cone_explicit_flags(tmp_path):
    inp = tmp_path / "f.json"
    inp.write_text(json.dumps({"dim_a": 1, "positive_roots": [[1]], "flags": [[[1], [1]]]}))
    out = tmp_path / "c.json"
    assert cli.main(["cone", "--input", str(inp), "--samples", "50", "--out", str(out)]) == 0
    assert _load(out)["fitted"]["S"] == [["2"]]
    missing = tmp_path / "m.json"
    missing.write_text(json.dumps({"dim_a": 1}))
    assert cli.main(["cone", "--input", str(missing)]) == 1
    assert cli.main(["cone"]) == 1


def test_ct_single(tmp_path):
    out = tmp_path / "ct.json"
    assert cli.main(["ct", "--c", "3", "--r", "1", "--c0", "2", "--remainder", "exp", "--tmax", "20",
                     "--out", str(out)]) == 0
    rep = _load(out)
    rec = rep["records"][0]
    assert sorted(e[0] for e in rec["exponents"]) == pytest.approx([-1, 3])
    assert rec["fitted_decay"] >= 1 + 1 - 0.05
    assert rep["invariants"]["slow_coefficients_vanish"]


def test_ct_batch(tmp_path):
    batch = tmp_path / "b.json"
    batch.write_text(json.dumps({"systems": [{"c": -3}, {"c": 1, "r": 1.2}, {"c": -10}]}))
    out = tmp_path / "ct.json"
    assert cli.main(["ct", "--batch", str(batch), "--c0", "2.1", "--tmax", "12", "--p-prime", "2",
                     "--out", str(out)]) == 0
    rep = _load(out)
    assert [r["c"] for r in rep["records"]] == [-3, 1, -10]
    assert rep["records"][1]["r"] == 1.2
    assert rep["fitted"]["max_hypothesis_b_ratio"] == max(r["hypothesis_b_ratio"] for r in rep["records"])
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps([{"c": 0, "r": -1}]))
    assert cli.main(["ct", "--batch", str(bad)]) == 1
    # the p-norm needs decay faster than e^{-2t/p}: r = 0.5 < 2/2.5 is refused
    slow = tmp_path / "slow.json"
    slow.write_text(json.dumps([{"c": 1, "r": 0.5}]))
    assert cli.main(["ct", "--batch", str(slow), "--c0", "2.1", "--p-prime", "2"]) == 1


def _heisenberg(tmp_path):
    p = tmp_path / "heis.json"
    p.write_text(json.dumps({"matrices": [[[0, 1, 0], [0, 0, 0], [0, 0, 0]],
                                          [[0, 0, 0], [0, 0, 1], [0, 0, 0]],
                                          [[0, 0, 1], [0, 0, 0], [0, 0, 0]]],
                             "u_H": [[1, 0, 0]]}))
    return p


def test_mostow(tmp_path):
    out = tmp_path / "m.json"
    assert cli.main(["mostow", "--input", str(_heisenberg(tmp_path)), "--samples", "20", "--out", str(out)]) == 0
    rep = _load(out)
    assert rep["fitted"]["nilpotency_degree"] == 2
    assert rep["fitted"]["central_series_dims"] == [3, 1, 0]
    assert rep["fitted"]["V"] == [[["0", "1", "0"]], [["0", "0", "1"]]]
    assert rep["invariants"]["decomposition_exact"]


def test_mostow_errors(tmp_path):
    p = tmp_path / "x.json"
    p.write_text(json.dumps({"matrices": [[[0, 1, 0], [0, 0, 0], [0, 0, 0]],
                                          [[0, 0, 0], [0, 0, 1], [0, 0, 0]],
                                          [[0, 0, 1], [0, 0, 0], [0, 0, 0]]],
                             "u_H": [[1, 0, 0], [0, 1, 0]]}))
    assert cli.main(["mostow", "--input", str(p)]) == 1
    p.write_text("{not json")
    assert cli.main(["mostow", "--input", str(p)]) == 1


def test_report_render(tmp_path, capsys):
    empty = cli.make_report("cone", {"x": 1}, [], {}, {})
    assert cli.report_render(empty) == "# wavecount cone\n"
    out = tmp_path / "h.json"
    assert cli.main(["hyperbolic", "--r-min", "3", "--r-max", "6", "--r-steps", "4", "--out", str(out)]) == 0
    md = tmp_path / "h.md"
    assert cli.main(["report", "--input", str(out), "--out", str(md)]) == 0
    text = md.read_text()
    assert "| R | count | main_term | relative_error | trend |" in text
    assert text.count("\n| ") >= 5
    e = tmp_path / "e.json"
    assert cli.main(["euclid", "--r-min", "50", "--r-max", "200", "--r-steps", "10", "--out", str(e)]) == 0
    capsys.readouterr()
    assert cli.main(["report", "--input", str(e)]) == 0
    assert "fitted alpha = " in capsys.readouterr().out


def test_budget_environment(monkeypatch, capsys):
    monkeypatch.setenv("WAVECOUNT_BUDGET", "50")
    assert cli.main(["hyperbolic", "--r-min", "8", "--r-max", "8", "--r-steps", "1"]) == 1
    assert "budget" in capsys.readouterr().err.lower()


def test_argparse_usage_error():
    with pytest.raises(SystemExit) as exc:
        cli.main(["nosuch"])
    assert exc.value.code == 2


def test_plain_serialization():
    from fractions import Fraction

    assert cli._plain({"a": float("nan"), "b": 1 + 2j, "c": Fraction(1, 3), "d": float("inf")}) == \
        {"a": None, "b": [1.0, 2.0], "c": "1/3", "d": "inf"}
    assert cli.to_csv([{"x": 'a,"b"', "y": 1}], ["x", "y"]) == 'x,y\r\n"a,""b""",1\r\n'
