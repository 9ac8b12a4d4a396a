import json
from importlib import resources

import pytest

from gunitary import cli, suite

DATA = resources.files("gunitary") / "data"


def _run(capsys, *argv):
    code = cli.run([str(a) for a in argv])
    out = capsys.readouterr()
    return code, json.loads(out.out), out.err


def test_ncb_shortcut(capsys):
    code, rep, err = _run(capsys, "ncb", DATA / "m2_unit.json", "--no-cache")
    assert code == 0 and rep["passed"] is None
    assert rep["results"]["ncb"] == 1.0
    assert rep["results"]["shortcut"] == "unitary_conjugation"
    assert rep["schema"] == "opspace/1" and "n_cb = 1" in err


def test_nclassic_matrix_algebra(capsys):
    code, rep, _ = _run(capsys, "nclassic", DATA / "m2_nclassic.json", "--restarts", "10", "--no-cache")
    assert code == 0 and abs(rep["results"]["n"] - 0.5) < 1e-3


def test_malformed_basis_exits_2(capsys):
    code, rep, err = _run(capsys, "norm", DATA / "bad_basis.json", "--no-cache")
    assert code == 2
    assert rep["error"]["kind"] == "input" and rep["error"]["path"].startswith("$.space.basis")
    assert "input error" in err


def test_missing_input_exits_2(capsys, tmp_path):
    code, rep, _ = _run(capsys, "norm", "--no-cache")
    assert code == 2
    code, rep, _ = _run(capsys, "norm", tmp_path / "nope.json", "--no-cache")
    assert code == 2 and "not found" in rep["error"]["message"]


def test_norm_and_gamma(capsys):
    code, rep, _ = _run(capsys, "norm", DATA / "span_i_e12.json", "--no-cache")
    assert code == 0 and abs(rep["results"]["norm"] - 1) < 1e-12
    code, rep, _ = _run(capsys, "gamma", DATA / "span_i_e12.json", "--nmax", "1", "--restarts", "4", "--no-cache")
    assert code == 0 and abs(rep["results"]["gamma"] - 0.5) < 1e-6
    assert rep["results"]["kind"] == "lower_bound" and rep["results"]["n_max"] == 1


def test_cbnorm_transpose(capsys):
    code, rep, _ = _run(capsys, "cbnorm", DATA / "transpose2.json", "--kmax", "2", "--restarts", "3", "--no-cache")
    assert code == 0
    assert abs(rep["results"]["cb_norm"] - 2) < 1e-6
    assert abs(rep["results"]["brute_force"] - 2) < 1e-6


def test_check_ossys_pass_and_fail(capsys):
    code, rep, _ = _run(capsys, "check-ossys", DATA / "m2_unit.json", "--no-cache")
    assert code == 0 and rep["passed"] is True
    code, rep, _ = _run(capsys, "check-ossys", DATA / "span_i_e12.json", "--no-cache")
    assert code == 1 and rep["passed"] is False


def test_mproj_quotient_and_unital(capsys):
    code, rep, _ = _run(capsys, "mproj-verify", DATA / "m2_sum_m2.json", "--kmax", "2", "--no-cache")
    assert code == 0 and rep["results"]["projection"]["verified"]
    code, rep, _ = _run(capsys, "quotient", DATA / "m2_sum_m2.json", "--kmax", "2", "--no-cache")
    assert code == 0 and len(rep["results"]["quotient_space"]["basis"]) == 4
    code, rep, _ = _run(capsys, "check-unital", DATA / "m2_sum_m2.json", "--kmax", "1", "--nmax", "2", "--no-cache")
    assert code == 0 and rep["results"]["report"]["passed"]


def test_cone_test_exact(capsys, tmp_path):
    doc = tmp_path / "x.json"
    doc.write_text(json.dumps({"element": {"matrix": [[1, 0], [0, -0.5]]}}))
    code, rep, err = _run(capsys, "cone-test", DATA / "m2_unit.json", doc, "--no-cache")
    assert code == 0
    assert rep["results"]["verdict"]["member"] is False and "exact" in err


def test_report_is_deterministic(capsys, tmp_path):
    out1, out2 = tmp_path / "a.json", tmp_path / "b.json"
    for out in (out1, out2):
        assert cli.run(["gamma", str(DATA / "span_i_e12.json"), "--nmax", "2", "--restarts", "3",
                        "--no-cache", "--out", str(out)]) == 0
    capsys.readouterr()
    assert out1.read_bytes() == out2.read_bytes()
    assert "timing" not in json.loads(out1.read_text())


def test_cache_does_not_change_results(capsys, tmp_path):
    base = ["gamma", DATA / "span_i_e12.json", "--nmax", "2", "--restarts", "3"]
    _, fresh, _ = _run(capsys, *base, "--no-cache")
    _, first, _ = _run(capsys, *base, "--cache-dir", tmp_path)
    _, again, _ = _run(capsys, *base, "--cache-dir", tmp_path)
    assert any(tmp_path.iterdir())
    assert first["results"] == again["results"]
    assert abs(first["results"]["gamma"] - fresh["results"]["gamma"]) <= 1e-10


def test_timing_opt_in(capsys):
    _, rep, _ = _run(capsys, "norm", DATA / "span_i_e12.json", "--no-cache", "--timing")
    assert rep["timing"]["total_seconds"] >= 0


def test_tol_option_parsing(capsys):
    with pytest.raises(SystemExit):
        cli.build_parser().parse_args(["norm", "--tol", "bogus=1"])
    args = cli.build_parser().parse_args(["norm", "--tol", "msum=1e-6"])
    assert args.tol == [("msum", 1e-6)]
    capsys.readouterr()


def test_suite_failure_exit_code(capsys, monkeypatch):
    def fake(cfg, only=None):
        return [suite.CriterionResult(1, "stub", False, "forced failure")], {}
    monkeypatch.setattr(suite, "run_suite", fake)
    code, rep, err = _run(capsys, "suite", "--no-cache")
    assert code == 1 and rep["passed"] is False and "[FAIL]" in err
