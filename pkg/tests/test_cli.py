import json

import numpy as np
import pytest

from corrtensor import cli
from corrtensor.cli import Scenario, generate_instance, main, run_scenario, strip_timing


def run_main(args, capsys):
    code = main(args)
    out = capsys.readouterr()
    return code, out.out, out.err


def test_functor_scalar_trivial():
    rep = run_scenario(Scenario("functor", trials=10, seed=1, instance="scalar-trivial"))
    assert rep.passed
    assert rep.summary["isometry_gap"]["max"] < 1e-14


def test_reconstruct_instance(tmp_path, capsys):
    path = tmp_path / "rec.json"
    assert main(["generate", "reconstruct", "-d", "2", "--seed", "7", "--nmax", "3", "--out", str(path)]) == 0
    inst = json.loads(path.read_text())
    assert inst["d"] == 2 and len(inst["T"]) == 2 and len(inst["T"][0]) == 2
    rep = run_scenario(Scenario("reconstruct", seed=7, instance=str(path)))
    assert rep.passed
    assert rep.summary["popescu_difference"]["max"] <= 1e-12


def test_disc_convergence():
    rep = run_scenario(Scenario("disc_convergence", trials=20, truncation=200))
    assert rep.passed
    assert abs(rep.records[0]["fock_norm"] - 2.0) < 1e-2


def test_generate_is_reproducible(tmp_path):
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    main(["generate", "functor", "--seed", "42", "--out", str(a)])
    main(["generate", "functor", "--seed", "42", "--out", str(b)])
    assert a.read_bytes() == b.read_bytes()
    meta = json.loads(a.read_text())["context"]["meta"]
    assert "N_blocks" in meta and "M_blocks" in meta


def test_generate_stabilize():
    inst = generate_instance("stabilize", 0, nmax=3, d=1)
    assert inst["M_dim"] == 4
    assert inst["fock_dims"] == [1, 1, 1, 1]


def test_generated_cp_instance_passes(tmp_path, capsys):
    path = tmp_path / "cp.json"
    main(["generate", "cp_lemma", "--seed", "9", "--out", str(path)])
    code, out, _ = run_main(["verify", "cp_lemma", "--instance", str(path)], capsys)
    assert code == 0 and "overall: PASS" in out


def test_determinism_and_formats(tmp_path, capsys):
    args = ["verify", "ac_transform", "--trials", "8", "--seed", "5", "--format", "machine"]
    _, first, _ = run_main(args, capsys)
    _, second, _ = run_main(args, capsys)
    r1, r2 = json.loads(first), json.loads(second)
    assert strip_timing(r1) == strip_timing(r2)
    _, human, _ = run_main(args[:-2], capsys)
    for name, s in r1["summary"].items():
        assert f"{name}: max={s['max']!r}" in human


def test_parallel_trials_match():
    s = Scenario("functor", trials=6, seed=3)
    assert strip_timing(run_scenario(s).to_dict()) == strip_timing(run_scenario(s, jobs=2).to_dict())


def test_exit_codes(tmp_path, capsys):
    code, _, _ = run_main(["verify", "disc_convergence", "--trials", "2"], capsys)
    assert code == 0
    code, _, _ = run_main(["verify", "functor", "--trials", "3", "--tol", "isometry_gap=-1"], capsys)
    assert code == 1
    code, _, err = run_main(["verify", "functor", "--tol", "nonsense=1"], capsys)
    assert code == 2 and "nonsense" in err
    bad = tmp_path / "bad.json"
    bad.write_text("{\n  oops\n}")
    code, _, err = run_main(["report", str(bad)], capsys)
    assert code == 2 and "line 2" in err


def test_instance_kind_mismatch(tmp_path, capsys):
    path = tmp_path / "s.json"
    main(["generate", "stabilize", "--out", str(path)])
    code, _, err = run_main(["verify", "reconstruct", "--instance", str(path)], capsys)
    assert code == 2 and "stabilize" in err


def test_report_round_trip(tmp_path, capsys):
    path = tmp_path / "r.json"
    assert main(["verify", "stabilize", "--nmax", "2", "--format", "machine", "--out", str(path)]) == 0
    code, out, _ = run_main(["report", str(path)], capsys)
    assert code == 0 and "scenario stabilize" in out
    code, out, _ = run_main(["report", str(path), "--format", "machine"], capsys)
    assert strip_timing(json.loads(out)) == strip_timing(json.loads(path.read_text()))


def test_output_directory_from_environment(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv(cli.OUT_ENV, str(tmp_path))
    assert main(["verify", "disc_convergence", "--trials", "2", "--format", "machine"]) == 0
    assert json.loads((tmp_path / "report-disc_convergence.json").read_text())["passed"]


def test_verbose_lists_records(capsys):
    code, out, _ = run_main(["verify", "reconstruct", "--nmax", "2", "--verbose"], capsys)
    assert code == 0
    assert out.count('"popescu_difference"') == 9


def test_unknown_kind():
    with pytest.raises(ValueError):
        Scenario("nope")
    with pytest.raises(SystemExit):
        main(["verify", "nope"])
