import json

import numpy as np
import pytest

from sspkit import cli, io
from sspkit.fixtures import example1_chain, homogeneous


def run(*argv):
    return cli.run([str(a) for a in argv])


@pytest.fixture
def files(tmp_path):
    out = {}
    for name, extra in (("cycle", []), ("countdown", ["--n", 3]), ("stopping", ["--m", 10]), ("zero_hop", [])):
        path = tmp_path / f"{name}.json"
        res = run("fixture", name, *extra, "--out", path)
        assert res.exit_code == 0 and res.artifacts == [str(path)]
        out[name] = path
    return out


def write(tmp_path, name, doc):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return path


def test_gap_summary(files, tmp_path):
    res = run("gap", files["cycle"], "--out", tmp_path / "gap.json")
    assert res.exit_code == 0
    assert res.summary == "J*(s1)=0 Ĵ(s1)=1"
    doc = json.loads((tmp_path / "gap.json").read_text())
    assert doc["j_hat"] == {"t": 0.0, "s1": 1.0} and doc["j_hat_source"] == "policy"


def test_solve_countdown(files, tmp_path):
    out = tmp_path / "v.json"
    trace = tmp_path / "trace.csv"
    res = run("solve", files["countdown"], "--init", "zero", "--out", out, "--trace", trace)
    assert res.exit_code == 0
    assert json.loads(out.read_text()) == {"0": 0.0, "1": 1.0, "2": 2.0, "3": 3.0}
    assert trace.read_text().startswith("sweep,residual,n_infinite\n")


def test_solve_initialisations(files, tmp_path):
    out = tmp_path / "v.json"
    assert run("solve", files["cycle"], "--init", "perturbed:0.1", "--out", out).exit_code == 0
    assert json.loads(out.read_text())["s1"] == 1.0
    start = write(tmp_path, "j0.json", {"t": 0, "s1": 5})
    assert run("solve", files["cycle"], "--init", f"file:{start}", "--out", out).exit_code == 0
    assert json.loads(out.read_text())["s1"] == 1.0
    assert run("solve", files["cycle"], "--init", "bogus").exit_code == 3
    res = run("solve", files["countdown"], "--max-sweeps", 1)
    assert res.exit_code == 2


def test_verify_example1_interior(tmp_path):
    model, _, _ = example1_chain(0.5, 1.0, 30)
    mpath = tmp_path / "ex1.json"
    io.write_model(model, mpath)
    vpath = write(tmp_path, "g.json", io.values_to_dict(model, homogeneous(model, 2.0)))
    res = run("verify", mpath, "--values", vpath, "--domain", "interior", "--out", tmp_path / "r.json")
    assert res.exit_code == 0, res.summary
    res = run("verify", mpath, "--values", vpath, "--out", tmp_path / "r.json")
    assert res.exit_code == 1


def test_verify_needs_interior(files, tmp_path):
    vpath = write(tmp_path, "v.json", {"t": 0, "s1": 0.5})
    assert run("verify", files["cycle"], "--values", vpath, "--out", tmp_path / "r.json").exit_code == 0
    assert run("verify", files["cycle"], "--values", vpath, "--domain", "interior").exit_code == 3


def test_validate(files, tmp_path):
    assert run("validate", files["cycle"], "--out", tmp_path / "r.json").exit_code == 0
    doc = io.model_to_dict(io.read_model(files["cycle"]))
    doc["branches"][0][0][0]["cost"] = 1.0
    bad = write(tmp_path, "bad.json", doc)
    res = run("validate", bad, "--out", tmp_path / "r.json")
    assert res.exit_code == 1
    report = json.loads((tmp_path / "r.json").read_text())
    assert not report["valid"] and "termination not cost-free" in report["violations"][0]
    # other commands refuse the broken model
    assert run("gap", bad).exit_code == 1


def test_evaluate_and_classify(files, tmp_path):
    pol = write(tmp_path, "b.json", {"s1": "b"})
    out = tmp_path / "o.json"
    assert run("evaluate", files["cycle"], "--policy", pol, "--out", out).exit_code == 0
    assert json.loads(out.read_text())["s1"] == 0.0
    assert run("classify", files["cycle"], "--policy", pol, "--out", out).exit_code == 0
    assert json.loads(out.read_text())["states"]["s1"]["proper"] is False
    bad = write(tmp_path, "x.json", {"s1": "zzz"})
    assert run("evaluate", files["cycle"], "--policy", bad).exit_code == 3


def test_sweep_csv_and_json(files, tmp_path):
    csv_out = tmp_path / "s.csv"
    assert run("sweep", files["cycle"], "--deltas", "1,0.5,0.1,0.01", "--out", csv_out).exit_code == 0
    lines = csv_out.read_text().splitlines()
    assert lines[0] == "state,delta=1.0,delta=0.5,delta=0.1,delta=0.01,limit"
    assert lines[2].startswith("s1,2.0,1.5,")
    assert run("sweep", files["cycle"], "--deltas", "0.1,0.5").exit_code == 3
    assert run("sweep", files["cycle"], "--deltas", "a,b").exit_code == 3


def test_lump_and_homotopy(files, tmp_path):
    out = tmp_path / "l.json"
    res = run("lump", files["zero_hop"], "--out", out)
    assert res.exit_code == 0 and res.summary == "merged into t: s1"
    assert io.read_model(out).states == ("t", "s2")
    hcsv = tmp_path / "h.csv"
    assert run("homotopy", files["countdown"], "--alphas", "0.5,0.9", "--out", hcsv).exit_code == 0
    assert hcsv.read_text().splitlines()[3] == "2,1.5,1.9,1.9"


def test_rollout(files, tmp_path):
    pol = write(tmp_path, "a.json", {"s1": "a"})
    vals = write(tmp_path, "v.json", {"t": 0, "s1": 1})
    out = tmp_path / "r.json"
    res = run("rollout", files["cycle"], "--policy", pol, "--start", "s1", "--runs", 100, "--seed", 1, "--horizon", 3, "--values", vals, "--out", out)
    assert res.exit_code == 0
    doc = json.loads(out.read_text())
    assert doc["cost"] == 1.0 and doc["r"] == [1.0, 0.0, 0.0, 0.0] and doc["tail"] == [1.0, 0.0, 0.0, 0.0]
    assert run("rollout", files["cycle"], "--policy", pol, "--start", "nowhere").exit_code == 3


def test_outputs_are_byte_identical(files, tmp_path):
    pol = write(tmp_path, "p.json", {"s1": "0"})
    for argv in (
        ("gap", files["stopping"]),
        ("rollout", files["stopping"], "--policy", pol, "--start", "s1", "--runs", 300, "--seed", 4),
        ("fixture", "random", "--seed", 42),
        ("sweep", files["countdown"]),
    ):
        a, b = tmp_path / "a.out", tmp_path / "b.out"
        assert run(*argv, "--out", a).exit_code == 0
        assert run(*argv, "--out", b).exit_code == 0
        assert a.read_bytes() == b.read_bytes()


def test_fixture_certificate_and_example1(tmp_path):
    out, cert = tmp_path / "m.json", tmp_path / "c.json"
    res = run("fixture", "example1", "--alpha", 0.5, "--x0", 1, "--depth", 4, "--out", out, "--cert", cert)
    assert res.exit_code == 0
    model = io.read_model(out)
    assert model.states == ("0", "1", "2", "4", "8", "16")
    assert [model.states[i] for i in sorted(model.interior)] == ["1", "2", "4", "8"]
    assert json.loads(cert.read_text())["j_hat"]["16"] == 0.0


def test_bad_invocations(tmp_path):
    assert run().exit_code == 3
    assert run("frobnicate").exit_code == 3
    assert run("gap", tmp_path / "missing.json").exit_code == 3
    junk = tmp_path / "junk.json"
    junk.write_text("{not json")
    assert run("gap", junk).exit_code == 1


def test_main_exit_code(files, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["gap", str(files["cycle"])])
    assert exc.value.code == 0
    assert capsys.readouterr().out.endswith("J*(s1)=0 Ĵ(s1)=1\n")
