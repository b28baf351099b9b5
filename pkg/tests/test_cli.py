import json

import pytest

from ganfault.cli import main
from ganfault.report import parse_structured

TRAIN_CFG = "horizon = 600\nseed = 3\n"
TEST_CFG = (
    "horizon = 400\nseed = 4\n"
    "fault1.kind = sensor-bias\nfault1.channel = 0\nfault1.offset = 4\n"
    "fault1.start = 100\nfault1.end = 200\nfault1.name = bias_y0\n"
    "fault2.kind = stuck-actuator\nfault2.channel = 0\nfault2.offset = 0.25\n"
    "fault2.start = 250\nfault2.end = 350\n"
)


def run(*argv):
    return main([str(a) for a in argv])


def pipeline(root):
    root.mkdir(parents=True, exist_ok=True)
    (root / "train.cfg").write_text(TRAIN_CFG)
    (root / "test.cfg").write_text(TEST_CFG)
    train, test = root / "train.csv", root / "test.csv"
    assert run("simulate", "--config", root / "train.cfg", "--out", train) == 0
    assert run("simulate", "--config", root / "test.cfg", "--out", test) == 0
    assert run("train-ganae", "--data", train, "--out", root / "model.json", "--window", 4,
               "--epochs", 3, "--encoding-dim", 4, "--threshold", "auto", "--seed", 7) == 0
    assert run("detect", "--model", root / "model.json", "--data", test,
               "--out", root / "rep.json", "--predictions", root / "pred.csv") == 0
    assert run("group-test", "--model", root / "model.json", "--data", test,
               "--out", root / "gt.json", "--n-samples", 60) == 0
    assert run("train-svm", "--data", test, "--out", root / "svm.json", "--window", 4,
               "--nu", "0.3,0.5", "--folds", 3) == 0
    assert run("detect", "--model", root / "svm.json", "--data", test,
               "--out", root / "svm_rep.json") == 0
    assert run("report", root / "rep.json", root / "svm_rep.json", "--out", root / "all.txt") == 0
    return root


ARTIFACTS = ("train.csv", "test.csv", "model.json", "rep.json", "pred.csv", "gt.json",
             "svm.json", "svm_rep.json", "all.txt")


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    base = tmp_path_factory.mktemp("cli")
    return pipeline(base / "a"), pipeline(base / "b")


def test_pipeline_outputs(runs):
    a, _ = runs
    reports, _ = parse_structured((a / "rep.json").read_text())
    rep = reports[0]
    assert rep.TP + rep.FN > 0 and rep.TN + rep.FP > 0
    gt = json.loads((a / "gt.json").read_text())
    assert set(gt) >= {"statistic", "threshold", "reject"}
    assert gt["n1"] == gt["n2"] == 60
    assert (a / "pred.csv").read_text().splitlines()[0] == "index,label,predicted,score"
    assert "normal" in (a / "all.txt").read_text()
    cfg = json.loads((a / "model.json.config.json").read_text())
    assert cfg["command"] == "train-ganae" and cfg["config"]["random_state"] == 7


def test_reruns_byte_identical(runs):
    a, b = runs
    for name in ARTIFACTS:
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_report_from_rates(tmp_path, capsys):
    assert run("report", "--rates", 0.923, 0.728) == 0
    out = capsys.readouterr().out
    assert "92.30%" in out and "ACC=82.55%" in out


def test_usage_errors_exit_1(capsys):
    assert run("bogus") == 1
    assert run("detect", "--model", "m.json") == 1
    assert run("train-ganae", "--data", "x.csv", "--out", "y", "--threshold", "high") == 1


def test_runtime_errors_exit_2(tmp_path, capsys):
    assert run("detect", "--model", tmp_path / "none.json", "--data", tmp_path / "none.csv",
               "--out", tmp_path / "r.json") == 2
    bad = tmp_path / "bad.csv"
    bad.write_text("t,u0,y0,label\n0,1,oops,normal\n")
    assert run("train-ganae", "--data", bad, "--out", tmp_path / "m.json") == 2
    assert "line 2" in capsys.readouterr().err


def test_sweep_command(tmp_path):
    outs = []
    for tag in ("a", "b"):
        out = tmp_path / f"sweep_{tag}.json"
        assert run("sweep", "--out", out, "--dims", "2,4", "--seeds", "0", "--epochs", 1,
                   "--window", 2, "--train-horizon", 240, "--test-horizon", 240) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    _, rows = parse_structured(outs[0].decode())
    assert [r.encoding_dim for r in rows] == [2, 4]
    svg = tmp_path / "sweep.svg"
    assert run("report", tmp_path / "sweep_a.json", "--format", "svg-plot", "--out", svg) == 0
    assert svg.read_text().startswith("<svg")
