import json

import numpy as np
import pytest

from findworld.cli import main
from findworld.errors import ConfigError
from findworld.study import STAT_KEYS, StudyConfig, derive_seeds, run_study, summarize

TINY = {"n": 800, "iterations": 1, "depth": 2, "eta": 0.1, "rounds": 30, "n_boot": 20,
        "steps": 2, "plots": False}


def test_derive_seeds_distinct_and_stable():
    a, b = derive_seeds(0, 0), derive_seeds(0, 1)
    assert a == derive_seeds(0, 0)
    assert a != b
    assert len(set(a.values())) == len(a)


@pytest.mark.parametrize("bad", [{"n": 5}, {"depth": 3}, {"iterations": 0}, {"train_fraction": 1.0},
                                 {"eps": 0}, {"unknown": 1}])
def test_config_validation(tmp_path, bad):
    with pytest.raises(ConfigError):
        StudyConfig.from_dict({"out_dir": str(tmp_path)} | bad)


def test_single_iteration_sd_is_zero():
    rec = {"iteration": 0, "panels": {"real": {k: 0.8 for k in STAT_KEYS}},
           "relations": {"real": {"label": "tradeoff", "rho": -1.0}}, "base_rate_gap": {"real": 0.2},
           "lambda_star": 10.0, "failures": []}
    s = summarize([rec], ["real"])
    assert s["panel"]["real"]["auc"] == {"mean": 0.8, "sd": 0.0, "lo": 0.8, "hi": 0.8, "n": 1}
    assert s["relations"]["real"]["tradeoff"] == 1


@pytest.fixture(scope="module")
def tiny_study(tmp_path_factory):
    out = tmp_path_factory.mktemp("study")
    summary = run_study(StudyConfig.from_dict(TINY | {"out_dir": str(out)}))
    return out, summary


def test_study_outputs(tiny_study):
    out, summary = tiny_study
    for name in ("summary.json", "table.csv", "curves.csv"):
        assert (out / name).is_file()
    assert summary["iterations"] == 1
    assert summary["worlds"] == ["real", "find", "adapted", "warped"]
    table = (out / "table.csv").read_text().splitlines()
    assert len(table) == 5 and table[0].startswith("world,")
    curves = (out / "curves.csv").read_text().splitlines()
    assert curves[0] == "iteration,world,w,lambda,fairness,auc,ci_lo,ci_hi"
    if summary["lambda_star"][0] is not None:
        assert len(curves) == 1 + 4 * 4


def test_report_markdown_and_csv(tiny_study, tmp_path, capsys):
    out, _ = tiny_study
    assert main(["report", "--in", str(out / "summary.json")]) == 0
    md = capsys.readouterr().out
    assert md.startswith("Iterations: 1") and "| World | DP |" in md
    assert main(["report", "--in", str(out / "summary.json"), "--format", "csv",
                 "--out", str(tmp_path / "t.csv")]) == 0
    assert (tmp_path / "t.csv").read_text().startswith("world,")


def write(tmp_path, obj, name="c.json"):
    p = tmp_path / name
    p.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return str(p)


def test_cli_simulate_and_train(tmp_path, capsys):
    cfg = write(tmp_path, {"n": 300, "seed": 1, "out_dir": str(tmp_path / "sim")})
    assert main(["simulate", "--config", cfg]) == 0
    result = json.loads(capsys.readouterr().out)
    assert set(result) == {"real", "find"}
    tcfg = write(tmp_path, {"train": str(tmp_path / "sim" / "real.csv"),
                            "test": str(tmp_path / "sim" / "find.csv"),
                            "params": {"rounds": 10, "depth": 2}, "n_boot": 10,
                            "out_dir": str(tmp_path / "tr")}, "t.json")
    assert main(["train", "--config", tcfg]) == 0
    assert (tmp_path / "tr" / "model.json").is_file()
    probs = np.loadtxt(tmp_path / "tr" / "predictions.csv", skiprows=1)
    assert probs.shape == (300,) and np.all((probs > 0) & (probs < 1))


@pytest.mark.parametrize("cfg, code", [
    ("{not json", 2),
    ({"train": "/nonexistent.csv"}, 2),
    ({"train": "TRAIN", "params": {"eta": 5}}, 2),
    ({"train": "TRAIN", "params": {"bogus": 1}}, 2),
    ({"train": "BROKEN"}, 3),
])
def test_cli_exit_codes(tmp_path, capsys, cfg, code):
    if isinstance(cfg, dict):
        good = tmp_path / "sim"
        main(["simulate", "--config", write(tmp_path, {"n": 200, "out_dir": str(good)}, "s.json")])
        (tmp_path / "broken.csv").write_text("A,Y\n1,0\n")
        subs = {"TRAIN": str(good / "real.csv"), "BROKEN": str(tmp_path / "broken.csv")}
        cfg = {k: subs.get(v, v) if isinstance(v, str) else v for k, v in cfg.items()}
        cfg["out_dir"] = str(tmp_path / "o")
    capsys.readouterr()
    assert main(["train", "--config", write(tmp_path, cfg)]) == code
    err = json.loads(capsys.readouterr().err)
    assert "error" in err


def test_cli_report_rejects_non_summary(tmp_path):
    assert main(["report", "--in", write(tmp_path, {"x": 1})]) == 3
    assert main(["report", "--in", str(tmp_path / "missing.json")]) == 2
