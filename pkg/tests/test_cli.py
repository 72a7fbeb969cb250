import os

import pytest

from shotdown.cli import main
from shotdown.experiments import CATALOGUE, CLAIMS, run_experiment
from shotdown.config import ConfigError, parse_config
from shotdown.report import read_csv
from shotdown.sim import read_dump


def write(tmp_path, text, name="exp.cfg"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


SMALL = "experiment = stable-check\nseed = 11\nalpha = 1.5\ndomain = ball(1)\nn = 20000\n"


def test_run_writes_csv_and_figures(tmp_path, capsys):
    out = tmp_path / "out"
    code = main(["run", write(tmp_path, SMALL), "--out", str(out)])
    assert code == 0
    names = set(os.listdir(out))
    assert {"results.csv", "config.txt", "cf.csv", "cf.png", "density.csv", "density.png"} <= names
    head, rows = read_csv(out / "results.csv")
    assert head[:3] == ["claim", "quantity", "value"]
    assert all(r[0] in CLAIMS for r in rows)
    text = (out / "results.csv").read_text()
    assert text.startswith("# shotdown-lab results\n# experiment = stable-check\n")
    assert (out / "cf.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_csv_identical_across_threads_and_seed_override(tmp_path):
    cfg = write(tmp_path, SMALL)
    main(["run", cfg, "--out", str(tmp_path / "a"), "--threads", "1"])
    main(["run", cfg, "--out", str(tmp_path / "b"), "--threads", "3"])
    main(["run", cfg, "--out", str(tmp_path / "c"), "--seed", "12"])
    a = (tmp_path / "a" / "results.csv").read_bytes()
    assert a == (tmp_path / "b" / "results.csv").read_bytes()
    assert a != (tmp_path / "c" / "results.csv").read_bytes()


def test_failing_row_gives_exit_1(tmp_path):
    # a zero tolerance band cannot be met
    text = ("experiment = iw-identity\nseed = 1\nalpha = 1.0\ndomain = annulus(1,2)\n"
            "n = 50000\nband = 1.0\n")
    assert main(["run", write(tmp_path, text), "--out", str(tmp_path / "o"), "--no-figures"]) == 1


def test_config_errors_exit_2(tmp_path, capsys):
    assert main(["run", write(tmp_path, SMALL + "bogus = 1\n")]) == 2
    assert "unknown key" in capsys.readouterr().err
    assert main(["run", write(tmp_path, SMALL.replace("stable-check", "nope"))]) == 2
    err = capsys.readouterr().err
    assert "unknown experiment" in err and "harnack-failure" in err
    assert main(["run", write(tmp_path, SMALL.replace("n = 20000", "n = 10"))]) == 2
    assert "insufficient" in capsys.readouterr().err
    assert main(["run", str(tmp_path / "missing.cfg")]) == 2


def test_usage_error_exit_2():
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 2


def test_list(capsys):
    assert main(["list", "--claims"]) == 0
    out = capsys.readouterr().out
    for name in CATALOGUE:
        assert name in out
    assert len(CATALOGUE) == 15


def test_simulate_dump(tmp_path):
    dump = tmp_path / "paths.bin"
    code = main(["simulate", "--domain", "annulus(1,2)", "--alpha", "1", "--x", "1.5,0", "--n", "200",
                 "--h", "0.01", "--dump", str(dump)])
    assert code == 0
    with open(dump, "rb") as fh:
        meta, rec = read_dump(fh)
    assert len(rec) == 200 and meta["d"] == 2


def test_outputs_stay_in_out_dir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    out = tmp_path / "only"
    main(["run", write(tmp_path, SMALL), "--out", str(out)])
    assert sorted(os.listdir(tmp_path)) == ["exp.cfg", "only"]


def test_unknown_experiment_via_api():
    with pytest.raises(ConfigError, match="available"):
        run_experiment(parse_config(SMALL.replace("stable-check", "x")))
