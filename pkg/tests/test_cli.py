import subprocess
import sys
from pathlib import Path

import pytest

from wristtype.cli import main


def _run_all(root: Path):
    data = root / "data"
    steps = [
        ["synth", "--users", "4", "--sessions", "1", "--duration", "60", "--seed", "5", "--out", str(data)],
        ["features", "--input", str(data / "manifest.csv"), "--sample-size", "500", "--out", str(root / "f.csv")],
        ["eer", "--features", str(root / "f.csv"), "--out", str(root / "eer")],
        ["sweep", "--manifest", str(data / "manifest.csv"), "--sizes", "500,1000", "--metrics",
         "cityblock,euclidean", "--out", str(root / "sweep")],
        ["identify", "--features", str(root / "f.csv"), "--k", "1,2", "--folds", "3", "--epochs", "50",
         "--out", str(root / "ident")],
        ["attack-stat", "--features", str(root / "f.csv"), "--victim", "u00", "--bins", "10", "--forged", "20",
         "--out", str(root / "stat")],
        ["attack-imitate", "--manifest", str(data / "manifest.csv"), "--sample-size", "500", "--victim", "u00",
         "--alpha", "0,1", "--attempts", "5", "--out", str(root / "imit")],
    ]
    for argv in steps:
        assert main(argv) == 0, argv
    return {str(p.relative_to(root)): p.read_bytes() for p in sorted(root.rglob("*")) if p.is_file()}


@pytest.fixture(scope="module")
def two_runs(tmp_path_factory):
    return _run_all(tmp_path_factory.mktemp("a")), _run_all(tmp_path_factory.mktemp("b"))


def test_outputs_written(two_runs):
    a, _ = two_runs
    for name in ("eer/eer_report.csv", "eer/far_frr.csv", "eer/far_frr.png", "sweep/sweep.csv", "sweep/sweep.png",
                 "ident/identify.csv", "ident/identify.png", "stat/attack_stat.csv", "imit/attack_imitate.csv",
                 "data/population.json"):
        assert name in a, name
    assert a["eer/eer_report.csv"].decode().splitlines()[-1].startswith("mean,")


def test_reruns_are_byte_identical(two_runs):
    a, b = two_runs
    assert a.keys() == b.keys()
    assert [k for k in a if a[k] != b[k]] == []


def test_ingest_reports_windows(tmp_path, capsys):
    main(["synth", "--users", "2", "--duration", "20", "--out", str(tmp_path)])
    assert main(["ingest", "--input", str(tmp_path / "u00_s0.csv"), "--user", "u00", "--sample-size", "500"]) == 0
    assert "4" in capsys.readouterr().out


def test_error_exit_codes(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("0,1,2\n")
    assert main(["ingest", "--input", str(bad), "--user", "u"]) == 2
    assert main(["ingest", "--input", str(tmp_path / "missing.csv"), "--user", "u"]) == 1
    assert main(["serve", "--listen", "nope", "--store", str(tmp_path / "s")]) == 1
    with pytest.raises(SystemExit):
        main(["eer"])


def test_module_entry_point():
    out = subprocess.run([sys.executable, "-m", "wristtype", "--help"], capture_output=True, text=True, check=True)
    assert "attack-imitate" in out.stdout
