import json
import subprocess
import sys

import pytest

from polarmac.cli import EXIT_CONFIG, EXIT_FILE, main
from polarmac.design import DesignResult


def test_design_command(tmp_path):
    out = tmp_path / "d.json"
    assert main(["design", "--users", "2", "--length", "512", "--info", "128", "--seed", "5", "--out", str(out)]) == 0
    d = DesignResult.load(out)
    assert d.info_positions.size == 128
    assert d.frozen_positions.size == 384
    assert d.frozen_values.shape == (2, 384)
    first = out.read_bytes()
    main(["design", "--users", "2", "--length", "512", "--info", "128", "--seed", "5", "--out", str(out)])
    assert out.read_bytes() == first


def test_design_full_rate(tmp_path):
    out = tmp_path / "d.json"
    assert main(["design", "--users", "3", "--length", "16", "--info", "16", "--out", str(out)]) == 0
    doc = json.loads(out.read_text())
    assert doc["frozen_values"] == [[], [], []]


def test_design_errors(tmp_path):
    assert main(["design", "--users", "2", "--length", "48", "--info", "8", "--out", str(tmp_path / "d")]) == EXIT_CONFIG
    missing = tmp_path / "nope" / "d.json"
    assert main(["design", "--users", "2", "--length", "16", "--info", "8", "--out", str(missing)]) == EXIT_FILE


def write_config(tmp_path, **extra):
    doc = {"users": 2, "length": 64, "info": 16, "ebn0_db": [1.0, 2.0], "max_frames": 20, "batch_size": 10, "list_size": 2}
    doc.update(extra)
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(doc))
    return path


def test_simulate_csv(tmp_path):
    out = tmp_path / "r.csv"
    assert main(["simulate", "--config", str(write_config(tmp_path)), "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert len(lines) == 3
    assert lines[0].startswith("ebn0_db,frames,decoder,list_size")


def test_simulate_with_design_file(tmp_path):
    main(["design", "--users", "2", "--length", "64", "--info", "16", "--out", str(tmp_path / "d.json")])
    cfg = write_config(tmp_path, design="d.json")
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "r.json"), "--format", "json"]) == 0
    assert json.loads((tmp_path / "r.json").read_text())["accounting"] == "genie-joint"


def test_simulate_errors(tmp_path):
    out = str(tmp_path / "r.csv")
    assert main(["simulate", "--config", str(tmp_path / "missing.json"), "--out", out]) == EXIT_CONFIG
    assert main(["simulate", "--config", str(write_config(tmp_path, decoder="bp")), "--out", out]) == EXIT_CONFIG
    assert main(["simulate", "--config", str(write_config(tmp_path, design="gone.json")), "--out", out]) == EXIT_FILE
    (tmp_path / "bad.json").write_text("{}")
    assert main(["simulate", "--config", str(write_config(tmp_path, design="bad.json")), "--out", out]) == EXIT_FILE
    cfg = write_config(tmp_path)
    assert main(["simulate", "--config", str(cfg), "--out", str(tmp_path / "x" / "r.csv")]) == EXIT_FILE


def test_module_entry_point(tmp_path):
    out = tmp_path / "d.json"
    proc = subprocess.run(
        [sys.executable, "-m", "polarmac.cli", "design", "--users", "2", "--length", "8", "--info", "4", "--out", str(out)],
        capture_output=True,
    )
    assert proc.returncode == 0
    assert out.exists()


def test_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["simulate"])
    assert exc.value.code == 2
