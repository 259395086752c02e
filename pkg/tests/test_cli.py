import csv

import pytest

from vqcbench.cli import main


def write_config(path, **extra):
    lines = ["version: 1", "dataset: wine", "encodings: [RY]", "layers: [2]",
             "reuploading: [false]", "repetitions: 1", "train: {epochs: 1}"]
    lines += [f"{k}: {v}" for k, v in extra.items()]
    path.write_text("\n".join(lines) + "\n")
    return path


def test_sweep_and_report(tmp_path, capsys):
    cfg = write_config(tmp_path / "c.yaml")
    out = tmp_path / "out"
    assert main(["sweep", "--config", str(cfg), "--out", str(out), "--quiet"]) == 0
    assert (out / "raw.csv").exists() and (out / "manifest.json").exists()
    assert main(["sweep", "--config", str(cfg), "--out", str(out), "--resume", "--quiet"]) == 0
    assert main(["report", "--metric", "f1", "--in", str(out)]) == 0
    assert (out / "report_f1.csv").exists()
    assert "RY" in capsys.readouterr().out


def test_exit_codes(tmp_path):
    assert main(["sweep", "--config", str(tmp_path / "missing.yaml")]) == 1
    bad = tmp_path / "bad.yaml"
    bad.write_text("version: 1\ndataset: wine\nlayers: [3]\n")
    assert main(["sweep", "--config", str(bad)]) == 1
    missing_data = write_config(tmp_path / "d.yaml")
    missing_data.write_text(missing_data.read_text().replace("dataset: wine", "dataset: {path: nope.csv, label_column: y}"))
    assert main(["sweep", "--config", str(missing_data), "--out", str(tmp_path / "o")]) == 2
    assert main(["report", "--metric", "accuracy", "--in", str(tmp_path / "empty")]) == 2
    assert main(["report", "--metric", "nope", "--in", str(tmp_path)]) == 1
    with pytest.raises(SystemExit) as exc:
        main(["frobnicate"])
    assert exc.value.code == 1


def test_partial_failure_exit(tmp_path):
    cfg = write_config(tmp_path / "c.yaml", num_qubits=1)
    assert main(["sweep", "--config", str(cfg), "--out", str(tmp_path / "o"), "--quiet"]) == 3


def test_trajectory(tmp_path):
    out = tmp_path / "t.csv"
    assert main(["trajectory", "--strategy", "all", "--points", "4", "--out", str(out)]) == 0
    rows = list(csv.reader(out.open()))
    assert rows[0] == ["strategy", "angle", "x", "y", "z"] and len(rows) == 1 + 20 * 4
    assert main(["trajectory", "--strategy", "H-RX", "--points", "3", "--out", str(out)]) == 0
    assert main(["trajectory", "--strategy", "Amplitude", "--points", "3", "--out", str(out)]) == 1
    assert main(["trajectory", "--strategy", "RX", "--points", "1", "--out", str(out)]) == 1


def test_dedup(capsys):
    assert main(["dedup", "--universe", "full"]) == 0
    names = capsys.readouterr().out.split()
    assert len(names) == 20 and "RZ" not in names


def test_auto_select(tmp_path, capsys):
    data = tmp_path / "sep.csv"
    rows = ["a,b,label"] + [f"{i / 40},{(i * 7) % 40 / 40},{int(i >= 20)}" for i in range(40)]
    data.write_text("\n".join(rows) + "\n")
    code = main(["auto-select", "--dataset", str(data), "--threshold", "0", "--layers", "2",
                 "--repetitions", "1", "--epochs", "1", "--qubits", "2"])
    assert code == 0
    out = capsys.readouterr().out
    assert "stage 1" in out and "stage 2" not in out
    assert main(["auto-select", "--dataset", str(tmp_path / "nope.csv"), "--threshold", "0"]) == 2
