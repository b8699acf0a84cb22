import subprocess
import sys

import numpy as np
import pytest

from consgrunet import cli
from consgrunet import data as D
from consgrunet import model as M

CONFIG_TEXT = """\
# compact architecture for fast tests
input_channels=3
window_len=16
conv_blocks=8:3:1:1
gru_hidden=12
dense_hidden=16
num_classes=4
seed=9
window_stride=16
epochs=3
batch_size=16
lr=0.003
"""


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    data_dir = root / "data"
    assert cli.main([
        "make-synth", "--out", str(data_dir), "--classes", "4", "--channels", "3",
        "--window", "16", "--per-class", "12", "--noise", "0.05", "--seed", "1",
    ]) == 0
    config = root / "config.txt"
    config.write_text(CONFIG_TEXT)
    model_path = root / "model.csgn"
    log_path = root / "train_log.csv"
    assert cli.main([
        "train", "--data", str(data_dir), "--config", str(config),
        "--out", str(model_path), "--log", str(log_path),
    ]) == 0
    return {"root": root, "data": data_dir, "config": config,
            "model": model_path, "log": log_path}


def test_make_synth_files_valid(workspace):
    paths = sorted(workspace["data"].glob("*.esf"))
    assert len(paths) == 4
    for p in paths:
        D.load_session(p)


def test_train_outputs(workspace):
    assert workspace["model"].exists()
    lines = workspace["log"].read_text().splitlines()
    assert lines[0] == "epoch,train_loss,train_acc,val_loss,val_acc,seconds"
    assert len(lines) == 4


def test_train_deterministic_model_bytes(workspace, tmp_path):
    out_a = tmp_path / "a.csgn"
    out_b = tmp_path / "b.csgn"
    for out in (out_a, out_b):
        assert cli.main([
            "train", "--data", str(workspace["data"]),
            "--config", str(workspace["config"]), "--out", str(out),
        ]) == 0
    assert out_a.read_bytes() == out_b.read_bytes()


def test_eval_summary_and_idempotent_csvs(workspace, tmp_path, capsys):
    report_a, confusion_a = tmp_path / "ra.csv", tmp_path / "ca.csv"
    report_b, confusion_b = tmp_path / "rb.csv", tmp_path / "cb.csv"
    for report, confusion in ((report_a, confusion_a), (report_b, confusion_b)):
        assert cli.main([
            "eval", "--model", str(workspace["model"]),
            "--data", str(workspace["data"]),
            "--report", str(report), "--confusion", str(confusion),
        ]) == 0
    out = capsys.readouterr().out
    assert "accuracy=" in out and "kappa=" in out
    assert "macro_mcc=" in out and "ci=[" in out
    assert report_a.read_bytes() == report_b.read_bytes()
    assert confusion_a.read_bytes() == confusion_b.read_bytes()
    header = report_a.read_text().splitlines()[0]
    assert header == "class,precision,recall,f1,kappa,mcc"


def test_predict_csv(workspace, tmp_path, capsys):
    session = sorted(workspace["data"].glob("*.esf"))[0]
    out = tmp_path / "pred.csv"
    assert cli.main([
        "predict", "--model", str(workspace["model"]),
        "--session", str(session), "--out", str(out),
    ]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "offset,predicted_class,confidence"
    offset, cls, conf = lines[1].split(",")
    assert offset == "0"
    assert 0 <= int(cls) < 4
    assert len(conf.split(".")[1]) == 4  # four decimal places
    assert 0.0 <= float(conf) <= 1.0


def test_bench_summary_line(workspace, capsys):
    assert cli.main([
        "bench", "--model", str(workspace["model"]),
        "--iters", "10", "--warmup", "2",
    ]) == 0
    out = capsys.readouterr().out
    assert out.startswith("latency_ms mean=")
    assert "iters=10" in out and "warmup=2" in out and "preprocessing=no" in out


def test_info_matches_count_and_disk_size(workspace, capsys):
    assert cli.main(["info", "--model", str(workspace["model"])]) == 0
    out = capsys.readouterr().out
    fields = dict(
        line.split("=", 1) for line in out.splitlines() if "=" in line
    )
    state = M.load_model(workspace["model"])
    total, breakdown = M.count_params(state)
    assert int(fields["parameters"]) == total
    assert int(fields["file_size_bytes"]) == workspace["model"].stat().st_size
    assert int(fields["file_size_bytes"]) == M.model_file_size(state)
    for name, count in breakdown.items():
        assert int(fields[f"parameters.{name}"]) == count


def test_usage_errors_exit_1(capsys):
    assert cli.main(["no-such-command"]) == 1
    assert cli.main(["train"]) == 1  # missing required flags
    assert cli.main(["bench"]) == 1
    capsys.readouterr()


def test_bad_config_key_exits_1(workspace, tmp_path, capsys):
    config = tmp_path / "bad.txt"
    config.write_text("no_such_key=1\n")
    code = cli.main([
        "train", "--data", str(workspace["data"]), "--config", str(config),
        "--out", str(tmp_path / "m.csgn"),
    ])
    assert code == 1
    capsys.readouterr()


def test_missing_data_dir_exits_2(workspace, tmp_path, capsys):
    code = cli.main([
        "eval", "--model", str(workspace["model"]), "--data", str(tmp_path / "nope"),
        "--report", str(tmp_path / "r.csv"), "--confusion", str(tmp_path / "c.csv"),
    ])
    assert code == 2
    capsys.readouterr()


def test_corrupt_session_exits_2(workspace, tmp_path, capsys):
    corrupt_dir = tmp_path / "corrupt"
    corrupt_dir.mkdir()
    src = sorted(workspace["data"].glob("*.esf"))[0]
    blob = bytearray(src.read_bytes())
    blob[30] ^= 0xFF
    (corrupt_dir / "bad.esf").write_bytes(bytes(blob))
    code = cli.main([
        "eval", "--model", str(workspace["model"]), "--data", str(corrupt_dir),
        "--report", str(tmp_path / "r.csv"), "--confusion", str(tmp_path / "c.csv"),
    ])
    assert code == 2
    capsys.readouterr()


def test_corrupt_model_exits_3(workspace, tmp_path, capsys):
    blob = bytearray(workspace["model"].read_bytes())
    blob[len(blob) // 2] ^= 0xFF
    bad = tmp_path / "bad.csgn"
    bad.write_bytes(bytes(blob))
    code = cli.main(["info", "--model", str(bad)])
    assert code == 3
    capsys.readouterr()


def test_divergence_exits_4(workspace, tmp_path, capsys):
    config = tmp_path / "diverge.txt"
    config.write_text(CONFIG_TEXT.replace("lr=0.003", "lr=1e18"))
    with np.errstate(all="ignore"):
        code = cli.main([
            "train", "--data", str(workspace["data"]), "--config", str(config),
            "--out", str(tmp_path / "d.csgn"),
        ])
    assert code == 4
    capsys.readouterr()


def test_help_exits_0():
    for args in (["--help"], ["train", "--help"], ["eval", "--help"]):
        proc = subprocess.run(
            [sys.executable, "-m", "consgrunet.cli", *args],
            capture_output=True, text=True,
        )
        assert proc.returncode == 0
        assert "usage" in proc.stdout.lower()


def test_module_entry_point_runs():
    proc = subprocess.run(
        [sys.executable, "-m", "consgrunet", "--help"],
        capture_output=True, text=True,
    )
    assert proc.returncode == 0
