import subprocess
import sys

import pytest

from stftvae import cli, data, vae
from stftvae import experiments as E


def run_cli(*args):
    return cli.main([str(a) for a in args])


def test_help_lists_subcommands(capsys):
    with pytest.raises(SystemExit) as exc:
        run_cli("--help")
    assert exc.value.code == 0
    out = capsys.readouterr().out
    for name in ("train", "eval", "compare", "generate", "blur-demo"):
        assert name in out


def test_flags_override_config_file(tmp_path):
    cfg = tmp_path / "run.txt"
    cfg.write_text("preset = L1\nepochs = 7\nseed = 2\n")
    args = cli.build_parser().parse_args(["train", "--config", str(cfg), "--seed", "5", "--out-dir", "x"])
    run = cli.run_config(args)
    assert (run.preset, run.epochs, run.seed, run.out_dir) == ("L1", 7, 5, "x")


def test_train_eval_generate(tmp_path, capsys):
    common = ["--out-dir", tmp_path, "--epochs", 1, "--subset", 50, "--eval-subset", 20, "--data-source", "sample", "--preset", "L2"]
    assert run_cli("train", *common) == 0
    ckpt = tmp_path / "l2" / "seed0" / "checkpoint.npz"
    assert ckpt.exists()
    assert run_cli("eval", *common) == 0
    metrics = (tmp_path / "l2" / "seed0" / "metrics.csv").read_text().splitlines()
    assert metrics[0] == "loss_name,psnr,ssim,epochs,seed" and metrics[1].startswith("L2,")
    assert run_cli("generate", *common, "-n", 4, "--output", tmp_path / "g.png") == 0
    assert data.read_png(tmp_path / "g.png").shape == (28, 4 * 28 + 6)
    assert run_cli("compare", *common, "--presets", "L2") == 0
    assert "L2" in capsys.readouterr().out


def test_missing_run_exit_code(tmp_path, capsys):
    code = run_cli("compare", "--out-dir", tmp_path, "--data-source", "sample", "--presets", "L1", "SSIM")
    err = capsys.readouterr().err
    assert code == 7
    assert err.startswith("error[missing-run]") and "L1 (seed 0)" in err


def test_checkpoint_error_exit_code(tmp_path, capsys):
    bad = tmp_path / "bad.npz"
    bad.write_bytes(b"junk")
    assert run_cli("generate", "--checkpoint", bad, "--out-dir", tmp_path) == 5
    assert "error[checkpoint]" in capsys.readouterr().err


def test_config_error_exit_code(tmp_path, capsys):
    cfg = tmp_path / "bad.txt"
    cfg.write_text("nonsense = 1\n")
    assert run_cli("train", "--config", cfg) == 3
    assert "error[config]" in capsys.readouterr().err


def test_missing_data_exit_code(tmp_path, capsys):
    code = run_cli("train", "--data-source", "idx", "--data-dir", tmp_path, "--out-dir", tmp_path)
    assert code == 4
    assert "error[io]" in capsys.readouterr().err


def test_blur_demo(tmp_path, gray_corpus, capsys):
    src = tmp_path / "digit.png"
    data.write_png(data.to_uint8(gray_corpus[0]), src)
    assert run_cli("blur-demo", src, "--out-dir", tmp_path / "demo", "--sigma", 1.5) == 0
    assert (tmp_path / "demo" / "phase_corrupted.png").exists()
    assert "phase_preserved" in capsys.readouterr().out
    assert run_cli("blur-demo", src, "--out-dir", tmp_path / "demo", "--sigma", -1) == 2
    assert "error[domain]" in capsys.readouterr().err


def test_module_entry_point(tmp_path):
    ckpt = tmp_path / "c.npz"
    vae.save_checkpoint(ckpt, vae.init_params(0), E.RunConfig().to_dict())
    proc = subprocess.run(
        [sys.executable, "-m", "stftvae", "generate", "--checkpoint", str(ckpt), "-n", "2", "--output", str(tmp_path / "s.png")],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "s.png").exists()
