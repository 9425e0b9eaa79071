"""Command line driver: exit codes, config validation, deterministic output."""

import json
import os
import shutil
import subprocess
import sys

import pytest

from tftlab.cli import EXIT_CONFIG, EXIT_INCONCLUSIVE, EXIT_PASS, Config, ConfigError, main

CONFIG_DIR = os.path.join(os.path.dirname(__file__), "..", "configs")


def run_cli(args):
    return subprocess.run(
        [sys.executable, "-c", "import sys; from tftlab.cli import main; sys.exit(main())"]
        + list(args),
        capture_output=True,
        text=True,
    )


def read_all_outputs(d):
    out = {}
    for name in sorted(os.listdir(d)):
        with open(os.path.join(d, name), "rb") as fh:
            out[name] = fh.read()
    return out


def test_config_parsing():
    cfg = Config.parse("a = 1\n# comment\nb = x y\n\nc=2.5\n")
    assert cfg.get_int("a") == 1
    assert cfg.get("b") == "x y"
    assert cfg.get_float("c") == 2.5
    cfg.check_consumed()
    with pytest.raises(ConfigError):
        Config.parse("a = 1\na = 2\n")  # duplicate key
    with pytest.raises(ConfigError):
        Config.parse("a\n")  # no equals sign
    with pytest.raises(ConfigError):
        Config.parse(" = 3\n")  # empty key


def test_config_tracks_unconsumed_keys():
    cfg = Config.parse("a = 1\nstray = 2\n")
    assert cfg.get_int("a") == 1
    with pytest.raises(ConfigError, match="stray"):
        cfg.check_consumed()


def test_config_matrix_parsing():
    cfg = Config.parse("m = 0.5 0.5; 0.25 0.75\n")
    m = cfg.get_matrix("m")
    assert m.shape == (2, 2)
    bad = Config.parse("m = 0.5 0.5; 0.25\n")
    with pytest.raises(ConfigError):
        bad.get_matrix("m")


def test_missing_config_file_is_config_error():
    assert main(["--config", "/nonexistent/x.conf"]) == EXIT_CONFIG


def test_unknown_experiment_is_config_error(tmp_path):
    p = tmp_path / "c.conf"
    p.write_text("experiment = frobnicate\n")
    assert main(["--config", str(p), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_stray_key_is_config_error(tmp_path):
    src = os.path.join(CONFIG_DIR, "enumerate.conf")
    p = tmp_path / "c.conf"
    p.write_text(open(src).read() + "bogus_key = 1\n")
    assert main(["--config", str(p), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_missing_required_key_is_config_error(tmp_path):
    p = tmp_path / "c.conf"
    p.write_text("experiment = enumerate\nseed = 0\n")  # no chain data
    assert main(["--config", str(p), "--out", str(tmp_path)]) == EXIT_CONFIG


def test_bad_workers_is_config_error(tmp_path):
    src = os.path.join(CONFIG_DIR, "enumerate.conf")
    assert main(["--config", src, "--out", str(tmp_path), "--workers", "0"]) == EXIT_CONFIG


def test_enumerate_config_runs_and_writes_outputs(tmp_path):
    src = os.path.join(CONFIG_DIR, "enumerate.conf")
    code = main(["--config", src, "--out", str(tmp_path)])
    assert code == EXIT_PASS
    with open(tmp_path / "summary.json") as fh:
        summary = json.load(fh)
    assert summary["experiment"] == "enumerate"
    assert summary["status"] == "pass"
    names = set(os.listdir(tmp_path))
    assert {"summary.json", "support.csv", "mgf_exact.csv"} <= names


def test_reversible_config_passes(tmp_path):
    src = os.path.join(CONFIG_DIR, "reversible.conf")
    assert main(["--config", src, "--out", str(tmp_path)]) == EXIT_PASS
    with open(tmp_path / "mgf.csv") as fh:
        header = fh.readline().strip().split(",")
    assert header == ["lambda", "lhs", "lhs_se", "rhs", "rhs_se", "pass"]


def test_outputs_are_byte_identical_across_reruns_and_workers(tmp_path):
    src = os.path.join(CONFIG_DIR, "reversible.conf")
    a, b, c = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert main(["--config", src, "--out", str(a)]) == EXIT_PASS
    assert main(["--config", src, "--out", str(b)]) == EXIT_PASS
    assert main(["--config", src, "--out", str(c), "--workers", "4"]) == EXIT_PASS
    ref = read_all_outputs(a)
    assert read_all_outputs(b) == ref
    assert read_all_outputs(c) == ref


def test_seed_override_changes_outputs(tmp_path):
    src = os.path.join(CONFIG_DIR, "driven3.conf")
    a, b = tmp_path / "a", tmp_path / "b"
    text = open(src).read().replace("n_paths = 20000", "n_paths = 2000")
    small = tmp_path / "small.conf"
    small.write_text(text)
    main(["--config", str(small), "--out", str(a)])
    main(["--config", str(small), "--out", str(b), "--seed", "99"])
    sa = json.load(open(a / "summary.json"))
    sb = json.load(open(b / "summary.json"))
    assert sa["seed"] == 11 and sb["seed"] == 99
    assert sa["integral_ft"]["estimate"] != sb["integral_ft"]["estimate"]


def test_bd_strong_config_structure(tmp_path):
    src = os.path.join(CONFIG_DIR, "bd_strong.conf")
    text = open(src).read().replace("n_paths = 400000", "n_paths = 50000")
    p = tmp_path / "c.conf"
    p.write_text(text)
    code = main(["--config", str(p), "--out", str(tmp_path), "--format", "both"])
    assert code == EXIT_PASS
    summary = json.load(open(tmp_path / "summary.json"))
    by_lam = {row["lambda"]: row for row in summary["scan"]}
    assert by_lam[0.25]["diverged"] is True
    assert by_lam[-0.5]["converged"] is True
    assert summary["strip"]["all_agree"] is True
    assert summary["eta"] == pytest.approx(0.2097112208975533, rel=1e-12)
    names = set(os.listdir(tmp_path))
    assert {"divergence.csv", "strip.csv"} <= names


def test_cli_subprocess_smoke(tmp_path):
    # the installed entry point prints one status line and respects --format
    src = os.path.join(CONFIG_DIR, "enumerate.conf")
    r = run_cli(["--config", src, "--out", str(tmp_path), "--format", "json"])
    assert r.returncode == EXIT_PASS
    assert r.stdout.strip() == "enumerate: pass"
    assert os.path.exists(tmp_path / "summary.json")
    assert not os.path.exists(tmp_path / "support.csv")


def test_json_has_no_nan_tokens(tmp_path):
    src = os.path.join(CONFIG_DIR, "bd_constant.conf")
    code = main(["--config", src, "--out", str(tmp_path), "--format", "json"])
    assert code == EXIT_PASS
    raw = open(tmp_path / "summary.json").read()
    assert "NaN" not in raw and "Infinity" not in raw
    json.loads(raw)  # strict: parses without allowing special tokens
