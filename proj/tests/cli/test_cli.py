# Copyright 2026 The ANP Authors
# SPDX-License-Identifier: Apache-2.0
"""End-to-end checks of the anp command-line tool."""

import json
import math
import os
import subprocess
from pathlib import Path

import pytest

ANP = os.environ.get("ANP_BIN", "anp")

TINY = """\
dataset = gp
attention = multihead
heads = 2
width = 8
det_pair_layers = 2
latent_pair_layers = 2
latent_head_layers = 2
key_layers = 1
decoder_hidden_layers = 2
batch_size = 2
max_points = 20
iterations = 20
eval_interval = 10
eval_episodes = 4
learning_rate = 1e-3
"""


def run(*args, env=None, cwd=None):
    return subprocess.run([ANP, *map(str, args)], capture_output=True, text=True, env=env, cwd=cwd)


def masked(csv_text):
    """Metrics rows with the wall-clock column blanked."""
    out = []
    for line in csv_text.splitlines():
        cells = line.split(",")
        cells[1] = "*" if cells[0] != "iteration" else cells[1]
        out.append(",".join(cells))
    return out


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    cfg = root / "tiny.cfg"
    cfg.write_text(TINY)
    out = root / "run"
    res = run("train", "--config", cfg, "--seed", 1, "--out", out)
    assert res.returncode == 0, res.stderr
    return root, cfg, out


def test_train_writes_metrics_checkpoint_and_config(trained):
    _, _, out = trained
    assert (out / "final.ckpt").is_file()
    assert (out / "config.cfg").is_file()
    lines = (out / "metrics.csv").read_text().splitlines()
    assert lines[0] == "iteration,wall_clock_s,train_loss,ctx_recon_nll,tgt_nll,kl"
    assert [int(l.split(",")[0]) for l in lines[1:]] == [10, 20]
    for line in lines[1:]:
        assert all(math.isfinite(float(v)) for v in line.split(","))


def test_missing_config_exits_2(tmp_path):
    res = run("train", "--config", tmp_path / "absent.cfg", "--out", tmp_path / "o")
    assert res.returncode == 2
    assert "absent.cfg" in res.stderr


def test_unknown_key_is_named(tmp_path):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text(TINY + "widht = 3\n")
    res = run("train", "--config", cfg, "--out", tmp_path / "o")
    assert res.returncode == 2
    assert "widht" in res.stderr


def test_same_seed_repeats_metrics(trained):
    root, cfg, out = trained
    again = root / "again"
    assert run("train", "--config", cfg, "--seed", 1, "--out", again).returncode == 0
    assert masked((again / "metrics.csv").read_text()) == masked((out / "metrics.csv").read_text())
    assert (again / "final.ckpt").read_bytes() == (out / "final.ckpt").read_bytes()


def test_echoed_config_reproduces_run(trained):
    root, _, out = trained
    echo = root / "echo"
    assert run("train", "--config", out / "config.cfg", "--out", echo).returncode == 0
    assert masked((echo / "metrics.csv").read_text()) == masked((out / "metrics.csv").read_text())


def test_flags_override_file_values(trained, tmp_path):
    _, cfg, _ = trained
    res = run("train", "--config", cfg, "--iterations", 5, "--set", "eval_interval=5", "--out", tmp_path / "o")
    assert res.returncode == 0, res.stderr
    text = (tmp_path / "o" / "config.cfg").read_text()
    assert "iterations = 5" in text
    assert "eval_interval = 5" in text


def test_resume_continues_the_run(trained, tmp_path):
    _, cfg, out = trained
    first = tmp_path / "first"
    assert run("train", "--config", cfg, "--seed", 1, "--iterations", 10, "--out", first).returncode == 0
    res = run("train", "--config", cfg, "--seed", 1, "--resume", first / "final.ckpt", "--out", first)
    assert res.returncode == 0, res.stderr
    assert (first / "final.ckpt").read_bytes() == (out / "final.ckpt").read_bytes()
    assert masked((first / "metrics.csv").read_text()) == masked((out / "metrics.csv").read_text())


def test_non_finite_loss_exits_3(trained, tmp_path):
    _, cfg, _ = trained
    res = run("train", "--config", cfg, "--set", "learning_rate=1e300", "--out", tmp_path / "o")
    assert res.returncode == 3, res.stderr
    assert "iteration" in res.stderr


def write_context(path, points):
    path.write_text("x0,y0\n" + "".join(f"{x},{y}\n" for x, y in points))


def test_predict_grid_blocks(trained, tmp_path):
    _, _, out = trained
    ctx = tmp_path / "ctx.csv"
    write_context(ctx, [(-1.8 + 0.4 * i, math.sin(i)) for i in range(10)])
    dest = tmp_path / "pred.json"
    res = run("predict", "--ckpt", out / "final.ckpt", "--context", ctx, "--targets", "grid:400",
              "--z-samples", 3, "--seed", 4, "--out", dest)
    assert res.returncode == 0, res.stderr
    doc = json.loads(dest.read_text())
    assert doc["num_context"] == 10
    assert len(doc["x"]) == 400
    assert len(doc["predictions"]) == 3
    for block in doc["predictions"]:
        assert len(block["mean"]) == 400
        assert all(s[0] >= 0.1 for s in block["stddev"])
    again = run("predict", "--ckpt", out / "final.ckpt", "--context", ctx, "--targets", "grid:400",
                "--z-samples", 3, "--seed", 4)
    assert again.stdout == dest.read_text()


def test_predict_empty_context_uses_prior(trained, tmp_path):
    _, _, out = trained
    ctx = tmp_path / "empty.csv"
    ctx.write_text("x0,y0\n")
    res = run("predict", "--ckpt", out / "final.ckpt", "--context", ctx, "--targets", "grid:5", "--z-samples", 2)
    assert res.returncode == 0, res.stderr
    doc = json.loads(res.stdout)
    assert doc["num_context"] == 0
    assert len(doc["predictions"]) == 2


def test_predict_rejects_bad_inputs(trained, tmp_path):
    _, _, out = trained
    ctx = tmp_path / "ctx2d.csv"
    ctx.write_text("x0,x1,y0\n0,0,1\n")
    res = run("predict", "--ckpt", out / "final.ckpt", "--context", ctx, "--targets", "grid:5")
    assert res.returncode == 2
    bad = tmp_path / "bad.ckpt"
    bad.write_bytes(b"XXXX" + (out / "final.ckpt").read_bytes()[4:])
    write_context(tmp_path / "c.csv", [(0.0, 0.0)])
    res = run("predict", "--ckpt", bad, "--context", tmp_path / "c.csv", "--targets", "grid:5")
    assert res.returncode == 2
    assert "magic" in res.stderr


def test_eval_prints_two_finite_lines(trained):
    _, _, out = trained
    res = run("eval", "--ckpt", out / "final.ckpt", "--episodes", 64, "--seed", 2)
    assert res.returncode == 0, res.stderr
    lines = res.stdout.splitlines()
    assert [l.split()[0] for l in lines] == ["ctx_recon_nll", "tgt_nll"]
    for l in lines:
        _, mean, pm, se = l.split()
        assert pm == "+-"
        assert math.isfinite(float(mean)) and math.isfinite(float(se))


def check_bo_rows(rows):
    by_fn = {}
    for r in rows:
        by_fn.setdefault(int(r[0]), []).append([float(v) for v in r[2:]])
    for trace in by_fn.values():
        total = 0.0
        for i, (_, _, simple, cumulative) in enumerate(trace):
            assert simple >= 0
            if i:
                assert simple <= trace[i - 1][2]
            total += simple
            assert cumulative == pytest.approx(total, abs=0, rel=0) or cumulative == total


def test_bo_row_count_and_invariants(trained, tmp_path):
    _, _, out = trained
    dest = tmp_path / "bo.csv"
    res = run("bo", "--ckpt", out / "final.ckpt", "--functions", 2, "--iterations", 3, "--seed", 5, "--out", dest)
    assert res.returncode == 0, res.stderr
    lines = dest.read_text().splitlines()
    assert lines[0] == "function_id,iteration,x_query,y_query,simple_regret,cumulative_regret"
    rows = [l.split(",") for l in lines[1:]]
    assert len(rows) == 6
    assert [r[1] for r in rows] == ["1", "2", "3"] * 2
    check_bo_rows(rows)
    again = tmp_path / "bo2.csv"
    run("bo", "--ckpt", out / "final.ckpt", "--functions", 2, "--iterations", 3, "--seed", 5, "--out", again)
    assert again.read_bytes() == dest.read_bytes()


def test_bo_oracle_and_default_out_dir(tmp_path):
    env = dict(os.environ, ANP_OUT_DIR=str(tmp_path / "env_out"))
    res = run("bo", "--oracle", "--functions", 3, "--iterations", 4, env=env)
    assert res.returncode == 0, res.stderr
    rows = [l.split(",") for l in (tmp_path / "env_out" / "bo.csv").read_text().splitlines()[1:]]
    assert len(rows) == 12
    check_bo_rows(rows)


def test_gen_episodes_json(tmp_path):
    dest = tmp_path / "eps.json"
    assert run("gen-episodes", "--count", 3, "--seed", 1, "--kernel", "random", "--out", dest).returncode == 0
    doc = json.loads(dest.read_text())
    assert doc["format"] == "anp-episodes"
    assert len(doc["episodes"]) == 3
    for e in doc["episodes"]:
        assert 3 <= len(e["x_context"]) <= len(e["x_target"]) <= 100


def test_image_model_resolution_mapping(tmp_path):
    idx = tmp_path / "train.idx"
    assert run("gen-images", "--count", 30, "--seed", 3, "--height", 8, "--width", 8, "--out", idx).returncode == 0
    assert idx.stat().st_size == 16 + 30 * 64
    cfg = tmp_path / "img.cfg"
    cfg.write_text(TINY.replace("dataset = gp", "dataset = images") +
                   f"image_source = idx\nimage_train_path = {idx}\nmax_points = 40\niterations = 4\n")
    out = tmp_path / "img"
    res = run("train", "--config", cfg, "--out", out)
    assert res.returncode == 0, res.stderr
    ctx = tmp_path / "ctx.csv"
    rows = ["x0,x1,y0"]
    for r in range(8):
        for c in range(8):
            rows.append(f"{2 * r / 7 - 1},{2 * c / 7 - 1},{0.1 * ((r + c) % 3) - 0.1}")
    ctx.write_text("\n".join(rows) + "\n")
    res = run("predict", "--ckpt", out / "final.ckpt", "--context", ctx, "--targets", "grid:32x32")
    assert res.returncode == 0, res.stderr
    doc = json.loads(res.stdout)
    assert len(doc["x"]) == 1024
    assert doc["x"][0] == [-1, -1] and doc["x"][-1] == [1, 1]
    assert len(doc["predictions"][0]["mean"]) == 1024
    # Wrong magic is a configuration error.
    bad = tmp_path / "bad.idx"
    bad.write_bytes(b"\x00\x00\x08\x01" + idx.read_bytes()[4:])
    cfg.write_text(cfg.read_text().replace(str(idx), str(bad)))
    res = run("train", "--config", cfg, "--out", tmp_path / "img2")
    assert res.returncode == 2
    assert "0x00000801" in res.stderr
