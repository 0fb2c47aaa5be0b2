# Copyright 2026 The UPAT Authors
# SPDX-License-Identifier: Apache-2.0

import json
import os
import subprocess

import numpy as np
import pytest

CLI = os.environ.get("UPAT_CLI")
pytestmark = pytest.mark.skipif(not CLI, reason="UPAT_CLI is not set")

SMALL = [
    "dataset.num_samples=64",
    "dataset.image_size=8",
    "dataset.num_classes=4",
    "model.patch_size=4",
    "model.embed_dim=8",
    "model.depth=1",
    "model.num_heads=2",
    "train.epochs=1",
    "train.batch_size=16",
    "train.universal.scales=[4, 2, 1]",
    "train.attack.scales=[4, 2, 1]",
    "train.schedule.e_start=0",
]


def run(*args):
    return subprocess.run([CLI, *map(str, args)], capture_output=True, text=True, timeout=300)


def sets(extra=()):
    out = []
    for s in [*SMALL, *extra]:
        out += ["--set", s]
    return out


def test_unknown_subcommand_is_a_config_error():
    assert run("nonsense").returncode == 2


def test_unknown_key_is_a_config_error(tmp_path):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text("train:\n  lamda: 1\n")
    r = run("train", "-c", cfg, "--out", tmp_path)
    assert r.returncode == 2
    assert "lamda" in r.stderr


def test_missing_config_file_is_a_config_error(tmp_path):
    assert run("train", "-c", tmp_path / "missing.yaml").returncode == 2


def test_missing_dataset_is_a_config_error(tmp_path):
    extra = ["dataset.name=cifar10", f"dataset.root={tmp_path / 'none'}", "dataset.image_size=32",
             "dataset.num_classes=10"]
    assert run("ingest", *sets(extra)).returncode == 2


def test_missing_checkpoint_is_a_config_error(tmp_path):
    assert run("analyze", tmp_path / "missing.upat", "--mode", "viz").returncode == 2


def test_divergence_is_a_numeric_error(tmp_path):
    r = run("train", *sets(["train.optimizer.lr=1e250"]), "--out", tmp_path)
    assert r.returncode == 3
    assert "non-finite" in r.stderr


def test_train_and_viz_produce_readable_outputs(tmp_path):
    Image = pytest.importorskip("PIL.Image")
    r = run("train", *sets(), "--method", "upat", "--out", tmp_path)
    assert r.returncode == 0, r.stderr
    (run_dir,) = [p for p in tmp_path.iterdir() if p.is_dir()]
    metrics = [json.loads(l) for l in (run_dir / "metrics.jsonl").read_text().splitlines()]
    assert [m["epoch"] for m in metrics] == [0]
    assert all("schema_version" in m for m in metrics)

    r = run("analyze", run_dir / "checkpoint.upat", "--mode", "viz")
    assert r.returncode == 0, r.stderr
    with Image.open(run_dir / "analysis" / "composite.ppm") as img:
        pixels = np.asarray(img)
    assert pixels.shape == (8, 8, 3)
