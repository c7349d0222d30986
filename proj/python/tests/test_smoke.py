# Copyright 2026 The SEMX Authors. All rights reserved.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import numpy as np
import pytest

import semx


@pytest.fixture(scope="module")
def tiny():
    return semx.synth_shapes(120, 16, 3, 0.05, 1)


def test_synth_shapes_arrays(tiny):
    assert tiny.images.shape == (120, 1, 16, 16)
    assert tiny.images.dtype == np.float32
    assert np.allclose(tiny.labels.sum(axis=1), 1.0)
    assert len(tiny) == 120
    assert sorted(set(tiny.classes)) == [0, 1, 2]


def test_dataset_from_arrays_round_trips():
    x = np.random.default_rng(0).random((4, 1, 8, 8), dtype=np.float32)
    d = semx.Dataset(x, [0, 1, 1, 0], 2)
    assert np.array_equal(d.images, x)
    assert d.classes == [0, 1, 1, 0]
    with pytest.raises(semx.ValidationError):
        semx.Dataset(x * 3, [0, 1, 1, 0], 2)


def test_infer_shapes(tiny):
    m = semx.small_cnn(1, 16, 3, seed=0)
    rep, logits = semx.infer(m, tiny.images[:10])
    assert rep.shape == (10, m.representation_dim)
    assert logits.shape == (10, 3)


def test_train_records_and_sem_term(tiny):
    m = semx.small_mlp([1, 16, 16], [16], 3, seed=2)
    cfg = semx.TrainConfig()
    cfg.epochs = 2
    cfg.batch_size = 32
    cfg.mix_kind = "linear"
    cfg.gamma = 0.5
    cfg.es_fraction = 0.0
    rows = semx.train(m, tiny, cfg)
    assert [r["epoch"] for r in rows] == [1, 2]
    assert all(r["loss_sem"] > 0 for r in rows)
    for r in rows:
        assert r["loss_total"] == pytest.approx(r["loss_label"] + 0.5 * r["loss_sem"], rel=1e-6)


def test_train_is_deterministic(tiny):
    cfg = semx.TrainConfig()
    cfg.epochs = 1
    cfg.mix_kind = "linear"
    a = semx.small_mlp([1, 16, 16], [8], 3, seed=3)
    b = a.copy()
    semx.train(a, tiny, cfg)
    semx.train(b, tiny, cfg)
    for name in a.parameter_names:
        assert np.array_equal(a.parameter(name), b.parameter(name))


def test_bad_config_raises(tiny):
    cfg = semx.TrainConfig()
    cfg.lr = -1.0
    with pytest.raises(semx.ConfigError):
        semx.train(semx.small_mlp([1, 16, 16], [8], 3), tiny, cfg)
    with pytest.raises(semx.ConfigError):
        cfg.mix_kind = "bogus"


def test_linear_mix_and_cutmix():
    rng = np.random.default_rng(1)
    xi, xj = rng.random((2, 1, 8, 8), dtype=np.float32), rng.random((2, 1, 8, 8), dtype=np.float32)
    yi, yj = np.eye(3, dtype=np.float32)[[0, 1]], np.eye(3, dtype=np.float32)[[2, 2]]
    x, y = semx.mix_linear(xi, xj, yi, yj, 1.0)
    assert np.array_equal(x, xi) and np.array_equal(y, yi)
    x, y, lam, mask = semx.mix_cutmix(xi, xj, yi, yj, 0.4, seed=5)
    assert mask.mean() == lam
    assert np.allclose(y.sum(axis=1), 1.0)


def test_sample_lambda_moments():
    draws = np.array(semx.sample_lambda(2.0, 50000, seed=4))
    assert abs(draws.mean() - 0.5) < 0.01
    assert draws.var() == pytest.approx(1 / 20, rel=0.05)


def test_auroc_matches_pairwise():
    rng = np.random.default_rng(2)
    a, b = rng.integers(0, 4, 30) / 4.0, rng.integers(0, 3, 25) / 4.0
    wins = (a[:, None] > b[None, :]).sum() + 0.5 * (a[:, None] == b[None, :]).sum()
    assert semx.auroc(a.tolist(), b.tolist()) == pytest.approx(wins / (30 * 25), abs=1e-12)


def test_gap_vanishes_for_affine_extractor(tiny):
    m = semx.small_mlp([1, 16, 16], [12], 3, seed=5, affine=True)
    curve = semx.equivariance_gap(m, tiny.images[:20], tiny.images[20:40], semx.lambda_grid(0.25))
    assert len(curve["gap_mean"]) == 5
    assert max(curve["gap_mean"]) < 1e-5


def test_corruption_suite(tiny):
    m = semx.small_cnn(1, 16, 3, seed=0)
    r = semx.corruption_suite_eval(m, tiny, seed=3)
    cells = [v for k, v in r.items() if k != "mean"]
    assert len(cells) == 4 and all(len(c) == 5 for c in cells)
    assert r["mean"] == pytest.approx(np.mean(cells), abs=1e-9)


def test_gradcheck_passes():
    r = semx.gradcheck(0)
    assert r["passed"] and r["max_relative_error"] <= 1e-3


def test_checkpoint_round_trip(tmp_path):
    m = semx.small_cnn(1, 16, 3, seed=7)
    path = str(tmp_path / "m.semx")
    semx.save_checkpoint(m, path)
    back = semx.small_cnn(1, 16, 3, seed=8)
    semx.restore_checkpoint(back, path)
    for name in m.parameter_names:
        assert np.array_equal(m.parameter(name), back.parameter(name))
    (tmp_path / "bad.semx").write_bytes(b"nope")
    with pytest.raises(semx.FormatError):
        semx.restore_checkpoint(back, str(tmp_path / "bad.semx"))


def test_cli_train_then_eval(tmp_path):
    out = str(tmp_path / "run")
    code, _, err = semx.run_cli(["train", "--dataset", "synth_shapes:n=90,seed=3", "--model",
                                 "small_mlp:8", "--epochs", "1", "--out_dir", out])
    assert code == 0, err
    model = semx.load_run(out + "/model.semx")
    assert model.parameter_count > 0
    code, text, _ = semx.run_cli(["eval", out + "/model.semx"])
    assert code == 0 and "accuracy" in text
    assert semx.run_cli(["train", "--bogus"])[0] == 2
