import hashlib
import math
import os
import subprocess

import pytest

import particle_deep as pd


def test_sha256_matches_hashlib(tmp_path):
    for data in [b"", b"abc", bytes(range(256)) * 17]:
        assert pd.sha256_hex(data) == hashlib.sha256(data).hexdigest()
    f = tmp_path / "blob.bin"
    f.write_bytes(b"flow" * 1000)
    info = pd.digest_file(str(f))
    assert info["sha256"] == hashlib.sha256(b"flow" * 1000).hexdigest()
    assert info["bytes"] == 4000


def test_csv_load_and_split(tmp_path):
    f = tmp_path / "flows.csv"
    rows = ["a,b,label"] + [f"{i},{2 * i},{'attack' if i % 3 else 'normal'}" for i in range(30)]
    f.write_text("\n".join(rows) + "\n")
    data, mapping = pd.load_csv(str(f), "label", "attack")
    assert len(data) == 30
    assert data.feature_names == ["a", "b"]
    assert mapping == {"normal": "normal", "attack": "attack"}
    assert sum(data.labels) == 20

    norm = pd.min_max_normalize(data)
    flat = [v for r in norm.rows for v in r]
    assert min(flat) == 0.0 and max(flat) == 1.0
    train, test = pd.split(norm, 0.8, 7, True)
    assert len(train) + len(test) == 30
    assert sorted(train.rows + test.rows) == sorted(norm.rows)


def test_bad_csv_raises_value_error(tmp_path):
    f = tmp_path / "bad.csv"
    f.write_text("a,label\n1,x\nnot_a_number,y\n")
    with pytest.raises(ValueError):
        pd.load_csv(str(f), "label", None)


def test_metrics_and_auc():
    m = pd.compute_metrics(90, 95, 5, 10, 0.5)
    assert m["accuracy"] == pytest.approx(185 / 200)
    assert m["precision"] == pytest.approx(90 / 95)
    assert m["recall"] == pytest.approx(0.9)
    assert m["fpr"] == pytest.approx(0.05)
    assert pd.roc_auc([0.1, 0.4, 0.35, 0.8], [0, 0, 1, 1]) == pytest.approx(0.75)
    c = pd.confusion([0.2, 0.7, 0.5], [0, 1, 0], 0.5)
    assert c == {"tp": 1, "tn": 1, "fp": 1, "fn": 0}


def test_loss_and_forward():
    assert pd.weighted_logistic_loss([1, 0], [0.5, 0.5], 1.0, 1.0) == pytest.approx(math.log(2))
    cfg = pd.MlpConfig.deep_default(5)
    model = pd.init_model(cfg)
    p = pd.forward(model, [0.2] * 5)
    assert 0.0 < p < 1.0
    back = pd.MlpModel.from_text(model.to_text())
    assert pd.forward(back, [0.2] * 5) == p
    assert pd.glorot_bound(13, 20) == pytest.approx(math.sqrt(6 / 33))


def test_training_lowers_loss():
    data = pd.generate_synthetic(400, 0.5, 3, 6.0, 3)
    data = pd.min_max_normalize(data)
    cfg = pd.MlpConfig()
    cfg.layer_sizes = [3, 8, 1]
    cfg.class_weight_normal = 1.0
    model, initial, losses = pd.train(pd.init_model(cfg), data, pd.Hyperparameters(16, 10, 0.05), 1)
    assert len(losses) == 10
    assert losses[-1] < initial
    scores = pd.predict_batch(model, data)
    assert pd.roc_auc(scores, data.labels) > 0.9


def test_pso_maximizes_quadratic():
    assert pd.constriction_factor(2.05, 2.05, pd.ConstrictionForm.standard) == pytest.approx(0.729844, abs=1e-6)
    assert pd.inertia_at(0, 10, 0.9, 0.4) == pytest.approx(0.9)
    cfg = pd.PsoConfig()
    cfg.n_particles = 6
    cfg.n_iterations = 50
    cfg.lo = -10.0
    cfg.hi = 10.0
    cfg.v_max = 4.0
    cfg.rng_seed = 5
    best_x, best_v, trace = pd.maximize(lambda x: -(x - 3.0) ** 2, cfg)
    assert best_x == pytest.approx(3.0, abs=1e-2)
    assert best_v <= 0.0
    assert len(trace) == 6 * 51


def test_tune_reports_stages():
    data = pd.min_max_normalize(pd.generate_synthetic(300, 0.5, 3, 4.0, 9))
    train, val = pd.split(data, 0.75, 1, True)
    cfg = pd.MlpConfig()
    cfg.layer_sizes = [3, 6, 1]
    cfg.class_weight_normal = 1.0
    pso = pd.PsoConfig()
    pso.n_particles = 2
    pso.n_iterations = 1
    out = pd.tune(train, val, cfg, pso, 42)
    assert [s[0] for s in out["stages"]] == ["batch_size", "epochs", "learning_rate"]
    assert out["objective_calls"] == 3 * 2 * 2
    assert out["tuned_auc"] >= out["initial_auc"]


def test_compression_is_single_feature():
    data = pd.min_max_normalize(pd.generate_synthetic(200, 0.5, 4, 2.0, 2))
    model = pd.fit_compression(data)
    assert len(model.weights) == 4
    c = pd.compress(model, data)
    assert c.feature_count == 1
    assert all(0.0 <= r[0] <= 1.0 for r in c.rows)


@pytest.mark.skipif(not os.environ.get("PDEEP_CLI"), reason="PDEEP_CLI not set")
def test_cli_digest(tmp_path):
    f = tmp_path / "x.txt"
    f.write_bytes(b"abc")
    out = subprocess.run([os.environ["PDEEP_CLI"], "digest", str(f)], capture_output=True, text=True, check=True)
    assert "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad" in out.stdout
