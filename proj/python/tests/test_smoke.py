import math

import numpy as np
import pytest

import varinf


def test_version():
    assert varinf.__version__ == "0.1.0"


def test_kl_discrete():
    assert varinf.kl_discrete([0.5, 0.5], [0.5, 0.5]) == 0.0
    assert varinf.kl_discrete([1.0, 0.0], [0.5, 0.5]) == pytest.approx(math.log(2))
    with pytest.raises(varinf.SupportError):
        varinf.kl_discrete([0.5, 0.5], [1.0, 0.0])


def test_bound_sweep():
    s = varinf.bound_sweep(200, seed=3)
    assert s["holds"] == s["trials"] == 200
    assert s["min_gap"] >= -1e-12


def test_ring8_dataset_and_coverage():
    x, truth = varinf.make_dataset("ring8", 2000, seed=1)
    assert x.shape == (2000, 2)
    centers = np.asarray(truth["means"])
    assert centers.shape == (8, 2)
    np.testing.assert_allclose(np.hypot(centers[:, 0], centers[:, 1]), 1.0)
    modes, captured = varinf.mode_coverage(x, centers, radius=0.15)
    assert modes == 8
    assert captured > 0.95
    again, _ = varinf.make_dataset("ring8", 2000, seed=1)
    np.testing.assert_array_equal(x, again)


def test_unknown_dataset_kind():
    with pytest.raises(varinf.ConfigError):
        varinf.make_dataset("mnist")


def test_em_recovers_blobs():
    rng = np.random.default_rng(0)
    truth = np.array([[0.0, 0.0], [4.0, 0.0], [2.0, 4.0]])
    x = np.concatenate([c + 0.5 * rng.standard_normal((200, 2)) for c in truth])
    r = varinf.em_fit(x, 3, seed=1)
    hist = np.asarray(r["loglik_history"])
    assert np.all(np.diff(hist) >= -1e-9)
    means = np.asarray(r["means"])
    for c in truth:
        assert np.min(np.hypot(*(means - c).T)) < 0.2


def test_kl_histogram_shifted_gaussians():
    rng = np.random.default_rng(1)
    p = rng.standard_normal((100000, 1))
    q = rng.standard_normal((100000, 1)) + 1.0
    assert varinf.kl_histogram(p, q, -6.0, 7.0, 100) == pytest.approx(0.5, abs=0.1)
    assert varinf.kl_histogram(p, p, -6.0, 7.0, 100) < 1e-10


def test_run_experiment_and_checkpoint(tmp_path):
    config = {
        "model": "gan-reg",
        "dataset": {"kind": "ring8", "size": 256, "seed": 1},
        "seeds": [1],
        "output_dir": str(tmp_path / "run"),
        "eval": {"interval": 10, "samples": 256},
        "gan": {"generator": {"hidden": [8]}, "discriminator": {"hidden": [8]}, "periods": 20,
                "batch": 16},
    }
    summary = varinf.run_experiment(config)
    assert summary["models"]["gan-reg"]["seeds_ok"] == 1
    ckpt = tmp_path / "run" / "seed-1" / "checkpoint.bin"
    a = varinf.sample_checkpoint(str(ckpt), 100, seed=4)
    b = varinf.sample_checkpoint(str(ckpt), 100, seed=4)
    assert a.shape == (100, 2)
    np.testing.assert_array_equal(a, b)
    probes = varinf.taylor_probe(str(ckpt), directions=1, samples=2000)
    assert len(probes) == 1 and len(probes[0]["points"]) == 3


def test_bad_config_raises():
    with pytest.raises(varinf.ConfigError):
        varinf.run_experiment({"gan": {"lamda": 1.0}})
    with pytest.raises(varinf.ConfigError):
        varinf.run_experiment("{not json")
