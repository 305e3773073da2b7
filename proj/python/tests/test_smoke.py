# Copyright (C) 2026 The pairforge Authors
# SPDX-License-Identifier: Apache-2.0
import numpy as np
import pytest

import pairforge

SMALL_CONFIG = """seed = 3
[corpus]
num_samples = 180
[gan]
epochs = 1
[captioner]
epochs = 1
"""


def test_corpus_is_deterministic_and_well_formed():
    a = pairforge.generate_corpus(num_samples=36, seed=5)
    b = pairforge.generate_corpus(num_samples=36, seed=5)
    assert len(a) == 36
    first = a[0]
    assert first["image"].shape == (3, 16, 16)
    assert first["image"].dtype == np.float32
    assert np.all(np.abs(first["image"]) <= 1.0)
    assert first["color"] in " ".join(first["captions"])
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x["image"], y["image"])
        assert x["captions"] == y["captions"]


def test_dominant_color_reads_the_rendered_color():
    for sample in pairforge.generate_corpus(num_samples=36, seed=1):
        assert pairforge.dominant_color(sample["image"]) == sample["color"]


def test_dominant_color_rejects_bad_shapes():
    with pytest.raises(ValueError):
        pairforge.dominant_color(np.zeros((3, 8, 8), dtype=np.float32))


def test_fit_gmm_recovers_two_clusters():
    rng = np.random.default_rng(0)
    data = np.concatenate([rng.normal(-2.0, 0.5, 300), rng.normal(3.0, 0.5, 300)])[:, None]
    fit = pairforge.fit_gmm(data, 2, seed=1)
    means = sorted(m[0] for m in fit["means"])
    assert means[0] == pytest.approx(-2.0, abs=0.1)
    assert means[1] == pytest.approx(3.0, abs=0.1)
    assert sum(fit["weights"]) == pytest.approx(1.0)
    ll = fit["log_likelihood"]
    assert all(later >= earlier - 1e-9 for earlier, later in zip(ll, ll[1:]))


def test_cli_usage_error():
    code, _, err = pairforge.run_cli(["frobnicate"])
    assert code == 1
    assert err


def test_pipeline_round_trip(tmp_path):
    (tmp_path / "run.toml").write_text(SMALL_CONFIG)
    common = ["--config", str(tmp_path / "run.toml"), "--work", str(tmp_path)]
    for step in (["gen-data"], ["train-gan"], ["train-captioner"]):
        code, _, err = pairforge.run_cli(step + common)
        assert code == 0, err

    gan = pairforge.Gan.load(tmp_path / "gan.pgk")
    assert gan.epoch == 1
    psi = gan.encode("the flower is red")
    assert psi.shape == (32,)
    image = gan.generate(psi, noise_seed=4)
    assert image.shape == (3, 16, 16)
    np.testing.assert_array_equal(image, gan.generate(psi, noise_seed=4))
    phi = gan.phi(image)
    assert phi.shape == (1024,)
    assert 0.0 < gan.discriminate(image, psi) < 1.0

    captioner = pairforge.Captioner.load(tmp_path / "captioner.pgk")
    caption = captioner.caption(phi)
    assert isinstance(caption, str)
    assert len(caption.split()) <= 12


def test_missing_checkpoint_raises(tmp_path):
    with pytest.raises(FileNotFoundError):
        pairforge.Gan.load(tmp_path / "absent.pgk")
