import os
from pathlib import Path

import numpy as np
import pytest

import blockcam

DATA = Path(os.environ.get("BLOCKCAM_DATA_DIR", Path(__file__).resolve().parents[2] / "data"))


def test_version():
    assert blockcam.__version__.count(".") == 2


def test_blocks_round_trip():
    rng = np.random.default_rng(0)
    img = rng.random((24, 16))
    blocks = blockcam.extract_blocks(img, 8)
    assert blocks.shape == (64, 6)
    assert np.array_equal(blocks[:, 0], img[:8, :8].ravel())
    assert np.array_equal(blockcam.stitch_blocks(blocks, 16, 24, 8), img)


def test_pgm_and_psnr(tmp_path):
    img = blockcam.read_pgm(DATA / "test" / "camera.pgm")
    assert img.shape == (512, 512)
    assert blockcam.psnr(img, img) == float("inf")
    out = tmp_path / "x.pgm"
    blockcam.write_pgm(img, out)
    assert np.array_equal(blockcam.read_pgm(out), img)


def test_sensing_matrix_and_csr():
    a = blockcam.make_sensing_matrix("permuted-hadamard", 64, 64, 3)
    h = 2 * a - 1
    assert np.array_equal(h @ h.T, 64 * np.eye(64))
    assert blockcam.csr_to_measurements(0.1, 1024) == 102
    with pytest.raises(blockcam.Error, match="dimension"):
        blockcam.make_sensing_matrix("random-binary", 65, 64, 0)


def test_train_and_reconstruct(tmp_path):
    rng = np.random.default_rng(1)
    patches = np.concatenate([rng.normal(0.2, 0.05, (16, 300)), rng.normal(0.8, 0.05, (16, 300))], axis=1)
    model, report = blockcam.train_gmm(patches, k=2, max_iters=30)
    assert model.k == 2 and model.p == 16
    ll = report["log_likelihood"]
    assert all(b >= a - 1e-9 for a, b in zip(ll, ll[1:]))

    path = tmp_path / "m.bcgmm"
    blockcam.save_model(model, path)
    assert blockcam.load_model(path) == model

    img = np.full((8, 8), 0.8)
    blocks = blockcam.extract_blocks(img, 4)
    a = blockcam.make_sensing_matrix("random-binary", 3, 16, 7)
    y = blockcam.sense(blocks, a)
    cache = blockcam.build_cache(a, model, sigma=0.0)
    means, resp = blockcam.invert_blocks(y, cache, model)
    assert means.shape == (16, 4)
    assert np.allclose(resp.sum(axis=0), 1.0, atol=1e-12)
    recon = blockcam.reconstruct_image(y, cache, model, 8, 8, 4)
    assert blockcam.psnr(img, recon) > 20.0


def test_sparse_identity_is_soft_threshold():
    y = np.array([1.5, -0.2, 0.0, -3.0])
    x, iterations, converged = blockcam.solve_sparse(y, np.eye(4), "identity", lam=0.5)
    assert converged
    assert np.allclose(x, np.sign(y) * np.maximum(np.abs(y) - 0.5, 0.0))
