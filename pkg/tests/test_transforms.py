import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_spd
from hsirestore.cube import HsiCube
from hsirestore.errors import ConditioningError, DomainError, ShapeError
from hsirestore.simulate import add_case2, make_ground_truth
from hsirestore.subspace import DiagonalNoise, FullNoise, IidNoise
from hsirestore.transforms import (
    anscombe,
    build_whitener,
    inverse_anscombe,
    unwhiten,
    whiten,
    whiten_masked_pixel,
)


def test_iid_whitener_is_scalar():
    op = build_whitener(IidNoise(0.1), 4)
    assert np.allclose(op.W, 10 * np.eye(4), atol=0, rtol=1e-15)


def test_diagonal_whitener():
    op = build_whitener(DiagonalNoise([0.01, 0.04]))
    assert np.allclose(op.W, np.diag([10.0, 5.0]), atol=0, rtol=1e-15)


def test_random_spd_whitener_matches_product_oracle(rng):
    c = random_spd(rng, 8)
    op = build_whitener(FullNoise(c))
    prod = np.zeros((8, 8))
    for i in range(8):
        for j in range(8):
            prod[i, j] = sum(op.W[i, a] * c[a, b] * op.W[j, b] for a in range(8) for b in range(8))
    assert np.abs(prod - np.eye(8)).max() <= 1e-8


@given(st.integers(0, 2**32 - 1), st.integers(1, 12), st.floats(1.0, 1e4))
def test_whitener_invariants(seed, n, cond):
    c = random_spd(np.random.default_rng(seed), n, cond)
    op = build_whitener(FullNoise(c))
    assert np.abs(op.W - op.W.T).max() <= 1e-10 * np.abs(op.W).max()
    assert np.abs(op.W @ op.W_inv - np.eye(n)).max() <= 1e-8
    assert np.abs(op.W @ c @ op.W.T - np.eye(n)).max() <= 1e-8


def test_whitener_rejects_near_singular():
    c = np.diag([1.0, 1e-13])
    with pytest.raises(ConditioningError) as info:
        build_whitener(FullNoise(c))
    assert info.value.eigenvalue == pytest.approx(1e-13)


def test_whitener_band_mismatch():
    with pytest.raises(ShapeError):
        build_whitener(DiagonalNoise([1.0, 2.0]), 3)
    op = build_whitener(IidNoise(1.0), 3)
    with pytest.raises(ShapeError):
        whiten(HsiCube(np.zeros((2, 2, 2))), op)


def test_whiten_iid_divides_by_sigma(rng):
    cube = HsiCube(rng.standard_normal((3, 4, 4)))
    out = whiten(cube, build_whitener(IidNoise(0.5), 3))
    assert np.array_equal(out.data, cube.data / 0.5)


@given(st.integers(0, 2**32 - 1))
def test_whiten_roundtrip(seed):
    rng = np.random.default_rng(seed)
    cube = HsiCube(rng.standard_normal((6, 5, 5)))
    op = build_whitener(FullNoise(random_spd(rng, 6, 100.0)))
    back = whiten(unwhiten(cube, op), op)
    assert np.abs(back.data - cube.data).max() <= 1e-10 * np.abs(cube.data).max()
    back = unwhiten(whiten(cube, op), op)
    assert np.abs(back.data - cube.data).max() <= 1e-10 * np.abs(cube.data).max()


def test_whitened_case2_noise_is_identity():
    clean = make_ground_truth(128, 64, 32, 4, 2)
    noisy, model = add_case2(clean, 3)
    n = whiten(noisy.with_data(noisy.data - clean.data), build_whitener(model))
    emp = n.matrix @ n.matrix.T / n.n_pixels
    assert n.n_pixels == 8192
    assert np.abs(emp - np.eye(32)).max() <= 0.15


# ----------------------------------------------------------------- Anscombe


def test_anscombe_of_zero():
    assert anscombe(np.array([0.0]))[0] == pytest.approx(1.224745, abs=1e-6)


@given(arrays(np.float64, 20, elements=st.floats(0, 1e6)))
def test_anscombe_roundtrip(y):
    back, clamped = inverse_anscombe(anscombe(y))
    assert clamped == 0
    assert np.all(np.abs(back - y) <= 1e-12 * np.maximum(y, 1.0))


def test_inverse_anscombe_clamps():
    out, n = inverse_anscombe(np.array([0.0, 1.0, 2.0 * np.sqrt(0.375), 3.0]))
    assert n == 2
    assert out[:3].tolist() == [0.0, 0.0, 0.0]
    assert out[3] == pytest.approx(1.5**2 - 0.375)


def test_anscombe_domain():
    with pytest.raises(DomainError):
        anscombe(np.array([1.0, -0.5]))


def test_anscombe_keeps_cube_type():
    cube = HsiCube(np.full((1, 2, 2), 5.0))
    out = anscombe(cube)
    assert isinstance(out, HsiCube)
    assert np.allclose(out.data, 2 * np.sqrt(5.375))


@pytest.mark.parametrize("lam", [4, 10, 50])
def test_anscombe_stabilizes_poisson(lam):
    draws = np.random.default_rng(lam).poisson(lam, 100_000).astype(float)
    assert 0.90 <= anscombe(draws).var() <= 1.10


@given(st.integers(0, 2**32 - 1))
def test_elementwise_transforms_commute_with_permutation(seed):
    rng = np.random.default_rng(seed)
    y = rng.poisson(5, 50).astype(float)
    perm = rng.permutation(50)
    assert np.array_equal(anscombe(y)[perm], anscombe(y[perm]))
    t = anscombe(y)
    assert np.array_equal(inverse_anscombe(t)[0][perm], inverse_anscombe(t[perm])[0])


# -------------------------------------------------------- masked whitening


def test_masked_pixel_iid():
    assert whiten_masked_pixel([1.0, 2.0], [0, 3], IidNoise(0.5)).tolist() == [2.0, 4.0]


def test_masked_pixel_full_mask_equals_whiten(rng):
    model = DiagonalNoise(rng.uniform(0.01, 1.0, 5))
    y = rng.standard_normal(5)
    w = build_whitener(model).W
    out = whiten_masked_pixel(y, np.ones(5, dtype=bool), model)
    assert np.allclose(out, w @ y, rtol=1e-14, atol=0)


@given(st.integers(0, 2**32 - 1))
def test_masked_pixel_matches_dense_oracle(seed):
    rng = np.random.default_rng(seed)
    nb = 8
    model = DiagonalNoise(rng.uniform(0.01, 1.0, nb))
    mask = rng.random(nb) < 0.6
    mask[rng.integers(nb)] = True
    y_obs = rng.standard_normal(mask.sum())
    m = np.eye(nb)[mask]
    c_i = m @ model.covariance() @ m.T
    vals, vecs = np.linalg.eigh(c_i)
    expected = (vecs / np.sqrt(vals)) @ vecs.T @ y_obs
    assert np.allclose(whiten_masked_pixel(y_obs, mask, model), expected, rtol=1e-12, atol=1e-14)


def test_masked_pixel_rejects_full_covariance():
    with pytest.raises(TypeError):
        whiten_masked_pixel([1.0], [0], FullNoise(np.eye(2)))
    with pytest.raises(ShapeError):
        whiten_masked_pixel([1.0, 2.0], [0], DiagonalNoise([1.0, 1.0]))
