import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hsirestore.cube import HsiCube, load_mask, save_mask
from hsirestore.errors import DomainError
from hsirestore.metrics import report
from hsirestore.simulate import (
    CASE1_SIGMAS,
    STREAM_CASE1,
    Case1,
    Case2,
    Case3,
    add_case1,
    add_case2,
    add_case3,
    apply_case,
    box_muller,
    case3_alpha,
    case3_snr_db,
    make_ground_truth,
    make_stripe_mask,
    stream,
)


def numerical_rank(m):
    s = np.linalg.svd(m, compute_uv=False)
    return int((s > 1e-10 * s[0]).sum())


# ----------------------------------------------------------- ground truth


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 12))
def test_requested_rank_is_numerical_rank(seed, rank):
    cube = make_ground_truth(24, 20, 16, rank, seed)
    assert cube.shape == (16, 20, 24)
    assert numerical_rank(cube.matrix) == rank
    assert cube.data.min() == 0.0 and cube.data.max() == 1.0


def test_coincident_textures_are_redrawn():
    # seed 1 draws two period-16 row textures half a period apart
    assert numerical_rank(make_ground_truth(24, 20, 16, 9, 1).matrix) == 9


def test_rank_one_bands_are_proportional():
    cube = make_ground_truth(16, 16, 8, 1, 3)
    m = cube.matrix
    ref = m[0] / np.linalg.norm(m[0])
    for row in m[1:]:
        assert np.abs(row / np.linalg.norm(row) - ref).max() <= 1e-12


def test_ground_truth_is_deterministic():
    a = make_ground_truth(32, 32, 16, 5, 11)
    b = make_ground_truth(32, 32, 16, 5, 11)
    assert a.data.tobytes() == b.data.tobytes()
    assert not np.array_equal(a.data, make_ground_truth(32, 32, 16, 5, 12).data)


def test_bad_rank():
    with pytest.raises(ValueError):
        make_ground_truth(8, 8, 4, 5, 0)


# ------------------------------------------------------------------ streams


def test_box_muller_contract():
    gen = stream(5, STREAM_CASE1, 2)
    u = stream(5, STREAM_CASE1, 2).random(6).reshape(3, 2)
    r = np.sqrt(-2 * np.log(1 - u[:, 0]))
    expected = np.concatenate([r * np.cos(2 * np.pi * u[:, 1]), r * np.sin(2 * np.pi * u[:, 1])])
    assert np.allclose(box_muller(gen, 5), expected[:5], rtol=1e-14, atol=1e-15)


def test_stream_key_layout():
    key = 9 + (((STREAM_CASE1 << 32) | 4) << 64)
    a = np.random.Generator(np.random.Philox(key=key)).random(4)
    assert np.array_equal(stream(9, STREAM_CASE1, 4).random(4), a)


def test_box_muller_is_standard_normal():
    z = box_muller(stream(1, 1), 200_000)
    assert abs(z.mean()) < 0.01
    assert abs(z.std() - 1) < 0.01


def test_bands_are_order_independent(scene):
    # band b of Case 1 noise only depends on (seed, b)
    sub = HsiCube(scene.data[5:6])
    a = add_case1(scene, 0.1, 4).data[5] - scene.data[5]
    b = box_muller(stream(4, STREAM_CASE1, 5), sub.data[0].shape) * 0.1
    assert np.allclose(a, b, rtol=0, atol=1e-15)


# ------------------------------------------------------------------- Case 1


@pytest.mark.parametrize("sigma", CASE1_SIGMAS)
def test_case1_noisy_mpsnr(scene, sigma):
    noisy = add_case1(scene, sigma, 1000 + int(sigma * 100))
    assert report(scene, noisy).mpsnr == pytest.approx(20 * np.log10(1 / sigma), abs=0.1)


def test_case1_paper_values(scene):
    assert report(scene, add_case1(scene, 0.02, 1)).mpsnr == pytest.approx(33.98, abs=0.1)
    assert report(scene, add_case1(scene, 0.10, 1)).mpsnr == pytest.approx(20.00, abs=0.1)


def test_case1_empirical_std(scene):
    d = add_case1(scene, 0.06, 2).data - scene.data
    assert d.std() == pytest.approx(0.06, rel=0.02)


def test_case1_zero_sigma_is_identity(scene):
    assert np.array_equal(add_case1(scene, 0.0, 3).data, scene.data)
    small = add_case1(scene, 1e-12, 3).data
    assert np.abs(small - scene.data).max() <= 1e-10


def test_case1_validation():
    with pytest.raises(ValueError):
        Case1(0.0)
    with pytest.raises(ValueError):
        add_case1(HsiCube(np.zeros((1, 2, 2))), -0.1, 0)


# ------------------------------------------------------------------- Case 2


def test_case2_model_bookkeeping(scene):
    noisy, model = add_case2(scene, 5)
    std = 1.0 - stream(5, 4).random(scene.n_bands)
    assert np.array_equal(model.variances, std**2)
    assert np.all(std > 0) and np.all(std <= 1)
    assert noisy.shape == scene.shape


def test_case2_band_std(scene):
    noisy, model = add_case2(scene, 6)
    std = np.sqrt(model.variances)
    emp = (noisy.data - scene.data).reshape(scene.n_bands, -1).std(axis=1)
    sel = std >= 0.1
    assert sel.sum() > 20
    assert np.all(np.abs(emp[sel] / std[sel] - 1) <= 0.05)


def test_case2_seeds_differ(scene):
    a = add_case2(scene, 1)[1].variances
    b = add_case2(scene, 2)[1].variances
    assert np.abs(a - b).max() > 0


# ------------------------------------------------------------------- Case 3


@given(st.floats(-10, 40))
def test_case3_alpha_reproduces_snr(snr):
    cube = make_ground_truth(8, 8, 4, 2, 1)
    assert case3_snr_db(cube, case3_alpha(cube, snr)) == pytest.approx(snr, abs=1e-10)


def test_case3_zero_entries_stay_zero(scene):
    counts, alpha = add_case3(scene, 15.0, 4)
    zero = scene.data == 0
    assert zero.any()
    assert np.all(counts.data[zero] == 0)
    assert np.all(counts.data == np.round(counts.data))


def test_case3_moments_at_fixed_entry():
    cube = HsiCube(np.array([[[0.5, 0.0]]]))
    draws = np.array([add_case3(cube, 10.0, s)[0].data[0, 0] for s in range(100_000)])
    _, alpha = add_case3(cube, 10.0, 0)
    mean = 0.5 * alpha
    assert draws[:, 0].mean() == pytest.approx(mean, rel=0.03)
    assert draws[:, 0].var() == pytest.approx(mean, rel=0.03)
    assert np.all(draws[:, 1] == 0)


def test_case3_domain_errors():
    with pytest.raises(DomainError):
        add_case3(HsiCube(np.zeros((1, 2, 2))), 15.0, 0)
    with pytest.raises(DomainError):
        add_case3(HsiCube(-np.ones((1, 2, 2))), 15.0, 0)
    with pytest.raises(ValueError):
        Case3(float("inf"))


def test_apply_case_dispatch(scene):
    a, info = apply_case(scene, Case1(0.05), 3)
    assert info == {} and np.array_equal(a.data, add_case1(scene, 0.05, 3).data)
    b, info = apply_case(scene, Case2(8), 3)
    assert np.array_equal(info["noise"].variances, add_case2(scene, 8)[1].variances)
    c, info = apply_case(scene, Case3(12.0), 3)
    assert info["alpha"] == add_case3(scene, 12.0, 3)[1]
    with pytest.raises(TypeError):
        apply_case(scene, "case4", 0)


# -------------------------------------------------------------------- masks


def test_empty_stripe_mask_is_full():
    assert make_stripe_mask((4, 8, 8), [], [1, 2]).bits.all()


def test_stripe_mask_counts():
    mask = make_stripe_mask((32, 64, 64), [14, 15, 16, 17], range(4, 64, 6))
    assert (~mask.bits).sum() == 4 * 10 * 64
    assert not mask.bits[14, :, 4].any()
    assert mask.bits[13].all()


def test_stripe_mask_roundtrip(tmp_path):
    mask = make_stripe_mask((5, 7, 9), [1, 3], [0, 8])
    save_mask(mask, tmp_path / "m.hsim")
    assert np.array_equal(load_mask(tmp_path / "m.hsim").bits, mask.bits)
