"""Synthetic ground truth, noise cases and stripe masks.

Random streams
--------------
Every draw comes from a Philox-4x64-10 counter-based generator
(``numpy.random.Philox``) keyed with ``seed + (stream_id << 64)`` where
``stream_id = (purpose << 32) | index``.  ``purpose`` is one of the
``STREAM_*`` constants below and ``index`` is usually the band number, so
bands can be generated in any order.  Uniform doubles are
``Generator.random`` on that bit generator; Gaussian samples are produced by
Box-Muller from consecutive uniform pairs ``(u1, u2)``:
``sqrt(-2 ln(1 - u1)) * cos(2 pi u2)`` followed by the matching ``sin``
values.  Poisson draws use ``Generator.poisson``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cube import HsiCube, ObservationMask, normalize_bands
from .errors import DomainError
from .subspace import DiagonalNoise

STREAM_BASIS = 1
STREAM_TEXTURE = 2
STREAM_CASE1 = 3
STREAM_CASE2_STD = 4
STREAM_CASE2_NOISE = 5
STREAM_CASE3 = 6

CASE1_SIGMAS = (0.02, 0.04, 0.06, 0.08, 0.10)


def stream(seed, purpose, index=0):
    if not 0 <= seed < 2**64:
        raise ValueError("seed must fit in an unsigned 64-bit integer")
    key = int(seed) + (((purpose << 32) | index) << 64)
    return np.random.Generator(np.random.Philox(key=key))


def box_muller(gen, size):
    """Standard normal samples from a generator's uniform stream."""
    count = int(np.prod(size))
    half = (count + 1) // 2
    u = gen.random(2 * half).reshape(half, 2)
    r = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
    theta = 2.0 * np.pi * u[:, 1]
    z = np.concatenate([r * np.cos(theta), r * np.sin(theta)])[:count]
    return z.reshape(size)


# ------------------------------------------------------------ ground truth


MOSAIC_REGIONS = 8
MOSAIC_LEVELS = (-1.0, -1.0 / 3.0, 1.0 / 3.0, 1.0)
TEXTURE_PERIODS = (16, 24, 32)
# Amplitude of the last coefficient image relative to the first.
AMPLITUDE_FLOOR = 0.4


def _mosaic(gen, height, width, n_regions=MOSAIC_REGIONS, levels=MOSAIC_LEVELS):
    """Piecewise-constant image: nearest-seed (Voronoi) regions, few levels."""
    seeds = gen.random((n_regions, 2)) * [height, width]
    rr, cc = np.mgrid[0:height, 0:width]
    d = (rr[..., None] - seeds[:, 0]) ** 2 + (cc[..., None] - seeds[:, 1]) ** 2
    palette = np.asarray(levels)
    return palette[gen.integers(0, len(palette), n_regions)][d.argmin(axis=-1)]


def _periodic(gen, height, width, j):
    """Square-wave texture; period and orientation cycle with ``j``, phase is random."""
    period = TEXTURE_PERIODS[j % len(TEXTURE_PERIODS)]
    rr, cc = np.mgrid[0:height, 0:width]
    phase = gen.integers(0, period, 2)
    a = ((rr + phase[0]) // (period // 2)) % 2
    b = ((cc + phase[1]) // (period // 2)) % 2
    return 2.0 * (a, b, a ^ b)[j % 3] - 1.0


MAX_REDRAWS = 64


def _independent(images, img):
    m = np.vstack([np.ones(img.size)] + [a.ravel() for a in images] + [img.ravel()])
    s = np.linalg.svd(m, compute_uv=False)
    return s[-1] > 1e-8 * s[0]


def coefficient_images(height, width, count, seed):
    """``count`` self-similar images, alternating mosaics and periodic textures.

    An image that falls in the span of the constant image and the earlier
    ones is redrawn from substream ``j | (attempt << 16)``, so every image
    adds one dimension whenever the pixel count allows it.
    """
    images = []
    for j in range(count):
        for attempt in range(MAX_REDRAWS):
            gen = stream(seed, STREAM_TEXTURE, j | (attempt << 16))
            img = _mosaic(gen, height, width) if j % 2 == 0 else _periodic(gen, height, width, j // 2)
            if _independent(images, img):
                break
        images.append(img)
    return np.array(images)


def random_semi_unitary(n, k, gen):
    q, r = np.linalg.qr(box_muller(gen, (n, k)))
    return q * np.sign(np.diag(r))


def make_ground_truth(width, height, n_bands, rank, seed):
    """Exact rank-``rank`` cube with self-similar bands normalized to [0, 1].

    ``X = E Z`` with ``E`` random semi-unitary.  For rank >= 2 the first row
    of ``Z`` is constant so per-band normalization keeps the rank; for rank 1
    the single coefficient image and basis are non-negative.
    """
    if not 1 <= rank <= n_bands:
        raise ValueError(f"rank must be in [1, {n_bands}], got {rank}")
    gen = stream(seed, STREAM_BASIS)
    if rank == 1:
        t = coefficient_images(height, width, 1, seed)[0]
        t = t - t.min()
        e = np.abs(box_muller(gen, (n_bands, 1))) + 0.1
        e /= np.linalg.norm(e)
        z = t.reshape(1, -1)
    else:
        e = random_semi_unitary(n_bands, rank, gen)
        tex = coefficient_images(height, width, rank - 1, seed)
        amp = np.linspace(1.0, AMPLITUDE_FLOOR, rank - 1)[:, None]
        z = np.vstack([np.full((1, height * width), 2.0), amp * tex.reshape(rank - 1, -1)])
    cube, _ = normalize_bands(HsiCube.from_matrix(e @ z, height, width))
    s = np.linalg.svd(cube.matrix, compute_uv=False)
    if s[rank - 1] <= 1e-10 * s[0] or (rank < len(s) and s[rank] > 1e-10 * s[0]):
        raise RuntimeError(f"generated cube does not have numerical rank {rank}")
    return cube


# -------------------------------------------------------------- noise cases


def add_case1(cube, sigma, seed):
    """Add i.i.d. Gaussian noise of std ``sigma``."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    noisy = np.empty_like(cube.data)
    for b in range(cube.n_bands):
        noise = box_muller(stream(seed, STREAM_CASE1, b), cube.data[b].shape)
        noisy[b] = cube.data[b] + sigma * noise
    return cube.with_data(noisy)


def add_case2(cube, seed):
    """Add band-dependent Gaussian noise with per-band std drawn from U(0, 1].

    Returns the noisy cube and the true :class:`DiagonalNoise` model.
    """
    std = 1.0 - stream(seed, STREAM_CASE2_STD).random(cube.n_bands)
    noisy = np.empty_like(cube.data)
    for b in range(cube.n_bands):
        noise = box_muller(stream(seed, STREAM_CASE2_NOISE, b), cube.data[b].shape)
        noisy[b] = cube.data[b] + std[b] * noise
    return cube.with_data(noisy), DiagonalNoise(std**2)


def case3_alpha(cube, snr_db):
    a = cube.matrix
    if np.any(a < 0):
        raise DomainError("Poisson simulation needs a non-negative cube")
    s1, s2 = a.sum(), (a**2).sum()
    if s1 == 0:
        raise DomainError("Poisson scale is undefined for an all-zero cube")
    return 10.0 ** (snr_db / 10.0) * s1 / s2


def case3_snr_db(cube, alpha):
    a = cube.matrix
    return 10.0 * np.log10(alpha * (a**2).sum() / a.sum())


def add_case3(cube, snr_db, seed):
    """Poisson counts ``Y ~ P(alpha X)`` with alpha set by the requested SNR.

    Returns ``(counts, alpha)``; counts are left in photon units.
    """
    if not np.isfinite(snr_db):
        raise ValueError("snr_db must be finite")
    alpha = case3_alpha(cube, snr_db)
    counts = np.empty_like(cube.data)
    for b in range(cube.n_bands):
        counts[b] = stream(seed, STREAM_CASE3, b).poisson(alpha * cube.data[b])
    return cube.with_data(counts), alpha


@dataclass(frozen=True)
class Case1:
    sigma: float

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("Case 1 sigma must be positive")


@dataclass(frozen=True)
class Case2:
    seed: int


@dataclass(frozen=True)
class Case3:
    snr_db: float = 15.0

    def __post_init__(self):
        if not np.isfinite(self.snr_db):
            raise ValueError("Case 3 SNR must be finite")


def apply_case(cube, case, seed):
    """Simulate one noise case; returns ``(noisy, info)``.

    ``info`` holds ``noise`` (true model, Case 2) or ``alpha`` (Case 3).
    """
    if isinstance(case, Case1):
        return add_case1(cube, case.sigma, seed), {}
    if isinstance(case, Case2):
        noisy, model = add_case2(cube, case.seed)
        return noisy, {"noise": model}
    if isinstance(case, Case3):
        noisy, alpha = add_case3(cube, case.snr_db, seed)
        return noisy, {"alpha": alpha}
    raise TypeError(f"unknown noise case {case!r}")


def make_stripe_mask(shape, band_indices, stripe_columns):
    """All-observed mask except full-height columns in the listed bands."""
    if isinstance(shape, HsiCube):
        shape = shape.shape
    bits = np.ones(shape, dtype=bool)
    bands = np.asarray(list(band_indices), dtype=np.intp)
    cols = np.asarray(list(stripe_columns), dtype=np.intp)
    if bands.size and cols.size:
        bits[np.ix_(bands, np.arange(shape[1]), cols)] = False
    return ObservationMask(bits)
