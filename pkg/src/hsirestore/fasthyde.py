"""Subspace denoising pipelines.

All three pipelines share one core: learn a k-dimensional basis from the
(possibly transformed) data, denoise each eigen-image with a 2-D patch
denoiser at a known noise level, and map back.

* :func:`fasthyde_iid`     white Gaussian noise of std sigma.
* :func:`fasthyde_noniid`  coloured Gaussian noise; whiten, run the core at
  sigma 1, unwhiten.
* :func:`fasthyde_poisson` Poisson counts; Anscombe, core at sigma 1, inverse.
"""

from __future__ import annotations

import time
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

from .cube import HsiCube
from .patch import DenoiserSpec, denoise_band
from .subspace import (
    DiagonalNoise,
    FullNoise,
    IidNoise,
    estimate_noise,
    learn_subspace,
    select_dimension,
)
from .transforms import anscombe, build_whitener, inverse_anscombe, unwhiten, whiten


@dataclass
class DenoiseRequest:
    """Pipeline inputs.  ``noise=None`` / ``subspace_dim=None`` mean estimate."""

    cube: HsiCube
    noise: IidNoise | DiagonalNoise | FullNoise | None = None
    subspace_dim: int | None = None
    denoiser: DenoiserSpec = field(default_factory=DenoiserSpec)

    def __post_init__(self):
        if self.subspace_dim is not None and not 1 <= self.subspace_dim <= self.cube.n_bands:
            raise ValueError(f"subspace_dim must be in [1, {self.cube.n_bands}], got {self.subspace_dim}")


@dataclass
class DenoiseResult:
    restored: HsiCube
    basis: object
    noise: object
    sigmas: np.ndarray
    timings: dict = field(default_factory=dict)
    pipeline: str = ""
    ridge_pixels: np.ndarray | None = None
    clamped: int = 0

    @property
    def k(self):
        return self.basis.k


class StageTimer:
    """Accumulates wall time per named stage."""

    def __init__(self):
        self.timings = {}
        self._start = time.perf_counter()

    @contextmanager
    def stage(self, name):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - t0

    def finish(self):
        self.timings["total"] = time.perf_counter() - self._start
        return self.timings


def denoise_eigen_images(Z, height, width, sigma, spec):
    """Denoise each row of Z as a height x width image at the same sigma."""
    out = np.empty_like(Z)
    for i, row in enumerate(Z):
        out[i] = denoise_band(row.reshape(height, width), sigma, spec).ravel()
    return out


def _subspace_core(y, height, width, k, sigma, spec, timer):
    """Learn E from ``y`` (n_bands x n), denoise E^T y at ``sigma``, return (E Z_hat, basis)."""
    with timer.stage("subspace"):
        basis = learn_subspace(y, k)
    with timer.stage("project"):
        z = basis.E.T @ y
    with timer.stage("denoise"):
        z_hat = denoise_eigen_images(z, height, width, sigma, spec)
    with timer.stage("reconstruct"):
        x_hat = basis.E @ z_hat
    return x_hat, basis


def _resolve_iid(noise, cube, timer):
    if noise is None:
        with timer.stage("noise"):
            return estimate_noise(cube).as_iid()
    if not isinstance(noise, IidNoise):
        raise TypeError("fasthyde_iid needs an IidNoise model; use fasthyde_noniid for coloured noise")
    return noise


def fasthyde_iid(req):
    cube = req.cube
    timer = StageTimer()
    noise = _resolve_iid(req.noise, cube, timer)
    k = req.subspace_dim
    if k is None:
        with timer.stage("select"):
            k = select_dimension(cube, noise)
    x_hat, basis = _subspace_core(cube.matrix, cube.height, cube.width, k, noise.sigma, req.denoiser, timer)
    with timer.stage("reconstruct"):
        restored = cube.with_matrix(x_hat)
    return DenoiseResult(
        restored=restored,
        basis=basis,
        noise=noise,
        sigmas=np.full(k, noise.sigma),
        timings=timer.finish(),
        pipeline="fasthyde_iid",
    )


def fasthyde_noniid(req):
    """Whiten with ``C^{-1/2}``, learn the basis from whitened data, denoise at 1, unwhiten."""
    cube = req.cube
    timer = StageTimer()
    noise = req.noise
    if noise is None:
        with timer.stage("noise"):
            noise = estimate_noise(cube)
    with timer.stage("whiten"):
        op = build_whitener(noise, cube.n_bands)
        white = whiten(cube, op)
    k = req.subspace_dim
    if k is None:
        with timer.stage("select"):
            k = select_dimension(white, IidNoise(1.0))
    x_white, basis = _subspace_core(white.matrix, cube.height, cube.width, k, 1.0, req.denoiser, timer)
    with timer.stage("unwhiten"):
        restored = unwhiten(cube.with_matrix(x_white), op)
    return DenoiseResult(
        restored=restored,
        basis=basis,
        noise=noise,
        sigmas=np.ones(k),
        timings=timer.finish(),
        pipeline="fasthyde_noniid",
    )


def fasthyde_poisson(req):
    """Anscombe-stabilize counts, run the i.i.d. pipeline at sigma 1, invert."""
    timer = StageTimer()
    with timer.stage("anscombe"):
        stabilized = anscombe(req.cube)
    inner = fasthyde_iid(
        DenoiseRequest(stabilized, IidNoise(1.0), req.subspace_dim, req.denoiser)
    )
    with timer.stage("inverse_anscombe"):
        restored, clamped = inverse_anscombe(inner.restored)
    timings = timer.finish()
    for name, t in inner.timings.items():
        if name != "total":
            timings[name] = t
    return DenoiseResult(
        restored=restored,
        basis=inner.basis,
        noise=inner.noise,
        sigmas=inner.sigmas,
        timings=timings,
        pipeline="fasthyde_poisson",
        clamped=clamped,
    )


def denoise_bandwise(cube, sigmas, spec=None):
    """Baseline without a subspace: denoise every band on its own.

    ``sigmas`` is a scalar or one noise std per band.
    """
    sigmas = np.broadcast_to(np.asarray(sigmas, dtype=np.float64), (cube.n_bands,))
    return cube.with_data(np.array([denoise_band(band, s, spec) for band, s in zip(cube.data, sigmas)]))
