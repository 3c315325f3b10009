"""Noise-shape conversions: spectral whitening and the Anscombe transform."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cube import HsiCube
from .errors import ConditioningError, DomainError, ShapeError
from .subspace import DiagonalNoise, FullNoise, IidNoise

# Smallest accepted eigenvalue of a covariance, relative to its largest.
PD_TOLERANCE = 1e-12
ANSCOMBE_FLOOR = 2.0 * np.sqrt(3.0 / 8.0)


@dataclass(frozen=True, eq=False)
class WhiteningOperator:
    """Symmetric ``W = C^{-1/2}`` and ``W_inv = C^{1/2}``."""

    W: np.ndarray
    W_inv: np.ndarray
    covariance: np.ndarray

    @property
    def n_bands(self):
        return self.W.shape[0]


def _check_spectrum(vals):
    hi = vals.max()
    lo = vals.min()
    if not hi > 0 or lo <= PD_TOLERANCE * hi:
        raise ConditioningError(
            f"covariance is not positive definite enough: eigenvalue {lo:.3e} vs max {hi:.3e}", lo
        )


def build_whitener(noise, n_bands=None):
    """Whitening operator for a noise model.

    Diagonal (and i.i.d.) models are handled exactly without an eigensolver,
    which keeps the scalar case bit-compatible with dividing by sigma.
    """
    if isinstance(noise, IidNoise):
        if n_bands is None:
            raise ValueError("n_bands is required for an i.i.d. noise model")
        noise = noise.as_diagonal(n_bands)
    if isinstance(noise, DiagonalNoise):
        if n_bands is not None and n_bands != noise.n_bands:
            raise ShapeError(f"noise model has {noise.n_bands} bands, data has {n_bands}")
        var = noise.variances
        _check_spectrum(var)
        std = np.sqrt(var)
        return WhiteningOperator(np.diag(1.0 / std), np.diag(std), np.diag(var))
    if isinstance(noise, FullNoise):
        if n_bands is not None and n_bands != noise.n_bands:
            raise ShapeError(f"noise model has {noise.n_bands} bands, data has {n_bands}")
        c = noise.cov
        vals, vecs = np.linalg.eigh(c)
        _check_spectrum(vals)
        root = np.sqrt(vals)
        w = (vecs / root) @ vecs.T
        w_inv = (vecs * root) @ vecs.T
        return WhiteningOperator(0.5 * (w + w.T), 0.5 * (w_inv + w_inv.T), c.copy())
    raise TypeError(f"unsupported noise model {type(noise).__name__}")


def whiten(cube, op):
    if cube.n_bands != op.n_bands:
        raise ShapeError(f"whitener has {op.n_bands} bands, cube has {cube.n_bands}")
    return cube.with_matrix(op.W @ cube.matrix)


def unwhiten(cube, op):
    if cube.n_bands != op.n_bands:
        raise ShapeError(f"whitener has {op.n_bands} bands, cube has {cube.n_bands}")
    return cube.with_matrix(op.W_inv @ cube.matrix)


def _values(x):
    return x.data if isinstance(x, HsiCube) else np.asarray(x, dtype=np.float64)


def _rewrap(x, values):
    return x.with_data(values) if isinstance(x, HsiCube) else values


def anscombe(x):
    """Elementwise ``2 sqrt(y + 3/8)``; accepts an HsiCube or an array."""
    v = _values(x)
    if np.any(v < 0):
        raise DomainError("Anscombe transform requires non-negative input")
    return _rewrap(x, 2.0 * np.sqrt(v + 0.375))


def inverse_anscombe(x):
    """Algebraic inverse ``(t/2)^2 - 3/8``, clamped at zero.

    Returns ``(result, n_clamped)`` where ``n_clamped`` counts inputs below
    ``2 sqrt(3/8)``.
    """
    v = _values(x)
    below = v < ANSCOMBE_FLOOR
    out = np.maximum((v / 2.0) ** 2 - 0.375, 0.0)
    return _rewrap(x, out), int(below.sum())


def whiten_masked_pixel(y_obs, mask_row, noise):
    """Whiten the observed part of one spectrum under a diagonal noise model.

    ``mask_row`` is either a boolean vector over bands or an index array of
    the observed bands, in the same order as ``y_obs``.
    """
    y_obs = np.asarray(y_obs, dtype=np.float64)
    if isinstance(noise, IidNoise):
        return y_obs / noise.sigma
    if not isinstance(noise, DiagonalNoise):
        raise TypeError("the masked-pixel whitening shortcut only applies to diagonal covariances")
    idx = observed_indices(mask_row)
    if idx.size != y_obs.size:
        raise ShapeError(f"{y_obs.size} observed values but mask selects {idx.size} bands")
    return y_obs / np.sqrt(noise.variances[idx])


def observed_indices(mask_row):
    m = np.asarray(mask_row)
    if m.dtype == bool:
        return np.flatnonzero(m)
    return m.astype(np.intp).ravel()
