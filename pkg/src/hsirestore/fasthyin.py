"""Inpainting pipelines for cubes with known missing (band, pixel) entries.

Every pipeline first learns a basis from the completely observed pixels
(in the whitened domain when the noise is coloured), recovers the subspace
coefficients of each incomplete pixel by (weighted) least squares on its
observed bands, substitutes ``E z_hat`` for that spectrum, and then runs the
matching denoising pipeline on the filled cube.
Complete pixels are never modified by the recovery step.

Pixels sharing one observation pattern are solved together with a single
factorization.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import solve_triangular

from .cube import HsiCube, ObservationMask
from .errors import RankError, UnderdeterminedError
from .fasthyde import DenoiseRequest, fasthyde_iid, fasthyde_noniid
from .patch import DenoiserSpec
from .subspace import (
    DiagonalNoise,
    FullNoise,
    IidNoise,
    estimate_noise,
    learn_subspace,
    select_dimension,
)
from .transforms import observed_indices, anscombe, build_whitener, inverse_anscombe

# Largest accepted condition number of the normal matrix E_o^T E_o.
MAX_CONDITION = 1e10
RIDGE_FACTOR = 1e-6
POLICIES = ("error", "ridge")


@dataclass
class InpaintRequest:
    cube: HsiCube
    mask: ObservationMask
    noise: IidNoise | DiagonalNoise | FullNoise | None = None
    subspace_dim: int | None = None
    denoiser: DenoiserSpec = field(default_factory=DenoiserSpec)
    underdetermined_policy: str = "error"

    def __post_init__(self):
        self.mask.check_matches(self.cube)
        if self.underdetermined_policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}")
        if self.subspace_dim is not None and not 1 <= self.subspace_dim <= self.cube.n_bands:
            raise ValueError(f"subspace_dim must be in [1, {self.cube.n_bands}], got {self.subspace_dim}")


# ------------------------------------------------------- per-pixel solvers


def _solve(a, ys, policy, pixel=None):
    """Least-squares solve of ``a z = y`` for each column of ``ys``.

    Returns ``(z, ridged)``.  Uses a QR factorization of ``a``; falls back to
    ridge-regularized normal equations when allowed.
    """
    n_obs, k = a.shape
    bad = n_obs < k
    if not bad:
        s = np.linalg.svd(a, compute_uv=False)
        bad = s[-1] == 0 or (s[0] / s[-1]) ** 2 > MAX_CONDITION
    if bad:
        if policy != "ridge":
            raise UnderdeterminedError(
                f"pixel has {n_obs} usable observations for a {k}-dimensional subspace", pixel
            )
        g = a.T @ a + RIDGE_FACTOR * k * np.eye(k)
        return np.linalg.solve(g, a.T @ ys), True
    q, r = np.linalg.qr(a)
    return solve_triangular(r, q.T @ ys), False


def recover_pixel_ls(y_obs, mask_row, basis, policy="error"):
    """Coefficients of one pixel from its observed bands (ordinary LS).

    Returns ``(z, ridged)``.
    """
    idx = observed_indices(mask_row)
    e = basis.E if hasattr(basis, "E") else np.asarray(basis)
    return _solve(e[idx], np.asarray(y_obs, dtype=np.float64), policy)


def _inv_sqrt_sym(c):
    vals, vecs = np.linalg.eigh(c)
    if vals.min() <= 0:
        raise UnderdeterminedError("observed-band covariance is not positive definite")
    return (vecs / np.sqrt(vals)) @ vecs.T


def recover_pixel_wls(y_obs, mask_row, basis, noise, policy="error"):
    """Maximum-likelihood coefficients under correlated Gaussian noise.

    The observed subsystem is whitened with ``C_o^{-1/2}`` where ``C_o`` is
    the covariance restricted to the observed bands, then solved by LS.
    """
    idx = observed_indices(mask_row)
    e = basis.E if hasattr(basis, "E") else np.asarray(basis)
    cov = noise.covariance(e.shape[0])
    w = _inv_sqrt_sym(cov[np.ix_(idx, idx)])
    return _solve(w @ e[idx], w @ np.asarray(y_obs, dtype=np.float64), policy)


def fill_incomplete(y, mask_matrix, e, policy, cov=None):
    """Replace every incomplete column of ``y`` by ``E z_hat``.

    ``cov`` switches to the weighted solver.  Returns the filled matrix and
    the flat indices of ridge-flagged pixels.
    """
    out = np.array(y, dtype=np.float64, copy=True)
    incomplete = np.flatnonzero(~mask_matrix.all(axis=0))
    if incomplete.size == 0:
        return out, np.empty(0, dtype=np.intp)
    patterns, inverse = np.unique(mask_matrix[:, incomplete].T, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    ridged = []
    for p_idx, pattern in enumerate(patterns):
        cols = incomplete[inverse == p_idx]
        obs = np.flatnonzero(pattern)
        a = e[obs]
        ys = y[np.ix_(obs, cols)]
        if cov is not None:
            w = _inv_sqrt_sym(cov[np.ix_(obs, obs)])
            a, ys = w @ a, w @ ys
        z, flagged = _solve(a, ys, policy, pixel=int(cols[0]))
        out[:, cols] = e @ z
        if flagged:
            ridged.extend(cols.tolist())
    return out, np.asarray(sorted(ridged), dtype=np.intp)


# -------------------------------------------------------------- pipelines


def _complete_matrix(cube, mask, k):
    """Spectra of the completely observed pixels, checked for minimum count."""
    y = cube.matrix[:, mask.complete_pixels()]
    _check_complete(y.shape[1], k or 1, cube.n_bands)
    return y


def _check_complete(n_complete, k, n_bands):
    need = max(4 * k, n_bands)
    if n_complete < need:
        raise RankError(
            f"only {n_complete} completely observed pixels; at least {need} are needed "
            f"to learn a {k}-dimensional basis over {n_bands} bands"
        )


def _resolve_k(req, y_complete, noise):
    if req.subspace_dim is not None:
        return req.subspace_dim
    return select_dimension(y_complete, noise)


def _finish(result, pipeline, ridged, t_fill, t0):
    result.pipeline = pipeline
    result.ridge_pixels = ridged
    timings = result.timings
    timings["fill"] = t_fill
    staged = sum(v for name, v in timings.items() if name not in ("total", "setup"))
    timings["total"] = time.perf_counter() - t0
    # noise estimation, dimension selection and validation
    timings["setup"] = max(timings["total"] - staged, 0.0)
    return result


def fasthyin_iid(req):
    t0 = time.perf_counter()
    cube, mask = req.cube, req.mask
    y_complete = _complete_matrix(cube, mask, req.subspace_dim)
    noise = req.noise if req.noise is not None else estimate_noise(y_complete).as_iid()
    if not isinstance(noise, IidNoise):
        raise TypeError("fasthyin_iid needs an IidNoise model")
    k = _resolve_k(req, y_complete, noise)
    _check_complete(y_complete.shape[1], k, cube.n_bands)
    t_fill = time.perf_counter()
    basis = learn_subspace(y_complete, k)
    filled, ridged = fill_incomplete(cube.matrix, mask.matrix, basis.E, req.underdetermined_policy)
    t_fill = time.perf_counter() - t_fill
    result = fasthyde_iid(DenoiseRequest(cube.with_matrix(filled), noise, k, req.denoiser))
    return _finish(result, "fasthyin_iid", ridged, t_fill, t0)


def _signal_basis(y_complete, op, k):
    """Basis of the signal subspace of the complete pixels under coloured noise.

    The subspace is identified from the whitened complete pixels, where the
    noise is isotropic and the top eigen-directions carry the signal, and is
    mapped back with ``C^{1/2}``.  The columns are not orthonormal; weighted
    LS fits depend only on their span.
    """
    e_white = learn_subspace(op.W @ y_complete, k).E
    return op.W_inv @ e_white


def fasthyin_noniid(req):
    """Weighted LS recovery of incomplete pixels, then the whitened denoising pipeline."""
    t0 = time.perf_counter()
    cube, mask = req.cube, req.mask
    y_complete = _complete_matrix(cube, mask, req.subspace_dim)
    noise = req.noise if req.noise is not None else estimate_noise(y_complete)
    cov = noise.covariance(cube.n_bands)
    op = build_whitener(noise, cube.n_bands)
    k = req.subspace_dim
    if k is None:
        k = select_dimension(op.W @ y_complete, IidNoise(1.0))
    _check_complete(y_complete.shape[1], k, cube.n_bands)
    t_fill = time.perf_counter()
    basis = _signal_basis(y_complete, op, k)
    filled, ridged = fill_incomplete(cube.matrix, mask.matrix, basis, req.underdetermined_policy, cov=cov)
    t_fill = time.perf_counter() - t_fill
    result = fasthyde_noniid(DenoiseRequest(cube.with_matrix(filled), noise, k, req.denoiser))
    return _finish(result, "fasthyin_noniid", ridged, t_fill, t0)


def fasthyin_diag(req):
    """Diagonal-covariance shortcut: whiten observed entries band by band, inpaint at sigma 1, unwhiten."""
    t0 = time.perf_counter()
    cube, mask = req.cube, req.mask
    noise = req.noise
    if isinstance(noise, IidNoise):
        noise = noise.as_diagonal(cube.n_bands)
    complete = mask.complete_pixels()
    _check_complete(complete.size, req.subspace_dim or 1, cube.n_bands)
    if noise is None:
        noise = estimate_noise(cube.matrix[:, complete]).as_diagonal()
    if not isinstance(noise, DiagonalNoise):
        raise TypeError("fasthyin_diag needs a diagonal noise model; use fasthyin_noniid")
    inv_std = 1.0 / np.sqrt(noise.band_variances(cube.n_bands))
    white = cube.matrix * inv_std[:, None]
    y_complete = white[:, complete]
    k = req.subspace_dim
    if k is None:
        k = select_dimension(y_complete, IidNoise(1.0))
    _check_complete(complete.size, k, cube.n_bands)
    t_fill = time.perf_counter()
    basis = learn_subspace(y_complete, k)
    filled, ridged = fill_incomplete(white, mask.matrix, basis.E, req.underdetermined_policy)
    t_fill = time.perf_counter() - t_fill
    result = fasthyde_iid(DenoiseRequest(cube.with_matrix(filled), IidNoise(1.0), k, req.denoiser))
    t_un = time.perf_counter()
    result.restored = cube.with_matrix(result.restored.matrix / inv_std[:, None])
    result.timings["unwhiten"] = time.perf_counter() - t_un
    result.noise = noise
    return _finish(result, "fasthyin_diag", ridged, t_fill, t0)


def fasthyin_poisson(req):
    """Anscombe the observed counts, inpaint with unit-variance i.i.d. noise, invert."""
    t0 = time.perf_counter()
    stabilized = anscombe(req.cube)
    inner = fasthyin_iid(
        InpaintRequest(
            stabilized, req.mask, IidNoise(1.0), req.subspace_dim, req.denoiser, req.underdetermined_policy
        )
    )
    inner.restored, inner.clamped = inverse_anscombe(inner.restored)
    inner.pipeline = "fasthyin_poisson"
    inner.timings["total"] = time.perf_counter() - t0
    return inner
