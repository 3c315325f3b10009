"""Noise estimation and signal-subspace identification.

The noise estimator regresses every band on all the others and treats the
residuals as noise samples.  The basis is the leading eigenvectors of the
(uncentered) band correlation matrix ``Y Y^T / n``.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .cube import HsiCube
from .errors import ConditioningError, DataError, FormatError, LengthError, RankError, ShapeError

BASIS_MAGIC = b"HSIE"
NOISE_MAGIC = b"HSIN"

# Relative ridge added to each band-on-band regression.
RIDGE_FACTOR = 1e-6
# Variance floor (relative to mean band power) keeping estimated covariances PD.
VARIANCE_FLOOR = 1e-10
SELECTION_FACTOR = 2.0


def _as_matrix(data):
    if isinstance(data, HsiCube):
        return data.matrix
    m = np.asarray(data, dtype=np.float64)
    if m.ndim != 2:
        raise ShapeError(f"expected an HsiCube or an n_bands x n_pixels matrix, got shape {m.shape}")
    return m


# ------------------------------------------------------------ noise models


@dataclass(frozen=True)
class IidNoise:
    sigma: float

    kind = 0

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    def covariance(self, n_bands):
        return self.sigma**2 * np.eye(n_bands)

    def band_variances(self, n_bands):
        return np.full(n_bands, self.sigma**2)

    def as_iid(self):
        return self

    def as_diagonal(self, n_bands):
        return DiagonalNoise(self.band_variances(n_bands))

    def as_full(self, n_bands):
        return FullNoise(self.covariance(n_bands))


@dataclass(frozen=True, eq=False)
class DiagonalNoise:
    variances: np.ndarray

    kind = 1

    def __post_init__(self):
        v = np.array(self.variances, dtype=np.float64).ravel()
        if not np.all(np.isfinite(v)) or np.any(v <= 0):
            raise ValueError("all band variances must be finite and positive")
        v.setflags(write=False)
        object.__setattr__(self, "variances", v)

    @property
    def n_bands(self):
        return self.variances.size

    def _check(self, n_bands):
        if n_bands is not None and n_bands != self.n_bands:
            raise ShapeError(f"noise model has {self.n_bands} bands, data has {n_bands}")

    def covariance(self, n_bands=None):
        self._check(n_bands)
        return np.diag(self.variances)

    def band_variances(self, n_bands=None):
        self._check(n_bands)
        return self.variances.copy()

    def as_iid(self):
        return IidNoise(float(np.sqrt(self.variances.mean())))

    def as_diagonal(self, n_bands=None):
        self._check(n_bands)
        return self

    def as_full(self, n_bands=None):
        return FullNoise(self.covariance(n_bands))


@dataclass(frozen=True, eq=False)
class FullNoise:
    cov: np.ndarray

    kind = 2

    def __post_init__(self):
        c = np.array(self.cov, dtype=np.float64)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ShapeError(f"covariance must be square, got {c.shape}")
        if not np.all(np.isfinite(c)):
            raise ValueError("covariance contains non-finite entries")
        scale = max(1.0, float(np.abs(c).max()))
        if np.abs(c - c.T).max() > 1e-10 * scale:
            raise ValueError("covariance is not symmetric")
        lo = np.linalg.eigvalsh(c).min()
        if lo <= 0:
            raise ConditioningError(f"covariance is not positive definite (min eigenvalue {lo:.3e})", lo)
        c.setflags(write=False)
        object.__setattr__(self, "cov", c)

    @property
    def n_bands(self):
        return self.cov.shape[0]

    def _check(self, n_bands):
        if n_bands is not None and n_bands != self.n_bands:
            raise ShapeError(f"noise model has {self.n_bands} bands, data has {n_bands}")

    def covariance(self, n_bands=None):
        self._check(n_bands)
        return self.cov.copy()

    def band_variances(self, n_bands=None):
        self._check(n_bands)
        return np.diag(self.cov).copy()

    def as_iid(self):
        return IidNoise(float(np.sqrt(np.diag(self.cov).mean())))

    def as_diagonal(self, n_bands=None):
        self._check(n_bands)
        return DiagonalNoise(np.diag(self.cov))

    def as_full(self, n_bands=None):
        self._check(n_bands)
        return self


NoiseModel = IidNoise | DiagonalNoise | FullNoise


def estimate_noise(data):
    """Estimate the spectral noise covariance by multiple regression.

    Each band is regressed (ridge-stabilized OLS) on the remaining bands; the
    residual matrix ``R`` gives ``C = R R^T / n``.

    Parameters
    ----------
    data : HsiCube or ndarray
        Cube, or an ``n_bands x n_pixels`` matrix.

    Returns
    -------
    FullNoise
        Use ``.as_diagonal()`` / ``.as_iid()`` for the reduced views.
    """
    y = _as_matrix(data)
    n_bands, n = y.shape
    if n_bands < 2:
        raise RankError("noise estimation needs at least 2 bands")
    if n < n_bands + 1:
        raise RankError(f"noise estimation needs at least {n_bands + 1} pixels, got {n}")
    if not np.all(np.isfinite(y)):
        raise DataError("input contains non-finite values")

    gram = y @ y.T
    ridge = RIDGE_FACTOR * np.trace(gram) / n_bands
    residual = np.empty_like(y)
    idx = np.arange(n_bands)
    for b in range(n_bands):
        rest = idx != b
        g = gram[np.ix_(rest, rest)] + ridge * np.eye(n_bands - 1)
        beta = np.linalg.solve(g, gram[rest, b])
        residual[b] = y[b] - beta @ y[rest]
    cov = residual @ residual.T / n
    cov = 0.5 * (cov + cov.T)
    floor = VARIANCE_FLOOR * max(np.trace(gram) / (n * n_bands), np.finfo(float).tiny)
    cov[np.diag_indices(n_bands)] += floor
    return FullNoise(cov)


# ------------------------------------------------------------------ basis


@dataclass(frozen=True, eq=False)
class SubspaceBasis:
    """Semi-unitary ``n_bands x k`` basis.

    ``eigenvalues`` holds the full descending spectrum of ``Y Y^T / n`` the
    basis was taken from, when known.
    """

    E: np.ndarray
    eigenvalues: np.ndarray | None = None

    def __post_init__(self):
        e = np.array(self.E, dtype=np.float64)
        if e.ndim != 2 or not 1 <= e.shape[1] <= e.shape[0]:
            raise ShapeError(f"basis must be n_bands x k with 1 <= k <= n_bands, got {e.shape}")
        e.setflags(write=False)
        object.__setattr__(self, "E", e)

    @property
    def n_bands(self):
        return self.E.shape[0]

    @property
    def k(self):
        return self.E.shape[1]

    def projector(self):
        return self.E @ self.E.T


@dataclass(frozen=True, eq=False)
class EigenImages:
    """Subspace coefficients ``Z`` (k x n_pixels) on a height x width grid."""

    Z: np.ndarray
    height: int
    width: int

    def __post_init__(self):
        if self.Z.ndim != 2 or self.Z.shape[1] != self.height * self.width:
            raise ShapeError(f"Z shape {self.Z.shape} inconsistent with grid {self.height}x{self.width}")

    @property
    def k(self):
        return self.Z.shape[0]

    def image(self, i):
        return self.Z[i].reshape(self.height, self.width)


def _fix_signs(vecs):
    rows = np.abs(vecs).argmax(axis=0)
    signs = np.where(vecs[rows, np.arange(vecs.shape[1])] < 0, -1.0, 1.0)
    return vecs * signs


def eigen_spectrum(data):
    """Descending eigenvalues and sign-fixed eigenvectors of ``Y Y^T / n``."""
    y = _as_matrix(data)
    gram = y @ y.T / y.shape[1]
    vals, vecs = np.linalg.eigh(gram)
    vals, vecs = vals[::-1], vecs[:, ::-1]
    return vals, _fix_signs(vecs)


def learn_subspace(data, k):
    y = _as_matrix(data)
    n_bands = y.shape[0]
    if not 1 <= k <= n_bands:
        raise ValueError(f"subspace dimension must be in [1, {n_bands}], got {k}")
    vals, vecs = eigen_spectrum(y)
    return SubspaceBasis(np.ascontiguousarray(vecs[:, :k]), eigenvalues=vals)


def direction_powers(data, noise):
    """Signal and noise power along each eigen-direction, in eigenvalue order."""
    y = _as_matrix(data)
    vals, vecs = eigen_spectrum(y)
    cov = noise.covariance(y.shape[0])
    noise_power = np.einsum("bi,bc,ci->i", vecs, cov, vecs)
    return vals, noise_power


def select_dimension(data, noise):
    """Count eigen-directions whose power is at least twice the noise power there."""
    signal, noise_power = direction_powers(data, noise)
    return max(1, int(np.count_nonzero(signal >= SELECTION_FACTOR * noise_power)))


def project(basis, data):
    if isinstance(data, HsiCube):
        if data.n_bands != basis.n_bands:
            raise ShapeError(f"basis has {basis.n_bands} bands, cube has {data.n_bands}")
        return EigenImages(basis.E.T @ data.matrix, data.height, data.width)
    raise TypeError("project expects an HsiCube")


def reconstruct(basis, eigen):
    if eigen.k != basis.k:
        raise ShapeError(f"basis has k={basis.k}, eigen-images have k={eigen.k}")
    return HsiCube.from_matrix(basis.E @ eigen.Z, eigen.height, eigen.width)


# ------------------------------------------------------------------ files


def basis_to_bytes(basis):
    return (
        struct.pack("<4sII", BASIS_MAGIC, basis.n_bands, basis.k)
        + np.asarray(basis.E, dtype="<f8").tobytes(order="F")
    )


def basis_from_bytes(buf):
    if len(buf) < 12:
        raise LengthError("file too short for HSIE header")
    magic, n_bands, k = struct.unpack_from("<4sII", buf)
    if magic != BASIS_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {BASIS_MAGIC!r}")
    if len(buf) - 12 != 8 * n_bands * k:
        raise LengthError(f"payload is {len(buf) - 12} bytes, header implies {8 * n_bands * k}")
    e = np.frombuffer(buf, dtype="<f8", offset=12).reshape((n_bands, k), order="F")
    if not np.all(np.isfinite(e)):
        raise DataError("basis contains non-finite values")
    return SubspaceBasis(e)


def noise_to_bytes(noise):
    head = struct.pack("<4sB", NOISE_MAGIC, noise.kind)
    if isinstance(noise, IidNoise):
        body = np.array([noise.sigma], dtype="<f8")
    elif isinstance(noise, DiagonalNoise):
        body = np.asarray(noise.variances, dtype="<f8")
    else:
        body = np.asarray(noise.cov, dtype="<f8").ravel(order="F")
    return head + body.tobytes()


def noise_from_bytes(buf):
    if len(buf) < 5:
        raise LengthError("file too short for HSIN header")
    magic, kind = struct.unpack_from("<4sB", buf)
    if magic != NOISE_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {NOISE_MAGIC!r}")
    if (len(buf) - 5) % 8:
        raise LengthError("HSIN payload is not a whole number of f64 values")
    vals = np.frombuffer(buf, dtype="<f8", offset=5)
    if not np.all(np.isfinite(vals)):
        raise DataError("noise payload contains non-finite values")
    if kind == 0:
        if vals.size != 1:
            raise LengthError(f"iid noise payload must hold 1 value, got {vals.size}")
        return IidNoise(float(vals[0]))
    if kind == 1:
        if vals.size == 0:
            raise LengthError("empty diagonal noise payload")
        return DiagonalNoise(vals)
    if kind == 2:
        n_bands = int(round(np.sqrt(vals.size)))
        if n_bands == 0 or n_bands * n_bands != vals.size:
            raise LengthError(f"full noise payload of {vals.size} values is not square")
        return FullNoise(vals.reshape((n_bands, n_bands), order="F"))
    raise FormatError(f"unknown noise kind {kind}")


def save_basis(basis, path):
    Path(path).write_bytes(basis_to_bytes(basis))


def load_basis(path):
    return basis_from_bytes(Path(path).read_bytes())


def save_noise(noise, path):
    Path(path).write_bytes(noise_to_bytes(noise))


def load_noise(path):
    return noise_from_bytes(Path(path).read_bytes())
