"""Single-band patch denoisers used on eigen-images.

Three interchangeable kinds sit behind :func:`denoise_band`:

``identity``  returns the input.
``nlmeans``   pixelwise non-local means with a debiased patch distance.
``bm3d``      the hard-threshold stage of block-matching collaborative
              filtering: block matching, separable 2-D DCT + 1-D Haar
              transform of each group, hard thresholding, and weighted
              aggregation.

``sigma`` is always the noise standard deviation in the image's own units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.fft import dct
from scipy.ndimage import uniform_filter

from .errors import DataError, ShapeError

KINDS = ("identity", "nlmeans", "bm3d")


def _is_pow2(m):
    return m >= 1 and (m & (m - 1)) == 0


@dataclass(frozen=True)
class DenoiserSpec:
    """Parameters of a plug-in denoiser.

    ``threshold`` is the hard-threshold multiple of sigma (bm3d);
    ``h_factor`` sets the NL-means bandwidth ``h = h_factor * sigma * patch_size``,
    applied to the summed squared patch difference.
    """

    kind: str = "bm3d"
    patch_size: int = 4
    step: int = 3
    search_window: int = 11
    max_group_size: int = 16
    threshold: float = 2.7
    h_factor: float = 0.4

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown denoiser kind {self.kind!r}; expected one of {KINDS}")
        if self.patch_size < 2:
            raise ValueError("patch_size must be >= 2")
        if self.step < 1:
            raise ValueError("step must be >= 1")
        if self.search_window < self.patch_size:
            raise ValueError("search_window must be >= patch_size")
        if not _is_pow2(self.max_group_size):
            raise ValueError("max_group_size must be a power of two")

    @classmethod
    def bm3d(cls, **kw):
        return cls(kind="bm3d", **kw)

    @classmethod
    def nlmeans(cls, **kw):
        kw.setdefault("patch_size", 5)
        kw.setdefault("step", 1)
        return cls(kind="nlmeans", **kw)

    @classmethod
    def identity(cls):
        return cls(kind="identity")

    @property
    def search_radius(self):
        return self.search_window // 2


@dataclass(frozen=True, eq=False)
class FilteredGroup:
    patches: np.ndarray  # (m, p, p)
    positions: np.ndarray  # (m, 2) top-left (row, col)
    retained: int


# ------------------------------------------------------------- transforms


def dct_matrix(n):
    """Orthonormal DCT-II matrix; ``T @ x`` transforms the columns of x."""
    return dct(np.eye(n), norm="ortho", axis=0)


def haar_matrix(m):
    """Orthonormal multi-level Haar matrix of size m (a power of two)."""
    if not _is_pow2(m):
        raise ValueError(f"Haar transform needs a power-of-two size, got {m}")
    h = np.ones((1, 1))
    while h.shape[0] < m:
        n = h.shape[0]
        h = np.vstack([np.kron(h, [1.0, 1.0]), np.kron(np.eye(n), [1.0, -1.0])]) / np.sqrt(2.0)
    return h


def _forward(groups, t, h):
    y = np.einsum("ai,gmij,bj->gmab", t, groups, t, optimize=True)
    return np.einsum("km,gmab->gkab", h, y, optimize=True)


def _inverse(coef, t, h):
    y = np.einsum("km,gkab->gmab", h, coef, optimize=True)
    return np.einsum("ai,gmab,bj->gmij", t, y, t, optimize=True)


def _hard_threshold(groups, sigma, threshold):
    """Filter a batch of same-size groups; returns (filtered, retained counts)."""
    m, p = groups.shape[1], groups.shape[2]
    t, h = dct_matrix(p), haar_matrix(m)
    coef = _forward(groups, t, h)
    keep = np.abs(coef) >= threshold * sigma
    keep[:, 0, 0, 0] = True
    coef = np.where(keep, coef, 0.0)
    retained = np.count_nonzero(coef.reshape(coef.shape[0], -1), axis=1)
    return _inverse(coef, t, h), retained


def collaborative_filter_group(group, sigma, threshold=2.7):
    """Hard-threshold one group of patches in the 3-D transform domain.

    The group DC coefficient is never zeroed.  Returns the filtered stack and
    the number of non-zero coefficients left.
    """
    group = np.asarray(group, dtype=np.float64)
    if group.ndim != 3 or group.shape[1] != group.shape[2]:
        raise ShapeError(f"group must be (m, p, p), got {group.shape}")
    if not _is_pow2(group.shape[0]):
        raise ValueError(f"group size must be a power of two, got {group.shape[0]}")
    out, retained = _hard_threshold(group[None], sigma, threshold)
    return out[0], int(retained[0])


# --------------------------------------------------------- block matching


def reference_grid(n, patch, step):
    """Reference coordinates along one axis; always includes the last position."""
    return np.unique(np.r_[np.arange(0, n - patch + 1, step), n - patch])


def _candidate_offsets(radius):
    d = np.arange(-radius, radius + 1)
    dy, dx = np.meshgrid(d, d, indexing="ij")
    return dy.ravel(), dx.ravel()


def _match(image, refs, spec):
    """Vectorized block matching for an array of reference positions.

    Returns candidate positions ``(n_ref, n_cand, 2)`` sorted by distance
    (reference first, ties in row-major order), the sorted distances, and the
    number of valid candidates per reference.
    """
    p = spec.patch_size
    rows, cols = image.shape[0] - p + 1, image.shape[1] - p + 1
    patches = sliding_window_view(image, (p, p)).reshape(rows * cols, p * p)
    dy, dx = _candidate_offsets(spec.search_radius)
    cr = refs[:, 0:1] + dy
    cc = refs[:, 1:2] + dx
    valid = (cr >= 0) & (cr < rows) & (cc >= 0) & (cc < cols)
    flat = np.clip(cr, 0, rows - 1) * cols + np.clip(cc, 0, cols - 1)
    ref_flat = refs[:, 0] * cols + refs[:, 1]
    dist = ((patches[flat] - patches[ref_flat][:, None, :]) ** 2).mean(axis=2)
    dist[~valid] = np.inf
    key = dist.copy()
    key[:, np.flatnonzero((dy == 0) & (dx == 0))] = -np.inf
    order = np.argsort(key, axis=1, kind="stable")
    take = np.take_along_axis
    pos = np.stack([take(cr, order, 1), take(cc, order, 1)], axis=2)
    return pos, take(dist, order, 1), valid.sum(axis=1)


def _group_size(n_valid, max_group):
    n = np.minimum(n_valid, max_group)
    return 1 << (np.floor(np.log2(n)).astype(int))


def block_match(image, ref_position, spec):
    """Positions of the patches grouped with the reference patch.

    Candidates are the patch positions within ``search_window`` of the
    reference; they are ranked by mean squared patch distance (reference
    first, ties row-major) and cut to a power of two <= ``max_group_size``.
    """
    image = np.asarray(image, dtype=np.float64)
    p = spec.patch_size
    r, c = ref_position
    if not (0 <= r <= image.shape[0] - p and 0 <= c <= image.shape[1] - p):
        raise IndexError(f"reference position {ref_position} out of bounds")
    pos, _, n_valid = _match(image, np.array([[r, c]]), spec)
    m = int(_group_size(n_valid, spec.max_group_size)[0])
    return [tuple(map(int, q)) for q in pos[0, :m]]


# ------------------------------------------------------------ aggregation


def _pixel_index(positions, p, width):
    a = np.arange(p)
    rows = positions[..., 0, None, None] + a[:, None]
    cols = positions[..., 1, None, None] + a[None, :]
    return rows * width + cols


def _accumulate(num, den, patches, positions, weights, width):
    """Add weighted patch estimates into flat accumulators (fixed order)."""
    p = patches.shape[-1]
    idx = _pixel_index(positions, p, width)
    w = np.broadcast_to(weights.reshape(weights.shape + (1,) * (idx.ndim - weights.ndim)), idx.shape)
    np.add.at(num, idx.ravel(), (patches * w).ravel())
    np.add.at(den, idx.ravel(), w.ravel())


def _finish(num, den, shape):
    if np.any(den <= 0):
        raise RuntimeError("aggregation left pixels uncovered by any patch")
    return (num / den).reshape(shape)


def aggregate(groups, shape):
    """Weighted average of patch estimates; group weight is 1/max(retained, 1)."""
    height, width = shape
    num = np.zeros(height * width)
    den = np.zeros(height * width)
    for g in groups:
        weight = np.array([1.0 / max(g.retained, 1)])
        _accumulate(
            num,
            den,
            np.asarray(g.patches, dtype=np.float64)[None],
            np.asarray(g.positions, dtype=np.intp)[None],
            weight,
            width,
        )
    return _finish(num, den, shape)


# ------------------------------------------------------------- denoisers


def _bm3d(image, sigma, spec):
    p = spec.patch_size
    height, width = image.shape
    gr = reference_grid(height, p, spec.step)
    gc = reference_grid(width, p, spec.step)
    refs = np.stack(np.meshgrid(gr, gc, indexing="ij"), axis=-1).reshape(-1, 2)
    pos, _, n_valid = _match(image, refs, spec)
    sizes = _group_size(n_valid, spec.max_group_size)
    windows = sliding_window_view(image, (p, p))

    num = np.zeros(height * width)
    den = np.zeros(height * width)
    for m in np.unique(sizes):
        sel = np.flatnonzero(sizes == m)
        gpos = pos[sel, :m]
        groups = windows[gpos[..., 0], gpos[..., 1]]
        filtered, retained = _hard_threshold(groups, sigma, spec.threshold)
        weights = 1.0 / np.maximum(retained, 1)
        _accumulate(num, den, filtered, gpos, weights, width)
    return _finish(num, den, image.shape)


def _nlmeans(image, sigma, spec):
    p = spec.patch_size
    half = p // 2
    radius = spec.search_radius
    height, width = image.shape
    h2 = (spec.h_factor * sigma * p) ** 2
    pad = radius + half
    padded = np.pad(image, pad, mode="symmetric")
    core = padded[radius : radius + height + 2 * half, radius : radius + width + 2 * half]
    num = np.zeros_like(image)
    den = np.zeros_like(image)
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            shifted = padded[
                radius + dy : radius + dy + height + 2 * half,
                radius + dx : radius + dx + width + 2 * half,
            ]
            d2 = uniform_filter((core - shifted) ** 2, size=p, mode="constant")
            # summed patch distance, debiased by its noise expectation 2 sigma^2 p^2
            d2 = d2[half : half + height, half : half + width] * p * p
            w = np.exp(-np.maximum(d2 - 2.0 * sigma**2 * p * p, 0.0) / h2)
            num += w * shifted[half : half + height, half : half + width]
            den += w
    return num / den


def denoise_band(image, sigma, spec=None):
    """Denoise one 2-D image corrupted by white Gaussian noise of std ``sigma``."""
    spec = spec or DenoiserSpec()
    image = np.asarray(image, dtype=np.float64)
    if image.ndim != 2:
        raise ShapeError(f"expected a 2-D image, got shape {image.shape}")
    if not np.all(np.isfinite(image)):
        raise DataError("image contains non-finite values")
    if not sigma >= 0:
        raise ValueError(f"sigma must be >= 0, got {sigma}")
    if spec.kind == "identity":
        return image.copy()
    if min(image.shape) < spec.patch_size:
        raise ShapeError(f"image {image.shape} is smaller than one {spec.patch_size}x{spec.patch_size} patch")
    if spec.kind == "nlmeans":
        if sigma == 0:
            return image.copy()
        return _nlmeans(image, sigma, spec)
    return _bm3d(image, sigma, spec)
