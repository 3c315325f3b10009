"""Hyperspectral cubes, observation masks, band normalization and binary I/O.

Cubes are stored band-sequential: ``data[b, r, c]``.  The matrix view used by
the linear algebra is ``n_bands x n_pixels`` with pixel index ``r * width + c``.

File layouts (all little-endian):

HSIC  ``b"HSIC" u32 version=1 u32 width u32 height u32 n_bands u8 dtype 3x00``
      followed by the BSQ payload (dtype 0 = f32, 1 = f64).
HSIM  ``b"HSIM" u32 version=1 u32 width u32 height u32 n_bands`` followed by
      one bit per (band, row, col) in C order, LSB first, zero padded.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DataError, DegenerateBandError, FormatError, LengthError, ShapeError

CUBE_MAGIC = b"HSIC"
MASK_MAGIC = b"HSIM"
FORMAT_VERSION = 1

_CUBE_HEADER = struct.Struct("<4sIIIIB3s")
_MASK_HEADER = struct.Struct("<4sIIII")
_DTYPES = {0: ("f32", np.dtype("<f4")), 1: ("f64", np.dtype("<f8"))}
_DTYPE_CODES = {"f32": 0, "f64": 1}


def _frozen(a):
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class HsiCube:
    """A hyperspectral cube of shape ``(n_bands, height, width)``.

    ``dtype`` only records the on-disk precision ("f32" or "f64"); values are
    always held as float64.
    """

    data: np.ndarray
    dtype: str = "f64"

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64)
        if data.ndim != 3:
            raise ShapeError(f"cube data must be 3-D (bands, rows, cols), got {data.shape}")
        if min(data.shape) == 0:
            raise ShapeError(f"cube has an empty dimension: {data.shape}")
        if not np.all(np.isfinite(data)):
            raise DataError("cube contains non-finite values")
        if self.dtype not in _DTYPE_CODES:
            raise FormatError(f"unknown dtype {self.dtype!r}")
        object.__setattr__(self, "data", _frozen(data))

    @classmethod
    def from_matrix(cls, matrix, height, width, dtype="f64"):
        matrix = np.asarray(matrix, dtype=np.float64)
        return cls(matrix.reshape(matrix.shape[0], height, width), dtype=dtype)

    @property
    def n_bands(self):
        return self.data.shape[0]

    @property
    def height(self):
        return self.data.shape[1]

    @property
    def width(self):
        return self.data.shape[2]

    @property
    def n_pixels(self):
        return self.height * self.width

    @property
    def shape(self):
        return self.data.shape

    @property
    def matrix(self):
        """Read-only ``n_bands x n_pixels`` view."""
        return self.data.reshape(self.n_bands, self.n_pixels)

    def with_matrix(self, matrix):
        return HsiCube.from_matrix(matrix, self.height, self.width, dtype=self.dtype)

    def with_data(self, data):
        return HsiCube(data, dtype=self.dtype)


@dataclass(frozen=True, eq=False)
class ObservationMask:
    """Per-(band, row, col) observation flags; True means observed."""

    bits: np.ndarray

    def __post_init__(self):
        bits = np.array(self.bits, dtype=bool)
        if bits.ndim != 3:
            raise ShapeError(f"mask must be 3-D (bands, rows, cols), got {bits.shape}")
        if min(bits.shape) == 0:
            raise ShapeError(f"mask has an empty dimension: {bits.shape}")
        object.__setattr__(self, "bits", _frozen(bits))

    @classmethod
    def full(cls, shape):
        return cls(np.ones(shape, dtype=bool))

    @property
    def shape(self):
        return self.bits.shape

    @property
    def n_bands(self):
        return self.bits.shape[0]

    @property
    def matrix(self):
        return self.bits.reshape(self.bits.shape[0], -1)

    def observed_counts(self):
        """Number of observed bands at each pixel (flattened raster order)."""
        return self.matrix.sum(axis=0)

    def complete_pixels(self):
        return self.matrix.all(axis=0)

    def check_matches(self, cube):
        if self.shape != cube.shape:
            raise ShapeError(f"mask shape {self.shape} does not match cube shape {cube.shape}")


@dataclass(frozen=True, eq=False)
class BandScaling:
    mins: np.ndarray
    maxs: np.ndarray

    def __post_init__(self):
        mins = np.array(self.mins, dtype=np.float64).ravel()
        maxs = np.array(self.maxs, dtype=np.float64).ravel()
        if mins.shape != maxs.shape:
            raise ShapeError("mins and maxs must have the same length")
        bad = np.flatnonzero(~(maxs > mins))
        if bad.size:
            raise DegenerateBandError(int(bad[0]))
        object.__setattr__(self, "mins", _frozen(mins))
        object.__setattr__(self, "maxs", _frozen(maxs))

    @property
    def n_bands(self):
        return self.mins.size


def normalize_bands(cube):
    """Map every band affinely onto [0, 1] and return the scaling used."""
    m = cube.matrix
    lo, hi = m.min(axis=1), m.max(axis=1)
    bad = np.flatnonzero(~(hi > lo))
    if bad.size:
        raise DegenerateBandError(int(bad[0]))
    scaling = BandScaling(lo, hi)
    out = (m - lo[:, None]) / (hi - lo)[:, None]
    return cube.with_matrix(out), scaling


def denormalize_bands(cube, scaling):
    if scaling.n_bands != cube.n_bands:
        raise ShapeError(f"scaling has {scaling.n_bands} bands, cube has {cube.n_bands}")
    lo, hi = scaling.mins[:, None], scaling.maxs[:, None]
    return cube.with_matrix(cube.matrix * (hi - lo) + lo)


# ---------------------------------------------------------------- file I/O


def cube_to_bytes(cube):
    code = _DTYPE_CODES[cube.dtype]
    header = _CUBE_HEADER.pack(
        CUBE_MAGIC, FORMAT_VERSION, cube.width, cube.height, cube.n_bands, code, b"\0\0\0"
    )
    payload = np.ascontiguousarray(cube.data, dtype=_DTYPES[code][1]).tobytes()
    return header + payload


def cube_from_bytes(buf):
    if len(buf) < _CUBE_HEADER.size:
        raise LengthError(f"file too short for HSIC header ({len(buf)} bytes)")
    magic, version, width, height, n_bands, code, reserved = _CUBE_HEADER.unpack_from(buf)
    if magic != CUBE_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {CUBE_MAGIC!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported HSIC version {version}")
    if code not in _DTYPES:
        raise FormatError(f"unknown dtype code {code}")
    if reserved != b"\0\0\0":
        raise FormatError("reserved header bytes must be zero")
    if min(width, height, n_bands) == 0:
        raise FormatError("HSIC header declares an empty dimension")
    name, dt = _DTYPES[code]
    expected = width * height * n_bands * dt.itemsize
    got = len(buf) - _CUBE_HEADER.size
    if got != expected:
        raise LengthError(f"payload is {got} bytes, header implies {expected}")
    values = np.frombuffer(buf, dtype=dt, offset=_CUBE_HEADER.size)
    if not np.all(np.isfinite(values)):
        raise DataError("payload contains NaN or Inf")
    return HsiCube(values.reshape(n_bands, height, width), dtype=name)


def save_cube(cube, path):
    if not isinstance(cube, HsiCube):
        raise TypeError("save_cube expects an HsiCube")
    Path(path).write_bytes(cube_to_bytes(cube))


def load_cube(path):
    return cube_from_bytes(Path(path).read_bytes())


def mask_to_bytes(mask):
    n_bands, height, width = mask.shape
    header = _MASK_HEADER.pack(MASK_MAGIC, FORMAT_VERSION, width, height, n_bands)
    return header + np.packbits(mask.bits.ravel(), bitorder="little").tobytes()


def mask_from_bytes(buf):
    if len(buf) < _MASK_HEADER.size:
        raise LengthError(f"file too short for HSIM header ({len(buf)} bytes)")
    magic, version, width, height, n_bands = _MASK_HEADER.unpack_from(buf)
    if magic != MASK_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {MASK_MAGIC!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported HSIM version {version}")
    if min(width, height, n_bands) == 0:
        raise FormatError("HSIM header declares an empty dimension")
    count = width * height * n_bands
    expected = (count + 7) // 8
    payload = np.frombuffer(buf, dtype=np.uint8, offset=_MASK_HEADER.size)
    if payload.size != expected:
        raise LengthError(f"payload is {payload.size} bytes, header implies {expected}")
    bits = np.unpackbits(payload, bitorder="little")
    if bits[count:].any():
        raise FormatError("padding bits must be zero")
    return ObservationMask(bits[:count].astype(bool).reshape(n_bands, height, width))


def save_mask(mask, path):
    Path(path).write_bytes(mask_to_bytes(mask))


def load_mask(path):
    return mask_from_bytes(Path(path).read_bytes())
