"""Per-band image quality metrics and their CSV form."""

from __future__ import annotations

import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.ndimage import correlate

from .errors import FormatError, ShapeError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
K1, K2 = 0.01, 0.03


def psnr_band(ref, test, peak=1.0):
    """PSNR in dB; ``math.inf`` when the images are identical."""
    ref = np.asarray(ref, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if ref.shape != test.shape:
        raise ShapeError(f"shape mismatch {ref.shape} vs {test.shape}")
    mse = np.mean((ref - test) ** 2)
    if mse == 0:
        return math.inf
    return float(10.0 * np.log10(peak**2 / mse))


def gaussian_window(size=SSIM_WINDOW, sigma=SSIM_SIGMA):
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x**2) / (2.0 * sigma**2))
    w = np.outer(g, g)
    return w / w.sum()


def ssim_map(ref, test, peak=1.0):
    """Local SSIM at every pixel; borders use half-sample symmetric extension."""
    ref = np.asarray(ref, dtype=np.float64)
    test = np.asarray(test, dtype=np.float64)
    if ref.shape != test.shape:
        raise ShapeError(f"shape mismatch {ref.shape} vs {test.shape}")
    w = gaussian_window()

    def blur(a):
        return correlate(a, w, mode="reflect")

    mu_x, mu_y = blur(ref), blur(test)
    sxx = blur(ref * ref) - mu_x**2
    syy = blur(test * test) - mu_y**2
    sxy = blur(ref * test) - mu_x * mu_y
    c1, c2 = (K1 * peak) ** 2, (K2 * peak) ** 2
    num = (2 * mu_x * mu_y + c1) * (2 * sxy + c2)
    den = (mu_x**2 + mu_y**2 + c1) * (sxx + syy + c2)
    return num / den


def ssim_band(ref, test, peak=1.0):
    """Mean local SSIM (11x11 Gaussian window, std 1.5)."""
    return float(ssim_map(ref, test, peak).mean())


@dataclass(frozen=True, eq=False)
class QualityReport:
    """Per-band metrics; the means default to the arithmetic band means.

    Explicit means are only passed when parsing a CSV, where the footer
    carries its own rounded values.
    """

    psnr: np.ndarray
    ssim: np.ndarray
    mpsnr: float | None = None
    mssim: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "psnr", np.asarray(self.psnr, dtype=np.float64))
        object.__setattr__(self, "ssim", np.asarray(self.ssim, dtype=np.float64))
        if self.psnr.shape != self.ssim.shape or self.psnr.ndim != 1:
            raise ShapeError("psnr and ssim must be equal-length vectors")
        if self.mpsnr is None:
            object.__setattr__(self, "mpsnr", float(np.mean(self.psnr)))
        if self.mssim is None:
            object.__setattr__(self, "mssim", float(np.mean(self.ssim)))

    @property
    def n_bands(self):
        return len(self.psnr)

    def to_csv(self):
        buf = io.StringIO()
        buf.write("band,psnr_db,ssim\n")
        for b, (p, s) in enumerate(zip(self.psnr, self.ssim)):
            buf.write(f"{b},{_fmt(p)},{_fmt(s)}\n")
        buf.write(f"mpsnr,{_fmt(self.mpsnr)}\n")
        buf.write(f"mssim,{_fmt(self.mssim)}\n")
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text):
        """Parse the CSV form written by :meth:`to_csv`."""
        lines = [ln for ln in text.splitlines() if ln.strip()]
        if not lines or lines[0].strip() != "band,psnr_db,ssim":
            raise FormatError("missing report header 'band,psnr_db,ssim'")
        psnr, ssim, footer = [], [], {}
        for ln in lines[1:]:
            parts = ln.split(",")
            if len(parts) == 2 and parts[0] in ("mpsnr", "mssim"):
                footer[parts[0]] = float(parts[1])
            elif len(parts) == 3:
                if int(parts[0]) != len(psnr):
                    raise FormatError(f"band rows out of order at {ln!r}")
                psnr.append(float(parts[1]))
                ssim.append(float(parts[2]))
            else:
                raise FormatError(f"malformed report row {ln!r}")
        if set(footer) != {"mpsnr", "mssim"}:
            raise FormatError("report must end with mpsnr and mssim rows")
        return cls(np.array(psnr), np.array(ssim), footer["mpsnr"], footer["mssim"])


def _fmt(v):
    return "inf" if v == math.inf else f"{v:.6f}"


def report(ref, test, peak=1.0):
    """Per-band PSNR/SSIM of ``test`` against ``ref``.

    ``peak=None`` uses each reference band's dynamic range.
    """
    if ref.shape != test.shape:
        raise ShapeError(f"cube shapes differ: {ref.shape} vs {test.shape}")
    psnr, ssim = [], []
    for a, b in zip(ref.data, test.data):
        pk = float(a.max() - a.min()) if peak is None else peak
        psnr.append(psnr_band(a, b, pk))
        ssim.append(ssim_band(a, b, pk))
    return QualityReport(np.array(psnr), np.array(ssim))


def save_report(rep, path):
    with open(path, "w", encoding="utf-8") as f:
        f.write(rep.to_csv())


def load_report(path):
    with open(path, encoding="utf-8") as f:
        return QualityReport.from_csv(f.read())
