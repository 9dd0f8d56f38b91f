"""Hybrid Fourier features.

A face crop is transformed with a 2-D DFT and described in three domains:
raw real/imaginary parts (RI), magnitude spectrum, and cosine of the phase
angle. Each domain is sampled over three nested centered frequency bands and
the pieces are concatenated into one flat feature vector with a recorded
layout, so vectors from different images are positionally comparable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from faceverify.imgcore import as_image

PHASE_EPS = 1e-12


@dataclass(frozen=True)
class ComplexSpectrum:
    """Centered 2-D DFT of a real image: DC sits at (H//2, W//2)."""

    re: np.ndarray
    im: np.ndarray
    width: int
    height: int


@dataclass(frozen=True)
class BandSpec:
    """Centered frequency band: keep the fraction*H by fraction*W rectangle
    (sizes rounded up) around the DC position."""

    name: str
    fraction: float

    def __post_init__(self):
        if not 0.0 < self.fraction <= 1.0:
            raise ValueError(f"band fraction must be in (0, 1], got {self.fraction}")


DEFAULT_BANDS = (
    BandSpec("B1", 0.25),
    BandSpec("B2", 0.50),
    BandSpec("B3", 0.75),
)


@dataclass(frozen=True)
class FeatureVector:
    """Flat feature values plus the (domain, band, length) segment layout."""

    values: np.ndarray
    layout: tuple[tuple[str, str, int], ...]

    def __post_init__(self):
        total = sum(length for _, _, length in self.layout)
        if total != self.values.size:
            raise ValueError(
                f"layout covers {total} values but vector has {self.values.size}"
            )
        if not np.all(np.isfinite(self.values)):
            raise ValueError("feature vector contains non-finite values")


def dft2(img: np.ndarray) -> ComplexSpectrum:
    """Unnormalized forward 2-D DFT with quadrants swapped so DC is central."""
    img = as_image(img)
    f = np.fft.fftshift(np.fft.fft2(img))
    h, w = img.shape
    return ComplexSpectrum(re=f.real.copy(), im=f.imag.copy(), width=w, height=h)


def spectrum(s: ComplexSpectrum) -> np.ndarray:
    """Magnitude sqrt(re^2 + im^2), elementwise."""
    return np.hypot(s.re, s.im)


def phase_cos(s: ComplexSpectrum, eps: float = PHASE_EPS) -> np.ndarray:
    """Cosine of the phase angle as re / max(|F|, eps).

    Using the cosine rather than the angle itself avoids the wrap-around at
    2*pi. Coefficients with magnitude below eps give 0.
    """
    if eps <= 0:
        raise ValueError("eps must be > 0")
    mag = np.hypot(s.re, s.im)
    out = s.re / np.maximum(mag, eps)
    out[mag < eps] = 0.0
    return out


def ri_domain(s: ComplexSpectrum) -> tuple[np.ndarray, np.ndarray]:
    """The (re, im) pair, unchanged, for band selection."""
    return s.re, s.im


def band_select(m: np.ndarray, band: BandSpec) -> np.ndarray:
    """Flatten (row-major) the centered band rectangle of m.

    The rectangle is ceil(fraction*H) by ceil(fraction*W), positioned so its
    size//2 offset lands on the DC index (H//2, W//2); bands with growing
    fractions select nested index sets.
    """
    m = np.asarray(m, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError("band_select expects a 2-D matrix")
    h, w = m.shape
    bh = int(np.ceil(band.fraction * h))
    bw = int(np.ceil(band.fraction * w))
    if bh < 1 or bw < 1:
        raise ValueError(f"band {band.name} selects an empty rectangle on {h}x{w}")
    r0 = h // 2 - bh // 2
    c0 = w // 2 - bw // 2
    return m[r0 : r0 + bh, c0 : c0 + bw].ravel().copy()


def _check_bands(bands) -> tuple[BandSpec, BandSpec, BandSpec]:
    bands = tuple(bands)
    if len(bands) != 3:
        raise ValueError(f"expected exactly 3 bands, got {len(bands)}")
    fr = [b.fraction for b in bands]
    if not (fr[0] < fr[1] < fr[2]):
        raise ValueError(f"band fractions must strictly increase, got {fr}")
    return bands


def extract_features(
    img: np.ndarray,
    bands=DEFAULT_BANDS,
    eps: float = PHASE_EPS,
) -> FeatureVector:
    """Concatenate banded RI, spectrum, and cosine-phase features.

    Segment order is fixed: re/im interleaved per band over the three bands,
    then spectrum over the three bands, then cosine phase over the three
    bands. Standardization happens downstream in the subspace stage, not
    here.
    """
    bands = _check_bands(bands)
    s = dft2(img)
    re, im = ri_domain(s)
    gamma = spectrum(s)
    phi = phase_cos(s, eps)

    pieces: list[np.ndarray] = []
    layout: list[tuple[str, str, int]] = []
    for band in bands:
        for domain, matrix in (("re", re), ("im", im)):
            v = band_select(matrix, band)
            pieces.append(v)
            layout.append((domain, band.name, v.size))
    for domain, matrix in (("spectrum", gamma), ("phase", phi)):
        for band in bands:
            v = band_select(matrix, band)
            pieces.append(v)
            layout.append((domain, band.name, v.size))
    return FeatureVector(values=np.concatenate(pieces), layout=tuple(layout))


def feature_layout(height: int, width: int, bands=DEFAULT_BANDS):
    """Layout for a given image size without touching pixel data."""
    bands = _check_bands(bands)
    probe = np.zeros((height, width))
    layout: list[tuple[str, str, int]] = []
    for band in bands:
        n = band_select(probe, band).size
        layout.append(("re", band.name, n))
        layout.append(("im", band.name, n))
    for domain in ("spectrum", "phase"):
        for band in bands:
            n = band_select(probe, band).size
            layout.append((domain, band.name, n))
    return tuple(layout)
