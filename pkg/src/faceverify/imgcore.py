"""Grayscale image core: representation, geometric eye alignment, histogram
equalization, Gaussian smoothing, and 8-bit PGM/PNG I/O.

Images are 2-D float64 arrays indexed (row, col). Files load into [0, 1];
processing stages may leave that range and say so where they do.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from scipy.ndimage import correlate1d


def as_image(pixels) -> np.ndarray:
    """Validate and return a 2-D float64 image array.

    Raises ValueError for wrong dimensionality, empty axes, or non-finite
    pixels.
    """
    img = np.asarray(pixels, dtype=np.float64)
    if img.ndim != 2:
        raise ValueError(f"image must be 2-D, got shape {img.shape}")
    if img.shape[0] < 1 or img.shape[1] < 1:
        raise ValueError(f"image must be at least 1x1, got shape {img.shape}")
    if not np.all(np.isfinite(img)):
        raise ValueError("image contains non-finite pixels")
    return img


@dataclass(frozen=True)
class EyePair:
    """Subpixel eye centers as (row, col) pairs; left means lower column."""

    left: tuple[float, float]
    right: tuple[float, float]

    def validate(self, height: int, width: int) -> None:
        lr, lc = self.left
        rr, rc = self.right
        for name, (r, c) in (("left", self.left), ("right", self.right)):
            if not (np.isfinite(r) and np.isfinite(c)):
                raise ValueError(f"{name} eye coordinate is not finite")
            if not (0.0 <= r <= height - 1 and 0.0 <= c <= width - 1):
                raise ValueError(
                    f"{name} eye ({r}, {c}) outside image bounds {height}x{width}"
                )
        if lr == rr and lc == rc:
            raise ValueError("eye centers coincide")
        if not lc < rc:
            raise ValueError(
                f"left eye column {lc} must be strictly left of right eye column {rc}"
            )


@dataclass(frozen=True)
class FaceModelConfig:
    """One geometric normalization target: crop size and eye placement."""

    eye_distance: float
    out_width: int
    out_height: int
    eye_row: float
    eye_center_col: float

    def __post_init__(self):
        if self.out_width < 1 or self.out_height < 1:
            raise ValueError("output crop must be at least 1x1")
        if not 0 < self.eye_distance < self.out_width:
            raise ValueError(
                f"eye_distance {self.eye_distance} must lie in (0, {self.out_width})"
            )
        if not 0 <= self.eye_row <= self.out_height - 1:
            raise ValueError(f"eye_row {self.eye_row} outside crop")
        half = self.eye_distance / 2.0
        if self.eye_center_col - half < 0 or self.eye_center_col + half > self.out_width - 1:
            raise ValueError("eye placement extends outside crop")

    @property
    def target_left(self) -> tuple[float, float]:
        return (self.eye_row, self.eye_center_col - self.eye_distance / 2.0)

    @property
    def target_right(self) -> tuple[float, float]:
        return (self.eye_row, self.eye_center_col + self.eye_distance / 2.0)


# Three-model default: center model plus +/-25% eye distance on a 64x80 crop.
DEFAULT_FACE_MODELS = (
    FaceModelConfig(eye_distance=24, out_width=64, out_height=80, eye_row=28.0, eye_center_col=32.0),
    FaceModelConfig(eye_distance=32, out_width=64, out_height=80, eye_row=28.0, eye_center_col=32.0),
    FaceModelConfig(eye_distance=40, out_width=64, out_height=80, eye_row=28.0, eye_center_col=32.0),
)


def bilinear_sample(img: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Sample img at subpixel (rows, cols); out-of-source positions give 0."""
    h, w = img.shape
    r0 = np.floor(rows).astype(np.int64)
    c0 = np.floor(cols).astype(np.int64)
    fr = rows - r0
    fc = cols - c0

    out = np.zeros(rows.shape, dtype=np.float64)
    # A sample is defined when all four corners are inside the source.
    valid = (r0 >= 0) & (r0 + 1 <= h - 1) & (c0 >= 0) & (c0 + 1 <= w - 1)
    # Exactly-on-last-row/col positions still interpolate from the last cell.
    edge_r = (rows == h - 1) & (cols >= 0) & (cols <= w - 1)
    edge_c = (cols == w - 1) & (rows >= 0) & (rows <= h - 1)
    valid |= edge_r & (c0 >= 0)
    valid |= edge_c & (r0 >= 0)

    rv = np.clip(r0[valid], 0, h - 2)
    cv = np.clip(c0[valid], 0, w - 2)
    frv = rows[valid] - rv
    fcv = cols[valid] - cv
    top = img[rv, cv] * (1 - fcv) + img[rv, cv + 1] * fcv
    bot = img[rv + 1, cv] * (1 - fcv) + img[rv + 1, cv + 1] * fcv
    out[valid] = top * (1 - frv) + bot * frv
    return out


def align(img: np.ndarray, eyes: EyePair, cfg: FaceModelConfig) -> np.ndarray:
    """Similarity-warp img so the eyes land on cfg's target positions.

    The transform (rotation, uniform scale, translation) is the unique
    similarity mapping the source eye pair onto the configured pair; output
    pixels are bilinearly resampled, positions outside the source fill with 0.
    """
    img = as_image(img)
    eyes.validate(*img.shape)

    # Complex-plane form: points as col + i*row, T(z) = a z + b.
    src_l = complex(eyes.left[1], eyes.left[0])
    src_r = complex(eyes.right[1], eyes.right[0])
    dst_l = complex(cfg.target_left[1], cfg.target_left[0])
    dst_r = complex(cfg.target_right[1], cfg.target_right[0])
    a = (dst_r - dst_l) / (src_r - src_l)
    b = dst_l - a * src_l

    rr, cc = np.meshgrid(
        np.arange(cfg.out_height, dtype=np.float64),
        np.arange(cfg.out_width, dtype=np.float64),
        indexing="ij",
    )
    z = cc + 1j * rr
    src = (z - b) / a
    return bilinear_sample(img, src.imag, src.real)


def histogram_equalize(img: np.ndarray) -> np.ndarray:
    """Map gray levels through the 256-bin empirical CDF.

    Input must lie in [0, 1]; output lies in [0, 1] and the level mapping is
    monotone non-decreasing.
    """
    img = as_image(img)
    if img.min() < 0.0 or img.max() > 1.0:
        raise ValueError("histogram_equalize expects pixels in [0, 1]")
    levels = np.rint(img * 255.0).astype(np.int64)
    hist = np.bincount(levels.ravel(), minlength=256)
    cdf = np.cumsum(hist) / img.size
    return cdf[levels]


def gaussian_kernel(sigma: float) -> np.ndarray:
    """1-D Gaussian truncated at radius ceil(3*sigma), renormalized to sum 1."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return np.array([1.0])
    radius = int(np.ceil(3.0 * sigma))
    x = np.arange(-radius, radius + 1, dtype=np.float64)
    k = np.exp(-0.5 * (x / sigma) ** 2)
    return k / k.sum()


def smooth(img: np.ndarray, sigma: float) -> np.ndarray:
    """Separable Gaussian blur with replicate borders; sigma=0 is identity."""
    img = as_image(img)
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return img.copy()
    k = gaussian_kernel(sigma)
    out = correlate1d(img, k, axis=0, mode="nearest")
    return correlate1d(out, k, axis=1, mode="nearest")


def read_image(path) -> np.ndarray:
    """Read an 8-bit grayscale PGM (P5) or PNG into [0, 1] float64."""
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"image file not found: {path}")
    if path.suffix.lower() == ".pgm":
        return _read_pgm(path)
    with PILImage.open(path) as im:
        if im.mode != "L":
            im = im.convert("L")
        arr = np.asarray(im, dtype=np.float64)
    return arr / 255.0


def write_image(path, img: np.ndarray) -> None:
    """Write img as 8-bit grayscale: round(clamp(v, 0, 1) * 255)."""
    path = Path(path)
    img = as_image(img)
    q = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    if path.suffix.lower() == ".pgm":
        _write_pgm(path, q)
    else:
        PILImage.fromarray(q, mode="L").save(path)


def _read_pgm(path: Path) -> np.ndarray:
    data = path.read_bytes()
    if not data.startswith(b"P5"):
        raise ValueError(f"{path}: not a binary PGM (P5) file")
    # Header: magic, width, height, maxval; '#' comments allowed between tokens.
    tokens = []
    pos = 2
    while len(tokens) < 3:
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos : pos + 1] == b"#":
            while pos < len(data) and data[pos : pos + 1] != b"\n":
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ValueError(f"{path}: truncated PGM header")
        tokens.append(data[start:pos])
    pos += 1  # single whitespace after maxval
    width, height, maxval = (int(t) for t in tokens)
    if maxval != 255:
        raise ValueError(f"{path}: only 8-bit PGM supported, maxval={maxval}")
    raster = np.frombuffer(data, dtype=np.uint8, count=width * height, offset=pos)
    if raster.size != width * height:
        raise ValueError(f"{path}: PGM raster shorter than {width}x{height}")
    return raster.reshape(height, width).astype(np.float64) / 255.0


def _write_pgm(path: Path, q: np.ndarray) -> None:
    header = f"P5\n{q.shape[1]} {q.shape[0]}\n255\n".encode("ascii")
    path.write_bytes(header + q.tobytes())
