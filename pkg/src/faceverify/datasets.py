"""Manifest ingestion and a deterministic synthetic dataset generator.

The generator realizes the multiplicative image model the rest of the
pipeline assumes: a per-subject reflectance pattern carrying mid/high
frequency texture (plus two dark eye blobs that define ground-truth eye
coordinates), multiplied per image by a smooth, strictly positive
illumination field, plus optional sensor noise. Everything is driven by one
seeded RNG, so a spec maps to exactly one dataset.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from faceverify.imgcore import EyePair, read_image, smooth, write_image

MANIFEST_COLUMNS = (
    "path",
    "subject_id",
    "session_tag",
    "left_eye_row",
    "left_eye_col",
    "right_eye_row",
    "right_eye_col",
)
SESSION_TAGS = ("controlled", "uncontrolled")


class ManifestError(RuntimeError):
    """A manifest file or one of its rows cannot be used."""


@dataclass(frozen=True)
class ManifestEntry:
    """One dataset image: pixels, identity, eye ground truth, session."""

    path: str
    subject_id: str
    session_tag: str
    eyes: EyePair
    image: np.ndarray


def load_manifest(path) -> list[ManifestEntry]:
    """Read a manifest CSV and load every referenced image.

    Relative image paths resolve against the manifest's directory. Rows are
    validated strictly; any malformed row is reported with its 1-based row
    number. Row order is preserved, and a path may appear more than once
    (each row is its own logical record).
    """
    path = Path(path)
    if not path.exists():
        raise ManifestError(f"manifest not found: {path}")
    base = path.parent
    entries: list[ManifestEntry] = []
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ManifestError(f"{path}: empty manifest") from None
        if tuple(header) != MANIFEST_COLUMNS:
            raise ManifestError(
                f"{path}: bad header {header!r}, expected {list(MANIFEST_COLUMNS)}"
            )
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(MANIFEST_COLUMNS):
                raise ManifestError(
                    f"{path} row {lineno}: expected {len(MANIFEST_COLUMNS)} columns, got {len(row)}"
                )
            rel, subject, session, *coords = row
            if session not in SESSION_TAGS:
                raise ManifestError(
                    f"{path} row {lineno}: session_tag must be one of {SESSION_TAGS}"
                )
            try:
                lr, lc, rr, rc = (float(c) for c in coords)
            except ValueError:
                raise ManifestError(
                    f"{path} row {lineno}: non-numeric eye coordinate in {coords}"
                ) from None
            img_path = Path(rel)
            if not img_path.is_absolute():
                img_path = base / img_path
            try:
                img = read_image(img_path)
            except (OSError, ValueError) as exc:
                raise ManifestError(f"{path} row {lineno}: {exc}") from exc
            eyes = EyePair(left=(lr, lc), right=(rr, rc))
            try:
                eyes.validate(*img.shape)
            except ValueError as exc:
                raise ManifestError(f"{path} row {lineno}: {exc}") from exc
            entries.append(
                ManifestEntry(
                    path=rel,
                    subject_id=subject,
                    session_tag=session,
                    eyes=eyes,
                    image=img,
                )
            )
    return entries


def write_manifest(path, rows) -> None:
    """Write manifest rows: (path, subject_id, session_tag, EyePair)."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(MANIFEST_COLUMNS)
        for rel, subject, session, eyes in rows:
            w.writerow(
                [
                    rel,
                    subject,
                    session,
                    repr(float(eyes.left[0])),
                    repr(float(eyes.left[1])),
                    repr(float(eyes.right[0])),
                    repr(float(eyes.right[1])),
                ]
            )


@dataclass(frozen=True)
class SynthSpec:
    """Parameters of one synthetic dataset."""

    seed: int = 0
    n_subjects: int = 8
    images_per_subject: int = 4
    width: int = 64
    height: int = 64
    illum_strength: float = 4.0
    noise_sigma: float = 0.01

    def __post_init__(self):
        if self.n_subjects < 1 or self.images_per_subject < 1:
            raise ValueError("counts must be >= 1")
        if self.width < 8 or self.height < 8:
            raise ValueError("images must be at least 8x8")
        if self.illum_strength < 1:
            raise ValueError("illum_strength must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")


def eye_positions(height: int, width: int) -> EyePair:
    """Canonical blob centers: row 0.35*H, columns 0.30*W and 0.70*W."""
    row = float(round(0.35 * height))
    return EyePair(
        left=(row, float(round(0.30 * width))),
        right=(row, float(round(0.70 * width))),
    )


def reflectance_pattern(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """Band-limited texture around 0.55 with two dark eye blobs.

    The texture is a difference of Gaussians of white noise, so its energy
    sits in the mid/high spatial frequencies while illumination fields stay
    low-frequency; that split is what the preprocessing relies on.
    """
    noise = rng.standard_normal((height, width))
    texture = smooth(noise, 1.0) - smooth(noise, 4.0)
    rms = float(np.sqrt(np.mean(texture**2)))
    if rms > 0:
        texture = texture / rms
    rho = 0.55 + 0.16 * texture

    eyes = eye_positions(height, width)
    rr, cc = np.meshgrid(
        np.arange(height, dtype=np.float64),
        np.arange(width, dtype=np.float64),
        indexing="ij",
    )
    blob_sigma = 0.05 * min(height, width)
    for er, ec in (eyes.left, eyes.right):
        rho = rho - 0.3 * np.exp(
            -((rr - er) ** 2 + (cc - ec) ** 2) / (2.0 * blob_sigma**2)
        )
    return np.clip(rho, 0.15, 0.95)


def illumination_field(
    rng: np.random.Generator,
    height: int,
    width: int,
    ratio: float,
    family: str,
) -> np.ndarray:
    """Smooth multiplicative field mapped into [1/ratio, 1].

    family 'poly' draws a random quadratic polynomial over the image plane;
    'ramp' draws a soft half-plane transition at a random orientation.
    """
    if ratio < 1:
        raise ValueError("ratio must be >= 1")
    u, v = np.meshgrid(
        np.linspace(-1.0, 1.0, height),
        np.linspace(-1.0, 1.0, width),
        indexing="ij",
    )
    if family == "poly":
        a = rng.uniform(-1.0, 1.0, size=6)
        f = a[0] + a[1] * u + a[2] * v + a[3] * u * u + a[4] * u * v + a[5] * v * v
    elif family == "ramp":
        theta = rng.uniform(0.0, 2.0 * np.pi)
        offset = rng.uniform(-0.4, 0.4)
        softness = rng.uniform(0.1, 0.3)
        proj = u * np.sin(theta) + v * np.cos(theta)
        f = 1.0 / (1.0 + np.exp(-(proj - offset) / softness))
    else:
        raise ValueError(f"unknown illumination family {family!r}")

    lo = 1.0 / ratio
    fmin, fmax = float(f.min()), float(f.max())
    if fmax - fmin < 1e-12 or ratio == 1.0:
        return np.ones((height, width))
    return lo + (f - fmin) / (fmax - fmin) * (1.0 - lo)


def synth_images(spec: SynthSpec) -> list[ManifestEntry]:
    """Generate the dataset in memory.

    Image 0 of each subject is the controlled session (unit illumination);
    the rest get a random field from a random family with a per-image ratio
    up to spec.illum_strength. Pixels are clamped to [0, 1] after noise.
    """
    rng = np.random.default_rng(spec.seed)
    eyes = eye_positions(spec.height, spec.width)
    entries: list[ManifestEntry] = []
    for s in range(spec.n_subjects):
        subject = f"s{s:03d}"
        rho = reflectance_pattern(rng, spec.height, spec.width)
        for i in range(spec.images_per_subject):
            if i == 0:
                session = "controlled"
                field = np.ones((spec.height, spec.width))
            else:
                session = "uncontrolled"
                family = "poly" if rng.random() < 0.5 else "ramp"
                ratio = (
                    1.0
                    if spec.illum_strength == 1.0
                    else float(
                        rng.uniform(np.sqrt(spec.illum_strength), spec.illum_strength)
                    )
                )
                field = illumination_field(
                    rng, spec.height, spec.width, ratio, family
                )
            noise = rng.normal(0.0, spec.noise_sigma, size=(spec.height, spec.width))
            img = np.clip(rho * field + noise, 0.0, 1.0)
            entries.append(
                ManifestEntry(
                    path=f"{subject}_i{i:02d}.pgm",
                    subject_id=subject,
                    session_tag=session,
                    eyes=eyes,
                    image=img,
                )
            )
    return entries


def split_subjects(subject_ids: list[str]) -> tuple[list[str], list[str], list[str]]:
    """Contiguous train/dev/eval subject split, roughly 40/30/30.

    Needs at least 6 subjects so every block gets two or more.
    """
    n = len(subject_ids)
    if n < 6:
        raise ValueError(f"need at least 6 subjects to split, got {n}")
    n_train = max(2, round(0.4 * n))
    n_dev = max(2, round(0.3 * n))
    if n_train + n_dev > n - 2:
        n_train = max(2, n - 4)
        n_dev = 2
    return (
        subject_ids[:n_train],
        subject_ids[n_train : n_train + n_dev],
        subject_ids[n_train + n_dev :],
    )


def generate_synthetic(spec: SynthSpec, out_dir) -> dict[str, Path]:
    """Write PGM images plus manifests under out_dir.

    Always writes manifest.csv over the full dataset. With 6 or more
    subjects, also writes train.csv and dev.csv (all images of those
    subject blocks) and gallery.csv / probe.csv over the held-out block
    (controlled images enroll, uncontrolled images probe).
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    entries = synth_images(spec)
    for e in entries:
        write_image(out_dir / e.path, e.image)

    def rows(group):
        return [(e.path, e.subject_id, e.session_tag, e.eyes) for e in group]

    paths = {"manifest": out_dir / "manifest.csv"}
    write_manifest(paths["manifest"], rows(entries))

    subjects = sorted({e.subject_id for e in entries})
    if len(subjects) >= 6:
        train_ids, dev_ids, eval_ids = split_subjects(subjects)
        groups = {
            "train": [e for e in entries if e.subject_id in set(train_ids)],
            "dev": [e for e in entries if e.subject_id in set(dev_ids)],
            "gallery": [
                e
                for e in entries
                if e.subject_id in set(eval_ids) and e.session_tag == "controlled"
            ],
            "probe": [
                e
                for e in entries
                if e.subject_id in set(eval_ids) and e.session_tag == "uncontrolled"
            ],
        }
        for name, group in groups.items():
            if group:
                p = out_dir / f"{name}.csv"
                write_manifest(p, rows(group))
                paths[name] = p
    return paths
