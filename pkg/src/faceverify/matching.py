"""Pairwise scoring and multi-classifier score fusion.

Each classifier (one face model paired with one Fourier domain) compares two
projected vectors by Euclidean distance, mapped to a similarity in (0, 1].
Verification fuses the per-classifier similarities either by plain averaging
against a fixed threshold (`simple`) or by z-normalizing against development
impostor statistics and summing per-classifier Gaussian log likelihood
ratios against a calibrated threshold (`llr`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SIGMA_FLOOR = 1e-6
DEFAULT_SIMPLE_TAU = 0.85
LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True)
class ScoreVector:
    """Raw per-classifier similarities in a stable classifier order."""

    entries: np.ndarray
    classifier_ids: tuple[str, ...]

    def __post_init__(self):
        e = np.asarray(self.entries, dtype=np.float64)
        if e.ndim != 1 or e.size != len(self.classifier_ids):
            raise ValueError("entries must be one similarity per classifier")
        if not np.all(np.isfinite(e)):
            raise ValueError("score entries must be finite")
        object.__setattr__(self, "entries", e)


@dataclass(frozen=True)
class FusionModel:
    """Per-classifier score statistics and the decision threshold.

    znorm_mu/znorm_sigma come from development impostor raw similarities;
    the genuine/impostor mean/std pairs describe z-normalized scores. The
    development set must be disjoint from the gallery used at verification
    time. All stds are floored so densities stay finite.
    """

    classifier_ids: tuple[str, ...]
    znorm_mu: np.ndarray
    znorm_sigma: np.ndarray
    genuine_mu: np.ndarray
    genuine_sigma: np.ndarray
    impostor_mu: np.ndarray
    impostor_sigma: np.ndarray
    tau: float


def euclidean_distance(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.sum((a - b) ** 2)))


def to_similarity(d: float) -> float:
    """Map a distance to (0, 1]: s = 1/(1 + d), so s(0) = 1."""
    if d < 0:
        raise ValueError("distance must be >= 0")
    return 1.0 / (1.0 + d)


def similarity(a, b) -> float:
    return to_similarity(euclidean_distance(a, b))


def znorm_fit(impostor_scores: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-classifier mean and population std of development impostor scores."""
    s = np.asarray(impostor_scores, dtype=np.float64)
    if s.ndim != 2:
        raise ValueError("impostor scores must be (samples x classifiers)")
    if s.shape[0] < 2:
        raise ValueError("z-norm needs at least 2 development impostor scores")
    mu = s.mean(axis=0)
    sigma = np.maximum(s.std(axis=0), SIGMA_FLOOR)
    return mu, sigma


def znorm_apply(scores: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    return (np.asarray(scores, dtype=np.float64) - mu) / sigma


def _log_normal(t: np.ndarray, mu: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    z = (t - mu) / sigma
    return -0.5 * LOG_2PI - np.log(sigma) - 0.5 * z * z


def llr_fuse(model: FusionModel, t):
    """Sum of per-classifier Gaussian log likelihood ratios on z-scores.

    Accepts one score vector (returns a scalar) or a (pairs x classifiers)
    matrix (returns one fused score per row).
    """
    t = np.asarray(t, dtype=np.float64)
    if t.shape[-1] != len(model.classifier_ids):
        raise ValueError("normalized score length does not match the model")
    terms = _log_normal(t, model.genuine_mu, model.genuine_sigma) - _log_normal(
        t, model.impostor_mu, model.impostor_sigma
    )
    return terms.sum(axis=-1)


def fuse_scores(model: FusionModel, raw) -> float:
    """Raw similarities -> z-norm -> fused log likelihood ratio."""
    raw = raw.entries if isinstance(raw, ScoreVector) else np.asarray(raw)
    t = znorm_apply(raw, model.znorm_mu, model.znorm_sigma)
    return llr_fuse(model, t)


def simple_fuse(raw) -> float:
    """Mean per-classifier similarity, for the fixed-threshold path."""
    raw = raw.entries if isinstance(raw, ScoreVector) else np.asarray(raw)
    return float(np.mean(raw))


def decide(score: float, tau: float) -> bool:
    """Accept (True) iff score >= tau."""
    return bool(score >= tau)


def calibrate_tau(fused_impostor: np.ndarray, target_far: float) -> float:
    """Smallest threshold whose development impostor FAR is <= target.

    Candidates are the observed fused impostor scores; if even the largest
    score cannot push FAR under target (ties at the top), the threshold
    steps just above it.
    """
    scores = np.sort(np.asarray(fused_impostor, dtype=np.float64))
    n = scores.size
    if n == 0:
        raise ValueError("threshold calibration needs impostor scores")
    if not 0.0 <= target_far <= 1.0:
        raise ValueError("target FAR must lie in [0, 1]")
    # FAR at candidate tau=scores[i] is (n - i) / n and decreases with i.
    for i, tau in enumerate(scores):
        if (n - i) / n <= target_far:
            return float(tau)
    return float(np.nextafter(scores[-1], np.inf))


def train_fusion(
    genuine_scores: np.ndarray,
    impostor_scores: np.ndarray,
    classifier_ids,
    target_far: float = 0.01,
) -> FusionModel:
    """Fit z-norm, class-conditional Gaussians, and the decision threshold.

    Inputs are raw similarity matrices (pairs x classifiers) from a labeled
    development set: one row per genuine pair and per impostor pair.
    """
    classifier_ids = tuple(classifier_ids)
    gen = np.asarray(genuine_scores, dtype=np.float64)
    imp = np.asarray(impostor_scores, dtype=np.float64)
    for name, m in (("genuine", gen), ("impostor", imp)):
        if m.ndim != 2 or m.shape[1] != len(classifier_ids):
            raise ValueError(f"{name} scores must be (pairs x {len(classifier_ids)})")
        if m.shape[0] < 2:
            raise ValueError(f"need at least 2 {name} development pairs")

    mu, sigma = znorm_fit(imp)
    gen_t = znorm_apply(gen, mu, sigma)
    imp_t = znorm_apply(imp, mu, sigma)
    model = FusionModel(
        classifier_ids=classifier_ids,
        znorm_mu=mu,
        znorm_sigma=sigma,
        genuine_mu=gen_t.mean(axis=0),
        genuine_sigma=np.maximum(gen_t.std(axis=0), SIGMA_FLOOR),
        impostor_mu=imp_t.mean(axis=0),
        impostor_sigma=np.maximum(imp_t.std(axis=0), SIGMA_FLOOR),
        tau=0.0,
    )
    fused_imp = llr_fuse(model, imp_t)
    tau = calibrate_tau(np.atleast_1d(fused_imp), target_far)
    return FusionModel(
        classifier_ids=classifier_ids,
        znorm_mu=mu,
        znorm_sigma=sigma,
        genuine_mu=model.genuine_mu,
        genuine_sigma=model.genuine_sigma,
        impostor_mu=model.impostor_mu,
        impostor_sigma=model.impostor_sigma,
        tau=tau,
    )
