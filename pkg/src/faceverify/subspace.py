"""Linear and kernel PCA projection over feature vectors.

Training standardizes every coordinate (population statistics, floored
scale), then finds principal directions either directly from the covariance
matrix or, when the dimension exceeds the sample count, through the dual
Gram-matrix eigenproblem. Kernel PCA generalizes the Gram route with a
double-centered kernel matrix and projects new points through the dual
coefficients. All eigen decompositions use a fixed ordering and sign rule so
training is deterministic.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from faceverify.fourier import FeatureVector

SCALE_FLOOR = 1e-8
EIG_KEEP = 1e-10
MASS_TARGET = 0.98


@dataclass(frozen=True)
class TrainingSet:
    """Feature rows (l x n), one label per row, and the shared layout."""

    matrix: np.ndarray
    labels: tuple[str, ...]
    layout: tuple | None = None

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64)
        if m.ndim != 2:
            raise ValueError("training matrix must be 2-D (rows x coordinates)")
        if m.shape[0] < 2:
            raise ValueError("training needs at least 2 rows")
        if len(self.labels) != m.shape[0]:
            raise ValueError(
                f"{len(self.labels)} labels for {m.shape[0]} rows"
            )
        if not np.all(np.isfinite(m)):
            raise ValueError("training matrix contains non-finite values")
        object.__setattr__(self, "matrix", m)
        object.__setattr__(self, "labels", tuple(str(s) for s in self.labels))

    @classmethod
    def from_features(cls, features, labels) -> "TrainingSet":
        features = list(features)
        if not features:
            raise ValueError("empty feature list")
        layout = features[0].layout
        for f in features[1:]:
            if f.layout != layout:
                raise ValueError("feature vectors have mismatched layouts")
        matrix = np.stack([f.values for f in features])
        return cls(matrix=matrix, labels=tuple(labels), layout=layout)

    @property
    def count(self) -> int:
        return self.matrix.shape[0]

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]


@dataclass(frozen=True)
class KernelSpec:
    """Kernel choice: 'linear', or 'rbf' with bandwidth gamma."""

    kind: str
    gamma: float | None = None

    def __post_init__(self):
        if self.kind not in ("linear", "rbf"):
            raise ValueError(f"unknown kernel kind {self.kind!r}")
        if self.kind == "rbf" and self.gamma is not None:
            if not np.isfinite(self.gamma) or self.gamma <= 0:
                raise ValueError("rbf gamma must be finite and > 0")


@dataclass(frozen=True)
class SubspaceModel:
    """Trained projection.

    PCA stores an orthonormal basis (n x k columns). KPCA stores the
    standardized training rows, the dual coefficient matrix alphas (l x k,
    scaled so feature-space eigenvectors have unit norm), and the centering
    statistics of the training kernel matrix.
    """

    kind: str
    mean: np.ndarray
    scale: np.ndarray
    eigenvalues: np.ndarray
    layout: tuple | None = None
    basis: np.ndarray | None = None
    train_rows: np.ndarray | None = None
    alphas: np.ndarray | None = None
    kernel: KernelSpec | None = None
    kcol_mean: np.ndarray | None = field(default=None)
    kmean: float = 0.0

    @property
    def k(self) -> int:
        return int(self.eigenvalues.size)


def standardize_fit(train: TrainingSet) -> tuple[np.ndarray, np.ndarray]:
    """Per-coordinate mean and population standard deviation (floored)."""
    mean = train.matrix.mean(axis=0)
    scale = train.matrix.std(axis=0)
    return mean, np.maximum(scale, SCALE_FLOOR)


def _standardized(train: TrainingSet):
    mean, scale = standardize_fit(train)
    return (train.matrix - mean) / scale, mean, scale


def _fix_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip each column so its largest-magnitude entry is positive."""
    out = vectors.copy()
    for j in range(out.shape[1]):
        col = out[:, j]
        if col[np.argmax(np.abs(col))] < 0:
            out[:, j] = -col
    return out


def _default_k(eigenvalues: np.ndarray, cap: int) -> int:
    """Smallest k covering MASS_TARGET of the eigenvalue mass, within cap."""
    total = eigenvalues.sum()
    if total <= 0:
        return 1
    frac = np.cumsum(eigenvalues) / total
    k = int(np.searchsorted(frac, MASS_TARGET) + 1)
    return max(1, min(k, cap))


def pca_train(train: TrainingSet, k: int | None = None) -> SubspaceModel:
    """Principal component analysis on standardized rows.

    With n <= l the n x n covariance eigenproblem is solved directly; with
    n > l the l x l Gram problem is solved instead and dual eigenvectors are
    mapped back and renormalized. Both routes give the same projections.
    """
    z, mean, scale = _standardized(train)
    l, n = z.shape
    cap = min(l - 1, n)
    if n <= l:
        cov = (z.T @ z) / l
        vals, vecs = np.linalg.eigh(cov)
        vals = vals[::-1]
        vecs = vecs[:, ::-1]
    else:
        gram = (z @ z.T) / l
        mu, u = np.linalg.eigh(gram)
        mu = mu[::-1]
        u = u[:, ::-1]
        vals = mu
        mapped = z.T @ u
        norms = np.linalg.norm(mapped, axis=0)
        norms[norms == 0] = 1.0
        vecs = mapped / norms
    vals = np.maximum(vals, 0.0)

    if k is None:
        k = _default_k(vals, cap)
    if not 1 <= k <= cap:
        raise ValueError(f"k={k} outside [1, {cap}] for {l} rows of dim {n}")
    basis = _fix_signs(vecs[:, :k])
    return SubspaceModel(
        kind="pca",
        mean=mean,
        scale=scale,
        eigenvalues=vals[:k].copy(),
        layout=train.layout,
        basis=basis,
    )


def _kernel_matrix(spec: KernelSpec, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    if spec.kind == "linear":
        return a @ b.T
    sq = (
        np.sum(a * a, axis=1)[:, None]
        + np.sum(b * b, axis=1)[None, :]
        - 2.0 * (a @ b.T)
    )
    return np.exp(-spec.gamma * np.maximum(sq, 0.0))


def median_gamma(rows: np.ndarray) -> float:
    """1 / median pairwise squared distance; 1.0 when points coincide."""
    l = rows.shape[0]
    iu = np.triu_indices(l, k=1)
    sq = (
        np.sum(rows * rows, axis=1)[:, None]
        + np.sum(rows * rows, axis=1)[None, :]
        - 2.0 * (rows @ rows.T)
    )
    med = float(np.median(np.maximum(sq[iu], 0.0)))
    if med <= 0:
        return 1.0
    return 1.0 / med


def kpca_train(
    train: TrainingSet, kernel: KernelSpec | None = None, k: int | None = None
) -> SubspaceModel:
    """Kernel PCA through the double-centered kernel matrix.

    Components with eigenvalue at or below EIG_KEEP are dropped; if fewer
    than the requested k survive, k shrinks with a warning rather than
    padding with junk directions.
    """
    z, mean, scale = _standardized(train)
    l = z.shape[0]
    if kernel is None:
        kernel = KernelSpec(kind="rbf")
    if kernel.kind == "rbf" and kernel.gamma is None:
        kernel = KernelSpec(kind="rbf", gamma=median_gamma(z))

    kmat = _kernel_matrix(kernel, z, z)
    col_mean = kmat.mean(axis=0)
    grand = float(kmat.mean())
    centered = kmat - col_mean[None, :] - col_mean[:, None] + grand

    vals, vecs = np.linalg.eigh(centered)
    vals = vals[::-1]
    vecs = vecs[:, ::-1]
    keep = int(np.sum(vals > EIG_KEEP))

    if k is None:
        k = _default_k(np.maximum(vals, 0.0)[:keep], l - 1) if keep else 0
    elif not 1 <= k <= l - 1:
        raise ValueError(f"k={k} outside [1, {l - 1}] for {l} rows")
    if keep < k:
        warnings.warn(
            f"only {keep} kernel components above threshold; k shrinks from {k}",
            stacklevel=2,
        )
        k = keep

    vals = vals[:k].copy()
    alphas = vecs[:, :k] / np.sqrt(vals)[None, :] if k else np.zeros((l, 0))
    alphas = _fix_signs(alphas)
    return SubspaceModel(
        kind="kpca",
        mean=mean,
        scale=scale,
        eigenvalues=vals,
        layout=train.layout,
        train_rows=z,
        alphas=alphas,
        kernel=kernel,
        kcol_mean=col_mean,
        kmean=grand,
    )


def project_rows(model: SubspaceModel, rows: np.ndarray) -> np.ndarray:
    """Project an (m x n) block of raw feature rows; returns (m x k)."""
    rows = np.asarray(rows, dtype=np.float64)
    single = rows.ndim == 1
    if single:
        rows = rows[None, :]
    if rows.shape[1] != model.mean.size:
        raise ValueError(
            f"feature dim {rows.shape[1]} does not match model dim {model.mean.size}"
        )
    z = (rows - model.mean) / model.scale
    if model.kind == "pca":
        out = z @ model.basis
    else:
        kt = _kernel_matrix(model.kernel, z, model.train_rows)
        kt_centered = (
            kt
            - kt.mean(axis=1, keepdims=True)
            - model.kcol_mean[None, :]
            + model.kmean
        )
        out = kt_centered @ model.alphas
    return out[0] if single else out


def project(model: SubspaceModel, x: FeatureVector) -> np.ndarray:
    """Project one feature vector; its layout must match the training layout."""
    if model.layout is not None and x.layout != model.layout:
        raise ValueError("feature layout does not match the trained model")
    return project_rows(model, x.values)
