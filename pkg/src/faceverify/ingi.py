"""Integral normalized gradient preprocessing.

The illumination-insensitive representation is built in three steps: take the
image gradient, divide it by a heavily smoothed copy of the image (which
tracks the slowly varying lighting), then re-integrate the normalized field
back into an image by iterative relaxation. The division cancels
multiplicative lighting; the integration turns the field back into a texture
image feature extraction can use.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from faceverify.imgcore import as_image, smooth


@dataclass(frozen=True)
class GradientField:
    """Per-pixel image gradient: gx along columns, gy along rows."""

    gx: np.ndarray
    gy: np.ndarray


@dataclass(frozen=True)
class NormalizedGradient:
    """Gradient divided by the smoothed image, with the stabilizer used."""

    nx: np.ndarray
    ny: np.ndarray
    epsilon: float


@dataclass(frozen=True)
class IngiParams:
    """Preprocessing knobs.

    sigma: width of the smoothing that estimates the lighting field.
    epsilon: floor for the division denominator.
    iterations: relaxation sweep count for the re-integration.
    anisotropic: weight relaxation by an edge-stopping conductance.
    kappa: conductance scale, used only when anisotropic is set.
    """

    sigma: float = 2.0
    epsilon: float = 0.01
    iterations: int = 500
    anisotropic: bool = False
    kappa: float = 0.1

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be >= 0")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.kappa <= 0:
            raise ValueError("kappa must be > 0")


def gradient(img: np.ndarray) -> GradientField:
    """Central-difference gradient with replicate borders.

    Interior: gx(i,j) = (x(i,j+1) - x(i,j-1)) / 2, analogously gy along rows.
    Border pixels see a replicated neighbor, so edge differences come out
    halved one-sided. Images narrower than 2 pixels in either axis are
    rejected.
    """
    img = as_image(img)
    if img.shape[0] < 2 or img.shape[1] < 2:
        raise ValueError(f"gradient needs at least 2x2, got {img.shape}")
    padded = np.pad(img, 1, mode="edge")
    gx = (padded[1:-1, 2:] - padded[1:-1, :-2]) / 2.0
    gy = (padded[2:, 1:-1] - padded[:-2, 1:-1]) / 2.0
    return GradientField(gx=gx, gy=gy)


def normalize_gradient(
    grad: GradientField, w: np.ndarray, epsilon: float
) -> NormalizedGradient:
    """Divide the gradient elementwise by max(w, epsilon).

    w is the smoothed source image. Scaling the source by any c > 0 scales
    gradient and w alike, so the output is unchanged wherever w stays above
    the floor.
    """
    w = as_image(w)
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    if grad.gx.shape != w.shape or grad.gy.shape != w.shape:
        raise ValueError(
            f"gradient shape {grad.gx.shape} does not match image shape {w.shape}"
        )
    denom = np.maximum(w, epsilon)
    return NormalizedGradient(nx=grad.gx / denom, ny=grad.gy / denom, epsilon=epsilon)


def _shifted(a: np.ndarray):
    """Neighbor values (north, south, east, west) with replicated borders."""
    p = np.pad(a, 1, mode="edge")
    return p[:-2, 1:-1], p[2:, 1:-1], p[1:-1, 2:], p[1:-1, :-2]


def integrate(n: NormalizedGradient, iterations: int, kappa: float | None = None) -> np.ndarray:
    """Re-integrate a normalized gradient field by Jacobi relaxation.

    Starting from zero, each sweep replaces every pixel with the average of
    the four neighbor estimates X(neighbor) + step, where the step is the
    field component along that edge (midpoint rule between the two pixels):

        from north: +(ny(i,j) + ny(i-1,j)) / 2      from south: -(...)
        from west:  +(nx(i,j) + nx(i,j-1)) / 2      from east:  -(...)

    The fixed point satisfies the discrete Poisson equation lap X = div N
    with replicate (zero-flux) boundaries. With kappa set, neighbor estimates
    are weighted by the edge conductance g = 1/(1 + (|N|/kappa)^2) averaged
    over the edge, which slows mixing across strong field lines.
    """
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    nx, ny = n.nx, n.ny
    ny_n, ny_s, _, _ = _shifted(ny)
    _, _, nx_e, nx_w = _shifted(nx)
    inc_n = (ny + ny_n) / 2.0
    inc_s = -(ny + ny_s) / 2.0
    inc_e = -(nx + nx_e) / 2.0
    inc_w = (nx + nx_w) / 2.0

    if kappa is None:
        weight = bias = None
        const = (inc_n + inc_s + inc_e + inc_w) / 4.0
    else:
        g = 1.0 / (1.0 + (nx * nx + ny * ny) / (kappa * kappa))
        g_n, g_s, g_e, g_w = _shifted(g)
        w_n = (g + g_n) / 2.0
        w_s = (g + g_s) / 2.0
        w_e = (g + g_e) / 2.0
        w_w = (g + g_w) / 2.0
        weight = (w_n, w_s, w_e, w_w)
        total = w_n + w_s + w_e + w_w
        bias = (w_n * inc_n + w_s * inc_s + w_e * inc_e + w_w * inc_w) / total

    x = np.zeros_like(nx)
    for _ in range(iterations):
        x_n, x_s, x_e, x_w = _shifted(x)
        if kappa is None:
            x = (x_n + x_s + x_e + x_w) / 4.0 + const
        else:
            w_n, w_s, w_e, w_w = weight
            x = (w_n * x_n + w_s * x_s + w_e * x_e + w_w * x_w) / (w_n + w_s + w_e + w_w) + bias
    return x


def rescale_unit(img: np.ndarray) -> np.ndarray:
    """Affine rescale to [0, 1]; a constant image maps to all 0.5."""
    img = as_image(img)
    lo = img.min()
    hi = img.max()
    if hi == lo:
        return np.full_like(img, 0.5)
    return (img - lo) / (hi - lo)


def ingi(img: np.ndarray, params: IngiParams = IngiParams()) -> np.ndarray:
    """Full preprocessing chain: smooth, gradient, normalize, re-integrate.

    The result is rescaled to [0, 1] since integration fixes the image only
    up to an additive constant.
    """
    img = as_image(img)
    w = smooth(img, params.sigma)
    grad = gradient(img)
    n = normalize_gradient(grad, w, params.epsilon)
    x = integrate(n, params.iterations, kappa=params.kappa if params.anisotropic else None)
    return rescale_unit(x)
