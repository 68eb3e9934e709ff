"""Classical HDR reconstruction from a multiplexed raw capture.

Both reconstructors share one front end, :class:`ObservationField`, which
holds the input-referred radiance estimate of every pixel, its noise
variance, and a validity mask that is false on saturated pixels.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .patterns import Pattern
from .sensor import RawCapture, SensorConfig, element_index, normalize_readout, pattern_maps
from .tv import chambolle_iterate
from .validation import check_radiance

LPA_WINDOW = 7
LPA_SCALE = 1.0


@dataclass(frozen=True, eq=False)
class ObservationField:
    theta_hat: np.ndarray
    variance: np.ndarray
    valid: np.ndarray
    cutoff: np.ndarray
    pattern: Pattern
    config: SensorConfig

    @property
    def shape(self) -> tuple[int, int]:
        return self.theta_hat.shape

    def variance_at(self, reference) -> np.ndarray:
        """Per-pixel noise variance if every pixel observed radiance ``reference``."""
        tau, alpha = pattern_maps(self.pattern, self.shape)
        ref = np.maximum(np.asarray(reference, dtype=float), 0.0)
        return measurement_variance(ref, tau, alpha, self.config) + _variance_floor(tau, alpha, self.config)


def measurement_variance(theta, tau, alpha, config: SensorConfig):
    return (theta + config.dark_current) / tau + config.read_noise_base**2 / (alpha**2 * tau**2)


def _variance_floor(tau, alpha, config: SensorConfig):
    # quantization variance keeps the weights finite when every noise term vanishes
    lsb = config.adc_lsb_base / (alpha * tau * config.qe)
    return lsb**2 / 12.0


def observation_field(capture: RawCapture) -> ObservationField:
    """Normalize codes to radiance, estimate per-pixel variance and mark saturation."""
    config = capture.config
    tau, alpha = capture.element_maps()
    theta_hat, saturated = normalize_readout(capture.codes, tau, alpha, config)
    var = measurement_variance(theta_hat, tau, alpha, config) + _variance_floor(tau, alpha, config)
    return ObservationField(theta_hat, var, ~saturated, config.cutoff(tau, alpha), capture.pattern, config)


def exact_observation(radiance, pattern: Pattern, config: SensorConfig) -> ObservationField:
    """Noise- and quantization-free observations of ``radiance`` (testing aid)."""
    theta = check_radiance(radiance, even=True)
    tau, alpha = pattern_maps(pattern, theta.shape)
    cutoff = config.cutoff(tau, alpha)
    valid = theta <= cutoff
    var = measurement_variance(theta, tau, alpha, config) + _variance_floor(tau, alpha, config)
    return ObservationField(np.where(valid, theta, cutoff), var, valid, cutoff, pattern, config)


def _as_field(obs) -> ObservationField:
    if isinstance(obs, ObservationField):
        return obs
    if isinstance(obs, RawCapture):
        return observation_field(obs)
    raise TypeError(f"expected a RawCapture or ObservationField, got {type(obs).__name__}")


def _lpa_kernels(window: int, scale: float):
    r = window // 2
    dy, dx = np.mgrid[-r : r + 1, -r : r + 1].astype(float)
    g = np.exp(-(dx**2 + dy**2) / (2.0 * scale**2))
    return g, dx, dy


def _element_variance(field: ObservationField, reference: np.ndarray, slot: int) -> np.ndarray:
    tau = np.full(field.shape, field.pattern.tau[slot])
    alpha = np.full(field.shape, field.pattern.alpha[slot])
    ref = np.maximum(reference, 0.0)
    return measurement_variance(ref, tau, alpha, field.config) + _variance_floor(tau, alpha, field.config)


def _local_mean(field: ObservationField, g: np.ndarray) -> np.ndarray:
    valid = field.valid.astype(float)
    num = ndimage.correlate(valid * np.where(field.valid, field.theta_hat, 0.0), g, mode="constant")
    den = ndimage.correlate(valid, g, mode="constant")
    with np.errstate(divide="ignore", invalid="ignore"):
        mean = num / den
    return np.where(den > 0, mean, field.cutoff)


def saturation_floor(field: ObservationField) -> np.ndarray:
    """Lower bound implied by each reading: the cutoff where saturated, else 0."""
    return np.where(field.valid, 0.0, field.cutoff)


def lpa_reconstruct(obs, window: int = LPA_WINDOW, scale: float = LPA_SCALE) -> np.ndarray:
    """Local polynomial approximation of degree 1.

    Each pixel is the intercept of a plane fitted by weighted least squares to
    the valid pixels in its ``window x window`` neighborhood, with weights
    Gaussian(distance; ``scale``) times inverse noise variance. A sample's
    variance is that of its element evaluated at the window's own radiance
    level (a Gaussian-weighted mean of the valid samples), not at the sample's
    value: samples of one window are modeled as measuring the same local
    radiance, and self-referred weights would favor low readings. Windows with
    fewer than three valid pixels (or a degenerate layout) fall back to the
    weighted mean. A saturated pixel says its radiance exceeds its cutoff, so
    the output there is raised to at least that cutoff; this keeps dark
    neighbors from being extrapolated into clipped highlights.
    """
    field = _as_field(obs)
    g, dx, dy = _lpa_kernels(window, scale)
    kernels = (g, g * dx, g * dy, g * dx * dx, g * dx * dy, g * dy * dy)
    reference = _local_mean(field, g)
    slots = element_index(field.shape)
    y = np.where(field.valid, field.theta_hat, 0.0)

    def corr(img, kern):
        return ndimage.correlate(img, kern, mode="constant", cval=0.0)

    s00 = s0x = s0y = sxx = sxy = syy = b0 = bx = by = 0.0
    for slot in range(4):
        mask = (field.valid & (slots == slot)).astype(float)
        if not mask.any():
            continue
        w = 1.0 / _element_variance(field, reference, slot)
        m = [corr(mask, k) for k in kernels]
        r = [corr(mask * y, k) for k in kernels[:3]]
        s00 = s00 + w * m[0]
        s0x = s0x + w * m[1]
        s0y = s0y + w * m[2]
        sxx = sxx + w * m[3]
        sxy = sxy + w * m[4]
        syy = syy + w * m[5]
        b0 = b0 + w * r[0]
        bx = bx + w * r[1]
        by = by + w * r[2]
    if np.isscalar(s00):
        return np.maximum(field.cutoff.astype(float), 0.0)

    # intercept of the 3x3 normal equations by Cramer's rule
    det = s00 * (sxx * syy - sxy**2) - s0x * (s0x * syy - sxy * s0y) + s0y * (s0x * sxy - sxx * s0y)
    num = b0 * (sxx * syy - sxy**2) - s0x * (bx * syy - sxy * by) + s0y * (bx * sxy - sxx * by)

    n_valid = corr(field.valid.astype(float), np.ones((window, window)))
    with np.errstate(divide="ignore", invalid="ignore"):
        plane = num / det
        mean = b0 / s00
        # relative conditioning of the normal matrix
        well_posed = (n_valid >= 3) & (np.abs(det) > 1e-9 * s00 * np.maximum(sxx * syy, 1e-300))
    out = np.where(well_posed, plane, mean)
    out = np.where(n_valid > 0, out, field.cutoff)
    out = np.where(np.isfinite(out), out, field.cutoff)
    return np.maximum(out, saturation_floor(field))


@dataclass(frozen=True)
class ADMMInfo:
    iterations: int
    converged: bool
    noise_scale: float


def admm_tv_reconstruct(obs, lam: float = 1.0, max_iters: int = 30, rho: float = 1.0,
                        tol: float = 1e-4, return_info: bool = False, init=None):
    """Plug-and-play ADMM with a total-variation prior.

    Minimizes ``sum_valid (x - theta_hat)^2 / (2 v) + lam * TV(x) / s`` where
    ``v`` is each pixel's noise variance evaluated at the LPA estimate and
    ``s`` is the median noise standard deviation of the valid pixels, i.e. the
    TV term is measured in units of the typical noise level. Iterates

    * ``x = (theta_hat / v + rho (z - u)) / (1 / v + rho)`` on valid pixels,
      ``x = max(z - u, cutoff)`` on saturated ones
    * ``z = TV_denoise(x + u, lam / rho)``
    * ``u = u + x - z``

    in units of ``s``, starting from the LPA estimate (or ``init``), for at most
    ``max_iters`` rounds or until the relative change of ``z`` drops below ``tol``.
    The output is clamped to the same saturation floor as LPA.
    """
    field = _as_field(obs)
    init = lpa_reconstruct(field) if init is None else np.asarray(init, dtype=float)
    valid = field.valid
    if not valid.any():
        info = ADMMInfo(0, True, 1.0)
        return (init, info) if return_info else init

    variance = field.variance_at(init)
    s = float(np.sqrt(np.median(variance[valid])))
    y = np.where(valid, field.theta_hat, 0.0) / s
    w = np.where(valid, s * s / variance, 0.0)

    floor = saturation_floor(field) / s
    z = init / s
    u = np.zeros_like(z)
    dual = None
    converged = False
    it = 0
    for it in range(1, max_iters + 1):
        x = np.maximum((w * y + rho * (z - u)) / (w + rho), floor)
        z_new, dual, _ = chambolle_iterate(x + u, lam / rho, dual=dual)
        u += x - z_new
        change = np.linalg.norm(z_new - z) / max(np.linalg.norm(z), 1e-300)
        z = z_new
        if change < tol:
            converged = True
            break
    out = np.maximum(z, floor) * s
    if return_info:
        return out, ADMMInfo(it, converged, s)
    return out


RECONSTRUCTORS = {
    "lpa": lpa_reconstruct,
    "admm-tv": admm_tv_reconstruct,
}


def reconstruct(capture, method: str = "lpa", **kwargs) -> np.ndarray:
    try:
        fn = RECONSTRUCTORS[method]
    except KeyError:
        raise ValueError(f"unknown reconstructor {method!r}; choose from {sorted(RECONSTRUCTORS)}") from None
    return fn(capture, **kwargs)
