"""Forward model of a 2x2 spatially-varying-exposure sensor.

Readout for a pixel served by element ``l`` of the tile::

    code = ADC( Clip( (Poisson(tau_l * theta * QE) + tau_l * mu_dark) * alpha_l ) + Normal(0, sigma_read^2) )

Units: radiance ``theta`` is photons per unit exposure, exposure ``tau`` is in
units of the global exposure duration, and charge is in electrons. The ADC
range is fixed in the post-gain domain, so the input-referred LSB and read
noise shrink as ``1/alpha``.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, fields

import numpy as np
from scipy.stats import norm, poisson

from .patterns import LevelSet, Pattern
from .validation import check_radiance

# the ADC range may exceed the full well by float round-off only
_RANGE_TOL = 1e-6


@dataclass(frozen=True)
class SensorConfig:
    """Physical sensor parameters.

    Defaults follow a 10-bit sensor with an 8200 e- full well, QE of 0.8,
    gains {1, 10, 80}, 0.2 e- dark charge at the shortest (0.25x) exposure,
    and 20 e- read noise at unit gain. ``v_max`` is the ADC ceiling referred
    to incident photons at unit ``tau * alpha``; a radiance ``theta`` saturates
    an element when ``tau * alpha * theta > v_max``. When omitted it is derived
    as ``adc_upper / qe``.
    """

    qe: float = 0.8
    dark_current: float = 0.8
    read_noise_base: float = 20.0
    full_well: float = 8200.0
    adc_bits: int = 10
    adc_lower: float = 1.0
    adc_lsb_base: float = 8.0
    v_max: float | None = field(default=None)

    def __post_init__(self):
        if not 0 < self.qe <= 1:
            raise ValueError("qe must lie in (0, 1]")
        if self.v_max is None:
            object.__setattr__(self, "v_max", self.adc_upper / self.qe)
        for f in fields(self):
            value = getattr(self, f.name)
            if not math.isfinite(value):
                raise ValueError(f"{f.name} must be finite")
        if self.dark_current < 0 or self.read_noise_base < 0 or self.adc_lower < 0:
            raise ValueError("dark_current, read_noise_base and adc_lower must be >= 0")
        if self.full_well <= 0 or self.adc_lsb_base <= 0 or self.v_max <= 0:
            raise ValueError("full_well, adc_lsb_base and v_max must be > 0")
        if int(self.adc_bits) != self.adc_bits or self.adc_bits < 1:
            raise ValueError("adc_bits must be a positive integer")
        if self.adc_upper > self.full_well * (1 + _RANGE_TOL):
            raise ValueError(
                f"ADC range ({self.adc_upper:g}) exceeds the full well ({self.full_well:g})"
            )

    @property
    def max_code(self) -> int:
        return 2 ** int(self.adc_bits) - 1

    @property
    def adc_upper(self) -> float:
        """Post-gain value mapped to the top code."""
        return self.adc_lower + self.max_code * self.adc_lsb_base

    def cutoff(self, tau, alpha):
        """Radiance above which a ``(tau, alpha)`` element saturates."""
        return self.v_max / (np.asarray(tau) * np.asarray(alpha))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SensorConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown SensorConfig fields: {sorted(unknown)}")
        return cls(**data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SensorConfig":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True, eq=False)
class RawCapture:
    codes: np.ndarray
    pattern: Pattern
    config: SensorConfig
    seed: int
    noise_enabled: bool = True

    def __post_init__(self):
        codes = np.asarray(self.codes)
        if codes.ndim != 2 or codes.shape[0] % 2 or codes.shape[1] % 2:
            raise ValueError(f"capture dimensions must be even, got {codes.shape}")
        if codes.size and (codes.min() < 0 or codes.max() > self.config.max_code):
            raise ValueError("codes fall outside the ADC range")
        codes = codes.astype(np.uint16 if self.config.adc_bits <= 16 else np.uint32)
        codes.setflags(write=False)
        object.__setattr__(self, "codes", codes)

    @property
    def shape(self) -> tuple[int, int]:
        return self.codes.shape

    def element_maps(self) -> tuple[np.ndarray, np.ndarray]:
        return pattern_maps(self.pattern, self.shape)

    @property
    def saturated(self) -> np.ndarray:
        return self.codes == self.config.max_code


def element_index(shape: tuple[int, int]) -> np.ndarray:
    """Row-major slot index of the 2x2 tile serving each pixel."""
    rows = np.arange(shape[0]) % 2
    cols = np.arange(shape[1]) % 2
    return 2 * rows[:, None] + cols[None, :]


def pattern_maps(pattern: Pattern, shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel exposure and gain maps for ``pattern`` tiled over ``shape``."""
    idx = element_index(shape)
    return np.asarray(pattern.tau)[idx], np.asarray(pattern.alpha)[idx]


def expected_readout(theta, tau, alpha, config: SensorConfig):
    """Noise-free post-gain signal ``min(full_well, tau*theta*QE + tau*mu_dark) * alpha``."""
    theta = np.asarray(theta, dtype=float)
    if np.any(theta < 0):
        raise ValueError("radiance must be non-negative")
    charge = tau * theta * config.qe + tau * config.dark_current
    out = np.minimum(config.full_well, charge) * alpha
    return out if out.ndim else float(out)


def quantize(value, config: SensorConfig):
    """ADC: ``clamp(floor((v - adc_lower) / lsb), 0, max_code)``."""
    code = np.floor((np.asarray(value, dtype=float) - config.adc_lower) / config.adc_lsb_base)
    return np.clip(code, 0, config.max_code).astype(np.int64)


def normalize_readout(code, tau, alpha, config: SensorConfig):
    """Input-referred radiance estimate and saturation flag for ADC codes.

    Returns ``(theta_hat, saturated)``; ``theta_hat`` is
    ``max(0, (code * lsb + adc_lower) / alpha - tau * mu_dark) / (tau * QE)``.
    """
    code = np.asarray(code)
    charge = (code * config.adc_lsb_base + config.adc_lower) / np.asarray(alpha)
    theta_hat = np.maximum(0.0, charge - np.asarray(tau) * config.dark_current) / (
        np.asarray(tau) * config.qe
    )
    saturated = code >= config.max_code
    if theta_hat.ndim == 0:
        return float(theta_hat), bool(saturated)
    return theta_hat, saturated


def pixel_uniforms(seed: int, shape: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Counter-based uniforms: pixel ``i`` (row-major) always gets draws ``2i`` and ``2i+1``.

    The stream is a Philox generator keyed by ``seed``, so the draws a pixel
    receives do not depend on evaluation order or on the pattern being
    simulated. Values are kept strictly inside (0, 1) for inverse-CDF use.
    """
    gen = np.random.Generator(np.random.Philox(key=int(seed)))
    u = gen.random((shape[0] * shape[1], 2))
    np.clip(u, 2.0**-53, 1.0 - 2.0**-53, out=u)
    return u[:, 0].reshape(shape), u[:, 1].reshape(shape)


def shot_counts(mean: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Poisson draws by inverse CDF so each pixel consumes exactly one uniform."""
    mean = np.asarray(mean, dtype=float)
    out = np.zeros_like(mean)
    live = mean > 0
    out[live] = poisson.ppf(u[live], mean[live])
    return out


def _readout_from_charge(charge, alpha, read_uniform, config: SensorConfig, noise: bool):
    signal = np.minimum(charge, config.full_well) * alpha
    if noise and config.read_noise_base > 0:
        signal = signal + config.read_noise_base * norm.ppf(read_uniform)
    return quantize(signal, config)


def simulate_capture(
    radiance,
    pattern: Pattern,
    config: SensorConfig,
    seed: int = 0,
    noise_enabled: bool = True,
    levels: LevelSet | None = None,
) -> RawCapture:
    """Simulate one multiplexed raw frame of ``radiance``.

    With ``noise_enabled`` off the Poisson and Gaussian terms are replaced by
    their means. Identical inputs and seed give bit-identical codes.
    """
    theta = check_radiance(radiance, even=True)
    if levels is not None:
        levels.validate(pattern)
    tau, alpha = pattern_maps(pattern, theta.shape)
    if noise_enabled:
        u_shot, u_read = pixel_uniforms(seed, theta.shape)
        electrons = shot_counts(tau * theta * config.qe, u_shot)
    else:
        u_read = None
        electrons = tau * theta * config.qe
    charge = electrons + tau * config.dark_current
    codes = _readout_from_charge(charge, alpha, u_read, config, noise_enabled)
    return RawCapture(codes, pattern, config, int(seed), bool(noise_enabled))


class CaptureSimulator:
    """Simulate many patterns of one scene with shared per-pixel noise.

    Shot draws only depend on a pixel's exposure, so they are computed once per
    distinct ``tau`` and reused; every capture is bit-identical to
    :func:`simulate_capture` with the same seed.
    """

    def __init__(self, radiance, config: SensorConfig, seed: int = 0, noise_enabled: bool = True):
        self.theta = check_radiance(radiance, even=True)
        self.config = config
        self.seed = int(seed)
        self.noise_enabled = bool(noise_enabled)
        if noise_enabled:
            self._u_shot, self._u_read = pixel_uniforms(seed, self.theta.shape)
        else:
            self._u_shot = self._u_read = None
        self._electrons: dict[float, np.ndarray] = {}

    def _electrons_for(self, tau: float) -> np.ndarray:
        if tau not in self._electrons:
            mean = tau * self.theta * self.config.qe
            self._electrons[tau] = shot_counts(mean, self._u_shot) if self.noise_enabled else mean
        return self._electrons[tau]

    def capture(self, pattern: Pattern) -> RawCapture:
        tau_map, alpha_map = pattern_maps(pattern, self.theta.shape)
        electrons = np.empty_like(self.theta)
        for t in set(pattern.tau):
            sel = tau_map == t
            electrons[sel] = self._electrons_for(t)[sel]
        charge = electrons + tau_map * self.config.dark_current
        codes = _readout_from_charge(charge, alpha_map, self._u_read, self.config, self.noise_enabled)
        return RawCapture(codes, pattern, self.config, self.seed, self.noise_enabled)
