"""Deterministic synthetic radiance maps for desk-scale experiments."""
from __future__ import annotations

import numpy as np
from scipy import ndimage

from .patterns import LevelSet
from .sensor import SensorConfig
from .validation import PreconditionError

SCENE_KINDS = ("flat", "two-level", "ramp", "hdr-composite")


def _check_dims(width: int, height: int) -> None:
    if int(width) < 1 or int(height) < 1:
        raise PreconditionError(f"invalid scene dimensions {width}x{height}")


def ceiling_radiance(config: SensorConfig, levels: LevelSet | None = None) -> float:
    """Largest radiance the lowest-product level records without saturating."""
    levels = levels or LevelSet.default()
    tau_min = min(levels.taus)
    return float(config.cutoff(tau_min, 1.0))


def normalize_to_adc(radiance: np.ndarray, config: SensorConfig, levels: LevelSet | None = None,
                     percentile: float = 99.0, headroom: float = 0.9) -> np.ndarray:
    """Scale so the given percentile sits at ``headroom`` times the minimal-exposure unit-gain ceiling."""
    ref = float(np.percentile(radiance, percentile))
    if ref <= 0:
        return radiance.copy()
    return radiance * (headroom * ceiling_radiance(config, levels) / ref)


def _smooth_field(rng: np.random.Generator, shape, sigma: float) -> np.ndarray:
    f = ndimage.gaussian_filter(rng.standard_normal(shape), sigma, mode="wrap")
    return f / (np.abs(f).max() + 1e-12)


def _hdr_composite(width: int, height: int, seed: int, n_regions: int, decades: float,
                   texture: float) -> np.ndarray:
    rng = np.random.default_rng(seed)
    yy, xx = np.mgrid[0:height, 0:width]
    yy = yy / max(height - 1, 1)
    xx = xx / max(width - 1, 1)

    # base: gentle illumination gradient plus low-frequency variation, in log10
    angle = rng.uniform(0, 2 * np.pi)
    log_r = -0.5 * decades + 0.4 * (np.cos(angle) * xx + np.sin(angle) * yy)
    log_r += 0.3 * _smooth_field(rng, (height, width), sigma=max(width, height) / 8)

    # regions spread over the full range; the first two pin the extremes
    offsets = rng.uniform(-decades, 0.0, n_regions)
    offsets[0], offsets[1] = -decades, -0.05
    for off in offsets:
        cy, cx = rng.uniform(0.1, 0.9, 2)
        ry, rx = rng.uniform(0.08, 0.3, 2)
        if rng.random() < 0.5:
            mask = ((yy - cy) / ry) ** 2 + ((xx - cx) / rx) ** 2 <= 1.0
        else:
            mask = (np.abs(yy - cy) <= ry) & (np.abs(xx - cx) <= rx)
        shade = off + 0.15 * _smooth_field(rng, (height, width), sigma=3.0)
        log_r = np.where(mask, shade, log_r)

    # a small light source above the 99th percentile
    cy, cx = rng.uniform(0.15, 0.85, 2)
    spot = ((yy - cy) ** 2 + (xx - cx) ** 2) <= (0.035**2)
    log_r = np.where(spot, 0.6, log_r)

    radiance = 10.0**log_r
    # multiplicative fine texture
    fx, fy = rng.uniform(0.08, 0.35, 2)
    stripes = np.sin(2 * np.pi * (fx * np.arange(width)[None, :] + fy * np.arange(height)[:, None]))
    grain = _smooth_field(rng, (height, width), sigma=1.0)
    radiance *= 1.0 + texture * (0.6 * stripes + 0.4 * grain)
    return np.clip(radiance, 0.0, None)


def synth_scene(kind: str, width: int, height: int, config: SensorConfig | None = None,
                levels: LevelSet | None = None, **params) -> np.ndarray:
    """Build a synthetic radiance map of shape ``(height, width)``.

    Parameters by kind:

    * ``flat``: ``level``
    * ``two-level``: ``levels_ab=(a, b)``, ``split`` (fraction of columns at ``a``)
    * ``ramp``: ``low``, ``high``, ``axis`` (1 for left-to-right)
    * ``hdr-composite``: ``seed``, ``n_regions``, ``decades``, ``texture``,
      ``headroom``; normalized so the 99th percentile fits the ADC at minimal
      exposure and unit gain.
    """
    _check_dims(width, height)
    width, height = int(width), int(height)
    if kind == "flat":
        return np.full((height, width), float(params.get("level", 1000.0)))
    if kind == "two-level":
        a, b = params.get("levels_ab", (100.0, 1000.0))
        split = float(params.get("split", 0.5))
        if not 0.0 <= split <= 1.0:
            raise PreconditionError("split must lie in [0, 1]")
        out = np.full((height, width), float(b))
        out[:, : int(round(split * width))] = float(a)
        return out
    if kind == "ramp":
        low, high = float(params.get("low", 10.0)), float(params.get("high", 1000.0))
        axis = int(params.get("axis", 1))
        n = width if axis == 1 else height
        line = np.linspace(low, high, n)
        return np.broadcast_to(line[None, :] if axis == 1 else line[:, None], (height, width)).copy()
    if kind == "hdr-composite":
        config = config or SensorConfig()
        radiance = _hdr_composite(
            width,
            height,
            seed=int(params.get("seed", 0)),
            n_regions=int(params.get("n_regions", 7)),
            decades=float(params.get("decades", 3.5)),
            texture=float(params.get("texture", 0.25)),
        )
        return normalize_to_adc(radiance, config, levels, headroom=float(params.get("headroom", 0.9)))
    raise PreconditionError(f"unknown scene kind {kind!r}; expected one of {SCENE_KINDS}")


def downsample(radiance: np.ndarray, factor: int) -> np.ndarray:
    """Block-average by ``factor`` per axis, cropping so the result has even dimensions."""
    factor = int(factor)
    if factor < 1:
        raise PreconditionError("downsample factor must be >= 1")
    if factor == 1:
        return np.asarray(radiance, dtype=float)
    h, w = radiance.shape
    h2, w2 = h // factor, w // factor
    h2 -= h2 % 2
    w2 -= w2 % 2
    if h2 < 2 or w2 < 2:
        raise PreconditionError(f"scene too small to downsample by {factor}")
    block = radiance[: h2 * factor, : w2 * factor].reshape(h2, factor, w2, factor)
    return block.mean(axis=(1, 3))
