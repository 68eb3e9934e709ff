"""Radiance histograms: from a pilot capture, or exactly from a radiance map."""
from __future__ import annotations

import json
import logging
import math
from dataclasses import dataclass

import numpy as np

from .patterns import LevelSet, Pattern, canonicalize
from .sensor import RawCapture, normalize_readout, pattern_maps
from .validation import PreconditionError, check_radiance

log = logging.getLogger(__name__)

DEFAULT_BINS = 512
MIN_BINS = 16
# floor for all-zero inputs, keeps 1/theta^2 finite
RADIANCE_FLOOR = 1e-6


@dataclass(frozen=True, eq=False)
class RadianceHistogram:
    """Log-binned radiance distribution.

    ``weights`` are pixel fractions per bin and ``centers`` the mean radiance
    of each bin's members (geometric bin center for empty bins). Pixels whose
    radiance could not be measured sit in a tail mass of size
    ``saturated_fraction`` at ``tail_value``; weights plus tail sum to one.
    """

    edges: np.ndarray
    weights: np.ndarray
    centers: np.ndarray
    total_pixels: int
    saturated_fraction: float = 0.0
    tail_value: float = math.nan
    status: str = "ok"

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        weights = np.asarray(self.weights, dtype=float)
        centers = np.asarray(self.centers, dtype=float)
        if edges.ndim != 1 or len(edges) != len(weights) + 1 or len(centers) != len(weights):
            raise ValueError("edges must have one more entry than weights and centers")
        if np.any(np.diff(edges) <= 0) or edges[0] <= 0:
            raise ValueError("edges must be positive and strictly increasing")
        if np.any(weights < 0):
            raise ValueError("weights must be non-negative")
        if abs(weights.sum() + self.saturated_fraction - 1.0) > 1e-9:
            raise ValueError("weights plus saturated tail must sum to 1")
        for name, arr in (("edges", edges), ("weights", weights), ("centers", centers)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_bins(self) -> int:
        return len(self.weights)

    def support(self) -> tuple[np.ndarray, np.ndarray]:
        """Occupied radiance values and their masses, tail included."""
        keep = self.weights > 0
        values, masses = self.centers[keep], self.weights[keep]
        if self.saturated_fraction > 0:
            values = np.append(values, self.tail_value)
            masses = np.append(masses, self.saturated_fraction)
        return values, masses

    def to_dict(self) -> dict:
        return {
            "edges": self.edges.tolist(),
            "weights": self.weights.tolist(),
            "centers": self.centers.tolist(),
            "saturated_fraction": self.saturated_fraction,
            "tail_value": None if math.isnan(self.tail_value) else self.tail_value,
            "total_pixels": self.total_pixels,
            "status": self.status,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RadianceHistogram":
        edges = np.asarray(data["edges"], dtype=float)
        centers = data.get("centers")
        if centers is None:
            centers = np.sqrt(edges[:-1] * edges[1:])
        tail = data.get("tail_value")
        return cls(
            edges=edges,
            weights=np.asarray(data["weights"], dtype=float),
            centers=np.asarray(centers, dtype=float),
            total_pixels=int(data["total_pixels"]),
            saturated_fraction=float(data.get("saturated_fraction", 0.0)),
            tail_value=math.nan if tail is None else float(tail),
            status=data.get("status", "ok"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "RadianceHistogram":
        return cls.from_dict(json.loads(text))


def _log_edges(lo: float, hi: float, bins: int) -> np.ndarray:
    if hi <= lo * (1 + 1e-9):
        # degenerate range: a narrow band around the single value
        lo, hi = lo / 1.001, lo * 1.001
    return np.geomspace(lo, hi, bins + 1)


def _bin_values(values: np.ndarray, masses: np.ndarray, edges: np.ndarray):
    bins = len(edges) - 1
    idx = np.clip(np.searchsorted(edges, values, side="right") - 1, 0, bins - 1)
    weights = np.bincount(idx, weights=masses, minlength=bins)
    sums = np.bincount(idx, weights=masses * values, minlength=bins)
    centers = np.sqrt(edges[:-1] * edges[1:])
    occupied = weights > 0
    centers[occupied] = sums[occupied] / weights[occupied]
    return weights, centers


def _check_bins(bins: int) -> int:
    bins = int(bins)
    if bins < MIN_BINS:
        raise PreconditionError(f"need at least {MIN_BINS} bins, got {bins}")
    return bins


def histogram_from_radiance(radiance, bins: int = DEFAULT_BINS) -> RadianceHistogram:
    """Exact histogram of ground-truth radiance (no sensor in the loop)."""
    theta = check_radiance(radiance).ravel()
    bins = _check_bins(bins)
    positive = theta[theta > 0]
    floor = float(positive.min()) if positive.size else RADIANCE_FLOOR
    values = np.maximum(theta, floor)
    edges = _log_edges(floor, float(values.max()), bins)
    masses = np.full(values.shape, 1.0 / values.size)
    weights, centers = _bin_values(values, masses, edges)
    weights /= weights.sum()
    return RadianceHistogram(edges, weights, centers, total_pixels=int(theta.size))


def pilot_pattern(levels: LevelSet, ranks: tuple[int, ...] | None = None) -> Pattern:
    """High-medium-medium-low pilot pattern built from ``levels``.

    By default uses ranks ``(0, L//2 - 1, L//2, L - 1)`` of the product-sorted
    level list, i.e. ranks 1, 4, 5 and 9 (1-based) for nine levels. Fewer than
    four levels are repeated.
    """
    n = len(levels)
    if ranks is None:
        if n == 1:
            ranks = (0, 0, 0, 0)
        elif n == 2:
            ranks = (0, 0, 1, 1)
        elif n == 3:
            ranks = (0, 1, 1, 2)
        else:
            ranks = (0, n // 2 - 1, n // 2, n - 1)
    if len(ranks) != 4:
        raise PreconditionError("a pilot pattern needs four level ranks")
    return canonicalize(Pattern.from_levels([levels[r] for r in ranks]))


def cell_estimates(capture: RawCapture) -> tuple[np.ndarray, np.ndarray]:
    """Per 2x2 cell radiance estimate from its highest-product unsaturated element.

    Returns ``(estimate, all_saturated)`` arrays of shape ``(H/2, W/2)``;
    ``estimate`` is NaN where every element of the cell saturated.
    """
    tau, alpha = pattern_maps(capture.pattern, capture.shape)
    theta_hat, saturated = normalize_readout(capture.codes, tau, alpha, capture.config)
    h, w = capture.shape

    def cells(a):
        return a.reshape(h // 2, 2, w // 2, 2).transpose(0, 2, 1, 3).reshape(h // 2, w // 2, 4)

    est, sat = cells(theta_hat), cells(saturated)
    score = cells(tau * alpha + 1e-12 * tau)  # prefer the longer exposure on product ties
    score = np.where(sat, -np.inf, score)
    best = np.argmax(score, axis=-1)
    estimate = np.take_along_axis(est, best[..., None], axis=-1)[..., 0]
    all_sat = sat.all(axis=-1)
    estimate = np.where(all_sat, np.nan, estimate)
    return estimate, all_sat


def build_histogram(pilot: RawCapture, bins: int = DEFAULT_BINS) -> RadianceHistogram:
    """Radiance histogram from a pilot capture.

    Every pixel takes the estimate of the highest-product unsaturated element
    of its 2x2 cell. Cells saturated at all elements go into the tail mass,
    placed at the cutoff of the pilot's lowest-product element. Zero estimates
    are clamped to the smallest positive estimate (the lowest bin edge).
    """
    bins = _check_bins(bins)
    config = pilot.config
    low = pilot.pattern.sorted_levels()[0]
    high = pilot.pattern.sorted_levels()[-1]
    top = float(config.cutoff(low.tau, low.alpha))

    estimate, all_sat = cell_estimates(pilot)
    n_cells = estimate.size
    measured = estimate[~all_sat]
    sat_frac = float(all_sat.sum()) / n_cells

    if measured.size == 0:
        log.warning("pilot capture is fully saturated; histogram holds only the tail mass")
        edges = _log_edges(top / 2, top, bins)
        return RadianceHistogram(edges, np.zeros(bins), np.sqrt(edges[:-1] * edges[1:]),
                                 total_pixels=int(pilot.codes.size), saturated_fraction=1.0,
                                 tail_value=top, status="all-saturated")

    positive = measured[measured > 0]
    if positive.size:
        floor = float(positive.min())
    else:
        # half an input-referred LSB of the most sensitive pilot element
        floor = 0.5 * config.adc_lsb_base / (high.alpha * high.tau * config.qe)
    values = np.clip(measured, floor, top)
    edges = _log_edges(floor, max(top, floor), bins)
    masses = np.full(values.shape, 1.0 / n_cells)
    weights, centers = _bin_values(values, masses, edges)
    weights *= (1.0 - sat_frac) / weights.sum()
    return RadianceHistogram(edges, weights, centers, total_pixels=int(pilot.codes.size),
                             saturated_fraction=sat_frac,
                             tail_value=top if sat_frac > 0 else math.nan)


def total_variation_distance(a: RadianceHistogram, b: RadianceHistogram, n_bins: int = 64) -> float:
    """TV distance between two histograms after re-binning onto common log bins."""
    va, ma = a.support()
    vb, mb = b.support()
    lo = min(va.min(), vb.min())
    hi = max(va.max(), vb.max())
    edges = _log_edges(lo, hi, n_bins)
    wa, _ = _bin_values(va, ma, edges)
    wb, _ = _bin_values(vb, mb, edges)
    return 0.5 * float(np.abs(wa - wb).sum())
