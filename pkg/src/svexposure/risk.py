"""Pattern risk estimators and ranking.

Every estimator first canonicalizes the pattern, so all permutations of a
pattern receive bit-identical risk values. Risks are reported per pixel
(density-normalized); multiply by the pixel count for image totals.
"""
from __future__ import annotations

import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Sequence

import numpy as np
from scipy import ndimage

from .histogram import RADIANCE_FLOOR, RadianceHistogram
from .patterns import Pattern, canonicalize
from .sensor import SensorConfig, normalize_readout, pattern_maps, simulate_capture
from .validation import PreconditionError, check_odd_window, check_radiance

# element rank (ascending tau*alpha) at each position of the canonical tile
RANK_LAYOUT = np.array([[0, 2], [3, 1]])

INF_SENTINEL = sys.float_info.max


class Estimator(str, Enum):
    SVE = "sve"
    SVE_WO = "sve_wo"
    SNR = "snr"
    SNR_MSE = "snr_mse"

    @property
    def needs_histogram(self) -> bool:
        return self in (Estimator.SVE, Estimator.SVE_WO)


@dataclass(frozen=True)
class RiskValue:
    total: float
    recoverable: float = 0.0
    nonrecoverable: float = 0.0

    @property
    def infinite(self) -> bool:
        return not math.isfinite(self.total)

    @property
    def report_value(self) -> float:
        return INF_SENTINEL if self.infinite else self.total


# ---------------------------------------------------------------- neighbor table


@dataclass(frozen=True, eq=False)
class NeighborCountTable:
    """Unsaturated pixel counts in an ``n x n`` window of the tiled canonical layout.

    ``counts[l, s]`` is the count around an element-``l`` pixel (elements
    ranked by product) when the ``s`` largest-product elements saturate.
    """

    neighborhood: int
    counts: np.ndarray

    def lookup(self, element: int, case: int) -> int:
        return int(self.counts[element, case])


def count_unsaturated(n: int, saturated: Iterable[int], layout: np.ndarray = RANK_LAYOUT) -> np.ndarray:
    """Unsaturated pixels within the ``n x n`` window of each element, by parity counting.

    Offsets ``(dy, dx)`` land on the element at ``layout[(r+dy) % 2][(c+dx) % 2]``.
    """
    r = n // 2
    saturated = set(saturated)
    out = np.zeros(4, dtype=int)
    for row in range(2):
        for col in range(2):
            elem = layout[row, col]
            total = 0
            for dy in range(-r, r + 1):
                for dx in range(-r, r + 1):
                    if layout[(row + dy) % 2, (col + dx) % 2] not in saturated:
                        total += 1
            out[elem] = total
    return out


def build_neighbor_table(n: int = 3) -> NeighborCountTable:
    n = check_odd_window(n)
    counts = np.zeros((4, 4), dtype=int)
    for s in range(4):
        counts[:, s] = count_unsaturated(n, range(4 - s, 4))
    counts.setflags(write=False)
    return NeighborCountTable(n, counts)


def _as_table(table) -> NeighborCountTable:
    if table is None:
        return build_neighbor_table(3)
    if isinstance(table, NeighborCountTable):
        return table
    return build_neighbor_table(int(table))


# ---------------------------------------------------------------- helpers


def _measurement_variance(theta, tau, alpha, config: SensorConfig):
    """Variance of a normalized measurement: ``(theta + mu_dark)/tau + sigma^2/(alpha^2 tau^2)``."""
    return (theta + config.dark_current) / tau + config.read_noise_base**2 / (alpha**2 * tau**2)


def _sorted_elements(pattern: Pattern):
    lv = canonicalize(pattern).sorted_levels()
    tau = np.array([x.tau for x in lv])
    alpha = np.array([x.alpha for x in lv])
    return tau, alpha


def cutoffs(pattern: Pattern, config: SensorConfig) -> np.ndarray:
    """Saturation radiance of each element, elements ascending by product."""
    tau, alpha = _sorted_elements(pattern)
    return config.v_max / (tau * alpha)


# ---------------------------------------------------------------- SNR family


def _snr_parts(theta, pattern, config):
    canon = canonicalize(pattern)
    tau, alpha = pattern_maps(canon, theta.shape)
    signal = alpha * tau * theta
    unsat = signal <= config.v_max
    noise = np.sqrt(alpha**2 * (tau * theta + config.dark_current) + config.read_noise_base**2)
    with np.errstate(divide="ignore", invalid="ignore"):
        snr = np.where(unsat, signal / noise, 0.0)
    snr = np.nan_to_num(snr, nan=0.0)
    return canon, snr, unsat


def _reciprocal(mean: float) -> float:
    return math.inf if mean <= 0 else 1.0 / mean


def snr_risk(radiance, pattern: Pattern, config: SensorConfig) -> RiskValue:
    """Reciprocal of the mean per-pixel SNR; saturated pixels have SNR 0."""
    theta = check_radiance(radiance, even=True)
    _, snr, _ = _snr_parts(theta, pattern, config)
    r = _reciprocal(float(snr.mean()))
    return RiskValue(r, recoverable=r)


def snr_mse_risk(radiance, pattern: Pattern, config: SensorConfig, readout=None) -> RiskValue:
    """SNR-Risk with overflowing pixels scored by their normalized-readout error.

    Unsaturated pixels contribute the reciprocal of their mean SNR weighted by
    their fraction of the image; saturated pixels add the mean of
    ``(y / (alpha tau) - theta)^2`` over the image, where the normalized
    readout comes from ``readout`` or a noise-free simulation.
    """
    theta = check_radiance(radiance, even=True)
    canon, snr, unsat = _snr_parts(theta, pattern, config)
    n = theta.size
    n_unsat = int(unsat.sum())
    if n_unsat == n:
        r = _reciprocal(float(snr.mean()))
        return RiskValue(r, recoverable=r)
    if readout is None:
        readout = simulate_capture(theta, canon, config, noise_enabled=False)
    tau, alpha = pattern_maps(readout.pattern, theta.shape)
    theta_hat, _ = normalize_readout(readout.codes, tau, alpha, config)
    sat = ~unsat
    mse = float(np.sum((theta_hat[sat] - theta[sat]) ** 2)) / n
    rec = 0.0 if n_unsat == 0 else (n_unsat / n) * _reciprocal(float(snr[unsat].mean()))
    return RiskValue(rec + mse, recoverable=rec, nonrecoverable=mse)


# ---------------------------------------------------------------- SVE family


def sve_risk_map(radiance, pattern: Pattern, config: SensorConfig, table=None):
    """Per-pixel SVE-Risk terms from ground-truth radiance.

    Returns ``(risk, nonrecoverable)``: the risk of every pixel and the mask of
    pixels whose whole neighborhood is saturated. Neighborhoods wrap around
    the image edges, which keeps the 2x2 tiling intact. A pixel with no
    unsaturated neighbor scores the squared gap to the largest cutoff in its
    neighborhood (the lowest-product element's for ``n >= 3``).
    """
    table = _as_table(table)
    theta = check_radiance(radiance, even=True)
    theta = np.maximum(theta, RADIANCE_FLOOR)
    canon = canonicalize(pattern)
    tau, alpha = pattern_maps(canon, theta.shape)
    cut = config.v_max / (tau * alpha)
    sat = theta > cut

    n = table.neighborhood
    kernel = np.ones((n, n))
    n_unsat = ndimage.correlate((~sat).astype(float), kernel, mode="wrap")
    own = _measurement_variance(theta, tau, alpha, config) / (theta**2 * np.maximum(n_unsat, 1))
    own_unsat = np.where(sat, -np.inf, own)
    worst = ndimage.maximum_filter(own_unsat, size=n, mode="wrap")

    case2 = sat & np.isfinite(worst)
    case3 = sat & ~np.isfinite(worst)
    # a fully saturated neighborhood is bounded below by its largest cutoff
    bound = ndimage.maximum_filter(cut, size=n, mode="wrap")
    risk = np.where(~sat, own, 0.0)
    risk = np.where(case2, worst, risk)
    risk = np.where(case3, (bound - theta) ** 2, risk)
    return risk, case3


def sve_risk_pixelwise(radiance, pattern: Pattern, config: SensorConfig, table=None,
                       normalize: bool = True) -> RiskValue:
    """Reference SVE-Risk summed pixel by pixel (see :func:`sve_risk_map`).

    With ``normalize`` the total is divided by the pixel count.
    """
    risk, case3 = sve_risk_map(radiance, pattern, config, table)
    rec = float(risk[~case3].sum())
    nonrec = float(risk[case3].sum())
    scale = 1.0 / risk.size if normalize else 1.0
    return RiskValue((rec + nonrec) * scale, recoverable=rec * scale, nonrecoverable=nonrec * scale)


def _sve_hist(hist: RadianceHistogram, pattern: Pattern, config: SensorConfig,
              table: NeighborCountTable, use_counts: bool) -> RiskValue:
    values, masses = hist.support()
    if values.size == 0:
        return RiskValue(0.0)
    theta = np.maximum(values, RADIANCE_FLOOR)
    tau, alpha = _sorted_elements(pattern)
    cut = config.v_max / (tau * alpha)
    sat = theta[:, None] > cut[None, :]
    n_sat = sat.sum(axis=1)

    all_sat = n_sat == 4
    nonrec = np.where(all_sat, (cut[0] - theta) ** 2, 0.0)

    if use_counts:
        counts = table.counts[:, np.minimum(n_sat, 3)].T.astype(float)
    else:
        counts = np.ones_like(sat, dtype=float)
    var = _measurement_variance(theta[:, None], tau[None, :], alpha[None, :], config)
    per_elem = var / (np.maximum(counts, 1.0) * theta[:, None] ** 2)
    unsat_risk = np.where(sat, 0.0, per_elem)
    # saturated elements take the risk of the worst unsaturated neighbor
    worst = np.where(sat, -np.inf, per_elem).max(axis=1)
    rec = np.where(all_sat, 0.0, 0.25 * (unsat_risk.sum(axis=1) + n_sat * np.where(all_sat, 0.0, worst)))

    r_rec = float(np.dot(masses, rec))
    r_non = float(np.dot(masses, nonrec))
    return RiskValue(r_rec + r_non, recoverable=r_rec, nonrecoverable=r_non)


def sve_risk_hist(hist: RadianceHistogram, pattern: Pattern, config: SensorConfig, table=None) -> RiskValue:
    """SVE-Risk integrated over a radiance histogram (cost independent of image size)."""
    return _sve_hist(hist, pattern, config, _as_table(table), use_counts=True)


def sve_risk_wo(hist: RadianceHistogram, pattern: Pattern, config: SensorConfig, table=None) -> RiskValue:
    """SVE-Risk with every neighbor count replaced by 1."""
    return _sve_hist(hist, pattern, config, _as_table(table), use_counts=False)


# ---------------------------------------------------------------- ranking


@dataclass(frozen=True)
class RankRow:
    pattern_id: int
    pattern: Pattern
    risk: RiskValue
    rank: int = 0


@dataclass
class RankReport:
    estimator: str
    rows: list[RankRow] = field(default_factory=list)
    seed: int | None = None

    @property
    def top(self) -> RankRow:
        return self.rows[0]

    def pattern_ids(self) -> list[int]:
        return [r.pattern_id for r in self.rows]

    def risk_by_id(self) -> dict[int, float]:
        return {r.pattern_id: r.risk.total for r in self.rows}

    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["rank", "pattern_id", "tau1", "tau2", "tau3", "tau4",
                         "alpha1", "alpha2", "alpha3", "alpha4", "risk", "infinite", "estimator", "seed"])
        for row in self.rows:
            p = row.pattern
            writer.writerow([row.rank, row.pattern_id, *(f"{t:.17g}" for t in p.tau),
                             *(f"{a:.17g}" for a in p.alpha), f"{row.risk.report_value:.17g}",
                             int(row.risk.infinite), self.estimator,
                             "" if self.seed is None else self.seed])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def to_dict(self) -> dict:
        return {
            "estimator": self.estimator,
            "seed": self.seed,
            "rows": [
                {
                    "rank": r.rank,
                    "pattern_id": r.pattern_id,
                    "tau": list(r.pattern.tau),
                    "alpha": list(r.pattern.alpha),
                    "risk": r.risk.report_value,
                    "infinite": r.risk.infinite,
                    "recoverable": r.risk.recoverable,
                    "nonrecoverable": r.risk.nonrecoverable,
                }
                for r in self.rows
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def evaluate_risk(estimator, data, pattern: Pattern, config: SensorConfig, table=None) -> RiskValue:
    estimator = Estimator(estimator)
    if estimator.needs_histogram:
        if not isinstance(data, RadianceHistogram):
            raise PreconditionError(f"{estimator.value} risk needs a RadianceHistogram")
        fn = sve_risk_hist if estimator is Estimator.SVE else sve_risk_wo
        return fn(data, pattern, config, table)
    if isinstance(data, RadianceHistogram):
        raise PreconditionError(f"{estimator.value} risk needs a ground-truth radiance map")
    if estimator is Estimator.SNR:
        return snr_risk(data, pattern, config)
    return snr_mse_risk(data, pattern, config)


def rank_patterns(estimator, data, candidates: Iterable[Pattern] | Sequence[Pattern],
                  config: SensorConfig, table=None, seed: int | None = None) -> RankReport:
    """Rank candidate patterns by ascending risk.

    SVE variants take a :class:`RadianceHistogram`; SNR variants take a
    ground-truth radiance map. Ties break on the canonical pattern's
    lexicographic order. Pattern ids are positions in ``candidates``.
    """
    estimator = Estimator(estimator)
    table = _as_table(table)
    if not estimator.needs_histogram and not isinstance(data, RadianceHistogram):
        data = check_radiance(data, even=True)
    scored = []
    for pid, pattern in enumerate(candidates):
        risk = evaluate_risk(estimator, data, pattern, config, table)
        scored.append((pid, canonicalize(pattern), risk))
    if not scored:
        raise PreconditionError("no candidate patterns to rank")
    scored.sort(key=lambda item: (item[2].infinite, item[2].report_value, item[1].sort_key()))
    rows = [RankRow(pid, pat, risk, rank=i + 1) for i, (pid, pat, risk) in enumerate(scored)]
    return RankReport(estimator.value, rows, seed)
