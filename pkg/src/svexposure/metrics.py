"""Tone-mapped quality metrics and ranking statistics."""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage, stats

from .validation import PreconditionError, check_same_shape

PSNR_CAP = 99.0
NORMALIZATION_QUANTILE = 99.9


def mu_tonemap(x, mu: float):
    """``log(1 + mu x) / log(1 + mu)`` on ``x`` clipped to [0, 1]."""
    if mu <= 0:
        raise ValueError("mu must be positive")
    x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
    return np.log1p(mu * x) / math.log1p(mu)


def normalize_pair(estimate, truth, reference: float | None = None):
    """Divide both images by ``reference`` (default: 99.9th percentile of ``truth``) and clip to [0, 1]."""
    estimate = np.asarray(estimate, dtype=float)
    truth = np.asarray(truth, dtype=float)
    check_same_shape(estimate, truth)
    if reference is None:
        reference = float(np.percentile(truth, NORMALIZATION_QUANTILE))
    if reference <= 0:
        reference = 1.0
    return np.clip(estimate / reference, 0, 1), np.clip(truth / reference, 0, 1)


def psnr(a, b, peak: float = 1.0, cap: float = PSNR_CAP) -> float:
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    check_same_shape(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0:
        return cap
    return min(cap, 10.0 * math.log10(peak**2 / mse))


def mu_psnr(estimate, truth, mu: float, reference: float | None = None) -> float:
    """PSNR (peak 1) between mu-tone-mapped, normalized images."""
    e, t = normalize_pair(estimate, truth, reference)
    return psnr(mu_tonemap(e, mu), mu_tonemap(t, mu))


def ssim(a, b, data_range: float = 1.0, sigma: float = 1.5, k1: float = 0.01, k2: float = 0.03) -> float:
    """Mean SSIM with an 11x11 Gaussian window; borders of half a window are excluded."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    check_same_shape(a, b)
    truncate = 3.5
    radius = int(truncate * sigma + 0.5)

    def blur(img):
        return ndimage.gaussian_filter(img, sigma, mode="reflect", truncate=truncate)

    mu_a, mu_b = blur(a), blur(b)
    var_a = blur(a * a) - mu_a**2
    var_b = blur(b * b) - mu_b**2
    cov = blur(a * b) - mu_a * mu_b
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a**2 + mu_b**2 + c1) * (var_a + var_b + c2)
    smap = num / den
    if min(a.shape) > 2 * radius:
        smap = smap[radius:-radius, radius:-radius]
    return float(smap.mean())


def mu_ssim(estimate, truth, mu: float, reference: float | None = None) -> float:
    e, t = normalize_pair(estimate, truth, reference)
    return ssim(mu_tonemap(e, mu), mu_tonemap(t, mu))


@dataclass(frozen=True)
class SpearmanResult:
    rho: float
    pvalue: float

    @property
    def defined(self) -> bool:
        return math.isfinite(self.rho)


def spearman_rho(xs: Sequence[float], ys: Sequence[float], alternative: str = "two-sided") -> SpearmanResult:
    """Spearman rank correlation with average ranks for ties.

    The p-value uses the t approximation ``t = rho * sqrt((n-2) / (1-rho^2))``
    with ``n - 2`` degrees of freedom. A constant input gives NaN.
    """
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape or x.ndim != 1:
        raise PreconditionError("spearman_rho needs two equal-length 1-D sequences")
    n = len(x)
    if n < 3:
        raise PreconditionError("spearman_rho needs at least 3 observations")
    rx = stats.rankdata(x)
    ry = stats.rankdata(y)
    dx = rx - rx.mean()
    dy = ry - ry.mean()
    denom = math.sqrt(float(dx @ dx) * float(dy @ dy))
    if denom == 0:
        return SpearmanResult(math.nan, math.nan)
    rho = float(np.clip((dx @ dy) / denom, -1.0, 1.0))
    dof = n - 2
    if abs(rho) == 1.0:
        t = math.copysign(math.inf, rho)
    else:
        t = rho * math.sqrt(dof / ((1.0 - rho) * (1.0 + rho)))
    if alternative == "two-sided":
        p = 2 * stats.t.sf(abs(t), dof)
    elif alternative == "greater":
        p = stats.t.sf(t, dof)
    elif alternative == "less":
        p = stats.t.cdf(t, dof)
    else:
        raise ValueError(f"unknown alternative {alternative!r}")
    return SpearmanResult(rho, float(p))


def top_k_delta(oracle_scores: Sequence[float], ranked_scores: Sequence[Sequence[float]], k: int) -> float:
    """Average score drop of the top-``k`` risk-ranked patterns against the oracle.

    ``ranked_scores[n]`` lists scene ``n``'s pattern scores in risk order.
    """
    oracle = np.asarray(oracle_scores, dtype=float)
    if k < 1:
        raise PreconditionError("k must be >= 1")
    total = 0.0
    for best, ranked in zip(oracle, ranked_scores, strict=True):
        ranked = np.asarray(ranked, dtype=float)
        if k > len(ranked):
            raise PreconditionError(f"k={k} exceeds the {len(ranked)} candidates")
        total += float(np.sum(best - ranked[:k]))
    return total / (len(oracle) * k)


def q_score(oracle_scores: Sequence[float], top1_scores: Sequence[float], eta: float) -> float:
    """Fraction of scenes whose top-1 relative drop exceeds ``eta``."""
    best = np.asarray(oracle_scores, dtype=float)
    top1 = np.asarray(top1_scores, dtype=float)
    check_same_shape(best, top1)
    return float(np.mean((best - top1) / best > eta))


@dataclass
class ScoreTable:
    """Scores ``s[i, j, k]`` for pattern ``i``, algorithm ``j`` and metric ``k``."""

    pattern_ids: list[int]
    algorithms: list[str]
    metrics: list[str]
    scores: np.ndarray = field(repr=False)

    def __post_init__(self):
        self.scores = np.asarray(self.scores, dtype=float)
        expected = (len(self.pattern_ids), len(self.algorithms), len(self.metrics))
        if self.scores.shape != expected:
            raise ValueError(f"score array shape {self.scores.shape} != {expected}")
        if not np.all(np.isfinite(self.scores)):
            raise ValueError("scores must be finite")

    def column(self, algorithm: str, metric: str) -> np.ndarray:
        return self.scores[:, self.algorithms.index(algorithm), self.metrics.index(metric)]

    def to_csv(self, path=None, scene: str | None = None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["scene", "pattern_id", "algorithm", "metric", "score"])
        for i, pid in enumerate(self.pattern_ids):
            for j, alg in enumerate(self.algorithms):
                for k, met in enumerate(self.metrics):
                    w.writerow([scene or "", pid, alg, met, f"{self.scores[i, j, k]:.10g}"])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    def to_dict(self) -> dict:
        return {
            "pattern_ids": list(self.pattern_ids),
            "algorithms": list(self.algorithms),
            "metrics": list(self.metrics),
            "scores": self.scores.tolist(),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def oracle_pattern(table: ScoreTable, algorithm: str, metric: str) -> int:
    """Id of the highest-scoring pattern; ties go to the lower id."""
    col = table.column(algorithm, metric)
    best = col.max()
    candidates = [pid for pid, s in zip(table.pattern_ids, col) if s == best]
    return min(candidates)
