"""Evaluation drivers: the pilot-to-reconstruction pipeline, exhaustive pattern
scoring, ranking statistics, universality correlations and risk timing."""
from __future__ import annotations

import itertools
import logging
import timeit
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import metrics as M
from .histogram import DEFAULT_BINS, RadianceHistogram, build_histogram, pilot_pattern
from .patterns import LevelSet, Pattern, enumerate_classes
from .reconstruct import RECONSTRUCTORS, admm_tv_reconstruct, lpa_reconstruct, observation_field
from .risk import Estimator, RankReport, build_neighbor_table, rank_patterns
from .scenes import downsample
from .sensor import CaptureSimulator, RawCapture, SensorConfig, simulate_capture

log = logging.getLogger(__name__)

DEFAULT_ESTIMATORS = ("sve", "sve_wo", "snr", "snr_mse")
DEFAULT_RECONSTRUCTORS = ("lpa", "admm-tv")
DEFAULT_METRICS = ("mu_psnr", "mu_ssim")
DEFAULT_THRESHOLDS = (0.01, 0.05)
DEFAULT_PILOT_DOWNSAMPLE = 4
# ranks patterns by their realized scores; a perfect-estimator reference
ORACLE_RANKING = "oracle"

# stream labels for seed derivation
PILOT_STREAM = 0
CAPTURE_STREAM = 1


def derive_seed(seed: int, *keys: int) -> int:
    """Child seed for ``keys`` (e.g. scene index, stream label) from the run seed."""
    ss = np.random.SeedSequence([int(seed), *(int(k) for k in keys)])
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


def tonemap_mu(config: SensorConfig) -> float:
    """mu for the tone curve: the ADC's top reference level (post-gain electrons)."""
    return float(config.adc_upper)


def score_image(estimate, truth, metric: str, mu: float, reference: float | None = None) -> float:
    if metric == "mu_psnr":
        return M.mu_psnr(estimate, truth, mu, reference)
    if metric == "mu_ssim":
        return M.mu_ssim(estimate, truth, mu, reference)
    raise ValueError(f"unknown metric {metric!r}")


def _reconstruct_all(capture, names) -> dict[str, np.ndarray]:
    # ADMM-TV starts from LPA, so share that estimate when both run
    out = {}
    field = observation_field(capture)
    if "lpa" in names or "admm-tv" in names:
        out["lpa"] = lpa_reconstruct(field)
    for name in names:
        if name == "admm-tv":
            out[name] = admm_tv_reconstruct(field, init=out["lpa"])
        elif name not in out:
            out[name] = RECONSTRUCTORS[name](field)
    return out


def pilot_histogram(radiance, config: SensorConfig, levels: LevelSet, seed: int,
                    factor: int = DEFAULT_PILOT_DOWNSAMPLE, bins: int = DEFAULT_BINS
                    ) -> tuple[RadianceHistogram, RawCapture]:
    """Capture a low-resolution pilot with the high-medium-medium-low pattern and histogram it."""
    small = downsample(np.asarray(radiance, dtype=float), factor)
    pilot = simulate_capture(small, pilot_pattern(levels), config, seed=seed)
    return build_histogram(pilot, bins=bins), pilot


def rank_all(radiance, hist: RadianceHistogram, patterns: list[Pattern], config: SensorConfig,
             estimators=DEFAULT_ESTIMATORS, neighborhood: int = 3, seed: int | None = None
             ) -> dict[str, RankReport]:
    table = build_neighbor_table(neighborhood)
    reports = {}
    for est in estimators:
        data = hist if Estimator(est).needs_histogram else radiance
        reports[est] = rank_patterns(est, data, patterns, config, table, seed=seed)
    return reports


def score_patterns(radiance, patterns: list[Pattern], config: SensorConfig, seed: int,
                   reconstructors=DEFAULT_RECONSTRUCTORS, metrics=DEFAULT_METRICS) -> M.ScoreTable:
    """Capture, reconstruct and score every pattern with shared per-pixel noise."""
    truth = np.asarray(radiance, dtype=float)
    sim = CaptureSimulator(truth, config, seed=seed)
    mu = tonemap_mu(config)
    ref = float(np.percentile(truth, M.NORMALIZATION_QUANTILE))
    scores = np.zeros((len(patterns), len(reconstructors), len(metrics)))
    for name in reconstructors:
        if name not in RECONSTRUCTORS:
            raise ValueError(f"unknown reconstructor {name!r}")
    for i, pattern in enumerate(patterns):
        estimates = _reconstruct_all(sim.capture(pattern), reconstructors)
        for j, name in enumerate(reconstructors):
            for k, metric in enumerate(metrics):
                scores[i, j, k] = score_image(estimates[name], truth, metric, mu, ref)
    return M.ScoreTable(list(range(len(patterns))), list(reconstructors), list(metrics), scores)


@dataclass
class SceneEvaluation:
    name: str
    scores: M.ScoreTable
    reports: dict[str, RankReport]
    histogram: RadianceHistogram | None = None

    def ranked_scores(self, estimator: str, algorithm: str, metric: str) -> np.ndarray:
        col = self.scores.column(algorithm, metric)
        if estimator == ORACLE_RANKING:
            return col[np.argsort(-col, kind="stable")]
        return col[self.reports[estimator].pattern_ids()]

    def oracle_score(self, algorithm: str, metric: str) -> float:
        return float(self.scores.column(algorithm, metric).max())

    def oracle_id(self, algorithm: str, metric: str) -> int:
        return M.oracle_pattern(self.scores, algorithm, metric)


def evaluate_scene(radiance, config: SensorConfig, levels: LevelSet, seed: int, name: str = "scene",
                   estimators=DEFAULT_ESTIMATORS, reconstructors=DEFAULT_RECONSTRUCTORS,
                   metrics=DEFAULT_METRICS, pilot_factor: int = DEFAULT_PILOT_DOWNSAMPLE,
                   bins: int = DEFAULT_BINS, neighborhood: int = 3) -> SceneEvaluation:
    patterns = list(enumerate_classes(levels))
    hist, _ = pilot_histogram(radiance, config, levels, derive_seed(seed, PILOT_STREAM), pilot_factor, bins)
    reports = rank_all(radiance, hist, patterns, config, estimators, neighborhood, seed=seed)
    scores = score_patterns(radiance, patterns, config, derive_seed(seed, CAPTURE_STREAM),
                            reconstructors, metrics)
    return SceneEvaluation(name, scores, reports, hist)


def _evaluate_job(args):
    return evaluate_scene(*args[0], **args[1])


def evaluate_scenes(scenes: list[tuple[str, np.ndarray]], config: SensorConfig, levels: LevelSet,
                    seed: int, workers: int = 1, **kwargs) -> list[SceneEvaluation]:
    """Evaluate scenes; scene ``n`` uses the child seed ``derive_seed(seed, n)``.

    Results do not depend on ``workers``.
    """
    jobs = [((rad, config, levels, derive_seed(seed, n), name), kwargs)
            for n, (name, rad) in enumerate(scenes)]
    if workers <= 1:
        return [_evaluate_job(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_evaluate_job, jobs))


@dataclass
class RankingStats:
    estimator: str
    algorithm: str
    metric: str
    delta: dict[int, float] = field(default_factory=dict)
    q: dict[float, float] = field(default_factory=dict)
    per_scene_delta1: list[float] = field(default_factory=list)


def ranking_statistics(evals: list[SceneEvaluation], estimators=DEFAULT_ESTIMATORS,
                       ks=(1, 5), etas=DEFAULT_THRESHOLDS) -> list[RankingStats]:
    out = []
    first = evals[0].scores
    for est in estimators:
        for alg in first.algorithms:
            for met in first.metrics:
                oracle = [e.oracle_score(alg, met) for e in evals]
                ranked = [e.ranked_scores(est, alg, met) for e in evals]
                st = RankingStats(est, alg, met)
                for k in ks:
                    st.delta[k] = M.top_k_delta(oracle, ranked, k)
                for eta in etas:
                    st.q[eta] = M.q_score(oracle, [r[0] for r in ranked], eta)
                st.per_scene_delta1 = [o - r[0] for o, r in zip(oracle, ranked)]
                out.append(st)
    return out


@dataclass
class Correlation:
    scene: str
    algorithm_a: str
    algorithm_b: str
    metric: str
    rho: float
    pvalue: float


def universality(evals: list[SceneEvaluation]) -> list[Correlation]:
    """Spearman correlation of pattern scores for every algorithm pair, metric and scene."""
    out = []
    for e in evals:
        t = e.scores
        for a, b in itertools.combinations(t.algorithms, 2):
            for met in t.metrics:
                res = M.spearman_rho(t.column(a, met), t.column(b, met))
                out.append(Correlation(e.name, a, b, met, res.rho, res.pvalue))
    return out


def scatter_rows(ev: SceneEvaluation, algorithm: str, metric: str) -> list[dict]:
    """Risk rank versus score for every estimator (plus the score-sorted ideal)."""
    rows = []
    col = ev.scores.column(algorithm, metric)
    ideal = np.argsort(-col, kind="stable")
    for rank, pid in enumerate(ideal, start=1):
        rows.append({"scene": ev.name, "ranking": ORACLE_RANKING, "rank": rank, "pattern_id": int(pid),
                     "score": float(col[pid])})
    for est, report in ev.reports.items():
        for row in report.rows:
            rows.append({"scene": ev.name, "ranking": est, "rank": row.rank,
                         "pattern_id": row.pattern_id, "score": float(col[row.pattern_id])})
    return rows


@dataclass
class BenchRow:
    estimator: str
    height: int
    width: int
    mean_seconds: float
    std_seconds: float
    repeats: int
    n_patterns: int


def bench_risks(config: SensorConfig, levels: LevelSet, resolutions: list[tuple[int, int]],
                repeats: int = 100, seed: int = 0, bins: int = DEFAULT_BINS,
                scene_kind: str = "hdr-composite") -> list[BenchRow]:
    """Time SVE-Risk (histogram) and SNR-Risk (full image) over all classes per resolution.

    The histogram is built before timing starts, so the SVE timing covers only
    risk evaluation, as for SNR-Risk. Each estimator gets one untimed warm-up
    run, and timing goes through :mod:`timeit`, which keeps the garbage
    collector out of the measurement.
    """
    from .histogram import histogram_from_radiance
    from .scenes import synth_scene

    patterns = list(enumerate_classes(levels))
    table = build_neighbor_table(3)
    rows = []
    for h, w in resolutions:
        scene = synth_scene(scene_kind, w, h, config, levels, seed=seed)
        hist = histogram_from_radiance(scene, bins=bins)
        for est, data in (("sve", hist), ("snr", scene)):
            def run(est=est, data=data):
                rank_patterns(est, data, patterns, config, table)

            run()
            times = timeit.repeat(run, number=1, repeat=repeats)
            rows.append(BenchRow(est, h, w, float(np.mean(times)), float(np.std(times)), repeats,
                                 len(patterns)))
            log.info("bench %s %dx%d: %.4f s", est, h, w, rows[-1].mean_seconds)
    return rows


@dataclass
class PipelineResult:
    histogram: RadianceHistogram
    report: RankReport
    capture: RawCapture
    reconstruction: np.ndarray
    metrics: dict


def run_pipeline(radiance, config: SensorConfig, levels: LevelSet, seed: int,
                 estimator: str = "sve", reconstructor: str = "lpa",
                 pilot_factor: int = DEFAULT_PILOT_DOWNSAMPLE, bins: int = DEFAULT_BINS,
                 neighborhood: int = 3) -> PipelineResult:
    """Pilot -> histogram -> rank all classes -> capture with the top pattern -> reconstruct -> score."""
    truth = np.asarray(radiance, dtype=float)
    hist, _ = pilot_histogram(truth, config, levels, derive_seed(seed, PILOT_STREAM), pilot_factor, bins)
    patterns = list(enumerate_classes(levels))
    data = hist if Estimator(estimator).needs_histogram else truth
    report = rank_patterns(estimator, data, patterns, config, build_neighbor_table(neighborhood), seed=seed)
    best = report.top.pattern
    capture = simulate_capture(truth, best, config, seed=derive_seed(seed, CAPTURE_STREAM))
    recon = RECONSTRUCTORS[reconstructor](capture)
    mu = tonemap_mu(config)
    scores = {
        "mu_psnr": M.mu_psnr(recon, truth, mu),
        "mu_ssim": M.mu_ssim(recon, truth, mu),
        "estimator": estimator,
        "reconstructor": reconstructor,
        "top_pattern": best.to_dict(),
        "top_risk": report.top.risk.report_value,
        "seed": seed,
    }
    return PipelineResult(hist, report, capture, recon, scores)
