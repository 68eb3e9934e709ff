"""scikit-learn style wrappers around pattern selection and reconstruction."""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .histogram import DEFAULT_BINS, RadianceHistogram, build_histogram, pilot_pattern
from .patterns import LevelSet, enumerate_classes
from .reconstruct import admm_tv_reconstruct, lpa_reconstruct, observation_field
from .risk import Estimator, build_neighbor_table, rank_patterns
from .scenes import downsample
from .sensor import RawCapture, SensorConfig, simulate_capture
from .validation import PreconditionError, check_radiance


class PatternSelector(BaseEstimator):
    """Rank every pattern class of a level set by a risk estimator.

    ``fit`` accepts a ground-truth radiance map (a pilot is simulated from it
    for the SVE variants), a pilot :class:`RawCapture`, or a ready
    :class:`RadianceHistogram` (SVE variants only).

    Attributes set by ``fit``: ``histogram_`` (``None`` for SNR variants),
    ``report_``, ``best_pattern_`` and ``n_patterns_``.
    """

    def __init__(self, estimator="sve", config=None, levels=None, neighborhood=3,
                 bins=DEFAULT_BINS, pilot_downsample=4, seed=0):
        self.estimator = estimator
        self.config = config
        self.levels = levels
        self.neighborhood = neighborhood
        self.bins = bins
        self.pilot_downsample = pilot_downsample
        self.seed = seed

    def _resolved(self):
        config = self.config if self.config is not None else SensorConfig()
        levels = self.levels if self.levels is not None else LevelSet.default()
        return Estimator(self.estimator), config, levels

    def _risk_input(self, X, estimator, config, levels):
        if isinstance(X, RadianceHistogram):
            if not estimator.needs_histogram:
                raise PreconditionError(f"{estimator.value} needs a ground-truth radiance map")
            return X
        if isinstance(X, RawCapture):
            if not estimator.needs_histogram:
                raise PreconditionError(f"{estimator.value} needs a ground-truth radiance map")
            return build_histogram(X, bins=self.bins)
        theta = check_radiance(X)
        if not estimator.needs_histogram:
            return check_radiance(theta, even=True)
        small = downsample(theta, self.pilot_downsample)
        pilot = simulate_capture(small, pilot_pattern(levels), config, seed=self.seed)
        return build_histogram(pilot, bins=self.bins)

    def fit(self, X, y=None):
        estimator, config, levels = self._resolved()
        data = self._risk_input(X, estimator, config, levels)
        patterns = list(enumerate_classes(levels))
        table = build_neighbor_table(self.neighborhood)
        self.report_ = rank_patterns(estimator, data, patterns, config, table, seed=self.seed)
        self.histogram_ = data if isinstance(data, RadianceHistogram) else None
        self.best_pattern_ = self.report_.top.pattern
        self.n_patterns_ = len(patterns)
        return self

    def predict(self, X):
        """Top-ranked pattern for ``X`` (does not change the fitted state)."""
        estimator, config, levels = self._resolved()
        data = self._risk_input(X, estimator, config, levels)
        patterns = list(enumerate_classes(levels))
        report = rank_patterns(estimator, data, patterns, config, build_neighbor_table(self.neighborhood))
        return report.top.pattern

    def risks(self) -> np.ndarray:
        """Risk per candidate, indexed by pattern id."""
        check_is_fitted(self, "report_")
        out = np.empty(self.n_patterns_)
        for row in self.report_.rows:
            out[row.pattern_id] = row.risk.report_value
        return out


class _Reconstructor(TransformerMixin, BaseEstimator):
    def fit(self, X=None, y=None):
        # stateless: nothing to learn
        self.is_fitted_ = True
        return self

    def _field(self, X):
        if isinstance(X, RawCapture):
            return observation_field(X)
        raise PreconditionError(f"expected a RawCapture, got {type(X).__name__}")


class LPAReconstructor(_Reconstructor):
    """Degree-1 local polynomial approximation over a ``window x window`` neighborhood."""

    def __init__(self, window=7, scale=1.0):
        self.window = window
        self.scale = scale

    def transform(self, X):
        return lpa_reconstruct(self._field(X), window=self.window, scale=self.scale)


class ADMMTVReconstructor(_Reconstructor):
    """Plug-and-play ADMM with a total-variation denoiser; ``n_iter_`` records the last run."""

    def __init__(self, lam=1.0, max_iters=30, rho=1.0, tol=1e-4):
        self.lam = lam
        self.max_iters = max_iters
        self.rho = rho
        self.tol = tol

    def transform(self, X):
        out, info = admm_tv_reconstruct(self._field(X), lam=self.lam, max_iters=self.max_iters,
                                        rho=self.rho, tol=self.tol, return_info=True)
        self.n_iter_ = info.iterations
        self.converged_ = info.converged
        return out
