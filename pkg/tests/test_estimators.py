import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from svexposure import (
    ADMMTVReconstructor,
    LPAReconstructor,
    PatternSelector,
    Pattern,
    build_histogram,
    build_neighbor_table,
    enumerate_classes,
    pilot_pattern,
    rank_patterns,
    simulate_capture,
    synth_scene,
)
from svexposure.reconstruct import admm_tv_reconstruct, lpa_reconstruct
from svexposure.validation import PreconditionError


@pytest.fixture(scope="module")
def scene():
    return synth_scene("hdr-composite", 32, 32, seed=3)


def test_params_round_trip():
    sel = PatternSelector(estimator="snr", neighborhood=5)
    assert sel.get_params()["neighborhood"] == 5
    other = clone(sel).set_params(estimator="sve_wo")
    assert other.estimator == "sve_wo" and sel.estimator == "snr"
    assert LPAReconstructor(window=5).get_params() == {"window": 5, "scale": 1.0}


def test_selector_matches_functional_api(scene, config, levels):
    sel = PatternSelector(seed=7).fit(scene)
    assert sel.n_patterns_ == 495
    assert sel.risks().shape == (495,)
    assert sel.best_pattern_ == sel.report_.top.pattern
    assert sel.predict(scene) == sel.best_pattern_

    from svexposure.scenes import downsample

    pilot = simulate_capture(downsample(scene, 4), pilot_pattern(levels), config, seed=7)
    report = rank_patterns("sve", build_histogram(pilot), list(enumerate_classes(levels)), config,
                           build_neighbor_table(3))
    assert report.top.pattern == sel.best_pattern_


def test_selector_inputs(scene, config, levels):
    pilot = simulate_capture(scene, pilot_pattern(levels), config, seed=1)
    hist = build_histogram(pilot)
    a = PatternSelector().fit(pilot)
    b = PatternSelector().fit(hist)
    assert a.best_pattern_ == b.best_pattern_
    assert PatternSelector(estimator="snr").fit(scene).histogram_ is None
    with pytest.raises(PreconditionError):
        PatternSelector(estimator="snr").fit(hist)


def test_selector_not_fitted():
    with pytest.raises(NotFittedError):
        PatternSelector().risks()


def test_reconstructors_match_functions(scene, config):
    cap = simulate_capture(scene, Pattern((0.25, 1, 0.5, 1), (1, 10, 80, 1)), config, seed=2)
    assert np.array_equal(LPAReconstructor().fit(cap).transform(cap), lpa_reconstruct(cap))
    admm = ADMMTVReconstructor(max_iters=10)
    assert np.array_equal(admm.fit_transform(cap), admm_tv_reconstruct(cap, max_iters=10))
    assert 1 <= admm.n_iter_ <= 10
    with pytest.raises(PreconditionError):
        LPAReconstructor().transform(scene)
