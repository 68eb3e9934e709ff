import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from svexposure.metrics import (
    PSNR_CAP,
    ScoreTable,
    mu_psnr,
    mu_ssim,
    mu_tonemap,
    oracle_pattern,
    psnr,
    q_score,
    spearman_rho,
    ssim,
    top_k_delta,
)
from svexposure.validation import PreconditionError


def test_tonemap_values():
    assert mu_tonemap(0.0, 5000) == 0.0
    assert mu_tonemap(1.0, 5000) == pytest.approx(1.0)
    assert mu_tonemap(0.5, 3.0) == pytest.approx(math.log(2.5) / math.log(4))
    assert mu_tonemap(0.5, 3.0) == pytest.approx(0.660964, abs=1e-6)
    assert mu_tonemap(2.0, 10) == pytest.approx(1.0)


def test_tonemap_monotone():
    x = np.linspace(0, 1, 101)
    assert np.all(np.diff(mu_tonemap(x, 8185)) > 0)


def test_psnr_examples():
    a = np.zeros((4, 4))
    assert psnr(a, a) == PSNR_CAP
    assert psnr(a, a + 0.1) == pytest.approx(20.0)


def test_mu_psnr_identical_is_capped():
    x = np.random.default_rng(0).uniform(1, 100, (8, 8))
    assert mu_psnr(x, x, 5000) == PSNR_CAP


def test_ssim_matches_skimage():
    metrics = pytest.importorskip("skimage.metrics")
    rng = np.random.default_rng(1)
    a = rng.uniform(0, 1, (48, 48))
    b = np.clip(a + rng.normal(0, 0.1, a.shape), 0, 1)
    ref = metrics.structural_similarity(a, b, data_range=1.0, gaussian_weights=True, sigma=1.5,
                                        use_sample_covariance=False)
    assert ssim(a, b) == pytest.approx(ref, abs=1e-10)


def test_ssim_constant_pair_closed_form():
    a = np.full((16, 16), 0.2)
    b = np.full((16, 16), 0.6)
    c1 = 0.01**2
    expected = (2 * 0.2 * 0.6 + c1) / (0.2**2 + 0.6**2 + c1)
    assert ssim(a, b) == pytest.approx(expected)
    assert ssim(a, a) == pytest.approx(1.0)


def test_mu_ssim_range():
    rng = np.random.default_rng(2)
    x = rng.lognormal(3, 1.5, (32, 32))
    assert -1.0 <= mu_ssim(x * rng.uniform(0.8, 1.2, x.shape), x, 5000) <= 1.0


def test_spearman_examples():
    assert spearman_rho([1, 2, 3, 4, 5], [2, 4, 6, 8, 10]).rho == pytest.approx(1.0)
    assert spearman_rho([1, 2, 3, 4, 5], [5, 4, 3, 2, 1]).rho == pytest.approx(-1.0)
    assert spearman_rho([1, 2, 3, 4, 5], [1, 3, 2, 5, 4]).rho == pytest.approx(0.8)


def test_spearman_constant_is_undefined():
    r = spearman_rho([1, 1, 1, 1], [1, 2, 3, 4])
    assert not r.defined


def test_spearman_rejects_short_or_mismatched():
    with pytest.raises(PreconditionError):
        spearman_rho([1, 2], [1, 2])
    with pytest.raises(PreconditionError):
        spearman_rho([1, 2, 3], [1, 2])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.integers(-20, 20), st.integers(-20, 20)), min_size=4, max_size=40))
def test_spearman_matches_scipy(pairs):
    stats = pytest.importorskip("scipy.stats")
    x, y = map(np.array, zip(*pairs))
    ours = spearman_rho(x, y)
    ref = stats.spearmanr(x, y)
    if not ours.defined:
        assert math.isnan(ref.statistic)
        return
    assert ours.rho == pytest.approx(ref.statistic, abs=1e-12)
    assert ours.pvalue == pytest.approx(ref.pvalue, rel=1e-8, abs=1e-300)


def test_spearman_invariant_to_monotone_transform():
    rng = np.random.default_rng(3)
    x, y = rng.normal(size=30), rng.normal(size=30)
    assert spearman_rho(x, y).rho == pytest.approx(spearman_rho(np.exp(x), y**3).rho)


def test_top_k_delta_examples():
    assert top_k_delta([30.0], [[30.0, 29.0]], 1) == 0.0
    assert top_k_delta([30.0], [[29.0, 30.0]], 1) == pytest.approx(1.0)
    with pytest.raises(PreconditionError):
        top_k_delta([30.0], [[30.0]], 2)


def test_top_k_delta_perfect_ranking_nondecreasing():
    scores = np.sort(np.random.default_rng(4).uniform(20, 30, 50))[::-1]
    deltas = [top_k_delta([scores[0]], [scores], k) for k in range(1, 20)]
    assert deltas[0] == 0.0 and np.all(np.diff(deltas) >= 0)


def test_q_score_examples():
    assert q_score([30.0, 20.0], [30.0, 20.0], 0.01) == 0.0
    assert q_score([30.0, 20.0], [30.0, 10.0], 0.05) == 0.5


def test_score_table_and_oracle():
    scores = np.array([[[1.0]], [[3.0]], [[3.0]], [[2.0]]])
    t = ScoreTable([0, 1, 2, 3], ["lpa"], ["mu_psnr"], scores)
    assert oracle_pattern(t, "lpa", "mu_psnr") == 1
    single = ScoreTable([7], ["lpa"], ["mu_psnr"], np.array([[[5.0]]]))
    assert oracle_pattern(single, "lpa", "mu_psnr") == 7
    assert t.to_csv().splitlines()[0] == "scene,pattern_id,algorithm,metric,score"
    with pytest.raises(ValueError):
        ScoreTable([0], ["lpa"], ["mu_psnr"], np.array([[[math.nan]]]))
