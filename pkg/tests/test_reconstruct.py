import numpy as np
import pytest

from svexposure.patterns import Pattern
from svexposure.reconstruct import (
    admm_tv_reconstruct,
    exact_observation,
    lpa_reconstruct,
    observation_field,
    reconstruct,
)
from svexposure.sensor import simulate_capture
from svexposure.tv import chambolle_tv_denoise, total_variation

MIXED = Pattern((0.25, 1, 0.5, 1), (1, 10, 80, 1))
LOW = Pattern((0.25, 0.5, 0.25, 1), (1, 1, 1, 1))


def test_observation_field_marks_saturation(config):
    cap = simulate_capture(np.full((4, 4), 3000.0), MIXED, config, noise_enabled=False)
    f = observation_field(cap)
    assert np.array_equal(~f.valid, cap.saturated)
    assert np.all(f.variance > 0)


def test_lpa_exact_on_constant():
    cfg_scene = np.full((16, 16), 42.0)
    from svexposure.sensor import SensorConfig

    obs = exact_observation(cfg_scene, LOW, SensorConfig())
    assert np.allclose(lpa_reconstruct(obs), 42.0, rtol=1e-6, atol=0)


@pytest.mark.parametrize("axis", [0, 1])
def test_lpa_exact_on_ramp(config, axis):
    line = np.linspace(10.0, 400.0, 24)
    scene = np.broadcast_to(line[None, :] if axis else line[:, None], (24, 24)).copy()
    rec = lpa_reconstruct(exact_observation(scene, LOW, config))
    # the zero-padded border has a truncated but still exact window
    assert np.max(np.abs(rec - scene) / scene) <= 1e-6


def test_lpa_exact_with_saturated_elements(config):
    # the two largest-product elements saturate; a plane is still fitted exactly
    p = Pattern((0.25, 1, 1, 0.25), (1, 10, 80, 1))
    scene = np.full((16, 16), 3000.0)
    obs = exact_observation(scene, p, config)
    assert (~obs.valid).any()
    assert np.allclose(lpa_reconstruct(obs), 3000.0, rtol=1e-6)


def test_lpa_partially_saturated_noise_free_capture(config):
    p = Pattern((0.25, 1, 1, 0.25), (1, 10, 80, 1))
    cap = simulate_capture(np.full((16, 16), 3000.0), p, config, noise_enabled=False)
    step = config.adc_lsb_base / (0.25 * config.qe)
    assert np.max(np.abs(lpa_reconstruct(cap) - 3000.0)) <= step


def test_lpa_all_saturated_outputs_cutoff(config):
    cap = simulate_capture(np.full((8, 8), 1e8), MIXED, config, noise_enabled=False)
    rec = lpa_reconstruct(cap)
    tau, alpha = cap.element_maps()
    assert np.allclose(rec, config.cutoff(tau, alpha))


def test_admm_flat_noise_free_fixed_point(config):
    obs = exact_observation(np.full((16, 16), 77.0), LOW, config)
    rec, info = admm_tv_reconstruct(obs, return_info=True)
    assert np.allclose(rec, 77.0, rtol=1e-5)
    assert info.iterations <= 30


def test_admm_iteration_cap(config):
    scene = np.random.default_rng(0).uniform(50, 500, (32, 32))
    cap = simulate_capture(scene, MIXED, config, seed=1)
    for cap_iters in (1, 5, 30):
        _, info = admm_tv_reconstruct(cap, max_iters=cap_iters, return_info=True)
        assert info.iterations <= cap_iters


def test_admm_denoises_flat_scene(config):
    theta = 60.0
    cap = simulate_capture(np.full((32, 32), theta), LOW, config, seed=3)
    f = observation_field(cap)
    raw_mse = np.mean((f.theta_hat[f.valid] - theta) ** 2)
    rec = admm_tv_reconstruct(cap)
    assert np.mean((rec[f.valid] - theta) ** 2) < raw_mse


def test_reconstruct_dispatch_and_nonnegative(config):
    scene = np.random.default_rng(4).lognormal(5, 2, (16, 16))
    cap = simulate_capture(scene, MIXED, config, seed=2)
    for method in ("lpa", "admm-tv"):
        out = reconstruct(cap, method)
        assert out.shape == scene.shape and np.all(out >= 0)
        assert np.array_equal(out, reconstruct(cap, method))
    with pytest.raises(ValueError):
        reconstruct(cap, "nope")


# ---------------------------------------------------------------- TV denoiser


def test_chambolle_matches_skimage():
    restoration = pytest.importorskip("skimage.restoration")
    img = np.random.default_rng(5).normal(0, 1, (40, 40)) + np.tri(40)
    for weight in (0.05, 0.3, 1.0):
        ours = chambolle_tv_denoise(img, weight)
        ref = restoration.denoise_tv_chambolle(img, weight=weight)
        assert np.allclose(ours, ref, atol=1e-10)


def test_chambolle_limits():
    img = np.random.default_rng(6).normal(size=(16, 16))
    assert np.allclose(chambolle_tv_denoise(img, 1e-12), img, atol=1e-8)
    const = np.full((8, 8), 3.5)
    assert np.array_equal(chambolle_tv_denoise(const, 0.7), const)


def test_chambolle_reduces_total_variation():
    rng = np.random.default_rng(7)
    img = np.zeros((32, 32))
    img[:, 16:] = 1.0
    img += rng.normal(0, 0.2, img.shape)
    assert total_variation(chambolle_tv_denoise(img, 0.2)) <= total_variation(img)


def test_saturated_pixels_respect_their_cutoff(config):
    # bright block next to a dark one: the dark side must not leak into clipped pixels
    scene = np.full((16, 16), 5.0)
    scene[:, 8:] = 1e6
    cap = simulate_capture(scene, MIXED, config, seed=0)
    tau, alpha = cap.element_maps()
    bound = np.where(cap.saturated, config.cutoff(tau, alpha), 0.0)
    for method in ("lpa", "admm-tv"):
        assert np.all(reconstruct(cap, method) >= bound)
