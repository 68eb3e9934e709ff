import numpy as np
import pytest

from svexposure.patterns import Pattern
from svexposure.sensor import (
    CaptureSimulator,
    RawCapture,
    SensorConfig,
    element_index,
    expected_readout,
    normalize_readout,
    pattern_maps,
    quantize,
    simulate_capture,
)
from svexposure.validation import PreconditionError

from oracles import compound_code_moments

UNIFORM = Pattern((1, 1, 1, 1), (1, 1, 1, 1))
MIXED = Pattern((0.25, 1, 0.5, 1), (1, 10, 80, 1))


def test_default_config_constants(config):
    assert config.max_code == 1023
    assert config.adc_upper == pytest.approx(8185.0)
    assert config.v_max == pytest.approx(10231.25)
    assert config.cutoff(0.25, 1) == pytest.approx(40925.0)
    assert config.cutoff(1, 80) == pytest.approx(127.890625)


def test_config_validation_and_roundtrip(config):
    assert SensorConfig.from_json(config.to_json()) == config
    with pytest.raises(ValueError):
        SensorConfig(qe=0)
    with pytest.raises(ValueError):
        SensorConfig.from_dict({"bogus": 1})


def test_expected_readout_examples():
    cfg = SensorConfig(dark_current=0.0)
    assert expected_readout(0.0, 1.0, 10.0, cfg) == 0.0
    assert expected_readout(1e12, 1.0, 10.0, cfg) == pytest.approx(cfg.full_well * 10)
    theta = cfg.full_well / (2 * cfg.qe * 0.5)
    assert expected_readout(theta, 0.5, 4.0, cfg) == pytest.approx(cfg.full_well * 4 / 2)


def test_zero_scene_noise_free_gives_code_zero(config):
    cfg = SensorConfig(dark_current=0.0)
    cap = simulate_capture(np.zeros((4, 4)), UNIFORM, cfg, noise_enabled=False)
    assert np.all(cap.codes == 0)


def test_saturation_hits_max_code(config):
    cap = simulate_capture(np.full((4, 6), 1e7), MIXED, config, noise_enabled=False)
    assert np.all(cap.codes == config.max_code)
    assert cap.saturated.all()


def test_tiling_layout():
    idx = element_index((4, 4))
    assert idx[0, :2].tolist() == [0, 1] and idx[1, :2].tolist() == [2, 3]
    tau, alpha = pattern_maps(MIXED, (4, 4))
    assert tau[2, 2] == 0.25 and alpha[3, 3] == 1 and alpha[3, 0] == 80


def test_odd_dimensions_rejected(config):
    with pytest.raises(PreconditionError):
        simulate_capture(np.ones((3, 4)), UNIFORM, config)


def test_negative_radiance_rejected(config):
    with pytest.raises(PreconditionError):
        simulate_capture(-np.ones((2, 2)), UNIFORM, config)


def test_determinism_and_seed_sensitivity(config):
    scene = np.random.default_rng(0).uniform(0, 2000, (8, 8))
    a = simulate_capture(scene, MIXED, config, seed=5)
    b = simulate_capture(scene, MIXED, config, seed=5)
    c = simulate_capture(scene, MIXED, config, seed=6)
    assert np.array_equal(a.codes, b.codes)
    assert not np.array_equal(a.codes, c.codes)


def test_capture_simulator_matches_simulate_capture(config):
    scene = np.random.default_rng(1).uniform(0, 5000, (16, 16))
    sim = CaptureSimulator(scene, config, seed=9)
    for p in (UNIFORM, MIXED, Pattern((0.5, 0.25, 1, 1), (10, 1, 1, 80))):
        assert np.array_equal(sim.capture(p).codes, simulate_capture(scene, p, config, seed=9).codes)


def test_noise_free_monotone_in_radiance(config):
    theta = np.repeat(np.linspace(0, 50000, 200), 2)
    scene = np.tile(theta, (2, 1))
    codes = simulate_capture(scene, UNIFORM, config, noise_enabled=False).codes[0].astype(int)
    assert np.all(np.diff(codes) >= 0)


@pytest.mark.parametrize("tau,alpha", [(0.25, 1), (1, 10), (0.5, 80)])
def test_normalize_readout_roundtrip(config, tau, alpha):
    # noise-free: estimate is within one quantization step of the truth
    cutoff = config.cutoff(tau, alpha)
    theta = np.linspace(0.05, 0.95, 40) * cutoff
    codes = quantize(expected_readout(theta, tau, alpha, config), config)
    est, sat = normalize_readout(codes, tau, alpha, config)
    step = config.adc_lsb_base / (alpha * tau * config.qe)
    assert not sat.any()
    assert np.all(np.abs(est - theta) <= step + 1e-9)


def test_normalize_readout_flags_max_code(config):
    _, sat = normalize_readout(config.max_code, 1.0, 1.0, config)
    assert sat


def test_raw_capture_validates(config):
    with pytest.raises(ValueError):
        RawCapture(np.zeros((3, 2)), UNIFORM, config, 0)
    with pytest.raises(ValueError):
        RawCapture(np.full((2, 2), 5000), UNIFORM, config, 0)


def test_compound_oracle_noise_free_limit():
    cfg = SensorConfig(read_noise_base=0.0, dark_current=0.0)
    mean, var = compound_code_moments(0.0, 1.0, 1.0, cfg)
    assert mean == 0.0 and var == 0.0
