import json

import pytest

import cryodc


def test_power_and_range():
    assert cryodc.max_power() == pytest.approx(1.778e-3, rel=1e-3)
    assert cryodc.voltage_range() == pytest.approx(1.5778, abs=1e-4)
    assert cryodc.ideal_resolution() < 1e-6
    assert cryodc.sources_within_budget(1.5, 50e-6) == pytest.approx(820, abs=5)


def test_device_model():
    assert cryodc.switching_rate(0.8) == pytest.approx(142.84, rel=1e-3)
    assert cryodc.relax_resistance(9230.0, 1.0, 200e-9) == pytest.approx(8001.44, rel=1e-4)
    assert cryodc.params_4k()["r_off"] == 16000.0


def test_enumeration_is_unique():
    voltages, stats = cryodc.enumerate_outputs(3, 3)
    assert len(voltages) == 27
    assert stats["distinct"] == 27
    assert voltages == sorted(voltages)


def test_dqd():
    e1, e2, em = cryodc.charging_energies()
    assert e1 == e2
    assert e1 / 1.602176634e-19 == pytest.approx(25.01e-3, rel=1e-3)
    assert cryodc.occupation(0.0, 0.0) == (0.0, 0.0)


def test_small_scan(tmp_path):
    cfg = cryodc.default_config()
    cfg["window"] = {"v1_min": 0.30, "v1_max": 0.32, "v2_min": 0.30, "v2_max": 0.32, "resolution": 0.01}
    cfg["threads"] = 1
    manifest = cryodc.run_scan(cfg, tmp_path)
    assert manifest["mode"] == "exact"
    assert set(manifest["files"]) >= {"derivative.csv", "occupation.csv", "pixels.csv"}
    assert (tmp_path / "derivative.csv").exists()


def test_bad_config_raises():
    cfg = cryodc.default_config()
    cfg["window"]["resolution"] = 0.0003
    with pytest.raises(cryodc.Error):
        cryodc.run_scan(cfg, "unused")


def test_unknown_experiment_raises(tmp_path):
    with pytest.raises(cryodc.Error):
        cryodc.run_experiment("nope", cryodc.default_config(), tmp_path)


def test_fit_round_trip(tmp_path):
    trace = tmp_path / "trace.csv"
    cryodc.synthesize_trace(trace)
    fitted = cryodc.fit_params(trace)
    for key in ("r_p0", "r_p1", "r_n0", "r_n1"):
        assert fitted[key] == pytest.approx(cryodc.params_4k()[key], rel=0.05)
    assert json.dumps(fitted)
