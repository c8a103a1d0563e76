import math

import pytest

from gaitlearn.config import (config_dict, default_config,
                              load_config)


class TestDefaults:
    def test_reference_parameter_set(self):
        cfg = default_config()
        p = cfg.physical
        assert (p.m1, p.m2) == (1.0, 0.5)
        assert p.i1 == pytest.approx(2.0 / 3.0)
        assert p.i2 == pytest.approx(1.0 / 6.0)
        assert (p.d1, p.d2_bar) == (1.0, 1.0)
        assert (p.kappa, p.b) == (2.0, 0.1)
        assert (p.tau0, p.omega0) == (1.0, 1.0)
        assert cfg.sensor_sigma_w == 0.1
        assert cfg.filter.n_particles == 1000
        assert cfg.filter.delta == 0.12
        assert cfg.learn.dt == 0.01
        assert cfg.learn.gamma == 1.0
        assert cfg.learn.epsilon == 1.0
        assert cfg.learn.alpha == 0.5
        assert cfg.learn.explore_amp == 0.25
        assert cfg.learn.horizon_periods == 100.0
        assert cfg.phase_r == 0.56

    def test_small_preset(self):
        cfg = default_config("small")
        assert cfg.filter.n_particles == 200
        assert cfg.learn.horizon_periods == 50.0
        assert cfg.run.runs == 5

    def test_unknown_preset(self):
        with pytest.raises(ValueError, match="preset"):
            default_config("huge")

    def test_derived_accessors(self):
        cfg = default_config()
        assert cfg.period == pytest.approx(2.0 * math.pi)
        assert cfg.sensor.dt == cfg.learn.dt
        assert cfg.phase_model.r == cfg.phase_r
        assert cfg.phase_model.omega0 == cfg.physical.omega0


class TestLoadConfig:
    def test_missing_file(self, tmp_path):
        missing = tmp_path / "nope.toml"
        with pytest.raises(FileNotFoundError, match="nope.toml"):
            load_config(path=str(missing))

    def test_file_overrides(self, tmp_path):
        f = tmp_path / "exp.toml"
        f.write_text("""
[physical]
tau0 = 0.8

[sensor]
sigma_w = 0.2

[fpf]
n_particles = 321

[learn]
horizon_periods = 12.0

[phase]
r = 0.5

[run]
seed = 42
""")
        cfg = load_config(path=str(f))
        assert cfg.physical.tau0 == 0.8
        assert cfg.physical.m1 == 1.0  # untouched default
        assert cfg.sensor_sigma_w == 0.2
        assert cfg.filter.n_particles == 321
        assert cfg.learn.horizon_periods == 12.0
        assert cfg.phase_r == 0.5
        assert cfg.run.seed == 42

    def test_unknown_key_rejected(self, tmp_path):
        f = tmp_path / "bad.toml"
        f.write_text("[physical]\nmass = 2.0\n")
        with pytest.raises(ValueError, match="unknown config key: physical.mass"):
            load_config(path=str(f))

    def test_unknown_section_rejected(self, tmp_path):
        f = tmp_path / "bad.toml"
        f.write_text("[rewards]\nscale = 2.0\n")
        with pytest.raises(ValueError, match="unknown config section"):
            load_config(path=str(f))

    def test_typo_in_scalar_section(self, tmp_path):
        f = tmp_path / "bad.toml"
        f.write_text("[sensor]\nsigma = 0.2\n")
        with pytest.raises(ValueError, match="sensor.sigma"):
            load_config(path=str(f))

    def test_type_errors(self, tmp_path):
        f = tmp_path / "bad.toml"
        f.write_text('[fpf]\nn_particles = "many"\n')
        with pytest.raises(ValueError, match="n_particles"):
            load_config(path=str(f))

    def test_flag_overrides_beat_file(self, tmp_path):
        f = tmp_path / "exp.toml"
        f.write_text("[run]\nseed = 1\nruns = 2\n")
        cfg = load_config(path=str(f), seed=9, runs=3, out_dir="results", workers=2)
        assert cfg.run.seed == 9
        assert cfg.run.runs == 3
        assert cfg.run.out_dir == "results"
        assert cfg.run.workers == 2

    def test_preset_plus_file(self, tmp_path):
        f = tmp_path / "exp.toml"
        f.write_text("[fpf]\nn_particles = 77\n")
        cfg = load_config(path=str(f), preset="small")
        assert cfg.filter.n_particles == 77          # file beats preset
        assert cfg.learn.horizon_periods == 50.0     # preset retained elsewhere

    def test_invalid_toml(self, tmp_path):
        f = tmp_path / "bad.toml"
        f.write_text("[physical\nm1 = 2\n")
        with pytest.raises(ValueError, match="invalid TOML"):
            load_config(path=str(f))


def test_config_dict_round_trips_everything():
    cfg = default_config("small")
    d = config_dict(cfg)
    assert d["preset"] == "small"
    assert d["physical"]["m2"] == 0.5
    assert d["fpf"]["n_particles"] == 200
    assert d["sensor"] == {"sigma_w": 0.1, "dt": 0.01}
    assert d["phase"]["r"] == 0.56
    assert d["run"]["runs"] == 5
    assert d["period"] == pytest.approx(2.0 * math.pi)
    import json
    json.dumps(d)  # JSON-ready
