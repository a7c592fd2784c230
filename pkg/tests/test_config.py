import pytest

from carvesim import ConfigError, RunConfig, config_hash, load_config
from carvesim.config import (
    DEFAULT_SEED,
    DEFAULT_TRIALS,
    config_from_values,
    config_text,
    parse_config_text,
    with_overrides,
)


def build(text: str) -> RunConfig:
    return config_from_values(parse_config_text(text))

FULL = """\
# cavity rates in MHz
cavity.g_2pi_mhz = 7.8
cavity.kappa_2pi_mhz = 2.5
cavity.kappa_out_2pi_mhz = 2.3
cavity.gamma_2pi_mhz = 3.0
pulse.nbar = 0.5
pulse.dark_prob = 0.02
pulse.det_eff = 0.333
pulse.mode_match = 0.9
prep.kind = antiparallel
prep.fidelity = 0.86
noise.sigma_common_2pi_khz = 1.3
noise.sigma_diff_2pi_khz = 0.8
seed = 99
trials = 1234
"""


def test_defaults():
    cfg = RunConfig()
    assert cfg.seed == DEFAULT_SEED == 123456789
    assert cfg.trials == DEFAULT_TRIALS == 20000
    assert cfg.pulse.nbar == pytest.approx(0.33)
    assert cfg.output_path is None


def test_parse_full_config():
    cfg = build(FULL)
    assert cfg.cavity.g_2pi_mhz == 7.8
    assert cfg.pulse.dark_prob == 0.02
    assert cfg.prep.kind == "antiparallel"
    assert cfg.noise.sigma_diff_2pi_khz == 0.8
    assert (cfg.seed, cfg.trials) == (99, 1234)


def test_unknown_key_reports_line():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config_text("seed = 1\npulse.brightness = 2\n")


def test_duplicate_key_reports_line():
    with pytest.raises(ConfigError, match="line 3.*duplicate"):
        parse_config_text("seed = 1\ntrials = 10\nseed = 2\n")


def test_bad_value_is_config_error():
    with pytest.raises(ConfigError, match="line 1"):
        parse_config_text("pulse.nbar = fast\n")
    # range invariants surface when the components are built
    with pytest.raises(ConfigError):
        build("pulse.mode_match = 0\n")
    with pytest.raises(ConfigError):
        build("seed = -5\n")


def test_missing_equals_is_config_error():
    with pytest.raises(ConfigError, match="line 1"):
        parse_config_text("just words\n")


def test_load_config(tmp_path):
    path = tmp_path / "run.cfg"
    path.write_text(FULL)
    cfg = load_config(path)
    assert cfg.trials == 1234
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.cfg")


def test_config_text_roundtrip():
    cfg = build(FULL)
    again = build(config_text(cfg))
    assert again == cfg
    assert config_text(again) == config_text(cfg)


def test_hash_is_stable_and_sensitive():
    cfg = build(FULL)
    h = config_hash(cfg)
    assert len(h) == 16
    assert h == config_hash(build(FULL))
    assert config_hash(with_overrides(cfg, seed=100)) != h
    # where the output lands is routing, not an input
    assert config_hash(with_overrides(cfg, output_path="elsewhere.json")) == h


def test_overrides_leave_base_untouched():
    cfg = RunConfig()
    other = with_overrides(cfg, trials=5)
    assert other.trials == 5 and cfg.trials == DEFAULT_TRIALS
    with pytest.raises(ConfigError):
        with_overrides(cfg, trials=0)
