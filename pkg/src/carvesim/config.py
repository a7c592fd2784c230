"""Run configuration: documented defaults, flat-key config files, hashing.

Config files are plain text with one dotted key per line, e.g.::

    cavity.g_2pi_mhz = 7.8
    pulse.nbar = 1.2
    prep.kind = antiparallel

Blank lines and #-comments are ignored; unknown keys are errors, and every
value is validated by the component it configures. The canonical text form
of a config (config_text) is hashed into CSV/JSON headers so outputs are
traceable to their inputs.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, replace

from .cavity import CavityParams
from .protocols import NoiseModel, PreparationSpec, PulseConfig

DEFAULT_SEED = 123456789
DEFAULT_TRIALS = 20000


class ConfigError(ValueError):
    """A config file could not be parsed or violates an invariant."""


@dataclass(frozen=True)
class RunConfig:
    cavity: CavityParams = field(default_factory=CavityParams)
    pulse: PulseConfig = field(default_factory=PulseConfig)
    prep: PreparationSpec = field(default_factory=PreparationSpec)
    noise: NoiseModel = field(default_factory=NoiseModel)
    seed: int = DEFAULT_SEED
    trials: int = DEFAULT_TRIALS
    output_path: str | None = None

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")


# key -> (component attribute on RunConfig or None for top level, field, type)
_KEYS = {
    "cavity.g_2pi_mhz": ("cavity", "g_2pi_mhz", float),
    "cavity.kappa_2pi_mhz": ("cavity", "kappa_2pi_mhz", float),
    "cavity.kappa_out_2pi_mhz": ("cavity", "kappa_out_2pi_mhz", float),
    "cavity.gamma_2pi_mhz": ("cavity", "gamma_2pi_mhz", float),
    "pulse.nbar": ("pulse", "nbar", float),
    "pulse.dark_prob": ("pulse", "dark_prob", float),
    "pulse.det_eff": ("pulse", "det_eff", float),
    "pulse.mode_match": ("pulse", "mode_match", float),
    "prep.kind": ("prep", "kind", str),
    "prep.fidelity": ("prep", "prep_fidelity", float),
    "noise.sigma_common_2pi_khz": ("noise", "sigma_common_2pi_khz", float),
    "noise.sigma_diff_2pi_khz": ("noise", "sigma_diff_2pi_khz", float),
    "seed": (None, "seed", int),
    "trials": (None, "trials", int),
    "output_path": (None, "output_path", str),
}


def parse_config_text(text: str) -> dict[str, object]:
    """Parse flat-key config text into typed values, or raise ConfigError."""
    values: dict[str, object] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, rhs = line.partition("=")
        key = key.strip()
        rhs = rhs.strip()
        if key not in _KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        _, _, kind = _KEYS[key]
        try:
            values[key] = kind(rhs)
        except ValueError as exc:
            raise ConfigError(
                f"line {lineno}: bad value {rhs!r} for {key}: {exc}"
            ) from exc
    return values


def config_from_values(values: dict[str, object]) -> RunConfig:
    """Build a RunConfig from flat key overrides on top of the defaults."""
    groups: dict[str, dict[str, object]] = {}
    top: dict[str, object] = {}
    for key, value in values.items():
        section, attr, _ = _KEYS[key]
        if section is None:
            top[attr] = value
        else:
            groups.setdefault(section, {})[attr] = value
    try:
        cavity = CavityParams(**groups.get("cavity", {}))
        pulse = PulseConfig(**groups.get("pulse", {}))
        prep = PreparationSpec(**groups.get("prep", {}))
        noise = NoiseModel(**groups.get("noise", {}))
        return RunConfig(cavity=cavity, pulse=pulse, prep=prep, noise=noise, **top)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path) -> RunConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_values(parse_config_text(text))


def _format_value(value) -> str:
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def config_text(config: RunConfig) -> str:
    """Canonical flat-key dump of the run inputs.

    output_path is routing, not an input, and is deliberately excluded so
    that identical runs hash identically wherever their files land.
    """
    values = {
        "cavity.g_2pi_mhz": config.cavity.g_2pi_mhz,
        "cavity.kappa_2pi_mhz": config.cavity.kappa_2pi_mhz,
        "cavity.kappa_out_2pi_mhz": config.cavity.kappa_out_2pi_mhz,
        "cavity.gamma_2pi_mhz": config.cavity.gamma_2pi_mhz,
        "pulse.nbar": config.pulse.nbar,
        "pulse.dark_prob": config.pulse.dark_prob,
        "pulse.det_eff": config.pulse.det_eff,
        "pulse.mode_match": config.pulse.mode_match,
        "prep.kind": config.prep.kind,
        "prep.fidelity": config.prep.prep_fidelity,
        "noise.sigma_common_2pi_khz": config.noise.sigma_common_2pi_khz,
        "noise.sigma_diff_2pi_khz": config.noise.sigma_diff_2pi_khz,
        "seed": config.seed,
        "trials": config.trials,
    }
    lines = [f"{key} = {_format_value(values[key])}" for key in sorted(values)]
    return "\n".join(lines) + "\n"


def config_hash(config: RunConfig) -> str:
    """Short stable digest of the canonical config text."""
    return hashlib.sha256(config_text(config).encode("utf-8")).hexdigest()[:16]


def with_overrides(config: RunConfig, **top_level) -> RunConfig:
    """Replace top-level fields (seed, trials, output_path) on a config."""
    try:
        return replace(config, **top_level)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
