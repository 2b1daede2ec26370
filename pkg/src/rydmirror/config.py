"""Strict YAML scenario configuration.

Every section is a dataclass whose field names carry their unit. Unknown
keys and wrongly typed values are rejected with the offending path.
"""
from __future__ import annotations

import dataclasses
import typing
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

import yaml


class ConfigError(ValueError):
    pass


@dataclass
class GlobalSection:
    seed: int = 20230101
    threads: int = 1
    output_dir: str = "out"


@dataclass
class TransitionSection:
    gamma_e_mhz: float = 6.06
    gamma_r_khz: float = 5.0
    lambda_p_nm: float = 780.0
    lambda_c_nm: float = 480.0


@dataclass
class SpectrumSection:
    """Cooperative mirror and EIT spectra (affine maps of Im chi)."""

    omega_c_mhz: float = 6.7
    gamma_m_mhz: float = 3.75
    mirror_transmittance: float = 0.35
    delta_min_mhz: float = -12.0
    delta_max_mhz: float = 12.0
    n_points: int = 481


@dataclass
class SwitchedSpectrumSection:
    p_p: float = 0.52
    p_p_improved: float = 0.96


@dataclass
class MirrorSection:
    """Coupled-dipole spectrum of a square patch."""

    n_side: int = 20
    a_over_lambda: float = 0.68
    waist_um: float = 10.0
    delta_min_gamma: float = -3.0
    delta_max_gamma: float = 3.0
    n_points: int = 41


@dataclass
class SpatialSection:
    mode: str = "dipole"
    radius_um: float = 4.7
    filling: float = 1.0
    lattice_const_nm: float = 532.0
    p_p: float = 0.52
    omega_p_mhz: float = 0.168
    omega_c_mhz: float = 6.7
    detuning_gamma: float = 0.17
    waist_um: float = 10.0
    roi_um: float = 6.0
    bin_width_um: float = 0.25
    exchange: bool = False
    probe_duration_us: float = 20.0
    n_sa: float = 77.0
    gamma_khz: float = 0.0
    mirror_transmittance: float = 0.35


@dataclass
class RabiSection:
    omega_uv_mhz: float = 1.22
    tau_decay_us: float = 6.0
    w2: float = 0.28
    amplitude: float = 1.0
    offset: float = 0.0
    t_max_us: float = 4.0
    n_points: int = 121
    noise_sd: float = 0.03


@dataclass
class LifetimeSection:
    eta_init: float = 0.85
    tau_us: float = 27.0
    probe_duration_us: float = 20.0
    delay_us: float = 4.0
    t_mirror: float = 0.35
    t_eit: float = 0.9
    delay_max_us: float = 60.0
    n_points: int = 13
    noise_sd: float = 0.02


@dataclass
class HistogramSection:
    mu_background: float = 18.3
    mu_switched: float = 65.0
    prep_fidelity: float = 0.85
    prep_fidelity_sd: float = 0.10
    tau_us: float = 27.0
    tau_sd_us: float = 6.0
    delay_us: float = 4.0
    probe_duration_us: float = 60.0
    excess_noise_factor: float = 2.0
    n_samples: int = 10000
    bin_width: float = 2.0
    max_photons: float = 200.0
    tail_threshold: float = 60.0
    band_runs: int = 50


@dataclass
class ExchangeSection:
    omega_p_mhz: float = 0.168
    omega_c_mhz: float = 6.7
    n_sa: float = 77.0
    r_min_um: float = 1.0
    r_max_um: float = 12.0
    n_r: int = 221
    array_radius_um: float = 12.5
    lattice_const_nm: float = 532.0
    t_max_us: float = 40.0
    n_t: int = 801
    gamma_khz: float = 0.0


@dataclass
class BlochSection:
    delta_z_hz: float = 360.0
    tunneling_hz: float = 324.0
    n_side: int = 20
    a_over_lambda: float = 0.68
    waist_um: float = 10.0
    samples: int = 6
    detuning_gamma: float = 0.0
    na: float = 0.68


@dataclass
class CalibrateSection:
    alpha: float = 0.32
    excess_noise_factor: float = 2.0
    mean_min_counts: float = 50.0
    mean_max_counts: float = 2000.0
    n_levels: int = 12
    frames: int = 200


@dataclass
class BlockadeSection:
    c6_ghz_um6: float = 35.0
    omega_c_mhz: float = 6.7
    c6_ss_ghz_um6: float = 3.15
    omega_c_ss_mhz: float = 13.4
    lattice_const_nm: float = 532.0
    r_min_um: float = 1.0
    r_max_um: float = 12.0
    n_r: int = 221
    dataset: str = ""


@dataclass
class NonlinearitySection:
    """Self-blockade spectrum: Rydberg-EIT mixture fitted with six parameters."""

    omega_p_mhz: float = 0.168
    omega_c_mhz: float = 6.7
    p_s: float = 0.16
    u_int_mhz: float = 0.0
    amplitude: float = 1.0
    offset: float = 0.0
    delta_min_mhz: float = -12.0
    delta_max_mhz: float = 12.0
    n_points: int = 121
    noise_sd: float = 0.02
    n_sa: float = 77.0


SECTIONS: Dict[str, type] = {
    "global": GlobalSection,
    "transition": TransitionSection,
    "spectrum": SpectrumSection,
    "switched-spectrum": SwitchedSpectrumSection,
    "mirror": MirrorSection,
    "spatial": SpatialSection,
    "rabi": RabiSection,
    "lifetime": LifetimeSection,
    "histogram": HistogramSection,
    "exchange": ExchangeSection,
    "bloch": BlochSection,
    "calibrate": CalibrateSection,
    "blockade": BlockadeSection,
    "nonlinearity": NonlinearitySection,
}
SHARED = ("global", "transition")


@dataclass
class ScenarioConfig:
    sections: Dict[str, Any] = field(default_factory=dict)

    def __getitem__(self, name: str):
        try:
            return self.sections[name]
        except KeyError:
            raise ConfigError(f"configuration has no [{name}] section") from None

    def __contains__(self, name: str) -> bool:
        return name in self.sections

    @property
    def globals(self) -> GlobalSection:
        return self.sections["global"]

    @property
    def transition(self) -> TransitionSection:
        return self.sections["transition"]

    def to_dict(self) -> Dict[str, Dict[str, Any]]:
        return {name: dataclasses.asdict(sec) for name, sec in self.sections.items()}

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False, default_flow_style=False)


def default_config() -> ScenarioConfig:
    return ScenarioConfig({name: cls() for name, cls in SECTIONS.items()})


def _coerce(path: str, tp, value):
    if tp is bool:
        if isinstance(value, bool):
            return value
        raise ConfigError(f"{path}: expected true/false, got {value!r}")
    if tp is int:
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{path}: expected an integer, got {value!r}")
        return value
    if tp is float:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{path}: expected a number, got {value!r}")
        return float(value)
    if tp is str:
        if not isinstance(value, str):
            raise ConfigError(f"{path}: expected a string, got {value!r}")
        return value
    origin = typing.get_origin(tp)
    if origin in (list, List):
        (inner,) = typing.get_args(tp)
        if not isinstance(value, list):
            raise ConfigError(f"{path}: expected a list, got {value!r}")
        return [_coerce(f"{path}[{i}]", inner, v) for i, v in enumerate(value)]
    if origin is typing.Union:
        args = [a for a in typing.get_args(tp) if a is not type(None)]
        if value is None:
            return None
        return _coerce(path, args[0], value)
    raise ConfigError(f"{path}: unsupported field type {tp}")  # pragma: no cover


def _parse_section(name: str, cls, raw) -> Any:
    if raw is None:
        raw = {}
    if not isinstance(raw, Mapping):
        raise ConfigError(f"[{name}] must be a mapping of key: value pairs")
    hints = typing.get_type_hints(cls)
    known = {f.name for f in dataclasses.fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"[{name}] unknown key(s) {unknown}; allowed: {sorted(known)}")
    kwargs = {k: _coerce(f"{name}.{k}", hints[k], v) for k, v in raw.items()}
    return cls(**kwargs)


def parse_config(data: Optional[Mapping], fill_missing: bool = False) -> ScenarioConfig:
    """Validate a mapping. Shared sections always default when absent;
    scenario sections only when ``fill_missing`` is set."""
    data = {} if data is None else data
    if not isinstance(data, Mapping):
        raise ConfigError("top level of the configuration must be a mapping")
    unknown = sorted(set(data) - set(SECTIONS))
    if unknown:
        raise ConfigError(f"unknown section(s) {unknown}; allowed: {sorted(SECTIONS)}")
    out = {}
    for name, cls in SECTIONS.items():
        if name in data:
            out[name] = _parse_section(name, cls, data[name])
        elif fill_missing or name in SHARED:
            out[name] = cls()
    g = out["global"]
    if g.threads < 1:
        raise ConfigError("global.threads must be >= 1")
    if g.seed < 0:
        raise ConfigError("global.seed must be non-negative")
    return ScenarioConfig(out)


def load_config(path, fill_missing: bool = False) -> ScenarioConfig:
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc.strerror or exc}") from None
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{p}: invalid YAML: {exc}") from None
    return parse_config(data, fill_missing)


def with_overrides(cfg: ScenarioConfig, section: str, **values) -> ScenarioConfig:
    """Copy of ``cfg`` with fields of one section replaced, re-validated strictly."""
    data = cfg.to_dict()
    if section not in data:
        raise ConfigError(f"configuration has no [{section}] section")
    data[section].update(values)
    return parse_config(data)
