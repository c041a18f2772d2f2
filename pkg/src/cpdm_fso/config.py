"""Run configuration: YAML text validated into a :class:`RunConfig`.

The file has five top-level sections. ``system`` holds the transmitter and
receiver parameters, ``link`` the geometry and turbulence shared by every
scenario, ``scenarios`` the weather conditions (each may override link
fields), ``sweep`` the distance grid and Monte-Carlo sizes, and ``output``
the export options. Every key has a default except ``scenarios``; unknown
keys are rejected. Validation errors carry the offending line number.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Literal, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from cpdm_fso.channel import ChannelScenario
from cpdm_fso.linkbudget import LinkGeometry, WeatherAttenuation
from cpdm_fso.ofdm import OfdmConfig
from cpdm_fso.phy import LaserConfig, ReceiverConfig, SystemConfig
from cpdm_fso.turbulence import DEFAULT_CN2, DEFAULT_WAVELENGTH_M, TurbulenceEnv

OUTPUT_FORMATS = ("csv", "json")


class ConfigError(ValueError):
    """Invalid run configuration; ``issues`` lists (line, field, message)."""

    def __init__(self, issues: list[tuple[int | None, str, str]]):
        self.issues = issues
        lines = []
        for line, where, msg in issues:
            prefix = f"line {line}: " if line is not None else ""
            lines.append(f"{prefix}{where}: {msg}")
        super().__init__("\n".join(lines))


# Schema ---------------------------------------------------------------------


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid")


class _Laser(_Model):
    power_dbm: float = 20.0
    frequency_thz: float = Field(193.1, gt=0)
    linewidth_hz: float = Field(10e6, ge=0)
    azimuth_deg: float = 45.0


class _Receiver(_Model):
    responsivity_a_per_w: float = Field(0.95, ge=0)
    dark_current_a: float = Field(10e-9, ge=0)
    thermal_psd: float = Field(1e-22, ge=0)
    noise_bandwidth_hz: float = Field(10e9, gt=0)
    optical_filter_bw_hz: float = Field(500e9, gt=0)
    noise_enabled: bool = True


class _Ofdm(_Model):
    n_fft: int = Field(128, gt=0)
    n_used: int = Field(80, gt=0)
    cp_len: int = Field(20, ge=0)
    n_training: int = Field(10, ge=1)
    n_pilot: int = Field(6, ge=0)
    symbols_per_frame: int = Field(40, ge=1)
    pilot_mode: Literal["subcarrier", "symbol"] = "subcarrier"


class _System(_Model):
    bit_rate_bps: float = Field(200e9, gt=0)
    amplifier_gain_db: float = 15.0
    oversampling: int = Field(2, ge=1)
    phase_mode: Literal["shared", "independent"] = "shared"
    modulator: Literal["linear", "mzm"] = "linear"
    mzm_drive_rad: float = Field(0.5, gt=0)
    ase: Literal[False] = False
    noise_margin_db: float = 2.0
    laser: _Laser = Field(default_factory=_Laser)
    lo: _Laser = Field(default_factory=_Laser)
    receiver: _Receiver = Field(default_factory=_Receiver)
    ofdm: _Ofdm = Field(default_factory=_Ofdm)


class _Link(_Model):
    tx_aperture_m: float = Field(0.075, gt=0)
    rx_aperture_m: float = Field(0.20, gt=0)
    divergence_mrad: float = Field(2.0, gt=0)
    wavelength_m: float = Field(DEFAULT_WAVELENGTH_M, gt=0)
    cn2: float = Field(DEFAULT_CN2, ge=0)
    turbulence: bool = True
    implementation_loss_db: float = Field(0.0, ge=0)
    fading_block: Union[Literal["frame"], int] = "frame"

    @field_validator("fading_block")
    @classmethod
    def _positive_block(cls, v):
        if isinstance(v, int) and v < 1:
            raise ValueError("fading_block must be >= 1 or 'frame'")
        return v


class _Scenario(_Model):
    label: str = Field(min_length=1)
    alpha_db_per_km: float = Field(ge=0)
    cn2: float | None = Field(None, ge=0)
    turbulence: bool | None = None
    implementation_loss_db: float | None = Field(None, ge=0)
    fading_block: Union[Literal["frame"], int, None] = None


class _Sweep(_Model):
    distances_km: list[float] = Field(default_factory=lambda: [1.0, 2.0, 3.0, 4.0, 5.0], min_length=1)
    trials: int = Field(4, ge=1)
    bits_per_trial: int = Field(256_000, ge=8)
    master_seed: int = Field(2024, ge=0)
    workers: int = Field(1, ge=1)

    @field_validator("distances_km")
    @classmethod
    def _positive_distances(cls, v):
        if any(not (math.isfinite(d) and d > 0) for d in v):
            raise ValueError("distances must be positive")
        return v


class _Output(_Model):
    directory: str = "results"
    format: Literal["csv", "json"] = "csv"
    constellation_points: int = Field(2000, ge=1)
    eye_symbols: int = Field(200, ge=1)


class _Run(_Model):
    system: _System = Field(default_factory=_System)
    link: _Link = Field(default_factory=_Link)
    scenarios: list[_Scenario] = Field(min_length=1)
    sweep: _Sweep = Field(default_factory=_Sweep)
    output: _Output = Field(default_factory=_Output)


# Validated configuration ----------------------------------------------------


@dataclass(frozen=True)
class OutputOptions:
    directory: str = "results"
    format: str = "csv"
    constellation_points: int = 2000
    eye_symbols: int = 200


@dataclass(frozen=True)
class RunConfig:
    system: SystemConfig
    scenarios: tuple[ChannelScenario, ...]
    distances_km: tuple[float, ...]
    trials: int = 4
    bits_per_trial: int = 256_000
    master_seed: int = 2024
    workers: int = 1
    output: OutputOptions = field(default_factory=OutputOptions)

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if not self.scenarios:
            raise ValueError("at least one scenario is required")
        if any(not d > 0 for d in self.distances_km):
            raise ValueError("distances must be positive")


def frame_samples(sys: SystemConfig) -> int:
    """Simulation samples spanned by one full OFDM frame."""
    cfg = sys.ofdm
    rows = cfg.n_training + cfg.pilot_rows + cfg.symbols_per_frame
    return rows * cfg.symbol_len * sys.oversampling


def _laser(m: _Laser) -> LaserConfig:
    return LaserConfig(**m.model_dump())


def _system(m: _System) -> SystemConfig:
    scalars = m.model_dump(exclude={"laser", "lo", "receiver", "ofdm"})
    return SystemConfig(
        laser=_laser(m.laser),
        lo=_laser(m.lo),
        receiver=ReceiverConfig(**m.receiver.model_dump()),
        ofdm=OfdmConfig(**m.ofdm.model_dump()),
        **scalars,
    )


def _scenario(s: _Scenario, link: _Link, distance_km: float, sys: SystemConfig) -> ChannelScenario:
    def pick(name):
        own = getattr(s, name)
        return getattr(link, name) if own is None else own

    block = pick("fading_block")
    if block == "frame":
        block = frame_samples(sys)
    turbulence = None
    if pick("turbulence"):
        turbulence = TurbulenceEnv(pick("cn2"), link.wavelength_m, distance_km * 1e3)
    geometry = LinkGeometry(link.tx_aperture_m, link.rx_aperture_m, link.divergence_mrad, distance_km)
    return ChannelScenario(
        geometry=geometry,
        attenuation=WeatherAttenuation(s.label, s.alpha_db_per_km),
        turbulence=turbulence,
        implementation_loss_db=pick("implementation_loss_db"),
        fading_block=block,
    )


def _build(m: _Run) -> RunConfig:
    sys = _system(m.system)
    d0 = m.sweep.distances_km[0]
    return RunConfig(
        system=sys,
        scenarios=tuple(_scenario(s, m.link, d0, sys) for s in m.scenarios),
        distances_km=tuple(m.sweep.distances_km),
        trials=m.sweep.trials,
        bits_per_trial=m.sweep.bits_per_trial,
        master_seed=m.sweep.master_seed,
        workers=m.sweep.workers,
        output=OutputOptions(**m.output.model_dump()),
    )


# Diagnostics ----------------------------------------------------------------


def _node_line(root, loc) -> int | None:
    """1-based line of the YAML node addressed by a pydantic error location."""
    node, line = root, None
    if node is not None:
        line = node.start_mark.line + 1
    for key in loc:
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                if k.value == str(key):
                    node, line = v, k.start_mark.line + 1
                    break
            else:
                return line
        elif isinstance(node, yaml.SequenceNode) and isinstance(key, int):
            if key >= len(node.value):
                return line
            node = node.value[key]
            line = node.start_mark.line + 1
        else:
            return line
    return line


def parse_config(text: str) -> RunConfig:
    """Validate YAML configuration text."""
    try:
        root = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = mark.line + 1 if mark is not None else None
        raise ConfigError([(line, "<document>", f"malformed YAML: {exc}")]) from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError([(1, "<document>", "top level must be a mapping")])
    try:
        model = _Run.model_validate(data)
    except ValidationError as exc:
        issues = []
        for err in exc.errors():
            loc = tuple(p for p in err["loc"] if not (isinstance(p, str) and "[" in p))
            where = ".".join(str(p) for p in loc) or "<document>"
            issues.append((_node_line(root, loc), where, err["msg"]))
        raise ConfigError(issues) from exc
    try:
        return _build(model)
    except (ValueError, NotImplementedError) as exc:
        raise ConfigError([(None, "<semantic>", str(exc))]) from exc


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([(None, str(path), f"cannot read: {exc}")]) from exc
    return parse_config(text)


def default_config_text() -> str:
    return resources.files("cpdm_fso").joinpath("data/default.yaml").read_text()


def default_config() -> RunConfig:
    return parse_config(default_config_text())


def _laser_dict(c: LaserConfig) -> dict:
    return {
        "power_dbm": c.power_dbm,
        "frequency_thz": c.frequency_thz,
        "linewidth_hz": c.linewidth_hz,
        "azimuth_deg": c.azimuth_deg,
    }


def config_to_dict(cfg: RunConfig) -> dict:
    """Plain-data form of a configuration; ``parse_config`` accepts its YAML dump.

    Link fields are written per scenario, so configurations whose scenarios
    differ in geometry-independent settings survive the round trip.
    """
    sys = cfg.system
    first = cfg.scenarios[0]
    geom = first.geometry
    wavelength_m = (
        first.turbulence.wavelength_m if first.turbulence is not None else DEFAULT_WAVELENGTH_M
    )
    scenarios = []
    for sc in cfg.scenarios:
        if sc.geometry.tx_aperture_m != geom.tx_aperture_m or sc.geometry.rx_aperture_m != geom.rx_aperture_m:
            raise ValueError("scenarios with different apertures cannot be serialized")
        scenarios.append(
            {
                "label": sc.attenuation.label,
                "alpha_db_per_km": sc.attenuation.alpha_db_per_km,
                "cn2": sc.turbulence.cn2 if sc.turbulence is not None else DEFAULT_CN2,
                "turbulence": sc.turbulence is not None,
                "implementation_loss_db": sc.implementation_loss_db,
                "fading_block": sc.fading_block,
            }
        )
    o = sys.ofdm
    r = sys.receiver
    return {
        "system": {
            "bit_rate_bps": sys.bit_rate_bps,
            "amplifier_gain_db": sys.amplifier_gain_db,
            "oversampling": sys.oversampling,
            "phase_mode": sys.phase_mode,
            "modulator": sys.modulator,
            "mzm_drive_rad": sys.mzm_drive_rad,
            "noise_margin_db": sys.noise_margin_db,
            "laser": _laser_dict(sys.laser),
            "lo": _laser_dict(sys.lo),
            "receiver": {
                "responsivity_a_per_w": r.responsivity_a_per_w,
                "dark_current_a": r.dark_current_a,
                "thermal_psd": r.thermal_psd,
                "noise_bandwidth_hz": r.noise_bandwidth_hz,
                "optical_filter_bw_hz": r.optical_filter_bw_hz,
                "noise_enabled": r.noise_enabled,
            },
            "ofdm": {
                "n_fft": o.n_fft,
                "n_used": o.n_used,
                "cp_len": o.cp_len,
                "n_training": o.n_training,
                "n_pilot": o.n_pilot,
                "symbols_per_frame": o.symbols_per_frame,
                "pilot_mode": o.pilot_mode,
            },
        },
        "link": {
            "tx_aperture_m": geom.tx_aperture_m,
            "rx_aperture_m": geom.rx_aperture_m,
            "divergence_mrad": geom.divergence_mrad,
            "wavelength_m": wavelength_m,
        },
        "scenarios": scenarios,
        "sweep": {
            "distances_km": list(cfg.distances_km),
            "trials": cfg.trials,
            "bits_per_trial": cfg.bits_per_trial,
            "master_seed": cfg.master_seed,
            "workers": cfg.workers,
        },
        "output": {
            "directory": cfg.output.directory,
            "format": cfg.output.format,
            "constellation_points": cfg.output.constellation_points,
            "eye_symbols": cfg.output.eye_symbols,
        },
    }


def dump_config(cfg: RunConfig) -> str:
    return yaml.safe_dump(config_to_dict(cfg), sort_keys=False)
