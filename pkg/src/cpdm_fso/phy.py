"""Optical transmitter and polarization-diversity coherent receiver.

Signals are complex envelopes sampled at ``sample_rate(sys)``. The
transmitter splits a CW laser into the four CPDM carriers, drives one IQ
modulator per carrier with an OFDM waveform, recombines and amplifies. The
receiver filters, splits the received beam and a local oscillator the same
way, and detects each tributary with a balanced 90-degree hybrid.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.constants import elementary_charge
from scipy.signal import resample

from cpdm_fso import ofdm, seeding
from cpdm_fso.linkbudget import dbm_to_w
from cpdm_fso.ofdm import BitStream, OfdmConfig
from cpdm_fso.polarization import (
    TRIBUTARIES,
    JonesVector,
    PolarizedField,
    combine_tributaries,
    split_tributaries,
)

N_TRIBUTARIES = len(TRIBUTARIES)
PHASE_MODES = ("shared", "independent")
MODULATORS = ("linear", "mzm")


class ConfigurationError(ValueError):
    """Physically inconsistent system configuration."""


@dataclass(frozen=True)
class LaserConfig:
    power_dbm: float = 20.0
    frequency_thz: float = 193.1
    linewidth_hz: float = 10e6
    azimuth_deg: float = 45.0

    def __post_init__(self):
        if not math.isfinite(self.power_dbm):
            raise ValueError("laser power must be finite")
        if not (self.frequency_thz > 0):
            raise ValueError("laser frequency must be positive")
        if not (self.linewidth_hz >= 0):
            raise ValueError("laser linewidth must be >= 0")

    @property
    def power_w(self) -> float:
        return dbm_to_w(self.power_dbm)

    @property
    def carrier_hz(self) -> float:
        return self.frequency_thz * 1e12


@dataclass(frozen=True)
class ReceiverConfig:
    responsivity_a_per_w: float = 0.95
    dark_current_a: float = 10e-9
    # The reference "thermal power 1e-22 W/Hz" is read as a current PSD in A^2/Hz.
    thermal_psd: float = 1e-22
    noise_bandwidth_hz: float = 10e9
    optical_filter_bw_hz: float = 500e9
    noise_enabled: bool = True

    def __post_init__(self):
        for name in (
            "responsivity_a_per_w",
            "dark_current_a",
            "thermal_psd",
            "noise_bandwidth_hz",
            "optical_filter_bw_hz",
        ):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass(frozen=True)
class SystemConfig:
    laser: LaserConfig = field(default_factory=LaserConfig)
    lo: LaserConfig = field(default_factory=LaserConfig)
    receiver: ReceiverConfig = field(default_factory=ReceiverConfig)
    ofdm: OfdmConfig = field(default_factory=OfdmConfig)
    amplifier_gain_db: float = 15.0
    seed: int = 0
    bit_rate_bps: float = 200e9
    oversampling: int = 2
    phase_mode: str = "shared"
    modulator: str = "linear"
    mzm_drive_rad: float = 0.5
    ase: bool = False
    noise_margin_db: float = 2.0

    def __post_init__(self):
        if self.lo.frequency_thz != self.laser.frequency_thz:
            raise ConfigurationError(
                f"homodyne receiver needs equal LO and laser frequencies "
                f"({self.lo.frequency_thz} vs {self.laser.frequency_thz} THz)"
            )
        if self.phase_mode not in PHASE_MODES:
            raise ValueError(f"phase_mode must be one of {PHASE_MODES}")
        if self.modulator not in MODULATORS:
            raise ValueError(f"modulator must be one of {MODULATORS}")
        if not (isinstance(self.oversampling, int) and self.oversampling >= 1):
            raise ValueError("oversampling must be an integer >= 1")
        if self.ase:
            raise NotImplementedError("amplifier ASE noise is not modeled")
        if not self.bit_rate_bps > 0:
            raise ValueError("bit rate must be positive")


def implied_rates(sys: SystemConfig) -> dict:
    """Rates implied by the bit rate and the OFDM framing (full frames)."""
    cfg = sys.ofdm
    trib = sys.bit_rate_bps / N_TRIBUTARIES
    rows = cfg.n_training + cfg.pilot_rows + cfg.symbols_per_frame
    symbol_rate = trib / cfg.bits_per_symbol * rows / cfg.symbols_per_frame
    baseband = symbol_rate * cfg.symbol_len
    return {
        "aggregate_bit_rate_bps": sys.bit_rate_bps,
        "tributary_bit_rate_bps": trib,
        "n_tributaries": N_TRIBUTARIES,
        "ofdm_symbol_rate_hz": symbol_rate,
        "dac_sample_rate_hz": baseband,
        "simulation_sample_rate_hz": baseband * sys.oversampling,
        "subcarrier_spacing_hz": baseband / cfg.n_fft,
    }


def sample_rate(sys: SystemConfig) -> float:
    return implied_rates(sys)["simulation_sample_rate_hz"]


def drive_scale(cfg: OfdmConfig) -> float:
    """IQ drive scale that gives the OFDM waveform unit mean power."""
    return math.sqrt(cfg.n_fft / cfg.n_active)


def launch_power_dbm(sys: SystemConfig) -> float:
    """Nominal power after the booster amplifier."""
    return sys.laser.power_dbm + sys.amplifier_gain_db


def laser_field(
    cfg: LaserConfig, n_samples: int, sample_rate: float, rng: np.random.Generator
) -> PolarizedField:
    """CW laser with Wiener phase noise, linearly polarized at the azimuth."""
    step_var = 2.0 * math.pi * cfg.linewidth_hz / sample_rate
    phase = np.cumsum(rng.normal(0.0, math.sqrt(step_var), n_samples))
    envelope = math.sqrt(cfg.power_w) * np.exp(1j * phase)
    pol = JonesVector.linear(math.radians(cfg.azimuth_deg))
    return PolarizedField.from_components(
        pol.ex * envelope, pol.ey * envelope, sample_rate, cfg.carrier_hz
    )


def iq_modulate(
    carrier_arm: PolarizedField,
    i_waveform,
    q_waveform,
    scale: float = 1.0,
    modulator: str = "linear",
    drive_rad: float = 0.5,
) -> PolarizedField:
    """Ideal IQ modulator, E_out = scale * (I + iQ) * E_carrier.

    ``modulator="mzm"`` swaps the linear transfer for two null-biased MZMs in
    quadrature, each with a sin(drive * x) / drive field response.
    """
    i_waveform = np.asarray(i_waveform, dtype=float)
    q_waveform = np.asarray(q_waveform, dtype=float)
    if i_waveform.shape != q_waveform.shape or i_waveform.size != len(carrier_arm):
        raise ValueError("I, Q and carrier must have equal lengths")
    if modulator == "linear":
        drive = i_waveform + 1j * q_waveform
    elif modulator == "mzm":
        drive = (np.sin(drive_rad * i_waveform) + 1j * np.sin(drive_rad * q_waveform)) / drive_rad
    else:
        raise ValueError(f"unknown modulator {modulator!r}")
    return carrier_arm.scaled(scale * drive)


def _pad_bits(bits: np.ndarray, cfg: OfdmConfig) -> tuple[np.ndarray, int]:
    per_trib = -(-bits.size // N_TRIBUTARIES)
    per_trib = -(-per_trib // cfg.bits_per_symbol) * cfg.bits_per_symbol
    padded = np.zeros(per_trib * N_TRIBUTARIES, dtype=np.uint8)
    padded[: bits.size] = bits
    return padded.reshape(N_TRIBUTARIES, per_trib), per_trib


def tributary_bits(bits: BitStream, sys: SystemConfig) -> np.ndarray:
    """Zero-padded bits per tributary, shape (4, n), in ``TRIBUTARIES`` order."""
    return _pad_bits(bits.bits, sys.ofdm)[0]


def _dac(x: np.ndarray, factor: int) -> np.ndarray:
    return x if factor == 1 else resample(x, x.size * factor)


def _adc(x: np.ndarray, factor: int) -> np.ndarray:
    return x if factor == 1 else resample(x, x.size // factor)


def transmit(bits: BitStream, sys: SystemConfig, muted=()) -> PolarizedField:
    """Bits to the amplified CPDM field. ``muted`` lists tributary indices to switch off."""
    cfg = sys.ofdm
    streams, per_trib = _pad_bits(bits.bits, cfg)
    waveforms = [_dac(ofdm.ofdm_modulate(ofdm.qpsk_map(b), cfg), sys.oversampling) for b in streams]
    n = waveforms[0].size
    fs = sample_rate(sys)
    laser = laser_field(sys.laser, n, fs, seeding.rng_for(sys.seed, seeding.TX_LASER))
    carriers = split_tributaries(laser)
    scale = drive_scale(cfg)
    arms = []
    for t, (carrier, w) in enumerate(zip(carriers, waveforms)):
        if t in muted:
            w = np.zeros_like(w)
        arms.append(iq_modulate(carrier, w.real, w.imag, scale, sys.modulator, sys.mzm_drive_rad))
    gain = 10.0 ** (sys.amplifier_gain_db / 20.0)
    return combine_tributaries(arms).scaled(gain)


def gaussian_optical_filter(field: PolarizedField, bw_hz: float) -> PolarizedField:
    """Gaussian magnitude response with a 3 dB full width of ``bw_hz``."""
    if not bw_hz > 0:
        raise ValueError("filter bandwidth must be positive")
    f = np.fft.fftfreq(len(field), d=1.0 / field.sample_rate)
    h = np.exp(-0.5 * math.log(2.0) * (2.0 * f / bw_hz) ** 2)
    spectrum = np.fft.fft(field.jones, axis=-1)
    return field.with_jones(np.fft.ifft(spectrum * h, axis=-1))


def detection_noise_variance(signal_arm: PolarizedField, lo_arm: PolarizedField, cfg: ReceiverConfig):
    """Per-sample, per-quadrature noise current variance (A^2)."""
    photocurrent = cfg.responsivity_a_per_w * (signal_arm.power() + lo_arm.power())
    shot = 2.0 * elementary_charge * (photocurrent + cfg.dark_current_a) * cfg.noise_bandwidth_hz
    return shot + cfg.thermal_psd * cfg.noise_bandwidth_hz


def _beat(signal_arm: PolarizedField, lo_arm: PolarizedField, cfg: ReceiverConfig) -> np.ndarray:
    if len(signal_arm) != len(lo_arm):
        raise ValueError("signal and LO lengths differ")
    if (
        signal_arm.carrier_hz is not None
        and lo_arm.carrier_hz is not None
        and signal_arm.carrier_hz != lo_arm.carrier_hz
    ):
        raise ConfigurationError(
            f"homodyne detection needs equal carriers "
            f"({signal_arm.carrier_hz} vs {lo_arm.carrier_hz} Hz)"
        )
    s = signal_arm.collapse().jones[0]
    lo = lo_arm.collapse().jones[0]
    return cfg.responsivity_a_per_w * np.sum(s * lo.conj(), axis=0)


def _detection_noise(signal_arm, lo_arm, cfg: ReceiverConfig, rng) -> np.ndarray:
    if not cfg.noise_enabled or rng is None:
        return np.zeros(len(signal_arm), dtype=complex)
    sigma = np.sqrt(detection_noise_variance(signal_arm, lo_arm, cfg))
    n = len(signal_arm)
    return sigma * rng.standard_normal(n) + 1j * sigma * rng.standard_normal(n)


def coherent_detect(
    signal_arm: PolarizedField,
    lo_arm: PolarizedField,
    cfg: ReceiverConfig,
    rng: np.random.Generator | None,
) -> tuple[np.ndarray, np.ndarray]:
    """Balanced 90-degree hybrid: i + jq = R * E_s * conj(E_lo) + noise."""
    current = _beat(signal_arm, lo_arm, cfg) + _detection_noise(signal_arm, lo_arm, cfg, rng)
    return current.real, current.imag


def local_oscillator(n_samples: int, sys: SystemConfig) -> PolarizedField:
    """LO field; in shared-phase mode it follows the transmit laser's phase."""
    fs = sample_rate(sys)
    if sys.phase_mode == "shared":
        cfg = replace(sys.lo, linewidth_hz=sys.laser.linewidth_hz)
        return laser_field(cfg, n_samples, fs, seeding.rng_for(sys.seed, seeding.TX_LASER))
    return laser_field(sys.lo, n_samples, fs, seeding.rng_for(sys.seed, seeding.LO_LASER))


@dataclass
class Reception:
    bits: BitStream
    symbols: list[np.ndarray]  # equalized data symbols per tributary
    estimates: list[list[ofdm.ChannelEstimate]]
    arms: list[PolarizedField]  # received tributary fields before detection
    noise: list[PolarizedField]  # detection noise referred to the optical input
    detected: list[np.ndarray]  # baseband after the ADC, per tributary


def receive_detailed(
    rx_field: PolarizedField,
    sys: SystemConfig,
    rng: np.random.Generator | None,
    n_bits: int | None = None,
) -> Reception:
    cfg = sys.ofdm
    filtered = gaussian_optical_filter(rx_field, sys.receiver.optical_filter_bw_hz)
    arms = split_tributaries(filtered)
    lo_arms = split_tributaries(local_oscillator(len(rx_field), sys))
    r = sys.receiver.responsivity_a_per_w
    bits, symbols, estimates, noise_fields, detected = [], [], [], [], []
    for arm, lo_arm in zip(arms, lo_arms):
        noise = _detection_noise(arm, lo_arm, sys.receiver, rng)
        baseband = _adc(_beat(arm, lo_arm, sys.receiver) + noise, sys.oversampling)
        syms, est = ofdm.demodulate_frames(baseband, cfg, track_phase=True)
        bits.append(ofdm.qpsk_demap(syms))
        symbols.append(syms)
        estimates.append(est)
        detected.append(baseband)
        lo_amp = np.sqrt(lo_arm.power())
        ref = np.where(lo_amp > 0, noise / np.maximum(r * lo_amp, 1e-300), 0.0)
        noise_fields.append(PolarizedField.from_components(ref, np.zeros_like(ref), arm.sample_rate))
    out = np.concatenate(bits)
    if n_bits is not None:
        out = out[:n_bits]
    rate = sys.bit_rate_bps
    return Reception(BitStream(out, rate), symbols, estimates, arms, noise_fields, detected)


def receive(
    rx_field: PolarizedField,
    sys: SystemConfig,
    rng: np.random.Generator | None,
    n_bits: int | None = None,
) -> BitStream:
    """Recovered bits in transmit order (zero padding kept unless ``n_bits``)."""
    return receive_detailed(rx_field, sys, rng, n_bits).bits

