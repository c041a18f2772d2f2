"""Link quality measurements: BER, Q factor, OSNR, EVM and plot-ready exports."""
from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np
from scipy.special import erfc, erfcinv

from cpdm_fso.polarization import PolarizedField

# 0.1 nm at 1550 nm.
OSNR_REFERENCE_BW_HZ = 12.5e9
OSNR_CEILING_DB = 100.0


def count_ber(tx_bits, rx_bits) -> float:
    tx = np.asarray(getattr(tx_bits, "bits", tx_bits))
    rx = np.asarray(getattr(rx_bits, "bits", rx_bits))
    if tx.shape != rx.shape:
        raise ValueError(f"bit streams differ in length: {tx.size} vs {rx.size}")
    if tx.size == 0:
        raise ValueError("cannot compute BER of empty streams")
    return float(np.count_nonzero(tx != rx)) / tx.size


def ber_from_q(q_linear):
    """Gaussian BER for a Q factor: 0.5 * erfc(q / sqrt 2)."""
    q = np.asarray(q_linear, dtype=float)
    if np.any(q < 0) or np.any(np.isnan(q)):
        raise ValueError("Q must be >= 0")
    out = 0.5 * erfc(q / math.sqrt(2.0))
    return float(out) if out.ndim == 0 else out


def q_from_ber(ber):
    """Inverse of :func:`ber_from_q` on (0, 0.5]."""
    b = np.asarray(ber, dtype=float)
    if np.any(~((b > 0) & (b <= 0.5))):
        raise ValueError(f"BER must lie in (0, 0.5], got {ber!r}")
    out = math.sqrt(2.0) * erfcinv(2.0 * b)
    return float(out) if out.ndim == 0 else out


def reported_q(ber: float) -> float:
    """Q for a measured BER: inf for error-free runs, 0 at or beyond 0.5."""
    if ber <= 0:
        return math.inf
    if ber >= 0.5:
        return 0.0
    return q_from_ber(ber)


class OsnrEstimate(NamedTuple):
    value_db: float
    at_ceiling: bool


def osnr_from_powers(
    signal_w: float,
    noise_w: float,
    measurement_bw_hz: float,
    reference_bw_hz: float = OSNR_REFERENCE_BW_HZ,
    ceiling_db: float = OSNR_CEILING_DB,
) -> OsnrEstimate:
    """OSNR from a noise power measured over ``measurement_bw_hz``."""
    if not (measurement_bw_hz > 0 and reference_bw_hz > 0):
        raise ValueError("bandwidths must be positive")
    if signal_w < 0 or noise_w < 0:
        raise ValueError("powers must be >= 0")
    noise_ref = noise_w * reference_bw_hz / measurement_bw_hz
    if noise_ref == 0:
        return OsnrEstimate(ceiling_db, True)
    if signal_w == 0:
        return OsnrEstimate(-math.inf, False)
    value = 10.0 * math.log10(signal_w / noise_ref)
    if value >= ceiling_db:
        return OsnrEstimate(ceiling_db, True)
    return OsnrEstimate(value, False)


def estimate_osnr_db(
    signal_field: PolarizedField,
    noise_field: PolarizedField,
    reference_bw_hz: float = OSNR_REFERENCE_BW_HZ,
    measurement_bw_hz: float | None = None,
    ceiling_db: float = OSNR_CEILING_DB,
) -> OsnrEstimate:
    """Signal power over noise power referred to ``reference_bw_hz``.

    The noise is taken to be white over ``measurement_bw_hz``, which defaults
    to the sample rate. A noiseless input reports ``ceiling_db`` with the
    ``at_ceiling`` flag set.
    """
    if signal_field.sample_rate != noise_field.sample_rate:
        raise ValueError(
            f"sample rates differ: {signal_field.sample_rate} vs {noise_field.sample_rate}"
        )
    bw = noise_field.sample_rate if measurement_bw_hz is None else measurement_bw_hz
    return osnr_from_powers(
        signal_field.mean_power(), noise_field.mean_power(), bw, reference_bw_hz, ceiling_db
    )


def evm_pct(rx_symbols, ref_symbols) -> float:
    rx = np.asarray(rx_symbols, dtype=complex)
    ref = np.asarray(ref_symbols, dtype=complex)
    if rx.shape != ref.shape:
        raise ValueError(f"symbol arrays differ in length: {rx.size} vs {ref.size}")
    ref_power = np.mean(np.abs(ref) ** 2)
    if ref_power == 0:
        raise ValueError("reference symbols have zero energy")
    return 100.0 * math.sqrt(np.mean(np.abs(rx - ref) ** 2) / ref_power)


@dataclass(frozen=True)
class MetricsRecord:
    condition: str
    distance_km: float
    ber: float
    q_linear: float
    osnr_db: float
    evm_pct: float
    n_bits: int
    seed: int
    ber_floor: float = math.nan
    ber_stderr: float = math.nan
    received_power_dbm: float = math.nan
    osnr_at_ceiling: bool = False

    def __post_init__(self):
        if not 0.0 <= self.ber <= 1.0:
            raise ValueError(f"BER must lie in [0, 1], got {self.ber}")
        if self.n_bits <= 0:
            raise ValueError("n_bits must be positive")

    def as_dict(self) -> dict:
        return asdict(self)


RESULT_COLUMNS = tuple(MetricsRecord.__dataclass_fields__)


def _open_for_write(path: Path):
    try:
        return open(path, "w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def export_constellation(rx_symbols, path: str | Path) -> Path:
    path = Path(path)
    symbols = np.asarray(rx_symbols, dtype=complex).ravel()
    with _open_for_write(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(["re", "im"])
        writer.writerows((repr(float(s.real)), repr(float(s.imag))) for s in symbols)
    return path


def eye_traces(waveform, symbol_period_samples: int) -> tuple[np.ndarray, np.ndarray]:
    """Fold a real waveform modulo two symbol periods.

    Returns ``(t_frac, amplitude)`` where ``t_frac`` is the time offset in
    symbol periods, in [0, 2).
    """
    if not (isinstance(symbol_period_samples, (int, np.integer)) and symbol_period_samples >= 1):
        raise ValueError("symbol period must be a positive integer")
    x = np.real(np.asarray(waveform)).ravel()
    n = np.arange(x.size)
    t_frac = (n % (2 * symbol_period_samples)) / symbol_period_samples
    return t_frac, x


def export_eye(waveform, symbol_period_samples: int, path: str | Path) -> Path:
    path = Path(path)
    t_frac, amplitude = eye_traces(waveform, symbol_period_samples)
    with _open_for_write(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(["t_frac", "amplitude"])
        writer.writerows((repr(float(t)), repr(float(a))) for t, a in zip(t_frac, amplitude))
    return path


def symbol_waveform(symbols, samples_per_symbol: int = 16) -> np.ndarray:
    """In-phase rail of a symbol sequence as a held (square) waveform."""
    return np.repeat(np.real(np.asarray(symbols)), samples_per_symbol)
