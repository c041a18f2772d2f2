"""Deterministic FSO link budget: geometric spreading, weather attenuation,
Shannon capacity and spectral efficiency.

Units follow the usual FSO convention: apertures in meters, divergence in
mrad and distance in km, so that ``divergence_mrad * distance_km`` is the
beam spread in meters.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

POLARIZATION_FACTORS = (1, 2, 4)


def _require_positive_finite(name: str, value: float) -> None:
    if not (math.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be positive and finite, got {value!r}")


@dataclass(frozen=True)
class LinkGeometry:
    tx_aperture_m: float
    rx_aperture_m: float
    divergence_mrad: float
    distance_km: float

    def __post_init__(self):
        for name in ("tx_aperture_m", "rx_aperture_m", "divergence_mrad", "distance_km"):
            _require_positive_finite(name, getattr(self, name))

    @property
    def beam_diameter_m(self) -> float:
        """Beam diameter at the receiver plane."""
        return self.tx_aperture_m + self.divergence_mrad * self.distance_km


@dataclass(frozen=True)
class WeatherAttenuation:
    label: str
    alpha_db_per_km: float

    def __post_init__(self):
        if not (math.isfinite(self.alpha_db_per_km) and self.alpha_db_per_km >= 0):
            raise ValueError(
                f"attenuation for {self.label!r} must be >= 0 dB/km, got {self.alpha_db_per_km!r}"
            )

    def loss_db(self, distance_km: float) -> float:
        return self.alpha_db_per_km * distance_km


# Reference attenuation for Bangladesh weather, dB/km.
LIGHT_RAIN = WeatherAttenuation("light_rain", 2.97)
MODERATE_RAIN = WeatherAttenuation("moderate_rain", 6.55)
LIGHT_FOG = WeatherAttenuation("light_fog", 12.47)
HEAVY_RAIN = WeatherAttenuation("heavy_rain", 23.12)
WEATHER_CONDITIONS = (LIGHT_RAIN, MODERATE_RAIN, LIGHT_FOG, HEAVY_RAIN)


@dataclass(frozen=True)
class CapacityQuery:
    polarization_factor: int
    bandwidth_hz: float
    snr_linear: float

    def __post_init__(self):
        _check_polarization_factor(self.polarization_factor)
        if not self.bandwidth_hz >= 0:
            raise ValueError(f"bandwidth must be >= 0, got {self.bandwidth_hz!r}")
        if not self.snr_linear >= 0:
            raise ValueError(f"SNR must be >= 0, got {self.snr_linear!r}")


def _check_polarization_factor(m: int) -> None:
    if m not in POLARIZATION_FACTORS:
        raise ValueError(f"polarization factor must be one of {POLARIZATION_FACTORS}, got {m!r}")


def geometric_loss_db(geom: LinkGeometry) -> float:
    """Geometric spreading loss, 20*log10(d_r / (d_t + theta*D)).

    Negative whenever the spread beam is wider than the receive aperture.
    """
    return 20.0 * math.log10(geom.rx_aperture_m / geom.beam_diameter_m)


def received_power_dbm(
    tx_power_dbm: float, geom: LinkGeometry, atten: WeatherAttenuation
) -> float:
    """Received optical power, dB form of the FSO link equation."""
    if not math.isfinite(tx_power_dbm):
        raise ValueError(f"transmit power must be finite, got {tx_power_dbm!r}")
    return tx_power_dbm + geometric_loss_db(geom) - atten.loss_db(geom.distance_km)


def received_power_w(tx_power_w: float, geom: LinkGeometry, atten: WeatherAttenuation) -> float:
    """Linear-domain link equation.

    Underflows to 0 for very lossy links; ``received_power_dbm`` is the
    canonical path.
    """
    spread = (geom.rx_aperture_m / geom.beam_diameter_m) ** 2
    return tx_power_w * spread * 10.0 ** (-atten.loss_db(geom.distance_km) / 10.0)


def shannon_capacity_bps(q: CapacityQuery) -> float:
    """C = m * B * log2(1 + SNR)."""
    # m applied last: scaling by a power of two is exact, so C(4) == 2*C(2) == 4*C(1)
    return q.polarization_factor * (q.bandwidth_hz * math.log2(1.0 + q.snr_linear))


def spectral_efficiency_bps_hz(m: int, snr_linear: float) -> float:
    """S = m * log2(1 + SNR)."""
    _check_polarization_factor(m)
    if not snr_linear >= 0:
        raise ValueError(f"SNR must be >= 0, got {snr_linear!r}")
    return m * math.log2(1.0 + snr_linear)


def dbm_to_w(p_dbm: float) -> float:
    return 10.0 ** ((p_dbm - 30.0) / 10.0)


def w_to_dbm(p_w: float) -> float:
    return 10.0 * math.log10(p_w) + 30.0
