"""Atmospheric channel: link-equation scaling plus block Gamma-Gamma fading."""
from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from cpdm_fso.linkbudget import (
    LinkGeometry,
    WeatherAttenuation,
    geometric_loss_db,
    received_power_dbm,
)
from cpdm_fso.polarization import PolarizedField
from cpdm_fso.turbulence import (
    NO_TURBULENCE,
    GGParams,
    NoTurbulence,
    TurbulenceEnv,
    gg_shape_params,
    rytov_variance,
    sample_irradiance,
)


@dataclass(frozen=True)
class ChannelScenario:
    geometry: LinkGeometry
    attenuation: WeatherAttenuation
    turbulence: TurbulenceEnv | None = None
    implementation_loss_db: float = 0.0
    fading_block: int = 1

    def __post_init__(self):
        if not (isinstance(self.fading_block, (int, np.integer)) and self.fading_block >= 1):
            raise ValueError(f"fading_block must be an integer >= 1, got {self.fading_block!r}")
        if not (math.isfinite(self.implementation_loss_db) and self.implementation_loss_db >= 0):
            raise ValueError("implementation_loss_db must be finite and >= 0")
        if self.turbulence is not None:
            expected = self.geometry.distance_km * 1e3
            if not math.isclose(self.turbulence.distance_m, expected, rel_tol=1e-12):
                raise ValueError(
                    f"turbulence path {self.turbulence.distance_m} m does not match "
                    f"link distance {expected} m"
                )

    @property
    def label(self) -> str:
        return self.attenuation.label

    def at_distance(self, distance_km: float) -> ChannelScenario:
        """Same scenario moved to another link distance."""
        geom = replace(self.geometry, distance_km=distance_km)
        turb = None
        if self.turbulence is not None:
            turb = replace(self.turbulence, distance_m=distance_km * 1e3)
        return replace(self, geometry=geom, turbulence=turb)

    def gg_params(self) -> GGParams | NoTurbulence:
        if self.turbulence is None:
            return NO_TURBULENCE
        return gg_shape_params(rytov_variance(self.turbulence))


def deterministic_loss_db(sc: ChannelScenario) -> float:
    """Total deterministic gain in dB (negative): L_G - alpha*D - implementation loss."""
    return (
        geometric_loss_db(sc.geometry)
        - sc.attenuation.loss_db(sc.geometry.distance_km)
        - sc.implementation_loss_db
    )


def apply_channel(
    field: PolarizedField, sc: ChannelScenario, rng: np.random.Generator
) -> PolarizedField:
    """Scale the field amplitude by the link equation and sqrt(I) per fading block."""
    amplitude = 10.0 ** (deterministic_loss_db(sc) / 20.0)
    params = sc.gg_params()
    if isinstance(params, NoTurbulence):
        return field.scaled(amplitude)
    n = len(field)
    n_blocks = -(-n // sc.fading_block)
    irradiance = sample_irradiance(params, rng, n_blocks)
    per_sample = np.repeat(np.sqrt(irradiance), sc.fading_block)[:n]
    return field.scaled(amplitude * per_sample)


def channel_report(sc: ChannelScenario, tx_power_dbm: float) -> dict:
    """Link-budget summary for one scenario."""
    params = sc.gg_params()
    report = {
        "condition": sc.label,
        "distance_km": sc.geometry.distance_km,
        "geometric_loss_db": geometric_loss_db(sc.geometry),
        "attenuation_loss_db": -sc.attenuation.loss_db(sc.geometry.distance_km),
        "implementation_loss_db": -sc.implementation_loss_db,
        "rytov_variance": params.rytov_var,
        "gg_alpha": getattr(params, "alpha", math.inf),
        "gg_beta": getattr(params, "beta", math.inf),
        "scintillation_index": params.scintillation_index,
        "received_power_dbm": received_power_dbm(tx_power_dbm, sc.geometry, sc.attenuation)
        - sc.implementation_loss_db,
    }
    return report
