"""Jones-calculus components for the CPDM transmitter and receiver.

Conventions
-----------
Jones vectors are (ex, ey) in the horizontal/vertical basis with an
exp(-i*omega*t) phasor convention. Right circular polarization is
``RCP = (1, -i)/sqrt(2)`` and carries s3 = +1; ``LCP = (1, +i)/sqrt(2)``
carries s3 = -1.

Sampled fields
--------------
A :class:`PolarizedField` holds ``jones`` with shape ``(families, 2, n)``.
An ordinary beam has one family. The circular combiner keeps the RCP and LCP
families as separate layers so that the four tributaries (RCP-H, RCP-V,
LCP-H, LCP-V) stay independent through the link; the circular splitter
demultiplexes such a field, and projects a single-family field onto the
circular basis. Whenever the layers hold genuinely circular states the two
descriptions agree, because the family sum then equals ``P_R a + P_L b``.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

SQRT_HALF = 1.0 / math.sqrt(2.0)

H = np.array([1.0, 0.0], dtype=complex)
V = np.array([0.0, 1.0], dtype=complex)
RCP = np.array([1.0, -1.0j], dtype=complex) * SQRT_HALF
LCP = np.array([1.0, 1.0j], dtype=complex) * SQRT_HALF

P_H = np.outer(H, H.conj())
P_V = np.outer(V, V.conj())
P_R = np.outer(RCP, RCP.conj())
P_L = np.outer(LCP, LCP.conj())

# Tributary order used throughout the simulator.
TRIBUTARIES = ("RCP-H", "RCP-V", "LCP-H", "LCP-V")


@dataclass(frozen=True)
class JonesVector:
    ex: complex
    ey: complex

    def __post_init__(self):
        if not (np.isfinite(self.ex) and np.isfinite(self.ey)):
            raise ValueError("Jones components must be finite")

    @classmethod
    def linear(cls, azimuth_rad: float, amplitude: float = 1.0) -> JonesVector:
        return cls(amplitude * math.cos(azimuth_rad), amplitude * math.sin(azimuth_rad))

    @classmethod
    def from_array(cls, v) -> JonesVector:
        return cls(complex(v[0]), complex(v[1]))

    def as_array(self) -> np.ndarray:
        return np.array([self.ex, self.ey], dtype=complex)

    @property
    def power(self) -> float:
        return abs(self.ex) ** 2 + abs(self.ey) ** 2


@dataclass(frozen=True)
class StokesVector:
    s0: float
    s1: float
    s2: float
    s3: float

    def normalized(self) -> StokesVector:
        if self.s0 == 0:
            raise ValueError("cannot normalize a zero-power Stokes vector")
        return StokesVector(1.0, self.s1 / self.s0, self.s2 / self.s0, self.s3 / self.s0)

    @property
    def degree_of_polarization(self) -> float:
        return math.sqrt(self.s1**2 + self.s2**2 + self.s3**2) / self.s0

    def as_tuple(self) -> tuple[float, float, float, float]:
        return (self.s0, self.s1, self.s2, self.s3)


@dataclass
class PolarizedField:
    jones: np.ndarray
    sample_rate: float
    carrier_hz: float | None = None  # metadata only, the field is a complex envelope

    def __post_init__(self):
        jones = np.asarray(self.jones, dtype=complex)
        if jones.ndim == 2:
            jones = jones[np.newaxis]
        if jones.ndim != 3 or jones.shape[1] != 2:
            raise ValueError(f"jones must have shape (families, 2, n), got {jones.shape}")
        if not (self.sample_rate > 0 and math.isfinite(self.sample_rate)):
            raise ValueError(f"sample rate must be positive, got {self.sample_rate!r}")
        self.jones = jones

    @classmethod
    def from_components(cls, ex, ey, sample_rate: float, carrier_hz=None) -> PolarizedField:
        ex = np.asarray(ex, dtype=complex)
        ey = np.asarray(ey, dtype=complex)
        if ex.shape != ey.shape or ex.ndim != 1:
            raise ValueError("ex and ey must be 1-D arrays of equal length")
        return cls(np.stack([ex, ey])[np.newaxis], sample_rate, carrier_hz)

    @classmethod
    def constant(cls, v: JonesVector, n: int, sample_rate: float, carrier_hz=None) -> PolarizedField:
        return cls.from_components(np.full(n, v.ex), np.full(n, v.ey), sample_rate, carrier_hz)

    @property
    def n_families(self) -> int:
        return self.jones.shape[0]

    def __len__(self) -> int:
        return self.jones.shape[2]

    @property
    def ex(self) -> np.ndarray:
        return self.jones[:, 0].sum(axis=0)

    @property
    def ey(self) -> np.ndarray:
        return self.jones[:, 1].sum(axis=0)

    def power(self) -> np.ndarray:
        """Instantaneous optical power per sample, summed over families (W)."""
        return np.sum(np.abs(self.jones) ** 2, axis=(0, 1))

    def mean_power(self) -> float:
        return float(np.mean(self.power()))

    def with_jones(self, jones) -> PolarizedField:
        return PolarizedField(jones, self.sample_rate, self.carrier_hz)

    def collapse(self) -> PolarizedField:
        """Single-family view: the coherent sum of all families."""
        return self.with_jones(self.jones.sum(axis=0, keepdims=True))

    def scaled(self, factor) -> PolarizedField:
        """Multiply every component by a scalar or a per-sample array."""
        return self.with_jones(self.jones * factor)

    def transformed(self, matrix: np.ndarray) -> PolarizedField:
        """Apply a 2x2 Jones matrix to every sample of every family."""
        return self.with_jones(np.einsum("ij,fjn->fin", matrix, self.jones))

    def jones_at(self, index: int) -> JonesVector:
        return JonesVector(complex(self.ex[index]), complex(self.ey[index]))


def _check_compatible(a: PolarizedField, b: PolarizedField) -> None:
    if len(a) != len(b):
        raise ValueError(f"field lengths differ: {len(a)} vs {len(b)}")
    if a.sample_rate != b.sample_rate:
        raise ValueError(f"sample rates differ: {a.sample_rate} vs {b.sample_rate}")
    if a.carrier_hz != b.carrier_hz:
        raise ValueError(f"carrier frequencies differ: {a.carrier_hz} vs {b.carrier_hz}")


def retarder(retardance_rad: float, fast_axis_angle_rad: float) -> np.ndarray:
    """Linear retarder with the given retardance and fast-axis orientation."""
    c, s = math.cos(fast_axis_angle_rad), math.sin(fast_axis_angle_rad)
    rot = np.array([[c, s], [-s, c]], dtype=complex)
    core = np.diag([1.0, np.exp(1j * retardance_rad)])
    return rot.T @ core @ rot


def quarter_waveplate(fast_axis_angle_rad: float) -> np.ndarray:
    return retarder(math.pi / 2, fast_axis_angle_rad)


def half_waveplate(fast_axis_angle_rad: float) -> np.ndarray:
    return retarder(math.pi, fast_axis_angle_rad)


# Maps H -> RCP and V -> LCP (up to a common phase).
QWP_45 = quarter_waveplate(math.pi / 4)


def cpbs_matrices() -> tuple[np.ndarray, np.ndarray]:
    """Arm matrices of the circular splitter built from waveplates and a PBS.

    The input plate (the inverse of the 45 deg plate) turns RCP/LCP into
    H/V, the PBS separates them, and a 45 deg plate on each output restores
    the circular state.
    """
    q, q_inv = QWP_45, QWP_45.conj().T
    return q @ P_H @ q_inv, q @ P_V @ q_inv


def pbs_split(field: PolarizedField) -> tuple[PolarizedField, PolarizedField]:
    h = field.jones.copy()
    v = field.jones.copy()
    h[:, 1] = 0
    v[:, 0] = 0
    return field.with_jones(h), field.with_jones(v)


def pbc_combine(h_arm: PolarizedField, v_arm: PolarizedField) -> PolarizedField:
    _check_compatible(h_arm, v_arm)
    if h_arm.n_families != v_arm.n_families:
        raise ValueError("arms carry different numbers of families")
    out = np.empty_like(h_arm.jones)
    out[:, 0] = h_arm.jones[:, 0]
    out[:, 1] = v_arm.jones[:, 1]
    return h_arm.with_jones(out)


def cpbs_split(field: PolarizedField) -> tuple[PolarizedField, PolarizedField]:
    """Split into (RCP arm, LCP arm)."""
    if field.n_families == 2:
        return field.with_jones(field.jones[:1].copy()), field.with_jones(field.jones[1:].copy())
    if field.n_families != 1:
        raise ValueError(f"cannot split a field with {field.n_families} families")
    m_r, m_l = cpbs_matrices()
    return field.transformed(m_r), field.transformed(m_l)


def cpbc_combine(rcp_arm: PolarizedField, lcp_arm: PolarizedField) -> PolarizedField:
    """Combine an RCP-family and an LCP-family field into one two-family beam."""
    _check_compatible(rcp_arm, lcp_arm)
    if rcp_arm.n_families != 1 or lcp_arm.n_families != 1:
        raise ValueError("circular combiner inputs must be single-family fields")
    return rcp_arm.with_jones(np.concatenate([rcp_arm.jones, lcp_arm.jones]))


def split_tributaries(field: PolarizedField) -> list[PolarizedField]:
    """CPBS followed by a PBS on each arm, in ``TRIBUTARIES`` order."""
    rcp, lcp = cpbs_split(field)
    return [*pbs_split(rcp), *pbs_split(lcp)]


def combine_tributaries(arms) -> PolarizedField:
    """Inverse of ``split_tributaries``: two PBCs followed by the CPBC."""
    rcp_h, rcp_v, lcp_h, lcp_v = arms
    return cpbc_combine(pbc_combine(rcp_h, rcp_v), pbc_combine(lcp_h, lcp_v))


def stokes_params(v: JonesVector) -> StokesVector:
    s = stokes_trace(np.array([[v.ex], [v.ey]]))
    return StokesVector(*(float(c[0]) for c in s))


def stokes_trace(jones) -> np.ndarray:
    """Stokes parameters per sample for a (2, n) Jones array, shape (4, n)."""
    ex, ey = np.asarray(jones)
    cross = ex * ey.conj()
    return np.array(
        [
            np.abs(ex) ** 2 + np.abs(ey) ** 2,
            np.abs(ex) ** 2 - np.abs(ey) ** 2,
            2.0 * cross.real,
            2.0 * cross.imag,
        ]
    )


def field_stokes(field: PolarizedField) -> np.ndarray:
    """Stokes trace of what a polarization analyzer would see (family sum)."""
    return stokes_trace(np.stack([field.ex, field.ey]))


def export_stokes_trace(field: PolarizedField, path: str | Path) -> Path:
    path = Path(path)
    s = field_stokes(field)
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sample_index", "s0", "s1", "s2", "s3"])
            for n in range(s.shape[1]):
                writer.writerow([n, *(repr(float(x)) for x in s[:, n])])
    except OSError as exc:
        raise OSError(f"cannot write Stokes trace to {path}: {exc}") from exc
    return path
