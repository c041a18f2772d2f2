"""Baseband OFDM modem with Gray-coded QPSK and pilot-aided equalization.

Frame layout (one frame, pilot subcarriers, the default)::

    [training symbol] x n_training   all active subcarriers carry known QPSK
    [data symbol]     x d            n_used data + n_pilot pilot subcarriers

Each OFDM symbol is an ``n_fft``-point unitary IFFT preceded by a
``cp_len``-sample cyclic prefix. A stream is a sequence of frames with
``symbols_per_frame`` data symbols each; the last frame may be shorter.

With ``pilot_mode="symbol"`` the pilot count is read as whole pilot OFDM
symbols: every subcarrier of the active band carries data, and ``n_pilot``
known symbols are spread through each frame, one ahead of each chunk of data
symbols.

Subcarrier indices are signed (0 is DC, which is never used); the FFT bin of
subcarrier ``k`` is ``k % n_fft``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

PILOT_MODES = ("subcarrier", "symbol")
TRAINING_SEED = 0x0FD3


class FramingError(ValueError):
    """Sample stream does not match the configured frame structure."""


@dataclass(frozen=True)
class OfdmConfig:
    n_fft: int = 128
    n_used: int = 80
    cp_len: int = 20
    n_training: int = 10
    n_pilot: int = 6
    symbols_per_frame: int = 40
    pilot_mode: str = "subcarrier"
    training_seed: int = TRAINING_SEED

    def __post_init__(self):
        for name in ("n_fft", "n_used", "cp_len", "n_training", "n_pilot", "symbols_per_frame"):
            value = getattr(self, name)
            if not (isinstance(value, (int, np.integer)) and value > 0):
                raise ValueError(f"{name} must be a positive integer, got {value!r}")
        if self.pilot_mode not in PILOT_MODES:
            raise ValueError(f"pilot_mode must be one of {PILOT_MODES}, got {self.pilot_mode!r}")
        if self.n_active > self.n_fft - 1:
            raise ValueError(
                f"{self.n_active} active subcarriers do not fit in n_fft={self.n_fft} without DC"
            )
        if self.cp_len >= self.n_fft:
            raise ValueError("cp_len must be shorter than n_fft")

    @property
    def n_active(self) -> int:
        """Subcarriers carrying energy in a data symbol."""
        if self.pilot_mode == "subcarrier":
            return self.n_used + self.n_pilot
        return self.n_used

    @property
    def symbol_len(self) -> int:
        return self.n_fft + self.cp_len

    @property
    def pilot_rows(self) -> int:
        """Pilot OFDM symbols per frame."""
        return self.n_pilot if self.pilot_mode == "symbol" else 0

    @property
    def bits_per_symbol(self) -> int:
        return 2 * self.n_used


@dataclass(frozen=True)
class SubcarrierMap:
    active: np.ndarray  # signed subcarrier indices, ascending
    data: np.ndarray
    pilots: np.ndarray
    n_fft: int

    def bins(self, which: np.ndarray) -> np.ndarray:
        return np.mod(which, self.n_fft)

    @property
    def data_pos(self) -> np.ndarray:
        """Positions of the data subcarriers within ``active``."""
        return np.searchsorted(self.active, self.data)

    @property
    def pilot_pos(self) -> np.ndarray:
        return np.searchsorted(self.active, self.pilots)


def subcarrier_map(cfg: OfdmConfig) -> SubcarrierMap:
    """Active band symmetric about DC with pilots evenly interleaved.

    For the default configuration the 86 active subcarriers are -43..-1 and
    1..43, and the pilots sit at +-8, +-22, +-36.
    """
    n = cfg.n_active
    neg = n // 2
    active = np.concatenate([np.arange(-neg, 0), np.arange(1, n - neg + 1)])
    if cfg.pilot_mode == "subcarrier":
        pos = np.floor((np.arange(cfg.n_pilot) + 0.5) * n / cfg.n_pilot).astype(int)
        pilots = active[pos]
        data = np.setdiff1d(active, pilots)
    else:
        pilots = np.array([], dtype=int)
        data = active
    return SubcarrierMap(active=active, data=data, pilots=pilots, n_fft=cfg.n_fft)


def export_subcarrier_map(cfg: OfdmConfig, path: str | Path) -> Path:
    path = Path(path)
    m = subcarrier_map(cfg)
    role = {int(k): "data" for k in m.data}
    role.update({int(k): "pilot" for k in m.pilots})
    with open(path, "w") as fh:
        fh.write("# subcarrier fft_bin role\n")
        for k in range(-(cfg.n_fft // 2), cfg.n_fft - cfg.n_fft // 2):
            fh.write(f"{k} {k % cfg.n_fft} {role.get(k, 'null')}\n")
    return path


@dataclass
class BitStream:
    bits: np.ndarray
    rate_bps: float = 50e9

    def __post_init__(self):
        self.bits = np.asarray(self.bits, dtype=np.uint8)
        if self.bits.ndim != 1:
            raise ValueError("bit stream must be one-dimensional")
        if np.any(self.bits > 1):
            raise ValueError("bit stream must contain only 0 and 1")

    def __len__(self) -> int:
        return self.bits.size


@dataclass
class ChannelEstimate:
    gains: np.ndarray  # one complex gain per active subcarrier
    cpe: np.ndarray = field(default_factory=lambda: np.zeros(0))  # rad, per data symbol

    def __post_init__(self):
        self.gains = np.asarray(self.gains, dtype=complex)
        self.cpe = np.asarray(self.cpe, dtype=float)
        if not (np.all(np.isfinite(self.gains)) and np.all(np.isfinite(self.cpe))):
            raise ValueError("channel estimate must be finite")

    @classmethod
    def identity(cls, cfg: OfdmConfig) -> ChannelEstimate:
        return cls(np.ones(cfg.n_active, dtype=complex))


def prbs_generate(n_bits: int, seed: int, rate_bps: float = 50e9) -> BitStream:
    if n_bits <= 0:
        raise ValueError(f"n_bits must be positive, got {n_bits}")
    rng = np.random.default_rng(seed)
    return BitStream(rng.integers(0, 2, size=n_bits, dtype=np.uint8), rate_bps)


def qpsk_map(bits) -> np.ndarray:
    """Gray QPSK: 00 -> +1+1j, 01 -> -1+1j, 11 -> -1-1j, 10 -> +1-1j (over sqrt 2)."""
    bits = np.asarray(bits, dtype=np.int8)
    if bits.size % 2:
        raise ValueError(f"QPSK needs an even number of bits, got {bits.size}")
    first, second = bits[0::2], bits[1::2]
    return ((1 - 2 * second) + 1j * (1 - 2 * first)) / math.sqrt(2.0)


def qpsk_demap(symbols) -> np.ndarray:
    symbols = np.asarray(symbols)
    out = np.empty(2 * symbols.size, dtype=np.uint8)
    out[0::2] = symbols.imag < 0
    out[1::2] = symbols.real < 0
    return out


def _qpsk_from_seed(seed, shape) -> np.ndarray:
    rng = np.random.default_rng(seed)
    bits = rng.integers(0, 2, size=2 * math.prod(shape))
    return qpsk_map(bits).reshape(shape)


def training_symbols(cfg: OfdmConfig) -> np.ndarray:
    """Known training pattern, shape (n_training, n_active)."""
    return _qpsk_from_seed([cfg.training_seed, 0], (cfg.n_training, cfg.n_active))


def pilot_values(cfg: OfdmConfig) -> np.ndarray:
    """Known pilot symbols: (n_pilot,) tones, or (n_pilot, n_active) symbols."""
    if cfg.pilot_mode == "subcarrier":
        return _qpsk_from_seed([cfg.training_seed, 1], (cfg.n_pilot,))
    return _qpsk_from_seed([cfg.training_seed, 1], (cfg.n_pilot, cfg.n_active))


@dataclass(frozen=True)
class FrameLayout:
    data_per_frame: tuple[int, ...]

    @classmethod
    def for_data_symbols(cls, n_data: int, cfg: OfdmConfig) -> FrameLayout:
        if n_data <= 0:
            raise FramingError("need at least one data symbol")
        full, rest = divmod(n_data, cfg.symbols_per_frame)
        sizes = [cfg.symbols_per_frame] * full + ([rest] if rest else [])
        return cls(tuple(sizes))

    @classmethod
    def from_sample_count(cls, n_samples: int, cfg: OfdmConfig) -> FrameLayout:
        if n_samples <= 0 or n_samples % cfg.symbol_len:
            raise FramingError(
                f"{n_samples} samples is not a whole number of {cfg.symbol_len}-sample symbols"
            )
        rows = n_samples // cfg.symbol_len
        overhead = cfg.n_training + cfg.pilot_rows
        full_rows = overhead + cfg.symbols_per_frame
        n_full, rest = divmod(rows, full_rows)
        sizes = [cfg.symbols_per_frame] * n_full
        if rest:
            if rest <= overhead:
                raise FramingError(f"trailing frame of {rest} symbols has no data")
            sizes.append(rest - overhead)
        return cls(tuple(sizes))

    @property
    def n_data(self) -> int:
        return sum(self.data_per_frame)

    def frame_rows(self, cfg: OfdmConfig) -> list[int]:
        return [cfg.n_training + cfg.pilot_rows + d for d in self.data_per_frame]

    def n_samples(self, cfg: OfdmConfig) -> int:
        return sum(self.frame_rows(cfg)) * cfg.symbol_len


def modulate_grid(grid: np.ndarray, cfg: OfdmConfig) -> np.ndarray:
    """Unitary IFFT plus cyclic prefix for a (n_symbols, n_fft) bin grid."""
    grid = np.atleast_2d(grid)
    if grid.shape[1] != cfg.n_fft:
        raise ValueError(f"grid must have {cfg.n_fft} bins per symbol")
    body = np.fft.ifft(grid, axis=1, norm="ortho")
    return np.concatenate([body[:, -cfg.cp_len:], body], axis=1).ravel()


def demodulate_grid(samples: np.ndarray, cfg: OfdmConfig) -> np.ndarray:
    """Strip cyclic prefixes and FFT, giving a (n_symbols, n_fft) bin grid."""
    samples = np.asarray(samples)
    if samples.size % cfg.symbol_len:
        raise FramingError(f"{samples.size} samples is not a whole number of OFDM symbols")
    rows = samples.reshape(-1, cfg.symbol_len)[:, cfg.cp_len:]
    return np.fft.fft(rows, axis=1, norm="ortho")


def _frame_rows(data: np.ndarray, cfg: OfdmConfig, smap: SubcarrierMap) -> np.ndarray:
    """Active-band rows (training, pilots, data) for one frame."""
    d = data.shape[0]
    data_rows = np.empty((d, cfg.n_active), dtype=complex)
    data_rows[:, smap.data_pos] = data
    if cfg.pilot_mode == "subcarrier":
        data_rows[:, smap.pilot_pos] = pilot_values(cfg)
        return np.concatenate([training_symbols(cfg), data_rows])
    parts = [training_symbols(cfg)]
    pilots = pilot_values(cfg)
    for j, chunk in enumerate(np.array_split(np.arange(d), cfg.n_pilot)):
        parts.append(pilots[j : j + 1])
        parts.append(data_rows[chunk])
    return np.concatenate(parts)


def ofdm_modulate(symbols, cfg: OfdmConfig) -> np.ndarray:
    """Frame QPSK data symbols into OFDM baseband samples."""
    symbols = np.asarray(symbols, dtype=complex).ravel()
    if symbols.size == 0 or symbols.size % cfg.n_used:
        raise ValueError(
            f"symbol count {symbols.size} is not a positive multiple of n_used={cfg.n_used}"
        )
    data = symbols.reshape(-1, cfg.n_used)
    layout = FrameLayout.for_data_symbols(data.shape[0], cfg)
    smap = subcarrier_map(cfg)
    bins = smap.bins(smap.active)
    out = []
    start = 0
    for d in layout.data_per_frame:
        rows = _frame_rows(data[start : start + d], cfg, smap)
        start += d
        grid = np.zeros((rows.shape[0], cfg.n_fft), dtype=complex)
        grid[:, bins] = rows
        out.append(modulate_grid(grid, cfg))
    return np.concatenate(out)


def _split_frame(rows: np.ndarray, d: int, cfg: OfdmConfig):
    """(training, data, pilot_rows, pilot_owner) from one frame's active rows."""
    training = rows[: cfg.n_training]
    body = rows[cfg.n_training :]
    if cfg.pilot_mode == "subcarrier":
        return training, body, None, None
    data_idx, pilot_idx, owner = [], [], np.empty(d, dtype=int)
    r = 0
    for j, chunk in enumerate(np.array_split(np.arange(d), cfg.n_pilot)):
        pilot_idx.append(r)
        r += 1
        data_idx.extend(range(r, r + chunk.size))
        owner[chunk] = j
        r += chunk.size
    return training, body[data_idx], body[pilot_idx], owner


def estimate_channel(
    received_training,
    known_training,
    cfg: OfdmConfig,
    received_data=None,
) -> ChannelEstimate:
    """Least-squares gains from training plus per-symbol common phase error.

    ``received_training`` and ``known_training`` are (n_training, n_active)
    active-band rows. ``received_data`` holds the frame's received rows after
    the training (data symbols, and pilot symbols in symbol mode); when given,
    the common phase error of every data symbol is measured on its pilots.
    """
    rx = np.atleast_2d(np.asarray(received_training, dtype=complex))
    known = np.atleast_2d(np.asarray(known_training, dtype=complex))
    if rx.shape != known.shape or rx.shape[0] < 1:
        raise ValueError(f"training shapes differ: {rx.shape} vs {known.shape}")
    if np.any(known == 0):
        raise ValueError("known training symbols must be non-zero")
    gains = np.mean(rx / known, axis=0)
    if received_data is None:
        return ChannelEstimate(gains)

    body = np.atleast_2d(np.asarray(received_data, dtype=complex))
    smap = subcarrier_map(cfg)
    if cfg.pilot_mode == "subcarrier":
        ref = gains[smap.pilot_pos] * pilot_values(cfg)
        corr = body[:, smap.pilot_pos] @ ref.conj()
        return ChannelEstimate(gains, np.angle(corr))
    d = body.shape[0] - cfg.n_pilot
    _, _, pilot_rows, owner = _split_frame(np.concatenate([rx, body]), d, cfg)
    corr = np.sum(pilot_rows * (gains * pilot_values(cfg)).conj(), axis=1)
    return ChannelEstimate(gains, np.angle(corr)[owner])


def _equalize(data_rows: np.ndarray, est: ChannelEstimate, smap: SubcarrierMap) -> np.ndarray:
    eq = data_rows[:, smap.data_pos] / est.gains[smap.data_pos]
    if est.cpe.size:
        if est.cpe.size != data_rows.shape[0]:
            raise ValueError(
                f"estimate has {est.cpe.size} phase values for {data_rows.shape[0]} symbols"
            )
        eq = eq * np.exp(-1j * est.cpe)[:, None]
    return eq


def _frames(samples, cfg: OfdmConfig):
    samples = np.asarray(samples)
    layout = FrameLayout.from_sample_count(samples.size, cfg)
    grid = demodulate_grid(samples, cfg)
    smap = subcarrier_map(cfg)
    active = grid[:, smap.bins(smap.active)]
    start = 0
    for d, n_rows in zip(layout.data_per_frame, layout.frame_rows(cfg)):
        yield d, active[start : start + n_rows]
        start += n_rows


def ofdm_demodulate(samples, cfg: OfdmConfig, est) -> np.ndarray:
    """Recover data symbols with a given estimate.

    ``est`` is one :class:`ChannelEstimate` applied to every frame (its phase
    vector, if any, spans all data symbols of the stream) or a sequence with
    one estimate per frame.
    """
    smap = subcarrier_map(cfg)
    frames = list(_frames(samples, cfg))
    per_frame = isinstance(est, (list, tuple))
    if per_frame and len(est) != len(frames):
        raise ValueError(f"{len(est)} estimates for {len(frames)} frames")
    out = []
    offset = 0
    for f, (d, rows) in enumerate(frames):
        _, data, _, _ = _split_frame(rows, d, cfg)
        if per_frame:
            e = est[f]
        elif est.cpe.size:
            e = ChannelEstimate(est.gains, est.cpe[offset : offset + d])
        else:
            e = est
        out.append(_equalize(data, e, smap))
        offset += d
    return np.concatenate(out).ravel()


def demodulate_frames(samples, cfg: OfdmConfig, track_phase: bool = True):
    """Estimate the channel frame by frame and equalize.

    Returns the recovered data symbols and the list of per-frame estimates.
    """
    smap = subcarrier_map(cfg)
    known = training_symbols(cfg)
    symbols, estimates = [], []
    for d, rows in _frames(samples, cfg):
        training, data, _, _ = _split_frame(rows, d, cfg)
        est = estimate_channel(
            training, known, cfg, rows[cfg.n_training :] if track_phase else None
        )
        estimates.append(est)
        symbols.append(_equalize(data, est, smap))
    return np.concatenate(symbols).ravel(), estimates
