"""Seeded Monte-Carlo sweeps over scenario x distance grids, and their outputs.

Each trial draws from generators keyed by (master_seed, scenario index,
distance index, trial index), so results are identical for any worker count
and any completion order.
"""
from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import scipy

from cpdm_fso import __version__, metrics, ofdm, phy, seeding
from cpdm_fso.channel import apply_channel, channel_report
from cpdm_fso.config import RunConfig, config_to_dict
from cpdm_fso.linkbudget import w_to_dbm
from cpdm_fso.metrics import MetricsRecord
from cpdm_fso.polarization import PolarizedField, combine_tributaries


EYE_SAMPLES_PER_SYMBOL = 16


class SweepError(RuntimeError):
    """A trial failed; the message names the (scenario, distance, trial) cell."""


@dataclass
class TrialOutcome:
    errors: int
    n_bits: int
    block_errors: np.ndarray  # bit errors per fading block
    block_bits: np.ndarray
    evm_num: float  # sum |rx - ref|^2
    evm_den: float  # sum |ref|^2
    signal_w: float
    noise_w: float
    rx_power_w: float
    constellation: np.ndarray | None = None
    eye: np.ndarray | None = None


@dataclass
class CellResult:
    scenario_index: int
    distance_index: int
    record: MetricsRecord
    expected_power_dbm: float
    measured_power_dbm: float
    constellation: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=complex))
    eye: np.ndarray = field(default_factory=lambda: np.zeros(0))


@dataclass
class SweepResults:
    cells: list[CellResult]
    launch_power_dbm: float

    @property
    def records(self) -> list[MetricsRecord]:
        return [c.record for c in self.cells]


def trial_seed(cfg: RunConfig, si: int, di: int, ti: int) -> int:
    return seeding.derive_seed(cfg.master_seed, si, di, ti)


def _block_counts(tx: np.ndarray, rx: np.ndarray, sys: phy.SystemConfig) -> tuple[np.ndarray, np.ndarray]:
    """Bit errors per OFDM frame, summed over tributaries (frames share a fading block)."""
    per_frame = sys.ofdm.symbols_per_frame * sys.ofdm.bits_per_symbol
    trib_tx = phy._pad_bits(tx, sys.ofdm)[0]
    padded_rx = np.zeros_like(trib_tx).ravel()
    padded_rx[: rx.size] = rx
    trib_rx = padded_rx.reshape(trib_tx.shape)
    valid = np.zeros(trib_tx.size, dtype=bool)
    valid[: tx.size] = True
    valid = valid.reshape(trib_tx.shape)
    wrong = (trib_tx != trib_rx) & valid
    n_frames = -(-trib_tx.shape[1] // per_frame)
    edges = np.arange(0, n_frames * per_frame, per_frame)
    errs = np.add.reduceat(wrong.sum(axis=0), edges)
    bits = np.add.reduceat(valid.sum(axis=0), edges)
    return errs, bits


def run_trial(cfg: RunConfig, si: int, di: int, ti: int, keep_traces: bool = False) -> TrialOutcome:
    """transmit -> apply_channel -> receive -> metrics for one seeded trial."""
    seed = trial_seed(cfg, si, di, ti)
    sys = replace(cfg.system, seed=seed)
    sc = cfg.scenarios[si].at_distance(cfg.distances_km[di])
    bits = ofdm.prbs_generate(cfg.bits_per_trial, seeding.derive_seed(seed, seeding.BITS), sys.bit_rate_bps)
    tx = phy.transmit(bits, sys)
    rx = apply_channel(tx, sc, seeding.rng_for(seed, seeding.CHANNEL))
    rec = phy.receive_detailed(rx, sys, seeding.rng_for(seed, seeding.RX_NOISE), n_bits=bits.bits.size)

    block_errors, block_bits = _block_counts(bits.bits, rec.bits.bits, sys)
    ref = phy.tributary_bits(bits, sys)
    evm_num = evm_den = 0.0
    for t, syms in enumerate(rec.symbols):
        r = ofdm.qpsk_map(ref[t])
        evm_num += float(np.sum(np.abs(syms - r) ** 2))
        evm_den += float(np.sum(np.abs(r) ** 2))

    signal = combine_tributaries(rec.arms)
    noise = PolarizedField(np.concatenate([n.jones for n in rec.noise]), signal.sample_rate)
    out = TrialOutcome(
        errors=int(block_errors.sum()),
        n_bits=int(block_bits.sum()),
        block_errors=block_errors,
        block_bits=block_bits,
        evm_num=evm_num,
        evm_den=evm_den,
        signal_w=signal.mean_power(),
        noise_w=noise.mean_power(),
        rx_power_w=rx.mean_power(),
    )
    if keep_traces:
        n_const = cfg.output.constellation_points
        out.constellation = rec.symbols[0][:n_const]
        out.eye = metrics.symbol_waveform(rec.symbols[0][: cfg.output.eye_symbols], EYE_SAMPLES_PER_SYMBOL)
    return out


def _run_task(args) -> tuple[tuple[int, int, int], TrialOutcome]:
    cfg, si, di, ti = args
    try:
        return (si, di, ti), run_trial(cfg, si, di, ti, keep_traces=(ti == 0))
    except Exception as exc:
        label = cfg.scenarios[si].label
        raise SweepError(
            f"trial failed at scenario {label!r} (index {si}), "
            f"distance {cfg.distances_km[di]} km, trial {ti}: {exc}"
        ) from exc


def _aggregate(cfg: RunConfig, si: int, di: int, trials: list[TrialOutcome], launch_dbm: float) -> CellResult:
    sc = cfg.scenarios[si].at_distance(cfg.distances_km[di])
    errors = sum(t.errors for t in trials)
    n_bits = sum(t.n_bits for t in trials)
    ber = errors / n_bits
    block_errors = np.concatenate([t.block_errors for t in trials])
    block_bits = np.concatenate([t.block_bits for t in trials])
    # Fading makes bits within a block correlated: use the spread of block BERs
    # when it exceeds the binomial figure.
    binomial = math.sqrt(max(ber * (1 - ber), 0.0) / n_bits)
    if block_bits.size > 1:
        block_ber = block_errors / block_bits
        weights = block_bits / block_bits.sum()
        spread = math.sqrt(float(np.sum(weights**2 * (block_ber - ber) ** 2)) * block_bits.size / (block_bits.size - 1))
    else:
        spread = 0.0
    rx_cfg = cfg.system.receiver
    osnr = metrics.osnr_from_powers(
        sum(t.signal_w for t in trials) / len(trials),
        sum(t.noise_w for t in trials) / len(trials),
        rx_cfg.noise_bandwidth_hz,
    )
    evm = 100.0 * math.sqrt(sum(t.evm_num for t in trials) / sum(t.evm_den for t in trials))
    expected = channel_report(sc, launch_dbm)["received_power_dbm"]
    measured = w_to_dbm(sum(t.rx_power_w for t in trials) / len(trials))
    record = MetricsRecord(
        condition=sc.label,
        distance_km=sc.geometry.distance_km,
        ber=ber,
        q_linear=metrics.reported_q(ber),
        osnr_db=osnr.value_db,
        evm_pct=evm,
        n_bits=n_bits,
        seed=trial_seed(cfg, si, di, 0),
        ber_floor=1.0 / n_bits,
        ber_stderr=max(binomial, spread),
        received_power_dbm=measured,
        osnr_at_ceiling=osnr.at_ceiling,
    )
    first = trials[0]
    return CellResult(si, di, record, expected, measured, first.constellation, first.eye)


def measured_launch_power_dbm(cfg: RunConfig) -> float:
    """Mean transmitted power of a seeded probe frame."""
    sys = replace(cfg.system, seed=seeding.derive_seed(cfg.master_seed, seeding.SYSTEM))
    bits = ofdm.prbs_generate(cfg.bits_per_trial, seeding.derive_seed(sys.seed, seeding.BITS))
    return w_to_dbm(phy.transmit(bits, sys).mean_power())


def run_sweep(cfg: RunConfig, workers: int | None = None) -> SweepResults:
    """Run every (scenario, distance, trial) and aggregate one record per cell.

    Rows follow scenario order, then distance order. Output does not depend
    on ``workers``.
    """
    workers = cfg.workers if workers is None else workers
    tasks = [
        (cfg, si, di, ti)
        for si in range(len(cfg.scenarios))
        for di in range(len(cfg.distances_km))
        for ti in range(cfg.trials)
    ]
    if workers <= 1:
        outcomes = dict(map(_run_task, tasks))
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = dict(pool.map(_run_task, tasks, chunksize=max(1, len(tasks) // (4 * workers))))
    launch = measured_launch_power_dbm(cfg)
    cells = []
    for si in range(len(cfg.scenarios)):
        for di in range(len(cfg.distances_km)):
            trials = [outcomes[(si, di, ti)] for ti in range(cfg.trials)]
            cells.append(_aggregate(cfg, si, di, trials, launch))
    return SweepResults(cells, launch)


# Outputs --------------------------------------------------------------------


def _fmt(x) -> str:
    if isinstance(x, bool):
        return str(x).lower()
    if isinstance(x, float):
        return repr(x)
    return str(x)


def _json_safe(x):
    if isinstance(x, float) and not math.isfinite(x):
        return str(x)
    return x


def format_table(results: SweepResults) -> str:
    """Human-readable results table, 6 significant digits."""
    head = ("condition", "distance_km", "ber", "ber_floor", "q_linear", "osnr_db", "evm_pct", "rx_power_dbm")
    rows = [head]
    for c in results.cells:
        r = c.record
        rows.append(
            (
                r.condition,
                f"{r.distance_km:.6g}",
                f"{r.ber:.6g}",
                f"{r.ber_floor:.6g}",
                f"{r.q_linear:.6g}",
                f"{r.osnr_db:.6g}" + ("*" if r.osnr_at_ceiling else ""),
                f"{r.evm_pct:.6g}",
                f"{r.received_power_dbm:.6g}",
            )
        )
    widths = [max(len(row[i]) for row in rows) for i in range(len(head))]
    return "\n".join("  ".join(v.rjust(w) for v, w in zip(row, widths)) for row in rows)


def run_metadata(cfg: RunConfig, results: SweepResults) -> dict:
    """Seeds, versions, rates and configuration.

    Execution details that cannot change results (output location, worker
    count) are left out so that repeated runs produce identical files.
    """
    config = config_to_dict(cfg)
    del config["output"]["directory"]
    del config["sweep"]["workers"]
    return {
        "master_seed": cfg.master_seed,
        "trial_seeds": {
            f"{sc.label}/{d}": [trial_seed(cfg, si, di, ti) for ti in range(cfg.trials)]
            for si, sc in enumerate(cfg.scenarios)
            for di, d in enumerate(cfg.distances_km)
        },
        "versions": {"cpdm_fso": __version__, "numpy": np.__version__, "scipy": scipy.__version__},
        "implied_rates": phy.implied_rates(cfg.system),
        "launch_power_dbm": results.launch_power_dbm,
        "nominal_launch_power_dbm": phy.launch_power_dbm(cfg.system),
        "noise_margin_db": cfg.system.noise_margin_db,
        "config": config,
    }


def emit_outputs(results: SweepResults, cfg: RunConfig, out_dir: str | Path | None = None, fmt: str | None = None) -> list[Path]:
    """Write the results table, per-cell traces, distance series and metadata."""
    if not results.cells:
        raise ValueError("no results to write")
    out = Path(cfg.output.directory if out_dir is None else out_dir)
    fmt = cfg.output.format if fmt is None else fmt
    if fmt not in ("csv", "json"):
        raise ValueError(f"unknown output format {fmt!r}")
    try:
        out.mkdir(parents=True, exist_ok=True)
        (out / "constellation").mkdir(exist_ok=True)
        (out / "eye").mkdir(exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create output directory {out}: {exc}") from exc
    written = []

    if fmt == "csv":
        path = out / "results.csv"
        with metrics._open_for_write(path) as fh:
            writer = csv.writer(fh)
            writer.writerow(metrics.RESULT_COLUMNS)
            for r in results.records:
                writer.writerow([_fmt(v) for v in r.as_dict().values()])
    else:
        path = out / "results.json"
        payload = [{k: _json_safe(v) for k, v in r.as_dict().items()} for r in results.records]
        with metrics._open_for_write(path) as fh:
            json.dump(payload, fh, indent=2)
            fh.write("\n")
    written.append(path)

    for c in results.cells:
        stem = f"{c.record.condition}_{c.record.distance_km:g}km"
        written.append(metrics.export_constellation(c.constellation, out / "constellation" / f"{stem}.csv"))
        written.append(metrics.export_eye(c.eye, EYE_SAMPLES_PER_SYMBOL, out / "eye" / f"{stem}.csv"))

    path = out / "distance_series.csv"
    with metrics._open_for_write(path) as fh:
        writer = csv.writer(fh)
        writer.writerow(["condition", "distance_km", "received_power_dbm", "measured_power_dbm", "osnr_db"])
        for c in results.cells:
            r = c.record
            writer.writerow([r.condition, _fmt(r.distance_km), _fmt(c.expected_power_dbm), _fmt(c.measured_power_dbm), _fmt(r.osnr_db)])
    written.append(path)

    path = out / "metadata.json"
    meta = json.loads(json.dumps(run_metadata(cfg, results), default=_json_safe))
    with metrics._open_for_write(path) as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(path)
    return written
