"""Command-line entry point.

Exit codes: 0 on success, 2 for configuration errors, 3 for runtime errors.
"""
from __future__ import annotations

import argparse
import math
import sys
from dataclasses import replace

import numpy as np
from scipy.integrate import quad

from cpdm_fso import linkbudget, metrics, ofdm, turbulence
from cpdm_fso.channel import channel_report
from cpdm_fso.config import ConfigError, RunConfig, default_config, load_config
from cpdm_fso.phy import launch_power_dbm

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cpdm-fso", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="YAML run configuration (default: shipped reference config)")
        p.add_argument("--out", help="output directory (overrides output.directory)")
        p.add_argument("--seed", type=int, help="master seed override")
        p.add_argument("--trials", type=int, help="Monte-Carlo trials per cell")
        p.add_argument("--format", choices=("csv", "json"), help="results table format")
        p.add_argument("--workers", type=int, help="worker processes")

    common(sub.add_parser("run", help="run the weather x distance sweep"))
    common(sub.add_parser("budget", help="print the link budget per scenario and distance"))
    sub.add_parser("selftest", help="run a quick invariant suite")
    return parser


def _resolve_config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else default_config()
    changes = {}
    if args.seed is not None:
        if args.seed < 0:
            raise ConfigError([(None, "--seed", "must be >= 0")])
        changes["master_seed"] = args.seed
    if args.trials is not None:
        if args.trials < 1:
            raise ConfigError([(None, "--trials", "must be >= 1")])
        changes["trials"] = args.trials
    if args.workers is not None:
        if args.workers < 1:
            raise ConfigError([(None, "--workers", "must be >= 1")])
        changes["workers"] = args.workers
    out = cfg.output
    if args.out is not None:
        out = replace(out, directory=args.out)
    if args.format is not None:
        out = replace(out, format=args.format)
    return replace(cfg, output=out, **changes)


def _cmd_run(cfg: RunConfig) -> int:
    from cpdm_fso.sweep import emit_outputs, format_table, run_sweep

    results = run_sweep(cfg)
    emit_outputs(results, cfg)
    print(format_table(results))
    print(f"\nlaunch power {results.launch_power_dbm:.6g} dBm; outputs in {cfg.output.directory}")
    return EXIT_OK


def _cmd_budget(cfg: RunConfig) -> int:
    tx = launch_power_dbm(cfg.system)
    head = ("condition", "distance_km", "geometric_db", "attenuation_db", "rytov_var",
            "gg_alpha", "gg_beta", "scint_index", "rx_power_dbm", "margin_dbm")
    rows = [head]
    for sc in cfg.scenarios:
        for d in cfg.distances_km:
            r = channel_report(sc.at_distance(d), tx)
            rows.append(
                (
                    r["condition"],
                    f"{d:.6g}",
                    f"{r['geometric_loss_db']:.6g}",
                    f"{r['attenuation_loss_db']:.6g}",
                    f"{r['rytov_variance']:.6g}",
                    f"{r['gg_alpha']:.6g}",
                    f"{r['gg_beta']:.6g}",
                    f"{r['scintillation_index']:.6g}",
                    f"{r['received_power_dbm']:.6g}",
                    f"{r['received_power_dbm'] - cfg.system.noise_margin_db:.6g}",
                )
            )
    widths = [max(len(row[i]) for row in rows) for i in range(len(head))]
    print(f"launch power {tx:.6g} dBm, noise margin {cfg.system.noise_margin_db:.6g} dB")
    for row in rows:
        print("  ".join(v.rjust(w) for v, w in zip(row, widths)))
    return EXIT_OK


def _selftest_checks():
    geom = linkbudget.LinkGeometry(0.075, 0.20, 2.0, 3.0)
    yield "geometric loss at 3 km", abs(linkbudget.geometric_loss_db(geom) + 29.6503257) < 1e-6

    env = turbulence.TurbulenceEnv(turbulence.DEFAULT_CN2, turbulence.DEFAULT_WAVELENGTH_M, 3000.0)
    p = turbulence.gg_shape_params(turbulence.rytov_variance(env))
    yield "Gamma-Gamma parameters at 3 km", abs(p.rytov_var - 2.537) < 1e-3 and abs(p.alpha - 4.04) < 1e-2

    norm = quad(lambda i: turbulence.gg_pdf(i, p), 0, np.inf, limit=200)[0]
    yield "Gamma-Gamma normalization", abs(norm - 1.0) < 1e-6

    cfg = ofdm.OfdmConfig()
    bits = ofdm.prbs_generate(16_000, 7)
    syms = ofdm.qpsk_map(bits.bits)
    rx, _ = ofdm.demodulate_frames(ofdm.ofdm_modulate(syms, cfg), cfg)
    yield "OFDM loopback", np.array_equal(ofdm.qpsk_demap(rx), bits.bits)

    yield "Q/BER relation", abs(metrics.ber_from_q(0.421) - 0.3369) < 5e-5

    cap = [linkbudget.shannon_capacity_bps(linkbudget.CapacityQuery(m, 1e9, 10.0)) for m in (1, 2, 4)]
    yield "capacity scaling", math.isclose(cap[2], 2 * cap[1]) and math.isclose(cap[2], 4 * cap[0])


def _cmd_selftest() -> int:
    ok = True
    for name, passed in _selftest_checks():
        ok &= bool(passed)
        print(f"{'PASS' if passed else 'FAIL'}  {name}")
    return EXIT_OK if ok else EXIT_RUNTIME


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "selftest":
            return _cmd_selftest()
        cfg = _resolve_config(args)
        if args.command == "budget":
            return _cmd_budget(cfg)
        return _cmd_run(cfg)
    except ConfigError as exc:
        print(f"configuration error:\n{exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - reported with exit code 3
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
