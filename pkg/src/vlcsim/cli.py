"""Command-line front end: one command per reproduced figure or table."""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from vlcsim import analysis, config as cfg, csvio, montecarlo

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3

COMMANDS = (
    "ber-curve",
    "bound-curve",
    "sweep-dtx",
    "sweep-rotation",
    "ofdm-ber",
    "placement-metrics",
    "snr-map",
    "rate-contour",
    "coverage",
)

BER_HEADER = ["eb_n0_db", "ber", "bits", "errors"]


def _out(out_dir: Path, command: str, scheme: str, modulation: str) -> Path:
    return out_dir / f"{command}_{scheme}_{modulation}.csv"


def _ber_rows(points):
    return [[p.eb_n0_db, p.ber, p.bits, p.errors] for p in points]


def _rate_map(conf: cfg.ExperimentConfig, with_rates: bool):
    system = conf.system
    scheme = conf.scheme.scheme
    snr = analysis.snr_map(
        system.room,
        system.luminaires(scheme),
        system.receiver.template,
        system.noise,
        conf.analysis["resolution_m"],
        system.transmitter.led_power_w,
    )
    if not with_rates:
        return snr
    return analysis.rate_contours(snr, scheme, conf.analysis["target_ber"], conf.analysis["method"], conf.scheme.theta)


def run(command: str, conf: cfg.ExperimentConfig, out_dir: Path) -> tuple[Path, str]:
    """Execute one command; returns the written file and a summary line."""
    out_dir.mkdir(parents=True, exist_ok=True)
    sc = conf.scheme
    mod = sc.modulation

    if command == "ber-curve":
        curve = montecarlo.simulate_ber(conf.sim_spec())
        path = csvio.write_table(_out(out_dir, command, sc.scheme, mod), BER_HEADER, _ber_rows(curve.points))
        return path, f"{len(curve.points)} Eb/N0 points simulated"

    if command == "ofdm-ber":
        ofdm_scheme = conf.ofdm_scheme()
        curve = montecarlo.simulate_ber(conf.sim_spec(ofdm_scheme))
        path = csvio.write_table(_out(out_dir, command, ofdm_scheme.scheme, mod), BER_HEADER, _ber_rows(curve.points))
        return path, f"{len(curve.points)} Eb/N0 points simulated with {ofdm_scheme.detector} detection"

    if command == "bound-curve":
        H = conf.system.channel(sc.scheme)
        bc = analysis.bound_curve(sc.signal_set(), H, conf.sim["eb_n0_db"])
        rows = [[e, b, r] for (e, b), r in zip(bc.points, bc.raw)]
        path = csvio.write_table(
            _out(out_dir, command, sc.scheme, mod), ["eb_n0_db", "ber_bound", "ber_bound_raw"], rows
        )
        return path, f"{len(rows)} bound points"

    if command == "sweep-dtx":
        spec = conf.sim_spec(eb_n0_db=(conf.sim["fixed_eb_n0_db"],))
        res = montecarlo.sweep_dtx(spec, conf.sim["d_tx_list"])
        rows = [[d, p.ber, p.bits, p.errors] for d, p in res]
        path = csvio.write_table(_out(out_dir, command, sc.scheme, mod), ["d_tx_m", "ber", "bits", "errors"], rows)
        return path, f"{len(rows)} spacings at {spec.eb_n0_db[0]} dB"

    if command == "sweep-rotation":
        if sc.scheme != "qcm-pr":
            raise cfg.ConfigError("sweep-rotation needs [scheme] scheme = qcm-pr")
        spec = conf.sim_spec(eb_n0_db=(conf.sim["fixed_eb_n0_db"],))
        res = montecarlo.sweep_rotation(spec, conf.sim["rotation_list_deg"])
        rows = [[t, p.ber, p.bits, p.errors] for t, p in res]
        path = csvio.write_table(_out(out_dir, command, sc.scheme, mod), ["theta_deg", "ber", "bits", "errors"], rows)
        return path, f"{len(rows)} rotation angles at {spec.eb_n0_db[0]} dB"

    if command == "placement-metrics":
        rows = []
        s = sc.signal_set()
        for kind in conf.analysis["placements"]:
            if kind not in ("qcm-grid", "p1", "p2"):
                raise cfg.ConfigError(f"unknown placement {kind!r} in [analysis] placements")
            system = replace(conf.system, transmitter=replace(conf.system.transmitter, placement=kind))
            d_min, d_avg = analysis.dmin_davg(s, system.channel(sc.scheme))
            rows.append([kind, mod, d_min, d_avg])
        path = _out(out_dir, command, sc.scheme, mod)
        lines = ["placement,modulation,d_min,d_avg"] + [
            f"{k},{m},{csvio.fmt(a)},{csvio.fmt(b)}" for k, m, a, b in rows
        ]
        with open(path, "w", newline="\n", encoding="ascii") as fh:
            fh.write("\n".join(lines) + "\n")
        return path, f"{len(rows)} placements"

    if command == "snr-map":
        snr = _rate_map(conf, with_rates=False)
        path = csvio.write_matrix(_out(out_dir, command, sc.scheme, mod), snr.x, snr.y, snr.gamma_db)
        return path, f"{snr.gamma_db.shape[1]}x{snr.gamma_db.shape[0]} SNR grid"

    if command == "rate-contour":
        rm = _rate_map(conf, with_rates=True)
        path = csvio.write_matrix(_out(out_dir, command, sc.scheme, mod), rm.x, rm.y, rm.rate)
        return path, f"{rm.rate.shape[1]}x{rm.rate.shape[0]} rate grid ({conf.analysis['method']} method)"

    if command == "coverage":
        rm = _rate_map(conf, with_rates=True)
        rows = [[eta, analysis.coverage_percentage(rm, eta)] for eta in conf.analysis["eta_list"]]
        path = csvio.write_table(_out(out_dir, command, sc.scheme, mod), ["eta", "percent"], rows)
        return path, "coverage " + ", ".join(f"{e:g}:{p:.1f}%" for e, p in rows)

    raise cfg.ConfigError(f"unknown command {command!r}")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vlcsim", description=__doc__)
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", type=Path, help="INI experiment config (defaults apply when omitted)")
    p.add_argument("--out", type=Path, default=Path("."), help="output directory")
    p.add_argument("--seed", type=int, help="master seed (unsigned 64-bit)")
    p.add_argument("--workers", type=int, help="worker process count")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {}
    if args.seed is not None:
        overrides[("simulation", "seed")] = args.seed
    if args.workers is not None:
        overrides[("simulation", "workers")] = args.workers
    try:
        conf = cfg.load(args.config, overrides=overrides)
        path, summary = run(args.command, conf, args.out)
    except cfg.ConfigError as exc:
        print(f"vlcsim: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except Exception as exc:  # noqa: BLE001 - any failure past config parsing is a runtime error
        print(f"vlcsim: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"{args.command}: {summary} -> {path}")
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
