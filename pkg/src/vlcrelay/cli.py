"""Command-line front end.

Four subcommands emit UTF-8 CSV files with LF line endings: ber-sweep
(error-rate curves over transmit power), optimize-kp (brute-force power
split per power), sinr-map (interference map over the floor, optionally
error rate versus SINR) and channel-info (effective responses and link
scalars). Every file starts with '#'-prefixed comment lines echoing all
resolved parameters, so runs are self-describing, and reruns with the
same config and seed are byte identical regardless of the worker count
(capped by the VLC_SIM_THREADS environment variable).
"""

from __future__ import annotations

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import __version__
from .analysis import (
    RelayLinkGains,
    average_ber,
    ber_per_subcarrier,
    build_relay_link,
    optimize_kp,
)
from .channel import amplification_factor, loop_gain, relay_received_power
from .config import RunConfig, load_config
from .modulation import get_scheme
from .montecarlo import default_thread_count, run_monte_carlo
from .signals import energy
from .sinr import average_sinr, scene_from_room, sinr_point

_EPA_KP = 0.5


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    v = float(value)
    if math.isnan(v):
        return "nan"
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.17g}"


def _write_csv(path: str, command: str, cfg: RunConfig, header, rows) -> None:
    lines = [f"# vlcrelay {command} v{__version__}"]
    lines.extend(f"# {key} = {value}" for key, value in cfg.echo)
    lines.append(",".join(header))
    lines.extend(",".join(_fmt(v) for v in row) for row in rows)
    tmp = f"{path}.tmp"
    with open(tmp, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, path)


def _load_kp_table(path: str) -> dict[float, float]:
    table = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            text = line.strip()
            if not text or text.startswith("#") or text.lower().startswith("power"):
                continue
            parts = text.replace(";", ",").split(",")
            if len(parts) != 2:
                raise ValueError(f"{path}:{lineno}: expected 'power_dbm,kp'")
            table[float(parts[0])] = float(parts[1])
    if not table:
        raise ValueError(f"{path}: power-split table holds no rows")
    return table


def _resolve_kp(
    table: dict[float, float] | None, power_dbm: float
) -> float | None:
    if table is None:
        return None
    for known, kp in table.items():
        if math.isclose(known, power_dbm, rel_tol=0.0, abs_tol=1e-9):
            return kp
    raise ValueError(f"power-split table has no entry for {power_dbm} dBm")


def _mean_snr_db(per_bin: np.ndarray) -> float:
    mean = float(np.mean(per_bin))
    return 10.0 * math.log10(mean) if mean > 0 else -math.inf


def cmd_ber_sweep(cfg: RunConfig, out: str, kp_table_path: str | None) -> None:
    channels = cfg.channels()
    base_budget = cfg.budget(cfg.power_dbm[0], _EPA_KP)
    link = build_relay_link(
        channels,
        cfg.ofdm,
        base_budget,
        cfg.led,
        roll_off=cfg.roll_off,
        span_symbols=cfg.filter_span_symbols,
        rd_tail=cfg.rd_tail,
        ga_numerator=cfg.ga_numerator,
        include_extra_ga=cfg.extra_ga_on_noise,
    )
    kp_table = _load_kp_table(kp_table_path) if kp_table_path else None
    schemes = [get_scheme(name) for name in cfg.schemes]

    # Canonical row order: power, then mode, scheme and allocation in the
    # configured order. Assemble analytic values first, then fill Monte
    # Carlo columns in parallel with per-row derived random streams.
    rows = []
    opt_cache: dict = {}
    for power in cfg.power_dbm:
        budget = cfg.budget(power, _EPA_KP)
        link_p = link.with_budget(budget)
        for mode in cfg.modes:
            for scheme in schemes:
                for alloc in cfg.allocation:
                    if mode == "direct":
                        kp = 1.0
                    elif alloc == "EPA":
                        kp = _EPA_KP
                    else:
                        kp = _resolve_kp(kp_table, power)
                        if kp is None:
                            key = (power, mode, scheme.name)
                            if key not in opt_cache:
                                opt_cache[key] = optimize_kp(
                                    link_p,
                                    scheme,
                                    mode,
                                    grid_step=cfg.kp_grid_step,
                                )
                            kp = opt_cache[key][0]
                    profile = link_p.snr_profile(mode, kp if mode != "direct" else _EPA_KP)
                    ber = average_ber(profile, scheme, cfg.ofdm.n_subcarriers)
                    rows.append(
                        {
                            "power_dbm": power,
                            "snr_db": _mean_snr_db(profile.per_bin),
                            "mode": mode,
                            "scheme": scheme.name,
                            "allocation": alloc,
                            "kp": kp,
                            "ber_analytic": ber,
                            "scheme_obj": scheme,
                        }
                    )

    def run_mc(index_row):
        index, row = index_row
        scheme = row["scheme_obj"]
        if cfg.bits <= 0 or scheme.analytic_only:
            return index, None
        report = run_monte_carlo(
            cfg.ofdm,
            scheme,
            link,
            cfg.budget(row["power_dbm"], _EPA_KP),
            row["mode"],
            power_dbm_grid=[row["power_dbm"]],
            kp_per_point=[row["kp"] if row["mode"] != "direct" else _EPA_KP],
            n_bits=cfg.bits,
            rng_seed=cfg.seed,
            n_threads=1,
            point_offset=index,
        )[0]
        return index, report

    workers = default_thread_count()
    indexed = list(enumerate(rows))
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run_mc, indexed))
    else:
        results = [run_mc(item) for item in indexed]

    header = [
        "power_dbm", "snr_db", "mode", "scheme", "allocation", "kp",
        "ber_analytic", "ber_mc", "mc_ci_lo", "mc_ci_hi", "bits",
    ]
    out_rows = []
    for (index, report), row in zip(results, rows):
        mc = (None, None, None, 0)
        if report is not None:
            mc = (
                report.ber_point_estimate,
                report.wilson_interval_95[0],
                report.wilson_interval_95[1],
                report.bits_sent,
            )
        out_rows.append(
            [
                row["power_dbm"], row["snr_db"], row["mode"], row["scheme"],
                row["allocation"], row["kp"], row["ber_analytic"],
                mc[0], mc[1], mc[2], mc[3],
            ]
        )
    _write_csv(out, "ber-sweep", cfg, header, out_rows)


def cmd_optimize_kp(cfg: RunConfig, out: str) -> None:
    relayed = [m for m in cfg.modes if m != "direct"]
    if not relayed:
        raise ValueError("power-split optimization needs a relayed mode (HD or FD)")
    mode = relayed[0]
    scheme = get_scheme(cfg.schemes[0])
    channels = cfg.channels()
    link = build_relay_link(
        channels,
        cfg.ofdm,
        cfg.budget(cfg.power_dbm[0], _EPA_KP),
        cfg.led,
        roll_off=cfg.roll_off,
        span_symbols=cfg.filter_span_symbols,
        rd_tail=cfg.rd_tail,
        ga_numerator=cfg.ga_numerator,
        include_extra_ga=cfg.extra_ga_on_noise,
    )
    rows = []
    for power in cfg.power_dbm:
        link_p = link.with_budget(cfg.budget(power, _EPA_KP))
        kp_opt, ber_opt = optimize_kp(link_p, scheme, mode, grid_step=cfg.kp_grid_step)
        rows.append([power, kp_opt, ber_opt])
    _write_csv(out, "optimize-kp", cfg, ["power_dbm", "kp_opt", "ber_at_opt"], rows)


def cmd_sinr_map(cfg: RunConfig, out: str, ber_vs_sinr: bool) -> None:
    if ber_vs_sinr:
        schemes = [get_scheme(name) for name in cfg.schemes]
        rows = []
        for sinr_db in cfg.ber_sinr_db:
            snr_linear = 10.0 ** (sinr_db / 10.0)
            for scheme in schemes:
                rows.append(
                    [sinr_db, scheme.name, float(ber_per_subcarrier(snr_linear, scheme))]
                )
        _write_csv(out, "sinr-map", cfg, ["sinr_db", "scheme", "ber"], rows)
        return

    scene = scene_from_room(
        cfg.sinr_sources,
        cfg.sinr_source_power,
        cfg.sinr_test_points(),
        cfg.room,
        cfg.responsivity,
        cfg.noise_psd,
        cfg.sinr_bandwidth,
    )
    rows = []
    for j, point in enumerate(scene.receiver_positions):
        best = max(
            sinr_point(scene, i, j) for i in range(scene.n_sources)
        )
        rows.append(["point", point[0], point[1], best])
    rows.append(["average", None, None, average_sinr(scene)])
    _write_csv(out, "sinr-map", cfg, ["kind", "x", "y", "sinr_db"], rows)


def cmd_channel_info(cfg: RunConfig, out: str) -> None:
    channels = cfg.channels()
    budget = cfg.budget(cfg.power_dbm[0], _EPA_KP)
    link = build_relay_link(
        channels,
        cfg.ofdm,
        budget,
        cfg.led,
        roll_off=cfg.roll_off,
        span_symbols=cfg.filter_span_symbols,
        rd_tail=cfg.rd_tail,
        ga_numerator=cfg.ga_numerator,
        include_extra_ga=cfg.extra_ga_on_noise,
    )
    rows = []
    named = [
        ("sd_eff", channels.c_sd_eff),
        ("sr_eff", channels.c_sr_eff),
        ("rd_eff", channels.c_rd_eff),
        ("rr_eff", channels.c_rr_eff),
    ]
    for name, sig in named:
        peak = float(np.argmax(np.abs(sig.samples)) + sig.start_offset)
        rows.append([name, "energy", None, energy(sig)])
        rows.append([name, "peak_delay_s", None, peak * sig.sample_interval])
        for t, v in zip(sig.times, sig.samples.real):
            rows.append([name, "h", t, v])
    rows.append(["link", "loop_gain_rho", None, link.loop_gain])
    rows.append(
        [
            "link",
            "amplification_ga",
            None,
            amplification_factor(budget, link.sr_tap_energy, cfg.ga_numerator),
        ]
    )
    rows.append(["link", "relay_rx_power_w", None, relay_received_power(channels, budget)])
    _write_csv(out, "channel-info", cfg, ["cir", "quantity", "time_s", "value"], rows)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vlcrelay",
        description="Relay-assisted indoor visible-light link simulator",
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", help="key = value configuration file")
        p.add_argument("--seed", type=int, help="random seed override")
        p.add_argument("--out", required=True, help="output CSV path")
        p.add_argument("--bits", type=int, help="Monte Carlo bits per point")
        p.add_argument("--modes", help="comma list: direct,HD,FD")
        p.add_argument("--schemes", help="comma list of modulation schemes")
        p.add_argument("--allocation", help="comma list: EPA,OPA")
        p.add_argument("--kp-grid-step", type=float, help="power-split grid step")
        p.add_argument("--power-dbm", help="power grid, 'a,b,c' or 'start:stop:step'")

    p = sub.add_parser("ber-sweep", help="error-rate curves over transmit power")
    common(p)
    p.add_argument("--kp-table", help="CSV of power_dbm,kp pairs used for OPA")

    p = sub.add_parser("optimize-kp", help="brute-force power split per power")
    common(p)

    p = sub.add_parser("sinr-map", help="interference map over the floor")
    common(p)
    p.add_argument(
        "--ber-vs-sinr",
        action="store_true",
        help="emit closed-form error rate versus SINR instead of the map",
    )

    p = sub.add_parser("channel-info", help="effective responses and link scalars")
    common(p)
    return parser


def _overrides(args) -> dict:
    mapping = {
        "seed": "sweep.seed",
        "bits": "sweep.bits",
        "modes": "sweep.modes",
        "schemes": "sweep.schemes",
        "allocation": "sweep.allocation",
        "kp_grid_step": "sweep.kp_grid_step",
        "power_dbm": "sweep.power_dbm",
    }
    out = {}
    for attr, dotted in mapping.items():
        value = getattr(args, attr, None)
        if value is not None:
            out[dotted] = value
    return out


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, _overrides(args))
        for name in cfg.schemes:
            get_scheme(name)  # fail fast on unknown schemes
        if args.command == "ber-sweep":
            cmd_ber_sweep(cfg, args.out, args.kp_table)
        elif args.command == "optimize-kp":
            cmd_optimize_kp(cfg, args.out)
        elif args.command == "sinr-map":
            cmd_sinr_map(cfg, args.out, args.ber_vs_sinr)
        elif args.command == "channel-info":
            cmd_channel_info(cfg, args.out)
        else:  # pragma: no cover
            raise ValueError(f"unknown command {args.command!r}")
    except (ValueError, OSError) as exc:
        print(f"vlcrelay: error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
