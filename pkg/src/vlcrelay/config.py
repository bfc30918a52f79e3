"""Run configuration: flat key = value files with sections.

Every key has a default, so an empty (or missing) file reproduces the
reference office setup: a ceiling source, a desk-lamp relay whose
receiver is tilted toward the source, and a destination photodetector on
the desk. Numeric defaults follow the standard indoor parameter set
(256 subcarriers, 32-sample prefix, 250 ns symbols, 0.28 A/W, 50 ns
relay processing delay, roll-off 0.5, 1e-20 W/Hz noise density).
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import LedModel, LinkBudget, RelayChannelSet, RoomScenario, build_channels
from .cirio import load_cir
from .ofdm import OfdmConfig

_DEFAULTS: dict[str, dict[str, str]] = {
    "ofdm": {
        "n_subcarriers": "256",
        "cp_length": "32",
        "symbol_interval": "250e-9",
        "samples_per_symbol": "8",
        "grid_oversampling": "100",
    },
    "budget": {
        "responsivity": "0.28",
        "noise_psd": "1e-20",
        "process_delay": "50e-9",
    },
    "channel": {
        "source": "synthetic",
        "led_cutoff_hz": "20e6",
        "roll_off": "0.5",
        "filter_span_symbols": "10",
        "rd_tail": "eff",
        "ga_numerator": "total",
        "extra_ga_on_noise": "false",
        "cir_sd": "",
        "cir_sr": "",
        "cir_rd": "",
        "cir_rr": "",
    },
    "room": {
        "width": "5.0",
        "depth": "5.0",
        "height": "3.0",
        "reflectivity": "0.3",
        "half_angle_deg": "40.0",
        "pd_area_m2": "1e-4",
        "fov_deg": "85.0",
        "source_pos": "2.5,2.5,3.0",
        "source_axis": "0,0,-1",
        "relay_pos": "3.8,3.8,1.5",
        "relay_axis": "0,0,-1",
        "relay_rx_pos": "3.8,3.8,1.55",
        "relay_rx_normal": "auto",  # resolved to point at the source
        "dest_pos": "3.8,3.8,0.85",
        "dest_normal": "0.40744,0.40744,0.81488",  # tilted toward the lamp
    },
    "sweep": {
        "power_dbm": "0:19:1",
        "schemes": "2-PSK,4-QAM,BPSK-SIM",
        "modes": "direct,HD,FD",
        "allocation": "EPA,OPA",
        "bits": "20000",
        "kp_grid_step": "1e-3",
        "seed": "1",
    },
    "sinr": {
        "source_power_w": "1.0",
        "sources": "1.25,1.25,3.0;1.25,3.75,3.0;3.75,1.25,3.0;3.75,3.75,3.0",
        "grid_nx": "5",
        "grid_ny": "5",
        "plane_height": "0.85",
        "margin": "0.5",
        "bandwidth_hz": "20e6",
        "ber_sinr_db": "0:30:2",
    },
}


def _parse_vector(text: str) -> tuple[float, ...]:
    parts = [p for p in text.replace(";", ",").split(",") if p.strip()]
    return tuple(float(p) for p in parts)


def _parse_list(text: str) -> tuple[str, ...]:
    return tuple(p.strip() for p in text.split(",") if p.strip())


def _parse_grid(text: str) -> tuple[float, ...]:
    """Either 'a,b,c' or 'start:stop:step' (stop inclusive)."""
    text = text.strip()
    if ":" in text:
        start_s, stop_s, step_s = text.split(":")
        start, stop, step = float(start_s), float(stop_s), float(step_s)
        if step <= 0:
            raise ValueError(f"grid step must be positive in {text!r}")
        n = int(math.floor((stop - start) / step + 1e-9))
        return tuple(round(start + k * step, 12) for k in range(n + 1))
    return tuple(float(p) for p in text.split(",") if p.strip())


def _parse_bool(text: str) -> bool:
    value = text.strip().lower()
    if value in ("1", "true", "yes", "on"):
        return True
    if value in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"cannot read boolean from {text!r}")


def _unit(vec: tuple[float, ...]) -> tuple[float, float, float]:
    arr = np.asarray(vec, dtype=float)
    return tuple(arr / np.linalg.norm(arr))


@dataclass(frozen=True, eq=False)
class RunConfig:
    """All resolved parameters of one simulator invocation."""

    ofdm: OfdmConfig
    grid_oversampling: int
    responsivity: float
    noise_psd: float
    process_delay: float
    channel_source: str
    led: LedModel
    roll_off: float
    filter_span_symbols: int
    rd_tail: str
    ga_numerator: str
    extra_ga_on_noise: bool
    cir_paths: dict[str, str]
    room: RoomScenario
    power_dbm: tuple[float, ...]
    schemes: tuple[str, ...]
    modes: tuple[str, ...]
    allocation: tuple[str, ...]
    bits: int
    kp_grid_step: float
    seed: int
    sinr_source_power: float
    sinr_sources: tuple[tuple[float, float, float], ...]
    sinr_grid: tuple[int, int]
    sinr_plane_height: float
    sinr_margin: float
    sinr_bandwidth: float
    ber_sinr_db: tuple[float, ...]
    echo: tuple[tuple[str, str], ...] = field(default=())

    @property
    def grid_interval(self) -> float:
        return self.ofdm.symbol_interval / self.grid_oversampling

    @property
    def bandwidth(self) -> float:
        return 1.0 / self.ofdm.symbol_interval

    def budget(self, power_dbm: float, k_p: float) -> LinkBudget:
        return LinkBudget(
            p_total=10.0 ** ((power_dbm - 30.0) / 10.0),
            k_p=k_p,
            responsivity=self.responsivity,
            noise_psd=self.noise_psd,
            t_p=self.process_delay,
            bandwidth=self.bandwidth,
        )

    def channels(self) -> RelayChannelSet:
        from .channel import effective_cir

        if self.channel_source == "synthetic":
            return build_channels(self.room, self.led, self.grid_interval)
        raws = {}
        for key in ("sd", "sr", "rd", "rr"):
            path = self.cir_paths[key]
            if not path:
                raise ValueError(f"channel source 'files' needs cir_{key}")
            raws[key] = load_cir(path)
        return RelayChannelSet(
            c_sd_eff=effective_cir(raws["sd"], self.led),
            c_sr_eff=effective_cir(raws["sr"], self.led),
            c_rd_eff=effective_cir(raws["rd"], self.led),
            c_rr_eff=effective_cir(raws["rr"], self.led),
            source_tag="file",
            c_rd_raw=raws["rd"],
        )

    def sinr_test_points(self) -> np.ndarray:
        w, d, _ = self.room.room
        nx, ny = self.sinr_grid
        xs = np.linspace(self.sinr_margin, w - self.sinr_margin, nx)
        ys = np.linspace(self.sinr_margin, d - self.sinr_margin, ny)
        points = [(x, y, self.sinr_plane_height) for y in ys for x in xs]
        return np.asarray(points)


def load_config(path: str | None = None, overrides: dict | None = None) -> RunConfig:
    """Resolve a config file (or nothing) plus CLI overrides to a RunConfig.

    overrides maps "section.key" to replacement string values.
    """
    parser = configparser.ConfigParser(interpolation=None)
    parser.read_dict(_DEFAULTS)
    if path is not None:
        with open(path, "r", encoding="utf-8") as fh:
            parser.read_file(fh)
    for dotted, value in (overrides or {}).items():
        section, key = dotted.split(".", 1)
        if not parser.has_section(section):
            raise ValueError(f"unknown config section {section!r}")
        if key not in _DEFAULTS.get(section, {}):
            raise ValueError(f"unknown config key {dotted!r}")
        parser.set(section, key, str(value))
    for section in parser.sections():
        if section not in _DEFAULTS:
            raise ValueError(f"unknown config section {section!r}")
        for key in parser.options(section):
            if key not in _DEFAULTS[section]:
                raise ValueError(f"unknown config key {section}.{key}")

    get = parser.get
    ofdm = OfdmConfig(
        n_subcarriers=parser.getint("ofdm", "n_subcarriers"),
        cp_length=parser.getint("ofdm", "cp_length"),
        symbol_interval=parser.getfloat("ofdm", "symbol_interval"),
        samples_per_symbol=parser.getint("ofdm", "samples_per_symbol"),
    )

    relay_rx_pos = _parse_vector(get("room", "relay_rx_pos"))
    source_pos = _parse_vector(get("room", "source_pos"))
    normal_text = get("room", "relay_rx_normal").strip()
    if normal_text == "auto":
        relay_rx_normal = _unit(
            tuple(s - r for s, r in zip(source_pos, relay_rx_pos))
        )
    else:
        relay_rx_normal = _unit(_parse_vector(normal_text))

    room = RoomScenario(
        room=(
            parser.getfloat("room", "width"),
            parser.getfloat("room", "depth"),
            parser.getfloat("room", "height"),
        ),
        luminaire_positions=(source_pos, _parse_vector(get("room", "relay_pos"))),
        luminaire_axes=(
            _unit(_parse_vector(get("room", "source_axis"))),
            _unit(_parse_vector(get("room", "relay_axis"))),
        ),
        receiver_positions=(
            _parse_vector(get("room", "dest_pos")),
            relay_rx_pos,
        ),
        receiver_normals=(
            _unit(_parse_vector(get("room", "dest_normal"))),
            relay_rx_normal,
        ),
        half_angle_deg=parser.getfloat("room", "half_angle_deg"),
        pd_area=parser.getfloat("room", "pd_area_m2"),
        fov_deg=parser.getfloat("room", "fov_deg"),
        reflectivity=parser.getfloat("room", "reflectivity"),
    )

    nx = parser.getint("sinr", "grid_nx")
    ny = parser.getint("sinr", "grid_ny")
    sinr_sources = tuple(
        tuple(float(c) for c in part.split(","))
        for part in get("sinr", "sources").split(";")
        if part.strip()
    )

    echo = tuple(
        (f"{section}.{key}", parser.get(section, key))
        for section in sorted(parser.sections())
        for key in sorted(parser.options(section))
    )

    return RunConfig(
        ofdm=ofdm,
        grid_oversampling=parser.getint("ofdm", "grid_oversampling"),
        responsivity=parser.getfloat("budget", "responsivity"),
        noise_psd=parser.getfloat("budget", "noise_psd"),
        process_delay=parser.getfloat("budget", "process_delay"),
        channel_source=get("channel", "source").strip(),
        led=LedModel(parser.getfloat("channel", "led_cutoff_hz")),
        roll_off=parser.getfloat("channel", "roll_off"),
        filter_span_symbols=parser.getint("channel", "filter_span_symbols"),
        rd_tail=get("channel", "rd_tail").strip(),
        ga_numerator=get("channel", "ga_numerator").strip(),
        extra_ga_on_noise=_parse_bool(get("channel", "extra_ga_on_noise")),
        cir_paths={k: get("channel", f"cir_{k}").strip() for k in ("sd", "sr", "rd", "rr")},
        room=room,
        power_dbm=_parse_grid(get("sweep", "power_dbm")),
        schemes=_parse_list(get("sweep", "schemes")),
        modes=_parse_list(get("sweep", "modes")),
        allocation=_parse_list(get("sweep", "allocation")),
        bits=parser.getint("sweep", "bits"),
        kp_grid_step=parser.getfloat("sweep", "kp_grid_step"),
        seed=parser.getint("sweep", "seed"),
        sinr_source_power=parser.getfloat("sinr", "source_power_w"),
        sinr_sources=sinr_sources,
        sinr_grid=(nx, ny),
        sinr_plane_height=parser.getfloat("sinr", "plane_height"),
        sinr_margin=parser.getfloat("sinr", "margin"),
        sinr_bandwidth=parser.getfloat("sinr", "bandwidth_hz"),
        ber_sinr_db=_parse_grid(get("sinr", "ber_sinr_db")),
        echo=echo,
    )
