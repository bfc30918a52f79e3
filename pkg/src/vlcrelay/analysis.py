"""Closed-form link analysis.

Per-subcarrier SNR for the direct, half-duplex and full-duplex modes, the
per-scheme bit-error-rate formulas, subcarrier averaging, and brute-force
optimization of the source/relay power split. Channel responses enter as
dimensionless per-bin gains obtained by sampling the band-limited response
at the symbol rate (normalized so a distortion-free link has unit gain),
which keeps these formulas exactly consistent with the Monte Carlo chain:
both sides derive from the same symbol-spaced tap vectors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.special import erfc

from .channel import (
    LedModel,
    LinkBudget,
    RelayChannelSet,
    amplification_factor,
    band_limited_channel,
    end_to_end_cir,
    fd_relay_cir,
    loop_gain,
)
from .modulation import ModulationScheme
from .ofdm import OfdmConfig
from .signals import SampledSignal, convolve, rrc_filter, symbol_rate_taps

MODES = ("direct", "HD", "FD")


@dataclass(frozen=True, eq=False)
class SnrProfile:
    """Per-data-subcarrier linear SNR values for one transmission mode."""

    mode: str
    per_bin: np.ndarray

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        per_bin = np.asarray(self.per_bin, dtype=float)
        if per_bin.size == 0:
            raise ValueError("an SNR profile needs at least one subcarrier")
        if np.any(per_bin < 0) or not np.all(np.isfinite(per_bin)):
            raise ValueError("per-bin SNR values must be finite and non-negative")
        per_bin.setflags(write=False)
        object.__setattr__(self, "per_bin", per_bin)


def fold_taps(taps: np.ndarray, q_min: int, n_bins: int) -> np.ndarray:
    """Plain DFT of symbol-spaced taps folded modulo the frame length."""
    taps = np.asarray(taps, dtype=complex)
    if taps.size > n_bins:
        raise ValueError(
            f"channel spread ({taps.size} symbols) exceeds the frame "
            f"length ({n_bins})"
        )
    circ = np.zeros(n_bins, dtype=complex)
    np.add.at(circ, (np.arange(taps.size) + q_min) % n_bins, taps)
    return np.fft.fft(circ)


def bridge_taps(
    response: SampledSignal,
    config: OfdmConfig,
    g_t: SampledSignal,
    g_r: SampledSignal,
) -> tuple[np.ndarray, int]:
    """Symbol-spaced taps of a response seen through the pulse pair.

    The response is band-limited by g_t (*) . (*) g_r, sampled every
    symbol interval and normalized by the composite pulse peak, so a
    unit-area Dirac channel reduces to a single unit tap and a smooth
    response to symbol_interval * h(q T_s). Returns (real taps, first
    tap index).
    """
    pulse = convolve(g_t, g_r)
    peak = pulse.samples[-pulse.start_offset].real * config.symbol_interval
    smoothed = convolve(convolve(g_t, response), g_r)
    taps, q_min = symbol_rate_taps(smoothed, config.symbol_interval)
    taps = taps / peak
    if np.max(np.abs(taps.imag)) > 1e-9 * max(np.max(np.abs(taps)), 1e-300):
        raise ValueError("band-limited taps of a real response must be real")
    return taps.real, q_min


def per_bin_gains(
    response: SampledSignal,
    config: OfdmConfig,
    g_t: SampledSignal | None = None,
    g_r: SampledSignal | None = None,
) -> np.ndarray:
    """Length-N per-bin gains of a response sampled at the symbol rate.

    With pulse filters given the band-limited bridge is used; without
    them the response is sampled directly (taps symbol_interval*h(qT_s)).
    """
    if (g_t is None) != (g_r is None):
        raise ValueError("pass both pulse filters or neither")
    if g_t is not None:
        taps, q_min = bridge_taps(response, config, g_t, g_r)
    else:
        taps, q_min = symbol_rate_taps(response, config.symbol_interval)
    return fold_taps(taps, q_min, config.n_subcarriers)


def data_bins(gains: np.ndarray, config: OfdmConfig) -> np.ndarray:
    return np.asarray(gains)[1 : config.n_subcarriers // 2]


def snr_fd(
    h_signal_bins: np.ndarray,
    h_noise_bins: np.ndarray,
    budget: LinkBudget,
    g_a: float,
    include_extra_ga: bool = True,
) -> np.ndarray:
    """Full-duplex per-bin SNR.

    P k_p r^2 |H_sig|^2 / (sigma_v^2 (1 + |r G H_noise|^2)). As printed,
    the relay-noise gain carries the amplification factor even though the
    noise response already embeds it; include_extra_ga=False drops that
    second factor, which is what the waveform chain actually realizes.
    Zero noise density yields an infinite-SNR sentinel, not an error.
    """
    h_signal_bins = np.asarray(h_signal_bins, dtype=complex)
    h_noise_bins = np.asarray(h_noise_bins, dtype=complex)
    sv2 = budget.noise_variance
    r = budget.responsivity
    noise_amp = r * g_a if include_extra_ga else r
    num = budget.p_total * budget.k_p * r**2 * np.abs(h_signal_bins) ** 2
    if sv2 == 0.0:
        return np.full(num.shape, np.inf)
    den = sv2 * (1.0 + np.abs(noise_amp * h_noise_bins) ** 2)
    return num / den


def snr_hd(
    h_sd_bins: np.ndarray,
    h_sr_bins: np.ndarray,
    h_rd_bins: np.ndarray,
    budget: LinkBudget,
    g_a: float,
) -> np.ndarray:
    """Half-duplex per-bin SNR: direct-slot term plus relayed-slot term."""
    h_sd = np.abs(np.asarray(h_sd_bins, dtype=complex)) ** 2
    h_sr_rd = (
        np.abs(
            np.asarray(h_sr_bins, dtype=complex)
            * np.asarray(h_rd_bins, dtype=complex)
        )
        ** 2
    )
    h_rd = np.abs(np.asarray(h_rd_bins, dtype=complex)) ** 2
    r = budget.responsivity
    sv2 = budget.noise_variance
    p_kp = budget.p_total * budget.k_p
    if sv2 == 0.0:
        return np.full(h_sd.shape, np.inf)
    term1 = 2.0 * p_kp * r**2 * h_sd / (2.0 * sv2)
    term2 = (
        2.0
        * p_kp
        * r**4
        * g_a**2
        * h_sr_rd
        / (2.0 * sv2 * (1.0 + r**2 * g_a**2 * h_rd))
    )
    return term1 + term2


def snr_direct(h_sd_bins: np.ndarray, budget: LinkBudget) -> np.ndarray:
    """Relay-free baseline with the full power budget at the source."""
    h_sd = np.abs(np.asarray(h_sd_bins, dtype=complex)) ** 2
    sv2 = budget.noise_variance
    num = budget.p_total * budget.responsivity**2 * h_sd
    if sv2 == 0.0:
        return np.full(h_sd.shape, np.inf)
    return num / sv2


def ber_per_subcarrier(
    snr, scheme: ModulationScheme, bpsk_sim_sqrt: bool = False
) -> np.ndarray | float:
    """Per-subcarrier bit error rate of one scheme at linear SNR.

    2-PSK: erfc(sqrt(snr))/2. Square M-QAM:
    (sqrt(M)-1)/(sqrt(M) log2 sqrt(M)) * erfc(sqrt(3 snr / (2(M-1)))).
    BPSK-SIM uses erfc(snr)/2, the SNR entering without a square root;
    bpsk_sim_sqrt=True switches to the conventional erfc(sqrt(snr))
    variant for sensitivity studies.
    """
    snr_arr = np.asarray(snr, dtype=float)
    if np.any(snr_arr < 0):
        raise ValueError("SNR must be non-negative")
    if scheme.kind == "psk":
        out = 0.5 * erfc(np.sqrt(snr_arr))
    elif scheme.kind == "qam":
        m = scheme.order
        root_m = math.sqrt(m)
        coeff = (root_m - 1.0) / (root_m * math.log2(root_m))
        out = coeff * erfc(np.sqrt(3.0 * snr_arr / (2.0 * (m - 1.0))))
    elif scheme.kind == "bpsk-sim":
        arg = np.sqrt(snr_arr) if bpsk_sim_sqrt else snr_arr
        out = 0.5 * erfc(arg)
    else:
        raise ValueError(f"no error-rate formula for scheme kind {scheme.kind!r}")
    return float(out) if out.ndim == 0 else out


def average_ber(
    profile: SnrProfile,
    scheme: ModulationScheme,
    n_subcarriers: int,
    bpsk_sim_sqrt: bool = False,
) -> float:
    """Mean bit error rate over the unique data subcarriers.

    The averaging factor 2/(N-2) equals 1/(N/2 - 1): the mirrored
    Hermitian bins duplicate the data bins, so each data subcarrier
    counts once.
    """
    expected = n_subcarriers // 2 - 1
    if profile.per_bin.size != expected:
        raise ValueError(
            f"profile covers {profile.per_bin.size} bins, expected {expected}"
        )
    bers = ber_per_subcarrier(profile.per_bin, scheme, bpsk_sim_sqrt)
    return float(np.sum(bers) * 2.0 / (n_subcarriers - 2))


@dataclass(frozen=True, eq=False)
class RelayLinkGains:
    """Per-bin gain decomposition of one relay scenario.

    The full-duplex end-to-end gain is affine in the amplification
    factor (the feedback response scales linearly with its front term),
    so a power-split sweep only rescales precomputed components:
    H_signal = H_direct + G * H_relay_unit, H_noise = G * H_noise_unit.
    time_taps_* carry the matching symbol-spaced impulse responses for
    the waveform simulator; their DFT reproduces the bins exactly.
    """

    config: OfdmConfig
    budget: LinkBudget
    h_sd: np.ndarray  # band-limited single-hop per-bin gains
    h_sr: np.ndarray
    h_rd: np.ndarray
    h_direct: np.ndarray  # source->destination part of the composite
    h_relay_unit: np.ndarray  # relayed part per unit amplification
    h_noise_unit: np.ndarray  # relay-noise part per unit amplification
    time_taps_direct: np.ndarray  # aligned symbol-spaced taps (real)
    time_taps_relay_unit: np.ndarray
    taps_q_min: int
    sr_tap_energy: float
    loop_gain: float
    ga_numerator: str = "total"
    include_extra_ga: bool = False

    def amplification(self, k_p: float) -> float:
        return amplification_factor(
            self.budget.with_kp(k_p), self.sr_tap_energy, self.ga_numerator
        )

    def fd_bins(self, k_p: float) -> tuple[np.ndarray, np.ndarray, float]:
        g_a = self.amplification(k_p)
        return (
            self.h_direct + g_a * self.h_relay_unit,
            g_a * self.h_noise_unit,
            g_a,
        )

    def fd_time_taps(self, k_p: float) -> tuple[np.ndarray, int, float]:
        g_a = self.amplification(k_p)
        taps = self.time_taps_direct + g_a * self.time_taps_relay_unit
        return taps, self.taps_q_min, g_a

    def snr_profile(self, mode: str, k_p: float) -> SnrProfile:
        budget = self.budget.with_kp(k_p)
        cfg = self.config
        if mode == "FD":
            h_sig, h_noise, g_a = self.fd_bins(k_p)
            per_bin = snr_fd(
                data_bins(h_sig, cfg),
                data_bins(h_noise, cfg),
                budget,
                g_a,
                include_extra_ga=self.include_extra_ga,
            )
        elif mode == "HD":
            per_bin = snr_hd(
                data_bins(self.h_sd, cfg),
                data_bins(self.h_sr, cfg),
                data_bins(self.h_rd, cfg),
                budget,
                self.amplification(k_p),
            )
        elif mode == "direct":
            per_bin = snr_direct(data_bins(self.h_sd, cfg), budget)
        else:
            raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
        return SnrProfile(mode=mode, per_bin=per_bin)

    def with_budget(self, budget: LinkBudget) -> "RelayLinkGains":
        return replace(self, budget=budget)


def _align(
    a: np.ndarray, qa: int, b: np.ndarray, qb: int
) -> tuple[np.ndarray, np.ndarray, int]:
    lo = min(qa, qb)
    hi = max(qa + a.size, qb + b.size)
    out_a = np.zeros(hi - lo)
    out_b = np.zeros(hi - lo)
    out_a[qa - lo : qa - lo + a.size] = a
    out_b[qb - lo : qb - lo + b.size] = b
    return out_a, out_b, lo


def build_relay_link(
    channels: RelayChannelSet,
    config: OfdmConfig,
    budget: LinkBudget,
    led: LedModel,
    roll_off: float = 0.5,
    span_symbols: int = 10,
    rd_tail: str = "eff",
    fd_tolerance: float = 1e-9,
    ga_numerator: str = "total",
    include_extra_ga: bool = False,
) -> RelayLinkGains:
    """Assemble the per-bin gains of one scenario.

    Builds the band-limited single-hop responses through the pulse-filter
    pair, solves the relay feedback response once with unit
    amplification, and composes the end-to-end signal and noise
    responses. rd_tail selects whether the forwarded path ends in the
    LED-filtered ("eff") or raw ("raw") relay-to-destination response.
    """
    dt = channels.sample_interval
    sps = round(config.symbol_interval / dt)
    g_t = rrc_filter(roll_off, span_symbols, sps, dt)
    g_r = rrc_filter(roll_off, span_symbols, sps, dt)
    n = config.n_subcarriers

    taps_sd, q_sd = bridge_taps(channels.c_sd_eff, config, g_t, g_r)
    taps_sr, q_sr = bridge_taps(channels.c_sr_eff, config, g_t, g_r)
    taps_rd, q_rd = bridge_taps(channels.c_rd_eff, config, g_t, g_r)

    if rd_tail == "eff":
        tail = channels.c_rd_eff
    elif rd_tail == "raw":
        if channels.c_rd_raw is None:
            raise ValueError("this channel set carries no raw R->D response")
        tail = channels.c_rd_raw
    else:
        raise ValueError(f"rd_tail must be 'eff' or 'raw', got {rd_tail!r}")

    h_fd_sig, h_fd_noise = fd_relay_cir(
        channels, budget, 1.0, led, residual_tolerance=fd_tolerance
    )
    relayed_unit = convolve(convolve(channels.c_sr_eff, h_fd_sig), tail)
    noise_unit = convolve(h_fd_noise, tail)

    taps_relay, q_rel = bridge_taps(relayed_unit, config, g_t, g_r)
    taps_noise, q_no = bridge_taps(noise_unit, config, g_t, g_r)

    direct_aligned, relay_aligned, q0 = _align(taps_sd, q_sd, taps_relay, q_rel)

    return RelayLinkGains(
        config=config,
        budget=budget,
        h_sd=fold_taps(taps_sd, q_sd, n),
        h_sr=fold_taps(taps_sr, q_sr, n),
        h_rd=fold_taps(taps_rd, q_rd, n),
        h_direct=fold_taps(direct_aligned, q0, n),
        h_relay_unit=fold_taps(relay_aligned, q0, n),
        h_noise_unit=fold_taps(taps_noise, q_no, n),
        time_taps_direct=direct_aligned,
        time_taps_relay_unit=relay_aligned,
        taps_q_min=q0,
        sr_tap_energy=float(np.sum(np.abs(taps_sr) ** 2)),
        loop_gain=loop_gain(channels, budget),
        ga_numerator=ga_numerator,
        include_extra_ga=include_extra_ga,
    )


def default_kp_grid(step: float = 1e-4) -> np.ndarray:
    """Power-split search grid over [0.01, 0.99]."""
    if not 0.0 < step <= 0.1:
        raise ValueError("grid step must lie in (0, 0.1]")
    n = int(round((0.99 - 0.01) / step))
    return np.round(0.01 + step * np.arange(n + 1), 12)


def table_kp_grid() -> np.ndarray:
    """Coarse grid of multiples of 0.0099, the published optimum spacing."""
    return np.round(0.0099 * np.arange(1, 100), 12)


def optimize_kp(
    link: RelayLinkGains,
    scheme: ModulationScheme,
    mode: str,
    kp_grid: np.ndarray | None = None,
    grid_step: float = 1e-4,
    bpsk_sim_sqrt: bool = False,
) -> tuple[float, float]:
    """Exhaustive power-split search minimizing the average error rate.

    Recomputes the amplification factor at every grid point and returns
    the exact grid argmin; ties break toward the smaller split.
    """
    grid = default_kp_grid(grid_step) if kp_grid is None else np.asarray(kp_grid)
    if grid.size == 0:
        raise ValueError("empty power-split grid")
    best_kp = None
    best_ber = math.inf
    n = link.config.n_subcarriers
    for kp in grid:
        ber = average_ber(link.snr_profile(mode, float(kp)), scheme, n, bpsk_sim_sqrt)
        if ber < best_ber:
            best_ber = ber
            best_kp = float(kp)
    return best_kp, best_ber
