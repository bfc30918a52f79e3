"""Seeded Monte Carlo bit-error-rate engine.

Frames run at the symbol rate: Hermitian framing, unitary IDFT, cyclic
prefix, linear convolution with the symbol-spaced channel taps (cyclically
extended so the prefix turns it into an exact circular channel), white
destination noise, per-bin relay noise, one-tap equalization and
nearest-point detection. Every grid point draws its random stream from
(seed, point index), so results are identical for any execution order or
worker count.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.signal import fftconvolve

from .analysis import RelayLinkGains, data_bins, fold_taps
from .channel import LinkBudget, RelayChannelSet
from .errors import DeadSubcarrierError
from .modulation import ModulationScheme, demap_symbols, map_bits
from .ofdm import OfdmConfig

_WILSON_Z = 1.959963984540054  # two-sided 95%
_CHUNK_FRAMES = 1024
_MIN_BITS = 10_000


def wilson_interval(
    errors: int, trials: int, z: float = _WILSON_Z
) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        raise ValueError("trials must be positive")
    p = errors / trials
    z2 = z * z
    center = (p + z2 / (2 * trials)) / (1 + z2 / trials)
    half = (
        z
        * math.sqrt(p * (1 - p) / trials + z2 / (4 * trials * trials))
        / (1 + z2 / trials)
    )
    return max(0.0, center - half), min(1.0, center + half)


@dataclass(frozen=True)
class McReport:
    """Outcome of one Monte Carlo grid point."""

    bits_sent: int
    bit_errors: int
    ber_point_estimate: float
    wilson_interval_95: tuple[float, float]
    rng_seed: int

    def __post_init__(self):
        if not 0 <= self.bit_errors <= self.bits_sent:
            raise ValueError("error count must lie in [0, bits_sent]")
        lo, hi = self.wilson_interval_95
        if not lo <= self.ber_point_estimate <= hi:
            raise ValueError("the Wilson interval must contain the estimate")


def _point_rng(rng_seed: int, point_index: int) -> np.random.Generator:
    ss = np.random.SeedSequence(entropy=rng_seed, spawn_key=(point_index,))
    return np.random.default_rng(ss)


def _frame_bits(n_bits: int, config: OfdmConfig, scheme: ModulationScheme):
    bits_per_frame = config.data_subcarriers * scheme.bits_per_symbol
    n_frames = math.ceil(n_bits / bits_per_frame)
    return n_frames, bits_per_frame


def _chain_ber(
    scheme: ModulationScheme,
    config: OfdmConfig,
    signal_taps: np.ndarray,
    taps_q_min: int,
    scale: float,
    sigma_v: float,
    relay_noise_bins: np.ndarray | None,
    n_bits: int,
    rng: np.random.Generator,
) -> tuple[int, int]:
    """Run frames through the symbol-rate chain; return (errors, bits)."""
    n, cp = config.n_subcarriers, config.cp_length
    taps = np.asarray(signal_taps, dtype=float)
    q_max = taps_q_min + taps.size - 1
    if q_max > cp:
        raise ValueError(
            f"channel reaches {q_max} symbols, beyond the {cp}-symbol "
            "cyclic prefix; bit recovery would not be exact"
        )
    suffix = max(0, -taps_q_min)
    h_bins = data_bins(fold_taps(taps, taps_q_min, n), config)
    if np.any(np.abs(h_bins) < 1e-15):
        raise DeadSubcarrierError("a data subcarrier has zero channel gain")
    eq_gain = scale * h_bins

    n_frames, bits_per_frame = _frame_bits(n_bits, config, scheme)
    errors = 0
    for lo in range(0, n_frames, _CHUNK_FRAMES):
        count = min(_CHUNK_FRAMES, n_frames - lo)
        bits = rng.integers(0, 2, size=(count, bits_per_frame), dtype=np.int8)
        symbols = map_bits(bits.ravel(), scheme).reshape(
            count, config.data_subcarriers
        )
        frame = np.zeros((count, n), dtype=complex)
        frame[:, 1 : n // 2] = symbols
        frame[:, n // 2 + 1 :] = np.conj(symbols[:, ::-1])
        x = np.fft.ifft(frame, axis=1, norm="ortho").real
        ext = np.concatenate([x[:, n - cp :], x, x[:, :suffix]], axis=1)
        y = fftconvolve(ext, taps[None, :], axes=1)
        window = y[:, cp - taps_q_min : cp - taps_q_min + n]
        if sigma_v > 0.0:
            window = window + rng.normal(0.0, sigma_v, size=window.shape)
        bins = np.fft.fft(window, axis=1, norm="ortho")[:, 1 : n // 2]
        if relay_noise_bins is not None and sigma_v > 0.0:
            v_r = rng.normal(
                0.0, sigma_v / math.sqrt(2.0), size=(2, count, bins.shape[1])
            )
            bins = bins + relay_noise_bins[None, :] * (v_r[0] + 1j * v_r[1])
        equalized = bins / eq_gain[None, :]
        rx = demap_symbols(equalized.ravel(), scheme).reshape(count, bits_per_frame)
        errors += int(np.count_nonzero(rx != bits))
    return errors, n_frames * bits_per_frame


def _hd_point_ber(
    scheme: ModulationScheme,
    config: OfdmConfig,
    link: RelayLinkGains,
    budget: LinkBudget,
    n_bits: int,
    rng: np.random.Generator,
) -> tuple[int, int]:
    """Two-slot half-duplex run with per-bin maximal-ratio combining.

    Slot one carries the source frame to both destination and relay;
    slot two forwards the relay's amplified samples. The combiner weights
    each observation by gain/variance, which realizes the additive
    two-term SNR of the analytic expression.
    """
    n = config.n_subcarriers
    h_sd = data_bins(link.h_sd, config)
    h_sr = data_bins(link.h_sr, config)
    h_rd = data_bins(link.h_rd, config)
    g_a = link.amplification(budget.k_p)
    r = budget.responsivity
    amp = math.sqrt(budget.p_total * budget.k_p) * r
    sv2 = budget.noise_variance
    sigma = math.sqrt(sv2)

    g1 = amp * h_sd
    g2 = amp * r * g_a * h_sr * h_rd
    var1 = sv2
    var2 = sv2 * (1.0 + r**2 * g_a**2 * np.abs(h_rd) ** 2)
    w1 = np.conj(g1) / var1
    w2 = np.conj(g2) / var2
    norm = np.abs(g1) ** 2 / var1 + np.abs(g2) ** 2 / var2
    if np.any(norm == 0.0):
        raise DeadSubcarrierError("both half-duplex branches are dead on a bin")

    n_frames, bits_per_frame = _frame_bits(n_bits, config, scheme)
    n_data = config.data_subcarriers
    errors = 0
    for lo in range(0, n_frames, _CHUNK_FRAMES):
        count = min(_CHUNK_FRAMES, n_frames - lo)
        bits = rng.integers(0, 2, size=(count, bits_per_frame), dtype=np.int8)
        x = map_bits(bits.ravel(), scheme).reshape(count, n_data)

        def cnoise(shape):
            v = rng.normal(0.0, sigma / math.sqrt(2.0), size=(2, *shape))
            return v[0] + 1j * v[1]

        y1 = g1[None, :] * x + cnoise(x.shape)
        relay_noise = r * g_a * h_rd[None, :] * cnoise(x.shape)
        y2 = g2[None, :] * x + relay_noise + cnoise(x.shape)
        combined = (w1[None, :] * y1 + w2[None, :] * y2) / norm[None, :]
        rx = demap_symbols(combined.ravel(), scheme).reshape(count, bits_per_frame)
        errors += int(np.count_nonzero(rx != bits))
    return errors, n_frames * bits_per_frame


def _one_point(
    mode: str,
    scheme: ModulationScheme,
    config: OfdmConfig,
    link: RelayLinkGains | None,
    budget: LinkBudget | None,
    snr_db: float | None,
    n_bits: int,
    rng_seed: int,
    point_index: int,
) -> McReport:
    rng = _point_rng(rng_seed, point_index)
    if snr_db is not None:
        # Flat channel calibrated to an exact per-bin SNR.
        sigma = math.sqrt(1.0 / 10.0 ** (snr_db / 10.0))
        errors, sent = _chain_ber(
            scheme, config, np.array([1.0]), 0, 1.0, sigma, None, n_bits, rng
        )
    elif mode == "direct":
        scale = math.sqrt(budget.p_total) * budget.responsivity
        errors, sent = _chain_ber(
            scheme,
            config,
            link.time_taps_direct,
            link.taps_q_min,
            scale,
            math.sqrt(budget.noise_variance),
            None,
            n_bits,
            rng,
        )
    elif mode == "FD":
        taps, q_min, g_a = link.fd_time_taps(budget.k_p)
        h_noise = data_bins(g_a * link.h_noise_unit, config)
        scale = math.sqrt(budget.p_total * budget.k_p) * budget.responsivity
        errors, sent = _chain_ber(
            scheme,
            config,
            taps,
            q_min,
            scale,
            math.sqrt(budget.noise_variance),
            budget.responsivity * h_noise,
            n_bits,
            rng,
        )
    elif mode == "HD":
        errors, sent = _hd_point_ber(scheme, config, link, budget, n_bits, rng)
    else:
        raise ValueError(f"unknown transmission mode {mode!r}")
    lo, hi = wilson_interval(errors, sent)
    return McReport(
        bits_sent=sent,
        bit_errors=errors,
        ber_point_estimate=errors / sent,
        wilson_interval_95=(lo, hi),
        rng_seed=rng_seed,
    )


def default_thread_count() -> int:
    """Worker cap from the VLC_SIM_THREADS environment variable."""
    raw = os.environ.get("VLC_SIM_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_monte_carlo(
    config: OfdmConfig,
    scheme: ModulationScheme,
    link: RelayLinkGains | None,
    budget: LinkBudget | None,
    mode: str,
    snr_db_grid=None,
    power_dbm_grid=None,
    kp_per_point=None,
    n_bits: int = 1_000_000,
    rng_seed: int = 0,
    n_threads: int | None = None,
    point_offset: int = 0,
) -> list[McReport]:
    """Simulate the end-to-end chain over a grid of operating points.

    Exactly one of snr_db_grid (flat channel forced to each per-bin SNR)
    and power_dbm_grid (physical channel set swept over total power) must
    be given; the latter needs the link gains from build_relay_link.
    kp_per_point optionally overrides the power split per grid point
    (OPA sweeps). Results are deterministic in (rng_seed, point_offset +
    point index) and independent of the worker count.
    """
    if scheme.analytic_only:
        raise ValueError(
            f"{scheme.name} has no waveform realization here; it is "
            "evaluated through its closed-form error rate only"
        )
    if (snr_db_grid is None) == (power_dbm_grid is None):
        raise ValueError("pass exactly one of snr_db_grid and power_dbm_grid")
    if n_bits < _MIN_BITS:
        raise ValueError(f"need at least {_MIN_BITS} bits per point")
    if mode not in ("direct", "HD", "FD"):
        raise ValueError(f"unknown transmission mode {mode!r}")

    if snr_db_grid is not None:
        if mode != "direct":
            raise ValueError("per-bin SNR grids drive the direct flat chain only")
        grid = list(snr_db_grid)
        jobs = [
            (mode, scheme, config, None, None, float(s), n_bits, rng_seed,
             point_offset + i)
            for i, s in enumerate(grid)
        ]
    else:
        if link is None or budget is None:
            raise ValueError("power sweeps need link gains and a budget")
        grid = list(power_dbm_grid)
        jobs = []
        for i, dbm in enumerate(grid):
            b = budget.with_power(10.0 ** ((float(dbm) - 30.0) / 10.0))
            if kp_per_point is not None:
                b = b.with_kp(float(kp_per_point[i]))
            # The amplification factor depends on the operating power, so
            # the link must see the per-point budget as well.
            jobs.append(
                (mode, scheme, config, link.with_budget(b), b, None, n_bits,
                 rng_seed, point_offset + i)
            )
    if not jobs:
        raise ValueError("empty simulation grid")

    workers = default_thread_count() if n_threads is None else max(1, n_threads)
    if workers == 1 or len(jobs) == 1:
        return [_one_point(*job) for job in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda job: _one_point(*job), jobs))
