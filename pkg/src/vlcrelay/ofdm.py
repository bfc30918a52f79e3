"""DC-capable optical OFDM transceiver blocks.

Hermitian-symmetric framing makes the unitary IDFT output real so it can
drive an intensity-modulated LED. The waveform-level operations carry the
oversampled pulse-shaped signal through a channel with relay noise and
matched filtering; the frequency-domain equalizer divides each data bin by
its known composite gain before maximum-likelihood detection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import LinkBudget
from .errors import DeadSubcarrierError
from .modulation import ModulationScheme, demap_symbols
from .signals import SampledSignal, add_signals, convolve, scaled

_DEAD_BIN_FLOOR = 1e-15


@dataclass(frozen=True)
class OfdmConfig:
    """Multicarrier frame geometry and timing."""

    n_subcarriers: int = 256
    cp_length: int = 32
    symbol_interval: float = 250e-9
    samples_per_symbol: int = 8

    def __post_init__(self):
        n = self.n_subcarriers
        if n < 8 or n % 2:
            raise ValueError("subcarrier count must be even and at least 8")
        if not 0 <= self.cp_length < n:
            raise ValueError("cyclic prefix must be shorter than the frame")
        if not self.symbol_interval > 0:
            raise ValueError("symbol interval must be positive")
        if self.samples_per_symbol < 1:
            raise ValueError("oversampling factor must be at least 1")

    @property
    def data_subcarriers(self) -> int:
        return self.n_subcarriers // 2 - 1

    @property
    def grid_interval(self) -> float:
        return self.symbol_interval / self.samples_per_symbol

    @property
    def frame_symbols(self) -> int:
        return self.n_subcarriers + self.cp_length


def hermitian_frame(data_symbols, n_subcarriers: int) -> np.ndarray:
    """Frequency-domain frame [0, S1..S_{N/2-1}, 0, S*_{N/2-1}..S*_1].

    Bins 0 and N/2 stay empty; the upper half mirrors the data
    conjugated, which forces a real IDFT output.
    """
    data = np.asarray(data_symbols, dtype=complex)
    n = n_subcarriers
    if data.size != n // 2 - 1:
        raise ValueError(
            f"expected {n // 2 - 1} data symbols for {n} subcarriers, "
            f"got {data.size}"
        )
    frame = np.zeros(n, dtype=complex)
    frame[1 : n // 2] = data
    frame[n // 2 + 1 :] = np.conj(data[::-1])
    return frame


def extract_data_bins(frame_bins: np.ndarray, n_subcarriers: int) -> np.ndarray:
    return np.asarray(frame_bins)[1 : n_subcarriers // 2]


def add_cp(frame: np.ndarray, cp_length: int) -> np.ndarray:
    """Prepend the last cp_length samples of the frame."""
    frame = np.asarray(frame)
    if cp_length >= frame.size:
        raise ValueError(
            f"cyclic prefix {cp_length} must be shorter than the frame "
            f"({frame.size} samples)"
        )
    if cp_length == 0:
        return frame.copy()
    return np.concatenate([frame[-cp_length:], frame])


def remove_cp(frame: np.ndarray, cp_length: int) -> np.ndarray:
    frame = np.asarray(frame)
    if cp_length >= frame.size:
        raise ValueError("cyclic prefix longer than the received frame")
    return frame[cp_length:].copy()


def modulate_frame(data_symbols, config: OfdmConfig) -> np.ndarray:
    """Data symbols -> real time samples with cyclic prefix attached."""
    frame = hermitian_frame(data_symbols, config.n_subcarriers)
    time = np.fft.ifft(frame, norm="ortho")
    return add_cp(time.real, config.cp_length)


def shape_waveform(
    frame_samples, g_t: SampledSignal, samples_per_symbol: int
) -> SampledSignal:
    """Impulse train at symbol spacing convolved with the transmit filter."""
    frame = np.asarray(frame_samples, dtype=complex).ravel()
    dt = g_t.sample_interval
    train = np.zeros((frame.size - 1) * samples_per_symbol + 1, dtype=complex)
    train[::samples_per_symbol] = frame / dt
    return convolve(SampledSignal(train, dt, 0), g_t)


def transmit_through(
    waveform: SampledSignal,
    h_signal: SampledSignal,
    h_noise: SampledSignal | None,
    budget: LinkBudget,
    g_r: SampledSignal,
    rng_seed: int,
) -> SampledSignal:
    """Carry a waveform through the composite channel and matched filter.

    Output = [sqrt(P k_p) r (waveform * h_signal) + r (v_R * h_noise)
    + v_D] * g_r, with v_R and v_D white Gaussian at the grid rate
    (per-sample variance noise_psd / sample_interval, so filtering by a
    tap vector g leaves variance noise_psd * energy(g)). Both draws come
    from rng_seed, so the output is reproducible bit for bit.
    """
    rng = np.random.default_rng(rng_seed)
    scale = np.sqrt(budget.p_total * budget.k_p) * budget.responsivity
    received = scaled(convolve(waveform, h_signal), scale)
    dt = waveform.sample_interval
    sigma = np.sqrt(budget.noise_psd / dt)
    if sigma > 0.0 and h_noise is not None:
        v_r = SampledSignal(
            rng.normal(0.0, sigma, size=len(waveform)),
            dt,
            waveform.start_offset,
        )
        relay_noise = scaled(convolve(v_r, h_noise), budget.responsivity)
        received = add_signals(received, relay_noise)
    if sigma > 0.0:
        v_d = SampledSignal(
            rng.normal(0.0, sigma, size=len(received)),
            dt,
            received.start_offset,
        )
        received = add_signals(received, v_d)
    return convolve(received, g_r)


def receive_frame(
    received: SampledSignal,
    config: OfdmConfig,
    budget: LinkBudget,
    h_signal_freq: np.ndarray,
) -> np.ndarray:
    """Symbol-rate sampling, CP removal, DFT and per-bin equalization.

    Assumes the transmitted frame started at t = 0 (perfect alignment);
    h_signal_freq holds the length-N composite per-bin gains. Returns the
    equalized data symbols. Raises DeadSubcarrierError when a data bin's
    gain is numerically zero.
    """
    n, cp = config.n_subcarriers, config.cp_length
    sps = config.samples_per_symbol
    first = -received.start_offset
    idx = first + np.arange(n + cp) * sps
    if idx[0] < 0 or idx[-1] >= len(received):
        raise ValueError("received signal does not cover the frame window")
    sampled = received.samples[idx]
    bins = np.fft.fft(remove_cp(sampled, cp), norm="ortho")
    gains = extract_data_bins(np.asarray(h_signal_freq, dtype=complex), n)
    dead = np.nonzero(np.abs(gains) < _DEAD_BIN_FLOOR)[0]
    if dead.size:
        raise DeadSubcarrierError(
            f"data subcarrier {dead[0] + 1} has zero channel gain"
        )
    scale = np.sqrt(budget.p_total * budget.k_p) * budget.responsivity
    return extract_data_bins(bins, n) / (scale * gains)


def ml_detect(equalized, scheme: ModulationScheme) -> np.ndarray:
    """Per-subcarrier nearest-point decision on the equalized symbols.

    With a scalar per-bin channel this equals the full maximum-likelihood
    metric; ties break toward the lowest constellation index.
    """
    return demap_symbols(equalized, scheme)
