"""Indoor optical channel construction.

Builds the four effective impulse responses of a source / full-duplex relay /
destination scenario: LED low-pass filtering, Lambertian line-of-sight plus
ceiling-bounce diffuse synthesis, the relay amplification factor, the
loop-interference feedback solution, and the end-to-end signal and
relay-noise responses.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import LoopDivergenceError
from .signals import (
    SampledSignal,
    add_signals,
    convolve,
    delayed_impulse,
    energy,
    scaled,
)

SPEED_OF_LIGHT = 299792458.0


@dataclass(frozen=True)
class LedModel:
    """First-order low-pass LED: C(f) = 1 / (1 + j f/f_cutoff)."""

    f_cutoff: float = 20e6

    def __post_init__(self):
        if not self.f_cutoff > 0:
            raise ValueError("LED cutoff frequency must be positive")


@dataclass(frozen=True)
class LinkBudget:
    """Electrical power budget and receiver constants for one link.

    p_total is the total electrical power shared by source and relay;
    k_p of it goes to the source and 1 - k_p to the relay. noise_psd is
    the AWGN power spectral density; the per-sample variance at symbol
    rate is noise_psd * bandwidth.
    """

    p_total: float
    k_p: float
    responsivity: float = 0.28
    noise_psd: float = 1e-20
    t_p: float = 50e-9
    bandwidth: float = 4e6

    def __post_init__(self):
        if not 0.0 < self.k_p < 1.0:
            raise ValueError(f"power split k_p must lie in (0, 1), got {self.k_p}")
        if not self.p_total > 0:
            raise ValueError("total power must be positive")
        if not self.responsivity > 0:
            raise ValueError("responsivity must be positive")
        if self.noise_psd < 0:
            raise ValueError("noise PSD cannot be negative")
        if self.t_p < 0:
            raise ValueError("processing delay cannot be negative")
        if not self.bandwidth > 0:
            raise ValueError("bandwidth must be positive")

    @property
    def source_tx_power(self) -> float:
        return self.p_total * self.k_p

    @property
    def relay_tx_power(self) -> float:
        return self.p_total * (1.0 - self.k_p)

    @property
    def noise_variance(self) -> float:
        return self.noise_psd * self.bandwidth

    def with_kp(self, k_p: float) -> "LinkBudget":
        return replace(self, k_p=k_p)

    def with_power(self, p_total: float) -> "LinkBudget":
        return replace(self, p_total=p_total)


@dataclass(frozen=True, eq=False)
class RelayChannelSet:
    """The four LED-filtered impulse responses of one scenario.

    c_rr_eff (relay transmitter into its own receiver) may be all zero;
    the other three must carry energy. c_rd_raw optionally keeps the
    unfiltered relay-to-destination response for the configurable
    end-to-end tail.
    """

    c_sd_eff: SampledSignal
    c_sr_eff: SampledSignal
    c_rd_eff: SampledSignal
    c_rr_eff: SampledSignal
    source_tag: str = "synthetic"
    c_rd_raw: SampledSignal | None = None

    def __post_init__(self):
        sigs = [self.c_sd_eff, self.c_sr_eff, self.c_rd_eff, self.c_rr_eff]
        dt = sigs[0].sample_interval
        for s in sigs:
            if not math.isclose(s.sample_interval, dt, rel_tol=1e-12):
                raise ValueError("all four responses must share one sample grid")
        for name, s in zip(("c_sd_eff", "c_sr_eff", "c_rd_eff"), sigs):
            if energy(s) <= 0.0:
                raise ValueError(f"{name} must carry positive energy")
        if self.source_tag not in ("file", "synthetic"):
            raise ValueError(f"unknown source tag {self.source_tag!r}")

    @property
    def sample_interval(self) -> float:
        return self.c_sd_eff.sample_interval


@dataclass(frozen=True)
class RoomScenario:
    """Rectangular room with Lambertian luminaires and flat photodetectors.

    Luminaire index 0 is the main (ceiling) source, index 1 the relay
    luminaire. Receiver index 0 is the destination photodetector, index 1
    the relay's own receiver. Orientations are unit vectors.
    """

    room: tuple[float, float, float] = (5.0, 5.0, 3.0)
    luminaire_positions: tuple[tuple[float, float, float], ...] = ()
    luminaire_axes: tuple[tuple[float, float, float], ...] = ()
    receiver_positions: tuple[tuple[float, float, float], ...] = ()
    receiver_normals: tuple[tuple[float, float, float], ...] = ()
    half_angle_deg: float = 40.0
    pd_area: float = 1e-4
    fov_deg: float = 85.0
    reflectivity: float = 0.3

    def __post_init__(self):
        if len(self.luminaire_positions) != len(self.luminaire_axes):
            raise ValueError("each luminaire needs an orientation axis")
        if len(self.receiver_positions) != len(self.receiver_normals):
            raise ValueError("each receiver needs a normal")
        if not 0.0 < self.half_angle_deg < 90.0:
            raise ValueError("half viewing angle must lie in (0, 90) degrees")
        if not 0.0 < self.fov_deg <= 90.0:
            raise ValueError("field of view must lie in (0, 90] degrees")
        if not 0.0 <= self.reflectivity < 1.0:
            raise ValueError("reflectivity must lie in [0, 1)")
        if not self.pd_area > 0:
            raise ValueError("photodetector area must be positive")
        for p in self.luminaire_positions + self.receiver_positions:
            for c, lim in zip(p, self.room):
                if not 0.0 <= c <= lim:
                    raise ValueError(f"position {p} lies outside the room")

    @property
    def lambertian_order(self) -> float:
        return lambertian_order(self.half_angle_deg)

    @property
    def surface_area(self) -> float:
        w, d, h = self.room
        return 2.0 * (w * d + w * h + d * h)


def lambertian_order(half_angle_deg: float) -> float:
    """Beam concentration exponent m = -ln 2 / ln cos(half angle)."""
    return -math.log(2.0) / math.log(math.cos(math.radians(half_angle_deg)))


def lambertian_los_gain(
    tx_pos,
    tx_axis,
    rx_pos,
    rx_normal,
    order: float,
    pd_area: float,
    fov_deg: float,
) -> tuple[float, float]:
    """Line-of-sight channel gain and propagation distance.

    Gain = (m+1) A / (2 pi d^2) * cos^m(radiation angle) * cos(incidence),
    zero when the receiver looks away or the source sits outside the
    field of view.
    """
    tx_pos = np.asarray(tx_pos, dtype=float)
    rx_pos = np.asarray(rx_pos, dtype=float)
    axis = np.asarray(tx_axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    normal = np.asarray(rx_normal, dtype=float)
    normal = normal / np.linalg.norm(normal)
    vec = rx_pos - tx_pos
    d = float(np.linalg.norm(vec))
    if d == 0.0:
        return 0.0, 0.0
    direction = vec / d
    cos_phi = float(np.dot(axis, direction))
    cos_psi = float(np.dot(normal, -direction))
    if cos_phi <= 0.0 or cos_psi <= 0.0:
        return 0.0, d
    if math.degrees(math.acos(min(cos_psi, 1.0))) > fov_deg:
        return 0.0, d
    gain = (
        (order + 1.0)
        * pd_area
        / (2.0 * math.pi * d * d)
        * cos_phi**order
        * cos_psi
    )
    return gain, d


def diffuse_gain(scene: RoomScenario) -> float:
    """Total diffuse channel gain from the integrating-sphere estimate.

    rho/(1-rho) * A_pd / A_room counts all reflection orders with one
    average reflectivity; it vanishes with the reflectivity.
    """
    rho = scene.reflectivity
    if rho == 0.0:
        return 0.0
    return rho / (1.0 - rho) * scene.pd_area / scene.surface_area


def ceiling_bounce_time_constant(scene: RoomScenario) -> float:
    """Diffuse-tail time parameter a = 2 * ceiling height / c."""
    return 2.0 * scene.room[2] / SPEED_OF_LIGHT


def synthesize_cir(
    scene: RoomScenario,
    tx_index: int,
    rx_index: int,
    sample_interval: float,
    tail_fraction: float = 1e-9,
) -> SampledSignal:
    """Lambertian LOS tap plus ceiling-bounce diffuse tail.

    The LOS contribution is a Dirac of area equal to the LOS gain at delay
    d/c (rounded to the grid); the diffuse tail integrates the
    ceiling-bounce density h_d(t) = H_diff * 6 a^6 / (t + a)^7 cell by
    cell, so the total sample area equals LOS gain + diffuse gain exactly.
    A geometry with no LOS and zero reflectivity gives an all-zero
    response, which is not an error.
    """
    g_los, distance = lambertian_los_gain(
        scene.luminaire_positions[tx_index],
        scene.luminaire_axes[tx_index],
        scene.receiver_positions[rx_index],
        scene.receiver_normals[rx_index],
        scene.lambertian_order,
        scene.pd_area,
        scene.fov_deg,
    )
    h_diff = diffuse_gain(scene)
    dt = float(sample_interval)
    los_index = int(round(distance / SPEED_OF_LIGHT / dt)) if g_los > 0.0 else 0

    if h_diff > 0.0:
        a = ceiling_bounce_time_constant(scene)
        # Keep the tail until the missing area fraction drops below
        # tail_fraction: (a / (T + a))^6 < tail_fraction.
        t_end = a * (tail_fraction ** (-1.0 / 6.0) - 1.0)
        n_tail = max(1, int(math.ceil(t_end / dt)))
        edges = np.arange(n_tail + 1) * dt
        cdf = 1.0 - (a / (edges + a)) ** 6
        samples = np.zeros(max(n_tail, los_index + 1), dtype=complex)
        samples[:n_tail] += h_diff * np.diff(cdf) / dt
    else:
        samples = np.zeros(los_index + 1, dtype=complex)

    if g_los > 0.0:
        samples[los_index] += g_los / dt
    return SampledSignal(samples, dt, 0)


def led_frequency_response(led: LedModel, f) -> complex | np.ndarray:
    """First-order low-pass response 1 / (1 + j f / f_cutoff)."""
    f = np.asarray(f, dtype=float)
    resp = 1.0 / (1.0 + 1j * f / led.f_cutoff)
    return complex(resp) if resp.ndim == 0 else resp


def led_impulse_response(
    led: LedModel,
    sample_interval: float,
    truncation_tolerance: float = 1e-9,
) -> SampledSignal:
    """Causal exponential h(t) = 2 pi f_c exp(-2 pi f_c t), discretized.

    The grid must resolve the pole (sample_interval <= 1/(10 f_cutoff)).
    Samples are rescaled to exact unit area so the DC gain matches the
    analytic response; the tail is dropped once its remaining energy
    fraction falls below truncation_tolerance.
    """
    dt = float(sample_interval)
    if dt > 1.0 / (10.0 * led.f_cutoff) * (1.0 + 1e-12):
        raise ValueError(
            f"sample interval {dt} too coarse for a {led.f_cutoff} Hz "
            f"LED pole; need at most {1.0 / (10.0 * led.f_cutoff)}"
        )
    if not 0.0 < truncation_tolerance < 1.0:
        raise ValueError("truncation tolerance must lie in (0, 1)")
    a = 2.0 * math.pi * led.f_cutoff * dt
    # Remaining energy fraction after n samples is exp(-2 a n).
    n = int(math.ceil(-math.log(truncation_tolerance) / (2.0 * a))) + 1
    samples = 2.0 * math.pi * led.f_cutoff * np.exp(-a * np.arange(n))
    samples /= np.sum(samples) * dt
    return SampledSignal(samples, dt, 0)


def effective_cir(raw: SampledSignal, led: LedModel) -> SampledSignal:
    """LED-filtered response: raw convolved with the LED impulse response."""
    return convolve(raw, led_impulse_response(led, raw.sample_interval))


def build_channels(
    scene: RoomScenario,
    led: LedModel,
    sample_interval: float,
) -> RelayChannelSet:
    """Synthesize the four raw responses of a scenario and LED-filter them."""
    raw_sd = synthesize_cir(scene, 0, 0, sample_interval)
    raw_sr = synthesize_cir(scene, 0, 1, sample_interval)
    raw_rd = synthesize_cir(scene, 1, 0, sample_interval)
    raw_rr = synthesize_cir(scene, 1, 1, sample_interval)
    return RelayChannelSet(
        c_sd_eff=effective_cir(raw_sd, led),
        c_sr_eff=effective_cir(raw_sr, led),
        c_rd_eff=effective_cir(raw_rd, led),
        c_rr_eff=effective_cir(raw_rr, led),
        source_tag="synthetic",
        c_rd_raw=raw_rd,
    )


def relay_received_power(channels: RelayChannelSet, budget: LinkBudget) -> float:
    """Average electrical power arriving at the relay receiver.

    P k_p r^2 E_sr + P (1 - k_p) r^2 E_rr + sigma_v^2, with E the
    continuous-convention response energies.
    """
    r2 = budget.responsivity**2
    return (
        budget.source_tx_power * r2 * energy(channels.c_sr_eff)
        + budget.relay_tx_power * r2 * energy(channels.c_rr_eff)
        + budget.noise_variance
    )


def amplification_factor(
    budget: LinkBudget,
    h_sr_energy: float,
    ga_numerator: str = "total",
) -> float:
    """Amplify-and-forward scaling that normalizes the relay output power.

    G = sqrt(2 (1 - k_p) P_num / (2 k_p P_num r^2 E + sigma_v^2)) where
    E is the energy of the band-limited source-to-relay response.
    ga_numerator selects whether P_num is the total budget ("total") or
    the source share P k_p ("source"); both coincide once the noise term
    is negligible.
    """
    if h_sr_energy < 0:
        raise ValueError("response energy cannot be negative")
    if ga_numerator == "total":
        p_num = budget.p_total
    elif ga_numerator == "source":
        p_num = budget.source_tx_power
    else:
        raise ValueError(f"unknown ga_numerator {ga_numerator!r}")
    denom = (
        2.0 * budget.k_p * p_num * budget.responsivity**2 * h_sr_energy
        + budget.noise_variance
    )
    if denom <= 0.0:
        raise ValueError("amplification factor denominator is zero")
    return math.sqrt(2.0 * (1.0 - budget.k_p) * p_num / denom)


def loop_gain(channels: RelayChannelSet, budget: LinkBudget) -> float:
    """Contraction factor of the loop-interference feedback.

    r times the L1 area of the loop response; the feedback series
    converges when this is below one.
    """
    c = channels.c_rr_eff
    return float(
        budget.responsivity * np.sum(np.abs(c.samples)) * c.sample_interval
    )


def fd_relay_cir(
    channels: RelayChannelSet,
    budget: LinkBudget,
    g_a: float,
    led: LedModel,
    residual_tolerance: float = 1e-9,
    noise_front: SampledSignal | None = None,
) -> tuple[SampledSignal, SampledSignal]:
    """Full-duplex relay response with loop interference.

    Solves h = b + L (*) h with front term b = g_a * r * delta(t - t_p)
    convolved with the LED response and loop operator
    L = r * delta(t - t_p) (*) c_rr_eff, by the truncated feedback series
    sum_k L^(*k) (*) b. Terms are accumulated until the last one's norm
    drops below residual_tolerance of the partial sum, which leaves the
    defining-equation residual comfortably below 10x the tolerance.

    The signal and noise responses are computed by the same procedure;
    pass noise_front to give the noise path a different front term.
    Raises LoopDivergenceError when the loop gain reaches one.
    """
    dt = channels.sample_interval
    rho = loop_gain(channels, budget)
    if rho >= 1.0:
        raise LoopDivergenceError(
            f"loop interference gain {rho:.6g} >= 1; the relay feedback "
            "series diverges"
        )
    front = delayed_impulse(budget.t_p, g_a * budget.responsivity, dt)
    b = convolve(front, led_impulse_response(led, dt))
    loop = convolve(
        delayed_impulse(budget.t_p, budget.responsivity, dt), channels.c_rr_eff
    )

    def solve(b0: SampledSignal) -> SampledSignal:
        total = b0
        term = b0
        for _ in range(10_000):
            t_norm = math.sqrt(float(np.sum(np.abs(term.samples) ** 2)))
            a_norm = math.sqrt(float(np.sum(np.abs(total.samples) ** 2)))
            if t_norm <= residual_tolerance * a_norm or t_norm == 0.0:
                return total
            term = convolve(loop, term)
            total = add_signals(total, term)
        raise LoopDivergenceError(
            f"relay feedback series did not settle (loop gain {rho:.6g})"
        )

    h_signal = solve(b)
    h_noise = h_signal if noise_front is None else solve(noise_front)
    return h_signal, h_noise


def band_limited_channel(
    c_eff: SampledSignal, g_t: SampledSignal, g_r: SampledSignal
) -> SampledSignal:
    """Electrical response seen through the transmit and receive filters."""
    return convolve(convolve(g_t, c_eff), g_r)


def end_to_end_cir(
    c_sd_eff: SampledSignal,
    c_sr_eff: SampledSignal,
    h_fd_signal: SampledSignal,
    h_fd_noise: SampledSignal,
    rd_tail: SampledSignal,
) -> tuple[SampledSignal, SampledSignal]:
    """Compose the dual-hop responses.

    h_signal = direct path + source->relay (*) relay response (*) tail;
    h_noise = relay noise response (*) tail. The tail is normally the
    LED-filtered relay-to-destination response (the relay's transmit LED
    filters whatever it forwards); pass the raw response to drop that
    filtering.
    """
    relayed = convolve(convolve(c_sr_eff, h_fd_signal), rd_tail)
    h_signal = add_signals(c_sd_eff, relayed)
    h_noise = convolve(h_fd_noise, rd_tail)
    return h_signal, h_noise
