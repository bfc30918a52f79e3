"""Multi-luminaire interference analysis over a communication floor.

Each (source, test point) pair sees a line-of-sight signal, a diffuse
reflection of its own source (inter-symbol interference) and the full
output of every other luminaire (co-channel interference). SINR values
average in the dB domain; signal and interference powers average
linearly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channel import RoomScenario, diffuse_gain, lambertian_los_gain


@dataclass(frozen=True, eq=False)
class SinrScene:
    """Luminaire/test-point geometry reduced to per-pair channel gains.

    h_los and h_nlos are (n_sources, n_receivers) arrays; source_powers
    holds the transmitted optical power of each luminaire.
    """

    source_positions: np.ndarray  # (n_sources, 3), informational
    source_powers: np.ndarray  # (n_sources,)
    receiver_positions: np.ndarray  # (n_receivers, 2 or 3)
    h_los: np.ndarray
    h_nlos: np.ndarray
    responsivity: float
    noise_psd: float
    bandwidth: float

    def __post_init__(self):
        h_los = np.asarray(self.h_los, dtype=float)
        h_nlos = np.asarray(self.h_nlos, dtype=float)
        powers = np.asarray(self.source_powers, dtype=float)
        if h_los.shape != h_nlos.shape or h_los.ndim != 2:
            raise ValueError("gain matrices must share an (i, j) shape")
        if h_los.shape[0] != powers.size:
            raise ValueError("one transmit power per source is required")
        if h_los.size == 0:
            raise ValueError("the scene needs at least one source/receiver pair")
        if np.any(h_los < 0) or np.any(h_nlos < 0) or np.any(powers < 0):
            raise ValueError("gains and powers cannot be negative")
        for name, arr in (("h_los", h_los), ("h_nlos", h_nlos), ("powers", powers)):
            arr.setflags(write=False)
        object.__setattr__(self, "h_los", h_los)
        object.__setattr__(self, "h_nlos", h_nlos)
        object.__setattr__(self, "source_powers", powers)

    @property
    def n_sources(self) -> int:
        return self.h_los.shape[0]

    @property
    def n_receivers(self) -> int:
        return self.h_los.shape[1]

    @property
    def n_pairs(self) -> int:
        return self.h_los.size


def signal_power(scene: SinrScene, i: int, j: int) -> float:
    """Line-of-sight optical signal power of pair (i, j)."""
    return float(scene.h_los[i, j] * scene.source_powers[i])


def interference_power(scene: SinrScene, i: int, j: int) -> float:
    """Self reflections plus every other luminaire's total contribution."""
    p_isi = scene.h_nlos[i, j] * scene.source_powers[i]
    total = scene.h_los[:, j] + scene.h_nlos[:, j]
    p_cci = float(np.dot(total, scene.source_powers) - total[i] * scene.source_powers[i])
    return float(p_isi + p_cci)


def sinr_point(scene: SinrScene, i: int, j: int) -> float:
    """SINR of pair (i, j) in dB.

    10 log10((r P_sig)^2 / (eta B + (r P_intf)^2)); a noise- and
    interference-free pair returns the +inf sentinel.
    """
    r = scene.responsivity
    num = (r * signal_power(scene, i, j)) ** 2
    den = scene.noise_psd * scene.bandwidth + (r * interference_power(scene, i, j)) ** 2
    if den == 0.0:
        return math.inf if num > 0.0 else -math.inf
    if num == 0.0:
        return -math.inf
    return 10.0 * math.log10(num / den)


def average_sinr(scene: SinrScene) -> float:
    """Mean SINR over all (source, receiver) pairs, averaged in dB."""
    values = [
        sinr_point(scene, i, j)
        for i in range(scene.n_sources)
        for j in range(scene.n_receivers)
    ]
    return float(np.mean(values))


def average_powers(scene: SinrScene) -> tuple[float, float]:
    """Linear means of signal and interference power over all pairs."""
    sig = [
        signal_power(scene, i, j)
        for i in range(scene.n_sources)
        for j in range(scene.n_receivers)
    ]
    intf = [
        interference_power(scene, i, j)
        for i in range(scene.n_sources)
        for j in range(scene.n_receivers)
    ]
    return float(np.mean(sig)), float(np.mean(intf))


def scene_from_room(
    source_positions,
    source_power: float,
    receiver_positions,
    room: RoomScenario,
    responsivity: float,
    noise_psd: float,
    bandwidth: float,
) -> SinrScene:
    """Populate per-pair gains for downward luminaires and upward receivers.

    Line-of-sight gains come from the Lambertian beam pattern of the
    room's luminaire model; the diffuse contribution uses the room's
    integrating-sphere gain for every pair.
    """
    sources = np.asarray(source_positions, dtype=float)
    receivers = np.asarray(receiver_positions, dtype=float)
    m = room.lambertian_order
    h_diff = diffuse_gain(room)
    h_los = np.zeros((sources.shape[0], receivers.shape[0]))
    for i, s in enumerate(sources):
        for j, rx in enumerate(receivers):
            h_los[i, j], _ = lambertian_los_gain(
                s, (0.0, 0.0, -1.0), rx, (0.0, 0.0, 1.0), m, room.pd_area, room.fov_deg
            )
    h_nlos = np.full_like(h_los, h_diff)
    return SinrScene(
        source_positions=sources,
        source_powers=np.full(sources.shape[0], float(source_power)),
        receiver_positions=receivers,
        h_los=h_los,
        h_nlos=h_nlos,
        responsivity=responsivity,
        noise_psd=noise_psd,
        bandwidth=bandwidth,
    )
