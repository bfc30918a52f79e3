"""Link-level simulator for relay-assisted indoor visible-light links."""

__version__ = "0.1.0"

from .channel import (
    LedModel,
    LinkBudget,
    RelayChannelSet,
    RoomScenario,
    amplification_factor,
    band_limited_channel,
    build_channels,
    effective_cir,
    end_to_end_cir,
    fd_relay_cir,
    led_frequency_response,
    led_impulse_response,
    relay_received_power,
    synthesize_cir,
)
from .cirio import load_cir, store_cir
from .errors import (
    CirFormatError,
    DeadSubcarrierError,
    GridMismatchError,
    LoopDivergenceError,
)
from .modulation import ModulationScheme, demap_symbols, get_scheme, map_bits
from .ofdm import OfdmConfig, add_cp, hermitian_frame, ml_detect, remove_cp
from .analysis import (
    RelayLinkGains,
    SnrProfile,
    average_ber,
    ber_per_subcarrier,
    build_relay_link,
    optimize_kp,
    snr_direct,
    snr_fd,
    snr_hd,
)
from .montecarlo import McReport, run_monte_carlo, wilson_interval
from .signals import (
    SampledSignal,
    SpectrumVector,
    add_signals,
    convolve,
    delayed_impulse,
    dft,
    energy,
    idft,
    rrc_filter,
)
from .sinr import SinrScene, average_powers, average_sinr, scene_from_room, sinr_point

__all__ = [name for name in dir() if not name.startswith("_")]
