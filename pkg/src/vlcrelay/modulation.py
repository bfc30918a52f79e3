"""Constellation mapping for the subcarrier modulators.

Constellations are Gray-labeled and normalized to unit average symbol
energy; the point index IS the bit label read as a big-endian integer, so
hard-decision demapping is a nearest-point search followed by a binary
expansion. BPSK-SIM shares the 2-PSK constellation but is an
analytic-only scheme: it carries its own error-rate formula and is not
realized by the Monte Carlo waveform chain.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_DEMAP_CHUNK = 1 << 16


@dataclass(frozen=True, eq=False)
class ModulationScheme:
    name: str
    kind: str  # "psk", "qam" or "bpsk-sim"
    order: int
    bits_per_symbol: int
    points: np.ndarray  # indexed by the bit label as an integer
    bit_table: np.ndarray  # (order, bits_per_symbol) 0/1 rows
    analytic_only: bool = False

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=complex)
        pts.setflags(write=False)
        object.__setattr__(self, "points", pts)
        bits = np.asarray(self.bit_table, dtype=np.int8)
        bits.setflags(write=False)
        object.__setattr__(self, "bit_table", bits)

    def __repr__(self):
        return f"ModulationScheme({self.name})"


def _gray_to_binary(g: int) -> int:
    b = 0
    while g:
        b ^= g
        g >>= 1
    return b


def _pam_coordinates(n_bits: int) -> np.ndarray:
    """Gray-labeled PAM levels for one axis, indexed by the bit pattern."""
    levels = 1 << n_bits
    coords = np.empty(levels)
    for label in range(levels):
        idx = _gray_to_binary(label)
        coords[label] = 2 * idx - (levels - 1)
    return coords


def _bit_table(order: int, bits_per_symbol: int) -> np.ndarray:
    idx = np.arange(order)
    shifts = np.arange(bits_per_symbol - 1, -1, -1)
    return ((idx[:, None] >> shifts[None, :]) & 1).astype(np.int8)


def _make_psk2(name: str, analytic_only: bool) -> ModulationScheme:
    points = np.array([1.0 + 0j, -1.0 + 0j])
    return ModulationScheme(
        name=name,
        kind="bpsk-sim" if analytic_only else "psk",
        order=2,
        bits_per_symbol=1,
        points=points,
        bit_table=_bit_table(2, 1),
        analytic_only=analytic_only,
    )


def _make_qam(order: int) -> ModulationScheme:
    bps = int(round(np.log2(order)))
    if 2**bps != order or bps < 2:
        raise ValueError(f"QAM order must be a power of two >= 4, got {order}")
    bits_i = (bps + 1) // 2
    bits_q = bps - bits_i
    coords_i = _pam_coordinates(bits_i)
    coords_q = _pam_coordinates(bits_q)
    points = np.empty(order, dtype=complex)
    for label in range(order):
        li = label >> bits_q
        lq = label & ((1 << bits_q) - 1)
        points[label] = coords_i[li] + 1j * coords_q[lq]
    points /= np.sqrt(np.mean(np.abs(points) ** 2))
    return ModulationScheme(
        name=f"{order}-QAM",
        kind="qam",
        order=order,
        bits_per_symbol=bps,
        points=points,
        bit_table=_bit_table(order, bps),
    )


def _build_registry() -> dict[str, ModulationScheme]:
    schemes = [_make_psk2("2-PSK", False), _make_psk2("BPSK-SIM", True)]
    schemes.extend(_make_qam(m) for m in (4, 8, 16, 64))
    return {s.name.lower(): s for s in schemes}


_REGISTRY = _build_registry()


def available_schemes() -> tuple[str, ...]:
    return tuple(sorted(s.name for s in _REGISTRY.values()))


def get_scheme(name: str) -> ModulationScheme:
    key = name.strip().lower()
    if key in ("bpsk", "2psk"):
        key = "2-psk"
    key = key.replace("qam", "-qam").replace("--", "-") if "-" not in key else key
    if key not in _REGISTRY:
        raise ValueError(
            f"unknown modulation scheme {name!r}; choose from "
            f"{', '.join(available_schemes())}"
        )
    return _REGISTRY[key]


def map_bits(bits, scheme: ModulationScheme) -> np.ndarray:
    """Map a flat 0/1 array onto constellation symbols."""
    bits = np.asarray(bits)
    if bits.size % scheme.bits_per_symbol:
        raise ValueError(
            f"bit count {bits.size} is not divisible by "
            f"{scheme.bits_per_symbol} bits per symbol"
        )
    groups = bits.reshape(-1, scheme.bits_per_symbol)
    weights = 1 << np.arange(scheme.bits_per_symbol - 1, -1, -1)
    labels = groups @ weights
    return scheme.points[labels]


def detect_symbols(symbols, scheme: ModulationScheme) -> np.ndarray:
    """Nearest-constellation-point indices; ties go to the lowest index."""
    symbols = np.asarray(symbols, dtype=complex).ravel()
    out = np.empty(symbols.size, dtype=np.int64)
    for lo in range(0, symbols.size, _DEMAP_CHUNK):
        chunk = symbols[lo : lo + _DEMAP_CHUNK]
        d2 = np.abs(chunk[:, None] - scheme.points[None, :]) ** 2
        out[lo : lo + _DEMAP_CHUNK] = np.argmin(d2, axis=1)
    return out


def demap_symbols(symbols, scheme: ModulationScheme) -> np.ndarray:
    """Hard-decision demap back to a flat 0/1 array."""
    labels = detect_symbols(symbols, scheme)
    return scheme.bit_table[labels].reshape(-1)
