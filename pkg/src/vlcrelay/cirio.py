"""Reading and writing impulse responses as plain text files.

Format: line 1 is ``dt=<seconds>``, an optional line 2 is
``t0=<seconds>`` (start of the first sample), then one real sample per
line in decimal or scientific notation. UTF-8, LF or CRLF. The writer
emits 17 significant digits so a store/load round trip is bit exact.
"""

from __future__ import annotations

import math
import os

import numpy as np

from .errors import CirFormatError
from .signals import SampledSignal


def store_cir(sig: SampledSignal, path: str | os.PathLike) -> None:
    if not sig.is_real:
        raise ValueError("the response file format stores real samples only")
    lines = [f"dt={sig.sample_interval:.17g}"]
    if sig.start_offset != 0:
        lines.append(f"t0={sig.start_offset * sig.sample_interval:.17g}")
    lines.extend(f"{v:.17g}" for v in sig.samples.real)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")


def _parse_float(text: str, lineno: int, what: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise CirFormatError(
            f"line {lineno}: cannot parse {what} from {text!r}"
        ) from None
    if math.isnan(value) or math.isinf(value):
        raise CirFormatError(f"line {lineno}: {what} is not finite")
    return value


def load_cir(path: str | os.PathLike) -> SampledSignal:
    with open(path, "r", encoding="utf-8") as fh:
        raw_lines = fh.read().splitlines()
    if not raw_lines or not raw_lines[0].strip():
        raise CirFormatError("line 1: missing 'dt=' header")
    header = raw_lines[0].strip()
    if not header.startswith("dt="):
        raise CirFormatError(f"line 1: expected 'dt=<seconds>', got {header!r}")
    dt = _parse_float(header[3:], 1, "sample interval")
    if dt <= 0:
        raise CirFormatError("line 1: sample interval must be positive")

    start = 1
    offset = 0
    if len(raw_lines) > 1 and raw_lines[1].strip().startswith("t0="):
        t0 = _parse_float(raw_lines[1].strip()[3:], 2, "start time")
        ratio = t0 / dt
        offset = round(ratio)
        if not math.isclose(ratio, offset, rel_tol=1e-9, abs_tol=1e-9):
            raise CirFormatError(
                "line 2: t0 is not an integer multiple of the sample interval"
            )
        start = 2

    samples = []
    for lineno, line in enumerate(raw_lines[start:], start + 1):
        text = line.strip()
        if not text:
            if lineno == len(raw_lines):
                continue  # single trailing blank line is fine
            raise CirFormatError(f"line {lineno}: blank line inside sample data")
        samples.append(_parse_float(text, lineno, "sample"))
    if not samples:
        raise CirFormatError(f"line {len(raw_lines)}: file holds no samples")
    return SampledSignal(np.asarray(samples, dtype=float), dt, offset)
