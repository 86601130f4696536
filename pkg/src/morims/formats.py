"""File formats: Touchstone, sweep CSV, parameter files and dataset CSV.

All writers return text and are byte-deterministic for identical inputs;
:func:`atomic_write` puts text on disk without ever leaving a partial file.
"""

from __future__ import annotations

import csv
import io
import os
import tempfile
from dataclasses import fields
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .calibration import UNITS, CalibrationDataset, DataPoint, ParameterVector
from .device import SwitchResult
from .rf_network import SParameters


class FormatError(ValueError):
    """Malformed input file; carries the offending line when known."""

    def __init__(self, message: str, line: int | None = None, path: str | os.PathLike | None = None):
        self.message, self.line, self.path = message, line, path
        where = ":".join(str(x) for x in (path, line) if x is not None)
        super().__init__(f"{where}: {message}" if where else message)


def _num(x: float) -> str:
    """Nine significant digits, with negative zero printed as zero."""
    x = float(x)
    return format(0.0 if x == 0 else x, ".9g")


def atomic_write(path: str | os.PathLike, text: str) -> None:
    """Write ``text`` to a temporary file beside ``path`` and rename it into place."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent or ".", prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


# ---------------------------------------------------------------------------
# Touchstone

_FREQ_UNITS = {"HZ": 1.0, "KHZ": 1e3, "MHZ": 1e6, "GHZ": 1e9}


def write_touchstone(results: Sequence[SParameters] | SParameters, z0: float | None = None) -> str:
    """Version 1 two-port Touchstone text, frequencies in GHz, real/imaginary pairs.

    Data columns are ``f S11 S21 S12 S22``, as the format prescribes.
    """
    records = results.split() if isinstance(results, SParameters) else list(results)
    if not records:
        raise ValueError("no S-parameter data to write")
    freqs = [float(r.freq) for r in records]
    if any(b <= a for a, b in zip(freqs, freqs[1:])):
        raise ValueError("Touchstone frequencies must be strictly ascending")
    z0 = records[0].z0 if z0 is None else z0
    lines = [f"# GHz S RI R {_num(z0)}"]
    for r in records:
        cols = [_num(r.freq / 1e9)]
        for s in (r.s11, r.s21, r.s12, r.s22):
            s = complex(s)
            cols += [_num(s.real), _num(s.imag)]
        lines.append(" ".join(cols))
    return "\n".join(lines) + "\n"


def read_touchstone(text: str) -> SParameters:
    """Parse two-port Touchstone v1 text (RI, MA or DB) into a vectorised record."""
    unit, fmt, z0 = 1e9, "MA", 50.0
    tokens: list[tuple[str, int]] = []
    seen_option = False
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("!", 1)[0].strip()
        if not line:
            continue
        if line.startswith("#"):
            if seen_option:
                continue  # only the first option line counts
            seen_option = True
            words = line[1:].upper().split()
            i = 0
            while i < len(words):
                w = words[i]
                if w in _FREQ_UNITS:
                    unit = _FREQ_UNITS[w]
                elif w in ("RI", "MA", "DB"):
                    fmt = w
                elif w == "R" and i + 1 < len(words):
                    z0 = float(words[i + 1])
                    i += 1
                elif w != "S":
                    raise FormatError(f"unsupported option {w!r}", lineno)
                i += 1
            continue
        tokens += [(t, lineno) for t in line.split()]
    if not tokens:
        raise FormatError("no data lines")
    if len(tokens) % 9:
        raise FormatError("two-port data needs 9 numbers per frequency", tokens[-1][1])
    try:
        data = np.array([float(t) for t, _ in tokens]).reshape(-1, 9)
    except ValueError as exc:
        raise FormatError(str(exc)) from None
    a, b = data[:, 1::2], data[:, 2::2]
    if fmt == "RI":
        s = a + 1j * b
    else:
        mag = a if fmt == "MA" else 10 ** (a / 20)
        s = mag * np.exp(1j * np.radians(b))
    return SParameters(s[:, 0], s[:, 2], s[:, 1], s[:, 3], data[:, 0] * unit, z0)


# ---------------------------------------------------------------------------
# sweep CSV

SWEEP_COLUMNS = ("switch_id", "freq_ghz", "power_mw", "s21_on_db", "s21_off_db", "r_onoff_db", "phase_shift_deg")


def write_sweep_csv(results: Iterable[SwitchResult]) -> str:
    """One row per (switch, frequency, power), sorted in that order."""
    rows = []
    for res in results:
        for f, on, off, r, ph in res.records():
            rows.append((res.switch_id, float(f), res.power_mw, on, off, r, ph))
    if not rows:
        raise ValueError("no sweep results to write")
    rows.sort(key=lambda row: row[:3])
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for sid, f, p, on, off, r, ph in rows:
        w.writerow([
            sid,
            _num(f / 1e9),
            _num(p),
            _num(20 * np.log10(abs(on))),
            _num(20 * np.log10(abs(off))),
            _num(r),
            _num(ph),
        ])
    return out.getvalue()


# ---------------------------------------------------------------------------
# parameter files


def write_params(params: ParameterVector) -> str:
    """``key = value  # unit`` lines; values use ``repr`` so they read back exactly."""
    width = max(len(f.name) for f in fields(ParameterVector))
    lines = [f"{name:<{width}} = {value!r}  # {UNITS[name]}" for name, value in params.as_dict().items()]
    return "\n".join(lines) + "\n"


def read_params(text: str, base: ParameterVector | None = None, path=None) -> ParameterVector:
    """Parse a parameter file; keys not present keep their value in ``base``."""
    base = base or ParameterVector()
    known = set(ParameterVector.names())
    values: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = (s.strip() for s in line.partition("="))
        if not sep or not key or not val:
            raise FormatError(f"expected 'key = value', got {raw.strip()!r}", lineno, path)
        if key not in known:
            raise FormatError(f"unknown parameter {key!r}", lineno, path)
        if key in values:
            raise FormatError(f"parameter {key!r} given twice", lineno, path)
        try:
            values[key] = float(val)
        except ValueError:
            raise FormatError(f"{key}: {val!r} is not a number", lineno, path) from None
    try:
        return ParameterVector(**{**base.as_dict(), **values})
    except ValueError as exc:
        raise FormatError(str(exc), path=path) from None


# ---------------------------------------------------------------------------
# dataset CSV

DATASET_COLUMNS = ("freq_ghz", "power_mw", "device_type", "observable", "value", "weight")


def write_dataset(data: CalibrationDataset) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(DATASET_COLUMNS)
    for p in data:
        w.writerow([_num(p.freq_ghz), _num(p.power_mw), p.device_type, p.observable, _num(p.value), _num(p.weight)])
    return out.getvalue()


def read_dataset(text: str, path=None) -> CalibrationDataset:
    reader = csv.DictReader(io.StringIO(text))
    missing = [c for c in DATASET_COLUMNS if c not in (reader.fieldnames or ())]
    if missing:
        raise FormatError(f"missing column(s): {', '.join(missing)}", 1, path)
    points = []
    for row in reader:
        lineno = reader.line_num
        try:
            points.append(
                DataPoint(
                    freq_ghz=float(row["freq_ghz"]),
                    power_mw=float(row["power_mw"]),
                    device_type=row["device_type"].strip(),
                    observable=row["observable"].strip(),
                    value=float(row["value"]),
                    weight=float(row["weight"]),
                )
            )
        except (TypeError, ValueError) as exc:
            raise FormatError(str(exc), lineno, path) from None
    if not points:
        raise FormatError("dataset has no rows", path=path)
    return CalibrationDataset(tuple(points))
