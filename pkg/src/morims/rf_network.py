"""Two-port network algebra: ABCD matrices, cascading, S-parameter conversion.

Entries may be complex scalars or numpy arrays over frequency; every
operation is element-wise so a whole sweep can be evaluated at once.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np


class FrequencyMismatch(ValueError):
    pass


class SingularNetwork(ArithmeticError):
    pass


def _same_freq(f1, f2) -> bool:
    return np.array_equal(np.asarray(f1), np.asarray(f2))


@dataclass(frozen=True)
class TwoPortABCD:
    a: complex
    b: complex
    c: complex
    d: complex
    freq: float

    @classmethod
    def identity(cls, freq) -> "TwoPortABCD":
        one = np.ones_like(np.asarray(freq, dtype=complex))
        return cls(one, 0 * one, 0 * one, one, freq)

    @property
    def det(self):
        return self.a * self.d - self.b * self.c

    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]])

    def __matmul__(self, other: "TwoPortABCD") -> "TwoPortABCD":
        return cascade(self, other)


@dataclass(frozen=True)
class SParameters:
    s11: complex
    s12: complex
    s21: complex
    s22: complex
    freq: float
    z0: float = 50.0

    def __len__(self) -> int:
        return np.size(self.freq)

    def split(self) -> list["SParameters"]:
        """Per-frequency records from a vectorised result."""
        f = np.atleast_1d(self.freq)
        cols = [np.broadcast_to(np.atleast_1d(x), f.shape) for x in (self.s11, self.s12, self.s21, self.s22)]
        return [
            SParameters(complex(cols[0][i]), complex(cols[1][i]), complex(cols[2][i]), complex(cols[3][i]),
                        float(f[i]), self.z0)
            for i in range(f.size)
        ]


def abcd_series(z, freq) -> TwoPortABCD:
    """Series impedance ``z``: ``[[1, z], [0, 1]]``."""
    z = np.asarray(z, dtype=complex)
    one = np.ones_like(z)
    return TwoPortABCD(one, z, 0 * one, one, freq)


def abcd_matched_loss(loss_db, freq, z0: float = 50.0) -> TwoPortABCD:
    """Matched lossy line section with insertion loss ``loss_db`` at ``z0``.

    Scales S21 by ``10**(-loss_db/20)`` without adding reflection.
    """
    gl = np.asarray(loss_db, dtype=float) * np.log(10) / 20.0
    ch, sh = np.cosh(gl) + 0j, np.sinh(gl) + 0j
    return TwoPortABCD(ch, z0 * sh, sh / z0, ch, freq)


def cascade(m1: TwoPortABCD, m2: TwoPortABCD) -> TwoPortABCD:
    """Matrix product ``m1 @ m2`` (``m1`` nearer port 1)."""
    if not _same_freq(m1.freq, m2.freq):
        raise FrequencyMismatch(f"cannot cascade networks at {m1.freq} Hz and {m2.freq} Hz")
    return TwoPortABCD(
        m1.a * m2.a + m1.b * m2.c,
        m1.a * m2.b + m1.b * m2.d,
        m1.c * m2.a + m1.d * m2.c,
        m1.c * m2.b + m1.d * m2.d,
        m1.freq,
    )


def cascade_all(networks: Sequence[TwoPortABCD]) -> TwoPortABCD:
    out = networks[0]
    for m in networks[1:]:
        out = cascade(out, m)
    return out


def abcd_to_s(m: TwoPortABCD, z0: float = 50.0) -> SParameters:
    """Convert to S-parameters with real reference impedance ``z0`` on both ports."""
    if z0 <= 0:
        raise ValueError("z0 must be positive")
    bz = m.b / z0
    cz = m.c * z0
    den = m.a + bz + cz + m.d
    scale = np.abs(m.a) + np.abs(bz) + np.abs(cz) + np.abs(m.d)
    if np.any(np.abs(den) <= 1e-14 * scale):
        raise SingularNetwork("S-parameter conversion is singular (A + B/z0 + C z0 + D = 0)")
    return SParameters(
        s11=(m.a + bz - cz - m.d) / den,
        s12=2.0 * (m.a * m.d - m.b * m.c) / den,
        s21=2.0 / den,
        s22=(-m.a + bz - cz + m.d) / den,
        freq=m.freq,
        z0=z0,
    )


def s_to_abcd(s: SParameters) -> TwoPortABCD:
    """Inverse of :func:`abcd_to_s`."""
    z0 = s.z0
    s11, s12, s21, s22 = s.s11, s.s12, s.s21, s.s22
    two_s21 = 2.0 * s21
    if np.any(two_s21 == 0):
        raise SingularNetwork("S21 = 0 has no ABCD representation")
    return TwoPortABCD(
        ((1 + s11) * (1 - s22) + s12 * s21) / two_s21,
        z0 * ((1 + s11) * (1 + s22) - s12 * s21) / two_s21,
        ((1 - s11) * (1 - s22) - s12 * s21) / (z0 * two_s21),
        ((1 - s11) * (1 + s22) + s12 * s21) / two_s21,
        s.freq,
    )


class FrequencyGrid:
    """Strictly increasing, positive frequencies in Hz."""

    def __init__(self, freqs: Iterable[float]):
        f = np.asarray(list(freqs) if not isinstance(freqs, np.ndarray) else freqs, dtype=float).ravel()
        if f.size == 0:
            raise ValueError("frequency grid is empty")
        if np.any(f <= 0):
            raise ValueError("frequencies must be positive")
        if np.any(np.diff(f) <= 0):
            raise ValueError("frequencies must be strictly increasing")
        self.freqs = f
        self.freqs.setflags(write=False)

    @classmethod
    def linear(cls, f_start: float, f_stop: float, points: int) -> "FrequencyGrid":
        return cls(np.linspace(f_start, f_stop, points))

    @classmethod
    def log(cls, f_start: float, f_stop: float, points: int) -> "FrequencyGrid":
        return cls(np.geomspace(f_start, f_stop, points))

    def __len__(self) -> int:
        return self.freqs.size

    def __iter__(self):
        return iter(self.freqs)


Element = Callable[[np.ndarray], TwoPortABCD]


def sweep(elements: Sequence[Element], grid: FrequencyGrid, z0: float = 50.0) -> list[SParameters]:
    """S-parameters of the cascade of ``elements`` at each grid frequency.

    Each element is a callable mapping a frequency array (Hz) to its ABCD matrix.
    """
    if not isinstance(grid, FrequencyGrid):
        grid = FrequencyGrid(grid)
    f = grid.freqs
    if not elements:
        net = TwoPortABCD.identity(f)
    else:
        net = cascade_all([el(f) for el in elements])
    return abcd_to_s(net, z0).split()


def s21_db(s) -> np.ndarray:
    return 20.0 * np.log10(np.abs(s))
