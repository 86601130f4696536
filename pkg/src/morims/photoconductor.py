"""Absorbed optical power -> photoconductive gap impedance of a silicon patch.

All functions accept scalars or numpy arrays (broadcasting) for power and
frequency.  Optical power is in mW, everything else in SI units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT
from scipy.constants import e as ELEMENTARY_CHARGE
from scipy.constants import h as PLANCK

SILICON_BANDGAP_EV = 1.12


@dataclass(frozen=True)
class PatchGeometry:
    """Patch dimensions in metres; ``length`` runs along the RF signal path."""

    length: float = 12e-6
    width: float = 16e-6
    thickness: float = 250e-9

    def __post_init__(self):
        if min(self.length, self.width, self.thickness) <= 0:
            raise ValueError("patch dimensions must be positive")

    @property
    def volume(self) -> float:
        return self.length * self.width * self.thickness

    @property
    def conductance_factor(self) -> float:
        """Cross-section over length, m; multiply by conductivity to get siemens."""
        return self.width * self.thickness / self.length


@dataclass(frozen=True)
class MaterialParams:
    wavelength: float = 808e-9
    mu_n: float = 0.135
    mu_p: float = 0.048
    tau: float = 1e-6
    eta: float = 1.0
    dark_resistivity: float = 2.3e3

    def __post_init__(self):
        for name in ("mu_n", "mu_p", "tau", "dark_resistivity"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.eta <= 1:
            raise ValueError("eta must lie in (0, 1]")
        if self.wavelength <= 0:
            raise ValueError("wavelength must be positive")
        if photon_energy(self.wavelength) <= SILICON_BANDGAP_EV * ELEMENTARY_CHARGE:
            raise ValueError(
                f"photon energy at {self.wavelength * 1e9:.0f} nm does not exceed the "
                f"silicon bandgap ({SILICON_BANDGAP_EV} eV)"
            )


@dataclass(frozen=True)
class ParasiticParams:
    """Circuit parasitics around the gap.

    ``c_contact`` is an optional series capacitance of the electrode/patch
    contacts; ``None`` means ohmic contacts.
    """

    c_gap: float = 2e-15
    r_contact: float = 50.0
    p_sat: float = 1.5
    c_contact: float | None = None

    def __post_init__(self):
        if self.c_gap < 0 or self.r_contact < 0:
            raise ValueError("c_gap and r_contact must be >= 0")
        if self.p_sat <= 0:
            raise ValueError("p_sat must be positive")
        if self.c_contact is not None and self.c_contact <= 0:
            raise ValueError("c_contact must be positive or None")


def photon_energy(wavelength):
    """Photon energy h*c/lambda in joules."""
    return PLANCK * SPEED_OF_LIGHT / wavelength


def effective_absorbed_power(p_abs, p_sat):
    """Saturable map ``p_sat * (1 - exp(-p_abs / p_sat))``; unit slope at zero."""
    p_abs = np.asarray(p_abs, dtype=float)
    return -p_sat * np.expm1(-p_abs / p_sat)


def carrier_density(p_eff, m: MaterialParams, g: PatchGeometry):
    """Steady-state excess carrier density in m^-3.

    Generation rate ``eta * P / (h nu)`` balanced against recombination with
    lifetime ``tau`` over the patch volume.
    """
    generation = m.eta * np.asarray(p_eff, dtype=float) * 1e-3 / photon_energy(m.wavelength)
    return generation * m.tau / g.volume


def photoconductance(p_abs, m: MaterialParams, g: PatchGeometry, par: ParasiticParams):
    dn = carrier_density(effective_absorbed_power(p_abs, par.p_sat), m, g)
    return ELEMENTARY_CHARGE * (m.mu_n + m.mu_p) * dn * g.conductance_factor


def dark_conductance(m: MaterialParams, g: PatchGeometry) -> float:
    return g.conductance_factor / m.dark_resistivity


def patch_impedance(p_abs, m: MaterialParams, g: PatchGeometry, par: ParasiticParams, freq):
    """Complex impedance across the electrode gap.

    ``Z = r_contact [+ 1/(j w c_contact)] + 1 / (G_ph + G_dark + j w c_gap)``.
    """
    freq = np.asarray(freq, dtype=float)
    omega = 2 * np.pi * freq
    y = photoconductance(p_abs, m, g, par) + dark_conductance(m, g) + 1j * omega * par.c_gap
    z = par.r_contact + 1.0 / y
    if par.c_contact is not None:
        z = z + 1.0 / (1j * omega * par.c_contact)
    return z[()] if np.ndim(z) == 0 else z


@dataclass(frozen=True)
class Transient:
    t: np.ndarray
    rise: np.ndarray
    fall: np.ndarray
    g_ss: float
    rise_time: float


def rise_time_10_90(tau: float) -> float:
    return tau * np.log(9.0)


def transient_response(p_abs_step, t, m: MaterialParams, g: PatchGeometry, par: ParasiticParams) -> Transient:
    """Photoconductance after a power step switches on (``rise``) or off (``fall``).

    Single-lifetime relaxation: ``G_ss (1 - exp(-t/tau))`` and ``G_ss exp(-t/tau)``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be >= 0")
    g_ss = float(photoconductance(p_abs_step, m, g, par))
    decay = np.exp(-t / m.tau)
    return Transient(t=t, rise=g_ss * (1.0 - decay), fall=g_ss * decay, g_ss=g_ss, rise_time=rise_time_10_90(m.tau))
