"""Switch devices and circuits: optical feed + patch impedance + RF two-port."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .netlist import NetlistAst
from .optical_network import (
    DEFAULT_COUPLING,
    OpticalGraph,
    build_network,
    propagate,
    with_source_power,
)
from .photoconductor import MaterialParams, ParasiticParams, PatchGeometry, patch_impedance
from .rf_network import (
    FrequencyGrid,
    FrequencyMismatch,
    SParameters,
    TwoPortABCD,
    abcd_matched_loss,
    abcd_series,
    abcd_to_s,
    cascade,
)

Z0 = 50.0


@dataclass(frozen=True)
class SwitchModel:
    """Physical parameters shared by all switches of one device type."""

    geometry: PatchGeometry = field(default_factory=PatchGeometry)
    material: MaterialParams = field(default_factory=MaterialParams)
    parasitics: ParasiticParams = field(default_factory=ParasiticParams)
    alpha_line: float = 0.0  # dB per sqrt(GHz), each feed line


DEFAULT_MODELS = {"tapered": SwitchModel(), "through": SwitchModel()}


@dataclass(frozen=True)
class SwitchInstance:
    id: str
    device_type: str
    geometry: PatchGeometry = field(default_factory=PatchGeometry)
    material: MaterialParams = field(default_factory=MaterialParams)
    parasitics: ParasiticParams = field(default_factory=ParasiticParams)
    optical_tap_id: str | None = None
    alpha_line: float = 0.0
    coupling_fraction: float | None = None

    def __post_init__(self):
        if self.device_type not in DEFAULT_COUPLING:
            raise ValueError(f"unknown device type {self.device_type!r}")
        if self.coupling_fraction is None:
            object.__setattr__(self, "coupling_fraction", DEFAULT_COUPLING[self.device_type])

    @classmethod
    def from_model(cls, ident: str, device_type: str, model: SwitchModel, **kw) -> "SwitchInstance":
        return cls(
            id=ident,
            device_type=device_type,
            geometry=model.geometry,
            material=model.material,
            parasitics=model.parasitics,
            alpha_line=model.alpha_line,
            **kw,
        )


def line_loss_db(alpha_line: float, freq) -> np.ndarray:
    return alpha_line * np.sqrt(np.asarray(freq, dtype=float) / 1e9)


def switch_two_port(sw: SwitchInstance, absorbed_mw, freq) -> TwoPortABCD:
    """ABCD matrix of the switch: series patch impedance between feed lines."""
    if np.any(np.asarray(absorbed_mw) < 0):
        raise ValueError("absorbed power must be >= 0")
    z = patch_impedance(absorbed_mw, sw.material, sw.geometry, sw.parasitics, freq)
    gap = abcd_series(z, freq)
    if sw.alpha_line == 0:
        return gap
    line = abcd_matched_loss(line_loss_db(sw.alpha_line, freq), freq, Z0)
    return cascade(cascade(line, gap), line)


def switch_s(sw: SwitchInstance, absorbed_mw, freq, z0: float = Z0) -> SParameters:
    return abcd_to_s(switch_two_port(sw, absorbed_mw, freq), z0)


def _check_pair(s_on: SParameters, s_off: SParameters) -> None:
    if not np.array_equal(np.asarray(s_on.freq), np.asarray(s_off.freq)):
        raise FrequencyMismatch("On and Off S-parameters are at different frequencies")


def extinction_ratio(s_on: SParameters, s_off: SParameters):
    """``20 log10 |S21(on) / S21(off)|`` in dB."""
    _check_pair(s_on, s_off)
    off = np.abs(s_off.s21)
    if np.any(off == 0):
        raise ZeroDivisionError("Off-state S21 is zero; extinction ratio undefined")
    return 20.0 * np.log10(np.abs(s_on.s21) / off)


def phase_shift(s_on: SParameters, s_off: SParameters):
    """Principal value of ``arg S21(on) - arg S21(off)`` in degrees, in (-180, 180]."""
    _check_pair(s_on, s_off)
    if np.any(np.abs(s_on.s21) == 0) or np.any(np.abs(s_off.s21) == 0):
        raise ZeroDivisionError("phase of a zero S21 is undefined")
    deg = np.degrees(np.angle(s_on.s21 / s_off.s21))
    # np.angle yields -180 for a negative real ratio; map it into the half-open interval
    return np.where(deg <= -180.0, deg + 360.0, deg)


@dataclass(frozen=True)
class SwitchResult:
    """On/Off response of one switch over a frequency grid at one optical power.

    ``power_mw`` is the sweep coordinate (the source power for circuit runs);
    ``absorbed_power`` what the patch actually absorbs.
    """

    switch_id: str
    device_type: str
    power_mw: float
    absorbed_power: float
    s_on: SParameters
    s_off: SParameters

    @property
    def freq(self) -> np.ndarray:
        return np.atleast_1d(self.s_on.freq)

    @property
    def s21_on(self) -> np.ndarray:
        return np.broadcast_to(self.s_on.s21, self.freq.shape)

    @property
    def s21_off(self) -> np.ndarray:
        return np.broadcast_to(self.s_off.s21, self.freq.shape)

    @property
    def r_onoff(self) -> np.ndarray:
        return np.broadcast_to(extinction_ratio(self.s_on, self.s_off), self.freq.shape)

    @property
    def phase_shift(self) -> np.ndarray:
        return np.broadcast_to(phase_shift(self.s_on, self.s_off), self.freq.shape)

    def records(self):
        """Yield ``(freq, s21_on, s21_off, r_onoff, phase_shift)`` per frequency."""
        yield from zip(self.freq, self.s21_on, self.s21_off, self.r_onoff, self.phase_shift)


def switch_result(sw: SwitchInstance, absorbed_mw: float, freqs, power_mw: float | None = None) -> SwitchResult:
    f = FrequencyGrid(freqs).freqs if not isinstance(freqs, FrequencyGrid) else freqs.freqs
    return SwitchResult(
        switch_id=sw.id,
        device_type=sw.device_type,
        power_mw=float(absorbed_mw if power_mw is None else power_mw),
        absorbed_power=float(absorbed_mw),
        s_on=switch_s(sw, absorbed_mw, f),
        s_off=switch_s(sw, 0.0, f),
    )


def circuit_switches(graph: OpticalGraph, models: Mapping[str, SwitchModel] | None = None) -> dict[str, SwitchInstance]:
    models = DEFAULT_MODELS if models is None else models
    out = {}
    for tap_id in graph.taps:
        el = graph.elements[tap_id]
        out[tap_id] = SwitchInstance.from_model(
            tap_id,
            el.device_type,
            models[el.device_type],
            optical_tap_id=tap_id,
            coupling_fraction=el.coupling_fraction,
        )
    return out


def simulate_circuit(
    netlist: NetlistAst | OpticalGraph,
    freq_grid,
    source_power: float | None = None,
    models: Mapping[str, SwitchModel] | None = None,
) -> dict[str, SwitchResult]:
    """Propagate the optical feed once, then sweep every switch On and Off.

    Each switch sits on its own RF line; only the optical feed is shared.
    """
    graph = netlist if isinstance(netlist, OpticalGraph) else build_network(netlist)
    if source_power is not None:
        graph = with_source_power(graph, source_power)
    p_src = graph.elements[graph.source_id].input_power
    sol = propagate(graph)
    grid = freq_grid if isinstance(freq_grid, FrequencyGrid) else FrequencyGrid(freq_grid)
    return {
        sid: switch_result(sw, sol.absorbed[sid], grid, power_mw=p_src)
        for sid, sw in circuit_switches(graph, models).items()
    }


@dataclass(frozen=True)
class PowerSweep:
    switch_id: str
    powers: np.ndarray
    freqs: np.ndarray
    r_onoff: np.ndarray  # shape (len(powers), len(freqs))
    results: tuple[SwitchResult, ...]


def power_sweep(sw: SwitchInstance, powers: Sequence[float], freqs: Sequence[float]) -> PowerSweep:
    """Extinction ratio versus optical power incident on the switch's waveguide."""
    powers = np.asarray(powers, dtype=float)
    if powers.size == 0 or np.size(freqs) == 0:
        raise ValueError("power and frequency grids must be non-empty")
    if np.any(powers < 0):
        raise ValueError("powers must be >= 0")
    grid = FrequencyGrid(freqs)
    results = tuple(switch_result(sw, p * sw.coupling_fraction, grid, power_mw=p) for p in powers)
    table = np.array([r.r_onoff for r in results])
    return PowerSweep(sw.id, powers, grid.freqs, table, results)


def with_parasitics(sw: SwitchInstance, **changes) -> SwitchInstance:
    return replace(sw, parasitics=replace(sw.parasitics, **changes))
