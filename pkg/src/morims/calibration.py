"""Least-squares calibration of the switch model against extinction/phase data.

The optimiser is a bound-constrained Nelder-Mead search run in a unit-box
transform of the parameters (logarithmic where bounds span decades), with
seeded random screening and shrinking restarts around the incumbent.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np
from scipy.optimize import minimize

from .device import SwitchInstance, SwitchModel, extinction_ratio, phase_shift, switch_s
from .netlist import CASCADE_NETLIST, parse_netlist
from .optical_network import DEFAULT_COUPLING, build_network, propagate
from .photoconductor import MaterialParams, ParasiticParams, PatchGeometry

OBSERVABLES = ("r_onoff_db", "phase_deg")
DEVICE_TYPES = ("tapered", "through")

#: one dB of extinction residual weighs as much as this many degrees of phase
PHASE_DEG_PER_DB = 10.0

#: smallest objective change (dB) the round-trip checks can resolve
RESOLUTION_DB = 1e-3

P_KNEE_MW = 1.5


@dataclass(frozen=True)
class Bound:
    lo: float
    hi: float
    scale: str  # "log", "log1p" or "linear"

    def to_unit(self, x: float) -> float:
        if self.scale == "log":
            return (math.log(x) - math.log(self.lo)) / (math.log(self.hi) - math.log(self.lo))
        if self.scale == "log1p":
            return math.log1p(x) / math.log1p(self.hi)
        return (x - self.lo) / (self.hi - self.lo)

    def from_unit(self, u: float) -> float:
        u = min(max(u, 0.0), 1.0)
        if self.scale == "log":
            x = math.exp(math.log(self.lo) + u * (math.log(self.hi) - math.log(self.lo)))
        elif self.scale == "log1p":
            x = math.expm1(u * math.log1p(self.hi))
        else:
            x = self.lo + u * (self.hi - self.lo)
        return min(max(x, self.lo), self.hi)


# eta is bounded (0, 1]; the optimiser searches down to 1e-6
BOUNDS: dict[str, Bound] = {
    "eta_tapered": Bound(1e-6, 1.0, "log"),
    "eta_through": Bound(1e-6, 1.0, "log"),
    "tau": Bound(1e-8, 1e-4, "log"),
    "p_sat": Bound(0.1, 10.0, "log"),
    "c_gap": Bound(0.1, 100.0, "log"),  # fF
    "r_contact": Bound(0.0, 5000.0, "log1p"),  # ohm
    "alpha_line": Bound(0.0, 3.0, "linear"),  # dB / sqrt(GHz)
    "c_contact": Bound(1.0, 1e5, "log"),  # fF
}

UNITS = {
    "eta_tapered": "1",
    "eta_through": "1",
    "tau": "s",
    "p_sat": "mW",
    "c_gap": "fF",
    "r_contact": "ohm",
    "alpha_line": "dB/sqrt(GHz)",
    "c_contact": "fF",
}


@dataclass(frozen=True)
class ParameterVector:
    eta_tapered: float = 0.01
    eta_through: float = 0.01
    tau: float = 1e-6
    p_sat: float = P_KNEE_MW
    c_gap: float = 2.0
    r_contact: float = 50.0
    alpha_line: float = 0.0
    c_contact: float = 1e5

    def __post_init__(self):
        for name, b in BOUNDS.items():
            v = getattr(self, name)
            if not (b.lo <= v <= b.hi) or (name.startswith("eta") and v <= 0):
                raise ValueError(f"{name}={v!r} outside bounds [{b.lo}, {b.hi}]")

    @classmethod
    def names(cls) -> tuple[str, ...]:
        return tuple(f.name for f in fields(cls))

    def as_dict(self) -> dict[str, float]:
        return asdict(self)

    def to_unit(self, names: Sequence[str]) -> np.ndarray:
        return np.array([BOUNDS[n].to_unit(getattr(self, n)) for n in names])

    def from_unit(self, u: Sequence[float], names: Sequence[str]) -> "ParameterVector":
        return replace(self, **{n: BOUNDS[n].from_unit(float(x)) for n, x in zip(names, u)})

    def models(self, geometry: PatchGeometry | None = None, material: MaterialParams | None = None) -> dict[str, SwitchModel]:
        geometry = geometry or PatchGeometry()
        material = material or MaterialParams()
        par = ParasiticParams(
            c_gap=self.c_gap * 1e-15,
            r_contact=self.r_contact,
            p_sat=self.p_sat,
            c_contact=self.c_contact * 1e-15,
        )
        out = {}
        for dtype, eta in (("tapered", self.eta_tapered), ("through", self.eta_through)):
            mat = replace(material, eta=eta, tau=self.tau)
            out[dtype] = SwitchModel(geometry, mat, par, self.alpha_line)
        return out

    def combos(self) -> dict[str, float]:
        """Quantities the steady-state observables can determine individually."""
        return {
            "eta_tapered*tau": self.eta_tapered * self.tau,
            "eta_through*tau": self.eta_through * self.tau,
            "tau": self.tau,
            "p_sat": self.p_sat,
            "c_gap": self.c_gap,
            "r_contact": self.r_contact,
            "c_contact": self.c_contact,
            "alpha_line": self.alpha_line,
        }


@dataclass(frozen=True)
class DataPoint:
    """One measurement.  ``power_mw`` is the optical power entering the switch's feed waveguide."""

    freq_ghz: float
    power_mw: float
    device_type: str
    observable: str
    value: float
    weight: float = 1.0
    label: str = field(default="", compare=False)

    def __post_init__(self):
        if self.freq_ghz <= 0:
            raise ValueError("freq_ghz must be positive")
        if self.power_mw < 0:
            raise ValueError("power_mw must be >= 0")
        if self.weight <= 0:
            raise ValueError("weights must be positive")
        if self.device_type not in DEVICE_TYPES:
            raise ValueError(f"unknown device type {self.device_type!r}")
        if self.observable not in OBSERVABLES:
            raise ValueError(f"unknown observable {self.observable!r}")


@dataclass(frozen=True)
class CalibrationDataset:
    points: tuple[DataPoint, ...]
    annotations: Mapping[str, float] = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def subset(self, pred: Callable[[DataPoint], bool]) -> "CalibrationDataset":
        return CalibrationDataset(tuple(p for p in self.points if pred(p)), self.annotations)

    def with_values(self, values: Iterable[float]) -> "CalibrationDataset":
        pts = tuple(replace(p, value=float(v)) for p, v in zip(self.points, values))
        return CalibrationDataset(pts, self.annotations)


class _Arrays:
    """Column view of a dataset grouped by device type for vectorised evaluation."""

    def __init__(self, data: CalibrationDataset):
        pts = data.points
        self.n = len(pts)
        self.value = np.array([p.value for p in pts], dtype=float)
        self.weight = np.array([p.weight for p in pts], dtype=float)
        self.is_phase = np.array([p.observable == "phase_deg" for p in pts])
        self.groups = {}
        for dtype in DEVICE_TYPES:
            idx = np.array([i for i, p in enumerate(pts) if p.device_type == dtype], dtype=int)
            if idx.size:
                freq = np.array([pts[i].freq_ghz for i in idx]) * 1e9
                absorbed = np.array([pts[i].power_mw for i in idx]) * DEFAULT_COUPLING[dtype]
                self.groups[dtype] = (idx, freq, absorbed)


def model_values(params: ParameterVector, data: CalibrationDataset | _Arrays) -> np.ndarray:
    """Model prediction for every point: extinction in dB, |phase shift| in degrees."""
    arr = data if isinstance(data, _Arrays) else _Arrays(data)
    out = np.empty(arr.n)
    models = params.models()
    for dtype, (idx, freq, absorbed) in arr.groups.items():
        sw = SwitchInstance.from_model(dtype, dtype, models[dtype])
        s_on = switch_s(sw, absorbed, freq)
        s_off = switch_s(sw, np.zeros_like(absorbed), freq)
        ext = extinction_ratio(s_on, s_off)
        ph = np.abs(phase_shift(s_on, s_off))
        out[idx] = np.where(arr.is_phase[idx], ph, ext)
    return out


def residuals(params: ParameterVector, data: CalibrationDataset) -> np.ndarray:
    """Model minus measured, in each point's native unit (dB or degrees)."""
    arr = _Arrays(data)
    return model_values(params, arr) - arr.value


def _weighted_rms(res: np.ndarray, arr: _Arrays, phase_scale: float) -> float:
    scaled = np.where(arr.is_phase, res / phase_scale, res)
    return float(np.sqrt(np.sum(arr.weight * scaled**2) / np.sum(arr.weight)))


def objective(params: ParameterVector, data: CalibrationDataset, phase_scale: float = PHASE_DEG_PER_DB) -> float:
    """Weighted RMS residual; phase residuals are divided by ``phase_scale`` degrees per dB."""
    arr = _Arrays(data)
    return _weighted_rms(model_values(params, arr) - arr.value, arr, phase_scale)


# ---------------------------------------------------------------------------
# datasets


def builtin_paper_dataset() -> CalibrationDataset:
    """Extinction ratios and phase shifts read from the reference measurements.

    Circuit points are placed at the power each switch's waveguide receives
    when the Y-branch circuit is fed with 2 mW.
    """
    sol = propagate(build_network(parse_netlist(CASCADE_NETLIST)))
    inc = sol.incident
    E, P = "r_onoff_db", "phase_deg"
    pts = [
        DataPoint(1, 2.0, "tapered", E, 29, 2, "summary"),
        DataPoint(5, 2.0, "tapered", E, 25, 2, "summary"),
        DataPoint(20, 2.0, "tapered", E, 23, 2, "summary"),
        DataPoint(40, 2.0, "tapered", E, 11, 2, "summary"),
        DataPoint(5, 2.0, "through", E, 14, 1, "through"),
        DataPoint(20, 2.0, "through", E, 12, 1, "through"),
        DataPoint(20, inc["M1"], "through", E, 10, 1, "circuit:M1"),
        DataPoint(20, inc["M3"], "through", E, 10, 1, "circuit:M3"),
        DataPoint(20, inc["M2"], "through", E, 6, 1, "circuit:M2"),
        DataPoint(20, 2.0, "tapered", P, 20, 1, "phase"),
        DataPoint(40, 2.0, "tapered", P, 60, 1, "phase"),
    ]
    return CalibrationDataset(tuple(pts), {"p_knee_mw": P_KNEE_MW})


@dataclass(frozen=True)
class SynthesisGrid:
    freqs_ghz: Sequence[float] = (1.0, 2.0, 5.0, 10.0, 20.0, 30.0, 40.0)
    powers_mw: Sequence[float] = (0.25, 0.5, 1.0, 2.0, 4.0)
    device_types: Sequence[str] = DEVICE_TYPES
    observables: Sequence[str] = OBSERVABLES

    def points(self) -> list[tuple[float, float, str, str]]:
        return [
            (f, p, d, o)
            for d in self.device_types
            for o in self.observables
            for p in self.powers_mw
            for f in self.freqs_ghz
        ]


def synthesize_dataset(
    params: ParameterVector,
    grid: SynthesisGrid | Iterable[tuple[float, float, str, str]] = SynthesisGrid(),
    noise_db: float = 0.0,
    seed: int | None = None,
    phase_scale: float = PHASE_DEG_PER_DB,
) -> CalibrationDataset:
    """Forward-model evaluations packaged as a dataset.

    ``noise_db`` adds Gaussian noise of that many dB to extinction points and
    ``noise_db * phase_scale`` degrees to phase points.
    """
    spec = grid.points() if isinstance(grid, SynthesisGrid) else list(grid)
    if not spec:
        raise ValueError("synthesis grid is empty")
    skeleton = CalibrationDataset(tuple(DataPoint(f, p, d, o, 0.0) for f, p, d, o in spec))
    values = model_values(params, skeleton)
    if noise_db:
        rng = np.random.default_rng(seed)
        sigma = np.where(_Arrays(skeleton).is_phase, noise_db * phase_scale, noise_db)
        values = values + rng.normal(0.0, 1.0, values.size) * sigma
    return skeleton.with_values(values)


# ---------------------------------------------------------------------------
# fitting


def default_free(data: CalibrationDataset) -> tuple[str, ...]:
    """Parameters the data can inform.

    ``alpha_line`` scales On and Off transmission alike and cancels from both
    observables; ``tau`` enters only through ``eta * tau``; ``p_sat`` needs at
    least two absorbed-power levels; an efficiency needs points of its type.
    """
    types = {p.device_type for p in data}
    absorbed = {round(p.power_mw * DEFAULT_COUPLING[p.device_type], 12) for p in data}
    free = []
    for name in ParameterVector.names():
        if name in ("alpha_line", "tau"):
            continue
        if name == "p_sat" and len(absorbed) < 2:
            continue
        if name == "eta_tapered" and "tapered" not in types:
            continue
        if name == "eta_through" and "through" not in types:
            continue
        free.append(name)
    return tuple(free)


@dataclass
class FitResult:
    best: ParameterVector
    rms_error: float
    residuals: np.ndarray
    rms_db: float
    rms_deg: float
    n_evals: int
    iterations: int
    converged: bool
    initial_objective: float
    trace: list[float]
    free: tuple[str, ...]
    diagnostics: dict = field(default_factory=dict)


class _BudgetExhausted(Exception):
    pass


class _Evaluator:
    def __init__(self, base: ParameterVector, names, arr: _Arrays, phase_scale: float, budget: int):
        self.base, self.names, self.arr = base, tuple(names), arr
        self.phase_scale, self.budget = phase_scale, budget
        self.n = 0
        self.best_f = math.inf
        self.best_u: np.ndarray | None = None
        self.trace: list[float] = []

    def __call__(self, u) -> float:
        if self.n >= self.budget:
            raise _BudgetExhausted
        u = np.clip(np.asarray(u, dtype=float), 0.0, 1.0)
        p = self.base.from_unit(u, self.names)
        res = model_values(p, self.arr) - self.arr.value
        f = _weighted_rms(res, self.arr, self.phase_scale)
        if not math.isfinite(f):
            f = math.inf
        self.n += 1
        if self._better(f, u):
            self.best_f, self.best_u = f, u.copy()
        self.trace.append(self.best_f)
        return f

    def _better(self, f: float, u: np.ndarray) -> bool:
        # ties resolved on lexicographic parameter order so results never depend on visit order
        if self.best_u is None or f < self.best_f:
            return True
        return f == self.best_f and tuple(u) < tuple(self.best_u)

    @property
    def remaining(self) -> int:
        return self.budget - self.n


def _simplex(center: np.ndarray, step: float, rng: np.random.Generator) -> np.ndarray:
    n = center.size
    pts = [center]
    for i in range(n):
        v = center.copy()
        s = step * (1.0 + 0.25 * rng.uniform(-1, 1))
        v[i] = v[i] + s if v[i] + s <= 1.0 else v[i] - s
        pts.append(np.clip(v, 0.0, 1.0))
    return np.array(pts)


def _nelder_mead(ev: _Evaluator, x0: np.ndarray, step: float, rng, max_evals: int) -> int:
    """Run one bounded simplex search; returns the number of iterations."""
    n = x0.size
    opts = dict(
        initial_simplex=_simplex(x0, step, rng),
        maxfev=max(min(max_evals, ev.remaining), n + 2),
        xatol=1e-9,
        fatol=1e-11,
        adaptive=n > 4,
    )
    try:
        res = minimize(ev, x0, method="Nelder-Mead", bounds=[(0.0, 1.0)] * n, options=opts)
        return int(res.nit)
    except _BudgetExhausted:
        return 0


def fit(
    data: CalibrationDataset,
    initial: ParameterVector | None = None,
    budget: int = 10_000,
    seed: int = 0,
    free: Sequence[str] | None = None,
    phase_scale: float = PHASE_DEG_PER_DB,
    tol: float = 1e-10,
    diagnose: bool = True,
) -> FitResult:
    """Fit free parameters of ``initial`` to ``data`` within ``budget`` objective evaluations.

    Deterministic for a given ``seed``.  Returns the best point seen; the
    result is flagged unconverged when the budget runs out before restarts
    stop improving.
    """
    if budget < 100:
        raise ValueError("budget must be at least 100 evaluations")
    initial = initial or ParameterVector()
    names = tuple(free) if free is not None else default_free(data)
    unknown = set(names) - set(BOUNDS)
    if unknown:
        raise ValueError(f"unknown parameters: {sorted(unknown)}")
    if len(data) < len(names):
        raise ValueError(f"{len(data)} data points cannot determine {len(names)} free parameters")

    arr = _Arrays(data)
    rng = np.random.default_rng(seed)
    ev = _Evaluator(initial, names, arr, phase_scale, budget)
    n = len(names)
    u0 = initial.to_unit(names)
    iterations = 0
    converged = False
    try:
        f0 = ev(u0)
        # global screening
        n_screen = min(budget // 10, 40 * n)
        cands = [(f0, tuple(u0))]
        for _ in range(n_screen):
            u = rng.uniform(0.0, 1.0, n)
            cands.append((ev(u), tuple(u)))
        cands.sort()
        starts = [np.array(u0)] + [np.array(u) for _, u in cands[:3]]
        share = max((budget - ev.n) // (2 * len(starts)), 10 * n)
        for x in starts:
            iterations += _nelder_mead(ev, x, 0.15, rng, share)

        # restarts around the incumbent with a shrinking simplex
        step, stale = 0.1, 0
        while ev.remaining > n + 2:
            before = ev.best_f
            iterations += _nelder_mead(ev, ev.best_u.copy(), step, rng, max(ev.remaining // 4, 50 * n))
            if before - ev.best_f <= tol * max(1.0, before):
                stale += 1
                step *= 0.5
                if stale >= 3:
                    converged = True
                    break
            else:
                stale = 0
    except _BudgetExhausted:
        pass

    best = initial.from_unit(ev.best_u, names)
    res = residuals(best, data)
    ext = ~arr.is_phase
    result = FitResult(
        best=best,
        rms_error=_weighted_rms(res, arr, phase_scale),
        residuals=res,
        rms_db=float(np.sqrt(np.mean(res[ext] ** 2))) if ext.any() else 0.0,
        rms_deg=float(np.sqrt(np.mean(res[~ext] ** 2))) if (~ext).any() else 0.0,
        n_evals=ev.n,
        iterations=iterations,
        converged=converged,
        initial_objective=f0,
        trace=ev.trace,
        free=names,
    )
    if diagnose:
        result.diagnostics = identifiability(best, data, names, phase_scale)
    return result


# ---------------------------------------------------------------------------
# identifiability


#: e-folds a coordinate may move within bounds when compensating another
MAX_LOG_SPAN = 20.0

#: sum of the two port reference impedances seen by the series gap
LOOP_OHMS = 100.0


def _coord(name: str, x: float) -> float:
    if name == "r_contact":
        return math.log(LOOP_OHMS + x)
    if name == "alpha_line":
        return x
    return math.log(x)


def _uncoord(name: str, q: float) -> float:
    if name == "r_contact":
        return math.exp(q) - LOOP_OHMS
    if name == "alpha_line":
        return q
    return math.exp(q)


def quantity_gradients(params: ParameterVector) -> dict[str, dict[str, float]]:
    """Gradients of the log of each reported quantity w.r.t. the fit coordinates.

    Coordinates are ``log x`` except ``log(LOOP_OHMS + r_contact)`` and the
    linear ``alpha_line``.  Besides raw parameters this lists the ratios left
    invariant by scaling the whole series loop impedance, which is all that
    extinction ratios and phase shifts can see.
    """
    r = params.r_contact
    loop = LOOP_OHMS + r
    grads = {
        "eta_tapered*tau": {"eta_tapered": 1.0, "tau": 1.0},
        "eta_through*tau": {"eta_through": 1.0, "tau": 1.0},
        "eta_tapered*tau/c_gap": {"eta_tapered": 1.0, "tau": 1.0, "c_gap": -1.0},
        "eta_through*tau/c_gap": {"eta_through": 1.0, "tau": 1.0, "c_gap": -1.0},
        "c_contact/c_gap": {"c_contact": 1.0, "c_gap": -1.0},
        "loop_ohms*c_gap": {"r_contact": 1.0, "c_gap": 1.0},
        "tau": {"tau": 1.0},
        "p_sat": {"p_sat": 1.0},
        "c_gap": {"c_gap": 1.0},
        "c_contact": {"c_contact": 1.0},
    }
    if r > 1e-9:
        grads["r_contact"] = {"r_contact": loop / r}
    if params.alpha_line > 0:
        grads["alpha_line"] = {"alpha_line": 1.0 / params.alpha_line}
    return grads


def quantity_values(params: ParameterVector) -> dict[str, float]:
    v = params.combos()
    v.update(
        {
            "eta_tapered*tau/c_gap": params.eta_tapered * params.tau / params.c_gap,
            "eta_through*tau/c_gap": params.eta_through * params.tau / params.c_gap,
            "c_contact/c_gap": params.c_contact / params.c_gap,
            "loop_ohms*c_gap": (LOOP_OHMS + params.r_contact) * params.c_gap,
        }
    )
    return v


def identifiability(
    params: ParameterVector,
    data: CalibrationDataset,
    free: Sequence[str] | None = None,
    phase_scale: float = PHASE_DEG_PER_DB,
    rel_change: float = 0.05,
    resolution: float = RESOLUTION_DB,
) -> dict:
    """Local identifiability of parameters and parameter combinations.

    For each quantity the linearised profile objective is computed: the
    smallest weighted RMS change reachable when the quantity is off by
    ``rel_change`` and all free coordinates are otherwise re-optimised.
    Jacobian directions that cannot reach ``resolution`` even across
    ``MAX_LOG_SPAN`` are treated as exactly degenerate; a quantity with a
    component along one is non-identifiable.
    """
    names = tuple(free) if free is not None else default_free(data)
    arr = _Arrays(data)
    base = params.as_dict()
    sqrt_w = np.sqrt(arr.weight / arr.weight.sum())
    unit = np.where(arr.is_phase, 1.0 / phase_scale, 1.0)

    def vec(coords: dict[str, float]) -> np.ndarray:
        values = dict(base)
        for k, q in coords.items():
            values[k] = _uncoord(k, q)
        return sqrt_w * unit * model_values(ParameterVector(**values), arr)

    q0 = {k: _coord(k, base[k]) for k in names}
    h = 1e-4
    cols = []
    for k in names:
        b = BOUNDS[k]
        up, dn = dict(q0), dict(q0)
        up[k] += h
        dn[k] -= h
        span = 2 * h
        # one-sided difference at a bound
        if _uncoord(k, up[k]) > b.hi:
            up[k], span = q0[k], h
        elif _uncoord(k, dn[k]) < b.lo:
            dn[k], span = q0[k], h
        cols.append((vec(up) - vec(dn)) / span)
    J = np.column_stack(cols) if cols else np.zeros((arr.n, 0))

    _, sv, vt = np.linalg.svd(J, full_matrices=False)
    keep = sv * MAX_LOG_SPAN >= resolution
    v_keep, s_keep = vt[keep], sv[keep]
    step = math.log1p(rel_change)

    profile: dict[str, float] = {}
    for q, grad in quantity_gradients(params).items():
        g = np.array([grad.get(k, 0.0) for k in names])
        if not np.any(g):
            continue  # depends only on fixed parameters
        proj = v_keep @ g
        null = g - v_keep.T @ proj
        if np.linalg.norm(null) > 1e-6 * np.linalg.norm(g):
            profile[q] = 0.0
        else:
            profile[q] = float(step / math.sqrt(np.sum((proj / s_keep) ** 2)))

    degenerate = []
    for s, v in zip(sv, vt):
        if s * step < resolution:
            degenerate.append({k: round(float(x), 3) for k, x in zip(names, v) if abs(x) >= 0.05})
    identifiable = [q for q, p in profile.items() if p >= resolution]
    return {
        "profile_db": profile,
        "identifiable": identifiable,
        "non_identifiable": [q for q in profile if q not in identifiable],
        "degenerate_directions": degenerate,
        "rel_change": rel_change,
        "resolution_db": resolution,
    }
