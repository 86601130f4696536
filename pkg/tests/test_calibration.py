import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from morims.calibration import (
    BOUNDS,
    CalibrationDataset,
    DataPoint,
    ParameterVector,
    SynthesisGrid,
    default_free,
    fit,
    identifiability,
    model_values,
    objective,
    quantity_values,
    residuals,
    synthesize_dataset,
)
from morims.device import SwitchInstance, power_sweep

TRUTH = ParameterVector(
    eta_tapered=0.02, eta_through=0.01, tau=1e-7, p_sat=1.5, c_gap=20.0, r_contact=20.0, c_contact=200.0
)
SMALL_GRID = SynthesisGrid(freqs_ghz=(1, 5, 20, 40), powers_mw=(0.5, 2.0))


class TestParameterVector:
    def test_out_of_bounds(self):
        with pytest.raises(ValueError, match="p_sat"):
            ParameterVector(p_sat=20.0)
        with pytest.raises(ValueError, match="eta_tapered"):
            ParameterVector(eta_tapered=0.0)

    @given(st.lists(st.floats(0, 1), min_size=8, max_size=8))
    def test_unit_round_trip(self, u):
        names = ParameterVector.names()
        p = ParameterVector().from_unit(u, names)
        assert np.allclose(p.to_unit(names), u, atol=1e-9)

    def test_models_convert_femtofarads(self):
        m = TRUTH.models()
        assert m["tapered"].parasitics.c_gap == pytest.approx(20e-15)
        assert m["tapered"].parasitics.c_contact == pytest.approx(200e-15)
        assert m["through"].material.eta == 0.01


class TestObjective:
    def test_self_consistent_data_gives_zero(self):
        data = synthesize_dataset(TRUTH, SMALL_GRID)
        assert objective(TRUTH, data) <= 1e-9

    def test_single_point_off_by_two_db(self):
        base = CalibrationDataset((DataPoint(5, 2.0, "tapered", "r_onoff_db", 0.0),))
        truth = model_values(TRUTH, base)[0]
        data = base.with_values([truth + 2.0])
        assert objective(TRUTH, data) == pytest.approx(2.0, abs=1e-12)

    def test_phase_residuals_count_ten_degrees_per_db(self):
        base = CalibrationDataset((DataPoint(20, 2.0, "tapered", "phase_deg", 0.0),))
        truth = model_values(TRUTH, base)[0]
        assert objective(TRUTH, base.with_values([truth + 5.0])) == pytest.approx(0.5, abs=1e-12)

    def test_doubling_weights_changes_nothing(self, builtin_data):
        doubled = CalibrationDataset(tuple(p.__class__(**{**p.__dict__, "weight": 2 * p.weight}) for p in builtin_data))
        assert objective(TRUTH, doubled) == pytest.approx(objective(TRUTH, builtin_data), rel=1e-14)
        a = fit(builtin_data, budget=300, seed=3, diagnose=False)
        b = fit(doubled, budget=300, seed=3, diagnose=False)
        assert a.best == b.best

    def test_reordering_invariance(self, builtin_data):
        pts = list(builtin_data.points)
        shuffled = CalibrationDataset(tuple(pts[i] for i in np.random.default_rng(0).permutation(len(pts))))
        assert objective(TRUTH, shuffled) == pytest.approx(objective(TRUTH, builtin_data), rel=1e-14)

    def test_residual_signs(self):
        base = CalibrationDataset((DataPoint(5, 2.0, "tapered", "r_onoff_db", 0.0),))
        v = model_values(TRUTH, base)[0]
        assert residuals(TRUTH, base.with_values([v - 1]))[0] == pytest.approx(1.0)


class TestDatasets:
    def test_builtin_size(self, builtin_data):
        assert len(builtin_data) == 11
        assert builtin_data.annotations["p_knee_mw"] == 1.5

    def test_summary_values_decrease_with_frequency(self, builtin_data):
        table = [p for p in builtin_data if p.label == "summary"]
        assert [p.freq_ghz for p in table] == [1, 5, 20, 40]
        assert all(a.value > b.value for a, b in zip(table, table[1:]))
        assert all(p.weight == 2 for p in table)

    def test_cascade_drop(self, builtin_data):
        by = {p.label: p for p in builtin_data}
        assert by["circuit:M2"].value == by["circuit:M1"].value - 4
        assert by["circuit:M1"].power_mw == pytest.approx(1.0)
        assert by["circuit:M2"].power_mw == pytest.approx(0.33)

    def test_synthesis(self):
        grid = [(1, 2.0, "tapered", "r_onoff_db"), (5, 2.0, "tapered", "r_onoff_db"),
                (20, 2.0, "through", "phase_deg"), (40, 0.5, "through", "r_onoff_db")]
        data = synthesize_dataset(TRUTH, grid)
        assert len(data) == 4
        assert objective(TRUTH, data) == 0.0

    def test_seeded_noise(self):
        a = synthesize_dataset(TRUTH, SMALL_GRID, noise_db=0.5, seed=4)
        b = synthesize_dataset(TRUTH, SMALL_GRID, noise_db=0.5, seed=4)
        c = synthesize_dataset(TRUTH, SMALL_GRID, noise_db=0.5, seed=5)
        assert a == b and a != c
        assert 0.2 < objective(TRUTH, a) < 1.0

    def test_empty_grid(self):
        with pytest.raises(ValueError):
            synthesize_dataset(TRUTH, [])

    @pytest.mark.parametrize(
        "kw", [dict(freq_ghz=0), dict(power_mw=-1), dict(weight=0), dict(device_type="x"), dict(observable="gain")]
    )
    def test_point_validation(self, kw):
        args = dict(freq_ghz=1, power_mw=1, device_type="tapered", observable="r_onoff_db", value=0) | kw
        with pytest.raises(ValueError):
            DataPoint(**args)


class TestFit:
    def test_budget_floor(self, builtin_data):
        with pytest.raises(ValueError, match="at least 100"):
            fit(builtin_data, budget=99)

    def test_too_few_points(self):
        data = CalibrationDataset((DataPoint(5, 2.0, "tapered", "r_onoff_db", 20.0),))
        with pytest.raises(ValueError, match="cannot determine"):
            fit(data, free=["eta_tapered", "c_gap"])

    def test_tiny_budget_is_unconverged_with_monotone_trace(self, builtin_data):
        r = fit(builtin_data, budget=100, seed=0, diagnose=False)
        assert not r.converged
        assert r.n_evals <= 100
        assert all(b <= a for a, b in zip(r.trace, r.trace[1:]))
        assert r.rms_error <= r.initial_objective

    def test_result_is_reproducible_and_in_bounds(self, builtin_data):
        a = fit(builtin_data, budget=1500, seed=7, diagnose=False)
        b = fit(builtin_data, budget=1500, seed=7, diagnose=False)
        assert a.best == b.best and a.trace == b.trace
        for name, bound in BOUNDS.items():
            assert bound.lo <= getattr(a.best, name) <= bound.hi

    def test_residuals_recomputable(self, joint_fit, builtin_data):
        assert np.allclose(residuals(joint_fit.best, builtin_data), joint_fit.residuals, atol=1e-9)
        assert objective(joint_fit.best, builtin_data) == pytest.approx(joint_fit.rms_error, abs=1e-12)

    def test_round_trip_from_perturbed_start(self):
        data = synthesize_dataset(TRUTH)
        names = ParameterVector.names()
        start = ParameterVector(**{n: min(max(getattr(TRUTH, n) * 2, BOUNDS[n].lo), BOUNDS[n].hi) if getattr(TRUTH, n) else 1.0
                                   for n in names})
        r = fit(data, start, budget=10_000, seed=0, free=names, diagnose=False)
        assert r.rms_error < 0.05
        ident = identifiability(TRUTH, data, names)["identifiable"]
        assert {"eta_tapered*tau/c_gap", "c_contact/c_gap", "loop_ohms*c_gap", "p_sat"} <= set(ident)
        got, want = quantity_values(r.best), quantity_values(TRUTH)
        for q in ident:
            assert got[q] == pytest.approx(want[q], rel=0.05), q

    def test_summary_fit(self, summary_fit):
        assert summary_fit.rms_error <= 3.0
        assert summary_fit.free == ("eta_tapered", "c_gap", "r_contact", "c_contact")

    @pytest.mark.parametrize("which", ["summary_fit", "joint_fit"])
    def test_fitted_extinction_falls_with_frequency(self, which, request):
        best = request.getfixturevalue(which).best
        sw = SwitchInstance.from_model("T", "tapered", best.models()["tapered"])
        r = power_sweep(sw, [2.0], np.linspace(1e9, 40e9, 400)).r_onoff[0]
        assert np.all(np.diff(r) < 0)


class TestFreeParameters:
    def test_default_free_for_builtin_data(self, builtin_data):
        assert default_free(builtin_data) == ("eta_tapered", "eta_through", "p_sat", "c_gap", "r_contact", "c_contact")

    def test_single_power_fixes_saturation(self, builtin_data):
        free = default_free(builtin_data.subset(lambda p: p.label == "summary"))
        assert "p_sat" not in free and "eta_through" not in free


class TestIdentifiability:
    def test_exact_degeneracies_are_reported(self):
        data = synthesize_dataset(TRUTH)
        diag = identifiability(TRUTH, data, ParameterVector.names())
        assert set(diag["non_identifiable"]) >= {"tau", "c_gap", "eta_tapered*tau", "r_contact"}
        assert "alpha_line" not in diag["profile_db"]  # zero in TRUTH, so no relative change to profile
        # one direction per exact symmetry: line loss, eta-tau trade, loop impedance scaling
        assert len(diag["degenerate_directions"]) == 3
        assert any(set(d) == {"alpha_line"} for d in diag["degenerate_directions"])

    def test_profiles_are_non_negative(self, joint_fit):
        assert all(v >= 0 for v in joint_fit.diagnostics["profile_db"].values())
        assert joint_fit.diagnostics["rel_change"] == 0.05

    def test_loop_scaling_symmetry(self):
        # scaling every series-loop impedance by k, including the 100 ohm port loop, leaves ratios
        # alone; only the fixed dark conductance breaks the symmetry, far below any data resolution
        data = synthesize_dataset(TRUTH, SMALL_GRID)
        k = 1.7
        loop = 100.0 + TRUTH.r_contact
        scaled = ParameterVector(
            eta_tapered=TRUTH.eta_tapered / k, eta_through=TRUTH.eta_through / k, tau=TRUTH.tau,
            p_sat=TRUTH.p_sat, c_gap=TRUTH.c_gap / k, r_contact=k * loop - 100.0, c_contact=TRUTH.c_contact / k,
        )
        assert objective(scaled, data) < 1e-5
        assert not math.isclose(scaled.c_gap, TRUTH.c_gap)
