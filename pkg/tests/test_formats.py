import os

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from morims.calibration import ParameterVector, builtin_paper_dataset
from morims.device import SwitchInstance, power_sweep, simulate_circuit
from morims.formats import (
    SWEEP_COLUMNS,
    FormatError,
    atomic_write,
    read_dataset,
    read_params,
    read_touchstone,
    write_dataset,
    write_params,
    write_sweep_csv,
    write_touchstone,
)
from morims.netlist import CASCADE_NETLIST, parse_netlist
from morims.rf_network import SParameters, abcd_series, abcd_to_s


class TestTouchstone:
    def test_series_fifty_ohm(self):
        text = write_touchstone(abcd_to_s(abcd_series(50.0, 1e9)).split())
        header, line = text.splitlines()
        assert header == "# GHz S RI R 50"
        assert line.split() == ["1", "0.333333333", "0", "0.666666667", "0", "0.666666667", "0", "0.333333333", "0"]

    def test_empty(self):
        with pytest.raises(ValueError):
            write_touchstone([])

    def test_unsorted(self):
        recs = [SParameters(0, 1, 1, 0, 2e9), SParameters(0, 1, 1, 0, 1e9)]
        with pytest.raises(ValueError, match="ascending"):
            write_touchstone(recs)

    def test_negative_zero_is_normalised(self):
        text = write_touchstone([SParameters(-0.0, 1, 1, complex(0, -0.0), 1e9)])
        assert "-0" not in text

    @given(
        st.lists(
            st.tuples(*[st.complex_numbers(max_magnitude=1, allow_nan=False)] * 4),
            min_size=1,
            max_size=20,
        )
    )
    def test_round_trip(self, rows):
        f = np.arange(1, len(rows) + 1) * 1e8
        recs = [SParameters(a, b, c, d, fi) for (a, b, c, d), fi in zip(rows, f)]
        back = read_touchstone(write_touchstone(recs))
        assert np.allclose(back.freq, f, rtol=1e-8)
        for name in ("s11", "s12", "s21", "s22"):
            want = np.array([getattr(r, name) for r in recs])
            assert np.allclose(getattr(back, name), want, rtol=0, atol=1e-8)

    def test_reader_formats(self):
        text = "! comment\n# MHz S MA R 50\n1000 0.5 90 1 0 1 0 0.5 -90\n"
        s = read_touchstone(text)
        assert s.freq[0] == 1e9
        assert s.s11[0] == pytest.approx(0.5j)
        db = read_touchstone("# GHz S DB R 75\n1 -6.0206 0 0 0 0 0 0 0\n")
        assert db.s11[0] == pytest.approx(0.5, rel=1e-5) and db.z0 == 75

    def test_reader_errors(self):
        with pytest.raises(FormatError, match="9 numbers"):
            read_touchstone("# GHz S RI R 50\n1 0 0\n")
        with pytest.raises(FormatError, match="no data"):
            read_touchstone("# GHz S RI R 50\n")


class TestSweepCsv:
    def test_one_point(self):
        sw = SwitchInstance("T", "tapered")
        text = write_sweep_csv(power_sweep(sw, [1.0], [5e9]).results)
        lines = text.splitlines()
        assert len(lines) == 2
        assert lines[0] == ",".join(SWEEP_COLUMNS)
        assert len(lines[1].split(",")) == 7

    def test_power_grid_rows_and_order(self):
        sw = SwitchInstance("T", "tapered")
        powers = np.linspace(0, 4, 9)
        text = write_sweep_csv(reversed(power_sweep(sw, powers, [5e9, 20e9, 40e9]).results))
        rows = [line.split(",") for line in text.splitlines()[1:]]
        assert len(rows) == 3 * 9
        keys = [(r[0], float(r[1]), float(r[2])) for r in rows]
        assert keys == sorted(keys)
        assert all(len(r) == 7 for r in rows)

    def test_circuit_rows_sorted_by_switch(self):
        res = simulate_circuit(parse_netlist(CASCADE_NETLIST), [1e9, 2e9], 2.0)
        ids = [line.split(",")[0] for line in write_sweep_csv(res.values()).splitlines()[1:]]
        assert ids == ["M1", "M1", "M2", "M2", "M3", "M3"]

    def test_empty(self):
        with pytest.raises(ValueError):
            write_sweep_csv([])


class TestParams:
    @given(st.lists(st.floats(0, 1), min_size=8, max_size=8))
    def test_round_trip_is_exact(self, u):
        p = ParameterVector().from_unit(u, ParameterVector.names())
        assert read_params(write_params(p)) == p

    def test_layout(self):
        line = write_params(ParameterVector()).splitlines()[3]
        assert line.startswith("p_sat") and line.endswith("# mW") and " = 1.5 " in line

    def test_partial_file_keeps_defaults(self):
        p = read_params("# header\nc_gap = 3.5  # fF\n\n")
        assert p.c_gap == 3.5 and p.tau == ParameterVector().tau

    @pytest.mark.parametrize(
        "text, message, line",
        [
            ("c_gap 3", "key = value", 1),
            ("\nwidth = 3", "unknown parameter", 2),
            ("c_gap = x", "not a number", 1),
            ("c_gap = 1\nc_gap = 2", "given twice", 2),
        ],
    )
    def test_errors(self, text, message, line):
        with pytest.raises(FormatError, match=message) as err:
            read_params(text, path="p.txt")
        assert err.value.line == line
        assert str(err.value).startswith(f"p.txt:{line}:")

    def test_out_of_bounds(self):
        with pytest.raises(FormatError, match="outside bounds"):
            read_params("p_sat = 100")


class TestDataset:
    def test_round_trip(self):
        data = builtin_paper_dataset()
        back = read_dataset(write_dataset(data))
        assert [(p.freq_ghz, p.device_type, p.observable, p.value, p.weight) for p in back] == [
            (p.freq_ghz, p.device_type, p.observable, p.value, p.weight) for p in data
        ]
        assert all(b.power_mw == pytest.approx(a.power_mw, rel=1e-8) for a, b in zip(data, back))

    def test_missing_column(self):
        with pytest.raises(FormatError, match="weight"):
            read_dataset("freq_ghz,power_mw,device_type,observable,value\n1,2,tapered,r_onoff_db,3\n")

    def test_bad_row_names_line(self):
        text = "freq_ghz,power_mw,device_type,observable,value,weight\n1,2,tapered,r_onoff_db,3,1\n1,2,bogus,r_onoff_db,3,1\n"
        with pytest.raises(FormatError) as err:
            read_dataset(text)
        assert err.value.line == 3

    def test_empty(self):
        with pytest.raises(FormatError):
            read_dataset(",".join(["freq_ghz", "power_mw", "device_type", "observable", "value", "weight"]) + "\n")


class TestAtomicWrite:
    def test_writes_and_replaces(self, tmp_path):
        path = tmp_path / "out.txt"
        atomic_write(path, "one")
        atomic_write(path, "two")
        assert path.read_text() == "two"
        assert os.listdir(tmp_path) == ["out.txt"]

    def test_failure_leaves_no_trace(self, tmp_path, monkeypatch):
        path = tmp_path / "out.txt"
        path.write_text("old")

        def boom(*a):
            raise OSError("disk full")

        monkeypatch.setattr(os, "replace", boom)
        with pytest.raises(OSError):
            atomic_write(path, "new")
        assert path.read_text() == "old"
        assert os.listdir(tmp_path) == ["out.txt"]
