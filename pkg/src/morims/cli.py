"""Command-line entry points.

Exit status is 0 on success, 1 for usage errors and 2 for invalid input
files or values.  Output files are written only once everything succeeded.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

import numpy as np

from . import calibration, formats
from .device import SwitchModel, simulate_circuit
from .netlist import NetlistError, parse_netlist
from .optical_network import NetworkError, OpticalGraph, build_network, propagate
from .rf_network import FrequencyGrid, SingularNetwork

EXIT_OK, EXIT_USAGE, EXIT_INPUT = 0, 1, 2


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _range(text: str, what: str) -> tuple[float, float, int]:
    parts = text.split(":")
    if len(parts) != 3:
        raise UsageError(f"{what} must look like start:stop:points, got {text!r}")
    try:
        start, stop, n = float(parts[0]), float(parts[1]), int(parts[2])
    except ValueError:
        raise UsageError(f"{what}: cannot parse {text!r}") from None
    if n < 1:
        raise InputError(f"{what}: need at least one point")
    if n > 1 and not start < stop:
        raise InputError(f"{what}: start must be below stop")
    return start, stop, n


def _read_text(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror or exc}") from None


def _load_graph(path: str) -> OpticalGraph:
    try:
        return build_network(parse_netlist(_read_text(path)))
    except (NetlistError, NetworkError) as exc:
        raise InputError(f"{path}:{exc}" if getattr(exc, "line", None) else f"{path}: {exc}") from None


def _load_models(path: str | None) -> dict[str, SwitchModel] | None:
    if path is None:
        return None
    return formats.read_params(_read_text(path), path=path).models()


def _freq_grid(text: str, spacing: str) -> FrequencyGrid:
    f0, f1, n = _range(text, "--sweep")
    if f0 <= 0:
        raise InputError("--sweep: frequencies must be positive")
    if n == 1:
        return FrequencyGrid([f0 * 1e9])
    make = FrequencyGrid.log if spacing == "log" else FrequencyGrid.linear
    return make(f0 * 1e9, f1 * 1e9, n)


def _cmd_sim(args) -> int:
    graph = _load_graph(args.netlist)
    if not graph.taps:
        raise InputError(f"{args.netlist}: netlist has no switches")
    grid = _freq_grid(args.sweep, args.spacing)
    if args.power is not None and args.power < 0:
        raise InputError("--power must be >= 0")
    results = simulate_circuit(graph, grid, args.power, _load_models(args.params))

    if args.format == "csv":
        outputs = {args.out: formats.write_sweep_csv(results.values())}
    else:
        if len(results) == 1:
            outputs = {args.out: formats.write_touchstone(next(iter(results.values())).s_on)}
        else:
            if args.out is None:
                raise UsageError("--format s2p with several switches needs --out")
            out = Path(args.out)
            outputs = {
                str(out.with_name(f"{out.stem}_{sid}{out.suffix or '.s2p'}")): formats.write_touchstone(r.s_on)
                for sid, r in sorted(results.items())
            }
    _emit(outputs)
    return EXIT_OK


def _cmd_power_sweep(args) -> int:
    graph = _load_graph(args.netlist)
    if args.switch not in graph.taps:
        raise InputError(f"{args.netlist}: no switch named {args.switch!r}")
    p0, p1, n = _range(args.powers, "--powers")
    if p0 < 0:
        raise InputError("--powers must be >= 0")
    try:
        freqs = sorted(float(f) * 1e9 for f in args.freqs.split(","))
    except ValueError:
        raise UsageError(f"--freqs: cannot parse {args.freqs!r}") from None
    grid = FrequencyGrid(freqs)
    models = _load_models(args.params)
    results = [
        simulate_circuit(graph, grid, float(p), models)[args.switch]
        for p in np.linspace(p0, p1, n)
    ]
    _emit({args.out: formats.write_sweep_csv(results)})
    return EXIT_OK


def _cmd_fit(args) -> int:
    if args.data is None:
        data = calibration.builtin_paper_dataset()
    else:
        data = formats.read_dataset(_read_text(args.data), path=args.data)
    initial = formats.read_params(_read_text(args.init), path=args.init) if args.init else None
    result = calibration.fit(data, initial, budget=args.budget, seed=args.seed, diagnose=False)
    header = (
        f"# weighted rms residual = {result.rms_error:.6g} dB over {len(data)} points\n"
        f"# evaluations = {result.n_evals}, converged = {result.converged}\n"
        f"# free: {', '.join(result.free)}\n"
    )
    _emit({args.out_params: header + formats.write_params(result.best)})
    print(f"rms {result.rms_error:.4f} dB after {result.n_evals} evaluations", file=sys.stderr)
    return EXIT_OK


def _cmd_validate(args) -> int:
    graph = _load_graph(args.netlist)
    sol = propagate(graph)
    print(f"{args.netlist}: ok, {len(graph.elements)} elements, {len(graph.taps)} switches")
    for sid in graph.taps:
        el = graph.elements[sid]
        print(f"  {sid} {el.device_type}: incident {sol.incident[sid]:.6g} mW, absorbed {sol.absorbed[sid]:.6g} mW")
    return EXIT_OK


def _emit(outputs: dict[str | None, str]) -> None:
    for path, text in outputs.items():
        if path is None or path == "-":
            sys.stdout.write(text)
        else:
            formats.atomic_write(path, text)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="morims", description="Optically controlled microwave switch simulator")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("sim", help="On/Off S-parameters of every switch in a netlist")
    s.add_argument("netlist")
    s.add_argument("--sweep", required=True, help="f0:f1:n in GHz")
    s.add_argument("--spacing", choices=("linear", "log"), default="linear")
    s.add_argument("--power", type=float, help="source power in mW (default: the netlist value)")
    s.add_argument("--out", help="output path (default: stdout)")
    s.add_argument("--format", choices=("s2p", "csv"), default="csv")
    s.add_argument("--params", help="parameter file from 'fit'")
    s.set_defaults(func=_cmd_sim)

    s = sub.add_parser("power-sweep", help="extinction of one switch versus source power")
    s.add_argument("netlist")
    s.add_argument("--switch", required=True)
    s.add_argument("--powers", required=True, help="p0:p1:n in mW")
    s.add_argument("--freqs", required=True, help="comma-separated GHz")
    s.add_argument("--out")
    s.add_argument("--params")
    s.set_defaults(func=_cmd_power_sweep)

    s = sub.add_parser("fit", help="calibrate model parameters against a dataset")
    s.add_argument("--data", help="dataset CSV (default: built-in reference data)")
    s.add_argument("--out-params", required=True)
    s.add_argument("--init", help="starting parameter file")
    s.add_argument("--budget", type=int, default=10_000)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=_cmd_fit)

    s = sub.add_parser("validate", help="check a netlist and report switch powers")
    s.add_argument("netlist")
    s.set_defaults(func=_cmd_validate)
    return p


def main(argv: Sequence[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        return args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InputError, formats.FormatError, SingularNetwork, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
