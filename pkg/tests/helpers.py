"""Shared generators for property tests and the acceptance script."""

from __future__ import annotations

import random

import numpy as np

from morims.optical_network import OpticalElement, build_graph


def random_tree(rnd: random.Random, max_elements: int = 20, lossless: bool = True):
    """Random valid optical network with at most ``max_elements`` elements.

    Elements are attached one at a time to a randomly chosen open net, so
    the result is always a source-rooted tree; unused nets stay open.
    """
    n_total = rnd.randint(1, max_elements)
    power = rnd.uniform(0.0, 10.0)
    elements = [OpticalElement(id="S", kind="source", input_power=power, outputs=("n0",))]
    open_nets = ["n0"]
    counter = 1
    while len(elements) < n_total and open_nets:
        net = open_nets.pop(rnd.randrange(len(open_nets)))
        ident = f"E{len(elements)}"
        loss = 0.0 if lossless else rnd.uniform(0.0, 3.0)
        kind = rnd.choice(("waveguide", "ybranch", "tapered", "through"))
        new = [f"n{counter + i}" for i in range(2)]
        if kind == "waveguide":
            el = OpticalElement(ident, "waveguide", excess_loss=loss, inputs=(net,), outputs=(new[0],))
            outs = new[:1]
        elif kind == "ybranch":
            el = OpticalElement(ident, "ybranch", excess_loss=loss, split_fraction=rnd.random(),
                                inputs=(net,), outputs=tuple(new))
            outs = new
        elif kind == "tapered":
            el = OpticalElement(ident, "tap", device_type="tapered", coupling_fraction=rnd.random(), inputs=(net,))
            outs = []
        else:
            el = OpticalElement(ident, "tap", device_type="through", coupling_fraction=rnd.random(),
                                inputs=(net,), outputs=(new[0],))
            outs = new[:1]
        counter += 2
        elements.append(el)
        open_nets += outs
    rnd.shuffle(elements)  # declaration order must not matter
    return build_graph(elements)


def random_series_chain(rng: np.random.Generator, max_len: int = 5, max_abs: float = 1e5) -> np.ndarray:
    """1..max_len complex impedances with non-negative real part and ``|z| <= max_abs``."""
    n = int(rng.integers(1, max_len + 1))
    mag = max_abs * rng.random(n) ** 3  # cubing puts plenty of weight on small values
    ang = rng.uniform(-np.pi / 2, np.pi / 2, n)
    return mag * np.exp(1j * ang)
