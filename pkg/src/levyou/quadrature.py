"""Composite Simpson rules and exponential phi-functions.

All deterministic time integrals in the package go through these helpers so
that weak and strong evaluations of the same integral share nodes and weights
exactly.
"""

from __future__ import annotations

from typing import Callable

import numpy as np


def simpson_nodes_weights(a: float, b: float, panels: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the composite Simpson rule on [a, b].

    `panels` Simpson panels use 2*panels + 1 nodes; the rule is exact for
    polynomials of degree <= 3 on each panel.
    """
    if panels < 1:
        raise ValueError("panels must be >= 1")
    n = 2 * panels
    nodes = np.linspace(a, b, n + 1)
    weights = np.empty(n + 1)
    weights[0] = weights[-1] = 1.0
    weights[1:-1:2] = 4.0
    weights[2:-1:2] = 2.0
    weights *= (b - a) / (3.0 * n)
    return nodes, weights


def simpson(fn: Callable[[float], np.ndarray], a: float, b: float, panels: int) -> np.ndarray:
    """Composite Simpson integral of a scalar- or vector-valued function."""
    if b == a:
        return 0.0 * np.asarray(fn(a), dtype=float)
    nodes, weights = simpson_nodes_weights(a, b, panels)
    vals = np.stack([np.asarray(fn(s), dtype=float) for s in nodes])
    return np.tensordot(weights, vals, axes=(0, 0))


def phi1(z: np.ndarray) -> np.ndarray:
    """(e^z - 1) / z, stable near z = 0."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-6
    zs = np.where(small, 1.0, z)
    out = np.where(small, 1.0 + z / 2.0 + z * z / 6.0 + z**3 / 24.0, np.expm1(zs) / zs)
    return out


def phi2(z: np.ndarray) -> np.ndarray:
    """(e^z - 1 - z) / z^2, stable near z = 0."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-5
    zs = np.where(small, 1.0, z)
    out = np.where(
        small,
        0.5 + z / 6.0 + z * z / 24.0 + z**3 / 120.0,
        (np.expm1(zs) - zs) / (zs * zs),
    )
    return out


def exp_int(a: np.ndarray, h: float) -> np.ndarray:
    """Componentwise integral of e^{a u} for u in [0, h]: h * phi1(a h)."""
    return h * phi1(np.asarray(a, dtype=float) * h)


def exp_int2(a: np.ndarray, h: float) -> np.ndarray:
    """Componentwise integral of (e^{a u} - 1)/a for u in [0, h]: h^2 * phi2(a h)."""
    return h * h * phi2(np.asarray(a, dtype=float) * h)
