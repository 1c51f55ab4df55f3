"""Coefficient model of a nuclear test-function space and its strong dual.

Everything lives in a fixed orthonormal basis truncated to N coordinates.
A test function psi and a dual vector f are both plain coefficient vectors
and the canonical pairing <f, psi> is the coordinate dot product.  The
topology is modeled by an increasing family of weighted l2 seminorms

    p_r(psi)^2 = sum_k w_k^(r) psi_k^2,        w_k^(r) <= w_k^(s) for r <= s,

whose duals are the inverse-weight norms p_r'(f)^2 = sum_k f_k^2 / w_k^(r).
The default weight profile w_k^(r) = (2k + d)^(2r) mirrors the Hermite-style
hierarchy of rapidly decreasing sequences.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch, LevelRangeError, ModelError


def as_coeffs(x) -> np.ndarray:
    """Coefficient array of a TestFunction / DualVector / array-like."""
    arr = x.coeffs if hasattr(x, "coeffs") else x
    arr = np.asarray(arr, dtype=float)
    if arr.ndim != 1:
        raise DimensionMismatch(f"expected a coefficient vector, got shape {arr.shape}")
    return arr


def _validated(arr, kind: str) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    if arr.ndim != 1 or arr.size < 1:
        raise ModelError(f"{kind} must be a nonempty 1-D vector, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ModelError(f"{kind} has non-finite entries")
    arr = arr.copy()
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TestFunction:
    """Element of the test-function space, as basis coefficients."""

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _validated(self.coeffs, "TestFunction"))

    @property
    def dim(self) -> int:
        return self.coeffs.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coeffs, dtype=dtype)


@dataclass(frozen=True)
class DualVector:
    """Element of the strong dual, as basis coefficients."""

    coeffs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "coeffs", _validated(self.coeffs, "DualVector"))

    @property
    def dim(self) -> int:
        return self.coeffs.size

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.coeffs, dtype=dtype)


@dataclass(frozen=True)
class SeminormFamily:
    """Increasing hierarchy of Hilbertian seminorm weights.

    `weights[r, k]` is the level-r weight of coordinate k.  Levels are ordered:
    weights never decrease with the level, so p_r <= p_s for r <= s.
    """

    weights: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
            raise ModelError(f"weights must be a (levels, dim) matrix, got shape {w.shape}")
        if not np.all(np.isfinite(w)) or not np.all(w > 0):
            raise ModelError("seminorm weights must be finite and strictly positive")
        if np.any(np.diff(w, axis=0) < 0):
            raise ModelError("seminorm weights must be nondecreasing in the level")
        w = w.copy()
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)

    @classmethod
    def hermite(cls, dim: int, levels: int, d: int = 1) -> "SeminormFamily":
        """Weight profile w_k^(r) = (2k + d)^(2r), r = 0..levels."""
        if dim < 1 or levels < 0 or d < 1:
            raise ModelError("hermite family needs dim >= 1, levels >= 0, d >= 1")
        base = 2.0 * np.arange(dim) + float(d)
        r = np.arange(levels + 1)[:, None]
        return cls(base[None, :] ** (2.0 * r))

    @property
    def dim(self) -> int:
        return self.weights.shape[1]

    @property
    def max_level(self) -> int:
        return self.weights.shape[0] - 1

    def weight(self, r: int) -> np.ndarray:
        if not 0 <= r <= self.max_level:
            raise LevelRangeError(f"level {r} outside 0..{self.max_level}")
        return self.weights[r]


def pairing(f, phi) -> float:
    """Canonical pairing <f, phi> = sum_k f_k phi_k."""
    fa, pa = as_coeffs(f), as_coeffs(phi)
    if fa.size != pa.size:
        raise DimensionMismatch(f"pairing of lengths {fa.size} and {pa.size}")
    return float(fa @ pa)


def seminorm(family: SeminormFamily, r: int, phi) -> float:
    """Level-r seminorm sqrt(sum_k w_k^(r) phi_k^2)."""
    pa = as_coeffs(phi)
    w = family.weight(r)
    if pa.size != w.size:
        raise DimensionMismatch(f"vector length {pa.size} vs family dim {w.size}")
    return float(np.sqrt(np.sum(w * pa * pa)))


def dual_seminorm(family: SeminormFamily, r: int, f) -> float:
    """Dual norm at level r: sqrt(sum_k f_k^2 / w_k^(r))."""
    fa = as_coeffs(f)
    w = family.weight(r)
    if fa.size != w.size:
        raise DimensionMismatch(f"vector length {fa.size} vs family dim {w.size}")
    return float(np.sqrt(np.sum(fa * fa / w)))


def hs_embedding_norm(family: SeminormFamily, p: int, q: int) -> float:
    """Hilbert-Schmidt norm of the level-q-into-level-p inclusion.

    In coordinates the inclusion has HS norm sqrt(sum_k w_k^(p) / w_k^(q));
    requires p <= q.
    """
    if p > q:
        raise LevelRangeError(f"embedding needs p <= q, got p={p}, q={q}")
    wp, wq = family.weight(p), family.weight(q)
    return float(np.sqrt(np.sum(wp / wq)))
