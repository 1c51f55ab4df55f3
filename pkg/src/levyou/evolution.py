"""Backward evolution systems U(s, t) and their generator families.

Variants:

  * DiagonalHomogeneous(a):      U(s,t) = diag exp(a_k (t - s)),  exact.
  * DiagonalTimeDependent(a(t)): U(s,t) = diag exp(int_s^t a_k),  exponent by
                                 adaptive quadrature, exact cocycle up to the
                                 quadrature tolerance.
  * GeneralMatrix(A(t), dt):     time-ordered product of matrix exponentials
                                 of the midpoint-evaluated generator over
                                 substeps (order-2 Magnus stepping).
  * Perturbed(base, D(t), dt):   direct stepping on A(t) + D(t).

All variants satisfy U(t,t) = I exactly and honor the forward equation
d/dt U(s,t) psi = U(s,t) A(t) psi; the dual (forward-system) action is the
transpose in coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad_vec
from scipy.linalg import expm

from .errors import DimensionMismatch, LevelRangeError, TimeOrderError
from .quadrature import simpson
from .spaces import SeminormFamily, as_coeffs, seminorm


class GeneratorFamily:
    """Time-indexed family A(t) of bounded operators, as matrices."""

    def __init__(self, matrix_fn: Callable[[float], np.ndarray], dim: int):
        self._fn = matrix_fn
        self.dim = dim

    def matrix(self, t: float) -> np.ndarray:
        a = np.asarray(self._fn(t), dtype=float)
        if a.shape != (self.dim, self.dim):
            raise DimensionMismatch(f"generator matrix has shape {a.shape}, expected ({self.dim}, {self.dim})")
        return a

    def apply(self, t: float, psi) -> np.ndarray:
        return self.matrix(t) @ as_coeffs(psi)

    @classmethod
    def constant(cls, matrix: np.ndarray) -> "GeneratorFamily":
        m = np.asarray(matrix, dtype=float)
        return cls(lambda t: m, m.shape[0])


class EvolutionSystem:
    """Base class; concrete variants implement `dual_factors` or `matrix`."""

    dim: int

    def is_diagonal(self) -> bool:
        return False

    def matrix(self, s: float, t: float) -> np.ndarray:
        raise NotImplementedError

    def apply(self, s: float, t: float, psi) -> np.ndarray:
        _check_order(s, t)
        return self.matrix(s, t) @ as_coeffs(psi)

    def apply_dual(self, t: float, s: float, f) -> np.ndarray:
        _check_order(s, t)
        return self.matrix(s, t).T @ as_coeffs(f)

    def generator(self) -> GeneratorFamily:
        raise NotImplementedError


def _check_order(s: float, t: float):
    if s < 0 or s > t:
        raise TimeOrderError(f"need 0 <= s <= t, got s={s}, t={t}")


@dataclass(frozen=True)
class DiagonalHomogeneous(EvolutionSystem):
    """Constant diagonal generator a; U(s,t) = diag exp(a (t-s))."""

    a: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.a, dtype=float).reshape(-1).copy()
        a.setflags(write=False)
        object.__setattr__(self, "a", a)

    @property
    def dim(self) -> int:
        return self.a.size

    def is_diagonal(self) -> bool:
        return True

    def exponent(self, s: float, t: float) -> np.ndarray:
        return self.a * (t - s)

    def factors(self, s: float, t: float) -> np.ndarray:
        return np.exp(self.a * (t - s))

    def matrix(self, s: float, t: float) -> np.ndarray:
        return np.diag(self.factors(s, t))

    def apply(self, s: float, t: float, psi) -> np.ndarray:
        _check_order(s, t)
        return self.factors(s, t) * as_coeffs(psi)

    def apply_dual(self, t: float, s: float, f) -> np.ndarray:
        _check_order(s, t)
        return self.factors(s, t) * as_coeffs(f)

    def generator(self) -> GeneratorFamily:
        return GeneratorFamily.constant(np.diag(self.a))


@dataclass(frozen=True)
class DiagonalTimeDependent(EvolutionSystem):
    """Diagonal generator a(t); exponents are integrals of the coefficients."""

    coeff: Callable[[float], np.ndarray]
    n: int
    quad_tol: float = 1e-13

    @property
    def dim(self) -> int:
        return self.n

    def is_diagonal(self) -> bool:
        return True

    def exponent(self, s: float, t: float) -> np.ndarray:
        if t == s:
            return np.zeros(self.n)
        val, _ = quad_vec(
            lambda r: np.asarray(self.coeff(r), dtype=float),
            s,
            t,
            epsabs=self.quad_tol,
            epsrel=self.quad_tol,
        )
        return val

    def factors(self, s: float, t: float) -> np.ndarray:
        return np.exp(self.exponent(s, t))

    def matrix(self, s: float, t: float) -> np.ndarray:
        return np.diag(self.factors(s, t))

    def apply(self, s: float, t: float, psi) -> np.ndarray:
        _check_order(s, t)
        return self.factors(s, t) * as_coeffs(psi)

    def apply_dual(self, t: float, s: float, f) -> np.ndarray:
        _check_order(s, t)
        return self.factors(s, t) * as_coeffs(f)

    def generator(self) -> GeneratorFamily:
        return GeneratorFamily(lambda t: np.diag(np.asarray(self.coeff(t), dtype=float)), self.n)


@dataclass(frozen=True)
class GeneralMatrix(EvolutionSystem):
    """Arbitrary bounded generator family A(t), stepped with substep `dt`.

    Each substep applies exp(h A(midpoint)); the scheme is order 2, so the
    cocycle identity holds up to O(dt^2) and tightens by ~4x when dt halves.
    """

    a_fn: Callable[[float], np.ndarray]
    n: int
    dt: float

    @property
    def dim(self) -> int:
        return self.n

    def matrix(self, s: float, t: float) -> np.ndarray:
        _check_order(s, t)
        if t == s:
            return np.eye(self.n)
        steps = max(1, int(np.ceil((t - s) / self.dt - 1e-12)))
        h = (t - s) / steps
        u = np.eye(self.n)
        for j in range(steps):
            mid = s + (j + 0.5) * h
            u = u @ expm(h * np.asarray(self.a_fn(mid), dtype=float))
        return u

    def generator(self) -> GeneratorFamily:
        return GeneratorFamily(lambda t: np.asarray(self.a_fn(t), dtype=float), self.n)


@dataclass(frozen=True)
class Perturbed(EvolutionSystem):
    """System generated by A(t) + D(t), stepped like GeneralMatrix."""

    base: EvolutionSystem
    d_fn: Callable[[float], np.ndarray]
    dt: float

    @property
    def dim(self) -> int:
        return self.base.dim

    def _total(self, t: float) -> np.ndarray:
        return self.base.generator().matrix(t) + np.asarray(self.d_fn(t), dtype=float)

    def matrix(self, s: float, t: float) -> np.ndarray:
        _check_order(s, t)
        if t == s:
            return np.eye(self.dim)
        steps = max(1, int(np.ceil((t - s) / self.dt - 1e-12)))
        h = (t - s) / steps
        u = np.eye(self.dim)
        for j in range(steps):
            u = u @ expm(h * self._total(s + (j + 0.5) * h))
        return u

    def generator(self) -> GeneratorFamily:
        return GeneratorFamily(self._total, self.dim)


def heat_like(n: int) -> DiagonalHomogeneous:
    """Heat-flow-style contraction: eigenvalue -k^2 on the k-th mode."""
    return DiagonalHomogeneous(-(np.arange(n, dtype=float) ** 2))


def apply_U(system: EvolutionSystem, s: float, t: float, psi) -> np.ndarray:
    """Backward-system action U(s, t) psi."""
    return system.apply(s, t, psi)


def apply_U_dual(system: EvolutionSystem, t: float, s: float, f) -> np.ndarray:
    """Dual (forward-system) action: <U(t,s)' f, psi> = <f, U(s,t) psi>."""
    return system.apply_dual(t, s, f)


def forward_residual(
    system: EvolutionSystem,
    gen: GeneratorFamily,
    u: float,
    t: float,
    psi,
    panels: int = 64,
) -> float:
    """Euclidean norm of U(u,t)psi - psi - int_u^t U(u,s) A(s) psi ds (Simpson)."""
    _check_order(u, t)
    p = as_coeffs(psi)
    if t == u:
        return 0.0
    integral = simpson(lambda s: system.apply(u, s, gen.apply(s, p)), u, t, panels)
    return float(np.linalg.norm(system.apply(u, t, p) - p - integral))


def backward_residual(
    system: EvolutionSystem,
    gen: GeneratorFamily,
    u: float,
    t: float,
    psi,
    panels: int = 64,
) -> float:
    """Same as forward_residual with integrand A(s) U(s,t) psi."""
    _check_order(u, t)
    p = as_coeffs(psi)
    if t == u:
        return 0.0
    integral = simpson(lambda s: gen.apply(s, system.apply(s, t, p)), u, t, panels)
    return float(np.linalg.norm(system.apply(u, t, p) - p - integral))


def cocycle_residual(system: EvolutionSystem, s: float, r: float, t: float, psi) -> float:
    """Euclidean norm of U(s,r) U(r,t) psi - U(s,t) psi."""
    if not s <= r <= t:
        raise TimeOrderError(f"need s <= r <= t, got {s}, {r}, {t}")
    p = as_coeffs(psi)
    return float(np.linalg.norm(system.apply(s, r, system.apply(r, t, p)) - system.apply(s, t, p)))


@dataclass(frozen=True)
class ExponentialBoundReport:
    """Result of the sampled operator-bound search p(U(s,t)psi) <= e^{theta (t-s)} q(psi)."""

    theta: float
    q_level: int
    margin: float
    certified: bool


def c01_bound_report(
    system: EvolutionSystem,
    family: SeminormFamily,
    p_level: int,
    horizon: float,
    n_times: int = 9,
    theta_cap: float = 1e3,
) -> ExponentialBoundReport:
    """Search levels q >= p for the smallest growth rate theta certifying the bound.

    The bound is sampled on an (s, t) grid and the canonical basis; this is a
    diagnostic, not a proof.  When even the top level needs theta above the cap
    the report comes back uncertified rather than raising.
    """
    if not 0 <= p_level <= family.max_level:
        raise LevelRangeError(f"level {p_level} outside 0..{family.max_level}")
    times = np.linspace(0.0, horizon, n_times)
    probes = np.eye(family.dim)
    for q in range(p_level, family.max_level + 1):
        theta_req = 0.0
        feasible = True
        for i, s in enumerate(times):
            for t in times[i:]:
                for k in range(family.dim):
                    pu = seminorm(family, p_level, system.apply(s, t, probes[k]))
                    qv = seminorm(family, q, probes[k])
                    if t == s:
                        if pu > qv * (1 + 1e-12):
                            feasible = False
                        continue
                    if pu > qv:
                        theta_req = max(theta_req, np.log(pu / qv) / (t - s))
        if feasible and theta_req <= theta_cap:
            margin = np.inf
            for i, s in enumerate(times):
                for t in times[i:]:
                    for k in range(family.dim):
                        pu = seminorm(family, p_level, system.apply(s, t, probes[k]))
                        qv = seminorm(family, q, probes[k])
                        margin = min(margin, np.exp(theta_req * (t - s)) * qv - pu)
            return ExponentialBoundReport(float(theta_req), q, float(margin), True)
    return ExponentialBoundReport(float("nan"), -1, float("nan"), False)


def perturbed_system(
    base: EvolutionSystem, d_fn: Callable[[float], np.ndarray], dt: float
) -> Perturbed:
    """System generated by A(t) + D(t), with A(t) taken from `base`."""
    d0 = np.asarray(d_fn(0.0), dtype=float)
    if d0.shape != (base.dim, base.dim):
        raise DimensionMismatch(f"perturbation matrix has shape {d0.shape}, expected square of dim {base.dim}")
    return Perturbed(base, d_fn, dt)


def perturbation_residual(
    pert: Perturbed, s: float, t: float, psi, panels: int = 64
) -> float:
    """Residual of V(s,t)psi = U(s,t)psi + int_s^t U(s,r) D(r) V(r,t) psi dr."""
    _check_order(s, t)
    p = as_coeffs(psi)
    if t == s:
        return 0.0
    integral = simpson(
        lambda r: pert.base.apply(s, r, np.asarray(pert.d_fn(r), dtype=float) @ pert.apply(r, t, p)),
        s,
        t,
        panels,
    )
    return float(np.linalg.norm(pert.apply(s, t, p) - pert.base.apply(s, t, p) - integral))
