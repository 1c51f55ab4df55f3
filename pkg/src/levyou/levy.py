"""Exact simulation of dual-space-valued Levy processes at desk scale.

A process is specified by its characteristics (m, Q, nu, rho):

    m    drift vector,
    Q    covariance matrix of the Wiener part (variance per unit time),
    nu   a finite atomic jump measure: atoms (rate_i, mark_i),
    rho  the seminorm level classifying jumps as small or large.

An atom is *small* when the dual seminorm of its mark at level rho is <= 1
(closed unit ball convention) and *large* otherwise.  A simulated path splits
into the four components of the pathwise decomposition

    L_t = t m + W_t + [sum of small jumps <= t - t * sum_small rate * mark]
          + [sum of large jumps <= t],

which is cadlag by construction: the Wiener part is sampled on the grid and
held constant between grid points, jump times are kept exactly.

The characteristic functional is

    E e^{i<L_t, phi>} = exp(t * xi(phi)),
    xi(phi) = i<m, phi> - Q(phi)^2 / 2
              + sum_i rate_i (e^{i theta_i} - 1 - i theta_i 1{small_i}),

with theta_i = <mark_i, phi> and Q(phi)^2 = phi' Q phi.  Monte Carlo estimates
of the left side against the closed form on the right are the main law-level
verification used by the test harness.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import ContractError, DimensionMismatch, ModelError, TimeOrderError
from .rng import replica_seed
from .spaces import DualVector, SeminormFamily, as_coeffs, dual_seminorm

_SYM_TOL = 1e-12
_EIG_TOL = -1e-12


def _psd_sqrt(q: np.ndarray) -> np.ndarray:
    """Symmetric PSD square root; rejects asymmetric or indefinite input."""
    if q.ndim != 2 or q.shape[0] != q.shape[1]:
        raise ModelError(f"covariance must be square, got shape {q.shape}")
    scale = max(1.0, float(np.max(np.abs(q))))
    if np.max(np.abs(q - q.T)) > _SYM_TOL * scale:
        raise ModelError("covariance matrix is not symmetric")
    evals, evecs = np.linalg.eigh(0.5 * (q + q.T))
    if np.min(evals) < _EIG_TOL * scale:
        raise ModelError(f"covariance has negative eigenvalue {np.min(evals):.3e}")
    return (evecs * np.sqrt(np.clip(evals, 0.0, None))) @ evecs.T


@dataclass(frozen=True)
class LevyCharacteristics:
    """Characteristics (m, Q, nu, rho) with a finite atomic jump measure.

    `small_jump_eps`, when set, marks the instance as an epsilon-truncation of
    an infinite-activity measure; results derived from it are approximate.
    """

    drift: np.ndarray
    covariance: np.ndarray
    jump_rates: np.ndarray
    jump_marks: np.ndarray
    family: SeminormFamily
    rho_level: int = 0
    small_jump_eps: float | None = None

    # derived, filled in __post_init__
    cov_sqrt: np.ndarray = field(init=False, repr=False)
    small_mask: np.ndarray = field(init=False, repr=False)
    small_rate_vector: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        drift = np.asarray(self.drift, dtype=float)
        cov = np.asarray(self.covariance, dtype=float)
        rates = np.asarray(self.jump_rates, dtype=float).reshape(-1)
        marks = np.asarray(self.jump_marks, dtype=float)
        if marks.size == 0:
            marks = marks.reshape(0, drift.size)
        if marks.ndim != 2:
            raise ModelError(f"jump marks must be a (n_atoms, dim) matrix, got {marks.shape}")
        n = drift.size
        if cov.shape != (n, n) or marks.shape[1] != n or self.family.dim != n:
            raise DimensionMismatch("characteristics blocks have inconsistent dimensions")
        if rates.size != marks.shape[0]:
            raise DimensionMismatch("one rate per jump atom required")
        if not (np.all(np.isfinite(drift)) and np.all(np.isfinite(cov)) and np.all(np.isfinite(marks))):
            raise ModelError("characteristics contain non-finite entries")
        if rates.size and (np.any(rates <= 0) or not np.all(np.isfinite(rates))):
            raise ModelError("every jump rate must be finite and > 0")
        if rates.size and np.any(np.all(marks == 0.0, axis=1)):
            raise ModelError("jump marks must be nonzero (nu({0}) = 0)")
        self.family.weight(self.rho_level)  # validates the level
        cov_sqrt = _psd_sqrt(cov)

        # closed-ball convention: dual norm <= 1 is small
        small = np.array(
            [dual_seminorm(self.family, self.rho_level, m) <= 1.0 for m in marks], dtype=bool
        )
        srv = (rates[small, None] * marks[small]).sum(axis=0) if rates.size else np.zeros(n)

        for name, value in (
            ("drift", drift),
            ("covariance", cov),
            ("jump_rates", rates),
            ("jump_marks", marks),
            ("cov_sqrt", cov_sqrt),
            ("small_mask", small),
            ("small_rate_vector", srv),
        ):
            value = value.copy()
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def dim(self) -> int:
        return self.drift.size

    @property
    def n_atoms(self) -> int:
        return self.jump_rates.size

    @property
    def approximate(self) -> bool:
        """True when this is an epsilon-truncation of an infinite-activity measure."""
        return self.small_jump_eps is not None

    def has_noise(self) -> bool:
        return bool(np.any(self.covariance) or self.n_atoms)


@dataclass(frozen=True)
class LevyPath:
    """One simulated path: grid-sampled Wiener increments plus an exact jump list."""

    grid: np.ndarray
    wiener_increments: np.ndarray
    jump_times: np.ndarray
    jump_atoms: np.ndarray
    seed: int

    wiener_cum: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        incr = np.asarray(self.wiener_increments, dtype=float)
        jt = np.asarray(self.jump_times, dtype=float)
        ja = np.asarray(self.jump_atoms, dtype=np.intp)
        if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0) or grid[0] != 0.0:
            raise ContractError("grid must start at 0 and be strictly increasing")
        if incr.shape != (grid.size - 1, incr.shape[1] if incr.ndim == 2 else -1):
            raise ContractError("one Wiener increment row per grid cell required")
        if jt.size != ja.size:
            raise ContractError("jump times and atom indices must align")
        if jt.size and (jt[0] <= 0.0 or jt[-1] > grid[-1] or np.any(np.diff(jt) <= 0)):
            raise ContractError("jump times must be strictly sorted inside (0, T]")
        cum = np.vstack([np.zeros((1, incr.shape[1])), np.cumsum(incr, axis=0)])
        for name, value in (
            ("grid", grid),
            ("wiener_increments", incr),
            ("jump_times", jt),
            ("jump_atoms", ja),
            ("wiener_cum", cum),
        ):
            value = value.copy()
            value.setflags(write=False)
            object.__setattr__(self, name, value)

    @property
    def horizon(self) -> float:
        return float(self.grid[-1])

    @property
    def dim(self) -> int:
        return self.wiener_increments.shape[1]

    def wiener_at(self, t: float) -> np.ndarray:
        """Wiener component held at the last grid point <= t."""
        idx = int(np.searchsorted(self.grid, t, side="right")) - 1
        return self.wiener_cum[idx]


def simulate_path(
    chars: LevyCharacteristics, horizon: float, grid: Sequence[float], seed: int
) -> LevyPath:
    """Simulate a path over [0, horizon] on the given grid, deterministically in seed.

    Wiener increments per grid cell are drawn through the symmetric square root
    of the covariance; each atom's jump times come from a homogeneous Poisson
    process of its rate.  The astronomically unlikely floating-point collision
    of two jump times triggers a full redraw on the next substream.
    """
    grid = np.asarray(grid, dtype=float)
    if horizon <= 0:
        raise ContractError(f"horizon must be > 0, got {horizon}")
    if grid.size < 2 or grid[0] != 0.0 or abs(grid[-1] - horizon) > 1e-12 * max(1.0, horizon):
        raise ContractError("grid must run from 0 to the horizon")
    if np.any(np.diff(grid) <= 0):
        raise ContractError("grid times must be strictly increasing")

    n = chars.dim
    for attempt in range(64):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed) & (2**63 - 1), attempt]))
        z = rng.standard_normal((grid.size - 1, n))
        incr = np.sqrt(np.diff(grid))[:, None] * (z @ chars.cov_sqrt.T)
        if not chars.covariance.any():
            incr = np.zeros_like(incr)

        times, atoms = [], []
        for i in range(chars.n_atoms):
            count = rng.poisson(chars.jump_rates[i] * horizon)
            if count:
                t_i = horizon * (1.0 - rng.random(count))  # uniform on (0, T]
                times.append(t_i)
                atoms.append(np.full(count, i, dtype=np.intp))
        if times:
            jt = np.concatenate(times)
            ja = np.concatenate(atoms)
            order = np.argsort(jt, kind="stable")
            jt, ja = jt[order], ja[order]
            if np.any(np.diff(jt) == 0.0):
                continue  # resample on collision
        else:
            jt, ja = np.empty(0), np.empty(0, dtype=np.intp)
        return LevyPath(grid, incr, jt, ja, seed=int(seed))
    raise ModelError("could not draw distinct jump times in 64 attempts")


def coarsen_path(path: LevyPath, factor: int) -> LevyPath:
    """Same underlying noise on a grid coarsened by an integer factor.

    Wiener increments are aggregated over groups of `factor` cells and the
    jump list is kept verbatim, so refinement studies can compare resolutions
    with common randomness.
    """
    if factor < 1 or (path.grid.size - 1) % factor != 0:
        raise ContractError("factor must divide the number of grid cells")
    incr = path.wiener_increments.reshape(-1, factor, path.dim).sum(axis=1)
    return LevyPath(path.grid[::factor], incr, path.jump_times, path.jump_atoms, path.seed)


def _components_at(
    path: LevyPath, chars: LevyCharacteristics, t: float, left_limit: bool = False
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    if not 0.0 <= t <= path.horizon:
        raise TimeOrderError(f"time {t} outside [0, {path.horizon}]")
    drift = t * chars.drift
    wiener = path.wiener_at(t) if not left_limit else path.wiener_at(np.nextafter(t, -1.0))
    side = "left" if left_limit else "right"
    upto = int(np.searchsorted(path.jump_times, t, side=side))
    comp_small = -t * chars.small_rate_vector
    large = np.zeros(chars.dim)
    if upto:
        atoms = path.jump_atoms[:upto]
        small = chars.small_mask[atoms]
        marks = chars.jump_marks[atoms]
        if np.any(small):
            comp_small = comp_small + marks[small].sum(axis=0)
        if np.any(~small):
            large = marks[~small].sum(axis=0)
    return drift, np.asarray(wiener), comp_small, large


def ito_components(
    path: LevyPath, chars: LevyCharacteristics, t: float
) -> tuple[DualVector, DualVector, DualVector, DualVector]:
    """Drift, Wiener, compensated-small-jump and large-jump components at t."""
    parts = _components_at(path, chars, t)
    return tuple(DualVector(p) for p in parts)


def evaluate(path: LevyPath, chars: LevyCharacteristics, t: float) -> DualVector:
    """Path value L_t, the sum of the four decomposition components."""
    drift, wiener, comp_small, large = _components_at(path, chars, t)
    return DualVector(drift + wiener + comp_small + large)


def evaluate_array(
    path: LevyPath, chars: LevyCharacteristics, ts: np.ndarray, left_limit: bool = False
) -> np.ndarray:
    """Path values at many times, as an (len(ts), dim) array."""
    out = np.empty((len(ts), chars.dim))
    for i, t in enumerate(ts):
        parts = _components_at(path, chars, float(t), left_limit=left_limit)
        out[i] = parts[0] + parts[1] + parts[2] + parts[3]
    return out


def char_functional(chars: LevyCharacteristics, t: float, phi) -> complex:
    """Closed-form characteristic functional E exp(i <L_t, phi>)."""
    if t < 0:
        raise TimeOrderError(f"time must be >= 0, got {t}")
    p = as_coeffs(phi)
    if p.size != chars.dim:
        raise DimensionMismatch("probe dimension mismatch")
    xi = 1j * float(chars.drift @ p) - 0.5 * float(p @ chars.covariance @ p)
    if chars.n_atoms:
        theta = chars.jump_marks @ p
        xi = xi + np.sum(
            chars.jump_rates
            * (np.exp(1j * theta) - 1.0 - 1j * theta * chars.small_mask)
        )
    return complex(np.exp(t * xi))


def empirical_char(samples: Sequence[float], u: float) -> tuple[complex, float]:
    """Monte Carlo estimate of E exp(i u X) with the standard error of the mean.

    The returned error combines the componentwise standard errors of the real
    and imaginary parts: se = sqrt(se_re^2 + se_im^2).
    """
    x = np.asarray(samples, dtype=float)
    if x.size < 2:
        raise ContractError("need at least 2 samples")
    z = np.exp(1j * u * x)
    est = complex(np.mean(z))
    se = float(np.sqrt((np.var(z.real, ddof=1) + np.var(z.imag, ddof=1)) / x.size))
    return est, se


def large_jump_mean(chars: LevyCharacteristics) -> DualVector:
    """Mean large-jump intensity sum_large rate_i mark_i.

    Adding it to the drift recenters the decomposition so that the whole jump
    part becomes a compensated (zero-mean) process.
    """
    if chars.n_atoms == 0 or not np.any(~chars.small_mask):
        return DualVector(np.zeros(chars.dim))
    big = ~chars.small_mask
    return DualVector((chars.jump_rates[big, None] * chars.jump_marks[big]).sum(axis=0))


def recentered_drift(chars: LevyCharacteristics) -> DualVector:
    """Square-integrable recentering m + sum_large rate_i mark_i."""
    return DualVector(chars.drift + np.asarray(large_jump_mean(chars)))


def mapped_characteristics(
    chars: LevyCharacteristics, operator: np.ndarray, rho_level: int | None = None
) -> LevyCharacteristics:
    """Characteristics of the image process S L under a linear map S.

    Marks map to S mark, the covariance to S Q S', and the drift picks up
    the compensation difference for atoms whose small/large classification
    changes under the new dual norm.
    """
    s = np.asarray(operator, dtype=float)
    if s.shape != (chars.dim, chars.dim):
        raise DimensionMismatch("operator must be a square matrix of the model dimension")
    level = chars.rho_level if rho_level is None else rho_level
    new_marks = chars.jump_marks @ s.T
    drift = s @ chars.drift
    for i in range(chars.n_atoms):
        was_small = bool(chars.small_mask[i])
        now_small = dual_seminorm(chars.family, level, new_marks[i]) <= 1.0
        if was_small != now_small:
            # an atom leaving the small ball loses its compensator, which the
            # drift must absorb; one entering the ball gains it back
            sign = -1.0 if (was_small and not now_small) else 1.0
            drift = drift + sign * chars.jump_rates[i] * new_marks[i]
    return LevyCharacteristics(
        drift=drift,
        covariance=s @ chars.covariance @ s.T,
        jump_rates=chars.jump_rates,
        jump_marks=new_marks,
        family=chars.family,
        rho_level=level,
        small_jump_eps=chars.small_jump_eps,
    )


def pairing_samples(
    chars: LevyCharacteristics,
    pairs: Sequence[tuple[float, np.ndarray]],
    n_replicas: int,
    master_seed: int,
    label: str = "levy",
) -> np.ndarray:
    """Ensemble of <L_t, phi> samples for each (t, phi) pair.

    Each replica simulates one path on the minimal grid containing all the
    requested times and evaluates every pair on it; returns an array of shape
    (n_replicas, len(pairs)).
    """
    ts = [float(t) for t, _ in pairs]
    if min(ts) < 0:
        raise ContractError("pair times must be >= 0")
    horizon = max(ts)
    if horizon <= 0:
        raise ContractError("at least one pair time must be positive")
    grid = np.unique(np.concatenate([[0.0, horizon], ts]))
    probes = np.stack([as_coeffs(phi) for _, phi in pairs])
    out = np.empty((n_replicas, len(pairs)))
    for r in range(n_replicas):
        path = simulate_path(chars, horizon, grid, replica_seed(master_seed, label, r))
        vals = evaluate_array(path, chars, np.asarray(ts))
        out[r] = np.einsum("ij,ij->i", vals, probes)
    return out
