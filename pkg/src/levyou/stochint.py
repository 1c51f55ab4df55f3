"""The four stochastic integrals against a simulated Levy path.

For an operator-valued integrand R (a matrix mapping dual coefficients to dual
coefficients) the strong integral of R against L splits into

  drift          quadrature of s -> R(s,0) m,
  Wiener         left-endpoint Ito sums of R(t_j,0) dW_j over user grid cells,
  comp. Poisson  exact small-jump sums minus the quadrature compensator
                 int_0^t sum_small rate_i R(s, f_i) f_i ds,
  Poisson        the exact finite sum over large jumps.

Jump times are inserted into the evaluation grid so both Poisson parts are
exact; only the Wiener part carries grid bias.  The weak integral rebuilds the
same sums from the transposed action R(s,f)' psi, so weak-strong compatibility
holds up to floating-point reordering.  Only deterministic integrands are
supported; predictability is structural.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ContractError, DimensionMismatch
from .levy import LevyCharacteristics, LevyPath
from .quadrature import simpson_nodes_weights

CONSTANT = "constant"
TIME_VARYING = "time_varying"
MARK_DEPENDENT = "mark_dependent"


@dataclass(frozen=True)
class IntegrandR:
    """Deterministic operator-valued integrand, one of three kinds."""

    kind: str
    dim: int
    _constant: np.ndarray | None = None
    _fn: Callable | None = None

    @classmethod
    def constant(cls, matrix) -> "IntegrandR":
        m = np.asarray(matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise DimensionMismatch(f"integrand matrix must be square, got {m.shape}")
        m = m.copy()
        m.setflags(write=False)
        return cls(CONSTANT, m.shape[0], _constant=m)

    @classmethod
    def identity(cls, dim: int) -> "IntegrandR":
        return cls.constant(np.eye(dim))

    @classmethod
    def time_varying(cls, fn: Callable[[float], np.ndarray], dim: int) -> "IntegrandR":
        return cls(TIME_VARYING, dim, _fn=fn)

    @classmethod
    def mark_dependent(cls, fn: Callable[[float, np.ndarray], np.ndarray], dim: int) -> "IntegrandR":
        return cls(MARK_DEPENDENT, dim, _fn=fn)

    @property
    def is_constant(self) -> bool:
        return self.kind == CONSTANT

    @property
    def constant_matrix(self) -> np.ndarray:
        if not self.is_constant:
            raise ContractError("integrand is not constant")
        return self._constant

    def mat(self, t: float, f: np.ndarray | None = None) -> np.ndarray:
        """Matrix value at time t and mark f (f is only used by mark-dependent kinds)."""
        if self.kind == CONSTANT:
            return self._constant
        if self.kind == TIME_VARYING:
            m = np.asarray(self._fn(t), dtype=float)
        else:
            ff = np.zeros(self.dim) if f is None else np.asarray(f, dtype=float)
            m = np.asarray(self._fn(t, ff), dtype=float)
        if m.shape != (self.dim, self.dim):
            raise DimensionMismatch(f"integrand returned shape {m.shape}")
        return m

    def compose(self, s_matrix: np.ndarray) -> "IntegrandR":
        """Integrand with values S R(t, f) for a fixed matrix S."""
        s = np.asarray(s_matrix, dtype=float)
        if s.shape != (self.dim, self.dim):
            raise DimensionMismatch(f"operator shape {s.shape} incompatible with dim {self.dim}")
        if self.kind == CONSTANT:
            return IntegrandR.constant(s @ self._constant)
        if self.kind == TIME_VARYING:
            fn = self._fn
            return IntegrandR.time_varying(lambda t: s @ np.asarray(fn(t), dtype=float), self.dim)
        fn = self._fn
        return IntegrandR.mark_dependent(lambda t, f: s @ np.asarray(fn(t, f), dtype=float), self.dim)


@dataclass(frozen=True)
class IntegralPath:
    """Integral values on the jump-augmented grid, with component breakdown.

    `pre_values[i]` is the left limit at `times[i]`; it differs from
    `values[i]` exactly at jump times and at Wiener-cell completions.
    """

    times: np.ndarray
    values: np.ndarray
    pre_values: np.ndarray
    components: dict
    jump_times: np.ndarray

    def value_at(self, t: float) -> np.ndarray:
        idx = int(np.searchsorted(self.times, t))
        if idx >= self.times.size or self.times[idx] != t:
            raise ContractError(f"time {t} is not on the evaluation grid")
        return self.values[idx]


def effective_times(path: LevyPath) -> np.ndarray:
    """User grid joined with the exact jump times."""
    return np.union1d(path.grid, path.jump_times)


def _zero_components(n_times: int, dim: int) -> dict:
    return {
        name: np.zeros((n_times, dim))
        for name in ("drift", "wiener", "comp_poisson", "poisson")
    }


def _cumulative_quadrature(fn, times: np.ndarray, subpanels: int, dim: int) -> np.ndarray:
    """Cumulative per-cell Simpson integral of a vector-valued integrand."""
    out = np.zeros((times.size, dim))
    acc = np.zeros(dim)
    for j in range(times.size - 1):
        a, b = times[j], times[j + 1]
        nodes, weights = simpson_nodes_weights(a, b, subpanels)
        acc = acc + np.tensordot(weights, np.stack([fn(s) for s in nodes]), axes=(0, 0))
        out[j + 1] = acc
    return out


def drift_integral(R: IntegrandR, h, grid, subpanels: int = 1) -> IntegralPath:
    """Quadrature of s -> R(s,0) h(s) on the grid; h is a vector or a callable."""
    times = np.asarray(grid, dtype=float)
    if times.ndim != 1 or times.size < 2 or np.any(np.diff(times) <= 0):
        raise ContractError("grid must be strictly increasing with at least two points")
    if callable(h):
        h_fn = lambda s: np.asarray(h(s), dtype=float)
    else:
        hv = np.asarray(h, dtype=float)
        h_fn = lambda s: hv
    if R.is_constant:
        rm = R.constant_matrix
        fn = lambda s: rm @ h_fn(s)
    else:
        fn = lambda s: R.mat(s) @ h_fn(s)
    vals = _cumulative_quadrature(fn, times, subpanels, R.dim)
    comps = _zero_components(times.size, R.dim)
    comps["drift"] = vals
    return IntegralPath(times, vals, vals.copy(), comps, np.empty(0))


def _wiener_kicks(R: IntegrandR, path: LevyPath) -> np.ndarray:
    """Per-user-cell Ito kicks R(t_j, 0) dW_j."""
    if R.is_constant:
        return path.wiener_increments @ R.constant_matrix.T
    kicks = np.empty_like(path.wiener_increments)
    for j in range(path.grid.size - 1):
        kicks[j] = R.mat(path.grid[j]) @ path.wiener_increments[j]
    return kicks


def _step_sums(
    event_times: np.ndarray, event_vectors: np.ndarray, times: np.ndarray, dim: int
) -> tuple[np.ndarray, np.ndarray]:
    """Cumulative sums of event vectors at the given times (post and pre versions)."""
    post = np.zeros((times.size, dim))
    pre = np.zeros((times.size, dim))
    if event_times.size:
        cum = np.cumsum(event_vectors, axis=0)
        idx_post = np.searchsorted(event_times, times, side="right")
        idx_pre = np.searchsorted(event_times, times, side="left")
        nonzero = idx_post > 0
        post[nonzero] = cum[idx_post[nonzero] - 1]
        nonzero = idx_pre > 0
        pre[nonzero] = cum[idx_pre[nonzero] - 1]
    return post, pre


def wiener_integral(R: IntegrandR, path: LevyPath, chars: LevyCharacteristics) -> IntegralPath:
    """Left-endpoint Ito sums of R against the Wiener increments.

    A cell's kick enters the running value once the cell is complete, matching
    the convention that the Wiener component is held at the last grid value.
    """
    times = effective_times(path)
    kicks = _wiener_kicks(R, path)
    post, pre = _step_sums(path.grid[1:], kicks, times, R.dim)
    comps = _zero_components(times.size, R.dim)
    comps["wiener"] = post
    return IntegralPath(times, post, pre, comps, np.empty(0))


def _jump_sums(
    R: IntegrandR, path: LevyPath, chars: LevyCharacteristics, times: np.ndarray, small: bool
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    mask = chars.small_mask[path.jump_atoms] if small else ~chars.small_mask[path.jump_atoms]
    jt = path.jump_times[mask]
    atoms = path.jump_atoms[mask]
    vecs = np.zeros((jt.size, R.dim))
    for i, (tau, a) in enumerate(zip(jt, atoms)):
        mark = chars.jump_marks[a]
        vecs[i] = R.mat(tau, mark) @ mark
    post, pre = _step_sums(jt, vecs, times, R.dim)
    return post, pre, jt


def _small_compensator_fn(R: IntegrandR, chars: LevyCharacteristics):
    """Deterministic compensator integrand sum_small rate_i R(s, f_i) f_i."""
    if not np.any(chars.small_mask):
        return None
    if R.kind != MARK_DEPENDENT:
        srv = chars.small_rate_vector
        if R.is_constant:
            vec = R.constant_matrix @ srv
            return lambda s: vec
        return lambda s: R.mat(s) @ srv
    idx = np.flatnonzero(chars.small_mask)
    rates = chars.jump_rates[idx]
    marks = chars.jump_marks[idx]

    def comp(s):
        acc = np.zeros(R.dim)
        for lam, mark in zip(rates, marks):
            acc += lam * (R.mat(s, mark) @ mark)
        return acc

    return comp


def comp_poisson_integral(
    R: IntegrandR, path: LevyPath, chars: LevyCharacteristics, subpanels: int = 1
) -> IntegralPath:
    """Small-jump sums minus the exact-rate compensator quadrature."""
    times = effective_times(path)
    post, pre, jt = _jump_sums(R, path, chars, times, small=True)
    comp_fn = _small_compensator_fn(R, chars)
    if comp_fn is not None:
        comp = _cumulative_quadrature(comp_fn, times, subpanels, R.dim)
        post = post - comp
        pre = pre - comp
    comps = _zero_components(times.size, R.dim)
    comps["comp_poisson"] = post
    return IntegralPath(times, post, pre, comps, jt)


def poisson_integral(
    R: IntegrandR, path: LevyPath, chars: LevyCharacteristics
) -> IntegralPath:
    """Exact finite sum over the large jumps; piecewise constant, cadlag."""
    times = effective_times(path)
    post, pre, jt = _jump_sums(R, path, chars, times, small=False)
    comps = _zero_components(times.size, R.dim)
    comps["poisson"] = post
    return IntegralPath(times, post, pre, comps, jt)


def levy_integral(
    R: IntegrandR, path: LevyPath, chars: LevyCharacteristics, subpanels: int = 1
) -> IntegralPath:
    """Strong stochastic integral of R against L: the sum of the four parts."""
    times = effective_times(path)
    drift = _cumulative_quadrature(
        (lambda s: R.constant_matrix @ chars.drift)
        if R.is_constant
        else (lambda s: R.mat(s) @ chars.drift),
        times,
        subpanels,
        R.dim,
    )
    wie = wiener_integral(R, path, chars)
    cp = comp_poisson_integral(R, path, chars, subpanels)
    po = poisson_integral(R, path, chars)
    comps = {
        "drift": drift,
        "wiener": wie.components["wiener"],
        "comp_poisson": cp.components["comp_poisson"],
        "poisson": po.components["poisson"],
    }
    values = drift + comps["wiener"] + comps["comp_poisson"] + comps["poisson"]
    pre = drift + wie.pre_values + cp.pre_values + po.pre_values
    return IntegralPath(times, values, pre, comps, path.jump_times)


def weak_levy_value(
    R: IntegrandR,
    path: LevyPath,
    chars: LevyCharacteristics,
    t: float,
    test,
    left_limit: bool = False,
    subpanels: int = 1,
) -> float:
    """Weak stochastic integral over [0, t] against the test vector.

    Built from the transposed action R(s,f)' psi with the same cells, nodes
    and event conventions as the strong integral; `t` may sit anywhere in
    [0, horizon], not only on the grid.
    """
    psi = np.asarray(test, dtype=float)
    if psi.size != R.dim:
        raise DimensionMismatch("test vector dimension mismatch")
    if not 0.0 <= t <= path.horizon:
        raise ContractError(f"time {t} outside [0, {path.horizon}]")
    times = effective_times(path)
    side = "left" if left_limit else "right"

    total = 0.0
    # deterministic part: drift minus small-jump compensator
    comp_fn = _small_compensator_fn(R, chars)

    def det(s):
        val = float((R.mat(s).T @ psi) @ chars.drift)
        if comp_fn is not None:
            val -= float(comp_fn(s) @ psi)
        return val

    upto = int(np.searchsorted(times, t, side="left"))
    if upto < times.size and times[upto] == t:
        cells = [(times[j], times[j + 1]) for j in range(upto)]
    else:
        cells = [(times[j], times[j + 1]) for j in range(upto - 1)]
        cells.append((times[upto - 1], t))
    for a, b in cells:
        nodes, weights = simpson_nodes_weights(a, b, subpanels)
        total += float(np.dot(weights, [det(s) for s in nodes]))

    # Wiener kicks for completed user cells
    ends = path.grid[1:]
    n_done = int(np.searchsorted(ends, t, side=side))
    for j in range(n_done):
        r_t = R.constant_matrix.T if R.is_constant else R.mat(path.grid[j]).T
        total += float((r_t @ psi) @ path.wiener_increments[j])

    # jumps
    n_jumps = int(np.searchsorted(path.jump_times, t, side=side))
    for i in range(n_jumps):
        mark = chars.jump_marks[path.jump_atoms[i]]
        total += float(mark @ (R.mat(path.jump_times[i], mark).T @ psi))
    return total


def weak_levy_integral(
    R: IntegrandR, psi, path: LevyPath, chars: LevyCharacteristics, subpanels: int = 1
) -> np.ndarray:
    """Weak integral sampled at every effective grid time."""
    times = effective_times(path)
    return np.array(
        [weak_levy_value(R, path, chars, float(t), psi, subpanels=subpanels) for t in times]
    )


def commute_operator(
    s_matrix: np.ndarray,
    R: IntegrandR,
    path: LevyPath,
    chars: LevyCharacteristics,
    subpanels: int = 1,
) -> float:
    """Max grid deviation of S (integral of R) from the integral of S R."""
    s = np.asarray(s_matrix, dtype=float)
    left = levy_integral(R, path, chars, subpanels)
    right = levy_integral(R.compose(s), path, chars, subpanels)
    return float(np.max(np.linalg.norm(left.values @ s.T - right.values, axis=1)))


def membership_report(
    R: IntegrandR,
    chars: LevyCharacteristics,
    horizon: float,
    psi,
    panels: int = 64,
    include_large: bool = False,
) -> dict:
    """Square-integrability terms of the integrand class, evaluated exactly.

    Returns the three deterministic integrals (drift, Wiener, small-jump) over
    [0, horizon] for the given test vector; with `include_large` the large-jump
    term of the square-moment class is added.  At finite truncation all terms
    are finite; values are reported for diagnostics.
    """
    p = np.asarray(psi, dtype=float)
    nodes, weights = simpson_nodes_weights(0.0, horizon, panels)

    def rt_psi(s):
        return (R.constant_matrix.T if R.is_constant else R.mat(s).T) @ p

    drift_term = float(np.dot(weights, [(chars.drift @ rt_psi(s)) ** 2 for s in nodes]))
    wiener_term = float(
        np.dot(weights, [rt_psi(s) @ chars.covariance @ rt_psi(s) for s in nodes])
    )

    def jump_term(small: bool) -> float:
        mask = chars.small_mask if small else ~chars.small_mask
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            return 0.0
        vals = []
        for s in nodes:
            acc = 0.0
            for i in idx:
                mark = chars.jump_marks[i]
                acc += chars.jump_rates[i] * float(mark @ (R.mat(s, mark).T @ p)) ** 2
            vals.append(acc)
        return float(np.dot(weights, vals))

    report = {
        "drift": drift_term,
        "wiener": wiener_term,
        "small_jump": jump_term(small=True),
    }
    if include_large:
        report["large_jump"] = jump_term(small=False)
    report["finite"] = all(np.isfinite(v) for v in report.values())
    return report
