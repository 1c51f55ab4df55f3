"""Stochastic convolution and the linear stochastic evolution equation solvers.

The driving identity is the evolution (mild) representation

    X_t = U(t,0)' eta + int_0^t U(t,s)' R(s,f) L(ds, df),

whose noise term splits like the plain stochastic integral but with every
contribution propagated by the dual kernel U(t, .)'.  For constant-coefficient
problems (R = B' fixed) the solver also evaluates the cadlag representation

    Z_t = U(t,0)' eta + int_0^t U(t,s)' A(s)' B' L_s ds + B' L_t,

whose jumps are exactly B' (jump of L).  Both representations are versions of
the same process; numerically they differ by quadrature and by the order-one
bias of the left-endpoint Wiener sums, which the verification harness measures
under grid refinement.

Conventions (shared with `stochint`): the output grid is the user grid joined
with the exact jump times; Wiener kicks enter when their user cell completes,
with the kernel anchored at the cell's left endpoint; inside an output cell the
deterministic part evolves by the flow alone.  For homogeneous diagonal systems
with constant coefficient the per-cell deterministic increment uses the exact
exponential rule (phi functions), so pure-jump problems are computed without
quadrature error.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import ContractError, DimensionMismatch, ModeError, TimeOrderError
from .evolution import DiagonalHomogeneous, EvolutionSystem, GeneratorFamily
from .levy import LevyCharacteristics, LevyPath, evaluate_array, simulate_path
from .quadrature import exp_int, exp_int2, simpson_nodes_weights
from .rng import replica_seed, substream
from .spaces import SeminormFamily, as_coeffs, dual_seminorm
from .stochint import IntegrandR, effective_times, weak_levy_value


@dataclass(frozen=True)
class SEEProblem:
    """A linear stochastic evolution problem on the coefficient model."""

    system: EvolutionSystem
    integrand: IntegrandR
    chars: LevyCharacteristics
    family: SeminormFamily
    initial: np.ndarray | Callable[[np.random.Generator], np.ndarray]
    horizon: float
    grid: np.ndarray
    generator: GeneratorFamily | None = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.size < 2 or grid[0] != 0.0 or np.any(np.diff(grid) <= 0):
            raise ContractError("grid must start at 0 and be strictly increasing")
        if abs(grid[-1] - self.horizon) > 1e-12 * max(1.0, self.horizon):
            raise ContractError("grid must end at the horizon")
        n = self.chars.dim
        if self.system.dim != n or self.integrand.dim != n or self.family.dim != n:
            raise DimensionMismatch("problem blocks have inconsistent dimensions")
        if not callable(self.initial):
            eta = np.asarray(self.initial, dtype=float)
            if eta.shape != (n,):
                raise DimensionMismatch("initial condition dimension mismatch")
            object.__setattr__(self, "initial", eta)
        grid = grid.copy()
        grid.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        if self.generator is None:
            object.__setattr__(self, "generator", self.system.generator())

    @property
    def dim(self) -> int:
        return self.chars.dim

    @property
    def is_langevin(self) -> bool:
        return self.integrand.is_constant

    def resolve_initial(self, rng: np.random.Generator | None = None) -> np.ndarray:
        if callable(self.initial):
            if rng is None:
                raise ContractError("initial sampler needs a generator")
            return np.asarray(self.initial(rng), dtype=float)
        return self.initial


@dataclass(frozen=True)
class SolutionPath:
    """Solution values on the jump-augmented grid with left limits and jump marks."""

    times: np.ndarray
    values: np.ndarray
    pre_values: np.ndarray
    jump_times: np.ndarray
    jump_sizes: np.ndarray
    provenance: str

    def index_of(self, t: float) -> int:
        idx = int(np.searchsorted(self.times, t))
        if idx >= self.times.size or self.times[idx] != t:
            raise ContractError(f"time {t} is not an output time")
        return idx

    def value_at(self, t: float) -> np.ndarray:
        return self.values[self.index_of(t)]


def _cells_between(times: np.ndarray, a: float, b: float) -> list[tuple[float, float]]:
    """Sub-intervals of [a, b] cut at the grid times (partial edge cells allowed)."""
    if b < a:
        raise TimeOrderError(f"need a <= b, got {a}, {b}")
    if b == a:
        return []
    pts = times[(times > a) & (times < b)]
    edges = np.concatenate([[a], pts, [b]])
    return [(float(edges[i]), float(edges[i + 1])) for i in range(edges.size - 1)]


def _det_vector_fn(R: IntegrandR, chars: LevyCharacteristics):
    """Deterministic density: drift image minus the small-jump compensator."""
    if R.is_constant:
        vec = R.constant_matrix @ (chars.drift - chars.small_rate_vector)
        return (lambda s: vec), True
    if R.kind == "time_varying":
        return (lambda s: R.mat(s) @ (chars.drift - chars.small_rate_vector)), False

    idx = np.flatnonzero(chars.small_mask)
    rates = chars.jump_rates[idx]
    marks = chars.jump_marks[idx]

    def fn(s):
        acc = R.mat(s) @ chars.drift
        for lam, mark in zip(rates, marks):
            acc = acc - lam * (R.mat(s, mark) @ mark)
        return acc

    return fn, False


def _is_exact_diag(problem: SEEProblem) -> bool:
    return isinstance(problem.system, DiagonalHomogeneous) and problem.integrand.is_constant


def _segment_det_integral(
    problem: SEEProblem, target: float, a: float, b: float, subpanels: int
) -> np.ndarray:
    """int_a^b U(target, s)' [R(s,0) m - compensator(s)] ds for one cell."""
    system = problem.system
    det_fn, det_const = _det_vector_fn(problem.integrand, problem.chars)
    if _is_exact_diag(problem) and det_const:
        av = system.a
        return np.exp(av * (target - b)) * exp_int(av, b - a) * det_fn(0.0)
    nodes, weights = simpson_nodes_weights(a, b, subpanels)
    if isinstance(system, DiagonalHomogeneous):
        factors = np.exp(np.outer(target - nodes, system.a))
        vals = np.stack([det_fn(s) for s in nodes])
        return np.tensordot(weights, factors * vals, axes=(0, 0))
    acc = np.zeros(problem.dim)
    for w, s in zip(weights, nodes):
        acc = acc + w * system.apply_dual(target, s, det_fn(s))
    return acc


def segment_convolution_value(
    problem: SEEProblem, path: LevyPath, s: float, t: float, subpanels: int = 1
) -> np.ndarray:
    """Strong stochastic convolution over the window (s, t] at target time t.

    Wiener kicks belong to the window when their user cell completes inside it;
    the kernel stays anchored at the cell's left endpoint, which is what makes
    the convolution additive across adjacent windows.
    """
    if not 0.0 <= s <= t <= path.horizon:
        raise TimeOrderError(f"need 0 <= s <= t <= horizon, got {s}, {t}")
    chars = problem.chars
    system = problem.system
    R = problem.integrand
    times = effective_times(path)
    out = np.zeros(problem.dim)
    for a, b in _cells_between(times, s, t):
        out = out + _segment_det_integral(problem, t, a, b, subpanels)
    ends = path.grid[1:]
    lo = int(np.searchsorted(ends, s, side="right"))
    hi = int(np.searchsorted(ends, t, side="right"))
    for j in range(lo, hi):
        kick = R.mat(path.grid[j]) @ path.wiener_increments[j]
        out = out + system.apply_dual(t, path.grid[j], kick)
    lo = int(np.searchsorted(path.jump_times, s, side="right"))
    hi = int(np.searchsorted(path.jump_times, t, side="right"))
    for i in range(lo, hi):
        mark = chars.jump_marks[path.jump_atoms[i]]
        out = out + system.apply_dual(t, path.jump_times[i], R.mat(path.jump_times[i], mark) @ mark)
    return out


def _convolution_recursion(problem: SEEProblem, path: LevyPath, subpanels: int):
    system = problem.system
    if not isinstance(system, DiagonalHomogeneous):
        raise ModeError("recursion method needs a homogeneous diagonal system")
    chars = problem.chars
    R = problem.integrand
    av = system.a
    times = effective_times(path)
    n = problem.dim
    values = np.zeros((times.size, n))
    pre = np.zeros((times.size, n))
    grid_ends = path.grid[1:]
    jump_sizes = np.zeros((path.jump_times.size, n))

    x = np.zeros(n)
    for i in range(1, times.size):
        c0, c1 = times[i - 1], times[i]
        x = np.exp(av * (c1 - c0)) * x + _segment_det_integral(problem, c1, c0, c1, subpanels)
        pre[i] = x
        j = int(np.searchsorted(grid_ends, c1))
        if j < grid_ends.size and grid_ends[j] == c1:
            kick = R.mat(path.grid[j]) @ path.wiener_increments[j]
            x = x + np.exp(av * (c1 - path.grid[j])) * kick
        k = int(np.searchsorted(path.jump_times, c1))
        if k < path.jump_times.size and path.jump_times[k] == c1:
            mark = chars.jump_marks[path.jump_atoms[k]]
            size = R.mat(c1, mark) @ mark
            jump_sizes[k] = size
            x = x + size
        values[i] = x
    return times, values, pre, jump_sizes


def _convolution_direct(problem: SEEProblem, path: LevyPath, subpanels: int):
    chars = problem.chars
    R = problem.integrand
    times = effective_times(path)
    n = problem.dim
    values = np.zeros((times.size, n))
    pre = np.zeros((times.size, n))
    jump_sizes = np.zeros((path.jump_times.size, n))
    for k, tau in enumerate(path.jump_times):
        mark = chars.jump_marks[path.jump_atoms[k]]
        jump_sizes[k] = R.mat(tau, mark) @ mark
    for i in range(1, times.size):
        t = times[i]
        values[i] = segment_convolution_value(problem, path, 0.0, t, subpanels)
        pre[i] = values[i]
        j = int(np.searchsorted(path.grid[1:], t))
        if j < path.grid.size - 1 and path.grid[j + 1] == t:
            kick = R.mat(path.grid[j]) @ path.wiener_increments[j]
            pre[i] = pre[i] - problem.system.apply_dual(t, path.grid[j], kick)
        k = int(np.searchsorted(path.jump_times, t))
        if k < path.jump_times.size and path.jump_times[k] == t:
            pre[i] = pre[i] - jump_sizes[k]
    return times, values, pre, jump_sizes


def stochastic_convolution(
    problem: SEEProblem, path: LevyPath, method: str = "auto", subpanels: int = 1
) -> SolutionPath:
    """Kernel-weighted stochastic integral with integrand U(t,s)' R(s,f).

    `method="recursion"` advances one output cell at a time (homogeneous
    diagonal systems only); `"direct"` evaluates the defining sums at every
    output time.  The two agree to near machine precision where both apply.
    """
    if method == "auto":
        method = "recursion" if isinstance(problem.system, DiagonalHomogeneous) else "direct"
    if method == "recursion":
        times, values, pre, jump_sizes = _convolution_recursion(problem, path, subpanels)
    elif method == "direct":
        times, values, pre, jump_sizes = _convolution_direct(problem, path, subpanels)
    else:
        raise ContractError(f"unknown method {method!r}")
    return SolutionPath(times, values, pre, path.jump_times.copy(), jump_sizes, "convolution")


def _flow_of_initial(problem: SEEProblem, times: np.ndarray, eta: np.ndarray) -> np.ndarray:
    system = problem.system
    if isinstance(system, DiagonalHomogeneous):
        return np.exp(np.outer(times, system.a)) * eta[None, :]
    return np.stack([system.apply_dual(float(t), 0.0, eta) for t in times])


def mild_solution(
    problem: SEEProblem,
    path: LevyPath,
    eta: np.ndarray | None = None,
    method: str = "auto",
    subpanels: int = 1,
) -> SolutionPath:
    """Evolution representation U(t,0)' eta + stochastic convolution."""
    if eta is None:
        eta = problem.resolve_initial()
    eta = np.asarray(eta, dtype=float)
    conv = stochastic_convolution(problem, path, method=method, subpanels=subpanels)
    flow = _flow_of_initial(problem, conv.times, eta)
    return SolutionPath(
        conv.times,
        flow + conv.values,
        flow + conv.pre_values,
        conv.jump_times,
        conv.jump_sizes,
        "mild",
    )


def ou_cadlag(
    problem: SEEProblem,
    path: LevyPath,
    eta: np.ndarray | None = None,
    subpanels: int = 1,
) -> SolutionPath:
    """Cadlag representation for constant-coefficient problems.

    Evaluates U(t,0)' eta + int_0^t U(t,s)' A(s)' B' L_s ds + B' L_t on the
    output grid; the Riemann term uses per-cell Simpson with the path evaluated
    exactly at the interior nodes and one-sided limits at the cell ends.
    """
    if not problem.is_langevin:
        raise ModeError("cadlag representation needs a constant coefficient")
    if eta is None:
        eta = problem.resolve_initial()
    eta = np.asarray(eta, dtype=float)
    chars = problem.chars
    system = problem.system
    gen = problem.generator
    bt = problem.integrand.constant_matrix
    times = effective_times(path)
    l_vals = evaluate_array(path, chars, times)
    l_pre = evaluate_array(path, chars, times, left_limit=True)
    bl = l_vals @ bt.T
    bl_pre = l_pre @ bt.T

    diag = isinstance(system, DiagonalHomogeneous)
    n = problem.dim
    riemann = np.zeros((times.size, n))
    # per-cell node values of A(s)' B' L_s, reused by every later output time
    cell_nodes = []
    cell_weights = []
    cell_integrand = []
    for j in range(times.size - 1):
        a, b = times[j], times[j + 1]
        nodes, weights = simpson_nodes_weights(a, b, subpanels)
        vals = np.empty((nodes.size, n))
        inner = evaluate_array(path, chars, nodes[1:-1]) @ bt.T if nodes.size > 2 else None
        for m, s in enumerate(nodes):
            if m == 0:
                blv = bl[j]
            elif m == nodes.size - 1:
                blv = bl_pre[j + 1]
            else:
                blv = inner[m - 1]
            vals[m] = gen.matrix(s).T @ blv
        cell_nodes.append(nodes)
        cell_weights.append(weights)
        cell_integrand.append(vals)

    for i in range(1, times.size):
        t = times[i]
        acc = np.zeros(n)
        for j in range(i):
            nodes, weights, vals = cell_nodes[j], cell_weights[j], cell_integrand[j]
            if diag:
                factors = np.exp(np.outer(t - nodes, system.a))
                acc = acc + np.tensordot(weights, factors * vals, axes=(0, 0))
            else:
                for w, s, v in zip(weights, nodes, vals):
                    acc = acc + w * system.apply_dual(t, s, v)
        riemann[i] = acc

    flow = _flow_of_initial(problem, times, eta)
    values = flow + riemann + bl
    pre = flow + riemann + bl_pre
    jump_sizes = chars.jump_marks[path.jump_atoms] @ bt.T if path.jump_times.size else np.zeros((0, n))
    return SolutionPath(times, values, pre, path.jump_times.copy(), jump_sizes, "cadlag")


def weak_solution_residual(
    problem: SEEProblem,
    solution: SolutionPath,
    path: LevyPath,
    psi,
    t: float,
    subpanels: int = 1,
    ds_method: str = "auto",
) -> float:
    """Residual of the tested-against-psi integral form of the equation.

    |<Y_t, psi> - <Y_0, psi> - int_0^t <Y_s, A(s) psi> ds - weak integral|.
    The ds-integral uses the exact exponential in-cell rule for homogeneous
    diagonal constant-coefficient problems and a one-sided trapezoid rule
    otherwise.
    """
    p = as_coeffs(psi)
    i_t = solution.index_of(t)
    gen = problem.generator
    if ds_method == "auto":
        ds_method = "exponential" if _is_exact_diag(problem) else "trapezoid"

    ds_int = 0.0
    if ds_method == "exponential":
        av = problem.system.a
        det_fn, _ = _det_vector_fn(problem.integrand, problem.chars)
        h_eff = det_fn(0.0)
        for i in range(i_t):
            h = solution.times[i + 1] - solution.times[i]
            y0 = solution.values[i]
            ds_int += float(np.sum(av * p * (y0 * exp_int(av, h) + h_eff * exp_int2(av, h))))
    elif ds_method == "trapezoid":
        for i in range(i_t):
            s0, s1 = solution.times[i], solution.times[i + 1]
            g0 = float(solution.values[i] @ gen.apply(s0, p))
            g1 = float(solution.pre_values[i + 1] @ gen.apply(s1, p))
            ds_int += 0.5 * (s1 - s0) * (g0 + g1)
    else:
        raise ContractError(f"unknown ds_method {ds_method!r}")

    weak = weak_levy_value(problem.integrand, path, problem.chars, t, p, subpanels=subpanels)
    lhs = float(solution.values[i_t] @ p)
    rhs = float(solution.values[0] @ p) + ds_int + weak
    return abs(lhs - rhs)


def weak_convolution_value(
    problem: SEEProblem,
    path: LevyPath,
    t: float,
    test,
    left_limit: bool = False,
    subpanels: int = 1,
) -> float:
    """Weak stochastic convolution at t: the integral of R(s,f)' U(s,t) chi.

    Mirrors the strong convolution term by term through the pairing, so the
    two agree up to floating-point reordering at output times.
    """
    chi = as_coeffs(test)
    chars = problem.chars
    system = problem.system
    R = problem.integrand
    if not 0.0 <= t <= path.horizon:
        raise ContractError(f"time {t} outside [0, {path.horizon}]")
    times = effective_times(path)
    det_fn, det_const = _det_vector_fn(R, chars)
    total = 0.0
    for a, b in _cells_between(times, 0.0, t):
        if _is_exact_diag(problem) and det_const:
            av = system.a
            total += float(np.sum(det_fn(0.0) * np.exp(av * (t - b)) * exp_int(av, b - a) * chi))
        else:
            nodes, weights = simpson_nodes_weights(a, b, subpanels)
            total += float(
                np.dot(weights, [det_fn(s) @ system.apply(s, t, chi) for s in nodes])
            )
    side = "left" if left_limit else "right"
    ends = path.grid[1:]
    n_done = int(np.searchsorted(ends, t, side=side))
    for j in range(n_done):
        kick = R.mat(path.grid[j]) @ path.wiener_increments[j]
        total += float(kick @ system.apply(path.grid[j], t, chi))
    n_jumps = int(np.searchsorted(path.jump_times, t, side=side))
    for i in range(n_jumps):
        mark = chars.jump_marks[path.jump_atoms[i]]
        tau = path.jump_times[i]
        total += float((R.mat(tau, mark) @ mark) @ system.apply(tau, t, chi))
    return total


def fubini_residual(
    problem: SEEProblem, path: LevyPath, psi, t: float, subpanels: int = 1
) -> tuple[float, float]:
    """Residuals of the iterated-integration identity for the convolution.

    line1 = int_0^t [ weak integral of R' U(., s) A(s) psi over [0, s] ] ds
    line2 = weak convolution at t of psi  -  weak integral of R' psi at t
    line3 = int_0^t [ weak integral of R' A(s) U(s, t) psi over [0, s] ] ds

    Returns (|line1 - line2|, |line3 - line2|); both shrink at the quadrature
    order and vanish for piecewise-exact cases.
    """
    p = as_coeffs(psi)
    chars = problem.chars
    system = problem.system
    gen = problem.generator
    R = problem.integrand
    times = effective_times(path)
    line2 = weak_convolution_value(problem, path, t, p, subpanels=subpanels) - weak_levy_value(
        R, path, chars, t, p, subpanels=subpanels
    )

    def outer(inner_fn) -> float:
        total = 0.0
        for a, b in _cells_between(times, 0.0, t):
            nodes, weights = simpson_nodes_weights(a, b, subpanels)
            vals = []
            for m, s in enumerate(nodes):
                at_end = m == nodes.size - 1
                vals.append(inner_fn(float(s), at_end))
            total += float(np.dot(weights, vals))
        return total

    def inner1(s: float, at_end: bool) -> float:
        return weak_convolution_value(
            problem, path, s, gen.apply(s, p), left_limit=at_end, subpanels=subpanels
        )

    def inner3(s: float, at_end: bool) -> float:
        chi = gen.apply(s, system.apply(s, t, p))
        return weak_levy_value(R, path, chars, s, chi, left_limit=at_end, subpanels=subpanels)

    line1 = outer(inner1)
    line3 = outer(inner3)
    return abs(line1 - line2), abs(line3 - line2)


def flow_apply(
    problem: SEEProblem, s: float, t: float, g, path: LevyPath, subpanels: int = 1
) -> np.ndarray:
    """Flow map: U(t,s)' g plus the segment convolution over (s, t]."""
    if s > t:
        raise TimeOrderError(f"need s <= t, got {s}, {t}")
    gv = as_coeffs(g)
    out = problem.system.apply_dual(t, s, gv)
    return out + segment_convolution_value(problem, path, s, t, subpanels)


def markov_diagnostic(
    problem: SEEProblem,
    s: float,
    t: float,
    psi,
    n_replicas: int,
    master_seed: int,
    n_bootstrap: int = 200,
    subpanels: int = 1,
) -> tuple[float, float]:
    """Factorization gap of the conditional characteristic function.

    Estimates | E e^{i(<X_s, U(s,s+t) psi> + <I, psi>)}
                - E e^{i <X_s, U(s,s+t) psi>}  E e^{i <I, psi>} |
    where I is the convolution over the window (s, s+t]; the standard error
    comes from a seeded bootstrap over replicas.
    """
    if n_replicas < 1000:
        raise ContractError("markov diagnostic needs at least 1000 replicas")
    p = as_coeffs(psi)
    u_psi = problem.system.apply(s, s + t, p)
    a = np.empty(n_replicas, dtype=complex)
    b = np.empty(n_replicas, dtype=complex)
    eta_rng = substream(master_seed, "markov/initial")
    for r in range(n_replicas):
        path = simulate_path(
            problem.chars, problem.horizon, problem.grid, replica_seed(master_seed, "markov", r)
        )
        eta = problem.resolve_initial(eta_rng)
        sol = mild_solution(problem, path, eta=eta, subpanels=subpanels)
        x_s = sol.value_at(s)
        seg = segment_convolution_value(problem, path, s, s + t, subpanels)
        a[r] = np.exp(1j * float(x_s @ u_psi))
        b[r] = np.exp(1j * float(seg @ p))
    gap = abs(np.mean(a * b) - np.mean(a) * np.mean(b))
    boot = substream(master_seed, "markov/bootstrap")
    gaps = np.empty(n_bootstrap)
    for k in range(n_bootstrap):
        idx = boot.integers(0, n_replicas, n_replicas)
        gaps[k] = abs(np.mean(a[idx] * b[idx]) - np.mean(a[idx]) * np.mean(b[idx]))
    return float(gap), float(np.std(gaps, ddof=1))


def path_bochner_integral(
    family: SeminormFamily, level: int, solution: SolutionPath, t: float
) -> float:
    """Trapezoid integral of the dual seminorm of the path up to t.

    Finite automatically for the piecewise paths produced here; reported as a
    diagnostic for the local-integrability hypothesis of the uniqueness theory.
    """
    i_t = solution.index_of(t)
    total = 0.0
    for i in range(i_t):
        h = solution.times[i + 1] - solution.times[i]
        g0 = dual_seminorm(family, level, solution.values[i])
        g1 = dual_seminorm(family, level, solution.pre_values[i + 1])
        total += 0.5 * h * (g0 + g1)
    return total


def path_square_integral(
    family: SeminormFamily, level: int, solution: SolutionPath, t: float
) -> float:
    """Trapezoid integral of the squared dual seminorm of the path up to t."""
    i_t = solution.index_of(t)
    w = family.weight(level)
    total = 0.0
    for i in range(i_t):
        h = solution.times[i + 1] - solution.times[i]
        g0 = float(np.sum(solution.values[i] ** 2 / w))
        g1 = float(np.sum(solution.pre_values[i + 1] ** 2 / w))
        total += 0.5 * h * (g0 + g1)
    return total


def square_moment_report(
    problem: SEEProblem,
    n_replicas: int,
    levels: Sequence[int],
    t: float,
    master_seed: int,
    subpanels: int = 1,
) -> dict:
    """Monte Carlo estimate of E int_0^t (dual seminorm of X_s)^2 ds per level.

    All levels share the same replica paths, so the reported estimates are
    exactly nonincreasing in the level.
    """
    levels = list(levels)
    samples = np.empty((n_replicas, len(levels)))
    eta_rng = substream(master_seed, "sqmom/initial")
    for r in range(n_replicas):
        path = simulate_path(
            problem.chars, problem.horizon, problem.grid, replica_seed(master_seed, "sqmom", r)
        )
        eta = problem.resolve_initial(eta_rng)
        sol = mild_solution(problem, path, eta=eta, subpanels=subpanels)
        for c, level in enumerate(levels):
            samples[r, c] = path_square_integral(problem.family, level, sol, t)
    means = samples.mean(axis=0)
    ses = samples.std(axis=0, ddof=1) / np.sqrt(n_replicas)
    return {
        "levels": levels,
        "estimates": means.tolist(),
        "stderrs": ses.tolist(),
        "monotone": bool(np.all(np.diff(means) <= 1e-12 * max(1.0, float(means[0])))),
    }


def mild_ensemble(
    problem: SEEProblem,
    pairs: Sequence[tuple[float, np.ndarray]],
    n_replicas: int,
    master_seed: int,
    label: str = "mild",
    subpanels: int = 1,
) -> np.ndarray:
    """Samples of <X_t, psi> for each (t, psi) pair; one mild solve per replica."""
    probes = np.stack([as_coeffs(phi) for _, phi in pairs])
    ts = [float(t) for t, _ in pairs]
    out = np.empty((n_replicas, len(pairs)))
    eta_rng = substream(master_seed, f"{label}/initial")
    for r in range(n_replicas):
        path = simulate_path(
            problem.chars, problem.horizon, problem.grid, replica_seed(master_seed, label, r)
        )
        eta = problem.resolve_initial(eta_rng)
        sol = mild_solution(problem, path, eta=eta, subpanels=subpanels)
        for c, t in enumerate(ts):
            out[r, c] = float(sol.value_at(t) @ probes[c])
    return out
