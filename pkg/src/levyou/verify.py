"""The identity suite behind the `verify` subcommand.

Each check exercises one constructive identity of the model on the configured
problem and reports a (value, tolerance, pass) row with a stable identifier.
Exact identities use floating-point-scale tolerances; Monte Carlo identities
use multiples of the standard error; quadrature-limited identities either meet
the configured tolerance directly (noise-free problems) or are validated by a
common-noise refinement ratio.
"""

from __future__ import annotations

import numpy as np

from .config import RunConfig
from .convergence import skorokhod_distance
from .evolution import cocycle_residual, forward_residual
from .levy import char_functional, coarsen_path, empirical_char, evaluate_array, ito_components, pairing_samples, simulate_path
from .ou import (
    SEEProblem,
    flow_apply,
    fubini_residual,
    markov_diagnostic,
    mild_solution,
    ou_cadlag,
    square_moment_report,
    weak_solution_residual,
)
from .report import CheckRow
from .rng import derive_seed, substream
from .stochint import commute_operator, levy_integral, weak_levy_integral


def _scale(values: np.ndarray) -> float:
    return max(1.0, float(np.max(np.abs(values))))


def run_identity_suite(cfg: RunConfig) -> list[CheckRow]:
    rows: list[CheckRow] = []
    problem = cfg.problem
    chars = cfg.chars
    tol = cfg.tolerances
    rng = substream(cfg.seed, "verify/probes")
    psi = rng.standard_normal(cfg.dimension)
    path = simulate_path(chars, cfg.horizon, cfg.grid, derive_seed(cfg.seed, "verify/path"))
    eta_rng = substream(cfg.seed, "verify/initial")
    eta = problem.resolve_initial(eta_rng)

    # weak-strong compatibility of the plain integral
    strong = levy_integral(cfg.integrand, path, chars, cfg.subpanels)
    weak = weak_levy_integral(cfg.integrand, psi, path, chars, cfg.subpanels)
    scale = _scale(strong.values)
    gap = float(np.max(np.abs(strong.values @ psi - weak)))
    rows.append(CheckRow("weak_strong_compatibility", gap, 1e-11 * scale, gap <= 1e-11 * scale))

    # decomposition sum identity at the final time
    parts = ito_components(path, chars, cfg.horizon)
    total = sum(np.asarray(p) for p in parts)
    lt = evaluate_array(path, chars, np.array([cfg.horizon]))[0]
    d = float(np.max(np.abs(total - lt)))
    s = _scale(lt)
    rows.append(CheckRow("ito_decomposition_sum", d, 1e-12 * s, d <= 1e-12 * s))

    # path determinism
    path2 = simulate_path(chars, cfg.horizon, cfg.grid, derive_seed(cfg.seed, "verify/path"))
    same = (
        np.array_equal(path.wiener_increments, path2.wiener_increments)
        and np.array_equal(path.jump_times, path2.jump_times)
        and np.array_equal(path.jump_atoms, path2.jump_atoms)
    )
    rows.append(CheckRow("path_determinism", 0.0 if same else 1.0, 0.0, same))

    # characteristic functional match on a few probe pairs
    n_mc = max(1000, cfg.ensemble)
    pairs = [(float(t), phi) for t in cfg.times for phi in cfg.probes]
    samples = pairing_samples(chars, pairs, n_mc, cfg.seed, label="verify/lk")
    worst = 0.0
    ok = True
    for c, (t, phi) in enumerate(pairs):
        est, se = empirical_char(samples[:, c], 1.0)
        ana = char_functional(chars, t, phi)
        dev = abs(est - ana)
        limit = tol["se_sigma"] * max(se, 1e-300)
        worst = max(worst, dev / limit)
        ok = ok and dev <= limit
    rows.append(CheckRow("levy_khintchine_match", worst, 1.0, ok, f"{len(pairs)} pairs, {n_mc} paths"))

    # zero mean of the martingale components, on the first probe pair
    t, phi = pairs[0]
    vals = np.empty(n_mc)
    for r in range(n_mc):
        pr = simulate_path(chars, cfg.horizon, cfg.grid, derive_seed(cfg.seed, f"verify/zm/{r}"))
        _, wie, small, _ = ito_components(pr, chars, float(t))
        vals[r] = float((np.asarray(wie) + np.asarray(small)) @ phi)
    se = float(np.std(vals, ddof=1) / np.sqrt(n_mc))
    if se == 0.0:
        ratio = 0.0 if abs(np.mean(vals)) == 0 else np.inf
    else:
        ratio = abs(float(np.mean(vals))) / (tol["se_sigma"] * se)
    rows.append(CheckRow("martingale_zero_mean", ratio, 1.0, ratio <= 1.0))

    # evolution identities
    ident = float(np.max(np.abs(problem.system.apply(cfg.horizon, cfg.horizon, psi) - psi)))
    rows.append(CheckRow("evolution_identity", ident, 0.0, ident == 0.0))
    f = rng.standard_normal(cfg.dimension)
    dual_gap = abs(
        float(problem.system.apply_dual(cfg.horizon, 0.0, f) @ psi)
        - float(f @ problem.system.apply(0.0, cfg.horizon, psi))
    )
    rows.append(CheckRow("transpose_duality", dual_gap, 1e-12 * _scale(f) * _scale(psi) * 10, dual_gap <= 1e-11 * _scale(f)))
    mid = 0.5 * cfg.horizon * (1 + 1 / np.pi)
    coc = cocycle_residual(problem.system, 0.0, mid, cfg.horizon, psi)
    if problem.system.is_diagonal():
        coc_tol = 1e-12 * _scale(psi)
    else:
        coc_tol = 100.0 * getattr(problem.system, "dt", 0.01) ** 2
    rows.append(CheckRow("evolution_cocycle", coc, coc_tol, coc <= coc_tol))
    fr = forward_residual(problem.system, problem.generator, 0.0, cfg.horizon, psi, panels=256)
    rows.append(CheckRow("forward_equation_residual", fr, tol["quadrature"], fr <= tol["quadrature"]))

    # solution-level identities
    sol = mild_solution(problem, path, eta=eta, subpanels=cfg.subpanels)
    wres = weak_solution_residual(problem, sol, path, psi, cfg.horizon, subpanels=cfg.subpanels)
    wscale = _scale(sol.values @ psi)
    if chars.covariance.any():
        # Wiener grid bias: certify the refinement order with common noise
        fine = simulate_path(chars, cfg.horizon, np.linspace(0, cfg.horizon, 4 * (cfg.grid.size - 1) + 1), derive_seed(cfg.seed, "verify/ref"))
        mids = coarsen_path(fine, 2)
        coarse = coarsen_path(fine, 4)
        res = []
        for p in (coarse, mids, fine):
            pr = SEEProblem(
                system=problem.system, integrand=problem.integrand, chars=chars,
                family=problem.family, initial=eta, horizon=cfg.horizon, grid=p.grid,
            )
            s = mild_solution(pr, p, subpanels=cfg.subpanels)
            res.append(weak_solution_residual(pr, s, p, psi, cfg.horizon, subpanels=cfg.subpanels))
        ratios = [res[0] / res[1], res[1] / res[2]]
        ok = all(1.4 <= r <= 2.8 for r in ratios)
        rows.append(CheckRow("weak_solution_refinement", float(np.mean(ratios)), 2.0, ok, f"residuals {res}"))
    else:
        rows.append(CheckRow("weak_solution_residual", wres, 1e-9 * wscale, wres <= 1e-9 * wscale))

    r1, r2 = fubini_residual(problem, path, psi, cfg.horizon, subpanels=max(2, cfg.subpanels))
    if chars.covariance.any():
        fub_tol = max(tol["quadrature"], 0.5 * np.sqrt(np.max(chars.covariance)) * (cfg.grid[1] - cfg.grid[0]) ** 0.5)
        detail = "wiener-driven: order-1 grid bias bound"
    else:
        fub_tol = max(tol["quadrature"], 1e-8 * wscale)
        detail = ""
    rows.append(CheckRow("fubini_iterated_integration", max(r1, r2), fub_tol, max(r1, r2) <= fub_tol, detail))

    if problem.is_langevin:
        z = ou_cadlag(problem, path, eta=eta, subpanels=max(2, cfg.subpanels))
        if chars.covariance.any():
            gap_tol = max(tol["quadrature"], 2.0 * np.sqrt(np.max(chars.covariance) * (cfg.grid[1] - cfg.grid[0])))
        else:
            gap_tol = max(tol["quadrature"], 1e-7 * _scale(sol.values))
        vgap = float(np.max(np.abs(z.values - sol.values)))
        rows.append(CheckRow("mild_vs_cadlag", vgap, gap_tol, vgap <= gap_tol))
        if path.jump_times.size:
            jerr = 0.0
            bt = problem.integrand.constant_matrix
            for k, tau in enumerate(path.jump_times):
                i = z.index_of(float(tau))
                jerr = max(jerr, float(np.max(np.abs(z.values[i] - z.pre_values[i] - bt @ chars.jump_marks[path.jump_atoms[k]]))))
            jtol = 8 * np.finfo(float).eps * _scale(z.values)
            rows.append(CheckRow("jump_reconstruction", jerr, jtol, jerr <= jtol))
        g = rng.standard_normal(cfg.dimension)
        r_mid = cfg.grid[cfg.grid.size // 3]
        s_mid = cfg.grid[2 * cfg.grid.size // 3]
        comp = flow_apply(problem, s_mid, cfg.horizon, flow_apply(problem, r_mid, s_mid, g, path, cfg.subpanels), path, cfg.subpanels)
        direct = flow_apply(problem, r_mid, cfg.horizon, g, path, cfg.subpanels)
        flow_gap = float(np.max(np.abs(comp - direct)))
        fscale = _scale(direct)
        rows.append(CheckRow("flow_composition", flow_gap, 1e-10 * fscale, flow_gap <= 1e-10 * fscale))

    # operator commutation with the integral
    s_mat = rng.standard_normal((cfg.dimension, cfg.dimension))
    cres = commute_operator(s_mat, cfg.integrand, path, chars, cfg.subpanels)
    cscale = _scale(strong.values) * _scale(s_mat)
    rows.append(CheckRow("operator_commutation", cres, 1e-11 * cscale, cres <= 1e-11 * cscale))

    # Markov factorization (needs a real ensemble)
    if cfg.ensemble >= 1000 and problem.is_langevin and chars.has_noise():
        s_pt = cfg.grid[cfg.grid.size // 2]
        gap_m, se_m = markov_diagnostic(problem, float(s_pt), float(cfg.horizon - s_pt), psi, cfg.ensemble, cfg.seed)
        limit = tol["se_sigma"] * max(se_m, 1e-300)
        rows.append(CheckRow("markov_factorization", gap_m, limit, gap_m <= limit, f"se {se_m:.2e}"))

    # square-moment level monotonicity
    if problem.family.max_level >= 1 and chars.has_noise():
        rep = square_moment_report(problem, min(cfg.ensemble, 400), list(range(problem.family.max_level + 1)), cfg.horizon, cfg.seed)
        rows.append(CheckRow("square_moment_monotone", 0.0 if rep["monotone"] else 1.0, 0.0, rep["monotone"]))

    # Skorokhod sanity: self distance is exactly zero
    d_self = skorokhod_distance(sol, sol, problem.family, 0, cfg.horizon)
    rows.append(CheckRow("skorokhod_self_distance", d_self, 0.0, d_self == 0.0))

    return rows
