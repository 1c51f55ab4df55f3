import numpy as np
import pytest

from levyou.errors import ContractError, DimensionMismatch
from levyou.levy import LevyCharacteristics, evaluate_array, ito_components, simulate_path
from levyou.rng import replica_seed
from levyou.spaces import SeminormFamily
from levyou.stochint import (
    IntegrandR,
    commute_operator,
    comp_poisson_integral,
    drift_integral,
    effective_times,
    levy_integral,
    membership_report,
    poisson_integral,
    weak_levy_integral,
    weak_levy_value,
    wiener_integral,
)

GRID = np.linspace(0.0, 1.0, 17)


def make_chars(n=2, seed=0, with_wiener=True, small=True, large=True, drift=True):
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n))
    rates, marks = [], []
    if small:
        rates.append(rng.uniform(0.5, 3.0))
        marks.append(0.2 * rng.standard_normal(n))
    if large:
        rates.append(rng.uniform(0.5, 2.0))
        marks.append(5.0 * rng.standard_normal(n))
    return LevyCharacteristics(
        drift=rng.standard_normal(n) if drift else np.zeros(n),
        covariance=0.3 * a @ a.T if with_wiener else np.zeros((n, n)),
        jump_rates=np.asarray(rates),
        jump_marks=np.stack(marks) if marks else np.empty((0, n)),
        family=SeminormFamily.hermite(n, 2),
    )


def test_drift_integral_zero_density():
    R = IntegrandR.identity(2)
    ip = drift_integral(R, np.zeros(2), GRID)
    assert np.all(ip.values == 0.0)


def test_drift_integral_constant_exact():
    m = np.array([0.7, -0.2])
    ip = drift_integral(IntegrandR.identity(2), m, GRID)
    for i, t in enumerate(GRID):
        assert np.allclose(ip.values[i], t * m, rtol=1e-15, atol=1e-16)


def test_drift_integral_time_varying_oracle():
    # oracle: int_0^1 s ds = 1/2 (Simpson exact for polynomials)
    R = IntegrandR.time_varying(lambda t: np.diag([t, t]), 2)
    ip = drift_integral(R, np.array([1.0, 0.0]), GRID)
    assert ip.values[-1][0] == pytest.approx(0.5, rel=1e-14)
    assert ip.values[-1][1] == 0.0


def test_drift_integral_pairing_identity():
    # <int R h, psi> equals the scalar quadrature of <h, R' psi> on the same nodes
    from levyou.quadrature import simpson_nodes_weights

    rng = np.random.default_rng(3)
    R = IntegrandR.time_varying(lambda t: np.array([[1.0, t], [0.0, np.cos(t)]]), 2)
    h = lambda s: np.array([np.sin(s), 1.0 + s])
    psi = rng.standard_normal(2)
    ip = drift_integral(R, h, GRID, subpanels=2)
    acc = 0.0
    for j in range(GRID.size - 1):
        nodes, weights = simpson_nodes_weights(GRID[j], GRID[j + 1], 2)
        acc += float(np.dot(weights, [h(s) @ (R.mat(s).T @ psi) for s in nodes]))
        assert ip.values[j + 1] @ psi == pytest.approx(acc, rel=1e-12, abs=1e-14)


def test_wiener_integral_zero_integrand():
    chars = make_chars()
    path = simulate_path(chars, 1.0, GRID, seed=1)
    ip = wiener_integral(IntegrandR.constant(np.zeros((2, 2))), path, chars)
    assert np.all(ip.values == 0.0)


def test_wiener_integral_identity_reproduces_wiener_part():
    chars = make_chars()
    path = simulate_path(chars, 1.0, GRID, seed=2)
    ip = wiener_integral(IntegrandR.identity(2), path, chars)
    for t in GRID:
        i = np.searchsorted(ip.times, t)
        assert np.allclose(ip.values[i], path.wiener_at(float(t)), atol=0.0)


def test_wiener_integral_variance_matches_covariance():
    # Var <int I dW, psi> at t equals t * psi' Q psi, within 3 SE
    chars = make_chars(with_wiener=True, small=False, large=False, drift=False)
    psi = np.array([0.8, -0.4])
    n = 8000
    vals = np.empty(n)
    for r in range(n):
        path = simulate_path(chars, 1.0, GRID, seed=replica_seed(55, "wi", r))
        ip = wiener_integral(IntegrandR.identity(2), path, chars)
        vals[r] = ip.values[-1] @ psi
    target = float(psi @ chars.covariance @ psi)
    var = vals.var(ddof=1)
    se = var * np.sqrt(2.0 / (n - 1))
    assert abs(var - target) <= 3 * se
    assert abs(vals.mean()) <= 3 * vals.std(ddof=1) / np.sqrt(n)


def test_comp_poisson_no_small_atoms():
    chars = make_chars(small=False)
    path = simulate_path(chars, 1.0, GRID, seed=4)
    ip = comp_poisson_integral(IntegrandR.identity(2), path, chars)
    assert np.all(ip.values == 0.0)


def test_comp_poisson_identity_matches_decomposition():
    chars = make_chars()
    path = simulate_path(chars, 1.0, GRID, seed=5)
    ip = comp_poisson_integral(IntegrandR.identity(2), path, chars)
    for t in GRID:
        i = np.searchsorted(ip.times, t)
        _, _, small, _ = ito_components(path, chars, float(t))
        assert np.allclose(ip.values[i], np.asarray(small), atol=1e-14)


def test_comp_poisson_second_moment():
    # E <M_t, psi>^2 = t * sum_small rate <mark, psi>^2, within 3 SE
    fam = SeminormFamily.hermite(2, 1)
    chars = LevyCharacteristics(
        drift=np.zeros(2), covariance=np.zeros((2, 2)),
        jump_rates=np.array([2.5]), jump_marks=np.array([[0.4, -0.2]]), family=fam,
    )
    psi = np.array([1.0, 0.5])
    n = 8000
    vals = np.empty(n)
    for r in range(n):
        path = simulate_path(chars, 1.0, np.array([0.0, 1.0]), seed=replica_seed(66, "cp", r))
        ip = comp_poisson_integral(IntegrandR.identity(2), path, chars)
        vals[r] = ip.values[-1] @ psi
    target = 2.5 * float(chars.jump_marks[0] @ psi) ** 2
    m2 = np.mean(vals**2)
    se = np.std(vals**2, ddof=1) / np.sqrt(n)
    assert abs(m2 - target) <= 3 * se


def test_poisson_integral_no_large_jumps():
    chars = make_chars(large=False)
    path = simulate_path(chars, 1.0, GRID, seed=6)
    ip = poisson_integral(IntegrandR.identity(2), path, chars)
    assert np.all(ip.values == 0.0)


def test_poisson_integral_single_jump_step():
    fam = SeminormFamily.hermite(2, 1)
    chars = LevyCharacteristics(
        drift=np.zeros(2), covariance=np.zeros((2, 2)),
        jump_rates=np.array([1.0]), jump_marks=np.array([[3.0, -1.0]]), family=fam,
    )
    for seed in range(50):
        path = simulate_path(chars, 1.0, GRID, seed=seed)
        if path.jump_times.size == 1:
            break
    ip = poisson_integral(IntegrandR.identity(2), path, chars)
    tau = path.jump_times[0]
    for i, t in enumerate(ip.times):
        expected = chars.jump_marks[0] if t >= tau else np.zeros(2)
        assert np.allclose(ip.values[i], expected, atol=0.0)
    i_tau = np.searchsorted(ip.times, tau)
    assert np.all(ip.pre_values[i_tau] == 0.0)


def test_poisson_integral_mark_dependent():
    # R(t, f) = diag(f_1): the step at tau equals diag(f_1) @ f
    fam = SeminormFamily.hermite(2, 1)
    chars = LevyCharacteristics(
        drift=np.zeros(2), covariance=np.zeros((2, 2)),
        jump_rates=np.array([1.5]), jump_marks=np.array([[3.0, -1.0]]), family=fam,
    )
    R = IntegrandR.mark_dependent(lambda t, f: np.diag([f[0], f[0]]), 2)
    for seed in range(50):
        path = simulate_path(chars, 1.0, GRID, seed=seed)
        if path.jump_times.size == 1:
            break
    ip = poisson_integral(R, path, chars)
    expected = np.diag([3.0, 3.0]) @ chars.jump_marks[0]
    assert np.allclose(ip.values[-1], expected, atol=0.0)


def test_levy_integral_identity_reproduces_path():
    chars = make_chars()
    path = simulate_path(chars, 1.0, GRID, seed=7)
    ip = levy_integral(IntegrandR.identity(2), path, chars)
    lt = evaluate_array(path, chars, ip.times)
    scale = max(1.0, np.max(np.abs(lt)))
    assert np.max(np.abs(ip.values - lt)) <= 1e-12 * scale


def test_levy_integral_zero_integrand():
    chars = make_chars()
    path = simulate_path(chars, 1.0, GRID, seed=8)
    ip = levy_integral(IntegrandR.constant(np.zeros((2, 2))), path, chars)
    assert np.all(ip.values == 0.0)


def test_levy_integral_constant_equals_mapped_path():
    # constant R: the integral is R applied to the path values
    chars = make_chars()
    b = np.array([[1.0, 0.4], [-0.2, 0.9]])
    path = simulate_path(chars, 1.0, GRID, seed=9)
    ip = levy_integral(IntegrandR.constant(b), path, chars)
    lt = evaluate_array(path, chars, ip.times)
    assert np.max(np.abs(ip.values - lt @ b.T)) <= 1e-11 * max(1.0, np.max(np.abs(lt)))


def test_region_additivity():
    chars = make_chars()
    path = simulate_path(chars, 1.0, GRID, seed=10)
    R = IntegrandR.identity(2)
    small = comp_poisson_integral(R, path, chars)
    large = poisson_integral(R, path, chars)
    ip = levy_integral(R, path, chars)
    jump_part = ip.components["comp_poisson"] + ip.components["poisson"]
    assert np.array_equal(small.values + large.values, jump_part)


def test_weak_strong_compatibility_random_instances():
    rng = np.random.default_rng(12)
    worst = 0.0
    for trial in range(100):
        n = int(rng.integers(1, 17))
        chars = make_chars(n=n, seed=trial)
        kind = trial % 3
        if kind == 0:
            R = IntegrandR.constant(rng.standard_normal((n, n)))
        elif kind == 1:
            m0, m1 = rng.standard_normal((2, n, n))
            R = IntegrandR.time_varying(lambda t, m0=m0, m1=m1: m0 + t * m1, n)
        else:
            m0, m1 = rng.standard_normal((2, n, n))
            R = IntegrandR.mark_dependent(
                lambda t, f, m0=m0, m1=m1: m0 + float(f[0]) * m1, n
            )
        path = simulate_path(chars, 1.0, np.linspace(0, 1, 9), seed=trial)
        psi = rng.standard_normal(n)
        strong = levy_integral(R, path, chars)
        weak = weak_levy_integral(R, psi, path, chars)
        scale = max(1.0, np.max(np.abs(strong.values)), np.max(np.abs(psi)))
        worst = max(worst, np.max(np.abs(strong.values @ psi - weak)) / scale)
    assert worst <= 1e-11


def test_weak_integral_zero_test_vector():
    chars = make_chars()
    path = simulate_path(chars, 1.0, GRID, seed=13)
    weak = weak_levy_integral(IntegrandR.identity(2), np.zeros(2), path, chars)
    assert np.all(weak == 0.0)


def test_weak_integral_linear_in_test_vector():
    chars = make_chars()
    path = simulate_path(chars, 1.0, GRID, seed=14)
    R = IntegrandR.identity(2)
    rng = np.random.default_rng(15)
    x, y = rng.standard_normal((2, 2))
    a, b = 1.3, -0.7
    combo = weak_levy_integral(R, a * x + b * y, path, chars)
    split = a * weak_levy_integral(R, x, path, chars) + b * weak_levy_integral(R, y, path, chars)
    assert np.max(np.abs(combo - split)) <= 1e-12 * max(1.0, np.max(np.abs(combo)))


def test_weak_value_left_limit_excludes_jump():
    chars = make_chars(with_wiener=False, drift=False, small=False)
    for seed in range(50):
        path = simulate_path(chars, 1.0, GRID, seed=seed)
        if path.jump_times.size:
            break
    assert path.jump_times.size > 0
    tau = float(path.jump_times[0])
    psi = np.array([1.0, 1.0])
    R = IntegrandR.identity(2)
    post = weak_levy_value(R, path, chars, tau, psi)
    pre = weak_levy_value(R, path, chars, tau, psi, left_limit=True)
    mark = chars.jump_marks[path.jump_atoms[0]]
    assert post - pre == pytest.approx(float(mark @ psi), rel=1e-12)


def test_commute_operator_identity_and_zero():
    chars = make_chars()
    path = simulate_path(chars, 1.0, GRID, seed=17)
    R = IntegrandR.identity(2)
    assert commute_operator(np.eye(2), R, path, chars) == 0.0
    assert commute_operator(np.zeros((2, 2)), R, path, chars) == 0.0


def test_commute_operator_random_instances():
    rng = np.random.default_rng(18)
    n = 8
    chars = make_chars(n=n, seed=99)
    path = simulate_path(chars, 1.0, np.linspace(0, 1, 9), seed=19)
    for _ in range(10):
        s = rng.standard_normal((n, n))
        R = IntegrandR.time_varying(
            lambda t, m=rng.standard_normal((n, n)): m * (1 + 0.5 * t), n
        )
        strong = levy_integral(R, path, chars)
        scale = max(1.0, np.max(np.abs(strong.values)) * np.max(np.abs(s)))
        assert commute_operator(s, R, path, chars) <= 1e-11 * scale


def test_ito_isometry_against_membership_report():
    # Var of the martingale-part integral equals the deterministic
    # square-integrability terms: E int [Q(R'psi)^2 + sum_small rate <f, R'psi>^2] ds
    chars = make_chars(seed=7, large=False)
    R = IntegrandR.constant(np.array([[1.0, 0.3], [-0.2, 0.8]]))
    psi = np.array([0.9, -0.3])
    rep = membership_report(R, chars, 1.0, psi)
    target = rep["wiener"] + rep["small_jump"]
    n = 8000
    vals = np.empty(n)
    for r in range(n):
        path = simulate_path(chars, 1.0, GRID, seed=replica_seed(77, "iso", r))
        m_part = wiener_integral(R, path, chars).values + comp_poisson_integral(R, path, chars).values
        vals[r] = m_part[-1] @ psi
    var = vals.var(ddof=1)
    se = var * np.sqrt(2.0 / (n - 1))
    assert abs(var - target) <= 3 * se


def test_membership_report_finite_and_positive():
    chars = make_chars()
    R = IntegrandR.constant(np.array([[1.0, 0.2], [0.0, 1.0]]))
    rep = membership_report(R, chars, 1.0, np.array([0.5, -0.5]), include_large=True)
    assert rep["finite"]
    for key in ("drift", "wiener", "small_jump", "large_jump"):
        assert rep[key] >= 0.0


def test_integrand_validation():
    with pytest.raises(DimensionMismatch):
        IntegrandR.constant(np.zeros((2, 3)))
    R = IntegrandR.time_varying(lambda t: np.zeros((3, 3)), 2)
    with pytest.raises(DimensionMismatch):
        R.mat(0.0)
    with pytest.raises(ContractError):
        IntegrandR.time_varying(lambda t: np.zeros((2, 2)), 2).constant_matrix


def test_effective_times_contains_jumps():
    chars = make_chars()
    path = simulate_path(chars, 1.0, GRID, seed=20)
    times = effective_times(path)
    for tau in path.jump_times:
        assert tau in times
    for t in GRID:
        assert t in times
