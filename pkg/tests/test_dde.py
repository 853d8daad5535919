import io
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nadim.dde import (
    DelaySystem,
    IntegrationError,
    PiecewiseConstant,
    Trajectory,
    constraint_times,
    integrate,
    linear_system,
    logistic_delay,
    myshkis_check,
    rescale_time,
    restricted_norm_estimate,
    stability_cap,
    variational_solve,
    window_sup,
)
from nadim.growth import ladder_from_delay


def test_zero_rhs_keeps_constant():
    S = linear_system(1.0, 2, [(0.0, 1.0)])
    tr = integrate(S, [3.0, -1.0], 0.0, 4.0, 0.125)
    assert np.all(tr.x == np.array([3.0, -1.0]))


def test_cosine_solution():
    S = linear_system(1.0, 1, [(-math.pi / 2, 1.0)])
    tr = integrate(S, lambda s: math.cos(math.pi * s / 2), 0.0, 10.0, 1e-3)
    ts = np.linspace(0, 10, 2001)
    assert np.abs(tr.sample(ts)[:, 0] - np.cos(np.pi * ts / 2)).max() <= 1e-6


def test_one_step_by_hand():
    S = linear_system(1.0, 1, [(-1.0, 1.0)])
    tr = integrate(S, 1.0, 0.0, 2.0, 1e-3)
    assert abs(tr(1.0)[0]) <= 1e-9
    # second interval: x = 1 - t + (t-1)^2/2
    assert tr(1.5)[0] == pytest.approx(-0.5 + 0.125, abs=1e-9)


def test_step_must_divide_delay():
    S = linear_system(1.0, 1, [(-1.0, 1.0)])
    with pytest.raises(IntegrationError):
        integrate(S, 1.0, 0.0, 2.0, 0.3)


def test_integrate_is_deterministic():
    S = linear_system(1.0, 2, [(np.array([[0.2, -0.5], [0.3, 0.1]]), 0.5), (-0.4, 1.0)])
    a = integrate(S, lambda s: [math.sin(s), 1.0], 0.0, 6.0, 1 / 64)
    b = integrate(S, lambda s: [math.sin(s), 1.0], 0.0, 6.0, 1 / 64)
    assert a.x.tobytes() == b.x.tobytes() and a.t.tobytes() == b.t.tobytes()


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6))
def test_lipschitz_dependence(seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 3))
    terms = [(rng.uniform(-1, 1, (d, d)), float(rng.choice([0.0, 0.25, 0.5, 1.0]))) for _ in range(2)]
    S = linear_system(1.0, d, terms)
    T = 3.0
    a, b = rng.uniform(-1, 1, d), rng.uniform(-1, 1, d)
    w = rng.uniform(1, 4)
    phi = lambda s: a * np.cos(w * s)  # noqa: E731
    psi = lambda s: b * np.sin(w * s) + a  # noqa: E731
    x = integrate(S, phi, 0.0, T, 1 / 64)
    y = integrate(S, psi, 0.0, T, 1 / 64)
    grid = np.linspace(-1, 0, 401)
    init = max(np.abs(phi(s) - psi(s)).max() for s in grid)
    n = sum(float(np.abs(A).sum(axis=1).max()) for A, _ in terms)
    gap = float(np.abs(x.x - y.x).max())
    assert gap <= math.exp(n * T) * init * (1 + 1e-6)


def test_variational_linear_is_exact_difference():
    S = linear_system(1.0, 1, [(-0.7, 1.0), (0.3, 0.5)])
    phi = lambda s: [math.cos(s)]  # noqa: E731
    xi = lambda s: [0.5 + s]  # noqa: E731
    V = variational_solve(S, phi, xi, 5.0, 1e-2)
    x = integrate(S, phi, 0.0, 5.0, 1e-2)
    xp = integrate(S, lambda s: [math.cos(s) + 0.5 + s], 0.0, 5.0, 1e-2)
    assert np.abs(xp.x - x.x - V.x).max() <= 1e-8


def test_variational_zero_direction():
    V = variational_solve(logistic_delay(1.0), 0.5, 0.0, 5.0, 1e-2)
    assert np.all(V.x == 0)


def test_variational_logistic_converges():
    S = logistic_delay(1.0)
    phi = lambda s: [0.5 + 0.2 * math.cos(s)]  # noqa: E731
    xi = lambda s: [math.sin(3 * s) + 0.3]  # noqa: E731
    base = integrate(S, phi, 0.0, 10.0, 1e-2)
    V = variational_solve(S, phi, xi, 10.0, 1e-2, base)
    hs = (1e-2, 1e-3, 1e-4)
    errs = []
    for eps in hs:
        xe = integrate(S, lambda s, e=eps: [phi(s)[0] + e * xi(s)[0]], 0.0, 10.0, 1e-2)
        errs.append(float(np.abs(xe.x - base.x - eps * V.x).max()) / eps)
    assert errs[0] > errs[1] > errs[2]
    assert np.polyfit(np.log(hs), np.log(errs), 1)[0] >= 0.9


def test_variational_needs_derivative():
    S = DelaySystem(1.0, 1, (), None, lambda t, c, lk: c, None)
    with pytest.raises(ValueError):
        variational_solve(S, 1.0, 1.0, 1.0, 0.1)


def test_rescale_identity():
    S = linear_system(1.0, 1, [(-1.0, 1.0)], 1.0)
    R = rescale_time(S)
    assert R.r == 1.0 and R.f(3.0) == pytest.approx(3.0) and R.g(2.5) == pytest.approx(2.5)


def test_rescale_doubling():
    S = linear_system(1.0, 1, [(-2.0, 1.0)], 2.0)
    R = rescale_time(S)
    assert R.r == 2.0 and R.f(1.5) == pytest.approx(3.0) and R.g(3.0) == pytest.approx(1.5)
    assert R.majorant_max <= 1 + 1e-12
    phi = lambda s: [math.cos(3 * s) + 0.5]  # noqa: E731
    x = integrate(S, phi, 0.0, 4.0, 1e-3)
    xt = integrate(R.system, R.initial_function(phi, 1.0, 1), 0.0, 8.0, 1e-3)
    assert max(abs(xt(s)[0] - x(s / 2)[0]) for s in np.linspace(0, 8, 801)) <= 1e-4


def test_rescale_plateau():
    n = PiecewiseConstant((0.0, 1.0), (1.0, 0.0, 1.0))
    A = PiecewiseConstant((0.0, 1.0), (-1.0, 0.0, -1.0))
    S = linear_system(1.0, 1, [(A, 1.0)], n)
    R = rescale_time(S)
    assert R.g(0.0) == pytest.approx(1.0)  # g jumps over the plateau
    phi = lambda s: [1.0 + s]  # noqa: E731
    x = integrate(S, phi, 0.0, 4.0, 1e-3)
    S_end = float(R.f(4.0))
    xt = integrate(R.system, R.initial_function(phi, 1.0, 1), 0.0, S_end, 1e-3)
    err = max(abs(xt(s)[0] - x(min(R.g(s), 4.0))[0]) for s in np.linspace(0, S_end, 601))
    assert err <= 1e-4


@settings(max_examples=12, deadline=None)
@given(st.integers(0, 10**6))
def test_rescale_composition_identity(seed):
    rng = np.random.default_rng(seed)
    nb = int(rng.integers(1, 11))
    brks = tuple(np.round(np.sort(rng.choice(np.arange(1, 60), nb, replace=False)) / 16, 6))
    vals = tuple(float(v) for v in rng.uniform(0.2, 2.5, nb + 1) * rng.choice([-1, 1], nb + 1))
    A = PiecewiseConstant(brks, vals)
    S = linear_system(1.0, 1, [(A, 1.0)])
    R = rescale_time(S)
    assert R.majorant_max <= 1 + 1e-12
    T = 4.0
    phi = lambda s: [math.cos(2 * s)]  # noqa: E731
    x = integrate(S, phi, 0.0, T, 1e-3)
    S_end = float(R.f(T))
    h = R.r / math.ceil(R.r / 1e-3)
    xt = integrate(R.system, R.initial_function(phi, 1.0, 1), 0.0, S_end, h)
    err = max(abs(xt(s)[0] - x(min(R.g(s), T))[0]) for s in np.linspace(0, S_end, 401))
    assert err <= 1e-4


def test_window_sup_exact():
    n = PiecewiseConstant((0.0, 0.5, 2.0), (1.0, 3.0, 0.0, 1.0))
    # best unit window sits on [0, 1]: 0.5*3 + 0.5*0
    assert window_sup(n, 1.0) == pytest.approx(2.0)


def test_constraint_times():
    assert constraint_times(1.0, 0) == []
    assert constraint_times(1.0, 1) == [0.0]
    assert constraint_times(1.0, 2) == [0.0, 1.0]
    assert constraint_times(1.0, 4) == [0.0, 0.25, 0.5, 0.75, 1.0]


def test_restricted_norm_examples():
    zero = linear_system(1.0, 1, [(0.0, 1.0)], 1.0)
    e0 = restricted_norm_estimate(zero, 0)
    assert e0.estimate == pytest.approx(1.0) and e0.within
    neg = linear_system(1.0, 1, [(-1.0, 1.0)], 1.0)
    assert restricted_norm_estimate(neg, 0).estimate <= math.e * 1.01
    e2 = restricted_norm_estimate(neg, 2)
    assert e2.estimate <= 0.5 * 1.1 and e2.codim == 2
    with pytest.raises(ValueError):
        restricted_norm_estimate(neg, 2, samples=10)
    with pytest.raises(ValueError):
        restricted_norm_estimate(logistic_delay(), 1)


def test_myshkis_examples():
    zero = Trajectory.from_function(lambda t: 0.0, 0.0, 1.0, 1e-3)
    assert myshkis_check(zero, 1.0, 1, 1.0).status == "pass"
    wave = Trajectory.from_function(lambda t: math.sin(2 * math.pi * t), 0.0, 1.0, 1e-3)
    r = myshkis_check(wave, 1.0, 1, 1.0)
    assert r.status == "fail" and r.bound == 0.5 and r.sup == pytest.approx(1.0, abs=1e-6)
    off = Trajectory.from_function(lambda t: 1.0 - t, 0.0, 1.0, 1e-3)
    assert myshkis_check(off, 1.0, 1, 1.0).status == "hypothesis-unmet"


def test_myshkis_on_real_solution():
    # x' = -x(t-1) from φ(s) = sin 2πs: x = (cos 2πt - 1)/2π vanishes at 0 and 1
    S = linear_system(1.0, 1, [(-1.0, 1.0)])
    tr = integrate(S, lambda s: math.sin(2 * math.pi * s), 0.0, 1.0, 1e-3)
    r = myshkis_check(tr, 1.0, 1, 1.0)
    assert r.status == "pass" and r.sup == pytest.approx(1 / math.pi, abs=1e-6)


def test_stability_cap_examples():
    L = ladder_from_delay(1.0, 1, 10)
    assert stability_cap(1.0, L) == (2, 2)
    assert stability_cap(0.5, L) == (1, 1)
    caps = [stability_cap(M, L)[1] for M in (10.0, 100.0, 1000.0)]
    for M, i in zip((10.0, 100.0, 1000.0), caps):
        assert i == math.floor(math.log2(M)) + 2
    with pytest.raises(ValueError):
        stability_cap(0.0, L)


def test_system_json_roundtrip():
    obj = {"tau": 1.0, "d": 1, "terms": [{"A": {"breaks": [0.5], "values": [-1.0, 1.0]}, "sigma": 1.0}],
           "majorant": 1.0}
    S = DelaySystem.from_json(obj)
    assert DelaySystem.from_json(S.to_json()) == S
    assert DelaySystem.from_json({"model": "logistic-delay"}).name == "logistic-delay"


def test_csv_export_roundtrip():
    S = linear_system(1.0, 1, [(-1.0, 1.0)])
    tr = integrate(S, 1.0, 0.0, 1.0, 0.25)
    buf = io.StringIO()
    tr.to_csv(buf)
    rows = buf.getvalue().splitlines()
    assert rows[0] == "t,x1" and len(rows) == 6 and rows[-1].startswith("1.0,")
