"""The property suite behind ``nadim verify``: one check per acceptance criterion.

Each check takes its tolerance as a keyword so callers can pin it; the
defaults are the published thresholds.
"""
from __future__ import annotations

import math
import random
import tempfile
import time
from dataclasses import dataclass
from fractions import Fraction
from importlib import resources
from pathlib import Path

import numpy as np

from .boxdim import PointCloud, cantor_points, minkowski_dim
from .cocycle import check_diagonal_cocycle
from .dde import (
    integrate,
    linear_system,
    logistic_delay,
    rescale_time,
    restricted_norm_estimate,
    variational_solve,
    worst_case_family,
)
from .growth import (
    CompactnessLadder,
    NonlinearityBudget,
    certify,
    error_recursion,
    ladder_from_delay,
    minkowski_bound,
    minkowski_bound_value,
    nonlinear_eta,
    rho_infinity,
    search_mp,
)
from .linalg import _max_sign_det, g_oracle, pullback_det, square_map, compose
from .pipeline import parse_spec, run_pipeline
from .valued import REAL, Valuation


@dataclass(frozen=True)
class Check:
    key: str
    title: str
    passed: bool
    detail: str
    seconds: float

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.key} {self.title}: {self.detail} ({self.seconds:.2f}s)"


def _timed(key, title, limit, fn):
    t = time.perf_counter()
    ok, detail = fn()
    dt = time.perf_counter() - t
    if limit is not None and dt > limit:
        ok = False
        detail += f"; took {dt:.1f}s > {limit}s"
    return Check(key, title, bool(ok), detail, dt)


def example_path(name: str = "delay_tau1_d1.json") -> Path:
    return Path(str(resources.files("nadim").joinpath("configs", name)))


def check_g_oracle(limit: float = 10.0) -> Check:
    def run():
        _max_sign_det.cache_clear()
        g2, g3 = g_oracle(1, 2), g_oracle(1, 3)
        had = all(g_oracle(1, n).value <= n ** (n / 2) and g_oracle(1, n).exact for n in range(1, 6))
        ok = g2.value == 2 and g3.value == 4 and g2.exact and g3.exact and had
        return ok, f"g(1,2)={g2.value:g}, g(1,3)={g3.value:g}, Hadamard holds for n<=5: {had}"
    return _timed("AC1", "g-oracle", limit, run)


def _random_weights(rng, n):
    return tuple(float(np.exp(rng.uniform(-1, 1))) for _ in range(n))


def _random_padic_weights(rnd, n):
    return tuple(Fraction(rnd.choice([1, 2, 3, 5, 7])) / Fraction(rnd.choice([1, 5, 25, 3])) for _ in range(n))


def check_multiplicativity(pairs: int = 1000, rtol: float = 1e-9, seed: int = 0, limit: float = 30.0) -> Check:
    def run():
        rng = np.random.default_rng(seed)
        rnd = random.Random(seed)
        worst = 0.0
        for _ in range(pairs):
            n = int(rng.integers(1, 5))
            wx, wy, wz = (_random_weights(rng, n) for _ in range(3))
            S = square_map(REAL, rng.normal(size=(n, n)), wx, wy)
            T = square_map(REAL, rng.normal(size=(n, n)), wy, wz)
            lhs = pullback_det(compose(T, S))
            rhs = pullback_det(T) * pullback_det(S)
            worst = max(worst, abs(lhs - rhs) / max(abs(rhs), 1e-300))
        Q5 = Valuation.padic(5)
        exact = True
        for _ in range(pairs):
            n = rnd.randint(1, 4)
            wx, wy, wz = (_random_padic_weights(rnd, n) for _ in range(3))

            def mat():
                return [[Fraction(rnd.randint(-30, 30), rnd.choice([1, 2, 5, 25])) for _ in range(n)]
                        for _ in range(n)]
            S = square_map(Q5, mat(), wx, wy)
            T = square_map(Q5, mat(), wy, wz)
            if pullback_det(compose(T, S)) != pullback_det(T) * pullback_det(S):
                exact = False
        return worst <= rtol and exact, f"real worst rel err {worst:.2e} (tol {rtol:g}); Q_5 exact: {exact}"
    return _timed("AC2", "determinant multiplicativity", limit, run)


def check_rho_infinity(tol_const: float = 1e-6, tol_delay: float = 1e-12) -> Check:
    def run():
        errs = []
        for rho in (0.5, 0.1, 0.9):
            L = CompactnessLadder((0, 1), (rho, rho), generator={"kind": "constant", "rho": rho})
            errs.append(abs(rho_infinity(L, 1000).value - rho))
        prof3 = dict(rho_infinity(ladder_from_delay(1.0, 1, 6), 3).profile)[3]
        e2 = abs(prof3 - 0.5 ** (1 / 3))
        return max(errs) <= tol_const and e2 <= tol_delay, \
            f"constant ladder max err {max(errs):.2e}; delay profile_3 err {e2:.2e}"
    return _timed("AC3", "rho_infinity", None, run)


def check_minkowski(tol: float = 1e-12) -> Check:
    def run():
        exact = []
        for L, vp in ((ladder_from_delay(1.0, 1, 14), 0.95),
                      (CompactnessLadder((0, 1), (0.5, 0.5), generator={"kind": "constant", "rho": 0.5}), 0.9)):
            for prefer in ("ratio", "dimension"):
                c = search_mp(L, vp, prefer=prefer).certificate
                exact.append(minkowski_bound(c) == c.m - 1)
        v = minkowski_bound_value(3, 0.25, 0.5)
        return all(exact) and abs(v - 4.0) <= tol, f"varrho=1 gives m-1 exactly: {all(exact)}; closed form {v!r}"
    return _timed("AC4", "Minkowski bound", None, run)


def cocycle_certificates():
    L = CompactnessLadder((0, 1), (1.0, 0.5), generator={"kind": "geometric", "rho0": 1.0, "ratio": 0.5})
    return [
        search_mp(L, 0.95, prefer="dimension").certificate,
        certify(L, 0.9, 3, 1),
        certify(L, 0.95, 4, 1),
        certify(L, 0.99, 5, 1),
        search_mp(L, 0.95, p_max=2, s_max=4).certificate,
    ]


def check_cocycle(n_max: int = 30, rtol: float = 1e-6, seeds=(0, 1, 2), limit: float = 60.0) -> Check:
    def run():
        worst = 0.0
        ok = True
        runs = 0
        for cert in cocycle_certificates():
            for seed in seeds:
                r = check_diagonal_cocycle(cert, cert.m + 2, n_max, seed, rtol=rtol)
                ok &= r.ok
                runs += 1
                worst = max(worst, max(a / e for a, e in zip(r.separation, r.envelope)))
        return ok, f"{runs} cocycles, max A_N/envelope = {worst:.3g} over N <= {n_max}"
    return _timed("AC5", "synthetic cocycle decay", limit, run)


def check_integrator(tol_cos: float = 1e-6, tol_step: float = 1e-9, limit: float = 30.0) -> Check:
    def run():
        S = linear_system(1.0, 1, [(-math.pi / 2, 1.0)])
        tr = integrate(S, lambda s: np.array([math.cos(math.pi * s / 2)]), 0.0, 10.0, 1e-3)
        ts = np.linspace(0, 10, 4001)
        e1 = float(np.abs(tr.sample(ts)[:, 0] - np.cos(np.pi * ts / 2)).max())
        S2 = linear_system(1.0, 1, [(-1.0, 1.0)])
        x1 = float(integrate(S2, 1.0, 0.0, 1.0, 1e-3)(1.0)[0])
        return e1 <= tol_cos and abs(x1) <= tol_step, f"cos sup err {e1:.2e}; x(1) = {x1:.2e}"
    return _timed("AC6", "DDE integrator", limit, run)


def check_rescaling(tol: float = 1e-4, tol_major: float = 1e-12) -> Check:
    def run():
        S = linear_system(1.0, 1, [(-2.0, 1.0)], 2.0)
        R = rescale_time(S)
        phi = lambda s: np.array([math.cos(3 * s) + 0.5])  # noqa: E731
        x = integrate(S, phi, 0.0, 5.0, 1e-3)
        xt = integrate(R.system, R.initial_function(phi, S.tau, S.d), 0.0, 10.0, 1e-3)
        ss = np.linspace(0, 10, 2001)
        err = max(abs(float(xt(s)[0] - x(s / 2)[0])) for s in ss)
        return err <= tol and R.majorant_max <= 1 + tol_major and R.r == 2.0, \
            f"r = {R.r}, sup |x~(s) - x(s/2)| = {err:.2e}, max transformed majorant {R.majorant_max!r}"
    return _timed("AC7", "time rescaling", None, run)


def check_restricted_norm(bound: float = 0.55, samples: int = 100, seed: int = 0, limit: float = 120.0) -> Check:
    def run():
        ests = [restricted_norm_estimate(s, 2, samples, seed=seed + j).estimate
                for j, s in enumerate(worst_case_family(1.0, 1))]
        return max(ests) <= bound, f"max level-2 estimate {max(ests):.4f} over {len(ests)} systems (<= {bound})"
    return _timed("AC8", "restricted norms", limit, run)


def variational_errors(hs=(1e-2, 1e-3, 1e-4), T: float = 10.0, step: float = 1e-2):
    S = logistic_delay(1.0)
    phi = lambda s: np.array([0.5 + 0.2 * math.cos(s)])  # noqa: E731
    xi = lambda s: np.array([math.sin(3 * s) + 0.3])  # noqa: E731
    base = integrate(S, phi, 0.0, T, step)
    V = variational_solve(S, phi, xi, T, step, base)
    errs = []
    for eps in hs:
        xe = integrate(S, lambda s, eps=eps: phi(s) + eps * xi(s), 0.0, T, step)
        errs.append(float(np.abs(xe.x - base.x - eps * V.x).max()) / eps)
    return errs


def check_variational(min_slope: float = 0.9) -> Check:
    def run():
        hs = (1e-2, 1e-3, 1e-4)
        errs = variational_errors(hs)
        slope = float(np.polyfit(np.log(hs), np.log(errs), 1)[0])
        return slope >= min_slope, f"errors {', '.join(f'{e:.2e}' for e in errs)}; slope {slope:.3f}"
    return _timed("AC9", "variational convergence", None, run)


def check_boxdim(tol: float = 0.05, seed: int = 0, limit: float = 60.0) -> Check:
    def run():
        cantor = minkowski_dim(PointCloud(cantor_points(10)), 3.0**-10, 0.25).estimate
        rng = np.random.default_rng(seed)
        square = minkowski_dim(PointCloud(rng.random((10_000, 2))), 1 / 32, 1 / 2).estimate
        target = math.log(2) / math.log(3)
        ok = abs(cantor - target) <= tol and abs(square - 2) <= tol
        return ok, f"Cantor {cantor:.4f} vs {target:.4f}; square {square:.4f}"
    return _timed("AC10", "box counting", limit, run)


def check_budget(tol: float = 1e-9, draws: int = 1000, seed: int = 0) -> Check:
    def run():
        eta = nonlinear_eta(1.0, 1.0, 1.0, 2.0).value
        rng = np.random.default_rng(seed)
        bad = 0
        for _ in range(draws):
            b = NonlinearityBudget(M=rng.uniform(0, 3), L=rng.uniform(0, 2), C=rng.uniform(0.1, 3),
                                   Lam=rng.uniform(1.1, 3))
            r = error_recursion(b, rng.uniform(0, 2), int(rng.integers(1, 21)))
            bad += not r.ok
        return abs(eta - 4 / 3) <= tol and bad == 0, f"eta = {eta!r}; {bad} of {draws} draws exceed the majorant"
    return _timed("AC11", "nonlinearity budget", None, run)


def check_pipeline_determinism(spec_path: Path | None = None) -> Check:
    def run():
        path = spec_path or example_path()
        outs = []
        for _ in range(2):
            res = run_pipeline(parse_spec(path))
            with tempfile.TemporaryDirectory() as d:
                for name, text in res.artifacts.items():
                    (Path(d) / name).write_text(text)
                outs.append({n: (Path(d) / n).read_bytes() for n in sorted(res.artifacts)})
        same = outs[0] == outs[1]
        return same and res.exit_code == 0, f"{len(outs[0])} artifacts byte-identical: {same}; exit {res.exit_code}"
    return _timed("AC12", "pipeline determinism", None, run)


ALL_CHECKS = (
    check_g_oracle, check_multiplicativity, check_rho_infinity, check_minkowski, check_cocycle,
    check_integrator, check_rescaling, check_restricted_norm, check_variational, check_boxdim,
    check_budget, check_pipeline_determinism,
)


def run_all(jobs: int = 1) -> list[Check]:
    if jobs <= 1:
        return [fn() for fn in ALL_CHECKS]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=jobs) as ex:
        futs = [ex.submit(fn) for fn in ALL_CHECKS]
        return [f.result() for f in futs]
