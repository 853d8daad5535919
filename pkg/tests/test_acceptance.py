"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

Tolerances and time limits are pinned here explicitly rather than taken
from the check defaults.
"""
import pytest

from nadim import verify

CRITERIA = [
    ("AC1", lambda: verify.check_g_oracle(limit=10.0)),
    ("AC2", lambda: verify.check_multiplicativity(pairs=1000, rtol=1e-9, seed=0, limit=30.0)),
    ("AC3", lambda: verify.check_rho_infinity(tol_const=1e-6, tol_delay=1e-12)),
    ("AC4", lambda: verify.check_minkowski(tol=1e-12)),
    ("AC5", lambda: verify.check_cocycle(n_max=30, rtol=1e-6, limit=60.0)),
    ("AC6", lambda: verify.check_integrator(tol_cos=1e-6, tol_step=1e-9, limit=30.0)),
    ("AC7", lambda: verify.check_rescaling(tol=1e-4, tol_major=1e-12)),
    ("AC8", lambda: verify.check_restricted_norm(bound=0.55, samples=100, seed=0, limit=120.0)),
    ("AC9", lambda: verify.check_variational(min_slope=0.9)),
    ("AC10", lambda: verify.check_boxdim(tol=0.05, seed=0, limit=60.0)),
    ("AC11", lambda: verify.check_budget(tol=1e-9, draws=1000, seed=0)),
    ("AC12", lambda: verify.check_pipeline_determinism()),
]


@pytest.mark.parametrize("key,run", CRITERIA, ids=[k for k, _ in CRITERIA])
def test_criterion(key, run, capsys):
    check = run()
    assert check.key == key
    with capsys.disabled():
        print("\n" + check.line())
    assert check.passed, check.line()
