"""Synthetic diagonal cocycles for checking the decay of frame separation.

A diagonal map diag(σ_1, ..., σ_D) respects a ladder (X^i = span{e_j : j > k_i})
as soon as σ_j ≤ ρ_i for every i with k_i < j.  Pushing a frame of m vectors
through such maps and measuring how close the normalised images come to
linear dependence gives A_N, which must sit below the certificate envelope.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .growth import CompactnessLadder, GrowthCertificate, decay_envelope
from .linalg import operator_norm, square_map


def coordinate_caps(ladder: CompactnessLadder, dim: int) -> np.ndarray:
    """Largest admissible |σ_j| for j = 1..dim."""
    caps = np.full(dim, np.inf)
    i = 0
    while True:
        k, rho = ladder.rung(i)
        if k >= dim:
            break
        caps[k:] = np.minimum(caps[k:], rho)
        i += 1
    return caps


def diagonal_cocycle(ladder: CompactnessLadder, dim: int, steps: int,
                     rng: np.random.Generator, slack: float = 0.5) -> np.ndarray:
    """``steps`` x ``dim`` array of singular values drawn in [slack·cap, cap]."""
    caps = coordinate_caps(ladder, dim)
    if not np.all(np.isfinite(caps)):
        raise ValueError("ladder gives no bound for some coordinate")
    return caps * rng.uniform(slack, 1.0, size=(steps, dim))


def restricted_norm(diag: np.ndarray, k: int) -> float:
    """|T restricted to span{e_j : j > k}| for T = diag(diag)."""
    tail = np.abs(diag[k:])
    return float(tail.max()) if tail.size else 0.0


def _separation_vertices(a: np.ndarray, B: np.ndarray) -> float:
    """min over λ in [-1,1]^k of |a + B λ|_∞, by vertex enumeration.

    Exact up to rounding in a (k+1)x(k+1) solve; immune to the absolute
    tolerances an LP solver applies, which matters once A_N is ~1e-9.
    """
    D, k = B.shape
    if k == 0:
        return float(np.abs(a).max())
    # rows of G z <= h with z = (λ, t)
    G = np.vstack([
        np.hstack([B, -np.ones((D, 1))]),
        np.hstack([-B, -np.ones((D, 1))]),
        np.hstack([np.eye(k), np.zeros((k, 1))]),
        np.hstack([-np.eye(k), np.zeros((k, 1))]),
    ])
    h = np.concatenate([-a, a, np.ones(k), np.ones(k)])
    scale = max(1.0, float(np.abs(B).max()))
    best = np.inf
    for rows in itertools.combinations(range(G.shape[0]), k + 1):
        Gs = G[list(rows)]
        if abs(np.linalg.det(Gs)) < 1e-14 * scale ** k:
            continue
        z = np.linalg.solve(Gs, h[list(rows)])
        if np.all(G @ z <= h + 1e-12 * scale):
            best = min(best, float(np.abs(a + B @ z[:k]).max()))
    return best


def _separation_lp(a: np.ndarray, B: np.ndarray) -> float:
    """Same problem through HiGHS.  The returned λ is clipped into the box
    and the objective re-evaluated, so the result is an honest upper bound
    on the minimum whatever the solver tolerances."""
    D, k = B.shape
    if k == 0:
        return float(np.abs(a).max())
    c = np.zeros(k + 1)
    c[-1] = 1.0
    A_ub = np.vstack([np.hstack([B, -np.ones((D, 1))]), np.hstack([-B, -np.ones((D, 1))])])
    b_ub = np.concatenate([-a, a])
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=[(-1, 1)] * k + [(0, None)], method="highs")
    if res.status != 0:
        return float(np.abs(a).max())  # λ = 0 is always feasible
    lam = np.clip(res.x[:k], -1.0, 1.0)
    return min(float(np.abs(a + B @ lam).max()), float(np.abs(a).max()))


def frame_separation(frame: np.ndarray, exact_max: int = 3) -> float:
    """inf |Σ η_i x_i|_∞ over max|η_i| = 1, for the columns x_i of ``frame``.

    Some |η_i| equals 1; flipping the sign of η puts it at +1, so the
    infimum is a minimum over i of a box-constrained sup-norm problem.
    Frames of up to ``exact_max`` vectors use vertex enumeration; larger
    ones an LP whose answer is an upper bound on the infimum.
    """
    X = np.asarray(frame, dtype=float)
    m = X.shape[1]
    solve = _separation_vertices if m <= exact_max else _separation_lp
    out = np.inf
    for i in range(m):
        others = [j for j in range(m) if j != i]
        out = min(out, solve(X[:, i], X[:, others]))
    return out


@dataclass(frozen=True)
class CocycleCheck:
    N: tuple
    separation: tuple  # A_N
    envelope: tuple
    growth_ok: bool  # |T^N y_i| ≥ c ϖ^N |y_i| held throughout
    ladder_ok: bool  # every map respects the ladder
    ok: bool


def check_diagonal_cocycle(cert: GrowthCertificate, dim: int, n_max: int = 30, seed: int = 0,
                           spread: float = 0.5, slack: float = 0.5, rtol: float = 1e-6) -> CocycleCheck:
    """Measure A_N for the frame y_i = e_1 + spread·e_{i+1} under a random
    diagonal cocycle and compare with the certificate envelope.

    T^N composes N+1 maps (T_N ∘ ... ∘ T_0).
    """
    m = cert.m
    if dim < m + 1:
        raise ValueError("need dim ≥ m + 1")
    rng = np.random.default_rng(seed)
    sig = diagonal_cocycle(cert.ladder, dim, n_max + 1, rng, slack)
    sig[:, 0] = coordinate_caps(cert.ladder, dim)[0]  # keep e_1 from shrinking so the frame grows like ϖ^N
    ladder_ok = True
    for row in sig:
        i = 0
        while cert.ladder.k_at(i) < dim:
            if restricted_norm(row, cert.ladder.k_at(i)) > cert.ladder.rho_at(i) * (1 + 1e-12):
                ladder_ok = False
            i += 1
    ladder_ok = ladder_ok and operator_norm(square_map(cert.ladder.valuation, np.diag(sig[0]))) <= cert.ladder.rho_at(0) * (1 + 1e-12)

    Y = np.zeros((dim, m))
    Y[0, :] = 1.0
    for i in range(m):
        Y[i + 1, i] = spread
    y_norms = np.abs(Y).max(axis=0)

    growth_ok = True
    Ns, seps, envs = [], [], []
    log_scale = np.zeros(m)  # images are renormalised each step; keep the log of the true norm
    Z = Y.copy()
    for N in range(n_max + 1):
        Z = sig[N][:, None] * Z
        nz = np.abs(Z).max(axis=0)
        log_scale += np.log(nz)
        Z = Z / nz
        lhs = log_scale
        rhs = np.log(cert.c) + N * np.log(cert.varpi) + np.log(y_norms)
        if np.any(lhs < rhs - 1e-12):
            growth_ok = False
        Ns.append(N)
        seps.append(frame_separation(Z))
        envs.append(decay_envelope(cert, N))
    ok = growth_ok and ladder_ok and all(a <= e * (1 + rtol) for a, e in zip(seps, envs))
    return CocycleCheck(tuple(Ns), tuple(seps), tuple(envs), growth_ok, ladder_ok, ok)
