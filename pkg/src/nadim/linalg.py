"""Finite-dimensional normed spaces over a valued field.

Norms are weighted sup-norms ``|x| = max_i w_i |x_i|``.  With that choice the
operator norm, the norm of a top-degree alternating form and the
determinant-as-pullback-norm are all computable in closed form, which is
what the rest of the package relies on.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from typing import Sequence

import numpy as np
from scipy.optimize import linprog

from .valued import REAL, Valuation, p_valuation

_LP_OPTS = {"primal_feasibility_tolerance": 1e-10, "dual_feasibility_tolerance": 1e-10}


@dataclass(frozen=True)
class NormedSpace:
    valuation: Valuation
    dim: int
    weights: tuple | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        if self.weights is not None:
            w = tuple(self.weights)
            if len(w) != self.dim:
                raise ValueError("one weight per coordinate")
            if any(x <= 0 for x in w):
                raise ValueError("weights must be strictly positive")
            object.__setattr__(self, "weights", w)

    @property
    def w(self) -> tuple:
        return self.weights if self.weights is not None else (1,) * self.dim

    def norm(self, x) -> float:
        v = self.valuation
        return max(wi * v.abs(xi) for wi, xi in zip(self.w, x))

    @property
    def lattice(self) -> bool:
        """All weights lie in the value group, so the unit ball has an orthonormal basis."""
        return all(self.valuation.in_value_group(wi) for wi in self.w)

    def ball_radius(self, i: int):
        """Largest attainable |x_i| on the unit ball."""
        r = 1 / Fraction(self.w[i]) if not self.valuation.archimedean else 1.0 / self.w[i]
        return self.valuation.value_group_floor(r)


def _as_entries(valuation: Valuation, entries):
    if valuation.archimedean:
        return np.asarray(entries, dtype=float)
    a = np.empty(np.shape(entries), dtype=object)
    for idx, x in np.ndenumerate(np.asarray(entries, dtype=object)):
        a[idx] = valuation.coerce(x)
    return a


@dataclass(frozen=True)
class LinearMap:
    domain: NormedSpace
    codomain: NormedSpace
    entries: np.ndarray = field(compare=False)

    def __post_init__(self):
        if self.domain.valuation != self.codomain.valuation:
            raise ValueError("domain and codomain must share a valuation")
        a = _as_entries(self.domain.valuation, self.entries)
        if a.shape != (self.codomain.dim, self.domain.dim):
            raise ValueError(f"entries shape {a.shape} does not match {self.codomain.dim}x{self.domain.dim}")
        object.__setattr__(self, "entries", a)

    @property
    def valuation(self) -> Valuation:
        return self.domain.valuation

    def __call__(self, x):
        return self.entries.dot(_as_entries(self.valuation, x))

    def __matmul__(self, other: "LinearMap") -> "LinearMap":
        return compose(self, other)

    def to_json(self) -> dict:
        return {
            "valuation": self.valuation.to_json(),
            "domain_weights": [_num_json(w) for w in self.domain.w],
            "codomain_weights": [_num_json(w) for w in self.codomain.w],
            "entries": [[_num_json(x) for x in row] for row in self.entries],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "LinearMap":
        v = Valuation.from_json(obj["valuation"])
        entries = [[_num_parse(x) for x in row] for row in obj["entries"]]
        rows, cols = len(entries), len(entries[0])
        dw = obj.get("domain_weights")
        cw = obj.get("codomain_weights")
        dom = NormedSpace(v, cols, tuple(_num_parse(x) for x in dw) if dw else None)
        cod = NormedSpace(v, rows, tuple(_num_parse(x) for x in cw) if cw else None)
        return cls(dom, cod, entries)


def _num_json(x):
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else x.numerator
    return float(x) if not isinstance(x, int) else x


def _num_parse(x):
    if isinstance(x, str):
        return Fraction(x)
    return x


def square_map(valuation: Valuation, entries, weights=None, codomain_weights=None) -> LinearMap:
    """Convenience constructor for maps between spaces of one dimension."""
    n = len(entries)
    dom = NormedSpace(valuation, n, weights)
    cod = NormedSpace(valuation, n, codomain_weights if codomain_weights is not None else weights)
    return LinearMap(dom, cod, entries)


def compose(S: LinearMap, T: LinearMap) -> LinearMap:
    """S ∘ T"""
    if T.codomain != S.domain:
        raise ValueError("codomain of T must equal domain of S")
    return LinearMap(T.domain, S.codomain, S.entries.dot(T.entries))


def operator_norm(T: LinearMap) -> float:
    """sup |Tx|/|x|, exact for weighted sup-norms."""
    v = T.valuation
    wx, wy = T.domain.w, T.codomain.w
    if v.archimedean:
        a = np.abs(T.entries) / np.asarray(wx, float)[None, :]
        return float(np.max(np.asarray(wy, float) * a.sum(axis=1)))
    # ultrametric: the sup is attained on a coordinate vector
    best = Fraction(0)
    for i, j in np.ndindex(T.entries.shape):
        best = max(best, Fraction(wy[i]) * v.abs(T.entries[i, j]) / Fraction(wx[j]))
    return best


def exact_det(entries) -> Fraction:
    """Determinant of a square matrix of rationals by fraction-exact elimination."""
    a = [[Fraction(x) for x in row] for row in entries]
    n = len(a)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if a[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            det = -det
        det *= a[c][c]
        inv = 1 / a[c][c]
        for r in range(c + 1, n):
            f = a[r][c] * inv
            if f:
                for k in range(c, n):
                    a[r][k] -= f * a[c][k]
    return det


def matrix_det(valuation: Valuation, entries):
    if valuation.archimedean:
        return float(np.linalg.det(np.asarray(entries, float)))
    return exact_det(entries)


def _radius_product(space: NormedSpace):
    v = space.valuation
    if v.archimedean:
        return 1.0 / math.prod(float(w) for w in space.w)
    return math.prod(space.ball_radius(i) for i in range(space.dim))


def top_form_norm(space: NormedSpace, coefficient=1):
    """|α| for α = coefficient · det(coordinates) on ``space``.

    Scaling coordinate i by the ball radius maps the unit ball onto the
    cube, so |α| = |coefficient| · g(1, n) · ∏ radii.
    """
    v = space.valuation
    return v.abs(coefficient) * g_oracle(1, space.dim, v).value * _radius_product(space)


def pullback_det(T: LinearMap):
    """det T = |T*α| / |α| for any nonzero top form α on the codomain."""
    n = T.domain.dim
    if T.codomain.dim != n:
        raise ValueError("determinant needs a square map")
    v = T.valuation
    d = v.abs(matrix_det(v, T.entries))
    # |T*α| = |det T|·|α_X|; the g(1, n) factors of the two form norms cancel
    return d * _radius_product(T.domain) / _radius_product(T.codomain)


# ---------------------------------------------------------------- g(θ, n)


@dataclass(frozen=True)
class GValue:
    """Value of sup_{|a_ij| ≤ θ} |det(a_ij)|, or a certified upper bound."""

    value: float
    log_value: float
    exact: bool

    def to_json(self) -> dict:
        return {"value": _num_json(self.value) if math.isfinite(float(self.value)) else None,
                "log_value": self.log_value, "flag": "exact" if self.exact else "bound"}


EXACT_G_MAX_N = 5


@lru_cache(maxsize=None)
def _max_sign_det(n: int) -> int:
    """max |det| over n×n ±1 matrices.

    Row and column sign flips preserve |det|, so the first row and column
    can be fixed to +1, leaving 2**((n-1)**2) candidates.
    """
    if n == 1:
        return 1
    k = (n - 1) ** 2
    best = 0
    block = 1 << 14
    for start in range(0, 1 << k, block):
        idx = np.arange(start, min(start + block, 1 << k))
        bits = ((idx[:, None] >> np.arange(k)) & 1) * 2 - 1
        m = np.ones((len(idx), n, n))
        m[:, 1:, 1:] = bits.reshape(-1, n - 1, n - 1)
        best = max(best, int(round(np.abs(np.linalg.det(m)).max())))
    return best


def hadamard_log_bound(theta: float, n: int) -> float:
    """log min(θⁿ n!, (θ√n)ⁿ)"""
    return n * math.log(theta) + min(math.lgamma(n + 1), 0.5 * n * math.log(n))


def g_oracle(theta, n: int, valuation: Valuation = REAL) -> GValue:
    if theta <= 0:
        raise ValueError("theta must be positive")
    if n < 1:
        raise ValueError("n must be positive")
    if valuation.archimedean:
        theta = float(theta)
        if n <= EXACT_G_MAX_N:
            g = _max_sign_det(n)
            return GValue(theta**n * g, n * math.log(theta) + math.log(g), True)
        lg = hadamard_log_bound(theta, n)
        return GValue(_safe_exp(lg), lg, False)
    # ultrametric: |det| ≤ max over permutations of products ≤ θ'ⁿ, attained by θ'·I
    t = valuation.value_group_floor(theta)
    return GValue(t**n, n * math.log(t), True)


def det_constant(valuation: Valuation, n: int, lattice: bool = True) -> GValue:
    """liminf_ε g(Θ⁻¹(1+ε), n), the constant of the chain bound.

    Dense value groups give g(1, n).  For discrete groups with norms taking
    values in the value group the unit ball has an orthonormal basis adapted
    to any flag, and the constant collapses to g(1, n) = 1; otherwise
    g(Θ⁻¹, n) is returned, the ε → 0 value flagged as not exact.
    """
    if valuation.dense:
        return g_oracle(1.0, n, valuation)
    if lattice:
        return g_oracle(1, n, valuation)
    g = g_oracle(Fraction(valuation.p), n, valuation)
    return GValue(g.value, g.log_value, False)


def _safe_exp(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


# ---------------------------------------------------------------- triangular basis


class PreconditionError(ValueError):
    def __init__(self, index: int, achieved: float, message: str):
        super().__init__(message)
        self.index = index
        self.achieved = achieved


@dataclass(frozen=True)
class TriangularBasis:
    eta: np.ndarray  # strictly upper triangular, eta[i, j] multiplies v_j in u_i
    u: np.ndarray  # columns u_1..u_m
    coeff_bound: float  # (1/ϰ)(1+ε)
    tail_distances: tuple  # inf_λ |v_i + Σ_{j>i} λ_j v_j|
    functionals: np.ndarray  # rows f_k

    def coefficients(self, y):
        """μ with y = Σ μ_k u_k, read off the dual functionals."""
        return self.functionals.dot(y)


def _tail_distance_real(V: np.ndarray, i: int, w: np.ndarray) -> float:
    """min_λ max_r w_r |(v_i + Σ_{j>i} λ_j v_j)_r| as an LP."""
    D, m = V.shape
    tail = V[:, i + 1:]
    k = tail.shape[1]
    if k == 0:
        return float(np.max(w * np.abs(V[:, i])))
    # variables (λ, t); w_r(v + Aλ)_r ≤ t and -w_r(v + Aλ)_r ≤ t
    A = w[:, None] * tail
    b = w * V[:, i]
    A_ub = np.block([[A, -np.ones((D, 1))], [-A, -np.ones((D, 1))]])
    b_ub = np.concatenate([-b, b])
    c = np.zeros(k + 1)
    c[-1] = 1.0
    res = linprog(c, A_ub=A_ub, b_ub=b_ub, bounds=[(None, None)] * k + [(0, None)],
                  method="highs", options=_LP_OPTS)
    if not res.success:
        raise RuntimeError(f"tail-distance LP failed: {res.message}")
    return float(res.fun)


def _min_norm_functional(V: np.ndarray, k: int, w: np.ndarray) -> np.ndarray:
    """Least dual-norm f with f(v_k) = 1 and f(v_j) = 0 for j > k.

    The dual of the weighted sup-norm is Σ_r |f_r| / w_r.
    """
    D, m = V.shape
    rows = V[:, k:].T  # constraints on f
    rhs = np.zeros(m - k)
    rhs[0] = 1.0
    c = np.concatenate([1.0 / w, 1.0 / w])
    A_eq = np.hstack([rows, -rows])
    res = linprog(c, A_eq=A_eq, b_eq=rhs, bounds=[(0, None)] * (2 * D),
                  method="highs", options=_LP_OPTS)
    if not res.success:
        raise RuntimeError(f"dual functional LP failed: {res.message}")
    return res.x[:D] - res.x[D:]


def _forward_eta(F, m: int, zero):
    """η with f_k(v_i + Σ_{j>i} η_ij v_j) = 0 for all k > i.

    F[k][j] = f_k(v_j) is lower triangular with unit diagonal, so each row of
    η is found by forward substitution, one new coefficient per functional.
    """
    eta = [[zero] * m for _ in range(m)]
    for i in range(m):
        for k in range(i + 1, m):
            acc = F[k][i] + sum((eta[i][j] * F[k][j] for j in range(i + 1, k)), zero)
            eta[i][k] = -acc / F[k][k]
    return eta


def triangular_basis(vectors, kappa: float, eps: float, weights=None, valuation: Valuation = REAL,
                     tol: float = 1e-10) -> TriangularBasis:
    """Build u_i = v_i + Σ_{j>i} η_ij v_j spanning the unit ball with small coefficients.

    ``vectors`` is a sequence of m vectors of a common length D (the ambient
    coordinates).  Every y in their span with |y| ≤ 1 then satisfies
    y = Σ μ_k u_k with |μ_k| ≤ (1/ϰ)(1+ε).
    """
    if not 0 < kappa <= 1:
        raise ValueError("kappa must lie in (0, 1]")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if valuation.archimedean:
        return _triangular_basis_real(vectors, kappa, eps, weights, tol)
    return _triangular_basis_padic(vectors, kappa, eps, weights, valuation)


def _triangular_basis_real(vectors, kappa, eps, weights, tol):
    V = np.asarray(vectors, float).T
    D, m = V.shape
    w = np.ones(D) if weights is None else np.asarray(weights, float)
    dists = []
    for i in range(m):
        nv = float(np.max(w * np.abs(V[:, i])))
        if nv > 1 + tol:
            raise PreconditionError(i, nv, f"|v_{i + 1}| = {nv} exceeds 1")
        d = _tail_distance_real(V, i, w)
        if d < kappa - tol:
            raise PreconditionError(i, d, f"tail infimum for v_{i + 1} is {d} < kappa = {kappa}")
        dists.append(d)
    f = np.array([_min_norm_functional(V, k, w) for k in range(m)])
    bound = (1.0 + eps) / kappa
    for k in range(m):
        fn = float(np.sum(np.abs(f[k]) / w))
        if fn > bound * (1 + tol):
            raise PreconditionError(k, 1 / fn, f"functional {k + 1} has norm {fn} > {bound}")
    F = f.dot(V)
    eta = np.array(_forward_eta(F, m, 0.0), float)
    U = V.dot((np.eye(m) + eta).T)
    return TriangularBasis(eta, U, bound, tuple(dists), f)


def _padic_hat(valuation, vectors, weights):
    """Rescale coordinates so a value-group weighted sup-norm becomes the plain one."""
    V = [[valuation.coerce(x) for x in vec] for vec in vectors]
    D = len(V[0])
    if weights is None:
        return V, [Fraction(1)] * D
    scale = []
    for wr in weights:
        if not valuation.in_value_group(wr):
            raise ValueError("p-adic weights must lie in the value group")
        # w = p^e in ℚ_p^× needs a scale of absolute value p^e, i.e. p^{-e}
        e = p_valuation(Fraction(wr), valuation.p)
        scale.append(Fraction(valuation.p) ** -e)
    return [[x * s for x, s in zip(vec, scale)] for vec in V], scale


class _PivotBasis:
    """Ultrametric-orthonormal basis with pivots, grown one vector at a time."""

    def __init__(self, valuation):
        self.v = valuation
        self.rows: list[tuple[int, list]] = []

    def reduce(self, x):
        x = list(x)
        for c, w in self.rows:
            a = x[c]
            if a:
                x = [xi - a * wi for xi, wi in zip(x, w)]
        return x

    def norm(self, x):
        return max(self.v.abs(xi) for xi in x)

    def add(self, x):
        r = self.reduce(x)
        n = self.norm(r)
        if n == 0:
            return r, None
        c = next(i for i, xi in enumerate(r) if self.v.abs(xi) == n)
        w = [xi / r[c] for xi in r]
        self.rows = [(cl, [a - wl[c] * b for a, b in zip(wl, w)]) for cl, wl in self.rows]
        self.rows.append((c, w))
        return r, c

    def functional(self, r, c):
        """f(x) = (x_c - Σ_l x_{c_l} (w_l)_c) / r_c, with the current tail basis."""
        coeffs = {c: 1 / r[c]}
        for cl, wl in self.rows:
            coeffs[cl] = coeffs.get(cl, 0) - wl[c] / r[c]
        return coeffs


def _triangular_basis_padic(vectors, kappa, eps, weights, valuation):
    V, scale = _padic_hat(valuation, vectors, weights)
    m, D = len(V), len(V[0])
    basis = _PivotBasis(valuation)
    dists = [None] * m
    funcs = [None] * m
    for i in reversed(range(m)):
        nv = basis.norm(V[i])
        if nv > 1:
            raise PreconditionError(i, float(nv), f"|v_{i + 1}| = {nv} exceeds 1")
        r = basis.reduce(V[i])
        d = basis.norm(r)
        if d < kappa:
            raise PreconditionError(i, float(d), f"tail infimum for v_{i + 1} is {d} < kappa = {kappa}")
        c = next(j for j, xj in enumerate(r) if valuation.abs(xj) == d)
        funcs[i] = basis.functional(r, c)
        dists[i] = d
        basis.add(V[i])

    def apply(fk, x):
        return sum((a * x[j] for j, a in fk.items()), Fraction(0))

    F = [[apply(funcs[k], V[j]) for j in range(m)] for k in range(m)]
    eta = _forward_eta(F, m, Fraction(0))
    orig = [[valuation.coerce(x) for x in vec] for vec in vectors]
    U = [[orig[i][r] + sum((eta[i][j] * orig[j][r] for j in range(i + 1, m)), Fraction(0))
          for r in range(D)] for i in range(m)]
    # functionals act on original coordinates through the hat rescaling
    fmat = np.empty((m, D), dtype=object)
    fmat[:] = Fraction(0)
    for k in range(m):
        for j, a in funcs[k].items():
            fmat[k, j] = a * scale[j]
    eta_arr = np.array(eta, dtype=object)
    U_arr = np.array(U, dtype=object).T
    return TriangularBasis(eta_arr, U_arr, Fraction(1) / Fraction(kappa), tuple(dists), fmat)


# ---------------------------------------------------------------- chain bound


@dataclass(frozen=True)
class ChainBound:
    bound: float
    det: float
    constant: GValue
    restricted_norms: tuple  # measured sup |Tx|/|x| on each V_j
    hypothesis_ok: bool
    holds: bool


def _rank(valuation, M) -> int:
    if valuation.archimedean:
        return int(np.linalg.matrix_rank(np.asarray(M, float)))
    basis = _PivotBasis(valuation)
    rank = 0
    for col in np.asarray(M, dtype=object).T:
        _, c = basis.add(list(col))
        rank += c is not None
    return rank


def det_chain_bound(T: LinearMap, chain: Sequence, kappa: Sequence[float], samples: int = 1000,
                    seed: int = 0, tol: float = 1e-9) -> ChainBound:
    """G(n)·∏κ_j for a flag V_1 ⊃ … ⊃ V_n with |Tx| ≤ κ_j |x| on V_j.

    ``chain[j]`` holds spanning vectors of V_{j+1}.  The hypothesis is
    checked exactly over ℚ_p (orthonormal pivot basis) and by random
    sampling over ℝ.
    """
    n = T.domain.dim
    v = T.valuation
    if len(chain) != n or len(kappa) != n:
        raise ValueError("need one subspace and one kappa per dimension")
    mats = [np.asarray(_as_entries(v, [list(x) for x in span]), dtype=float if v.archimedean else object).T
            for span in chain]
    for j, M in enumerate(mats):
        if _rank(v, M) != n - j:
            raise ValueError(f"V_{j + 1} must have dimension {n - j}")
        if j and _rank(v, np.hstack([mats[j - 1], M])) != n - j + 1:
            raise ValueError(f"V_{j + 1} is not contained in V_{j}")
    rng = np.random.default_rng(seed)
    norms = []
    for M in mats:
        if v.archimedean:
            c = rng.standard_normal((M.shape[1], samples))
            X = M.dot(c)
            w = np.asarray(T.domain.w, float)[:, None]
            wy = np.asarray(T.codomain.w, float)[:, None]
            ratio = np.max(wy * np.abs(T.entries.dot(X)), axis=0) / np.max(w * np.abs(X), axis=0)
            norms.append(float(ratio.max()))
        else:
            hat, scale = _padic_hat(v, [list(col) for col in M.T], T.domain.weights)
            basis = _PivotBasis(v)
            for col in hat:
                basis.add(col)
            best = Fraction(0)
            for _, wl in basis.rows:
                x = [a / s for a, s in zip(wl, scale)]
                best = max(best, T.codomain.norm(T(x)) / T.domain.norm(x))
            norms.append(best)
    ok = all(float(nj) <= float(kj) * (1 + tol) for nj, kj in zip(norms, kappa))
    G = det_constant(v, n, lattice=T.domain.lattice and T.codomain.lattice)
    if v.archimedean:
        bound = G.value * math.prod(float(k) for k in kappa)
    else:
        bound = G.value * math.prod(Fraction(k) for k in kappa)
    d = pullback_det(T)
    holds = float(d) <= float(bound) * (1 + tol) if v.archimedean else d <= bound
    return ChainBound(bound, d, G, tuple(norms), ok, holds)
