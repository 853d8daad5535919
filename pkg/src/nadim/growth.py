"""Growth constants, (m, p) certificates and the dimension bound.

Everything is computed in log-space: m and p reach the thousands for delay
ladders, and G(m) alone overflows a double long before that.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .linalg import GValue, det_constant
from .valued import REAL, Valuation

NEG_INF = -math.inf


def _log(x: float) -> float:
    return math.log(x) if x > 0 else NEG_INF


def _exp(x: float) -> float:
    if x == NEG_INF:
        return 0.0
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


def _term(exponent, log_base):
    # exponent · log ρ with the convention ρ^0 = 1 (also for ρ = 0)
    return 0.0 if exponent == 0 else exponent * log_base


# ---------------------------------------------------------------- ladders


def _generated_rung(gen: dict, i: int) -> tuple[int, float]:
    kind = gen["kind"]
    if kind == "delay":
        return delay_rung(gen["tau"], gen["d"], i)
    if kind == "constant":
        return i * gen.get("k_step", 1), float(gen["rho"])
    if kind == "geometric":
        return i * gen.get("k_step", 1), float(gen["rho0"]) * float(gen["ratio"]) ** i
    raise ValueError(f"unknown ladder generator {kind!r}")


def delay_rung(tau: float, d: int, i: int) -> tuple[int, float]:
    """(k_i, ρ_i) of the dyadic ladder for a delay equation with |F| ≤ 1."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    if d < 1:
        raise ValueError("d must be positive")
    if i == 0:
        return 0, math.exp(tau)
    k = d if i == 1 else 2 * d if i == 2 else (2 ** (i - 2) + 1) * d
    if tau <= 1 or i > math.log(tau) / math.log(2) + 1:
        rho = tau / 2 ** (i - 1)
    else:
        rho = math.exp(tau - 2 ** (i - 1))
    return k, rho


@dataclass(frozen=True)
class CompactnessLadder:
    """Codimensions k_i and contraction bounds ρ_i of a nested subspace chain.

    Rungs beyond the stored ones come from ``generator``, a small
    descriptor dict (``delay``, ``constant`` or ``geometric``).
    """

    k: tuple
    rho: tuple
    valuation: Valuation = REAL
    generator: dict | None = field(default=None, compare=False)
    lattice_norms: bool = True

    def __post_init__(self):
        k, rho = tuple(int(x) for x in self.k), tuple(float(x) for x in self.rho)
        if len(k) != len(rho):
            raise ValueError("k and rho must have the same length")
        if len(k) < 2:
            raise ValueError("a ladder needs at least two rungs")
        if k[0] != 0:
            raise ValueError("k_0 must be 0")
        if any(b <= a for a, b in zip(k, k[1:])):
            raise ValueError("k must be strictly increasing")
        if any(r < 0 for r in rho):
            raise ValueError("rho must be nonnegative")
        object.__setattr__(self, "k", k)
        object.__setattr__(self, "rho", rho)

    def __len__(self):
        return len(self.k)

    def rung(self, i: int) -> tuple[int, float]:
        if i < len(self.k):
            return self.k[i], self.rho[i]
        if self.generator is None:
            raise IndexError(f"ladder has {len(self.k)} rungs and no generator; rung {i} requested")
        return _generated_rung(self.generator, i)

    def k_at(self, i: int) -> int:
        return self.rung(i)[0]

    def rho_at(self, i: int) -> float:
        return self.rung(i)[1]

    def log_rho(self, i: int) -> float:
        return _log(self.rho_at(i))

    @property
    def theta(self) -> float:
        return self.valuation.theta

    def to_json(self) -> dict:
        out = {"k": list(self.k), "rho": list(self.rho), "valuation": self.valuation.to_json()}
        if self.generator is not None:
            out["generator"] = dict(self.generator)
        if not self.lattice_norms:
            out["lattice_norms"] = False
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "CompactnessLadder":
        v = Valuation.from_json(obj.get("valuation", {"kind": "real"}))
        gen = obj.get("generator")
        if "k" in obj:
            k, rho = obj["k"], obj["rho"]
        elif gen is not None:
            n = int(obj.get("rungs", 4))
            k, rho = zip(*(_generated_rung(gen, i) for i in range(n)))
        else:
            raise ValueError("ladder needs k/rho arrays or a generator")
        return cls(tuple(k), tuple(rho), v, gen, obj.get("lattice_norms", True))


def ladder_from_delay(tau: float, d: int, rungs: int = 6) -> CompactnessLadder:
    """Dyadic ladder of the solution operator of a delay equation with |F| ≤ 1.

    k = (0, d, 2d, (2^{i-2}+1)d, ...), ρ_0 = e^τ and ρ_i = τ/2^{i-1}, or
    exp(τ - 2^{i-1}) on the first rungs when τ > 1.
    """
    k, rho = zip(*(delay_rung(tau, d, i) for i in range(rungs)))
    return CompactnessLadder(k, rho, REAL, {"kind": "delay", "tau": float(tau), "d": int(d)})


# ---------------------------------------------------------------- ρ∞


@dataclass(frozen=True)
class RhoInfinity:
    value: float  # tail-window estimate of the liminf
    profile: tuple  # (s, profile_s) for s = 2..s_max
    running_min: float
    tail_window: tuple  # (s_lo, s_hi)


def _log_products(ladder: CompactnessLadder, s_max: int) -> list[float]:
    """L[s] = Σ_{i=1}^{s-1} (k_{i+1} - k_i) ln ρ_i for s = 0..s_max."""
    out = [0.0, 0.0]
    acc = 0.0
    for s in range(2, s_max + 1):
        i = s - 1
        acc += _term(ladder.k_at(i + 1) - ladder.k_at(i), ladder.log_rho(i))
        out.append(acc)
    return out


def rho_infinity(ladder: CompactnessLadder, s_max: int) -> RhoInfinity:
    """Finite-horizon estimate of liminf_s [∏_{i<s} ρ_i^{k_{i+1}-k_i}]^{1/k_s}.

    The profile converges like ρ^{1 - O(1/k_s)}, far too slowly to read the
    limit off directly.  ``value`` instead averages ln ρ_i over the upper half
    of the rungs (weights k_{i+1} - k_i), which is the Stolz–Cesàro limit of
    the profile when ln ρ_i converges.
    """
    if s_max < 2:
        raise ValueError("s_max must be at least 2")
    L = _log_products(ladder, s_max)
    profile = tuple((s, _exp(L[s] / ladder.k_at(s))) for s in range(2, s_max + 1))
    running_min = min(p for _, p in profile)
    lo = max(2, s_max // 2)
    if lo < s_max:
        value = _exp((L[s_max] - L[lo]) / (ladder.k_at(s_max) - ladder.k_at(lo)))
    else:
        value = profile[-1][1]
    return RhoInfinity(value, profile, running_min, (lo, s_max))


# ---------------------------------------------------------------- Ξ and Υ


class NoDecomposition(ValueError):
    pass


@dataclass(frozen=True)
class XiResult:
    log_value: float
    s: int
    r: int
    G: GValue
    alternatives: tuple  # (s, r, log Ξ) for every admissible decomposition

    @property
    def value(self) -> float:
        return _exp(self.log_value)


def G_of(ladder: CompactnessLadder, m: int) -> GValue:
    return det_constant(ladder.valuation, m, lattice=ladder.lattice_norms)


def xi(ladder: CompactnessLadder, m: int, p: int, include_top: bool = False) -> XiResult:
    """Ξ(m, p) = G(m) ρ_s^{pr} ∏_{i=1}^{s-1} ρ_i^{p²(k_{i+1}-k_i)}, m = p k_s + r.

    ``include_top`` also charges the first k_1 directions with
    ρ_0^{p² k_1}; without it the product ignores |T| ≤ ρ_0 altogether.
    """
    if m < 1 or p < 1:
        raise ValueError("m and p must be positive")
    G = G_of(ladder, m)
    alts = []
    s = 0
    while True:
        try:
            ks, ks1 = ladder.k_at(s), ladder.k_at(s + 1)
        except IndexError as exc:
            raise NoDecomposition(str(exc)) from exc
        if p * ks > m:
            break
        r = m - p * ks
        if r <= p * (ks1 - ks):
            lv = G.log_value + _term(p * r, ladder.log_rho(s))
            for i in range(1, s):
                lv += _term(p * p * (ladder.k_at(i + 1) - ladder.k_at(i)), ladder.log_rho(i))
            if include_top and s >= 1:
                lv += _term(p * p * ladder.k_at(1), ladder.log_rho(0))
            alts.append((s, r, lv))
        s += 1
    if not alts:
        raise NoDecomposition(f"no decomposition m = p·k_s + r for m={m}, p={p}")
    best = min(alts, key=lambda a: a[2])
    return XiResult(best[2], best[0], best[1], G, tuple(alts))


@dataclass(frozen=True)
class UpsilonResult:
    log_value: float  # sup over r = 0..p, empty block counted as 1
    log_value_positive: float  # sup over r = 1..p
    terms: tuple  # (r, log term)

    @property
    def value(self) -> float:
        return _exp(self.log_value)

    @property
    def value_positive(self) -> float:
        return _exp(self.log_value_positive)


def upsilon(ladder: CompactnessLadder, m: int, p: int, include_top: bool = False) -> UpsilonResult:
    """Υ = sup_r Ξ(m, r) Ξ(m, p)^{-(r-1)/p}."""
    lxp = xi(ladder, m, p, include_top).log_value
    terms = [(0, lxp / p if lxp != NEG_INF else 0.0)]
    for r in range(1, p + 1):
        lxr = xi(ladder, m, r, include_top).log_value
        if lxp == NEG_INF:
            t = lxr if r == 1 else (math.inf if lxr > NEG_INF else NEG_INF)
        else:
            t = lxr - (r - 1) / p * lxp
        terms.append((r, t))
    return UpsilonResult(max(t for _, t in terms), max(t for r, t in terms if r >= 1), tuple(terms))


# ---------------------------------------------------------------- certificates


class CertificateError(ValueError):
    pass


@dataclass(frozen=True)
class GrowthCertificate:
    ladder: CompactnessLadder
    varpi: float
    m: int
    p: int
    s: int
    r: int
    log_xi: float
    log_upsilon: float
    log_upsilon_positive: float
    G: GValue
    varrho: float = 1.0
    kappa: float = 1.0
    c: float = 1.0
    include_top: bool = False

    @property
    def xi(self) -> float:
        return _exp(self.log_xi)

    @property
    def upsilon(self) -> float:
        return _exp(self.log_upsilon)

    @property
    def log_ratio(self) -> float:
        """ln Ξ^{1/mp}"""
        return self.log_xi / (self.m * self.p)

    @property
    def ratio(self) -> float:
        return _exp(self.log_ratio)

    @property
    def log_chi_star(self) -> float:
        return self.log_ratio - math.log(self.varpi)

    @property
    def chi_star(self) -> float:
        return _exp(self.log_chi_star)

    @property
    def theta(self) -> float:
        return self.ladder.theta

    def to_json(self) -> dict:
        return {
            "ladder": self.ladder.to_json(),
            "varpi": self.varpi,
            "m": self.m,
            "p": self.p,
            "s": self.s,
            "r": self.r,
            "xi": {"value": _json_float(self.xi), "log_value": _json_float(self.log_xi)},
            "upsilon": {
                "value": _json_float(self.upsilon),
                "log_value": _json_float(self.log_upsilon),
                "log_value_positive_r": _json_float(self.log_upsilon_positive),
                "convention": "sup over r=0..p with empty block factor 1",
            },
            "G": self.G.to_json(),
            "ratio": _json_float(self.ratio),
            "chi_star": _json_float(self.chi_star),
            "varrho": self.varrho,
            "kappa": self.kappa,
            "c": self.c,
            "include_top": self.include_top,
            "theta": self.theta,
        }


def _json_float(x: float):
    if math.isnan(x):
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def certify(ladder: CompactnessLadder, varpi: float, m: int, p: int, varrho: float = 1.0,
            kappa: float = 1.0, c: float = 1.0, include_top: bool = False) -> GrowthCertificate:
    """Assemble the certificate for a fixed (m, p), checking Ξ^{1/mp} < ϖ."""
    if varpi <= 0:
        raise CertificateError("varpi must be positive")
    if c <= 0:
        raise CertificateError("c must be positive")
    if not 0 < kappa <= 1:
        raise CertificateError("kappa must lie in (0, 1]")
    if not 0 < varrho <= 1:
        raise CertificateError("varrho must lie in (0, 1]")
    x = xi(ladder, m, p, include_top)
    u = upsilon(ladder, m, p, include_top)
    cert = GrowthCertificate(ladder, float(varpi), m, p, x.s, x.r, x.log_value, u.log_value,
                             u.log_value_positive, x.G, float(varrho), float(kappa), float(c), include_top)
    if not cert.log_chi_star < 0:
        raise CertificateError(f"Xi^(1/mp) = {cert.ratio} is not below varpi = {varpi}")
    if not cert.log_chi_star < math.log(varrho):
        raise CertificateError(f"varrho = {varrho} must exceed chi* = {cert.chi_star}")
    return cert


class SearchFailure(RuntimeError):
    def __init__(self, message: str, grid=(), best=None):
        super().__init__(message)
        self.grid = tuple(grid)
        self.best = best


@dataclass(frozen=True)
class SearchResult:
    certificate: GrowthCertificate
    grid: tuple  # (p, s, m, ratio)
    rho_inf: RhoInfinity


def search_mp(ladder: CompactnessLadder, varpi: float, p_max: int = 8, s_max: int = 12,
              varrho: float = 1.0, kappa: float = 1.0, c: float = 1.0,
              include_top: bool = False, prefer: str = "ratio") -> SearchResult:
    """Scan m = p k_s and keep the pair with the smallest Ξ^{1/mp} < ϖ.

    Ties (to 12 significant digits) go to the smaller m.  With
    ``prefer="dimension"`` the smallest admissible m wins instead, which
    gives a much smaller (m - 1) bound at the price of a slower decay rate.
    """
    if prefer not in ("ratio", "dimension"):
        raise ValueError("prefer must be 'ratio' or 'dimension'")
    rinf = rho_infinity(ladder, max(s_max, 2))
    if not varpi > rinf.value:
        raise SearchFailure(f"varpi = {varpi} does not exceed the rho_infinity estimate {rinf.value}")
    grid = []
    for p in range(1, p_max + 1):
        for s in range(1, s_max + 1):
            m = p * ladder.k_at(s)
            lx = xi(ladder, m, p, include_top).log_value
            grid.append((p, s, m, _exp(lx / (m * p))))
    ok = [g for g in grid if g[3] < varpi and g[3] / varpi < varrho]
    if not ok:
        best = min(grid, key=lambda g: g[3])
        raise SearchFailure(
            f"no (m, p) with Xi^(1/mp) < varpi = {varpi} within p <= {p_max}, s <= {s_max}; "
            f"best ratio {best[3]:.6g} at p={best[0]}, s={best[1]} (larger p drives the ratio "
            f"towards the profile)", grid, best)
    if prefer == "ratio":
        p, s, m, _ = min(ok, key=lambda g: (float(f"{g[3]:.12g}"), g[2]))
    else:
        p, s, m, _ = min(ok, key=lambda g: (g[2], g[3]))
    cert = certify(ladder, varpi, m, p, varrho, kappa, c, include_top)
    return SearchResult(cert, tuple(grid), rinf)


# ---------------------------------------------------------------- Theorem-level envelopes


def envelope_log_constant(cert: GrowthCertificate) -> float:
    """ln K with K = [Υ m^m c^{-m} G(m)]^{1/m}."""
    m = cert.m
    return (cert.log_upsilon + m * math.log(m) - m * math.log(cert.c) + cert.G.log_value) / m


def decay_envelope(cert: GrowthCertificate, N: int) -> float:
    """Upper envelope K χ*^N for the frame separation A_N."""
    if N < 0:
        raise ValueError("N must be nonnegative")
    lc = cert.log_chi_star
    return _exp(envelope_log_constant(cert) + (N * lc if N else 0.0))


def direction_neighborhood(cert: GrowthCertificate, chi: float, N: int) -> tuple[float, float]:
    """Radius Θχ^N/(ϰϱ^N - χ^N) and coefficient bound Θ/(ϰϱ^N - χ^N)."""
    if not cert.chi_star < chi < cert.varrho:
        raise ValueError(f"chi must lie in (chi* = {cert.chi_star}, varrho = {cert.varrho})")
    return neighborhood(cert.theta, cert.kappa, cert.varrho, chi, N)


def neighborhood(theta: float, kappa: float, varrho: float, chi: float, N: int) -> tuple[float, float]:
    den = kappa * varrho**N - chi**N
    if not den > 0:
        raise ValueError(f"kappa*varrho^N - chi^N = {den} <= 0; N = {N} is too small for chi = {chi}")
    return theta * chi**N / den, theta / den


def minkowski_bound_value(m: int, chi_star: float, varrho: float) -> float:
    """(m-1) ln χ* / (ln χ* - ln ϱ)"""
    if not varrho > chi_star:
        raise ValueError(f"varrho = {varrho} must exceed chi* = {chi_star}")
    if chi_star == 0:
        return float(m - 1)
    a = math.log(chi_star)
    return (m - 1) * (a / (a - math.log(varrho)))


def minkowski_bound(cert: GrowthCertificate) -> float:
    if not cert.ladder.valuation.archimedean:
        raise ValueError("the Minkowski bound is stated over the reals")
    lc = cert.log_chi_star
    lr = math.log(cert.varrho)
    if not lr > lc:
        raise ValueError(f"varrho = {cert.varrho} must exceed chi* = {cert.chi_star}")
    if lc == NEG_INF:
        return float(cert.m - 1)
    return (cert.m - 1) * (lc / (lc - lr))


# ---------------------------------------------------------------- nonlinear budget


@dataclass(frozen=True)
class NonlinearityBudget:
    """Constants of a nonlinearity f_N with |f(x)-f(y)-T(x-y)| ≤ min(M|x-y|^Λ, L|x-y|), |T| ≤ C."""

    M: float
    L: float
    C: float
    Lam: float
    N0: int = 0
    gamma: float = 1.0
    delta: float = 1.0
    delta_prime: float = 0.5

    def __post_init__(self):
        if self.C <= 0:
            raise ValueError("C must be positive")
        if self.Lam <= 1:
            raise ValueError("Lambda must exceed 1")
        if self.M < 0 or self.L < 0:
            raise ValueError("M and L must be nonnegative")
        if not 0 < self.delta_prime < self.delta:
            raise ValueError("need 0 < delta' < delta")

    @property
    def q(self) -> float:
        return (self.L + self.C) ** self.Lam / self.C

    @property
    def eta(self) -> "EtaResult":
        return nonlinear_eta(self.M, self.L, self.C, self.Lam, self.N0)


@dataclass(frozen=True)
class EtaResult:
    value: float
    q: float
    terms_evaluated: int
    diagnostic: str = ""


def _geometric_sum(q: float, N: int) -> float:
    """Σ_{k=1}^N q^k, continuous through q = 1."""
    if N == 0:
        return 0.0
    lq = math.log(q)
    if lq == 0:
        return float(N)
    return q * math.expm1(N * lq) / math.expm1(lq)


def eta_term(M: float, L: float, C: float, Lam: float, N: int) -> float:
    """M C^N (1 + Σ_{k=1}^N q^k) / (L+C)^{NΛ}, evaluated as M[q^{-N} + q^{-N} Σ q^k]."""
    q = (L + C) ** Lam / C
    return M * math.exp(-N * math.log(q)) * (1.0 + _geometric_sum(q, N))


def nonlinear_eta(M: float, L: float, C: float, Lam: float, N0: int = 0,
                  tol: float = 1e-12, max_terms: int = 10**6) -> EtaResult:
    """sup_{N ≥ N0} of the η term.

    For q > 1 the terms increase geometrically towards their limit; they
    are summed until an increment drops below ``tol`` and the remaining
    geometric tail (ratio 1/q) is added in closed form.  For q ≤ 1 the terms
    grow without bound.
    """
    if C <= 0 or Lam <= 1:
        raise ValueError("need C > 0 and Lambda > 1")
    q = (L + C) ** Lam / C
    if M == 0:
        return EtaResult(0.0, q, 0)
    if q <= 1:
        return EtaResult(math.inf, q, 0, f"q = {q} <= 1: terms grow without bound")
    prev = eta_term(M, L, C, Lam, N0)
    best = prev
    n = 1
    for N in range(N0 + 1, N0 + max_terms):
        cur = eta_term(M, L, C, Lam, N)
        n += 1
        best = max(best, cur)
        inc = cur - prev
        prev = cur
        if abs(inc) < tol:
            # remaining increments form a geometric series with ratio 1/q
            return EtaResult(best + max(inc, 0.0) / (q - 1), q, n)
    return EtaResult(best, q, n, "increment tolerance not reached")


def perturbation_gate(budget: NonlinearityBudget, A: float, N: int) -> float:
    """γ A^{N/(Λ-1)} / (L+C)^{ΛN/(Λ-1)}"""
    if A <= 0:
        raise ValueError("A must be positive")
    lam = budget.Lam
    e = N / (lam - 1)
    return budget.gamma * _exp(e * math.log(A) - lam * e * math.log(budget.L + budget.C))


@dataclass(frozen=True)
class ErrorRecursion:
    iterates: tuple  # e_0..e_N
    majorants: tuple  # closed form at each N
    pathwise_within_chain: bool
    ok: bool


def error_majorant(M, L, C, Lam, d0, N) -> float:
    """M C^N (1 + Σ_{k=1}^N q^k) d0^Λ"""
    q = (L + C) ** Lam / C
    return M * C**N * (1.0 + _geometric_sum(q, N)) * d0**Lam


def error_recursion(budget: NonlinearityBudget, d0: float, N: int,
                    pathwise: Sequence[float] | None = None, rtol: float = 1e-12) -> ErrorRecursion:
    """Iterate e_{k+1} = M b_k^Λ + C e_k from e_0 = M d0^Λ.

    ``pathwise[k]`` bounds |f^k(x) - f^k(y)|; the default is the Lipschitz
    chain (L+C)^{k+1} d0.  The closed form only majorises the iterates when
    the pathwise bounds stay inside that chain.
    """
    M, L, C, Lam = budget.M, budget.L, budget.C, budget.Lam
    if d0 < 0:
        raise ValueError("d0 must be nonnegative")
    chain = [(L + C) ** (k + 1) * d0 for k in range(N)]
    b = chain if pathwise is None else list(pathwise)
    if len(b) < N:
        raise ValueError("need N pathwise bounds")
    if any(x < 0 for x in b):
        raise ValueError("pathwise bounds must be nonnegative")
    within = all(bk <= ck * (1 + rtol) for bk, ck in zip(b, chain))
    # both sides are linear in M; compare with M factored out so tiny M cannot underflow
    u = [d0**Lam]
    for k in range(N):
        u.append(b[k] ** Lam + C * u[-1])
    unit = [error_majorant(1.0, L, C, Lam, d0, n) for n in range(N + 1)]
    ok = M == 0 or all(x <= y * (1 + rtol) for x, y in zip(u, unit))
    e = [M * x for x in u]
    maj = [M * y for y in unit]
    if within and not ok:
        raise AssertionError("error recursion exceeded its closed-form majorant")
    return ErrorRecursion(tuple(e), tuple(maj), within, ok)
