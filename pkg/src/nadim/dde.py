"""Delay differential equations x'(t) = F(t, x_t) with segments x_t on [-τ, 0].

Integration is by the method of steps: classical RK4 on a grid whose step
divides τ, with cubic Hermite dense output for delayed lookups.  States may
carry a trailing batch axis, so one pass pushes a whole basis of initial
functions through a linear system.
"""
from __future__ import annotations

import csv
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import linprog

from .growth import CompactnessLadder, delay_rung, ladder_from_delay  # noqa: F401  (re-exported)

_EPS = 1e-12


# ---------------------------------------------------------------- data


@dataclass(frozen=True)
class PiecewiseConstant:
    """Right-continuous step function: ``values[j]`` holds on [breaks[j-1], breaks[j])."""

    breaks: tuple = ()
    values: tuple = (0.0,)

    def __post_init__(self):
        b = tuple(float(x) for x in self.breaks)
        if len(self.values) != len(b) + 1:
            raise ValueError("need exactly one more value than breaks")
        if any(y <= x for x, y in zip(b, b[1:])):
            raise ValueError("breaks must be strictly increasing")
        object.__setattr__(self, "breaks", b)
        object.__setattr__(self, "values", tuple(np.asarray(v, dtype=float) for v in self.values))

    @classmethod
    def constant(cls, v) -> "PiecewiseConstant":
        return cls((), (v,))

    def index(self, t: float) -> int:
        return bisect_right(self.breaks, t)

    def __call__(self, t: float) -> np.ndarray:
        return self.values[self.index(t)]

    def map(self, fn) -> "PiecewiseConstant":
        return PiecewiseConstant(self.breaks, tuple(fn(v) for v in self.values))

    def to_json(self):
        vals = [v.tolist() for v in self.values]
        if not self.breaks:
            return vals[0]
        return {"breaks": list(self.breaks), "values": vals}

    @classmethod
    def from_json(cls, obj) -> "PiecewiseConstant":
        if isinstance(obj, dict):
            return cls(tuple(obj.get("breaks", ())), tuple(obj["values"]))
        return cls.constant(obj)


def _as_matrix(v, d: int) -> np.ndarray:
    a = np.asarray(v, dtype=float)
    if a.ndim == 0:
        a = a * np.eye(d) if d > 1 else a.reshape(1, 1)
    if a.shape != (d, d):
        raise ValueError(f"coefficient must be {d}x{d}, got shape {a.shape}")
    return a


@dataclass(frozen=True)
class DelayTerm:
    """A(t) x(t - σ(t)).  ``sigma`` is piecewise constant, or a callable with
    optional ``breaks`` where it (or A) jumps."""

    A: PiecewiseConstant
    sigma: PiecewiseConstant | Callable[[float], float]
    breaks: tuple = ()

    def delay(self, t: float, tc: float) -> float:
        if isinstance(self.sigma, PiecewiseConstant):
            return float(self.sigma(tc))
        return float(self.sigma(t))

    def all_breaks(self) -> tuple:
        out = set(self.A.breaks) | set(self.breaks)
        if isinstance(self.sigma, PiecewiseConstant):
            out |= set(self.sigma.breaks)
        return tuple(sorted(out))


def op_norm_sup(A: np.ndarray) -> float:
    """Operator norm induced by the sup-norm: max absolute row sum."""
    return float(np.abs(A).sum(axis=1).max())


@dataclass(frozen=True)
class DelaySystem:
    """Linear (``terms``) or nonlinear (``rhs``) delay system on ℝ^d.

    ``rhs(t, cur, lookup)`` returns F(t, x_t) given the current state and a
    function ``lookup(s)`` for past values.  ``derivative(t, x_cur, x_lookup,
    v_cur, v_lookup)`` is the directional derivative of F along V.
    """

    tau: float
    d: int
    terms: tuple = ()
    majorant: PiecewiseConstant | None = None
    rhs: Callable | None = field(default=None, compare=False)
    derivative: Callable | None = field(default=None, compare=False)
    name: str = ""

    def __post_init__(self):
        if not self.tau > 0:
            raise ValueError("tau must be positive")
        if self.d < 1:
            raise ValueError("d must be positive")
        terms = tuple(
            DelayTerm(t.A.map(lambda v: _as_matrix(v, self.d)), t.sigma, t.breaks) for t in self.terms
        )
        object.__setattr__(self, "terms", terms)
        for t in terms:
            if isinstance(t.sigma, PiecewiseConstant):
                for s in t.sigma.values:
                    if not -_EPS <= float(s) <= self.tau + _EPS:
                        raise ValueError(f"delay {float(s)} outside [0, tau]")

    @property
    def linear(self) -> bool:
        return self.rhs is None

    def breakpoints(self) -> tuple:
        out = set()
        for t in self.terms:
            out |= set(t.all_breaks())
        if self.majorant is not None:
            out |= set(self.majorant.breaks)
        return tuple(sorted(out))

    def evaluate(self, t: float, cur, lookup, tc: float | None = None):
        tc = t if tc is None else tc
        if self.rhs is not None:
            return self.rhs(t, cur, lookup)
        out = np.zeros_like(cur)
        for term in self.terms:
            A = term.A(tc)
            if not A.any():
                continue
            sig = term.delay(t, tc)
            val = cur if sig <= _EPS else lookup(t - sig)
            out = out + A @ val
        return out

    def coefficient_norm(self, t: float) -> float:
        """Σ_j |A_j(t)|, the smallest admissible Lipschitz majorant at t."""
        return sum(op_norm_sup(term.A(t)) for term in self.terms)

    def check_majorant(self, times: Sequence[float], rtol: float = 1e-12) -> float:
        """Largest ratio Σ|A_j(t)| / n(t) over ``times`` (≤ 1 when n is a valid majorant)."""
        if self.majorant is None:
            raise ValueError("system declares no majorant")
        worst = 0.0
        for t in times:
            c = self.coefficient_norm(t)
            n = float(self.majorant(t))
            if c == 0:
                continue
            worst = max(worst, math.inf if n <= 0 else c / n)
        return worst

    def to_json(self) -> dict:
        if not self.linear:
            raise ValueError("only linear systems serialise; nonlinear ones are named models")
        out = {"tau": self.tau, "d": self.d, "terms": []}
        for t in self.terms:
            if not isinstance(t.sigma, PiecewiseConstant):
                raise ValueError("callable delays do not serialise")
            out["terms"].append({"A": t.A.to_json(), "sigma": t.sigma.to_json()})
        if self.majorant is not None:
            out["majorant"] = self.majorant.to_json()
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "DelaySystem":
        if "model" in obj:
            if obj["model"] == "logistic-delay":
                return logistic_delay(obj.get("tau", 1.0))
            raise ValueError(f"unknown model {obj['model']!r}")
        terms = tuple(
            DelayTerm(PiecewiseConstant.from_json(t["A"]), PiecewiseConstant.from_json(t.get("sigma", 0.0)))
            for t in obj.get("terms", ())
        )
        maj = obj.get("majorant")
        return cls(float(obj["tau"]), int(obj["d"]), terms,
                   None if maj is None else PiecewiseConstant.from_json(maj))


def linear_system(tau: float, d: int, terms: Sequence[tuple], majorant=None) -> DelaySystem:
    """Shorthand: ``terms`` are (A, σ) pairs of constants or PiecewiseConstant."""
    def pc(x):
        return x if isinstance(x, PiecewiseConstant) else PiecewiseConstant.constant(x)

    built = tuple(DelayTerm(pc(A), s if callable(s) and not isinstance(s, PiecewiseConstant) else pc(s))
                  for A, s in terms)
    return DelaySystem(tau, d, built, None if majorant is None else pc(majorant))


def logistic_delay(tau: float = 1.0) -> DelaySystem:
    """x'(t) = x(t - τ)(1 - x(t))"""
    def rhs(t, cur, lookup):
        return lookup(t - tau) * (1.0 - cur)

    def deriv(t, x_cur, x_lookup, v_cur, v_lookup):
        return v_lookup(t - tau) * (1.0 - x_cur) - x_lookup(t - tau) * v_cur

    return DelaySystem(tau, 1, (), None, rhs, deriv, "logistic-delay")


# ---------------------------------------------------------------- trajectories


def _hermite(t0, t1, x0, x1, f0, f1, s):
    dt = t1 - t0
    u = (s - t0) / dt
    u2, u3 = u * u, u * u * u
    return ((2 * u3 - 3 * u2 + 1) * x0 + (u3 - 2 * u2 + u) * dt * f0
            + (-2 * u3 + 3 * u2) * x1 + (u3 - u2) * dt * f1)


@dataclass
class Trajectory:
    """Nodes, values and derivatives with cubic Hermite dense output.

    ``x`` has shape (n, d) or (n, d, B) for batched runs.  Times before the
    first node are served by the initial function.
    """

    t: np.ndarray
    x: np.ndarray
    dx: np.ndarray
    h: float
    history: Callable | None = None
    system: DelaySystem | None = None
    dx_left: np.ndarray | None = None  # one-sided derivatives where coefficients jump

    def _dx_end(self, k: int):
        return self.dx[k] if self.dx_left is None else self.dx_left[k]

    @property
    def t0(self) -> float:
        return float(self.t[0])

    @property
    def T(self) -> float:
        return float(self.t[-1])

    @property
    def batched(self) -> bool:
        return self.x.ndim == 3

    def __call__(self, s: float) -> np.ndarray:
        if s < self.t0 - _EPS:
            if self.history is None:
                raise ValueError(f"time {s} precedes the trajectory")
            return self.history(s)
        if s > self.T + _EPS:
            raise ValueError(f"time {s} beyond the trajectory end {self.T}")
        k = min(max(int(np.searchsorted(self.t, s, side="right")) - 1, 0), len(self.t) - 2)
        if len(self.t) == 1:
            return self.x[0]
        return _hermite(self.t[k], self.t[k + 1], self.x[k], self.x[k + 1], self.dx[k], self._dx_end(k + 1), s)

    def sample(self, times: Sequence[float]) -> np.ndarray:
        return np.stack([self(float(s)) for s in times])

    def window(self, a: float, b: float) -> np.ndarray:
        """Node values (plus Hermite midpoints) on [a, b]."""
        mask = (self.t >= a - _EPS) & (self.t <= b + _EPS)
        idx = np.nonzero(mask)[0]
        vals = [self.x[idx]]
        if len(idx) > 1:
            mids = 0.5 * (self.t[idx[:-1]] + self.t[idx[1:]])
            vals.append(self.sample(mids))
        return np.concatenate(vals)

    def sup_norm(self, a: float | None = None, b: float | None = None) -> float:
        a = self.t0 if a is None else a
        b = self.T if b is None else b
        w = self.window(a, b)
        return float(np.abs(w).max()) if w.size else 0.0

    def column(self, j: int) -> "Trajectory":
        if not self.batched:
            raise ValueError("trajectory is not batched")
        hist = None if self.history is None else (lambda s: self.history(s)[:, j])
        left = None if self.dx_left is None else self.dx_left[:, :, j]
        return Trajectory(self.t, self.x[:, :, j], self.dx[:, :, j], self.h, hist, self.system, left)

    def to_csv(self, path) -> None:
        """Write ``t, x1..xd`` rows to a path or an open text stream."""
        if self.batched:
            raise ValueError("export a single column first")
        if hasattr(path, "write"):
            self._write_rows(path)
            return
        with open(path, "w", newline="") as fh:
            self._write_rows(fh)

    def _write_rows(self, fh) -> None:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["t"] + [f"x{i + 1}" for i in range(self.x.shape[1])])
        for t, row in zip(self.t, self.x):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in row])

    @classmethod
    def from_function(cls, fn: Callable, t0: float, T: float, h: float,
                      dfn: Callable | None = None) -> "Trajectory":
        """Tabulate a known function; derivatives by central differences unless given."""
        n = int(round((T - t0) / h))
        t = t0 + h * np.arange(n + 1)
        x = np.array([np.atleast_1d(fn(s)) for s in t], dtype=float)
        if dfn is not None:
            dx = np.array([np.atleast_1d(dfn(s)) for s in t], dtype=float)
        else:
            dx = np.gradient(x, t, axis=0, edge_order=2)
        return cls(t, x, dx, h, lambda s: np.atleast_1d(fn(s)).astype(float))


# ---------------------------------------------------------------- integration


class IntegrationError(ValueError):
    pass


def _divides(h: float, tau: float) -> bool:
    q = tau / h
    return abs(q - round(q)) <= 1e-9 * max(1.0, q) and round(q) >= 1


def _as_history(phi, d: int) -> Callable[[float], np.ndarray]:
    if isinstance(phi, Trajectory):
        return phi
    if callable(phi):
        def hist(s):
            v = np.asarray(phi(s), dtype=float)
            return v.reshape(d) if v.ndim <= 1 else v
        return hist
    c = np.asarray(phi, dtype=float)
    if c.ndim == 0:
        c = np.full(d, float(c))
    return lambda s: c


def integrate(system: DelaySystem, phi, t0: float, T: float, h: float,
              extra_breaks: Sequence[float] = ()) -> Trajectory:
    """Solve on [t0, T] from the initial function ``phi`` on [t0 - τ, t0].

    ``phi`` may be a constant, a callable returning (d,) or (d, B) arrays, or
    a trajectory.  Breakpoints of the coefficient data inside a step split it.
    """
    tau = system.tau
    if not h > 0:
        raise IntegrationError("step must be positive")
    if not _divides(h, tau):
        raise IntegrationError(f"step h = {h} does not divide tau = {tau}")
    if T < t0:
        raise IntegrationError("T must not precede t0")
    hist = _as_history(phi, system.d)
    x0 = np.array(hist(t0), dtype=float)
    if x0.shape[0] != system.d:
        raise IntegrationError(f"initial function has dimension {x0.shape[0]}, system has {system.d}")

    n = int(math.floor((T - t0) / h + 1e-9))
    grid = [t0 + k * h for k in range(n + 1)]
    if T - grid[-1] > 1e-9 * h:
        grid.append(T)
    brk = [b for b in (*system.breakpoints(), *extra_breaks) if t0 < b < T]
    if brk:
        g = np.asarray(grid)
        for b in brk:
            j = int(np.searchsorted(g, b))
            if min(abs(b - g[max(j - 1, 0)]), abs(b - g[min(j, len(g) - 1)])) > 1e-9 * h:
                grid.append(b)
        grid = sorted(grid)

    # grid values that sit on a coefficient break (inserted or already on the grid)
    gsorted = np.asarray(grid)
    brk_nodes = {float(gsorted[np.abs(gsorted - b).argmin()]) for b in brk}
    ts: list[float] = [t0]
    xs: list[np.ndarray] = [x0]
    fs: list[np.ndarray] = []
    left: dict[int, np.ndarray] = {}  # node index -> derivative with the previous step's coefficients
    lo = t0 - tau - 1e-9 * tau

    def past(s: float):
        if s <= t0:
            if s < lo:
                raise IntegrationError(f"delayed lookup at {s} precedes the history start {t0 - tau}")
            return hist(s)
        k = bisect_right(ts, s) - 1
        if k >= len(ts) - 1:
            return xs[-1]
        if k + 1 < len(fs):
            return _hermite(ts[k], ts[k + 1], xs[k], xs[k + 1], fs[k], left.get(k + 1, fs[k + 1]), s)
        # derivative at the newest node not known yet: quadratic through x_k, x'_k, x_{k+1}
        dt = ts[k + 1] - ts[k]
        c = (xs[k + 1] - xs[k] - fs[k] * dt) / dt**2
        u = s - ts[k]
        return xs[k] + fs[k] * u + c * u * u

    def stage_lookup(tn, xn, fn, ts_, cur):
        # values inside the current step come from the quadratic through
        # x_n, x'_n and the stage state at ts_
        def lookup(s):
            if s <= tn:
                return past(s)
            dt = ts_ - tn
            if dt <= 0:
                return xn
            c = (cur - xn - fn * dt) / dt**2
            u = s - tn
            return xn + fn * u + c * u * u
        return lookup

    F = system.evaluate
    for k in range(1, len(grid)):
        tn, tn1 = ts[-1], grid[k]
        dt = tn1 - tn
        tc = 0.5 * (tn + tn1)
        xn = xs[-1]
        k1 = F(tn, xn, past, tc)
        if len(fs) < len(ts):
            fs.append(k1)
        else:
            fs[-1] = k1
        th = tn + 0.5 * dt
        y2 = xn + 0.5 * dt * k1
        k2 = F(th, y2, stage_lookup(tn, xn, k1, th, y2), tc)
        y3 = xn + 0.5 * dt * k2
        k3 = F(th, y3, stage_lookup(tn, xn, k1, th, y3), tc)
        y4 = xn + dt * k3
        k4 = F(tn1, y4, stage_lookup(tn, xn, k1, tn1, y4), tc)
        ts.append(tn1)
        xs.append(xn + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4))
        if tn1 in brk_nodes:
            left[len(ts) - 1] = F(tn1, xs[-1], past, tc)
    # derivative at the last node, with coefficients from the last interval
    tl = ts[-1]
    tc = 0.5 * (ts[-2] + tl) if len(ts) > 1 else tl
    fs.append(F(tl, xs[-1], past, tc))
    dx = np.stack(fs)
    dx_left = None
    if left:
        dx_left = dx.copy()
        for i, v in left.items():
            dx_left[i] = v
    return Trajectory(np.asarray(ts), np.stack(xs), dx, h, hist, system, dx_left)


# ---------------------------------------------------------------- rescaling


@dataclass(frozen=True)
class TimeMap:
    """Nondecreasing piecewise-linear map given by knots, extended linearly."""

    knots_t: np.ndarray
    knots_f: np.ndarray
    slope_left: float
    slope_right: float

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        out = np.interp(t, self.knots_t, self.knots_f)
        with np.errstate(invalid="ignore"):
            left = self.knots_f[0] + (t - self.knots_t[0]) * self.slope_left if self.slope_left else self.knots_f[0]
            right = self.knots_f[-1] + (t - self.knots_t[-1]) * self.slope_right
        out = np.where(t < self.knots_t[0], left, out)
        out = np.where(t > self.knots_t[-1], right, out)
        return out if out.ndim else float(out)

    def inverse_at(self, s: float) -> float:
        """inf{t : f(t) > s}, the right-continuous generalised inverse."""
        kt, kf = self.knots_t, self.knots_f
        if s < kf[0]:
            if self.slope_left <= 0:
                return -math.inf
            return kt[0] + (s - kf[0]) / self.slope_left
        j = int(np.searchsorted(kf, s, side="right"))
        if j >= len(kf):
            if self.slope_right <= 0:
                return math.inf
            return kt[-1] + (s - kf[-1]) / self.slope_right
        return kt[j - 1] + (s - kf[j - 1]) * (kt[j] - kt[j - 1]) / (kf[j] - kf[j - 1])


@dataclass(frozen=True)
class Rescaled:
    system: DelaySystem
    f: TimeMap  # original time → new time
    g: Callable[[float], float]  # new time → original time
    r: float  # new delay horizon
    majorant_max: float  # largest Σ|Ã_j| seen on the check grid

    def initial_function(self, phi, tau: float, d: int) -> Callable:
        hist = _as_history(phi, d)

        def phi_new(s):
            # a plateau of f at the start keeps x frozen at φ(0)
            return hist(min(max(self.g(s), -tau), 0.0))
        return phi_new


def window_sup(n: PiecewiseConstant, tau: float) -> float:
    """sup_t ∫_t^{t+τ} n, exact for step functions (the window integral is
    piecewise linear in t with kinks where t or t+τ meets a break)."""
    def integral(a, b):
        pts = [a] + [x for x in n.breaks if a < x < b] + [b]
        return sum(float(n(0.5 * (u + v))) * (v - u) for u, v in zip(pts, pts[1:]))

    cands = set()
    for b in n.breaks:
        cands.add(b)
        cands.add(b - tau)
    best = max(float(n.values[0]), float(n.values[-1])) * tau
    for t in cands:
        best = max(best, integral(t, t + tau))
    return best


def rescale_time(system: DelaySystem, check_points: int = 2000) -> Rescaled:
    """Reparametrise time by s = f(t) = ∫_0^t n so the new majorant is ≤ 1.

    New coefficients are A_j(g(s))/n(g(s)); new delays s - f(g(s) - σ_j(g(s))),
    which are callables because they vary with s.
    """
    if not system.linear:
        raise ValueError("rescale_time needs a linear system")
    n = system.majorant if system.majorant is not None else _default_majorant(system)
    vals = [float(v) for v in n.values]
    if any(v < 0 for v in vals):
        raise ValueError("majorant must be nonnegative")
    if vals[-1] <= 0:
        raise ValueError("majorant vanishes on the tail of the horizon; f is bounded and no rescaling exists")

    kt = np.array(sorted(set((0.0, *n.breaks))))
    kf = np.zeros_like(kt)
    for j in range(1, len(kt)):
        kf[j] = kf[j - 1] + float(n(0.5 * (kt[j - 1] + kt[j]))) * (kt[j] - kt[j - 1])
    # negative times before the first knot
    if kt[0] < 0:
        zero = int(np.searchsorted(kt, 0.0))
        kf = kf - kf[zero]
    f = TimeMap(kt, kf, vals[0], vals[-1])
    g = f.inverse_at
    r = window_sup(n, system.tau)
    if r <= 0:
        raise ValueError("majorant integrates to zero over every window")

    # coefficient pieces are constant between images of the breaks
    new_terms = []
    for term in system.terms:
        brks = sorted(set(term.all_breaks()) | set(n.breaks))
        sbreaks = sorted(set(float(f(b)) for b in brks))
        values = []
        for j in range(len(sbreaks) + 1):
            if not sbreaks:
                s_mid = 0.0
            elif j == 0:
                s_mid = sbreaks[0] - 1.0
            elif j == len(sbreaks):
                s_mid = sbreaks[-1] + 1.0
            else:
                s_mid = 0.5 * (sbreaks[j - 1] + sbreaks[j])
            t_mid = g(s_mid)
            nn = float(n(t_mid)) if math.isfinite(t_mid) else 0.0
            values.append(term.A(t_mid) / nn if nn > 0 else np.zeros((system.d, system.d)))
        A_new = PiecewiseConstant(tuple(sbreaks), tuple(values))

        def sigma_new(s, term=term):
            t = g(s)
            return min(max(s - float(f(t - term.delay(t, t))), 0.0), r)

        new_terms.append(DelayTerm(A_new, sigma_new, tuple(sbreaks)))

    new = DelaySystem(r, system.d, tuple(new_terms), PiecewiseConstant.constant(1.0), name=system.name)
    ss = sorted(set(float(x) for x in np.linspace(-r, float(f(max(kt[-1], 0.0) + 4 * system.tau)), check_points))
                | set(b for t in new_terms for b in t.breaks))
    worst = max((new.coefficient_norm(s) for s in ss), default=0.0)
    return Rescaled(new, f, g, r, worst)


def _default_majorant(system: DelaySystem) -> PiecewiseConstant:
    brk = system.breakpoints()
    pts = [brk[0] - 1.0] if brk else [0.0]
    pts += [0.5 * (a + b) for a, b in zip(brk, brk[1:])]
    if brk:
        pts.append(brk[-1] + 1.0)
    return PiecewiseConstant(brk, tuple(system.coefficient_norm(t) for t in pts))


# ---------------------------------------------------------------- ladders and restricted norms


def constraint_times(tau: float, level: int) -> list[float]:
    """Zero-constraint grid for ladder level i: none at i = 0, {0} at i = 1,
    and kτ/2^{i-2} for k = 0..2^{i-2} from i = 2 on (2^{i-2}+1 points, so the
    codimension is k_i)."""
    if level < 0:
        raise ValueError("level must be nonnegative")
    if level == 0:
        return []
    if level == 1:
        return [0.0]
    q = 2 ** (level - 2)
    return [k * tau / q for k in range(q + 1)]


def hat_basis(tau: float, d: int, h: float) -> Callable[[float], np.ndarray]:
    """Piecewise-linear basis on [-τ, 0] at resolution h; returns φ(s) as a (d, d(M+1)) array."""
    M = int(round(tau / h))
    nodes = -tau + h * np.arange(M + 1)

    def phi(s):
        hats = np.clip(1.0 - np.abs(s - nodes) / h, 0.0, None)
        out = np.zeros((d, d * (M + 1)))
        for c in range(d):
            out[c, c * (M + 1):(c + 1) * (M + 1)] = hats
        return out
    return phi


@dataclass(frozen=True)
class RestrictedNorm:
    estimate: float
    sampled: float
    lp: float
    rho: float
    level: int
    codim: int
    samples: int
    within: bool  # estimate ≤ ρ_i (1 + allowance)
    allowance: float


def restricted_norm_estimate(system: DelaySystem, level: int, samples: int = 100, h: float = 1 / 64,
                             seed: int = 0, allowance: float = 0.1, rank_tol: float = 1e-10) -> RestrictedNorm:
    """Estimate |Q restricted to the level-i subspace|, Q the solution map φ ↦ x_τ.

    The subspace is cut out of a hat basis by requiring the solution to
    vanish on the level's dyadic grid.  The sup-norm ratio is maximised by
    random sampling and, exactly for the discretised problem, by one LP per
    output node.
    """
    if not system.linear:
        raise ValueError("restricted norms need a linear system")
    if samples < 100:
        raise ValueError("use at least 100 samples")
    tau, d = system.tau, system.d
    basis = hat_basis(tau, d, h)
    traj = integrate(system, basis, 0.0, tau, h)
    B = traj.x.shape[2]
    out_times = traj.t[(traj.t >= -_EPS) & (traj.t <= tau + _EPS)]
    Y = traj.sample(out_times).reshape(-1, B)  # output rows for every (node, component)

    ctimes = constraint_times(tau, level)
    if ctimes:
        C = traj.sample(ctimes).reshape(-1, B)
        U, S, Vt = np.linalg.svd(C)
        rank = int((S > rank_tol * (S[0] if S.size else 0.0)).sum())
        null = Vt[rank:].T
    else:
        C = np.zeros((0, B))
        rank = 0
        null = np.eye(B)
    if null.shape[1] == 0:
        raise ValueError("constraints leave no nonzero initial function; refine h")

    rng = np.random.default_rng(seed)
    coef = null @ rng.standard_normal((null.shape[1], samples))
    num = np.abs(Y @ coef).max(axis=0)
    den = np.abs(coef).max(axis=0)
    sampled = float((num / den).max())

    lp = 0.0
    A_eq = C if C.shape[0] else None
    b_eq = np.zeros(C.shape[0]) if C.shape[0] else None
    for row in Y:
        if not row.any():
            continue
        res = linprog(-row, A_eq=A_eq, b_eq=b_eq, bounds=[(-1, 1)] * B, method="highs")
        if res.status == 0:
            lp = max(lp, float(abs(row @ res.x)))
    rho = delay_rung(tau, d, level)[1]
    est = max(sampled, lp)
    return RestrictedNorm(est, sampled, lp, rho, level, rank, samples, est <= rho * (1 + allowance), allowance)


def worst_case_family(tau: float = 1.0, d: int = 1) -> list[DelaySystem]:
    """Linear systems with Σ|A_j| ≤ 1: single delayed feedback of either
    sign at several lags, sign-switching coefficients and split feedback."""
    I = np.eye(d)
    out = []
    for frac in (0.0, 0.25, 0.5, 0.75, 1.0):
        for sgn in (1.0, -1.0):
            out.append(linear_system(tau, d, [(sgn * I, frac * tau)], 1.0))
    switch = PiecewiseConstant((0.5 * tau,), (I, -I))
    out.append(linear_system(tau, d, [(switch, tau)], 1.0))
    out.append(linear_system(tau, d, [(0.5 * I, 0.0), (-0.5 * I, tau)], 1.0))
    out.append(linear_system(tau, d, [(-0.5 * I, 0.5 * tau), (-0.5 * I, tau)], 1.0))
    return out


@dataclass(frozen=True)
class MyshkisReport:
    status: str  # "pass" | "fail" | "hypothesis-unmet"
    sup: float
    bound: float
    zeros: tuple  # (t, |x(t)|)
    rho_next: float  # the matching ladder bound ρ_{i+1}


def myshkis_bound(tau: float, i: int) -> float:
    return tau / 2**i if tau <= 2**i else math.exp(tau - 2**i)


def myshkis_check(traj: Trajectory, tau: float, i: int, phi_norm: float,
                  zero_tol: float | None = None) -> MyshkisReport:
    """Zeros at kτ/2^{i-1} force |x| ≤ (τ/2^i)|φ| on [0, τ] (or exp(τ-2^i)|φ| when τ > 2^i)
    for any solution of a system with |F(t, ·)| ≤ 1."""
    if i < 1:
        raise ValueError("i must be at least 1")
    if traj.t0 > _EPS or traj.T < tau - _EPS:
        raise ValueError("trajectory must cover [0, tau]")
    tol = 1e-8 * phi_norm if zero_tol is None else zero_tol
    q = 2 ** (i - 1)
    zeros = tuple((k * tau / q, float(np.abs(traj(k * tau / q)).max())) for k in range(q + 1))
    bound = myshkis_bound(tau, i)
    rho_next = delay_rung(tau, 1, i + 1)[1]
    sup = traj.sup_norm(0.0, tau)
    if any(z > tol for _, z in zeros):
        return MyshkisReport("hypothesis-unmet", sup, bound, zeros, rho_next)
    status = "pass" if sup <= bound * phi_norm * (1 + 1e-9) + tol else "fail"
    return MyshkisReport(status, sup, bound, zeros, rho_next)


def stability_cap(M: float, ladder: CompactnessLadder, max_depth: int = 200) -> tuple[int, int]:
    """Smallest i with ρ_i M < 1, returned as (k_i, i)."""
    if not M > 0:
        raise ValueError("M must be positive")
    for i in range(max_depth):
        try:
            k, rho = ladder.rung(i)
        except IndexError:
            raise ValueError(f"no rung with rho_i * M < 1 among the {i} available; extend the ladder") from None
        if rho * M < 1:
            return k, i
    raise ValueError(f"no rung with rho_i * M < 1 up to depth {max_depth}")


def variational_solve(system: DelaySystem, phi, xi, T: float, h: float,
                      base: Trajectory | None = None) -> Trajectory:
    """Integrate V' = d₂F(t, x_t)[V_t] along the solution from ``phi``, V_0 = ``xi``."""
    if system.linear:
        return integrate(system, xi, 0.0, T, h)
    if system.derivative is None:
        raise ValueError("system supplies no derivative provider")
    x = base if base is not None else integrate(system, phi, 0.0, T, h)

    def rhs(t, v_cur, v_lookup):
        return system.derivative(t, x(min(t, x.T)), lambda s: x(min(s, x.T)), v_cur, v_lookup)

    lin = DelaySystem(system.tau, system.d, (), None, rhs, None, system.name + "-variational")
    return integrate(lin, xi, 0.0, T, h)
