"""1D quasilinear solver for v_t = A(v) v_x, simple waves and separable solutions.

Sign convention: the plus sign in v_t = +A v_x is kept, so characteristics
travel with dx/dt = -lambda.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from . import euler
from . import expr as ex
from .system import QuasilinearSystem

SQRT3 = math.sqrt(3.0)


class SimulationError(RuntimeError):
    def __init__(self, message, step=None, time=None, cell=None):
        super().__init__(message)
        self.step = step
        self.time = time
        self.cell = cell


class InadmissibleState(SimulationError):
    pass


class CatastropheAbort(SimulationError):
    pass


# -- systems ------------------------------------------------------------------

def _reduced_bound(v):
    t1, t2, t3 = v[:, 0], v[:, 1], v[:, 2]
    return np.abs(2 * SQRT3 * t2) + SQRT3 * np.exp((4 * t1 - t3) / 2)


def reduced_nonelastic():
    T1, T2, T3 = euler.T1, euler.T2, euler.T3
    k = 2 * SQRT3
    A = [[k * T2, ex.const(SQRT3), 0],
         [ex.const(SQRT3) * ex.exp(4 * T1 - T3), k * T2, 0],
         [0, 0, k * T2]]
    return QuasilinearSystem("reduced_nonelastic", euler.T_CHART, A, _reduced_bound)


def reduced_elastic(kappa=3.0, u0=0.0):
    """Diagonal system for the Riemann invariants (r1, r2) with the repeated
    entry s = sqrt(kappa)(r1 - r2 + 1) + u0, rewritten with the plus sign."""
    r1, r2 = ex.Sym("r1"), ex.Sym("r2")
    s = ex.const(math.sqrt(kappa)) * (r1 - r2 + 1) + u0
    A = [[-s, 0], [0, -s]]
    return QuasilinearSystem(f"reduced_elastic({kappa:g})", ex.Chart(["r1", "r2"]), A,
                             lambda v: np.abs(math.sqrt(kappa) * (v[:, 0] - v[:, 1] + 1) + u0))


def custom_system(chart, matrix, params=None, name="custom"):
    if not isinstance(chart, ex.Chart):
        chart = ex.Chart(chart)
    rows = [[ex.parse(str(a), chart, tuple(params or ())) if not isinstance(a, ex.Expr) else a
             for a in row] for row in matrix]
    m = len(rows)
    if any(len(r) != m for r in rows):
        raise ValueError("custom matrix must be square")
    return QuasilinearSystem(name, chart, rows, params=params)


def build_system(ident, **kw):
    """ident: 'euler', 'reduced_nonelastic', 'reduced_elastic' or 'custom'."""
    key = ident.replace("-", "_")
    if key == "euler":
        return euler.euler_system(kw.get("kappa", 3.0))
    if key == "reduced_nonelastic":
        return reduced_nonelastic()
    if key == "reduced_elastic":
        return reduced_elastic(kw.get("kappa", 3.0), kw.get("u0", 0.0))
    if key == "custom":
        return custom_system(kw["chart"], kw["matrix"], kw.get("params"))
    raise ValueError(f"unknown system id {ident!r}")


# -- grid and stepping ----------------------------------------------------------

@dataclass
class GridState1D:
    x_min: float
    x_max: float
    values: np.ndarray
    time: float = 0.0
    periodic: bool = False

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=float)
        if self.values.ndim != 2:
            raise ValueError("values must have shape (N, m)")
        if self.N < 8:
            raise ValueError("need at least 8 cells")
        if not self.x_max > self.x_min:
            raise ValueError("x_max must exceed x_min")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite initial values")

    @property
    def N(self):
        return self.values.shape[0]

    @property
    def dx(self):
        n = self.N if self.periodic else self.N - 1
        return (self.x_max - self.x_min) / n

    @property
    def x(self):
        return self.x_min + self.dx * np.arange(self.N)

    @classmethod
    def from_functions(cls, funcs, x_min, x_max, N, periodic=False, t=0.0):
        """funcs: callables of (x, t) or Expressions over (x, t)."""
        xs = x_min + (x_max - x_min) / (N if periodic else N - 1) * np.arange(N)
        cols = [_eval_xt(f, xs, t) for f in funcs]
        return cls(x_min, x_max, np.stack(cols, axis=1), t, periodic)


XT_CHART = ex.Chart(["x", "t"])


def _eval_xt(f, xs, t):
    if isinstance(f, (str, ex.Expr)):
        e = ex.parse(f, XT_CHART) if isinstance(f, str) else f
        pts = np.stack([xs, np.full_like(xs, t)], axis=1)
        return np.broadcast_to(ex.evaluate(e, pts, chart=XT_CHART), xs.shape).astype(float)
    if callable(f):
        return np.broadcast_to(np.asarray(f(xs, t), dtype=float), xs.shape)
    return np.full_like(xs, float(f))


@dataclass
class SimConfig:
    scheme: str = "maccormack"
    cfl: float = 0.4
    t_end: float = 0.2
    bc: str = "extrapolate"
    stride: int = 1
    max_steps: int = 1_000_000

    def __post_init__(self):
        if self.scheme not in ("lax_friedrichs", "maccormack"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not 0 < self.cfl <= 1:
            raise ValueError("cfl must lie in (0, 1]")
        if self.bc not in ("periodic", "extrapolate"):
            raise ValueError(f"unknown boundary condition {self.bc!r}")
        if not self.t_end >= 0:
            raise ValueError("t_end must be non-negative")
        if self.stride < 1:
            raise ValueError("stride must be >= 1")


@dataclass
class Trajectory:
    x: np.ndarray
    times: list
    states: list
    system: QuasilinearSystem
    config: SimConfig
    steps: int = 0
    redone: int = 0
    log: list = field(default_factory=list)
    step_index: list = field(default_factory=lambda: [0])

    @property
    def final(self):
        return self.states[-1]


def _pad(v, bc):
    if bc == "periodic":
        return np.concatenate([v[-1:], v, v[:1]])
    return np.concatenate([v[:1], v, v[-1:]])


def _apply(A, d):
    return np.einsum("nij,nj->ni", A, d)


def _step(sys, v, dt, dx, cfg):
    if cfg.scheme == "lax_friedrichs":
        w = _pad(v, cfg.bc)
        left, right = w[:-2], w[2:]
        return 0.5 * (left + right) + dt * _apply(sys.matrix(v), (right - left) / (2 * dx))
    w = _pad(v, cfg.bc)
    fwd = (w[2:] - w[1:-1]) / dx
    vs = v + dt * _apply(sys.matrix(v), fwd)
    ws = _pad(vs, cfg.bc)
    bwd = (ws[1:-1] - ws[:-2]) / dx
    return 0.5 * (v + vs + dt * _apply(sys.matrix(vs), bwd))


def _check_state(sys, v, step, t):
    bad = ~np.all(np.isfinite(v), axis=1)
    if np.any(bad):
        i = int(np.argmax(bad))
        raise SimulationError(f"non-finite value in cell {i} at step {step}", step, t, i)
    ok = sys.admissible(v)
    if not np.all(ok):
        i = int(np.argmin(ok))
        raise InadmissibleState(f"inadmissible state in cell {i} at step {step}, t={t:.6g}", step, t, i)


def run(sys, state0, cfg):
    """March state0 to cfg.t_end; dt = cfl dx / max bound, recomputed every step."""
    v = np.array(state0.values, dtype=float)
    if v.shape[1] != sys.m:
        raise ValueError(f"state has {v.shape[1]} components, system expects {sys.m}")
    if (cfg.bc == "periodic") != state0.periodic:
        raise ValueError("grid periodicity does not match the boundary condition")
    dx = state0.dx
    t = state0.time
    t_end = t + cfg.t_end
    _check_state(sys, v, 0, t)
    b0 = float(np.max(sys.spectral_bound(v)))
    traj = Trajectory(state0.x, [t], [v.copy()], sys, cfg)
    step = 0
    while t < t_end - 1e-14 * max(1.0, abs(t_end)):
        if step >= cfg.max_steps:
            raise SimulationError(f"max_steps {cfg.max_steps} reached at t={t:.6g}", step, t)
        b = float(np.max(sys.spectral_bound(v)))
        if not np.isfinite(b):
            raise SimulationError(f"non-finite spectral bound at step {step}", step, t)
        if b > 10 * max(b0, 1e-300):
            raise CatastropheAbort(f"spectral bound grew to {b:.6g} (initial {b0:.6g})", step, t)
        dt = cfg.cfl * dx / b if b > 0 else t_end - t
        dt = min(dt, t_end - t)
        new = _step(sys, v, dt, dx, cfg)
        _check_state(sys, new, step + 1, t + dt)
        bn = float(np.max(sys.spectral_bound(new)))
        if bn > 2 * b:
            # bound grew beyond the estimate used for dt: redo with the new bound
            traj.redone += 1
            traj.log.append(f"step {step}: bound {b:.6g} -> {bn:.6g}, dt recomputed")
            dt = min(cfg.cfl * dx / bn, t_end - t)
            new = _step(sys, v, dt, dx, cfg)
            _check_state(sys, new, step + 1, t + dt)
        v = new
        t += dt
        step += 1
        if step % cfg.stride == 0 or t >= t_end - 1e-14 * max(1.0, abs(t_end)):
            traj.times.append(t)
            traj.states.append(v.copy())
            traj.step_index.append(step)
    if traj.times[-1] != t:
        traj.times.append(t)
        traj.states.append(v.copy())
        traj.step_index.append(step)
    traj.steps = step
    return traj


# -- residuals ------------------------------------------------------------------

@dataclass
class Residual:
    field: np.ndarray
    max_norm: float
    l2_norm: float
    time: float


def time_derivative(times, states, k):
    """Second-order derivative at level k from levels k-1, k, k+1 (nonuniform)."""
    h1 = times[k] - times[k - 1]
    h2 = times[k + 1] - times[k]
    a = -h2 / (h1 * (h1 + h2))
    b = (h2 - h1) / (h1 * h2)
    c = h1 / (h2 * (h1 + h2))
    return a * states[k - 1] + b * states[k] + c * states[k + 1]


def residual(sys, traj, level=None, window=None, x=None, times=None, states=None):
    """Centered-difference v_t - A(v) v_x at an interior stored level.

    The outermost cells are dropped; `window` = (lo, hi) restricts the norms.
    """
    times = traj.times if times is None else times
    states = traj.states if states is None else states
    x = traj.x if x is None else x
    if len(states) < 3:
        raise ValueError("residual needs at least 3 stored time levels")
    k = len(states) - 2 if level is None else level
    if not 1 <= k <= len(states) - 2:
        raise ValueError("level must have neighbours on both sides")
    vt = time_derivative(times, states, k)
    v = states[k]
    dx = x[1] - x[0]
    vx = (v[2:] - v[:-2]) / (2 * dx)
    r = vt[1:-1] - _apply(sys.matrix(v[1:-1]), vx)
    xi = x[1:-1]
    mask = np.ones(len(xi), bool) if window is None else (xi >= window[0]) & (xi <= window[1])
    rw = r[mask]
    return Residual(r, float(np.max(np.abs(rw))), float(np.sqrt(np.sum(rw ** 2) * dx)), times[k])


def l2_error(x, approx, exact, window=None):
    mask = np.ones(len(x), bool) if window is None else (x >= window[0]) & (x <= window[1])
    dx = x[1] - x[0]
    return float(np.sqrt(np.sum((approx[mask] - exact[mask]) ** 2) * dx))


def map_trajectory(traj, func):
    """Apply a state map (N, m) -> (N, m') to every stored level."""
    return [np.asarray(func(s), dtype=float) for s in traj.states]


# -- exact family of the reduced system ------------------------------------------------------

def exact_reduced_solution(x, t, C=1.0):
    """t1 = 1/4 ln(4/3 e^(x+t^2) + C), t2 = t/sqrt3, t3 = x + t^2."""
    x = np.asarray(x, dtype=float)
    s = x + t * t
    return np.stack([0.25 * np.log(4.0 / 3.0 * np.exp(s) + C), np.full_like(x, t / SQRT3), s], axis=1)


# -- simple waves ----------------------------------------------------------------

R = ex.Sym("r")
S = ex.Sym("s")


@dataclass
class IntegralCurve:
    r: np.ndarray
    f: np.ndarray
    sol: object

    def __call__(self, r):
        return self.sol.sol(r).T if self.sol is not None else np.zeros((np.size(r), 0))


def integral_curve(gamma, v0, r_range, r0=None):
    """df/dr = gamma(f) with f(r0) = v0, RK45 with local tolerance 1e-10."""
    lo, hi = r_range
    r0 = lo if r0 is None else r0
    v0 = np.asarray(v0, dtype=float)

    def rhs(r, y):
        return gamma(y)

    parts = []
    for end in (lo, hi):
        if end != r0:
            parts.append(solve_ivp(rhs, (r0, end), v0, method="RK45", rtol=1e-10, atol=1e-12, dense_output=True))
    for p in parts:
        if not p.success:
            raise RuntimeError(f"integral curve integration failed: {p.message}")

    class _Joined:
        def sol(self, r):
            r = np.atleast_1d(np.asarray(r, dtype=float))
            out = np.empty((len(v0), len(r)))
            for p in parts:
                a, b = sorted((p.t[0], p.t[-1]))
                m = (r >= a) & (r <= b)
                if np.any(m):
                    out[:, m] = p.sol(r[m])
            return out

    rs = np.linspace(lo, hi, 33)
    j = _Joined()
    return IntegralCurve(rs, j.sol(rs).T, j)


@dataclass
class SimpleWave:
    """Implicit Riemann wave r = phi(lam1(r) t + lam2(r) x).

    lam1, lam2 are Expressions in r (and optionally the state chart, evaluated on
    the integral curve f); phi is an Expression in s.
    """

    lam: tuple
    phi: ex.Expr
    curve: IntegralCurve = None
    gamma: object = None
    chart: ex.Chart = None

    def __post_init__(self):
        self.lam = tuple(ex._as_expr(l) for l in self.lam)
        self.phi = ex._as_expr(self.phi)
        self.dphi = ex.differentiate(self.phi, "s")
        names = ["r"] + (list(self.chart.names) if self.chart else [])
        self._chart = ex.Chart(names)
        self._dlam_r = [ex.differentiate(l, "r") for l in self.lam]
        self._dlam_v = [[ex.differentiate(l, n) for n in names[1:]] for l in self.lam]

    def _env(self, r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if self.chart is None:
            return r[:, None]
        return np.concatenate([r[:, None], self.curve(r)], axis=1)

    def lam_at(self, r):
        pts = self._env(r)
        return np.stack([np.broadcast_to(ex.evaluate(l, pts, chart=self._chart), pts.shape[:1]) for l in self.lam], 1)

    def dlam_at(self, r):
        pts = self._env(r)
        out = np.stack([np.broadcast_to(ex.evaluate(d, pts, chart=self._chart), pts.shape[:1]) for d in self._dlam_r], 1)
        if self.chart is not None:
            g = np.atleast_2d(self.gamma(pts[:, 1:].T).T) if pts.shape[0] else pts[:, 1:]
            for a in range(2):
                for k, d in enumerate(self._dlam_v[a]):
                    out[:, a] += np.broadcast_to(ex.evaluate(d, pts, chart=self._chart), pts.shape[:1]) * g[:, k]
        return out

    def phi_at(self, s, deriv=False):
        s = np.atleast_1d(np.asarray(s, dtype=float))
        e = self.dphi if deriv else self.phi
        return np.broadcast_to(ex.evaluate(e, s[:, None], chart=ex.Chart(["s"])), s.shape).astype(float)

    def denominator(self, r, t, x):
        lam = self.lam_at(r)
        dl = self.dlam_at(r)
        s = lam[:, 0] * t + lam[:, 1] * x
        return 1.0 - self.phi_at(s, True) * (dl[:, 0] * t + dl[:, 1] * x)

    def along_characteristics(self, s0, t):
        """Denominator on the characteristic labelled by its foot value s0."""
        s0 = np.atleast_1d(np.asarray(s0, dtype=float))
        r = self.phi_at(s0)
        lam = self.lam_at(r)
        if np.any(lam[:, 1] == 0):
            raise ValueError("lam2 vanishes: characteristics are not graphs over x")
        x = (s0 - lam[:, 0] * t) / lam[:, 1]
        dl = self.dlam_at(r)
        return 1.0 - self.phi_at(s0, True) * (dl[:, 0] * t + dl[:, 1] * x)


@dataclass
class SimpleWaveResult:
    x: np.ndarray
    t: float
    r: np.ndarray
    state: np.ndarray
    residual: np.ndarray
    iterations: np.ndarray
    failed: np.ndarray
    denominator: np.ndarray
    flagged: np.ndarray
    min_char_denominator: float
    catastrophe: bool

    def report(self):
        return {"t": self.t, "max_residual": float(np.max(np.abs(self.residual))),
                "newton_failures": int(np.sum(self.failed)), "flagged_cells": np.flatnonzero(self.flagged).tolist(),
                "min_char_denominator": self.min_char_denominator, "catastrophe": self.catastrophe}


def simple_wave(wave, x, t, r_bracket, s_range=None, tol=1e-12, max_iter=50, flag_tol=1e-6, s_samples=4097):
    """Solve r = phi(lam1(r) t + lam2(r) x) cellwise by Newton with bisection fallback."""
    x = np.asarray(x, dtype=float)
    lo, hi = r_bracket

    def g(r, xx):
        lam = wave.lam_at(r)
        return r - wave.phi_at(lam[:, 0] * t + lam[:, 1] * xx)

    mid = np.full_like(x, 0.5 * (lo + hi))
    lam0 = wave.lam_at(mid)
    r = np.clip(wave.phi_at(lam0[:, 0] * t + lam0[:, 1] * x), lo, hi)
    iters = np.zeros(len(x), int)
    active = np.ones(len(x), bool)
    for it in range(max_iter):
        if not np.any(active):
            break
        ra, xa = r[active], x[active]
        gv = g(ra, xa)
        D = wave.denominator(ra, t, xa)
        step = np.where(D != 0, gv / np.where(D != 0, D, 1.0), np.inf)
        new = ra - step
        idx = np.flatnonzero(active)
        r[idx] = np.where(np.isfinite(new), new, ra)
        iters[idx] += 1
        done = (np.abs(step) <= tol) | ~np.isfinite(step)
        active[idx[done]] = False
    res = g(r, x)
    failed = (np.abs(res) > 10 * tol) | (r < lo) | (r > hi) | ~np.isfinite(r)
    for i in np.flatnonzero(failed):
        a, b = lo, hi
        ga, gb = g(np.array([a]), x[i:i + 1])[0], g(np.array([b]), x[i:i + 1])[0]
        if ga * gb > 0:
            continue
        for _ in range(200):
            m = 0.5 * (a + b)
            gm = g(np.array([m]), x[i:i + 1])[0]
            if ga * gm <= 0:
                b, gb = m, gm
            else:
                a, ga = m, gm
            if b - a < 1e-15:
                break
        r[i] = 0.5 * (a + b)
        iters[i] += 200
    res = g(r, x)
    failed = np.abs(res) > 1e-10
    D = wave.denominator(r, t, x)
    flagged = np.abs(D) < flag_tol
    if s_range is None:
        lam = wave.lam_at(r)
        s = lam[:, 0] * t + lam[:, 1] * x
        s_range = (float(np.min(s)), float(np.max(s)))
    ss = np.linspace(s_range[0], s_range[1], s_samples)
    mchar = float(np.min(wave.along_characteristics(ss, t)))
    state = wave.curve(r) if wave.curve is not None else r[:, None]
    return SimpleWaveResult(x, t, r, state, res, iters, failed, D, flagged, mchar,
                            bool(np.any(flagged) or mchar <= flag_tol))


def poisson_wave(amplitude=0.1, c=1.0):
    """u = F(x - (u + c) t) with F(s) = amplitude sin s; r = u and f(r) = r."""
    phi = ex.const(amplitude) * ex.sin(S)
    curve = integral_curve(lambda y: np.ones_like(y), [0.0], (-1.0, 1.0), 0.0)
    return SimpleWave((-(R + c), ex.ONE), phi, curve)


def breaking_time(wave, s_range, t_max, flag_tol=1e-6, samples=4097):
    """Smallest t at which the characteristic denominator reaches flag_tol (bisection)."""
    ss = np.linspace(s_range[0], s_range[1], samples)

    def broken(t):
        return np.min(wave.along_characteristics(ss, t)) <= flag_tol

    if not broken(t_max):
        return None
    a, b = 0.0, t_max
    for _ in range(100):
        m = 0.5 * (a + b)
        if broken(m):
            b = m
        else:
            a = m
    return b


# -- wave content ----------------------------------------------------------------

@dataclass
class WaveContent:
    xi: np.ndarray
    threshold: float
    mask: np.ndarray
    counts: dict
    residual: float


def wave_decompose(state, kappa, threshold=None, rel_threshold=1e-3):
    """Per cell solve v_x = -(xi+ X+ + xi- X- + xi0 X0) with centered differences."""
    v = state.values
    if v.shape[1] != 3:
        raise ValueError("wave_decompose expects an Euler state (rho, p, u)")
    es = euler.eigenstructure(kappa)
    ok = (v[:, 0] > 0) & (v[:, 1] > 0)
    if not np.all(ok):
        raise ValueError(f"inadmissible state in cell {int(np.argmin(ok))}")
    dx = state.dx
    if state.periodic:
        vx = (np.roll(v, -1, 0) - np.roll(v, 1, 0)) / (2 * dx)
    else:
        vx = np.gradient(v, dx, axis=0, edge_order=2)
    F = np.stack([es.X_plus(v), es.X_minus(v), es.X_0(v)], axis=-1)
    xi = np.linalg.solve(F, -vx[..., None])[..., 0]
    rec = -np.einsum("nij,nj->ni", F, xi)
    res = float(np.max(np.linalg.norm(rec - vx, axis=1) / np.maximum(1.0, np.linalg.norm(vx, axis=1))))
    scale = float(np.max(np.abs(xi))) if xi.size else 0.0
    thr = threshold if threshold is not None else rel_threshold * scale
    active = np.abs(xi) > thr if scale > 0 else np.zeros_like(xi, bool)
    mask = np.sum(active, axis=1) >= 2
    counts = {"plus": int(np.sum(active[:, 0])), "minus": int(np.sum(active[:, 1])),
              "zero": int(np.sum(active[:, 2])), "superposed": int(np.sum(mask))}
    return WaveContent(xi, thr, mask, counts, res)


# -- separable solutions ----------------------------------------------------------

X = ex.Sym("x")
T = ex.Sym("t")
SEP_CHART = ex.Chart(["x", "t", "t1"])
BRANCHES = ("closed1", "closed2", "closed3")


@dataclass
class SeparableSolution:
    A: ex.Expr
    B: ex.Expr
    branch: str
    t3: ex.Expr
    t2: ex.Expr
    t1x: ex.Expr
    t1t: ex.Expr
    x: np.ndarray = None
    t: np.ndarray = None
    fields: np.ndarray = None
    report: dict = field(default_factory=dict)


def _derivs(A, B):
    dA = [A] + [None] * 3
    dB = [B] + [None] * 3
    for k in range(1, 4):
        dA[k] = ex.differentiate(dA[k - 1], "x")
        dB[k] = ex.differentiate(dB[k - 1], "t")
    return dA, dB


def separable_exprs(A, B):
    """t3, t2 and the gradient of t1 (with t1 a free symbol)."""
    A = ex.parse(A, ex.Chart(["x"])) if isinstance(A, str) else ex._as_expr(A)
    B = ex.parse(B, ex.Chart(["t"])) if isinstance(B, str) else ex._as_expr(B)
    dA, dB = _derivs(A, B)
    Ad, Add = dA[1], dA[2]
    Bd, Bdd = dB[1], dB[2]
    t1 = euler.T1
    eAB = ex.exp(A + B)
    t3 = A + B
    t2 = Bd / (2 * SQRT3 * Ad)
    t1x = ex.exp(-4 * t1 + A + B) / (6 * Ad ** 3) * (Bd ** 2 * Add + Ad ** 2 * Bdd)
    t1t = ex.exp(-4 * t1) / (6 * Ad ** 4) * (eAB * Bd ** 3 * Add + Ad ** 2 * Bd * (-3 * ex.exp(4 * t1) * Add + eAB * Bdd))
    return A, B, dA, dB, t3, t2, t1x, t1t


def row_sides(A, B):
    """(lhs, rhs) of the three reduced-system rows with t1 free and its
    gradient taken from the separable construction."""
    A, B, dA, dB, t3, t2, t1x, t1t = separable_exprs(A, B)
    t1 = euler.T1
    d = ex.differentiate
    k = 2 * SQRT3
    t2x, t2t = d(t2, "x"), d(t2, "t")
    t3x, t3t = d(t3, "x"), d(t3, "t")
    return [
        (t1t, k * (t2 * t1x + 0.5 * t2x)),
        (t2t, k * (0.5 * ex.exp(4 * t1 - t3) * t1x + t2 * t2x)),
        (t3t, k * t2 * t3x),
    ]


def row_residual_exprs(A, B):
    """Row residuals; these vanish identically in t1."""
    return [l - r for l, r in row_sides(A, B)]


def row_identity_check(A, B, points, relative=True):
    """max row defect over points (x, t, t1), scaled by 1 + |lhs| + |rhs| when relative."""
    pts = np.atleast_2d(points)
    worst = 0.0
    for l, r in row_sides(A, B):
        lv = np.broadcast_to(ex.evaluate(l, pts, chart=SEP_CHART), pts.shape[:1])
        rv = np.broadcast_to(ex.evaluate(r, pts, chart=SEP_CHART), pts.shape[:1])
        dv = np.abs(lv - rv)
        if relative:
            dv = dv / (1 + np.abs(lv) + np.abs(rv))
        worst = max(worst, float(np.max(dv)))
    return worst


def _on_grid(e, xs, ts, t1=None):
    Xg, Tg = np.meshgrid(xs, ts, indexing="ij")
    T1g = np.zeros_like(Xg) if t1 is None else t1
    pts = np.stack([Xg.ravel(), Tg.ravel(), T1g.ravel()], axis=1)
    return np.broadcast_to(ex.evaluate(e, pts, chart=SEP_CHART), pts.shape[:1]).reshape(Xg.shape)


def _compat_exprs(A, B):
    """w = e^(4 t1) satisfies w_x = P, w_t = R - S w."""
    A, B, dA, dB, *_ = separable_exprs(A, B)
    Ad, Add = dA[1], dA[2]
    Bd, Bdd = dB[1], dB[2]
    eAB = ex.exp(A + B)
    P = 4 * eAB * (Bd ** 2 * Add + Ad ** 2 * Bdd) / (6 * Ad ** 3)
    Rr = 4 * eAB * (Bd ** 3 * Add + Ad ** 2 * Bd * Bdd) / (6 * Ad ** 4)
    Sx = 2 * Bd * Add / Ad ** 2
    return P, Rr, Sx


def compatibility(A, B, xs, ts):
    """Mixed-partial defects: max |S_x| and max |P_t - R_x + S P| (relative)."""
    P, Rr, Sx = _compat_exprs(A, B)
    d = ex.differentiate
    e1 = d(Sx, "x")
    e2 = d(P, "t") - d(Rr, "x") + Sx * P
    v1 = _on_grid(e1, xs, ts)
    v2 = _on_grid(e2, xs, ts)
    scale = np.maximum(1.0, np.abs(_on_grid(d(P, "t"), xs, ts)))
    return float(max(np.max(np.abs(v1)), np.max(np.abs(v2) / scale)))


def _branch_expr(A, B, branch):
    A, B, dA, dB, *_ = separable_exprs(A, B)
    Ad, Add, Addd = dA[1], dA[2], dA[3]
    Bd, Bdd, Bddd = dB[1], dB[2], dB[3]
    e = ex.exp(A + B)
    den = -18 * Bd * Add ** 2 + 9 * Ad * Bd * Addd
    T1 = 9 * e * Bd ** 3 * Add ** 2 / (Ad ** 2 * den)
    T2 = 9 * e * Bd * Add * Bdd / den
    core = 3 * e * Bd ** 3 * Addd / Ad - 3 * e * Ad ** 2 * Bddd
    big = 18 * e * Bd ** 3 * Add ** 2 / Ad ** 2 + 18 * e * Bd * Add * Bdd
    if branch == "closed1":
        inner = -T1 - T2 + (-big + core) / (2 * den)
        sign = -1.0
    elif branch == "closed2":
        inner = -T1 - T2 + (big - core) / (2 * den)
        sign = 1.0
    elif branch == "closed3":
        inner = -T1 - T2 + (big - core) / (2 * den)
        sign = -1.0
    else:
        raise ValueError(f"unknown branch {branch!r}")
    return den, inner, sign


def evaluate_branch(A, B, branch, xs, ts):
    """Evaluate a closed-form branch and its gradient defects against the
    separable gradient formulas. Never raises on domain problems; reports them."""
    rep = {"branch": branch}
    try:
        den, inner, sign = _branch_expr(A, B, branch)
    except ZeroDivisionError:
        rep.update(status="denominator_root", min_abs_denominator=0.0)
        return rep
    dv = _on_grid(den, xs, ts)
    if np.any(np.abs(dv) < 1e-12):
        rep.update(status="denominator_root", min_abs_denominator=float(np.min(np.abs(dv))))
        return rep
    iv = _on_grid(inner, xs, ts)
    if sign < 0:
        rep.update(status="not_real", note="logarithm of a negative fourth root")
        return rep
    if np.any(iv <= 0):
        rep.update(status="not_real", note="negative radicand", min_radicand=float(np.min(iv)))
        return rep
    t1 = ex.ln(ex.power(inner, ex.const(0.25)))
    _, _, _, _, _, _, t1x, t1t = separable_exprs(A, B)
    t1g = _on_grid(t1, xs, ts)
    gx = _on_grid(ex.differentiate(t1, "x"), xs, ts) - _on_grid(t1x, xs, ts, t1g)
    gt = _on_grid(ex.differentiate(t1, "t"), xs, ts) - _on_grid(t1t, xs, ts, t1g)
    rep.update(status="evaluated", max_t1x_defect=float(np.max(np.abs(gx))),
               max_t1t_defect=float(np.max(np.abs(gt))))
    return rep


def separable_solution(A, B, xs, ts, t1_corner=0.0, branch="gradient", compat_tol=1e-6):
    """Build t1, t2, t3 on the (x, t) grid.

    branch 'gradient' integrates w = e^(4 t1) along the first row (x at ts[0])
    and then along every column in t. Closed-form branches are evaluated and
    reported only.
    """
    xs = np.asarray(xs, dtype=float)
    ts = np.asarray(ts, dtype=float)
    A, B, dA, dB, t3, t2, t1x, t1t = separable_exprs(A, B)
    Ad = _on_grid(dA[1], xs, ts)
    if np.any(Ad == 0) or np.min(Ad) < 0 < np.max(Ad):
        raise ValueError("A' has a root in the domain")
    sol = SeparableSolution(A, B, branch, t3, t2, t1x, t1t, xs, ts)
    if branch in BRANCHES:
        sol.report = evaluate_branch(A, B, branch, xs, ts)
        return sol
    if branch != "gradient":
        raise ValueError(f"unknown branch {branch!r}")
    defect = compatibility(A, B, xs, ts)
    if defect > compat_tol:
        raise ValueError(f"compatibility failure: mixed partials differ by {defect:.3g}")
    P, Rr, Sx = _compat_exprs(A, B)
    chart = ex.Chart(["x", "t"])
    fP = ex.lambdify(P, chart.names)
    fR = ex.lambdify(Rr, chart.names)
    fS = ex.lambdify(Sx, chart.names)
    t0 = ts[0]
    w0 = math.exp(4 * t1_corner)
    row = solve_ivp(lambda x, w: np.atleast_1d(fP(x, t0)), (xs[0], xs[-1]), [w0], method="DOP853",
                    rtol=1e-12, atol=1e-14, t_eval=xs)
    if not row.success:
        raise RuntimeError(row.message)
    wrow = row.y[0]

    def col_rhs(t, w):
        return np.broadcast_to(fR(xs, t), xs.shape) - np.broadcast_to(fS(xs, t), xs.shape) * w

    if len(ts) > 1:
        col = solve_ivp(col_rhs, (ts[0], ts[-1]), wrow, method="DOP853", rtol=1e-12, atol=1e-14, t_eval=ts)
        if not col.success:
            raise RuntimeError(col.message)
        W = col.y
    else:
        W = wrow[:, None]
    if np.any(W <= 0):
        raise ValueError("e^(4 t1) became non-positive during integration")
    T1g = 0.25 * np.log(W)
    T2g = _on_grid(t2, xs, ts)
    T3g = _on_grid(t3, xs, ts)
    sol.fields = np.stack([T1g, T2g, T3g], axis=-1)
    rows = row_residual_exprs(A, B)
    rv = [np.abs(_on_grid(r, xs, ts, T1g)) for r in rows]
    sol.report = {"branch": "gradient", "compatibility_defect": defect,
                  "row_residuals": [float(np.max(r)) for r in rv],
                  "max_row_residual": float(max(np.max(r) for r in rv))}
    return sol


# -- elastic residual ----------------------------------------------------------------

def elastic_residual(traj, kappa=3.0, A=1.0, p0=0.0, u0=0.0):
    """Map an (r1, r2) trajectory to (rho, p, u) and evaluate the Euler residual."""
    def f(s):
        u, rho, p = euler.elastic_map(s[:, 0], s[:, 1], A, p0, u0, kappa)
        return np.stack([rho, p, u], axis=1)

    states = map_trajectory(traj, f)
    return residual(euler.euler_system(kappa), traj, states=states)
