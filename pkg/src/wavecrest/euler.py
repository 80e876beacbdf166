"""Eigenstructure, rescalings, parametrization and geometry of the 1D Euler system.

State chart (rho, p, u); the system reads v_t = A(v) v_x. The parametrization,
geometry and reduced system assume kappa = 3; the closed-form rescaling family
assumes kappa = 1; everything else takes a general kappa > 0.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from . import liealg
from . import vfield as vf
from .system import QuasilinearSystem

CHART = ex.Chart(["rho", "p", "u"])
T_CHART = ex.Chart(["t1", "t2", "t3"])
RHO, P, U = ex.Sym("rho"), ex.Sym("p"), ex.Sym("u")
T1, T2, T3 = ex.Sym("t1"), ex.Sym("t2"), ex.Sym("t3")
SQRT3 = math.sqrt(3.0)


def _kappa(kappa):
    kappa = float(kappa)
    if not kappa > 0:
        raise ValueError(f"kappa must be positive, got {kappa}")
    return kappa


@dataclass
class EulerEigenStructure:
    kappa: float
    lam_plus: ex.Expr
    lam_minus: ex.Expr
    lam_0: ex.Expr
    X_plus: vf.VectorField
    X_minus: vf.VectorField
    X_0: vf.VectorField

    def frame(self, domain=None):
        return vf.Frame([self.X_plus, self.X_minus, self.X_0], domain or vf.SampleDomain(vf.EULER_BOX))


def eigenstructure(kappa):
    kappa = _kappa(kappa)
    k = ex.const(kappa)
    a = ex.sqrt(k * P / RHO)
    return EulerEigenStructure(
        kappa,
        U + a,
        U - a,
        U,
        vf.VectorField([RHO, k * P, a], CHART, "X+"),
        vf.VectorField([RHO, k * P, -a], CHART, "X-"),
        vf.VectorField([1, 0, 0], CHART, "X0"),
    )


def _euler_bound(kappa):
    def bound(v):
        return np.abs(v[:, 2]) + np.sqrt(kappa * v[:, 1] / v[:, 0])

    return bound


def _positive_rho_p(v):
    return (v[:, 0] > 0) & (v[:, 1] > 0)


def euler_system(kappa):
    kappa = _kappa(kappa)
    A = [[U, 0, RHO], [0, U, ex.const(kappa) * P], [0, 1 / RHO, U]]
    return QuasilinearSystem(f"euler({kappa:g})", CHART, A, _euler_bound(kappa), _positive_rho_p)


def eigen_residual(kappa, points):
    """max over samples and families of |(A - lam I) X| / |X|."""
    es = eigenstructure(kappa)
    sysm = euler_system(kappa)
    pts = np.atleast_2d(points)
    A = sysm.matrix(pts)
    worst = 0.0
    for lam, X in ((es.lam_plus, es.X_plus), (es.lam_minus, es.X_minus), (es.lam_0, es.X_0)):
        x = X(pts)
        lv = np.broadcast_to(ex.evaluate(lam, pts, chart=CHART), pts.shape[:1])
        r = np.einsum("mij,mj->mi", A, x) - lv[:, None] * x
        worst = max(worst, float(np.max(np.linalg.norm(r, axis=1) / np.linalg.norm(x, axis=1))))
    return worst


# -- commutator table ---------------------------------------------------------

PAIRS = (("+", "-"), ("+", "0"), ("0", "-"))


def closed_form_table(kappa):
    k = _kappa(kappa)
    q = 1 / (4 * RHO)
    return {
        ("+", "-"): (ex.const((1 - k) / 2), ex.const((k - 1) / 2), ex.ZERO),
        ("+", "0"): (q, -q, ex.const(-1.0)),
        ("0", "-"): (q, -q, ex.ONE),
    }


@dataclass
class CommutatorTable:
    kappa: float
    derived: dict
    closed_form: dict
    max_deviation: float
    max_residual: float

    def to_json(self):
        return {
            "kappa": self.kappa,
            "basis": ["X+", "X-", "X0"],
            "brackets": [
                {"pair": list(p), "coefficients": [str(c) for c in self.closed_form[p]]} for p in PAIRS
            ],
            "max_deviation": self.max_deviation,
            "max_residual": self.max_residual,
        }


def commutator_table(kappa, points=None, tol=1e-10):
    """Brackets of the eigenvectors decomposed on {X+, X-, X0}.

    Coefficients are derived symbolically (Cramer's rule) and compared with the
    closed forms at the sample points.
    """
    es = eigenstructure(kappa)
    if points is None:
        points = vf.SampleDomain(vf.EULER_BOX, 100, 0).points()
    pts = np.atleast_2d(points)
    byname = {"+": es.X_plus, "-": es.X_minus, "0": es.X_0}
    basis = [es.X_plus, es.X_minus, es.X_0]
    closed = closed_form_table(kappa)
    derived = {}
    dev = 0.0
    res = 0.0
    for pair in PAIRS:
        B = vf.lie_bracket(byname[pair[0]], byname[pair[1]])
        coefs = vf.decompose_exprs(B, basis)
        derived[pair] = coefs
        got = ex.evaluate_many(coefs, pts, chart=CHART)
        want = ex.evaluate_many(closed[pair], pts, chart=CHART)
        dev = max(dev, float(np.max(np.abs(got - want) / np.maximum(1.0, np.abs(want)))))
        recon = sum(want[:, [s]] * basis[s](pts) for s in range(3))
        Bv = B(pts)
        r = np.linalg.norm(Bv - recon, axis=1) / np.maximum(1.0, np.linalg.norm(Bv, axis=1))
        res = max(res, float(np.max(r)))
    if res > tol:
        raise ValueError(f"closed-form decomposition residual {res:.3g} exceeds {tol}")
    return CommutatorTable(float(kappa), derived, closed, dev, res)


# -- Z basis and its rescaling (kappa = 3) ------------------------------------

def z_fields():
    es = eigenstructure(3.0)
    Z1 = es.X_plus + es.X_minus
    Z2 = es.X_plus - es.X_minus
    Z1.name, Z2.name = "Z1", "Z2"
    return Z1, Z2, es.X_0


def z_fields_explicit():
    return (
        vf.VectorField([2 * RHO, 6 * P, 0], CHART, "Z1"),
        vf.VectorField([0, 0, 2 * SQRT3 * ex.sqrt(P / RHO)], CHART, "Z2"),
        vf.VectorField([1, 0, 0], CHART, "X0"),
    )


@dataclass
class ZBasis:
    frame: vf.Frame
    brackets: dict
    max_deviation: float


def z_basis(points=None, tol=1e-10):
    """Frame {Z1, Z2, X0} with [Z1,Z2] = 2 Z2, [X0,Z1] = 2 X0, [X0,Z2] = -Z2/(2 rho)."""
    Z1, Z2, X0 = z_fields()
    frame = vf.Frame([Z1, Z2, X0], vf.SampleDomain(vf.EULER_BOX))
    pts = frame.samples() if points is None else np.atleast_2d(points)
    table = {
        ("Z1", "Z2"): (Z1, Z2, Z2.scale(2)),
        ("X0", "Z1"): (X0, Z1, X0.scale(2)),
        ("X0", "Z2"): (X0, Z2, Z2.scale(-1 / (2 * RHO))),
    }
    dev = 0.0
    for key, (X, Y, rhs) in table.items():
        got = vf.lie_bracket_at(X, Y, pts)
        want = rhs(pts)
        dev = max(dev, float(np.max(np.linalg.norm(got - want, axis=1) / np.maximum(1.0, np.linalg.norm(want, axis=1)))))
    if dev > tol:
        raise ValueError(f"Z-basis bracket table deviates by {dev:.3g}")
    return ZBasis(frame, {k: v[2] for k, v in table.items()}, dev)


def rescaling_functions():
    """(h1, h2, h0) making {h1 Z1, h2 Z2, h0 X0} commute."""
    return ex.ONE, ex.sqrt(RHO / P), RHO


def elastic_rescaling(kappa):
    """h for X+ and X-: (kappa p / rho)^(-1/2)."""
    return (ex.const(_kappa(kappa)) * P / RHO) ** -0.5


# -- parametrization (kappa = 3) ----------------------------------------------

@dataclass
class Parametrization:
    f: tuple
    inverse: tuple
    beta: tuple
    fields: tuple

    def forward(self, t):
        return ex.evaluate_many(self.f, np.asarray(t, dtype=float), chart=T_CHART)

    def backward(self, v):
        return ex.evaluate_many(self.inverse, np.asarray(v, dtype=float), chart=CHART)

    def log_map(self, t):
        return ex.evaluate_many(self.beta, np.asarray(t, dtype=float), chart=T_CHART)

    def pde_residuals(self, points):
        """Relative defects of the nine equations df^j/dt_i = W_i^j(f), shape (M, 3, 3)."""
        pts = np.atleast_2d(points)
        back = {"rho": self.f[0], "p": self.f[1], "u": self.f[2]}
        out = np.zeros((len(pts), 3, 3))
        for i, (tname, W) in enumerate(zip(T_CHART.names, self.fields)):
            for j in range(3):
                lhs = ex.differentiate(self.f[j], tname)
                rhs = ex.subs(W.components[j], back)
                a = np.broadcast_to(ex.evaluate(lhs, pts, chart=T_CHART), pts.shape[:1])
                b = np.broadcast_to(ex.evaluate(rhs, pts, chart=T_CHART), pts.shape[:1])
                out[:, i, j] = np.abs(a - b) / np.maximum(1.0, np.abs(b))
        return out

    def roundtrip_error(self, v):
        v = np.atleast_2d(v)
        w = self.forward(self.backward(v))
        return float(np.max(np.abs(w - v) / np.maximum(1.0, np.abs(v))))


def nonelastic_parametrization():
    f = (ex.exp(2 * T1 + T3), ex.exp(6 * T1), 2 * SQRT3 * T2)
    inverse = (ex.ln(P) / 6, U / (2 * SQRT3), ex.ln(RHO) - ex.ln(P) / 3)
    beta = (2 * T1 + T3, 6 * T1, ex.const(math.log(2 * SQRT3)) + ex.ln(T2))
    Z1, Z2, X0 = z_fields()
    h1, h2, h0 = rescaling_functions()
    return Parametrization(f, inverse, beta, (Z1.scale(h1), Z2.scale(h2), X0.scale(h0)))


# -- closed-form rescaling of the kappa = 1 module ----------------------------

ISO_PAIRS = (("-", "+"), ("0", "+"), ("0", "-"))


@dataclass
class IsothermalRescaling:
    f: ex.Expr
    g: ex.Expr
    h: ex.Expr
    frame: vf.Frame
    constants: liealg.StructureConstants
    c: tuple
    expected_c: tuple
    zeta: vf.Frame
    zeta_constants: liealg.StructureConstants
    algebra: liealg.AlgebraClass
    notes: list = field(default_factory=list)


def isothermal_expected(c5, c9, D, sign):
    s = 1.0 if sign > 0 else -1.0
    beta = math.sqrt(c5 * c9)
    c2 = -s * math.sqrt(c5 / c9) * D
    c3 = c2 * (-s) * math.sqrt(c9 / c5)
    return (0.0, c2, c3, 0.0, c5, -s * beta, 0.0, -s * beta, c9)


def isothermal_rescaling(c5, c9, D=0.0, ctilde=1.0, sign=1, domain=None):
    """Rescale {X0, X-, X+} at kappa = 1 by f, g, h and classify the result.

    Constants c1..c9 follow the labelling [X-,X+] -> (c1,c2,c3),
    [X0,X+] -> (c4,c5,c6), [X0,X-] -> (c7,c8,c9), each on (X0, X-, X+).
    """
    if c5 == 0 or c9 == 0 or c5 * c9 <= 0:
        raise ValueError("c5 and c9 must be nonzero with c5*c9 > 0")
    s = 1.0 if sign > 0 else -1.0
    domain = domain or vf.SampleDomain(vf.EULER_BOX)
    pts = domain.points()
    beta = math.sqrt(c5 * c9)
    g = ex.const(D) * ex.ln(P) + ex.const(ctilde)
    f = ex.const(s * 4 * beta) * RHO
    h = ex.const(s * math.sqrt(c5 / c9)) * g
    gv = np.broadcast_to(ex.evaluate(g, pts, chart=CHART), pts.shape[:1])
    lo, hi = domain.bounds[1]
    if np.any(gv == 0) or np.min(gv) < 0 < np.max(gv) or (D != 0 and lo <= math.exp(-ctilde / D) <= hi):
        root = math.exp(-ctilde / D) if D != 0 else float("nan")
        raise ValueError(f"rescaling function g vanishes in the domain at p = {root:.6g}")
    es = eigenstructure(1.0)
    Xb0, Xbm, Xbp = es.X_0.scale(f), es.X_minus.scale(g), es.X_plus.scale(h)
    frame = vf.Frame([Xb0, Xbm, Xbp], domain)
    C = liealg.extract_structure_constants(frame, pts, labels=["X0bar", "X-bar", "X+bar"])
    idx = {"0": 0, "-": 1, "+": 2}
    cs = []
    for a, b in ISO_PAIRS:
        cs.extend(C.c[idx[a], idx[b]].tolist())
    c2 = cs[1]
    alpha = c5
    r = beta * c2
    if s < 0:
        zeta = [Xb0.scale(1 / (2 * beta)), Xbp.scale(beta) - Xbm.scale(alpha) + Xb0.scale(r / beta), Xbm.scale(alpha) + Xbp.scale(beta)]
    else:
        zeta = [Xb0.scale(-1 / (2 * beta)), Xbp.scale(beta) + Xbm.scale(alpha) - Xb0.scale(r / beta), Xbm.scale(alpha) - Xbp.scale(beta)]
    zframe = vf.Frame(zeta, domain)
    Cz = liealg.extract_structure_constants(zframe, pts, labels=["zeta0", "zeta1", "zeta2"])
    alg = liealg.classify3d(C)
    notes = []
    if liealg.classify3d(Cz).label != alg.label:
        notes.append("zeta basis classifies differently from the rescaled frame")
    return IsothermalRescaling(f, g, h, frame, C, tuple(cs), isothermal_expected(c5, c9, D, s), zframe, Cz, alg, notes)


# -- surface geometry (kappa = 3) ---------------------------------------------

@dataclass
class SurfaceGeometry:
    metric: tuple
    normal: tuple
    second: tuple
    K: ex.Expr
    H: ex.Expr
    H_shape: ex.Expr
    tangents: tuple

    def evaluate(self, points, t3=None):
        """Numeric fields at (t1, t2, t3) rows; t3 comes from the rows unless fixed."""
        pts = np.atleast_2d(points)
        env = {"t1": pts[:, 0], "t2": pts[:, 1], "t3": pts[:, 2] if t3 is None else t3}

        def ev(e):
            return np.broadcast_to(ex.evaluate(e, env), pts.shape[:1]).astype(float)

        E, F, G = (ev(e) for e in self.metric)
        L, M, N = (ev(e) for e in self.second)
        n = np.stack([ev(e) for e in self.normal], axis=1)
        ft = [np.stack([ev(e) for e in tv], axis=1) for tv in self.tangents]
        return {
            "E": E, "F": F, "G": G, "L": L, "M": M, "N": N,
            "K": ev(self.K), "H": ev(self.H), "H_shape": ev(self.H_shape),
            "normal": n,
            "n_dot_f1": np.einsum("mi,mi->m", n, ft[0]),
            "n_dot_f2": np.einsum("mi,mi->m", n, ft[1]),
            "n_norm": np.linalg.norm(n, axis=1),
        }


def _dot(a, b):
    return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]


def surface_geometry(t3=None):
    """First and second fundamental forms of t -> f(t1, t2, t3) at fixed t3.

    The normal is the normalized right-handed cross product f_t1 x f_t2.
    H is half the trace of II; H_shape is half the trace of g^-1 II.
    """
    par = nonelastic_parametrization()
    f = par.f if t3 is None else tuple(ex.subs(c, {"t3": t3}) for c in par.f)
    d = ex.differentiate
    f1 = tuple(d(c, "t1") for c in f)
    f2 = tuple(d(c, "t2") for c in f)
    E, F, G = _dot(f1, f1), _dot(f1, f2), _dot(f2, f2)
    cr = (f1[1] * f2[2] - f1[2] * f2[1], f1[2] * f2[0] - f1[0] * f2[2], f1[0] * f2[1] - f1[1] * f2[0])
    norm = ex.sqrt(_dot(cr, cr))
    n = tuple(c / norm for c in cr)
    f11 = tuple(d(c, "t1") for c in f1)
    f12 = tuple(d(c, "t2") for c in f1)
    f22 = tuple(d(c, "t2") for c in f2)
    L, M, N = _dot(f11, n), _dot(f12, n), _dot(f22, n)
    detg = E * G - F * F
    K = (L * N - M * M) / detg
    H = (L + N) / 2
    H_shape = (E * N + G * L - 2 * F * M) / (2 * detg)
    return SurfaceGeometry((E, F, G), n, (L, M, N), K, H, H_shape, (f1, f2))


def printed_normal_defect(points):
    """Inner product of the alternative normal (3e^{4t1}, e^{t3}, 0)/sqrt(D) with f_t1."""
    pts = np.atleast_2d(points)
    t1, t3 = pts[:, 0], pts[:, 2]
    D = 9 * np.exp(8 * t1) + np.exp(2 * t3)
    n = np.stack([3 * np.exp(4 * t1), np.exp(t3), 0 * t1], axis=1) / np.sqrt(D)[:, None]
    f1 = np.stack([2 * np.exp(2 * t1 + t3), 6 * np.exp(6 * t1), 0 * t1], axis=1)
    return np.einsum("mi,mi->m", n, f1)


def parallel_transport_check(points):
    """Flat covariant derivatives along the t3 flow in the log chart.

    In b = beta(t) coordinates the tangent fields are d beta/dt1 = (2, 6, 0) and
    d beta/dt2 = (0, 0, 2 sqrt(3) e^{-b3}); d beta/dt3 = (1, 0, 0) generates the
    flow. Returns the max abs of J_W (1,0,0) for both tangent fields, together
    with the same derivative taken in t coordinates.
    """
    pts = np.atleast_2d(points)
    par = nonelastic_parametrization()
    bchart = ex.Chart(["b1", "b2", "b3"])
    b3 = ex.Sym("b3")
    W1 = vf.VectorField([2, 6, 0], bchart)
    W2 = vf.VectorField([0, 0, 2 * SQRT3 * ex.exp(-b3)], bchart)
    flow = np.array([1.0, 0.0, 0.0])
    bpts = par.log_map(pts)
    out = {}
    for name, W in (("d_t1", W1), ("d_t2", W2)):
        J = vf.jacobian(W, bpts)
        out[name] = float(np.max(np.abs(J @ flow)))
    # same quantities as d/dt3 of d beta/dt_i in the t chart
    for i, tn in ((1, "t1"), (2, "t2")):
        worst = 0.0
        for c in par.beta:
            e = ex.differentiate(ex.differentiate(c, tn), "t3")
            v = np.broadcast_to(ex.evaluate(e, pts, chart=T_CHART), pts.shape[:1])
            worst = max(worst, float(np.max(np.abs(v))))
        out[f"t_chart_d_t{i}"] = worst
    # tangent vectors evaluated at the t-point agree with the b-chart fields
    tw = np.stack([np.broadcast_to(ex.evaluate(ex.differentiate(c, "t2"), pts, chart=T_CHART), pts.shape[:1]) for c in par.beta], axis=1)
    out["chart_consistency"] = float(np.max(np.abs(tw - W2(bpts))))
    return out


# -- elastic double waves -----------------------------------------------------

def elastic_map(r1, r2, A=1.0, p0=0.0, u0=0.0, kappa=3.0):
    """(u, rho, p) of the double wave with Riemann invariants r1, r2."""
    if not A > 0:
        raise ValueError("A must be positive")
    kappa = _kappa(kappa)
    r1 = np.asarray(r1, dtype=float)
    r2 = np.asarray(r2, dtype=float)
    e = A * np.exp(r1 + r2)
    return math.sqrt(kappa) * (r1 - r2) + u0, e, kappa * e + p0


def elastic_map_exprs(A=1.0, p0=0.0, u0=0.0, kappa=3.0):
    r1, r2 = ex.Sym("r1"), ex.Sym("r2")
    e = ex.const(A) * ex.exp(r1 + r2)
    return (ex.const(math.sqrt(kappa)) * (r1 - r2) + u0, e, ex.const(kappa) * e + p0)
