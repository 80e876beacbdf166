"""Quasi-rectifiability tests for frames of vector fields.

A pair (X, Y) is quasi-rectifiable when [X, Y] lies in span{X, Y}. In 3D the
same question can be asked of curl(X x Y), whose component along X x Y must
vanish.
"""

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import expr as ex
from . import vfield as vf

QUASIRECT = "quasirect"
NOT_QUASIRECT = "not_quasirect"
INCONCLUSIVE = "inconclusive"


class DependentPair(ValueError):
    pass


def _verdict(excess):
    """excess = measured / threshold at each sample."""
    if np.all(excess < 1.0):
        return QUASIRECT
    if np.any(excess > 10.0):
        return NOT_QUASIRECT
    return INCONCLUSIVE


@dataclass
class PairReport:
    i: int
    j: int
    verdict: str
    max_residual: float
    witness_point: list
    coefficients: np.ndarray = None

    def to_json(self):
        return {"i": self.i, "j": self.j, "verdict": self.verdict,
                "max_residual": self.max_residual, "witness_point": self.witness_point}


@dataclass
class QuasiRectReport:
    pairs: list
    seed: int
    tolerances: dict

    @property
    def all_quasirect(self):
        return all(p.verdict == QUASIRECT for p in self.pairs)

    def to_json(self):
        return {"pairs": [p.to_json() for p in self.pairs], "seed": self.seed, "tolerances": dict(self.tolerances)}


def _pair_matrix(X, Y, pts, params, independence_tol):
    B = np.stack([X(pts, params), Y(pts, params)], axis=-1)
    s = np.linalg.svd(B, compute_uv=False)
    bad = s[:, -1] <= independence_tol * s[:, 0]
    if np.any(bad):
        k = int(np.argmax(bad))
        raise DependentPair(f"pair is dependent at {pts[k].tolist()}")


def pair_quasirect(X, Y, points, span_tol=1e-9, independence_tol=1e-9, params=None, ij=(0, 1)):
    """Decide whether [X, Y] lies in span{X, Y} at every sample point."""
    pts = np.atleast_2d(points)
    _pair_matrix(X, Y, pts, params, independence_tol)
    B = vf.lie_bracket(X, Y)
    coef, res = vf.span_decompose_many(B, [X, Y], pts, independence_tol, params)
    k = int(np.argmax(res))
    return PairReport(ij[0], ij[1], _verdict(res / span_tol), float(res[k]), pts[k].tolist(), coef)


def frame_quasirect(frame, points=None):
    pts = frame.samples() if points is None else np.atleast_2d(points)
    reports = []
    for i, j in combinations(range(len(frame)), 2):
        reports.append(pair_quasirect(frame[i], frame[j], pts, frame.span_tol, frame.independence_tol, frame.params, (i, j)))
    tol = {"span_tol": frame.span_tol, "independence_tol": frame.independence_tol}
    return QuasiRectReport(reports, frame.domain.seed, tol)


@dataclass
class CurlReport:
    verdict: str
    max_normal: float
    max_ratio: float
    witness_point: list
    normal: np.ndarray


def curl_criterion(X, Y, points, span_tol=1e-9, independence_tol=1e-9, params=None):
    """Normal component of curl(X x Y) along the unit normal (X x Y)/|X x Y|."""
    if X.chart.dim != 3:
        raise ValueError("curl criterion needs a 3D chart")
    pts = np.atleast_2d(points)
    _pair_matrix(X, Y, pts, params, independence_tol)
    W = vf.cross(X, Y)
    C = vf.curl(W)
    w = W(pts, params)
    c = C(pts, params)
    wn = np.linalg.norm(w, axis=1)
    normal = np.einsum("mi,mi->m", c, w) / wn
    thresh = span_tol * (1.0 + np.linalg.norm(c, axis=1))
    ratio = np.abs(normal) / thresh
    k = int(np.argmax(ratio))
    return CurlReport(_verdict(ratio), float(np.max(np.abs(normal))), float(ratio[k]), pts[k].tolist(), normal)


def qo_decompose(X, Y):
    """Q = (-div Y) X + (div X) Y and O = curl(X x Y).

    Q + O equals J_X Y - J_Y X, that is lie_bracket(Y, X) in this package's
    convention. Q always lies in span{X, Y}.
    """
    if X.chart.dim != 3:
        raise ValueError("qo_decompose needs a 3D chart")
    Q = X.scale(-vf.divergence(Y)) + Y.scale(vf.divergence(X))
    O = vf.curl(vf.cross(X, Y))
    return Q, O


# -- straightened pairs -------------------------------------------------------

@dataclass
class StraightenedPair:
    ctilde: ex.Expr
    dctilde_dx: float
    verdict: str
    X: ex.Expr
    chart: ex.Chart
    points: np.ndarray

    def residual(self, g, points=None):
        """c~ g_y + g_z + det[[g_x, X_x], [g, X]] at the samples."""
        pts = self.points if points is None else np.atleast_2d(points)
        x, y, z = self.chart.names
        g = ex._as_expr(g)
        d = ex.differentiate
        e = self.ctilde * d(g, y) + d(g, z) + d(g, x) * self.X - d(self.X, x) * g
        return np.broadcast_to(ex.evaluate(e, pts, chart=self.chart), pts.shape[:1])


def straightened_pair_analysis(Xj, points, tol=1e-9):
    """Frame with X1 = (1, 0, 0) and Xj = (a, b, c): c~ = b/c must not depend on x."""
    if Xj.chart.dim != 3:
        raise ValueError("3D chart required")
    pts = np.atleast_2d(points)
    a, b, c = Xj.components
    cv = np.broadcast_to(ex.evaluate(c, pts, chart=Xj.chart), pts.shape[:1])
    if np.any(cv == 0):
        raise ValueError(f"c_j vanishes at {pts[int(np.argmax(cv == 0))].tolist()}")
    ct = ex.simplify(b / c)
    dx = ex.differentiate(ct, Xj.chart.names[0])
    dv = np.abs(np.broadcast_to(ex.evaluate(dx, pts, chart=Xj.chart), pts.shape[:1]))
    m = float(np.max(dv))
    return StraightenedPair(ct, m, "pass" if m < tol else "fail", ex.simplify(a / c), Xj.chart, pts)


# -- coframes and exactness ---------------------------------------------------

@dataclass
class Coframe:
    forms: list
    chart: ex.Chart

    def __call__(self, i, X, points):
        """eta_i(X) at the points."""
        pts = np.atleast_2d(points)
        vals = ex.evaluate_many(self.forms[i], pts, chart=self.chart)
        return np.einsum("mi,mi->m", vals, X(pts))

    def pairing(self, fields, points):
        pts = np.atleast_2d(points)
        k = len(self.forms)
        out = np.zeros((len(pts), k, len(fields)))
        for i in range(k):
            for j, X in enumerate(fields):
                out[:, i, j] = self(i, X, pts)
        return out


def dual_coframe(frame, points=None):
    """Rows of the inverse of the component matrix, built symbolically."""
    fields = list(frame)
    n = fields[0].chart.dim
    if len(fields) != n:
        raise ValueError("dual coframe needs a full frame")
    if points is not None:
        pts = np.atleast_2d(points)
        M = np.stack([X(pts) for X in fields], axis=-1)
        s = np.linalg.svd(M, compute_uv=False)
        if np.any(s[:, -1] <= 1e-12 * s[:, 0]):
            raise ValueError("frame is not invertible at a sample point")
    cols = [list(X.components) for X in fields]
    M = [[cols[j][i] for j in range(n)] for i in range(n)]
    D = vf.det_expr(M)
    forms = []
    for i in range(n):
        row = []
        for c in range(n):
            # (M^-1)[i][c] = cofactor(c, i) / det
            minor = [r[:i] + r[i + 1:] for k, r in enumerate(M) if k != c]
            cof = vf.det_expr(minor) if n > 1 else ex.ONE
            if (i + c) % 2:
                cof = -cof
            row.append(ex.simplify(cof / D))
        forms.append(row)
    return Coframe(forms, fields[0].chart)


def one_form_value(form, X):
    out = ex.ZERO
    for a, b in zip(form, X.components):
        out = out + a * b
    return out


def exactness_check(h, eta, D, points):
    """max |d(h eta)(Xa, Xb)| over samples and pairs of fields spanning D.

    d(w)(Xa, Xb) = Xa(w(Xb)) - Xb(w(Xa)) - w([Xa, Xb]).
    """
    pts = np.atleast_2d(points)
    h = ex._as_expr(h)
    w = [h * c for c in eta]
    chart = D[0].chart
    worst = 0.0
    for a, b in combinations(range(len(D)), 2):
        Xa, Xb = D[a], D[b]
        e = Xa.apply(one_form_value(w, Xb)) - Xb.apply(one_form_value(w, Xa)) - one_form_value(w, vf.lie_bracket(Xa, Xb))
        v = np.broadcast_to(ex.evaluate(e, pts, chart=chart), pts.shape[:1])
        worst = max(worst, float(np.max(np.abs(v))))
    return worst


@dataclass
class CommutingReport:
    max_norm: float
    max_relative: float
    per_pair: dict = field(default_factory=dict)


def verify_commuting(fields, rescalers, points):
    """max over pairs and samples of |[h_i X_i, h_j X_j]|."""
    pts = np.atleast_2d(points)
    scaled = []
    for X, h in zip(fields, rescalers):
        h = ex._as_expr(h)
        hv = np.broadcast_to(ex.evaluate(h, pts, chart=X.chart), pts.shape[:1])
        if np.any(hv == 0) or np.min(hv) < 0 < np.max(hv):
            raise ValueError(f"rescaler {h} vanishes on the sample domain")
        scaled.append(X.scale(h))
    worst = rel = 0.0
    per = {}
    for i, j in combinations(range(len(scaled)), 2):
        v = vf.lie_bracket_at(scaled[i], scaled[j], pts)
        nv = np.linalg.norm(v, axis=1)
        mags = np.linalg.norm(scaled[i](pts), axis=1) * np.linalg.norm(scaled[j](pts), axis=1)
        per[(i, j)] = float(np.max(nv))
        worst = max(worst, per[(i, j)])
        rel = max(rel, float(np.max(nv / np.maximum(1.0, mags))))
    return CommutingReport(worst, rel, per)


# -- randomized battery -------------------------------------------------------

BATTERY_CHART = ex.Chart(["x", "y", "z"])
BATTERY_BOX = [(0.5, 1.5), (0.5, 1.5), (0.5, 1.5)]


def _random_poly(rng, syms, degree=2, terms=3):
    out = ex.const(float(rng.integers(1, 4)))
    for _ in range(terms):
        mono = ex.const(float(rng.integers(-3, 4) or 1))
        for s in syms:
            k = int(rng.integers(0, degree + 1))
            if k:
                mono = mono * s ** k
        out = out + mono
    return out


def random_pair_battery(n=20, seed=0):
    """Pairs of 3D fields, alternating quasi-rectifiable and generic ones.

    Quasi-rectifiable pairs are a U, b V with [U, V] = 0 pushed forward by a
    constant linear map, so [X, Y] lies in span{X, Y} by construction. Returns
    a list of (X, Y, expected_quasirect).
    """
    rng = np.random.default_rng(seed)
    syms = [ex.Sym(n_) for n_ in BATTERY_CHART.names]
    out = []
    for k in range(n):
        if k % 2 == 0:
            while True:
                M = rng.integers(-2, 3, size=(3, 3)).astype(float)
                if abs(np.linalg.det(M)) > 0.5:
                    break
            Minv = np.linalg.inv(M)
            # old coordinates in terms of new ones
            old = [sum((ex.const(Minv[i, j]) * syms[j] for j in range(3) if Minv[i, j] != 0), ex.ZERO) for i in range(3)]
            sub = dict(zip(BATTERY_CHART.names, old))
            a = ex.exp(ex.const(0.3) * syms[0] + ex.const(0.2) * syms[1]) * float(rng.integers(1, 3))
            b = 2 + syms[2] ** 2 + ex.const(float(rng.integers(0, 3))) * syms[0] ** 2
            h = 1 + syms[2] ** 2 * float(rng.integers(1, 3))
            U = [a, ex.ZERO, ex.ZERO]
            V = [ex.ZERO, b, b * h]
            comps = []
            for W in (U, V):
                Wn = [ex.subs(c, sub) for c in W]
                comps.append([ex.simplify(sum((ex.const(M[i, j]) * Wn[j] for j in range(3)), ex.ZERO)) for i in range(3)])
            out.append((vf.VectorField(comps[0], BATTERY_CHART, f"X{k}"), vf.VectorField(comps[1], BATTERY_CHART, f"Y{k}"), True))
        else:
            X = vf.VectorField([_random_poly(rng, syms) for _ in range(3)], BATTERY_CHART, f"X{k}")
            Y = vf.VectorField([_random_poly(rng, syms) for _ in range(3)], BATTERY_CHART, f"Y{k}")
            out.append((X, Y, False))
    return out
