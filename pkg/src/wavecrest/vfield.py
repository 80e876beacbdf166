"""Vector fields on a single coordinate chart.

Bracket convention: [X, Y] = J_Y X - J_X Y, where J_X is the Jacobian of X.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import qmc

from . import expr as ex


class ChartMismatch(ValueError):
    pass


class DegenerateBasis(ValueError):
    pass


class VectorField:
    """Ordered components (Expressions) on a chart."""

    def __init__(self, components, chart, name=None):
        if not isinstance(chart, ex.Chart):
            chart = ex.Chart(chart)
        comps = tuple(ex._as_expr(c) for c in components)
        if len(comps) != chart.dim:
            raise ValueError(f"{len(comps)} components for a {chart.dim}-dimensional chart")
        self.components = comps
        self.chart = chart
        self.name = name

    @classmethod
    def parse(cls, texts, chart, params=(), name=None):
        if not isinstance(chart, ex.Chart):
            chart = ex.Chart(chart)
        return cls([ex.parse(str(t), chart, params) for t in texts], chart, name)

    def __call__(self, point, params=None):
        """Values at point(s); shape (n,) or (M, n)."""
        pts = np.asarray(point, dtype=float)
        return ex.evaluate_many(self.components, pts, params, self.chart)

    def __len__(self):
        return len(self.components)

    def __getitem__(self, i):
        return self.components[i]

    def scale(self, f):
        f = ex._as_expr(f)
        return VectorField([f * c for c in self.components], self.chart)

    def __rmul__(self, f):
        return self.scale(f)

    def __add__(self, other):
        _check(self, other)
        return VectorField([a + b for a, b in zip(self.components, other.components)], self.chart)

    def __sub__(self, other):
        _check(self, other)
        return VectorField([a - b for a, b in zip(self.components, other.components)], self.chart)

    def __neg__(self):
        return VectorField([-c for c in self.components], self.chart)

    def subs(self, mapping):
        return VectorField([ex.subs(c, mapping) for c in self.components], self.chart, self.name)

    def apply(self, f):
        """Directional derivative X(f) of a scalar expression."""
        f = ex._as_expr(f)
        out = ex.ZERO
        for c, n in zip(self.components, self.chart.names):
            out = out + c * ex.differentiate(f, n)
        return out

    def __repr__(self):
        label = f"{self.name}=" if self.name else ""
        return f"VectorField({label}[{', '.join(map(str, self.components))}])"


def _check(X, Y):
    if X.chart != Y.chart:
        raise ChartMismatch(f"{X.chart} vs {Y.chart}")


@dataclass
class SampleDomain:
    """Axis-aligned box with a scrambled Halton sample set."""

    bounds: list
    count: int = 64
    seed: int = 0

    def points(self):
        lo = np.array([b[0] for b in self.bounds], dtype=float)
        hi = np.array([b[1] for b in self.bounds], dtype=float)
        if np.any(hi < lo):
            raise ValueError("sample box has hi < lo")
        sampler = qmc.Halton(d=len(self.bounds), scramble=True, seed=self.seed)
        return qmc.scale(sampler.random(self.count), lo, hi) if np.any(hi > lo) else np.tile(lo, (self.count, 1))


EULER_BOX = [(0.5, 3.0), (0.5, 3.0), (-2.0, 2.0)]
POSITIVE_BOX = [(0.5, 3.0), (0.5, 3.0), (0.5, 3.0)]


@dataclass
class Frame:
    fields: list
    domain: SampleDomain = None
    span_tol: float = 1e-9
    independence_tol: float = 1e-9
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.fields:
            raise ValueError("empty frame")
        chart = self.fields[0].chart
        for X in self.fields[1:]:
            if X.chart != chart:
                raise ChartMismatch(f"{X.chart} vs {chart}")
        if self.domain is None:
            self.domain = SampleDomain([(-1.0, 1.0)] * chart.dim)

    @property
    def chart(self):
        return self.fields[0].chart

    def samples(self):
        return self.domain.points()

    def __len__(self):
        return len(self.fields)

    def __getitem__(self, i):
        return self.fields[i]

    def check_independent(self, points=None):
        """Raise DegenerateBasis if the wedge of the frame vanishes at a sample."""
        pts = self.samples() if points is None else np.atleast_2d(points)
        mats = np.stack([X(pts, self.params) for X in self.fields], axis=1)
        sv = np.linalg.svd(mats, compute_uv=False)
        bad = sv[:, -1] <= self.independence_tol * sv[:, 0]
        if np.any(bad):
            k = int(np.argmax(bad))
            raise DegenerateBasis(f"frame is dependent at {pts[k].tolist()}")
        return True


def jacobian(X, point, params=None):
    """Entry (r, c) is dX_r/dx_c. Shape (n, n) or (M, n, n)."""
    J = jacobian_exprs(X)
    pts = np.asarray(point, dtype=float)
    n = X.chart.dim
    flat = [J[r][c] for r in range(n) for c in range(n)]
    vals = ex.evaluate_many(flat, pts, params, X.chart)
    return vals.reshape(pts.shape[:-1] + (n, n))


def jacobian_exprs(X):
    return [[ex.differentiate(c, name) for name in X.chart.names] for c in X.components]


def lie_bracket(X, Y):
    """Symbolic [X, Y] = J_Y X - J_X Y."""
    _check(X, Y)
    n = X.chart.dim
    names = X.chart.names
    comps = []
    for r in range(n):
        acc = ex.ZERO
        for c in range(n):
            acc = acc + X.components[c] * ex.differentiate(Y.components[r], names[c])
            acc = acc - Y.components[c] * ex.differentiate(X.components[r], names[c])
        comps.append(acc)
    return VectorField(comps, X.chart)


def lie_bracket_at(X, Y, point, params=None):
    """Numeric bracket from Jacobians at point(s)."""
    _check(X, Y)
    pts = np.asarray(point, dtype=float)
    JX, JY = jacobian(X, pts, params), jacobian(Y, pts, params)
    x, y = X(pts, params), Y(pts, params)
    return np.einsum("...rc,...c->...r", JY, x) - np.einsum("...rc,...c->...r", JX, y)


def _need3(*fields):
    for F in fields:
        if F.chart.dim != 3:
            raise ValueError(f"3D chart required, got dimension {F.chart.dim}")


def cross(X, Y):
    _need3(X, Y)
    _check(X, Y)
    a, b = X.components, Y.components
    return VectorField([a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]], X.chart)


def curl(X):
    _need3(X)
    x, y, z = X.chart.names
    P, Q, R = X.components
    d = ex.differentiate
    return VectorField([d(R, y) - d(Q, z), d(P, z) - d(R, x), d(Q, x) - d(P, y)], X.chart)


def divergence(X):
    out = ex.ZERO
    for c, n in zip(X.components, X.chart.names):
        out = out + ex.differentiate(c, n)
    return out


def gradient(f, chart):
    if not isinstance(chart, ex.Chart):
        chart = ex.Chart(chart)
    return VectorField(ex.gradient(f, chart), chart)


@dataclass
class SpanDecomposition:
    coefficients: np.ndarray
    residual: float
    in_span: bool


def span_decompose(V, basis, point, span_tol=1e-9, independence_tol=1e-9, params=None):
    """Minimum-norm least-squares coefficients of V on the basis fields at one point."""
    pt = np.asarray(point, dtype=float)
    if isinstance(V, VectorField):
        V = V(pt, params)
    V = np.asarray(V, dtype=float)
    B = np.stack([X(pt, params) for X in basis], axis=1)
    sv = np.linalg.svd(B, compute_uv=False)
    if sv[-1] <= independence_tol * max(sv[0], 1e-300):
        raise DegenerateBasis(f"basis is degenerate at {pt.tolist()} (singular values {sv.tolist()})")
    coef, *_ = np.linalg.lstsq(B, V, rcond=None)
    res = float(np.linalg.norm(V - B @ coef) / max(1.0, np.linalg.norm(V)))
    return SpanDecomposition(coef, res, res < span_tol)


def span_decompose_many(V, basis, points, independence_tol=1e-9, params=None):
    """Vectorized variant. Returns (coefficients (M, k), residuals (M,))."""
    pts = np.atleast_2d(np.asarray(points, dtype=float))
    Vv = V(pts, params) if isinstance(V, VectorField) else np.asarray(V, dtype=float)
    B = np.stack([X(pts, params) for X in basis], axis=-1)
    U, s, Wt = np.linalg.svd(B, full_matrices=False)
    bad = s[:, -1] <= independence_tol * np.maximum(s[:, 0], 1e-300)
    if np.any(bad):
        k = int(np.argmax(bad))
        raise DegenerateBasis(f"basis is degenerate at {pts[k].tolist()}")
    proj = np.einsum("mnk,mn->mk", U, Vv) / s
    coef = np.einsum("mjk,mj->mk", Wt, proj)
    fit = np.einsum("mnk,mk->mn", B, coef)
    res = np.linalg.norm(Vv - fit, axis=1) / np.maximum(1.0, np.linalg.norm(Vv, axis=1))
    return coef, res


def det_expr(M):
    """Determinant of a small square matrix of Expressions (Laplace expansion)."""
    n = len(M)
    if n == 1:
        return M[0][0]
    if n == 2:
        return M[0][0] * M[1][1] - M[0][1] * M[1][0]
    out = ex.ZERO
    for j in range(n):
        minor = [row[:j] + row[j + 1:] for row in M[1:]]
        term = M[0][j] * det_expr(minor)
        out = out + term if j % 2 == 0 else out - term
    return out


def decompose_exprs(V, basis):
    """Coefficient Expressions of V on a full basis (Cramer's rule)."""
    n = V.chart.dim
    if len(basis) != n:
        raise ValueError("symbolic decomposition needs a full basis")
    cols = [list(X.components) for X in basis]
    M = [[cols[j][i] for j in range(n)] for i in range(n)]
    D = det_expr(M)
    out = []
    for k in range(n):
        Mk = [[V.components[i] if j == k else M[i][j] for j in range(n)] for i in range(n)]
        out.append(det_expr(Mk) / D)
    return out
