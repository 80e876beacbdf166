"""Rescaling three-dimensional Lie modules of vector fields to real Lie algebras.

Module relations:
    [X1,X2] = a X1 + b X2 + c X3
    [X1,X3] = d X1 + e X2 + f X3
    [X2,X3] = g X1 + h X2 + i X3
For Y_k = phi_k X_k the constants c1..c9 are read off
    [Y1,Y2] = c1 Y1 + c2 Y2 + c3 Y3, [Y1,Y3] = c4 Y1 + c5 Y2 + c6 Y3,
    [Y2,Y3] = c7 Y1 + c8 Y2 + c9 Y3.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from . import liealg
from . import quasirect as qr
from . import vfield as vf

COEFF_NAMES = "abcdefghi"
PAIRS = ((0, 1), (0, 2), (1, 2))


@dataclass
class ModuleSpec:
    fields: list
    coefficients: dict
    domain: vf.SampleDomain = None

    def __post_init__(self):
        if len(self.fields) != 3:
            raise ValueError("module needs exactly three fields")
        missing = set(COEFF_NAMES) - set(self.coefficients)
        if missing:
            raise ValueError(f"missing coefficients {sorted(missing)}")
        self.coefficients = {k: ex._as_expr(v) for k, v in self.coefficients.items()}
        if self.domain is None:
            self.domain = vf.SampleDomain([(-1.0, 1.0)] * self.chart.dim)

    @property
    def chart(self):
        return self.fields[0].chart

    def samples(self):
        return self.domain.points()

    def relation(self, pair):
        k = PAIRS.index(pair)
        return [self.coefficients[COEFF_NAMES[3 * k + s]] for s in range(3)]

    def consistency(self, points=None):
        """max relative mismatch between the relations and the actual brackets."""
        pts = self.samples() if points is None else np.atleast_2d(points)
        worst = 0.0
        for pair in PAIRS:
            B = vf.lie_bracket_at(self.fields[pair[0]], self.fields[pair[1]], pts)
            coefs = self.relation(pair)
            R = sum(np.broadcast_to(ex.evaluate(cf, pts, chart=self.chart), pts.shape[:1])[:, None] * X(pts)
                    for cf, X in zip(coefs, self.fields))
            err = np.linalg.norm(B - R, axis=1) / np.maximum(1.0, np.linalg.norm(B, axis=1))
            worst = max(worst, float(np.max(err)))
        return worst


def module_from_frame(fields, domain=None):
    """Derive a..i symbolically from the brackets of a full 3D frame."""
    coeffs = {}
    for k, (p, q) in enumerate(PAIRS):
        cf = vf.decompose_exprs(vf.lie_bracket(fields[p], fields[q]), fields)
        for s in range(3):
            coeffs[COEFF_NAMES[3 * k + s]] = ex.simplify(cf[s])
    return ModuleSpec(list(fields), coeffs, domain)


@dataclass
class RescalingCandidate:
    phis: tuple

    def __post_init__(self):
        self.phis = tuple(ex._as_expr(p) for p in self.phis)
        if len(self.phis) != 3:
            raise ValueError("need three rescaling functions")

    @property
    def psis(self):
        return tuple(ex.ln(p) for p in self.phis)

    def check_nonvanishing(self, chart, points):
        pts = np.atleast_2d(points)
        for k, p in enumerate(self.phis):
            v = np.broadcast_to(ex.evaluate(p, pts, chart=chart), pts.shape[:1])
            if np.any(v == 0) or np.min(v) < 0 < np.max(v):
                raise ValueError(f"phi_{k + 1} = {p} vanishes on the sample domain")
        return True


def _dlog(X, phi):
    """X(ln |phi|) = X(phi)/phi, valid for either sign of phi."""
    return X.apply(phi) / phi


def structure_constant_functions(m, r):
    """c1..c9 as Expressions for the rescaled fields phi_k X_k."""
    r = r if isinstance(r, RescalingCandidate) else RescalingCandidate(r)
    r.check_nonvanishing(m.chart, m.samples())
    p1, p2, p3 = r.phis
    X1, X2, X3 = m.fields
    C = m.coefficients
    return (
        p2 * (C["a"] - _dlog(X2, p1)),
        p1 * (C["b"] + _dlog(X1, p2)),
        p1 * p2 / p3 * C["c"],
        p3 * (C["d"] - _dlog(X3, p1)),
        p1 * p3 / p2 * C["e"],
        p1 * (C["f"] + _dlog(X1, p3)),
        p2 * p3 / p1 * C["g"],
        p3 * (C["h"] - _dlog(X3, p2)),
        p2 * (C["i"] + _dlog(X2, p3)),
    )


@dataclass
class Constancy:
    means: np.ndarray
    stds: np.ndarray
    ranges: np.ndarray
    constant: bool


def constancy(cfuncs, chart, points, tol=1e-8):
    pts = np.atleast_2d(points)
    vals = ex.evaluate_many(cfuncs, pts, chart=chart)
    means = vals.mean(axis=0)
    stds = vals.std(axis=0)
    ok = bool(np.all(stds < tol * (1 + np.abs(means))))
    return Constancy(means, stds, np.stack([vals.min(axis=0), vals.max(axis=0)], axis=1), ok)


def rescale_module(m, r):
    """Module spanned by phi_k X_k; its coefficients are the c-functions."""
    r = r if isinstance(r, RescalingCandidate) else RescalingCandidate(r)
    cf = structure_constant_functions(m, r)
    fields = [X.scale(p) for X, p in zip(m.fields, r.phis)]
    return ModuleSpec(fields, dict(zip(COEFF_NAMES, cf)), m.domain)


def isothermal_labels(cs):
    """Reorder constants of the ordering (X0, X-, X+) into the labelling
    [X-,X+] -> c1..c3, [X0,X+] -> c4..c6, [X0,X-] -> c7..c9."""
    cs = list(cs)
    return tuple(cs[6:9] + cs[3:6] + cs[0:3])


def closed_form_phis(m, c3, c5, c7, eps1=1, eps2=1, points=None):
    """Rescaling functions from the three algebraic relations (needs c, e, g nonzero)."""
    pts = m.samples() if points is None else np.atleast_2d(points)
    C = m.coefficients
    for name in "ceg":
        v = np.broadcast_to(ex.evaluate(C[name], pts, chart=m.chart), pts.shape[:1])
        if np.any(v == 0) or np.min(v) < 0 < np.max(v):
            raise ValueError(f"coefficient {name} vanishes on the sample domain")
    e1 = 1.0 if eps1 > 0 else -1.0
    e2 = 1.0 if eps2 > 0 else -1.0
    rad1 = c3 * c5 / (C["c"] * C["e"])
    rad2 = c3 * c7 / (C["c"] * C["g"])
    rad3 = c5 * c7 / (C["e"] * C["g"])
    for name, rad in (("phi1", rad1), ("phi2", rad2), ("phi3", rad3)):
        v = np.broadcast_to(ex.evaluate(rad, pts, chart=m.chart), pts.shape[:1])
        if np.any(v <= 0):
            raise ValueError(f"radicand of {name} is not positive on the sample domain")
    return RescalingCandidate((e1 * ex.sqrt(rad1), e2 * ex.sqrt(rad2), e1 * e2 * ex.sqrt(rad3)))


@dataclass
class ResidualReport:
    printed: np.ndarray
    derived: np.ndarray
    algebraic: np.ndarray
    max_printed: float
    max_derived: float
    verdict: str
    disagreement: bool


def residual_system(m, psi, constants, points=None, tol=1e-9):
    """Evaluate the nine first-order equations for psi_k = ln phi_k.

    `printed` uses the commonly quoted form of the system; `derived` is the form
    obtained directly from the c-function relations, plus the three algebraic
    relations for c3, c5, c7. The verdict uses the derived form.
    """
    pts = m.samples() if points is None else np.atleast_2d(points)
    C = m.coefficients
    cv = np.broadcast_to(ex.evaluate(C["c"], pts, chart=m.chart), pts.shape[:1])
    if np.any(cv == 0):
        raise ValueError("coefficient c vanishes at a sample point")
    psi = [ex._as_expr(p) for p in psi]
    c1, c2, c3, c4, c5, c6, c7, c8, c9 = [float(x) for x in constants]
    X1, X2, X3 = m.fields
    a, b, c, d, e, f, g, h, i = (C[k] for k in COEFF_NAMES)
    E = [ex.exp(-p) for p in psi]
    Xp = [[X.apply(p) for p in psi] for X in (X1, X2, X3)]
    lc = [_dlog(X, c) for X in (X1, X2, X3)]
    printed = [
        Xp[0][0] + lc[0] - E[0] * (c6 - c2) - b,
        Xp[0][1] - c2 * E[0] + b,
        Xp[0][2] - c6 * E[0],
        Xp[1][0] + c1 * E[1] - a,
        Xp[1][1] - E[1] * (c1 + c9) + lc[1] + a,
        Xp[1][2] - c9 * E[1],
        Xp[2][0] + c4 * E[2],
        Xp[2][1] + c8 * E[2],
        Xp[2][2] + (c1 * c6 + c2 * c9) / c3 * E[2] if c3 != 0 else Xp[2][2],
    ]
    derived = [
        Xp[0][0] + lc[0] - E[0] * (c6 - c2) - b + f,
        Xp[0][1] - c2 * E[0] + b,
        Xp[0][2] - c6 * E[0] + f,
        Xp[1][0] + c1 * E[1] - a,
        Xp[1][1] - E[1] * (c1 + c9) + lc[1] + a + i,
        Xp[1][2] - c9 * E[1] + i,
        Xp[2][0] + c4 * E[2] - d,
        Xp[2][1] + c8 * E[2] - h,
        Xp[2][2] - d - h + (c4 + c8) * E[2] - lc[2],
    ]
    p1, p2, p3 = psi
    algebraic = [
        ex.exp(p1 + p2 - p3) * c - c3,
        ex.exp(p1 + p3 - p2) * e - c5,
        ex.exp(p2 + p3 - p1) * g - c7,
    ]
    P = ex.evaluate_many(printed, pts, chart=m.chart)
    D = ex.evaluate_many(derived, pts, chart=m.chart)
    A = ex.evaluate_many(algebraic, pts, chart=m.chart)
    mp = float(np.max(np.abs(P)))
    md = float(max(np.max(np.abs(D)), np.max(np.abs(A))))
    verdict = "solves" if md < tol else "does_not_solve"
    return ResidualReport(P, D, A, mp, md, verdict, (mp < tol) != (md < tol))


# -- worked example: Heisenberg ------------------------------------------------

XYZ_CHART = ex.Chart(["x", "y", "z"])


def heisenberg_module():
    x = ex.Sym("x")
    X1 = vf.VectorField([1, 0, 0], XYZ_CHART, "X1")
    X2 = vf.VectorField([0, x, x ** 2], XYZ_CHART, "X2")
    X3 = vf.VectorField([0, 0, 1], XYZ_CHART, "X3")
    return module_from_frame([X1, X2, X3], vf.SampleDomain(vf.POSITIVE_BOX))


def heisenberg_phis(c3=1.0, cprime=1.0):
    x = ex.Sym("x")
    return RescalingCandidate((ex.ONE, ex.const(c3 * cprime) / x, ex.const(cprime)))


def basis_quasirect(C, tol=1e-9):
    """True when every [e_i, e_j] has no component outside span{e_i, e_j}."""
    k = C.k
    for i in range(k):
        for j in range(i + 1, k):
            for m in range(k):
                if m not in (i, j) and abs(C.c[i, j, m]) > tol:
                    return False
    return True


# whether some basis of the algebra is quasi-rectifiable, by class
CLASS_QUASIRECT = {"abelian3": True, "heisenberg3": False, "aff1_plus_R": True}


@dataclass
class PipelineReport:
    module: ModuleSpec
    rescaled: list
    constants: liealg.StructureConstants
    algebra: liealg.AlgebraClass
    frame_report: qr.QuasiRectReport
    rescaled_report: qr.QuasiRectReport
    class_quasirect: bool
    notes: list = field(default_factory=list)

    def to_json(self):
        return {
            "constants": self.constants.to_json(),
            "class": self.algebra.label,
            "frame_quasirect": self.frame_report.all_quasirect,
            "rescaled_quasirect": self.rescaled_report.all_quasirect,
            "class_quasirect": self.class_quasirect,
            "rescaled_fields": [[str(c) for c in Y.components] for Y in self.rescaled],
        }


def example_heisenberg(c3=1.0, cprime=1.0):
    m = heisenberg_module()
    r = heisenberg_phis(c3, cprime)
    Y = [vf.VectorField([ex.simplify(p * c) for c in X.components], X.chart, f"Y{k + 1}")
         for k, (X, p) in enumerate(zip(m.fields, r.phis))]
    pts = m.samples()
    frame = vf.Frame(Y, m.domain)
    C = liealg.extract_structure_constants(frame, pts, labels=["Y1", "Y2", "Y3"])
    alg = liealg.classify3d(C)
    rep_x = qr.frame_quasirect(vf.Frame(list(m.fields), m.domain), pts)
    rep_y = qr.frame_quasirect(frame, pts)
    cq = CLASS_QUASIRECT.get(alg.label)
    return PipelineReport(m, Y, C, alg, rep_x, rep_y, cq)


def sign_of(value):
    return math.copysign(1.0, value)
