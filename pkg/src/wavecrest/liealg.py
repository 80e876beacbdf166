"""Structure constants, the Jacobi identity and 3D classification."""

from dataclasses import dataclass, field
from itertools import combinations

import numpy as np

from . import expr as ex
from . import vfield as vf


class NonConstantError(ValueError):
    """Bracket coefficients vary over the samples: the frame spans a module."""

    def __init__(self, i, j, k, lo, hi, std):
        super().__init__(
            f"non-constant coefficient c^{k}_{i}{j}: range [{lo:.6g}, {hi:.6g}], std {std:.3g}"
        )
        self.index = (i, j, k)
        self.range = (lo, hi)
        self.std = std


class JacobiViolation(ValueError):
    pass


@dataclass
class StructureConstants:
    """c[i, j, k] is the coefficient of e_k in [e_i, e_j]."""

    c: np.ndarray
    labels: list = None
    provenance: str = "symbolic-constant"
    deviation: float = 0.0

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        k = self.c.shape[0]
        if self.c.shape != (k, k, k):
            raise ValueError("structure constants must have shape (k, k, k)")
        if not np.array_equal(self.c, -np.transpose(self.c, (1, 0, 2))):
            raise ValueError("structure constants are not antisymmetric")
        if self.labels is None:
            self.labels = [f"e{i}" for i in range(k)]

    @property
    def k(self):
        return self.c.shape[0]

    @classmethod
    def from_brackets(cls, k, brackets, labels=None):
        """brackets maps (i, j) with i < j to a length-k coefficient vector."""
        c = np.zeros((k, k, k))
        for (i, j), v in brackets.items():
            c[i, j] = v
            c[j, i] = -np.asarray(v, dtype=float)
        return cls(c, labels)

    def bracket(self, x, y):
        return np.einsum("i,j,ijk->k", x, y, self.c)

    def transform(self, P):
        """Constants in the basis f_a = sum_i P[a, i] e_i."""
        P = np.asarray(P, dtype=float)
        Pinv = np.linalg.inv(P)
        c = np.einsum("ai,bj,ijk,kc->abc", P, P, self.c, Pinv)
        c = 0.5 * (c - np.transpose(c, (1, 0, 2)))
        return StructureConstants(c, None, "transformed")

    def to_json(self):
        return {"labels": list(self.labels), "c": self.c.tolist(),
                "provenance": self.provenance, "deviation": self.deviation}


def extract_structure_constants(frame, samples=None, const_tol=1e-8, span_tol=1e-9, labels=None):
    """Decompose every bracket onto the frame at each sample and demand constancy."""
    fields = frame.fields if isinstance(frame, vf.Frame) else list(frame)
    params = frame.params if isinstance(frame, vf.Frame) else None
    indep = frame.independence_tol if isinstance(frame, vf.Frame) else 1e-9
    if samples is None:
        samples = frame.samples()
    pts = np.atleast_2d(samples)
    k = len(fields)
    c = np.zeros((k, k, k))
    worst = 0.0
    for i, j in combinations(range(k), 2):
        B = vf.lie_bracket(fields[i], fields[j])
        coef, res = vf.span_decompose_many(B, fields, pts, indep, params)
        if np.max(res) > span_tol:
            m = int(np.argmax(res))
            raise ValueError(
                f"[{i},{j}] is not spanned by the frame at {pts[m].tolist()} (residual {res[m]:.3g})"
            )
        mean = coef.mean(axis=0)
        std = coef.std(axis=0)
        for m in range(k):
            if std[m] >= const_tol * (1 + abs(mean[m])):
                raise NonConstantError(i, j, m, coef[:, m].min(), coef[:, m].max(), std[m])
        worst = max(worst, float(np.max(std)))
        c[i, j] = mean
        c[j, i] = -mean
    return StructureConstants(c, labels, "numeric-fit", worst)


def jacobi_residual(C):
    c = C.c if isinstance(C, StructureConstants) else np.asarray(C)
    # J[i,j,k,l] = sum_m c^m_ij c^l_mk + c^m_jk c^l_mi + c^m_ki c^l_mj
    t1 = np.einsum("ijm,mkl->ijkl", c, c)
    t2 = np.einsum("jkm,mil->ijkl", c, c)
    t3 = np.einsum("kim,mjl->ijkl", c, c)
    return float(np.max(np.abs(t1 + t2 + t3))) if c.size else 0.0


def _rank(vectors, tol):
    if len(vectors) == 0:
        return 0, np.zeros((0, 0))
    A = np.asarray(vectors, dtype=float)
    U, s, Vt = np.linalg.svd(A)
    scale = max(1.0, s[0]) if s.size else 1.0
    r = int(np.sum(s > tol * scale))
    return r, Vt[:r]


@dataclass
class AlgebraClass:
    label: str
    dim_derived: int
    dim_center: int
    derived_in_center: bool
    extra: dict = field(default_factory=dict)

    def to_json(self):
        return {"label": self.label, "dim_derived": self.dim_derived, "dim_center": self.dim_center,
                "derived_in_center": self.derived_in_center}


def invariants(C, tol=1e-9):
    c = C.c
    k = C.k
    derived_vecs = [c[i, j] for i, j in combinations(range(k), 2)]
    dd, dbasis = _rank(derived_vecs, tol)
    # z is central iff sum_i z_i c[i, j, :] = 0 for all j
    ad = np.concatenate([c[:, j, :] for j in range(k)], axis=1).T
    _, s, Vt = np.linalg.svd(ad)
    scale = max(1.0, s[0]) if s.size and s[0] > 0 else 1.0
    rank = int(np.sum(s > tol * scale))
    center = Vt[rank:]
    if dd == 0:
        inside = True
    elif len(center) == 0:
        inside = False
    else:
        proj = dbasis @ center.T @ center
        inside = bool(np.linalg.norm(dbasis - proj) < 1e-8)
    return dd, len(center), inside, dbasis, center


def classify3d(C, tol=1e-9):
    if C.k != 3:
        raise ValueError("classify3d needs a 3-dimensional algebra")
    jr = jacobi_residual(C)
    if jr >= 1e-9:
        raise JacobiViolation(f"Jacobi residual {jr:.3g}")
    dd, dz, inside, dbasis, center = invariants(C, tol)
    if dd == 0:
        label = "abelian3"
    elif dd == 1 and inside:
        label = "heisenberg3"
    elif dd == 1:
        label = "aff1_plus_R"
    else:
        label = "other"
    return AlgebraClass(label, dd, dz, inside, {"derived_basis": dbasis.tolist(), "center_basis": center.tolist()})


# -- truncated families built from the Euler eigenvectors ----------------------

def truncated_closed_forms(kappa):
    """Closed-form coefficient rules. Keys are (kind1, n, kind2, m)."""
    h = (kappa - 1) / 2

    def rule(a, n, b, m):
        if a == b == "a":
            return {("a", n + m): n - m}
        if a == b == "b":
            return {("b", n + m): n - m}
        if a == b == "c":
            return {("c", n + m + 1): n - m}
        if a == "a" and b == "b":
            return {("a", n + m): n - h, ("b", n + m): h - m}
        if a == "a" and b == "c":
            return {("a", n + m + 1): n + 0.25, ("b", n + m + 1): -0.25, ("c", n + m): -(m + 1)}
        if a == "b" and b == "c":
            return {("b", n + m + 1): n + 0.25, ("a", n + m + 1): -0.25, ("c", n + m): -(m + 1)}
        raise KeyError((a, b))

    return rule


@dataclass
class TruncatedReport:
    kappa: float
    N: int
    table: dict
    max_deviation: float
    kappa1_relations: dict
    max_kappa1_residual: float
    notes: list


def verify_truncated_family(kappa, N, samples=None, tol=1e-9):
    """Brackets of a_n = rho^-n X+, b_m = rho^-m X-, c_k = rho^-k X0 for n, m, k <= N.

    Coefficient functions are obtained pointwise on {X+, X-, X0} and then fitted
    by a polynomial in 1/rho, so they read directly as truncated-basis
    coefficients.
    """
    if N > 8:
        raise ValueError("N must be at most 8")
    from . import euler

    es = euler.eigenstructure(kappa)
    rho = ex.Sym("rho")
    base = {"a": es.X_plus, "b": es.X_minus, "c": es.X_0}
    fields = {(kind, n): base[kind].scale(rho ** (-n)) for kind in "abc" for n in range(N + 1)}
    frame = [es.X_plus, es.X_minus, es.X_0]
    if samples is None:
        samples = vf.SampleDomain(vf.EULER_BOX, 100, 7).points()
    pts = np.atleast_2d(samples)
    inv_rho = 1.0 / pts[:, 0]
    top = 2 * N + 2
    design = np.stack([inv_rho ** j for j in range(top + 1)], axis=1)
    col = np.linalg.norm(design, axis=0)
    rule = truncated_closed_forms(kappa)
    order = ["a", "b", "c"]
    table = {}
    worst = 0.0
    keys = sorted(fields)
    for ka, kb in combinations(keys, 2):
        B = vf.lie_bracket_at(fields[ka], fields[kb], pts)
        coef, res = vf.span_decompose_many(B, frame, pts)
        if np.max(res) > tol:
            raise ValueError(f"decomposition residual {np.max(res):.3g} for {ka},{kb}")
        fitted = {}
        for s in range(3):
            sol, *_ = np.linalg.lstsq(design / col, coef[:, s], rcond=None)
            sol = sol / col
            for j, v in enumerate(sol):
                if abs(v) > 1e-7:
                    fitted[(order[s], j)] = float(v)
        expected = rule(ka[0], ka[1], kb[0], kb[1])
        # pointwise deviation against the closed form
        exp_vals = np.zeros_like(coef)
        for (kind, p), v in expected.items():
            exp_vals[:, order.index(kind)] += v * inv_rho ** p
        dev = float(np.max(np.abs(coef - exp_vals) / np.maximum(1.0, np.abs(exp_vals))))
        worst = max(worst, dev)
        table[(ka, kb)] = {"fitted": fitted, "expected": expected, "deviation": dev}

    k1rel = {}
    worst_k1 = 0.0
    if kappa == 1:
        Z = es.X_plus - es.X_minus
        for n in range(N + 1):
            Zn = Z.scale(rho ** (-n))
            for name, X, rhs in (
                ("X0", es.X_0, Z.scale(-(n + 0.5) * rho ** (-(n + 1)))),
                ("X+", es.X_plus, Zn.scale(-float(n))),
                ("X-", es.X_minus, Zn.scale(-float(n))),
            ):
                lhs = vf.lie_bracket_at(X, Zn, pts)
                r = rhs(pts)
                res = float(np.max(np.linalg.norm(lhs - r, axis=1) / np.maximum(1.0, np.linalg.norm(r, axis=1))))
                k1rel[(name, n)] = res
                worst_k1 = max(worst_k1, res)
            for m in range(N + 1):
                Zm = Z.scale(rho ** (-m))
                v = vf.lie_bracket_at(Zn, Zm, pts)
                res = float(np.max(np.linalg.norm(v, axis=1)))
                k1rel[("ZZ", n, m)] = res
                worst_k1 = max(worst_k1, res)
    notes = []
    if kappa != 2:
        notes.append(
            "the alternative [a_n, b_m] rule (n - 1/2) a + (1/2 - m) b agrees with the "
            f"kappa-general rule only at kappa = 2; kappa = {kappa} used here"
        )
    return TruncatedReport(kappa, N, table, worst, k1rel, worst_k1, notes)
