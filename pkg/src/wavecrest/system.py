"""Quasilinear first-order systems v_t = A(v) v_x."""

import numpy as np

from . import expr as ex


class QuasilinearSystem:
    """m x m matrix of Expressions over a state chart.

    `bound` maps an (N, m) state array to the per-cell spectral bound
    max |lambda|. `admissible` maps it to a boolean mask.
    """

    def __init__(self, name, chart, A, bound=None, admissible=None, params=None):
        if not isinstance(chart, ex.Chart):
            chart = ex.Chart(chart)
        A = [[ex._as_expr(a) for a in row] for row in A]
        m = chart.dim
        if len(A) != m or any(len(row) != m for row in A):
            raise ValueError(f"matrix must be {m}x{m}")
        self.name = name
        self.chart = chart
        self.A = A
        self.params = dict(params or {})
        self._bound = bound
        self._admissible = admissible

    @property
    def m(self):
        return self.chart.dim

    def matrix(self, values):
        """A at states of shape (m,) or (N, m); returns (m, m) or (N, m, m)."""
        v = np.asarray(values, dtype=float)
        flat = [a for row in self.A for a in row]
        out = ex.evaluate_many(flat, v, self.params, self.chart)
        return out.reshape(v.shape[:-1] + (self.m, self.m))

    def spectral_bound(self, values):
        v = np.atleast_2d(np.asarray(values, dtype=float))
        if self._bound is not None:
            return np.asarray(self._bound(v), dtype=float)
        return np.max(np.abs(np.linalg.eigvals(self.matrix(v))), axis=-1)

    def admissible(self, values):
        v = np.atleast_2d(np.asarray(values, dtype=float))
        ok = np.all(np.isfinite(v), axis=-1)
        if self._admissible is not None:
            ok &= np.asarray(self._admissible(v), dtype=bool)
        return ok

    def __repr__(self):
        return f"QuasilinearSystem({self.name!r}, m={self.m})"
