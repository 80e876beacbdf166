import math

import numpy as np
import pytest
from scipy.optimize import brentq

from wavecrest import euler
from wavecrest import expr as ex
from wavecrest import pdesim as ps

S3 = math.sqrt(3)
TWO_PI = 2 * math.pi


def test_reduced_matrix_examples():
    sysr = ps.build_system("reduced_nonelastic")
    A = sysr.matrix([0, 1 / (2 * S3), 0])
    assert np.allclose(A, [[1, S3, 0], [S3, 1, 0], [0, 0, 1]], rtol=1e-15)
    block = sysr.matrix([0, 0, 0])[:2, :2]
    assert np.allclose(sorted(np.linalg.eigvals(block).real), [-S3, S3])


def test_euler_matrix_via_build():
    A = ps.build_system("euler", kappa=3).matrix([1, 1, 0])
    assert np.array_equal(A, [[0, 0, 1], [0, 0, 3], [0, 1, 0]])


def test_reduced_bound_dominates_eigenvalues():
    sysr = ps.reduced_nonelastic()
    v = np.random.default_rng(2).uniform([-1, -1, -1], [1, 1, 1], size=(50, 3))
    eig = np.max(np.abs(np.linalg.eigvals(sysr.matrix(v))), axis=1)
    assert np.all(sysr.spectral_bound(v) >= eig * (1 - 1e-12))


def test_build_system_errors():
    with pytest.raises(ValueError):
        ps.build_system("nope")
    with pytest.raises(ValueError):
        ps.build_system("custom", chart=["a", "b"], matrix=[["a", "0"]])


def test_custom_system():
    sysm = ps.build_system("custom", chart=["a", "b"], matrix=[["k*a", "1"], ["0", "b"]], params={"k": 2.0})
    assert np.allclose(sysm.matrix([3.0, 4.0]), [[6, 1], [0, 4]])


def test_grid_validation():
    with pytest.raises(ValueError):
        ps.GridState1D(0, 1, np.zeros((4, 1)))
    with pytest.raises(ValueError):
        ps.GridState1D(1, 0, np.zeros((10, 1)))
    with pytest.raises(ValueError):
        ps.GridState1D(0, 1, np.full((10, 1), np.nan))
    g = ps.GridState1D(0, 1, np.zeros((11, 1)))
    assert g.dx == pytest.approx(0.1) and g.x[-1] == pytest.approx(1.0)
    gp = ps.GridState1D(0, 1, np.zeros((10, 1)), periodic=True)
    assert gp.dx == pytest.approx(0.1) and gp.x[-1] == pytest.approx(0.9)


def test_config_validation():
    with pytest.raises(ValueError):
        ps.SimConfig(cfl=1.5)
    with pytest.raises(ValueError):
        ps.SimConfig(scheme="upwind")
    with pytest.raises(ValueError):
        ps.SimConfig(bc="reflect")


def test_constant_state_stays_constant():
    g = ps.GridState1D.from_functions([1.0, 1.0, 0.5], 0, TWO_PI, 32, periodic=True)
    for scheme in ("maccormack", "lax_friedrichs"):
        tr = ps.run(euler.euler_system(3), g, ps.SimConfig(scheme, 0.4, 0.3, "periodic"))
        assert all(np.array_equal(s, g.values) for s in tr.states)
        assert tr.times[-1] == pytest.approx(0.3, abs=1e-15)
        r = ps.residual(euler.euler_system(3), tr)
        assert r.max_norm == 0.0


def test_periodicity_must_match_bc():
    g = ps.GridState1D.from_functions([1.0, 1.0, 0.5], 0, 1, 16)
    with pytest.raises(ValueError):
        ps.run(euler.euler_system(3), g, ps.SimConfig(bc="periodic"))


def entropic_error(N, scheme, t=0.5):
    g = ps.GridState1D.from_functions(["2 + sin(x)", 1.0, 1.0], 0, TWO_PI, N, periodic=True)
    tr = ps.run(euler.euler_system(3), g, ps.SimConfig(scheme, 0.4, t, "periodic"))
    exact = 2 + np.sin(tr.x + tr.times[-1])
    return ps.l2_error(tr.x, tr.final[:, 0], exact)


@pytest.mark.parametrize("scheme,ratio", [("maccormack", 3.5), ("lax_friedrichs", 1.8)])
def test_entropic_convergence(scheme, ratio):
    errs = [entropic_error(N, scheme) for N in (100, 200, 400)]
    assert errs[0] / errs[1] >= ratio and errs[1] / errs[2] >= ratio
    if scheme == "maccormack":
        assert errs[2] < 5e-3


def test_mass_drift_periodic():
    g = ps.GridState1D.from_functions(["2 + 0.3*sin(x)", "1 + 0.2*cos(x)", "0.1*sin(2*x)"], 0, TWO_PI, 400, periodic=True)
    tr = ps.run(euler.euler_system(1.4), g, ps.SimConfig("maccormack", 0.4, 0.2, "periodic"))
    m0 = np.sum(g.values[:, 0]) * g.dx
    m1 = np.sum(tr.final[:, 0]) * g.dx
    assert abs(m1 - m0) / m0 < 0.01


def test_residual_of_sampled_exact_solution_is_second_order():
    sysm = euler.euler_system(3)
    norms = []
    for N in (100, 200, 400):
        x = TWO_PI * np.arange(N) / N
        dt = 0.4 * (x[1] - x[0]) / 3
        times = [0.3, 0.3 + dt, 0.3 + 2 * dt]
        states = [np.stack([2 + np.sin(x + t), np.ones(N), np.ones(N)], axis=1) for t in times]
        norms.append(ps.residual(sysm, None, level=1, x=x, times=times, states=states).l2_norm)
    assert norms[0] / norms[1] > 3.5 and norms[1] / norms[2] > 3.5


def test_residual_needs_three_levels():
    with pytest.raises(ValueError):
        ps.residual(euler.euler_system(3), None, x=np.arange(10.0), times=[0, 1], states=[np.ones((10, 3))] * 2)


def test_time_derivative_nonuniform_exact_for_quadratics():
    t = [0.0, 0.1, 0.35]
    s = [np.array([ti ** 2 + 3 * ti]) for ti in t]
    assert ps.time_derivative(t, s, 1)[0] == pytest.approx(2 * 0.1 + 3)


def test_inadmissible_state_reports_cell():
    vals = np.ones((16, 3))
    vals[5, 0] = -1
    with pytest.raises(ps.InadmissibleState) as info:
        ps.run(euler.euler_system(3), ps.GridState1D(0, 1, vals), ps.SimConfig())
    assert info.value.cell == 5


def test_catastrophe_abort():
    # v2 grows linearly, so the spectral bound exceeds ten times its start value
    sysm = ps.build_system("custom", chart=["a", "b"], matrix=[["b", "0"], ["1", "0"]])
    g = ps.GridState1D.from_functions(["x", 0.01], 0, 1, 32)
    with pytest.raises(ps.CatastropheAbort):
        ps.run(sysm, g, ps.SimConfig("maccormack", 0.4, 1.0))


def test_stride_keeps_last_level():
    g = ps.GridState1D.from_functions(["2 + sin(x)", 1.0, 1.0], 0, TWO_PI, 64, periodic=True)
    tr = ps.run(euler.euler_system(3), g, ps.SimConfig("maccormack", 0.4, 0.3, "periodic", stride=3))
    assert tr.times[-1] == pytest.approx(0.3) and tr.step_index[-1] == tr.steps
    assert all(k % 3 == 0 for k in tr.step_index[:-1])


def test_exact_family_satisfies_reduced_system():
    x = np.linspace(1, 3, 9)
    e = ps.exact_reduced_solution(x, 0.0)
    assert np.allclose(e[:, 0], 0.25 * np.log(4 / 3 * np.exp(x) + 1))
    assert np.all(e[:, 1] == 0) and np.allclose(e[:, 2], x)


def test_reduced_simulation_converges():
    errs = []
    for N in (100, 200):
        g = ps.GridState1D(-1.0, 5.0, ps.exact_reduced_solution(np.linspace(-1, 5, N), 0.0))
        tr = ps.run(ps.reduced_nonelastic(), g, ps.SimConfig("maccormack", 0.4, 0.2))
        errs.append(ps.l2_error(tr.x, tr.final, ps.exact_reduced_solution(tr.x, tr.times[-1]), (1.0, 3.0)))
    assert errs[0] / errs[1] > 3.5


# -- simple waves ----------------------------------------------------------------

def test_integral_curve_accuracy():
    c = ps.integral_curve(lambda y: y, [2.0], (-1.0, 1.0), 0.0)
    r = np.linspace(-1, 1, 11)
    assert np.allclose(c(r)[:, 0], 2 * np.exp(r), rtol=1e-8)


def test_linear_wave_one_newton_step():
    w = ps.SimpleWave((0.5, 1.0), ex.const(0.2) * ex.sin(ps.S), ps.integral_curve(lambda y: np.ones_like(y), [0.0], (-1, 1), 0.0))
    x = np.linspace(0, 3, 50)
    res = ps.simple_wave(w, x, 0.7, (-1, 1))
    assert np.allclose(res.r, 0.2 * np.sin(0.5 * 0.7 + x), atol=1e-14)
    assert np.max(res.iterations) <= 1


def test_poisson_wave_pre_breaking():
    w = ps.poisson_wave(0.1, 1.0)
    x = np.linspace(0, TWO_PI, 200)
    res = ps.simple_wave(w, x, 0.1, (-0.2, 0.2))
    u = res.r
    assert np.max(np.abs(u - 0.1 * np.sin(x - (u + 1) * 0.1))) < 1e-12
    assert not res.catastrophe and not np.any(res.failed)
    assert res.report()["newton_failures"] == 0


def test_poisson_wave_breaking_time():
    w = ps.poisson_wave(0.1, 1.0)
    # characteristic denominator 1 + 0.1 t cos(s) first vanishes where cos s = -1
    oracle = brentq(lambda t: 1 - 0.1 * t, 0, 50)
    tb = ps.breaking_time(w, (0, TWO_PI), 50.0)
    assert abs(tb - oracle) / oracle < 0.05
    late = ps.simple_wave(w, np.linspace(0, TWO_PI, 200), 1.05 * oracle, (-0.2, 0.2), s_range=(0, TWO_PI))
    assert late.catastrophe
    early = ps.simple_wave(w, np.linspace(0, TWO_PI, 200), 0.9 * oracle, (-0.2, 0.2), s_range=(0, TWO_PI))
    assert not early.catastrophe
    assert ps.breaking_time(w, (0, TWO_PI), 5.0) is None


# -- wave content ----------------------------------------------------------------

def test_wave_decompose_entropic():
    g = ps.GridState1D.from_functions(["2 + sin(x)", 1.0, 0.3], 0, TWO_PI, 200, periodic=True)
    wc = ps.wave_decompose(g, 3.0)
    assert np.max(np.abs(wc.xi[:, :2])) < 1e-12
    assert np.max(np.abs(wc.xi[:, 2])) > 0.5
    assert wc.residual < 1e-6
    assert wc.counts["superposed"] == 0


def test_wave_decompose_constant():
    g = ps.GridState1D.from_functions([1.0, 2.0, 0.0], 0, 1, 16)
    wc = ps.wave_decompose(g, 1.4)
    assert np.all(wc.xi == 0) and not np.any(wc.mask)


def test_wave_decompose_disjoint_supports():
    # entropic bump near x=1 and a pure X+ simple wave near x=4; for kappa=3 the
    # X+ integral curve is (e^r, e^(3r), sqrt(3) e^r)
    b1 = "exp(-40*(x-1)^2)"
    r = "0.2*exp(-40*(x-4)^2)"
    g = ps.GridState1D.from_functions([f"(1 + 0.2*{b1})*exp({r})", f"exp(3*{r})", f"sqrt(3)*exp({r})"],
                                      0, 5, 800)
    wc = ps.wave_decompose(g, 3.0)
    assert wc.counts["plus"] > 0 and wc.counts["zero"] > 0
    assert wc.counts["minus"] == 0
    assert wc.counts["superposed"] == 0 and not np.any(wc.mask)
    assert wc.residual < 1e-6


def test_wave_decompose_rejects_inadmissible():
    vals = np.ones((10, 3))
    vals[3, 1] = -1
    with pytest.raises(ValueError):
        ps.wave_decompose(ps.GridState1D(0, 1, vals), 3.0)


# -- separable solutions ------------------------------------------------------------

XS = np.linspace(0.5, 2, 41)
TS = np.linspace(0.5, 2, 41)


def test_separable_traveling_wave():
    sol = ps.separable_solution("x", "t", XS, TS, t1_corner=0.3)
    f = sol.fields
    assert np.allclose(f[..., 0], 0.3, atol=1e-14)
    assert np.allclose(f[..., 1], 1 / (2 * S3))
    Xg, Tg = np.meshgrid(XS, TS, indexing="ij")
    assert np.allclose(f[..., 2], Xg + Tg)
    assert sol.report["max_row_residual"] < 1e-12


def test_separable_quadratic_matches_closed_form():
    xs = np.linspace(-1, 1, 200)
    ts = np.linspace(0, 1, 200)
    sol = ps.separable_solution("x", "t^2", xs, ts, t1_corner=0.05)
    C = math.exp(0.2) - 4 / 3 * math.exp(-1)
    Xg, Tg = np.meshgrid(xs, ts, indexing="ij")
    exact = 0.25 * np.log(4 / 3 * np.exp(Xg + Tg ** 2) + C)
    assert np.max(np.abs(sol.fields[..., 0] - exact)) < 1e-10
    assert sol.report["max_row_residual"] < 1e-9
    assert sol.report["compatibility_defect"] < 1e-8


@pytest.mark.parametrize("A,B", [("x", "t^2"), ("x^2", "t^2+t"), ("x^2+x", "t^2")])
def test_row_identity_absolute(A, B):
    pts = np.random.default_rng(3).uniform([0.5, 0.5, -1], [2, 2, 1], size=(100, 3))
    assert ps.row_identity_check(A, B, pts, relative=False) < 1e-9


@pytest.mark.parametrize("A,B", [("exp(x)", "t^3+t"), ("x^3+x", "sin(t)+2*t"), ("ln(x)", "exp(t)")])
def test_row_identity_relative(A, B):
    pts = np.random.default_rng(4).uniform([0.5, 0.5, -1], [2, 2, 1], size=(100, 3))
    assert ps.row_identity_check(A, B, pts) < 1e-12


def test_separable_errors():
    with pytest.raises(ValueError, match="root"):
        ps.separable_solution("x^2", "t^2", np.linspace(-1, 1, 11), TS)
    with pytest.raises(ValueError, match="compatibility"):
        ps.separable_solution("x^2", "t^3", XS, TS)
    with pytest.raises(ValueError):
        ps.separable_solution("x", "t", XS, TS, branch="bogus")


def test_branch_reports():
    for b in ps.BRANCHES:
        assert ps.evaluate_branch("x", "t^2", b, XS, TS)["status"] == "denominator_root"
    st = {b: ps.evaluate_branch("x^2", "t^2", b, XS, TS)["status"] for b in ps.BRANCHES}
    assert st["closed1"] == "not_real" and st["closed3"] == "not_real"
    assert st["closed2"] in ("not_real", "evaluated")


def test_elastic_residual_report():
    sysm = ps.reduced_elastic(3.0, 0.0)
    g = ps.GridState1D.from_functions(["0.1*sin(x)", "0.1*cos(x)"], 0, TWO_PI, 100, periodic=True)
    tr = ps.run(sysm, g, ps.SimConfig("maccormack", 0.4, 0.1, "periodic"))
    r = ps.elastic_residual(tr, 3.0, 1.0, 0.0, 0.0)
    assert np.isfinite(r.max_norm) and r.field.shape == (98, 3)
