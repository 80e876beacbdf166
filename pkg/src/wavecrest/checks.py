"""Self-verification battery used by `wavecrest verify`.

Each check returns a dict with at least `name`, `passed` and the measured
quantities. Checks are independent and may run concurrently.
"""

import math
import time

import numpy as np

from . import euler, liealg, pdesim, quasirect, rescale
from . import vfield as vf


def _rng_points(seed, lo, hi, n=100):
    return np.random.default_rng(seed).uniform(lo, hi, size=(n, len(lo)))


def commutators(seed=0):
    t0 = time.perf_counter()
    pts = vf.SampleDomain(vf.EULER_BOX, 100, seed).points()
    devs = {k: euler.commutator_table(k, pts).max_deviation for k in (1.0, 1.4, 3.0)}
    dt = time.perf_counter() - t0
    return {"name": "commutator_tables", "passed": max(devs.values()) < 1e-10 and dt < 5,
            "deviation": devs, "seconds": dt}


def rescaled_commutation(seed=0):
    pts = vf.SampleDomain(vf.EULER_BOX, 100, seed).points()
    z = quasirect.verify_commuting(euler.z_fields(), euler.rescaling_functions(), pts)
    es = euler.eigenstructure(3.0)
    h = euler.elastic_rescaling(3.0)
    e = quasirect.verify_commuting([es.X_plus, es.X_minus], [h, h], pts)
    return {"name": "rescaled_commutation", "passed": z.max_norm < 1e-10 and e.max_norm < 1e-10,
            "z_frame": z.max_norm, "elastic_pair": e.max_norm}


def parametrization(seed=0):
    par = euler.nonelastic_parametrization()
    t = _rng_points(seed, [-1, 0.2, -1], [1, 2, 1])
    v = vf.SampleDomain(vf.EULER_BOX, 100, seed).points()
    pde = float(np.max(par.pde_residuals(t)))
    rt = par.roundtrip_error(v)
    return {"name": "parametrization", "passed": pde < 1e-12 and rt < 1e-12, "pde": pde, "roundtrip": rt}


SEPARABLE_PAIRS = (("x", "t^2"), ("x^2", "t^2+t"), ("x^2+x", "t^2"))


def reduced_identity(seed=0):
    pts = _rng_points(seed, [0.5, 0.5, -1], [2, 2, 1])
    res = {f"{a}|{b}": pdesim.row_identity_check(a, b, pts, relative=False) for a, b in SEPARABLE_PAIRS}
    return {"name": "reduced_identity", "passed": max(res.values()) < 1e-9, "residuals": res}


def _exact_runs():
    sysr = pdesim.reduced_nonelastic()
    par = euler.nonelastic_parametrization()
    eu = euler.euler_system(3.0)
    errs, res = [], []
    for N in (100, 200, 400):
        g = pdesim.GridState1D(-1.0, 5.0, pdesim.exact_reduced_solution(np.linspace(-1, 5, N), 0.0))
        tr = pdesim.run(sysr, g, pdesim.SimConfig("maccormack", 0.4, 0.2, "extrapolate"))
        exact = pdesim.exact_reduced_solution(tr.x, tr.times[-1])
        errs.append(pdesim.l2_error(tr.x, tr.final, exact, (1.0, 3.0)))
        states = pdesim.map_trajectory(tr, par.forward)
        res.append(pdesim.residual(eu, tr, states=states, window=(1.0, 3.0)).l2_norm)
    return errs, res


def exact_simulation(seed=0):
    t0 = time.perf_counter()
    errs, res = _exact_runs()
    dt = time.perf_counter() - t0
    orders = [math.log2(errs[k] / errs[k + 1]) for k in range(2)]
    ratios = [res[k] / res[k + 1] for k in range(2)]
    ok5 = min(orders) >= 1.8 and errs[-1] < 1e-3 and dt < 30
    return [
        {"name": "exact_simulation", "passed": ok5, "l2_errors": errs, "orders": orders, "seconds": dt},
        {"name": "reduction_claim", "passed": min(ratios) >= 3.5, "residuals": res, "ratios": ratios},
    ]


def geometry(seed=0):
    geo = euler.surface_geometry()
    pts = _rng_points(seed, [-1, 0.2, -1], [1, 2, 1], 50)
    g = geo.evaluate(pts)
    pt = euler.parallel_transport_check(pts)
    o = geo.evaluate(np.array([[0.0, 1.0, 0.0]]))
    vals = {
        "K": float(np.max(np.abs(g["K"]))),
        "H_minus_L_half": float(np.max(np.abs(g["H"] - g["L"] / 2))),
        "orthogonality": float(max(np.max(np.abs(g["n_dot_f1"])), np.max(np.abs(g["n_dot_f2"])))),
        "transport": float(max(pt["d_t1"], pt["d_t2"])),
        "metric_origin": [float(o["E"][0]), float(o["F"][0]), float(o["G"][0])],
    }
    ok = (vals["K"] < 1e-12 and vals["H_minus_L_half"] < 1e-12 and vals["orthogonality"] < 1e-12
          and vals["transport"] < 1e-12 and np.allclose(vals["metric_origin"], [40, 0, 12], rtol=0, atol=1e-12))
    return {"name": "geometry", "passed": bool(ok), **vals}


def classification(seed=0):
    h = rescale.example_heisenberg()
    t = euler.isothermal_rescaling(1.0, 1.0, 0.0, 1.0)
    raw = "no error"
    try:
        liealg.extract_structure_constants(euler.eigenstructure(3.0).frame())
    except liealg.NonConstantError:
        raw = "non-constant"
    except ValueError as exc:
        raw = f"other error: {exc}"
    ok = h.algebra.label == "heisenberg3" and t.algebra.label == "aff1_plus_R" and raw == "non-constant"
    return {"name": "classification", "passed": ok, "heisenberg": h.algebra.label,
            "isothermal": t.algebra.label, "raw_euler": raw}


def oracle_equivalence(seed=0):
    pts = vf.SampleDomain(quasirect.BATTERY_BOX, 64, seed).points()
    agree = 0
    pairs = quasirect.random_pair_battery(20, seed)
    for X, Y, _ in pairs:
        a = quasirect.pair_quasirect(X, Y, pts).verdict
        b = quasirect.curl_criterion(X, Y, pts).verdict
        agree += a == b
    return {"name": "oracle_equivalence", "passed": agree == len(pairs), "agreement": agree / len(pairs)}


def truncated(seed=0):
    rep = liealg.verify_truncated_family(1.0, 5)
    return {"name": "truncated_relations", "passed": rep.max_kappa1_residual < 1e-9,
            "max_residual": rep.max_kappa1_residual, "max_table_deviation": rep.max_deviation}


def simple_wave(seed=0):
    from scipy.optimize import brentq

    w = pdesim.poisson_wave()
    x = np.linspace(0, 2 * math.pi, 200)
    r = pdesim.simple_wave(w, x, 0.1, (-0.2, 0.2))
    tb = pdesim.breaking_time(w, (0, 2 * math.pi), 50.0)
    oracle = brentq(lambda t: 1 - 0.1 * t, 0, 50)
    late = pdesim.simple_wave(w, x, 1.05 * oracle, (-0.2, 0.2), s_range=(0, 2 * math.pi))
    res = float(np.max(np.abs(r.residual)))
    ok = res < 1e-12 and not r.catastrophe and late.catastrophe and abs(tb - oracle) / oracle < 0.05
    return {"name": "simple_wave", "passed": ok, "residual": res, "breaking_time": tb, "oracle": oracle}


CHECKS = (commutators, rescaled_commutation, parametrization, reduced_identity, exact_simulation,
          geometry, classification, oracle_equivalence, truncated, simple_wave)


def run_all(seed=0, threads=1):
    from concurrent.futures import ThreadPoolExecutor

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        futures = [pool.submit(c, seed) for c in CHECKS]
        results = []
        for c, f in zip(CHECKS, futures):
            try:
                out = f.result()
            except Exception as exc:  # report, do not crash the battery
                out = {"name": c.__name__, "passed": False, "error": f"{type(exc).__name__}: {exc}"}
            results.extend(out if isinstance(out, list) else [out])
    return results
