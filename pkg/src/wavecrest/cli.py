"""Command-line entry point.

Exit codes: 0 when every verdict passes, 1 on a failing verdict, 2 on usage or
configuration errors.
"""

import argparse
import csv
import datetime
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import checks, euler, liealg, pdesim, quasirect, rescale
from . import config as cfgmod
from . import expr as ex
from . import vfield as vf


class UsageError(Exception):
    pass


# -- helpers --------------------------------------------------------------------

def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, (ex.Expr,)):
        return ex.to_text(o)
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not serializable: {type(o).__name__}")


def _clean(o):
    """Replace non-finite floats and tuple keys so that the JSON is strict."""
    if isinstance(o, dict):
        return {(k if isinstance(k, str) else json.dumps(_clean(k), default=_jsonable)): _clean(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_clean(v) for v in o]
    if isinstance(o, np.ndarray):
        return _clean(o.tolist())
    if isinstance(o, (float, np.floating)):
        f = float(o)
        return f if math.isfinite(f) else str(f)
    return o


def dumps(obj):
    return json.dumps(_clean(obj), indent=2, default=_jsonable) + "\n"


def _threads():
    raw = os.environ.get("WAVECREST_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise UsageError(f"WAVECREST_THREADS must be an integer, got {raw!r}") from None
    return max(1, n)


def load_config(args, extra_paths=()):
    cfg = {}
    paths = ([args.config] if getattr(args, "config", None) else []) + [p for p in extra_paths if p]
    for p in paths:
        cfg = cfgmod.merge(cfg, cfgmod.load(p))
    cfg = cfgmod.resolve(cfg)
    if args.seed is not None:
        cfg["sample_domain"]["seed"] = args.seed
    if args.tol is not None:
        cfg["tolerances"]["span_tol"] = args.tol
    return cfg


def _params(cfg):
    out = {}
    for k, v in cfg.get("parameters", {}).items():
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            raise cfgmod.ConfigError(f"parameter {k!r} must be numeric")
        out[k] = float(v)
    return out


def _chart(cfg):
    names = cfg.get("chart", {}).get("names")
    if not isinstance(names, list) or not names:
        raise cfgmod.ConfigError("[chart] names must be a non-empty list")
    return ex.Chart([str(n) for n in names])


def _parse_expr(text, chart, params):
    e = ex.parse(str(text), chart, tuple(params))
    return ex.subs(e, {k: ex.const(v) for k, v in params.items()}) if params else e


def _fields(cfg, chart, params):
    raw = cfg.get("fields", {})
    if not raw:
        raise cfgmod.ConfigError("[fields] is empty")
    out = []
    for name, comps in raw.items():
        if not isinstance(comps, list):
            raise cfgmod.ConfigError(f"field {name!r} must be a list of expressions")
        out.append(vf.VectorField([_parse_expr(c, chart, params) for c in comps], chart, name))
    return out


def _domain(cfg, dim):
    sd = cfg["sample_domain"]
    bounds = sd.get("bounds")
    if bounds is None:
        raise cfgmod.ConfigError("[sample_domain] bounds missing")
    if len(bounds) != dim or any(not isinstance(b, list) or len(b) != 2 for b in bounds):
        raise cfgmod.ConfigError(f"[sample_domain] bounds must list {dim} [lo, hi] pairs")
    seed = int(sd["seed"])
    if seed < 0 or seed >= 2 ** 64:
        raise cfgmod.ConfigError("seed must be an unsigned 64-bit integer")
    return vf.SampleDomain([(float(a), float(b)) for a, b in bounds], int(sd["count"]), seed)


def _frame(cfg):
    chart = _chart(cfg)
    params = _params(cfg)
    fields = _fields(cfg, chart, params)
    tol = cfg["tolerances"]
    return vf.Frame(fields, _domain(cfg, chart.dim), float(tol["span_tol"]), float(tol["independence_tol"]))


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([("%.17g" % v) if isinstance(v, (float, np.floating)) else v for v in row])
    return buf.getvalue()


def svg_polyline(x, y, title):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    W, H, pad = 640, 400, 40
    x0, x1 = float(np.min(x)), float(np.max(x))
    y0, y1 = float(np.min(y)), float(np.max(y))
    if y1 == y0:
        y0, y1 = y0 - 1, y1 + 1
    if x1 == x0:
        x1 = x0 + 1
    px = pad + (x - x0) / (x1 - x0) * (W - 2 * pad)
    py = H - pad - (y - y0) / (y1 - y0) * (H - 2 * pad)
    pts = " ".join(f"{a:.3f},{b:.3f}" for a, b in zip(px, py))
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">\n'
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>\n'
        f'<rect x="{pad}" y="{pad}" width="{W - 2 * pad}" height="{H - 2 * pad}" fill="none" stroke="#888"/>\n'
        f'<text x="{pad}" y="{pad - 12}" font-family="sans-serif" font-size="14">{title}</text>\n'
        f'<text x="{pad}" y="{H - 12}" font-family="sans-serif" font-size="11">x in [{x0:.4g}, {x1:.4g}], '
        f'y in [{y0:.4g}, {y1:.4g}]</text>\n'
        f'<polyline fill="none" stroke="#1f4e9a" stroke-width="1.5" points="{pts}"/>\n'
        "</svg>\n"
    )


class Emitter:
    def __init__(self, args, cfg):
        self.args = args
        self.cfg = cfg
        self.formats = args.format or cfg["output"].get("formats") or ["json"]
        if isinstance(self.formats, str):
            self.formats = [self.formats]
        for f in self.formats:
            if f not in ("json", "csv", "svg"):
                raise UsageError(f"unknown output format {f!r}")
        self.prefix = str(cfg["output"].get("prefix", "report"))
        out = args.out
        self.file = None
        self.dir = None
        if out:
            p = Path(out)
            if p.suffix in (".json", ".csv"):
                self.file = p
                p.parent.mkdir(parents=True, exist_ok=True)
            else:
                self.dir = p
                p.mkdir(parents=True, exist_ok=True)

    def envelope(self, command, result, passed):
        rep = {"command": command, "version": __version__, "verdict": "pass" if passed else "fail",
               "seed": self.cfg["sample_domain"]["seed"], "config": self.cfg, "result": result}
        if not self.args.no_timestamp:
            rep["generated"] = datetime.datetime.now(datetime.timezone.utc).isoformat()
        return rep

    def write(self, report, csv_table=None, svgs=()):
        """JSON goes to --out (file or DIR/prefix.json), beside a .csv target, or to stdout."""
        text = dumps(report)
        if "json" in self.formats:
            if self.file is not None:
                self.file.with_suffix(".json").write_text(text)
            elif self.dir is not None:
                (self.dir / f"{self.prefix}.json").write_text(text)
            else:
                sys.stdout.write(text)
        want_csv = "csv" in self.formats or (self.file is not None and self.file.suffix == ".csv")
        if csv_table is not None and want_csv:
            body = _csv_text(*csv_table)
            if self.file is not None:
                self.file.with_suffix(".csv").write_text(body)
            elif self.dir is not None:
                (self.dir / f"{self.prefix}.csv").write_text(body)
            else:
                sys.stdout.write(body)
        if "svg" in self.formats:
            target = self.dir or (self.file.parent if self.file else None)
            if target is None:
                raise UsageError("svg output needs --out")
            for name, content in svgs:
                (target / name).write_text(content)


# -- commands ---------------------------------------------------------------------

def cmd_frame_check(args):
    cfg = load_config(args)
    frame = _frame(cfg)
    frame.check_independent()
    rep = quasirect.frame_quasirect(frame)
    names = [X.name for X in frame]
    result = rep.to_json()
    for p in result["pairs"]:
        p["names"] = [names[p["i"]], names[p["j"]]]
    passed = True
    if args.expect:
        if args.expect == "all-quasirect":
            passed = rep.all_quasirect
        elif args.expect == "none-quasirect":
            passed = all(p.verdict == quasirect.NOT_QUASIRECT for p in rep.pairs)
        else:
            raise UsageError(f"frame check: unknown --expect {args.expect!r}")
    em = Emitter(args, cfg)
    rows = [[p["i"], p["j"], p["verdict"], float(p["max_residual"])] for p in result["pairs"]]
    em.write(em.envelope("frame check", result, passed), (["i", "j", "verdict", "max_residual"], rows))
    return 0 if passed else 1


def _rescaled_fields(cfg, fields, chart, params):
    phi = cfg.get("phi")
    if not phi:
        return fields, None
    r = rescale.RescalingCandidate(tuple(_parse_expr(phi.get(f"phi{k + 1}", 1), chart, params) for k in range(3)))
    return [X.scale(p) for X, p in zip(fields, r.phis)], r


def cmd_frame_classify(args):
    cfg = load_config(args, [args.phi])
    frame = _frame(cfg)
    chart, params = frame.chart, _params(cfg)
    fields, r = _rescaled_fields(cfg, list(frame.fields), chart, params)
    if r is not None:
        r.check_nonvanishing(chart, frame.samples())
    fr = vf.Frame(fields, frame.domain, frame.span_tol, frame.independence_tol)
    em = Emitter(args, cfg)
    try:
        C = liealg.extract_structure_constants(fr, const_tol=float(cfg["tolerances"]["const_tol"]),
                                               span_tol=fr.span_tol, labels=[X.name or f"e{k}" for k, X in enumerate(frame.fields)])
    except liealg.NonConstantError as exc:
        result = {"error": "non-constant", "message": str(exc), "index": exc.index,
                  "range": exc.range, "std": exc.std}
        em.write(em.envelope("frame classify", result, False))
        return 1
    result = {"constants": C.to_json(), "jacobi_residual": liealg.jacobi_residual(C)}
    passed = True
    if len(fields) == 3:
        alg = liealg.classify3d(C)
        result["class"] = alg.label
        result["invariants"] = alg.to_json()
        result["basis_quasirect"] = rescale.basis_quasirect(C)
        result["class_quasirect"] = rescale.CLASS_QUASIRECT.get(alg.label)
        if args.expect:
            passed = alg.label == args.expect
    elif args.expect:
        raise UsageError("--expect needs a three-field frame")
    em.write(em.envelope("frame classify", result, passed))
    return 0 if passed else 1


def cmd_frame_rescale(args):
    cfg = load_config(args, [args.module, args.phi])
    chart = _chart(cfg)
    params = _params(cfg)
    fields = _fields(cfg, chart, params)
    if len(fields) != 3:
        raise cfgmod.ConfigError("frame rescale needs exactly three fields")
    domain = _domain(cfg, chart.dim)
    if cfg.get("module"):
        coeffs = {k: _parse_expr(cfg["module"].get(k, 0), chart, params) for k in rescale.COEFF_NAMES}
        m = rescale.ModuleSpec(fields, coeffs, domain)
    else:
        m = rescale.module_from_frame(fields, domain)
    if "phi" not in cfg:
        raise cfgmod.ConfigError("frame rescale needs a [phi] section")
    r = rescale.RescalingCandidate(tuple(_parse_expr(cfg["phi"].get(f"phi{k + 1}", 1), chart, params) for k in range(3)))
    tol = cfg["tolerances"]
    pts = m.samples()
    cf = rescale.structure_constant_functions(m, r)
    con = rescale.constancy(cf, chart, pts, float(tol["const_tol"]))
    result = {
        "module_consistency": m.consistency(pts),
        "coefficients": {k: ex.to_text(v) for k, v in m.coefficients.items()},
        "constants": con.means, "deviations": con.stds, "ranges": con.ranges, "constant": con.constant,
    }
    passed = con.constant
    if con.constant:
        consts = [float(c) for c in con.means]
        c = np.zeros((3, 3, 3))
        for k, (i, j) in enumerate(rescale.PAIRS):
            c[i, j] = consts[3 * k:3 * k + 3]
            c[j, i] = -c[i, j]
        C = liealg.StructureConstants(c, [X.name for X in fields], "rescaled")
        try:
            alg = liealg.classify3d(C)
            result["class"] = alg.label
        except liealg.JacobiViolation as exc:
            result["class"] = None
            result["jacobi_error"] = str(exc)
            passed = False
        psi = r.psis
        rr = rescale.residual_system(m, psi, consts, pts, float(tol["span_tol"]))
        result["system"] = {"verdict": rr.verdict, "max_printed": rr.max_printed,
                            "max_derived": rr.max_derived, "disagreement": rr.disagreement}
        if args.expect:
            passed = passed and result.get("class") == args.expect
    em = Emitter(args, cfg)
    em.write(em.envelope("frame rescale", result, passed))
    return 0 if passed else 1


def cmd_euler_table(args):
    cfg = load_config(args)
    kappa = args.kappa if args.kappa is not None else float(cfg.get("euler", {}).get("kappa", 3.0))
    seed = cfg["sample_domain"]["seed"]
    count = int(cfg.get("euler", {}).get("count", 100))
    pts = vf.SampleDomain(vf.EULER_BOX, count, seed).points()
    tab = euler.commutator_table(kappa, pts)
    result = tab.to_json()
    result["eigen_residual"] = euler.eigen_residual(kappa, pts)
    passed = tab.max_deviation < 1e-10
    rows = []
    for b in result["brackets"]:
        rows.append(["[" + ",".join(b["pair"]) + "]"] + b["coefficients"])
    em = Emitter(args, cfg)
    em.write(em.envelope("euler table", result, passed), (["pair", "X+", "X-", "X0"], rows))
    return 0 if passed else 1


def cmd_euler_geometry(args):
    cfg = load_config(args)
    t3 = args.t3 if args.t3 is not None else cfg.get("euler", {}).get("t3")
    seed = cfg["sample_domain"]["seed"]
    count = int(cfg.get("euler", {}).get("count", 50))
    pts = vf.SampleDomain([(-1.0, 1.0), (0.2, 2.0), (-1.0, 1.0)], count, seed).points()
    if t3 is not None:
        pts[:, 2] = float(t3)
    geo = euler.surface_geometry()
    g = geo.evaluate(pts)
    pt = euler.parallel_transport_check(pts)
    result = {
        "t3": t3,
        "max_abs_K": float(np.max(np.abs(g["K"]))),
        "max_abs_H_minus_L_half": float(np.max(np.abs(g["H"] - g["L"] / 2))),
        "max_normal_dot_tangent": float(max(np.max(np.abs(g["n_dot_f1"])), np.max(np.abs(g["n_dot_f2"])))),
        "parallel_transport": pt,
        "printed_normal_defect": float(np.max(np.abs(euler.printed_normal_defect(pts)))),
    }
    passed = (result["max_abs_K"] < 1e-12 and result["max_abs_H_minus_L_half"] < 1e-12
              and result["max_normal_dot_tangent"] < 1e-12)
    header = ["t1", "t2", "t3", "E", "F", "G", "L", "M", "N", "K", "H", "H_shape"]
    rows = [[*pts[k], *(float(g[n][k]) for n in header[3:])] for k in range(len(pts))]
    em = Emitter(args, cfg)
    em.write(em.envelope("euler geometry", result, passed), (header, rows))
    return 0 if passed else 1


def _sim_setup(args, cfg):
    sim = cfg["sim"]
    for flag, key in (("system", "system"), ("scheme", "scheme"), ("cfl", "cfl"), ("N", "N"),
                      ("t_end", "t_end"), ("bc", "bc"), ("kappa", "kappa")):
        v = getattr(args, flag, None)
        if v is not None:
            sim[key] = v
    if "system" not in sim:
        raise cfgmod.ConfigError("simulate needs a system ([sim] system or --system)")
    ident = str(sim["system"]).replace("-", "_")
    if ident == "custom":
        chart = _chart(cfg)
        params = _params(cfg)
        A = sim.get("matrix")
        if not isinstance(A, list):
            raise cfgmod.ConfigError("custom system needs [sim] matrix")
        rows = [[_parse_expr(a, chart, params) for a in row] for row in A]
        system = pdesim.build_system("custom", chart=chart, matrix=rows)
    else:
        system = pdesim.build_system(ident, kappa=float(sim.get("kappa", 3.0)), u0=float(sim.get("u0", 0.0)))
    try:
        scfg = pdesim.SimConfig(str(sim["scheme"]).replace("-", "_"), float(sim["cfl"]), float(sim["t_end"]),
                                str(sim["bc"]), int(sim["stride"]))
    except ValueError as exc:
        raise cfgmod.ConfigError(str(exc)) from None
    ic = cfg.get("ic", {})
    names = system.chart.names
    missing = [n for n in names if n not in ic]
    extra = [k for k in ic if k not in names]
    if missing or extra:
        raise cfgmod.ConfigError(f"[ic] must define exactly {list(names)} (missing {missing}, unknown {extra})")
    xt = pdesim.XT_CHART
    exprs = [ex.subs(ex.parse(str(ic[n]), xt, tuple(_params(cfg))), {k: ex.const(v) for k, v in _params(cfg).items()})
             for n in names]
    N = int(sim["N"])
    state = pdesim.GridState1D.from_functions(exprs, float(sim["x_min"]), float(sim["x_max"]), N,
                                              periodic=scfg.bc == "periodic")
    return system, state, scfg


def cmd_simulate(args):
    cfg = load_config(args)
    if args.ic:
        # an initial-condition file replaces [ic] rather than merging into it
        cfg["ic"] = cfgmod.load(args.ic).get("ic", {})
    system, state, scfg = _sim_setup(args, cfg)
    em = Emitter(args, cfg)
    names = list(system.chart.names)
    try:
        traj = pdesim.run(system, state, scfg)
    except pdesim.SimulationError as exc:
        result = {"error": type(exc).__name__, "message": str(exc), "step": exc.step, "time": exc.time, "cell": exc.cell}
        em.write(em.envelope("simulate", result, False))
        return 1
    result = {"system": system.name, "components": names, "steps": traj.steps, "redone_steps": traj.redone,
              "final_time": traj.times[-1], "levels": len(traj.times), "log": traj.log}
    window = cfg["sim"].get("window")
    if len(traj.states) >= 3:
        r = pdesim.residual(system, traj, window=window)
        result["residual"] = {"max": r.max_norm, "l2": r.l2_norm, "time": r.time}
        if system.name == "reduced_nonelastic":
            par = euler.nonelastic_parametrization()
            try:
                st = pdesim.map_trajectory(traj, par.forward)
                rm = pdesim.residual(euler.euler_system(3.0), traj, window=window, states=st)
                result["mapped_euler_residual"] = {"max": rm.max_norm, "l2": rm.l2_norm}
            except ex.DomainError as exc:
                result["mapped_euler_residual"] = {"error": str(exc)}
    header = ["step", "time", "x"] + [f"v_{k + 1}" for k in range(len(names))]
    rows = []
    for step, t, s in zip(traj.step_index, traj.times, traj.states):
        for i, xv in enumerate(traj.x):
            rows.append([step, float(t), float(xv), *(float(a) for a in s[i])])
    svgs = []
    if "svg" in em.formats:
        comps = cfg["sim"].get("plot_components") or names
        times = cfg["sim"].get("plot_times") or [-1]
        for c in comps:
            if c not in names:
                raise UsageError(f"unknown plot component {c!r}")
            k = names.index(c)
            for lvl in times:
                lvl = int(lvl)
                if not -len(traj.times) <= lvl < len(traj.times):
                    raise UsageError(f"plot level {lvl} out of range")
                t = traj.times[lvl]
                svgs.append((f"{em.prefix}_{c}_{lvl % len(traj.times)}.svg",
                             svg_polyline(traj.x, traj.states[lvl][:, k], f"{c} at t = {t:.6g}")))
    em.write(em.envelope("simulate", result, True), (header, rows), svgs)
    return 0


def cmd_verify(args):
    cfg = load_config(args)
    seed = cfg["sample_domain"]["seed"]
    results = checks.run_all(seed, _threads())
    if args.no_timestamp:
        # wall-clock timings would break byte-identical reports
        results = [{k: v for k, v in r.items() if k != "seconds"} for r in results]
    passed = all(r["passed"] for r in results)
    for r in results:
        sys.stderr.write(f"{'PASS' if r['passed'] else 'FAIL'} {r['name']}\n")
    em = Emitter(args, cfg)
    rows = [[r["name"], "pass" if r["passed"] else "fail"] for r in results]
    em.write(em.envelope("verify", {"checks": results}, passed), (["check", "verdict"], rows))
    return 0 if passed else 1


def cmd_separable(args):
    cfg = load_config(args)
    sep = dict(cfg.get("separable", {}))
    for flag in ("A", "B", "branch"):
        v = getattr(args, flag, None)
        if v is not None:
            sep[flag] = v
    if "A" not in sep or "B" not in sep:
        raise cfgmod.ConfigError("separable needs A and B")
    xr = sep.get("x_range", [-1.0, 1.0])
    tr = sep.get("t_range", [0.0, 1.0])
    xs = np.linspace(float(xr[0]), float(xr[1]), int(sep.get("Nx", 201)))
    ts = np.linspace(float(tr[0]), float(tr[1]), int(sep.get("Nt", 201)))
    branch = str(sep.get("branch", "gradient"))
    em = Emitter(args, cfg)
    try:
        sol = pdesim.separable_solution(str(sep["A"]), str(sep["B"]), xs, ts, float(sep.get("t1_corner", 0.0)), branch)
    except ValueError as exc:
        em.write(em.envelope("separable", {"error": str(exc)}, False))
        return 1
    pts = np.random.default_rng(cfg["sample_domain"]["seed"]).uniform(
        [xs[0], ts[0], -1.0], [xs[-1], ts[-1], 1.0], size=(100, 3))
    result = {"A": str(sep["A"]), "B": str(sep["B"]), "branch": branch, "report": sol.report,
              "t2": ex.to_text(sol.t2), "t3": ex.to_text(sol.t3)}
    try:
        result["row_identity"] = pdesim.row_identity_check(sol.A, sol.B, pts)
    except ex.DomainError as exc:
        result["row_identity"] = str(exc)
    passed = True
    table = None
    if sol.fields is not None:
        passed = sol.report["max_row_residual"] < 1e-9
        header = ["x", "t", "t1", "t2", "t3"]
        table = (header, [[float(xs[i]), float(ts[j]), *map(float, sol.fields[i, j])]
                          for j in range(len(ts)) for i in range(len(xs))])
    else:
        passed = sol.report.get("status") == "evaluated"
    em.write(em.envelope("separable", result, passed), table)
    return 0 if passed else 1


# -- parser -----------------------------------------------------------------------

def _u64(text):
    v = int(text)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH")
    common.add_argument("--out", metavar="DIR")
    common.add_argument("--format", action="append", choices=["json", "csv", "svg"])
    common.add_argument("--seed", type=_u64)
    common.add_argument("--tol", type=float)
    common.add_argument("--expect", metavar="VERDICT")
    common.add_argument("--no-timestamp", action="store_true")

    p = argparse.ArgumentParser(prog="wavecrest", description="Quasi-rectifiable wave superpositions toolkit.")
    p.add_argument("--version", action="version", version=f"wavecrest {__version__}")
    sub = p.add_subparsers(dest="command", required=True)

    frame = sub.add_parser("frame", help="frames of vector fields")
    fsub = frame.add_subparsers(dest="action", required=True)
    fsub.add_parser("check", parents=[common], help="pairwise quasi-rectifiability").set_defaults(func=cmd_frame_check)
    fc = fsub.add_parser("classify", parents=[common], help="structure constants and 3D class")
    fc.add_argument("--phi", metavar="PATH", help="config with a [phi] section applied before extraction")
    fc.set_defaults(func=cmd_frame_classify)
    fr = fsub.add_parser("rescale", parents=[common], help="rescale a module to a Lie algebra")
    fr.add_argument("--module", metavar="PATH")
    fr.add_argument("--phi", metavar="PATH")
    fr.set_defaults(func=cmd_frame_rescale)

    eu = sub.add_parser("euler", help="1D Euler system")
    esub = eu.add_subparsers(dest="action", required=True)
    et = esub.add_parser("table", parents=[common], help="eigenvector commutator table")
    et.add_argument("--kappa", type=float)
    et.set_defaults(func=cmd_euler_table)
    eg = esub.add_parser("geometry", parents=[common], help="superposition surface geometry")
    eg.add_argument("--t3", type=float)
    eg.set_defaults(func=cmd_euler_geometry)

    sm = sub.add_parser("simulate", parents=[common], help="run the 1D solver")
    sm.add_argument("--system", choices=["euler", "reduced-nonelastic", "reduced-elastic",
                                         "reduced_nonelastic", "reduced_elastic", "custom"])
    sm.add_argument("--ic", metavar="PATH")
    sm.add_argument("--scheme", choices=["maccormack", "lax_friedrichs", "lax-friedrichs"])
    sm.add_argument("--cfl", type=float)
    sm.add_argument("--N", type=int)
    sm.add_argument("--t-end", dest="t_end", type=float)
    sm.add_argument("--bc", choices=["periodic", "extrapolate"])
    sm.add_argument("--kappa", type=float)
    sm.set_defaults(func=cmd_simulate)

    sub.add_parser("verify", parents=[common], help="run the self-verification battery").set_defaults(func=cmd_verify)

    sp = sub.add_parser("separable", parents=[common], help="separable reduced-system solutions")
    sp.add_argument("--A")
    sp.add_argument("--B")
    sp.add_argument("--branch", choices=["gradient", "closed1", "closed2", "closed3"])
    sp.set_defaults(func=cmd_separable)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.func(args)
    except (UsageError, cfgmod.ConfigError, ex.ExprError, vf.DegenerateBasis, vf.ChartMismatch) as exc:
        sys.stderr.write(f"wavecrest: error: {exc}\n")
        return 2
    except ValueError as exc:
        sys.stderr.write(f"wavecrest: error: {exc}\n")
        return 2


if __name__ == "__main__":
    sys.exit(main())
