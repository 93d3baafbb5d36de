"""Command-line interface: ``cartankit <command> --scene file.json --out result.{csv,json}``."""
from __future__ import annotations

import argparse
import csv
import io
import json
import sys
from pathlib import Path

import numpy as np

from . import lens as L
from .cartan import curvature_tower, develop_base_curve
from .coframing import flow, torsion_tower
from .development import DevelopmentProblem, completeness_probe, develop
from .errors import CartanKitError, NumericalError, ValidationError
from .integrate import COMPLETED
from .morphism import hits_to_order, integrate_morphism
from .rolling import characteristic_curve, growth_ranks, rolling_space
from .rolling import _config_samples as config_samples
from .scene import Scene, SceneError
from .variation import conjugate_point, projective_geodesic, projective_jacobi

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL, EXIT_USAGE = 0, 1, 2, 64


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


class Result:
    """A command's output: a JSON document plus a table for CSV export."""

    def __init__(self, doc, header, rows, failed=None):
        self.doc = doc
        self.header = header
        self.rows = rows
        self.failed = failed


# ---------------------------------------------------------------------------
# formatting


def _py(obj):
    if isinstance(obj, dict):
        return {str(k): _py(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_py(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _py(obj.tolist())
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not np.isfinite(obj):
        return "inf" if obj > 0 else ("-inf" if obj < 0 else "nan")
    return obj


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "1" if v else "0"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if v is None:
        return ""
    return str(v)


def to_csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_cell(v) for v in r])
    return buf.getvalue()


def to_json(doc) -> str:
    return json.dumps(_py(doc), sort_keys=True, indent=1) + "\n"


def _trajectory_result(tr, extra=None, require=False):
    n = tr.x.shape[1]
    header = ["t"] + [f"x{i + 1}" for i in range(n)]
    rows = [[t] + list(x) for t, x in zip(tr.t, tr.x)]
    doc = {"status": tr.status, "t": tr.t, "x": tr.x, "accepted": tr.accepted, "rejected": tr.rejected}
    if "exit_time" in tr.meta:
        doc["exit_time"] = tr.meta["exit_time"]
    doc.update(extra or {})
    failed = None
    if require and tr.status != COMPLETED:
        failed = f"integration ended with status {tr.status} at t={tr.meta.get('exit_time', tr.t[-1])}"
    return Result(doc, header, rows, failed)


# ---------------------------------------------------------------------------
# job preparation: every command resolves its references first so that
# `validate` can check them without running numerics


def _get(job, key, path, default=...):
    if key in job:
        return job[key]
    if default is ...:
        raise SceneError(f"{path}.{key}", "missing required field")
    return default


def _vec(v, path, n=None):
    try:
        a = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise SceneError(path, "expected a numeric vector") from None
    if a.ndim != 1 or (n is not None and a.shape[0] != n) or not np.all(np.isfinite(a)):
        raise SceneError(path, f"expected a finite vector" + (f" of length {n}" if n else ""))
    return a


def _mat(v, path, shape=None):
    try:
        a = np.asarray(v, dtype=float)
    except (TypeError, ValueError):
        raise SceneError(path, "expected a numeric matrix") from None
    if a.ndim != 2 or (shape is not None and a.shape != shape):
        raise SceneError(path, f"expected a matrix of shape {shape}")
    return a


def _span(v, path):
    s = _vec(v, path, 2)
    return float(s[0]), float(s[1])


def _linear(job, key, n1, n0, path):
    A = job.get(key, "identity")
    if A == "identity":
        if n1 != n0:
            raise SceneError(f"{path}.{key}", "identity needs equal dimensions")
        return np.eye(n0)
    return _mat(A, f"{path}.{key}", (n1, n0))


def prep_flow(sc: Scene, args):
    p = "$.flow"
    job = sc.job("flow")
    cof = sc.coframing(_get(job, "coframing", p), f"{p}.coframing")
    field = _get(job, "field", p)
    if all(isinstance(v, (int, float)) for v in field):
        field = _vec(field, f"{p}.field", cof.dim)
    elif len(field) != cof.dim:
        raise SceneError(f"{p}.field", f"expected {cof.dim} components")
    x0 = _vec(_get(job, "start", p), f"{p}.start", cof.dim)
    span = _span(_get(job, "t_span", p), f"{p}.t_span")
    require = bool(job.get("require_completion", False))
    return lambda: _trajectory_result(flow(cof, field, x0, span, args.tol), require=require)


def prep_develop(sc: Scene, args):
    p = "$.develop"
    job = sc.job("develop")
    span = _span(_get(job, "t_span", p), f"{p}.t_span")
    require = bool(job.get("require_completion", False))
    curve = sc.curve(_get(job, "curve", p), f"{p}.curve")
    if "gauges" in job:
        n0, n1 = _get(job, "gauges", p)
        g0 = sc.gauge(n0, f"{p}.gauges[0]")
        g1 = sc.gauge(n1, f"{p}.gauges[1]")
        phi = sc.morphism(_get(job, "morphism", p), f"{p}.morphism")
        if len(curve) != g0.dim:
            raise SceneError(f"{p}.curve", f"expected {g0.dim} components")
        x1 = _vec(_get(job, "start", p), f"{p}.start", g1.dim)
        m0, m1 = g0.model.g.ambient_size, g1.model.g.ambient_size
        h0 = _mat(job["frame0"], f"{p}.frame0", (m0, m0)) if "frame0" in job else None
        h1 = _mat(job["frame1"], f"{p}.frame1", (m1, m1)) if "frame1" in job else None

        def run():
            tr = develop_base_curve(g0, g1, phi, curve, (h0, x1, h1), span, args.tol)
            return _trajectory_result(tr, require=require)

        return run
    src = sc.coframing(_get(job, "source", p), f"{p}.source")
    tgt = sc.coframing(_get(job, "target", p), f"{p}.target")
    A = _linear(job, "A", tgt.dim, src.dim, p)
    x0 = _vec(_get(job, "start", p), f"{p}.start", tgt.dim)
    if len(curve) != src.dim:
        raise SceneError(f"{p}.curve", f"expected {src.dim} components")
    prob = DevelopmentProblem(src, tgt, A, curve, x0, span, args.tol)

    def run():
        tr = develop(prob)
        return _trajectory_result(tr, {"identity_residual": tr.meta["identity_residual"]}, require)

    return run


def prep_probe(sc: Scene, args):
    p = "$.probe"
    job = sc.job("probe")
    cof = sc.coframing(_get(job, "coframing", p), f"{p}.coframing")
    budget = dict(_get(job, "budget", p, {}))
    budget.setdefault("tol", args.tol)

    def run():
        res = completeness_probe(cof, budget, args.seed)
        doc = res.to_json()
        header = ["verdict", "kind", "exit_time", "status", "flows"]
        row = [doc["verdict"], doc.get("kind"), doc.get("exit_time"), doc.get("status"), doc.get("flows")]
        return Result(doc, header, [row])

    return run


def _tensor_rows(label_point, tensors):
    rows = []
    for j, T in enumerate(tensors):
        for idx in np.ndindex(T.shape):
            rows.append([label_point, j, ".".join(map(str, idx)), float(T[idx])])
    return rows


def _points(job, key, path, n):
    pts = _get(job, key, path)
    return [_vec(q, f"{path}.{key}[{i}]", n) for i, q in enumerate(pts)]


def prep_torsion(sc: Scene, args):
    p = "$.torsion"
    job = sc.job("torsion")
    cof = sc.coframing(_get(job, "coframing", p), f"{p}.coframing")
    pts = _points(job, "points", p, cof.dim)
    depth = int(job.get("depth", 0))

    def run():
        doc, rows = [], []
        for i, x in enumerate(pts):
            tw = torsion_tower(cof, x, depth)
            doc.append({"point": x, "tensors": tw.tensors})
            rows += _tensor_rows(i, tw.tensors)
        return Result({"points": doc}, ["point", "order", "index", "value"], rows)

    return run


def prep_hit(sc: Scene, args):
    p = "$.hit"
    job = sc.job("hit")
    c0 = sc.coframing(_get(job, "source", p), f"{p}.source")
    c1 = sc.coframing(_get(job, "target", p), f"{p}.target")
    A = _linear(job, "A", c1.dim, c0.dim, p)
    order = int(job.get("order", 2))
    tol = job.get("hit_tol")
    pairs = []
    for i, pr in enumerate(_get(job, "pairs", p)):
        pairs.append((_vec(pr[0], f"{p}.pairs[{i}][0]", c0.dim), _vec(pr[1], f"{p}.pairs[{i}][1]", c1.dim)))
    integ = job.get("integrate")

    def run():
        doc, rows = [], []
        for m0, m1 in pairs:
            ok, norms = hits_to_order(c0, c1, A, m0, m1, order, tol)
            doc.append({"m0": m0, "m1": m1, "orders": norms, "hits": ok})
            rows.append([" ".join(_cell(v) for v in m0), " ".join(_cell(v) for v in m1), ok] + norms)
        out = {"pairs": doc}
        if integ is not None:
            m0, m1 = pairs[0]
            G = integrate_morphism(c0, c1, A, m0, m1, float(integ.get("radius", 0.2)), args.tol, int(integ.get("k", 5)), tol)
            out["morphism"] = G.to_json()
        header = ["m0", "m1", "hits"] + [f"order{j}" for j in range(order + 1)]
        return Result(out, header, rows)

    return run


def prep_curvature(sc: Scene, args):
    p = "$.curvature"
    job = sc.job("curvature")
    g = sc.gauge(_get(job, "gauge", p), f"{p}.gauge")
    pts = _points(job, "points", p, g.dim)
    depth = int(job.get("depth", 0))

    def run():
        doc, rows = [], []
        for i, x in enumerate(pts):
            tw = curvature_tower(g, x, depth)
            doc.append({"point": x, "tensors": tw.tensors})
            rows += _tensor_rows(i, tw.tensors)
        return Result({"points": doc}, ["point", "order", "index", "value"], rows)

    return run


def prep_jacobi(sc: Scene, args):
    p = "$.jacobi"
    job = sc.job("jacobi")
    g = sc.gauge(_get(job, "gauge", p), f"{p}.gauge")
    m = g.model.g.ambient_size
    x1 = _vec(_get(job, "start", p), f"{p}.start", g.dim)
    frame = _mat(job["frame"], f"{p}.frame", (m, m)) if "frame" in job else None
    t_max = float(_get(job, "t_max", p))
    r = g.dim - 1
    a0 = _vec(job.get("a0", [0.0] * r + [1.0] * r), f"{p}.a0", 2 * r)

    def run():
        geo = projective_geodesic(g, x1, frame, t_max, args.tol)
        if geo.status != COMPLETED:
            raise NumericalError(f"geodesic ended with status {geo.status} before t_max")
        tr = projective_jacobi(g, geo, a0, args.tol)
        tc = conjugate_point(g, geo, t_max, args.tol)
        header = ["t"] + [f"a0_{i + 2}" for i in range(r)] + [f"a1_{i + 2}" for i in range(r)]
        rows = [[t] + list(a) for t, a in zip(tr.t, tr.x)]
        doc = {"status": tr.status, "t": tr.t, "a": tr.x, "conjugate_point": tc}
        return Result(doc, header, rows)

    return run


def _unit(S, p, u):
    """Rescale u to unit length in the surface metric at p."""
    u = np.asarray(u, dtype=float)
    return u / np.sqrt(u @ S.matrix(p) @ u)


def prep_roll(sc: Scene, args):
    p = "$.roll"
    job = sc.job("roll")
    s1, s2 = _get(job, "surfaces", p)
    S = sc.surface(s1, f"{p}.surfaces[0]")
    S2 = sc.surface(s2, f"{p}.surfaces[1]")
    k = int(job.get("samples", 3))
    ch = job.get("characteristic")

    def run():
        rs = rolling_space(S, S2)
        pts = config_samples(rs, k)
        ranks = [growth_ranks(rs, q) for q in pts]
        doc = {"points": pts, "ranks": ranks}
        rows = [list(q) + list(rk) for q, rk in zip(pts, ranks)]
        if ch is not None:
            data = (ch["p"], _unit(S, ch["p"], ch["u"]), ch["p2"], _unit(S2, ch["p2"], ch["u2"]), ch.get("ratio", 1.0))
            res = characteristic_curve(rs, data, _span(ch["t_span"], f"{p}.characteristic.t_span"), args.tol)
            doc["characteristic"] = {
                "status": res.trajectory.status,
                "tangency_residual": res.tangency_residual,
                "geodesic_residuals": res.geodesic_residuals,
                "end": res.trajectory.x[-1],
            }
        header = ["x", "y", "x2", "y2", "psi", "rank1", "rank2", "rank3"]
        return Result(doc, header, rows)

    return run


PREPARE = {
    "flow": prep_flow,
    "develop": prep_develop,
    "probe": prep_probe,
    "torsion": prep_torsion,
    "hit": prep_hit,
    "curvature": prep_curvature,
    "jacobi": prep_jacobi,
    "roll": prep_roll,
}


def run_lens(args):
    rows = L.survey(args.qmax)
    doc = {
        "rows": [
            {
                "p1": r.action.p1, "q1": r.action.q1, "p2": r.action.p2, "q2": r.action.q2,
                "formula_p1": r.formula_p1, "formula_p2": r.formula_p2,
                "oracle_p1": r.oracle_p1, "oracle_p2": r.oracle_p2, "agree": r.agree, "flag": r.flag,
            }
            for r in rows
        ]
    }
    table = [[d[c] for c in L.CSV_COLUMNS] for d in doc["rows"]]
    return Result(doc, list(L.CSV_COLUMNS), table)


def run_validate(sc: Scene, args):
    checked = []
    sc.validate()
    for cmd, prep in PREPARE.items():
        if cmd in sc.data:
            prep(sc, args)
            checked.append(cmd)
    return Result({"valid": True, "scene": sc.source, "jobs": checked}, ["valid", "jobs"], [[True, " ".join(checked)]])


# ---------------------------------------------------------------------------


def build_parser():
    ap = _Parser(prog="cartankit", description="Numerical Cartan geometry on coordinate charts.")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for cmd in list(PREPARE) + ["validate"]:
        sp = sub.add_parser(cmd)
        sp.add_argument("--scene", required=True)
        sp.add_argument("--out")
        sp.add_argument("--tol", type=float, default=1e-8)
        sp.add_argument("--seed", type=int, default=0)
    sp = sub.add_parser("lens")
    sp.add_argument("--qmax", type=int, default=7)
    sp.add_argument("--out")
    sp.add_argument("--tol", type=float, default=1e-8)
    sp.add_argument("--seed", type=int, default=0)
    return ap


def _emit(result: Result, out):
    if out is None:
        sys.stdout.write(to_json(result.doc))
        return
    path = Path(out)
    ext = path.suffix.lower()
    if ext == ".csv":
        text = to_csv(result.header, result.rows)
    elif ext == ".json":
        text = to_json(result.doc)
    else:
        raise UsageError(f"--out must end in .csv or .json, got {out!r}")
    path.write_text(text)


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.tol <= 0 or not np.isfinite(args.tol):
            raise UsageError("--tol must be positive")
        if args.out is not None and Path(args.out).suffix.lower() not in (".csv", ".json"):
            raise UsageError(f"--out must end in .csv or .json, got {args.out!r}")
        if args.command == "lens":
            result = run_lens(args)
        else:
            sc = Scene.load(args.scene)
            if args.command == "validate":
                result = run_validate(sc, args)
            else:
                result = PREPARE[args.command](sc, args)()
        _emit(result, args.out)
        if result.failed:
            print(f"error: {result.failed}", file=sys.stderr)
            return EXIT_NUMERICAL
        return EXIT_OK
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except CartanKitError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
