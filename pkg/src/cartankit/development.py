"""A-development of curves, loop monodromy and completeness probing."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.interpolate
from scipy.stats import qmc

from . import expr as E
from .coframing import Coframing, _driver, _solve, flow
from .errors import ValidationError
from .integrate import BLOW_UP, CHART_EXIT, COMPLETED, Trajectory, integrate


class CurveSource:
    """Position and velocity of a source curve, from Exprs of t or from samples."""

    def __init__(self, curve):
        if isinstance(curve, Trajectory):
            t, x = curve.t, curve.x
            if t[-1] < t[0]:
                t, x = t[::-1], x[::-1]
            dx = curve.dx if curve.t[-1] >= curve.t[0] else curve.dx[::-1]
            # the samples carry exact velocities, so use them as Hermite data
            self._pos = scipy.interpolate.CubicHermiteSpline(t, x, dx, axis=0)
            self._vel = self._pos.derivative()
            self.exprs = None
        else:
            self.exprs = [E.as_expr(c, {"t"}) for c in curve]
            self._p = E.Compiled(self.exprs, ("t",))
            self._v = E.Compiled([E.diff(c, "t") for c in self.exprs], ("t",))
            self._pos = lambda t: np.array(self._p([t]))
            self._vel = lambda t: np.array(self._v([t]))

    def position(self, t):
        return np.asarray(self._pos(t), dtype=float)

    def velocity(self, t):
        return np.asarray(self._vel(t), dtype=float)


@dataclass
class DevelopmentProblem:
    source: Coframing
    target: Coframing
    A: np.ndarray
    curve: object
    start: np.ndarray
    t_span: tuple
    tol: float = 1e-8

    def __post_init__(self):
        self.A = np.asarray(self.A, dtype=float).reshape(self.target.dim, self.source.dim)
        if not np.all(np.isfinite(self.A)):
            raise ValidationError("A must have finite entries")
        self.start = np.asarray(self.start, dtype=float)
        if not self.target.chart.contains(self.start):
            raise ValidationError("start point is outside the target chart")


def source_driver(p: DevelopmentProblem):
    """f(t) = omega_0(curve'(t)), the V_0-valued velocity of the source curve."""
    c = CurveSource(p.curve)
    cof = p.source

    def f(t):
        return cof.matrix(c.position(t)) @ c.velocity(t)

    return f


def develop(p: DevelopmentProblem, immersed: bool = False) -> Trajectory:
    """Flow of the time-dependent constant field A f(t) on the target from ``start``.

    With ``immersed`` the driver is first certified nowhere zero on a sample
    of times; the computation itself is unchanged.
    """
    f = source_driver(p)
    if immersed:
        ts = np.linspace(p.t_span[0], p.t_span[1], 257)
        low = min(float(np.linalg.norm(f(t))) for t in ts)
        if low < 1e-6:
            raise ValidationError(f"driver speed {low:.3g} vanishes; curve is not immersed")
    A = p.A
    tr = flow(p.target, lambda t: A @ f(t), p.start, p.t_span, p.tol)
    res = 0.0
    for t, x, dx in zip(tr.t, tr.x, tr.dx):
        if p.target.chart.contains(x):
            res = max(res, float(np.linalg.norm(p.target.matrix(x) @ dx - A @ f(t))))
    tr.meta["identity_residual"] = res
    return tr


@dataclass
class MonodromyResult:
    start: np.ndarray
    end: np.ndarray
    displacement: np.ndarray
    closed: bool
    status: str
    group_element: np.ndarray | None = None
    trajectory: Trajectory | None = field(default=None, repr=False)

    @property
    def rotation_angle(self):
        """Rotation angle of the planar part of the group element, if present."""
        if self.group_element is None:
            return None
        g = self.group_element
        return float(np.arctan2(g[1, 0], g[0, 0]))


def monodromy(p: DevelopmentProblem, group_element=None) -> MonodromyResult:
    """Develop once around a closed source curve.

    ``group_element`` maps target points to ambient matrices (frame-bundle
    targets); the monodromy element is then g_end g_start^{-1}.
    """
    c = CurveSource(p.curve)
    a, b = p.t_span
    gap = float(np.linalg.norm(c.position(a) - c.position(b)))
    if gap > 1e-10:
        raise ValidationError(f"source curve is not closed (gap {gap:.3g})")
    tr = develop(p)
    disp = tr.end - p.start
    closed = tr.status == COMPLETED and float(np.linalg.norm(disp)) <= 10 * p.tol
    g = None
    if group_element is not None and tr.status == COMPLETED:
        g = group_element(tr.end) @ np.linalg.inv(group_element(p.start))
    return MonodromyResult(p.start, tr.end, disp, closed, tr.status, g, tr)


def se2_element(point):
    """Ambient matrix of a point (x, y, theta) of the Euclidean frame bundle."""
    x, y, th = point
    c, s = np.cos(th), np.sin(th)
    return np.array([[c, s, x], [-s, c, y], [0.0, 0.0, 1.0]])


# ---------------------------------------------------------------------------
# Completeness probing


@dataclass
class EscapeWitness:
    kind: str  # constant | piecewise | driver
    field: object
    start: np.ndarray
    exit_time: float
    status: str

    found = True

    def to_json(self):
        fld = self.field
        if isinstance(fld, np.ndarray):
            fld = fld.tolist()
        elif isinstance(fld, (list, tuple)):
            fld = [f.tolist() if isinstance(f, np.ndarray) else f for f in fld]
        return {
            "verdict": "escape-witness",
            "kind": self.kind,
            "field": fld,
            "start": self.start.tolist(),
            "exit_time": self.exit_time,
            "status": self.status,
        }


@dataclass
class NoEscapeFound:
    flows: int
    t_max: float

    found = False

    def to_json(self):
        return {"verdict": "no-escape-found", "flows": self.flows, "t_max": self.t_max}


def probe_directions(n, count, seed=0):
    """Signed coordinate axes first, then scrambled-free Halton directions."""
    dirs = []
    for k in range(n):
        for s in (1.0, -1.0):
            e = np.zeros(n)
            e[k] = s
            dirs.append(e)
    if count > len(dirs):
        h = qmc.Halton(d=n, scramble=False)
        h.fast_forward(1 + seed)
        while len(dirs) < count:
            u = 2.0 * h.random(1)[0] - 1.0
            nu = np.linalg.norm(u)
            if nu > 1e-3:
                dirs.append(u / nu)
    return dirs[:count]


def probe_starts(cof: Coframing, count, box=None, seed=0):
    if box is None:
        box = [(max(lo, -1.0), min(hi, 1.0)) for lo, hi in cof.chart.box]
    lo = np.array([b[0] for b in box])
    hi = np.array([b[1] for b in box])
    out = []
    center = 0.5 * (lo + hi)
    if cof.chart.contains(center):
        out.append(center)
    h = qmc.Halton(d=cof.dim, scramble=False)
    h.fast_forward(1 + seed)
    tries = 0
    while len(out) < count and tries < 100 * count:
        p = lo + (hi - lo) * h.random(1)[0]
        tries += 1
        if cof.chart.contains(p):
            out.append(p)
    return out


def _piecewise(d1, d2, switch):
    return lambda t: d1 if t < switch else d2


def completeness_probe(cof: Coframing, budget: dict, seed: int = 0):
    """Flow a deterministic family of fields looking for finite-time escape.

    The family is: constant fields along ``n_directions`` directions,
    two-piece fields switching between consecutive directions at t_max/2, and
    any ``drivers`` (lists of Exprs of t) supplied in the budget.
    """
    nd = int(budget.get("n_directions", 2 * cof.dim))
    ns = int(budget.get("n_starts", 1))
    t_max = float(budget.get("t_max", 10.0))
    tol = float(budget.get("tol", 1e-8))
    if nd <= 0 or ns <= 0 or t_max <= 0 or tol <= 0:
        raise ValidationError("budget entries must be positive")
    dirs = probe_directions(cof.dim, nd, seed)
    starts = probe_starts(cof, ns, budget.get("start_box"), seed)
    fields = [("constant", d, d) for d in dirs]
    if budget.get("piecewise", True) and len(dirs) > 1:
        for i in range(len(dirs)):
            d1, d2 = dirs[i], dirs[(i + 1) % len(dirs)]
            fields.append(("piecewise", (d1, d2), _piecewise(d1, d2, 0.5 * t_max)))
    for drv in budget.get("drivers", []):
        fields.append(("driver", list(drv), _driver(drv, cof.dim)))
    count = 0
    for x0 in starts:
        for kind, label, f in fields:
            tr = flow(cof, f, x0, (0.0, t_max), tol)
            count += 1
            if tr.status in (CHART_EXIT, BLOW_UP):
                return EscapeWitness(kind, label, np.asarray(x0), float(tr.meta["exit_time"]), tr.status)
    return NoEscapeFound(count, t_max)
