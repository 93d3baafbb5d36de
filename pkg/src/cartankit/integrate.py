"""Adaptive Dormand-Prince 5(4) integration with chart-exit and blow-up detection."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError

COMPLETED = "completed"
CHART_EXIT = "chart-exit"
BLOW_UP = "blow-up"
STEP_UNDERFLOW = "step-underflow"

_B = np.array([35 / 384, 0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0])
_B4 = np.array([5179 / 57600, 0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B - _B4


@dataclass
class Trajectory:
    """Time-sampled curve with integrator metadata."""

    t: np.ndarray
    x: np.ndarray
    dx: np.ndarray
    status: str = COMPLETED
    accepted: int = 0
    rejected: int = 0
    steps: np.ndarray = field(default_factory=lambda: np.zeros(0))
    errors: np.ndarray = field(default_factory=lambda: np.zeros(0))
    meta: dict = field(default_factory=dict)

    @property
    def end_time(self) -> float:
        return float(self.t[-1])

    @property
    def end(self) -> np.ndarray:
        return self.x[-1]

    def __call__(self, s):
        """Cubic Hermite interpolation between samples."""
        t, x, dx = self.t, self.x, self.dx
        s = float(s)
        if t[-1] < t[0]:
            t, x, dx = t[::-1], x[::-1], dx[::-1]
        i = int(np.clip(np.searchsorted(t, s) - 1, 0, len(t) - 2)) if len(t) > 1 else 0
        if len(t) == 1:
            return x[0].copy()
        h = t[i + 1] - t[i]
        u = (s - t[i]) / h
        h00 = 2 * u**3 - 3 * u**2 + 1
        h10 = u**3 - 2 * u**2 + u
        h01 = -2 * u**3 + 3 * u**2
        h11 = u**3 - u**2
        return h00 * x[i] + h10 * h * dx[i] + h01 * x[i + 1] + h11 * h * dx[i + 1]


def _step(f, t, x, h, k0):
    k1 = k0
    k2 = f(t + h / 5, x + h * (k1 / 5))
    k3 = f(t + 3 * h / 10, x + h * (3 / 40 * k1 + 9 / 40 * k2))
    k4 = f(t + 4 * h / 5, x + h * (44 / 45 * k1 - 56 / 15 * k2 + 32 / 9 * k3))
    k5 = f(t + 8 * h / 9, x + h * (19372 / 6561 * k1 - 25360 / 2187 * k2 + 64448 / 6561 * k3 - 212 / 729 * k4))
    k6 = f(
        t + h,
        x + h * (9017 / 3168 * k1 - 355 / 33 * k2 + 46732 / 5247 * k3 + 49 / 176 * k4 - 5103 / 18656 * k5),
    )
    xn = x + h * (35 / 384 * k1 + 500 / 1113 * k3 + 125 / 192 * k4 - 2187 / 6784 * k5 + 11 / 84 * k6)
    k7 = f(t + h, xn)
    err = h * (
        _E[0] * k1 + _E[2] * k3 + _E[3] * k4 + _E[4] * k5 + _E[5] * k6 + _E[6] * k7
    )
    return xn, err, k7


def _err_norm(err, x, xn, rtol, atol):
    sc = atol + rtol * np.maximum(np.abs(x), np.abs(xn))
    r = err / sc
    return float(np.sqrt(r.dot(r) / r.size))


def integrate(
    f,
    t0: float,
    x0,
    t1: float,
    rtol: float = 1e-8,
    atol: float = 1e-8,
    inside=None,
    max_steps: int = 1_000_000,
    blowup_norm: float = 1e8,
    event_tol: float | None = None,
) -> Trajectory:
    """Integrate x' = f(t, x) from t0 to t1.

    ``inside`` is a predicate on states; leaving it stops the integration with
    status ``chart-exit`` at a bisected exit time.  Failing right-hand sides
    (domain errors) are treated as leaving the domain.
    """
    x = np.array(x0, dtype=float)
    span = abs(t1 - t0)
    direction = 1.0 if t1 >= t0 else -1.0
    ts, xs, dxs, hs, es = [t0], [x.copy()], [], [], []
    accepted = rejected = 0
    if inside is not None and not inside(x):
        k0 = np.zeros_like(x)
        return Trajectory(np.array(ts), np.array(xs), np.array([k0]), CHART_EXIT, meta={"exit_time": t0})
    if span == 0:
        k0 = np.asarray(f(t0, x), dtype=float)
        return Trajectory(np.array(ts), np.array(xs), np.array([k0]), COMPLETED)
    k0 = np.asarray(f(t0, x), dtype=float)
    dxs.append(k0)
    t = t0
    scale = atol + rtol * np.abs(x)
    d0 = np.sqrt(np.mean((x / scale) ** 2))
    d1 = np.sqrt(np.mean((k0 / scale) ** 2))
    h = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h = min(h, span)
    hmin = 1e-12 * span
    etol = event_tol if event_tol is not None else 1e-12 * max(1.0, span)
    status = COMPLETED
    meta = {}
    failed_domain = False

    def trial(hh):
        xn, err, k6 = _step(f, t, x, direction * hh, k0)
        if not np.all(np.isfinite(xn)) or not np.all(np.isfinite(err)):
            raise FloatingPointError
        return xn, err, k6

    while True:
        if accepted >= max_steps:
            raise NumericalError(f"exceeded {max_steps} steps at t={t}")
        remaining = abs(t1 - t)
        last = h >= remaining
        if last:
            h = remaining
        try:
            xn, err, k6 = trial(h)
            en = _err_norm(err, x, xn, rtol, atol)
            failed_domain = False
        except (NumericalError, FloatingPointError, ArithmeticError, np.linalg.LinAlgError):
            en = np.inf
            failed_domain = True
        if en <= 1.0:
            tn = t1 if last else t + direction * h
            if inside is not None and not inside(xn):
                # bisect on the step size from the last accepted state
                lo, hi = 0.0, h
                while hi - lo > etol:
                    mid = 0.5 * (lo + hi)
                    try:
                        xm, _, _ = trial(mid)
                        ok = inside(xm)
                    except (NumericalError, FloatingPointError, ArithmeticError, np.linalg.LinAlgError):
                        ok = False
                    if ok:
                        lo = mid
                    else:
                        hi = mid
                if lo > 0:
                    xm, _, km = trial(lo)
                    t = t + direction * lo
                    ts.append(t)
                    xs.append(xm)
                    dxs.append(km)
                    hs.append(lo)
                    es.append(0.0)
                status = CHART_EXIT
                meta["exit_time"] = t + direction * 0.5 * (hi - lo)
                break
            t, x, k0 = tn, xn, k6
            accepted += 1
            ts.append(t)
            xs.append(x.copy())
            dxs.append(k0)
            hs.append(h)
            es.append(en)
            if last:
                break
            fac = 5.0 if en == 0 else min(5.0, max(0.2, 0.9 * en ** (-0.2)))
            h = h * fac
        else:
            rejected += 1
            fac = 0.25 if not np.isfinite(en) else max(0.2, 0.9 * en ** (-0.2))
            h = h * fac
        if h < hmin:
            norm = float(np.max(np.abs(x)))
            if norm > blowup_norm:
                status = BLOW_UP
            elif failed_domain:
                status = CHART_EXIT
            else:
                status = STEP_UNDERFLOW
            meta["exit_time"] = t
            break
    traj = Trajectory(
        np.array(ts),
        np.array(xs),
        np.array(dxs),
        status,
        accepted,
        rejected,
        np.array(hs),
        np.array(es),
        meta,
    )
    return traj
