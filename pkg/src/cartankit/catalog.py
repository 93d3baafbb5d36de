"""Worked-example geometries used by the scenes and the tests."""
from __future__ import annotations

import numpy as np

from .coframing import Chart, Coframing

INF = float("inf")


def flat(n=2, box=None) -> Coframing:
    box = box or [(-INF, INF)] * n
    return Coframing(Chart(tuple(box)), [["1" if i == j else "0" for j in range(n)] for i in range(n)], name="flat")


def sin_example(box=None) -> Coframing:
    """omega = (dx1 / (2 + sin(x1^2 x2)), dx2), complete with bounded dilation."""
    box = box or [(-INF, INF)] * 2
    return Coframing(Chart(tuple(box)), [["1/(2 + sin(x1^2*x2))", "0"], ["0", "1"]], name="sin-example")


PARABOLA_WEIGHT = "1 + (sqrt(1 + 4*x1^2)*(1 + x1^2) - 1)*exp(-(x2 - x1^2)^2)"


def parabola(box=None) -> Coframing:
    """omega = (dx1, dx2)/W with W large along x2 = x1^2.

    On the parabola W = sqrt(1+4x^2)(1+x^2), so the unit constant flow along
    it reaches infinity at time int dx/(1+x^2) = pi/2.
    """
    box = box or [(-INF, INF)] * 2
    w = PARABOLA_WEIGHT
    return Coframing(Chart(tuple(box)), [[f"1/({w})", "0"], ["0", f"1/({w})"]], name="parabola")


PARABOLA_DRIVER = ["1/sqrt(1 + 4*tan(t)^2)", "2*tan(t)/sqrt(1 + 4*tan(t)^2)"]


def parabola_weight(x1, x2):
    return 1 + (np.sqrt(1 + 4 * x1**2) * (1 + x1**2) - 1) * np.exp(-((x2 - x1**2) ** 2))


def radial(box=None, scale="1/(1 + x1^2 + x2^2)") -> Coframing:
    """Rotation-invariant coframing s(r^2) (r dr, r^2 dphi) away from the origin."""
    box = box or [(0.5, 2.0), (0.5, 2.0)]
    s = scale
    return Coframing(
        Chart(tuple(box)),
        [[f"({s})*x1", f"({s})*x2"], [f"-({s})*x2", f"({s})*x1"]],
        name="radial",
    )


def cone_metric(beta: float, box=None):
    """Flat cone of angle 2 pi beta on the punctured plane, as (E, F, G)."""
    from .rolling import SurfaceMetric

    b2 = float(beta) ** 2
    r2 = "(x1^2 + x2^2)"
    E = f"(x1^2 + {b2!r}*x2^2)/{r2}"
    F = f"(1 - {b2!r})*x1*x2/{r2}"
    G = f"(x2^2 + {b2!r}*x1^2)/{r2}"
    box = box or [(-2.0, 2.0), (-2.0, 2.0)]
    return SurfaceMetric(Chart(tuple(box), inside=f"x1^2 + x2^2 - 0.0625"), E, F, G, name=f"cone({beta})")


def round_sphere(radius: float = 1.0, box=None):
    """Geodesic polar coordinates (x1 = arc length from the pole, x2 = azimuth)."""
    from .rolling import SurfaceMetric

    r = float(radius)
    box = box or [(1e-3 * r, (np.pi - 1e-3) * r), (-INF, INF)]
    return SurfaceMetric(Chart(tuple(box)), "1", "0", f"{r * r!r}*sin(x1/{r!r})^2", name=f"sphere({radius})")


def hemisphere():
    """Open upper hemisphere z > 0 as the box (0, pi) x (0, pi) with pole on the x-axis."""
    from .rolling import SurfaceMetric

    return SurfaceMetric(Chart(((0.0, np.pi), (0.0, np.pi))), "1", "0", "sin(x1)^2", name="hemisphere")


def hemisphere_point(p):
    a, b = p[0], p[1]
    return np.array([np.cos(a), np.sin(a) * np.cos(b), np.sin(a) * np.sin(b)])


def plane(box=None):
    from .rolling import SurfaceMetric

    box = box or [(-INF, INF)] * 2
    return SurfaceMetric(Chart(tuple(box)), "1", "0", "1", name="plane")


def sphere_point(p, radius=1.0):
    """Embedding of geodesic polar coordinates into R^3."""
    s, phi = p[0] / radius, p[1]
    return radius * np.array([np.sin(s) * np.cos(phi), np.sin(s) * np.sin(phi), np.cos(s)])
