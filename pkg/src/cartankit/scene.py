"""JSON scene files: named geometries plus per-command job blocks."""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from . import algebra as A
from . import catalog
from .cartan import CartanGauge, disguise, euclidean_gauge, maurer_cartan_gauge
from .coframing import Chart, Coframing, maurer_cartan
from .errors import CartanKitError, ValidationError
from .rolling import SurfaceMetric

SECTIONS = ("surfaces", "models", "morphisms", "coframings", "gauges", "curves")
COMMANDS = ("flow", "develop", "probe", "torsion", "hit", "curvature", "jacobi", "roll")


class SceneError(ValidationError):
    def __init__(self, path, message):
        self.path = path
        super().__init__(f"{path}: {message}")


def _box(v, path):
    if v is None:
        return None
    try:
        return [(float(lo), float(hi)) for lo, hi in v]
    except (TypeError, ValueError) as exc:
        raise SceneError(path, f"bad box: {exc}") from None


_COFRAMING_BUILTINS = {
    "flat": lambda d: catalog.flat(int(d.get("n", 2)), d.get("box")),
    "sin-example": lambda d: catalog.sin_example(d.get("box")),
    "parabola": lambda d: catalog.parabola(d.get("box")),
    "radial": lambda d: catalog.radial(d.get("box")),
}

_SURFACE_BUILTINS = {
    "plane": lambda d: catalog.plane(d.get("box")),
    "round-sphere": lambda d: catalog.round_sphere(float(d.get("radius", 1.0)), d.get("box")),
    "hemisphere": lambda d: catalog.hemisphere(),
    "cone": lambda d: catalog.cone_metric(float(d["beta"]), d.get("box")),
}


class Scene:
    """Resolved scene: every named object is built eagerly so references fail fast."""

    def __init__(self, data: dict, source: str = "<scene>"):
        if not isinstance(data, dict):
            raise SceneError("$", "scene must be a JSON object")
        unknown = set(data) - set(SECTIONS) - set(COMMANDS) - {"defaults", "description"}
        if unknown:
            raise SceneError("$", f"unknown top-level keys {sorted(unknown)}")
        self.data = data
        self.source = source
        self.defaults = dict(data.get("defaults", {}))
        names = {}
        for sec in SECTIONS:
            for nm in data.get(sec, {}):
                if nm in names:
                    raise SceneError(f"$.{sec}.{nm}", f"name already used in {names[nm]}")
                names[nm] = sec
        self.coframings = {}
        self.surfaces = {}
        self.models = {}
        self.morphisms = {}
        self.gauges = {}
        self.curves = {}
        for sec in SECTIONS:
            for nm, spec in data.get(sec, {}).items():
                path = f"$.{sec}.{nm}"
                try:
                    getattr(self, f"_build_{sec}")(nm, spec, path)
                except SceneError:
                    raise
                except CartanKitError as exc:
                    raise SceneError(path, str(exc)) from None
                except (KeyError, TypeError, ValueError) as exc:
                    raise SceneError(path, f"malformed entry ({type(exc).__name__}: {exc})") from None

    @staticmethod
    def load(path) -> "Scene":
        p = Path(path)
        try:
            text = p.read_text()
        except OSError as exc:
            raise SceneError("$", f"cannot read {path}: {exc.strerror}") from None
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise SceneError("$", f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
        return Scene(data, str(p))

    # builders ----------------------------------------------------------------

    def _build_coframings(self, nm, d, path):
        if "builtin" in d:
            kind = d["builtin"]
            if kind == "maurer-cartan":
                model = self.model(d["model"], f"{path}.model")
                self.coframings[nm] = maurer_cartan(model.g, _box(d.get("box"), f"{path}.box"), name=nm)
                return
            if kind == "frame-bundle":
                from .rolling import frame_bundle_coframing

                self.coframings[nm] = frame_bundle_coframing(self.surface(d["surface"], f"{path}.surface"))
                return
            if kind not in _COFRAMING_BUILTINS:
                raise SceneError(f"{path}.builtin", f"unknown builtin {kind!r}; known: {sorted(_COFRAMING_BUILTINS) + ['frame-bundle', 'maurer-cartan']}")
            d = dict(d, box=_box(d.get("box"), f"{path}.box"))
            self.coframings[nm] = _COFRAMING_BUILTINS[kind](d)
        else:
            self.coframings[nm] = Coframing.from_json(d, nm)

    def _build_surfaces(self, nm, d, path):
        if "builtin" in d:
            kind = d["builtin"]
            if kind not in _SURFACE_BUILTINS:
                raise SceneError(f"{path}.builtin", f"unknown builtin {kind!r}; known: {sorted(_SURFACE_BUILTINS)}")
            d = dict(d, box=_box(d.get("box"), f"{path}.box"))
            self.surfaces[nm] = _SURFACE_BUILTINS[kind](d)
        else:
            self.surfaces[nm] = SurfaceMetric.from_json(d, nm)

    def _build_models(self, nm, d, path):
        if isinstance(d, str):
            self.models[nm] = A.builtin_model(d)
            return
        basis = np.array(d["basis"], dtype=float)
        alg = A.MatrixLieAlgebra(nm, basis).validate()
        self.models[nm] = A.LocalModel(nm, alg, int(d["h_dim"])).validate()

    def _build_morphisms(self, nm, d, path):
        if "builtin" in d:
            kind = d["builtin"]
            if kind != "affine-to-projective":
                raise SceneError(f"{path}.builtin", f"unknown builtin {kind!r}")
            phi = A.affine_to_projective(int(d.get("n", 2)))
        elif "identity" in d:
            phi = A.identity_morphism(self.model(d["identity"], f"{path}.identity"))
        elif "inclusion" in d:
            s, t = d["inclusion"]
            phi = A.inclusion(self.model(s, f"{path}.inclusion[0]"), self.model(t, f"{path}.inclusion[1]"))
        elif "matched" in d:
            s, t = d["matched"]
            phi = A.matched_basis(self.model(s, f"{path}.matched[0]"), self.model(t, f"{path}.matched[1]"))
        elif "compose" in d:
            chain = [self.morphism(m, f"{path}.compose[{i}]") for i, m in enumerate(d["compose"])]
            # listed outermost first
            phi = chain[-1]
            for outer in reversed(chain[:-1]):
                phi = outer.compose(phi)
        elif "matrix" in d:
            phi = A.ModelMorphism(
                self.model(d["source"], f"{path}.source"),
                self.model(d["target"], f"{path}.target"),
                np.array(d["matrix"], dtype=float),
                name=nm,
            )
        else:
            raise SceneError(path, "morphism needs one of builtin, identity, inclusion, matched, compose, matrix")
        self.morphisms[nm] = phi.validate()

    def _build_gauges(self, nm, d, path):
        if "surface" in d:
            g = euclidean_gauge(self.surface(d["surface"], f"{path}.surface"))
        elif "maurer_cartan" in d:
            g = maurer_cartan_gauge(self.model(d["maurer_cartan"], f"{path}.maurer_cartan"), _box(d.get("box"), f"{path}.box"))
        else:
            model = self.model(d["model"], f"{path}.model")
            g = CartanGauge(model, Chart.from_json(d["chart"]), d["gamma"], nm)
        for i, m in enumerate(d.get("disguise", [])):
            g = disguise(g, self.morphism(m, f"{path}.disguise[{i}]"))
        self.gauges[nm] = g

    def _build_curves(self, nm, d, path):
        from . import expr as E

        if not isinstance(d, list) or not d:
            raise SceneError(path, "curve must be a non-empty list of expressions in t")
        self.curves[nm] = [E.as_expr(c, {"t"}) for c in d]

    # lookups -------------------------------------------------------------------

    def _lookup(self, table, kind, ref, path):
        if ref not in table:
            raise SceneError(path, f"unknown {kind} {ref!r}")
        return table[ref]

    def coframing(self, ref, path):
        return self._lookup(self.coframings, "coframing", ref, path)

    def surface(self, ref, path):
        return self._lookup(self.surfaces, "surface", ref, path)

    def morphism(self, ref, path):
        return self._lookup(self.morphisms, "morphism", ref, path)

    def gauge(self, ref, path):
        return self._lookup(self.gauges, "gauge", ref, path)

    def model(self, ref, path):
        if ref in self.models:
            return self.models[ref]
        try:
            return A.builtin_model(ref)
        except CartanKitError as exc:
            raise SceneError(path, str(exc)) from None

    def curve(self, ref, path):
        if isinstance(ref, list):
            from . import expr as E

            return [E.as_expr(c, {"t"}) for c in ref]
        return self._lookup(self.curves, "curve", ref, path)

    def job(self, command):
        if command not in self.data:
            raise SceneError("$", f"scene has no {command!r} block")
        return self.data[command]

    def validate(self):
        """Structural checks of every geometry (sample-grid determinants, metric definiteness)."""
        for nm, c in self.coframings.items():
            try:
                c.validate()
            except CartanKitError as exc:
                raise SceneError(f"$.coframings.{nm}", str(exc)) from None
        for nm, s in self.surfaces.items():
            try:
                s.validate()
            except CartanKitError as exc:
                raise SceneError(f"$.surfaces.{nm}", str(exc)) from None
        for nm, g in self.gauges.items():
            try:
                g.validate()
            except CartanKitError as exc:
                raise SceneError(f"$.gauges.{nm}", str(exc)) from None
        for cmd in COMMANDS:
            if cmd in self.data and not isinstance(self.data[cmd], dict):
                raise SceneError(f"$.{cmd}", "job block must be an object")
        return self
