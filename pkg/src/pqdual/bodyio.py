"""JSON descriptions of bodies and discrete measures.

Body schema (``"dimension"`` is optional wherever the dimension cannot be
read off the data; it defaults to 2)::

    {"type": "ball", "radius": r}
    {"type": "ellipsoid", "semiaxes": [...]}
    {"type": "polytope-h", "normals": [[...]], "support": [...]}
    {"type": "polytope-v", "vertices": [[...]]}
    {"type": "linear", "matrix": [[...]], "inner": {...}}
    {"type": "polar", "inner": {...}}
    {"type": "star-union", "a": {...}, "b": {...}}
    {"type": "star-intersection", "a": {...}, "b": {...}}
    {"type": "radial-scale", "factor": lam, "inner": {...}}
    {"type": "slab", "alpha": a}
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .errors import GeometryError, MeasureError, ParseError
from .geometry import (
    Ball,
    Ellipsoid,
    HPolytope,
    LinearImage,
    Polar,
    PolytopeV,
    RadialScale,
    SlabBody,
    StarIntersection,
    StarUnion,
)
from .measures import DiscreteSphericalMeasure

BODY_TYPES = ("ball", "ellipsoid", "polytope-h", "polytope-v", "linear", "polar",
              "star-union", "star-intersection", "radial-scale", "slab")


def _field(spec, key, where):
    if key not in spec:
        raise ParseError(f"{where}: missing field {key!r}")
    return spec[key]


def _array(value, where, ndim):
    try:
        arr = np.asarray(value, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ParseError(f"{where}: not a numeric array ({exc})") from None
    if arr.ndim != ndim:
        raise ParseError(f"{where}: expected a {ndim}-d array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ParseError(f"{where}: non-finite entries")
    return arr


def _number(value, where):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ParseError(f"{where}: expected a number, got {value!r}")
    return float(value)


def body_from_spec(spec, where="body"):
    """Build a body from its JSON mapping; ``where`` prefixes error messages."""
    if not isinstance(spec, dict):
        raise ParseError(f"{where}: expected an object")
    kind = _field(spec, "type", where)
    dim = int(spec.get("dimension", 2))
    try:
        if kind == "ball":
            return Ball(_number(spec.get("radius", 1.0), f"{where}.radius"), dim)
        if kind == "ellipsoid":
            return Ellipsoid(_array(_field(spec, "semiaxes", where), f"{where}.semiaxes", 1))
        if kind == "polytope-h":
            V = _array(_field(spec, "normals", where), f"{where}.normals", 2)
            h = _array(_field(spec, "support", where), f"{where}.support", 1)
            if len(V) != len(h):
                raise ParseError(f"{where}: {len(V)} normals but {len(h)} support numbers")
            return HPolytope(V, h)
        if kind == "polytope-v":
            return PolytopeV(_array(_field(spec, "vertices", where), f"{where}.vertices", 2))
        if kind == "linear":
            A = _array(_field(spec, "matrix", where), f"{where}.matrix", 2)
            return LinearImage(A, body_from_spec(_field(spec, "inner", where), f"{where}.inner"))
        if kind == "polar":
            return Polar(body_from_spec(_field(spec, "inner", where), f"{where}.inner"))
        if kind in ("star-union", "star-intersection"):
            a = body_from_spec(_field(spec, "a", where), f"{where}.a")
            b = body_from_spec(_field(spec, "b", where), f"{where}.b")
            return (StarUnion if kind == "star-union" else StarIntersection)(a, b)
        if kind == "radial-scale":
            lam = _number(_field(spec, "factor", where), f"{where}.factor")
            return RadialScale(lam, body_from_spec(_field(spec, "inner", where), f"{where}.inner"))
        if kind == "slab":
            return SlabBody(_number(_field(spec, "alpha", where), f"{where}.alpha"), dim)
    except ParseError:
        raise
    except GeometryError as exc:
        raise type(exc)(f"{where}: {exc}") from None
    except ValueError as exc:
        raise ParseError(f"{where}: {exc}") from None
    raise ParseError(f"{where}: unknown body type {kind!r} (expected one of {', '.join(BODY_TYPES)})")


def body_to_spec(body):
    """Inverse of :func:`body_from_spec` for the body classes it produces."""
    if isinstance(body, Ball):
        return {"type": "ball", "radius": body.r, "dimension": body.dim}
    if isinstance(body, Ellipsoid):
        return {"type": "ellipsoid", "semiaxes": body.a.tolist()}
    if isinstance(body, HPolytope):
        return {"type": "polytope-h", "normals": body.normals.tolist(), "support": body.h.tolist()}
    if isinstance(body, PolytopeV):
        return {"type": "polytope-v", "vertices": body.points.tolist()}
    if isinstance(body, LinearImage):
        return {"type": "linear", "matrix": body.A.tolist(), "inner": body_to_spec(body.inner)}
    if isinstance(body, Polar):
        return {"type": "polar", "inner": body_to_spec(body.inner)}
    if isinstance(body, StarUnion):
        return {"type": "star-union", "a": body_to_spec(body.a), "b": body_to_spec(body.b)}
    if isinstance(body, StarIntersection):
        return {"type": "star-intersection", "a": body_to_spec(body.a), "b": body_to_spec(body.b)}
    if isinstance(body, RadialScale):
        return {"type": "radial-scale", "factor": body.lam, "inner": body_to_spec(body.inner)}
    if isinstance(body, SlabBody):
        return {"type": "slab", "alpha": body.alpha, "dimension": body.dim}
    raise TypeError(f"no JSON form for {type(body).__name__}")


def measure_from_spec(data, where="measure"):
    if not isinstance(data, dict) or "atoms" not in data:
        raise ParseError(f"{where}: expected an object with an 'atoms' list")
    atoms = data["atoms"]
    if not isinstance(atoms, list):
        raise ParseError(f"{where}.atoms: expected a list")
    for k, a in enumerate(atoms):
        if not isinstance(a, dict) or "normal" not in a or "mass" not in a:
            raise ParseError(f"{where}.atoms[{k}]: needs 'normal' and 'mass'")
        _number(a["mass"], f"{where}.atoms[{k}].mass")
        _array(a["normal"], f"{where}.atoms[{k}].normal", 1)
    try:
        return DiscreteSphericalMeasure.from_dict(data)
    except (MeasureError, ValueError) as exc:
        raise ParseError(f"{where}: {exc}") from None


def read_json(path):
    """Load JSON, converting syntax errors to :class:`ParseError` with line and column."""
    text = Path(path).read_text()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None


def load_body(path):
    return body_from_spec(read_json(path), where=str(path))


def load_measure(path):
    return measure_from_spec(read_json(path), where=str(path))


def load_directions(path):
    """Directions file: a list of vectors or ``{"directions": [...]}``."""
    data = read_json(path)
    if isinstance(data, dict):
        data = _field(data, "directions", str(path))
    X = _array(data, f"{path}.directions", 2)
    if np.any(np.linalg.norm(X, axis=1) == 0):
        raise ParseError(f"{path}: zero direction")
    return X


def dumps(obj):
    """Deterministic JSON text (sorted keys, fixed indentation, trailing newline)."""
    return json.dumps(obj, sort_keys=True, indent=2, allow_nan=False) + "\n"
