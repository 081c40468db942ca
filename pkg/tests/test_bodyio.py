import json

import numpy as np
import pytest

from conftest import angles
from pqdual.bodyio import (
    body_from_spec,
    body_to_spec,
    dumps,
    load_body,
    load_directions,
    load_measure,
    measure_from_spec,
)
from pqdual.errors import DegenerateBody, ParseError, UnboundedWulffShape
from pqdual.geometry import Ball, Ellipsoid, HPolytope, PolytopeV, SlabBody

SPECS = [
    {"type": "ball", "radius": 2.0},
    {"type": "ball", "radius": 1.0, "dimension": 3},
    {"type": "ellipsoid", "semiaxes": [1.0, 2.0]},
    {"type": "polytope-h", "normals": [[1, 0], [0, 1], [-1, 0], [0, -1]], "support": [1, 2, 1, 2]},
    {"type": "polytope-v", "vertices": [[1, 0], [0, 1], [-1, 0], [0, -1]]},
    {"type": "linear", "matrix": [[2, 1], [0, 1]], "inner": {"type": "ball"}},
    {"type": "polar", "inner": {"type": "ellipsoid", "semiaxes": [1.0, 3.0]}},
    {"type": "star-union", "a": {"type": "ellipsoid", "semiaxes": [2.0, 1.0]},
     "b": {"type": "ellipsoid", "semiaxes": [1.0, 2.0]}},
    {"type": "star-intersection", "a": {"type": "ball"}, "b": {"type": "ellipsoid", "semiaxes": [1.0, 2.0]}},
    {"type": "radial-scale", "factor": 1.5, "inner": {"type": "ball"}},
    {"type": "slab", "alpha": 0.25},
]


class TestBodySpecs:
    @pytest.mark.parametrize("spec", SPECS, ids=[s["type"] for s in SPECS])
    def test_round_trip(self, spec):
        body = body_from_spec(spec)
        again = body_from_spec(json.loads(dumps(body_to_spec(body))))
        U = angles(24) if body.dim == 2 else np.eye(3)
        np.testing.assert_allclose(again.radial(U), body.radial(U), rtol=1e-14)

    def test_types(self):
        assert isinstance(body_from_spec(SPECS[0]), Ball)
        assert isinstance(body_from_spec(SPECS[2]), Ellipsoid)
        assert isinstance(body_from_spec(SPECS[3]), HPolytope)
        assert isinstance(body_from_spec(SPECS[4]), PolytopeV)
        assert isinstance(body_from_spec(SPECS[-1]), SlabBody)
        assert body_from_spec(SPECS[1]).dim == 3

    @pytest.mark.parametrize("spec, where", [
        ({"radius": 1}, "body: missing field 'type'"),
        ({"type": "cone"}, "unknown body type 'cone'"),
        ({"type": "ellipsoid"}, "missing field 'semiaxes'"),
        ({"type": "ellipsoid", "semiaxes": [[1, 2]]}, "body.semiaxes: expected a 1-d array"),
        ({"type": "ellipsoid", "semiaxes": ["a", 2]}, "body.semiaxes: not a numeric array"),
        ({"type": "ball", "radius": "big"}, "body.radius: expected a number"),
        ({"type": "polytope-h", "normals": [[1, 0], [0, 1], [-1, -1]], "support": [1, 1]},
         "3 normals but 2 support numbers"),
        ({"type": "linear", "matrix": [[1, 0], [0, 1]], "inner": {"type": "ellipsoid"}},
         "body.inner: missing field 'semiaxes'"),
        ({"type": "star-union", "a": {"type": "ball"}, "b": 3}, "body.b: expected an object"),
        ([1, 2], "expected an object"),
    ])
    def test_parse_errors(self, spec, where):
        with pytest.raises(ParseError, match=where.replace("(", r"\(").replace("[", r"\[")):
            body_from_spec(spec)

    def test_geometry_errors_keep_their_class(self):
        with pytest.raises(UnboundedWulffShape, match="^body:"):
            body_from_spec({"type": "polytope-h", "normals": [[1, 0], [0, 1]], "support": [1, 1]})
        with pytest.raises(DegenerateBody):
            body_from_spec({"type": "polytope-v", "vertices": [[1, 1], [2, 1], [1, 2]]})


class TestMeasureSpecs:
    def test_round_trip(self):
        data = {"dimension": 2, "atoms": [{"normal": [1, 0], "mass": 1.5},
                                          {"normal": [-1, 0], "mass": 1.5},
                                          {"normal": [0, 1], "mass": 2.0}]}
        mu = measure_from_spec(data)
        assert mu.total == 5.0
        again = measure_from_spec(json.loads(dumps(mu.to_dict())))
        np.testing.assert_array_equal(again.masses, mu.masses)

    @pytest.mark.parametrize("data, msg", [
        ({}, "'atoms' list"),
        ({"atoms": 3}, "expected a list"),
        ({"atoms": [{"normal": [1, 0]}]}, r"atoms\[0\]: needs 'normal' and 'mass'"),
        ({"atoms": [{"normal": [1, 0], "mass": "x"}]}, r"atoms\[0\].mass"),
    ])
    def test_errors(self, data, msg):
        with pytest.raises(ParseError, match=msg):
            measure_from_spec(data)


class TestFiles:
    def test_syntax_error_position(self, tmp_path):
        f = tmp_path / "bad.json"
        f.write_text('{\n  "type": "ball",\n  "radius": }\n')
        with pytest.raises(ParseError, match="line 3, column 13"):
            load_body(f)

    def test_load_body_reports_path(self, tmp_path):
        f = tmp_path / "body.json"
        f.write_text('{"type": "ellipsoid"}')
        with pytest.raises(ParseError, match=str(f)):
            load_body(f)

    def test_directions_forms(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        a.write_text("[[1, 0], [0, 2]]")
        b.write_text('{"directions": [[1, 0], [0, 2]]}')
        np.testing.assert_array_equal(load_directions(a), load_directions(b))

    def test_zero_direction(self, tmp_path):
        f = tmp_path / "d.json"
        f.write_text("[[1, 0], [0, 0]]")
        with pytest.raises(ParseError, match="zero direction"):
            load_directions(f)

    def test_load_measure(self, tmp_path):
        f = tmp_path / "m.json"
        f.write_text(dumps({"atoms": [{"normal": [0, 1], "mass": 1}, {"normal": [0, -1], "mass": 1}]}))
        assert len(load_measure(f)) == 2

    def test_dumps_is_canonical(self):
        assert dumps({"b": 1, "a": [1.5]}) == '{\n  "a": [\n    1.5\n  ],\n  "b": 1\n}\n'
        with pytest.raises(ValueError):
            dumps({"x": float("nan")})
