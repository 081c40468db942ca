import math

import numpy as np
import pytest
from hypothesis import settings

from pqdual.geometry import Ball, Ellipsoid, HPolytope, PolytopeV

settings.register_profile("pqdual", deadline=None, max_examples=30, derandomize=True)
settings.load_profile("pqdual")

E2 = [[1, 0], [0, 1], [-1, 0], [0, -1]]
E3 = np.vstack([np.eye(3), -np.eye(3)])


def rel(a, b):
    return abs(a - b) / max(abs(a), abs(b))


def angles(k):
    t = 2 * np.pi * np.arange(k) / k
    return np.stack([np.cos(t), np.sin(t)], axis=1)


def sphere_points(k, seed=0):
    X = np.random.default_rng(seed).standard_normal((k, 3))
    return X / np.linalg.norm(X, axis=1)[:, None]


@pytest.fixture
def square():
    return HPolytope(E2, [1, 1, 1, 1])


@pytest.fixture
def cross():
    return PolytopeV(E2)


@pytest.fixture
def disk():
    return Ball(1.0, 2)


@pytest.fixture
def ellipse():
    return Ellipsoid([1.0, 2.0])


@pytest.fixture
def cube():
    return HPolytope(E3, np.ones(6))


@pytest.fixture
def octahedron():
    return PolytopeV(E3)


@pytest.fixture
def ball3():
    return Ball(1.0, 3)


OMEGA = {2: math.pi, 3: 4 * math.pi / 3}
