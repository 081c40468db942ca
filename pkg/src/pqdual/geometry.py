"""Convex and star bodies: support/radial evaluation, polarity, Wulff shapes.

Every body exposes vectorized ``radial`` and (for convex bodies) ``support``
evaluations on arrays of shape ``(N, n)`` or a single vector of shape
``(n,)``.  Polytopes are stored in H-representation (unit normals and
support numbers); their vertex/facet structure is recovered lazily from the
convex hull of the polar points ``v_i / h_i``.
"""
from __future__ import annotations

import math
from functools import cached_property

import numpy as np
from scipy.optimize import brentq, linprog
from scipy.spatial import ConvexHull

from .errors import (
    DegenerateBody,
    NonConvexBody,
    NonPositiveCombination,
    SingularMatrix,
    UnboundedWulffShape,
    ZeroVector,
)

HEMISPHERE_TOL = 1e-9
DUPLICATE_DOT = 1.0 - 1e-10
TIE_RTOL = 1e-12


def _rows(x):
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return x[None, :], True
    return x, False


def _out(values, single):
    return float(values[0]) if single else values


def _check_nonzero(X):
    norms = np.linalg.norm(X, axis=1)
    if np.any(norms == 0.0):
        raise ZeroVector("direction must be a nonzero vector")
    return norms


def unit(x):
    """Return ``x`` scaled to unit length (rowwise for 2-D input)."""
    X, single = _rows(x)
    if not np.all(np.isfinite(X)):
        raise ValueError("coordinates must be finite")
    norms = _check_nonzero(X)
    U = X / norms[:, None]
    return U[0] if single else U


def angle_direction(theta):
    """Unit vectors in the plane at the given angle(s)."""
    theta = np.asarray(theta, dtype=float)
    return np.stack([np.cos(theta), np.sin(theta)], axis=-1)


def hemisphere_margin(normals):
    """Largest t such that 0 = sum l_i v_i with sum l_i = 1 and every l_i >= t.

    The value is positive exactly when the origin lies in the interior of the
    convex hull of the normals, i.e. when the normals are not contained in any
    closed hemisphere (given they span the space).
    """
    V = np.asarray(normals, dtype=float)
    m, n = V.shape
    if m < n + 1 or np.linalg.matrix_rank(V) < n:
        return 0.0
    # variables (l_1..l_m, t); maximize t
    c = np.zeros(m + 1)
    c[-1] = -1.0
    A_eq = np.zeros((n + 1, m + 1))
    A_eq[:n, :m] = V.T
    A_eq[n, :m] = 1.0
    b_eq = np.zeros(n + 1)
    b_eq[n] = 1.0
    A_ub = np.zeros((m, m + 1))
    A_ub[:, :m] = -np.eye(m)
    A_ub[:, -1] = 1.0
    res = linprog(c, A_ub=A_ub, b_ub=np.zeros(m), A_eq=A_eq, b_eq=b_eq,
                  bounds=[(0, None)] * m + [(None, None)], method="highs")
    if not res.success:
        return 0.0
    return float(res.x[-1])


def not_in_closed_hemisphere(normals, tol=HEMISPHERE_TOL):
    return hemisphere_margin(normals) > tol


def dedupe_directions(V, dot_tol=DUPLICATE_DOT):
    """Indices of the first occurrence of each direction (cosine > dot_tol)."""
    keep = []
    for i, v in enumerate(V):
        if all(float(v @ V[k]) < dot_tol for k in keep):
            keep.append(i)
    return np.array(keep, dtype=int)


def _cluster_points(W, tol):
    reps = []
    for w in W:
        if not any(np.max(np.abs(w - r)) <= tol for r in reps):
            reps.append(w)
    return np.array(reps)


class Body:
    """Common interface of all bodies.  Subclasses set ``dim`` and ``convex``."""

    dim: int
    convex: bool = False
    name = "body"

    def radial(self, x):
        X, single = _rows(x)
        _check_nonzero(X)
        return _out(self._radial(X), single)

    def support(self, x):
        if not self.convex:
            raise NonConvexBody(f"{self.name} is not convex; support undefined")
        X, single = _rows(x)
        return _out(self._support(X), single)

    def gauss_normal(self, u):
        """Outer unit normal at the boundary point in direction ``u``."""
        U, single = _rows(u)
        _check_nonzero(U)
        N = self._gauss_normal(U)
        return N[0] if single else N

    def as_polytope(self):
        """H-polytope describing the same body, or None when not polytopal."""
        return None

    def kink_angles(self):
        """Planar bodies: angles in [0, 2 pi) where the radial function has a corner."""
        P = self.as_polytope()
        if P is None:
            return np.empty(0)
        W = P.vertices
        return np.mod(np.arctan2(W[:, 1], W[:, 0]), 2 * np.pi)

    @property
    def is_polytope(self):
        return self.as_polytope() is not None

    def _radial(self, X):
        raise NotImplementedError

    def _support(self, X):
        raise NotImplementedError

    def _gauss_normal(self, U):
        P = self.as_polytope()
        if P is None:
            raise NotImplementedError(f"radial Gauss map not available for {self.name}")
        return P._gauss_normal(U)


class Ball(Body):
    convex = True
    name = "ball"

    def __init__(self, radius=1.0, dim=2):
        if radius <= 0:
            raise DegenerateBody("ball radius must be positive")
        self.r = float(radius)
        self.dim = int(dim)

    def _radial(self, X):
        return self.r / np.linalg.norm(X, axis=1)

    def _support(self, X):
        return self.r * np.linalg.norm(X, axis=1)

    def _gauss_normal(self, U):
        return U / np.linalg.norm(U, axis=1)[:, None]

    def __repr__(self):
        return f"Ball(radius={self.r!r}, dim={self.dim})"


class Ellipsoid(Body):
    convex = True
    name = "ellipsoid"

    def __init__(self, semiaxes):
        a = np.asarray(semiaxes, dtype=float)
        if a.ndim != 1 or a.size < 2 or np.any(a <= 0):
            raise DegenerateBody("ellipsoid semiaxes must be positive")
        self.a = a
        self.dim = a.size

    def _radial(self, X):
        return 1.0 / np.sqrt(np.sum((X / self.a) ** 2, axis=1))

    def _support(self, X):
        return np.sqrt(np.sum((X * self.a) ** 2, axis=1))

    def _gauss_normal(self, U):
        Y = U * self._radial(U)[:, None]
        G = Y / self.a ** 2
        return G / np.linalg.norm(G, axis=1)[:, None]

    def __repr__(self):
        return f"Ellipsoid(semiaxes={self.a.tolist()!r})"


class HPolytope(Body):
    """Intersection of halfspaces ``x . v_i <= h_i`` (the Wulff shape of h).

    Redundant halfspaces are kept; ``active`` flags the facets whose cone
    has nonempty interior.  Use :func:`wulff_shape` to obtain the pruned
    polytope.
    """

    convex = True
    name = "polytope-h"

    def __init__(self, normals, support, *, check=True):
        V = np.asarray(normals, dtype=float)
        h = np.asarray(support, dtype=float).reshape(-1)
        if V.ndim != 2 or V.shape[0] != h.size:
            raise ValueError("normals must be (m, n) and support must have length m")
        if not np.all(np.isfinite(V)) or not np.all(np.isfinite(h)):
            raise ValueError("polytope data must be finite")
        V = unit(V)
        self.normals = V
        self.h = h
        self.dim = V.shape[1]
        self.pruned = np.zeros(0, dtype=int)
        if check:
            self._validate()

    def _validate(self):
        m, n = self.normals.shape
        if n < 2:
            raise DegenerateBody("dimension must be at least 2")
        if m < n + 1:
            raise UnboundedWulffShape(f"need at least {n + 1} normals, got {m}")
        if np.any(self.h <= 0):
            raise DegenerateBody("support numbers must be positive (origin interior)")
        G = self.normals @ self.normals.T
        np.fill_diagonal(G, -1.0)
        if np.any(G >= DUPLICATE_DOT):
            raise DegenerateBody("duplicate facet normals")
        if not not_in_closed_hemisphere(self.normals):
            raise UnboundedWulffShape("normals lie in a closed hemisphere")

    @property
    def m(self):
        return self.normals.shape[0]

    @cached_property
    def polar_points(self):
        return self.normals / self.h[:, None]

    def as_polytope(self):
        return self

    def _radial(self, X):
        return 1.0 / np.max(X @ self.polar_points.T, axis=1)

    def _support(self, X):
        return np.max(X @ self.vertices.T, axis=1)

    def gauss_index(self, u):
        """Facet hit by the ray through ``u``; ties go to the lowest index."""
        U, single = _rows(u)
        _check_nonzero(U)
        idx = self._gauss_index(U)
        return int(idx[0]) if single else idx

    def _gauss_index(self, U):
        S = U @ self.polar_points.T
        mx = S.max(axis=1)
        return np.argmax(S >= (mx - TIE_RTOL * np.abs(mx))[:, None], axis=1)

    def _gauss_normal(self, U):
        return self.normals[self._gauss_index(U)]

    # -- combinatorial structure ------------------------------------------

    @cached_property
    def _structure(self):
        hull = ConvexHull(self.polar_points)
        eq = hull.equations
        W = eq[:, :-1] / (-eq[:, -1])[:, None]
        scale = float(np.max(np.abs(W)))
        W = _cluster_points(W, 1e-9 * scale)
        resid = W @ self.normals.T - self.h[None, :]
        inc = np.abs(resid) <= 1e-9 * max(scale, 1.0)
        n = self.dim
        active = np.zeros(self.m, dtype=bool)
        for i in range(self.m):
            pts = W[inc[:, i]]
            if len(pts) >= n:
                rank = np.linalg.matrix_rank(pts[1:] - pts[0], tol=1e-9 * max(scale, 1.0))
                active[i] = rank == n - 1
        return W, inc, active

    @property
    def vertices(self):
        return self._structure[0]

    @property
    def active(self):
        return self._structure[2]

    @property
    def active_indices(self):
        return np.flatnonzero(self.active)

    def facet_vertices(self, i):
        """Vertices of facet ``i`` in cyclic (counter-clockwise about v_i) order."""
        W, inc, active = self._structure
        pts = W[inc[:, i]]
        if not active[i]:
            return pts[:0]
        v = self.normals[i]
        if self.dim == 2:
            a, b = pts[0], pts[1]
            if a[0] * b[1] - a[1] * b[0] < 0:
                a, b = b, a
            return np.array([a, b])
        if self.dim == 3:
            c = pts.mean(axis=0)
            e1 = pts[0] - c
            e1 /= np.linalg.norm(e1)
            e2 = np.cross(v, e1)
            ang = np.arctan2((pts - c) @ e2, (pts - c) @ e1)
            return pts[np.argsort(ang)]
        return pts

    def facet_area(self, i):
        """(n-1)-dimensional measure of facet ``i`` (n = 2, 3)."""
        pts = self.facet_vertices(i)
        if len(pts) == 0:
            return 0.0
        if self.dim == 2:
            return float(np.linalg.norm(pts[1] - pts[0]))
        if self.dim == 3:
            c = pts.mean(axis=0)
            nxt = np.roll(pts, -1, axis=0)
            return float(0.5 * np.sum(np.linalg.norm(np.cross(pts - c, nxt - c), axis=1)))
        raise NotImplementedError("facet area only for n = 2, 3")

    def volume(self):
        """Volume from the vertex hull (independent of spherical quadrature)."""
        return float(ConvexHull(self.vertices).volume)

    def pruned_copy(self):
        keep = self.active_indices
        P = HPolytope(self.normals[keep], self.h[keep], check=False)
        P.pruned = np.flatnonzero(~self.active)
        P.kept = keep
        return P

    def scaled(self, lam):
        return HPolytope(self.normals, lam * self.h, check=False)

    def __repr__(self):
        return f"HPolytope(m={self.m}, dim={self.dim})"


class PolytopeV(Body):
    """Convex hull of finitely many points (origin must be interior)."""

    convex = True
    name = "polytope-v"

    def __init__(self, vertices):
        P = np.asarray(vertices, dtype=float)
        if P.ndim != 2 or P.shape[0] < P.shape[1] + 1:
            raise DegenerateBody("need at least n+1 points")
        self.points = P
        self.dim = P.shape[1]
        hull = ConvexHull(P)
        eq = hull.equations
        if np.any(eq[:, -1] >= -1e-12 * np.max(np.abs(P))):
            raise DegenerateBody("origin is not interior to the point hull")
        normals = eq[:, :-1]
        keep = dedupe_directions(normals)
        self._hpoly = HPolytope(normals[keep], -eq[keep, -1], check=False)
        self.vertices = P[hull.vertices]

    def as_polytope(self):
        return self._hpoly

    def _radial(self, X):
        return self._hpoly._radial(X)

    def _support(self, X):
        return np.max(X @ self.vertices.T, axis=1)

    def __repr__(self):
        return f"PolytopeV(k={len(self.vertices)}, dim={self.dim})"


class LinearImage(Body):
    name = "linear"

    def __init__(self, matrix, inner):
        A = np.asarray(matrix, dtype=float)
        n = inner.dim
        if A.shape != (n, n):
            raise ValueError(f"matrix must be {n}x{n}")
        det = np.linalg.det(A)
        if not np.isfinite(det) or abs(det) <= 1e-12 * max(np.linalg.norm(A), 1.0) ** n:
            raise SingularMatrix("linear map must be invertible")
        self.A = A
        self.Ainv = np.linalg.inv(A)
        self.det = float(det)
        self.inner = inner
        self.dim = n
        self.convex = inner.convex

    def _radial(self, X):
        return self.inner._radial(X @ self.Ainv.T)

    def _support(self, X):
        return self.inner._support(X @ self.A)

    def _gauss_normal(self, U):
        P = self.as_polytope()
        if P is not None:
            return P._gauss_normal(U)
        Z = U @ self.Ainv.T
        Nin = self.inner._gauss_normal(Z / np.linalg.norm(Z, axis=1)[:, None])
        G = Nin @ self.Ainv
        return G / np.linalg.norm(G, axis=1)[:, None]

    @cached_property
    def _poly(self):
        P = self.inner.as_polytope()
        if P is None:
            return None
        G = P.normals @ self.Ainv
        s = np.linalg.norm(G, axis=1)
        return HPolytope(G / s[:, None], P.h / s, check=False)

    def as_polytope(self):
        return self._poly

    def kink_angles(self):
        if self._poly is not None:
            return super().kink_angles()
        t = self.inner.kink_angles()
        Y = angle_direction(t) @ self.A.T
        return np.mod(np.arctan2(Y[:, 1], Y[:, 0]), 2 * np.pi)

    def __repr__(self):
        return f"LinearImage({self.A.tolist()!r}, {self.inner!r})"


class Polar(Body):
    name = "polar"

    def __init__(self, inner):
        if not inner.convex:
            raise NonConvexBody("polar body needs a convex inner body")
        self.inner = inner
        self.dim = inner.dim
        self.convex = True

    def _radial(self, X):
        return 1.0 / self.inner._support(X)

    def _support(self, X):
        return 1.0 / self.inner._radial(X)

    @cached_property
    def _poly(self):
        P = self.inner.as_polytope()
        if P is None:
            return None
        return PolytopeV(P.polar_points).as_polytope()

    def as_polytope(self):
        return self._poly

    def __repr__(self):
        return f"Polar({self.inner!r})"


class RadialScale(Body):
    name = "radial-scale"

    def __init__(self, lam, inner):
        if lam <= 0:
            raise DegenerateBody("scale must be positive")
        self.lam = float(lam)
        self.inner = inner
        self.dim = inner.dim
        self.convex = inner.convex

    def _radial(self, X):
        return self.lam * self.inner._radial(X)

    def _support(self, X):
        return self.lam * self.inner._support(X)

    def _gauss_normal(self, U):
        return self.inner._gauss_normal(U)

    @cached_property
    def _poly(self):
        P = self.inner.as_polytope()
        return None if P is None else P.scaled(self.lam)

    def as_polytope(self):
        return self._poly

    def kink_angles(self):
        return self.inner.kink_angles()

    def __repr__(self):
        return f"RadialScale({self.lam!r}, {self.inner!r})"


def _combined_kinks(a, b, samples=4096):
    """Kinks of both parts plus the angles where rho_a = rho_b changes sign."""
    if a.dim != 2:
        return np.empty(0)
    t = 2 * np.pi * np.arange(samples + 1) / samples

    def diff(x):
        X = angle_direction(np.atleast_1d(x))
        return a._radial(X) - b._radial(X)

    d = diff(t)
    roots = [brentq(lambda x: diff(x)[0], t[i], t[i + 1], xtol=1e-15)
             for i in np.flatnonzero(d[:-1] * d[1:] < 0)]
    roots += [t[i] for i in np.flatnonzero(d[:-1] == 0)]
    return np.mod(np.concatenate([a.kink_angles(), b.kink_angles(), roots]), 2 * np.pi)


class StarUnion(Body):
    name = "star-union"
    convex = False

    def __init__(self, a, b):
        if a.dim != b.dim:
            raise ValueError("dimension mismatch")
        self.a, self.b, self.dim = a, b, a.dim

    def _radial(self, X):
        return np.maximum(self.a._radial(X), self.b._radial(X))

    @cached_property
    def _kinks(self):
        return _combined_kinks(self.a, self.b)

    def kink_angles(self):
        return self._kinks


class StarIntersection(Body):
    name = "star-intersection"
    convex = False

    def __init__(self, a, b):
        if a.dim != b.dim:
            raise ValueError("dimension mismatch")
        self.a, self.b, self.dim = a, b, a.dim

    def _radial(self, X):
        return np.minimum(self.a._radial(X), self.b._radial(X))

    @cached_property
    def _kinks(self):
        return _combined_kinks(self.a, self.b)

    def kink_angles(self):
        return self._kinks


class SlabBody(Body):
    """Cylinder ``{|x_1| <= alpha, |(x_2..x_n)| <= 1}`` that flattens as alpha -> 0."""

    convex = True
    name = "slab"

    def __init__(self, alpha, dim=2):
        if not 0 < alpha:
            raise DegenerateBody("alpha must be positive")
        self.alpha = float(alpha)
        self.dim = int(dim)

    def _radial(self, X):
        rest = np.linalg.norm(X[:, 1:], axis=1)
        return 1.0 / np.maximum(np.abs(X[:, 0]) / self.alpha, rest)

    def _support(self, X):
        return self.alpha * np.abs(X[:, 0]) + np.linalg.norm(X[:, 1:], axis=1)

    def kink_angles(self):
        if self.dim != 2:
            return np.empty(0)
        c = math.atan2(1.0, self.alpha)
        return np.array([c, math.pi - c, math.pi + c, 2 * math.pi - c])

    def _gauss_normal(self, U):
        rest = np.linalg.norm(U[:, 1:], axis=1)
        cap = np.abs(U[:, 0]) / self.alpha >= rest
        N = np.zeros_like(U)
        N[cap, 0] = np.sign(U[cap, 0])
        side = ~cap
        N[side, 1:] = U[side, 1:] / rest[side, None]
        return N


# -- operations ---------------------------------------------------------


def support_eval(body, x):
    """Support function h_M(x) = max over y in M of x . y."""
    return body.support(x)


def radial_eval(body, x):
    """Radial function rho_M(x) = max{t >= 0 : t x in M}."""
    return body.radial(x)


def norm_Q(Q, x):
    """Gauge ``||x||_Q``: 0 at the origin, otherwise 1 / rho_Q(x)."""
    X, single = _rows(x)
    out = np.zeros(len(X))
    nz = np.linalg.norm(X, axis=1) > 0
    if np.any(nz):
        out[nz] = 1.0 / Q._radial(X[nz])
    return _out(out, single)


def polar(body):
    """Polar body; closed forms are returned where they exist."""
    if not body.convex:
        raise NonConvexBody("polar needs a convex body")
    if isinstance(body, Ball):
        return Ball(1.0 / body.r, body.dim)
    if isinstance(body, Ellipsoid):
        return Ellipsoid(1.0 / body.a)
    if isinstance(body, HPolytope):
        return PolytopeV(body.polar_points)
    if isinstance(body, PolytopeV):
        X = body.points
        r = np.linalg.norm(X, axis=1)
        return HPolytope(X / r[:, None], 1.0 / r).pruned_copy()
    if isinstance(body, Polar):
        return body.inner
    if isinstance(body, LinearImage):
        return LinearImage(body.Ainv.T, polar(body.inner))
    return Polar(body)


def wulff_shape(normals, heights):
    """Wulff shape ``[h]`` with redundant halfspaces pruned.

    The returned polytope carries ``pruned`` (indices of dropped input
    facets) and ``kept`` (surviving input indices).
    """
    h = np.asarray(heights, dtype=float)
    if np.any(h <= 0):
        raise DegenerateBody("Wulff heights must be positive")
    V = unit(np.asarray(normals, dtype=float))
    if V.shape[0] < V.shape[1] + 1 or not not_in_closed_hemisphere(V):
        raise UnboundedWulffShape("normals lie in a closed hemisphere")
    return HPolytope(V, h).pruned_copy()


def convex_hull_of_radial(directions, rho):
    """Convex hull of the points rho(u) u."""
    U = unit(np.asarray(directions, dtype=float))
    r = np.asarray(rho, dtype=float)
    if np.any(r <= 0):
        raise DegenerateBody("radial values must be positive")
    if U.shape[0] < U.shape[1] + 1 or not not_in_closed_hemisphere(U):
        raise UnboundedWulffShape("directions lie in a closed hemisphere")
    return PolytopeV(U * r[:, None])


def radial_gauss(P, u):
    """Index of the facet of ``P`` hit by the ray through ``u``."""
    return P.gauss_index(u)


def apply_linear(body, matrix):
    """Image of ``body`` under an invertible linear map."""
    return LinearImage(matrix, body)


def default_normals(dim, count=None):
    """Deterministic, roughly uniform direction set used when no polytope fixes one."""
    if dim == 2:
        k = count or 256
        return angle_direction(2 * np.pi * np.arange(k) / k)
    k = count or 400
    if dim == 3:
        i = np.arange(k) + 0.5
        z = 1 - 2 * i / k
        phi = np.pi * (1 + 5 ** 0.5) * i
        r = np.sqrt(1 - z * z)
        return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)
    rng = np.random.default_rng(0)
    return unit(rng.standard_normal((k, dim)))


def merged_normals(*bodies):
    """Union of the facet normal sets of the polytopal bodies given."""
    sets = [b.as_polytope().normals for b in bodies if b.as_polytope() is not None]
    if not sets:
        return None
    V = np.vstack(sets)
    return V[dedupe_directions(V)]


def lp_combination(M, N, k, l, p, normals=None):
    """L_p combination ``k.M +_p l.N`` as the Wulff shape of (k h_M^p + l h_N^p)^(1/p).

    ``normals`` fixes the direction set; by default the union of the facet
    normals of polytopal inputs, else :func:`default_normals`.
    """
    if p == 0:
        raise ValueError("p must be nonzero")
    if not (M.convex and N.convex):
        raise NonConvexBody("L_p combination needs convex bodies")
    if isinstance(M, Ball) and isinstance(N, Ball) and normals is None:
        val = k * M.r ** p + l * N.r ** p
        if val <= 0:
            raise NonPositiveCombination("k h_M^p + l h_N^p must be positive")
        return Ball(val ** (1.0 / p), M.dim)
    if normals is None:
        normals = merged_normals(M, N)
        if normals is None:
            normals = default_normals(M.dim)
    V = unit(np.asarray(normals, dtype=float))
    val = k * M.support(V) ** p + l * N.support(V) ** p
    if not np.all(np.isfinite(val)) or np.any(val <= 0):
        raise NonPositiveCombination("k h_M^p + l h_N^p must be positive on the normal set")
    return wulff_shape(V, val ** (1.0 / p))
