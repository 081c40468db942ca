"""Quadrature on the unit sphere S^{n-1}.

Integrands built from polytopes are only piecewise smooth: the radial
function of a polytope changes formula across the boundaries of the cones
over its facets.  :func:`cone_partitioned_grid` therefore splits the sphere
exactly along those boundaries (arcs in the plane, cones over triangles in
space) and places Gauss nodes inside each smooth piece.  The nodes are laid
out on the facet itself and projected to the sphere, so that rho_P^q times
the Jacobian is a smooth, slowly varying function of the facet coordinates.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import NonFiniteIntegrand, UnsupportedScheme
from .geometry import angle_direction

SCHEMES = ("uniform-angle", "product-gauss", "mc", "cone-partitioned")

DEFAULT_RESOLUTION = {
    "uniform-angle": 512,
    "product-gauss": 48,
    "mc": 200_000,
    ("cone-partitioned", 2): 48,
    ("cone-partitioned", 3): 8,
}
DEFAULT_LEVEL = 2
MAX_LEVEL = 7


def sphere_area(n):
    """Surface area n * omega_n of S^{n-1}."""
    return 2.0 * math.pi ** (n / 2) / math.gamma(n / 2)


def ball_volume(n):
    return sphere_area(n) / n


@dataclass(frozen=True, eq=False)
class SphericalGrid:
    dim: int
    nodes: np.ndarray
    weights: np.ndarray
    scheme: str
    resolution: int
    seed: int | None = None
    owners: tuple = ()
    cones: tuple = ()
    level: int | None = None
    meta: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.weights)

    def cone_index(self, P):
        """Facet index of ``P`` for every node (cached when ``P`` owns the grid)."""
        for owner, idx in zip(self.owners, self.cones):
            if owner is P:
                return idx
        return P._gauss_index(self.nodes)

    def describe(self):
        d = {"scheme": self.scheme, "resolution": self.resolution, "nodes": len(self)}
        if self.seed is not None:
            d["seed"] = self.seed
        if self.level is not None:
            d["level"] = self.level
        return d


def fsum_weighted(weights, values):
    """Correctly rounded sum of weights * values in node order."""
    return math.fsum((np.asarray(weights) * np.asarray(values)).tolist())


def _evaluate(f, nodes, threads):
    if not threads or threads <= 1 or len(nodes) < 2048:
        return np.asarray(f(nodes), dtype=float)
    chunks = np.array_split(np.arange(len(nodes)), threads)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        parts = list(pool.map(lambda ix: np.asarray(f(nodes[ix]), dtype=float), chunks))
    return np.concatenate(parts)


def integrate(f, grid, threads=None):
    """Approximate the integral of ``f`` over S^{n-1} with ``grid``.

    ``f`` maps an ``(N, n)`` array of unit vectors to ``N`` values.  Node
    evaluation may be split across threads; the reduction is always the
    exactly rounded sum in fixed node order.
    """
    vals = np.broadcast_to(_evaluate(f, grid.nodes, threads), grid.weights.shape)
    bad = ~np.isfinite(vals)
    if np.any(bad):
        k = int(np.flatnonzero(bad)[0])
        raise NonFiniteIntegrand(
            f"integrand is not finite at node {k}: {grid.nodes[k].tolist()}",
            node=grid.nodes[k])
    return fsum_weighted(grid.weights, vals)


# -- reference rules --------------------------------------------------------


def gauss_legendre(k, a=-1.0, b=1.0):
    x, w = np.polynomial.legendre.leggauss(k)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def triangle_rule(k):
    """Collapsed Gauss-Legendre rule on {s, t >= 0, s + t <= 1}; weights sum to 1/2."""
    x, w = gauss_legendre(k, 0.0, 1.0)
    S, E = np.meshgrid(x, x, indexing="ij")
    WS, WE = np.meshgrid(w, w, indexing="ij")
    s = S.ravel()
    t = (E * (1 - S)).ravel()
    return np.stack([s, t], axis=1), (WS * WE * (1 - S)).ravel()


def _flat_triangle_nodes(tris, k):
    """Nodes/weights on the sphere for the cones over flat triangles ``tris`` (T,3,3)."""
    ref, wref = triangle_rule(k)
    a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
    X = (a[:, None, :] + ref[None, :, 0, None] * (b - a)[:, None, :]
         + ref[None, :, 1, None] * (c - a)[:, None, :])
    det = np.abs(np.einsum("ij,ij->i", a, np.cross(b, c)))
    r = np.linalg.norm(X, axis=2)
    U = X / r[..., None]
    W = wref[None, :] * det[:, None] / r ** 3
    return U.reshape(-1, 3), W.reshape(-1)


def _subdivide(tris, level):
    """Midpoint subdivision inside the plane of each triangle."""
    for _ in range(level):
        a, b, c = tris[:, 0], tris[:, 1], tris[:, 2]
        ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
        tris = np.concatenate([
            np.stack([a, ab, ca], 1), np.stack([ab, b, bc], 1),
            np.stack([ca, bc, c], 1), np.stack([ab, bc, ca], 1)])
    return tris


def _clip(poly, g):
    """Clip a planar polygon (list of 3-vectors) to the halfspace x . g >= 0."""
    out = []
    k = len(poly)
    for i in range(k):
        P, R = poly[i], poly[(i + 1) % k]
        fp, fr = P @ g, R @ g
        if fp >= 0:
            out.append(P)
        if (fp >= 0) != (fr >= 0):
            out.append(P + (fp / (fp - fr)) * (R - P))
    return out


def _cone_grid_3d(owners, order, level):
    P0 = owners[0]
    tris, lab = [], []
    for i in P0.active_indices:
        pts = P0.facet_vertices(i)
        c = pts.mean(axis=0)
        for k in range(len(pts)):
            tris.append([c, pts[k], pts[(k + 1) % len(pts)]])
            lab.append(i)
    tris = np.array(tris)
    lab = np.array(lab)
    reps = 4 ** level
    tris = _subdivide(tris, level)
    labels = [np.tile(lab, reps)]
    for P in owners[1:]:
        pieces, lab_lists, cone = _split_by_cones(tris, labels, P)
        tris = pieces
        labels = lab_lists + [cone]
    U, W = _flat_triangle_nodes(tris, order)
    per = order * order
    cones = tuple(np.repeat(lab_, per) for lab_ in labels)
    return U, W, cones


def _split_by_cones(tris, labels, P):
    D = P.polar_points
    act = P.active_indices
    vert_idx = P._gauss_index(tris.reshape(-1, 3)).reshape(-1, 3)
    same = (vert_idx == vert_idx[:, :1]).all(axis=1)
    out_tris = [tris[same]]
    out_labels = [[lab[same]] for lab in labels]
    out_cone = [vert_idx[same, 0]]
    for t in np.flatnonzero(~same):
        tri = tris[t]
        for kk in act:
            G = D[kk][None, :] - D
            poly = [tri[0], tri[1], tri[2]]
            for l in range(len(D)):
                if l == kk:
                    continue
                poly = _clip(poly, G[l])
                if len(poly) < 3:
                    break
            if len(poly) < 3:
                continue
            pieces = np.array([[poly[0], poly[i], poly[i + 1]] for i in range(1, len(poly) - 1)])
            area = np.linalg.norm(np.cross(pieces[:, 1] - pieces[:, 0],
                                           pieces[:, 2] - pieces[:, 0]), axis=1)
            pieces = pieces[area > 1e-14 * np.linalg.norm(pieces[:, 0], axis=1) ** 2]
            if len(pieces) == 0:
                continue
            out_tris.append(pieces)
            for ol, lab in zip(out_labels, labels):
                ol.append(np.full(len(pieces), lab[t]))
            out_cone.append(np.full(len(pieces), kk))
    return (np.concatenate(out_tris), [np.concatenate(ol) for ol in out_labels],
            np.concatenate(out_cone))


def _vertex_angles(P):
    W = P.vertices
    return np.mod(np.arctan2(W[:, 1], W[:, 0]), 2 * np.pi)


def _breakpoints(owners, breaks):
    ang = np.concatenate([_vertex_angles(P) for P in owners] + [np.asarray(breaks, float)])
    ang = np.sort(np.mod(ang, 2 * np.pi))
    ang = ang[np.concatenate([[True], np.diff(ang) > 1e-13])]
    if len(ang) > 1 and 2 * np.pi - ang[-1] + ang[0] <= 1e-13:
        ang = ang[:-1]
    if len(ang) == 0:
        ang = np.zeros(1)
    lo = ang
    hi = np.concatenate([ang[1:], [ang[0] + 2 * np.pi]])
    # the substitution below needs arcs shorter than pi; quarter turns at most
    parts = np.maximum(np.ceil((hi - lo) / (0.5 * np.pi) - 1e-12), 1).astype(int)
    edges = [lo[i] + (hi[i] - lo[i]) * np.arange(parts[i]) / parts[i] for i in range(len(lo))]
    lo = np.concatenate(edges)
    hi = np.concatenate([lo[1:], [lo[0] + 2 * np.pi]])
    return lo, hi


def _cone_grid_2d(owners, k, breaks=()):
    lo, hi = _breakpoints(owners, breaks)
    mids = angle_direction(0.5 * (hi + lo))
    cones = tuple(np.repeat(P._gauss_index(mids), k) for P in owners)
    # Gauss nodes in s with theta - phi = arctan(sinh s), phi the normal angle
    # of the first owner's facet: there rho^q dtheta = h^q cosh(s)^(q-1) ds,
    # an entire function even on arcs reaching close to phi +- pi/2.
    # Without a polytopal owner phi is the arc midpoint.
    if owners:
        v = owners[0].normals[cones[0][::k]]
        phi = np.arctan2(v[:, 1], v[:, 0])
    else:
        phi = 0.5 * (hi + lo)
    s_lo, s_hi = np.arcsinh(np.tan(lo - phi)), np.arcsinh(np.tan(hi - phi))
    x, w = gauss_legendre(k)
    half = 0.5 * (s_hi - s_lo)
    S = 0.5 * (s_hi + s_lo)[:, None] + half[:, None] * x[None, :]
    theta = (phi[:, None] + np.arctan(np.sinh(S))).ravel()
    W = (half[:, None] * w[None, :] / np.cosh(S)).ravel()
    return angle_direction(theta), W, cones


def _split_bodies(bodies):
    polys, breaks = [], []
    for b in bodies:
        if b is None:
            continue
        P = b.as_polytope()
        if P is not None:
            if all(P is not R for R in polys):
                polys.append(P)
        elif b.dim == 2:
            breaks.append(b.kink_angles())
    return polys, (np.concatenate(breaks) if breaks else np.empty(0))


def cone_partitioned_grid(P, resolution=None, level=None, breaks=None):
    """Grid whose nodes lie strictly inside the cones over the facets of ``P``.

    ``P`` may be a single body or a sequence of bodies.  The common refinement
    of the cone partitions of all polytopal ones is used; in the plane the
    arcs are further split at ``breaks`` and at the corners of the remaining
    bodies (see ``Body.kink_angles``).  In the plane ``resolution`` is the
    Gauss-Legendre count per arc; in space it is the per-direction order of
    the collapsed triangle rule, applied on every triangle of the facet fans
    after ``level`` midpoint subdivisions.
    """
    bodies = tuple(P) if isinstance(P, (list, tuple)) else (P,)
    owners, extra = _split_bodies(bodies)
    owners = tuple(owners)
    if breaks is not None:
        extra = np.concatenate([extra, np.asarray(breaks, float)])
    n = bodies[0].dim
    if n == 2:
        if not owners and not len(extra):
            raise UnsupportedScheme("cone-partitioned scheme needs a polytopal or kinked body")
        k = resolution or DEFAULT_RESOLUTION[("cone-partitioned", 2)]
        U, W, cones = _cone_grid_2d(owners, k, extra)
        lvl = None
    elif n == 3:
        if not owners:
            raise UnsupportedScheme("cone-partitioned scheme needs a polytopal body")
        k = resolution or DEFAULT_RESOLUTION[("cone-partitioned", 3)]
        lvl = DEFAULT_LEVEL if level is None else int(level)
        lvl = min(lvl, MAX_LEVEL)
        U, W, cones = _cone_grid_3d(owners, k, lvl)
    else:
        raise UnsupportedScheme("cone-partitioned grids exist for n = 2, 3 only")
    meta = {"breaks": extra} if n == 2 and len(extra) else {}
    return SphericalGrid(n, U, W, "cone-partitioned", k, owners=owners, cones=cones,
                         level=lvl, meta=meta)


def build_grid(n, resolution=None, scheme="auto", seed=None):
    """Deterministic (n = 2, 3) or Monte Carlo (n >= 4) grid on S^{n-1}."""
    if n < 2:
        raise UnsupportedScheme("dimension must be at least 2")
    if scheme == "auto":
        scheme = {2: "uniform-angle", 3: "product-gauss"}.get(n, "mc")
    if scheme not in SCHEMES or scheme == "cone-partitioned":
        raise UnsupportedScheme(f"scheme {scheme!r} cannot be built without a polytope")
    res = resolution or DEFAULT_RESOLUTION[scheme]
    if res < 8:
        raise ValueError("resolution must be at least 8")
    if scheme == "uniform-angle":
        if n != 2:
            raise UnsupportedScheme("uniform-angle is the n = 2 scheme")
        theta = 2 * np.pi * np.arange(res) / res
        return SphericalGrid(2, angle_direction(theta), np.full(res, 2 * np.pi / res), scheme, res)
    if scheme == "product-gauss":
        if n != 3:
            raise UnsupportedScheme("product-gauss is the n = 3 scheme")
        z, wz = gauss_legendre(res)
        nphi = 2 * res
        phi = 2 * np.pi * (np.arange(nphi) + 0.5) / nphi
        Z, PH = np.meshgrid(z, phi, indexing="ij")
        r = np.sqrt(1 - Z ** 2)
        U = np.stack([r * np.cos(PH), r * np.sin(PH), Z], axis=-1).reshape(-1, 3)
        W = np.repeat(wz, nphi) * (2 * np.pi / nphi)
        return SphericalGrid(3, U, W, scheme, res)
    seed = 0 if seed is None else int(seed)
    rng = np.random.default_rng(seed)
    G = rng.standard_normal((res, n))
    U = G / np.linalg.norm(G, axis=1)[:, None]
    return SphericalGrid(n, U, np.full(res, sphere_area(n) / res), "mc", res, seed=seed)


def auto_grid(dim, bodies=(), resolution=None, seed=None, level=None):
    """Cone-partitioned grid when any body is polytopal (n = 2, 3) or kinked (n = 2),
    else the default scheme."""
    polys, breaks = _split_bodies(bodies)
    if (dim in (2, 3) and polys) or (dim == 2 and len(breaks)):
        return cone_partitioned_grid([b for b in bodies if b is not None], resolution, level)
    return build_grid(dim, resolution, "auto", seed)


def grid_from_spec(dim, spec, bodies=()):
    """Build a grid from a config mapping ``{"scheme", "resolution", "seed"}``."""
    spec = dict(spec or {})
    scheme = spec.get("scheme", "auto")
    res = spec.get("resolution")
    seed = spec.get("seed")
    if scheme == "auto":
        return auto_grid(dim, bodies, res, seed, spec.get("level"))
    if scheme == "cone-partitioned":
        bodies = [b for b in bodies if b is not None]
        if not bodies:
            raise UnsupportedScheme("cone-partitioned scheme needs a polytopal body")
        return cone_partitioned_grid(bodies, res, spec.get("level"))
    return build_grid(dim, res, scheme, seed)


class _Planar:
    """Stand-in carrying only the dimension when a planar grid has no polytopal owner."""

    dim = 2

    def as_polytope(self):
        return None

    def kink_angles(self):
        return np.empty(0)


def coarser(grid):
    """A grid of the same scheme at roughly half the resolution (error estimates)."""
    if grid.scheme == "cone-partitioned":
        if grid.dim == 2:
            return cone_partitioned_grid(list(grid.owners) or [_Planar()], max(grid.resolution // 2, 4),
                                         breaks=grid.meta.get("breaks"))
        return cone_partitioned_grid(list(grid.owners), max(grid.resolution - 2, 3),
                                     max((grid.level or 0) - 1, 0))
    if grid.scheme == "mc":
        return build_grid(grid.dim, grid.resolution, "mc", (grid.seed or 0) + 1)
    return build_grid(grid.dim, max(grid.resolution // 2, 8), grid.scheme)


def refined(grid):
    """A grid of the same scheme at doubled resolution (re-checks of suspicious results)."""
    if grid.scheme == "cone-partitioned":
        if grid.dim == 2:
            return cone_partitioned_grid(list(grid.owners) or [_Planar()], 2 * grid.resolution,
                                         breaks=grid.meta.get("breaks"))
        return cone_partitioned_grid(list(grid.owners), grid.resolution + 2,
                                     min((grid.level or 0) + 1, MAX_LEVEL))
    if grid.scheme == "mc":
        return build_grid(grid.dim, 2 * grid.resolution, "mc", grid.seed)
    return build_grid(grid.dim, 2 * grid.resolution, grid.scheme)
