"""Dual and (p,q)-mixed quermassintegrals and the checks built on them.

Notation: ``W_{q,j}(M, Q)`` is the dual mixed quermassintegral
``(1/n) int rho_M^q rho_Q^{n-q-j} du`` and ``W_{p,q,j}(M, N, Q)`` the
(p,q)-mixed quermassintegral
``(1/n) int (h_N / h_M)^p(a_M(u)) rho_M^q(u) rho_Q^{n-q-j}(u) du``,
``a_M`` being the radial Gauss map of M.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NonPositiveCombination
from .geometry import Ball, StarIntersection, StarUnion, apply_linear, lp_combination
from .measures import MeasureParams, cone_integrals, curvature_boundary_oracle, curvature_functional
from .quadrature import auto_grid, coarser, fsum_weighted


@dataclass
class QuermassResult:
    value: float
    error_estimate: float | None
    params: dict
    bodies: tuple = ()
    grid: dict = field(default_factory=dict)

    def __float__(self):
        return float(self.value)

    def to_dict(self):
        return {"value": self.value, "error_estimate": self.error_estimate,
                "params": self.params, "bodies": list(self.bodies), "grid": self.grid}


def _finish(compute, grid, estimate_error, params, bodies):
    value = compute(grid)
    err = abs(compute(coarser(grid)) - value) if estimate_error else None
    return QuermassResult(value, err, params, tuple(repr(b) for b in bodies), grid.describe())


def dual_quermass(M, Q, q, j=0, grid=None, resolution=None, estimate_error=True):
    """W_{q,j}(M, Q) = (1/n) int rho_M^q rho_Q^{n-q-j} du."""
    n = M.dim
    grid = grid or auto_grid(n, [M, Q], resolution)

    def compute(g):
        U = g.nodes
        return fsum_weighted(g.weights, M._radial(U) ** q * Q._radial(U) ** (n - q - j)) / n

    return _finish(compute, grid, estimate_error, {"q": q, "j": j}, (M, Q))


def dual_quermass_j(M, j=0, **kw):
    """W_j(M) = (1/n) int rho_M^{n-j} du."""
    return dual_quermass(M, M, M.dim - j, j, **kw)


def pq_mixed_quermass(M, N, Q, p, q, j=0, grid=None, resolution=None, route="direct",
                      estimate_error=True):
    """W_{p,q,j}(M, N, Q).

    ``route="direct"`` integrates over the sphere with the radial Gauss map;
    ``route="measure"`` (polytopal M only) sums (h_N(v_i)/h_M(v_i))^p against
    the atoms of C_{q,j}(M, Q, .).
    """
    n = M.dim
    grid = grid or auto_grid(n, [M, Q], resolution)
    prm = MeasureParams(p, q, j, Q)
    if route == "direct":
        def compute(g):
            return curvature_functional(M, prm, lambda V: N.support(V) ** p, g)
    elif route == "measure":
        P = M.as_polytope()
        if P is None:
            raise ValueError("measure route needs a polytopal M")

        def compute(g):
            atoms = cone_integrals(P, q, j, Q, g)
            act = P.active_indices
            ratio = (N.support(P.normals[act]) / P.h[act]) ** p
            return math.fsum((ratio * atoms[act]).tolist())
    else:
        raise ValueError(f"unknown route {route!r}")
    return _finish(compute, grid, estimate_error, {"p": p, "q": q, "j": j, "route": route},
                   (M, N, Q))


def lp_mixed_quermass_paper(M, N, p, j=0, grid=None, resolution=None, estimate_error=True):
    """(1/n) int (h_N / h_M)^p(a_M(u)) rho_M^{n-j}(u) du.

    For j = 0 this is the L_p mixed volume V_p(M, N).  For j > 0 it is the
    spherical formula taken literally, which in general differs from the
    classical L_p mixed quermassintegral.
    """
    n = M.dim
    grid = grid or auto_grid(n, [M], resolution)
    prm = MeasureParams(p, n - j, j, Ball(1.0, n))

    def compute(g):
        return curvature_functional(M, prm, lambda V: N.support(V) ** p, g)

    return _finish(compute, grid, estimate_error, {"p": p, "j": j}, (M, N))


def pq_mixed_volume_boundary(M, N, Q, p, q, **kw):
    """V_{p,q}(M, N, Q) for polytopal M as an integral over the facets of M.

    ``(1/n) int_{dM} h_N^p(nu) (x.nu)^{1-p} ||x||_Q^{q-n} dH^{n-1}``.
    """
    prm = MeasureParams(p, q, 0, Q)
    return curvature_boundary_oracle(M, prm, lambda V: N.support(V) ** p, **kw)


def _rel(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


def variational_check(M, N, Q, p, q, j=0, steps=(1e-2, 1e-3, 1e-4), resolution=None):
    """Compare d/dt W_{q,j}(M +_p t.N, Q) at t = 0 with (q/p) W_{p,q,j}(M, N, Q).

    Central differences over ``steps`` (each a factor 10 apart) are
    Richardson-extrapolated under an even error expansion.  The L_p
    combination is formed on the facet normals of M when M is a polytope.
    """
    if p == 0 or q == 0:
        raise ValueError("p and q must be nonzero")
    P = M.as_polytope()
    normals = None if P is None else P.normals[P.active_indices]

    def F(t):
        body = lp_combination(M, N, 1.0, t, p, normals=normals)
        return dual_quermass(body, Q, q, j, resolution=resolution, estimate_error=False).value

    diffs = []
    for s in steps:
        try:
            diffs.append((s, (F(s) - F(-s)) / (2 * s)))
        except NonPositiveCombination:
            continue
    if not diffs:
        raise NonPositiveCombination("no admissible finite-difference step")
    extrap = []
    for (s0, d0), (s1, d1) in zip(diffs, diffs[1:]):
        r2 = (s0 / s1) ** 2
        extrap.append((s1, (r2 * d1 - d0) / (r2 - 1)))
    route = "measure" if P is not None else "direct"
    W = pq_mixed_quermass(M, N, Q, p, q, j, resolution=resolution, route=route,
                          estimate_error=False).value
    rhs = q / p * W
    best = extrap[-1][1] if extrap else diffs[-1][1]
    return {
        "rhs": rhs,
        "finite_differences": [{"step": s, "value": d, "rel_gap": _rel(d, rhs)} for s, d in diffs],
        "richardson": [{"step": s, "value": d, "rel_gap": _rel(d, rhs)} for s, d in extrap],
        "derivative": best,
        "rel_gap": _rel(best, rhs),
    }


DEFAULT_IDENTITY_PARAMS = ((-1.0, 1.5), (0.5, -0.5), (2.0, 3.0), (1.5, 2.5))


def identity_suite(M, N, Q, params=DEFAULT_IDENTITY_PARAMS, js=(0, 1), resolution=None):
    """Evaluate the six special-case identities of W_{p,q,j}; report residuals.

    The bodies play the roles given; the identities substitute them into the
    slots as required (e.g. W_{p,q,j}(M, M, M) = W_j(M)).
    """
    n = M.dim
    kw = {"resolution": resolution, "estimate_error": False}
    rows = []

    def add(name, p, q, j, lhs, rhs):
        rows.append({"identity": name, "p": p, "q": q, "j": j, "lhs": lhs, "rhs": rhs,
                     "residual": _rel(lhs, rhs)})

    for j in js:
        Wj = dual_quermass_j(M, j, **kw).value
        for p, q in params:
            add("W(M,M,M) = W_j(M)", p, q, j,
                pq_mixed_quermass(M, M, M, p, q, j, **kw).value, Wj)
            add("W(M,M,Q) = W_{q,j}(M,Q)", p, q, j,
                pq_mixed_quermass(M, M, Q, p, q, j, **kw).value,
                dual_quermass(M, Q, q, j, **kw).value)
            lp = lp_mixed_quermass_paper(M, N, p, j, **kw).value
            add("W(M,N,M) = W_{p,j}(M,N)", p, q, j,
                pq_mixed_quermass(M, N, M, p, q, j, **kw).value, lp)
            add("W_{0,q,j}(M,N,Q) = W_{q,j}(M,Q)", 0.0, q, j,
                pq_mixed_quermass(M, N, Q, 0.0, q, j, **kw).value,
                dual_quermass(M, Q, q, j, **kw).value)
            add("W_{p,n-j,j}(M,N,Q) = W_{p,j}(M,N)", p, n - j, j,
                pq_mixed_quermass(M, N, Q, p, n - j, j, **kw).value, lp)
    if M.as_polytope() is not None and n in (2, 3):
        for p, q in params:
            add("W_{p,q,0}(M,N,Q) = V_{p,q}(M,N,Q)", p, q, 0,
                pq_mixed_quermass(M, N, Q, p, q, 0, **kw).value,
                pq_mixed_volume_boundary(M, N, Q, p, q))
        add("W_{p,q,0}(M,M,M) = V(M)", 1.0, 1.0, 0,
            pq_mixed_quermass(M, M, M, 1.0, 1.0, 0, **kw).value, M.as_polytope().volume())
    return {"rows": rows, "max_residual": max(r["residual"] for r in rows)}


def gl_covariance_check(M, N, Q, phi, p, q, j=0, resolution=None):
    """Ratio W_{p,q,j}(phi M, phi N, phi Q) / W_{p,q,j}(M, N, Q) against |det phi|.

    The identity holds for j = 0.  For j != 0 the quermassintegral is
    homogeneous of degree n - j and only the SL(n)-orthogonal part survives;
    the report records which regime was run.
    """
    phi = np.asarray(phi, dtype=float)
    kw = {"resolution": resolution, "estimate_error": False}
    base = pq_mixed_quermass(M, N, Q, p, q, j, **kw).value
    img = pq_mixed_quermass(apply_linear(M, phi), apply_linear(N, phi), apply_linear(Q, phi),
                            p, q, j, **kw).value
    det = abs(float(np.linalg.det(phi)))
    ratio = img / base
    return {"ratio": ratio, "abs_det": det, "rel_error": abs(ratio - det) / det,
            "special_linear": abs(det - 1.0) < 1e-12, "j": j}


def valuation_check_starbody(M, N, Q1, Q2, p, q, j=0, resolution=None):
    """W(M,N,Q1 u Q2) + W(M,N,Q1 n Q2) against W(M,N,Q1) + W(M,N,Q2) on one grid."""
    grid = auto_grid(M.dim, [M, Q1, Q2], resolution)
    kw = {"grid": grid, "estimate_error": False}

    def W(Q):
        return pq_mixed_quermass(M, N, Q, p, q, j, **kw).value

    lhs = W(StarUnion(Q1, Q2)) + W(StarIntersection(Q1, Q2))
    rhs = W(Q1) + W(Q2)
    return {"lhs": lhs, "rhs": rhs, "residual": _rel(lhs, rhs)}
