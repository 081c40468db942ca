"""Discrete (p,q)-dual mixed Minkowski problem.

Given atoms (v_i, mu_i) the solver looks for support numbers h such that
the polytope [h] carries C_{p,q,j}([h], Q, {v_i}) = mu_i.  It maximizes

    Phi(h) = -(1/p) log sum_i h_i^p mu_i + (1/q) log W_{q,j}([h], Q)

over x = log h.  Phi is invariant under h -> c h, so x is kept centered
(sum x_i = 0).  At a critical point h_i^p mu_i / sum = atom_i / W, where
atom_i is the mass of C_{q,j}([h], Q, .) on v_i; a final dilation by
lambda with lambda^{q-p} = sum_i h_i^p mu_i / W turns this into the
prescribed measure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConcentratedMeasure,
    MaxItersExceeded,
    NonFiniteObjective,
    NotEvenMeasure,
    UnboundedWulffShape,
)
from .geometry import Ball, HPolytope, not_in_closed_hemisphere, unit
from .measures import DiscreteSphericalMeasure, MeasureParams, curvature_atoms
from .quadrature import cone_partitioned_grid, refined

EVEN_TOL = 1e-12
RANK_TOL = 1e-10
EPS = np.finfo(float).eps


class FacetDeath(Exception):
    """An atom's cone became empty (its facet is redundant in [h])."""


def validate_measure(mu, require_even=True):
    """Diagnostics of a target measure; never raises.

    ``signals`` lists the error classes :func:`solve` would raise.
    """
    V, m = mu.directions, mu.masses
    n = mu.dim
    S = (V * m[:, None]).T @ V
    eig = np.linalg.eigvalsh(S)
    tr = float(np.trace(S))
    G = V @ V.T
    defect = 0.0
    unmatched = 0
    for i in range(len(m)):
        partners = np.flatnonzero(G[i] <= -1 + 1e-12)
        if len(partners) == 0:
            unmatched += 1
            continue
        k = partners[0]
        defect = max(defect, abs(m[i] - m[k]) / max(m[i], m[k]))
    even = unmatched == 0 and defect <= EVEN_TOL
    np.fill_diagonal(G, -1.0)
    dup = [(int(a), int(b)) for a, b in zip(*np.nonzero(np.triu(G >= 1 - 1e-12)))]
    concentrated = bool(eig[0] <= RANK_TOL * tr)
    signals = []
    if require_even and not even:
        signals.append("NotEvenMeasure")
    if concentrated:
        signals.append("ConcentratedMeasure")
    if np.any(m <= 0):
        signals.append("NonPositiveMass")
    if dup:
        signals.append("DuplicateDirections")
    return {
        "dimension": n,
        "atoms": len(m),
        "total_mass": mu.total,
        "even": bool(even),
        "unmatched_atoms": unmatched,
        "evenness_defect": defect,
        "second_moment_eigenvalues": eig.tolist(),
        "min_eigenvalue_ratio": float(eig[0] / tr) if tr > 0 else 0.0,
        "concentrated": concentrated,
        "duplicates": dup,
        "signals": signals,
        "ok": not signals,
    }


@dataclass
class TargetMeasure:
    """Target atoms together with the checks the existence theory needs."""

    measure: DiscreteSphericalMeasure
    require_even: bool = True
    diagnostics: dict = field(init=False)

    def __post_init__(self):
        self.diagnostics = validate_measure(self.measure, self.require_even)
        sig = self.diagnostics["signals"]
        if "NotEvenMeasure" in sig:
            raise NotEvenMeasure(
                f"measure is not even (defect {self.diagnostics['evenness_defect']:.3g}, "
                f"{self.diagnostics['unmatched_atoms']} atoms without antipode)")
        if "ConcentratedMeasure" in sig:
            raise ConcentratedMeasure(
                "measure is concentrated on a great subsphere "
                f"(eigenvalues {self.diagnostics['second_moment_eigenvalues']})")
        if "NonPositiveMass" in sig:
            raise ConcentratedMeasure("atom masses must be positive")
        if "DuplicateDirections" in sig:
            raise ConcentratedMeasure("repeated atom directions")
        if not not_in_closed_hemisphere(self.measure.directions):
            raise UnboundedWulffShape("atom directions lie in a closed hemisphere")

    @property
    def directions(self):
        return self.measure.directions

    @property
    def masses(self):
        return self.measure.masses

    @property
    def even(self):
        return self.diagnostics["even"]

    @property
    def second_moment(self):
        V, m = self.directions, self.masses
        return (V * m[:, None]).T @ V


@dataclass
class SolveConfig:
    p: float
    q: float
    j: float = 0.0
    Q: object = None
    init: object = "uniform"
    init_body: object = None
    max_iters: int = 5000
    tol: float = 1e-9
    backtrack: float = 0.5
    armijo: float = 1e-4
    min_step: float = 1e-12
    resolution: int | None = None
    level: int | None = None
    verify_tol: float = 1e-6
    unsafe_params: bool = False
    seed: int | None = None
    facet_policy: str = "allow"

    def check(self, n):
        if self.p == 0 or self.q == 0:
            raise ValueError("p and q must be nonzero")
        if self.j == n:
            raise ValueError("j must differ from the dimension")
        if not self.unsafe_params and not (self.p > 0 and self.q > 0):
            raise ValueError("existence is only guaranteed for p, q > 0 (use unsafe_params)")
        if not 0 < self.backtrack < 1:
            raise ValueError("backtracking factor must lie in (0, 1)")
        if self.facet_policy not in ("allow", "reject"):
            raise ValueError("facet_policy must be 'allow' or 'reject'")


@dataclass
class SolveReport:
    polytope: HPolytope
    support: np.ndarray
    objective: float
    iterations: int
    status: str
    scale: float
    up_to_scale: bool
    residuals: np.ndarray
    trace: list
    achieved: np.ndarray
    target: np.ndarray
    scale_residual: float
    gradient_norm: float
    error_estimate: float = 0.0

    @property
    def max_residual(self):
        return float(np.max(np.abs(self.residuals)))

    def to_dict(self, include_trace=True):
        d = {
            "status": self.status,
            "iterations": self.iterations,
            "objective": self.objective,
            "gradient_norm": self.gradient_norm,
            "scale": self.scale,
            "up_to_scale": self.up_to_scale,
            "scale_residual": self.scale_residual,
            "max_residual": self.max_residual,
            "error_estimate": self.error_estimate,
            "body": {"type": "polytope-h", "normals": self.polytope.normals.tolist(),
                     "support": self.support.tolist()},
            "atoms": [{"normal": v.tolist(), "target": float(t), "achieved": float(a),
                       "residual": float(r)}
                      for v, t, a, r in zip(self.polytope.normals, self.target, self.achieved,
                                            self.residuals)],
        }
        if include_trace:
            d["trace"] = self.trace
        return d


def _as_target(mu):
    if isinstance(mu, TargetMeasure):
        return mu
    return TargetMeasure(mu)


def _Q(config, n):
    return config.Q if config.Q is not None else Ball(1.0, n)


def _state(x, V, mu, config, Q, strict=True):
    """Objective, gradient and intermediate quantities at x = log h.

    With ``strict`` a redundant facet raises :class:`FacetDeath`; otherwise
    its atom is simply zero.
    """
    h = np.exp(x)
    P = HPolytope(V, h, check=False)
    if strict and not np.all(P.active):
        raise FacetDeath(np.flatnonzero(~P.active))
    grid = cone_partitioned_grid([P, Q], config.resolution, config.level)
    atoms = curvature_atoms(P, MeasureParams(0.0, config.q, config.j, Q), grid)
    W = math.fsum(atoms.tolist())
    hp = h ** config.p * mu
    S = math.fsum(hp.tolist())
    phi = -math.log(S) / config.p + math.log(W) / config.q
    if not (np.isfinite(phi) and W > 0 and S > 0):
        raise NonFiniteObjective(f"objective is not finite (sum={S}, W={W})")
    g = atoms / W - hp / S
    return {"phi": phi, "grad": g, "h": h, "P": P, "atoms": atoms, "W": W, "S": S, "grid": grid}


def _prepare(h, mu, config):
    mu = _as_target(mu)
    V = mu.directions
    n = V.shape[1]
    config.check(n)
    h = np.asarray(h, dtype=float)
    if h.shape != (len(V),):
        raise ValueError("one support number per atom required")
    if np.any(h <= 0):
        raise ValueError("support numbers must be positive")
    return mu, V, _Q(config, n), np.log(h)


def phi_objective(h, mu, config):
    """Phi(h) = -(1/p) log sum h_i^p mu_i + (1/q) log W_{q,j}([h], Q).

    Raises :class:`UnboundedWulffShape` when [h] loses a facet of the
    target's direction set (the atom would have no cone).
    """
    mu, V, Q, x = _prepare(h, mu, config)
    try:
        return _state(x, V, mu.masses, config, Q)["phi"]
    except FacetDeath as exc:
        raise UnboundedWulffShape(f"facets {exc.args[0].tolist()} are redundant in [h]") from None


def phi_gradient(h, mu, config):
    """Gradient of Phi with respect to x_i = log h_i (components sum to zero)."""
    mu, V, Q, x = _prepare(h, mu, config)
    try:
        return _state(x, V, mu.masses, config, Q)["grad"]
    except FacetDeath as exc:
        raise UnboundedWulffShape(f"facets {exc.args[0].tolist()} are redundant in [h]") from None


def _initial(mu, config):
    V = mu.directions
    init = config.init
    if isinstance(init, str):
        if init == "uniform":
            return np.ones(len(V))
        if init == "from-body":
            if config.init_body is None:
                raise ValueError("init='from-body' needs init_body")
            return np.asarray(config.init_body.support(V), dtype=float)
        if init == "random":
            # antipodal atoms get equal heights so that even data stay even
            rng = np.random.default_rng(config.seed)
            h = np.exp(rng.uniform(-0.3, 0.3, len(V)))
            G = V @ V.T
            for i in range(len(V)):
                k = np.flatnonzero(G[i] <= -1 + 1e-12)
                if len(k) and k[0] < i:
                    h[i] = h[k[0]]
            return h
        raise ValueError(f"unknown init {init!r}")
    return np.asarray(init, dtype=float)


def _centered(x):
    return x - math.fsum(x.tolist()) / len(x)


def solve(mu, config):
    """Maximize Phi by projected gradient ascent in log h, then fix the scale.

    Steps start from the Barzilai-Borwein length and are halved (factor
    ``config.backtrack``) until the sufficient-increase condition holds.
    When the predicted increase is below the rounding level of Phi, a step is
    accepted if Phi does not drop by more than a few ulps and the gradient
    shrinks.  With ``facet_policy="reject"`` trial points whose Wulff shape
    loses a facet are rejected; the default lets a facet vanish temporarily
    (its atom is then zero and the gradient pushes its height back down).
    A converged point always has every facet active.
    Status is ``converged`` (gradient and verified residuals within
    tolerance), ``unverified`` (gradient small, residuals not),
    ``max-iters``, ``stalled`` (no acceptable step) or ``degenerate-facet``.
    Raises :class:`MaxItersExceeded` carrying the report when the
    iteration budget runs out.
    """
    mu = _as_target(mu)
    V, masses = mu.directions, mu.masses
    n = V.shape[1]
    config.check(n)
    Q = _Q(config, n)
    x = _centered(np.log(_initial(mu, config)))
    strict = config.facet_policy == "reject"
    try:
        st = _state(x, V, masses, config, Q, strict)
    except FacetDeath as exc:
        raise UnboundedWulffShape(
            f"initial support numbers make facets {exc.args[0].tolist()} redundant") from None
    trace = [{"iteration": 0, "phi": st["phi"], "grad_inf": float(np.max(np.abs(st["grad"]))),
              "step": 0.0}]
    status = "max-iters"
    alpha = 1.0
    prev = None
    it = 0
    while True:
        g = st["grad"]
        gnorm = float(np.max(np.abs(g)))
        if gnorm <= config.tol:
            status = "converged"
            break
        if it >= config.max_iters:
            break
        if prev is not None:
            s = x - prev[0]
            y = g - prev[1]
            sy = float(s @ y)
            if sy < 0:
                alpha = float(s @ s) / -sy
            else:
                alpha = min(2 * alpha, 1e6)
        g2 = float(g @ g)
        step = alpha
        accepted = None
        died = False
        while step >= config.min_step:
            xt = _centered(x + step * g)
            try:
                trial = _state(xt, V, masses, config, Q, strict)
            except FacetDeath:
                died = True
                step *= config.backtrack
                continue
            died = False
            gain = trial["phi"] - st["phi"]
            want = config.armijo * step * g2
            noise = 8 * EPS * max(abs(st["phi"]), 1.0)
            if gain >= want and gain > -noise:
                accepted = trial
                break
            if want <= noise and gain >= -noise and \
                    np.max(np.abs(trial["grad"])) < gnorm:
                accepted = trial
                break
            step *= config.backtrack
        if accepted is None:
            status = "degenerate-facet" if died else "stalled"
            break
        it += 1
        prev = (x, g)
        x, st = xt, accepted
        alpha = step
        trace.append({"iteration": it, "phi": st["phi"],
                      "grad_inf": float(np.max(np.abs(st["grad"]))), "step": step})
    report = _finish(st, mu, config, Q, status, it, trace)
    if status == "max-iters":
        raise MaxItersExceeded(f"no convergence in {config.max_iters} iterations", report)
    return report


def _finish(st, mu, config, Q, status, it, trace):
    p, q = config.p, config.q
    h = st["h"]
    up_to_scale = p == q
    if up_to_scale:
        lam = 1.0
        h_out = h / math.exp(math.fsum(np.log(h).tolist()) / len(h))
    else:
        lam = (st["S"] / st["W"]) ** (1.0 / (q - p))
        h_out = lam * h
    P = HPolytope(mu.directions, h_out, check=False)
    hp = math.fsum((h_out ** p * mu.masses).tolist())
    grid = cone_partitioned_grid([P, Q], config.resolution, config.level)
    W = math.fsum(curvature_atoms(P, MeasureParams(0.0, q, config.j, Q), grid).tolist())
    prm = MeasureParams(p, q, config.j, Q)
    achieved = curvature_atoms(P, prm, refined(grid))
    err = float(np.max(np.abs(curvature_atoms(P, prm, grid) - achieved) / mu.masses))
    residuals = (achieved - mu.masses) / mu.masses
    if status == "converged" and not up_to_scale and np.max(np.abs(residuals)) > config.verify_tol:
        status = "unverified"
    return SolveReport(
        polytope=P, support=h_out, objective=st["phi"], iterations=it, status=status,
        scale=lam, up_to_scale=up_to_scale, residuals=residuals, trace=trace,
        achieved=achieved, target=mu.masses.copy(), scale_residual=abs(hp - W) / W,
        gradient_norm=float(np.max(np.abs(st["grad"]))), error_estimate=err)


def measure_of(M, p, q, j=0, Q=None, resolution=None, level=None):
    """Atoms C_{p,q,j}(M, Q, .) of a polytope on its active facets (solver-ready)."""
    P = M.as_polytope().pruned_copy()
    Q = Q if Q is not None else Ball(1.0, P.dim)
    grid = cone_partitioned_grid([P, Q], resolution, level)
    atoms = curvature_atoms(P, MeasureParams(p, q, j, Q), grid)
    return DiscreteSphericalMeasure(P.normals, atoms), P


def round_trip(M, config):
    """Compute the measure of ``M``, solve for it, and compare support numbers."""
    mu, P = measure_of(M, config.p, config.q, config.j, config.Q, config.resolution, config.level)
    report = solve(TargetMeasure(mu), config)
    if report.up_to_scale:
        ref = P.h / math.exp(math.fsum(np.log(P.h).tolist()) / len(P.h))
    else:
        ref = P.h
    err = float(np.max(np.abs(report.support - ref) / ref))
    return {"report": report, "reference": ref, "support_error": err, "measure": mu}


def symmetric_random_polytope(rng, dim, max_facets):
    """Origin-symmetric polytope with at most ``max_facets`` facets, all active."""
    while True:
        half = int(rng.integers(dim, max_facets // 2 + 1))
        D = unit(rng.standard_normal((half, dim)))
        G = np.abs(D @ D.T)
        keep = [i for i in range(half) if all(G[i, k] < 1 - 1e-3 for k in range(i))]
        D = D[keep]
        V = np.vstack([D, -D])
        if len(V) < 2 * dim or not not_in_closed_hemisphere(V):
            continue
        h = rng.uniform(0.5, 2.0, len(D))
        P = HPolytope(V, np.concatenate([h, h]), check=False).pruned_copy()
        if P.m >= 2 * dim:
            return P
