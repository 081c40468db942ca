"""Randomized and golden-case checks of the inequalities for W_{p,q,j}.

Every check evaluates both sides on one shared grid and again on the next
coarser grid; the change in the normalized slack is the quadrature error
bound.  A check is only reported as violated when the slack is more
negative than that bound plus 1e-9.

Checked statements (``W`` is the (p,q)-mixed quermassintegral):

* Minkowski type, j = 0:
  ``W_{p,q,0}(M,N,Q) >= V(M)^{(q-p)/n} V(N)^{p/n} V(Q)^{(n-q)/n}``
  for ``1 <= q/n <= p``; for j > 0 only the Hoelder step
  ``W_{p,q,j} >= W_{(n-j)p/q,j}(M,N)^{q/(n-j)} W_j(Q)^{(n-q-j)/(n-j)}``.
* Monotonicity: ``(W_{p,q,j}/W_{q,j})^{1/p} >= (W_{p-q,q,j}/W_{q,j})^{1/(p-q)}``.
* Cyclic (first or second slot varying over p < q < r):
  ``W_q^{r-p} <= W_p^{r-q} W_r^{q-p}``, plus the degenerations Q = M and
  N = M, which are run in this (<=) direction.
"""
from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .bodyio import body_from_spec
from .errors import PQDualError
from .geometry import not_in_closed_hemisphere
from .quadrature import auto_grid, coarser, refined
from .quermass import dual_quermass, dual_quermass_j, lp_mixed_quermass_paper, pq_mixed_quermass

EQUALITY_TOL = 1e-8
VIOLATION_MARGIN = 1e-9
THEOREMS = ("5.1", "5.2", "5.3", "5.4")


@dataclass
class InequalityReport:
    name: str
    params: dict
    bodies: tuple
    lhs: float
    rhs: float
    direction: str
    slack: float
    error_bound: float
    verdict: str
    in_hypothesis: bool
    region: str | None = None
    resolution: dict = field(default_factory=dict)

    def to_dict(self):
        d = asdict(self)
        d["bodies"] = list(self.bodies)
        return d


def _slack(lhs, rhs, direction):
    scale = max(abs(lhs), abs(rhs), 1e-300)
    return (lhs - rhs) / scale if direction == ">=" else (rhs - lhs) / scale


def _verdict(slack, err):
    if slack < -(err + VIOLATION_MARGIN):
        return "violated"
    if abs(slack) <= EQUALITY_TOL:
        return "equality-case"
    return "holds"


def _run(name, sides, direction, bodies, grid, params, in_hypothesis, region=None,
         inverted=False):
    if inverted:
        direction = "<=" if direction == ">=" else ">="
    lhs, rhs = sides(grid)
    s = _slack(lhs, rhs, direction)
    lc, rc = sides(coarser(grid))
    err = abs(_slack(lc, rc, direction) - s)
    return InequalityReport(name, params, tuple(repr(b) for b in bodies), lhs, rhs, direction,
                            s, err, _verdict(s, err), in_hypothesis, region, grid.describe())


def _W(M, N, Q, p, q, j, g):
    return pq_mixed_quermass(M, N, Q, p, q, j, grid=g, estimate_error=False).value


def _grid(M, N, Q, grid, resolution):
    return grid or auto_grid(M.dim, [M, N, Q], resolution)


def check_minkowski(M, N, Q, p, q, j=0, grid=None, resolution=None, inverted=False):
    """Minkowski-type inequality (full statement at j = 0, Hoelder step for j > 0)."""
    n = M.dim
    grid = _grid(M, N, Q, grid, resolution)
    a = q / (n - j)
    gate = 1 - 1e-12 <= a <= p * (1 + 1e-12)

    if j == 0:
        def sides(g):
            VM = dual_quermass_j(M, 0, grid=g, estimate_error=False).value
            VN = dual_quermass_j(N, 0, grid=g, estimate_error=False).value
            VQ = dual_quermass_j(Q, 0, grid=g, estimate_error=False).value
            rhs = VM ** ((q - p) / n) * VN ** (p / n) * VQ ** ((n - q) / n)
            return _W(M, N, Q, p, q, 0, g), rhs
        name = "minkowski"
    else:
        def sides(g):
            lp = lp_mixed_quermass_paper(M, N, (n - j) * p / q, j, grid=g,
                                         estimate_error=False).value
            WQ = dual_quermass_j(Q, j, grid=g, estimate_error=False).value
            return _W(M, N, Q, p, q, j, g), lp ** a * WQ ** ((n - q - j) / (n - j))
        name = "minkowski-holder-step"
    return _run(name, sides, ">=", (M, N, Q), grid, {"p": p, "q": q, "j": j}, gate,
                inverted=inverted)


def monotonic_region(p, q):
    if 0 < p < q:
        return "0<p<q"
    if p < 0 < q:
        return "p<0<q"
    return "outside"


def check_monotonic(M, N, Q, p, q, j=0, grid=None, resolution=None, inverted=False):
    """(W_{p,q,j}/W_{q,j})^{1/p} >= (W_{p-q,q,j}/W_{q,j})^{1/(p-q)}."""
    grid = _grid(M, N, Q, grid, resolution)
    region = monotonic_region(p, q)

    def sides(g):
        base = dual_quermass(M, Q, q, j, grid=g, estimate_error=False).value
        lhs = (_W(M, N, Q, p, q, j, g) / base) ** (1 / p)
        rhs = (_W(M, N, Q, p - q, q, j, g) / base) ** (1 / (p - q))
        return lhs, rhs

    return _run("monotonic", sides, ">=", (M, N, Q), grid, {"p": p, "q": q, "j": j},
                region != "outside", region, inverted=inverted)


def _cyclic_sides(value, p, q, r):
    def sides(g):
        return value(q, g) ** (r - p), value(p, g) ** (r - q) * value(r, g) ** (q - p)
    return sides


def check_cyclic(M, N, Q, p, q, r, s, j=0, grid=None, resolution=None, variant="first-slot",
                 inverted=False):
    """W_q^{r-p} <= W_p^{r-q} W_r^{q-p} with the exponent in the given slot varying.

    ``first-slot`` varies the first index (W_{t,s,j}), ``second-slot`` the
    second (W_{s,t,j}).
    """
    n = M.dim
    grid = _grid(M, N, Q, grid, resolution)
    if variant == "first-slot":
        def value(t, g):
            return _W(M, N, Q, t, s, j, g)
    elif variant == "second-slot":
        def value(t, g):
            return _W(M, N, Q, s, t, j, g)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    gate = p < q < r <= n
    return _run(f"cyclic-{variant}", _cyclic_sides(value, p, q, r), "<=", (M, N, Q), grid,
                {"p": p, "q": q, "r": r, "s": s, "j": j}, gate, inverted=inverted)


def check_cyclic_degenerate(M, N, Q, p, q, r, j=0, grid=None, resolution=None,
                            variant="first-slot", inverted=False):
    """The cyclic inequality after putting Q = M (first slot) or N = M (second slot).

    With Q = M the first-slot quantity is the L_p mixed quermassintegral
    W_{t,j}(M, N); with N = M the second-slot quantity is the dual mixed
    quermassintegral W_{t,j}(M, Q).  Both are evaluated by their own
    formulas, not through W_{p,q,j}.
    """
    n = M.dim
    if variant == "first-slot":
        grid = _grid(M, N, M, grid, resolution)
        bodies = (M, N)

        def value(t, g):
            return lp_mixed_quermass_paper(M, N, t, j, grid=g, estimate_error=False).value
        name = "cyclic-lp-quermass"
    elif variant == "second-slot":
        grid = _grid(M, M, Q, grid, resolution)
        bodies = (M, Q)

        def value(t, g):
            return dual_quermass(M, Q, t, j, grid=g, estimate_error=False).value
        name = "cyclic-dual-quermass"
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return _run(name, _cyclic_sides(value, p, q, r), "<=", bodies, grid,
                {"p": p, "q": q, "r": r, "j": j}, p < q < r <= n, inverted=inverted)


def log_convexity_check(M, N, Q, s, j=0, ts=None, slot="first", grid=None, resolution=None):
    """Second differences of t -> log W on an even grid of exponents (default 7 points on [-1, 3])."""
    ts = np.linspace(-1.0, 3.0, 7) if ts is None else np.asarray(ts, dtype=float)
    grid = _grid(M, N, Q, grid, resolution)
    if slot == "first":
        vals = [_W(M, N, Q, t, s, j, grid) for t in ts]
    else:
        vals = [_W(M, N, Q, s, t, j, grid) for t in ts]
    logs = np.log(vals)
    d2 = logs[:-2] - 2 * logs[1:-1] + logs[2:]
    return {"t": ts.tolist(), "log_values": logs.tolist(), "second_differences": d2.tolist(),
            "min_second_difference": float(d2.min()), "convex": bool(d2.min() >= -1e-9)}


# -- random bodies ---------------------------------------------------------


class BodyGenerator:
    """Seeded source of random body specifications.

    Families: ``polytope-h`` (m in [n+1, 20] random normals, redrawn until
    they are not contained in a closed hemisphere, heights in [0.3, 3]),
    ``ellipsoid`` and ``linear-ball`` (a random linear image of the unit
    ball).  With ``symmetric=True`` polytopes come as origin-symmetric sets
    of pairs +-v with equal heights.  :meth:`star_spec` additionally produces
    star-shaped (non-convex) unions of two ellipsoids.
    """

    DEFAULT_WEIGHTS = {"polytope-h": 0.5, "ellipsoid": 0.25, "linear-ball": 0.25}

    def __init__(self, seed=0, dim=2, weights=None, symmetric=False, max_facets=20):
        self.seed = seed
        self.dim = int(dim)
        self.rng = np.random.default_rng(seed)
        w = dict(weights or self.DEFAULT_WEIGHTS)
        self.families = list(w)
        total = sum(w.values())
        self.probs = np.array([w[f] / total for f in self.families])
        self.symmetric = symmetric
        self.max_facets = max_facets

    def _directions(self, m):
        return self.rng.standard_normal((m, self.dim))

    def polytope_spec(self, m=None):
        n = self.dim
        lo = n + 1
        if m is None:
            m = int(self.rng.integers(lo, self.max_facets + 1))
        while True:
            if self.symmetric:
                half = max((m + 1) // 2, n)
                V = self._directions(half)
                V /= np.linalg.norm(V, axis=1)[:, None]
                h = self.rng.uniform(0.3, 3.0, half)
                V, h = np.vstack([V, -V]), np.concatenate([h, h])
            else:
                V = self._directions(m)
                V /= np.linalg.norm(V, axis=1)[:, None]
                h = self.rng.uniform(0.3, 3.0, m)
            G = V @ V.T
            np.fill_diagonal(G, -1.0)
            if np.max(G) < 1 - 1e-6 and not_in_closed_hemisphere(V):
                return {"type": "polytope-h", "normals": V.tolist(), "support": h.tolist()}

    def ellipsoid_spec(self):
        return {"type": "ellipsoid", "semiaxes": self.rng.uniform(0.5, 2.0, self.dim).tolist()}

    def linear_ball_spec(self):
        Qm, _ = np.linalg.qr(self.rng.standard_normal((self.dim, self.dim)))
        A = Qm @ np.diag(self.rng.uniform(0.5, 2.0, self.dim))
        return {"type": "linear", "matrix": A.tolist(),
                "inner": {"type": "ball", "radius": 1.0, "dimension": self.dim}}

    def convex_spec(self, family=None):
        if family is None:
            family = self.families[int(self.rng.choice(len(self.families), p=self.probs))]
        if family == "polytope-h":
            return self.polytope_spec()
        if family == "ellipsoid":
            return self.ellipsoid_spec()
        if family == "linear-ball":
            return self.linear_ball_spec()
        raise ValueError(f"unknown family {family!r}")

    def star_spec(self, star_fraction=0.2):
        """Spec of a star body: convex most of the time, else a union of two ellipsoids."""
        if self.rng.random() < star_fraction:
            R, _ = np.linalg.qr(self.rng.standard_normal((self.dim, self.dim)))
            return {"type": "star-union", "a": self.ellipsoid_spec(),
                    "b": {"type": "linear", "matrix": R.tolist(), "inner": self.ellipsoid_spec()}}
        return self.convex_spec()

    def dilates(self, spec, count=3):
        """Radial rescalings of one body by random factors in [0.5, 2]."""
        return [{"type": "radial-scale", "factor": float(f), "inner": spec}
                for f in self.rng.uniform(0.5, 2.0, count)]

    def body(self, spec=None):
        spec = spec or self.convex_spec()
        return spec, body_from_spec(spec)


# -- campaigns -------------------------------------------------------------


def _sample_case(theorem, idx, seed, dim, dilate_every):
    gen = BodyGenerator(seed=[int(seed), int(idx)], dim=dim)
    rng = gen.rng
    n = dim
    dilate = dilate_every and (idx // len(THEOREMS)) % dilate_every == dilate_every - 1
    if dilate:
        M, N, Q = gen.dilates(gen.convex_spec(), 3)
    else:
        M, N, Q = gen.convex_spec(), gen.convex_spec(), gen.star_spec()
    j = int(rng.integers(0, 2)) if n > 1 else 0
    params = {"j": j}
    if theorem == "5.1":
        a = rng.uniform(1.0, 2.5)
        params.update(q=float(a * (n - j)), p=float(rng.uniform(a, a + 2.0)))
    elif theorem == "5.2":
        q = float(rng.uniform(0.5, 3.0))
        if (idx // len(THEOREMS)) % 2 == 0:
            p = float(q * rng.uniform(0.05, 0.95))
        else:
            p = float(-rng.uniform(0.2, 2.0))
        params.update(p=p, q=q)
    else:
        while True:
            p, q, r = np.sort(rng.uniform(-2.0, n, 3))
            if q - p > 0.1 and r - q > 0.1:
                break
        params.update(p=float(p), q=float(q), r=float(r), s=float(rng.uniform(-1.0, 3.0)))
    return {"index": idx, "theorem": theorem, "dilates": bool(dilate), "params": params,
            "bodies": {"M": M, "N": N, "Q": Q}}


def _evaluate_case(case, grid_fn=None, resolution=None):
    b = {k: body_from_spec(v) for k, v in case["bodies"].items()}
    M, N, Q = b["M"], b["N"], b["Q"]
    prm = case["params"]
    th = case["theorem"]

    def grid_for(*bodies):
        g = auto_grid(M.dim, list(bodies), resolution)
        return grid_fn(g) if grid_fn else g

    if th == "5.1":
        return [check_minkowski(M, N, Q, prm["p"], prm["q"], prm["j"], grid=grid_for(M, N, Q))]
    if th == "5.2":
        return [check_monotonic(M, N, Q, prm["p"], prm["q"], prm["j"], grid=grid_for(M, N, Q))]
    variant = "first-slot" if th == "5.3" else "second-slot"
    args = (prm["p"], prm["q"], prm["r"])
    out = [check_cyclic(M, N, Q, *args, prm["s"], prm["j"], grid=grid_for(M, N, Q),
                        variant=variant)]
    if variant == "first-slot":
        out.append(check_cyclic_degenerate(M, N, M, *args, prm["j"], grid=grid_for(M, N),
                                           variant=variant))
    else:
        out.append(check_cyclic_degenerate(M, M, Q, *args, prm["j"], grid=grid_for(M, Q),
                                           variant=variant))
    return out


def _run_case(case, resolution):
    try:
        reports = _evaluate_case(case, resolution=resolution)
    except PQDualError as exc:
        return {"case": case, "error": f"{type(exc).__name__}: {exc}", "reports": []}
    rechecked = []
    for k, rep in enumerate(reports):
        if rep.verdict == "violated":
            again = _evaluate_case(case, grid_fn=refined, resolution=resolution)[k]
            rechecked.append({"position": k, "report": again.to_dict(),
                              "persistent": again.verdict == "violated"})
    return {"case": case, "reports": reports, "rechecked": rechecked}


def _group_key(theorem, rep):
    if theorem == "5.2":
        return f"{theorem}:{rep.region}"
    if rep.name.startswith("cyclic-") and "quermass" in rep.name:
        return f"{theorem}:{rep.name}"
    if rep.name == "minkowski-holder-step":
        return f"{theorem}:holder-step"
    return theorem


def fuzz_campaign(config):
    """Run a seeded campaign over the requested theorems.

    ``config`` keys: ``theorems`` (subset of "5.1".."5.4"), ``cases``,
    ``seed``, ``dimension``, ``resolution`` (grid resolution or None),
    ``threads``, ``dilate_every`` (every k-th case uses three dilates of one
    body; 0 disables) and ``dump_dir``.  Case k cycles through the theorems
    and draws its bodies from a generator seeded by (seed, k), so results do
    not depend on the thread count.  Violations are re-run at doubled
    resolution; those that persist are returned (and written to
    ``dump_dir``) as JSON reproductions.
    """
    theorems = [str(t) for t in config.get("theorems", THEOREMS)]
    for t in theorems:
        if t not in THEOREMS:
            raise ValueError(f"unknown theorem {t!r}")
    cases = int(config.get("cases", 0))
    seed = int(config.get("seed", 0))
    dim = int(config.get("dimension", 2))
    resolution = config.get("resolution")
    threads = int(config.get("threads") or 1)
    dilate_every = int(config.get("dilate_every", 10))
    specs = [_sample_case(theorems[i % len(theorems)], i, seed, dim, dilate_every)
             for i in range(cases)] if theorems else []
    if threads > 1 and len(specs) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda c: _run_case(c, resolution), specs))
    else:
        results = [_run_case(c, resolution) for c in specs]

    groups = {}
    persistent, errors, rows = [], [], []
    dilate_slack = 0.0
    for res in results:
        case = res["case"]
        if "error" in res:
            errors.append({"index": case["index"], "error": res["error"], "case": case})
            continue
        re = {r["position"]: r for r in res["rechecked"]}
        for k, rep in enumerate(res["reports"]):
            key = _group_key(case["theorem"], rep)
            grp = groups.setdefault(key, {"checks": 0, "holds": 0, "equality-case": 0,
                                          "violated": 0, "persistent": 0,
                                          "outside_hypothesis": 0, "min_slack": None})
            grp["checks"] += 1
            grp[rep.verdict] += 1
            if not rep.in_hypothesis:
                grp["outside_hypothesis"] += 1
            grp["min_slack"] = rep.slack if grp["min_slack"] is None else min(grp["min_slack"], rep.slack)
            if case["dilates"]:
                dilate_slack = max(dilate_slack, abs(rep.slack))
            is_persistent = k in re and re[k]["persistent"]
            if is_persistent:
                grp["persistent"] += 1
                if rep.in_hypothesis:
                    persistent.append({"case": case, "report": rep.to_dict(),
                                       "recheck": re[k]["report"]})
            rows.append({"index": case["index"], "theorem": case["theorem"], "check": rep.name,
                         "region": rep.region, "slack": rep.slack, "error_bound": rep.error_bound,
                         "verdict": rep.verdict, "in_hypothesis": rep.in_hypothesis,
                         "dilates": case["dilates"]})
    dump_dir = config.get("dump_dir")
    if dump_dir and persistent:
        Path(dump_dir).mkdir(parents=True, exist_ok=True)
        for item in persistent:
            path = Path(dump_dir) / f"counterexample_{seed}_{item['case']['index']}.json"
            path.write_text(json.dumps(item, sort_keys=True, indent=2) + "\n")
    return {
        "config": {"theorems": theorems, "cases": cases, "seed": seed, "dimension": dim,
                   "resolution": resolution, "dilate_every": dilate_every},
        "groups": dict(sorted(groups.items())),
        "persistent_violations": len(persistent),
        "counterexamples": persistent,
        "errors": errors,
        "max_dilate_abs_slack": dilate_slack,
        "rows": rows,
    }


def summarize_slack(rows):
    """Smallest slack per check name, a compact view of a campaign."""
    out = {}
    for r in rows:
        key = r["check"] if r["region"] is None else f"{r['check']}:{r['region']}"
        out[key] = min(out.get(key, math.inf), r["slack"])
    return out
