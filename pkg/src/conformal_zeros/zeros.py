"""Zeros of flat conformal fields: location, classification and local models."""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .checks import Check, inapplicable
from .fields import FlatConformalField, PointJet, evaluate, jacobian, jet_at
from .pseudo_euclidean import (
    DEFAULT_TOL,
    MetricSpace,
    Subspace,
    gram,
    intersect,
    is_null,
    is_semidefinite_on,
    kernel,
    orth_complement,
    rank,
    restricted_signature,
    sample_null,
)

log = logging.getLogger(__name__)

DEDUP_RADIUS = 1e-6


@dataclass(frozen=True)
class ZeroClassification:
    kind: str  # "nonessential" | "essential"
    case: str  # "alpha" | "beta" | "gamma"
    singular: bool
    phi: float = 0.0
    range_residual: float = 0.0
    H_dim: int = 0
    H_signature: tuple[int, int, int] = (0, 0, 0)

    @property
    def essential(self) -> bool:
        return self.kind == "essential"


@dataclass(frozen=True)
class LocalZeroModel:
    """Local picture of the zero set near ``x``: x + (C n H) or, for Killing zeros, x + H."""

    x: np.ndarray
    H: Subspace
    H_perp: Subspace
    sing: Subspace
    phi_x: float
    space: MetricSpace
    kind: str = "cone"  # "cone" | "kobayashi"

    def contains(self, y, tol: float = 1e-6) -> bool:
        h = np.asarray(y, dtype=float) - self.x
        if not self.H.contains(h, tol):
            return False
        return self.kind == "kobayashi" or is_null(h, self.space, tol)

    def membership_residual(self, y) -> float:
        """max(distance to x + H, |g(h, h)|) for h = y - x."""
        h = np.asarray(y, dtype=float) - self.x
        dist = self.H.distance(h)
        if self.kind == "kobayashi":
            return dist
        return max(dist, abs(self.space.inner(h, h)))

    def sample(self, rng: np.random.Generator, count: int, radius: float = 0.3) -> np.ndarray:
        """Points x + t h with h a unit null direction in H and |t| <= radius."""
        pts = []
        for _ in range(count):
            if self.kind == "kobayashi":
                h = self.H.basis @ rng.standard_normal(self.H.dim)
                h /= np.linalg.norm(h)
            else:
                h = sample_null(self.H, self.space, rng)
            pts.append(self.x + rng.uniform(-radius, radius) * h)
        return np.array(pts).reshape(-1, self.space.n)


def _as_box(box, n: int) -> np.ndarray:
    b = np.asarray(box, dtype=float)
    if b.ndim == 0:
        return np.tile([-float(b), float(b)], (n, 1))
    b = b.reshape(-1, 2)
    if b.shape[0] == 1:
        b = np.tile(b, (n, 1))
    if b.shape != (n, 2) or np.any(b[:, 1] <= b[:, 0]):
        raise ValueError(f"box must be {n} (low, high) pairs with low < high")
    return b


def grid_points(box, n: int, grid_per_axis: int) -> np.ndarray:
    if grid_per_axis < 2:
        raise ValueError("grid_per_axis must be >= 2")
    b = _as_box(box, n)
    axes = [np.linspace(lo, hi, grid_per_axis) for lo, hi in b]
    return np.array(list(itertools.product(*axes)))


def newton(f: FlatConformalField, seeds, max_iter: int = 120, step_cap: float | None = None) -> np.ndarray:
    """Minimal-norm Newton iteration on v(x) = 0 from each seed (batched).

    Pseudo-inverse steps handle the singular Jacobians that occur on
    positive-dimensional zero sets.
    """
    X = np.array(seeds, dtype=float).reshape(-1, f.n)
    if step_cap is None:
        step_cap = 10.0 * max(1.0, float(np.max(np.abs(X), initial=1.0)))
    # convergence is only linear at singular zeros (v vanishes to second order
    # along some directions), so iterate until the steps themselves are negligible
    active = np.ones(len(X), dtype=bool)
    for _ in range(max_iter):
        V = evaluate(f, X[active])
        J = jacobian(f, X[active])
        step = np.einsum("mij,mj->mi", np.linalg.pinv(J, rcond=1e-13), V)
        norms = np.linalg.norm(step, axis=1)
        scale = np.minimum(1.0, step_cap / np.maximum(norms, 1e-300))
        X[active] -= step * scale[:, None]
        idx = np.flatnonzero(active)
        done = (norms <= 1e-17 * (1.0 + np.linalg.norm(X[idx], axis=1))) | ~np.isfinite(norms)
        active[idx[done]] = False
        if not np.any(active):
            break
    return X


def _dedup(points: np.ndarray, radius: float) -> np.ndarray:
    if len(points) == 0:
        return points
    order = np.lexsort(points.T[::-1])
    points = points[order]
    tree = cKDTree(points)
    keep = np.ones(len(points), dtype=bool)
    for i in range(len(points)):
        if not keep[i]:
            continue
        for j in tree.query_ball_point(points[i], radius):
            if j > i:
                keep[j] = False
    return points[keep]


def find_zeros(
    f: FlatConformalField,
    box,
    grid_per_axis: int = 7,
    tol: float = DEFAULT_TOL,
    extra_seeds=None,
) -> np.ndarray:
    """Zeros of ``f`` reached by Newton from a regular grid of seeds in ``box``.

    Returns an (m, n) array sorted lexicographically; every row satisfies
    |v(x)| < tol and lies in the box. Empty when no seed converges.
    """
    n = f.n
    b = _as_box(box, n)
    seeds = grid_points(b, n, grid_per_axis)
    if extra_seeds is not None and len(extra_seeds):
        seeds = np.vstack([seeds, np.asarray(extra_seeds, dtype=float).reshape(-1, n)])
    X = newton(f, seeds, step_cap=float(np.linalg.norm(b[:, 1] - b[:, 0])))
    res = np.linalg.norm(evaluate(f, X), axis=1)
    slack = 1e-9 * float(np.max(b[:, 1] - b[:, 0]))
    inside = np.all((X >= b[:, 0] - slack) & (X <= b[:, 1] + slack), axis=1)
    good = X[(res < tol) & inside & np.all(np.isfinite(X), axis=1)]
    X = _dedup(good, DEDUP_RADIUS)
    # snap tiny coordinates so reports do not print -0.0 noise
    X[np.abs(X) < 1e-15] = 0.0
    return X


def simultaneous_kernel(jet: PointJet, tol: float = DEFAULT_TOL) -> Subspace:
    """Ker J intersected with Ker d(phi)."""
    return kernel(np.vstack([jet.J, jet.dphi[None, :]]), tol)


def _require_zero(jet: PointJet, tol: float) -> None:
    if np.linalg.norm(jet.v) >= max(tol, 1e-12):
        raise ValueError(f"point is not a zero of the field (|v| = {np.linalg.norm(jet.v):.3e})")


def range_residual(jet: PointJet, space: MetricSpace, tol: float = DEFAULT_TOL) -> float:
    """Relative least-squares residual of J y = grad(phi); 0 when grad(phi) = 0."""
    grad = space.raise_index(jet.dphi)
    gnorm = float(np.linalg.norm(grad))
    if gnorm == 0.0:
        return 0.0
    y, *_ = np.linalg.lstsq(jet.J, grad, rcond=tol)
    return float(np.linalg.norm(jet.J @ y - grad)) / gnorm


def classify_zero(jet: PointJet, space: MetricSpace, tol: float = DEFAULT_TOL) -> ZeroClassification:
    """Nonessential iff phi = 0 and grad(phi) lies in the range of J.

    Essential zeros split by whether g is semidefinite on the simultaneous
    kernel H (case beta, nonsingular) or not (case gamma, singular).
    """
    _require_zero(jet, tol)
    resid = range_residual(jet, space, tol)
    H = simultaneous_kernel(jet, tol)
    sig = restricted_signature(H, space, tol)
    common = dict(phi=float(jet.phi), range_residual=resid, H_dim=H.dim, H_signature=sig)
    if abs(jet.phi) < tol and resid < tol:
        return ZeroClassification("nonessential", "alpha", False, **common)
    if sig[0] == 0 or sig[1] == 0:
        return ZeroClassification("essential", "beta", False, **common)
    return ZeroClassification("essential", "gamma", True, **common)


def local_model(jet: PointJet, space: MetricSpace, tol: float = DEFAULT_TOL) -> LocalZeroModel:
    """Cone model x + (C n H) of the zero set near an essential zero."""
    cls = classify_zero(jet, space, tol)
    if not cls.essential:
        raise ValueError("local_model needs an essential zero; use kobayashi_model for nonessential ones")
    H = simultaneous_kernel(jet, tol)
    H_perp = orth_complement(H, space, tol)
    return LocalZeroModel(jet.x, H, H_perp, intersect(H, H_perp, tol), float(jet.phi), space, "cone")


def kobayashi_model(jet: PointJet, space: MetricSpace, tol: float = DEFAULT_TOL) -> LocalZeroModel:
    """Zero set x + Ker J near a nonessential zero.

    Exact for Killing fields (phi and d(phi) vanish). For other nonessential
    zeros only the tangent space x + Ker J is returned: the zero set is
    totally geodesic for a rescaled metric, not for g.
    """
    cls = classify_zero(jet, space, tol)
    if cls.essential:
        raise ValueError("kobayashi_model needs a nonessential zero")
    H = kernel(jet.J, tol)
    H_perp = orth_complement(H, space, tol)
    kind = "kobayashi" if not np.any(jet.dphi) else "kobayashi-tangent"
    return LocalZeroModel(jet.x, H, H_perp, intersect(H, H_perp, tol), float(jet.phi), space, kind)


@dataclass
class ZeroComponent:
    indices: list[int]
    kind: str  # "nonessential" | "essential"
    sigma: list[int] = field(default_factory=list)
    rest: list[int] = field(default_factory=list)
    dims: dict = field(default_factory=dict)
    checks: list[Check] = field(default_factory=list)
    warnings: list[str] = field(default_factory=list)


@dataclass
class ZeroReport:
    zeros: list[tuple[np.ndarray, PointJet, ZeroClassification]]
    components: list[ZeroComponent]
    spacing: float
    warnings: list[str] = field(default_factory=list)

    def points(self) -> np.ndarray:
        return np.array([z[0] for z in self.zeros])


def _group(f: FlatConformalField, pts: np.ndarray, spacing: float, tol: float) -> list[list[int]]:
    """Connectivity at sampling resolution: close pairs whose midpoint refines to a nearby zero."""
    m = len(pts)
    if m == 0:
        return []
    tree = cKDTree(pts)
    pairs = np.array(sorted(tree.query_pairs(3.0 * spacing)), dtype=int).reshape(-1, 2)
    if len(pairs):
        mids = 0.5 * (pts[pairs[:, 0]] + pts[pairs[:, 1]])
        refined = newton(f, mids, max_iter=40, step_cap=spacing)
        ok = (np.linalg.norm(evaluate(f, refined), axis=1) < tol) & (
            np.linalg.norm(refined - mids, axis=1) < 1.5 * spacing
        )
        pairs = pairs[ok]
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(m, m))
    ncomp, labels = connected_components(graph, directed=False)
    groups = [sorted(np.where(labels == k)[0].tolist()) for k in range(ncomp)]
    groups.sort(key=lambda g: g[0])
    return groups


def _charpoly(J: np.ndarray) -> np.ndarray:
    from .invariants import char_poly

    return char_poly(J).coeffs


def _positive_dimensional(jet: PointJet, cls: ZeroClassification, space: MetricSpace, tol: float) -> bool:
    if not cls.essential:
        return kernel(jet.J, tol).dim > 0
    H = simultaneous_kernel(jet, tol)
    pos, neg, rad = restricted_signature(H, space, tol)
    return rad > 0 or (pos > 0 and neg > 0)


def _component_checks(
    f: FlatConformalField,
    comp: ZeroComponent,
    zeros: list[tuple[np.ndarray, PointJet, ZeroClassification]],
    tol: float,
    rng: np.random.Generator,
    spacing: float,
) -> None:
    space = f.space
    idx = comp.indices
    jets = [zeros[i][1] for i in idx]
    classes = {i: zeros[i][2] for i in idx}

    phis = np.array([j.phi for j in jets])
    spread = float(np.max(phis) - np.min(phis))
    comp.checks.append(Check("phi-constant", spread < 1e-8, {"max_spread": spread}))

    coeffs = np.array([_charpoly(j.J) for j in jets])
    cp_spread = float(np.max(np.abs(coeffs - coeffs[0]))) / max(1.0, float(np.max(np.abs(coeffs))))
    comp.checks.append(Check("charpoly-constant", cp_spread < 1e-8, {"max_relative_spread": cp_spread}))

    if comp.kind == "nonessential" and not comp.sigma:
        ranks = sorted({rank(j.J, tol) for j in jets})
        comp.checks.append(
            Check("even-codimension", all(r % 2 == 0 for r in ranks), {"codimensions": ranks})
        )
        comp.dims = {"dim_N": space.n - ranks[0] if len(ranks) == 1 else None}
        return

    if comp.kind == "essential":
        semidef = all(is_semidefinite_on(simultaneous_kernel(j, tol), space, tol) for j in jets)
        comp.checks.append(Check("semidefinite-on-H", semidef, {"samples": len(jets)}))
        tangent_dims = []
        null_ok = True
        for j in jets:
            H = simultaneous_kernel(j, tol)
            T = intersect(H, orth_complement(H, space, tol), tol)
            tangent_dims.append(T.dim)
            if T.dim and np.max(np.abs(gram(T, space))) > 1e-8:
                null_ok = False
        comp.checks.append(Check("tangent-null", null_ok, {"tangent_dims": sorted(set(tangent_dims))}))
        comp.dims = {"dim_Sigma": tangent_dims[0] if len(set(tangent_dims)) == 1 else None}
        comp.checks.append(_totally_geodesic(f, [zeros[i][0] for i in idx], tol, rng))
        return

    # mixed component: case (b) with Sigma the essential points
    sig_ok = all(classes[i].case == "gamma" for i in comp.sigma)
    rest_ok = all(classes[i].case == "alpha" for i in comp.rest)
    comp.checks.append(
        Check(
            "strata-cases",
            sig_ok and rest_ok,
            {"sigma_cases": sorted({classes[i].case for i in comp.sigma}), "rest_cases": sorted({classes[i].case for i in comp.rest})},
            "essential points singular (gamma), the rest nonessential (alpha)",
        )
    )
    sig_jets = [zeros[i][1] for i in comp.sigma]
    rest_jets = [zeros[i][1] for i in comp.rest]
    dim_sigma = set()
    rank_sigma = set()
    for j in sig_jets:
        H = simultaneous_kernel(j, tol)
        dim_sigma.add(intersect(H, orth_complement(H, space, tol), tol).dim)
        rank_sigma.add(rank(j.J, tol))
    dim_rest = set()
    patterns = set()
    rank_rest = set()
    for j in rest_jets:
        K = kernel(j.J, tol)
        dim_rest.add(K.dim)
        patterns.add(restricted_signature(K, space, tol))
        rank_rest.add(rank(j.J, tol))
    comp.checks.append(Check("sign-pattern-constant", len(patterns) == 1, {"patterns": sorted(patterns)}))
    if len(dim_sigma) == 1 and len(dim_rest) == 1 and len(patterns) == 1:
        ds, dn = dim_sigma.pop(), dim_rest.pop()
        pos, neg, _ = next(iter(patterns))
        r = pos + neg
        comp.dims = {"dim_Sigma": ds, "dim_N_minus_Sigma": dn, "r": r}
        comp.checks.append(Check("dimension-formula", dn - ds == r + 1, {"dim_N_minus_Sigma": dn, "dim_Sigma": ds, "r": r}))
    else:
        comp.checks.append(
            Check("dimension-formula", False, {"dim_Sigma": sorted(dim_sigma), "dim_N_minus_Sigma": sorted(dim_rest)}, "dimensions vary across samples")
        )
    rank_ok = all(ry == 2 + rx for ry in rank_rest for rx in rank_sigma)
    comp.checks.append(
        Check("rank-jump", rank_ok, {"rank_sigma": sorted(rank_sigma), "rank_rest": sorted(rank_rest)})
    )
    comp.checks.append(_sigma_refinement(f, [zeros[i][0] for i in comp.sigma], spacing, tol, rng))


def _totally_geodesic(f: FlatConformalField, pts: list[np.ndarray], tol: float, rng: np.random.Generator) -> Check:
    """Segments between sampled points of an essential stratum consist of zeros."""
    if len(pts) < 2:
        return inapplicable("totally-geodesic", "fewer than two samples")
    worst = 0.0
    npairs = min(10, len(pts) * (len(pts) - 1) // 2)
    for _ in range(npairs):
        a, b = rng.choice(len(pts), size=2, replace=False)
        ts = np.linspace(0.0, 1.0, 22)[1:-1]
        seg = pts[a][None, :] + ts[:, None] * (pts[b] - pts[a])[None, :]
        worst = max(worst, float(np.max(np.linalg.norm(evaluate(f, seg), axis=1))))
    return Check("totally-geodesic", worst < 1e-8, {"max_residual": worst, "pairs": npairs})


def _sigma_refinement(f: FlatConformalField, sigma_pts: list[np.ndarray], spacing: float, tol: float, rng: np.random.Generator) -> Check:
    """Re-sample near each essential point; essential zeros found there must lie in x + (H n H-perp)."""
    space = f.space
    worst = 0.0
    checked = 0
    for x in sigma_pts:
        jet = jet_at(f, x)
        model = local_model(jet, space, tol)
        seeds = x + 0.25 * spacing * rng.standard_normal((16, space.n))
        found = newton(f, seeds, step_cap=spacing)
        for y in found:
            if np.linalg.norm(evaluate(f, y)) >= tol:
                continue
            cy = classify_zero(jet_at(f, y), space, tol)
            if cy.essential:
                checked += 1
                worst = max(worst, model.sing.distance(y - x))
    return Check("sigma-refinement", worst < 1e-6, {"essential_neighbours": checked, "max_distance": worst})


def component_scan(
    f: FlatConformalField,
    box,
    grid_per_axis: int = 7,
    tol: float = DEFAULT_TOL,
    extra_points=None,
    seed: int = 42,
) -> ZeroReport:
    """Find, classify and group zeros; evaluate the structure relations per component."""
    pts = find_zeros(f, box, grid_per_axis, tol, extra_seeds=extra_points)
    if len(pts) == 0:
        raise ValueError("no zeros found in the box")
    b = _as_box(box, f.n)
    spacing = float(np.max(b[:, 1] - b[:, 0])) / (grid_per_axis - 1)
    zeros = []
    for x in pts:
        jet = jet_at(f, x)
        zeros.append((x, jet, classify_zero(jet, f.space, tol)))
    rng = np.random.default_rng(seed)
    report = ZeroReport(zeros, [], spacing)
    for group in _group(f, pts, spacing, tol):
        ess = [i for i in group if zeros[i][2].essential]
        rest = [i for i in group if not zeros[i][2].essential]
        kind = "essential" if not rest else "nonessential"
        comp = ZeroComponent(group, kind, sigma=ess if rest else list(group), rest=rest)
        if len(group) == 1 and _positive_dimensional(zeros[group[0]][1], zeros[group[0]][2], f.space, tol):
            comp.warnings.append(
                "single sample of a positive-dimensional zero set; sampling too sparse to decide connectivity"
            )
        _component_checks(f, comp, zeros, tol, rng, spacing)
        report.components.append(comp)
    for k, comp in enumerate(report.components):
        for w in comp.warnings:
            log.warning("component %d: %s", k, w)
            report.warnings.append(f"component {k}: {w}")
    return report


@dataclass
class TransportResult:
    residual_a: float
    residual_b: float
    samples: int

    @property
    def passed(self) -> bool:
        return self.residual_a < 1e-7 and self.residual_b < 1e-7


def null_geodesic_jet_transport(
    f: FlatConformalField,
    x,
    direction,
    t_max: float = 0.5,
    steps: int = 21,
    n_w: int = 3,
    seed: int = 0,
    tol: float = DEFAULT_TOL,
) -> TransportResult:
    """Evolution of J w and g(w, grad phi) along a null line of zeros.

    For constant w with g(dir, w) = 0 this measures
    |d/dt [J(x + t dir) w] - g(w, grad phi) dir / 2| and the drift of
    g(w, grad phi) along the line.
    """
    space = f.space
    x = np.asarray(x, dtype=float)
    d = np.asarray(direction, dtype=float)
    jet0 = jet_at(f, x)
    _require_zero(jet0, tol)
    if not is_null(d, space, tol) or not simultaneous_kernel(jet0, tol).contains(d, 1e-8):
        raise ValueError("direction is not in the null cone intersected with H")
    ts = np.linspace(-t_max, t_max, steps)
    line = x[None, :] + ts[:, None] * d[None, :]
    if np.max(np.linalg.norm(evaluate(f, line), axis=1)) > 1e-8:
        raise ValueError("the line x + t dir leaves the zero set")
    rng = np.random.default_rng(seed)
    perp = orth_complement(Subspace.span(d[None, :]), space, tol)
    h = 1e-5
    ra = rb = 0.0
    for _ in range(n_w):
        w = perp.basis @ rng.standard_normal(perp.dim)
        b0 = space.inner(w, space.raise_index(jet_at(f, x).dphi))
        for t in ts:
            y = x + t * d
            dJw = (jacobian(f, y + h * d) @ w - jacobian(f, y - h * d) @ w) / (2 * h)
            gw = space.inner(w, space.raise_index(jet_at(f, y).dphi))
            ra = max(ra, float(np.max(np.abs(dJw - 0.5 * gw * d))))
            rb = max(rb, abs(gw - b0))
    return TransportResult(ra, rb, steps * n_w)
