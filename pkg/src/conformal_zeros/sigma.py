"""The 1-form xi on the essential stratum and the null directions of the nonsingular stratum."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .checks import Check, inapplicable
from .fields import FlatConformalField, PointJet, evaluate, jet_at
from .pseudo_euclidean import DEFAULT_TOL, MetricSpace, Subspace, kernel, radical
from .zeros import LocalZeroModel, classify_zero, local_model


@dataclass(frozen=True)
class XiSample:
    """xi at a point of the essential stratum.

    ``xi`` holds one value per column of ``tangent_basis``; ``form`` is the
    covector g(u, .) on all of R^n for the minimal-norm admissible u (zero
    when xi is zero by declaration).
    """

    x: np.ndarray
    tangent_basis: Subspace
    xi: np.ndarray
    defined_by: str  # "phi_zero_rule" | "phi_nonzero_rule"
    form: np.ndarray
    choice_gap: float = 0.0

    @property
    def is_zero(self) -> bool:
        return not np.any(np.abs(self.xi) > 1e-9)

    def kernel(self) -> Subspace:
        """Ker xi inside the tangent space, as a subspace of R^n."""
        T = self.tangent_basis
        if T.dim == 0 or self.is_zero:
            return T
        coords = kernel(self.xi[None, :], 1e-12).basis
        return Subspace(T.basis @ coords, T.n)


def _admissible_u(jet: PointJet, space: MetricSpace, tol: float, extra=None) -> np.ndarray:
    """u in Ker J with d(phi)(u) = 1: minimal norm, shifted by ``extra`` inside Ker J n Ker d(phi)."""
    K = kernel(jet.J, tol).basis
    c = jet.dphi @ K
    cn = float(c @ c)
    if cn < tol**2:
        raise ValueError("no u in Ker J with g(u, grad phi) = 1; the point is not an essential zero with phi = 0")
    a = c / cn
    if extra is not None:
        free = kernel(c[None, :], 1e-12).basis
        a = a + free @ extra[: free.shape[1]]
    return K @ a


def xi_at(
    jet: PointJet,
    space: MetricSpace,
    model: LocalZeroModel | None = None,
    tol: float = DEFAULT_TOL,
    seed: int = 0,
) -> XiSample:
    """Evaluate xi; when phi = 0 the value is recomputed from a second admissible u as a consistency check."""
    if model is None:
        model = local_model(jet, space, tol)
    T = model.sing
    n = space.n
    if abs(jet.phi) > tol:
        return XiSample(jet.x, T, np.zeros(T.dim), "phi_nonzero_rule", np.zeros(n))
    u = _admissible_u(jet, space, tol)
    form = space.lower(u)
    xi = form @ T.basis
    rng = np.random.default_rng(seed)
    u2 = _admissible_u(jet, space, tol, extra=rng.standard_normal(n))
    gap = float(np.max(np.abs(space.lower(u2) @ T.basis - xi), initial=0.0))
    if gap > 1e-10 * max(1.0, float(np.linalg.norm(u2))):
        raise ArithmeticError(f"xi depends on the choice of u (gap {gap:.3e})")
    return XiSample(jet.x, T, xi, "phi_zero_rule", form, gap)


def kernel_dim_locally_constant(f: FlatConformalField, x, tangent: Subspace, radius: float = 1e-3, tol: float = DEFAULT_TOL):
    """Compare dim Ker J at x with nearby essential zeros x +- radius t, t in ``tangent``.

    Returns (stable, dims); ``stable`` is None when no neighbour is an essential zero,
    i.e. the stratum cannot be probed at this radius.
    """
    x = np.asarray(x, dtype=float)
    base = kernel(jet_at(f, x).J, tol).dim
    dims = []
    for t in tangent.basis.T:
        for sgn in (1.0, -1.0):
            y = x + sgn * radius * t / np.linalg.norm(t)
            if _on_sigma(f, y, tol):
                dims.append(kernel(jet_at(f, y).J, tol).dim)
    if not dims:
        return None, [base]
    return all(d == base for d in dims), [base, *dims]


def _on_sigma(f: FlatConformalField, y, tol: float) -> bool:
    jet = jet_at(f, y)
    if np.linalg.norm(jet.v) >= tol:
        return False
    return classify_zero(jet, f.space, tol).essential


def xi_kernel_transport(
    f: FlatConformalField,
    x,
    direction,
    t_max: float = 0.3,
    steps: int = 13,
    tol: float = DEFAULT_TOL,
) -> float:
    """max |xi_y(dir)| over y = x + t dir, |t| <= t_max; every y must be an essential zero."""
    x = np.asarray(x, dtype=float)
    d = np.asarray(direction, dtype=float)
    worst = 0.0
    for t in np.linspace(-t_max, t_max, steps):
        y = x + t * d
        if not _on_sigma(f, y, tol):
            raise ValueError(f"segment leaves the essential stratum at t = {t:.3f}")
        sample = xi_at(jet_at(f, y), f.space, tol=tol)
        if not sample.tangent_basis.contains(d, 1e-8):
            raise ValueError(f"direction is not tangent to the essential stratum at t = {t:.3f}")
        worst = max(worst, abs(float(sample.form @ d)) if sample.defined_by == "phi_zero_rule" else 0.0)
    return worst


@dataclass
class SymDxiResult:
    restricted_residual: float
    mu: np.ndarray
    mu_fit_residual: float
    sym: np.ndarray
    xi: np.ndarray

    def passed(self, tol: float = 1e-6) -> bool:
        return self.restricted_residual < tol and self.mu_fit_residual < tol


def _xi_chart(f: FlatConformalField, x: np.ndarray, T: np.ndarray, tol: float):
    def xi_coords(s):
        y = x + T @ s
        sample = xi_at(jet_at(f, y), f.space, tol=tol)
        # T is the tangent space at every point of the affine stratum, so the chart basis is fixed
        return sample.form @ T

    return xi_coords


def sym_dxi_divisibility(
    f: FlatConformalField,
    x,
    h: float = 1e-4,
    tol: float = DEFAULT_TOL,
    xi_fn=None,
) -> SymDxiResult:
    """Symmetrized derivative of xi along the stratum and its divisibility by xi.

    D xi is estimated by centered differences with one Richardson step in an
    affine chart of the stratum. ``xi_fn`` overrides xi in chart coordinates
    (used to inject corrupted forms as a negative control).
    """
    x = np.asarray(x, dtype=float)
    jet = jet_at(f, x)
    base = xi_at(jet, f.space, tol=tol)
    T = base.tangent_basis.basis
    d = T.shape[1]
    if base.is_zero:
        raise ValueError("xi vanishes at the base point")
    xi_fn = _xi_chart(f, x, T, tol) if xi_fn is None else xi_fn
    xi0 = np.asarray(xi_fn(np.zeros(d)), dtype=float)

    def diff(step):
        D = np.empty((d, d))
        for k in range(d):
            e = np.zeros(d)
            e[k] = step
            D[:, k] = (np.asarray(xi_fn(e)) - np.asarray(xi_fn(-e))) / (2 * step)
        return D

    D = (4.0 * diff(h / 2) - diff(h)) / 3.0
    S = D + D.T
    Kz = kernel(xi0[None, :], 1e-12).basis
    restricted = float(np.max(np.abs(Kz.T @ S @ Kz), initial=0.0))
    # S = mu xi^T + xi mu^T is linear in mu
    design = np.einsum("ja,k->jka", np.eye(d), xi0) + np.einsum("j,ka->jka", xi0, np.eye(d))
    A = design.reshape(d * d, d)
    mu, *_ = np.linalg.lstsq(A, S.ravel(), rcond=None)
    fit = float(np.max(np.abs(A @ mu - S.ravel()), initial=0.0))
    return SymDxiResult(restricted, mu, fit, S, xi0)


@dataclass
class NullspaceReport:
    checks: list[Check]
    nullities: list[int]

    @property
    def passed(self) -> bool:
        return all(c.passed is not False for c in self.checks)


def nullspace_distribution_check(
    f: FlatConformalField,
    samples,
    base: np.ndarray | None = None,
    t_line: float = 0.05,
    tol: float = DEFAULT_TOL,
) -> NullspaceReport:
    """Null directions P_y of g restricted to Ker J_y at sampled zeros y.

    On N minus Sigma, Ker J_y is the tangent space of the zero set. Samples on
    an essential stratum are accepted too (there Ker J_y still contains the
    tangent directions, e.g. the line of the neutral counterexample).
    Checks that P_y is null, that short lines y + t p (p in P_y) are zeros,
    and, given a ``base`` point, that each y - base lies in P_y.
    """
    space = f.space
    checks: list[Check] = []
    nullities = []
    worst_null = worst_line = worst_gen = 0.0
    for y in np.asarray(samples, dtype=float).reshape(-1, space.n):
        jet = jet_at(f, y)
        if np.linalg.norm(jet.v) >= tol:
            raise ValueError("samples must be zeros of the field")
        P = radical(kernel(jet.J, tol), space, tol)
        nullities.append(P.dim)
        if P.dim == 0:
            continue
        for p in P.basis.T:
            worst_null = max(worst_null, abs(space.inner(p, p)))
            ts = np.linspace(-t_line, t_line, 9)
            worst_line = max(worst_line, float(np.max(np.linalg.norm(evaluate(f, y + ts[:, None] * p), axis=1))))
        if base is not None:
            worst_gen = max(worst_gen, P.distance((y - base) / np.linalg.norm(y - base)))
    if not any(nullities):
        checks.append(inapplicable("nullspace-distribution", "restricted metric is nondegenerate at every sample"))
        return NullspaceReport(checks, nullities)
    checks.append(Check("P-null", worst_null < 1e-9, {"max_abs_g": worst_null}))
    checks.append(Check("P-lines-in-zero-set", worst_line < 1e-8, {"max_residual": worst_line}))
    if base is not None:
        checks.append(Check("generators-in-P", worst_gen < 1e-7, {"max_distance": worst_gen}))
    return NullspaceReport(checks, nullities)


def unique_continuation_check(f: FlatConformalField, sigma_samples, tol: float = DEFAULT_TOL) -> Check:
    """If xi vanishes on a codimension-one patch of sampled Sigma, it must vanish at every sample."""
    pts = np.asarray(sigma_samples, dtype=float).reshape(-1, f.n)
    samples = [xi_at(jet_at(f, y), f.space, tol=tol) for y in pts]
    dim_sigma = max(s.tangent_basis.dim for s in samples)
    zero_pts = np.array([s.x for s in samples if s.is_zero])
    if len(zero_pts) == 0:
        return inapplicable("unique-continuation", "xi vanishes at no sample")
    patch_dim = int(np.linalg.matrix_rank(zero_pts[1:] - zero_pts[0], tol=1e-8)) if len(zero_pts) > 1 else 0
    if patch_dim < dim_sigma - 1:
        return inapplicable("unique-continuation", f"zero patch has dimension {patch_dim} < {dim_sigma - 1}")
    worst = max(float(np.max(np.abs(s.xi), initial=0.0)) for s in samples)
    return Check("unique-continuation", worst < 1e-9, {"max_abs_xi": worst, "patch_dim": patch_dim})
