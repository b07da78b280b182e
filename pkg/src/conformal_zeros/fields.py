"""The conformal vector fields of flat pseudo-Euclidean space.

Every conformal field on R^n (n >= 3) with a constant metric has the form

    v(x) = w + B x + c x + 2 <u, x> x - <x, x> u

with B skew-adjoint. Its Jacobian, conformal factor and the differential of
the conformal factor are polynomial in x and are given in closed form by
:func:`jet_at`; the test-suite checks them against finite differences.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy.linalg import expm

from .pseudo_euclidean import MetricSpace, params_from_skew, skew_from_params


@dataclass(frozen=True)
class FlatConformalField:
    space: MetricSpace
    w: np.ndarray
    B: np.ndarray
    c: float
    u: np.ndarray

    def __post_init__(self) -> None:
        n = self.space.n
        w = np.array(self.w, dtype=float).reshape(-1)
        u = np.array(self.u, dtype=float).reshape(-1)
        B = np.array(self.B, dtype=float)
        if w.shape != (n,):
            raise ValueError(f"w must have length {n}, got {w.shape[0]}")
        if u.shape != (n,):
            raise ValueError(f"u must have length {n}, got {u.shape[0]}")
        if B.shape != (n, n):
            raise ValueError(f"B must be {n}x{n}, got {B.shape}")
        gB = self.space.g @ B
        if np.max(np.abs(gB + gB.T)) > 1e-10 * max(1.0, np.max(np.abs(B))):
            raise ValueError("B is not skew-adjoint with respect to g")
        for arr in (w, u, B):
            arr.setflags(write=False)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "u", u)
        object.__setattr__(self, "B", B)
        object.__setattr__(self, "c", float(self.c))

    @classmethod
    def zero(cls, space: MetricSpace) -> FlatConformalField:
        n = space.n
        return cls(space, np.zeros(n), np.zeros((n, n)), 0.0, np.zeros(n))

    @property
    def n(self) -> int:
        return self.space.n

    @property
    def is_killing(self) -> bool:
        return self.c == 0.0 and not np.any(self.u)

    def params(self) -> np.ndarray:
        """Coordinates (w, B-parameters, c, u) in the conformal algebra."""
        return np.concatenate([self.w, params_from_skew(self.B, self.space), [self.c], self.u])

    @classmethod
    def from_params(cls, space: MetricSpace, theta) -> FlatConformalField:
        n = space.n
        m = n * (n - 1) // 2
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (2 * n + m + 1,):
            raise ValueError(f"expected {2 * n + m + 1} parameters, got {theta.shape}")
        return cls(
            space,
            theta[:n],
            skew_from_params(theta[n : n + m], space),
            theta[n + m],
            theta[n + m + 1 :],
        )

    def __call__(self, x) -> np.ndarray:
        return evaluate(self, x)

    def __add__(self, other: FlatConformalField) -> FlatConformalField:
        _check_same_space(self, other)
        return FlatConformalField(self.space, self.w + other.w, self.B + other.B, self.c + other.c, self.u + other.u)

    def __sub__(self, other: FlatConformalField) -> FlatConformalField:
        return self + other.scaled(-1.0)

    def scaled(self, a: float) -> FlatConformalField:
        return FlatConformalField(self.space, a * self.w, a * self.B, a * self.c, a * self.u)


@dataclass(frozen=True)
class PointJet:
    """Value, Jacobian, conformal factor and its differential at a point."""

    x: np.ndarray
    v: np.ndarray
    J: np.ndarray
    phi: float
    dphi: np.ndarray

    @property
    def n(self) -> int:
        return self.x.shape[0]


@dataclass(frozen=True)
class Rescaling:
    """Conformal factor exp(tau) with tau(x) = <a, x> + x^T Q x (a is a covector)."""

    a: np.ndarray
    Q: np.ndarray | None = None

    @property
    def kind(self) -> str:
        return "linear" if self.Q is None or not np.any(self.Q) else "quadratic"

    def tau(self, x) -> float:
        x = np.asarray(x, dtype=float)
        val = float(np.asarray(self.a) @ x)
        if self.Q is not None:
            val += float(x @ np.asarray(self.Q) @ x)
        return val

    def dtau(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        d = np.array(self.a, dtype=float)
        if self.Q is not None:
            Q = np.asarray(self.Q, dtype=float)
            d = d + (Q + Q.T) @ x
        return d


def _check_same_space(f1: FlatConformalField, f2: FlatConformalField) -> None:
    if not f1.space.same_as(f2.space):
        raise ValueError("fields live on different metric spaces")


def evaluate(f: FlatConformalField, x) -> np.ndarray:
    """Field value at ``x``; ``x`` may be a single point or an (m, n) batch."""
    x = np.asarray(x, dtype=float)
    g = f.space.g
    ux = x @ (g @ f.u)
    xx = np.einsum("...i,ij,...j->...", x, g, x)
    return f.w + x @ f.B.T + f.c * x + 2.0 * ux[..., None] * x - xx[..., None] * f.u


def jacobian(f: FlatConformalField, x) -> np.ndarray:
    """Batched Jacobian dv/dx (rows: components of v, columns: derivative directions)."""
    x = np.asarray(x, dtype=float)
    g = f.space.g
    n = f.n
    u_flat = g @ f.u
    ux = x @ u_flat
    eye = np.eye(n)
    return (
        f.B
        + (f.c + 2.0 * ux)[..., None, None] * eye
        + 2.0 * x[..., :, None] * u_flat
        - 2.0 * f.u[:, None] * (x @ g)[..., None, :]
    )


def jet_at(f: FlatConformalField, x) -> PointJet:
    x = np.array(x, dtype=float)
    if x.shape != (f.n,):
        raise ValueError(f"point must have length {f.n}")
    ux = f.space.inner(f.u, x)
    return PointJet(
        x=x,
        v=evaluate(f, x),
        J=jacobian(f, x),
        phi=2.0 * f.c + 4.0 * ux,
        dphi=4.0 * f.space.lower(f.u),
    )


def hessian(f: FlatConformalField) -> np.ndarray:
    """Constant second derivatives H[l, j, k] = d_j d_k v^l."""
    n = f.n
    u_flat = f.space.g @ f.u
    eye = np.eye(n)
    return (
        2.0 * np.einsum("lj,k->ljk", eye, u_flat)
        + 2.0 * np.einsum("lk,j->ljk", eye, u_flat)
        - 2.0 * np.einsum("l,jk->ljk", f.u, f.space.g)
    )


def hessian_from_jet(jet: PointJet, space: MetricSpace) -> np.ndarray:
    """Second derivatives of v at a zero from d(phi) alone.

    In flat coordinates, 2 d_j d_k v^l = phi_k delta^l_j + phi_j delta^l_k - phi^l g_jk.
    """
    n = space.n
    dphi = np.asarray(jet.dphi, dtype=float)
    grad = space.raise_index(dphi)
    eye = np.eye(n)
    return 0.5 * (
        np.einsum("lj,k->ljk", eye, dphi)
        + np.einsum("lk,j->ljk", eye, dphi)
        - np.einsum("l,jk->ljk", grad, space.g)
    )


def _fit_params(space: MetricSpace, fn, rng: np.random.Generator, npts: int = 20):
    """Least-squares recovery of field parameters from samples of a vector field."""
    n = space.n
    basis_size = 2 * n + n * (n - 1) // 2 + 1
    pts = rng.uniform(-1.0, 1.0, size=(npts, n))
    design = np.empty((npts * n, basis_size))
    for i in range(basis_size):
        e = np.zeros(basis_size)
        e[i] = 1.0
        design[:, i] = evaluate(FlatConformalField.from_params(space, e), pts).reshape(-1)
    target = np.asarray(fn(pts)).reshape(-1)
    theta, *_ = np.linalg.lstsq(design, target, rcond=None)
    return FlatConformalField.from_params(space, theta)


def bracket(f1: FlatConformalField, f2: FlatConformalField, tol: float = 1e-8) -> FlatConformalField:
    """Field x -> J2(x) v1(x) - J1(x) v2(x), re-expressed in the (w, B, c, u) family."""
    _check_same_space(f1, f2)

    def target(x):
        return np.einsum("...ij,...j->...i", jacobian(f2, x), evaluate(f1, x)) - np.einsum(
            "...ij,...j->...i", jacobian(f1, x), evaluate(f2, x)
        )

    rng = np.random.default_rng(12345)
    result = _fit_params(f1.space, target, rng)
    check = rng.uniform(-1.0, 1.0, size=(20, f1.n))
    scale = max(1.0, float(np.max(np.abs(target(check)))))
    resid = float(np.max(np.abs(evaluate(result, check) - target(check))))
    if resid > tol * scale:
        raise ArithmeticError(f"bracket parameter recovery failed, residual {resid:.3e}")
    return result


def ad_matrix(X: FlatConformalField) -> np.ndarray:
    """Matrix of f -> bracket(X, f) on the parameter vector."""
    space = X.space
    size = X.params().shape[0]
    cols = []
    for i in range(size):
        e = np.zeros(size)
        e[i] = 1.0
        cols.append(bracket(X, FlatConformalField.from_params(space, e)).params())
    return np.array(cols).T


def flow_conjugate(f: FlatConformalField, X: FlatConformalField, t: float = 1.0) -> FlatConformalField:
    """Apply the automorphism exp(t ad X) to ``f``.

    This is the pull-back of ``f`` by the time-``t`` flow of ``X``: for a
    constant field X = a the result is y -> f(y + t a).
    """
    return FlatConformalField.from_params(f.space, expm(t * ad_matrix(X)) @ f.params())


def push_forward(f: FlatConformalField, Phi, target: MetricSpace | None = None) -> FlatConformalField:
    """Image of ``f`` under a linear conformal map y = Phi x.

    ``Phi`` must satisfy Phi^T h Phi = kappa g for the target metric h and
    some nonzero scalar kappa.
    """
    Phi = np.asarray(Phi, dtype=float)
    target = f.space if target is None else target
    G = Phi.T @ target.g @ Phi
    kappa = float(np.trace(G @ f.space.g_inv)) / f.n
    if kappa == 0.0 or np.max(np.abs(G - kappa * f.space.g)) > 1e-9 * abs(kappa):
        raise ValueError("Phi is not a conformal linear map between the two metrics")
    Phi_inv = np.linalg.inv(Phi)
    return FlatConformalField(target, Phi @ f.w, Phi @ f.B @ Phi_inv, f.c, Phi @ f.u / kappa)


def rescaled_jet(jet: PointJet, r: Rescaling, tol: float = 1e-10) -> PointJet:
    """Jet of the same field after replacing g by exp(tau) g, at a zero.

    J and phi do not change at a zero; d(phi) picks up d(tau) composed with J.
    """
    if np.linalg.norm(jet.v) > tol:
        raise ValueError(f"rescaled_jet is only defined at zeros (|v| = {np.linalg.norm(jet.v):.3e})")
    dtau = r.dtau(jet.x)
    return replace(jet, phi=jet.phi + float(dtau @ jet.v), dphi=jet.dphi + dtau @ jet.J)


def finite_difference_jet(f: FlatConformalField, x, h: float = 1e-5) -> tuple[np.ndarray, float, np.ndarray]:
    """Centered-difference Jacobian, phi = (2/n) div v, and d(phi); independent of the closed forms."""
    x = np.asarray(x, dtype=float)
    n = f.n
    J = np.empty((n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = h
        J[:, k] = (evaluate(f, x + e) - evaluate(f, x - e)) / (2 * h)

    def phi_fd(y):
        tr = 0.0
        for k in range(n):
            e = np.zeros(n)
            e[k] = h
            tr += (evaluate(f, y + e)[k] - evaluate(f, y - e)[k]) / (2 * h)
        return 2.0 * tr / n

    # phi is affine in x, so a wide centered step is exact and keeps rounding low
    step = 1e-2
    dphi = np.empty(n)
    for k in range(n):
        e = np.zeros(n)
        e[k] = step
        dphi[k] = (phi_fd(x + e) - phi_fd(x - e)) / (2 * step)
    return J, phi_fd(x), dphi

