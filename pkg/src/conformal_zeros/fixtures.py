"""Named fields with known zero sets, plus generators of planted jet pairs.

Each constructor returns ``(space, field)``. The registry maps the names
accepted in scenario files to these functions.
"""

from __future__ import annotations

import numpy as np

from .fields import FlatConformalField, evaluate, flow_conjugate, push_forward
from .pseudo_euclidean import (
    MetricSpace,
    component_representatives,
    isometry_from_params,
)


def wedge(a, b, space: MetricSpace) -> np.ndarray:
    """g-skew map x -> a g(b, x) - b g(a, x)."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    return np.outer(a, space.lower(b)) - np.outer(b, space.lower(a))


def null_pairs(space: MetricSpace) -> tuple[np.ndarray, np.ndarray]:
    """Rows l_i, l'_i with g(l_i, l'_j) = delta_ij and both families null, for the standard neutral metric."""
    if space.p != space.q or not np.array_equal(space.g, np.diag([1.0] * space.p + [-1.0] * space.q)):
        raise ValueError("null pairs need the standard neutral metric diag(+1 ... -1)")
    k = space.p
    eye = np.eye(space.n)
    L = (eye[:k] + eye[k:]) / np.sqrt(2.0)
    Lp = (eye[:k] - eye[k:]) / np.sqrt(2.0)
    return L, Lp


def rotation(n: int = 3, p: int | None = None, i: int = 0, j: int = 1, omega: float = 1.0):
    """Killing field turning the (e_i, e_j) plane; for g = Id this is the usual rotation."""
    space = MetricSpace(n, n if p is None else p, n - (n if p is None else p))
    eye = np.eye(n)
    B = omega * space.g_inv @ (np.outer(eye[j], eye[i]) - np.outer(eye[i], eye[j]))
    return space, FlatConformalField(space, np.zeros(n), B, 0.0, np.zeros(n))


def dilation(n: int = 3, p: int | None = None, c: float = 1.0):
    space = MetricSpace(n, n if p is None else p, n - (n if p is None else p))
    return space, FlatConformalField(space, np.zeros(n), np.zeros((n, n)), c, np.zeros(n))


def special_conformal(n: int = 3, p: int | None = None, u=None):
    space = MetricSpace(n, n if p is None else p, n - (n if p is None else p))
    u = np.eye(n)[0] if u is None else np.asarray(u, dtype=float)
    return space, FlatConformalField(space, np.zeros(n), np.zeros((n, n)), 0.0, u)


def lorentz_cone(n: int = 4):
    """Special-conformal field with spacelike u in signature (1, n-1); its zeros form a cone through 0."""
    space = MetricSpace(n, 1, n - 1)
    u = np.eye(n)[1]
    return space, FlatConformalField(space, np.zeros(n), np.zeros((n, n)), 0.0, u)


def neutral_counterexample(n: int = 4, c: float = 1.0):
    """B = c on the null half-space L, -c on the complementary null half-space L', u in L.

    The line through 0 spanned by the second vector of L' consists of
    essential zeros; the kernel of the Jacobian is 2-dimensional at 0 and
    1-dimensional elsewhere on the line.
    """
    if n % 2 or n < 4:
        raise ValueError("neutral-counterexample needs even n >= 4")
    space = MetricSpace(n, n // 2, n // 2)
    L, Lp = null_pairs(space)
    B = c * sum(wedge(L[i], Lp[i], space) for i in range(n // 2))
    return space, FlatConformalField(space, np.zeros(n), B, c, L[0])


def counterexample_line(n: int = 4) -> np.ndarray:
    """Direction m2 of the zero line of :func:`neutral_counterexample`."""
    _, Lp = null_pairs(MetricSpace(n, n // 2, n // 2))
    return Lp[1]


def xi_nonzero(alpha: float = 1.0):
    """Signature (3, 3) field whose essential stratum is the null 3-space L with a nonzero 1-form xi.

    B l'_1 = alpha l_2, B l'_2 = -alpha l_1, B kills l'_3 and L; u = l_3.
    """
    space = MetricSpace(6, 3, 3)
    L, _ = null_pairs(space)
    B = alpha * wedge(L[1], L[0], space)
    return space, FlatConformalField(space, np.zeros(6), B, 0.0, L[2])


def killing_null_line(n: int = 3):
    """Null rotation l ^ e_2 in signature (1, n-1); its zero set is l-perp n e_2-perp, containing the null line span(l)."""
    space = MetricSpace(n, 1, n - 1)
    eye = np.eye(n)
    l = (eye[0] + eye[1]) / np.sqrt(2.0)
    return space, FlatConformalField(space, np.zeros(n), wedge(l, eye[2], space), 0.0, np.zeros(n))


CONSTRUCTORS = {
    "rotation": rotation,
    "dilation": dilation,
    "special-conformal": special_conformal,
    "lorentz-cone": lorentz_cone,
    "neutral-counterexample": neutral_counterexample,
    "xi-nonzero": xi_nonzero,
    "killing-null-line": killing_null_line,
}


def skew_with_kernel(space: MetricSpace, rng: np.random.Generator, kernel_dim: int) -> np.ndarray:
    """Random g-skew B whose kernel contains a random kernel_dim-dimensional subspace."""
    n = space.n
    A = rng.standard_normal((n, n))
    A = A - A.T
    if kernel_dim:
        K, _ = np.linalg.qr(rng.standard_normal((n, kernel_dim)))
        P = np.eye(n) - K @ K.T
        A = P @ A @ P
    return space.g_inv @ A


def random_field(space: MetricSpace, rng: np.random.Generator, scale: float = 1.0) -> FlatConformalField:
    n = space.n
    return FlatConformalField(
        space,
        scale * rng.standard_normal(n),
        scale * skew_with_kernel(space, rng, 0),
        scale * rng.standard_normal(),
        scale * rng.standard_normal(n),
    )


def translated(f: FlatConformalField, a) -> FlatConformalField:
    """The field y -> f(y - a), again of the flat conformal form."""
    a = np.asarray(a, dtype=float)
    sp = f.space
    B = f.B + 2.0 * wedge(f.u, a, sp)
    return FlatConformalField(sp, evaluate(f, -a), B, f.c - 2.0 * sp.inner(f.u, a), f.u)


def degenerate_zero_field(space: MetricSpace, rng: np.random.Generator, kernel_dim: int, at=None) -> FlatConformalField:
    """Random field with a zero at ``at`` (default 0) whose Jacobian has a kernel of dimension >= kernel_dim."""
    n = space.n
    f = FlatConformalField(space, np.zeros(n), skew_with_kernel(space, rng, kernel_dim), 0.0, rng.standard_normal(n))
    return f if at is None else translated(f, at)


def random_conformal_map(space: MetricSpace, rng: np.random.Generator, boost: float = 0.5, allow_swap: bool = True):
    """Phi = sqrt(s) C R exp(K) with Phi^T g Phi = +-s g; returns (Phi, signed scalar)."""
    n = space.n
    theta = boost * rng.standard_normal(n * (n - 1) // 2)
    reps = component_representatives(space)
    R = reps[int(rng.integers(len(reps)))]
    O = R @ isometry_from_params(theta, space)
    s = float(np.exp(rng.uniform(-0.7, 0.7)))
    if allow_swap and space.p == space.q and rng.random() < 0.5:
        # the coordinate swap of the two halves is an anti-isometry of the standard neutral metric
        k = space.p
        S = np.eye(n)[:, list(range(k, n)) + list(range(k))]
        return np.sqrt(s) * S @ O, -s
    return np.sqrt(s) * O, s


def planted_pair(space: MetricSpace, rng: np.random.Generator, kernel_dim: int = 1, c: float = 0.0):
    """Two fields with a zero at 0 whose 2-jets there are conformally equivalent by construction.

    The second field is the first one moved by the flow of a special
    conformal field fixing 0 (which changes d(phi) without changing the
    quintuple) and then pushed forward by a random conformal linear map.
    Returns (f1, f2, Phi0, s0).
    """
    n = space.n
    f1 = FlatConformalField(space, np.zeros(n), skew_with_kernel(space, rng, kernel_dim), c, rng.standard_normal(n))
    X = FlatConformalField(space, np.zeros(n), np.zeros((n, n)), 0.0, 0.3 * rng.standard_normal(n))
    Phi0, s0 = random_conformal_map(space, rng)
    f2 = push_forward(flow_conjugate(f1, X), Phi0)
    return f1, f2, Phi0, s0
