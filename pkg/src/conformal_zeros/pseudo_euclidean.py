"""Linear algebra over an indefinite inner product.

Subspaces are stored with Euclidean-orthonormal column bases because the
metric may be degenerate on them; null subspaces are the interesting case
throughout this package.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

DEFAULT_TOL = 1e-9


@dataclass(frozen=True)
class MetricSpace:
    """Flat space R^n with a constant symmetric nondegenerate metric ``g``."""

    n: int
    p: int
    q: int
    g: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]
    g_inv: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValueError(f"dimension must be >= 2, got n={self.n}")
        if self.p < 0 or self.q < 0 or self.p + self.q != self.n:
            raise ValueError(f"signature (p={self.p}, q={self.q}) does not add up to n={self.n}")
        if self.g is None:
            g = np.diag([1.0] * self.p + [-1.0] * self.q)
        else:
            g = np.array(self.g, dtype=float)
            if g.shape != (self.n, self.n):
                raise ValueError(f"metric must be {self.n}x{self.n}, got shape {g.shape}")
            if not np.allclose(g, g.T, atol=1e-12):
                raise ValueError("metric must be symmetric")
            eig = np.linalg.eigvalsh(g)
            if np.min(np.abs(eig)) < 1e-12 * max(1.0, np.max(np.abs(eig))):
                raise ValueError("metric is degenerate")
            sig = (int(np.sum(eig > 0)), int(np.sum(eig < 0)))
            if sig != (self.p, self.q):
                raise ValueError(f"metric has signature {sig}, declared ({self.p}, {self.q})")
        g.setflags(write=False)
        g_inv = np.linalg.inv(g)
        g_inv.setflags(write=False)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "g_inv", g_inv)

    @classmethod
    def standard(cls, p: int, q: int) -> MetricSpace:
        return cls(p + q, p, q)

    def inner(self, x, y) -> float:
        return float(np.asarray(x) @ self.g @ np.asarray(y))

    def lower(self, x) -> np.ndarray:
        """Index lowering x -> g(x, .) as a covector (also works row-wise on batches)."""
        return np.asarray(x, dtype=float) @ self.g

    def raise_index(self, xi) -> np.ndarray:
        return np.asarray(xi, dtype=float) @ self.g_inv

    def same_as(self, other: MetricSpace) -> bool:
        return self.n == other.n and np.array_equal(self.g, other.g)


@dataclass(frozen=True)
class Subspace:
    """Linear subspace of R^n given by an orthonormal (Euclidean) column basis."""

    basis: np.ndarray
    n: int

    def __post_init__(self) -> None:
        b = np.asarray(self.basis, dtype=float).reshape(self.n, -1)
        b.setflags(write=False)
        object.__setattr__(self, "basis", b)

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    @classmethod
    def span(cls, vectors, n: int | None = None, tol: float = DEFAULT_TOL) -> Subspace:
        """Span of the given vectors (rows of ``vectors``), rank-revealed by SVD."""
        vecs = np.atleast_2d(np.asarray(vectors, dtype=float))
        if n is None:
            n = vecs.shape[1]
        if vecs.size == 0:
            return cls(np.zeros((n, 0)), n)
        return range_space(vecs.T, tol)

    @classmethod
    def full(cls, n: int) -> Subspace:
        return cls(np.eye(n), n)

    @classmethod
    def zero(cls, n: int) -> Subspace:
        return cls(np.zeros((n, 0)), n)

    def projector(self) -> np.ndarray:
        return self.basis @ self.basis.T

    def distance(self, x) -> float:
        """Euclidean distance from ``x`` to the subspace."""
        x = np.asarray(x, dtype=float)
        return float(np.linalg.norm(x - self.basis @ (self.basis.T @ x)))

    def contains(self, x, tol: float = 1e-8) -> bool:
        x = np.asarray(x, dtype=float)
        return self.distance(x) <= tol * max(1.0, float(np.linalg.norm(x)))

    def equals(self, other: Subspace, tol: float = 1e-8) -> bool:
        if self.dim != other.dim:
            return False
        return bool(np.max(np.abs(self.projector() - other.projector()), initial=0.0) <= tol)


def _threshold(s: np.ndarray, tol: float) -> float:
    # relative to the largest singular value, but never below tol itself:
    # a Jacobian of size 1e-20 at a polished zero must have rank 0, not n
    smax = float(s[0]) if s.size else 0.0
    return tol * max(smax, 1.0)


def kernel(A, tol: float = DEFAULT_TOL) -> Subspace:
    """Right kernel of ``A``: singular directions below ``tol * max(1, largest singular value)``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[1]
    if A.shape[0] == 0:
        return Subspace.full(n)
    _, s, vh = np.linalg.svd(A)
    rank = int(np.sum(s >= _threshold(s, tol)))
    return Subspace(vh[rank:].T.copy(), n)


def range_space(A, tol: float = DEFAULT_TOL) -> Subspace:
    """Column space of ``A`` with the same relative rank rule as :func:`kernel`."""
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    if A.shape[1] == 0:
        return Subspace.zero(n)
    u, s, _ = np.linalg.svd(A, full_matrices=False)
    rank = int(np.sum(s >= _threshold(s, tol)))
    return Subspace(u[:, :rank].copy(), n)


def rank(A, tol: float = DEFAULT_TOL) -> int:
    A = np.atleast_2d(np.asarray(A, dtype=float))
    return A.shape[1] - kernel(A, tol).dim


def orth_complement(S: Subspace, M: MetricSpace, tol: float = DEFAULT_TOL) -> Subspace:
    """g-orthogonal complement {y : g(y, s) = 0 for all s in S}."""
    if S.dim == 0:
        return Subspace.full(M.n)
    return kernel(S.basis.T @ M.g, tol)


def intersect(S1: Subspace, S2: Subspace, tol: float = DEFAULT_TOL) -> Subspace:
    """Intersection of two subspaces.

    Directions of ``S1`` whose distance to ``S2`` (sine of the principal
    angle) is below ``tol`` are kept. The threshold is absolute since both
    bases are orthonormal.
    """
    if S1.n != S2.n:
        raise ValueError("subspaces live in different ambient dimensions")
    if S1.dim == 0 or S2.dim == 0:
        return Subspace.zero(S1.n)
    resid = S1.basis - S2.basis @ (S2.basis.T @ S1.basis)
    _, s, vh = np.linalg.svd(resid, full_matrices=True)
    s_full = np.zeros(S1.dim)
    s_full[: s.size] = s
    keep = s_full < tol
    coeffs = vh[keep].T
    if coeffs.shape[1] == 0:
        return Subspace.zero(S1.n)
    return range_space(S1.basis @ coeffs, tol)


def is_null(x, M: MetricSpace, tol: float = DEFAULT_TOL) -> bool:
    x = np.asarray(x, dtype=float)
    return abs(M.inner(x, x)) <= tol * (1.0 + float(x @ x))


def gram(S: Subspace, M: MetricSpace) -> np.ndarray:
    """Matrix of g restricted to S in the stored basis."""
    return S.basis.T @ M.g @ S.basis


def restricted_signature(S: Subspace, M: MetricSpace, tol: float = DEFAULT_TOL) -> tuple[int, int, int]:
    """(positive, negative, zero) eigenvalue counts of g restricted to S."""
    if S.dim == 0:
        return (0, 0, 0)
    eig = np.linalg.eigvalsh(gram(S, M))
    pos = int(np.sum(eig > tol))
    neg = int(np.sum(eig < -tol))
    return (pos, neg, S.dim - pos - neg)


def is_semidefinite_on(S: Subspace, M: MetricSpace, tol: float = DEFAULT_TOL) -> bool:
    pos, neg, _ = restricted_signature(S, M, tol)
    return pos == 0 or neg == 0


def radical(S: Subspace, M: MetricSpace, tol: float = DEFAULT_TOL) -> Subspace:
    """Nullspace of the restricted metric, i.e. S intersected with its g-complement."""
    if S.dim == 0:
        return S
    return intersect(S, orth_complement(S, M, tol), tol)


def adjoint(A, M: MetricSpace) -> np.ndarray:
    """g-adjoint A* = g^{-1} A^T g."""
    return M.g_inv @ np.asarray(A, dtype=float).T @ M.g


def skew_part(A, M: MetricSpace) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    return 0.5 * (A - adjoint(A, M))


def sym_part(A, M: MetricSpace) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    return 0.5 * (A + adjoint(A, M))


def skew_from_params(theta, M: MetricSpace) -> np.ndarray:
    """g-skew matrix g^{-1} A with A antisymmetric, upper triangle of A read from ``theta``."""
    n = M.n
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (n * (n - 1) // 2,):
        raise ValueError(f"expected {n * (n - 1) // 2} parameters, got {theta.shape}")
    A = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    A[iu] = theta
    A -= A.T
    return M.g_inv @ A


def params_from_skew(K, M: MetricSpace) -> np.ndarray:
    A = M.g @ np.asarray(K, dtype=float)
    return A[np.triu_indices(M.n, 1)].copy()


def isometry_from_params(theta, M: MetricSpace) -> np.ndarray:
    """exp(K) for the g-skew K parametrized by ``theta``; lands in the identity component of O(g)."""
    return expm(skew_from_params(theta, M))


def normal_frame(M: MetricSpace) -> np.ndarray:
    """Matrix P with P^T g P = diag(+1 x p, -1 x q)."""
    eig, vec = np.linalg.eigh(M.g)
    order = np.concatenate([np.where(eig > 0)[0], np.where(eig < 0)[0]])
    eig, vec = eig[order], vec[:, order]
    return vec / np.sqrt(np.abs(eig))


def component_representatives(M: MetricSpace) -> list[np.ndarray]:
    """One isometry in each connected component of O(g)."""
    P = normal_frame(M)
    P_inv = np.linalg.inv(P)
    flips = [np.ones(M.n)]
    if M.p > 0:
        f = np.ones(M.n)
        f[0] = -1.0
        flips.append(f)
    if M.q > 0:
        f = np.ones(M.n)
        f[M.p] = -1.0
        flips.append(f)
    if M.p > 0 and M.q > 0:
        f = np.ones(M.n)
        f[0] = f[M.p] = -1.0
        flips.append(f)
    return [P @ np.diag(f) @ P_inv for f in flips]


def sample_null(S: Subspace, M: MetricSpace, rng: np.random.Generator, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Random unit-length (Euclidean) null vector inside S.

    Raises ``ValueError`` when S meets the null cone only at 0.
    """
    if S.dim == 0:
        raise ValueError("the zero subspace has no nonzero null vectors")
    G = gram(S, M)
    eig, vec = np.linalg.eigh(G)
    pos, neg, rad = vec[:, eig > tol], vec[:, eig < -tol], vec[:, np.abs(eig) <= tol]
    parts = []
    if pos.shape[1] and neg.shape[1]:
        a = pos @ rng.standard_normal(pos.shape[1])
        b = neg @ rng.standard_normal(neg.shape[1])
        a /= np.sqrt(a @ G @ a)
        b /= np.sqrt(-(b @ G @ b))
        parts.extend([a, b])
    if rad.shape[1]:
        parts.append(rad @ rng.standard_normal(rad.shape[1]) * (0.5 if parts else 1.0))
    if not parts:
        raise ValueError("subspace meets the null cone only at the origin")
    h = S.basis @ np.sum(parts, axis=0)
    return h / np.linalg.norm(h)
