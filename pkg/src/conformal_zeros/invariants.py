"""Jet invariants at zeros and the conformal equivalence of 1-jets and 2-jets.

Equivalence is refuted only by invariants. A positive answer always comes with
an explicit witness Phi satisfying Phi^T eta' Phi = s eta; bounded search that
fails to find one reports ``undecided``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm
from scipy.optimize import least_squares

from .checks import Check
from .fields import PointJet, hessian_from_jet
from .pseudo_euclidean import (
    DEFAULT_TOL,
    MetricSpace,
    Subspace,
    component_representatives,
    kernel,
    normal_frame,
    rank,
    skew_from_params,
    skew_part,
)

log = logging.getLogger(__name__)

SEARCH_STARTS = 16
SEARCH_TARGET = 1e-14


@dataclass(frozen=True)
class CharPoly:
    """Monic coefficients of det(t I - J), highest degree first."""

    coeffs: np.ndarray

    @property
    def degree(self) -> int:
        return self.coeffs.shape[0] - 1

    def __call__(self, t: float) -> float:
        return float(np.polyval(self.coeffs, t))

    def close_to(self, other: CharPoly, tol: float = 1e-8) -> bool:
        if self.degree != other.degree:
            return False
        scale = max(1.0, float(np.max(np.abs(self.coeffs))), float(np.max(np.abs(other.coeffs))))
        return bool(np.max(np.abs(self.coeffs - other.coeffs)) <= tol * scale)


def char_poly(J) -> CharPoly:
    """Faddeev-LeVerrier recursion; exact in rational arithmetic, well-conditioned for n <= 8."""
    A = np.asarray(J, dtype=float)
    n = A.shape[0]
    coeffs = np.zeros(n + 1)
    coeffs[0] = 1.0
    M = np.zeros_like(A)
    eye = np.eye(n)
    for k in range(1, n + 1):
        M = A @ M + coeffs[k - 1] * eye
        coeffs[k] = -np.trace(A @ M) / k
    return CharPoly(coeffs)


@dataclass(frozen=True)
class Quintuple:
    n: int
    eta: np.ndarray
    B: np.ndarray
    lam: float
    delta_basis: Subspace
    delta: np.ndarray

    @property
    def signature(self) -> tuple[int, int]:
        eig = np.linalg.eigvalsh(self.eta)
        return int(np.sum(eig > 0)), int(np.sum(eig < 0))

    @property
    def delta_full(self) -> np.ndarray:
        """delta as a covector on R^n, zero on the Euclidean complement of its domain."""
        return self.delta_basis.basis @ self.delta

    def space(self) -> MetricSpace:
        p, q = self.signature
        return MetricSpace(self.n, p, q, self.eta)


def extract_quintuple(jet: PointJet, space: MetricSpace, tol: float = DEFAULT_TOL) -> Quintuple:
    if np.linalg.norm(jet.v) >= max(tol, 1e-12):
        raise ValueError("quintuples are only defined at zeros")
    n = space.n
    B = 2.0 * skew_part(jet.J, space)
    lam = 2.0 * float(np.trace(jet.J)) / n
    K = kernel(B + lam * np.eye(n), tol)
    return Quintuple(n, np.array(space.g), B, lam, K, jet.dphi @ K.basis)


def _rank_profile(A: np.ndarray, tol: float) -> list[int]:
    n = A.shape[0]
    out = []
    P = np.eye(n)
    for _ in range(n):
        P = P @ A
        out.append(rank(P, tol))
    return out


def invariant_battery(q1: Quintuple, q2: Quintuple, tol: float = DEFAULT_TOL) -> list[Check]:
    """Necessary conditions for equivalence, evaluated in a fixed order.

    Evaluation stops at the first failure, which names the obstruction.
    """
    checks: list[Check] = []

    def add(name, ok, **measured):
        checks.append(Check(name, bool(ok), measured))
        return ok

    if not add("dimension", q1.n == q2.n, n1=q1.n, n2=q2.n):
        return checks
    lam_scale = max(1.0, abs(q1.lam), abs(q2.lam))
    if not add("lambda", abs(q1.lam - q2.lam) <= tol * lam_scale, lambda1=q1.lam, lambda2=q2.lam):
        return checks
    s1, s2 = q1.signature, q2.signature
    if not add("signature", s1 == s2 or s1 == s2[::-1], sig1=list(s1), sig2=list(s2)):
        return checks
    if not add("rank-B", rank(q1.B, tol) == rank(q2.B, tol), rank1=rank(q1.B, tol), rank2=rank(q2.B, tol)):
        return checks
    d1, d2 = q1.delta_basis.dim, q2.delta_basis.dim
    if not add("kernel-dim", d1 == d2, dim1=d1, dim2=d2):
        return checks
    z1 = bool(np.linalg.norm(q1.delta) <= tol)
    z2 = bool(np.linalg.norm(q2.delta) <= tol)
    if not add("delta-vanishing", z1 == z2, delta1_zero=z1, delta2_zero=z2):
        return checks
    r1, r2 = _rank_profile(q1.B, tol), _rank_profile(q2.B, tol)
    if not add("rank-powers-B", r1 == r2, ranks1=r1, ranks2=r2):
        return checks
    # conjugation preserves the spectrum exactly; coefficients are stabler than eigenvalues of defective B
    c1, c2 = char_poly(q1.B), char_poly(q2.B)
    spread = float(np.max(np.abs(c1.coeffs - c2.coeffs)))
    add("spectrum-B", c1.close_to(c2, 1e-7), max_coeff_diff=spread)
    return checks


@dataclass
class EquivalenceVerdict:
    status: str  # "equivalent" | "inequivalent" | "undecided"
    Phi: np.ndarray | None = None
    s: float | None = None
    obstruction: str | None = None
    residual: float = float("inf")
    objective: float = float("inf")
    checks: list[Check] = field(default_factory=list)
    evaluations: int = 0

    @property
    def equivalent(self) -> bool:
        return self.status == "equivalent"

    def to_record(self) -> dict:
        rec = {
            "status": self.status,
            "obstruction": self.obstruction,
            "residual": self.residual if np.isfinite(self.residual) else None,
            "objective": self.objective if np.isfinite(self.objective) else None,
            "battery": [c.to_record() for c in self.checks],
        }
        if self.Phi is not None:
            rec["witness"] = {"Phi": np.round(self.Phi, 12).tolist(), "s": self.s}
        return rec


def witness_residual(q1: Quintuple, q2: Quintuple, Phi, s: float) -> dict[str, float]:
    """Max-abs residuals of the metric, B and delta transport conditions."""
    Phi = np.asarray(Phi, dtype=float)
    Phi_inv = np.linalg.inv(Phi)
    eta = float(np.max(np.abs(Phi.T @ q2.eta @ Phi - s * q1.eta)))
    B = float(np.max(np.abs(Phi @ q1.B @ Phi_inv - q2.B)))
    if q2.delta_basis.dim:
        dl = float(np.max(np.abs(q1.delta_full @ Phi_inv @ q2.delta_basis.basis - q2.delta)))
        image = Subspace.span((Phi @ q1.delta_basis.basis).T, q1.n)
        dom = 0.0 if image.equals(q2.delta_basis, 1e-6) else 1.0
    else:
        dl, dom = 0.0, 0.0
    return {"eta": eta, "B": B, "delta": dl, "kernel": dom}


def congruence(eta1, eta2, eps: int) -> np.ndarray:
    """C with C^T eta2 C = eps * eta1; eps = -1 needs the swapped signature."""
    M1 = MetricSpace(eta1.shape[0], *_signature(eta1), eta1)
    M2 = MetricSpace(eta2.shape[0], *_signature(eta2), eta2)
    P1, P2 = normal_frame(M1), normal_frame(M2)
    n = M1.n
    if eps == 1:
        if (M1.p, M1.q) != (M2.p, M2.q):
            raise ValueError("signatures differ")
        S = np.eye(n)
    else:
        if (M1.p, M1.q) != (M2.q, M2.p):
            raise ValueError("signatures are not swapped")
        # positive block of eta1 goes to the negative block of eta2 and vice versa
        perm = list(range(M2.p, n)) + list(range(M2.p))
        S = np.eye(n)[:, perm]
    return P2 @ S @ np.linalg.inv(P1)


def _signature(eta) -> tuple[int, int]:
    eig = np.linalg.eigvalsh(eta)
    return int(np.sum(eig > 0)), int(np.sum(eig < 0))


def _branches(eta1, eta2):
    s1, s2 = _signature(eta1), _signature(eta2)
    eps = []
    if s1 == s2:
        eps.append(1)
    if s1 == s2[::-1]:
        eps.append(-1)
    M1 = MetricSpace(eta1.shape[0], *s1, eta1)
    for e in eps:
        C = congruence(eta1, eta2, e)
        for R in component_representatives(M1):
            yield e, C @ R, M1


def _finite(r: np.ndarray) -> np.ndarray:
    # runaway starts along noncompact directions overflow expm; steer the solver back
    return r if np.all(np.isfinite(r)) else np.full_like(r, 1e6)


def _round_robin(problems, nparams: int, budget: int, rng: np.random.Generator, scale: float = 0.5):
    """Seeded multi-start Levenberg-Marquardt over several branches.

    Start k is tried on every branch before start k+1, so the zero start of
    the right branch is reached early. Returns (branch index, x, objective,
    total evaluations) of the best run; stops at the first run below target.
    """
    best = (0, np.zeros(nparams), float("inf"))
    total = 0
    for start in range(SEARCH_STARTS):
        for k, fn in enumerate(problems):
            x0 = np.zeros(nparams) if start == 0 else scale * rng.standard_normal(nparams)
            sol = least_squares(fn, x0, method="lm", max_nfev=budget, ftol=1e-15, xtol=1e-15, gtol=1e-15)
            total += sol.nfev
            obj = float(sol.fun @ sol.fun)
            if obj < best[2]:
                best = (k, sol.x, obj)
            if obj < SEARCH_TARGET:
                return (*best, total)
    return (*best, total)


def search_witness(q1: Quintuple, q2: Quintuple, budget: int = 5000, seed: int = 42, tol: float = DEFAULT_TOL) -> EquivalenceVerdict:
    """Battery first, then a seeded multi-start least-squares search for Phi = sqrt(s) C R exp(K)."""
    battery = invariant_battery(q1, q2, tol)
    failed = [c for c in battery if c.passed is False]
    if failed:
        return EquivalenceVerdict("inequivalent", obstruction=failed[0].name, checks=battery)
    n = q1.n
    m = n * (n - 1) // 2
    K2 = q2.delta_basis.basis
    d1 = q1.delta_full
    branches = list(_branches(q1.eta, q2.eta))

    def make(base, M1):
        base_inv = np.linalg.inv(base)

        def residuals(x):
            K = skew_from_params(x[:m], M1)
            Phi = np.exp(0.5 * x[m]) * base @ expm(K)
            Phi_inv = np.exp(-0.5 * x[m]) * expm(-K) @ base_inv
            rb = (Phi @ q1.B @ Phi_inv - q2.B).ravel()
            rd = d1 @ Phi_inv @ K2 - q2.delta
            return _finite(np.concatenate([rb, rd]))

        return residuals

    problems = [make(base, M1) for _, base, M1 in branches]
    k, x, obj, total = _round_robin(problems, m + 1, budget, np.random.default_rng(seed))
    eps, base, M1 = branches[k]
    Phi = np.exp(0.5 * x[m]) * base @ expm(skew_from_params(x[:m], M1))
    s = eps * float(np.exp(x[m]))
    res = witness_residual(q1, q2, Phi, s)
    verdict = EquivalenceVerdict(
        "undecided", Phi, s, residual=max(res["eta"] / abs(s), res["B"], res["delta"]), objective=obj, checks=battery, evaluations=total
    )
    if obj < SEARCH_TARGET and verdict.residual < 1e-7:
        verdict.status = "equivalent"
    else:
        log.info("witness search undecided, best objective %.3e", obj)
    return verdict


def _one_jet_battery(J1, J2, sp1: MetricSpace, sp2: MetricSpace, tol: float) -> list[Check]:
    checks = []

    def add(name, ok, **measured):
        checks.append(Check(name, bool(ok), measured))
        return ok

    if not add("dimension", sp1.n == sp2.n, n1=sp1.n, n2=sp2.n):
        return checks
    s1, s2 = (sp1.p, sp1.q), (sp2.p, sp2.q)
    if not add("signature", s1 == s2 or s1 == s2[::-1], sig1=list(s1), sig2=list(s2)):
        return checks
    c1, c2 = char_poly(J1), char_poly(J2)
    if not add("char-poly", c1.close_to(c2, 1e-8), max_coeff_diff=float(np.max(np.abs(c1.coeffs - c2.coeffs)))):
        return checks
    r1, r2 = _rank_profile(J1, tol), _rank_profile(J2, tol)
    add("rank-powers-J", r1 == r2, ranks1=r1, ranks2=r2)
    return checks


def one_jet_equivalent(
    jet1: PointJet,
    jet2: PointJet,
    space1: MetricSpace,
    space2: MetricSpace,
    budget: int = 5000,
    seed: int = 42,
    tol: float = DEFAULT_TOL,
) -> EquivalenceVerdict:
    """Search for a conformal linear Phi with Phi J1 Phi^-1 = J2 (the scale drops out; s is reported as +-1)."""
    for jet in (jet1, jet2):
        if np.linalg.norm(jet.v) >= max(tol, 1e-12):
            raise ValueError("1-jet comparison needs zeros")
    battery = _one_jet_battery(jet1.J, jet2.J, space1, space2, tol)
    failed = [c for c in battery if c.passed is False]
    if failed:
        return EquivalenceVerdict("inequivalent", obstruction=failed[0].name, checks=battery)
    n = space1.n
    m = n * (n - 1) // 2
    branches = list(_branches(space1.g, space2.g))

    def make(base, M1):
        def residuals(x):
            Phi = base @ expm(skew_from_params(x, M1))
            # normalizing keeps boosts from inflating the residual without bound
            return _finite((Phi @ jet1.J - jet2.J @ Phi).ravel() / np.linalg.norm(Phi))

        return residuals

    problems = [make(base, M1) for _, base, M1 in branches]
    k, x, obj, total = _round_robin(problems, m, budget, np.random.default_rng(seed))
    eps, base, M1 = branches[k]
    Phi = base @ expm(skew_from_params(x, M1))
    resid = float(np.max(np.abs(Phi @ jet1.J @ np.linalg.inv(Phi) - jet2.J)))
    verdict = EquivalenceVerdict("undecided", Phi, float(eps), residual=resid, objective=obj, checks=battery, evaluations=total)
    if obj < SEARCH_TARGET and resid < 1e-7:
        verdict.status = "equivalent"
    return verdict


@dataclass(frozen=True)
class TwoJetWitness:
    """Solution data (F, F2, tau, tau1) of the 2-jet system together with sigma.

    ``sign`` is -1 when F is an anti-isometry up to scale; the target metric
    is then replaced by its negative, which lies in the same homothety class.
    """

    F: np.ndarray
    F2: np.ndarray
    tau: float
    tau1: np.ndarray
    sigma: np.ndarray
    sign: int = 1
    sigma_residual: float = 0.0


def build_two_jet_witness(
    Phi, s: float, jet1: PointJet, jet2: PointJet, space1: MetricSpace, space2: MetricSpace, tol: float = 1e-8
) -> TwoJetWitness:
    """Extend a quintuple witness to second order.

    sigma solves 2 J1^T sigma = d(phi1) - Phi^T d(phi2) with minimal norm;
    it exists exactly when Phi carries delta to delta'.
    """
    F = np.asarray(Phi, dtype=float)
    D = jet1.dphi - F.T @ jet2.dphi
    A = 2.0 * jet1.J.T
    sigma, *_ = np.linalg.lstsq(A, D, rcond=1e-12)
    resid = float(np.linalg.norm(A @ sigma - D))
    if resid > tol * max(1.0, float(np.linalg.norm(D))):
        raise ValueError(f"sigma system is inconsistent (residual {resid:.3e}); Phi does not carry delta to delta'")
    g = space1.g
    sigma_up = space1.raise_index(sigma)
    Fs = F @ sigma_up
    F2 = (
        np.einsum("a,jk->ajk", Fs, g)
        - np.einsum("j,ak->ajk", sigma, F)
        - np.einsum("k,aj->ajk", sigma, F)
    )
    sign = 1 if s > 0 else -1
    return TwoJetWitness(F, F2, float(np.log(abs(s))), -2.0 * sigma, sigma, sign, resid)


def verify_sys(w: TwoJetWitness, jet1: PointJet, jet2: PointJet, space1: MetricSpace, space2: MetricSpace) -> dict[str, float]:
    """Max-abs residual of each of the four blocks of the 2-jet system."""
    F, F2 = w.F, w.F2
    g = space1.g
    h = w.sign * space2.g
    J1, J2 = jet1.J, jet2.J
    H1 = hessian_from_jet(jet1, space1)
    H2 = hessian_from_jet(jet2, space2)
    et = np.exp(w.tau)
    r1 = J2 @ F - F @ J1
    r2 = (
        np.einsum("al,ljk->ajk", F, H1)
        + np.einsum("ajl,lk->ajk", F2, J1)
        + np.einsum("akl,lj->ajk", F2, J1)
        - np.einsum("bj,ck,abc->ajk", F, F, H2)
        - np.einsum("cjk,ac->ajk", F2, J2)
    )
    r3 = F.T @ h @ F - et * g
    r4 = np.einsum("ac,aj,ckl->jkl", h, F, F2) + np.einsum("ac,ajl,ck->jkl", h, F2, F) - et * np.einsum(
        "l,jk->jkl", w.tau1, g
    )
    asym = float(np.max(np.abs(F2 - F2.transpose(0, 2, 1))))
    return {
        "i": float(np.max(np.abs(r1))),
        "ii": float(np.max(np.abs(r2))),
        "iii": float(np.max(np.abs(r3))),
        "iv": float(np.max(np.abs(r4))),
        "F2_symmetry": asym,
    }


def two_jet_equivalent(
    jet1: PointJet,
    jet2: PointJet,
    space1: MetricSpace,
    space2: MetricSpace,
    budget: int = 5000,
    seed: int = 42,
    tol: float = DEFAULT_TOL,
) -> tuple[EquivalenceVerdict, TwoJetWitness | None]:
    q1 = extract_quintuple(jet1, space1, tol)
    q2 = extract_quintuple(jet2, space2, tol)
    verdict = search_witness(q1, q2, budget, seed, tol)
    if not verdict.equivalent:
        return verdict, None
    witness = build_two_jet_witness(verdict.Phi, verdict.s, jet1, jet2, space1, space2)
    blocks = verify_sys(witness, jet1, jet2, space1, space2)
    worst = max(blocks.values())
    verdict.checks.append(Check("sys", worst < 1e-8, blocks))
    if worst >= 1e-8:
        verdict.status = "undecided"
        verdict.obstruction = "sys-residual"
    return verdict, witness
