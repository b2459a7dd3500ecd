"""Quasi-Hamiltonian example spaces (M, Phi) and moment-map verifiers.

Points are tuples of group elements (one per factor) and tangent vectors are
tuples of left-trivialized Lie algebra elements, so ``Y[f]`` at ``m[f]``
stands for the vector ``m[f] @ Y[f]``.  The two-form of a quasi-Hamiltonian
space is not modelled; only the moment map and the action are.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import PreconditionError
from .jacobi import JacobiField, curvature_spectrum
from .lie import GroupSpec, null_space

SpacePoint = tuple
SpaceTangent = tuple

FD_STEP = 1e-3


@dataclass
class CheckReport:
    name: str
    passed: bool
    residual: float
    tolerance: float
    vacuous: bool = False
    details: dict[str, Any] = field(default_factory=dict)


class QHSpace:
    """Base class: a compact G-manifold with an equivariant map Phi: M -> G."""

    kind = "abstract"
    n_factors = 0

    def __init__(self, group: GroupSpec):
        self.group = group

    # -- to be provided by subclasses ---------------------------------

    def moment(self, m: SpacePoint) -> np.ndarray:
        raise NotImplementedError

    def moment_diff(self, m: SpacePoint, Y: SpaceTangent) -> np.ndarray:
        raise NotImplementedError

    def tangent_basis(self, m: SpacePoint) -> list[SpaceTangent]:
        raise NotImplementedError

    def retract(self, m: SpacePoint, Y: SpaceTangent) -> SpacePoint:
        raise NotImplementedError

    def random_point(self, rng: np.random.Generator) -> SpacePoint:
        raise NotImplementedError

    def describe(self) -> dict:
        return {"kind": self.kind}

    # -- shared machinery ----------------------------------------------

    def zero_tangent(self, m: SpacePoint) -> SpaceTangent:
        return tuple(np.zeros_like(f) for f in m)

    def dim_at(self, m: SpacePoint) -> int:
        return len(self.tangent_basis(m))

    def inner(self, Y: SpaceTangent, Yp: SpaceTangent) -> float:
        return float(sum(self.group.inner(a, b) for a, b in zip(Y, Yp)))

    def combine(self, coeffs, tangents) -> SpaceTangent:
        """Linear combination sum_j coeffs[j] * tangents[j]."""
        if not tangents:
            return ()
        return tuple(
            sum(c * t[f] for c, t in zip(coeffs, tangents)) for f in range(len(tangents[0]))
        )

    def coords(self, m: SpacePoint, Y: SpaceTangent, basis=None) -> np.ndarray:
        basis = self.tangent_basis(m) if basis is None else basis
        return np.array([self.inner(Y, b) for b in basis])

    def act(self, g: np.ndarray, m: SpacePoint) -> SpacePoint:
        return tuple(self.group.Ad(g, f) for f in m)

    def act_tangent(self, g: np.ndarray, Y: SpaceTangent) -> SpaceTangent:
        return tuple(self.group.Ad(g, y) for y in Y)

    def infinitesimal_action(self, m: SpacePoint, gamma: np.ndarray) -> SpaceTangent:
        """gamma^M(m) = d/ds exp(s gamma) . m, left-trivialized per factor."""
        return tuple(self.group.Ad(np.conj(f.T), gamma) - gamma for f in m)

    def stab_algebra(self, m: SpacePoint, tol: float = 1e-9) -> np.ndarray:
        """Orthonormal basis of the Lie algebra of Stab(m)."""
        G = self.group
        if not m:
            return G.basis.copy()
        cols = [np.concatenate([G.to_vec(y) for y in self.infinitesimal_action(m, b)]) for b in G.basis]
        return G.kernel_basis(np.array(cols).T, tol)

    def fixed_residual(self, m: SpacePoint, xi: np.ndarray) -> float:
        """|xi^M(m)|: zero iff m lies in the fixed set M^xi."""
        return float(np.sqrt(sum(self.group.norm(y) ** 2 for y in self.infinitesimal_action(m, xi))))

    def image_matrix(self, m: SpacePoint, basis=None) -> np.ndarray:
        """Columns: coordinates of Phi(m)^-1 Phi_* over a tangent basis."""
        basis = self.tangent_basis(m) if basis is None else basis
        if not basis:
            return np.zeros((self.group.dim, 0))
        return np.array([self.group.to_vec(self.moment_diff(m, b)) for b in basis]).T

    def generator_matrix(self, m: SpacePoint, xi: np.ndarray, basis=None) -> np.ndarray:
        """Linearized exp(t xi)-action on T_m M (valid at points of M^xi)."""
        basis = self.tangent_basis(m) if basis is None else basis
        moved = [tuple(self.group.ad(xi, y) for y in b) for b in basis]
        return np.array([self.coords(m, v, basis) for v in moved]).T.reshape(len(basis), len(basis))

    # -- second derivative of the moment map ----------------------------

    def _lr_estimate(self, m, xi, Y, Yp, h):
        G = self.group

        def phi(s, t):
            return self.moment(self.retract(m, self.combine([s, t], [Y, Yp])))

        def slopes(s):
            P0 = phi(s, 0.0)
            Pinv = np.conj(P0.T)
            Pp, Pm = phi(s, h), phi(s, -h)
            uL = (G.log(Pinv @ Pp) - G.log(Pinv @ Pm)) / (2 * h)
            uR = (G.log(Pp @ Pinv) - G.log(Pm @ Pinv)) / (2 * h)
            return G.inner(uL, xi), G.inner(uR, xi)

        (lp, rp), (lm, rm) = slopes(h), slopes(-h)
        return (lp - lm) / (2 * h), (rp - rm) / (2 * h)

    def check_perpendicular(self, m: SpacePoint, xi: np.ndarray, tol: float = 1e-8) -> float:
        img = self.image_matrix(m)
        if img.size == 0:
            return 0.0
        resid = float(np.abs(self.group.to_vec(xi) @ img).max())
        if resid > tol * max(1.0, float(self.group.norm(xi))):
            raise PreconditionError(f"xi is not perpendicular to the image of Phi_* ({resid:.3e})")
        return resid

    def hessian_moment(
        self, m: SpacePoint, xi: np.ndarray, Y: SpaceTangent, Yp: SpaceTangent,
        step: float = FD_STEP, check: bool = True,
    ) -> float:
        """H^xi Phi(Y, Y') with the Levi-Civita derivative as the mean of the
        left- and right-trivialized second derivatives, by central differences
        with one Richardson extrapolation step."""
        if not m or self.group.norm(xi) == 0:
            return 0.0
        if check:
            self.check_perpendicular(m, xi)
        L1, R1 = self._lr_estimate(m, xi, Y, Yp, step)
        L2, R2 = self._lr_estimate(m, xi, Y, Yp, step / 2)
        L = (4 * L2 - L1) / 3
        R = (4 * R2 - R1) / 3
        return float(0.5 * (L + R))

    def hessian_moment_matrix(self, m: SpacePoint, xi: np.ndarray, basis=None, check: bool = True) -> np.ndarray:
        basis = self.tangent_basis(m) if basis is None else basis
        k = len(basis)
        H = np.zeros((k, k))
        if k == 0 or self.group.norm(xi) == 0:
            return H
        if check:
            self.check_perpendicular(m, xi)
        for i in range(k):
            for j in range(i, k):
                H[i, j] = H[j, i] = self.hessian_moment(m, xi, basis[i], basis[j], check=False)
        return H

    # -- fixed sets -----------------------------------------------------

    def fixed_set_tangent(self, m: SpacePoint, xi: np.ndarray, tol: float = 1e-8) -> list[SpaceTangent]:
        """Orthonormal basis of T_m(M^xi)."""
        scale = max(1.0, float(self.group.norm(xi)))
        if self.fixed_residual(m, xi) > tol * scale:
            raise PreconditionError("m is not fixed by exp(t xi)")
        basis = self.tangent_basis(m)
        if not basis:
            return []
        A = self.generator_matrix(m, xi, basis) / scale
        K = null_space(A, tol)
        return [self.combine(col, basis) for col in K.T]


class PointSpace(QHSpace):
    """The one-point space with Phi = e (based loops)."""

    kind = "point"

    def moment(self, m):
        return self.group.identity()

    def moment_diff(self, m, Y):
        return np.zeros((self.group.matrix_dim,) * 2, dtype=complex)

    def tangent_basis(self, m):
        return []

    def retract(self, m, Y):
        return ()

    def random_point(self, rng):
        return ()

    def base_point(self):
        return ()


class ConjugacyClass(QHSpace):
    """Conjugacy class of exp(eta) with Phi the inclusion."""

    kind = "conjugacy"
    n_factors = 1

    def __init__(self, group: GroupSpec, eta: np.ndarray):
        super().__init__(group)
        self.eta = np.array(eta, dtype=complex)
        self.base = group.exp(self.eta)
        self.spectrum = np.linalg.eigvals(self.base)

    def describe(self):
        return {"kind": self.kind, "eta_angles": [float(v) for v in np.real(-1j * np.diag(self.eta))]}

    def base_point(self):
        return (self.base.copy(),)

    def moment(self, m):
        return m[0]

    def moment_diff(self, m, Y):
        return Y[0]

    def tangent_basis(self, m):
        G = self.group
        stab = G.stab_algebra(m[0])
        P = np.eye(G.dim) - (G.to_vec(stab).T @ G.to_vec(stab) if len(stab) else 0)
        w, V = np.linalg.eigh(P)
        cols = V[:, w > 0.5]
        return [(G.from_vec(c),) for c in cols.T]

    def _generator(self, m, X):
        G = self.group
        g = m[0]
        A = G.Ad_matrix(np.conj(g.T)) - np.eye(G.dim)
        return G.from_vec(np.linalg.pinv(A, rcond=1e-10) @ G.to_vec(X))

    def retract(self, m, Y):
        G = self.group
        a = G.exp(self._generator(m, Y[0]))
        return (a @ m[0] @ np.conj(a.T),)

    def project_point(self, m):
        """Snap a drifted point back onto the class (isospectral projection)."""
        G = self.group
        g = G.project(m[0])
        w, V = np.linalg.eig(g)
        V, _ = np.linalg.qr(V)
        cost = np.abs(w[:, None] - self.spectrum[None, :])
        _, perm = linear_sum_assignment(cost)
        return (V @ np.diag(self.spectrum[perm]) @ np.conj(V.T),)

    def random_point(self, rng):
        return self.act(self.group.random_element(rng), self.base_point())


class Double(QHSpace):
    """G^{2h} with Phi(a_1..a_h, b_1..b_h) = prod [a_i, b_i]."""

    kind = "double"

    def __init__(self, group: GroupSpec, genus: int = 1):
        if genus < 1:
            raise ValueError("genus must be at least 1")
        super().__init__(group)
        self.genus = genus
        self.n_factors = 2 * genus
        word = []
        for i in range(genus):
            a, b = i, genus + i
            word += [(a, 1), (b, 1), (a, -1), (b, -1)]
        self.word = tuple(word)

    def describe(self):
        return {"kind": self.kind, "genus": self.genus}

    def base_point(self):
        return tuple(self.group.identity() for _ in range(self.n_factors))

    def _letters(self, m):
        return [m[f] if p > 0 else np.conj(m[f].T) for f, p in self.word]

    def moment(self, m):
        P = self.group.identity()
        for F in self._letters(m):
            P = P @ F
        return P

    def moment_diff(self, m, Y):
        G = self.group
        letters = self._letters(m)
        suffix = G.identity()
        total = np.zeros_like(suffix)
        for (f, p), F in zip(reversed(self.word), reversed(letters)):
            local = Y[f] if p > 0 else -G.Ad(m[f], Y[f])
            total = total + np.conj(suffix.T) @ local @ suffix
            suffix = F @ suffix
        return total

    def tangent_basis(self, m):
        G = self.group
        out = []
        for f in range(self.n_factors):
            for b in G.basis:
                Y = [np.zeros_like(b) for _ in range(self.n_factors)]
                Y[f] = b
                out.append(tuple(Y))
        return out

    def retract(self, m, Y):
        return tuple(f @ self.group.exp(y) for f, y in zip(m, Y))

    def random_point(self, rng):
        return tuple(self.group.random_element(rng) for _ in range(self.n_factors))


def make_space(group: GroupSpec, kind: str, eta=None, genus: int = 1) -> QHSpace:
    if kind == "point":
        return PointSpace(group)
    if kind == "conjugacy":
        if eta is None:
            raise ValueError("conjugacy space needs eta")
        eta = np.asarray(eta)
        if eta.ndim == 1:
            angles = np.array(eta, dtype=float)
            if len(angles) == group.matrix_dim - 1 == 1:
                angles = np.array([angles[0], -angles[0]])
            if len(angles) != group.matrix_dim or abs(angles.sum()) > 1e-12:
                raise ValueError("eta angles must have one entry per diagonal slot and sum to zero")
            eta = group.torus_element(angles)
        return ConjugacyClass(group, eta)
    if kind == "double":
        return Double(group, genus)
    raise ValueError(f"unknown space kind {kind!r}")


# -- numerical verifiers for the moment-map lemmas ----------------------


def _subspace_gap(A: np.ndarray, B: np.ndarray) -> float:
    """sin of the largest principal angle of span(A) relative to span(B)."""
    if A.shape[1] == 0:
        return 0.0
    if B.shape[1] == 0:
        return 1.0
    QB, _ = np.linalg.qr(B)
    QA, _ = np.linalg.qr(A)
    return float(np.linalg.norm(QA - QB @ (QB.T @ QA), 2))


def verify_first_order_image(space: QHSpace, m: SpacePoint, tol: float = 1e-8) -> CheckReport:
    """Phi(m)^-1 Phi_*(T_m M) equals the orthogonal complement of stab(m)."""
    G = space.group
    img = space.image_matrix(m)
    stab = G.to_vec(space.stab_algebra(m)).T.reshape(G.dim, -1)
    perp = null_space(stab.T) if stab.shape[1] else np.eye(G.dim)
    U, s, _ = np.linalg.svd(img, full_matrices=False) if img.size else (np.zeros((G.dim, 0)), np.zeros(0), None)
    rank = int(np.sum(s > 1e-9 * max(1.0, s[0] if s.size else 0.0)))
    image = U[:, :rank]
    resid = max(_subspace_gap(image, perp), _subspace_gap(perp, image))
    return CheckReport(
        "first_order_image", resid < tol and rank == perp.shape[1], resid, tol,
        vacuous=img.shape[1] == 0,
        details={"image_rank": rank, "stab_dim": stab.shape[1]},
    )


def verify_hamimage(space: QHSpace, m: SpacePoint, xi: np.ndarray, tol: float = 1e-8) -> CheckReport:
    """Phi(m)^-1 Phi_*(T_m M^xi) equals stab(m)^perp intersected with g^xi."""
    G = space.group
    fixed = space.fixed_set_tangent(m, xi)
    img = space.image_matrix(m, fixed)
    stab = G.to_vec(space.stab_algebra(m)).T.reshape(G.dim, -1)
    cent = G.ad_matrix(xi)
    constraints = np.vstack([stab.T, cent]) if stab.shape[1] else cent
    target = null_space(constraints)
    if img.size:
        U, s, _ = np.linalg.svd(img, full_matrices=False)
        image = U[:, : int(np.sum(s > 1e-9 * max(1.0, s[0])))]
    else:
        image = np.zeros((G.dim, 0))
    resid = max(_subspace_gap(image, target), _subspace_gap(target, image))
    return CheckReport("hamimage", resid < tol, resid, tol, vacuous=not fixed,
                       details={"fixed_dim": len(fixed), "target_dim": target.shape[1]})


def verify_commuting(
    space: QHSpace, m: SpacePoint, xi: np.ndarray, rng: np.random.Generator,
    samples: int = 5, tol: float = 1e-5,
) -> CheckReport:
    """Vectors tangent to M^xi lie in the null space of H^xi Phi."""
    fixed = space.fixed_set_tangent(m, xi)
    basis = space.tangent_basis(m)
    if not fixed or space.group.norm(xi) == 0:
        return CheckReport("commuting", True, 0.0, tol, vacuous=True)
    resid = 0.0
    for Y in fixed:
        for _ in range(samples):
            Yp = space.combine(rng.standard_normal(len(basis)), basis)
            Yp = space.combine([1 / np.sqrt(space.inner(Yp, Yp))], [Yp])
            resid = max(resid, abs(space.hessian_moment(m, xi, Y, Yp)))
    return CheckReport("commuting", resid < tol, resid, tol, details={"fixed_dim": len(fixed)})


def verify_nondeg(space: QHSpace, m: SpacePoint, xi: np.ndarray, tol: float = 1e-5) -> CheckReport:
    """Null vectors of H^xi Phi inside ker(Phi_*) are tangent to M^xi.

    A vector X in ker(Phi_*) counts as null when H^xi Phi(X, Y') = 0 for all
    Y' in T_m M.  The residual is the sine of the largest principal angle
    between that null space and T_m(M^xi).
    """
    G = space.group
    basis = space.tangent_basis(m)
    if not basis:
        return CheckReport("nondeg", True, 0.0, tol, vacuous=True)
    img = space.image_matrix(m, basis)
    K = null_space(img, 1e-9)
    H = space.hessian_moment_matrix(m, xi, basis)
    scale = max(1.0, float(np.abs(H).max()))
    if K.shape[1] == 0:
        null = np.zeros((len(basis), 0))
    else:
        null = K @ null_space(H @ K / scale, 1e-6)
    fixed = space.fixed_set_tangent(m, xi)
    F = np.array([space.coords(m, Y, basis) for Y in fixed]).T.reshape(len(basis), len(fixed))
    resid = _subspace_gap(null, F)
    return CheckReport(
        "nondeg", resid < tol, resid, tol, vacuous=null.shape[1] == 0 and G.norm(xi) == 0,
        details={"kernel_dim": K.shape[1], "null_dim": null.shape[1], "fixed_dim": len(fixed)},
    )


def conjugation_jacobi_derivative(group: GroupSpec, xi: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """DW/Dt(1) for the Jacobi field along exp(t xi) induced by conjugation by exp(s gamma)."""
    spec = curvature_spectrum(group, xi)
    field_ = JacobiField.vanishing_at_zero(spec, group.ad(gamma, xi))
    return field_.derivative(1.0)


def verify_invar(
    space: QHSpace, m: SpacePoint, xi: np.ndarray, rng: np.random.Generator,
    samples: int = 5, tol: float = 1e-5,
) -> CheckReport:
    """<DW_gamma/Dt(1), Phi_* Y'> + H^xi Phi(gamma^M, Y') = 0 for random gamma, Y'."""
    G = space.group
    basis = space.tangent_basis(m)
    if not basis:
        return CheckReport("invar", True, 0.0, tol, vacuous=True)
    resid = 0.0
    for _ in range(samples):
        gamma = G.random_algebra(rng)
        Yp = space.combine(rng.standard_normal(len(basis)), basis)
        D1 = conjugation_jacobi_derivative(G, xi, gamma)
        val = G.inner(D1, space.moment_diff(m, Yp)) + space.hessian_moment(
            m, xi, space.infinitesimal_action(m, gamma), Yp
        )
        resid = max(resid, abs(float(val)))
    return CheckReport("invar", resid < tol, resid, tol)
