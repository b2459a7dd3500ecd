"""Compact matrix Lie groups with a bi-invariant metric.

Group elements and Lie algebra elements are plain complex ``numpy`` arrays of
shape ``(N, N)``; most functions also accept stacks ``(..., N, N)``.  The
metric is ``<X, Y> = -c Re tr(XY)`` with ``c = GroupSpec.metric_scale``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
import scipy.linalg

from .errors import CutLocusError

GroupElement = np.ndarray
AlgebraElement = np.ndarray

BRANCH_TOL = 1e-9
UNITARITY_TOL = 1e-12


@dataclass(frozen=True)
class TorusData:
    """Maximal torus of SU(N): Cartan basis, integral lattice and roots.

    ``roots`` holds index pairs ``(j, k)``; the root evaluated on
    ``i diag(x)`` is ``x_j - x_k``.
    """

    cartan_basis: np.ndarray
    lattice_basis: np.ndarray
    roots: tuple[tuple[int, int], ...]

    def root_values(self, xi: AlgebraElement) -> np.ndarray:
        x = np.real(-1j * np.diag(xi))
        return np.array([x[j] - x[k] for j, k in self.roots])


@dataclass(frozen=True)
class GroupSpec:
    """Special unitary group SU(matrix_dim) with metric ``-c Re tr(XY)``."""

    name: str
    matrix_dim: int
    metric_scale: float = 1.0
    branch_tol: float = field(default=BRANCH_TOL, compare=False)

    def __post_init__(self):
        if not self.metric_scale > 0:
            raise ValueError(f"metric_scale must be positive, got {self.metric_scale}")
        if self.matrix_dim < 2:
            raise ValueError("matrix_dim must be at least 2")

    # -- algebra structure ---------------------------------------------------

    @property
    def dim(self) -> int:
        return self.matrix_dim**2 - 1

    @property
    def rank(self) -> int:
        return self.matrix_dim - 1

    def identity(self) -> GroupElement:
        return np.eye(self.matrix_dim, dtype=complex)

    @cached_property
    def basis(self) -> np.ndarray:
        """Orthonormal basis of su(N) (generalized Gell-Mann matrices times i)."""
        N = self.matrix_dim
        mats = []
        for j in range(N):
            for k in range(j + 1, N):
                s = np.zeros((N, N), dtype=complex)
                s[j, k] = s[k, j] = 1.0
                mats.append(1j * s)
                a = np.zeros((N, N), dtype=complex)
                a[j, k], a[k, j] = -1j, 1j
                mats.append(1j * a)
        for l in range(1, N):
            d = np.zeros(N)
            d[:l] = 1.0
            d[l] = -l
            d *= np.sqrt(2.0 / (l * (l + 1)))
            mats.append(1j * np.diag(d).astype(complex))
        # Gell-Mann normalization tr(lambda_a lambda_b) = 2 delta_ab
        return np.array(mats) / np.sqrt(2.0 * self.metric_scale)

    def inner(self, X: AlgebraElement, Y: AlgebraElement):
        return -self.metric_scale * np.real(np.einsum("...ij,...ji->...", X, Y))

    def norm(self, X: AlgebraElement):
        return np.sqrt(np.maximum(self.inner(X, X), 0.0))

    def to_vec(self, X: AlgebraElement) -> np.ndarray:
        """Coordinates of X in the orthonormal basis."""
        return -self.metric_scale * np.real(np.einsum("...ij,aji->...a", X, self.basis))

    def from_vec(self, v: np.ndarray) -> AlgebraElement:
        return np.einsum("...a,aij->...ij", np.asarray(v, dtype=float), self.basis)

    def project_algebra(self, X: AlgebraElement) -> AlgebraElement:
        """Nearest traceless skew-Hermitian matrix."""
        Y = 0.5 * (X - np.conj(np.swapaxes(X, -1, -2)))
        tr = np.trace(Y, axis1=-2, axis2=-1)[..., None, None]
        return Y - tr * np.eye(self.matrix_dim) / self.matrix_dim

    # -- brackets and adjoint actions ------------------------------------

    @staticmethod
    def ad(xi: AlgebraElement, eta: AlgebraElement) -> AlgebraElement:
        return xi @ eta - eta @ xi

    @staticmethod
    def Ad(g: GroupElement, xi: AlgebraElement) -> AlgebraElement:
        return g @ xi @ np.conj(np.swapaxes(g, -1, -2))

    def ad_matrix(self, xi: AlgebraElement) -> np.ndarray:
        """Matrix of ad_xi in the orthonormal basis (antisymmetric)."""
        return self.to_vec(self.ad(xi, self.basis)).T

    def Ad_matrix(self, g: GroupElement) -> np.ndarray:
        """Matrix of Ad_g in the orthonormal basis (orthogonal)."""
        return self.to_vec(self.Ad(g, self.basis)).T

    def kernel_basis(self, matrix: np.ndarray, tol: float = 1e-9) -> np.ndarray:
        """Orthonormal basis (as algebra elements) of the kernel of a d x d map."""
        coords = null_space(matrix, tol)
        return self.from_vec(coords.T)

    def stab_algebra(self, g: GroupElement, tol: float = 1e-9) -> np.ndarray:
        """Orthonormal basis of ker(Ad_g - id), the Lie algebra of Z(g)."""
        return self.kernel_basis(self.Ad_matrix(g) - np.eye(self.dim), tol)

    def centralizer(self, xi: AlgebraElement, tol: float = 1e-9) -> np.ndarray:
        """Orthonormal basis of ker(ad_xi)."""
        scale = max(1.0, float(self.norm(xi)))
        return self.kernel_basis(self.ad_matrix(xi) / scale, tol)

    # -- exponential and logarithm --------------------------------------

    def exp(self, xi: AlgebraElement) -> GroupElement:
        """Matrix exponential of a skew-Hermitian matrix (unitary to roundoff)."""
        H = 1j * np.asarray(xi, dtype=complex)
        H = 0.5 * (H + np.conj(np.swapaxes(H, -1, -2)))
        w, V = np.linalg.eigh(H)
        return (V * np.exp(-1j * w)[..., None, :]) @ np.conj(np.swapaxes(V, -1, -2))

    @cached_property
    def _shift_candidates(self) -> np.ndarray:
        N = self.matrix_dim
        return np.array(list(itertools.product((-1, 0, 1), repeat=N)), dtype=float)

    def _minimal_angles(self, phases: np.ndarray) -> np.ndarray:
        """Eigen-angles of the minimal-norm traceless logarithm.

        ``phases`` (shape (..., N)) are principal angles in (-pi, pi].  A
        traceless logarithm shifts some of them by multiples of 2 pi; the
        shortest choice must be unique by a margin of ``branch_tol`` or the
        point is on the cut locus.
        """
        cands = self._shift_candidates
        k = np.rint(phases.sum(axis=-1) / (2 * np.pi))
        valid = np.isclose(cands.sum(axis=1), -k[..., None])
        trial = phases[..., None, :] + 2 * np.pi * cands
        norms = np.sqrt(self.metric_scale * np.sum(trial**2, axis=-1))
        norms = np.where(valid, norms, np.inf)
        order = np.argsort(norms, axis=-1)
        best = np.take_along_axis(norms, order[..., :1], axis=-1)[..., 0]
        second = np.take_along_axis(norms, order[..., 1:2], axis=-1)[..., 0]
        gap = second - best
        if np.any(gap < self.branch_tol):
            raise CutLocusError(f"logarithm branch is ambiguous (gap {np.min(gap):.3e})")
        return np.take_along_axis(trial, order[..., :1, None], axis=-2)[..., 0, :]

    def _unitary_eig(self, g: GroupElement) -> tuple[np.ndarray, np.ndarray]:
        w, V = np.linalg.eig(g)
        eye = np.eye(self.matrix_dim)
        resid = np.abs(np.conj(np.swapaxes(V, -1, -2)) @ V - eye).max(axis=(-2, -1))
        for idx in zip(*np.nonzero(np.atleast_1d(resid > 1e-10))):
            if g.ndim == 2:
                T, V = scipy.linalg.schur(g, output="complex")
                w = np.diag(T)
            else:
                T, V[idx] = scipy.linalg.schur(g[idx], output="complex")
                w[idx] = np.diag(T)
        return w, V

    def log(self, g: GroupElement) -> AlgebraElement:
        """Minimal-norm logarithm; raises CutLocusError on the cut locus."""
        g = np.asarray(g, dtype=complex)
        w, V = self._unitary_eig(g)
        angles = self._minimal_angles(np.angle(w))
        X = (V * (1j * angles)[..., None, :]) @ np.conj(np.swapaxes(V, -1, -2))
        return self.project_algebra(X)

    def distance(self, p: GroupElement, q: GroupElement) -> float:
        return float(self.norm(self.log(np.conj(p.T) @ q)))

    # -- torus, lattice, injectivity radius ------------------------------

    @cached_property
    def torus(self) -> TorusData:
        N = self.matrix_dim
        diag = [b for b in self.basis if np.allclose(b, np.diag(np.diag(b)))]
        lattice = []
        for j in range(N - 1):
            d = np.zeros(N, dtype=complex)
            d[j], d[j + 1] = 2j * np.pi, -2j * np.pi
            lattice.append(np.diag(d))
        roots = tuple((j, k) for j in range(N) for k in range(N) if j != k)
        return TorusData(np.array(diag), np.array(lattice), roots)

    def injectivity_radius(self) -> float:
        """Radius below which minimal geodesics are unique.

        The minimum of the conjugate radius (first conjugate point over all
        torus directions, ``2 pi / max |alpha|``) and half the shortest
        nonzero lattice vector.
        """
        tor = self.torus
        root_norms = []
        for j, k in tor.roots:
            r = [np.real(-1j * (E[j, j] - E[k, k])) for E in tor.cartan_basis]
            root_norms.append(np.linalg.norm(r))
        conjugate_radius = 2 * np.pi / max(root_norms)
        shortest = np.inf
        for coeffs in itertools.product(range(-2, 3), repeat=len(tor.lattice_basis)):
            if any(coeffs):
                lam = np.tensordot(np.array(coeffs, dtype=float), tor.lattice_basis, axes=1)
                shortest = min(shortest, float(self.norm(lam)))
        return float(min(conjugate_radius, 0.5 * shortest))

    def reduce_to_chamber(self, x: np.ndarray) -> np.ndarray:
        """Weyl-chamber representative of ``i diag(x)``: entries sorted descending."""
        return np.sort(np.asarray(x, dtype=float))[::-1]

    def torus_element(self, x: np.ndarray) -> AlgebraElement:
        return np.diag(1j * np.asarray(x, dtype=float))

    # -- group element hygiene ------------------------------------------

    def unitarity_residual(self, g: GroupElement) -> float:
        return float(np.abs(np.conj(g.T) @ g - np.eye(self.matrix_dim)).max())

    def project(self, g: GroupElement) -> GroupElement:
        """Polar projection onto SU(N) when unitarity drift exceeds 1e-12."""
        g = np.asarray(g, dtype=complex)
        if g.ndim > 2:
            return np.array([self.project(h) for h in g])
        if self.unitarity_residual(g) <= UNITARITY_TOL and abs(np.linalg.det(g) - 1) <= UNITARITY_TOL:
            return g
        U, _, Vh = np.linalg.svd(g)
        u = U @ Vh
        det = np.linalg.det(u)
        return u / det ** (1.0 / self.matrix_dim)

    # -- sampling --------------------------------------------------------

    def random_algebra(self, rng: np.random.Generator, scale: float = 1.0) -> AlgebraElement:
        return self.from_vec(scale * rng.standard_normal(self.dim))

    def random_element(self, rng: np.random.Generator) -> GroupElement:
        """Haar-random element of SU(N)."""
        N = self.matrix_dim
        Z = (rng.standard_normal((N, N)) + 1j * rng.standard_normal((N, N))) / np.sqrt(2)
        Q, R = np.linalg.qr(Z)
        Q = Q * (np.diag(R) / np.abs(np.diag(R)))[None, :]
        return Q / np.linalg.det(Q) ** (1.0 / N)


def null_space(matrix: np.ndarray, tol: float = 1e-9) -> np.ndarray:
    """Orthonormal columns spanning the numerical kernel (relative tolerance)."""
    matrix = np.atleast_2d(matrix)
    if matrix.shape[0] == 0:
        return np.eye(matrix.shape[1])
    _, s, Vh = np.linalg.svd(matrix)
    scale = max(1.0, s[0] if s.size else 0.0)
    rank = int(np.sum(s > tol * scale))
    return Vh[rank:].conj().T.real if np.isrealobj(matrix) else Vh[rank:].conj().T


def su(n: int, metric_scale: float = 1.0) -> GroupSpec:
    return GroupSpec(name=f"su{n}", matrix_dim=n, metric_scale=metric_scale)


def group_from_name(name: str, metric_scale: float = 1.0) -> GroupSpec:
    if name not in ("su2", "su3"):
        raise ValueError(f"unsupported group {name!r}; expected su2 or su3")
    return su(int(name[2:]), metric_scale)
