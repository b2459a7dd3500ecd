"""Jacobi fields along one-parameter subgroups t -> exp(t xi).

Tangent vectors along the geodesic are left-trivialized.  Parallel transport
in a bi-invariant metric has the closed form ``w(t) = Ad_{exp(-t xi/2)} p``,
so in a parallel frame built from an eigenbasis of the curvature operator
``K(W) = 1/4 [[xi, W], xi]`` every Jacobi field decouples into scalar modes
``a'' + e a = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConjugateSegmentError, DegenerateInput, PreconditionError
from .lie import GroupSpec

NEGATIVE_CURVATURE_TOL = 1e-10
SINGULAR_TOL = 1e-8
MULTIPLICITY_RTOL = 1e-9


@dataclass(frozen=True)
class CurvatureSpectrum:
    group: GroupSpec
    xi: np.ndarray
    eigenvalues: np.ndarray
    coords: np.ndarray  # column i holds the basis coordinates of U_i
    degenerate: bool = False

    @property
    def eigenbasis(self) -> np.ndarray:
        return self.group.from_vec(self.coords.T)

    def operator(self, W: np.ndarray) -> np.ndarray:
        return 0.25 * self.group.ad(self.group.ad(self.xi, W), self.xi)


def curvature_spectrum(group: GroupSpec, xi: np.ndarray, strict: bool = False) -> CurvatureSpectrum:
    """Eigen-decomposition of W -> 1/4 [[xi, W], xi] on the Lie algebra.

    For ``xi = 0`` the spectrum is identically zero; it is returned with
    ``degenerate=True`` unless ``strict`` is set, in which case
    DegenerateInput is raised.
    """
    degenerate = bool(group.norm(xi) == 0)
    if degenerate and strict:
        raise DegenerateInput("curvature spectrum of xi = 0 is identically zero")
    A = group.ad_matrix(xi)
    K = -0.25 * A @ A
    K = 0.5 * (K + K.T)
    e, V = np.linalg.eigh(K)
    scale = max(1.0, float(np.abs(e).max()))
    if e.min() < -NEGATIVE_CURVATURE_TOL * scale:
        raise ArithmeticError(f"negative curvature eigenvalue {e.min():.3e}")
    e = np.clip(e, 0.0, None)
    e[e < NEGATIVE_CURVATURE_TOL * scale] = 0.0
    return CurvatureSpectrum(group, np.array(xi), e, V, degenerate)


def sn(e, tau):
    """sin(sqrt(e) tau) / sqrt(e), continuous at e = 0."""
    r = np.sqrt(e)
    return tau * np.sinc(r * tau / np.pi)


def cs(e, tau):
    return np.cos(np.sqrt(e) * tau)


def to_parallel(group: GroupSpec, xi, t, W):
    """Left-trivialized vector at exp(t xi) -> parallel-frame vector at e."""
    return group.Ad(group.exp(0.5 * t * xi), W)


def from_parallel(group: GroupSpec, xi, t, P):
    return group.Ad(group.exp(-0.5 * t * xi), P)


@dataclass(frozen=True)
class JacobiField:
    """Jacobi field on [t0, t1] stored by its eigen-coefficients at t0.

    ``value0`` and ``deriv0`` are coordinates of W(t0) and DW/Dt(t0) in the
    parallel-transported eigenbasis.
    """

    spectrum: CurvatureSpectrum
    t0: float
    t1: float
    value0: np.ndarray
    deriv0: np.ndarray

    @classmethod
    def vanishing_at_zero(cls, spectrum: CurvatureSpectrum, initial_derivative, t1: float = 1.0):
        d = spectrum.coords.T @ spectrum.group.to_vec(initial_derivative)
        return cls(spectrum, 0.0, t1, np.zeros_like(d), d)

    @property
    def group(self) -> GroupSpec:
        return self.spectrum.group

    def coefficients(self, t):
        e, tau = self.spectrum.eigenvalues, t - self.t0
        return self.value0 * cs(e, tau) + self.deriv0 * sn(e, tau)

    def coefficient_derivatives(self, t):
        e, tau = self.spectrum.eigenvalues, t - self.t0
        return -self.value0 * e * sn(e, tau) + self.deriv0 * cs(e, tau)

    def _parallel(self, coeffs):
        return self.group.from_vec(self.spectrum.coords @ coeffs)

    def value(self, t) -> np.ndarray:
        """W(t), left-trivialized at exp(t xi)."""
        return from_parallel(self.group, self.spectrum.xi, t, self._parallel(self.coefficients(t)))

    def derivative(self, t) -> np.ndarray:
        """DW/Dt(t), left-trivialized at exp(t xi)."""
        return from_parallel(
            self.group, self.spectrum.xi, t, self._parallel(self.coefficient_derivatives(t))
        )

    def ode_residual(self, t) -> float:
        """|P'' + K(P)| in the parallel frame, with K applied as brackets."""
        e = self.spectrum.eigenvalues
        P = self._parallel(self.coefficients(t))
        P2 = self._parallel(-e * self.coefficients(t))
        return float(self.group.norm(P2 + self.spectrum.operator(P)))


def jacobi_segment(
    group: GroupSpec,
    xi,
    t0: float,
    t1: float,
    W0,
    W1,
    spectrum: CurvatureSpectrum | None = None,
) -> JacobiField:
    """Unique Jacobi field on [t0, t1] with prescribed endpoint values."""
    spec = spectrum if spectrum is not None else curvature_spectrum(group, xi)
    h = t1 - t0
    e = spec.eigenvalues
    s = sn(e, h)
    if np.any(np.abs(np.sin(np.sqrt(e) * h)[e > 0]) < SINGULAR_TOL) or np.any(s <= 0):
        raise ConjugateSegmentError(f"segment [{t0}, {t1}] contains a conjugate time")
    a0 = spec.coords.T @ group.to_vec(to_parallel(group, xi, t0, W0))
    a1 = spec.coords.T @ group.to_vec(to_parallel(group, xi, t1, W1))
    d0 = (a1 - a0 * cs(e, h)) / s
    return JacobiField(spec, t0, t1, a0, d0)


@dataclass(frozen=True)
class BrokenJacobiField:
    """Piecewise Jacobi field with W(0) = 0 and W(i/n) = X_i."""

    segments: tuple[JacobiField, ...]
    nodes: np.ndarray

    @property
    def n(self) -> int:
        return len(self.segments)

    @property
    def jumps(self) -> np.ndarray:
        """Delta_i DW/Dt = left limit minus right limit at t = i/n, i = 1..n-1."""
        n = self.n
        return np.array(
            [
                self.segments[i - 1].derivative(i / n) - self.segments[i].derivative(i / n)
                for i in range(1, n)
            ]
        ).reshape((n - 1,) + self.nodes.shape[1:])

    @property
    def terminal_derivative(self) -> np.ndarray:
        return self.segments[-1].derivative(1.0)

    def value(self, t: float) -> np.ndarray:
        i = min(int(np.floor(t * self.n)), self.n - 1)
        return self.segments[i].value(t)

    def continuity_residual(self) -> float:
        n = self.n
        group = self.segments[0].group
        res = 0.0
        for i in range(1, n):
            left = self.segments[i - 1].value(i / n)
            right = self.segments[i].value(i / n)
            res = max(res, float(group.norm(left - right)))
        for i in range(1, n + 1):
            res = max(res, float(group.norm(self.segments[i - 1].value(i / n) - self.nodes[i - 1])))
        return res


def broken_jacobi(group: GroupSpec, xi, n: int, nodes) -> BrokenJacobiField:
    """Assemble the broken Jacobi field along exp(t xi) through nodal values.

    ``nodes[i-1]`` is X_i, left-trivialized at exp(i xi / n).
    """
    nodes = np.asarray(nodes, dtype=complex)
    if nodes.shape[0] != n:
        raise ValueError(f"expected {n} nodal values, got {nodes.shape[0]}")
    spec = curvature_spectrum(group, xi)
    zero = np.zeros_like(nodes[0])
    values = [zero] + list(nodes)
    segs = tuple(
        jacobi_segment(group, xi, i / n, (i + 1) / n, values[i], values[i + 1], spec)
        for i in range(n)
    )
    return BrokenJacobiField(segs, nodes)


def conjugate_points(
    group: GroupSpec, xi, T: float = 1.0, include_endpoint: bool = False
) -> list[tuple[float, int]]:
    """Conjugate times t = m pi / sqrt(e_i) in (0, T) with multiplicities."""
    spec = curvature_spectrum(group, xi, strict=True)
    positive = np.sort(spec.eigenvalues[spec.eigenvalues > 0])
    groups: list[list[float]] = []
    for e in positive:
        if groups and abs(e - groups[-1][0]) <= MULTIPLICITY_RTOL * e:
            groups[-1].append(e)
        else:
            groups.append([e])
    events: dict[float, int] = {}
    for grp in groups:
        root = np.sqrt(np.mean(grp))
        m = 1
        while True:
            t = m * np.pi / root
            if t > T * (1 + MULTIPLICITY_RTOL) or (not include_endpoint and t >= T * (1 - MULTIPLICITY_RTOL)):
                break
            key = next((k for k in events if abs(k - t) <= MULTIPLICITY_RTOL * max(t, 1.0)), t)
            events[key] = events.get(key, 0) + len(grp)
            m += 1
    return sorted(events.items())


def conjugate_index(group: GroupSpec, xi) -> int:
    """Total multiplicity of conjugate points in (0, 1): the Morse index oracle."""
    if group.norm(xi) == 0:
        return 0
    return sum(mult for _, mult in conjugate_points(group, xi, 1.0))


def commuting_jacobi_endpoint_ratio(field: JacobiField, tol: float = 1e-10) -> float:
    """c with W(1) = c DW/Dt(1) for a field with W(0)=0 and [DW/Dt(0), xi]=0."""
    group, xi = field.group, field.spectrum.xi
    if field.t0 != 0.0 or np.abs(field.value0).max() > tol:
        raise PreconditionError("field must vanish at t = 0")
    d0 = field.derivative(0.0)
    size = float(group.norm(d0))
    if size == 0:
        raise PreconditionError("initial derivative is zero")
    comm = float(group.norm(group.ad(d0, xi)))
    if comm > tol * max(1.0, size * float(group.norm(xi))):
        raise PreconditionError(f"[DW/Dt(0), xi] = {comm:.3e} does not vanish")
    W1 = field.value(1.0)
    D1 = field.derivative(1.0)
    return float(group.inner(W1, D1) / group.inner(D1, D1))


def commutation_residual(field: JacobiField, times) -> float:
    """max_t |[W(t), xi]|."""
    group, xi = field.group, field.spectrum.xi
    return max(float(group.norm(group.ad(field.value(t), xi))) for t in times)
