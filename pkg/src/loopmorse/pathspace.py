"""Broken-geodesic approximation of the path space.

A configuration is ``(g_1, ..., g_n, m)`` with ``g_n = Phi(m)`` and the energy
is ``f_n = n * sum_i rho(g_i, g_{i+1})**2`` with ``g_0 = e``.  Tangent vectors
``(X_1, ..., X_n, Y)`` are left-trivialized; ``X_n`` is slaved to ``Y`` through
``X_n = Phi(m)^-1 Phi_*(Y)``, so the free coordinates are
``z = (X_1, ..., X_{n-1}, Y)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConjugateSegmentError, CutLocusError, PreconditionError
from .jacobi import broken_jacobi, cs, curvature_spectrum, sn
from .lie import GroupSpec
from .spaces import QHSpace, SpacePoint, SpaceTangent

CRITICAL_TOL = 1e-8
SAMPLES_PER_SEGMENT = 64
NULL_RTOL = 1e-8


@dataclass(frozen=True)
class BrokenConfig:
    space: QHSpace
    nodes: np.ndarray  # shape (n, N, N): g_1 .. g_n
    m: SpacePoint = ()

    @property
    def n(self) -> int:
        return self.nodes.shape[0]

    @property
    def group(self) -> GroupSpec:
        return self.space.group

    def constraint_residual(self) -> float:
        return float(np.abs(self.nodes[-1] - self.space.moment(self.m)).max())

    def act(self, g: np.ndarray) -> "BrokenConfig":
        return BrokenConfig(self.space, self.group.Ad(g, self.nodes), self.space.act(g, self.m))


@dataclass(frozen=True)
class ConfigTangent:
    X: np.ndarray  # shape (n, N, N), X[i-1] left-trivialized at g_i
    Y: SpaceTangent = ()

    def constraint_residual(self, cfg: BrokenConfig) -> float:
        target = cfg.space.moment_diff(cfg.m, self.Y)
        return float(np.abs(self.X[-1] - target).max())


@dataclass(frozen=True)
class SampledPath:
    """A path lambda: [0, 1] -> G known at sample times, read as the
    piecewise-minimal-geodesic curve through its samples."""

    space: QHSpace
    times: np.ndarray
    values: np.ndarray
    m: SpacePoint = ()
    segment_logs: np.ndarray | None = field(default=None, compare=False)

    @property
    def group(self) -> GroupSpec:
        return self.space.group

    def endpoint_residual(self) -> float:
        start = float(np.abs(self.values[0] - self.group.identity()).max())
        end = float(np.abs(self.values[-1] - self.space.moment(self.m)).max())
        return max(start, end)

    def energy(self) -> float:
        """Energy of the piecewise geodesic through the samples."""
        G = self.group
        steps = G.log(np.conj(np.swapaxes(self.values[:-1], -1, -2)) @ self.values[1:])
        return float(np.sum(G.inner(steps, steps) / np.diff(self.times)))

    def closed_form_energy(self) -> float:
        """n * sum |log(g_i^-1 g_{i+1})|^2 for paths produced by beta."""
        if self.segment_logs is None:
            raise PreconditionError("path was not produced by beta")
        logs = self.segment_logs
        return float(len(logs) * np.sum(self.group.inner(logs, logs)))

    def index_of(self, t: float) -> int:
        j = int(np.argmin(np.abs(self.times - t)))
        if abs(self.times[j] - t) > 1e-12:
            raise PreconditionError(f"path has no sample at t = {t}")
        return j


# -- configurations --------------------------------------------------------


def lattice_config(space: QHSpace, xi: np.ndarray, n: int, m: SpacePoint = ()) -> BrokenConfig:
    """The configuration g_i = exp(i xi / n)."""
    G = space.group
    nodes = G.exp(np.arange(1, n + 1)[:, None, None] * (xi / n)[None])
    if m:
        nodes[-1] = space.moment(m)
    return BrokenConfig(space, nodes, m)


def segment_logs(cfg: BrokenConfig) -> np.ndarray:
    """l_i = log(g_i^-1 g_{i+1}) for i = 0 .. n-1; raises CutLocusError."""
    G = cfg.group
    prev = np.concatenate([G.identity()[None], cfg.nodes[:-1]])
    return G.log(np.conj(np.swapaxes(prev, -1, -2)) @ cfg.nodes)


def energy(cfg: BrokenConfig) -> float:
    logs = segment_logs(cfg)
    return float(cfg.n * np.sum(cfg.group.inner(logs, logs)))


def y_n_bound(group: GroupSpec, n: int) -> float:
    return 0.5 * n * group.injectivity_radius() ** 2


def in_Y_n(cfg: BrokenConfig) -> bool:
    try:
        return energy(cfg) < y_n_bound(cfg.group, cfg.n)
    except CutLocusError:
        return False


def random_config(space: QHSpace, n: int, rng: np.random.Generator, noise: float = 0.3) -> BrokenConfig:
    """A random configuration in Y_n near the geodesic from e to Phi(m)."""
    G = space.group
    for _ in range(100):
        m = space.random_point(rng)
        try:
            ell = G.log(space.moment(m))
        except CutLocusError:
            continue
        nodes = G.exp(np.arange(1, n + 1)[:, None, None] * (ell / n)[None])
        kick = G.exp(np.array([G.random_algebra(rng, noise / np.sqrt(n)) for _ in range(n - 1)]))
        nodes[:-1] = nodes[:-1] @ kick
        nodes[-1] = space.moment(m)
        cfg = BrokenConfig(space, nodes, m)
        if in_Y_n(cfg):
            return cfg
    raise RuntimeError("could not sample a configuration in Y_n")


# -- approximation maps -----------------------------------------------------


def beta(cfg: BrokenConfig, samples_per_segment: int = SAMPLES_PER_SEGMENT) -> SampledPath:
    """Join consecutive nodes by minimal geodesics."""
    if not in_Y_n(cfg):
        raise PreconditionError("configuration is not in Y_n")
    G, n, K = cfg.group, cfg.n, samples_per_segment
    logs = segment_logs(cfg)
    starts = np.concatenate([G.identity()[None], cfg.nodes[:-1]])
    frac = np.arange(K) / K
    vals = starts[:, None] @ G.exp(frac[None, :, None, None] * logs[:, None])
    vals = vals.reshape(n * K, *starts.shape[1:])
    values = np.concatenate([vals, cfg.nodes[-1:]])
    times = np.concatenate([(np.arange(n)[:, None] + frac[None]).ravel() / n, [1.0]])
    # nodes are copied verbatim so that alpha(beta(cfg)) is exact
    values[K::K] = cfg.nodes
    values[0] = G.identity()
    return SampledPath(cfg.space, times, values, cfg.m, logs)


def alpha(path: SampledPath, n: int) -> BrokenConfig:
    """Sample a path at t = i/n."""
    G = path.group
    if path.segment_logs is None and path.energy() >= y_n_bound(G, n):
        raise PreconditionError("path energy is not below the Y_n bound")
    idx = [path.index_of(i / n) for i in range(1, n + 1)]
    cfg = BrokenConfig(path.space, path.values[idx].copy(), path.m)
    if not in_Y_n(cfg):
        raise PreconditionError("sampled configuration is not in Y_n")
    return cfg


def _value_at(path: SampledPath, t: float) -> np.ndarray:
    G = path.group
    j = int(np.searchsorted(path.times, t, side="right")) - 1
    j = min(max(j, 0), len(path.times) - 2)
    t0, t1 = path.times[j], path.times[j + 1]
    if abs(t - t0) <= 1e-14:
        return path.values[j]
    if abs(t - t1) <= 1e-14:
        return path.values[j + 1]
    step = G.log(np.conj(path.values[j].T) @ path.values[j + 1])
    return path.values[j] @ G.exp((t - t0) / (t1 - t0) * step)


def shorten_step(
    path: SampledPath, n: int, i: int, eps: float, samples_per_segment: int = SAMPLES_PER_SEGMENT
) -> SampledPath:
    """Replace lambda on [i/n, (i + eps)/n] by the minimal geodesic between its ends."""
    if not 0 <= i < n or not 0 < eps <= 1:
        raise PreconditionError("need 0 <= i < n and 0 < eps <= 1")
    G = path.group
    if path.energy() >= y_n_bound(G, n):
        raise PreconditionError("path energy is not below the Y_n bound")
    a, b = i / n, (i + eps) / n
    start, end = _value_at(path, a), _value_at(path, b)
    step = G.log(np.conj(start.T) @ end)
    k = max(1, int(np.ceil(eps * samples_per_segment - 1e-9)))
    new_t = a + (b - a) * np.arange(k + 1) / k
    new_v = start[None] @ G.exp(((new_t - a) / (b - a))[:, None, None] * step[None])
    new_v[0], new_v[-1] = start, end
    keep_lo = path.times < a - 1e-14
    keep_hi = path.times > b + 1e-14
    times = np.concatenate([path.times[keep_lo], new_t, path.times[keep_hi]])
    values = np.concatenate([path.values[keep_lo], new_v, path.values[keep_hi]])
    return replace(path, times=times, values=values, segment_logs=None)


def shorten_sweep(path: SampledPath, n: int, eps: float = 1.0, **kw) -> SampledPath:
    for i in range(n):
        path = shorten_step(path, n, i, eps, **kw)
    return path


def perturbed_path(cfg: BrokenConfig, rng: np.random.Generator, noise: float = 0.05,
                   samples_per_segment: int = 16) -> SampledPath:
    """beta(cfg) with the non-node samples pushed off the geodesics.

    Kicks scale with the square root of the sample spacing so the energy
    excess stays O(noise**2) as the grid is refined.
    """
    path = beta(cfg, samples_per_segment)
    G = cfg.group
    vals = path.values.copy()
    interior = [j for j in range(1, len(vals) - 1) if j % samples_per_segment]
    scale = noise * np.sqrt(1.0 / (cfg.n * samples_per_segment))
    kicks = G.exp(np.array([G.random_algebra(rng, scale) for _ in interior]))
    vals[interior] = vals[interior] @ kicks
    return replace(path, values=vals, segment_logs=None)


# -- tangent coordinates ----------------------------------------------------


def tangent_coordinates(cfg: BrokenConfig):
    """Ambient layout and the embedding E: z -> (X_1..X_n, Y).

    Returns (E, y_basis) where ambient coordinates are the orthonormal Lie
    algebra coordinates of X_1..X_n followed by coordinates of Y in the
    orthonormal basis ``y_basis`` of T_m M.
    """
    G, n = cfg.group, cfg.n
    d = G.dim
    y_basis = cfg.space.tangent_basis(cfg.m)
    k = len(y_basis)
    A = cfg.space.image_matrix(cfg.m, y_basis)
    E = np.zeros((n * d + k, (n - 1) * d + k))
    E[: (n - 1) * d, : (n - 1) * d] = np.eye((n - 1) * d)
    E[(n - 1) * d : n * d, (n - 1) * d :] = A
    E[n * d :, (n - 1) * d :] = np.eye(k)
    return E, y_basis


def ambient_vector(cfg: BrokenConfig, eta: ConfigTangent, y_basis) -> np.ndarray:
    G = cfg.group
    parts = [G.to_vec(eta.X).ravel()]
    if y_basis:
        parts.append(cfg.space.coords(cfg.m, eta.Y, y_basis))
    return np.concatenate(parts)


def tangent_from_ambient(cfg: BrokenConfig, v: np.ndarray, y_basis) -> ConfigTangent:
    G, n, d = cfg.group, cfg.n, cfg.group.dim
    X = G.from_vec(v[: n * d].reshape(n, d))
    Y = cfg.space.combine(v[n * d :], y_basis) if y_basis else tuple(cfg.space.zero_tangent(cfg.m))
    return ConfigTangent(X, Y)


def make_tangent(cfg: BrokenConfig, X_free: np.ndarray, Y: SpaceTangent = ()) -> ConfigTangent:
    """Tangent vector from X_1..X_{n-1} and Y with X_n filled in."""
    Xn = cfg.space.moment_diff(cfg.m, Y) if Y else np.zeros_like(cfg.nodes[0])
    X = np.concatenate([np.asarray(X_free, dtype=complex).reshape(-1, *Xn.shape), Xn[None]])
    return ConfigTangent(X, Y)


def random_tangent(cfg: BrokenConfig, rng: np.random.Generator) -> ConfigTangent:
    G = cfg.group
    X = np.array([G.random_algebra(rng) for _ in range(cfg.n - 1)]).reshape(cfg.n - 1, *cfg.nodes.shape[1:])
    basis = cfg.space.tangent_basis(cfg.m)
    Y = cfg.space.combine(rng.standard_normal(len(basis)), basis) if basis else cfg.space.zero_tangent(cfg.m)
    return make_tangent(cfg, X, Y)


def orbit_tangent(cfg: BrokenConfig, gamma: np.ndarray) -> ConfigTangent:
    """Tangent of the curve s -> exp(s gamma) . cfg."""
    G = cfg.group
    X = G.Ad(np.conj(np.swapaxes(cfg.nodes, -1, -2)), gamma) - gamma
    return ConfigTangent(X, cfg.space.infinitesimal_action(cfg.m, gamma))


def retract(cfg: BrokenConfig, eta: ConfigTangent, h: float) -> BrokenConfig:
    """Curve through cfg with initial velocity eta, kept inside X_n."""
    G = cfg.group
    m = cfg.space.retract(cfg.m, cfg.space.combine([h], [eta.Y])) if eta.Y else cfg.m
    nodes = cfg.nodes @ G.exp(h * eta.X)
    nodes[-1] = cfg.space.moment(m)
    return BrokenConfig(cfg.space, nodes, m)


def _retract2(cfg, eta, etap, s, t):
    both = ConfigTangent(s * eta.X + t * etap.X, cfg.space.combine([s, t], [eta.Y, etap.Y]) if eta.Y else ())
    return retract(cfg, both, 1.0)


# -- first variation --------------------------------------------------------


def differential(cfg: BrokenConfig):
    """df_n as (node part (n, N, N), Y-covector over y_basis, y_basis)."""
    n = cfg.n
    logs = segment_logs(cfg)
    node = np.empty_like(logs)
    node[:-1] = 2 * n * (logs[:-1] - logs[1:])
    node[-1] = 2 * n * logs[-1]
    y_basis = cfg.space.tangent_basis(cfg.m)
    A = cfg.space.image_matrix(cfg.m, y_basis)
    ycov = A.T @ cfg.group.to_vec(node[-1]) if y_basis else np.zeros(0)
    return node, ycov, y_basis


def gradient(cfg: BrokenConfig) -> ConfigTangent:
    """Riesz representative of df_n in the induced metric on X_n."""
    G, n, d = cfg.group, cfg.n, cfg.group.dim
    node, ycov, y_basis = differential(cfg)
    E, _ = tangent_coordinates(cfg)
    cov = np.concatenate([G.to_vec(node[:-1]).ravel(), ycov])
    z = np.linalg.solve(E.T @ E, cov)
    return tangent_from_ambient(cfg, E @ z, y_basis)


def gradient_norm(cfg: BrokenConfig) -> float:
    g = gradient(cfg)
    _, y_basis = tangent_coordinates(cfg)
    v = ambient_vector(cfg, g, y_basis)
    # ambient metric restricted to the constraint surface
    return float(np.sqrt(v @ v))


def directional_derivative(cfg: BrokenConfig, eta: ConfigTangent) -> float:
    node, ycov, y_basis = differential(cfg)
    G = cfg.group
    val = float(np.sum(G.inner(node[:-1], eta.X[:-1])))
    if y_basis:
        val += float(ycov @ cfg.space.coords(cfg.m, eta.Y, y_basis))
    return val


def fd_directional(cfg: BrokenConfig, eta: ConfigTangent, h: float = 1e-5) -> float:
    return (energy(retract(cfg, eta, h)) - energy(retract(cfg, eta, -h))) / (2 * h)


def critset_residuals(cfg: BrokenConfig) -> tuple[float, float]:
    """(geodesic residual, terminal-velocity residual) of the critical-set conditions.

    The first measures how far consecutive segment velocities disagree; the
    second is the component of the terminal velocity along image(Phi_*).
    """
    G, n = cfg.group, cfg.n
    logs = segment_logs(cfg)
    geo = float(n * G.norm(logs[1:] - logs[:-1]).max()) if n > 1 else 0.0
    A = cfg.space.image_matrix(cfg.m)
    term = float(np.linalg.norm(A.T @ G.to_vec(n * logs[-1]))) if A.size else 0.0
    return geo, term


def is_critical(cfg: BrokenConfig, tol: float = CRITICAL_TOL) -> bool:
    return gradient_norm(cfg) <= tol * cfg.n


def config_xi(cfg: BrokenConfig) -> np.ndarray:
    """The generator xi = n * l_0 of a critical configuration."""
    return cfg.n * segment_logs(cfg)[0]


# -- second variation -------------------------------------------------------


def _require_critical(cfg: BrokenConfig, tol: float):
    if gradient_norm(cfg) > tol * cfg.n:
        raise PreconditionError("configuration is not critical")


def hessian(cfg: BrokenConfig, eta: ConfigTangent, etap: ConfigTangent, tol: float = 1e-6) -> float:
    """Hf_n(eta, eta') from the broken Jacobi field through the X_i.

    The bracket of jump terms, terminal derivative and H^xi Phi is the
    second variation of f_n / 2, hence the overall factor 2.
    """
    _require_critical(cfg, tol)
    G, n = cfg.group, cfg.n
    xi = config_xi(cfg)
    W = broken_jacobi(G, xi, n, eta.X)
    val = float(np.sum(G.inner(W.jumps, etap.X[:-1]))) if n > 1 else 0.0
    val += float(G.inner(W.terminal_derivative, etap.X[-1]))
    if eta.Y:
        val += cfg.space.hessian_moment(cfg.m, xi, eta.Y, etap.Y)
    return 2.0 * val


def fd_hessian(cfg: BrokenConfig, eta: ConfigTangent, etap: ConfigTangent, h: float = 1e-3) -> float:
    """Mixed central second difference of f_n with one Richardson step."""

    def mixed(h):
        f = lambda s, t: energy(_retract2(cfg, eta, etap, s, t))
        return (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4 * h * h)

    return (4 * mixed(h / 2) - mixed(h)) / 3


@dataclass
class HessianSpectrum:
    """Hessian of f_n over an orthonormal basis of T X_n.

    ``basis`` holds the basis as ambient column vectors (see
    ``tangent_coordinates``); ``matrix`` is symmetric in that basis.
    """

    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    basis: np.ndarray
    y_basis: list
    threshold: float

    @property
    def negative(self) -> np.ndarray:
        return self.eigenvalues < -self.threshold

    @property
    def null(self) -> np.ndarray:
        return np.abs(self.eigenvalues) <= self.threshold

    @property
    def counts(self) -> tuple[int, int, int]:
        neg = int(self.negative.sum())
        null = int(self.null.sum())
        return neg, null, len(self.eigenvalues) - neg - null

    @property
    def index(self) -> int:
        return self.counts[0]

    def ambient(self, mask: np.ndarray) -> np.ndarray:
        """Ambient coordinates of the eigenvectors selected by ``mask``."""
        return self.basis @ self.eigenvectors[:, mask]

    def symmetry_residual(self) -> float:
        return float(np.abs(self.matrix - self.matrix.T).max())


def _jacobi_block_form(group: GroupSpec, xi: np.ndarray, n: int) -> np.ndarray:
    """Matrix of (X, X') -> sum <Delta_i, X'_i> + <DW/Dt(1), X'_n> on node coordinates."""
    d = group.dim
    spec = curvature_spectrum(group, xi)
    e = spec.eigenvalues
    c, s = cs(e, 1.0 / n), sn(e, 1.0 / n)
    if np.any(s <= 0) or np.any(np.abs(np.sin(np.sqrt(e) / n)[e > 0]) < 1e-8):
        raise ConjugateSegmentError("segment length reaches a conjugate time")
    T = np.zeros((n, n, d))
    idx = np.arange(n)
    T[idx, idx] = (2 * c / s)[None]
    T[n - 1, n - 1] = c / s
    T[idx[:-1], idx[1:]] = (-1 / s)[None]
    T[idx[1:], idx[:-1]] = (-1 / s)[None]
    # node transforms R_i: left-trivialized at exp(i xi/n) -> eigen-coordinates
    R = np.array([spec.coords.T @ group.Ad_matrix(group.exp(0.5 * (i + 1) / n * xi)) for i in range(n)])
    # full[(i,a),(j,b)] = sum_mode R_i[mode,a] T[i,j,mode] R_j[mode,b]
    full = np.einsum("ima,ijm,jmb->iajb", R, T, R)
    return full.reshape(n * d, n * d)


def hessian_matrix(cfg: BrokenConfig, tol: float = 1e-6, rtol: float = NULL_RTOL) -> HessianSpectrum:
    """Assemble Hf_n over an orthonormal basis of T X_n and classify its spectrum."""
    _require_critical(cfg, tol)
    G, n, d = cfg.group, cfg.n, cfg.group.dim
    xi = config_xi(cfg)
    E, y_basis = tangent_coordinates(cfg)
    k = len(y_basis)
    amb = np.zeros((n * d + k, n * d + k))
    amb[: n * d, : n * d] = _jacobi_block_form(G, xi, n)
    if k:
        amb[n * d :, n * d :] = cfg.space.hessian_moment_matrix(cfg.m, xi, y_basis)
    amb = 2.0 * amb
    Hz = E.T @ amb @ E
    L = np.linalg.cholesky(E.T @ E)
    Linv = np.linalg.inv(L)
    H = Linv @ Hz @ Linv.T
    H = 0.5 * (H + H.T)
    basis = E @ Linv.T
    w, V = np.linalg.eigh(H)
    scale = float(np.abs(w).max()) if w.size else 0.0
    return HessianSpectrum(H, w, V, basis, y_basis, rtol * max(scale, 1e-300))
