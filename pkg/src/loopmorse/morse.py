"""Critical components of f_n, their indices, and Morse series bookkeeping."""
from __future__ import annotations

import itertools
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import MissingCohomologyError, PreconditionError
from .jacobi import conjugate_index
from .lie import GroupSpec
from .pathspace import (
    BrokenConfig,
    HessianSpectrum,
    config_xi,
    energy,
    hessian_matrix,
    lattice_config,
    ambient_vector,
    orbit_tangent,
    tangent_coordinates,
    y_n_bound,
)
from .spaces import ConjugacyClass, Double, PointSpace, QHSpace, SpacePoint, _subspace_gap

NULL_CONTAINMENT_TOL = 1e-6
TORUS_FIXED_TOL = 1e-6
MIN_CHECK_SLACK = 1e-9


@dataclass
class CriticalComponent:
    """One G-orbit type of critical configurations C_xi = G.(exp(i xi/n), m)."""

    space: QHSpace
    label: str
    xi: np.ndarray
    sample_point: SpacePoint
    critical_value: float
    orbit_type: str
    centralizer_dim: int
    stabilizer_dim: int
    lattice_k: int | None = None
    index: int | None = None
    null_dim: int | None = None
    null_angle: float | None = None
    min_check: bool | None = None
    min_margin: float | None = None
    index_samples: list[int] = field(default_factory=list)
    torus_fixed: bool | None = None
    torus_fixed_margin: float | None = None

    def config(self, n: int) -> BrokenConfig:
        return lattice_config(self.space, self.xi, n, self.sample_point)

    @property
    def xi_angles(self) -> list[float]:
        return [float(v) for v in np.real(-1j * np.diag(self.xi))]

    def residuals(self) -> dict[str, float]:
        G = self.space.group
        phi = self.space.moment(self.sample_point)
        return {
            "moment": float(np.abs(G.exp(self.xi) - phi).max()),
            "fixed": self.space.fixed_residual(self.sample_point, self.xi),
        }


@dataclass
class MorseSeries:
    coefficients: list[int]
    degree_cap: int

    def __post_init__(self):
        self.coefficients = [int(c) for c in self.coefficients[: self.degree_cap + 1]]
        self.coefficients += [0] * (self.degree_cap + 1 - len(self.coefficients))

    def __str__(self) -> str:
        terms = []
        for d, c in enumerate(self.coefficients):
            if c == 0:
                continue
            mono = "1" if d == 0 else ("t" if d == 1 else f"t^{d}")
            terms.append(mono if c == 1 and d else f"{c}" if d == 0 else f"{c}*{mono}")
        return " + ".join(terms) if terms else "0"


@dataclass
class PerfectionReport:
    difference: list[int]
    compared_degree: int
    perfect: bool
    morse_inequality: bool

    @property
    def verdict(self) -> str:
        if self.perfect:
            return "perfect"
        return "morse-inequality" if self.morse_inequality else "violated"


# -- power series helpers ----------------------------------------------------


def series_product(a, b, degree: int) -> list[int]:
    out = [0] * (degree + 1)
    for i, x in enumerate(a[: degree + 1]):
        if x:
            for j, y in enumerate(b[: degree + 1 - i]):
                out[i + j] += x * y
    return out


def geometric(step: int, degree: int) -> list[int]:
    """Coefficients of 1/(1 - t^step)."""
    return [1 if d % step == 0 else 0 for d in range(degree + 1)]


def classifying_series(group: GroupSpec, degree: int) -> list[int]:
    """Poincare series of BG: generators in degrees 4, 6, ..., 2N."""
    out = geometric(10**9, degree)
    for k in range(2, group.matrix_dim + 1):
        out = series_product(out, geometric(2 * k, degree), degree)
    return out


def loop_group_series(group: GroupSpec, degree: int) -> list[int]:
    """Poincare series of the based loop group: generators in degrees 2, 4, ..., 2N-2."""
    out = geometric(10**9, degree)
    for k in range(1, group.matrix_dim):
        out = series_product(out, geometric(2 * k, degree), degree)
    return out


def loop_space_target(group: GroupSpec, degree: int, equivariant: bool = False) -> MorseSeries:
    coeffs = loop_group_series(group, degree)
    if equivariant:
        coeffs = series_product(coeffs, classifying_series(group, degree), degree)
    return MorseSeries(coeffs, degree)


# -- enumeration -------------------------------------------------------------


def _chamber_points(group: GroupSpec, psi: np.ndarray, bound: float) -> list[np.ndarray]:
    """Sorted x = perm(psi) + 2 pi k (sum k = 0) with c |x|^2 < bound."""
    N, c = group.matrix_dim, group.metric_scale
    R = np.sqrt(bound / c)
    found = {}
    for perm in set(itertools.permutations(np.round(psi, 14))):
        p = np.array(perm)
        ranges = [range(int(np.ceil((-R - v) / (2 * np.pi))), int(np.floor((R - v) / (2 * np.pi))) + 1) for v in p[:-1]]
        for ks in itertools.product(*ranges):
            k = np.array(ks + (-sum(ks),), dtype=float)
            x = p + 2 * np.pi * k
            if c * np.sum(x**2) < bound:
                x = group.reduce_to_chamber(x)
                found.setdefault(tuple(np.round(x, 9)), x)
    return [found[key] for key in sorted(found, key=lambda t: (float(np.sum(np.square(t))), t))]


def _orbit_type(group: GroupSpec, xi: np.ndarray) -> tuple[str, int]:
    cdim = len(group.centralizer(xi))
    if cdim == group.dim:
        return "point", cdim
    if cdim == group.rank:
        return "G/T", cdim
    return "G/Z(xi)", cdim


def _lattice_k(group: GroupSpec, x: np.ndarray) -> int | None:
    if group.matrix_dim == 2:
        k = x[0] / (2 * np.pi)
        if abs(k - round(k)) < 1e-9:
            return int(round(k))
    return None


def _label(group: GroupSpec, x: np.ndarray, k: int | None) -> str:
    if k is not None:
        return f"k={k}"
    return "x=(" + ",".join(f"{v:.6f}" for v in x) + ")"


def _torus_pair(group: GroupSpec, rng: np.random.Generator) -> tuple:
    """A generic pair in T x T (no factor central)."""
    out = []
    for _ in range(2):
        while True:
            x = rng.uniform(-np.pi, np.pi, group.matrix_dim - 1)
            x = np.append(x, -x.sum())
            g = group.exp(group.torus_element(x))
            if len(group.stab_algebra(g)) == group.rank:
                out.append(g)
                break
    return tuple(out)


def enumerate_critical(space: QHSpace, n: int, rng: np.random.Generator | None = None) -> list[CriticalComponent]:
    """All critical components of f_n with value below the Y_n bound."""
    G = space.group
    bound = y_n_bound(G, n)
    rng = np.random.default_rng(0) if rng is None else rng
    comps: list[CriticalComponent] = []
    if isinstance(space, (PointSpace, ConjugacyClass)):
        psi = np.zeros(G.matrix_dim) if isinstance(space, PointSpace) else np.real(-1j * np.diag(space.eta))
        for x in _chamber_points(G, psi, bound):
            xi = G.torus_element(x)
            m = () if isinstance(space, PointSpace) else (G.exp(xi),)
            otype, cdim = _orbit_type(G, xi)
            k = _lattice_k(G, x) if isinstance(space, PointSpace) else None
            comps.append(CriticalComponent(
                space, _label(G, x, k), xi, m, float(G.inner(xi, xi)) + 0.0, otype, cdim,
                len(space.stab_algebra(m)) if m else G.dim, k,
            ))
    elif isinstance(space, Double):
        if G.matrix_dim != 2:
            raise NotImplementedError("critical-set enumeration for the double is implemented for SU(2) only")
        for x in _chamber_points(G, np.zeros(2), bound):
            xi = G.torus_element(x)
            k = _lattice_k(G, x)
            m = tuple(p for _ in range(space.genus) for p in _torus_pair(G, rng))
            m = m[0::2] + m[1::2]
            if k == 0:
                label, otype = "k=0", "Phi^-1(e)"
            else:
                label, otype = f"k={k}", "G x_T (T x T)^h"
            comps.append(CriticalComponent(
                space, label, xi, m, float(G.inner(xi, xi)) + 0.0, otype,
                len(G.centralizer(xi)), len(space.stab_algebra(m)), k,
            ))
    else:
        raise TypeError(f"unsupported space {type(space).__name__}")
    comps.sort(key=lambda c: (c.critical_value, c.label))
    return comps


# -- classification ----------------------------------------------------------


def _orthonormal_columns(A: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    if A.size == 0:
        return np.zeros((A.shape[0], 0))
    U, s, _ = np.linalg.svd(A, full_matrices=False)
    return U[:, : int(np.sum(s > tol * max(1.0, s[0])))]


def sigma_manifold_basis(comp: CriticalComponent, n: int, cfg: BrokenConfig | None = None) -> np.ndarray:
    """Orthonormal ambient basis of T(G . Y_n^xi) at the sample configuration."""
    cfg = comp.config(n) if cfg is None else cfg
    space, G = comp.space, comp.space.group
    xi = config_xi(cfg)
    _, y_basis = tangent_coordinates(cfg)
    d, k = G.dim, len(y_basis)
    cols = []
    cent = G.to_vec(G.centralizer(xi)).reshape(-1, d)
    for i in range(n - 1):
        for v in cent:
            col = np.zeros(n * d + k)
            col[i * d : (i + 1) * d] = v
            cols.append(col)
    for Y in space.fixed_set_tangent(cfg.m, xi) if cfg.m else []:
        col = np.zeros(n * d + k)
        col[(n - 1) * d : n * d] = G.to_vec(space.moment_diff(cfg.m, Y))
        col[n * d :] = space.coords(cfg.m, Y, y_basis)
        cols.append(col)
    for b in G.basis:
        cols.append(ambient_vector(cfg, orbit_tangent(cfg, b), y_basis))
    return _orthonormal_columns(np.array(cols).T)


def _sample_sigma(comp: CriticalComponent, n: int, rng: np.random.Generator, radius: float) -> BrokenConfig:
    """Random configuration of G . Y_n^xi near the representative."""
    space, G, xi = comp.space, comp.space.group, comp.xi
    cent = G.centralizer(xi)
    m = comp.sample_point
    if m:
        fixed = space.fixed_set_tangent(m, xi)
        if fixed:
            coeff = rng.standard_normal(len(fixed))
            coeff *= radius * rng.uniform() / np.linalg.norm(coeff)
            m = space.retract(m, space.combine(coeff, fixed))
    base = lattice_config(space, xi, n, m)
    nodes = base.nodes.copy()
    for i in range(n - 1):
        coeff = rng.standard_normal(len(cent))
        coeff *= radius * rng.uniform() / max(np.linalg.norm(coeff), 1e-300)
        nodes[i] = nodes[i] @ G.exp(np.tensordot(coeff, cent, axes=1))
    cfg = BrokenConfig(space, nodes, m)
    return cfg.act(G.random_element(rng))


def min_check(comp: CriticalComponent, n: int, rng: np.random.Generator, samples: int = 200,
              radius: float = 0.1, slack: float = MIN_CHECK_SLACK) -> tuple[bool, float]:
    """f_n >= f_n(C) on random points of Sigma_C; returns (pass, worst margin)."""
    worst = np.inf
    for _ in range(samples):
        worst = min(worst, energy(_sample_sigma(comp, n, rng, radius)) - comp.critical_value)
    return bool(worst >= -slack), float(worst)


def null_containment(hs: HessianSpectrum, sigma: np.ndarray) -> float:
    """sin of the largest principal angle between the Hessian null space and T Sigma_C."""
    return _subspace_gap(hs.ambient(hs.null), sigma)


def torus_generator(cfg: BrokenConfig, xi: np.ndarray, y_basis) -> np.ndarray:
    """Ambient matrix of the infinitesimal exp(t xi)-action on T X_n at a fixed configuration."""
    G, n = cfg.group, cfg.n
    blocks = [G.ad_matrix(xi)] * n
    if y_basis:
        blocks.append(cfg.space.generator_matrix(cfg.m, xi, y_basis))
    size = sum(b.shape[0] for b in blocks)
    out = np.zeros((size, size))
    pos = 0
    for b in blocks:
        out[pos : pos + b.shape[0], pos : pos + b.shape[0]] = b
        pos += b.shape[0]
    return out


def fixed_vector_margin(generator: np.ndarray, basis: np.ndarray) -> float:
    """Smallest singular value of the generator on span(basis), scaled by its norm."""
    if basis.shape[1] == 0:
        return np.inf
    scale = np.linalg.norm(generator, 2)
    if scale == 0:
        return 0.0
    Q = _orthonormal_columns(basis)
    return float(np.linalg.svd(generator @ Q / scale, compute_uv=False).min())


def torus_fixed_check(comp: CriticalComponent, n: int, hs: HessianSpectrum | None = None,
                      negative_basis: np.ndarray | None = None, tol: float = TORUS_FIXED_TOL) -> tuple[bool, float]:
    """No nonzero vector of the negative eigenspace is fixed by exp(t xi)."""
    cfg = comp.config(n)
    hs = hessian_matrix(cfg) if hs is None else hs
    basis = hs.ambient(hs.negative) if negative_basis is None else negative_basis
    if basis.shape[1] == 0:
        return True, float("inf")
    margin = fixed_vector_margin(torus_generator(cfg, comp.xi, hs.y_basis), basis)
    return bool(margin > tol), margin


def corrupted_negative_basis(comp: CriticalComponent, n: int, hs: HessianSpectrum) -> np.ndarray:
    """Negative eigenspace with one vector swapped for a torus-fixed direction (test fixture)."""
    basis = hs.ambient(hs.negative).copy()
    G = comp.space.group
    fixed = np.zeros(basis.shape[0])
    fixed[: G.dim] = G.to_vec(G.centralizer(comp.xi)[0])
    basis[:, 0] = fixed
    return basis


def classify_component(comp: CriticalComponent, n: int, rng: np.random.Generator | None = None,
                       min_samples: int = 200, index_samples: int = 5) -> HessianSpectrum:
    """Index, null-space containment, minimum and torus checks; fills in ``comp``."""
    rng = np.random.default_rng(0) if rng is None else rng
    cfg = comp.config(n)
    if abs(energy(cfg) - comp.critical_value) > 1e-10 * max(1.0, comp.critical_value):
        raise PreconditionError("critical value disagrees with the lattice configuration energy")
    hs = hessian_matrix(cfg)
    comp.index = hs.index
    comp.null_dim = hs.counts[1]
    comp.null_angle = null_containment(hs, sigma_manifold_basis(comp, n, cfg))
    comp.min_check, comp.min_margin = min_check(comp, n, rng, min_samples)
    comp.index_samples = [hessian_matrix(_resample(comp, n, rng)).index for _ in range(index_samples)]
    comp.torus_fixed, comp.torus_fixed_margin = torus_fixed_check(comp, n, hs)
    return hs


def _resample(comp: CriticalComponent, n: int, rng: np.random.Generator) -> BrokenConfig:
    """Another point of the same component."""
    space, G = comp.space, comp.space.group
    m = comp.sample_point
    if isinstance(space, Double) and comp.lattice_k is not None:
        pairs = [_torus_pair(G, rng) for _ in range(space.genus)]
        m = tuple(p[0] for p in pairs) + tuple(p[1] for p in pairs)
    return lattice_config(space, comp.xi, n, m).act(G.random_element(rng))


def component_ok(comp: CriticalComponent, null_tol: float = NULL_CONTAINMENT_TOL) -> bool:
    return bool(
        comp.min_check
        and comp.null_angle is not None and comp.null_angle < null_tol
        and all(i == comp.index for i in comp.index_samples)
        and comp.torus_fixed
    )


def thread_count() -> int:
    try:
        return max(1, int(os.environ.get("LOOPMORSE_THREADS", "1")))
    except ValueError:
        return 1


def classify_all(components: list[CriticalComponent], n: int, seed: int = 0, **kw) -> None:
    """Classify components concurrently with per-component deterministic seeds."""
    seeds = np.random.SeedSequence(seed).spawn(len(components))

    def run(args):
        comp, ss = args
        classify_component(comp, n, np.random.default_rng(ss), **kw)

    with ThreadPoolExecutor(max_workers=thread_count()) as pool:
        list(pool.map(run, zip(components, seeds)))


# -- series --------------------------------------------------------------------


def orbit_poincare(group: GroupSpec, centralizer_dim: int, degree: int, equivariant: bool = False) -> list[int] | None:
    """P_t (or P_t^G) of the adjoint orbit G/Z(xi), for the orbit types of SU(2) and SU(3)."""
    G, cdim = group, centralizer_dim
    if equivariant:
        # H_G(G/H) = H(BH)
        if cdim == G.dim:
            return classifying_series(G, degree)
        if cdim == G.rank:
            out = geometric(10**9, degree)
            for _ in range(G.rank):
                out = series_product(out, geometric(2, degree), degree)
            return out
        if G.matrix_dim == 3 and cdim == 4:
            return series_product(geometric(2, degree), geometric(4, degree), degree)
        return None
    pad = [0] * (degree + 1)
    if cdim == G.dim:
        return ([1] + pad)[: degree + 1]
    if G.matrix_dim == 2 and cdim == 1:
        return ([1, 0, 1] + pad)[: degree + 1]
    if G.matrix_dim == 3 and cdim == 2:
        return ([1, 0, 2, 0, 2, 0, 1] + pad)[: degree + 1]
    if G.matrix_dim == 3 and cdim == 4:
        return ([1, 0, 1, 0, 1] + pad)[: degree + 1]
    return None


def builtin_poincare(comp: CriticalComponent, degree: int, equivariant: bool = False) -> list[int] | None:
    """P_t of a component that is a single adjoint orbit G/Z(xi), else None."""
    if isinstance(comp.space, Double):
        return None
    return orbit_poincare(comp.space.group, comp.centralizer_dim, degree, equivariant)


def poincare_target(space: QHSpace, degree: int, equivariant: bool = False) -> MorseSeries | None:
    """Poincare series of the path space the Morse function lives on, when known.

    Point space: based loops.  Conjugacy class C: paths from e ending in C,
    a fibration over C with fibre the based loops and even cohomology
    throughout, so the series is P(C) * P(loops).
    """
    G = space.group
    loops = loop_group_series(G, degree)
    if isinstance(space, PointSpace):
        return loop_space_target(G, degree, equivariant)
    if isinstance(space, ConjugacyClass):
        base = orbit_poincare(G, len(G.centralizer(space.eta)), degree, equivariant)
        if base is None:
            return None
        return MorseSeries(series_product(base, loops, degree), degree)
    return None


def morse_series(components: list[CriticalComponent], degree: int, equivariant: bool = False,
                 cohomology: dict[str, list[int]] | None = None) -> MorseSeries:
    """Sum over components of t^index * P_t(C), truncated at ``degree``."""
    total = [0] * (degree + 1)
    for comp in components:
        if comp.index is None:
            raise PreconditionError(f"component {comp.label} is not classified")
        if cohomology and comp.label in cohomology:
            P = list(cohomology[comp.label])[: degree + 1]
        else:
            P = builtin_poincare(comp, degree, equivariant)
        if P is None:
            raise MissingCohomologyError(f"no Poincare series for component {comp.label}")
        for d, c in enumerate(P):
            if d + comp.index <= degree:
                total[d + comp.index] += int(c)
    return MorseSeries(total, degree)


def valid_comparison_degree(space: QHSpace, n: int) -> int | None:
    """Largest degree unaffected by components beyond the Y_n cutoff.

    Excluded components with value up to four times the cutoff are found at
    a larger n; their indices come from the conjugate-point count for the
    point space and from the Hessian otherwise.
    """
    if isinstance(space, Double):
        return None
    G = space.group
    bound = y_n_bound(G, n)
    n_big = 4 * n + 8
    excluded = [c for c in enumerate_critical(space, n_big) if c.critical_value >= bound]
    if not excluded:
        return None
    if isinstance(space, PointSpace):
        return min(conjugate_index(G, c.xi) for c in excluded) - 1
    return min(hessian_matrix(c.config(n_big)).index for c in excluded) - 1


def perfection_check(series: MorseSeries, target: MorseSeries, valid_degree: int | None = None) -> PerfectionReport:
    top = min(series.degree_cap, target.degree_cap)
    if valid_degree is not None:
        top = min(top, valid_degree)
    diff = [series.coefficients[d] - target.coefficients[d] for d in range(top + 1)]
    return PerfectionReport(diff, top, all(v == 0 for v in diff), all(v >= 0 for v in diff))
