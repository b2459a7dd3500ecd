"""End-to-end acceptance checks for SU(2) (c = 1) and the shipped spaces.

Each test records one ``[AC-n] PASS/FAIL`` line, printed in the pytest
terminal summary.  Run directly with ``python3 tests/test_acceptance.py``.
"""
import time

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from loopmorse.jacobi import (
    JacobiField,
    broken_jacobi,
    commutation_residual,
    commuting_jacobi_endpoint_ratio,
    conjugate_index,
    curvature_spectrum,
)
from loopmorse.lie import su
from loopmorse.morse import (
    loop_space_target,
    classify_component,
    corrupted_negative_basis,
    enumerate_critical,
    morse_series,
    perfection_check,
    torus_fixed_check,
)
from loopmorse.pathspace import (
    alpha,
    beta,
    directional_derivative,
    energy,
    fd_directional,
    fd_hessian,
    gradient_norm,
    hessian,
    hessian_matrix,
    perturbed_path,
    random_config,
    random_tangent,
    shorten_sweep,
)
from loopmorse.spaces import (
    make_space,
    verify_commuting,
    verify_first_order_image,
    verify_invar,
    verify_nondeg,
)

SEED = 20240611
G = su(2, metric_scale=1.0)
SPACES = {
    "point": make_space(G, "point"),
    "conjugacy": make_space(G, "conjugacy", eta=[0.7]),
    "double": make_space(G, "double", genus=1),
}


def record(num: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[num] = f"[AC-{num}] {'PASS' if ok else 'FAIL'} {detail}"
    assert ok, detail


def rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(b), 1e-300)


@pytest.fixture(scope="module")
def ladder():
    start = time.perf_counter()
    comps = enumerate_critical(SPACES["point"], 80)
    rng = np.random.default_rng(SEED)
    spectra = [classify_component(c, 80, rng) for c in comps]
    return comps, spectra, time.perf_counter() - start


def test_ac1_index_ladder(ladder):
    comps, _, elapsed = ladder
    ks = [c.lattice_k for c in comps]
    value_err = max(rel(c.critical_value, 8 * np.pi**2 * k * k) if k else abs(c.critical_value)
                    for c, k in zip(comps, ks))
    indices = [c.index for c in comps]
    oracle = [conjugate_index(G, c.xi) for c in comps]
    ok = ks == [0, 1, 2, 3] and value_err < 1e-9 and indices == [0, 2, 6, 10] == oracle and elapsed < 60
    record(1, ok, f"k={ks} indices={indices} oracle={oracle} value_err={value_err:.2e} time={elapsed:.1f}s")


def test_ac2_perfection(ladder):
    comps, _, _ = ladder
    plain = perfection_check(morse_series(comps, 13), loop_space_target(G, 13))
    equiv = perfection_check(morse_series(comps, 13, equivariant=True), loop_space_target(G, 13, equivariant=True))
    ok = plain.perfect and equiv.perfect and plain.compared_degree == equiv.compared_degree == 13
    record(2, ok, f"plain={plain.verdict} equivariant={equiv.verdict} through degree 13")


def test_ac3_hessian_fidelity():
    rng = np.random.default_rng(SEED)
    worst, count = 0.0, 0
    for name, space in SPACES.items():
        for comp in enumerate_critical(space, 16, rng):
            cfg = comp.config(16)
            for _ in range(50):
                e1, e2 = random_tangent(cfg, rng), random_tangent(cfg, rng)
                worst = max(worst, rel(hessian(cfg, e1, e2), fd_hessian(cfg, e1, e2)))
                count += 1
    record(3, worst < 1e-4, f"max relative error {worst:.2e} over {count} tangent pairs")


def test_ac4_first_variation():
    rng = np.random.default_rng(SEED)
    worst_fd = 0.0
    for i in range(100):
        space = list(SPACES.values())[i % 3]
        cfg = random_config(space, 16, rng)
        eta = random_tangent(cfg, rng)
        worst_fd = max(worst_fd, rel(directional_derivative(cfg, eta), fd_directional(cfg, eta)))
    worst_grad = 0.0
    for space in SPACES.values():
        for n in (16, 80):
            for comp in enumerate_critical(space, n, rng):
                worst_grad = max(worst_grad, gradient_norm(comp.config(n)))
    ok = worst_fd < 1e-6 and worst_grad < 1e-8
    record(4, ok, f"fd relative error {worst_fd:.2e}, critical gradient norm {worst_grad:.2e}")


def test_ac5_lemma_suite():
    rng = np.random.default_rng(SEED)
    worst = {"first_order_image": 0.0, "commuting": 0.0, "nondeg": 0.0, "invar": 0.0}
    for name in ("conjugacy", "double"):
        space = SPACES[name]
        comps = enumerate_critical(space, 16, rng)
        nonzero = [c for c in comps if G.norm(c.xi) > 0]
        for i in range(20):
            m = space.random_point(rng)
            worst["first_order_image"] = max(worst["first_order_image"],
                                             verify_first_order_image(space, m, 1e-5).residual)
            comp = nonzero[i % len(nonzero)]
            g = G.random_element(rng)
            m, xi = space.act(g, comp.sample_point), G.Ad(g, comp.xi)
            for key, report in (("commuting", verify_commuting(space, m, xi, rng)),
                                ("nondeg", verify_nondeg(space, m, xi)),
                                ("invar", verify_invar(space, m, xi, rng))):
                worst[key] = max(worst[key], report.residual)
    ok = all(v < 1e-5 for v in worst.values())
    record(5, ok, " ".join(f"{k}={v:.1e}" for k, v in worst.items()))


def test_ac6_jacobi_suite():
    rng = np.random.default_rng(SEED)
    times = np.linspace(0, 1, 21)
    worst_comm, smallest_ratio, worst_cont = 0.0, np.inf, 0.0
    for _ in range(100):
        g = G.random_element(rng)
        x, y = rng.normal(size=(2, 2))
        xi = G.Ad(g, G.torus_element(3 * (x - x.mean())))
        d0 = G.Ad(g, G.torus_element(y - y.mean()))
        field = JacobiField.vanishing_at_zero(curvature_spectrum(G, xi), d0)
        worst_comm = max(worst_comm, commutation_residual(field, times))
        smallest_ratio = min(smallest_ratio, abs(commuting_jacobi_endpoint_ratio(field)))
        nodes = np.array([G.random_algebra(rng) for _ in range(16)])
        worst_cont = max(worst_cont, broken_jacobi(G, xi / 4, 16, nodes).continuity_residual())
    ok = worst_comm < 1e-10 and smallest_ratio > 0.5 and worst_cont < 1e-12
    record(6, ok, f"commutation {worst_comm:.1e}, min |ratio| {smallest_ratio:.3f}, continuity {worst_cont:.1e}")


def test_ac7_approximation_maps():
    rng = np.random.default_rng(SEED)
    spaces = list(SPACES.values())
    exact = 0
    energy_exact = 0
    for i in range(100):
        cfg = random_config(spaces[i % 3], 16, rng)
        path = beta(cfg)
        exact += int(np.array_equal(alpha(path, 16).nodes, cfg.nodes))
        energy_exact += int(path.closed_form_energy() == energy(cfg))
    monotone = 0
    for i in range(20):
        cfg = random_config(spaces[i % 3], 16, rng, noise=0.2)
        path = perturbed_path(cfg, rng)
        energies = [path.energy()]
        for _ in range(3):
            path = shorten_sweep(path, 16, eps=1.0)
            energies.append(path.energy())
        monotone += int(all(b <= a * (1 + 1e-12) for a, b in zip(energies, energies[1:])))
    ok = exact == 100 and energy_exact == 100 and monotone == 20
    record(7, ok, f"alpha(beta)=id {exact}/100, closed-form energy {energy_exact}/100, monotone {monotone}/20")


def test_ac8_torus_fixed(ladder):
    comps, spectra, _ = ladder
    results = [torus_fixed_check(c, 80, hs) for c, hs in zip(comps, spectra) if c.lattice_k]
    for comp in enumerate_critical(SPACES["double"], 16):
        if G.norm(comp.xi) > 0:
            results.append(torus_fixed_check(comp, 16))
    k1, hs1 = comps[1], spectra[1]
    control, _ = torus_fixed_check(k1, 80, hs1, negative_basis=corrupted_negative_basis(k1, 80, hs1))
    ok = all(r[0] for r in results) and not control
    margins = ", ".join(f"{r[1]:.2f}" for r in results)
    record(8, ok, f"{len(results)} components pass (margins {margins}); negative control rejected={not control}")


def test_ac9_cutoff():
    bad = []
    for n in (8, 16, 40, 80):
        found = {c.lattice_k for c in enumerate_critical(SPACES["point"], n)}
        expected = {k for k in range(10) if k * k < n / 8}
        if found != expected:
            bad.append((n, sorted(found), sorted(expected)))
    record(9, not bad, "k enumerated iff k^2 < n/8 for n in {8, 16, 40, 80}" + (f" mismatches {bad}" if bad else ""))


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
