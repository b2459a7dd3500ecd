import numpy as np
import pytest

from loopmorse.errors import MissingCohomologyError, PreconditionError
from loopmorse.jacobi import conjugate_index
from loopmorse.morse import (
    MorseSeries,
    loop_space_target,
    classify_component,
    corrupted_negative_basis,
    enumerate_critical,
    morse_series,
    perfection_check,
    poincare_target,
    sigma_manifold_basis,
    torus_fixed_check,
    valid_comparison_degree,
)
from loopmorse.pathspace import energy, hessian_matrix
from loopmorse.spaces import Double, PointSpace, make_space


def test_enumerate_point_su2(su2):
    comps = enumerate_critical(PointSpace(su2), 16)
    assert [c.label for c in comps] == ["k=0", "k=1"]
    assert comps[1].critical_value == pytest.approx(8 * np.pi**2, rel=1e-12)
    assert [c.orbit_type for c in comps] == ["point", "G/T"]


def test_enumerate_double_su2(su2):
    comps = enumerate_critical(Double(su2, 1), 16)
    assert [c.critical_value for c in comps] == pytest.approx([0, 8 * np.pi**2], rel=1e-12)
    for c in comps:
        r = c.residuals()
        assert r["moment"] < 1e-12 and r["fixed"] < 1e-12


def test_enumerate_conjugacy_brute_force(su2):
    psi = 0.7
    space = make_space(su2, "conjugacy", eta=[psi, -psi])
    comps = enumerate_critical(space, 16)
    # brute force over torus representatives x with exp(i x) conjugate to exp(i psi)
    bound = 0.5 * 16 * su2.injectivity_radius() ** 2
    xs = sorted({round(abs(s * psi + 2 * np.pi * k), 9) for s in (1, -1) for k in range(-5, 6)})
    expected = [x for x in xs if 2 * x * x < bound]
    assert [c.xi_angles[0] for c in comps] == pytest.approx(expected, abs=1e-9)
    assert comps[0].critical_value == pytest.approx(2 * psi**2)
    for c in comps:
        assert abs(energy(c.config(16)) - c.critical_value) < 1e-10 * max(1, c.critical_value)


def test_enumeration_stable_beyond_cutoff(su3):
    space = PointSpace(su3)
    a = enumerate_critical(space, 24)
    b = [c for c in enumerate_critical(space, 48) if c.critical_value < 0.5 * 24 * su3.injectivity_radius() ** 2]
    assert [c.label for c in a] == [c.label for c in b]


def test_sigma_basis(su2):
    space = PointSpace(su2)
    k0, k1 = enumerate_critical(space, 16)
    # xi = 0 generates the trivial torus, so Y_n^xi is all of Y_n
    assert sigma_manifold_basis(k0, 16).shape[1] == (16 - 1) * su2.dim
    B = sigma_manifold_basis(k1, 16)
    assert B.shape[1] == 2 + (16 - 1)
    assert np.abs(B.T @ B - np.eye(B.shape[1])).max() < 1e-12


def test_classify_point_components(su2, rng):
    space = PointSpace(su2)
    comps = enumerate_critical(space, 40)
    assert [c.label for c in comps] == ["k=0", "k=1", "k=2"]
    for c in comps:
        classify_component(c, 40, rng, min_samples=40, index_samples=2)
        assert c.index == conjugate_index(su2, c.xi)
        assert c.min_check and c.null_angle < 1e-6 and c.torus_fixed
        assert all(i == c.index for i in c.index_samples)
    assert [c.index for c in comps] == [0, 2, 6]


def test_torus_fixed_negative_control(su2):
    comp = enumerate_critical(PointSpace(su2), 16)[1]
    hs = hessian_matrix(comp.config(16))
    assert torus_fixed_check(comp, 16, hs)[0]
    ok, margin = torus_fixed_check(comp, 16, hs, corrupted_negative_basis(comp, 16, hs))
    assert not ok and margin < 1e-12


def test_series_examples(su2, rng):
    space = PointSpace(su2)
    comps = enumerate_critical(space, 16)
    for c in comps:
        classify_component(c, 16, rng, min_samples=5, index_samples=1)
    assert str(morse_series(comps, 4)) == "1 + t^2 + t^4"
    assert morse_series(comps, 4, equivariant=True).coefficients[:3] == [1, 0, 1]
    assert loop_space_target(su2, 6, True).coefficients == [1, 0, 1, 0, 2, 0, 2]
    assert morse_series([], 5).coefficients == [0] * 6
    rep = perfection_check(morse_series(comps, 4), loop_space_target(su2, 4), valid_comparison_degree(space, 16))
    assert rep.perfect and rep.compared_degree == 4


def test_perfection_negative_control():
    rep = perfection_check(MorseSeries([1, 0, 0, 0, 1], 4), MorseSeries([1, 0, 1, 0, 1], 4))
    assert not rep.perfect and not rep.morse_inequality and rep.verdict == "violated"
    rep = perfection_check(MorseSeries([1, 0, 2], 2), MorseSeries([1, 0, 1], 2))
    assert rep.verdict == "morse-inequality"


def test_valid_degree(su2):
    for n, kmax in ((16, 1), (40, 2), (80, 3)):
        assert valid_comparison_degree(PointSpace(su2), n) == 4 * kmax + 1


def test_double_needs_cohomology(su2, rng):
    comps = enumerate_critical(Double(su2, 1), 16)
    for c in comps:
        c.index = 0
    with pytest.raises(MissingCohomologyError):
        morse_series(comps, 4)
    s = morse_series(comps, 4, cohomology={"k=0": [1, 0, 2], "k=1": [1]})
    assert s.coefficients == [2, 0, 2, 0, 0]
    with pytest.raises(PreconditionError):
        comps[0].index = None
        morse_series(comps, 4)


def test_conjugacy_series_matches_fibration_target(su2, rng):
    space = make_space(su2, "conjugacy", eta=[0.7, -0.7])
    comps = enumerate_critical(space, 16)
    for c in comps:
        classify_component(c, 16, rng, min_samples=5, index_samples=1)
    assert [c.index for c in comps] == [0, 2, 4]
    top = valid_comparison_degree(space, 16)
    for eq in (False, True):
        rep = perfection_check(morse_series(comps, 8, eq), poincare_target(space, 8, eq), top)
        assert rep.perfect and rep.compared_degree == 5


def test_double_torus_components(su2, rng):
    comps = enumerate_critical(Double(su2, 1), 16)
    for c in comps:
        classify_component(c, 16, rng, min_samples=20, index_samples=2)
        assert c.min_check and c.null_angle < 1e-6 and c.torus_fixed
    assert [c.index for c in comps] == [0, 4]
