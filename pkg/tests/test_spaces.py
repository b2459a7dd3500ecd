import numpy as np
import pytest

from loopmorse.errors import PreconditionError
from loopmorse.spaces import (
    ConjugacyClass,
    Double,
    PointSpace,
    make_space,
    verify_commuting,
    verify_first_order_image,
    verify_hamimage,
    verify_invar,
    verify_nondeg,
)


def torus_pair(G, a, b):
    return (G.exp(G.torus_element([a, -a])), G.exp(G.torus_element([b, -b])))


def lattice(G, k):
    return G.torus_element([2 * np.pi * k, -2 * np.pi * k])


def normal_coordinate_hessian(space, m, xi, Y, Yp, h=1e-3):
    """Mixed partial of <log(Phi(m)^-1 Phi(alpha(s, t))), xi>: an independent route."""
    G = space.group
    P0inv = np.conj(space.moment(m).T)

    def f(s, t):
        return G.inner(G.log(P0inv @ space.moment(space.retract(m, space.combine([s, t], [Y, Yp])))), xi)

    def mixed(h):
        return (f(h, h) - f(h, -h) - f(-h, h) + f(-h, -h)) / (4 * h * h)

    return (4 * mixed(h / 2) - mixed(h)) / 3


@pytest.mark.parametrize("genus", [1, 2])
def test_double_moment_diff_matches_fd(su3, rng, genus):
    D = Double(su3, genus)
    m = D.random_point(rng)
    Y = tuple(su3.random_algebra(rng) for _ in range(D.n_factors))
    h = 1e-5
    P0inv = np.conj(D.moment(m).T)
    fd = (su3.log(P0inv @ D.moment(D.retract(m, D.combine([h], [Y]))))
          - su3.log(P0inv @ D.moment(D.retract(m, D.combine([-h], [Y]))))) / (2 * h)
    exact = D.moment_diff(m, Y)
    assert su3.norm(fd - exact) < 1e-6 * max(1.0, su3.norm(exact))


def test_commuting_pair_moment_is_identity(su2):
    D = Double(su2, 1)
    assert np.allclose(D.moment(torus_pair(su2, 0.3, 1.9)), np.eye(2), atol=1e-14)


def test_point_space_trivia(su2):
    P = PointSpace(su2)
    assert np.allclose(P.moment(()), np.eye(2))
    assert P.tangent_basis(()) == [] and P.fixed_set_tangent((), lattice(su2, 1)) == []
    assert P.hessian_moment((), lattice(su2, 1), (), ()) == 0.0
    assert verify_first_order_image(P, ()).passed
    assert verify_nondeg(P, (), lattice(su2, 1)).passed


@pytest.mark.parametrize("kind", ["conjugacy", "double"])
def test_equivariance(su3, rng, kind):
    space = make_space(su3, kind, eta=[0.4, 0.3, -0.7], genus=1)
    for _ in range(5):
        m, g = space.random_point(rng), su3.random_element(rng)
        lhs = space.moment(space.act(g, m))
        assert np.abs(lhs - su3.Ad(g, space.moment(m))).max() < 1e-10


def test_conjugacy_class_points_stay_in_class(su3, rng):
    C = ConjugacyClass(su3, su3.torus_element([0.4, 0.3, -0.7]))
    m = C.random_point(rng)
    for Y in C.tangent_basis(m):
        m2 = C.retract(m, C.combine([0.7], [Y]))
        w = np.sort_complex(np.round(np.linalg.eigvals(m2[0]), 10))
        assert np.allclose(w, np.sort_complex(np.round(C.spectrum, 10)), atol=1e-9)
    drifted = (m[0] + 1e-7 * rng.normal(size=(3, 3)),)
    snapped = C.project_point(drifted)
    assert np.abs(np.sort(np.angle(np.linalg.eigvals(snapped[0]))) - np.sort(np.angle(C.spectrum))).max() < 1e-12
    assert np.abs(snapped[0] - m[0]).max() < 1e-6


def test_fixed_set_tangent_examples(su2, rng):
    D = Double(su2, 1)
    m = torus_pair(su2, 0.3, 1.1)
    F = D.fixed_set_tangent(m, lattice(su2, 1))
    assert len(F) == 2
    for Y in F:
        for y in Y:
            assert su2.norm(su2.ad(y, lattice(su2, 1))) < 1e-12
    assert len(D.fixed_set_tangent(m, np.zeros((2, 2), complex))) == 6
    with pytest.raises(PreconditionError):
        D.fixed_set_tangent(D.random_point(rng), lattice(su2, 1))


def test_first_order_image_examples(su2, rng):
    C = ConjugacyClass(su2, su2.torus_element([0.9, -0.9]))
    rep = verify_first_order_image(C, C.random_point(rng))
    assert rep.passed and rep.details["image_rank"] == 2
    D = Double(su2, 1)
    rep = verify_first_order_image(D, D.random_point(rng))
    assert rep.passed and rep.details["image_rank"] == 3
    rep = verify_first_order_image(D, torus_pair(su2, 0.3, 1.1))
    assert rep.passed and rep.details["image_rank"] == 2


def test_hessian_symmetry_and_independent_route(su2, rng):
    D = Double(su2, 1)
    xi = lattice(su2, 1)
    m = torus_pair(su2, 0.3, 1.1)
    basis = D.tangent_basis(m)
    for _ in range(3):
        Y = D.combine(rng.normal(size=6), basis)
        Yp = D.combine(rng.normal(size=6), basis)
        a, b = D.hessian_moment(m, xi, Y, Yp), D.hessian_moment(m, xi, Yp, Y)
        assert abs(a - b) < 1e-8
        assert abs(a - normal_coordinate_hessian(D, m, xi, Y, Yp)) < 1e-6 * max(1, abs(a))


def test_hessian_requires_perpendicular(su2, rng):
    D = Double(su2, 1)
    m = D.random_point(rng)
    Y = D.tangent_basis(m)[0]
    with pytest.raises(PreconditionError):
        D.hessian_moment(m, lattice(su2, 1), Y, Y)


def test_lemma_verifiers_double(su2, rng):
    D = Double(su2, 1)
    for k in (1, 2):
        g = su2.random_element(rng)
        m = D.act(g, torus_pair(su2, *rng.uniform(0.2, 3.0, 2)))
        xi = su2.Ad(g, lattice(su2, k))
        for rep in (
            verify_commuting(D, m, xi, rng, 3, tol=1e-6),
            verify_nondeg(D, m, xi, tol=1e-6),
            verify_invar(D, m, xi, rng, 3),
            verify_hamimage(D, m, xi),
        ):
            assert rep.passed, rep
    rep = verify_nondeg(D, torus_pair(su2, 0.3, 1.1), np.zeros((2, 2), complex))
    assert rep.passed


def test_lemma_verifiers_conjugacy(su3, rng):
    eta = [0.5, 0.2, -0.7]
    C = ConjugacyClass(su3, su3.torus_element(eta))
    xi = su3.torus_element(np.array([0.5 - 2 * np.pi, 0.2, -0.7 + 2 * np.pi]))
    m = (su3.exp(xi),)
    assert np.allclose(sorted(np.angle(np.linalg.eigvals(m[0]))), sorted(eta))
    for rep in (verify_nondeg(C, m, xi), verify_invar(C, m, xi, rng, 3), verify_hamimage(C, m, xi),
                verify_first_order_image(C, m)):
        assert rep.passed, rep


def test_make_space_validation(su2):
    with pytest.raises(ValueError):
        make_space(su2, "conjugacy")
    with pytest.raises(ValueError):
        make_space(su2, "torus")
    C = make_space(su2, "conjugacy", eta=[0.3])
    assert np.allclose(np.diag(C.eta), [0.3j, -0.3j])
