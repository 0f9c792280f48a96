import numpy as np
import pytest

from asymscat.core import AsymptoticScalarField, PowerSum, UnsupportedDimensionError
from asymscat.fields import (GaussianGradient, MagneticPotential, PowerVectorField, SumVectorField, TwoFormField,
                             a_inf, a_reg, a_reg_quad, build_A, check_closed, curl_of, eta, u_potential)


def rotation_potential():
    """Order -2 potential whose curl has order -3."""
    return PowerVectorField([PowerSum(3, {((0, 1, 0), 3.0): -1.0}),
                             PowerSum(3, {((1, 0, 0), 3.0): 1.0}),
                             PowerSum(3, {((1, 0, 1), 4.0): 0.3})])


@pytest.fixture(scope="module")
def F():
    return TwoFormField.from_potential(rotation_potential(), 2.0)


def random_points(n, lo, hi, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3))
    return X * rng.uniform(lo, hi, (n, 1)) / np.linalg.norm(X, axis=1, keepdims=True)


def test_two_form_rejects_slow_decay():
    with pytest.raises(ValueError):
        TwoFormField(3, {(0, 1): AsymptoticScalarField.single(2.0, {(0, 0, 0): 1.0})})


def test_two_form_antisymmetric_storage():
    f = AsymptoticScalarField.single(3.0, {(0, 0, 0): 1.0})
    F = TwoFormField(3, {(1, 0): f})
    M = F.matrix(np.array([[0.0, 0.0, 2.0]]))[0]
    assert M[0, 1] == pytest.approx(-0.125)
    assert M[1, 0] == pytest.approx(0.125)


def test_from_potential_matches_curl(F):
    A = rotation_potential()
    for x in random_points(5, 1, 5):
        np.testing.assert_allclose(curl_of(A, x), F.matrix(x[None])[0], atol=1e-8)


def test_a_reg_zero_field():
    np.testing.assert_array_equal(a_reg(TwoFormField.zero(3), np.array([[1.0, 2.0, 3.0]])), 0.0)


def test_a_reg_closed_form_tail():
    F = TwoFormField(3, {(0, 1): AsymptoticScalarField.single(3.0, {(0, 0, 0): 1.0})})
    np.testing.assert_allclose(a_reg(F, np.array([[0.0, 1.0, 0.0]]))[0], [1.0, 0.0, 0.0], atol=1e-14)


def test_a_reg_matches_quadrature(F):
    for x in random_points(4, 1.5, 6, seed=3):
        np.testing.assert_allclose(a_reg(F, x[None])[0], a_reg_quad(F, x), atol=1e-10)


def test_a_reg_tangential(F):
    X = random_points(20, 0.5, 10, seed=1)
    np.testing.assert_allclose(np.einsum("nd,nd->n", X, a_reg(F, X)), 0, atol=1e-12)


def test_a_inf_homogeneous_and_curl_free(F):
    X = random_points(10, 0.5, 3, seed=2)
    np.testing.assert_allclose(a_inf(F, 2 * X), a_inf(F, X) / 2, atol=1e-10)
    assert np.all(a_inf(TwoFormField.zero(3), X) == 0)
    x = np.array([1.0, -2.0, 3.0])
    x *= 4 / np.linalg.norm(x)
    assert np.max(np.abs(curl_of(lambda z: a_inf(F, z), x))) < 1e-6


def test_u_potential_basics(F):
    x0 = np.array([1.0, 0.0, 0.0])
    assert u_potential(F, x0) == 0.0
    assert u_potential(TwoFormField.zero(3), np.array([0.3, 0.2, 1.0])) == 0.0
    rng = np.random.default_rng(4)
    for x in rng.normal(size=(5, 3)):
        assert u_potential(F, x) == pytest.approx(u_potential(F, x, via=rng.normal(size=3)), abs=1e-8)


def test_u_potential_refuses_plane():
    F2 = TwoFormField(2, {(0, 1): AsymptoticScalarField.single(3.0, {(0, 0): 1.0}, d=2)})
    with pytest.raises(UnsupportedDimensionError):
        u_potential(F2, np.array([0.0, 1.0]))


def test_build_A_far_region_is_a_reg(F):
    X = random_points(20, 2, 12, seed=5)
    np.testing.assert_array_equal(build_A(F, X), a_reg(F, X))


def test_build_A_zero_field():
    np.testing.assert_array_equal(build_A(TwoFormField.zero(3), np.array([[0.5, 0.1, 0.2]])), 0.0)


@pytest.mark.parametrize("r", [0.5, 1.2, 1.5, 1.9, 4.0])
def test_build_A_curl_everywhere(F, r):
    x = np.array([0.3, -0.5, 0.8])
    x *= r / np.linalg.norm(x)
    got = curl_of(lambda z: build_A(F, z), x)
    np.testing.assert_allclose(got, F.smooth_matrix(x[None])[0], atol=1e-6)


def test_far_field_matches_build_A(F):
    A = MagneticPotential(F)
    X = random_points(6, 1.0, 8, seed=6)
    np.testing.assert_allclose(A.far_field()(X), build_A(F, X), atol=1e-12)


def test_eta_cutoff_range():
    assert eta(np.array([[0.4, 0, 0]]))[0] == 0.0
    assert eta(np.array([[1.0, 0, 0]]))[0] == 1.0
    assert 0 < eta(np.array([[0.75, 0, 0]]))[0] < 1


def test_curl_of_examples():
    x = np.array([0.3, 0.4, -1.2])
    np.testing.assert_allclose(curl_of(lambda z: np.array([1.0, 2.0, 3.0]), x), 0, atol=1e-12)
    lin = curl_of(lambda z: 0.5 * np.array([-z[1], z[0], 0.0]), x)
    assert lin[0, 1] == pytest.approx(1.0, abs=1e-10)
    assert np.max(np.abs(curl_of(GaussianGradient(3), x))) < 1e-8


def test_check_closed():
    A = rotation_potential()
    pts = random_points(5, 1, 3, seed=7)
    assert check_closed(lambda z: curl_of(A, z), pts) < 1e-6
    assert check_closed(TwoFormField.zero(3), pts) == 0.0
    broken = TwoFormField(3, {(0, 1): AsymptoticScalarField.single(4.0, {(0, 0, 1): 1.0})})
    assert check_closed(broken, np.array([[1.0, 1.0, 1.0], [0.5, 2.0, 1.0]])) > 1e-3


def test_power_vector_field_derivatives():
    A = rotation_potential()
    x = np.array([1.3, -0.4, 2.1])
    h = 1e-5
    J = np.array([(A(x + h * e) - A(x - h * e)) / (2 * h) for e in np.eye(3)]).T
    np.testing.assert_allclose(A.jacobian(x[None])[0], J, rtol=1e-7, atol=1e-10)
    assert A.divergence(x[None])[0] == pytest.approx(np.trace(J), abs=1e-9)


def test_contracted_parts_consistent():
    A = rotation_potential()
    xi = np.array([0.0, 0.6, 0.8])
    X = random_points(4, 1, 3, seed=8)
    from asymscat.core import eval_powersums
    a, *q, div, lap = eval_powersums(A.contracted(xi), X)
    V = A(X)
    J = A.jacobian(X)  # J[n, i, j] = d_j A_i
    np.testing.assert_allclose(a, V @ xi, rtol=1e-12)
    qj = np.einsum("nij,i->nj", J, xi) - np.einsum("nji,i->nj", J, xi)
    np.testing.assert_allclose(np.array(q).T, qj, atol=1e-12)
    np.testing.assert_allclose(div, A.divergence(X), rtol=1e-12)
    np.testing.assert_allclose(lap, A.laplacian(X) @ xi, rtol=1e-10)


def test_gaussian_gradient_and_sum():
    g = GaussianGradient(3, c=0.7, s=1.3)
    x = np.array([0.2, -0.3, 0.5])
    h = 1e-6
    grad = np.array([(g.phi(x + h * e) - g.phi(x - h * e)) / (2 * h) for e in np.eye(3)])
    np.testing.assert_allclose(g(x[None])[0], grad, atol=1e-9)
    A = rotation_potential()
    s = SumVectorField([A, g])
    np.testing.assert_allclose(s(x[None]), A(x[None]) + g(x[None]), rtol=1e-14)
