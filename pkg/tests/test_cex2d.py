import numpy as np
import pytest

from asymscat.cex2d import (CircleProfile, check_vanishing_conditions, halfcircle_integral, radon_homog2,
                            radon_homog2_direct, verification_table)

E1, E2 = np.array([1.0, 0.0]), np.array([0.0, 1.0])


def test_constant_half_circle():
    assert halfcircle_integral(CircleProfile.constant(), E1) == pytest.approx(np.pi, abs=1e-14)


def test_quadrupole_vanishes():
    v = CircleProfile.quadrupole()
    for a in np.linspace(0, 2 * np.pi, 13):
        w = np.array([np.cos(a), np.sin(a)])
        assert abs(halfcircle_integral(v, w, +1)) <= 1e-12
        assert abs(halfcircle_integral(v, w, -1)) <= 1e-12
    assert check_vanishing_conditions(v) == (True, True)


def test_cosine_oriented_half():
    v = CircleProfile.from_fourier(0.0, a=[1.0])
    # counter-clockwise from -e2 to e2 passes through e1
    assert halfcircle_integral(v, E2, +1) == pytest.approx(2.0, abs=1e-14)
    assert halfcircle_integral(v, E2, -1) == pytest.approx(-2.0, abs=1e-14)
    assert check_vanishing_conditions(v) == (False, True)


def test_radon_of_constant_profile():
    v = CircleProfile.constant()
    for y in (0.5, 1.0, 3.0):
        assert radon_homog2(v, E1, y * E2) == pytest.approx(np.pi / y, rel=1e-13)


def test_radon_scaling_and_orientation():
    v = CircleProfile.from_fourier(0.2, a=[0.3, 0.1], b=[-0.4])
    w = np.array([np.cos(0.4), np.sin(0.4)])
    y = np.array([-w[1], w[0]])
    assert radon_homog2(v, w, 3 * y) == pytest.approx(radon_homog2(v, w, y) / 3, rel=1e-13)
    # reversing the line direction leaves the integral unchanged
    assert radon_homog2(v, -w, y) == pytest.approx(radon_homog2(v, w, y), rel=1e-13)


def test_radon_matches_line_quadrature():
    v = CircleProfile.from_fourier(0.1, a=[0.5, -0.2], b=[0.3, 0.7])
    for a, r in ((0.3, 1.0), (2.0, 2.5), (4.0, 0.7)):
        w = np.array([np.cos(a), np.sin(a)])
        y = r * np.array([w[1], -w[0]])
        assert radon_homog2(v, w, y) == pytest.approx(radon_homog2_direct(v, w, y), abs=1e-10)


def test_radon_rejects_bad_lines():
    v = CircleProfile.constant()
    with pytest.raises(ValueError):
        radon_homog2(v, E1, np.zeros(2))
    with pytest.raises(ValueError):
        radon_homog2(v, E1, np.array([1.0, 1.0]))


def test_from_fourier_values():
    v = CircleProfile.from_fourier(0.5, a=[0.0, 1.0, 0.2], b=[0.3, 0.0, -0.1])
    th = np.linspace(0, 2 * np.pi, 17)
    expected = 0.5 + np.cos(2 * th) + 0.2 * np.cos(3 * th) + 0.3 * np.sin(th) - 0.1 * np.sin(3 * th)
    np.testing.assert_allclose(v(th), expected, atol=1e-13)


def test_quadrupole_matches_fourier_form():
    w0 = np.array([np.cos(0.7), np.sin(0.7)])
    th = np.linspace(0, 2 * np.pi, 11)
    np.testing.assert_allclose(CircleProfile.quadrupole(w0)(th), np.cos(2 * (th - 0.7)), atol=1e-14)


@pytest.mark.parametrize("v, expected", [
    (CircleProfile.constant(), (True, False)),
    (CircleProfile.from_fourier(0.0, a=[0.0, 1.0]), (True, True)),
    (CircleProfile.from_fourier(0.0, b=[0.0, 0.0, 1.0]), (False, True)),
    (CircleProfile({}), (True, True)),
])
def test_vanishing_conditions(v, expected):
    assert check_vanishing_conditions(v) == expected


def test_verification_table_layout():
    rows = verification_table(CircleProfile.constant(), n_omega=8)
    assert len(rows) == 8
    for a, w1, w2, ip, im in rows:
        assert (w1, w2) == pytest.approx((np.cos(a), np.sin(a)))
        assert ip == pytest.approx(np.pi) and im == pytest.approx(np.pi)
