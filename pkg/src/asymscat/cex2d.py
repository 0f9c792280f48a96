"""Profiles on the circle whose order -2 extension has vanishing line integrals.

For ``V(x) = v(xhat) |x|^-2`` in the plane, the line ``y + t omega`` sweeps
``xhat`` over the half circle from ``-omega`` to ``omega`` that contains
``yhat``, and ``int V dt = |y|^-1 int_{half circle} v``.  All such
integrals vanish iff ``v`` is even and has zero mean.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np

from .core import AsymptoticScalarField, eval_poly
from .xray import xray_electric_batch

GAUSS_NODES = 64
TOL = 1e-12


@dataclass(frozen=True)
class CircleProfile:
    """Polynomial ``sum c_ab cos^a sin^b`` of the angle."""

    coefficients: dict

    def __post_init__(self):
        coefs = {(int(a), int(b)): float(c) for (a, b), c in dict(self.coefficients).items() if c != 0}
        object.__setattr__(self, "coefficients", coefs)

    @classmethod
    def constant(cls, c=1.0):
        return cls({(0, 0): c})

    @classmethod
    def quadrupole(cls, omega0=(1.0, 0.0)):
        """``2 <theta, omega0>^2 - 1``."""
        w1, w2 = np.asarray(omega0, dtype=float) / np.linalg.norm(omega0)
        return cls({(2, 0): 2 * w1 * w1, (1, 1): 4 * w1 * w2, (0, 2): 2 * w2 * w2, (0, 0): -1.0})

    @classmethod
    def from_fourier(cls, a0, a=(), b=()):
        """``a0 + sum_n a_n cos(n theta) + b_n sin(n theta)``, expanded through ``(cos + i sin)^n``."""
        coefs = {(0, 0): float(a0)}
        for n in range(1, max(len(a), len(b)) + 1):
            an = a[n - 1] if n - 1 < len(a) else 0.0
            bn = b[n - 1] if n - 1 < len(b) else 0.0
            for j in range(n + 1):
                # cos(n t) and sin(n t) are the real and imaginary parts of (cos + i sin)^n
                ij = 1j ** j
                key = (n - j, j)
                coefs[key] = coefs.get(key, 0.0) + comb(n, j) * (an * ij.real + bn * ij.imag)
        return cls(coefs)

    def __call__(self, theta):
        theta = np.asarray(theta, dtype=float)
        return self.on_vectors(np.stack([np.cos(theta), np.sin(theta)], axis=-1))

    def on_vectors(self, X):
        return eval_poly(self.coefficients, X)

    @property
    def degree(self):
        return max((a + b for a, b in self.coefficients), default=0)

    def field(self) -> AsymptoticScalarField:
        """``v(xhat) |x|^-2`` in the plane."""
        return AsymptoticScalarField.single(2.0, self.coefficients or {(0, 0): 0.0}, d=2)


def _angle(omega):
    omega = np.asarray(omega, dtype=float)
    return float(np.arctan2(omega[1], omega[0]))


def halfcircle_integral(v: CircleProfile, omega, orientation=+1, nodes=GAUSS_NODES) -> float:
    """Integral of ``v`` over the half circle from ``-omega`` to ``omega``.

    ``orientation=+1`` runs counter-clockwise (through ``omega`` rotated by
    -90 degrees), ``-1`` clockwise.
    """
    a = _angle(omega)
    lo = a - np.pi if orientation > 0 else a
    n = max(nodes, 2 * v.degree + 2)
    u, w = np.polynomial.legendre.leggauss(n)
    th = lo + 0.5 * np.pi * (u + 1)
    return float(0.5 * np.pi * np.sum(w * v(th)))


def radon_homog2(v: CircleProfile, omega, y) -> float:
    """``int v(xhat) |x|^-2`` along ``y + t omega`` via the half-circle formula."""
    omega = np.asarray(omega, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.linalg.norm(y)
    if r == 0:
        raise ValueError("line passes through the origin")
    if abs(omega @ y) > 1e-12 * max(r, 1.0):
        raise ValueError("y must be orthogonal to omega")
    # yhat = omega rotated by -90 degrees lies on the counter-clockwise half
    cw_normal = np.array([omega[1], -omega[0]])
    orientation = 1 if y @ cw_normal > 0 else -1
    return halfcircle_integral(v, omega, orientation) / r


def radon_homog2_direct(v: CircleProfile, omega, y) -> float:
    """Same integral by line quadrature of the order -2 field."""
    return float(xray_electric_batch(v.field(), np.atleast_2d(omega), np.atleast_2d(y))[0])


def check_vanishing_conditions(v: CircleProfile, n=256, tol=TOL):
    """``(even, zero_mean)``; the line integrals of ``v(xhat)|x|^-2`` all vanish iff both hold."""
    th = 2 * np.pi * np.arange(n) / n
    vals = v(th)
    scale = max(1.0, float(np.max(np.abs(vals))))
    even = bool(np.max(np.abs(vals - v(th + np.pi))) <= tol * scale)
    mean = 2 * np.pi * float(np.mean(vals))  # exact for trig degree < n
    return even, bool(abs(mean) <= tol * scale)


def verification_table(v: CircleProfile, n_omega=16):
    """Rows ``(angle, omega_1, omega_2, I_plus, I_minus)`` on ``n_omega`` directions."""
    rows = []
    for a in 2 * np.pi * np.arange(n_omega) / n_omega:
        w = np.array([np.cos(a), np.sin(a)])
        rows.append((float(a), float(w[0]), float(w[1]),
                     halfcircle_integral(v, w, +1), halfcircle_integral(v, w, -1)))
    return rows
