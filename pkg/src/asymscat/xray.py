"""Line integrals of potentials: electric and magnetic X-ray transforms.

Every line is written as ``y + t*omega`` with ``y`` in the hyperplane
orthogonal to ``omega``.  The substitution ``t = |y| tan(s)`` maps the line
onto ``(-pi/2, pi/2)``.  A homogeneous term of degree ``rho`` then becomes
``|y|**(1-rho) * cos(s)**(rho-2) * p(cos(s) yhat + sin(s) omega)``, which is
integrated with a Gauss-Jacobi rule carrying the ``cos**(rho-2)`` weight.
Fields without that structure fall back to Gauss-Legendre in ``s`` with
node doubling.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi

from .core import (AsymptoticScalarField, DivergentIntegralError, LineSpec, PowerSum)
from .fields import MagneticPotential, PowerVectorField, TwoFormField

QUAD_NODES = 128
QUAD_RTOL = 1e-11
MAX_NODES = 4096


def _jacobi_rule(rho, n):
    a = rho - 2.0
    u, w = roots_jacobi(n, a, a)
    s = 0.5 * np.pi * u
    # remaining smooth factor of cos(s)**(rho-2) after the Jacobi weight
    with np.errstate(divide="ignore", invalid="ignore"):
        smooth = (np.cos(s) / (1 - u * u)) ** (rho - 2.0)
    return s, 0.5 * np.pi * w * smooth


def _split_by_degree(ps: PowerSum) -> dict:
    """Group the terms of a power sum by homogeneity degree ``p - |alpha|``."""
    groups = {}
    for (e, p), c in ps.terms.items():
        q = round(p - sum(e), 12)
        groups.setdefault(q, {})[(e, p)] = c
    return {q: PowerSum(ps.d, t) for q, t in groups.items()}


def _lines(omegas, ys):
    omegas = np.atleast_2d(np.asarray(omegas, dtype=float))
    ys = np.atleast_2d(np.asarray(ys, dtype=float))
    omegas, ys = np.broadcast_arrays(omegas, ys)
    r = np.linalg.norm(ys, axis=-1)
    if np.any(r == 0):
        raise ValueError("line foot must be nonzero")
    return omegas, ys, r


def _homog_integral(ps_by_degree, omegas, ys, n):
    """Sum over degree groups of the Gauss-Jacobi line integral, shape ``(L,)``."""
    omegas, ys, r = _lines(omegas, ys)
    yhat = ys / r[:, None]
    out = np.zeros(len(r))
    for q, ps in ps_by_degree.items():
        if q <= 1:
            raise DivergentIntegralError(f"line integral diverges for degree {q} <= 1")
        s, w = _jacobi_rule(q, n)
        pts = np.cos(s)[None, :, None] * yhat[:, None, :] + np.sin(s)[None, :, None] * omegas[:, None, :]
        out += r ** (1.0 - q) * (ps(pts) @ w)
    return out


def _adaptive(integrand_of_s, n0=QUAD_NODES, rtol=QUAD_RTOL):
    """Gauss-Legendre on ``(-pi/2, pi/2)`` with node doubling; returns (value, nodes)."""
    prev = None
    n = n0
    while True:
        u, w = np.polynomial.legendre.leggauss(n)
        val = 0.5 * np.pi * (integrand_of_s(0.5 * np.pi * u) @ w)
        if prev is not None and np.all(np.abs(val - prev) <= rtol * np.maximum(np.abs(val), 1e-300)):
            return val, n
        if n >= MAX_NODES:
            return val, n
        prev, n = val, 2 * n


def _generic_line(f, omegas, ys, vector=False):
    omegas, ys, r = _lines(omegas, ys)

    def integrand(s):
        t = r[:, None] * np.tan(s)[None, :]
        pts = ys[:, None, :] + t[..., None] * omegas[:, None, :]
        vals = np.asarray(f(pts))
        if vector:
            vals = np.einsum("lnd,ld->ln", vals, omegas)
        return vals * (r[:, None] / np.cos(s)[None, :] ** 2)

    return _adaptive(integrand)[0]


def _as_powersum_scalar(V):
    if isinstance(V, AsymptoticScalarField):
        if any(g <= 1 for g in V.degrees):
            raise DivergentIntegralError("electric degrees must exceed 1")
        return V.powersum()
    if isinstance(V, PowerSum):
        return V
    return None


def as_vector_field(A):
    """Normalize the supported magnetic inputs to a vector-field object (or None)."""
    if A is None:
        return None
    if isinstance(A, TwoFormField):
        return None if A.is_zero() else MagneticPotential(A).far_field()
    if isinstance(A, MagneticPotential):
        return A.far_field()
    return A


def xray_electric_batch(V, omegas, ys, nodes=QUAD_NODES) -> np.ndarray:
    """``int V(y + t omega) dt`` for a batch of lines."""
    if V is None:
        return np.zeros(len(np.atleast_2d(ys)))
    ps = _as_powersum_scalar(V)
    if ps is not None:
        if not ps:
            return np.zeros(np.broadcast_shapes(np.shape(np.atleast_2d(omegas)), np.shape(np.atleast_2d(ys)))[0])
        groups = _split_by_degree(ps)
        a = _homog_integral(groups, omegas, ys, nodes)
        b = _homog_integral(groups, omegas, ys, 2 * nodes)
        if np.any(np.abs(a - b) > QUAD_RTOL * np.maximum(np.abs(b), 1e-300)):
            b = _homog_integral(groups, omegas, ys, 8 * nodes)
        return b
    return _generic_line(V, omegas, ys)


def xray_magnetic_batch(A, omegas, ys, nodes=QUAD_NODES) -> np.ndarray:
    """``int <omega, A(y + t omega)> dt`` for a batch of lines."""
    omegas, ys, r = _lines(omegas, ys)
    if isinstance(A, MagneticPotential) and np.any(r < 1.0):
        return _generic_line(A, omegas, ys, vector=True)
    A = as_vector_field(A)
    if A is None:
        return np.zeros(len(r))
    if isinstance(A, PowerVectorField):
        out = np.zeros(len(r))
        # each line has its own omega, so contract per distinct direction
        uniq, inv = np.unique(omegas, axis=0, return_inverse=True)
        inv = np.ravel(inv)
        for k, om in enumerate(uniq):
            sel = inv == k
            ps = PowerSum(A.d)
            for i, c in enumerate(A.components):
                if om[i] != 0:
                    ps = ps + c.scale(om[i])
            if ps:
                groups = _split_by_degree(ps)
                a = _homog_integral(groups, omegas[sel], ys[sel], nodes)
                b = _homog_integral(groups, omegas[sel], ys[sel], 2 * nodes)
                if np.any(np.abs(a - b) > QUAD_RTOL * np.maximum(np.abs(b), 1e-300)):
                    b = _homog_integral(groups, omegas[sel], ys[sel], 8 * nodes)
                out[sel] = b
        return out
    return _generic_line(A, omegas, ys, vector=True)


def xray_electric(V, line: LineSpec) -> float:
    """Electric X-ray transform ``R_e`` along one line."""
    return float(xray_electric_batch(V, line.direction[None], line.foot[None])[0])


def xray_magnetic(A, line: LineSpec) -> float:
    """Magnetic X-ray transform ``R_m = int <omega, A> dt`` along one line."""
    return float(xray_magnetic_batch(A, line.direction[None], line.foot[None])[0])


@dataclass(frozen=True)
class XRayValue:
    line: LineSpec
    electric: float
    magnetic: float
    born: complex
    energy: float

    @property
    def k(self):
        return np.sqrt(self.energy)


def born_from_parts(electric, magnetic, lam):
    k = np.sqrt(lam)
    return (np.asarray(electric) - 2 * k * np.asarray(magnetic)) / (2j * k)


def xray_value(V, A, line: LineSpec, lam: float) -> XRayValue:
    if lam <= 0:
        raise ValueError("energy must be positive")
    e = xray_electric(V, line)
    m = xray_magnetic(A, line)
    return XRayValue(line, e, m, complex(born_from_parts(e, m, lam)), lam)


def born_symbol(V, A, line: LineSpec, lam: float) -> complex:
    """``(2ik)^-1 int (V - 2k <omega, A>) dt`` along the line."""
    return xray_value(V, A, line, lam).born


def born_symbol_direct(V, A, line: LineSpec, lam: float) -> complex:
    """Same quantity from a single Gauss-Legendre pass over the combined integrand."""
    k = np.sqrt(lam)
    Af = as_vector_field(A)
    om, y = line.direction, line.foot

    def f(pts):
        v = np.zeros(pts.shape[:-1]) if V is None else np.asarray(V(pts), dtype=float)
        if Af is not None:
            v = v - 2 * k * np.einsum("...d,d->...", Af(pts), om)
        return v

    return complex(_generic_line(f, om[None], y[None])[0] / (2j * k))


def born_batch(V, A, omegas, ys, lam) -> np.ndarray:
    return born_from_parts(xray_electric_batch(V, omegas, ys), xray_magnetic_batch(A, omegas, ys), lam)
