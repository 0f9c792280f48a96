"""Magnetic two-forms and the short-range gauge built from them.

A homogeneous two-form ``F`` is singular at the origin, so the integrals
over ``(0, inf)`` that define the gauge need a smooth realization of ``F``.
We use ``F_smooth = curl(eta * A0)``, where ``A0`` is a homogeneous potential
of ``F`` (by default the regular potential itself) and ``eta`` the fixed
cutoff.  ``F_smooth`` is closed, smooth, vanishes for ``|x| < 0.5`` and
equals ``F`` for ``|x| >= 1``.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .core import (AsymptoticScalarField, PowerSum, UnsupportedDimensionError, eval_powersums,
                   OriginEvaluationError, normalize)

ETA_INNER = 0.5
ETA_OUTER = 1.0
# nodes for the radial integrals over the cutoff shell [0.5, 1]
_SHELL_NODES = 160


# ---------------------------------------------------------------------------
# the cutoff

def _psi(t):
    out = np.zeros_like(t)
    m = t > 0
    out[m] = np.exp(-1.0 / t[m])
    return out


def _dpsi(t):
    out = np.zeros_like(t)
    m = t > 0
    out[m] = np.exp(-1.0 / t[m]) / t[m] ** 2
    return out


def _step(t):
    t = np.asarray(t, dtype=float)
    a, b = _psi(t), _psi(1 - t)
    return a / (a + b)


def _dstep(t):
    t = np.asarray(t, dtype=float)
    a, b = _psi(t), _psi(1 - t)
    da, db = _dpsi(t), -_dpsi(1 - t)
    return (da * b - a * db) / (a + b) ** 2


def eta(x) -> np.ndarray:
    """Smooth radial step: 0 for ``|x| <= 0.5``, 1 for ``|x| >= 1``."""
    r = np.linalg.norm(np.asarray(x, dtype=float), axis=-1)
    return _step((r - ETA_INNER) / (ETA_OUTER - ETA_INNER))


def grad_eta(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    g = _dstep((r - ETA_INNER) / (ETA_OUTER - ETA_INNER)) / (ETA_OUTER - ETA_INNER)
    with np.errstate(invalid="ignore", divide="ignore"):
        out = (g / r)[..., None] * x
    return np.where(np.isfinite(out), out, 0.0)


# ---------------------------------------------------------------------------
# vector fields with closed-form derivatives

class PowerVectorField:
    """Vector field whose components are :class:`PowerSum` objects.

    ``valid_radius`` records where the closed form represents the intended
    field (the magnetic gauge equals its closed form only for ``|x| >= 1``).
    """

    def __init__(self, components, valid_radius=0.0):
        self.components = list(components)
        self.d = len(self.components)
        self.valid_radius = valid_radius
        self._jac = None
        self._lap = None
        self._contracted = None

    @classmethod
    def zero(cls, d):
        return cls([PowerSum(d) for _ in range(d)])

    @classmethod
    def gradient_of(cls, phi: PowerSum, valid_radius=0.0):
        return cls([phi.derivative(i) for i in range(phi.d)], valid_radius)

    def __bool__(self):
        return any(bool(c) for c in self.components)

    def __add__(self, other):
        if isinstance(other, PowerVectorField):
            return PowerVectorField([a + b for a, b in zip(self.components, other.components)],
                                    max(self.valid_radius, other.valid_radius))
        return SumVectorField([self, other])

    def scaled(self, s):
        return PowerVectorField([c.scale(s) for c in self.components], self.valid_radius)

    def _check(self, X):
        if self.valid_radius and np.any(np.linalg.norm(X, axis=-1) < self.valid_radius * (1 - 1e-12)):
            raise OriginEvaluationError(
                f"closed form only valid for |x| >= {self.valid_radius}")

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        self._check(X)
        return np.stack(eval_powersums(self.components, X), axis=-1)

    def _derived(self):
        if self._jac is None:
            self._jac = [[c.derivative(j) for j in range(self.d)] for c in self.components]
            self._lap = [c.laplacian() for c in self.components]

    def jacobian(self, X):
        """``J[..., i, j] = d A_i / d x_j``."""
        X = np.asarray(X, dtype=float)
        self._check(X)
        self._derived()
        vals = eval_powersums([p for row in self._jac for p in row], X)
        return np.stack(vals, axis=-1).reshape(X.shape[:-1] + (self.d, self.d))

    def laplacian(self, X):
        X = np.asarray(X, dtype=float)
        self._check(X)
        self._derived()
        return np.stack(eval_powersums(self._lap, X), axis=-1)

    def contracted(self, xi):
        """Power sums ``<xi, A>``, ``(J^T - J) xi`` (d of them), ``div A`` and ``<xi, Delta A>``."""
        key = tuple(np.round(np.asarray(xi, dtype=float), 15))
        if self._contracted is None or len(self._contracted) > 4096:
            self._contracted = {}
        if key not in self._contracted:
            self._derived()
            d = self.d
            a = PowerSum(d)
            lap = PowerSum(d)
            for i in range(d):
                if xi[i]:
                    a = a + self.components[i].scale(xi[i])
                    lap = lap + self._lap[i].scale(xi[i])
            q = []
            for j in range(d):
                s = a.derivative(j)
                for i in range(d):
                    if xi[i]:
                        s = s - self._jac[j][i].scale(xi[i])
                q.append(s)
            div = PowerSum(d)
            for i in range(d):
                div = div + self._jac[i][i]
            self._contracted[key] = [a, *q, div, lap]
        return self._contracted[key]

    def value_jacobian_laplacian(self, X):
        """``(A, J, Delta A)`` from one shared evaluation."""
        X = np.asarray(X, dtype=float)
        self._check(X)
        self._derived()
        d = self.d
        flat = self.components + [p for row in self._jac for p in row] + self._lap
        vals = np.stack(eval_powersums(flat, X), axis=-1)
        return (vals[..., :d], vals[..., d:d + d * d].reshape(X.shape[:-1] + (d, d)), vals[..., d + d * d:])

    def divergence(self, X):
        return np.trace(self.jacobian(X), axis1=-2, axis2=-1)

    def curl_powersums(self):
        """Closed-form ``F^(ij) = d_i A_j - d_j A_i`` for ``i < j``."""
        return {(i, j): self.components[j].derivative(i) - self.components[i].derivative(j)
                for i, j in itertools.combinations(range(self.d), 2)}


class SumVectorField:
    """Sum of vector fields sharing the evaluation protocol."""

    def __init__(self, parts):
        self.parts = list(parts)
        self.d = self.parts[0].d

    def __add__(self, other):
        return SumVectorField(self.parts + [other])

    def __call__(self, X):
        return sum(p(X) for p in self.parts)

    def jacobian(self, X):
        return sum(p.jacobian(X) for p in self.parts)

    def laplacian(self, X):
        return sum(p.laplacian(X) for p in self.parts)

    def divergence(self, X):
        return sum(p.divergence(X) for p in self.parts)


class GaussianGradient:
    """``c * grad exp(-|x|^2 / s^2)``, a rapidly decaying pure gauge."""

    def __init__(self, d, c=1.0, s=1.0):
        self.d, self.c, self.s = d, c, s

    def phi(self, X):
        X = np.asarray(X, dtype=float)
        return self.c * np.exp(-np.sum(X**2, axis=-1) / self.s**2)

    def __call__(self, X):
        X = np.asarray(X, dtype=float)
        return (-2 / self.s**2) * self.phi(X)[..., None] * X

    def jacobian(self, X):
        X = np.asarray(X, dtype=float)
        a = 2 / self.s**2
        g = self.phi(X)[..., None, None]
        return g * (a * a * X[..., :, None] * X[..., None, :] - a * np.eye(self.d))

    def laplacian(self, X):
        X = np.asarray(X, dtype=float)
        a = 2 / self.s**2
        r2 = np.sum(X**2, axis=-1)
        # grad of (Laplacian of phi) = phi * (a^2 r^2 - a d) * (-a x) + phi * 2 a^2 x
        lap_phi_grad = self.phi(X) * (-a * (a * a * r2 - a * self.d) + 2 * a * a)
        return lap_phi_grad[..., None] * X

    def divergence(self, X):
        X = np.asarray(X, dtype=float)
        a = 2 / self.s**2
        return self.phi(X) * (a * a * np.sum(X**2, axis=-1) - a * self.d)


# ---------------------------------------------------------------------------
# two-forms

@dataclass(frozen=True)
class TwoFormField:
    """Antisymmetric matrix of asymptotic fields, stored for ``i < j``.

    ``core_potential`` optionally gives a homogeneous potential ``A0`` with
    ``curl A0 = F``; it only affects the smooth realization inside the unit
    ball (and hence ``a_inf`` and ``u_potential``), never the far field.
    """

    d: int
    components: dict = field(default_factory=dict)
    core_potential: PowerVectorField | None = None

    def __post_init__(self):
        comps = {}
        for (i, j), f in dict(self.components).items():
            if i == j:
                raise ValueError("diagonal components of a two-form are zero")
            if not isinstance(f, AsymptoticScalarField):
                raise TypeError("components must be AsymptoticScalarField")
            if f.d != self.d:
                raise ValueError("component dimension mismatch")
            if any(g <= 2 for g in f.degrees):
                raise ValueError("magnetic field degrees must exceed 2")
            if i > j:
                i, j, f = j, i, f.scaled(-1.0)
            comps[(i, j)] = comps[(i, j)] + f if (i, j) in comps else f
        object.__setattr__(self, "components", comps)

    @classmethod
    def zero(cls, d=3):
        return cls(d, {})

    @classmethod
    def from_potential(cls, A: PowerVectorField, degree: float, profile_degree: int = 6,
                       keep_core=True):
        """Homogeneous two-form ``curl A`` for a homogeneous potential of order ``-degree``.

        Each component ``c x^a |x|^-p`` of the curl is rewritten as a profile
        monomial ``xhat^a`` of the field degree ``degree + 1``.
        """
        comps = {}
        for key, ps in A.curl_powersums().items():
            prof = {}
            for (e, p), c in ps.terms.items():
                if abs(p - sum(e) - (degree + 1)) > 1e-9:
                    raise ValueError("potential is not homogeneous of the stated order")
                prof[e] = prof.get(e, 0.0) + c
            prof = {e: c for e, c in prof.items() if abs(c) > 0}
            if prof:
                comps[key] = AsymptoticScalarField.single(degree + 1, prof, d=A.d)
        return cls(A.d, comps, A if keep_core else None)

    def is_zero(self):
        return all(f.is_zero() for f in self.components.values())

    @property
    def degrees(self):
        return sorted({g for f in self.components.values() for g in f.degrees})

    def component(self, i, j) -> AsymptoticScalarField:
        if i == j:
            return AsymptoticScalarField.zero(self.d)
        if (i, j) in self.components:
            return self.components[(i, j)]
        if (j, i) in self.components:
            return self.components[(j, i)].scaled(-1.0)
        return AsymptoticScalarField.zero(self.d)

    def matrix(self, X) -> np.ndarray:
        """Homogeneous field values, shape ``X.shape[:-1] + (d, d)``."""
        X = np.asarray(X, dtype=float)
        out = np.zeros(X.shape[:-1] + (self.d, self.d))
        for (i, j), f in self.components.items():
            v = f.powersum()(X)
            out[..., i, j] = v
            out[..., j, i] = -v
        return out

    def scaled(self, s):
        core = self.core_potential.scaled(s) if self.core_potential is not None else None
        return TwoFormField(self.d, {k: f.scaled(s) for k, f in self.components.items()}, core)

    def __add__(self, other: "TwoFormField"):
        comps = dict(self.components)
        for k, f in other.components.items():
            comps[k] = comps[k] + f if k in comps else f
        core = None
        if self.core_potential is not None or other.core_potential is not None:
            a = self.core_potential or regular_potential(self)
            b = other.core_potential or regular_potential(other)
            core = a + b
        return TwoFormField(self.d, comps, core)

    # -- smooth realization -------------------------------------------------

    def core(self) -> PowerVectorField:
        return self.core_potential if self.core_potential is not None else regular_potential(self)

    def smooth_matrix(self, X) -> np.ndarray:
        """``curl(eta * A0)``: equals :meth:`matrix` for ``|x| >= 1``, zero for ``|x| < 0.5``."""
        X = np.asarray(X, dtype=float)
        r = np.linalg.norm(X, axis=-1)
        out = np.zeros(X.shape[:-1] + (self.d, self.d))
        shell = (r > ETA_INNER) & (r < ETA_OUTER)
        far = r >= ETA_OUTER
        if far.any():
            out[far] = self.matrix(X[far])
        if shell.any():
            Xs = X[shell]
            A0 = self.core()
            F0 = np.zeros(Xs.shape[:-1] + (self.d, self.d))
            for (i, j), ps in A0.curl_powersums().items():
                v = ps(Xs)
                F0[..., i, j] = v
                F0[..., j, i] = -v
            a = A0(Xs)
            g = grad_eta(Xs)
            out[shell] = (eta(Xs)[..., None, None] * F0
                          + g[..., :, None] * a[..., None, :] - a[..., :, None] * g[..., None, :])
        return out


def regular_potential(F: TwoFormField) -> PowerVectorField:
    """Closed form of ``A_reg`` for the homogeneous field, valid for ``|x| >= 1``.

    For a term of degree ``r``: ``A_reg^(i)(x) = sum_j F^(ij)(x) x_j / (r - 2)``.
    """
    d = F.d
    comps = [PowerSum(d) for _ in range(d)]
    for (i, j), f in F.components.items():
        for t in f.terms:
            ps = t.to_powersum(d)
            s = 1.0 / (t.degree - 2.0)
            comps[i] = comps[i] + ps.times_coordinate(j, s)
            comps[j] = comps[j] + ps.times_coordinate(i, -s)
    return PowerVectorField(comps)


def _radial_moment(F: TwoFormField, xhat, lower):
    """``int_lower^inf sigma F_smooth(sigma xhat) xhat d sigma`` per row of ``xhat``.

    The shell ``[0.5, 1]`` is done by Gauss-Legendre, the homogeneous tail
    beyond 1 in closed form.
    """
    xhat = np.atleast_2d(xhat)
    lower = np.broadcast_to(np.asarray(lower, dtype=float), xhat.shape[:1])
    out = np.zeros_like(xhat)
    # tail from max(lower, 1)
    t0 = np.maximum(lower, ETA_OUTER)
    for (i, j), f in F.components.items():
        for t in f.terms:
            prof = t.profile_at(xhat)
            fac = prof * t0 ** (2.0 - t.degree) / (t.degree - 2.0)
            out[:, i] += fac * xhat[:, j]
            out[:, j] -= fac * xhat[:, i]
    lo = np.clip(lower, ETA_INNER, ETA_OUTER)
    need = lo < ETA_OUTER
    if need.any():
        u, w = np.polynomial.legendre.leggauss(_SHELL_NODES)
        xh = xhat[need]
        a, b = lo[need][:, None], ETA_OUTER
        sig = 0.5 * (b - a) * (u[None, :] + 1) + a
        wt = 0.5 * (b - a) * w[None, :]
        pts = sig[..., None] * xh[:, None, :]
        M = F.smooth_matrix(pts)
        out[need] += np.einsum("nk,nk,nkij,nj->ni", wt, sig, M, xh)
    return out


def _split(x):
    x = np.asarray(x, dtype=float)
    r = np.linalg.norm(x, axis=-1)
    if np.any(r == 0):
        raise OriginEvaluationError("gauge potentials are undefined at x = 0")
    return x, r, x / r[..., None]


def a_reg(F: TwoFormField, x) -> np.ndarray:
    """``A_reg^(i)(x) = int_1^inf s sum_j F^(ij)(s x) x_j ds`` (smooth realization)."""
    x, r, xh = _split(x)
    shape = x.shape
    r2, xh2 = r.reshape(-1), xh.reshape(-1, F.d)
    out = _radial_moment(F, xh2, r2) / r2[:, None]
    return out.reshape(shape)


def a_reg_quad(F: TwoFormField, x, epsabs=1e-13, epsrel=1e-12) -> np.ndarray:
    """``A_reg`` by adaptive quadrature in ``u = 1/s``; an independent check of :func:`a_reg`."""
    from scipy.integrate import quad_vec
    x = np.asarray(x, dtype=float)

    def integrand(u):
        if u == 0:
            return np.zeros(F.d)
        M = F.smooth_matrix(x / u)
        return (M @ x) / u**3

    val, _ = quad_vec(integrand, 0.0, 1.0, epsabs=epsabs, epsrel=epsrel,
                      points=[min(1.0, np.linalg.norm(x) / ETA_INNER), np.linalg.norm(x)]
                      if np.linalg.norm(x) < 1 else None)
    return val


def a_inf(F: TwoFormField, x) -> np.ndarray:
    """``A_inf(x) = -int_0^inf s F_smooth(s x) x ds``; homogeneous of order -1."""
    x, r, xh = _split(x)
    shape = x.shape
    xh2, r2 = xh.reshape(-1, F.d), r.reshape(-1)
    out = -_radial_moment(F, xh2, 0.0) / r2[:, None]
    return out.reshape(shape)


def _arc(a, b, n):
    """Gauss-Legendre nodes/weights of the great-circle arc from ``a`` to ``b``."""
    c = np.clip(np.dot(a, b), -1.0, 1.0)
    ang = np.arccos(c)
    u, w = np.polynomial.legendre.leggauss(n)
    t = 0.5 * ang * (u + 1)
    if ang < 1e-14:
        return np.zeros((0, a.size)), np.zeros((0, a.size)), np.zeros(0)
    perp = b - c * a
    perp = perp / np.linalg.norm(perp)
    pts = np.cos(t)[:, None] * a + np.sin(t)[:, None] * perp
    tang = -np.sin(t)[:, None] * a + np.cos(t)[:, None] * perp
    return pts, tang, 0.5 * ang * w


def u_potential(F: TwoFormField, x, x0=None, via=None, nodes=64) -> float:
    """``U(x) = int_{x0}^{x} <A_inf, dy>`` along great-circle arcs on the unit sphere.

    ``A_inf`` is tangential and of order -1, so ``U`` is homogeneous of
    degree 0 and the path can be moved onto the unit sphere.  ``via`` forces
    an intermediate point (used to check path independence).
    """
    d = F.d
    if d < 3:
        raise UnsupportedDimensionError("U is path independent only for d >= 3")
    x = np.asarray(x, dtype=float)
    x0 = np.eye(d)[0] if x0 is None else np.asarray(x0, dtype=float)
    if np.linalg.norm(x) == 0 or np.linalg.norm(x0) == 0:
        raise OriginEvaluationError("U needs x != 0 and x0 != 0")
    a, b = normalize(x0), normalize(x)
    if via is None and np.dot(a, b) < -1 + 1e-10:
        # antipodal: go through a point orthogonal to both
        e = np.eye(d)[np.argmin(np.abs(a))]
        via = normalize(e - np.dot(e, a) * a)
    legs = [a, normalize(via), b] if via is not None else [a, b]
    total = 0.0
    for p, q in zip(legs, legs[1:]):
        if np.dot(p, q) < -1 + 1e-10:
            raise ValueError("degenerate antipodal arc")
        pts, tang, w = _arc(p, q, nodes)
        if w.size:
            total += float(np.sum(w * np.einsum("ni,ni->n", a_inf(F, pts), tang)))
    return total


@dataclass(frozen=True)
class MagneticPotential:
    """Short-range potential ``A = A_reg + (1 - eta) A_inf - U grad eta`` of a two-form."""

    source: TwoFormField
    base_point: np.ndarray | None = None

    def __post_init__(self):
        bp = np.eye(self.source.d)[0] if self.base_point is None else np.asarray(self.base_point, float)
        object.__setattr__(self, "base_point", bp)

    @property
    def d(self):
        return self.source.d

    def far_field(self) -> PowerVectorField:
        """Closed form of ``A``; equal to it wherever ``|x| >= 1``."""
        f = regular_potential(self.source)
        f.valid_radius = ETA_OUTER
        return f

    def __call__(self, x) -> np.ndarray:
        return build_A(self.source, x, self.base_point)


def build_A(F: TwoFormField, x, x0=None) -> np.ndarray:
    """The short-range magnetic potential at points ``x`` (shape ``(..., d)``)."""
    x, r, xh = _split(x)
    shape = x.shape
    X = x.reshape(-1, F.d)
    R = r.reshape(-1)
    out = a_reg(F, X)
    inner = R < ETA_OUTER
    if inner.any():
        Xi = X[inner]
        e = eta(Xi)
        out[inner] += (1 - e)[:, None] * a_inf(F, Xi)
        g = grad_eta(Xi)
        gmask = np.linalg.norm(g, axis=-1) > 0
        if gmask.any() and F.d >= 3:
            U = np.array([u_potential(F, p, x0) for p in Xi[gmask]])
            sub = out[inner]
            sub[gmask] -= U[:, None] * g[gmask]
            out[inner] = sub
    return out.reshape(shape)


# ---------------------------------------------------------------------------
# finite-difference checks

def curl_of(A, x, h=None) -> np.ndarray:
    """Central-difference ``F^(ij) = d_i A_j - d_j A_i`` of a vector field callable."""
    x = np.asarray(x, dtype=float)
    d = x.size
    if h is None:
        h = 1e-4 * max(np.linalg.norm(x), 1.0)
    J = np.zeros((d, d))  # J[i, j] = d_i A_j
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        J[i] = (np.asarray(A(x + e)) - np.asarray(A(x - e))) / (2 * h)
    return J - J.T


def check_closed(F, points, h=None) -> float:
    """Max over points and index triples of ``|d_i F^jk + d_j F^ki + d_k F^ij|``.

    ``F`` is a :class:`TwoFormField` or a callable returning ``(d, d)`` matrices.
    """
    fmat = F.matrix if isinstance(F, TwoFormField) else F
    worst = 0.0
    for p in np.atleast_2d(np.asarray(points, dtype=float)):
        d = p.size
        step = h if h is not None else 1e-4 * max(np.linalg.norm(p), 1.0)
        D = []
        for i in range(d):
            e = np.zeros(d)
            e[i] = step
            D.append((np.asarray(fmat(p + e)) - np.asarray(fmat(p - e))) / (2 * step))
        for i, j, k in itertools.combinations(range(d), 3):
            v = D[i][j, k] + D[j][k, i] + D[k][i, j]
            worst = max(worst, abs(v))
    return worst
