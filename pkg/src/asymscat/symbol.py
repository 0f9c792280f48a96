"""Forward engine: approximate solutions, amplitude and right symbol.

Rays
----
A ray ``x + t xi`` (``t >= 0``, sign +) or ``x - t xi`` (sign -) lies on the
line through the foot ``p = x - <x, xi> xi``.  Points of that line are
written ``p + |p| tan(s) xi``.  Each ray is sampled at Chebyshev nodes in
``s``; cumulative integrals from a node to the far end of the ray are
applied as a fixed matrix, so the nested integrals of the transport
recursion cost one matrix product each.

For sign + the phase gradient is ``-Tail(J^T xi)`` and ``A - grad Phi`` is
``Tail((J^T - J) xi)``; for sign - the head integrals play the same role.
Here ``J[i, j] = d_j A_i``.
"""
from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import (AsymptoticScalarField, as_direction, eval_powersums,
                   normalize, plane_basis, sphere_grid)
from .xray import as_vector_field, born_batch

RAY_NODES = 48
# fourth-order central first derivative along omega0
Z_OFFSETS = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
Z_WEIGHTS = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
Z_CENTER = 2


# ---------------------------------------------------------------------------
# ray quadrature

class RayRule:
    """Chebyshev nodes on [-1, 1] with Fejer weights and cumulative-integral matrices."""

    _cache: dict = {}

    def __new__(cls, n=RAY_NODES):
        if n not in cls._cache:
            obj = super().__new__(cls)
            obj._build(n)
            cls._cache[n] = obj
        return cls._cache[n]

    def _build(self, n):
        C = np.polynomial.chebyshev
        u = np.cos(np.pi * (2 * np.arange(n) + 1) / (2 * n))[::-1]
        coef = np.linalg.inv(C.chebvander(u, n - 1))  # columns: Lagrange basis coefficients
        anti = C.chebint(coef, lbnd=-1, axis=0)
        self.n = n
        self.u = u
        self.head = C.chebval(u, anti).T  # head[i, j] = int_{-1}^{u_i} l_j
        self.w = C.chebval(1.0, anti)
        self.tail = self.w[None, :] - self.head


class _Fields:
    """Uniform evaluation interface over the accepted V and A inputs."""

    def __init__(self, V, A):
        if isinstance(V, AsymptoticScalarField):
            V = None if V.is_zero() else V.powersum()
        self.V = V
        self.A = as_vector_field(A)
        if self.A is not None and hasattr(self.A, "__bool__") and not bool(self.A):
            self.A = None

    def v(self, X):
        if self.V is None:
            return np.zeros(X.shape[:-1])
        return np.asarray(self.V(X), dtype=float)


def solve_rays(fields: _Fields, X, Xi, sign, rule: RayRule, keep_nodes=False):
    """Phase and first transport coefficient for a batch of rays.

    Returns ``(phi, b1)`` at the ray starts, plus a dict of node data when
    ``keep_nodes`` is set (used by the higher transport orders).
    """
    X = np.asarray(X, dtype=float)
    Xi = np.asarray(Xi, dtype=float)
    tau0 = np.einsum("rd,rd->r", X, Xi)
    P = X - tau0[:, None] * Xi
    rp = np.linalg.norm(P, axis=-1)
    if np.any(rp == 0):
        raise ValueError("ray passes through the origin")
    s0 = np.arctan2(tau0, rp)
    if sign > 0:
        sa, sb = s0, np.full_like(s0, 0.5 * np.pi)
    else:
        sa, sb = np.full_like(s0, -0.5 * np.pi), s0
    half = 0.5 * (sb - sa)
    S = sa[:, None] + half[:, None] * (rule.u[None, :] + 1)
    tau = rp[:, None] * np.tan(S)
    pts = P[:, None, :] + tau[..., None] * Xi[:, None, :]
    dt = rp[:, None] / np.cos(S) ** 2 * half[:, None]  # dt/du
    full = lambda g: g @ rule.w
    f0 = fields.v(pts)
    phi = np.zeros(len(X))
    node = {}
    if fields.A is not None:
        A = fields.A
        if hasattr(A, "contracted"):
            gphi, q, divA, glap = _contracted_parts(A, pts, Xi)
        else:
            Av, J, lapA = A(pts), A.jacobian(pts), A.laplacian(pts)
            divA = np.trace(J, axis1=-2, axis2=-1)
            gphi = np.sum(Av * Xi[:, None, :], axis=-1)
            # (J^T - J) xi, contracted with batched matmul rather than einsum
            q = (Xi[:, None, None, :] @ J)[..., 0, :] - (J @ Xi[:, None, :, None])[..., 0]
            glap = np.sum(lapA * Xi[:, None, :], axis=-1)
        gphi = gphi * dt
        q = q * dt[..., None]
        glap = glap * dt
        if sign > 0:
            phi = -full(gphi)
            At = rule.tail @ q
            lapPhi = -glap @ rule.tail.T
        else:
            phi = full(gphi)
            At = -(rule.head @ q)
            lapPhi = glap @ rule.head.T
        f0 = f0 + np.sum(At * At, axis=-1) + 1j * (divA - lapPhi)
        node.update(A_tilde=At)
    b1 = -sign * full(f0 * dt)
    if keep_nodes:
        node.update(points=pts, dt=dt, coeff=f0)
        return phi, b1, node
    return phi, b1


def _contracted_parts(A, pts, Xi):
    """Ray-direction contractions of a closed-form potential, evaluated per distinct direction."""
    R, n, d = pts.shape
    gphi = np.empty((R, n))
    q = np.empty((R, n, d))
    divA = np.empty((R, n))
    glap = np.empty((R, n))
    uniq, inv = np.unique(Xi, axis=0, return_inverse=True)
    inv = np.ravel(inv)
    for k, xi in enumerate(uniq):
        sel = np.flatnonzero(inv == k)
        vals = eval_powersums(A.contracted(xi), pts[sel])
        gphi[sel] = vals[0]
        for j in range(d):
            q[sel, :, j] = vals[1 + j]
        divA[sel] = vals[1 + d]
        glap[sel] = vals[2 + d]
    return gphi, q, divA, glap


def _fd_offsets(d, h):
    offs = [np.zeros(d)]
    for i in range(d):
        e = np.zeros(d)
        e[i] = h
        offs += [e, -e]
    return np.array(offs)


def transport(fields: _Fields, X, Xi, sign, n_transport, rule: RayRule, fd_step=2e-3):
    """Phase and coefficients ``b^(1..N)`` at the ray starts.

    Orders above one differentiate ``b^(n)`` by central differences on
    parallel rays (step ``fd_step * |p|``); this is the slow path.
    """
    if n_transport <= 1:
        phi, b1 = solve_rays(fields, X, Xi, sign, rule)
        return phi, ([b1] if n_transport == 1 else [])
    phi, b1, node = solve_rays(fields, X, Xi, sign, rule, keep_nodes=True)
    bs = [b1]
    R, n, d = node["points"].shape
    pts = node["points"].reshape(-1, d)
    h = fd_step * np.linalg.norm(pts, axis=-1)
    offs = _fd_offsets(d, 1.0)
    stencil = pts[:, None, :] + h[:, None, None] * offs[None]
    xi_rep = np.repeat(Xi, n, axis=0)
    _, sub = transport(fields, stencil.reshape(-1, d), np.repeat(xi_rep, len(offs), axis=0),
                       sign, n_transport - 1, rule, fd_step)
    At = node.get("A_tilde")
    for m in range(1, n_transport):
        b = sub[m - 1].reshape(-1, len(offs))
        grad = (b[:, 1::2] - b[:, 2::2]) / (2 * h[:, None])
        lap = (b[:, 1::2] + b[:, 2::2] - 2 * b[:, :1]).sum(axis=1) / h**2
        f = -lap + node["coeff"].reshape(-1) * b[:, 0]
        if At is not None:
            f = f + 2j * np.einsum("nd,nd->n", At.reshape(-1, d), grad)
        bs.append(-sign * (f.reshape(R, n) * node["dt"]) @ rule.w)
    return phi, bs


def delta_h(fields, X, Xi, sign, k, n_transport, rule):
    """``h - 1`` with ``h = exp(i Phi) sum_n (2ik)^-n b^(n)``, computed without cancellation."""
    phi, bs = transport(fields, X, Xi, sign, n_transport, rule)
    beta = np.zeros(len(phi), dtype=complex)
    for n, b in enumerate(bs, start=1):
        beta = beta + b / (2j * k) ** n
    return np.expm1(1j * phi) * (1 + beta) + beta


# ---------------------------------------------------------------------------
# parameters

@dataclass(frozen=True)
class AmplitudeParams:
    """Truncation and discretization knobs of the forward engine.

    ``base_direction`` of None centers the chart at each evaluation direction.
    Steps: ``z_step`` and ``y_step`` are relative to ``|y|``; ``eta_step`` is absolute.
    """

    base_direction: np.ndarray | None = None
    aperture: float = 0.3
    n_transport: int = 1
    m_alpha: int = 2
    ray_nodes: int = RAY_NODES
    z_step: float = 2e-3
    y_step: float = 5e-2
    eta_step: float = 5e-2

    def __post_init__(self):
        if not 0 < self.aperture < 1:
            raise ValueError("aperture must lie in (0, 1)")
        if self.n_transport < 0 or self.m_alpha < 0:
            raise ValueError("truncation orders must be nonnegative")
        if self.base_direction is not None:
            object.__setattr__(self, "base_direction", as_direction(self.base_direction))


def _aperture_check(dirs, w0, delta):
    c = np.einsum("...d,...d->...", dirs, w0)
    if np.any(c <= delta):
        raise ValueError(f"direction outside the aperture <., omega0> > {delta}")


# ---------------------------------------------------------------------------
# amplitude

def _amplitude_from_h(c0, dp, dm, Dp, Dm, A_w0, k):
    """``a - c0`` from ``h - 1`` values and z-derivatives at a batch of points."""
    Hp = np.conj(dp)
    prod = Hp + dm + Hp * dm
    return c0 * prod + ((1 + Hp) * Dm - np.conj(Dp) * (1 + dm)
                        - 2j * A_w0 * (1 + Hp) * (1 + dm)) / (2j * k)


def _amplitude_batch(fields, Y, NU, OM, W0, k, params: AmplitudeParams):
    """``a - 2^-1 <nu + omega, omega0>`` at a batch of (y, nu, omega, omega0)."""
    rule = RayRule(params.ray_nodes)
    n = len(Y)
    hz = params.z_step * np.linalg.norm(Y, axis=-1)
    nz = len(Z_OFFSETS)
    X = (Y[:, None, :] + (hz[:, None] * Z_OFFSETS[None, :])[..., None] * W0[:, None, :]).reshape(-1, Y.shape[1])
    dp = delta_h(fields, X, np.repeat(NU, nz, axis=0), +1, k, params.n_transport, rule).reshape(n, nz)
    dm = delta_h(fields, X, np.repeat(OM, nz, axis=0), -1, k, params.n_transport, rule).reshape(n, nz)
    Dp = dp @ Z_WEIGHTS / hz
    Dm = dm @ Z_WEIGHTS / hz
    A_w0 = np.zeros(n) if fields.A is None else np.einsum("nd,nd->n", fields.A(Y), W0)
    c0 = 0.5 * np.einsum("nd,nd->n", NU + OM, W0)
    return c0, _amplitude_from_h(c0, dp[:, Z_CENTER], dm[:, Z_CENTER], Dp, Dm, A_w0, k)


def amplitude(y, nu, omega, lam, params: AmplitudeParams = AmplitudeParams(), V=None, A=None) -> complex:
    """The amplitude ``a(y, nu, omega; lambda)`` of the approximate solutions."""
    nu, omega = as_direction(nu), as_direction(omega)
    w0 = params.base_direction if params.base_direction is not None else omega
    _aperture_check(np.array([nu, omega]), w0, params.aperture)
    y = np.asarray(y, dtype=float)
    if abs(np.dot(y, w0)) > 1e-12 * max(np.linalg.norm(y), 1):
        raise ValueError("y must lie in the plane orthogonal to omega0")
    c0, da = _amplitude_batch(_Fields(V, A), y[None], nu[None], omega[None], w0[None], np.sqrt(lam), params)
    return complex(c0[0] + da[0])


def phase_Phi(A, x, xi, sign, nodes=RAY_NODES) -> float:
    """``Phi_+- (x, xi) = -+ int_0^inf <xi, A(x +- t xi)> dt``."""
    f = _Fields(None, A)
    if f.A is None:
        return 0.0
    phi, _ = solve_rays(f, np.asarray(x, float)[None], normalize(xi)[None], sign, RayRule(nodes))
    return float(phi[0])


def b_coefficient(n, sign, x, xi, V=None, A=None, n_transport=None, nodes=RAY_NODES) -> complex:
    """Transport coefficient ``b^(n)_+-(x, xi)``."""
    if n_transport is not None and n > n_transport:
        raise ValueError(f"order {n} exceeds the transport truncation {n_transport}")
    if n == 0:
        return 1.0 + 0j
    _, bs = transport(_Fields(V, A), np.asarray(x, float)[None], normalize(xi)[None], sign, n, RayRule(nodes))
    return complex(bs[n - 1][0])


HALF_LINE_POWER = 6


def _half_line(f, y, xi, sign, rtol=1e-12):
    """``int_0^inf f(y + sign t xi) dt`` by Gauss-Legendre in the angle variable with doubling."""
    tau0 = sign * np.dot(y, xi)
    p = y - np.dot(y, xi) * xi
    rp = np.linalg.norm(p)
    s0 = np.arctan2(tau0, rp)
    span = 0.5 * np.pi - s0
    prev, n = None, 64
    while True:
        u, w = np.polynomial.legendre.leggauss(n)
        # s = pi/2 - span (1 - v)^m clusters nodes at the far end, where the
        # integrand behaves like cos(s)^(rho - 2) for non-integer decay rho
        v = 0.5 * (u + 1)
        s = 0.5 * np.pi - span * (1 - v) ** HALF_LINE_POWER
        ds = span * HALF_LINE_POWER * (1 - v) ** (HALF_LINE_POWER - 1)
        t = rp * np.tan(s) - tau0
        pts = y[None, :] + sign * t[:, None] * xi[None, :]
        val = 0.5 * np.sum(w * ds * f(pts) * rp / np.cos(s) ** 2)
        if prev is not None and abs(val - prev) <= rtol * max(abs(val), 1e-300) or n >= 4096:
            return val
        prev, n = val, 2 * n


def a1_linear(y, nu, omega, lam, V=None, A=None, base_direction=None) -> complex:
    """Linear part of the amplitude in the potentials."""
    nu, omega = as_direction(nu), as_direction(omega)
    w0 = omega if base_direction is None else as_direction(base_direction)
    y = np.asarray(y, dtype=float)
    k = np.sqrt(lam)
    f = _Fields(V, A)
    total = _half_line(f.v, y, nu, +1) + _half_line(f.v, y, omega, -1)
    if f.A is not None:
        total -= 2 * k * _half_line(lambda P: f.A(P) @ nu, y, nu, +1)
        total -= 2 * k * _half_line(lambda P: f.A(P) @ omega, y, omega, -1)
    return complex(0.5 * np.dot(nu + omega, w0) * total / (2j * k))


# ---------------------------------------------------------------------------
# amplitude -> right symbol

def _fd_weights(order):
    """Central difference weights for the given derivative order (second-order accurate)."""
    if order == 0:
        return {0: 1.0}
    p = (order + 1) // 2
    offs = np.arange(-p, p + 1)
    M = np.vander(offs, increasing=True).T.astype(float)
    rhs = np.zeros(len(offs))
    rhs[order] = math.factorial(order)
    w = np.linalg.solve(M, rhs)
    return {int(o): float(c) for o, c in zip(offs, w) if abs(c) > 1e-14}


def chart_stencil(d, m_alpha):
    """Stencil of ``sum_alpha alpha!^-1 (ik)^-|alpha| d_y^alpha d_eta^alpha``.

    Returns integer offsets ``(P, 2(d-1))`` (y then eta) and weights
    ``(P, m_alpha + 1)``: column m collects the multi-indices with ``|alpha| = m``
    (still to be multiplied by ``(ik h_y h_eta)^-m``).
    """
    q = d - 1
    acc = {}
    for alpha in itertools.product(range(m_alpha + 1), repeat=q):
        m = sum(alpha)
        if m > m_alpha:
            continue
        fact = np.prod([math.factorial(a) for a in alpha])
        per_axis = [_fd_weights(a) for a in alpha]
        for combo_y in itertools.product(*[list(w.items()) for w in per_axis]):
            for combo_e in itertools.product(*[list(w.items()) for w in per_axis]):
                off = tuple(o for o, _ in combo_y) + tuple(o for o, _ in combo_e)
                wt = np.prod([c for _, c in combo_y]) * np.prod([c for _, c in combo_e]) / fact
                row = acc.setdefault(off, np.zeros(m_alpha + 1))
                row[m] += wt
    offs = np.array(sorted(acc), dtype=float).reshape(-1, 2 * q)
    W = np.array([acc[tuple(int(v) for v in o)] for o in offs]).reshape(-1, m_alpha + 1)
    return offs, W


def _chart_directions(B, omega, eta):
    """``t(eta) = sum eta_j e_j + sqrt(1 - |eta|^2) omega`` in the basis ``B``."""
    return eta @ B + np.sqrt(1 - np.sum(eta**2, axis=-1))[..., None] * omega


def _symbol_minus_one(fields, omega, Y, k, params: AmplitudeParams):
    """``a(y, omega) - 1`` for points ``Y`` (rows, in the plane orthogonal to omega)."""
    d = omega.size
    B = plane_basis(omega)
    offs, W = chart_stencil(d, params.m_alpha)
    q = d - 1
    r = np.linalg.norm(Y, axis=-1)
    hy = params.y_step * r
    he = params.eta_step
    n, P = len(Y), len(offs)
    # h_- depends only on the shifted foot point; deduplicate it
    uy, inv = np.unique(offs[:, :q], axis=0, return_inverse=True)
    inv = np.ravel(inv)
    Yp = Y[:, None, :] + hy[:, None, None] * (uy @ B)[None]  # (n, U, d)
    nu = _chart_directions(B, omega, he * offs[:, q:])  # (P, d)
    _aperture_check(nu, omega, params.aperture)
    rule = RayRule(params.ray_nodes)
    hz = params.z_step * r
    nz = len(Z_OFFSETS)

    def shifted(points):
        return points[:, :, None, :] + (hz[:, None, None] * Z_OFFSETS[None, None, :])[..., None] * omega

    U = len(uy)
    Xm = shifted(Yp).reshape(-1, d)
    dm = delta_h(fields, Xm, np.broadcast_to(omega, Xm.shape), -1, k, params.n_transport, rule)
    dm = dm.reshape(n, U, nz)
    Xp = shifted(Yp[:, inv, :]).reshape(-1, d)
    NUp = np.broadcast_to(nu[None, :, None, :], (n, P, nz, d)).reshape(-1, d)
    dp = delta_h(fields, Xp, NUp, +1, k, params.n_transport, rule).reshape(n, P, nz)
    dmP = dm[:, inv, :]
    Dp = dp @ Z_WEIGHTS / hz[:, None]
    Dm = dmP @ Z_WEIGHTS / hz[:, None]
    if fields.A is None:
        A_w0 = 0.0
    else:
        A_w0 = (fields.A(Yp.reshape(-1, d)) @ omega).reshape(n, U)[:, inv]
    c0 = 0.5 * (nu @ omega + 1.0)
    da = _amplitude_from_h(c0[None, :], dp[..., Z_CENTER], dmP[..., Z_CENTER], Dp, Dm, A_w0, k)
    scale = (1.0 / (1j * k * hy[:, None] * he)) ** np.arange(params.m_alpha + 1)[None, :]
    weights = scale @ W.T  # (n, P)
    return np.sum(weights * da, axis=1)


def amplitude_to_symbol(y, omega, lam, params: AmplitudeParams = AmplitudeParams(), V=None, A=None) -> complex:
    """Right symbol ``a(y, omega; lambda)`` from the amplitude in the chart centered at omega."""
    omega = as_direction(omega)
    y = np.asarray(y, dtype=float)
    if abs(np.dot(y, omega)) > 1e-12 * max(np.linalg.norm(y), 1):
        raise ValueError("y must lie in the plane orthogonal to omega")
    if params.y_step * np.linalg.norm(y) < 1e-300 or params.eta_step < 1e-8:
        raise ValueError("finite-difference steps underflow")
    return complex(1.0 + _symbol_minus_one(_Fields(V, A), omega, y[None], np.sqrt(lam), params)[0])


# ---------------------------------------------------------------------------
# grids

@dataclass(frozen=True)
class GridSpec:
    """Sampling of the symbol: sphere level, tangent directions per omega, radii."""

    d: int = 3
    level: int = 3
    n_tangent: int = 12
    r_min: float = 16.0
    r_max: float = 128.0
    n_radii: int = 9

    def directions(self):
        return sphere_grid(self.d, self.level)[0]

    def radii(self):
        return np.geomspace(self.r_min, self.r_max, self.n_radii)

    def tangents(self, omegas):
        return tangent_directions(omegas, self.n_tangent)


def tangent_directions(omegas, n_tangent):
    """Unit vectors in each plane orthogonal to ``omega``, shape ``(S, m, d)``."""
    omegas = np.atleast_2d(omegas)
    d = omegas.shape[1]
    out = []
    for w in omegas:
        B = plane_basis(w)
        if d == 2:
            out.append(np.array([B[0], -B[0]]))
        else:
            th = 2 * np.pi * np.arange(n_tangent) / n_tangent
            out.append(np.cos(th)[:, None] * B[0] + np.sin(th)[:, None] * B[1])
    return np.array(out)


@dataclass
class SymbolGrid:
    """Samples of ``a(r * yhat, omega; lambda)``: ``values[i, j, k]`` at
    ``directions[i]``, ``tangents[i, j]``, ``radii[k]``."""

    energy: float
    directions: np.ndarray
    tangents: np.ndarray
    radii: np.ndarray
    values: np.ndarray
    truncation: tuple = (1, 2)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        dots = np.einsum("sd,smd->sm", self.directions, self.tangents)
        if np.any(np.abs(dots) > 1e-12):
            raise ValueError("tangent directions must be orthogonal to their omega")

    @property
    def d(self):
        return self.directions.shape[1]

    @property
    def k(self):
        return np.sqrt(self.energy)

    def points(self):
        """Foot points ``r * yhat``, shape ``(S, m, K, d)``."""
        return self.tangents[:, :, None, :] * self.radii[None, None, :, None]

    def with_values(self, values, **meta):
        return SymbolGrid(self.energy, self.directions, self.tangents, self.radii,
                          np.asarray(values), self.truncation, {**self.meta, **meta})

    def antipode_index(self):
        """Index of ``-omega`` for each stored omega (raises if one is missing)."""
        D = self.directions
        idx = np.empty(len(D), dtype=int)
        for i, w in enumerate(D):
            dist = np.linalg.norm(D + w, axis=1)
            j = int(np.argmin(dist))
            if dist[j] > 1e-9:
                raise ValueError(f"direction {i} has no antipodal partner in the grid")
            idx[i] = j
        return idx


def forward_T(V, A, lam, spec: GridSpec = GridSpec(), params: AmplitudeParams = AmplitudeParams(),
              directions=None, workers=1) -> SymbolGrid:
    """Fill a symbol grid with ``a = 1 + T(V, A)``."""
    if lam <= 0:
        raise ValueError("energy must be positive")
    omegas = spec.directions() if directions is None else np.atleast_2d(directions)
    tang = tangent_directions(omegas, spec.n_tangent)
    radii = spec.radii()
    grid = SymbolGrid(lam, omegas, tang, radii, np.ones((len(omegas), tang.shape[1], len(radii)), dtype=complex),
                      (params.n_transport, params.m_alpha), {"level": spec.level, "ray_nodes": params.ray_nodes})
    return grid.with_values(forward_values(V, A, grid, params, workers))


def forward_values(V, A, grid: SymbolGrid, params: AmplitudeParams = AmplitudeParams(), workers=1) -> np.ndarray:
    """``1 + T(V, A)`` at the sample points of an existing grid."""
    if params.base_direction is not None:
        raise ValueError("the chart is centered at each grid direction")
    fields = _Fields(V, A)
    S, m, K = grid.values.shape
    if fields.V is None and fields.A is None:
        return np.ones((S, m, K), dtype=complex)
    pts = grid.points()
    d = grid.d

    def one(i):
        Y = pts[i].reshape(-1, d)
        return 1.0 + _symbol_minus_one(fields, grid.directions[i], Y, grid.k, params).reshape(m, K)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as ex:
            rows = list(ex.map(one, range(S)))
    else:
        rows = [one(i) for i in range(S)]
    return np.array(rows)


def born_grid(grid: SymbolGrid, V, A) -> np.ndarray:
    """Born symbol ``R`` on the grid points."""
    S, m, K, d = grid.points().shape
    om = np.broadcast_to(grid.directions[:, None, None, :], (S, m, K, d)).reshape(-1, d)
    return born_batch(V, A, om, grid.points().reshape(-1, d), grid.energy).reshape(S, m, K)


def split_R_Q(grid: SymbolGrid, V, A):
    """``(R, Q)`` grids with ``a - 1 = R + Q``; values hold R and Q themselves."""
    R = born_grid(grid, V, A)
    return grid.with_values(R, part="R"), grid.with_values(grid.values - 1 - R, part="Q")


# ---------------------------------------------------------------------------
# kernel <-> symbol

def kernel_from_symbol(symbol_fn, omega, lam, nus, half_width, n=129):
    """``(2 pi)^(1-d) k^(d-1) int_{Pi_omega} exp(-ik <y, nu>) a(y) dy`` on a square grid.

    ``symbol_fn`` maps plane coordinates ``(..., d-1)`` to symbol values; the
    integral is only conditionally convergent for slowly decaying symbols, so
    callers pass mollified symbols.
    """
    omega = as_direction(omega)
    d = omega.size
    k = np.sqrt(lam)
    B = plane_basis(omega)
    g = np.linspace(-half_width, half_width, n)
    w1 = np.full(n, g[1] - g[0])
    w1[[0, -1]] *= 0.5
    mesh = np.stack(np.meshgrid(*([g] * (d - 1)), indexing="ij"), axis=-1).reshape(-1, d - 1)
    wts = np.prod(np.stack(np.meshgrid(*([w1] * (d - 1)), indexing="ij"), axis=-1).reshape(-1, d - 1), axis=1)
    vals = np.asarray(symbol_fn(mesh))
    edge = np.abs(vals).reshape((n,) * (d - 1))
    if d - 1 >= 1 and np.max(np.abs(np.take(edge, [0, -1], axis=0))) > 1e-6 * np.max(np.abs(vals)):
        warnings.warn("symbol does not decay inside the window; kernel is truncation dependent")
    nus = np.atleast_2d(nus)
    proj = nus @ B.T  # coordinates of nu in the plane
    ph = np.exp(-1j * k * proj @ mesh.T)
    return (2 * np.pi) ** (1 - d) * k ** (d - 1) * (ph @ (wts * vals))


def symbol_from_kernel(kernel_fn, omega, lam, ys, cutoff=None, n=129, eta_max=0.5):
    """``int exp(ik <y, eta>) s(t(eta), omega) gamma(eta) d eta`` over ``|eta| <= eta_max``.

    ``kernel_fn`` takes plane coordinates ``eta`` of ``nu = t(eta)``.
    """
    omega = as_direction(omega)
    d = omega.size
    k = np.sqrt(lam)
    if cutoff is None:
        cutoff = smooth_cutoff
    g = np.linspace(-eta_max, eta_max, n)
    if k * eta_max * 2 / (n - 1) > np.pi / max(np.max(np.abs(np.atleast_2d(ys))), 1e-300):
        warnings.warn("eta grid too coarse for the requested |y|; aliasing likely")
    w1 = np.full(n, g[1] - g[0])
    w1[[0, -1]] *= 0.5
    mesh = np.stack(np.meshgrid(*([g] * (d - 1)), indexing="ij"), axis=-1).reshape(-1, d - 1)
    wts = np.prod(np.stack(np.meshgrid(*([w1] * (d - 1)), indexing="ij"), axis=-1).reshape(-1, d - 1), axis=1)
    gam = cutoff(np.linalg.norm(mesh, axis=-1) / eta_max)
    vals = np.asarray(kernel_fn(mesh)) * gam
    ys = np.atleast_2d(ys)
    return np.exp(1j * k * ys @ mesh.T) @ (wts * vals)


def smooth_cutoff(t):
    """1 for ``t <= 1/2``, 0 for ``t >= 1``, smooth in between."""
    from .fields import _step
    return 1.0 - _step(2.0 * np.asarray(t) - 1.0)


def _kernel_factor(lam, d):
    return 1j * np.exp(1j * np.pi * (d - 3) / 4) * lam ** ((d - 1) / 4) * (2 * np.pi) ** (-(d - 1) / 2)


def amplitude_from_kernel(s, lam, d, delta_part=0.0):
    """Scattering amplitude from kernel values off the diagonal."""
    return (np.asarray(s) - delta_part) / _kernel_factor(lam, d)


def kernel_from_amplitude(f, lam, d, delta_part=0.0):
    return np.asarray(f) * _kernel_factor(lam, d) + delta_part
