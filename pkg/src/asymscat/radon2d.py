"""Two-dimensional Radon transform and point reconstruction on planes.

Lines in a plane are parametrized by an angle ``theta`` and a signed
offset ``s``: direction ``w(theta) = (cos, sin)``, normal
``n(theta) = (-sin, cos)``, line ``s*n + t*w``.

Point values are recovered either through the Fourier slice relation
(polar integration of the slice spectra) or through the equivalent
real-space form of filtered back-projection at one point,

    v(0) = (1/pi) int_0^inf (F(0) - F(s)) / s^2 ds,

where ``F(s)`` is the angular mean of the sinogram at offset ``s``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.integrate import quad
from scipy.special import gamma, zeta

from .core import DivergentIntegralError, OriginEvaluationError, plane_basis
from .xray import _adaptive, xray_electric_batch, xray_magnetic_batch

N_ANGLES = 64
N_OFFSETS = 257
S_MAX = 40.0
XI_MAX = 12.0
RADIAL_NODES = 96
ANGLE_NODES = 64


class TailDominanceWarning(UserWarning):
    pass


class AliasingError(ValueError):
    pass


class AxisDegeneracyError(ValueError):
    pass


@dataclass(frozen=True)
class PlaneFrame:
    """A point ``center`` and an orthonormal pair spanning a plane orthogonal to it."""

    center: np.ndarray
    e1: np.ndarray
    e2: np.ndarray

    def __post_init__(self):
        x, a, b = (np.asarray(v, dtype=float) for v in (self.center, self.e1, self.e2))
        object.__setattr__(self, "center", x)
        object.__setattr__(self, "e1", a)
        object.__setattr__(self, "e2", b)
        tol = 1e-12 * max(1.0, np.linalg.norm(x))
        if abs(np.linalg.norm(a) - 1) > 1e-12 or abs(np.linalg.norm(b) - 1) > 1e-12:
            raise ValueError("frame vectors must be unit vectors")
        if abs(a @ b) > 1e-12 or abs(a @ x) > tol or abs(b @ x) > tol:
            raise ValueError("frame vectors must be orthogonal to each other and to the center")

    @classmethod
    def at(cls, x, rotation=0.0):
        """Frame at ``x`` built from the standard basis of the plane orthogonal to ``x``."""
        x = np.asarray(x, dtype=float)
        if np.linalg.norm(x) == 0:
            raise OriginEvaluationError("reconstruction point must be nonzero")
        B = plane_basis(x / np.linalg.norm(x))
        if x.size != 3:
            raise ValueError("PlaneFrame.at needs d = 3; pass e1, e2 explicitly otherwise")
        c, s = np.cos(rotation), np.sin(rotation)
        return cls(x, c * B[0] + s * B[1], -s * B[0] + c * B[1])

    def direction(self, theta):
        theta = np.asarray(theta, dtype=float)[..., None]
        return np.cos(theta) * self.e1 + np.sin(theta) * self.e2

    def normal(self, theta):
        theta = np.asarray(theta, dtype=float)[..., None]
        return -np.sin(theta) * self.e1 + np.cos(theta) * self.e2


@dataclass
class SinogramSlice:
    """``values[m, l] = r(theta_m, s_l)``; angles uniform on [0, pi), offsets uniform and symmetric."""

    angles: np.ndarray
    offsets: np.ndarray
    values: np.ndarray
    tail_degree: float | None = None

    def __post_init__(self):
        self.angles = np.asarray(self.angles, dtype=float)
        self.offsets = np.asarray(self.offsets, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.values.shape != (self.angles.size, self.offsets.size):
            raise ValueError("values must have shape (n_angles, n_offsets)")
        ds = np.diff(self.offsets)
        if self.offsets.size < 3 or np.ptp(ds) > 1e-9 * ds[0] or abs(self.offsets[0] + self.offsets[-1]) > 1e-9 * ds[0]:
            raise ValueError("offsets must be uniform and symmetric about 0")

    @property
    def ds(self):
        return self.offsets[1] - self.offsets[0]

    @property
    def s_max(self):
        return self.offsets[-1]

    @property
    def nyquist(self):
        return np.pi / self.ds

    def angular_mean(self):
        """``F(s)``: mean over angles in [0, 2 pi), using ``r(theta + pi, s) = r(theta, -s)``."""
        return 0.5 * (self.values.mean(axis=0) + self.values.mean(axis=0)[::-1])

    def row(self, psi):
        """Sinogram along lines whose normal points at angle ``psi`` (any real angle)."""
        theta = np.mod(psi, 2 * np.pi)
        flip = theta >= np.pi
        theta = theta - np.pi if flip else theta
        n = self.angles.size
        step = np.pi / n
        pos = (theta - self.angles[0]) / step
        j = int(round(pos))
        if abs(pos - j) < 1e-9:
            vals = self.values[j % n]
            if j >= n:
                vals = vals[::-1]
        else:
            vals = self._interp_row(theta)
        return vals[::-1] if flip else vals

    def _interp_row(self, theta):
        # rows on [0, 2 pi) with r(theta + pi, s) = r(theta, -s), then trig interpolation
        full = np.concatenate([self.values, self.values[:, ::-1]], axis=0)
        N = full.shape[0]
        c = np.fft.fft(full, axis=0) / N
        freq = np.fft.fftfreq(N, d=1.0 / N)
        if N % 2 == 0:
            c[N // 2] *= 0.5
            c = np.concatenate([c, c[N // 2:N // 2 + 1]], axis=0)
            freq = np.concatenate([freq, [N // 2]])
        ph = np.exp(1j * freq * (theta - self.angles[0]))
        return np.real(ph @ c)


def _line_points(theta, s, t):
    th = np.asarray(theta, dtype=float)
    w = np.stack([np.cos(th), np.sin(th)], axis=-1)
    n = np.stack([-np.sin(th), np.cos(th)], axis=-1)
    return s[..., None, None] * n[..., None, :] + t[..., None] * w[..., None, :]


def radon2(v, theta, s, scale=None, rho=None):
    """``int v(s*n(theta) + t*w(theta)) dt`` for a plane function ``v`` acting on ``(..., 2)``.

    ``t = L tan(u)`` with ``L = max(|s|, 1)`` unless ``scale`` is given.  Pass
    ``rho`` (the decay order) to get a divergence check.
    """
    if rho is not None and rho <= 1:
        raise DivergentIntegralError("line integral diverges for decay order <= 1")
    theta, s = np.broadcast_arrays(np.asarray(theta, dtype=float), np.asarray(s, dtype=float))
    shape = theta.shape
    th, sv = theta.ravel(), s.ravel()
    L = np.maximum(np.abs(sv), 1.0) if scale is None else np.full(sv.shape, float(scale))

    def integrand(u):
        t = L[:, None] * np.tan(u)[None, :]
        pts = _line_points(th, sv, t)
        return np.asarray(v(pts)) * (L[:, None] / np.cos(u)[None, :] ** 2)

    return _adaptive(integrand)[0].reshape(shape)


def radon_sinogram(v, n_angles=N_ANGLES, n_offsets=N_OFFSETS, s_max=S_MAX, tail_degree=None) -> SinogramSlice:
    angles = np.pi * np.arange(n_angles) / n_angles
    offsets = np.linspace(-s_max, s_max, n_offsets)
    vals = np.empty((n_angles, n_offsets))
    for m, th in enumerate(angles):
        vals[m] = radon2(v, np.full(n_offsets, th), offsets)
    return SinogramSlice(angles, offsets, vals, tail_degree)


# ---------------------------------------------------------------------------
# tails

MAX_TAIL_POWER = 40.0


def _tail_fit(s, r, degree=None, n_fit=8):
    """Power law ``c * s**-q`` through the outer samples (``q = degree - 1`` if known)."""
    s, r = s[-n_fit:], r[-n_fit:]
    if np.all(r == 0):
        return 0.0, 2.0
    if degree is None:
        if np.any(r <= 0) and np.any(r >= 0):
            return 0.0, 2.0
        with np.errstate(divide="ignore"):
            q = -np.polyfit(np.log(s), np.log(np.abs(r)), 1)[0]
        # faster than any power we can sum: the tail is negligible
        if not np.isfinite(q) or q > MAX_TAIL_POWER:
            return 0.0, 2.0
    else:
        q = degree - 1.0
    c = np.sum(r * s ** -q) / np.sum(s ** (-2 * q))
    return c, q


def _tail_sum(c, q, a, h, kappa):
    """``h * sum_{j>=1} c (a + j h)^-q exp(-i kappa (a + j h))``, the grid sum beyond ``a``.

    Uses ``s^-q = Gamma(q)^-1 int tau^(q-1) e^(-s tau) d tau`` so that the
    sum over ``j`` is geometric.
    """
    if c == 0:
        return 0j
    if kappa == 0:
        if q <= 1:
            raise DivergentIntegralError("slice spectrum is infinite at the origin")
        return c * h ** (1 - q) * zeta(q, a / h + 1)
    z = 1j * kappa

    def geo(tau):
        w = tau + z
        return tau ** (q - 1) * np.exp(-w * (a + h)) / -np.expm1(-w * h)

    re = quad(lambda t: geo(t).real, 0, np.inf, limit=200)[0]
    im = quad(lambda t: geo(t).imag, 0, np.inf, limit=200)[0]
    return c * h * (re + 1j * im) / gamma(q)


# ---------------------------------------------------------------------------
# inversion

def fourier_slice(slice: SinogramSlice, xi) -> complex:
    """``(2 pi)^-1 int exp(-i |xi| s) r(w_xi, s xi_hat) ds`` on the offset grid plus the fitted tail."""
    xi = np.asarray(xi, dtype=float)
    kappa = float(np.linalg.norm(xi))
    if kappa > slice.nyquist * (1 + 1e-12):
        raise AliasingError(f"|xi| = {kappa:.3g} exceeds the offset Nyquist limit {slice.nyquist:.3g}")
    psi = np.arctan2(xi[1], xi[0]) if kappa > 0 else 0.0
    # the normal n(theta) points along xi_hat when theta = psi - pi/2
    r = slice.row(psi - 0.5 * np.pi)
    s = slice.offsets
    # trapezoid sum over the infinite offset grid: stored samples plus the fitted tails
    h = slice.ds
    val = h * np.sum(np.exp(-1j * kappa * s) * r)
    pos = s > 0
    cp, qp = _tail_fit(s[pos], r[pos], slice.tail_degree)
    cm, qm = _tail_fit(s[pos], r[::-1][pos], slice.tail_degree)
    val += _tail_sum(cp, qp, slice.s_max, h, kappa) + np.conj(_tail_sum(cm, qm, slice.s_max, h, kappa))
    return complex(val / (2 * np.pi))


def _origin_fourier(slice: SinogramSlice, xi_max, nodes):
    xi_max = min(xi_max, slice.nyquist)
    u, w = np.polynomial.legendre.leggauss(nodes)
    kap = 0.5 * xi_max * (u + 1)
    wk = 0.5 * xi_max * w
    n = slice.angles.size
    # v(0) = (2 pi)^-1 int_0^2pi int_0^inf Re vhat kappa dkappa dpsi; pairs psi, psi+pi conjugate
    total, edge = 0.0, 0.0
    for th in slice.angles:
        psi = th + 0.5 * np.pi
        vh = np.array([fourier_slice(slice, kk * np.array([np.cos(psi), np.sin(psi)])) for kk in kap])
        total += np.sum(wk * kap * vh.real)
        edge += abs(fourier_slice(slice, xi_max * np.array([np.cos(psi), np.sin(psi)])).real)
    total *= 2 * np.pi / n / (2 * np.pi)
    tail = xi_max ** 2 * edge / n
    return total, tail


def _origin_radial(s, F, tail_degree=None, n_origin=8):
    """``(1/pi) int_0^inf (F(0) - F(s))/s^2 ds`` for even ``F`` sampled on a uniform grid ``s >= 0``.

    The integrand ``G`` is even and smooth, so the trapezoid sum over the
    infinite grid is spectrally accurate.  ``G(0)`` is extrapolated in
    ``s^2``; beyond the grid ``G`` follows the fitted power-law tail of F.
    """
    h = s[1] - s[0]
    F0 = F[0]
    G = (F0 - F[1:]) / s[1:] ** 2
    m = min(n_origin, G.size)
    G0 = np.polynomial.polynomial.polyfit(s[1:m + 1] ** 2, G[:m], m - 1)[0]
    c, q = _tail_fit(s[1:], F[1:], tail_degree)
    a = s[-1] / h + 1
    fitted = c * h ** (-q - 2) * zeta(q + 2.0, a) if c != 0 else 0.0
    val = h * (0.5 * G0 + np.sum(G) + F0 * h ** -2 * zeta(2.0, a) - fitted)
    # only the fitted part of the tail is uncertain
    return val / np.pi, abs(h * fitted) / np.pi


def invert_at_origin(slice: SinogramSlice, method="radial", xi_max=XI_MAX, nodes=RADIAL_NODES) -> float:
    """Value at the plane origin of the function whose sinogram is ``slice``.

    ``method="radial"`` uses the real-space filtered back-projection formula
    on the angular mean; ``method="fourier"`` integrates slice spectra in
    polar coordinates up to ``xi_max``.
    """
    if method == "fourier":
        val, tail = _origin_fourier(slice, xi_max, nodes)
    elif method == "radial":
        F = slice.angular_mean()
        half = slice.offsets >= -1e-12 * slice.ds
        val, tail = _origin_radial(slice.offsets[half], F[half], slice.tail_degree)
    else:
        raise ValueError(f"unknown method {method!r}")
    if tail > 0.01 * max(abs(val), 1e-300) and tail > 1e-12:
        warnings.warn(f"truncation estimate {tail:.3g} exceeds 1% of the value {val:.3g}", TailDominanceWarning)
    return float(val)


def _radial_point_value(mean_at, L, nodes=RADIAL_NODES):
    """Radial formula with ``s = L tan(phi)``; ``mean_at(s)`` gives the angular mean at offsets ``s``."""
    u, w = np.polynomial.legendre.leggauss(nodes)
    phi = 0.25 * np.pi * (u + 1)
    s = L * np.tan(phi)
    F = mean_at(np.concatenate([[0.0], s]))
    g = (F[0] - F[1:]) / (L * np.sin(phi) ** 2)
    return float(0.25 * np.pi * np.sum(w * g) / np.pi)


def _plane_lines(frame: PlaneFrame, s, n_angles):
    """Directions and feet (projected to the orthogonal planes) of the plane's lines at offsets ``s``."""
    th = 2 * np.pi * np.arange(n_angles) / n_angles
    om = frame.direction(th)
    nu = frame.normal(th)
    foot = frame.center[None, None, :] + s[None, :, None] * nu[:, None, :]
    OM = np.broadcast_to(om[:, None, :], foot.shape)
    return OM, foot, nu


def reconstruct_V_at(x, provider, n_angles=ANGLE_NODES, nodes=RADIAL_NODES, frame: PlaneFrame | None = None) -> float:
    """``V(x)`` from electric line data on the plane through ``x`` orthogonal to ``x``.

    ``provider(omegas, feet)`` returns ``R_e`` for rows of directions and
    foot points (the foot lies in the plane orthogonal to its direction).
    """
    x = np.asarray(x, dtype=float)
    if np.linalg.norm(x) == 0:
        raise OriginEvaluationError("V cannot be reconstructed at the origin")
    frame = PlaneFrame.at(x) if frame is None else frame
    d = x.size

    def mean_at(s):
        OM, foot, _ = _plane_lines(frame, s, n_angles)
        vals = np.asarray(provider(OM.reshape(-1, d), foot.reshape(-1, d))).reshape(n_angles, s.size)
        return vals.mean(axis=0)

    return _radial_point_value(mean_at, np.linalg.norm(x), nodes)


def reconstruct_F_plane(x, fa, fb, provider, n_angles=ANGLE_NODES, nodes=RADIAL_NODES, step=None) -> float:
    """``<fa, F(x) fb>`` from magnetic line data on the plane ``x + span(fa, fb)``.

    The sinogram of the restricted field is ``-d/ds R_m`` along the normal
    direction, taken by a fourth-order central difference.
    """
    x, fa, fb = (np.asarray(v, dtype=float) for v in (x, fa, fb))
    frame_x = x - (x @ fa) * fa - (x @ fb) * fb
    if np.linalg.norm(frame_x) <= 1e-12 * max(1.0, np.linalg.norm(x)):
        raise AxisDegeneracyError("point lies in the reconstruction plane")
    d = x.size
    h = 1e-3 * (1 + np.linalg.norm(frame_x)) if step is None else step
    th = 2 * np.pi * np.arange(n_angles) / n_angles
    om = np.cos(th)[:, None] * fa + np.sin(th)[:, None] * fb
    nu = -np.sin(th)[:, None] * fa + np.cos(th)[:, None] * fb
    # feet of the lines x + s*nu + t*om, projected to the plane orthogonal to om
    base = x[None, :] - (om @ x)[:, None] * om
    offs = np.array([-2, -1, 1, 2]) * h
    cw = np.array([1, -8, 8, -1]) / (12 * h)

    def mean_at(s):
        S = s[None, :, None] + offs[None, None, :]
        foot = base[:, None, None, :] + S[..., None] * nu[:, None, None, :]
        OM = np.broadcast_to(om[:, None, None, :], foot.shape)
        vals = np.asarray(provider(OM.reshape(-1, d), foot.reshape(-1, d))).reshape(n_angles, s.size, 4)
        return -(vals @ cw).mean(axis=0)

    return _radial_point_value(mean_at, np.linalg.norm(frame_x), nodes)


def reconstruct_F_component(i, j, x_shift, provider, **kw) -> float:
    """``F^{ij}`` at ``x_shift`` (orthogonal to the (i, j) coordinate plane)."""
    x_shift = np.asarray(x_shift, dtype=float)
    d = x_shift.size
    if i == j:
        return 0.0
    if abs(x_shift[i]) > 1e-12 or abs(x_shift[j]) > 1e-12:
        raise ValueError("shift must be orthogonal to the (i, j) coordinate plane")
    if np.linalg.norm(x_shift) == 0:
        raise AxisDegeneracyError("shift lies in the (i, j) coordinate plane")
    e = np.eye(d)
    return reconstruct_F_plane(x_shift, e[i], e[j], provider, **kw)


def balanced_frame(x):
    """Orthogonal matrix whose rows map ``x_hat`` to a vector with equal components."""
    x = np.asarray(x, dtype=float)
    d = x.size
    xh = x / np.linalg.norm(x)
    target = np.full(d, 1 / np.sqrt(d))
    # Householder reflection sending xh to target
    v = xh - target
    if np.linalg.norm(v) < 1e-14:
        return np.eye(d)
    v /= np.linalg.norm(v)
    return np.eye(d) - 2 * np.outer(v, v)


def reconstruct_F_at(x, provider, **kw) -> np.ndarray:
    """Full antisymmetric ``F(x)`` from magnetic line data, in the standard frame.

    The planes are spanned by pairs of columns of a frame in which ``x`` has
    equal components, so ``x`` never lies in one of them.
    """
    x = np.asarray(x, dtype=float)
    d = x.size
    H = balanced_frame(x)
    # H is symmetric and orthogonal: columns f_a with <f_a, x_hat> = 1/sqrt(d)
    G = np.zeros((d, d))
    for a in range(d):
        for b in range(a + 1, d):
            G[a, b] = reconstruct_F_plane(x, H[:, a], H[:, b], provider, **kw)
            G[b, a] = -G[a, b]
    return H @ G @ H.T


def electric_provider(V):
    return lambda om, y: xray_electric_batch(V, om, y)


def magnetic_provider(A):
    return lambda om, y: xray_magnetic_batch(A, om, y)


def homogeneous_provider(degree, profile_fn):
    """Provider ``|y|^(1-degree) * profile_fn(omega, y_hat)`` from a fitted symbol model."""

    def provider(om, y):
        r = np.linalg.norm(y, axis=-1)
        return r ** (1.0 - degree) * profile_fn(om, y / r[:, None])

    return provider
