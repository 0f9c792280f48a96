"""Directions, homogeneous fields, sphere quadrature and the leading-term extractor.

Fields are finite sums of homogeneous terms ``p(x/|x|) |x|**(-degree)`` whose
profiles ``p`` are polynomials in the Cartesian components of the unit
vector.  Internally every such term is expanded into a :class:`PowerSum`,
``sum_k c_k x**a_k |x|**(-p_k)``, which is closed under differentiation, so
gradients, Jacobians and Laplacians are available in closed form.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import optimize

Y_MIN = 1e-6
UNIT_TOL = 1e-12


class AsymscatError(Exception):
    """Base class for errors raised by this package."""


class OriginEvaluationError(AsymscatError, ValueError):
    pass


class UnsupportedDimensionError(AsymscatError, ValueError):
    pass


class InconsistentDegreeError(AsymscatError):
    """Per-direction power-law slopes disagree beyond the tolerance."""

    def __init__(self, message, spread=None):
        super().__init__(message)
        self.spread = spread


class DivergentIntegralError(AsymscatError, ValueError):
    pass


# ---------------------------------------------------------------------------
# directions and planes

def as_direction(v, tol=UNIT_TOL) -> np.ndarray:
    """Return ``v`` as a float array, checking that it has unit length."""
    v = np.asarray(v, dtype=float)
    if abs(np.linalg.norm(v) - 1.0) > tol:
        raise ValueError(f"not a unit vector: |v| = {np.linalg.norm(v)!r}")
    return v


def normalize(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v / np.linalg.norm(v, axis=-1, keepdims=True)


def project_to_plane(x, omega) -> np.ndarray:
    """Orthogonal projection of ``x`` onto the hyperplane orthogonal to ``omega``."""
    x = np.asarray(x, dtype=float)
    omega = np.asarray(omega, dtype=float)
    return x - np.sum(x * omega, axis=-1, keepdims=True) * omega


def plane_basis(omega) -> np.ndarray:
    """Deterministic orthonormal basis of the plane orthogonal to ``omega``.

    Returns an array of shape ``(d - 1, d)``.  The basis depends only on the
    line spanned by ``omega`` (``omega`` and ``-omega`` share it), so symbol
    samples at ``(y, omega)`` and ``(y, -omega)`` can be paired exactly.
    """
    omega = np.asarray(omega, dtype=float)
    d = omega.size
    # canonical representative of the line: first nonzero component positive
    idx = np.flatnonzero(np.abs(omega) > 1e-12)[0]
    w = omega if omega[idx] > 0 else -omega
    basis = []
    # rounded so that numerically antipodal inputs give the same order
    for e in np.eye(d)[np.argsort(np.round(np.abs(w), 10), kind="stable")]:
        v = e - np.dot(e, w) * w
        for b in basis:
            v = v - np.dot(v, b) * b
        n = np.linalg.norm(v)
        if n > 1e-8:
            basis.append(v / n)
        if len(basis) == d - 1:
            break
    B = np.array(basis)
    if d == 3 and np.dot(np.cross(B[0], B[1]), w) < 0:
        B[1] = -B[1]
    elif d == 2 and (B[0, 0] * w[1] - B[0, 1] * w[0]) > 0:
        # make (basis, w) positively oriented in the plane
        B[0] = -B[0]
    return B


@dataclass(frozen=True)
class LineSpec:
    """The line ``{foot + t * direction}`` with ``foot`` orthogonal to ``direction``."""

    direction: np.ndarray
    foot: np.ndarray
    y_min: float = Y_MIN

    def __post_init__(self):
        w = as_direction(self.direction)
        y = np.asarray(self.foot, dtype=float)
        ny = np.linalg.norm(y)
        if ny < self.y_min:
            raise OriginEvaluationError(f"line passes within {ny:g} of the origin")
        if abs(np.dot(w, y)) > 1e-12 * max(ny, 1.0):
            raise ValueError("foot point is not orthogonal to the line direction")
        object.__setattr__(self, "direction", w)
        object.__setattr__(self, "foot", y)

    @classmethod
    def through(cls, direction, point, y_min=Y_MIN):
        """The line with the given direction passing through ``point``."""
        w = normalize(direction)
        return cls(w, project_to_plane(point, w), y_min)

    @property
    def d(self):
        return self.direction.size


# ---------------------------------------------------------------------------
# polynomial profiles

def monomial_exponents(d: int, max_degree: int) -> list[tuple[int, ...]]:
    """All exponent tuples of total degree <= max_degree, graded order."""
    out = []
    for deg in range(max_degree + 1):
        for combo in itertools.combinations_with_replacement(range(d), deg):
            e = [0] * d
            for i in combo:
                e[i] += 1
            out.append(tuple(e))
    return out


def eval_monomials(X, exps) -> np.ndarray:
    """Matrix of monomial values, shape ``X.shape[:-1] + (len(exps),)``."""
    X = np.asarray(X, dtype=float)
    cols = []
    cache = {}
    for e in exps:
        v = np.ones(X.shape[:-1])
        for i, k in enumerate(e):
            if k:
                key = (i, k)
                if key not in cache:
                    cache[key] = X[..., i] ** k
                v = v * cache[key]
        cols.append(v)
    return np.stack(cols, axis=-1) if cols else np.zeros(X.shape[:-1] + (0,))


def eval_poly(profile: Mapping[tuple, float], X) -> np.ndarray:
    """Evaluate a polynomial given as ``{exponent tuple: coefficient}``."""
    X = np.asarray(X, dtype=float)
    if not profile:
        return np.zeros(X.shape[:-1])
    exps = list(profile)
    coefs = np.array([profile[e] for e in exps])
    return eval_monomials(X, exps) @ coefs


def fit_poly(X, values, max_degree: int, rcond=1e-12, sphere=False, prune=0.0) -> dict:
    """Least-squares polynomial of total degree <= max_degree through samples.

    Monomials are linearly dependent on spheres.  With ``sphere=True`` the
    basis keeps only exponents with last entry <= 1, which is a basis of the
    restrictions to the unit sphere; otherwise the minimum-norm solution is
    returned.  Coefficients below ``prune`` times the largest are dropped.
    """
    X = np.asarray(X, dtype=float)
    exps = monomial_exponents(X.shape[-1], max_degree)
    if sphere:
        exps = [e for e in exps if e[-1] <= 1]
    M = eval_monomials(X, exps)
    coef, *_ = np.linalg.lstsq(M, np.asarray(values), rcond=rcond)
    cut = prune * np.max(np.abs(coef), initial=0.0)
    return {e: c for e, c in zip(exps, coef) if c != 0 and abs(c) > cut}


# ---------------------------------------------------------------------------
# closed-form differentiable sums  c * x^a * |x|^(-p)

class PowerSum:
    """Finite sum ``sum_k c_k x**a_k |x|**(-p_k)`` on R^d minus the origin."""

    def __init__(self, d: int, terms: Mapping[tuple, float] | None = None):
        self.d = d
        merged: dict[tuple, float] = {}
        for (exps, p), c in (terms or {}).items():
            key = (tuple(int(k) for k in exps), float(p))
            merged[key] = merged.get(key, 0.0) + c
        self.terms = {k: c for k, c in merged.items() if c != 0.0}

    @classmethod
    def zero(cls, d):
        return cls(d)

    def __bool__(self):
        return bool(self.terms)

    def __add__(self, other: "PowerSum") -> "PowerSum":
        t = dict(self.terms)
        for k, c in other.terms.items():
            t[k] = t.get(k, 0.0) + c
        return PowerSum(self.d, t)

    def __neg__(self):
        return self.scale(-1.0)

    def __sub__(self, other):
        return self + (-other)

    def scale(self, s: float) -> "PowerSum":
        return PowerSum(self.d, {k: s * c for k, c in self.terms.items()})

    def times_coordinate(self, i: int, s: float = 1.0) -> "PowerSum":
        """Multiply by ``s * x_i``."""
        out = {}
        for (e, p), c in self.terms.items():
            e2 = list(e)
            e2[i] += 1
            out[(tuple(e2), p)] = s * c
        return PowerSum(self.d, out)

    def derivative(self, i: int) -> "PowerSum":
        out: dict[tuple, float] = {}
        for (e, p), c in self.terms.items():
            if e[i]:
                e1 = list(e)
                e1[i] -= 1
                k = (tuple(e1), p)
                out[k] = out.get(k, 0.0) + c * e[i]
            if p:
                e2 = list(e)
                e2[i] += 1
                k = (tuple(e2), p + 2.0)
                out[k] = out.get(k, 0.0) - c * p
        return PowerSum(self.d, out)

    def laplacian(self) -> "PowerSum":
        out = PowerSum(self.d)
        for i in range(self.d):
            out = out + self.derivative(i).derivative(i)
        return out

    def __call__(self, X) -> np.ndarray:
        return eval_powersums([self], X)[0]


def eval_powersums(sums, X) -> list:
    """Evaluate several power sums at the same points, sharing monomials and radial powers."""
    X = np.asarray(X, dtype=float)
    if not any(ps.terms for ps in sums):
        return [np.zeros(X.shape[:-1]) for _ in sums]
    r2 = np.einsum("...i,...i->...", X, X)
    mono = {}
    radial = {}

    def monomial(e):
        # one multiplication from a cached lower monomial; None stands for 1
        if not any(e):
            return None
        if e not in mono:
            i = next(j for j, k in enumerate(e) if k)
            m = monomial(e[:i] + (e[i] - 1,) + e[i + 1:])
            mono[e] = X[..., i].copy() if m is None else m * X[..., i]
        return mono[e]

    out = []
    for ps in sums:
        groups: dict[float, list] = {}
        for (e, p), c in ps.terms.items():
            groups.setdefault(p, []).append((e, c))
        total = np.zeros(X.shape[:-1])
        for p, items in groups.items():
            acc = np.zeros(X.shape[:-1])
            for e, c in items:
                m = monomial(e)
                if m is None:
                    acc += c
                else:
                    acc += c * m
            if p != 0:
                if p not in radial:
                    radial[p] = r2 ** (-0.5 * p)
                acc *= radial[p]
            total += acc
        out.append(total)
    # the recursive closure is a reference cycle; free the arrays now
    mono.clear()
    return out


def powersum_vector_jacobian(components: list[PowerSum]) -> list[list[PowerSum]]:
    """``J[i][j] = d A_i / d x_j``."""
    d = len(components)
    return [[components[i].derivative(j) for j in range(d)] for i in range(d)]


# ---------------------------------------------------------------------------
# homogeneous terms and asymptotic sums

@dataclass(frozen=True)
class HomogeneousTerm:
    """``profile(x/|x|) * |x|**(-degree)``.

    ``profile`` maps exponent tuples to coefficients, e.g. ``{(1, 0, 0): 0.5}``
    is ``0.5 * xhat_1``.
    """

    degree: float
    profile: Mapping[tuple, float]

    def __post_init__(self):
        prof = {tuple(int(k) for k in e): float(c) for e, c in dict(self.profile).items()}
        dims = {len(e) for e in prof}
        if len(dims) > 1:
            raise ValueError("profile monomials have inconsistent dimension")
        if not np.isfinite(self.degree) or self.degree <= 0:
            raise ValueError("degree must be positive and finite")
        object.__setattr__(self, "profile", prof)

    @property
    def d(self):
        return len(next(iter(self.profile))) if self.profile else None

    def profile_at(self, xhat) -> np.ndarray:
        return eval_poly(self.profile, xhat)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        r = np.linalg.norm(x, axis=-1)
        return self.profile_at(x / r[..., None]) * r ** (-self.degree)

    def to_powersum(self, d=None) -> PowerSum:
        d = d or self.d
        return PowerSum(d, {(e, self.degree + sum(e)): c for e, c in self.profile.items()})

    def scaled(self, s: float) -> "HomogeneousTerm":
        return HomogeneousTerm(self.degree, {e: s * c for e, c in self.profile.items()})


@dataclass(frozen=True)
class AsymptoticScalarField:
    """Finite sum of homogeneous terms with strictly increasing degrees."""

    terms: tuple = ()
    d: int = 3
    y_min: float = Y_MIN
    _ps: PowerSum = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        terms = tuple(self.terms)
        degs = [t.degree for t in terms]
        if any(b <= a for a, b in zip(degs, degs[1:])):
            raise ValueError(f"degrees must be strictly increasing, got {degs}")
        for t in terms:
            if t.d is not None and t.d != self.d:
                raise ValueError(f"term dimension {t.d} does not match field dimension {self.d}")
        object.__setattr__(self, "terms", terms)
        ps = PowerSum(self.d)
        for t in terms:
            ps = ps + t.to_powersum(self.d)
        object.__setattr__(self, "_ps", ps)

    @classmethod
    def single(cls, degree, profile, d=3):
        return cls((HomogeneousTerm(degree, profile),), d=d)

    @classmethod
    def zero(cls, d=3):
        return cls((), d=d)

    @property
    def degrees(self):
        return [t.degree for t in self.terms]

    def is_zero(self):
        return not self._ps

    def powersum(self) -> PowerSum:
        return self._ps

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if np.any(np.linalg.norm(x, axis=-1) < self.y_min):
            raise OriginEvaluationError("field evaluated too close to the origin")
        return self._ps(x)

    def gradient(self, x) -> np.ndarray:
        return np.stack([self._ps.derivative(i)(x) for i in range(self.d)], axis=-1)

    def scaled(self, s):
        return AsymptoticScalarField(tuple(t.scaled(s) for t in self.terms), self.d, self.y_min)

    def __add__(self, other: "AsymptoticScalarField") -> "AsymptoticScalarField":
        by_deg: dict[float, dict] = {}
        for t in self.terms + other.terms:
            prof = by_deg.setdefault(t.degree, {})
            for e, c in t.profile.items():
                prof[e] = prof.get(e, 0.0) + c
        terms = tuple(HomogeneousTerm(g, p) for g, p in sorted(by_deg.items()))
        return AsymptoticScalarField(terms, self.d, self.y_min)


def eval_field(f: AsymptoticScalarField, x) -> np.ndarray:
    """``sum_j |x|^(-rho_j) p_j(x/|x|)``; raises near the origin."""
    return f(x)


# ---------------------------------------------------------------------------
# quadrature on the sphere

def sphere_grid(d: int, level: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes (n, d) and positive weights (n,) on the unit sphere.

    d=2: ``4 * level`` equally spaced angles.  d=3: ``2 * level``
    Gauss-Legendre nodes in the polar cosine times ``4 * level`` uniform
    azimuths.  Both node sets are closed under ``x -> -x``.
    """
    if d < 2:
        raise UnsupportedDimensionError("sphere_grid needs d >= 2")
    if level < 1:
        raise ValueError("level must be >= 1")
    if d == 2:
        n = 4 * level
        th = 2 * np.pi * (np.arange(n) + 0.5) / n
        return np.column_stack([np.cos(th), np.sin(th)]), np.full(n, 2 * np.pi / n)
    if d > 3:
        raise UnsupportedDimensionError("sphere quadrature is only provided for d = 2, 3")
    nz, nphi = 2 * level, 4 * level
    z, wz = np.polynomial.legendre.leggauss(nz)
    phi = 2 * np.pi * (np.arange(nphi) + 0.5) / nphi
    Z, P = np.meshgrid(z, phi, indexing="ij")
    s = np.sqrt(1 - Z**2)
    pts = np.column_stack([(s * np.cos(P)).ravel(), (s * np.sin(P)).ravel(), Z.ravel()])
    w = np.repeat(wz, nphi) * (2 * np.pi / nphi)
    return pts, w


def sphere_area(d: int) -> float:
    return 2 * math.pi ** (d / 2) / math.gamma(d / 2)


# ---------------------------------------------------------------------------
# leading homogeneous term of sampled data

class _Zero:
    """Result of the leading-term extraction for negligible data."""

    def __repr__(self):
        return "ZERO"

    def __bool__(self):
        return False


ZERO = _Zero()


@dataclass
class PowerFit:
    """Leading power law ``profile * r**(-degree)`` fitted to radial samples."""

    degree: float
    profile: np.ndarray
    residual: float
    slope_spread: float = 0.0
    corrections: np.ndarray | None = None
    correction_exponents: tuple = ()

    def model(self, radii) -> np.ndarray:
        """Fitted values (leading term plus corrections), shape (S, K)."""
        r = np.asarray(radii, dtype=float)
        out = self.profile[:, None] * r ** (-self.degree)
        if self.corrections is not None:
            for e, c in zip(self.correction_exponents, self.corrections):
                out = out + c[:, None] * r ** (-(self.degree + e))
        return out


def correction_exponents(n: int, base: float | None = 1.0, merge: float = 0.05) -> list[float]:
    """Smallest ``n`` offsets ``a * base + b`` (a, b >= 0 integers, not both 0)."""
    if n <= 0:
        return []
    cands = set()
    for a in range(n + 1):
        for b in range(n + 1):
            if a + b and (a == 0 or base):
                cands.add(a * (base or 0.0) + b)
    out = []
    for v in sorted(cands):
        if v > merge and all(abs(v - u) > merge for u in out):
            out.append(v)
    return out[:n]


def _loglog_slopes(radii, mags):
    lr = np.log(radii)
    lr0 = lr - lr.mean()
    lg = np.log(mags)
    return (lg - lg.mean(axis=1, keepdims=True)) @ lr0 / (lr0 @ lr0)


def _gauss_newton_degree(mu, design, logr, Y, iters=30):
    """Polish the shared degree on the projected residual.

    The scalar objective only fixes ``mu`` to about sqrt(machine eps);
    Gauss-Newton on the residual vector itself reaches rounding level.
    """
    for _ in range(iters):
        A = design(mu)
        coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
        res = Y - A @ coef
        Q, _ = np.linalg.qr(A)
        dA = -logr[:, None] * A
        Jm = dA @ coef
        Jm = Jm - Q @ (Q.conj().T @ Jm)
        den = float(np.vdot(Jm, Jm).real)
        if den == 0:
            break
        step = float(np.vdot(Jm, res).real) / den
        mu = mu + step
        if abs(step) < 1e-15 * max(1.0, abs(mu)):
            break
    return mu


def fit_homogeneous_sharp(
    radii,
    values,
    tol: float = 0.25,
    zero_threshold: float = 1e-9,
    n_corrections: int = 4,
    lattice_base: float | None = 1.0,
    strong_fraction: float = 0.1,
):
    """Extract the leading homogeneous term from samples ``values[i, k] = g(r_k * yhat_i)``.

    Returns :data:`ZERO` when ``max |g| < zero_threshold``.  Otherwise the
    degree is first estimated as the negated median of per-direction
    log-log slopes (directions whose magnitude is below ``strong_fraction``
    of the maximum are left out of the slope statistics, since there the
    leading profile nearly vanishes).  The estimate is then refined by a
    least-squares fit of ``r**(-mu) * (p_0 + sum_m p_m r**(-e_m))`` with a
    degree shared by all directions and correction offsets ``e_m`` taken
    from :func:`correction_exponents`; ``p_0`` is the profile.
    """
    radii = np.asarray(radii, dtype=float)
    G = np.atleast_2d(np.asarray(values))
    if radii.size < 4 or radii.max() / radii.min() < 8 - 1e-9:
        raise ValueError("need at least 4 radii spanning a factor >= 8")
    if G.shape[1] != radii.size:
        raise ValueError("values must have shape (directions, radii)")
    mags = np.abs(G)
    gmax = mags.max() if mags.size else 0.0
    if not gmax >= zero_threshold:
        return ZERO

    alive = mags.min(axis=1) >= zero_threshold
    if not alive.any():
        alive = mags.max(axis=1) >= zero_threshold
    slopes = _loglog_slopes(radii, np.maximum(mags[alive], 1e-300))
    ref = mags[alive].max(axis=1)
    strong = ref >= strong_fraction * ref.max()
    mu0 = -float(np.median(slopes[strong]))
    spread = float(np.max(np.abs(slopes[strong] + mu0)))
    if spread > tol:
        raise InconsistentDegreeError(
            f"per-direction degrees spread by {spread:.3g} (> {tol})", spread)

    n_corr = max(0, min(n_corrections, radii.size - 3))
    base = mu0 if lattice_base is None else lattice_base
    exps = correction_exponents(n_corr, base)
    w = radii ** mu0
    w = w / w.max()
    Gw = G * w[None, :]
    gnorm = np.sum(np.abs(Gw) ** 2)

    def design(mu):
        cols = [radii ** (-mu)] + [radii ** (-(mu + e)) for e in exps]
        return np.column_stack(cols) * w[:, None]

    def objective(mu):
        Q, _ = np.linalg.qr(design(mu))
        R = Gw.T - Q @ (Q.conj().T @ Gw.T)
        return float(np.sum(np.abs(R) ** 2) / gnorm)

    if exps:
        grid = np.linspace(mu0 - 0.4, mu0 + 0.4, 41)
        vals = [objective(m) for m in grid]
        i = int(np.argmin(vals))
        lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, len(grid) - 1)]
        res = optimize.minimize_scalar(objective, bounds=(lo, hi), method="bounded",
                                       options={"xatol": 1e-10})
        mu = _gauss_newton_degree(float(res.x), design, np.log(radii), Gw.T)
    else:
        mu = mu0
    A = design(mu)
    coef, *_ = np.linalg.lstsq(A, Gw.T, rcond=None)
    fit = PowerFit(mu, coef[0].copy(), 0.0, spread,
                   coef[1:].copy() if exps else None, tuple(exps))
    fit.residual = float(np.max(np.abs(G - fit.model(radii))) / gmax)
    return fit
