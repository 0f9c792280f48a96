"""Layer-stripping inversion of symbol data.

Each step takes the residual ``a - 1 - T(known terms)`` on the grid,
extracts its leading power law, splits the leading profile into the parts
even and odd under ``omega -> -omega``, and turns them into electric and
magnetic terms by plane-wise point reconstruction.  The recovered terms
are pushed through the forward map before the next step.
"""
from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np

from .core import (ZERO, AsymptoticScalarField, HomogeneousTerm, InconsistentDegreeError,
                   UnsupportedDimensionError, eval_poly, fit_homogeneous_sharp, fit_poly, sphere_grid)
from .fields import TwoFormField
from .radon2d import (ANGLE_NODES, RADIAL_NODES, homogeneous_provider, reconstruct_F_at,
                      reconstruct_V_at)
from .symbol import AmplitudeParams, SymbolGrid, forward_values


class StepStatus(str, enum.Enum):
    RECOVERED = "RECOVERED"
    ZERO = "ZERO"
    DEGREE_AMBIGUOUS = "DEGREE_AMBIGUOUS"
    TRUNCATION_LIMIT = "TRUNCATION_LIMIT"


class SplitError(ValueError):
    pass


@dataclass(frozen=True)
class InversionParams:
    max_terms: int = 4
    zero_threshold: float = 1e-9
    degree_tol: float = 0.05
    profile_tol: float = 0.05
    fit_tol: float = 1e-4
    split_tol: float = 1e-6
    prune: float = 1e-9
    symbol_degree: int = 4
    profile_degree: int = 4
    profile_level: int = 3
    n_corrections: int = 6
    lattice_base: float | None = 1.0
    n_angles: int = ANGLE_NODES
    radial_nodes: int = RADIAL_NODES
    truncation: tuple | None = None
    workers: int = 1


def even_odd_split(R_plus, R_minus, lam, tol=1e-8, return_residue=False):
    """``(R_e, R_m)`` from Born values at ``(y, omega)`` and ``(y, -omega)``.

    Raises :class:`SplitError` when either part has an imaginary component
    above ``tol`` relative to the data size.
    """
    k = np.sqrt(lam)
    Rp, Rm = np.asarray(R_plus, dtype=complex), np.asarray(R_minus, dtype=complex)
    e = 1j * k * (Rp + Rm)
    m = 0.5j * (Rm - Rp)
    scale = max(np.max(np.abs(e), initial=0.0), 2 * k * np.max(np.abs(m), initial=0.0), 1e-300)
    residue = max(np.max(np.abs(e.imag), initial=0.0), 2 * k * np.max(np.abs(m.imag), initial=0.0)) / scale
    if residue > tol:
        raise SplitError(f"split parts are not real (relative imaginary residue {residue:.3g})")
    out = (e.real, m.real)
    return (*out, residue) if return_residue else out


# ---------------------------------------------------------------------------
# symbol model

@dataclass
class SymbolModel:
    """Polynomial in ``(omega, yhat)`` times ``|y|^(1 - degree)``."""

    degree: float
    coefficients: dict

    @classmethod
    def fit(cls, degree, omegas, yhats, values, poly_degree):
        X = np.concatenate([omegas, yhats], axis=-1).reshape(-1, 2 * omegas.shape[-1])
        return cls(degree, fit_poly(X, np.ravel(values), poly_degree))

    def profile(self, om, yh):
        return eval_poly(self.coefficients, np.concatenate([om, yh], axis=-1))

    def provider(self):
        return homogeneous_provider(self.degree, self.profile)


# ---------------------------------------------------------------------------
# report

@dataclass
class StepResult:
    n: int
    status: StepStatus
    mu: float | None = None
    electric: HomogeneousTerm | None = None
    field: dict | None = None
    residual_sup: float = 0.0
    fit_residual: float | None = None
    imag_residue: float | None = None
    message: str = ""
    seconds: float = 0.0


@dataclass
class ReconstructionReport:
    d: int
    energy: float
    steps: list = field(default_factory=list)
    residual_norms: list = field(default_factory=list)
    sample_points: np.ndarray | None = None
    notes: list = field(default_factory=list)

    @property
    def statuses(self):
        return [s.status for s in self.steps]

    @property
    def recovered_electric(self):
        """``(degree, profile values at sample_points)`` per electric term."""
        return [(s.electric.degree, s.electric.profile_at(self.sample_points))
                for s in self.steps if s.electric is not None]

    @property
    def recovered_field(self):
        """``(degree, {(i, j): profile values})`` per magnetic term."""
        out = []
        for s in self.steps:
            if s.field:
                deg = next(iter(s.field.values())).degree
                out.append((deg, {ij: t.profile_at(self.sample_points) for ij, t in s.field.items()}))
        return out

    def electric_field(self) -> AsymptoticScalarField:
        return AsymptoticScalarField(tuple(s.electric for s in self.steps if s.electric is not None), d=self.d)

    def magnetic_field(self) -> TwoFormField:
        return _accumulate_field(self.d, [s.field for s in self.steps if s.field])

    @property
    def is_empty(self):
        return not any(s.electric is not None or s.field for s in self.steps)

    def to_dict(self):
        pts = self.sample_points.tolist() if self.sample_points is not None else []

        def term(t):
            return {"degree": t.degree, "profile": [[list(e), c] for e, c in sorted(t.profile.items())],
                    "samples": t.profile_at(self.sample_points).tolist()}

        steps = []
        for s in self.steps:
            steps.append({
                "n": s.n, "status": s.status.value, "mu": s.mu,
                "electric": term(s.electric) if s.electric is not None else None,
                "field": {f"{i},{j}": term(t) for (i, j), t in s.field.items()} if s.field else None,
                "residual_sup": s.residual_sup, "fit_residual": s.fit_residual,
                "imag_residue": s.imag_residue, "message": s.message,
            })
        return {"d": self.d, "energy": self.energy, "sample_points": pts, "steps": steps,
                "residual_norms": self.residual_norms, "notes": self.notes}


def _accumulate_field(d, parts):
    comps = {}
    for part in parts:
        for ij, t in part.items():
            f = AsymptoticScalarField((t,), d=d)
            comps[ij] = comps[ij] + f if ij in comps else f
    return TwoFormField(d, comps)


# ---------------------------------------------------------------------------
# steps

def _check_grid(grid: SymbolGrid):
    if grid.d < 3:
        raise UnsupportedDimensionError("inversion needs d >= 3; in the plane the data do not determine the fields")
    anti = grid.antipode_index()
    if np.max(np.abs(grid.tangents[anti] - grid.tangents)) > 1e-9:
        raise ValueError("omega and -omega must be sampled at the same feet")
    return anti


def _certified_mu(mu1, truncation):
    n, m = truncation
    return min(mu1 + n, (n + 1) * mu1, mu1 + m + 1)


def _profile_fit(pts, vals, params):
    # coefficients at the level of the reconstruction noise only slow the forward map down
    return fit_poly(pts, vals, params.profile_degree, sphere=True, prune=params.prune)


def _reconstruct_terms(grid, anti, profile, mu, params: InversionParams):
    """Electric and magnetic terms from a leading profile of order ``-mu``."""
    d = grid.d
    S, m = profile.shape
    Re, Rm, residue = even_odd_split(profile, profile[anti], grid.energy, tol=np.inf, return_residue=True)
    k = grid.k
    size = max(np.max(np.abs(Re)), 2 * k * np.max(np.abs(Rm)))
    floor = params.split_tol * size
    om = np.broadcast_to(grid.directions[:, None, :], (S, m, d))
    pts, _ = sphere_grid(d, params.profile_level)
    kw = dict(n_angles=params.n_angles, nodes=params.radial_nodes)
    electric, fld = None, None
    if np.max(np.abs(Re)) > floor:
        model = SymbolModel.fit(mu + 1, om, grid.tangents, Re, params.symbol_degree)
        prov = model.provider()
        vals = np.array([reconstruct_V_at(x, prov, **kw) for x in pts])
        electric = HomogeneousTerm(mu + 1, _profile_fit(pts, vals, params))
    if 2 * k * np.max(np.abs(Rm)) > floor:
        model = SymbolModel.fit(mu + 1, om, grid.tangents, Rm, params.symbol_degree)
        prov = model.provider()
        mats = np.array([reconstruct_F_at(x, prov, **kw) for x in pts])
        fld = {}
        for i in range(d):
            for j in range(i + 1, d):
                prof = _profile_fit(pts, mats[:, i, j], params)
                if np.max(np.abs(mats[:, i, j])) > floor:
                    fld[(i, j)] = HomogeneousTerm(mu + 2, prof)
    return electric, fld, residue


def _leading(residual, grid, params: InversionParams, threshold):
    S, m, K = residual.shape
    if K < 4 or grid.radii.max() / grid.radii.min() < 8 - 1e-9:
        raise InconsistentDegreeError("too few radii (need >= 4 spanning a factor >= 8) to fix a degree")
    return fit_homogeneous_sharp(grid.radii, residual.reshape(S * m, K), zero_threshold=threshold,
                                 n_corrections=params.n_corrections, lattice_base=params.lattice_base)


def recursive_step(n, known_V, known_F, grid: SymbolGrid, params: InversionParams = InversionParams(),
                   anti=None, prev_mu=None, mu1=None, amp_params=None) -> StepResult:
    """One layer: residual against the known terms, leading fit, split and reconstruction."""
    t0 = time.perf_counter()
    anti = _check_grid(grid) if anti is None else anti
    amp_params = amp_params or AmplitudeParams(n_transport=grid.truncation[0], m_alpha=grid.truncation[1])
    threshold = params.zero_threshold * np.max(np.abs(grid.values))
    Vk = None if known_V is None or known_V.is_zero() else known_V
    Fk = None if known_F is None or known_F.is_zero() else known_F
    model = forward_values(Vk, Fk, grid, amp_params, params.workers)
    residual = grid.values - model
    sup = float(np.max(np.abs(residual)))
    S, m, K = residual.shape
    try:
        fit = _leading(residual, grid, params, threshold)
    except InconsistentDegreeError as exc:
        return StepResult(n, StepStatus.DEGREE_AMBIGUOUS, residual_sup=sup, message=str(exc),
                          seconds=time.perf_counter() - t0)
    if fit is ZERO:
        return StepResult(n, StepStatus.ZERO, residual_sup=sup,
                          message="residual below threshold: all remaining terms vanish",
                          seconds=time.perf_counter() - t0)
    mu = fit.degree
    res = StepResult(n, StepStatus.RECOVERED, mu=mu, residual_sup=sup, fit_residual=fit.residual)
    if fit.residual > params.fit_tol:
        res.status = StepStatus.DEGREE_AMBIGUOUS
        res.message = f"power-law fit residual {fit.residual:.3g} exceeds {params.fit_tol}"
    elif prev_mu is not None and mu <= prev_mu + params.degree_tol:
        res.status = StepStatus.DEGREE_AMBIGUOUS
        res.message = f"degree {mu:.4f} does not increase past the previous {prev_mu:.4f}"
    elif mu1 is not None and _truncation_uncertified(params, grid, amp_params):
        if mu > _certified_mu(mu1, (amp_params.n_transport, amp_params.m_alpha)) + params.degree_tol:
            res.status = StepStatus.TRUNCATION_LIMIT
            res.message = "residual order lies beyond what the forward truncation resolves"
    if res.status is not StepStatus.RECOVERED:
        res.seconds = time.perf_counter() - t0
        return res
    profile = fit.profile.reshape(S, m)
    res.electric, res.field, res.imag_residue = _reconstruct_terms(grid, anti, profile, mu, params)
    res.seconds = time.perf_counter() - t0
    return res


def _truncation_uncertified(params, grid, amp_params):
    data = params.truncation if params.truncation is not None else grid.truncation
    if data is None:
        return True
    return data[0] > amp_params.n_transport or data[1] > amp_params.m_alpha


def recover_leading(grid: SymbolGrid, params: InversionParams = InversionParams()) -> StepResult:
    """First layer; its status is ZERO when ``a - 1`` is below the threshold."""
    return recursive_step(1, None, None, grid, params)


def reconstruct_all(grid: SymbolGrid, max_terms=None, params: InversionParams = InversionParams(),
                    amp_params: AmplitudeParams | None = None) -> ReconstructionReport:
    """Run layer stripping until a ZERO step, a failure, or ``max_terms`` recovered terms."""
    anti = _check_grid(grid)
    max_terms = params.max_terms if max_terms is None else max_terms
    d = grid.d
    report = ReconstructionReport(d, grid.energy, sample_points=sphere_grid(d, params.profile_level)[0])
    report.notes.append("uniqueness beyond the recovered orders rests on a priori assumptions and is not checked")
    V = AsymptoticScalarField.zero(d)
    F = TwoFormField.zero(d)
    mu1 = prev = None
    for n in range(1, max_terms + 1):
        step = recursive_step(n, V, F, grid, params, anti, prev, mu1, amp_params)
        report.steps.append(step)
        if n > 1:
            report.residual_norms.append(step.residual_sup)
        if step.status is not StepStatus.RECOVERED:
            if step.status is StepStatus.ZERO:
                if n == 1:
                    report.notes.append("zero data: the fields decay faster than any power")
                else:
                    report.notes.append(f"all terms from order {n} on vanish")
            break
        prev = step.mu
        mu1 = step.mu if mu1 is None else mu1
        if step.electric is not None:
            V = V + AsymptoticScalarField((step.electric,), d=d)
        if step.field:
            F = F + _accumulate_field(d, [step.field])
    else:
        # residual after the last recovered term
        ap = amp_params or AmplitudeParams(n_transport=grid.truncation[0], m_alpha=grid.truncation[1])
        model = forward_values(None if V.is_zero() else V, None if F.is_zero() else F, grid, ap, params.workers)
        report.residual_norms.append(float(np.max(np.abs(grid.values - model))))
    return report
