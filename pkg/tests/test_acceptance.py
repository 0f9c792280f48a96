"""End-to-end acceptance checks, one test per criterion.

Each test records a pass/fail line that is printed in the terminal summary.
"""
import json
import time

import numpy as np
import pytest

from asymscat.cex2d import CircleProfile, check_vanishing_conditions, halfcircle_integral
from asymscat.cli import main
from asymscat.core import AsymptoticScalarField, HomogeneousTerm, PowerSum, fit_homogeneous_sharp
from asymscat.fields import (GaussianGradient, PowerVectorField, SumVectorField, TwoFormField, a_reg, build_A,
                             curl_of, u_potential)
from asymscat.invert import StepStatus, even_odd_split, reconstruct_all
from asymscat.radon2d import fourier_slice, invert_at_origin, radon_sinogram
from asymscat.symbol import GridSpec, forward_T, split_R_Q
from asymscat.xray import born_batch, xray_electric_batch, xray_magnetic_batch

DEGREE_TOL = 0.05
PROFILE_TOL = 0.05

V_LEAD = AsymptoticScalarField.single(2.0, {(0, 0, 0): 1.0})
V_NEXT = AsymptoticScalarField.single(3.0, {(1, 0, 0): 0.5})
V_TWO = AsymptoticScalarField((HomogeneousTerm(2.0, {(0, 0, 0): 1.0}), HomogeneousTerm(3.0, {(1, 0, 0): 0.5})), d=3)


def rotation_potential():
    """(-x2, x1, 0.3 x1 x3 / |x|) |x|^-3, homogeneous of order -2."""
    return PowerVectorField([PowerSum(3, {((0, 1, 0), 3.0): -1.0}),
                             PowerSum(3, {((1, 0, 0), 3.0): 1.0}),
                             PowerSum(3, {((1, 0, 1), 4.0): 0.3})])


def random_points(n, lo, hi, seed):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, 3))
    return X * rng.uniform(lo, hi, (n, 1)) / np.linalg.norm(X, axis=1, keepdims=True)


def profile_error(got, truth):
    return float(np.max(np.abs(got - truth)) / np.max(np.abs(truth)))


def test_criterion_1_leading_round_trip(tmp_path, record, capsys):
    cfg = tmp_path / "lead.json"
    cfg.write_text(json.dumps({"d": 3, "energy": 1.0,
                               "electric": [{"degree": 2.0, "profile": [[[0, 0, 0], 1.0]]}]}))
    out = tmp_path / "report.json"
    t0 = time.perf_counter()
    code = main(["roundtrip", "--config", str(cfg), "--out", str(out),
                 "--tolerance-degree", "0.05", "--tolerance-profile", "0.02"])
    seconds = time.perf_counter() - t0
    printed = capsys.readouterr().out
    rep = json.loads(out.read_text())
    step = rep["steps"][0]
    derr = abs(step["mu"] + 1 - 2.0)
    perr = float(np.max(np.abs(np.array(step["electric"]["samples"]) - 1.0)))
    ok = code == 0 and derr <= 0.05 and perr <= 0.02 and seconds <= 120
    record(1, ok, f"degree error {derr:.2e}, profile error {perr:.2e}, {seconds:.0f} s, exit {code}")
    assert ok, printed


@pytest.fixture(scope="module")
def two_term_run():
    t0 = time.perf_counter()
    grid = forward_T(V_TWO, None, 1.0, GridSpec())
    rep = reconstruct_all(grid)
    return grid, rep, time.perf_counter() - t0


def electric_errors(rep):
    pts = rep.sample_points
    truth = [(2.0, np.ones(len(pts))), (3.0, 0.5 * pts[:, 0])]
    got = rep.recovered_electric
    if len(got) < 2:
        return None
    return [(abs(g[0] - t[0]), profile_error(g[1], t[1])) for g, t in zip(got, truth)]


def test_criterion_2_two_term_recursion(two_term_run, record):
    grid, rep, seconds = two_term_run
    errs = electric_errors(rep)
    lead = float(np.max(np.abs(grid.values - 1)))
    resid = rep.residual_norms[-1] if rep.residual_norms else np.inf
    ok = (errs is not None and all(d <= DEGREE_TOL and p <= PROFILE_TOL for d, p in errs)
          and resid < 1e-6 * lead and seconds <= 600 and not any(s.field for s in rep.steps))
    detail = (f"degree errors {[f'{d:.1e}' for d, _ in errs]}, profile errors {[f'{p:.1e}' for _, p in errs]}, "
              if errs else f"statuses {[s.value for s in rep.statuses]}, ")
    record(2, ok, detail + f"residual {resid / lead:.1e} of leading, {seconds:.0f} s")
    assert ok, detail


def _magnetic_field_errors(A, X):
    grid = forward_T(None, A, 1.0, GridSpec())
    rep = reconstruct_all(grid)
    F = rep.magnetic_field()
    A0 = rotation_potential()
    got = np.array([F.matrix(x[None])[0] for x in X])
    truth = np.array([curl_of(A0, x) for x in X])
    return rep, got, float(np.max(np.abs(got - truth)))


def test_criterion_3_magnetic_recovery(record):
    X = random_points(20, 1.0, 4.0, seed=3)
    A0 = rotation_potential()
    # gauge shift by the gradient of 0.7 x1 |x|^-2
    shifted = A0 + PowerVectorField.gradient_of(PowerSum(3, {((1, 0, 0), 2.0): 0.7}))
    rep0, F0, err0 = _magnetic_field_errors(A0, X)
    rep1, F1, err1 = _magnetic_field_errors(shifted, X)
    gauge = float(np.max(np.abs(F0 - F1)))
    no_electric = all(s.electric is None for s in rep0.steps + rep1.steps)
    ok = err0 <= 5e-3 and err1 <= 5e-3 and gauge <= 5e-3 and no_electric
    record(3, ok, f"field error {err0:.1e}, shifted gauge error {err1:.1e}, gauge difference {gauge:.1e}")
    assert ok


def test_criterion_4_gauge_construction(record):
    F = TwoFormField.from_potential(rotation_potential(), 2.0)
    X = random_points(20, 3.0, 10.0, seed=1)
    curl_err = max(float(np.max(np.abs(curl_of(lambda z: build_A(F, z), x) - F.matrix(x[None])[0]))) for x in X)
    Y = random_points(50, 2.0, 20.0, seed=2)
    Y[0] *= 2.0 / np.linalg.norm(Y[0])
    exact = bool(np.array_equal(build_A(F, Y), a_reg(F, Y)))
    rng = np.random.default_rng(4)
    P = rng.normal(size=(10, 3))
    path = max(abs(u_potential(F, p) - u_potential(F, p, via=rng.normal(size=3))) for p in P)
    ok = curl_err <= 1e-6 and exact and path <= 1e-8
    record(4, ok, f"curl error {curl_err:.1e}, far region identical {exact}, path difference {path:.1e}")
    assert ok


def _order(grid, values):
    S, m, K = values.shape
    return fit_homogeneous_sharp(grid.radii, values.reshape(S * m, K)).degree


def test_criterion_5_symbol_hierarchy(record):
    spec = GridSpec(level=1)
    g1 = forward_T(V_LEAD, None, 1.0, spec)
    R1, Q1 = split_R_Q(g1, V_LEAD, None)
    g12 = forward_T(V_TWO, None, 1.0, spec)
    _, Q12 = split_R_Q(g12, V_TWO, None)
    R2, _ = split_R_Q(g12, V_NEXT, None)
    gap = _order(g1, Q1.values) - _order(g1, R1.values)
    gap2 = _order(g1, Q12.values - Q1.values) - _order(g1, R2.values)
    ok = gap >= 0.9 and gap2 >= 0.9
    record(5, ok, f"order gap Q vs R {gap:.3f}, Q(V1+V2)-Q(V1) vs R(V2) {gap2:.3f}")
    assert ok


def test_criterion_6_parity_and_split(record):
    rng = np.random.default_rng(6)
    om = rng.normal(size=(40, 3))
    om /= np.linalg.norm(om, axis=1, keepdims=True)
    y = rng.normal(size=(40, 3))
    y -= np.einsum("nd,nd->n", y, om)[:, None] * om
    y *= rng.uniform(0.5, 5, (40, 1)) / np.linalg.norm(y, axis=1, keepdims=True)
    A = rotation_potential()
    parity = reassembly = realness = 0.0
    for lam in (1.0, 2.0):
        k = np.sqrt(lam)
        Rp, Rn = born_batch(V_TWO, A, om, y, lam), born_batch(V_TWO, A, -om, y, lam)
        Re, Rm, residue = even_odd_split(Rp, Rn, lam, return_residue=True)
        # independent line integrals with the orientation reversed
        parity = max(parity, float(np.max(np.abs(Re - xray_electric_batch(V_TWO, -om, y)))),
                     float(np.max(np.abs(Rm + xray_magnetic_batch(A, -om, y)))))
        scale = np.max(np.abs(np.concatenate([Rp, Rn])))
        back_p = Re / (2j * k) + 1j * Rm
        back_n = Re / (2j * k) - 1j * Rm
        reassembly = max(reassembly, float(np.max(np.abs(np.concatenate([back_p - Rp, back_n - Rn]))) / scale))
        realness = max(realness, residue)
    ok = parity <= 1e-10 and reassembly <= 1e-12 and realness <= 1e-8
    record(6, ok, f"parity {parity:.1e}, reassembly {reassembly:.1e}, imaginary residue {realness:.1e}")
    assert ok


def test_criterion_7_radon(record):
    gauss = radon_sinogram(lambda y: np.exp(-np.sum(y * y, axis=-1)))
    kap = np.linspace(0, 6, 13)
    vhat = np.array([fourier_slice(gauss, k * np.array([np.cos(0.3), np.sin(0.3)])) for k in kap])
    spec_err = float(np.max(np.abs(vhat - 0.5 * np.exp(-kap**2 / 4))))
    rational = radon_sinogram(lambda y: 1 / (1 + np.sum(y * y, axis=-1)), tail_degree=2.0)
    origin_g = abs(invert_at_origin(gauss) - 1)
    origin_r = abs(invert_at_origin(rational) - 1)
    ok = spec_err <= 1e-6 and origin_g <= 1e-3 and origin_r <= 1e-3
    record(7, ok, f"slice spectrum error {spec_err:.1e}, origin Gaussian {origin_g:.1e}, "
                  f"origin rational {origin_r:.1e}")
    assert ok


def _vanishes(v, n_omega=64):
    a = 2 * np.pi * np.arange(n_omega) / n_omega
    W = np.stack([np.cos(a), np.sin(a)], axis=1)
    return max(abs(halfcircle_integral(v, w, s)) for w in W for s in (+1, -1)) <= 1e-10


def test_criterion_8_counter_example(record):
    quad = CircleProfile.quadrupole(np.array([np.cos(0.4), np.sin(0.4)]))
    a = 2 * np.pi * np.arange(64) / 64
    qmax = max(abs(halfcircle_integral(quad, np.array([np.cos(t), np.sin(t)]), s)) for t in a for s in (+1, -1))
    q_conditions = check_vanishing_conditions(quad) == (True, True)
    rng = np.random.default_rng(8)
    agree, n_vanish = 0, 0
    for i in range(30):
        n = rng.integers(1, 5)
        an, bn = rng.normal(size=n), rng.normal(size=n)
        a0 = rng.normal()
        # a third of the profiles keep only even harmonics and no mean
        if i % 3 == 0:
            a0, an[0::2], bn[0::2] = 0.0, 0.0, 0.0
        v = CircleProfile.from_fourier(a0, a=an, b=bn)
        vanish = _vanishes(v)
        n_vanish += vanish
        agree += vanish == all(check_vanishing_conditions(v))
    ok = qmax <= 1e-12 and q_conditions and agree == 30 and 0 < n_vanish < 30
    record(8, ok, f"quadrupole max {qmax:.1e}, conditions {q_conditions}, "
                  f"equivalence {agree}/30 ({n_vanish} vanishing)")
    assert ok


def test_criterion_9_single_energy(two_term_run, record):
    _, rep1, _ = two_term_run
    rep2 = reconstruct_all(forward_T(V_TWO, None, 2.0, GridSpec()))
    e1, e2 = rep1.recovered_electric, rep2.recovered_electric
    ok = len(e1) == len(e2) == 2
    worst_d = worst_p = np.inf
    if ok:
        worst_d = max(abs(a[0] - b[0]) for a, b in zip(e1, e2))
        worst_p = max(profile_error(b[1], a[1]) for a, b in zip(e1, e2))
        ok = worst_d <= DEGREE_TOL and worst_p <= PROFILE_TOL
    record(9, ok, f"degree difference {worst_d:.1e}, profile difference {worst_p:.1e}")
    assert ok


def test_criterion_10_zero_branch(record):
    spec = GridSpec(level=1)
    zero = reconstruct_all(forward_T(None, None, 1.0, spec))
    # a pure gauge and a field far below the detection threshold
    faint = [forward_T(None, SumVectorField([GaussianGradient(3, 1.0, 1.0)]), 1.0, spec),
             forward_T(V_LEAD.scaled(1e-12), None, 1.0, spec)]
    reps = [reconstruct_all(g) for g in faint]
    sizes = [float(np.max(np.abs(g.values - 1))) for g in faint]
    ok = zero.is_empty and zero.statuses == [StepStatus.ZERO] and all(
        r.statuses == [StepStatus.ZERO] and r.is_empty and any("faster" in n for n in r.notes) for r in reps)
    record(10, ok, f"zero grid statuses {[s.value for s in zero.statuses]}, sub-threshold grids with "
                   f"|a-1| {sizes[0]:.1e} and {sizes[1]:.1e} statuses {[r.statuses[0].value for r in reps]}")
    assert ok
