"""Command-line driver: scenario configs, grid and report files, sinogram and circle-profile tables.

Exit codes: 0 ok, 1 roundtrip budget violated, 2 config error, 3 unsupported
dimension, 4 malformed input file.
"""
from __future__ import annotations

import argparse
import io
import json
import sys
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .cex2d import CircleProfile, check_vanishing_conditions, verification_table
from .core import AsymptoticScalarField, HomogeneousTerm, UnsupportedDimensionError, sphere_grid
from .fields import TwoFormField, check_closed
from .invert import InversionParams, StepStatus, _check_grid, reconstruct_all
from .radon2d import PlaneFrame, electric_provider, magnetic_provider
from .symbol import AmplitudeParams, GridSpec, SymbolGrid, forward_T

GRID_FORMAT = "asymscat-grid 1"
SINOGRAM_FORMAT = "asymscat-sinogram 1"
EXIT_OK, EXIT_BUDGET, EXIT_CONFIG, EXIT_DIMENSION, EXIT_INPUT = 0, 1, 2, 3, 4


class ConfigError(ValueError):
    def __init__(self, where, message):
        super().__init__(f"{where}: {message}")
        self.where = where


class GridFormatError(ValueError):
    pass


# ---------------------------------------------------------------------------
# scenario config

@dataclass
class GridParams:
    r_min: float = 16.0
    r_max: float = 128.0
    n_radii: int = 9
    level: int = 3
    n_tangent: int = 12


@dataclass
class Tolerances:
    zero_threshold: float = 1e-9
    degree_tol: float = 0.05
    profile_tol: float = 0.05


@dataclass
class ScenarioConfig:
    """Fields, grid, truncation and tolerances of one run.

    ``electric`` is a list of ``{"degree", "profile"}`` terms and ``magnetic``
    a list of ``{"component": [i, j], "degree", "profile"}`` terms, with
    profiles as ``[[exponents], coefficient]`` pairs.
    """

    d: int = 3
    energy: float = 1.0
    electric: list = field(default_factory=list)
    magnetic: list = field(default_factory=list)
    grid: GridParams = field(default_factory=GridParams)
    truncation: tuple = (1, 2)
    tolerances: Tolerances = field(default_factory=Tolerances)
    seed: int = 0

    # -- serialization

    def to_dict(self):
        out = asdict(self)
        out["truncation"] = {"n_transport": self.truncation[0], "m_alpha": self.truncation[1]}
        return out

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("<root>", "config must be an object")
        known = {"d", "energy", "electric", "magnetic", "grid", "truncation", "tolerances", "seed"}
        for key in data:
            if key not in known:
                raise ConfigError(key, "unknown field")
        kw = {}
        if "d" in data:
            kw["d"] = _int(data["d"], "d")
        if "energy" in data:
            kw["energy"] = _float(data["energy"], "energy")
        if "seed" in data:
            kw["seed"] = _int(data["seed"], "seed")
        kw["electric"] = [_term(t, f"electric[{n}]", False) for n, t in enumerate(_list(data.get("electric", []), "electric"))]
        kw["magnetic"] = [_term(t, f"magnetic[{n}]", True) for n, t in enumerate(_list(data.get("magnetic", []), "magnetic"))]
        kw["grid"] = _sub(GridParams, data.get("grid", {}), "grid")
        kw["tolerances"] = _sub(Tolerances, data.get("tolerances", {}), "tolerances")
        tr = data.get("truncation", {"n_transport": 1, "m_alpha": 2})
        if not isinstance(tr, dict) or set(tr) - {"n_transport", "m_alpha"}:
            raise ConfigError("truncation", "expected {n_transport, m_alpha}")
        kw["truncation"] = (_int(tr.get("n_transport", 1), "truncation.n_transport"),
                            _int(tr.get("m_alpha", 2), "truncation.m_alpha"))
        cfg = cls(**kw)
        cfg.validate()
        return cfg

    @classmethod
    def from_json(cls, text):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"line {exc.lineno}", exc.msg) from None
        return cls.from_dict(data)

    # -- checks

    def validate(self):
        if self.d < 2:
            raise ConfigError("d", "dimension must be at least 2")
        if not self.energy > 0:
            raise ConfigError("energy", "energy must be positive")
        prev = None
        for n, t in enumerate(self.electric):
            where = f"electric[{n}]"
            if not t["degree"] > 1:
                raise ConfigError(f"{where}.degree", "electric degrees must exceed 1")
            if prev is not None and not t["degree"] > prev:
                raise ConfigError(f"{where}.degree", "electric degrees must be strictly increasing")
            prev = t["degree"]
            _check_profile(t, where, self.d)
        last = {}
        for n, t in enumerate(self.magnetic):
            where = f"magnetic[{n}]"
            i, j = t["component"]
            if not (0 <= i < j < self.d):
                raise ConfigError(f"{where}.component", f"need 0 <= i < j < {self.d}")
            if not t["degree"] > 2:
                raise ConfigError(f"{where}.degree", "field degrees must exceed 2")
            if (i, j) in last and not t["degree"] > last[(i, j)]:
                raise ConfigError(f"{where}.degree", "field degrees must be strictly increasing per component")
            last[(i, j)] = t["degree"]
            _check_profile(t, where, self.d)
        g = self.grid
        if not 0 < g.r_min < g.r_max:
            raise ConfigError("grid.r_min", "need 0 < r_min < r_max")
        if g.n_radii < 1 or g.level < 0 or g.n_tangent < 1:
            raise ConfigError("grid", "counts must be positive")
        if min(self.truncation) < 0:
            raise ConfigError("truncation", "truncation orders must be nonnegative")
        tol = self.tolerances
        for name in ("zero_threshold", "degree_tol", "profile_tol"):
            if not getattr(tol, name) > 0:
                raise ConfigError(f"tolerances.{name}", "must be positive")
        if self.magnetic:
            F = self.field()
            pts, _ = sphere_grid(self.d, 1)
            scale = max(np.max(np.abs(F.matrix(3 * p))) for p in pts)
            if check_closed(F, 3 * pts) > 1e-6 * max(scale, 1e-300):
                raise ConfigError("magnetic", "field is not closed (dF != 0)")

    # -- fields

    def potential(self):
        if not self.electric:
            return None
        terms = tuple(HomogeneousTerm(t["degree"], _profile(t)) for t in self.electric)
        return AsymptoticScalarField(terms, d=self.d)

    def field(self):
        if not self.magnetic:
            return None
        comps = {}
        for t in self.magnetic:
            f = AsymptoticScalarField.single(t["degree"], _profile(t), d=self.d)
            key = tuple(t["component"])
            comps[key] = comps[key] + f if key in comps else f
        return TwoFormField(self.d, comps)

    def grid_spec(self):
        g = self.grid
        return GridSpec(self.d, g.level, g.n_tangent, g.r_min, g.r_max, g.n_radii)

    def amp_params(self):
        return AmplitudeParams(n_transport=self.truncation[0], m_alpha=self.truncation[1])

    def inversion_params(self, max_terms=None, workers=1):
        tol = self.tolerances
        p = InversionParams(zero_threshold=tol.zero_threshold, degree_tol=tol.degree_tol,
                            profile_tol=tol.profile_tol, workers=workers)
        return p if max_terms is None else replace(p, max_terms=max_terms)


def _int(v, where):
    if isinstance(v, bool) or not isinstance(v, int):
        raise ConfigError(where, "expected an integer")
    return v


def _float(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(where, "expected a number")
    return float(v)


def _list(v, where):
    if not isinstance(v, list):
        raise ConfigError(where, "expected a list")
    return v


def _sub(cls, data, where):
    if not isinstance(data, dict):
        raise ConfigError(where, "expected an object")
    kw = {}
    for key, v in data.items():
        if key not in cls.__dataclass_fields__:
            raise ConfigError(f"{where}.{key}", "unknown field")
        kind = cls.__dataclass_fields__[key].type
        kw[key] = _int(v, f"{where}.{key}") if kind == "int" else _float(v, f"{where}.{key}")
    return cls(**kw)


def _term(t, where, magnetic):
    if not isinstance(t, dict):
        raise ConfigError(where, "expected an object")
    allowed = {"degree", "profile"} | ({"component"} if magnetic else set())
    for key in t:
        if key not in allowed:
            raise ConfigError(f"{where}.{key}", "unknown field")
    for key in allowed:
        if key not in t:
            raise ConfigError(f"{where}.{key}", "missing")
    out = {"degree": _float(t["degree"], f"{where}.degree")}
    if magnetic:
        c = _list(t["component"], f"{where}.component")
        if len(c) != 2:
            raise ConfigError(f"{where}.component", "expected [i, j]")
        out["component"] = [_int(c[0], f"{where}.component"), _int(c[1], f"{where}.component")]
    prof = []
    for n, pair in enumerate(_list(t["profile"], f"{where}.profile")):
        w = f"{where}.profile[{n}]"
        if not isinstance(pair, list) or len(pair) != 2 or not isinstance(pair[0], list):
            raise ConfigError(w, "expected [[exponents], coefficient]")
        exps = [_int(e, w) for e in pair[0]]
        if any(e < 0 for e in exps):
            raise ConfigError(w, "exponents must be nonnegative")
        prof.append([exps, _float(pair[1], w)])
    out["profile"] = prof
    return out


def _check_profile(t, where, d):
    for n, (exps, _) in enumerate(t["profile"]):
        if len(exps) != d:
            raise ConfigError(f"{where}.profile[{n}]", f"expected {d} exponents")


def _profile(t):
    prof = {}
    for exps, c in t["profile"]:
        prof[tuple(exps)] = prof.get(tuple(exps), 0.0) + c
    return prof


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(path, exc.strerror) from None
    return ScenarioConfig.from_json(text)


# ---------------------------------------------------------------------------
# grid files

def _g(x):
    return format(float(x), ".17g")


def write_grid(grid: SymbolGrid, fh):
    d = grid.d
    S, m, K = grid.values.shape
    fh.write(f"# {GRID_FORMAT}\n# d={d}\n# energy={_g(grid.energy)}\n")
    fh.write(f"# truncation={grid.truncation[0]},{grid.truncation[1]}\n")
    fh.write(f"# shape={S},{m},{K}\n")
    cols = [f"omega_{i + 1}" for i in range(d)] + [f"yhat_{i + 1}" for i in range(d)] + ["r", "re_a", "im_a"]
    fh.write(",".join(cols) + "\n")
    for i in range(S):
        om = ",".join(_g(v) for v in grid.directions[i])
        for j in range(m):
            yh = ",".join(_g(v) for v in grid.tangents[i, j])
            for k in range(K):
                a = grid.values[i, j, k]
                fh.write(f"{om},{yh},{_g(grid.radii[k])},{_g(a.real)},{_g(a.imag)}\n")


def _unique_rows(A):
    keys, order = {}, []
    for n, row in enumerate(A):
        key = tuple(row.tolist())
        if key not in keys:
            keys[key] = len(order)
            order.append(n)
    return keys, order


def read_grid(fh) -> SymbolGrid:
    header, rows = {}, []
    lines = fh.read().splitlines()
    if not lines or lines[0].strip() != f"# {GRID_FORMAT}":
        raise GridFormatError(f"line 1: expected header '# {GRID_FORMAT}'")
    n_line = 1
    for n_line, line in enumerate(lines[1:], start=2):
        if not line.startswith("#"):
            break
        key, _, val = line[1:].strip().partition("=")
        header[key.strip()] = val.strip()
    try:
        d = int(header["d"])
        energy = float(header["energy"])
        truncation = tuple(int(v) for v in header["truncation"].split(","))
    except (KeyError, ValueError) as exc:
        raise GridFormatError(f"header: missing or bad field ({exc})") from None
    if len(truncation) != 2 or not energy > 0 or d < 1:
        raise GridFormatError("header: bad truncation, energy or dimension")
    body = lines[n_line - 1:]
    if not body:
        raise GridFormatError("missing column header")
    ncol = 2 * d + 3
    if len(body[0].split(",")) != ncol:
        raise GridFormatError(f"line {n_line}: expected {ncol} columns for d={d}")
    for n, line in enumerate(body[1:], start=n_line + 1):
        if not line.strip():
            continue
        parts = line.split(",")
        if len(parts) != ncol:
            raise GridFormatError(f"line {n}: expected {ncol} values, got {len(parts)}")
        try:
            rows.append([float(v) for v in parts])
        except ValueError:
            raise GridFormatError(f"line {n}: non-numeric value") from None
    if not rows:
        raise GridFormatError("grid has no data rows")
    data = np.array(rows)
    if not np.all(np.isfinite(data)):
        raise GridFormatError("grid contains non-finite values")
    om_keys, om_first = _unique_rows(data[:, :d])
    r_keys, r_first = _unique_rows(data[:, 2 * d:2 * d + 1])
    radii = data[r_first, 2 * d]
    S, K = len(om_first), len(radii)
    groups = [[] for _ in range(S)]
    for row in data:
        groups[om_keys[tuple(row[:d].tolist())]].append(row)
    m = None
    tangents, values = [], []
    for i, g in enumerate(groups):
        g = np.array(g)
        t_keys, t_first = _unique_rows(g[:, d:2 * d])
        if m is None:
            m = len(t_first)
        if len(t_first) != m or len(g) != m * K:
            raise GridFormatError(f"direction {i}: incomplete block of feet and radii")
        vals = np.full((m, K), np.nan, dtype=complex)
        for row in g:
            j = t_keys[tuple(row[d:2 * d].tolist())]
            k = r_keys[(row[2 * d],)]
            vals[j, k] = row[2 * d + 1] + 1j * row[2 * d + 2]
        if np.any(np.isnan(vals)):
            raise GridFormatError(f"direction {i}: duplicate rows")
        tangents.append(g[t_first, d:2 * d])
        values.append(vals)
    try:
        return SymbolGrid(energy, data[om_first, :d], np.array(tangents), radii, np.array(values), truncation)
    except ValueError as exc:
        raise GridFormatError(str(exc)) from None


def check_orientations(grid: SymbolGrid):
    try:
        grid.antipode_index()
    except ValueError:
        D = grid.directions
        missing = [i for i, w in enumerate(D) if np.min(np.linalg.norm(D + w, axis=1)) > 1e-9]
        w = D[missing[0]]
        raise GridFormatError(f"missing orientation: {len(missing)} direction(s) lack rows for -omega, "
                              f"e.g. omega=({', '.join(f'{v:.6g}' for v in w)})") from None


# ---------------------------------------------------------------------------
# reports

def report_json(report) -> str:
    return json.dumps(report.to_dict(), indent=2, sort_keys=True) + "\n"


def _layer_truth(cfg: ScenarioConfig):
    """Ground-truth layers keyed by the symbol order ``mu``."""
    layers = {}
    for t in cfg.electric:
        layers.setdefault(round(t["degree"] - 1, 9), {"electric": None, "field": {}})["electric"] = t
    for t in cfg.magnetic:
        layer = layers.setdefault(round(t["degree"] - 2, 9), {"electric": None, "field": {}})
        key = tuple(t["component"])
        layer["field"].setdefault(key, {})
        for e, c in t["profile"]:
            layer["field"][key][tuple(e)] = layer["field"][key].get(tuple(e), 0.0) + c
    return [(mu, layers[mu]) for mu in sorted(layers)]


def compare_report(cfg: ScenarioConfig, report, points):
    """Lines of per-term errors and the first violated budget (or None)."""
    from .core import eval_poly

    tol = cfg.tolerances
    lines, failure = [], None
    truth = _layer_truth(cfg)
    recovered = [s for s in report.steps if s.status is StepStatus.RECOVERED]
    for s in report.steps:
        if s.status in (StepStatus.DEGREE_AMBIGUOUS, StepStatus.TRUNCATION_LIMIT):
            lines.append(f"step {s.n}: {s.status.value} ({s.message})")
            failure = failure or f"step {s.n} status {s.status.value}"
    for n, (mu, layer) in enumerate(truth):
        if n >= len(recovered):
            lines.append(f"term {n + 1}: order {mu:g} not recovered")
            failure = failure or f"term {n + 1} missing"
            continue
        s = recovered[n]
        derr = abs(s.mu - mu)
        lines.append(f"term {n + 1}: order {s.mu:.8f} expected {mu:g} error {derr:.3e}")
        if derr > tol.degree_tol:
            failure = failure or f"term {n + 1} degree error {derr:.3e} > {tol.degree_tol}"
        pairs = []
        if layer["electric"] is not None or s.electric is not None:
            true_v = eval_poly(_profile(layer["electric"]), points) if layer["electric"] else np.zeros(len(points))
            got = s.electric.profile_at(points) if s.electric is not None else np.zeros(len(points))
            pairs.append(("V", true_v, got))
        keys = sorted(set(layer["field"]) | set(s.field or {}))
        for key in keys:
            true_f = eval_poly(layer["field"][key], points) if key in layer["field"] else np.zeros(len(points))
            got = s.field[key].profile_at(points) if s.field and key in s.field else np.zeros(len(points))
            pairs.append((f"F{key[0] + 1}{key[1] + 1}", true_f, got))
        scale = max([np.max(np.abs(t)) for _, t, _ in pairs] + [1e-300])
        for name, t, g in pairs:
            perr = float(np.max(np.abs(g - t)) / scale)
            lines.append(f"  {name} profile error {perr:.3e}")
            if perr > tol.profile_tol:
                failure = failure or f"term {n + 1} {name} profile error {perr:.3e} > {tol.profile_tol}"
    for s in recovered[len(truth):]:
        lines.append(f"term {s.n}: spurious order {s.mu:.6f}")
        failure = failure or f"spurious term at step {s.n}"
    return lines, failure


# ---------------------------------------------------------------------------
# commands

def _write_text(text, out):
    if out in (None, "-"):
        sys.stdout.write(text)
    else:
        with open(out, "w", newline="\n") as fh:
            fh.write(text)


def _apply_overrides(cfg: ScenarioConfig, args):
    tol = cfg.tolerances
    if getattr(args, "tolerance_profile", None) is not None:
        tol = replace(tol, profile_tol=args.tolerance_profile)
    if getattr(args, "tolerance_degree", None) is not None:
        tol = replace(tol, degree_tol=args.tolerance_degree)
    cfg = replace(cfg, tolerances=tol)
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    cfg.validate()
    return cfg


def _forward(cfg: ScenarioConfig, threads=1):
    return forward_T(cfg.potential(), cfg.field(), cfg.energy, cfg.grid_spec(), cfg.amp_params(), workers=threads)


def cmd_forward(args):
    cfg = _apply_overrides(load_config(args.config), args)
    grid = _forward(cfg, args.threads)
    buf = io.StringIO()
    write_grid(grid, buf)
    _write_text(buf.getvalue(), args.out)
    return EXIT_OK


def _invert(grid, cfg, max_terms, threads):
    if grid.d < 3:
        raise UnsupportedDimensionError("inversion needs d >= 3")
    check_orientations(grid)
    try:
        _check_grid(grid)
    except UnsupportedDimensionError:
        raise
    except ValueError as exc:
        raise GridFormatError(str(exc)) from None
    return reconstruct_all(grid, max_terms, cfg.inversion_params(max_terms, threads))


def cmd_invert(args):
    cfg = _apply_overrides(load_config(args.config) if args.config else ScenarioConfig(), args)
    try:
        with open(args.grid) as fh:
            grid = read_grid(fh)
    except OSError as exc:
        raise GridFormatError(f"{args.grid}: {exc.strerror}") from None
    report = _invert(grid, cfg, args.max_terms, args.threads)
    _write_text(report_json(report), args.out)
    return EXIT_OK


def cmd_roundtrip(args):
    cfg = _apply_overrides(load_config(args.config), args)
    if cfg.d < 3:
        raise UnsupportedDimensionError("inversion needs d >= 3")
    grid = _forward(cfg, args.threads)
    report = _invert(grid, cfg, args.max_terms, args.threads)
    rng = np.random.default_rng(cfg.seed)
    extra = rng.normal(size=(20, cfg.d))
    points = np.vstack([report.sample_points, extra / np.linalg.norm(extra, axis=1, keepdims=True)])
    lines, failure = compare_report(cfg, report, points)
    if report.is_empty and not cfg.electric and not cfg.magnetic:
        lines.append("empty report: no terms in the data")
    for line in lines:
        print(line)
    if args.out:
        _write_text(report_json(report), args.out)
    if failure:
        print(f"FAIL: {failure}")
        return EXIT_BUDGET
    print("PASS")
    return EXIT_OK


_PROFILES = {
    "quadrupole": CircleProfile.quadrupole,
    "cos": lambda: CircleProfile.from_fourier(0.0, a=(1.0,)),
    "one": CircleProfile.constant,
}


def counterexample_csv(profile: CircleProfile, n_omega=16) -> str:
    even, zero_mean = check_vanishing_conditions(profile)
    buf = io.StringIO()
    buf.write(f"# even={str(even).lower()}\n# zero_mean={str(zero_mean).lower()}\n")
    buf.write("angle,omega_1,omega_2,integral_plus,integral_minus\n")
    for row in verification_table(profile, n_omega):
        buf.write(",".join(_g(v) for v in row) + "\n")
    return buf.getvalue()


def cmd_counterexample(args):
    if args.fourier is not None:
        try:
            vals = [float(v) for v in args.fourier.split(",")]
        except ValueError:
            raise ConfigError("--fourier", "expected comma-separated numbers a0,a1,b1,a2,b2,...") from None
        profile = CircleProfile.from_fourier(vals[0], a=vals[1::2], b=vals[2::2])
    else:
        profile = _PROFILES[args.profile]()
    text = counterexample_csv(profile, args.n_omega)
    _write_text(text, args.out)
    if args.out not in (None, "-"):
        print(text.splitlines()[0][2:], text.splitlines()[1][2:])
    return EXIT_OK


def sinogram_csv(cfg: ScenarioConfig, point, kind="electric", n_angles=64, n_offsets=129, s_max=20.0) -> str:
    """Line data on the plane through ``point`` orthogonal to it: rows ``(angle, offset, value)``."""
    point = np.asarray(point, dtype=float)
    if cfg.d != 3:
        raise UnsupportedDimensionError("sinogram planes are built for d = 3")
    if point.size != 3:
        raise ConfigError("--point", "expected 3 coordinates")
    frame = PlaneFrame.at(point)
    theta = np.pi * np.arange(n_angles) / n_angles
    s = np.linspace(-s_max, s_max, n_offsets)
    om = np.repeat(frame.direction(theta), n_offsets, axis=0)
    feet = (point[None, None, :] + s[None, :, None] * frame.normal(theta)[:, None, :]).reshape(-1, 3)
    if kind == "electric":
        V = cfg.potential()
        vals = np.zeros(len(feet)) if V is None else electric_provider(V)(om, feet)
    else:
        F = cfg.field()
        vals = np.zeros(len(feet)) if F is None else magnetic_provider(F)(om, feet)
    buf = io.StringIO()
    buf.write(f"# {SINOGRAM_FORMAT}\n# kind={kind}\n# point={','.join(_g(v) for v in point)}\n")
    buf.write("angle,offset,value\n")
    for (th, off), v in zip(((t, o) for t in theta for o in s), vals):
        buf.write(f"{_g(th)},{_g(off)},{_g(v)}\n")
    return buf.getvalue()


def cmd_radon(args):
    cfg = _apply_overrides(load_config(args.config), args)
    try:
        point = [float(v) for v in args.point.split(",")]
    except ValueError:
        raise ConfigError("--point", "expected comma-separated coordinates") from None
    _write_text(sinogram_csv(cfg, point, args.kind, args.n_angles, args.n_offsets, args.s_max), args.out)
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point

def build_parser():
    p = argparse.ArgumentParser(prog="asymscat", description="Scattering symbols of asymptotically homogeneous fields.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, config_required=True):
        sp.add_argument("--config", required=config_required, help="scenario config (JSON)")
        sp.add_argument("--out", default=None, help="output file (default stdout)")
        sp.add_argument("--threads", type=int, default=1)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--tolerance-profile", type=float, default=None)
        sp.add_argument("--tolerance-degree", type=float, default=None)

    sp = sub.add_parser("forward", help="fill a symbol grid from a config")
    common(sp)
    sp.set_defaults(func=cmd_forward)

    sp = sub.add_parser("invert", help="layer-strip a grid file into a JSON report")
    sp.add_argument("grid")
    common(sp, config_required=False)
    sp.add_argument("--max-terms", type=int, default=None)
    sp.set_defaults(func=cmd_invert)

    sp = sub.add_parser("roundtrip", help="forward then invert, compared with the config")
    common(sp)
    sp.add_argument("--max-terms", type=int, default=None)
    sp.set_defaults(func=cmd_roundtrip)

    sp = sub.add_parser("counterexample", help="half-circle table of a planar order -2 profile")
    sp.add_argument("--out", default=None)
    sp.add_argument("--profile", choices=sorted(_PROFILES), default="quadrupole")
    sp.add_argument("--fourier", default=None, help="a0,a1,b1,a2,b2,... instead of --profile")
    sp.add_argument("--n-omega", type=int, default=16)
    sp.set_defaults(func=cmd_counterexample)

    sp = sub.add_parser("radon", help="dump the line data on the plane through a point")
    common(sp)
    sp.add_argument("--point", required=True, help="x1,x2,x3")
    sp.add_argument("--kind", choices=["electric", "magnetic"], default="electric")
    sp.add_argument("--n-angles", type=int, default=64)
    sp.add_argument("--n-offsets", type=int, default=129)
    sp.add_argument("--s-max", type=float, default=20.0)
    sp.set_defaults(func=cmd_radon)
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    if getattr(args, "threads", 1) < 1:
        print("error: --threads must be positive", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except UnsupportedDimensionError as exc:
        print(f"unsupported dimension: {exc}", file=sys.stderr)
        return EXIT_DIMENSION
    except GridFormatError as exc:
        print(f"malformed input: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
