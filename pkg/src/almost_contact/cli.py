"""Command-line entry point: ``verify``, ``sweep`` and ``slice``.

Exit codes: 0 every check behaved as expected, 1 some check did not,
2 configuration error, 3 runtime evaluation error, 4 epsilon sweep failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import hashlib
import io
import json
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from . import verify as V
from .charts import FormEvaluationError, SamplingError, exterior_derivative
from .deformations import DeformationFamily
from .exterior import ContractError, wedge
from .models.binding import ModelConstructionError, torus_binding
from .models.collar import collar
from .models.milnor import milnor_model
from .models.product import product_model
from .profiles import (
    ProfileParams,
    build_profiles,
    parse_profile_section,
    validate_profiles,
)

REPORT_VERSION = 1
MODELS = ("torus-collar", "milnor", "product")
FORMATS = ("json", "csv")
EXIT_OK, EXIT_CHECKS, EXIT_CONFIG, EXIT_RUNTIME, EXIT_SWEEP = 0, 1, 2, 3, 4


class ConfigError(ValueError):
    pass


class CheckRuntimeError(RuntimeError):
    def __init__(self, check: str, cause: Exception):
        super().__init__(f"{check}: {type(cause).__name__}: {cause}")
        self.check = check


@dataclass(frozen=True)
class RunConfig:
    model: str = "torus-collar"
    seed: int = 7
    samples: int = 10_000
    t_grid: int = 101
    epsilon: float = 0.1
    sweep: bool = False
    eps_hi: float = 1.0
    omega_tilt: float = 0.0
    tol_pos: float = V.POS_THRESHOLD
    tol_res: float = V.RES_TOL
    delta_n: float = 0.05
    r_min: float = 0.05
    eps_bump: float = 0.1
    t: float = 1.0
    slice_points: int = 191
    out: str | None = None
    format: str = "json"
    profile: ProfileParams = field(default_factory=ProfileParams)

    def validate(self) -> "RunConfig":
        checks = [
            (self.model in MODELS, f"model must be one of {MODELS}"),
            (self.format in FORMATS, f"format must be one of {FORMATS}"),
            (1 <= self.samples <= 10_000_000, "samples must lie in [1, 1e7]"),
            (2 <= self.t_grid <= 100_001, "t_grid must lie in [2, 100001]"),
            (self.epsilon > 0, "epsilon must be positive"),
            (self.eps_hi > 0, "eps_hi must be positive"),
            (self.omega_tilt >= 0, "omega_tilt must be non-negative"),
            (self.tol_pos >= 0 and self.tol_res > 0, "tolerances must be positive"),
            (0 < self.delta_n < 0.5, "delta_n must lie in (0, 0.5)"),
            (0 < self.r_min < 0.1, "r_min must lie in (0, 0.1)"),
            (0 < self.eps_bump <= 0.2, "eps_bump must lie in (0, 0.2]"),
            (0 <= self.t <= 1, "t must lie in [0, 1]"),
            (2 <= self.slice_points <= 1_000_000, "slice_points must lie in [2, 1e6]"),
            (self.seed >= 0, "seed must be non-negative"),
        ]
        for ok, msg in checks:
            if not ok:
                raise ConfigError(msg)
        return self

    def to_dict(self) -> dict:
        d = asdict(self)
        d["profile"] = self.profile.to_dict()
        d.pop("out")
        return d

    def content_hash(self) -> str:
        """Git blob id of the canonical JSON config (``git hash-object`` gives the same)."""
        blob = json.dumps(self.to_dict(), sort_keys=True).encode()
        return hashlib.sha1(b"blob %d\0" % len(blob) + blob).hexdigest()


_RUN_KEYS = {f.name: f.type for f in fields(RunConfig) if f.name != "profile"}


def _coerce(key: str, raw):
    default = getattr(RunConfig, key, None)
    if key == "out":
        return None if raw in (None, "") else str(raw)
    if isinstance(default, bool):
        if isinstance(raw, bool):
            return raw
        s = str(raw).strip().lower()
        if s in ("1", "true", "yes", "on"):
            return True
        if s in ("0", "false", "no", "off"):
            return False
        raise ConfigError(f"{key}: expected a boolean, got {raw!r}")
    try:
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{key}: {exc}") from None
    return str(raw)


def load_config_file(path) -> tuple[dict, ProfileParams | None]:
    """``[run]`` and ``[profile]`` sections; anything else is rejected."""
    cp = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    unknown = set(cp.sections()) - {"run", "profile"}
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    run = {}
    if cp.has_section("run"):
        for key, raw in cp["run"].items():
            key = key.replace("-", "_")
            if key not in _RUN_KEYS:
                raise ConfigError(f"unknown config key {key!r}")
            run[key] = _coerce(key, raw)
    profile = None
    if cp.has_section("profile"):
        try:
            profile = parse_profile_section(dict(cp["profile"]))
        except (KeyError, ValueError) as exc:
            raise ConfigError(f"profile section: {exc}") from None
    return run, profile


def build_config(args: argparse.Namespace) -> RunConfig:
    values: dict = {}
    profile = None
    if args.config:
        values, profile = load_config_file(args.config)
    for key in _RUN_KEYS:
        v = getattr(args, key, None)
        if v is not None:
            values[key] = _coerce(key, v)
    cfg = RunConfig(**values)
    if profile is not None:
        cfg = replace(cfg, profile=profile)
    return cfg.validate()


# --------------------------------------------------------------------------
# suites


def _run(name: str, fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except (FormEvaluationError, SamplingError, ModelConstructionError, ContractError,
            FloatingPointError, np.linalg.LinAlgError) as exc:
        raise CheckRuntimeError(name, exc) from exc


def _family(cfg: RunConfig, epsilon: float, profile=None) -> DeformationFamily:
    b = torus_binding(epsilon, cfg.omega_tilt, seed=cfg.seed)
    p = build_profiles(profile or cfg.profile)
    return DeformationFamily(collar(b, p, cfg.r_min), epsilon)


def _contact_over_grid(family, ts, points, kind, cfg, name, params):
    dom = family.collar.chart(kind)
    vals = np.stack([dom.density(family.contact_top(t, kind), points) for t in ts])
    rep = V.positivity_report(name, vals, points, cfg.tol_pos, "torus-collar", params, ts)
    return rep


def run_torus(cfg: RunConfig) -> tuple[list, V.SweepResult | None]:
    ts = np.linspace(0.0, 1.0, cfg.t_grid)
    base = {"seed": cfg.seed, "samples": cfg.samples}
    eps0 = cfg.eps_hi if cfg.sweep else cfg.epsilon
    fam = _run("model construction", _family, cfg, eps0)
    col = fam.collar
    pts = col.polar.sample(cfg.samples, cfg.seed)
    disk = col.chart("disk").sample(max(cfg.samples // 10, 100), cfg.seed + 1)
    npts = col.binding.chart.sample(1000, cfg.seed + 2)
    ovl = col.overlap_samples(1000, cfg.seed + 3)
    probes = V.probe_points(fam, 0.5, 200, cfg.seed + 4)
    sub = pts[:1000]
    ts_sub = ts[:: max(1, (len(ts) - 1) // 10)]
    reports: list = []

    reports += _run("binding invariants", V.binding_reports, fam, npts, params=base)
    prof = validate_profiles(col.profile)
    reports.append(V.CheckReport(
        "profile constraints", "torus-collar", base,
        min(r.margin for r in prof.results), None, None, None,
        "pass" if prof.passed else "fail", min(r.margin for r in prof.results),
        detail={"failures": prof.failures()},
    ))
    reports.append(V.residual_report(
        "noise floor d(d alpha0) x 10 below positivity threshold",
        [V.NOISE_FACTOR * _run("noise floor", V.noise_floor, col.alpha0(), sub)], sub[:1],
        cfg.tol_pos, "torus-collar", base))

    open_ts = ts[ts <= 0.99]
    reports.append(_run("contact t<=0.99", _contact_over_grid, fam, open_ts, pts, "polar", cfg,
                        "contact alpha_t (t<=0.99) [polar]", dict(base, chart="polar")))
    reports.append(_run("contact disk", _contact_over_grid, fam, open_ts, disk, "disk", cfg,
                        "contact alpha_t (t<=0.99) [disk]", dict(base, chart="disk")))
    reports.append(_run("contact t=1", _contact_over_grid, fam, [1.0], pts, "polar", cfg,
                        "contact alpha_1", dict(base, chart="polar")).expect("fail"))
    reports.append(_run("contact oracle", V.contact_oracle_check, fam, ts_sub, sub,
                        params=base))
    reports.append(_run("frobenius alpha_1", V.frobenius_residual, fam.alpha_t(1.0), pts,
                        cfg.tol_res, "torus-collar", dict(base, t=1.0)))
    reports.append(_run("frobenius alpha_0.9", V.frobenius_residual, fam.alpha_t(0.9), pts,
                        cfg.tol_res, "torus-collar", dict(base, t=0.9)).expect("fail"))
    reports.append(_run("collar overlap", V.collar_overlap_check, fam, ovl, tol=cfg.tol_res,
                        params=base))

    sweep = None
    eps = cfg.epsilon
    if cfg.sweep:
        sweep = _run("epsilon sweep", V.epsilon_sweep, fam, ts, pts, cfg.eps_hi,
                     binding_points=npts, seed=cfg.seed)
        reports.append(V.sweep_report(sweep, base))
        if sweep.failed:
            return reports, sweep
        eps = sweep.eps_max / 2
    fam = fam.with_epsilon(eps)
    p = dict(base, epsilon=eps)

    w0 = fam.omega_t(0.0).at(pts).values()
    fresh = exterior_derivative(col.alpha0()).at(pts).values()
    reports.append(V.residual_report("omega_0 = d alpha_0", np.abs(w0 - fresh).max(axis=1),
                                     pts, 1e-12, "torus-collar", p))
    leaf = _run("leafwise t=1", V.leafwise_symplectic_check, fam.alpha_t(1.0), fam.omega_t(1.0),
                2, col.polar, pts, cfg.tol_pos, cfg.tol_res, "torus-collar", dict(p, t=1.0))
    reports += V.channels(leaf)
    reports.append(_run("d omega_1 closed form", _domega_oracle, fam, pts, p))

    ev = _run("evaluator", V.CollarEvaluator, fam, pts)
    ev_disk = _run("evaluator", V.CollarEvaluator, fam, disk, "disk")
    reports.append(_run("almost contact polar", V.almost_contact_positivity, fam, ts, pts,
                        threshold=cfg.tol_pos, evaluator=ev, params=base))
    reports.append(_run("almost contact disk", V.almost_contact_positivity, fam, ts, disk, "disk",
                        threshold=cfg.tol_pos, evaluator=ev_disk, params=base))
    reports.append(_run("almost contact eps=0", V.almost_contact_positivity, fam, [1.0], pts,
                        threshold=cfg.tol_pos, epsilon=0.0, evaluator=ev,
                        params=base))
    reports[-1].check = "almost contact alpha_1^omega_1^2 (eps = 0)"
    reports[-1].expect("fail")
    reports += _run("term checks", V.term_checks, fam, ts, pts, evaluator=ev, params=base)
    reports.append(_run("decomposition", V.decomposition_check, fam, ts_sub, sub, params=base))
    cover_pts = np.concatenate([pts, probes])
    reports.append(_run("cover polar", V.equality_loci_cover_check, fam, cover_pts, ts,
                        threshold=cfg.tol_pos, params=base))
    reports.append(_run("cover disk", V.equality_loci_cover_check, fam, disk, ts, "disk",
                        threshold=cfg.tol_pos, evaluator=ev_disk, params=base))
    no_e = _run("model construction", _family, cfg, eps,
                replace(cfg.profile, e_amplitude=0.0))
    rep = _run("cover e=0", V.equality_loci_cover_check, no_e, probes, [1.0],
               threshold=cfg.tol_pos, params=dict(base, e_amplitude=0.0))
    rep.check = "equality loci do not cover (e = 0) [polar]"
    reports.append(rep.expect("fail"))
    return reports, sweep


def _domega_oracle(fam: DeformationFamily, pts, params) -> V.CheckReport:
    """``d omega_1 = eps e'(r) dr ^ dtheta ^ nu`` on the polar chart."""
    c = fam.collar.polar
    m = c.m
    lhs = exterior_derivative(fam.omega_t(1.0)).at(pts)
    de = fam.collar.profile.e.deriv(pts[:, m])
    drdth = c.chart.terms({(m, m + 1): np.ones(len(pts))})
    rhs = wedge(drdth, c.nu.at(pts)) * (fam.epsilon * de)
    return V.residual_report("d omega_1 = eps e' dr^dtheta^nu",
                             np.abs(lhs.values() - rhs.values()).max(axis=1), pts, V.RES_TOL,
                             "torus-collar", params)


def run_milnor(cfg: RunConfig) -> list:
    base = {"seed": cfg.seed, "samples": cfg.samples, "delta_N": cfg.delta_n}
    M = _run("model construction", milnor_model, cfg.delta_n)
    pts = _run("sampling", M.sphere.sample, cfg.samples, cfg.seed)
    pages = _run("sampling", M.pages.sample, max(cfg.samples // 10, 1), cfg.seed + 1)
    ts = np.linspace(0.0, 1.0, cfg.t_grid)
    reports = [_run("contact alpha_std", V.contact_check, M.alpha, 2, M.sphere, pts, cfg.tol_pos,
                    "milnor", base)]
    dens = M.sphere.density(M.contact_volume(), pts)
    reports.append(V.residual_report("alpha_std^dalpha^2 = 8 vol", np.abs(dens - 8.0), pts,
                                     V.REEB_TOL, "milnor", base))
    reports.append(_run("reeb certificate", V.reeb_certificate, M, pages, seed=cfg.seed,
                        params=base))
    reports.append(_run("adaptedness", V.adaptedness_check, M, pages, cfg.tol_pos,
                        seed=cfg.seed, params=base))
    reports.append(_run("adaptedness flipped", V.adaptedness_check, M, pages, cfg.tol_pos,
                        sign=-1.0, seed=cfg.seed, params=base).expect("fail"))
    reports += _run("outer branch", V.outer_branch_checks, M, ts, pages[:1000], cfg.tol_pos,
                    base)
    return reports


def run_product(cfg: RunConfig) -> list:
    base = {"seed": cfg.seed, "samples": cfg.samples, "eps_bump": cfg.eps_bump}
    model = _run("model construction", product_model, cfg.eps_bump, seed=cfg.seed)
    pts = _run("sampling", model.sample, cfg.samples, cfg.seed)
    reports = _run("product checks", V.product_checks, model, pts, threshold=cfg.tol_pos,
                   params=base)
    ovl = model.overlap_samples(1000, cfg.seed + 2)
    reports.append(_run("product overlap", V.product_overlap_checks, model, ovl, cfg.tol_res,
                        base))
    res, where = [], []
    for name, p in pts.items():
        c = model.chart(name)
        p = p[np.sum(p[:, :4] ** 2, axis=1) > 1e-4]  # the meridian projection needs q != 0
        res.append(np.abs(c.v0_literal.at(p).values() - c.v0.at(p).values()).max(axis=1))
        where.append(p)
    reports.append(V.residual_report("v0 = (1-x5^2) pi*lambda + x5 ds", np.concatenate(res),
                                     np.concatenate(where), cfg.tol_res, "product", base))
    return reports


def run_suite(cfg: RunConfig) -> tuple[list, V.SweepResult | None]:
    if cfg.model == "torus-collar":
        return run_torus(cfg)
    if cfg.model == "milnor":
        return run_milnor(cfg), None
    return run_product(cfg), None


def slice_rows(cfg: RunConfig, point=(1.0, 1.0, 1.0), theta: float = 0.0) -> list:
    """Rows ``r, term_mu, term_nu, term_theta, term_dr, sum, total`` at fixed binding coords."""
    fam = _family(cfg, cfg.epsilon)
    rs = np.linspace(cfg.r_min, 1.0, cfg.slice_points)
    pts = np.column_stack([np.full_like(rs, v) for v in point] + [rs, np.full_like(rs, theta)])
    ev = V.CollarEvaluator(fam, pts)
    terms = ev.term_densities(cfg.t, fam.epsilon)
    total = fam.collar.polar.density(fam.top(cfg.t), pts)
    return [[float(r), *map(float, terms[:, i]), float(terms[:, i].sum()), float(total[i])]
            for i, r in enumerate(rs)]


SLICE_HEADER = ["r", "term_mu", "term_nu", "term_theta", "term_dr", "sum", "total"]


# --------------------------------------------------------------------------
# output


def _records(cfg: RunConfig, reports: list) -> list:
    h = cfg.content_hash()
    return [dict(r.to_dict(), seed=cfg.seed, config_hash=h) for r in reports]


def render_json(cfg: RunConfig, reports: list, sweep=None) -> str:
    doc = {"version": REPORT_VERSION, "config": cfg.to_dict(), "config_hash": cfg.content_hash(),
           "reports": _records(cfg, reports)}
    if sweep is not None:
        doc["sweep"] = sweep.to_dict()
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def render_csv(cfg: RunConfig, reports: list) -> str:
    cols = ["check", "model", "status", "verdict", "expected", "min", "max", "residual",
            "margin", "seed", "config_hash"]
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(cols)
    for rec in _records(cfg, reports):
        w.writerow([rec[c] for c in cols])
    return buf.getvalue()


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _summary(reports: list, stream) -> None:
    for r in reports:
        print(f"{r.status:16s} {r.check}", file=stream)


def exit_status(reports: list) -> int:
    return EXIT_OK if all(r.as_expected for r in reports) else EXIT_CHECKS


# --------------------------------------------------------------------------
# commands


def cmd_verify(cfg: RunConfig) -> int:
    reports, sweep = run_suite(cfg)
    text = render_csv(cfg, reports) if cfg.format == "csv" else render_json(cfg, reports, sweep)
    _emit(text, cfg.out)
    _summary(reports, sys.stderr)
    if sweep is not None and sweep.failed:
        return EXIT_SWEEP
    return exit_status(reports)


def cmd_sweep(cfg: RunConfig) -> int:
    if cfg.model != "torus-collar":
        raise ConfigError("sweep needs model torus-collar")
    ts = np.linspace(0.0, 1.0, cfg.t_grid)
    fam = _run("model construction", _family, cfg, cfg.eps_hi)
    pts = fam.collar.polar.sample(cfg.samples, cfg.seed)
    npts = fam.collar.binding.chart.sample(1000, cfg.seed + 2)
    res = _run("epsilon sweep", V.epsilon_sweep, fam, ts, pts, cfg.eps_hi,
               binding_points=npts, seed=cfg.seed)
    if cfg.format == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epsilon", "passed"])
        w.writerows(res.trace)
        text = buf.getvalue()
    else:
        doc = {"version": REPORT_VERSION, "config": cfg.to_dict(),
               "config_hash": cfg.content_hash(), "sweep": res.to_dict()}
        text = json.dumps(doc, sort_keys=True, indent=2) + "\n"
    _emit(text, cfg.out)
    print(f"eps_max = {res.eps_max}", file=sys.stderr)
    if res.failed:
        return EXIT_SWEEP
    return EXIT_OK if V.sweep_monotone(res) else EXIT_CHECKS


def cmd_slice(cfg: RunConfig) -> int:
    if cfg.model != "torus-collar":
        raise ConfigError("slice needs model torus-collar")
    rows = _run("slice", slice_rows, cfg)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SLICE_HEADER)
    w.writerows(rows)
    _emit(buf.getvalue(), cfg.out)
    return EXIT_OK


COMMANDS = {"verify": cmd_verify, "sweep": cmd_sweep, "slice": cmd_slice}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="INI file with [run] and optional [profile] sections")
    common.add_argument("--model", choices=MODELS)
    common.add_argument("--seed", type=int)
    common.add_argument("--samples", type=int)
    common.add_argument("--t-grid", dest="t_grid", type=int, help="number of t values in [0, 1]")
    common.add_argument("--epsilon", type=float)
    common.add_argument("--sweep", action="store_const", const=True, default=None)
    common.add_argument("--eps-hi", dest="eps_hi", type=float)
    common.add_argument("--omega-tilt", dest="omega_tilt", type=float)
    common.add_argument("--tol-pos", dest="tol_pos", type=float)
    common.add_argument("--tol-res", dest="tol_res", type=float)
    common.add_argument("--delta-n", dest="delta_n", type=float)
    common.add_argument("--r-min", dest="r_min", type=float)
    common.add_argument("--eps-bump", dest="eps_bump", type=float)
    common.add_argument("--out")
    common.add_argument("--format", choices=FORMATS)
    parser = argparse.ArgumentParser(
        prog="almost-contact",
        description="Verify almost contact deformation families on coordinate models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("verify", parents=[common], help="run the check suite for one model")
    sub.add_parser("sweep", parents=[common], help="bisect for the largest admissible epsilon")
    sp = sub.add_parser("slice", parents=[common], help="CSV of the term decomposition vs r")
    sp.add_argument("--t", type=float)
    sp.add_argument("--slice-points", dest="slice_points", type=int)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        cfg = build_config(args)
        return COMMANDS[args.command](cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except CheckRuntimeError as exc:
        print(f"runtime error in check {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
