"""Scenario-driven batch runner and the `simlab` command line tool.

A scenario is a TOML file naming a spectral model, a drift, one or more
sample ensembles, and a list of checks with parameters.  `run` executes
every check, writes report.json, summary.csv, and per-check plot CSVs
into the output directory, and exits 0 (healthy), 1 (unexpected verdict),
2 (config error), or 3 (degraded resolution).  Negative controls are
declared with `expected_failure = true` and count as healthy when they
fail.

Determinism contract: artifacts depend only on the config file content.
Check jobs carry seeds derived from (scenario seed, job index), ensembles
are sampled once up front, and the worker pool (SIMLAB_THREADS, fork
start method) only reorders execution, never results, so summary.csv is
byte-identical for any worker count.

Config keys:

    name, seed, output_dir
    [model]       kind = "dirichlet" | "ou"; n; beta | lam; grid_factor
    [drift]       kind = "zero" | "nemytskii" | "radial" | "kernel";
                  b_coeffs | profile | factors+gains+linear; zeta_r;
                  fit_super, super_power, super_a
    [constants]   zeta_r (defaults to the drift's certificate)
    [[ensembles]] name; kind = "gaussian_oracle" | "ergodic" | "gibbs_ula";
                  count; step/burn_in/thinning/dt
    [[checks]]    kind = one of CHECK_KINDS; parameters; ensemble;
                  expected_failure
"""

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:                      # 3.10 fallback
    import tomli as tomllib

from .drift_models import (DriftSpec, fit_super_pair, kernel_drift,
                           nemytskii_drift, radial_drift, zero_drift)
from .inequality_harness import (InequalityReport, _report,
                                 check_concentration, check_eps_log_sobolev,
                                 check_fernique, check_gradient_estimate,
                                 check_harnack, check_log_sobolev,
                                 check_poincare, check_semigroup_log_sobolev,
                                 check_supercontractivity_integrals,
                                 check_ultrabounded, concentration_curve,
                                 constants_for, hypercontractivity_norm_oracle,
                                 reports_to_csv, suite_exit_code)
from .lasry_lions import property_suite, standard_corpus
from .sde_integrator import IntegratorConfig, integrate, integrate_variational
from .semigroup_mc import (MeasureEnsemble, gaussian_invariant_sample,
                           gibbs_oracle_sample, invariance_battery,
                           sample_invariant, tf_cylindrical_tanh, tf_linear,
                           tf_r_norm_squared)
from .spectral_core import (SpectralModel, build_dirichlet_laplacian, e_norm,
                            ou_model, r_norm)

__all__ = [
    "ConfigError",
    "Scenario",
    "load_scenario",
    "run_scenario",
    "write_artifacts",
    "run_ll_suite",
    "compare_documents",
    "PRESETS",
    "PAPER_EQ_TAGS",
    "main",
]

# fixed enumeration of inequality tags; every emitted report must use one
PAPER_EQ_TAGS = frozenset({
    "INEQ-LSI", "INEQ-POINCARE", "INEQ-HYPER", "INEQ-HARNACK",
    "INEQ-CONC-TAIL", "INEQ-FERNIQUE", "INEQ-SUPER-EXP",
    "INEQ-SEMIGROUP-LSI", "INEQ-EPS-LSI", "INEQ-GRAD", "INEQ-ULTRA",
    "INEQ-VAR-E", "INEQ-VAR-R", "INEQ-INVARIANT-MATCH",
    "INEQ-LL-APPROX", "INEQ-LL-BOUND", "INEQ-LL-GRAD",
})

CHECK_KINDS = frozenset({
    "log_sobolev", "poincare", "hyper_oracle", "harnack_oracle",
    "harnack_mc", "concentration", "fernique", "supercontractivity",
    "semigroup_log_sobolev", "eps_log_sobolev", "gradient_estimate",
    "ultrabounded", "invariant_match", "variational",
})


class ConfigError(ValueError):
    """Scenario file cannot be loaded or violates an invariant."""


# ------------------------------------------------------------------- scenario

@dataclass(frozen=True)
class Scenario:
    name: str
    seed: int
    output_dir: str
    model: SpectralModel
    spec: DriftSpec
    zeta_r: float
    ensembles: tuple          # of dicts: name, kind, params
    checks: tuple             # of dicts: kind, params, expected_failure


def _build_model(cfg: dict) -> SpectralModel:
    kind = cfg.get("kind", "dirichlet")
    n = int(cfg.get("n", 1))
    if kind == "ou":
        return ou_model(n, lam=float(cfg.get("lam", -1.0)))
    if kind == "dirichlet":
        return build_dirichlet_laplacian(n, beta=float(cfg.get("beta", 0.0)),
                                         grid_factor=int(cfg.get("grid_factor", 1)))
    raise ConfigError(f"unknown model kind {kind!r}")


def _build_drift(cfg: dict, model: SpectralModel) -> DriftSpec:
    kind = cfg.get("kind", "zero")
    zr = cfg.get("zeta_r")
    zr = None if zr is None else float(zr)
    try:
        if kind == "zero":
            spec = zero_drift()
            if zr is not None:
                spec = replace(spec, zeta_R=zr)
        elif kind == "nemytskii":
            spec = nemytskii_drift(cfg["b_coeffs"], zeta_F=cfg.get("zeta_f"),
                                   zeta_R=zr)
        elif kind == "radial":
            spec = radial_drift(cfg["profile"], zeta_F=cfg.get("zeta_f"),
                                zeta_R=zr)
        elif kind == "kernel":
            spec = kernel_drift(cfg["factors"], cfg["gains"],
                                linear=float(cfg.get("linear", 0.0)),
                                zeta_F=cfg.get("zeta_f"), zeta_R=zr)
        else:
            raise ConfigError(f"unknown drift kind {kind!r}")
    except (KeyError, ValueError) as exc:
        raise ConfigError(f"drift: {exc}") from exc
    if cfg.get("fit_super", False):
        pair = fit_super_pair(spec, model, p=float(cfg.get("super_power", 4.0)),
                              a=float(cfg.get("super_a", 1.0)),
                              seed=int(cfg.get("super_seed", 0)))
        spec = spec.with_super(pair)
    return spec


def scenario_from_dict(data: dict) -> Scenario:
    try:
        name = data["name"]
    except KeyError:
        raise ConfigError("scenario needs a name") from None
    model = _build_model(data.get("model", {}))
    spec = _build_drift(data.get("drift", {}), model)
    zeta = model.zeta_A + spec.zeta_F
    if not zeta < 0:
        raise ConfigError(f"zeta_A + zeta_F = {zeta:g} must be negative")
    zeta_r = data.get("constants", {}).get("zeta_r")
    if zeta_r is None:
        zeta_r = spec.zeta_R if spec.zeta_R is not None else zeta
    ensembles = tuple(data.get("ensembles", []))
    names = [e.get("name") for e in ensembles]
    if len(set(names)) != len(names):
        raise ConfigError("duplicate ensemble names")
    for ens in ensembles:
        if ens.get("kind") not in ("gaussian_oracle", "ergodic", "gibbs_ula"):
            raise ConfigError(f"unknown ensemble kind {ens.get('kind')!r}")
        if ens["kind"] == "gibbs_ula":
            if spec.kind != "nemytskii":
                raise ConfigError("gibbs_ula needs a nemytskii drift")
            if not np.allclose(model.r, 1.0, rtol=1e-12, atol=0.0):
                raise ConfigError("gibbs_ula needs unit noise weights (beta=0)")
    checks = tuple(data.get("checks", []))
    for chk in checks:
        if chk.get("kind") not in CHECK_KINDS:
            raise ConfigError(f"unknown check kind {chk.get('kind')!r}")
        want = chk.get("ensemble", "invariant")
        if _needs_ensemble(chk["kind"]) and want not in names:
            raise ConfigError(f"check {chk['kind']!r} references missing "
                              f"ensemble {want!r}")
        ref = chk.get("reference")
        if ref is not None and ref not in names:
            raise ConfigError(f"missing reference ensemble {ref!r}")
    return Scenario(name=str(name), seed=int(data.get("seed", 0)),
                    output_dir=str(data.get("output_dir", f"runs/{name}")),
                    model=model, spec=spec, zeta_r=float(zeta_r),
                    ensembles=ensembles, checks=checks)


def _needs_ensemble(kind: str) -> bool:
    return kind not in ("hyper_oracle", "harnack_oracle", "harnack_mc",
                        "semigroup_log_sobolev", "gradient_estimate",
                        "variational")


def load_scenario(source: str) -> Scenario:
    """Load from a TOML path, or from a preset name."""
    if os.path.exists(source):
        with open(source, "rb") as fh:
            raw = fh.read().decode("utf-8")
    elif source in PRESETS:
        raw = PRESETS[source]
    else:
        raise ConfigError(f"no such config file or preset: {source}")
    try:
        data = tomllib.loads(raw)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"TOML parse error: {exc}") from exc
    return scenario_from_dict(data)


# ----------------------------------------------------------------- observables

def _observable(model: SpectralModel, name: str):
    e1 = np.eye(model.n)[0]
    if name == "linear_e1":
        return tf_linear(e1)
    if name == "tanh_e1":
        return tf_cylindrical_tanh(e1)
    if name == "tanh_half_e1":
        return tf_cylindrical_tanh(0.5 * e1)
    if name == "r_norm_sq_cap4":
        return tf_r_norm_squared(cap=4.0)
    raise ConfigError(f"unknown observable {name!r}")


# -------------------------------------------------------------------- runtime

@dataclass(frozen=True)
class RunContext:
    scenario: Scenario
    pack: object
    ensembles: dict


def build_runtime(scenario: Scenario) -> RunContext:
    """Sample every configured ensemble once; jobs only read them."""
    pack = constants_for(scenario.model, scenario.zeta_r)
    ensembles = {}
    for i, cfg in enumerate(scenario.ensembles):
        seed = scenario.seed + 1000003 * (i + 1)
        kind = cfg["kind"]
        count = int(cfg.get("count", 10 ** 4))
        if kind == "gaussian_oracle":
            ens = gaussian_invariant_sample(scenario.model, count, seed=seed)
        elif kind == "ergodic":
            ens = sample_invariant(scenario.model, scenario.spec, count=count,
                                   seed=seed,
                                   burn_in=cfg.get("burn_in"),
                                   thinning=cfg.get("thinning"),
                                   dt=cfg.get("dt"))
        else:
            ens = gibbs_oracle_sample(scenario.model, scenario.spec.b_coeffs,
                                      count, step=float(cfg.get("step", 0.01)),
                                      seed=seed)
        ensembles[cfg["name"]] = ens
    return RunContext(scenario=scenario, pack=pack, ensembles=ensembles)


# ------------------------------------------------------------------------ jobs

def expand_jobs(scenario: Scenario) -> list:
    """Flatten check configs into single-report-sized parallel jobs."""
    jobs = []

    def add(kind, label, **params):
        jobs.append({"kind": kind, "label": label, **params})

    for idx, chk in enumerate(scenario.checks):
        kind = chk["kind"]
        base = f"{kind}#{idx}"
        if kind == "log_sobolev":
            nphi = len(invariance_battery(scenario.model))
            for i in range(nphi):
                for p in chk.get("p", [2.0]):
                    add(kind, f"{base}[phi{i},p={p:g}]", cfg=chk,
                        phi_index=i, p=float(p))
        elif kind == "hyper_oracle":
            for th in chk["thetas"]:
                add(kind, f"{base}[theta={th:g}]", cfg=chk, theta=float(th))
        elif kind in ("harnack_oracle", "harnack_mc"):
            for p in chk["p"]:
                for t in chk["t"]:
                    for s in chk["shift"]:
                        add(kind, f"{base}[p={p:g},t={t:g},s={s:g}]",
                            cfg=chk, p=float(p), t=float(t), shift=float(s))
        else:
            add(kind, base, cfg=chk)
    return jobs


def _two_sided_report(name, tag, lhs, lhs_se, rhs, rhs_se, scenario, seed,
                      note, k_sigma):
    jse = math.hypot(lhs_se, rhs_se)
    within = abs(rhs - lhs) <= k_sigma * jse
    rep = _report(name, tag, lhs, lhs_se, rhs, rhs_se, scenario, seed,
                  note=note + f" two_sided k={k_sigma:g}")
    return replace(rep, verdict="pass_within_noise" if within else "fail")


def _job_variational(ctx: RunContext, job: dict, seed: int, label: str):
    """Pathwise decay of the derivative flow in the sup and weighted norms.

    Both bounds must hold at every recorded time, for every trajectory
    and direction, with the step-size tolerance factor 1 + 10 dt.
    """
    scn = ctx.scenario
    cfg = job["cfg"]
    dt = float(cfg.get("dt", 1e-3))
    horizon = float(cfg.get("horizon", 1.0))
    count = int(cfg.get("count", 100))
    d = int(cfg.get("directions", 2))
    model, spec = scn.model, scn.spec
    rng = np.random.default_rng(np.random.SeedSequence((seed, 97)))
    x0 = 0.5 * rng.standard_normal((count, model.n))
    dirs = rng.standard_normal((d, model.n))
    icfg = IntegratorConfig(dt=dt, horizon=horizon, seed=seed)
    traj = integrate(model, spec, icfg, x0)
    if bool(np.any(traj.diverged)):
        rep = _report("variational_e_bound", "INEQ-VAR-E", math.inf, 0.0, 0.0,
                      0.0, label, seed, note="trajectories diverged")
        return [replace(rep, verdict="fail")], {}
    var = integrate_variational(model, spec, traj, dirs)
    fine = model.with_grid_factor(8)
    zeta_e = model.zeta_A + spec.zeta_F
    tol = 1.0 + 10.0 * dt
    e0 = e_norm(fine, dirs)
    r0 = r_norm(model, dirs)
    worst_e = worst_r = 0.0
    for j, t in enumerate(var.times):
        y = var.states[j]                       # (count, d, n)
        worst_e = max(worst_e, float(np.max(
            e_norm(fine, y) / (math.exp(zeta_e * t) * e0))))
        worst_r = max(worst_r, float(np.max(
            r_norm(model, y) / (math.exp(scn.zeta_r * t) * r0))))
    note = f"count={count} dt={dt:g} horizon={horizon:g}"
    reports = [_report("variational_e_bound", "INEQ-VAR-E", worst_e, 0.0, tol,
                       0.0, label, seed, note=note),
               _report("variational_r_bound", "INEQ-VAR-R", worst_r, 0.0, tol,
                       0.0, label, seed, note=note)]
    return reports, {}


def _job_invariant_match(ctx: RunContext, job: dict, seed: int, label: str):
    cfg = job["cfg"]
    a = ctx.ensembles[cfg.get("ensemble", "invariant")]
    b = ctx.ensembles[cfg["reference"]]
    modes = int(cfg.get("modes", 4))
    k_sigma = float(cfg.get("k_sigma", 4.0))
    reports = []
    for k in range(modes):
        va, sa = _variance_and_se(a.points[:, k])
        vb, sb = _variance_and_se(b.points[:, k])
        reports.append(_two_sided_report(
            "invariant_match", "INEQ-INVARIANT-MATCH", vb, sb, va, sa, label,
            seed, note=f"mode={k + 1} {b.provenance} vs {a.provenance}",
            k_sigma=k_sigma))
    return reports, {}


def _variance_and_se(x: np.ndarray) -> tuple:
    v = float(x.var(ddof=1))
    centered = (x - x.mean()) ** 2
    return v, float(centered.std(ddof=1) / math.sqrt(len(x)))


def _dispatch(ctx: RunContext, index: int, job: dict):
    scn = ctx.scenario
    seed = scn.seed + 7919 * (index + 1)
    cfg = job["cfg"]
    kind = job["kind"]
    label = f"{scn.name}:{job['label']}"
    expected = bool(cfg.get("expected_failure", False))
    model, spec, pack = scn.model, scn.spec, ctx.pack
    ens = ctx.ensembles.get(cfg.get("ensemble", "invariant"))

    if kind == "log_sobolev":
        phi = invariance_battery(model)[job["phi_index"]]
        rep = check_log_sobolev(model, ens, phi, job["p"], pack,
                                scenario=label, seed=seed)
        return [rep], {}
    if kind == "poincare":
        phi = _observable(model, cfg.get("phi", "linear_e1"))
        rep = check_poincare(model, ens, phi, pack, scenario=label, seed=seed,
                             constant_override=cfg.get("constant_override"))
        return [rep], {}
    if kind == "hyper_oracle":
        theta = job["theta"] * np.eye(model.n)[0]
        t, q = float(cfg["t"]), float(cfg["q"])
        lhs, rhs = hypercontractivity_norm_oracle(model, t, q, theta, pack)
        p_max = pack.hyper_exponent_limit(q, t)
        rep = _report("hypercontractivity_oracle", "INEQ-HYPER", lhs, 0.0,
                      rhs, 0.0, label, seed,
                      note=f"theta={job['theta']:g} q={q:g} p_max={p_max:.6g}")
        return [rep], {}
    if kind in ("harnack_oracle", "harnack_mc"):
        phi = _observable(model, cfg.get("phi", "tanh_e1"))
        h = job["shift"] * model.r[0] * np.eye(model.n)[0]
        rep = check_harnack(model, spec, job["t"], np.zeros(model.n), h,
                            job["p"], phi, samples=int(cfg.get("samples", 4000)),
                            seed=seed, constants=pack, scenario=label,
                            dt=float(cfg.get("dt", 5e-3)),
                            oracle=kind == "harnack_oracle")
        return [rep], {}
    if kind == "concentration":
        phi = _observable(model, cfg.get("phi", "linear_e1"))
        r_variant = bool(cfg.get("r_variant", True))
        grid_size = int(cfg.get("grid_size", 12))
        rep = check_concentration(model, ens, phi, pack, r_variant=r_variant,
                                  scenario=label, seed=seed,
                                  grid_size=grid_size)
        curve = concentration_curve(model, ens, phi, pack,
                                    r_variant=r_variant, grid_size=grid_size)
        rows = [[r["t"], r["empirical"], r["wilson_hi"], r["bound"]]
                for r in curve["rows"]]
        art = {f"tail_{job['label'].replace('#', '_')}.csv":
               (["t", "empirical", "wilson_hi", "bound"], rows)}
        return [rep], art
    if kind == "fernique":
        reps = check_fernique(model, ens, cfg["lambdas"], pack,
                              r_variant=bool(cfg.get("r_variant", True)),
                              scenario=label, seed=seed)
        return reps, {}
    if kind == "supercontractivity":
        rep = check_supercontractivity_integrals(model, ens, cfg["lambdas"],
                                                 scenario=label, seed=seed,
                                                 expected_failure=expected)
        return [rep], {}
    if kind == "semigroup_log_sobolev":
        phi = _observable(model, cfg.get("phi", "tanh_e1"))
        x = float(cfg.get("x_scale", 0.3)) * np.ones(model.n)
        rep = check_semigroup_log_sobolev(model, spec, float(cfg["t"]), x, phi,
                                          pack,
                                          samples=int(cfg.get("samples", 10000)),
                                          seed=seed, scenario=label,
                                          dt=float(cfg.get("dt", 0.01)),
                                          floor=float(cfg.get("floor", 1.0)))
        return [rep], {}
    if kind == "eps_log_sobolev":
        phi = _observable(model, cfg.get("phi", "tanh_e1"))
        reps = check_eps_log_sobolev(model, ens, phi, cfg["eps"], pack,
                                     scenario=label, seed=seed)
        return reps, {}
    if kind == "gradient_estimate":
        phi = _observable(model, cfg.get("phi", "tanh_e1"))
        x = float(cfg.get("x_scale", 0.3)) * np.ones(model.n)
        rep = check_gradient_estimate(model, spec, float(cfg["t"]), x, phi,
                                      pack,
                                      samples=int(cfg.get("samples", 3000)),
                                      seed=seed, scenario=label,
                                      dt=float(cfg.get("dt", 5e-3)))
        return [rep], {}
    if kind == "ultrabounded":
        p = cfg.get("p", "inf")
        p = math.inf if p == "inf" else float(p)
        rep = check_ultrabounded(model, spec, ens, t=float(cfg["t"]),
                                 lam=float(cfg["lam"]), p=p,
                                 samples=int(cfg.get("samples", 128)),
                                 seed=seed, scenario=label,
                                 n_starts=int(cfg.get("starts", 16)),
                                 dt=float(cfg.get("dt", 2e-3)),
                                 expected_failure=expected)
        return [rep], {}
    if kind == "invariant_match":
        return _job_invariant_match(ctx, job, seed, label)
    if kind == "variational":
        return _job_variational(ctx, job, seed, label)
    raise ConfigError(f"unknown check kind {kind!r}")


# ---------------------------------------------------------------- pool runner

_CTX = None          # inherited by forked pool workers


def _run_job(payload):
    index, job = payload
    reports, artifacts = _dispatch(_CTX, index, job)
    for rep in reports:
        assert rep.paper_eq in PAPER_EQ_TAGS, rep.paper_eq
    return index, reports, artifacts


def run_scenario(scenario: Scenario, workers: int = 1):
    """Execute all checks; returns (reports, artifacts) in job order."""
    global _CTX
    _CTX = build_runtime(scenario)
    payloads = list(enumerate(expand_jobs(scenario)))
    try:
        if workers <= 1 or len(payloads) <= 1:
            results = [_run_job(p) for p in payloads]
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                results = list(pool.map(_run_job, payloads))
    finally:
        _CTX = None
    results.sort(key=lambda item: item[0])
    reports, artifacts = [], {}
    for _, reps, arts in results:
        reports.extend(reps)
        artifacts.update(arts)
    return reports, artifacts


def write_artifacts(outdir: str, name: str, seed: int, reports, artifacts,
                    exit_code: int):
    os.makedirs(outdir, exist_ok=True)
    doc = {"scenario": name, "seed": seed, "exit_code": exit_code,
           "reports": [asdict(r) for r in reports]}
    with open(os.path.join(outdir, "report.json"), "w") as fh:
        json.dump(doc, fh, indent=2)
    reports_to_csv(os.path.join(outdir, "summary.csv"), reports)
    for fname, (header, rows) in sorted(artifacts.items()):
        with open(os.path.join(outdir, fname), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([repr(v) for v in row])


# ------------------------------------------------------------ envelope suite

def run_ll_suite(dims, eps_grid, mode: str, samples: int = 3,
                 seed: int = 0) -> list:
    """Property-suite reports over the standard corpus at the given dims.

    Each member yields up to three reports: the two-sided approximation
    gate (one-sidedness folded in), the sup-norm gate (bounded members
    only), and the difference-quotient gate; the pass threshold is the
    optimizer slack 1e-6 (1 + sup scale).
    """
    reports = []
    for n in dims:
        model = build_dirichlet_laplacian(n, beta=0.5)
        rng = np.random.default_rng(np.random.SeedSequence((seed, n)))
        xs = 0.5 * rng.standard_normal((samples, n))
        for f in standard_corpus(model, seed=0):
            rep = property_suite(f, eps_grid, xs, model, mode=mode, seed=seed)
            label = f"ll-{n}d:{f.label}"
            slack = rep["slack"]
            degraded = rep["stalled"] > 0
            note = f"mode={mode} monotone_ok={rep['monotone_ok']}"
            gates = [("ll_approximation", "INEQ-LL-APPROX",
                      max(rep["one_sided_violation"],
                          rep["approximation_violation"])),
                     ("ll_gradient_quotient", "INEQ-LL-GRAD",
                      rep["quotient_violation"])]
            if rep["boundedness_violation"] is not None:
                gates.insert(1, ("ll_boundedness", "INEQ-LL-BOUND",
                                 rep["boundedness_violation"]))
            for gname, tag, violation in gates:
                reports.append(_report(gname, tag, violation, 0.0, slack, 0.0,
                                       label, seed, note=note,
                                       degraded=degraded))
    return reports


# ----------------------------------------------------------------- comparison

def compare_documents(doc_a: dict, doc_b: dict) -> dict:
    """Margin deltas and verdict flips between two report documents."""

    def keyed(doc):
        # notes embed data-dependent values, so keys use the report's
        # position within its (name, scenario) group; job expansion makes
        # that order a function of the config alone
        rows = doc["reports"] if isinstance(doc, dict) else doc
        out = {}
        seen = {}
        for r in rows:
            base = f"{r['name']}|{r['scenario']}"
            k = seen.get(base, 0)
            seen[base] = k + 1
            out[f"{base}#{k}"] = r
        return out

    a, b = keyed(doc_a), keyed(doc_b)
    if a.keys() != b.keys():
        only_a = sorted(a.keys() - b.keys())[:5]
        only_b = sorted(b.keys() - a.keys())[:5]
        raise ConfigError(f"mismatched check keys; only_a={only_a} "
                          f"only_b={only_b}")
    differing = []
    flips = []
    for key in a:
        ra, rb = a[key], b[key]
        delta = rb["margin"] - ra["margin"]
        flip = ra["verdict"] != rb["verdict"]
        if flip:
            flips.append(key)
        if flip or delta != 0.0:
            differing.append({"key": key, "margin_a": ra["margin"],
                              "margin_b": rb["margin"], "delta": delta,
                              "verdict_a": ra["verdict"],
                              "verdict_b": rb["verdict"], "flip": flip})
    return {"checks_compared": len(a), "differing": differing,
            "verdict_flips": flips}


# -------------------------------------------------------------------- presets

_LN3 = "1.0986122886681098"
_PI_SQ = "9.869604401089358"

PRESETS = {
    "ou": f"""\
name = "ou"
seed = 11
output_dir = "runs/ou"

[model]
kind = "ou"
n = 1
lam = -1.0

[drift]
kind = "zero"

[[ensembles]]
name = "invariant"
kind = "gaussian_oracle"
count = 200000

[[checks]]
kind = "log_sobolev"
p = [1.0, 2.0]

[[checks]]
kind = "poincare"
phi = "linear_e1"

[[checks]]
kind = "hyper_oracle"
q = 2.0
t = {_LN3}
thetas = [0.25, 0.5, 1.0, -0.5, -1.0]

[[checks]]
kind = "harnack_oracle"
p = [1.5, 2.0, 4.0]
t = [0.25, 0.5, 1.0]
shift = [0.25, 0.5, 1.0]

[[checks]]
kind = "harnack_mc"
p = [2.0]
t = [0.5]
shift = [0.5]
samples = 4000

[[checks]]
kind = "concentration"
phi = "linear_e1"

[[checks]]
kind = "fernique"
lambdas = [0.05, 0.0884]
r_variant = false

[[checks]]
kind = "supercontractivity"
lambdas = [0.25, 0.5, 0.9, 1.1, 2.0]
expected_failure = true

[[checks]]
kind = "ultrabounded"
t = 1.0
lam = 1.0
expected_failure = true
""",
    "reaction_diffusion_cubic": f"""\
name = "reaction_diffusion_cubic"
seed = 7
output_dir = "runs/reaction_diffusion_cubic"

[model]
kind = "dirichlet"
n = 8
beta = 0.0

[drift]
kind = "nemytskii"
b_coeffs = [0.0, 0.0, 0.0, 1.0]
zeta_r = -{_PI_SQ}
fit_super = true
super_power = 4.0
super_a = 1.0

[constants]
zeta_r = -{_PI_SQ}

[[ensembles]]
name = "invariant"
kind = "ergodic"
count = 10000

[[ensembles]]
name = "gibbs"
kind = "gibbs_ula"
count = 10000
step = 0.01

[[checks]]
kind = "invariant_match"
ensemble = "invariant"
reference = "gibbs"
modes = 4
k_sigma = 4.0

[[checks]]
kind = "supercontractivity"
ensemble = "gibbs"
lambdas = [0.5, 1.0, 2.0, 5.0, 10.0]

[[checks]]
kind = "semigroup_log_sobolev"
phi = "tanh_e1"
t = 0.5
samples = 10000
dt = 0.01
floor = 1.0

[[checks]]
kind = "eps_log_sobolev"
ensemble = "gibbs"
phi = "tanh_e1"
eps = [0.1, 0.5, 1.0]

[[checks]]
kind = "ultrabounded"
ensemble = "gibbs"
t = 1.0
lam = 1.0
p = "inf"
samples = 128
starts = 16

[[checks]]
kind = "ultrabounded"
ensemble = "gibbs"
t = 1.0
lam = 1.0
p = 4.0
samples = 128
starts = 16

[[checks]]
kind = "gradient_estimate"
phi = "tanh_e1"
t = 0.3
samples = 3000
dt = 0.005

[[checks]]
kind = "variational"
count = 100
dt = 0.001
horizon = 1.0
directions = 2
""",
    "radial": """\
name = "radial"
seed = 23
output_dir = "runs/radial"

[model]
kind = "dirichlet"
n = 4
beta = 0.0

[drift]
kind = "radial"
profile = "power:0.25:2"

[[ensembles]]
name = "invariant"
kind = "ergodic"
count = 6000

[[checks]]
kind = "log_sobolev"
p = [2.0]

[[checks]]
kind = "poincare"
phi = "linear_e1"

[[checks]]
kind = "concentration"
phi = "linear_e1"

[[checks]]
kind = "fernique"
lambdas = [0.1, 0.3]
""",
    "kernel_poly": f"""\
name = "kernel_poly"
seed = 31
output_dir = "runs/kernel_poly"

[model]
kind = "dirichlet"
n = 6
beta = 0.0

[drift]
kind = "kernel"
factors = [[1.0, 0.5, 0.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, -0.5, 0.25, 0.0]]
gains = [-0.5, -0.25]
linear = -0.5
zeta_r = -{_PI_SQ}

[[ensembles]]
name = "invariant"
kind = "ergodic"
count = 6000

[[checks]]
kind = "log_sobolev"
p = [2.0]

[[checks]]
kind = "poincare"
phi = "linear_e1"

[[checks]]
kind = "supercontractivity"
lambdas = [0.5, 1.0, 2.0]

[[checks]]
kind = "eps_log_sobolev"
phi = "tanh_e1"
eps = [0.1, 0.5]

[[checks]]
kind = "harnack_mc"
p = [2.0]
t = [0.5]
shift = [0.5]
samples = 2000
""",
}

PRESET_NOTES = {
    "ou": "linear scalar baseline with exact Gaussian oracles and the two "
          "designed negative controls",
    "reaction_diffusion_cubic": "cubic reaction term on 8 modes, ergodic vs "
                                "Langevin cross-validation and the full "
                                "nonlinear check battery",
    "radial": "radial polynomial drift, invariant-measure checks",
    "kernel_poly": "low-rank cubic kernel drift, contraction and entropy "
                   "checks",
}


# ------------------------------------------------------------------- commands

def _cmd_run(args) -> int:
    scenario = load_scenario(args.config)
    if args.out:
        scenario = replace(scenario, output_dir=args.out)
    workers = args.workers
    if workers is None:
        raw = os.environ.get("SIMLAB_THREADS", "1")
        try:
            workers = int(raw)
        except ValueError as exc:
            raise ConfigError(
                f"SIMLAB_THREADS must be an integer, got {raw!r}") from exc
    reports, artifacts = run_scenario(scenario, workers=max(1, workers))
    code = suite_exit_code(reports)
    write_artifacts(scenario.output_dir, scenario.name, scenario.seed,
                    reports, artifacts, code)
    fails = sum(r.verdict == "fail" for r in reports)
    print(f"{scenario.name}: {len(reports)} reports, {fails} failing, "
          f"exit {code} -> {scenario.output_dir}")
    return code


def _cmd_ll_test(args) -> int:
    dims = {"n1": [1], "n2": [2], "both": [1, 2]}[args.corpus]
    try:
        eps_grid = [float(v) for v in args.eps_grid.split(",") if v]
    except ValueError as exc:
        raise ConfigError(f"bad --eps-grid: {exc}") from exc
    if not eps_grid or any(e <= 0 for e in eps_grid):
        raise ConfigError("--eps-grid needs positive values")
    reports = run_ll_suite(dims, eps_grid, args.mode, samples=args.samples,
                           seed=args.seed)
    code = suite_exit_code(reports)
    write_artifacts(args.out, "ll-test", args.seed, reports, {}, code)
    fails = sum(r.verdict == "fail" for r in reports)
    print(f"ll-test: {len(reports)} reports, {fails} failing, exit {code} "
          f"-> {args.out}")
    return code


def _cmd_compare(args) -> int:
    docs = []
    for path in (args.report_a, args.report_b):
        try:
            with open(path) as fh:
                docs.append(json.load(fh))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read report {path}: {exc}") from exc
    diff = compare_documents(docs[0], docs[1])
    text = json.dumps(diff, indent=2)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(text + "\n")
    print(text)
    return 1 if diff["verdict_flips"] else 0


def _cmd_presets(args) -> int:
    for name in sorted(PRESETS):
        print(f"{name}: {PRESET_NOTES[name]}")
    if args.write_dir:
        os.makedirs(args.write_dir, exist_ok=True)
        for name, text in PRESETS.items():
            with open(os.path.join(args.write_dir, f"{name}.toml"), "w") as fh:
                fh.write(text)
        print(f"wrote {len(PRESETS)} preset files to {args.write_dir}")
    return 0


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(
        prog="simlab",
        description="Scenario runner for the dissipative-SPDE check suite.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p_run = sub.add_parser("run", help="execute a scenario config or preset")
    p_run.add_argument("config", help="TOML path or preset name")
    p_run.add_argument("--out", default=None, help="override output_dir")
    p_run.add_argument("--workers", type=int, default=None,
                       help="worker count (default: SIMLAB_THREADS or 1)")

    p_ll = sub.add_parser("ll-test", help="run the envelope property suite")
    p_ll.add_argument("--eps-grid", default="0.1,1.0")
    p_ll.add_argument("--corpus", default="n1", choices=["n1", "n2", "both"])
    p_ll.add_argument("--mode", default="descent", choices=["grid", "descent"])
    p_ll.add_argument("--samples", type=int, default=3)
    p_ll.add_argument("--seed", type=int, default=0)
    p_ll.add_argument("--out", default="runs/ll_test")

    p_cmp = sub.add_parser("compare", help="diff two report.json documents")
    p_cmp.add_argument("report_a")
    p_cmp.add_argument("report_b")
    p_cmp.add_argument("--out", default=None)

    p_pre = sub.add_parser("presets", help="list or materialize presets")
    p_pre.add_argument("--write-dir", default=None)

    args = ap.parse_args(argv)
    handlers = {"run": _cmd_run, "ll-test": _cmd_ll_test,
                "compare": _cmd_compare, "presets": _cmd_presets}
    try:
        return handlers[args.cmd](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
