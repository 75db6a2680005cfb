"""Scenario runner: config parsing, experiment batteries, and file emission.

Experiments are thin orchestration over the library modules — every number
written to a report comes from a module operation; the only CLI-side
arithmetic is output formatting and the log-log least-squares fits of the
scaling study.  Outputs are deterministic: identical config + seed produce
byte-identical files.
"""

from __future__ import annotations

import configparser
import io
import json
import math
from dataclasses import dataclass, fields, replace

import numpy as np

from . import dde_sim, robustness, spectral, topology
from .errors import ParameterError

EXPERIMENTS = ("report", "delay-grid", "hinf-sweep", "add-remove", "scaling", "simulate")
ARRANGEMENTS = ("md", "explicit", "single")

TWO_OVER_SQRT3 = 2.0 / math.sqrt(3.0)


def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        if math.isinf(x):
            return "inf"
        return f"{x:.12g}"
    return str(x)


# ---------------------------------------------------------------------------
# Configuration
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ScenarioConfig:
    """One fully validated experiment scenario."""

    n: int
    k: int
    arrangement: str = "md"
    refs: tuple = ()
    position: int | None = None
    experiment: str = "report"
    taus: tuple = ()
    ns: tuple = ()
    gamma: float | None = None
    horizon: float | None = None
    step: float | None = None
    seed: int = 0
    dynamics: str = "velocity"
    tau: float = 0.0
    delay_mode: str = "full"
    disturbance: str = "none"
    amplitude: float = 0.0
    omega: float = 1.0
    sweep_csv: bool = False
    outdir: str = "results"

    def reference_set(self) -> topology.ReferenceSet:
        if self.arrangement == "md":
            return topology.md_arrangement(self.n, self.k)
        if self.arrangement == "explicit":
            return topology.make_reference_set(self.n, self.refs)
        return topology.make_reference_set(self.n, [self.position])


_INT_KEYS = {"n", "k", "position", "seed"}
_FLOAT_KEYS = {"gamma", "horizon", "step", "tau", "amplitude", "omega"}
_LIST_INT_KEYS = {"refs", "ns"}
_LIST_FLOAT_KEYS = {"taus"}
_BOOL_KEYS = {"sweep_csv"}


def _parse_list(text: str):
    return [tok for tok in text.replace(",", " ").split() if tok]


def _coerce(key: str, value):
    if value is None or not isinstance(value, str):
        return value
    try:
        if key in _INT_KEYS:
            return int(value)
        if key in _FLOAT_KEYS:
            return float(value)
        if key in _LIST_INT_KEYS:
            return tuple(int(v) for v in _parse_list(value))
        if key in _LIST_FLOAT_KEYS:
            return tuple(float(v) for v in _parse_list(value))
        if key in _BOOL_KEYS:
            if value.lower() in ("1", "true", "yes", "on"):
                return True
            if value.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(f"not a boolean: {value!r}")
    except ValueError as exc:
        raise ParameterError(f"bad value for {key}: {exc}") from exc
    return value


_SECTION_OF = {
    "n": "platoon", "k": "platoon", "arrangement": "platoon",
    "refs": "platoon", "position": "platoon",
    "outdir": "output",
}


def load_config_file(path: str) -> dict:
    """Read a key = value sections file into a flat {key: raw string} dict."""
    parser = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except (OSError, configparser.Error) as exc:
        raise ParameterError(f"cannot read config file {path}: {exc}") from exc
    raw = {}
    for section in parser.sections():
        for key, value in parser.items(section):
            key = key.replace("-", "_")
            if key == "name" and section == "experiment":
                key = "experiment"
            if key == "dir" and section == "output":
                key = "outdir"
            raw[key] = value
    return raw


def finalize_config(raw: dict) -> ScenarioConfig:
    """Coerce, default, and validate a raw key/value mapping."""
    known = {f.name for f in fields(ScenarioConfig)}
    unknown = set(raw) - known
    if unknown:
        raise ParameterError(f"unknown config keys: {sorted(unknown)}")
    coerced = {key: _coerce(key, value) for key, value in raw.items() if value is not None}
    if "n" not in coerced or "k" not in coerced:
        raise ParameterError("config must supply n and k")
    cfg = ScenarioConfig(**coerced)

    if cfg.experiment not in EXPERIMENTS:
        raise ParameterError(f"experiment must be one of {EXPERIMENTS}, got {cfg.experiment!r}")
    if cfg.arrangement not in ARRANGEMENTS:
        raise ParameterError(f"arrangement must be one of {ARRANGEMENTS}, got {cfg.arrangement!r}")
    if cfg.arrangement == "explicit" and not cfg.refs:
        raise ParameterError("arrangement=explicit requires refs")
    if cfg.arrangement == "single" and cfg.position is None:
        raise ParameterError("arrangement=single requires position")
    if cfg.experiment == "delay-grid" and not cfg.taus:
        raise ParameterError("delay-grid requires a nonempty taus list")
    if cfg.experiment == "scaling" and len(cfg.ns) < 5:
        raise ParameterError(f"scaling requires at least 5 n values, got {len(cfg.ns)}")
    if cfg.dynamics not in ("velocity", "formation"):
        raise ParameterError(f"dynamics must be velocity|formation, got {cfg.dynamics!r}")
    if cfg.delay_mode not in ("none", "full", "self-undelayed"):
        raise ParameterError(f"bad delay mode {cfg.delay_mode!r}")
    if cfg.disturbance not in ("none", "sin", "noise"):
        raise ParameterError(f"disturbance must be none|sin|noise, got {cfg.disturbance!r}")
    if cfg.horizon is not None and cfg.horizon <= 0:
        raise ParameterError(f"horizon must be positive, got {cfg.horizon}")
    if cfg.step is not None and cfg.step <= 0:
        raise ParameterError(f"step must be positive, got {cfg.step}")
    if cfg.tau < 0:
        raise ParameterError(f"tau must be nonnegative, got {cfg.tau}")
    cfg.reference_set()  # validates refs / position against n
    return cfg


def emit_config(cfg: ScenarioConfig) -> str:
    """Render the effective merged config as a sections file."""
    parser = configparser.ConfigParser()
    parser.add_section("platoon")
    parser.add_section("experiment")
    parser.add_section("output")
    defaults = ScenarioConfig(n=cfg.n, k=cfg.k)
    for f in fields(ScenarioConfig):
        value = getattr(cfg, f.name)
        if value is None or (f.name not in ("n", "k") and value == getattr(defaults, f.name)):
            continue
        if isinstance(value, tuple):
            rendered = " ".join(_fmt(v) for v in value)
            if not rendered:
                continue
        else:
            rendered = _fmt(value)
        section = _SECTION_OF.get(f.name, "experiment")
        key = "name" if f.name == "experiment" else ("dir" if f.name == "outdir" else f.name)
        parser.set(section, key, rendered)
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------

def _analysis(cfg: ScenarioConfig, refset=None):
    top = topology.build_platoon(cfg.n, cfg.k)
    refset = refset or cfg.reference_set()
    gs = topology.ground(top, refset)
    spec = spectral.eig_sym(gs.lg)
    return top, refset, gs, spec


def _write(path, text: str) -> str:
    with open(path, "w") as fh:
        fh.write(text)
    return str(path)


def _csv(metadata: dict, header: list, rows: list) -> str:
    meta = "# " + ", ".join(f"{key}={value}" for key, value in metadata.items())
    lines = [meta, ",".join(header)]
    lines += [",".join(_fmt(cell) for cell in row) for row in rows]
    return "\n".join(lines) + "\n"


def _meta(cfg: ScenarioConfig, refset) -> dict:
    return {
        "n": cfg.n,
        "k": cfg.k,
        "refs": " ".join(str(r) for r in refset.refs),
        "seed": cfg.seed,
    }


def _make_disturbance(cfg: ScenarioConfig):
    if cfg.disturbance == "none":
        return None
    if cfg.disturbance == "sin":
        return dde_sim.SinusoidDisturbance(cfg.amplitude, cfg.omega)
    return dde_sim.NoiseDisturbance(cfg.amplitude, cfg.seed)


# ---------------------------------------------------------------------------
# Experiments
# ---------------------------------------------------------------------------

def run_report(cfg: ScenarioConfig, outdir) -> list:
    top, refset, gs, spec = _analysis(cfg)
    want_sweep = cfg.sweep_csv or cfg.experiment == "hinf-sweep"
    report = robustness.build_report(
        top, refset, gs=gs, spec=spec, gamma=cfg.gamma, with_sweep=want_sweep
    )
    paths = [_write(outdir / "report.json", report.to_json())]
    paths.append(_write(outdir / "report.txt", _report_summary(report)))
    if want_sweep:
        for dyn in ("velocity", "formation"):
            fr = robustness.sweep_hinf(gs, dyn, spec=spec)
            paths.append(_write(outdir / f"freq_{dyn}.csv", fr.to_csv()))
    return paths


def _report_summary(r: robustness.RobustnessReport) -> str:
    up = "unbounded" if math.isinf(r.hinf_velocity_upper) else _fmt(r.hinf_velocity_upper)
    lines = [
        f"Platoon P({r.n},{r.k}) with references {list(r.refs)} "
        f"({r.n - len(r.refs)} followers)",
        f"beta min/max = {r.beta_min}/{r.beta_max}, boundary = {r.boundary_size}, "
        f"max follower degree = {r.dmax_f}",
        f"lambda_1 = {_fmt(r.lambda1)}, lambda_max = {_fmt(r.lambda_max)}",
        f"velocity disturbance gain = {_fmt(r.hinf_velocity)} "
        f"(bounds {_fmt(r.hinf_velocity_lower)} .. {up})",
        f"formation disturbance gain = {_fmt(r.hinf_formation)}",
        f"stability margin: velocity = {_fmt(r.margin_velocity)}, "
        f"formation = {_fmt(r.margin_formation)} (bound {_fmt(r.margin_formation_lb)})",
        f"velocity delay margin (exact) = {_fmt(r.delay_velocity_max)}",
        f"velocity delay bounds from k: stable <= {_fmt(r.delay_k_sufficient)}, "
        f"unstable > {_fmt(r.delay_k_necessary)}",
        f"formation delay sufficient: 1/rho = {_fmt(r.delay_formation_sufficient)}, "
        f"1/(4k) = {_fmt(r.delay_formation_k_sufficient)}",
        f"min references for non-expansive velocity gain = {r.min_refs_nonexpansive}",
        f"certificate lambda_min holds = {_fmt(r.lambda_min_certificate.holds)}",
        f"certificate lambda_max holds = {_fmt(r.lambda_max_certificate.holds)}",
    ]
    if r.gamma is not None:
        lines.append(
            f"gamma = {_fmt(r.gamma.gamma)}: necessary_ok = {_fmt(r.gamma.necessary_ok)}, "
            f"sufficient_ok = {_fmt(r.gamma.sufficient_ok)}, "
            f"boundary_case = {_fmt(r.gamma.boundary_case)}"
        )
    if r.swept:
        lines.append(
            f"swept peaks: velocity = {_fmt(r.swept['velocity_peak'])} "
            f"at omega = {_fmt(r.swept['velocity_peak_omega'])}, "
            f"formation = {_fmt(r.swept['formation_peak'])} "
            f"at omega = {_fmt(r.swept['formation_peak_omega'])}"
        )
    return "\n".join(lines) + "\n"


def _norms_for(refs, cfg: ScenarioConfig):
    top = topology.build_platoon(cfg.n, cfg.k)
    refset = topology.make_reference_set(cfg.n, refs)
    gs = topology.ground(top, refset)
    spec = spectral.eig_sym(gs.lg)
    return (
        spec.lambda1,
        robustness.hinf_velocity(spec),
        robustness.hinf_formation(spec),
    )


def run_remove_add_sweep(cfg: ScenarioConfig, mode: str, outdir) -> list:
    """Recompute both disturbance gains with one reference removed from (or
    one extra added to) the minimally dense arrangement, per position."""
    if cfg.arrangement != "md":
        raise ParameterError(f"{mode} sweep requires arrangement=md")
    if mode not in ("remove", "add"):
        raise ParameterError(f"mode must be remove|add, got {mode!r}")
    refset = cfg.reference_set()
    base = set(refset.refs)
    positions = sorted(base) if mode == "remove" else [
        p for p in range(1, cfg.n + 1) if p not in base
    ]
    rows = []
    for pos in positions:
        refs = sorted(base - {pos}) if mode == "remove" else sorted(base | {pos})
        if not refs:
            rows.append([pos, 0.0, math.inf, math.inf])
            continue
        lam1, hv, hf = _norms_for(refs, cfg)
        rows.append([pos, lam1, hv, hf])
    meta = _meta(cfg, refset)
    meta["mode"] = mode
    text = _csv(meta, ["position", "lambda1", "hinf_velocity", "hinf_formation"], rows)
    return [_write(outdir / f"sweep_{mode}.csv", text)]


def run_delay_grid(cfg: ScenarioConfig, outdir) -> list:
    """Simulate both dynamics at every tau, classify, and annotate each tau
    against the analytic thresholds pi/(8k), pi/(2k), 1/(4k), pi/(2 lambda_max)."""
    top, refset, gs, spec = _analysis(cfg)
    lam1, lam_max = spec.lambda1, spec.lambda_max
    ksuff, kness = robustness.delay_bounds_k(cfg.k)
    k4 = robustness.delay_margin_formation(spec, cfg.k).k_bound
    exact_v = robustness.delay_margin_velocity(spec)
    horizon = cfg.horizon if cfg.horizon is not None else dde_sim.default_horizon(lam1)
    rng = np.random.default_rng(cfg.seed)
    systems = {
        "velocity": dde_sim.velocity_system(gs),
        "formation": dde_sim.formation_system(gs),
    }
    x0s = {name: rng.uniform(-1.0, 1.0, sysm.dim) for name, sysm in systems.items()}
    rows = []
    for tau in cfg.taus:
        step = cfg.step if cfg.step is not None else dde_sim.default_step(tau)
        delay = dde_sim.DelaySpec(tau=tau, mode=("none" if tau == 0.0 else "full"))
        for name in ("velocity", "formation"):
            traj = dde_sim.simulate(systems[name], delay, x0s[name], horizon, step)
            verdict = dde_sim.classify(traj)
            rows.append([
                tau, name, verdict.stable, verdict.decay_ratio, traj.diverged, step,
                tau < ksuff, tau < kness, tau < k4, tau < exact_v,
            ])
    meta = _meta(cfg, refset)
    meta.update(horizon=_fmt(horizon), lambda_max=_fmt(lam_max))
    text = _csv(
        meta,
        ["tau", "dynamics", "stable", "decay_ratio", "diverged", "step",
         "below_pi_8k", "below_pi_2k", "below_inv_4k", "below_pi_2lmax"],
        rows,
    )
    return [_write(outdir / "delay_grid.csv", text)]


def fit_loglog(ns, values) -> dict:
    """Least-squares slope of log(value) vs log(n), dropping the smallest n
    when its residual exceeds 3x the median residual (boundary effects)."""
    lx = np.log(np.asarray(ns, dtype=float))
    ly = np.log(np.asarray(values, dtype=float))
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = np.abs(ly - (slope * lx + intercept))
    excluded = False
    if len(ns) > 2 and resid[0] > 3.0 * float(np.median(resid)):
        slope, intercept = np.polyfit(lx[1:], ly[1:], 1)
        excluded = True
    return {"slope": float(slope), "intercept": float(intercept), "excluded_smallest": excluded}


def run_scaling(cfg: ScenarioConfig, outdir) -> list:
    """Gain growth with platoon size: single end reference vs minimally dense."""
    ns = tuple(sorted(cfg.ns))
    rows = []
    single_v, single_f, md_v, md_f = [], [], [], []
    for n in ns:
        sub = replace(cfg, n=n)
        lam1, hv, hf = _norms_for([1], sub)
        rows.append([n, "single", lam1, hv, hf])
        single_v.append(hv)
        single_f.append(hf)
        md_refs = topology.md_arrangement(n, cfg.k).refs
        lam1, hv, hf = _norms_for(md_refs, sub)
        rows.append([n, "md", lam1, hv, hf])
        md_v.append(hv)
        md_f.append(hf)
    fit_v = fit_loglog(ns, single_v)
    fit_f = fit_loglog(ns, single_f)
    fit_md = fit_loglog(ns, md_v)
    summary = {
        "k": cfg.k,
        "ns": list(ns),
        "single": {"velocity": fit_v, "formation": fit_f},
        "md": {
            "velocity_max": max(md_v),
            "formation_max": max(md_f),
            "velocity_bound_ok": max(md_v) <= 1.0 + 1e-12,
            "formation_bound_ok": max(md_f) <= TWO_OVER_SQRT3 + 1e-12,
            "velocity_slope": fit_md["slope"],
        },
    }
    meta = {"n_list": " ".join(str(n) for n in ns), "k": cfg.k, "seed": cfg.seed}
    paths = [
        _write(outdir / "scaling.csv",
               _csv(meta, ["n", "arrangement", "lambda1", "hinf_velocity", "hinf_formation"], rows)),
        _write(outdir / "scaling.json", json.dumps(summary, indent=2, sort_keys=True) + "\n"),
    ]
    return paths


def run_simulate(cfg: ScenarioConfig, outdir) -> list:
    top, refset, gs, spec = _analysis(cfg)
    sysm = (
        dde_sim.velocity_system(gs)
        if cfg.dynamics == "velocity"
        else dde_sim.formation_system(gs)
    )
    mode = cfg.delay_mode if cfg.tau > 0 else "none"
    delay = dde_sim.DelaySpec(tau=cfg.tau, mode=mode)
    horizon = cfg.horizon if cfg.horizon is not None else dde_sim.default_horizon(spec.lambda1)
    step = cfg.step if cfg.step is not None else dde_sim.default_step(cfg.tau)
    x0 = np.random.default_rng(cfg.seed).uniform(-1.0, 1.0, sysm.dim)
    traj = dde_sim.simulate(sysm, delay, x0, horizon, step, disturbance=_make_disturbance(cfg))
    verdict = dde_sim.classify(traj)
    paths = [_write(outdir / "trajectory.csv", traj.to_csv())]
    verdict_text = (
        f"stable={_fmt(verdict.stable)}, decay_ratio={_fmt(verdict.decay_ratio)}, "
        f"horizon={_fmt(verdict.horizon)}, tau_effective={_fmt(traj.meta['tau_effective'])}\n"
    )
    paths.append(_write(outdir / "verdict.txt", verdict_text))
    return paths


# ---------------------------------------------------------------------------
# Verification battery (fast correctness checks; CLI exit code 4 on failure)
# ---------------------------------------------------------------------------

def _random_instance(rng, n_max=40, k_max=5, f_max=None):
    n = int(rng.integers(2, n_max + 1))
    k = int(rng.integers(1, k_max + 1))
    while True:
        n_refs = int(rng.integers(1, n))
        refs = sorted(int(r) for r in rng.choice(np.arange(1, n + 1), size=n_refs, replace=False))
        if f_max is None or n - n_refs <= f_max:
            break
    top = topology.build_platoon(n, k)
    refset = topology.make_reference_set(n, refs)
    return top, refset, topology.ground(top, refset)


def run_verify(seed: int = 0) -> tuple:
    """Fast desk-value and oracle checks.  Returns (failures, log lines)."""
    failures = []
    lines = []

    def check(name: str, ok: bool, detail: str = ""):
        tag = "ok" if ok else "FAIL"
        lines.append(f"verify {tag}: {name}" + (f" ({detail})" if detail else ""))
        if not ok:
            failures.append(name)

    top = topology.build_platoon(36, 4)
    refset = topology.md_arrangement(36, 4)
    gs = topology.ground(top, refset)
    spec = spectral.eig_sym(gs.lg)
    check("P(36,4) lambda1 = 1", abs(spec.lambda1 - 1.0) <= 1e-9, f"lambda1={spec.lambda1!r}")
    check("P(36,4) velocity gain = 1", abs(robustness.hinf_velocity(spec) - 1.0) <= 1e-9)
    check(
        "P(36,4) formation gain = 2/sqrt(3)",
        abs(robustness.hinf_formation(spec) - TWO_OVER_SQRT3) <= 1e-9,
    )
    check("P(36,4) min refs = 4", robustness.min_refs_nonexpansive(36, 4) == 4)

    top5 = topology.build_platoon(5, 2)
    gs5 = topology.ground(top5, topology.make_reference_set(5, [3]))
    spec5 = spectral.eig_sym(gs5.lg)
    hand = np.array([1.0, 3.0 - math.sqrt(2.0), 3.0, 3.0 + math.sqrt(2.0)])
    check("P(5,2)/refs={3} hand spectrum", float(np.max(np.abs(spec5.values - hand))) <= 1e-9)

    ok_remove = True
    for r in refset.refs:
        others = [x for x in refset.refs if x != r]
        _, hv, hf = _norms_for(others, ScenarioConfig(n=36, k=4))
        ok_remove &= hv > 1.0 + 1e-9 and hf > TWO_OVER_SQRT3 + 1e-9
    check("P(36,4) removing any reference breaks both gain bounds", ok_remove)
    ok_add = True
    for p in range(1, 37):
        if p in refset.refs:
            continue
        _, hv, _ = _norms_for(sorted(set(refset.refs) | {p}), ScenarioConfig(n=36, k=4))
        ok_add &= hv < 1.0 - 1e-9
    check("P(36,4) adding any reference keeps velocity gain < 1", ok_add)

    rng = np.random.default_rng(seed)
    worst_cert = True
    for _ in range(60):
        _, _, g = _random_instance(rng)
        s = spectral.eig_sym(g.lg)
        worst_cert &= spectral.certify_lambda_min(g, s).holds
        worst_cert &= spectral.certify_lambda_max(g, s).holds
    check("certificates hold on 60 random instances", worst_cert)

    worst = 0.0
    for _ in range(20):
        _, _, g = _random_instance(rng, n_max=18, f_max=12)
        s = spectral.eig_sym(g.lg)
        mapped = spectral.map_formation_spectrum(s).values
        dense = np.linalg.eigvals(spectral.build_formation_matrix(g))
        worst = max(worst, spectral.spectrum_mismatch(mapped, dense))
    check("formation mapping matches dense eigenvalues", worst <= 1e-7, f"worst={worst:.2e}")

    worst = 0.0
    for _ in range(30):
        _, _, g = _random_instance(rng)
        worst = max(worst, spectral.stochasticity_defect(g))
    check("steady-state matrix row stochastic", worst <= 1e-9, f"worst={worst:.2e}")

    worst = 0.0
    for _ in range(25):
        _, _, g = _random_instance(rng, n_max=25)
        s = spectral.eig_sym(g.lg)
        for dyn, analytic in (
            ("velocity", robustness.hinf_velocity(s)),
            ("formation", robustness.hinf_formation(s)),
        ):
            peak = robustness.sweep_hinf(g, dyn, spec=s).peak_gain
            worst = max(worst, abs(peak - analytic) / analytic)
    check("swept peaks match analytic gains to 0.5%", worst <= 5e-3, f"worst={worst:.2e}")

    return failures, lines
