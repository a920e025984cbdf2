"""Batch command line front end.

Every subcommand reads an optional JSON config (``--config``), applies flag
overrides, validates everything, computes, and only then writes its files.
Exit codes: 0 ok, 2 config/validation error, 3 step budget exceeded,
4 precondition violation.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .errors import BudgetError, ConfigError, DomainError, PreconditionError
from .model import ClosedFormMu, DuffingParams, ModelParams, SeriesMu

EXIT_OK, EXIT_CONFIG, EXIT_BUDGET, EXIT_PRECONDITION = 0, 2, 3, 4

SCHEMA = {
    "model": {"lambda", "nu", "delta", "mu"},
    "run": {"tau0", "tau_max", "rho0", "psi0", "rel_tol", "abs_tol", "max_steps", "n_out", "d0",
            "horizon", "angle", "eta0", "eta1", "n_samples", "reference", "order", "psi_root",
            "mu_index_as_printed"},
    "scan": {"delta_min", "delta_max", "n_delta", "nu_min", "nu_max", "n_nu", "rho_min", "rho_max",
             "n_rho", "psi_min", "psi_max", "n_psi", "h_values", "psi_branch", "deltas",
             "tau_min", "tau_max", "n_tau"},
    "duffing": {"eps", "alpha", "beta", "gamma", "nu", "u0", "v0", "t_max", "mu_choice", "dt_out"},
    "demo_es": {"a0", "b0", "t0", "t1", "n_out"},
    "output": {"directory"},
}

DEFAULTS = {
    "model": {"lambda": 1.0, "nu": 0.0},
    "run": {"tau0": 50.0, "tau_max": 1000.0, "rel_tol": 1e-9, "abs_tol": 1e-12,
            "max_steps": 2_000_000, "n_out": 1001, "d0": 0.02, "horizon": 4.0,
            "angle": math.pi / 4, "eta0": 1e3, "eta1": 1e4, "n_samples": 20000,
            "reference": "extended", "order": 12, "mu_index_as_printed": True},
    "scan": {"delta_min": -1.0, "delta_max": 1.0, "n_delta": 41, "nu_min": 0.0,
             "nu_max": 3.0, "n_nu": 31, "rho_min": 0.001, "rho_max": 10.0, "n_rho": 5,
             "psi_min": 0.0, "psi_max": 6.0, "n_psi": 5, "h_values": [1e-4, 1e-3, 2e-3],
             "psi_branch": 0.0, "tau_min": 1e2, "tau_max": 1e5, "n_tau": 301},
    "duffing": {"eps": 1e-2, "alpha": 0.25e-4, "beta": 1.0, "gamma": 1.0 / 6.0, "nu": 0.0,
                "u0": -math.sqrt(2.0), "v0": math.sqrt(2.0), "t_max": 2000.0,
                "mu_choice": "nominal", "dt_out": 0.5},
    "demo_es": {"a0": 1.0, "b0": 1.0, "t0": 1.0, "t1": 16.0, "n_out": 151},
    "output": {"directory": "out"},
}


# -- configuration ---------------------------------------------------------------

def load_config(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    validate_keys(doc)
    return doc


def validate_keys(doc) -> None:
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    for sec, body in doc.items():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown config section {sec!r}")
        if not isinstance(body, dict):
            raise ConfigError(f"section {sec!r} must be an object")
        bad = sorted(set(body) - SCHEMA[sec])
        if bad:
            raise ConfigError(f"unknown keys in section {sec!r}: {', '.join(bad)}")


def merge(doc: dict, overrides: dict) -> dict:
    cfg = {sec: dict(vals) for sec, vals in DEFAULTS.items()}
    for src in (doc, overrides):
        for sec, body in src.items():
            cfg.setdefault(sec, {}).update(body)
    return cfg


def _num(cfg, sec, key, kind=float):
    v = cfg[sec].get(key)
    if v is None:
        return None
    try:
        out = kind(v)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{sec}.{key} must be {kind.__name__}, got {v!r}") from exc
    if kind is float and not math.isfinite(out):
        raise ConfigError(f"{sec}.{key} must be finite")
    return out


def model_from_config(cfg: dict) -> ModelParams:
    m = cfg["model"]
    lam = _num(cfg, "model", "lambda")
    nu = _num(cfg, "model", "nu")
    mu = m.get("mu")
    if mu is not None and m.get("delta") is not None:
        raise ConfigError("give either model.delta or model.mu, not both")
    try:
        if mu is None:
            delta = _num(cfg, "model", "delta") or 0.0
            return ModelParams.from_delta(delta, nu, lam)
        if not isinstance(mu, dict) or mu.get("kind") not in ("series", "closed"):
            raise ConfigError("model.mu must be {kind: series, coeffs: [...]} or {kind: closed, c, b}")
        extra = set(mu) - ({"kind", "coeffs"} if mu["kind"] == "series" else {"kind", "c", "b"})
        if extra:
            raise ConfigError(f"unknown keys in model.mu: {', '.join(sorted(extra))}")
        law = (SeriesMu(tuple(mu.get("coeffs", (0.0,)))) if mu["kind"] == "series"
               else ClosedFormMu(float(mu["c"]), float(mu["b"])))
        return ModelParams(lam, nu, law)
    except (DomainError, KeyError, TypeError) as exc:
        raise ConfigError(f"invalid model section: {exc}") from exc


def duffing_from_config(cfg: dict) -> DuffingParams:
    try:
        return DuffingParams(*(_num(cfg, "duffing", k) for k in ("eps", "alpha", "beta", "gamma", "nu")))
    except DomainError as exc:
        raise ConfigError(f"invalid duffing section: {exc}") from exc


def integ_from_config(cfg: dict):
    from .integrator import IntegrationConfig
    try:
        return IntegrationConfig(rel_tol=_num(cfg, "run", "rel_tol"), abs_tol=_num(cfg, "run", "abs_tol"),
                                 max_steps=_num(cfg, "run", "max_steps", int))
    except DomainError as exc:
        raise ConfigError(f"invalid tolerances: {exc}") from exc


def _grid(cfg, lo, hi, n):
    a, b, k = _num(cfg, "scan", lo), _num(cfg, "scan", hi), _num(cfg, "scan", n, int)
    if k < 1:
        raise ConfigError(f"scan.{n} must be >= 1")
    return np.linspace(a, b, k) if k > 1 else np.array([a])


def _floats(v, name):
    if isinstance(v, str):
        v = [s for s in v.split(",") if s.strip()]
    try:
        out = [float(x) for x in v]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be a list of numbers") from exc
    if not out:
        raise ConfigError(f"{name} is empty")
    return out


# -- output ------------------------------------------------------------------------

def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        x = float(x)
        if math.isnan(x):
            return "nan"
        if x == 0.0:
            return "0"
        return format(x, ".15g")
    return str(x)


COMMAND_SECTIONS = {
    "equilibria": ("model",), "bifurcation-scan": ("scan",), "simulate": ("model", "run"),
    "basin": ("model", "run", "scan"), "lyapunov-check": ("model", "run"),
    "freq-check": ("model", "run", "scan"), "threshold-sweep": ("model", "run", "scan"),
    "duffing": ("duffing",), "demo-es": ("demo_es",), "asymptotics": ("model", "run", "scan"),
}


def header(command: str, cfg: dict) -> str:
    echo = {k: v for k, v in cfg.items() if k in COMMAND_SECTIONS[command]}
    return f"# autores {__version__} command={command} params={json.dumps(echo, sort_keys=True, separators=(',', ':'))}"


def csv_text(command: str, cfg: dict, columns, rows) -> str:
    buf = io.StringIO()
    buf.write(header(command, cfg) + "\n")
    buf.write(",".join(columns) + "\n")
    for r in rows:
        vals = [r[c] for c in columns] if isinstance(r, dict) else list(r)
        buf.write(",".join(fmt(v) for v in vals) + "\n")
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple, np.ndarray)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, (int, np.integer)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else None
    return x


def json_text(command: str, cfg: dict, payload: dict) -> str:
    doc = {"header": header(command, cfg)[2:], **_jsonable(payload)}
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def out_dir(cfg: dict, flag: str | None) -> Path:
    if flag:
        return Path(flag)
    env = os.environ.get("AUTORES_OUT_DIR")
    if env:
        return Path(env)
    return Path(cfg["output"]["directory"])


def write_outputs(directory: Path, files: dict[str, str]) -> None:
    directory.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        with open(directory / name, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)


# -- commands -----------------------------------------------------------------------
# each returns (files, stdout_text); validation happens in ``prepare_*``

def _stable_root(p: ModelParams, given):
    from .equilibria import PhaseParams, find_roots
    if given is not None:
        return float(given)
    roots = [r for r in find_roots(PhaseParams(p.delta, p.nu)) if r.stable]
    if not roots:
        raise PreconditionError("no stable root for these parameters")
    # prefer the root nearest pi, which exists for delta near 0
    return min(roots, key=lambda r: abs(r.psi0 - math.pi)).psi0


def cmd_equilibria(cfg, workers):
    from .equilibria import PhaseParams, ell, find_roots, region
    p = model_from_config(cfg)
    pp = PhaseParams(p.delta, p.nu)
    yield None
    roots = find_roots(pp)
    cols = ("psi0", "p_prime", "p_double_prime", "p_triple_prime", "stability")
    rows = [(r.psi0, r.p_prime, r.p_double_prime, r.p_triple_prime, r.stability.value) for r in roots]
    lines = [f"delta={fmt(pp.delta)} nu={fmt(pp.nu)} ell={fmt(ell(pp))} region={region(pp).value} "
             f"n_roots={len(roots)}", "  ".join(cols)]
    lines += ["  ".join(fmt(v) for v in r) for r in rows]
    yield {"equilibria.csv": csv_text("equilibria", cfg, cols, rows)}, "\n".join(lines)


def cmd_bifurcation_scan(cfg, workers):
    from .equilibria import SCAN_COLUMNS, bifurcation_scan
    ds = _grid(cfg, "delta_min", "delta_max", "n_delta")
    ns = _grid(cfg, "nu_min", "nu_max", "n_nu")
    if ns.min() < 0 or ns.max() >= math.pi:
        raise ConfigError("nu grid must lie in [0, pi)")
    yield None
    rows = bifurcation_scan(ds, ns, workers)
    counts = {}
    for r in rows:
        counts[r["region"]] = counts.get(r["region"], 0) + 1
    text = " ".join(f"{k}={v}" for k, v in sorted(counts.items()))
    yield {"bifurcation.csv": csv_text("bifurcation-scan", cfg, SCAN_COLUMNS, rows)}, f"{len(rows)} points: {text}"


def cmd_simulate(cfg, workers):
    from .capture import classify_trajectory, simulate
    from .equilibria import PhaseParams, find_roots
    from .integrator import interpolate
    p = model_from_config(cfg)
    ic = integ_from_config(cfg)
    tau0, tau1 = _num(cfg, "run", "tau0"), _num(cfg, "run", "tau_max")
    n_out = _num(cfg, "run", "n_out", int)
    if not 0 < tau0 < tau1:
        raise ConfigError("need 0 < run.tau0 < run.tau_max")
    if n_out < 2:
        raise ConfigError("run.n_out must be >= 2")
    rho0, psi0 = _num(cfg, "run", "rho0"), _num(cfg, "run", "psi0")
    yield None
    if rho0 is None or psi0 is None:
        from .asymptotics import extended_series
        root = _stable_root(p, _num(cfg, "run", "psi_root"))
        r, s = extended_series(p, root).state(tau0)
        rho0 = r if rho0 is None else rho0
        psi0 = s if psi0 is None else psi0
    traj = simulate(p, rho0, psi0, tau0, tau1, ic)
    roots = find_roots(PhaseParams(p.delta, p.nu))
    v = classify_trajectory(traj, p, roots)
    tt = np.linspace(traj.t0, traj.t1, n_out)
    y = interpolate(traj, tt)
    verdict = {"verdict": v.kind.value, "psi0_index": v.psi0_index, "psi0_locked": v.psi0_value,
               "tau_final": v.tau_final, "max_drift": v.max_drift, "tail_amp_ratio": v.tail_amp_ratio,
               "singular": v.singular, "rho0": rho0, "psi0_init": psi0, "status": traj.status,
               "n_steps": traj.n_accepted}
    files = {"trajectory.csv": csv_text("simulate", cfg, ("tau", "rho", "psi"), np.c_[tt, y]),
             "verdict.json": json_text("simulate", cfg, verdict)}
    yield files, f"verdict={v.kind.value} psi0_locked={fmt(v.psi0_value)}"


def cmd_basin(cfg, workers):
    from .capture import BASIN_COLUMNS, basin_scan
    p = model_from_config(cfg)
    ic = integ_from_config(cfg)
    tau0, tau1 = _num(cfg, "run", "tau0"), _num(cfg, "run", "tau_max")
    rg = _grid(cfg, "rho_min", "rho_max", "n_rho")
    sg = _grid(cfg, "psi_min", "psi_max", "n_psi")
    if tau1 < 4 * tau0:
        raise PreconditionError(f"basin needs tau_max >= 4 tau0, got {tau1} < 4*{tau0}")
    yield None
    rows = basin_scan(p, tau0, rg, sg, tau1, workers, ic)
    tally = {}
    for r in rows:
        tally[r["verdict"]] = tally.get(r["verdict"], 0) + 1
    yield ({"basin.csv": csv_text("basin", cfg, BASIN_COLUMNS, rows)},
           " ".join(f"{k}={v}" for k, v in sorted(tally.items())))


def cmd_lyapunov_check(cfg, workers):
    from .stability import ScaledFrame, lyapunov_check, lyapunov_summary, tight_config
    p = model_from_config(cfg)
    d0, eta0, eta1 = _num(cfg, "run", "d0"), _num(cfg, "run", "eta0"), _num(cfg, "run", "eta1")
    n = _num(cfg, "run", "n_samples", int)
    ref = cfg["run"]["reference"]
    if ref not in ("extended", "k3"):
        raise ConfigError("run.reference must be 'extended' or 'k3'")
    if not (0 < eta0 < eta1) or n < 10 or not d0 > 0:
        raise ConfigError("need 0 < eta0 < eta1, d0 > 0, n_samples >= 10")
    yield None
    f = ScaledFrame.build(p, _stable_root(p, _num(cfg, "run", "psi_root")), ref, _num(cfg, "run", "order", int))
    tab = lyapunov_check(f, d0, eta0, eta1, _num(cfg, "run", "angle"), n,
                         cfg=tight_config(rel_tol=min(_num(cfg, "run", "rel_tol"), 1e-11)))
    summ = lyapunov_summary(tab)
    cols = ("eta", "R", "Psi", "d", "V", "dVdeta")
    rows = np.c_[[tab[c] for c in cols]].T
    files = {"lyapunov.csv": csv_text("lyapunov-check", cfg, cols, rows),
             "lyapunov.json": json_text("lyapunov-check", cfg, {"psi0": f.psi0, "omega0": f.omega0, **summ})}
    yield files, " ".join(f"{k}={fmt(v)}" for k, v in summ.items())


def cmd_freq_check(cfg, workers):
    from .stability import ScaledFrame, frozen_frequency, omega_formula
    p = model_from_config(cfg)
    hs = _floats(cfg["scan"]["h_values"], "scan.h_values")
    if any(h <= 0 for h in hs):
        raise ConfigError("h values must be positive")
    yield None
    f = ScaledFrame.build(p, _stable_root(p, _num(cfg, "run", "psi_root")), "k3")
    rows = [(h, frozen_frequency(f, h), omega_formula(f, h)) for h in hs]
    lines = [f"omega_lin={fmt(f.linear_frequency)}"] + [f"h={fmt(a)} omega_num={fmt(b)} omega_formula={fmt(c)}"
                                                        for a, b, c in rows]
    yield ({"frozen_frequency.csv": csv_text("freq-check", cfg, ("h", "omega_num", "omega_formula"), rows)},
           "\n".join(lines))


def cmd_threshold_sweep(cfg, workers):
    from .capture import THRESHOLD_COLUMNS, threshold_sweep
    m = cfg["model"]
    if m.get("mu") is not None:
        raise ConfigError("threshold-sweep uses the pure leading pump term; model.mu not allowed")
    lam, nu = _num(cfg, "model", "lambda"), _num(cfg, "model", "nu")
    if not lam > 0 or not 0 <= nu < math.pi:
        raise ConfigError("threshold-sweep needs lambda > 0 and nu in [0, pi)")
    deltas = cfg["scan"].get("deltas")
    deltas = _floats(deltas, "scan.deltas") if deltas is not None else list(_grid(cfg, "delta_min", "delta_max", "n_delta"))
    yield None
    rows = threshold_sweep(nu, lam, deltas, _num(cfg, "scan", "psi_branch"),
                           _num(cfg, "run", "d0"), _num(cfg, "run", "tau0"), _num(cfg, "run", "horizon"),
                           workers)
    n_agree = sum(r["agree"] for r in rows)
    yield ({"threshold.csv": csv_text("threshold-sweep", cfg, THRESHOLD_COLUMNS, rows)},
           f"{n_agree}/{len(rows)} agree")


def cmd_duffing(cfg, workers):
    from .duffing import compare_envelope, reduce, sample
    dp = duffing_from_config(cfg)
    u0, v0, t_max = (_num(cfg, "duffing", k) for k in ("u0", "v0", "t_max"))
    dt_out = _num(cfg, "duffing", "dt_out")
    mc = cfg["duffing"]["mu_choice"]
    if mc not in ("nominal", "averaged"):
        raise ConfigError("duffing.mu_choice must be 'nominal' or 'averaged'")
    if not t_max >= 1.0 / dp.eps or not dt_out > 0:
        raise ConfigError("duffing.t_max must cover [0, 1/eps] and dt_out > 0")
    yield None
    red = reduce(dp)
    rep = compare_envelope(dp, u0, v0, t_max, mu_choice=mc)
    o = rep.obs
    step = max(1, int(round(dt_out / (o.t[1] - o.t[0]))))
    sel = slice(0, None, step)
    files = {"duffing.csv": csv_text("duffing", cfg, ("t", "u", "v", "E", "Delta"),
                                     np.c_[o.t[sel], o.u[sel], o.v[sel], o.E[sel], o.Delta[sel]]),
             "duffing.json": json_text("duffing", cfg, {
                 "reduction": {"kappa": red.kappa, "lambda": red.lam, "mu_c": red.mu.c, "mu_b": red.mu.b,
                               "mu_averaged_c": red.mu_averaged.c, "slow_time_scale": red.slow_time_scale,
                               "delta_model": red.delta_model, "delta_conclusion": red.delta_conclusion,
                               "delta_averaged": red.delta_averaged},
                 "report": rep.summary()})}
    if rep.captured:
        files["envelope.csv"] = csv_text("duffing", cfg, ("t_window", "env_full", "env_model", "rel_err"),
                                         np.c_[rep.t_window, rep.env_full, rep.env_model, rep.rel_err])
    yield files, (f"captured={rep.captured} escaped={rep.escaped} max_rel_env_err={fmt(rep.max_rel_env_err)} "
                  f"delta_model={fmt(red.delta_model)} delta_conclusion={fmt(red.delta_conclusion)}")


def cmd_demo_es(cfg, workers):
    from .integrator import IntegrationConfig, integrate, interpolate
    from .model import demo_es_exact, demo_es_jacobian, demo_es_rhs
    a0, b0, t0, t1 = (_num(cfg, "demo_es", k) for k in ("a0", "b0", "t0", "t1"))
    n = _num(cfg, "demo_es", "n_out", int)
    if not 0 < t0 < t1 or n < 2:
        raise ConfigError("need 0 < t0 < t1 and n_out >= 2")
    yield None
    # initial data given at t0 for the closed form normalised at t = 1
    ya0, yb0 = demo_es_exact(a0, b0, t0)
    traj = integrate(demo_es_rhs, t0, [ya0, yb0], t1, IntegrationConfig(rel_tol=1e-12, abs_tol=1e-14))
    tt = np.linspace(t0, t1, n)
    y = interpolate(traj, tt)
    ex = np.array([demo_es_exact(a0, b0, t) for t in tt])
    eig = np.array([np.sort(np.linalg.eigvals(demo_es_jacobian(t)).real) for t in tt])
    rel = abs(y[-1, 0] - ex[-1, 0]) / abs(ex[-1, 0])
    files = {"demo_es.csv": csv_text("demo-es", cfg, ("t", "a", "b", "a_exact", "b_exact", "eig_1", "eig_2"),
                                     np.c_[tt, y, ex, eig]),
             "demo_es.json": json_text("demo-es", cfg, {"a_final": y[-1, 0], "a_exact": ex[-1, 0],
                                                        "rel_err": rel, "max_eigenvalue": float(eig.max())})}
    yield files, f"a({fmt(t1)})={fmt(y[-1, 0])} exact={fmt(ex[-1, 0])} rel_err={fmt(rel)} max_eig={fmt(eig.max())}"


def cmd_asymptotics(cfg, workers):
    from .asymptotics import compute_coeffs, defect_orders, residual
    p = model_from_config(cfg)
    lo, hi, n = _num(cfg, "scan", "tau_min"), _num(cfg, "scan", "tau_max"), _num(cfg, "scan", "n_tau", int)
    if not 0 < lo < hi or n < 3:
        raise ConfigError("need 0 < scan.tau_min < scan.tau_max and n_tau >= 3")
    yield None
    flag = cfg["run"]["mu_index_as_printed"]
    if not isinstance(flag, bool):
        raise ConfigError("run.mu_index_as_printed must be true or false")
    c = compute_coeffs(p, _stable_root(p, _num(cfg, "run", "psi_root")), mu_index_as_printed=flag)
    tau = np.geomspace(lo, hi, n)
    rr, rp = residual(c, tau)
    er, ep = defect_orders(c)
    fit = {}
    for name, r in (("rho", rr), ("psi", rp)):
        ok = np.abs(r) > 0
        fit[name] = float(np.polyfit(np.log(tau[ok]), np.log(np.abs(r[ok])), 1)[0]) if ok.sum() > 2 else None
    rs, ps = c.state(tau)
    payload = {"psi0": c.psi0, "rho": list(c.rho), "psi": list(c.psi), "expected_order_rho": er,
               "expected_order_psi": ep, "fitted_slope_rho": fit["rho"], "fitted_slope_psi": fit["psi"]}
    coef_cols = ("psi0", "rho_m1", "rho2", "rho3", "psi1", "psi2", "psi3")
    files = {"coefficients.csv": csv_text("asymptotics", cfg, coef_cols, [{k: getattr(c, k) for k in coef_cols}]),
             "asymptotics.csv": csv_text("asymptotics", cfg, ("tau", "rho_star", "psi_star", "r_rho", "r_psi"),
                                         np.c_[tau, rs, ps, rr, rp]),
             "asymptotics.json": json_text("asymptotics", cfg, payload)}
    yield files, (f"expected orders rho={fmt(er)} psi={fmt(ep)}; fitted rho={fmt(fit['rho'])} "
                  f"psi={fmt(fit['psi'])}")


COMMANDS = {
    "equilibria": cmd_equilibria,
    "bifurcation-scan": cmd_bifurcation_scan,
    "simulate": cmd_simulate,
    "basin": cmd_basin,
    "lyapunov-check": cmd_lyapunov_check,
    "freq-check": cmd_freq_check,
    "threshold-sweep": cmd_threshold_sweep,
    "duffing": cmd_duffing,
    "demo-es": cmd_demo_es,
    "asymptotics": cmd_asymptotics,
}

# flag -> (section, key, type); "floats" means a comma-separated list
FLAGS = {
    "model": [("lambda", "lambda", float), ("nu", "nu", float), ("delta", "delta", float)],
    "run": [("tau0", "tau0", float), ("tau-max", "tau_max", float), ("rho0", "rho0", float),
            ("psi0", "psi0", float), ("rel-tol", "rel_tol", float), ("abs-tol", "abs_tol", float),
            ("max-steps", "max_steps", int), ("n-out", "n_out", int), ("d0", "d0", float),
            ("horizon", "horizon", float), ("eta0", "eta0", float), ("eta1", "eta1", float),
            ("n-samples", "n_samples", int), ("reference", "reference", str),
            ("psi-root", "psi_root", float)],
    "scan_delta": [("delta-min", "delta_min", float), ("delta-max", "delta_max", float),
                   ("n-delta", "n_delta", int)],
    "scan_nu": [("nu-min", "nu_min", float), ("nu-max", "nu_max", float), ("n-nu", "n_nu", int)],
    "scan_basin": [("rho-min", "rho_min", float), ("rho-max", "rho_max", float), ("n-rho", "n_rho", int),
                   ("psi-min", "psi_min", float), ("psi-max", "psi_max", float), ("n-psi", "n_psi", int)],
    "scan_h": [("h", "h_values", "floats")],
    "scan_thr": [("deltas", "deltas", "floats"), ("psi-branch", "psi_branch", float)],
    "root": [("psi-root", "psi_root", float)],
    "scan_tau": [("tau-min", "tau_min", float), ("tau-max", "tau_max", float), ("n-tau", "n_tau", int)],
    "duffing": [("eps", "eps", float), ("alpha", "alpha", float), ("beta", "beta", float),
                ("gamma", "gamma", float), ("nu", "nu", float), ("u0", "u0", float), ("v0", "v0", float),
                ("t-max", "t_max", float), ("mu-choice", "mu_choice", str), ("dt-out", "dt_out", float)],
    "demo_es": [("a0", "a0", float), ("b0", "b0", float), ("t0", "t0", float), ("t1", "t1", float),
                ("n-out", "n_out", int)],
}

COMMAND_FLAGS = {
    "equilibria": ["model"],
    "bifurcation-scan": ["scan_delta", "scan_nu"],
    "simulate": ["model", "run"],
    "basin": ["model", "run", "scan_basin"],
    "lyapunov-check": ["model", "run"],
    "freq-check": ["model", "run", "scan_h"],
    "threshold-sweep": ["model", "run", "scan_delta", "scan_thr"],
    "duffing": ["duffing"],
    "demo-es": ["demo_es"],
    "asymptotics": ["model", "root", "scan_tau"],
}


def _float_list(text: str) -> list[float]:
    try:
        return _floats(text, "value")
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from exc


def _section(group: str) -> str:
    return "scan" if group.startswith("scan") else group


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="autores", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"autores {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)
    for name, groups in COMMAND_FLAGS.items():
        sp = sub.add_parser(name, help=COMMANDS[name].__name__.replace("cmd_", "").replace("_", " "))
        sp.add_argument("--config", help="JSON experiment config")
        sp.add_argument("--out-dir", help="output directory (default: $AUTORES_OUT_DIR, then config)")
        sp.add_argument("--workers", type=int, default=os.cpu_count() or 1)
        sp.add_argument("--dry-run", action="store_true", help="validate the configuration and exit")
        seen = set()
        for g in groups:
            for flag, key, kind in FLAGS[g]:
                if flag in seen:
                    continue
                seen.add(flag)
                dest = f"{'run' if g == 'root' else _section(g)}__{key}"
                sp.add_argument(f"--{flag}", dest=dest, metavar=key.upper(),
                                type=_float_list if kind == "floats" else kind, default=None)
    return ap


def overrides_from_args(args) -> dict:
    out: dict = {}
    for dest, val in vars(args).items():
        if "__" in dest and val is not None:
            sec, key = dest.split("__", 1)
            out.setdefault(sec, {})[key] = val
    return out


def run(argv=None, stdout=None) -> int:
    stdout = stdout or sys.stdout
    ap = build_parser()
    args = ap.parse_args(argv)
    try:
        doc = load_config(args.config)
        cfg = merge(doc, overrides_from_args(args))
        if args.workers < 1:
            raise ConfigError("--workers must be >= 1")
        gen = COMMANDS[args.command](cfg, args.workers)
        next(gen)  # validation stage
        if args.dry_run:
            print(f"config ok: {args.command}", file=stdout)
            return EXIT_OK
        files, text = next(gen)
        write_outputs(out_dir(cfg, args.out_dir), files)
        print(text, file=stdout)
        return EXIT_OK
    except (ConfigError, DomainError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BudgetError as exc:
        print(f"budget exceeded: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except PreconditionError as exc:
        print(f"precondition violated: {exc}", file=sys.stderr)
        return EXIT_PRECONDITION


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
