"""Run orchestration behind the command line: solve, filter, estimate, wedges, test, simulate.

Each command returns a :class:`ResultBundle`.  Computation may fan out to
worker threads; files are written by :func:`write_bundle` on the calling
thread afterwards.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import io
from .config import RunConfig, evaluate
from .errors import ConfigError, DataError
from .kalman import run_filter, whiteness_check
from .mcmc import MCMCConfig, cutoff_schedule, extract_set, quantile_table, run_mcmc
from .model import assemble_state_space, check_local_identification, rank_diagnostics, simulate, solve_re
from .moments import InstrumentSet, model_moment_factory
from .qp import wedges_from_set
from .waldtest import bootstrap_critical_value

log = logging.getLogger("setid")

COMMANDS = ("solve", "filter", "estimate", "wedges", "test", "simulate")


@dataclass
class ResultBundle:
    """Everything one command emits.

    ``tables`` maps a file stem to ``(rows, columns, units)``; ``plots``
    maps a file stem to SVG text; ``data`` maps a file stem to
    ``(values, columns)`` series written as CSV; ``provenance`` names the
    operation behind each output file.
    """

    command: str
    results: dict
    tables: dict = field(default_factory=dict)
    plots: dict = field(default_factory=dict)
    data: dict = field(default_factory=dict)
    provenance: dict = field(default_factory=dict)


def _theta0(cfg: RunConfig) -> np.ndarray:
    return np.array([p.value for p in cfg.model.params])


def _load_data(cfg: RunConfig, spec):
    if cfg.data_path is None:
        raise ConfigError("this command needs [data] path")
    ts = io.load_timeseries(cfg.data_path)
    names = list(spec.obs_names)
    if all(n in ts.columns for n in names):
        Y = ts.values[:, [ts.columns.index(n) for n in names]]
    elif ts.values.shape[1] == len(names):
        Y = ts.values
    else:
        raise DataError(f"data columns {ts.columns} do not match observables {tuple(names)}")
    survey = None
    if cfg.survey_path is not None:
        survey = io.load_survey(cfg.survey_path, target_observables=cfg.survey_targets)
    return Y, survey


def _factory(cfg: RunConfig, spec, Y, survey):
    inst = InstrumentSet(lag_depth=cfg.lag_depth, include_constant=cfg.include_constant)
    return model_moment_factory(spec, Y, inst, survey)


def cmd_solve(cfg: RunConfig, workers: int = 1) -> ResultBundle:
    spec = cfg.model.to_spec()
    th = _theta0(cfg)
    sol = solve_re(spec, th)
    ss = assemble_state_space(sol, spec)
    ident = check_local_identification(spec, th)
    res = {
        "theta": dict(zip(spec.params.names, th)),
        "P": sol.P_star, "Q": sol.Q_star,
        "eigenvalues_abs": np.sort(np.abs(sol.eigenvalues)),
        "residual_P": sol.residual_P, "residual_Q": sol.residual_Q,
        "kalman_gain": ss.K, "innovation_cov": ss.Sigma_a,
        "ranks": rank_diagnostics(ss),
        "identification": {"rank": ident.rank, "required": ident.required, "passed": ident.passed},
    }
    rows = [{"row": i, **{f"col{j}": float(v) for j, v in enumerate(r)}} for i, r in enumerate(sol.P_star)]
    cols = ["row"] + [f"col{j}" for j in range(sol.P_star.shape[1])]
    return ResultBundle("solve", res, tables={"decision_rule_P": (rows, cols, {c: "coefficient" for c in cols[1:]})},
                        provenance={"results.json": "solve_re", "tables/decision_rule_P.csv": "solve_re"})


def cmd_filter(cfg: RunConfig, workers: int = 1) -> ResultBundle:
    spec = cfg.model.to_spec()
    Y, _ = _load_data(cfg, spec)
    ss = assemble_state_space(solve_re(spec, _theta0(cfg)), spec)
    filt = run_filter(ss, Y)
    wc = whiteness_check(filt.a)
    res = {"loglik": filt.loglik, "converged_at": filt.converged_at, "T": Y.shape[0],
           "forecast_error_mean": filt.a.mean(axis=0), "forecast_error_std": filt.a.std(axis=0),
           "whiteness": {"white": wc["white"], "band": wc["band"], "acf": wc["acf"]}}
    rows = [{"t": t + 1, **{f"a_{n}": float(v) for n, v in zip(spec.obs_names, r)}} for t, r in enumerate(filt.a)]
    cols = ["t"] + [f"a_{n}" for n in spec.obs_names]
    return ResultBundle("filter", res, tables={"forecast_errors": (rows, cols, {c: "level" for c in cols[1:]})},
                        provenance={"results.json": "kalman_filter", "tables/forecast_errors.csv": "kalman_filter"})


def _estimate(cfg: RunConfig, workers: int):
    spec = cfg.model.to_spec()
    Y, survey = _load_data(cfg, spec)
    fac = _factory(cfg, spec, Y, survey)
    mc = MCMCConfig(chains=cfg.chains, steps=cfg.steps, burn_in=cfg.burn_in, retained=cfg.retained,
                    seed=cfg.seed, blocks=cfg.blocks, init=_theta0(cfg), workers=workers)
    draws = run_mcmc(fac, spec.params.bounds, mc, names=spec.params.names, friction=spec.params.friction)
    sched = cutoff_schedule(draws.n)
    nu = sched[cfg.cutoff] if isinstance(cfg.cutoff, str) else float(cfg.cutoff)
    est = extract_set(draws, nu=nu, nu_schedule=sched)
    return spec, Y, survey, fac, draws, est


def _estimate_results(draws, est, spec) -> tuple[dict, dict]:
    table = quantile_table(est, units=["level"] * len(spec.params.names))
    res = {"set_estimate": {"nu": est.nu, "lower": dict(zip(est.names, est.lower)),
                            "upper": dict(zip(est.names, est.upper)), "n_retained": int(est.mask.sum())},
           "quantiles": table,
           "diagnostics": {"acceptance": draws.acceptance, "cutoff_sweep": est.sweep, "n": draws.n,
                           "n_draws": int(draws.draws.shape[0]), "min_criterion": float(np.min(draws.crit))}}
    rows, cols = io.quantile_table_rows({"frictionless": table})
    units = {c: ("" if c in ("parameter", "unit") else "parameter value") for c in cols}
    return res, {"quantiles": (rows, cols, units)}


def cmd_estimate(cfg: RunConfig, workers: int = 1) -> ResultBundle:
    spec, _, _, _, draws, est = _estimate(cfg, workers)
    res, tables = _estimate_results(draws, est, spec)
    return ResultBundle("estimate", res, tables=tables,
                        provenance={"results.json": "run_mcmc+extract_set", "tables/quantiles.csv": "quantile_table"})


def cmd_wedges(cfg: RunConfig, workers: int = 1) -> ResultBundle:
    spec, Y, _, fac, draws, est = _estimate(cfg, workers)
    res, tables = _estimate_results(draws, est, spec)
    env = wedges_from_set(draws, est.mask, fac, max_draws=cfg.max_wedge_draws, workers=workers)
    res["wedges"] = {n: {"mean_lower": float(env.lower[j]), "mean_upper": float(env.upper[j]),
                         "raw_mean_lower": float(env.raw_lower[j]), "raw_mean_upper": float(env.raw_upper[j])}
                     for j, n in enumerate(spec.obs_names)}
    res["wedges_binding_share"] = {"min": float(env.binding_share.min()), "max": float(env.binding_share.max())}
    plots, prov = {}, {"results.json": "run_mcmc+extract_set+wedges_from_set",
                       "tables/quantiles.csv": "quantile_table"}
    for j, n in enumerate(spec.obs_names):
        rows = [{"t": t + 1, "lower": float(lo), "upper": float(hi)}
                for t, (lo, hi) in enumerate(zip(env.path_lower[:, j], env.path_upper[:, j]))]
        tables[f"wedge_band_{n}"] = (rows, ["t", "lower", "upper"], {"lower": "level", "upper": "level"})
        plots[f"wedge_band_{n}"] = io.svg_band_plot({"lower": env.path_lower[:, j], "upper": env.path_upper[:, j]},
                                                   title=f"wedge band: {n}")
        prov[f"tables/wedge_band_{n}.csv"] = "wedges_from_set"
        prov[f"plots/wedge_band_{n}.svg"] = "wedges_from_set"
    return ResultBundle("wedges", res, tables=tables, plots=plots, provenance=prov)


def cmd_test(cfg: RunConfig, workers: int = 1) -> ResultBundle:
    if cfg.theta_complete is None:
        raise ConfigError("the test command needs [bootstrap] theta_complete")
    spec, Y, _, _, draws, est = _estimate(cfg, workers)
    res, tables = _estimate_results(draws, est, spec)
    kept = np.unique(draws.draws[est.mask], axis=0)
    if kept.shape[0] > cfg.max_wedge_draws:
        kept = kept[np.linspace(0, kept.shape[0] - 1, cfg.max_wedge_draws).round().astype(int)]

    def contributions(data, theta):
        # per-period wedge contributions: forecast errors of the frictionless filter at theta
        ss = assemble_state_space(solve_re(spec, np.asarray(theta, dtype=float)), spec)
        return run_filter(ss, data).a

    tr = bootstrap_critical_value(Y, contributions, np.asarray(cfg.theta_complete), kept,
                                  alpha=cfg.bootstrap_alpha, block_length=cfg.block_length,
                                  B=cfg.bootstrap_B, seed=cfg.seed, recenter=cfg.recenter, workers=workers)
    res["test"] = {"statistic": tr.statistic, "critical_value": tr.critical_value, "alpha": tr.alpha,
                   "reject": tr.decision, "p_value": tr.p_value, "block_length": tr.block_length,
                   "B": cfg.bootstrap_B, "recenter": tr.recenter, "lambda_complete": tr.lambda_p,
                   "set_lower": tr.lower, "set_upper": tr.upper, "cloud_statistic": tr.cloud_statistic}
    q = np.linspace(0.0, 1.0, 21)
    rows = [{"prob": float(p), "quantile": float(v)} for p, v in zip(q, np.quantile(tr.bootstrap_draws, q))]
    tables["bootstrap_quantiles"] = (rows, ["prob", "quantile"], {"prob": "probability", "quantile": "statistic"})
    return ResultBundle("test", res, tables=tables,
                        provenance={"results.json": "run_mcmc+extract_set+bootstrap_critical_value",
                                    "tables/quantiles.csv": "quantile_table",
                                    "tables/bootstrap_quantiles.csv": "bootstrap_critical_value"})


def cmd_simulate(cfg: RunConfig, workers: int = 1) -> ResultBundle:
    spec = cfg.model.to_spec()
    th = _theta0(cfg)
    sol = solve_re(spec, th)
    sim = cfg.simulate
    rng = np.random.default_rng(cfg.seed)
    regimes = (rng.random(sim.T) < sim.regime_prob).astype(float)
    env = dict(zip(spec.params.names, th))
    for name, node in cfg.model.derived:
        env[name] = evaluate(node, env)
    idx = {n: i for i, n in enumerate(spec.state_names)}
    laws = []
    for state, node in sim.wedges:
        if state not in idx:
            raise ConfigError(f"wedge for unknown state '{state}'")
        laws.append((idx[state], node))

    def wedge(t, x_prev):
        w = np.zeros(spec.n_x)
        local = dict(env)
        local["regime"] = regimes[t]
        local.update({f"{n}_lag": x_prev[i] for n, i in idx.items()})
        for i, node in laws:
            w[i] += evaluate(node, local)
        return w

    X, _ = simulate(sol, sim.T, seed=rng, burn=sim.burn, wedge=wedge if laws else None)
    Y = X @ spec.selector.T
    if spec.measurement_cov is not None:
        Y = Y + rng.multivariate_normal(np.zeros(spec.n_y), spec.measurement_cov, size=sim.T)
    data = {"data": (Y, list(spec.obs_names))}
    prov = {"results.json": "simulate", "data.csv": "simulate"}
    if sim.regime_prob > 0.0:
        data["survey"] = (regimes[:, None], ["share_constrained"])
        prov["survey.csv"] = "simulate"
    res = {"T": sim.T, "theta": env, "mean": Y.mean(axis=0), "std": Y.std(axis=0),
           "regime_share": float(regimes.mean())}
    return ResultBundle("simulate", res, data=data, provenance=prov)


def run_pipeline(cfg: RunConfig, command: str, workers: int = 1) -> ResultBundle:
    """Dispatch one command; errors propagate with their stage tag."""
    if command not in COMMANDS:
        raise ConfigError(f"unknown command '{command}'")
    log.info("running %s with seed %d", command, cfg.seed)
    return globals()[f"cmd_{command}"](cfg, workers=workers)


def write_bundle(bundle: ResultBundle, cfg: RunConfig, out_dir) -> list[Path]:
    """Write results.json, tables, plots, data files and manifest.json."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = [io.write_json(out / "results.json", {"command": bundle.command, "seed": cfg.seed,
                                                  "config_sha256": cfg.sha256, "results": bundle.results})]
    for stem, (rows, cols, units) in sorted(bundle.tables.items()):
        files.append(io.write_table(out / "tables" / f"{stem}.csv", rows, cols, units))
    for stem, svg in sorted(bundle.plots.items()):
        p = out / "plots" / f"{stem}.svg"
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(svg, encoding="utf-8")
        files.append(p)
    for stem, (vals, cols) in sorted(bundle.data.items()):
        files.append(io.write_timeseries(out / f"{stem}.csv", vals, cols))
    files.append(io.write_manifest(out, cfg.sha256, bundle.command, cfg.seed, files, bundle.provenance))
    return files


__all__ = ["COMMANDS", "ResultBundle", "run_pipeline", "write_bundle"]
