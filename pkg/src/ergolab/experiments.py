"""Seeded experiment runner behind the command-line interface.

Each experiment is split into independent per-trial units (one selector
path per trial seed).  Units run on a thread pool but are written in trial
order, so the output file depends only on the configuration.  A final
``# summary`` comment line carries the aggregate statistics.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import sys as _sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, IO

import numpy as np

from . import concentration as conc
from .averages import FORMS, LEMMA_FINAL_CONSTANT, lacunary_schedule, lemma_final_bound, \
    maximal_series, maximal_series_forms, dyadic_block_constant, state_grid
from .config import SCHEMA_VERSION, ExperimentConfig, check_config
from .dynamics import observable_from_params, system_from_params
from .errors import ConfigError
from .kernels import default_epsilon, hl_domination_constant, kernel_sup_matrix, \
    lemma_tech_statistic, linearize, maximal_opnorm_probe, simple_term, ZSignal
from .random_model import counting_function, growth_exponent, loglog_slope, sample_selectors
from .rng import generator, trial_seed
from .weights import CONSTANT, build_net, net_approx_error, net_from_points, read_net_csv, sample_net

log = logging.getLogger("ergolab")

COLUMNS = {
    "growth": ["seed", "alpha", "n_max", "count", "exponent", "target", "sllr_ratio"],
    "net-check": ["trial", "seed", "c", "c0", "error", "guaranteed_error", "ok"],
    "kernel-scan": ["seed", "alpha", "N", "b_index", "bp_index", "sup_abs_K", "ref_scale",
                    "exponent_fit"],
    "lemma-tech": ["seed", "alpha", "N", "statistic", "statistic_sq", "threshold", "exceeds"],
    "simple-term": ["seed", "alpha", "N", "simple_term", "scaled"],
    "converge": ["seed", "alpha", "rho", "N", "form", "value", "sup_value"],
    "sigma-part": ["seed", "alpha", "N", "sigma_max", "bound", "ratio", "dyadic_constant"],
    "freedman": ["trial", "seed", "N", "value", "variance_cap"],
    "opnorm": ["seed", "alpha", "N", "opnorm", "domination_C", "simple_term"],
}
# settings that never change the output bytes
_NOT_ECHOED = ("out", "threads")


@dataclass(frozen=True)
class TrialResult:
    experiment: str
    trial: int
    seed: int
    rows: tuple[dict, ...] = field(repr=False)
    wall_time: float = 0.0


def _schedule(cfg: ExperimentConfig) -> list[int]:
    return list(lacunary_schedule(cfg.rho, cfg.n_max, cfg.n_min))


def _median_by_N(results: list[TrialResult], key: str, **match) -> dict[int, float]:
    by_n: dict[int, list[float]] = {}
    for r in results:
        for row in r.rows:
            if all(row.get(k) == v for k, v in match.items()):
                by_n.setdefault(row["N"], []).append(row[key])
    return {N: float(np.median(v)) for N, v in sorted(by_n.items())}


def _slope(medians: dict[int, float]) -> float | None:
    pts = [(N, v) for N, v in medians.items() if v > 0]
    if len(pts) < 2:
        return None
    return loglog_slope([p[0] for p in pts], [p[1] for p in pts])


# ------------------------------------------------------------------ growth

def _growth(cfg: ExperimentConfig, t: int, seed: int) -> list[dict]:
    path = sample_selectors(cfg.alpha, cfg.n_max, seed)
    table = counting_function(path)
    N = cfg.n_max
    return [{
        "seed": seed, "alpha": cfg.alpha, "n_max": N, "count": len(table),
        "exponent": growth_exponent(table, n_min=min(100, max(1, len(table) - 2))),
        "target": 1.0 / (1.0 - cfg.alpha), "sllr_ratio": float(path.s[N] / path.w[N]),
    }]


def _growth_summary(cfg, results) -> dict:
    rows = [row for r in results for row in r.rows]
    exps = [row["exponent"] for row in rows]
    ratios = np.array([row["sllr_ratio"] for row in rows])
    return {
        "median_exponent": float(np.median(exps)),
        "target": 1.0 / (1.0 - cfg.alpha),
        "sllr_fraction_in_band": float(np.mean((ratios >= 0.9) & (ratios <= 1.1))),
    }


# --------------------------------------------------------------- net check

def _load_net(cfg: ExperimentConfig):
    if cfg.net_file:
        with open(cfg.net_file, encoding="utf-8") as fh:
            return read_net_csv(fh)
    return build_net(cfg.delta, cfg.m_max, cfg.horizon, cfg.kappa)


def _net_check(cfg: ExperimentConfig, t: int, seed: int, net) -> list[dict]:
    rng = generator(seed)
    lo, hi = net.intervals[int(rng.integers(len(net.intervals)))]
    c = float(rng.uniform(lo, hi))
    c0, err = net_approx_error(c, net)
    return [{"trial": t, "seed": seed, "c": c, "c0": c0, "error": err,
             "guaranteed_error": net.guaranteed_error, "ok": int(err <= net.guaranteed_error)}]


def _net_summary(cfg, results, net) -> dict:
    errs = [row["error"] for r in results for row in r.rows]
    return {
        "net_size": net.size, "budget": net.budget, "within_budget": bool(net.within_budget),
        "guaranteed_error": net.guaranteed_error, "max_error": float(max(errs)),
        "all_within_error": bool(all(row["ok"] for r in results for row in r.rows)),
    }


# ------------------------------------------------------------ kernel scan

def _scan_weights(cfg: ExperimentConfig):
    if cfg.net_points == 0:
        return [CONSTANT]
    return sample_net(cfg.delta, cfg.m_max, cfg.net_points, cfg.n_max,
                      include_constant=cfg.include_constant).weights()


def _kernel_scan(cfg: ExperimentConfig, t: int, seed: int) -> list[dict]:
    sched = _schedule(cfg)
    weights = _scan_weights(cfg)
    path = sample_selectors(cfg.alpha, max(sched), seed)
    mats = [kernel_sup_matrix(path, weights, N) for N in sched]
    sups = [float(m.max()) for m in mats]
    fit = _slope(dict(zip(sched, sups)))
    rows = []
    for N, m in zip(sched, mats):
        for i in range(m.shape[0]):
            for j in range(m.shape[1]):
                rows.append({"seed": seed, "alpha": cfg.alpha, "N": N, "b_index": i, "bp_index": j,
                             "sup_abs_K": float(m[i, j]), "ref_scale": N ** (1.0 - 2.0 * cfg.alpha),
                             "exponent_fit": fit})
    return rows


def kernel_threshold(alpha: float, N: int) -> float:
    """``N**(1 - 2 alpha - 2 eps)`` with the default ``eps``."""
    return N ** (1.0 - 2.0 * alpha - 2.0 * default_epsilon(alpha))


def _kernel_summary(cfg, results) -> dict:
    sups: dict[tuple[int, int], float] = {}
    for r in results:
        for row in r.rows:
            key = (r.trial, row["N"])
            sups[key] = max(sups.get(key, 0.0), row["sup_abs_K"])
    by_n: dict[int, list[float]] = {}
    for (_, N), v in sorted(sups.items()):
        by_n.setdefault(N, []).append(v)
    medians = {N: float(np.median(v)) for N, v in by_n.items()}
    freq = {N: float(np.mean(np.array(v) >= kernel_threshold(cfg.alpha, N))) for N, v in by_n.items()}
    fv = list(freq.values())
    return {
        "median_sup": medians, "exponent_fit": _slope(medians),
        "exceedance_frequency": freq,
        "exceedance_nonincreasing": bool(all(a >= b for a, b in zip(fv, fv[1:]))),
    }


# ------------------------------------------------------ lemma tech, simple term

def _lemma_tech(cfg: ExperimentConfig, t: int, seed: int) -> list[dict]:
    sched = _schedule(cfg)
    path = sample_selectors(cfg.alpha, max(sched), seed)
    rows = []
    for N in sched:
        stat = lemma_tech_statistic(path, N, power=1)
        thr = N ** (1.0 - 2.0 * cfg.alpha)
        rows.append({"seed": seed, "alpha": cfg.alpha, "N": N, "statistic": stat,
                     "statistic_sq": lemma_tech_statistic(path, N, power=2), "threshold": thr,
                     "exceeds": int(stat >= thr)})
    return rows


def _lemma_summary(cfg, results) -> dict:
    hits: dict[int, list[int]] = {}
    for r in results:
        for row in r.rows:
            hits.setdefault(row["N"], []).append(row["exceeds"])
    freq = {N: float(np.mean(v)) for N, v in sorted(hits.items())}
    return {"exceedance_frequency": freq,
            "median_statistic": _median_by_N(results, "statistic"),
            "median_statistic_sq": _median_by_N(results, "statistic_sq")}


def _simple_term(cfg: ExperimentConfig, t: int, seed: int) -> list[dict]:
    sched = _schedule(cfg)
    path = sample_selectors(cfg.alpha, max(sched), seed)
    rows = []
    for N in sched:
        v = simple_term(path, N)
        rows.append({"seed": seed, "alpha": cfg.alpha, "N": N, "simple_term": v,
                     "scaled": v * N ** (1.0 - cfg.alpha)})
    return rows


def _simple_summary(cfg, results) -> dict:
    scaled = [row["scaled"] for r in results for row in r.rows]
    return {"min_scaled": float(min(scaled)), "max_scaled": float(max(scaled)),
            "all_in_band": bool(all(0.1 <= s <= 10.0 for s in scaled))}


# ------------------------------------------------------ averages experiments

def _averages_setup(cfg: ExperimentConfig):
    sys = system_from_params(cfg.system, cfg.theta, cfg.m)
    f = observable_from_params(cfg.k, cfg.coboundary)
    if cfg.net_points == 0:
        net = net_from_points([], cfg.n_max, include_constant=True)
    else:
        net = sample_net(cfg.delta, cfg.m_max, cfg.net_points, cfg.n_max,
                         include_constant=cfg.include_constant)
    return sys, f, net, state_grid(sys, cfg.states)


def _converge(cfg: ExperimentConfig, t: int, seed: int) -> list[dict]:
    sys, f, net, states = _averages_setup(cfg)
    sched = _schedule(cfg)
    path = sample_selectors(cfg.alpha, max(sched), seed)
    series = maximal_series_forms(path, net, sys, f, states, sched, FORMS)
    rows = []
    for form in FORMS:
        for N, v in zip(sched, series[form]):
            rows.append({"seed": seed, "alpha": cfg.alpha, "rho": cfg.rho, "N": N, "form": form,
                         "value": float(v.mean()), "sup_value": float(v.max())})
    return rows


def _converge_summary(cfg, results) -> dict:
    out = {}
    for form in FORMS:
        med = _median_by_N(results, "value", form=form)
        ns = list(med)
        out[form] = {"median_value": med, "slope": _slope(med),
                     "decay_ratio": med[ns[-1]] / med[ns[0]] if med[ns[0]] > 0 else None}
    return out


def _sigma_part(cfg: ExperimentConfig, t: int, seed: int) -> list[dict]:
    sys, f, net, states = _averages_setup(cfg)
    if f.kind != "coboundary":
        raise ConfigError("sigma-part needs a coboundary observable", field="coboundary")
    sched = [N for N in _schedule(cfg) if N >= 2]
    path = sample_selectors(cfg.alpha, max(sched), seed)
    vals = maximal_series(path, net, sys, f, states, sched, "sigma_part")
    dyadic = dyadic_block_constant(path)
    rows = []
    for N, v in zip(sched, vals):
        top = float(v.max())
        bound = lemma_final_bound(path, f.base.bound, N)
        rows.append({"seed": seed, "alpha": cfg.alpha, "N": N, "sigma_max": top, "bound": bound,
                     "ratio": top / bound, "dyadic_constant": dyadic})
    return rows


def _sigma_summary(cfg, results) -> dict:
    med = _median_by_N(results, "sigma_max")
    ratio = max(row["ratio"] for r in results for row in r.rows)
    return {"median_sigma_max": med, "slope": _slope(med), "max_ratio": ratio,
            "constant": LEMMA_FINAL_CONSTANT, "majorant_holds": bool(ratio <= LEMMA_FINAL_CONSTANT)}


# ---------------------------------------------------------------- freedman

def _freedman_schedule(cfg: ExperimentConfig) -> list[int]:
    # at N = 1 every statistic is identically zero (sigma_1 = 1)
    sched = [N for N in _schedule(cfg) if N >= 2]
    if not sched or sched[-1] != cfg.n_max:
        sched.append(cfg.n_max)
    return sched


def _freedman_scale(cfg: ExperimentConfig, N: int) -> float:
    """Unit in which the configured threshold multipliers are expressed."""
    if cfg.statistic == "martingale_sum":
        return math.sqrt(conc.variance_envelope(cfg.alpha, N))
    if cfg.statistic == "kernel_sup":
        return kernel_threshold(cfg.alpha, N)
    if cfg.statistic == "lemma_tech_statistic":
        return N ** (1.0 - 2.0 * cfg.alpha)
    return 1.0


def _freedman(cfg: ExperimentConfig, t: int, seed: int) -> list[dict]:
    sched = _freedman_schedule(cfg)
    path = sample_selectors(cfg.alpha, max(sched), seed)
    weights = _scan_weights(cfg) if cfg.statistic == "kernel_sup" else [CONSTANT]
    values, caps = conc.statistic_values(cfg.statistic, path, sched, weights)
    caps = caps or [None] * len(sched)
    return [{"trial": t, "seed": seed, "N": N, "value": v, "variance_cap": c}
            for N, v, c in zip(sched, values, caps)]


def freedman_estimates(cfg: ExperimentConfig, results: list[TrialResult]) -> list[conc.TailEstimate]:
    sched = _freedman_schedule(cfg)
    values = np.array([[row["value"] for row in r.rows] for r in results])
    caps = None
    if cfg.statistic == "kernel_sup":
        caps = np.array([[row["variance_cap"] for row in r.rows] for r in results])
    thresholds = [[m * _freedman_scale(cfg, N) for m in cfg.thresholds] for N in sched]
    n_weights = len(_scan_weights(cfg)) if cfg.statistic == "kernel_sup" else 1
    return conc.tail_estimates(cfg.statistic, cfg.alpha, sched, thresholds, values, caps, n_weights)


def _freedman_summary(cfg, results) -> dict:
    est = freedman_estimates(cfg, results)
    violations = [e for e in est if e.bound <= 1.0 and e.ci_high > e.bound]
    by_multiplier = {}
    for i, m in enumerate(cfg.thresholds):
        chain = est[i::len(cfg.thresholds)]
        by_multiplier[repr(m)] = {"borel_cantelli_sum": conc.borel_cantelli_sum(chain),
                                  "theoretical_sum": conc.theoretical_sum(chain)}
    return {"estimates": len(est), "total_hits": sum(e.hits for e in est),
            "bound_violations": len(violations), "sums": by_multiplier}


# ------------------------------------------------------------------ opnorm

def _opnorm(cfg: ExperimentConfig, t: int, seed: int) -> list[dict]:
    sched = _schedule(cfg)
    path = sample_selectors(cfg.alpha, max(sched), seed)
    net = sample_net(cfg.delta, cfg.m_max, max(cfg.net_points, 1), max(sched), include_constant=True)
    rows = []
    for N in sched:
        est = maximal_opnorm_probe(net, path, N, cfg.probes, seed=seed, power_iters=cfg.power_iters)
        rng = generator(seed, N, 1)
        f = ZSignal(0, rng.standard_normal(N) + 1j * rng.standard_normal(N))
        part = linearize(net, path, N, f)
        C = hl_domination_constant(part, net, path, N, f)
        rows.append({"seed": seed, "alpha": cfg.alpha, "N": N, "opnorm": est, "domination_C": C,
                     "simple_term": simple_term(path, N)})
    return rows


def _opnorm_summary(cfg, results) -> dict:
    med = _median_by_N(results, "opnorm")
    ratios = []
    for r in results:
        cs = [row["domination_C"] for row in r.rows]
        ratios.append(max(cs) / min(cs) if min(cs) > 0 else math.inf)
    return {"median_opnorm": med, "slope": _slope(med), "max_C_ratio": float(max(ratios)),
            "C_ratio_per_seed": ratios}


# ------------------------------------------------------------------ runner

_UNITS: dict[str, Callable] = {
    "growth": _growth, "kernel-scan": _kernel_scan, "lemma-tech": _lemma_tech,
    "simple-term": _simple_term, "converge": _converge, "sigma-part": _sigma_part,
    "freedman": _freedman, "opnorm": _opnorm,
}
_SUMMARIES: dict[str, Callable] = {
    "growth": _growth_summary, "kernel-scan": _kernel_summary, "lemma-tech": _lemma_summary,
    "simple-term": _simple_summary, "converge": _converge_summary, "sigma-part": _sigma_summary,
    "freedman": _freedman_summary, "opnorm": _opnorm_summary,
}


def summarize(cfg: ExperimentConfig, results: list[TrialResult]) -> dict:
    """Aggregate statistics (medians, fitted exponents, CI aggregates)."""
    if cfg.experiment == "net-check":
        return _net_summary(cfg, results, _load_net(cfg))
    return _SUMMARIES[cfg.experiment](cfg, results)


def header_lines(cfg: ExperimentConfig) -> list[str]:
    lines = [f"# {SCHEMA_VERSION}"]
    for line in cfg.to_text().splitlines():
        if line.split(" = ", 1)[0] not in _NOT_ECHOED:
            lines.append(f"# {line}")
    return lines


def _format(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    raise TypeError(type(o))


def _summary_line(summary: dict) -> str:
    def clean(o):
        if isinstance(o, dict):
            return {str(k): clean(v) for k, v in o.items()}
        if isinstance(o, list):
            return [clean(v) for v in o]
        if isinstance(o, float) and not math.isfinite(o):
            return repr(o)
        return o
    return "# summary " + json.dumps(clean(summary), default=_json_default)


def _open_out(target: str | IO[str]):
    if not isinstance(target, str):
        return target, False
    if target == "-":
        return _sys.stdout, False
    return open(target, "w", encoding="utf-8", newline=""), True


def run(cfg: ExperimentConfig, out: str | IO[str] | None = None) -> list[TrialResult]:
    """Run ``cfg.experiment`` over all trials and write the results.

    ``out`` overrides ``cfg.out`` (a path, ``"-"`` for stdout, or an open
    text stream).  Returns the per-trial results in trial order.
    """
    cfg = check_config(cfg)
    fh, owned = _open_out(cfg.out if out is None else out)
    try:
        return _run(cfg, fh)
    finally:
        if owned:
            fh.close()


def _run(cfg: ExperimentConfig, fh: IO[str]) -> list[TrialResult]:
    name = cfg.experiment
    if name == "net-check":
        net = _load_net(cfg)
        unit = lambda t, seed: _net_check(cfg, t, seed, net)  # noqa: E731
    else:
        unit = lambda t, seed: _UNITS[name](cfg, t, seed)  # noqa: E731

    def timed(t: int) -> TrialResult:
        seed = trial_seed(cfg.master_seed, t)
        t0 = time.perf_counter()
        rows = unit(t, seed)
        return TrialResult(name, t, seed, tuple(rows), time.perf_counter() - t0)

    for line in header_lines(cfg):
        fh.write(line + "\n")
    jsonl = name == "freedman"
    writer = None
    if not jsonl:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS[name] + ["wall_time"])
    results = []
    with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
        for res in pool.map(timed, range(cfg.trials)):
            results.append(res)
            log.info("%s trial %d/%d done in %.2fs", name, res.trial + 1, cfg.trials, res.wall_time)
            if writer is not None:
                for row in res.rows:
                    writer.writerow([_format(row[c]) for c in COLUMNS[name]] + [f"{res.wall_time:.6f}"])
            fh.flush()
    summary = summarize(cfg, results)
    if jsonl:
        for est in freedman_estimates(cfg, results):
            fh.write(est.to_json() + "\n")
    fh.write(_summary_line(summary) + "\n")
    fh.flush()
    log.info("%s summary: %s", name, _summary_line(summary)[10:])
    return results


def run_to_string(cfg: ExperimentConfig) -> str:
    buf = io.StringIO()
    run(cfg, out=buf)
    return buf.getvalue()
