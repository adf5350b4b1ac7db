"""Scenario runners behind ``noisy-extremes run``.

Each scenario writes its CSV/JSON artifacts into the output directory and
returns a list of named criteria; :func:`run_experiment` adds
``manifest.json`` whatever happens.
"""

from __future__ import annotations

import json
import math
import time
import traceback
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import __version__, evl, grid, recurrence, repp
from ._core import BACKEND
from .config import ExperimentConfig
from .noise import verify_perturbation_conditions


@dataclass(frozen=True)
class Criterion:
    name: str
    passed: bool
    value: float | None
    threshold: str

    def to_json(self) -> dict:
        v = self.value
        if v is not None and not math.isfinite(v):
            v = None
        return {"name": self.name, "pass": bool(self.passed), "value": v,
                "threshold": self.threshold}


def _dump(obj, path: Path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(type(o))


def _clean(v):
    """Floats for JSON; non-finite values become None."""
    if isinstance(v, dict):
        return {k: _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else None
    if isinstance(v, np.integer):
        return int(v)
    return v


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_cell(v) for v in row) + "\n")


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return str(v)


def _grid(cfg: ExperimentConfig):
    K = grid.discretize(cfg.map, cfg.noise, cfg.grid)
    return K, grid.stationary(K)


def _cell_function(text: str, x: np.ndarray) -> np.ndarray:
    kind, _, arg = text.partition(":")
    if kind == "identity":
        return x.copy()
    if kind == "cos":
        return np.cos(2.0 * np.pi * x)
    if kind == "indicator":
        return (x > float(arg or 0.0)).astype(np.float64)
    raise ValueError(f"unknown cell function {text!r}")


def run_markov(cfg: ExperimentConfig, out: Path, threads: int = 1) -> list[Criterion]:
    p = cfg.params
    K, dens = _grid(cfg)
    grid.export_density(K, dens, out / "density.csv")
    report = verify_perturbation_conditions(cfg.map, cfg.noise, cfg.grid)
    delta = grid.doeblin_margin(K, p["gamma"], p["k"])
    crit = []
    dev = float(np.max(np.abs(dens.h - 1.0)))
    if p["expect_uniform"]:
        crit.append(Criterion("density_uniform", dev < p["uniform_tol"], dev,
                              f"max|h-1| < {p['uniform_tol']:g}"))
    bound = None
    if p["k"] == 1:
        bound = (grid.doeblin_constructive_bound(report.lower_q, report.rho0, p["gamma"])
                 - 2.0 * report.upper_q / cfg.grid)
        crit.append(Criterion("doeblin_bound", delta >= bound, delta, f">= {bound!r}"))
    if p["delta_lo"] is not None or p["delta_hi"] is not None:
        lo = -math.inf if p["delta_lo"] is None else p["delta_lo"]
        hi = math.inf if p["delta_hi"] is None else p["delta_hi"]
        crit.append(Criterion("doeblin_range", lo <= delta <= hi, delta, f"in [{lo:g}, {hi:g}]"))
    dbound = grid.density_lower_bound(K, dens)
    _dump(_clean({
        "max_abs_h_minus_1": dev, "h_lower": dens.h_lower, "iterations": dens.iterations,
        "doeblin_delta": delta, "doeblin_bound": bound, "gamma": p["gamma"], "k": p["k"],
        "perturbation": asdict(report), "aperiodicity_index": grid.aperiodicity_index(K),
        "density_bound": asdict(dbound),
    }), out / "markov.json")
    return crit


def correlation_envelope(cor, floor: float = grid.CONVERGED_FLOOR) -> grid.RateFit:
    """Geometric fit to the non-increasing envelope ``max_{k >= n} Cor(k)``."""
    env = np.maximum.accumulate(np.asarray(cor, dtype=np.float64)[::-1])[::-1]
    return grid.fit_geometric_rate(env, floor)


def run_decay(cfg: ExperimentConfig, out: Path, threads: int = 1) -> list[Criterion]:
    p = cfg.params
    K, dens = _grid(cfg)
    d = grid.tv_profile(K, dens.pi, p["n_max"])
    fit = grid.fit_geometric_rate(d)
    phi = _cell_function(p["phi"], K.midpoints)
    psi = _cell_function(p["psi"], K.midpoints)
    cor = grid.correlation_profile(K, dens.pi, phi, psi, p["cor_n_max"])[1:]
    env = correlation_envelope(cor)
    dominated = bool(np.all(cor <= 2.0 * d[:cor.size] + 1e-15))
    _write_csv(out / "tv_profile.csv", ["n", "d"], zip(range(1, d.size + 1), d.tolist()))
    _write_csv(out / "correlation.csv", ["n", "cor", "two_d"],
               zip(range(1, cor.size + 1), cor.tolist(), (2.0 * d[:cor.size]).tolist()))
    _dump(_clean({"tv_fit": asdict(fit), "correlation_fit": asdict(env), "phi": p["phi"],
                  "psi": p["psi"]}), out / "decay.json")
    ok_fit = (not fit.converged) and fit.r_squared >= p["r2_min"] and fit.lam > 1.0
    ok_env = (not env.converged) and env.r_squared >= p["cor_r2_min"]
    return [
        Criterion("tv_rate_fit", ok_fit, fit.r_squared,
                  f"r2 >= {p['r2_min']:g} and lambda > 1 (lambda={fit.lam!r}, converged={fit.converged})"),
        Criterion("correlation_envelope", ok_env, env.r_squared,
                  f"r2 >= {p['cor_r2_min']:g} (converged={env.converged})"),
        Criterion("correlation_below_2d", dominated, float(np.max(cor - 2.0 * d[:cor.size])),
                  "Cor(n) <= 2 d(n)"),
    ]


def run_evl(cfg: ExperimentConfig, out: Path, threads: int = 1) -> list[Criterion]:
    p = cfg.params
    K, dens = _grid(cfg)
    obs = evl.build_observable(K, dens, p["zeta"])
    rows, crit, levels = [], [], []
    for tau in p["taus"]:
        entry = evl.calibrate_levels(obs, p["n"], tau)
        levels.append(asdict(entry))
        target = evl.grid_survival(K, dens, entry) if p["oracle"] else math.exp(-tau)
        est = evl.evl_estimate(cfg.map, cfg.noise, K, dens, entry, p["trials"], cfg.seed,
                               threads=threads, start=p["start"], target=target)
        rows.append((tau, p["n"], p["trials"], est.p_hat, est.ci_lo, est.ci_hi, target))
        err = abs(est.p_hat - target)
        tol = p["sigmas"] * est.sigma
        name = ("oracle" if p["oracle"] else "evl") + f"_tau={tau:g}"
        crit.append(Criterion(name, err <= tol, err, f"<= {tol!r}"))
    _write_csv(out / "evl.csv", ["tau", "n", "trials", "p_hat", "ci_lo", "ci_hi", "target"], rows)
    _dump(_clean({"levels": levels, "target": "taboo" if p["oracle"] else "exp(-tau)"}),
          out / "evl.json")
    return crit


def run_hts(cfg: ExperimentConfig, out: Path, threads: int = 1) -> list[Criterion]:
    p = cfg.params
    K, dens = _grid(cfg)
    obs = evl.build_observable(K, dens, p["zeta"])
    radius = float(obs.radial_cdf.inverse(p["mass"]))
    ball = recurrence.TargetBall(p["zeta"], radius, float(obs.radial_cdf(radius)))
    hit = recurrence.sample_hitting_times(cfg.map, cfg.noise, K, dens, ball, p["samples"],
                                          cfg.seed, "hit", threads=threads)
    ret = recurrence.sample_hitting_times(cfg.map, cfg.noise, K, dens, ball, p["samples"],
                                          cfg.seed, "return", threads=threads)
    rows = []
    for s in (hit, ret):
        for r in s.raw_times.tolist():
            rows.append((s.kind, r, r * ball.mass if r > 0 else ""))
    _write_csv(out / "samples.csv", ["kind", "raw_time", "normalized_time"], rows)
    h = recurrence.hts_test(hit)
    r = recurrence.hts_test(ret)
    kac, kac_se = recurrence.kac_check(ret, ball.mass)
    gap = recurrence.rts_hts_gap(ret.normalized, hit.normalized)
    censored = max(hit.censored_fraction, ret.censored_fraction)
    _dump(_clean({
        "ks": h.ks, "n": h.n, "pass": h.passed, "censored_fraction": hit.censored_fraction,
        "critical": h.critical, "ball": asdict(ball),
        "rts": {"ks": r.ks, "n": r.n, "pass": r.passed, "censored_fraction": ret.censored_fraction},
        "kac": {"product": kac, "se": kac_se}, "reconstruction_sup": gap,
    }), out / "hts.json")
    return [
        Criterion("hts_ks", h.ks < p["ks_max"] and h.passed, h.ks,
                  f"< {p['ks_max']:g} and < {h.critical!r}"),
        Criterion("rts_ks", r.passed, r.ks, f"< {r.critical!r}"),
        Criterion("kac", p["kac_lo"] <= kac <= p["kac_hi"], kac,
                  f"in [{p['kac_lo']:g}, {p['kac_hi']:g}] (se={kac_se!r})"),
        Criterion("hts_rts_reconstruction", gap <= p["reconstruction_max"], gap,
                  f"<= {p['reconstruction_max']:g}"),
        Criterion("censoring", censored < recurrence.MAX_CENSORED, censored,
                  f"< {recurrence.MAX_CENSORED:g}"),
    ]


def run_repp(cfg: ExperimentConfig, out: Path, threads: int = 1) -> list[Criterion]:
    p = cfg.params
    K, dens = _grid(cfg)
    obs = evl.build_observable(K, dens, p["zeta"])
    entry = evl.calibrate_levels(obs, p["n"], p["tau"])
    horizon = int(math.ceil(p["windows"] / entry.mass))
    series = repp.exceedance_series(cfg.map, cfg.noise, K, dens, entry, horizon, cfg.seed)
    counts = repp.build_repp(series)
    gaps = repp.interarrival_gaps(series)
    repp.write_counts_csv(counts, out / "counts.csv")
    repp.write_gaps_csv(gaps, out / "gaps.csv")
    report = repp.poisson_tests(counts, gaps)
    payload = report.to_json()
    payload.update({"windows": report.windows, "gaps": report.gaps, "mean": report.mean,
                    "dispersion_p": report.dispersion_p, "chi2": report.chi2, "ks_p": report.ks_p,
                    "v_n": series.v_n, "horizon": horizon, "level": asdict(entry)})
    _dump(_clean(payload), out / "repp.json")
    lo, hi = p["dispersion_lo"], p["dispersion_hi"]
    return [
        Criterion("repp_dispersion", lo <= report.dispersion <= hi, report.dispersion,
                  f"in [{lo:g}, {hi:g}]"),
        Criterion("repp_chi2", report.chi2_pass, report.chi2_p, f"p >= {report.alpha:g}"),
        Criterion("repp_ks", report.ks_pass, report.ks_p, f"p >= {report.alpha:g}"),
    ]


def run_dprime(cfg: ExperimentConfig, out: Path, threads: int = 1) -> list[Criterion]:
    p = cfg.params
    K, dens = _grid(cfg)
    obs = evl.build_observable(K, dens, p["zeta"])
    results, crit = [], []
    for n, trials in zip(p["ns"], p["trials"]):
        entry = evl.calibrate_levels(obs, n, p["tau"])
        res = evl.dprime_statistic(cfg.map, cfg.noise, K, dens, entry, trials, cfg.seed,
                                   chains=p["chains"], threads=threads)
        results.append(res)
        limit = res.bound + p["sigmas"] * res.se
        crit.append(Criterion(f"dprime_bound_n={n}", res.s_hat <= limit, res.s_hat,
                              f"<= {limit!r}"))
    for a, b in zip(results, results[1:]):
        if b.n >= 10 * a.n:
            crit.append(Criterion(f"dprime_decrease_{a.n}_{b.n}", b.s_hat < a.s_hat / 2,
                                  b.s_hat, f"< {a.s_hat / 2!r}"))
    _write_csv(out / "dprime.csv",
               ["n", "k_n", "window", "steps", "s_hat", "se", "bound", "pairs", "exceedances"],
               [(r.n, r.k_n, r.window, r.steps, r.s_hat, r.se, r.bound, r.pairs, r.exceedances)
                for r in results])
    _dump(_clean({"results": [asdict(r) for r in results]}), out / "dprime.json")
    return crit


RUNNERS = {
    "markov": run_markov,
    "decay": run_decay,
    "evl": run_evl,
    "hts": run_hts,
    "repp": run_repp,
    "dprime": run_dprime,
}


@dataclass
class RunResult:
    passed: bool
    criteria: list
    out: Path
    error: str | None = None


def run_experiment(cfg: ExperimentConfig, out, threads: int = 1) -> RunResult:
    """Run ``cfg.scenario`` into ``out``; ``manifest.json`` is written even on failure."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()
    criteria, error = [], None
    try:
        criteria = RUNNERS[cfg.scenario](cfg, out, threads)
    except Exception as exc:  # recorded in the manifest, reported as a failure
        error = "".join(traceback.format_exception_only(type(exc), exc)).strip()
    wall = time.perf_counter() - start
    passed = error is None and all(c.passed for c in criteria)
    manifest = {
        "config": cfg.echo(), "seed": cfg.seed, "code_version": __version__, "backend": BACKEND,
        "threads": threads, "wall_time": wall, "criteria": [c.to_json() for c in criteria],
        "pass": passed, "error": error,
        "outputs": sorted(f.name for f in out.iterdir() if f.name != "manifest.json"),
    }
    _dump(_clean(manifest), out / "manifest.json")
    return RunResult(passed, criteria, out, error)
