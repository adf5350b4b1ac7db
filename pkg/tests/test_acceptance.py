"""End-to-end acceptance runs at full scale.

Each check prints one ``PASS``/``FAIL`` line; the lines are repeated in the
terminal summary under "acceptance criteria".
"""

import csv
import filecmp
import json
import math
import time
from importlib import resources

import numpy as np
import pytest

from conftest import ACCEPTANCE_LINES
from noisy_extremes import grid
from noisy_extremes.config import load_config
from noisy_extremes.dynamics import doubling, quadratic
from noisy_extremes.noise import NoiseSpec, verify_perturbation_conditions
from noisy_extremes.scenarios import correlation_envelope, run_experiment

CONFIGS = resources.files("noisy_extremes") / "configs"
THREADS = 4


def report(name, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} {name}: {detail}"
    print(line)
    ACCEPTANCE_LINES.append(line)
    return ok


def timed(fn, *args):
    t = time.perf_counter()
    out = fn(*args)
    return out, time.perf_counter() - t


@pytest.fixture(scope="module")
def runs(tmp_path_factory):
    """Every shipped config run once with several threads; wall times kept."""
    base = tmp_path_factory.mktemp("acceptance")
    out = {}
    for path in sorted(CONFIGS.iterdir()):
        if path.name.endswith(".ini"):
            name = path.name[:-4]
            res, wall = timed(run_experiment, load_config(path), base / name, THREADS)
            out[name] = (res, wall, base / name)
    return out


def read_json(run, name):
    return json.loads((run[2] / name).read_text())


def read_csv(run, name):
    with open(run[2] / name) as fh:
        return list(csv.DictReader(fh))


def test_c1_stationary_uniformity():
    def go():
        K = grid.discretize(doubling(2), NoiseSpec(0.25), 512)
        return grid.stationary(K)
    dens, wall = timed(go)
    dev = float(np.max(np.abs(dens.h - 1.0)))
    assert report("C1 stationary uniformity", dev < 1e-6 and wall < 5,
                  f"max|h-1| = {dev:.3g} (< 1e-6), {wall:.2f} s (< 5 s)")


def _rate_fit(spec, noise):
    K = grid.discretize(spec, noise, 512)
    dens = grid.stationary(K)
    return grid.fit_geometric_rate(grid.tv_profile(K, dens.pi, 40))


def test_c2_uniform_ergodicity_quadratic():
    fit, wall = timed(_rate_fit, quadratic(2.0), NoiseSpec(0.1, "reflect"))
    ok = fit.r_squared >= 0.99 and fit.lam > 1 and wall < 30
    assert report("C2 uniform ergodicity, quadratic(2) eps=0.1", ok,
                  f"r2 = {fit.r_squared:.4f} (>= 0.99), lambda = {fit.lam:.3f} (> 1), "
                  f"{wall:.2f} s (< 30 s)")


@pytest.mark.xfail(strict=True, reason="the doubling grid chain is exactly stationary after two "
                                       "steps, so the profile has no geometric tail to fit")
def test_c2_uniform_ergodicity_doubling():
    fit, wall = timed(_rate_fit, doubling(2), NoiseSpec(0.25))
    ok = fit.r_squared >= 0.99 and fit.lam > 1 and wall < 30
    report("C2 uniform ergodicity, doubling eps=0.25", ok,
           f"r2 = {fit.r_squared:.4f} (>= 0.99), lambda = {fit.lam:.3f} (> 1); "
           "profile is 0.5 then below 1e-14")
    assert ok


def _doeblin():
    K = grid.discretize(doubling(2), NoiseSpec(0.25), 512)
    r = verify_perturbation_conditions(K.map, K.noise, K.m)
    return grid.doeblin_margin(K, 0.75, 1), r


def test_c3_doeblin_margin():
    (delta, r), wall = timed(_doeblin)
    bound = grid.doeblin_constructive_bound(r.lower_q, r.rho0, 0.75) - 2 * r.upper_q / 512
    ok = 0.48 <= delta <= 0.50 and delta >= bound and wall < 10
    assert report("C3 Doeblin margin", ok,
                  f"delta = {delta:.6f} in [0.48, 0.50], >= {bound:.6f} "
                  f"(ball measure 2(1-gamma)), {wall:.2f} s (< 10 s)")


@pytest.mark.xfail(strict=True, reason="with gamma = 0.75 substituted literally the bound is "
                                       "0.742, above the 0.50 ceiling of the same criterion")
def test_c3_doeblin_literal_gamma():
    delta, r = _doeblin()
    literal = r.lower_q * 0.75 / 2 - 2 * r.upper_q / 512
    ok = delta >= literal
    report("C3 Doeblin margin, gamma substituted literally", ok,
           f"delta = {delta:.6f} vs lower_q*gamma/2 - 2 upper_q/m = {literal:.6f}")
    assert ok


def test_c4_correlation_decay(runs):
    res, _, _ = runs["decay_quadratic"]
    rows = read_csv(runs["decay_quadratic"], "correlation.csv")
    n = np.array([int(r["n"]) for r in rows])
    cor = np.array([float(r["cor"]) for r in rows])
    two_d = np.array([float(r["two_d"]) for r in rows])
    env = correlation_envelope(cor)
    ok = n.tolist() == list(range(1, 21)) and env.r_squared >= 0.95 and np.all(cor <= two_d)
    assert report("C4 correlation decay, quadratic(2) eps=0.1", ok,
                  f"envelope r2 = {env.r_squared:.4f} (>= 0.95) over n=1..20, "
                  f"max cor/2d = {np.max(cor / two_d):.3f} (<= 1)")


def test_c5_evl(runs):
    res, wall, _ = runs["evl_doubling"]
    rows = read_csv(runs["evl_doubling"], "evl.csv")
    ok, parts = wall < 600, []
    for r in rows:
        tau, p, trials = float(r["tau"]), float(r["p_hat"]), int(r["trials"])
        tol = 3 * math.sqrt(math.exp(-tau) * (1 - math.exp(-tau)) / trials)
        err = abs(p - math.exp(-tau))
        ok &= err <= tol and int(r["n"]) == 5000 and trials == 20000
        parts.append(f"tau={tau:g}: |p-e^-tau| = {err:.4f} (<= {tol:.4f})")
    ok &= sorted(float(r["tau"]) for r in rows) == [0.5, 1.0, 2.0]
    assert report("C5 EVL", ok, "; ".join(parts) + f"; {wall:.1f} s (< 600 s)")


def test_c6_oracle_equivalence(runs):
    rows = read_csv(runs["oracle_doubling"], "evl.csv")
    ok, parts = True, []
    for r in rows:
        p, q, trials = float(r["p_hat"]), float(r["target"]), int(r["trials"])
        tol = 3 * math.sqrt(q * (1 - q) / trials)
        ok &= abs(p - q) <= tol and int(r["n"]) == 64
        parts.append(f"tau={float(r['tau']):g}: |p-oracle| = {abs(p - q):.4f} (<= {tol:.4f})")
    assert load_config(CONFIGS / "oracle_doubling.ini").grid == 256
    assert report("C6 oracle equivalence", ok and len(rows) == 3, "; ".join(parts))


def test_c7_hts_rts(runs):
    h = read_json(runs["hts_doubling"], "hts.json")
    kac = h["kac"]["product"]
    ok = (h["n"] == 5000 and h["ks"] < 0.03 and h["rts"]["ks"] < 0.03
          and 0.95 <= kac <= 1.05 and h["reconstruction_sup"] <= 0.04
          and h["censored_fraction"] < 1e-3 and abs(h["ball"]["mass"] - 1e-3) < 1e-5)
    assert report("C7 HTS/RTS", ok,
                  f"KS hts = {h['ks']:.4f}, rts = {h['rts']['ks']:.4f} (< 0.03), "
                  f"Kac = {kac:.4f} in [0.95, 1.05], reconstruction = "
                  f"{h['reconstruction_sup']:.4f} (<= 0.04), censored = {h['censored_fraction']:g}")


def test_c8_repp(runs):
    r = read_json(runs["repp_doubling"], "repp.json")
    ok = (r["windows"] >= 2000 and 0.9 <= r["dispersion"] <= 1.1
          and r["chi2_p"] >= 0.01 and r["ks_p"] >= 0.01)
    assert report("C8 REPP", ok,
                  f"{r['windows']} windows, dispersion = {r['dispersion']:.4f} in [0.9, 1.1], "
                  f"chi2 p = {r['chi2_p']:.3f}, KS p = {r['ks_p']:.3f} (>= 0.01)")


def test_c9_dprime(runs):
    res = {r["n"]: r for r in read_json(runs["dprime_doubling"], "dprime.json")["results"]}
    a, b = res[1000], res[10000]
    ok = b["s_hat"] < a["s_hat"] / 2
    for r in (a, b):
        ok &= r["s_hat"] <= r["bound"] + 3 * r["se"]
    assert report("C9 D' statistic", ok,
                  f"S(1e3) = {a['s_hat']:.4f} (bound {a['bound']:.4f}), "
                  f"S(1e4) = {b['s_hat']:.4f} (bound {b['bound']:.4f}), "
                  f"ratio = {b['s_hat'] / a['s_hat']:.3f} (< 0.5)")


def test_c10_determinism(runs, tmp_path):
    ok, checked = True, 0
    for name, (_, _, first) in sorted(runs.items()):
        again = tmp_path / name
        run_experiment(load_config(CONFIGS / f"{name}.ini"), again, 1)
        csvs = sorted(p.name for p in first.iterdir() if p.suffix == ".csv")
        _, mismatch, errors = filecmp.cmpfiles(first, again, csvs, shallow=False)
        ok &= bool(csvs) and not mismatch and not errors
        checked += len(csvs)
    assert report("C10 determinism", ok,
                  f"{checked} CSV files from {len(runs)} configs identical at --threads "
                  f"{THREADS} and 1")
