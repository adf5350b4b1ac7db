"""Compare the compiled and numpy simulation kernels on the same workloads.

    python benchmarks/bench_backends.py [--trials 4096] [--steps 2000] [--repeat 3]

Each workload is run on both backends; outputs are checked for bit equality
and the best wall time of ``--repeat`` runs is reported.
"""

import argparse
import time

import numpy as np

from noisy_extremes._core import _fallback, get_kernels
from noisy_extremes.dynamics import doubling, lorenz, quadratic
from noisy_extremes.noise import NoiseSpec, pack_model
from noisy_extremes.stream import derive_stream_id, trial_stream_ids

SEED = 2024


def best_of(fn, repeat):
    best, out = np.inf, None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def same(a, b):
    if isinstance(a, tuple):
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def workloads(trials, steps):
    models = {
        "doubling": pack_model(doubling(), NoiseSpec(0.25)),
        "lorenz": pack_model(lorenz(), NoiseSpec(0.1, "reflect")),
        "quadratic": pack_model(quadratic(), NoiseSpec(0.1, "reflect")),
    }
    streams = trial_stream_ids(derive_stream_id("bench"), trials)
    rng = np.random.default_rng(0)
    x0 = rng.uniform(0.0, 1.0, trials)
    for name, model in models.items():
        lo, hi = model[5], model[6]
        start = lo + (hi - lo) * x0
        zeta = 0.5 * (lo + hi)
        radius = 0.5e-3 * (hi - lo)
        yield (f"trajectory/{name}", steps * 50,
               lambda k, m=model, s=start: k.trajectory(m, float(s[0]), SEED, 1, 0, steps * 50))
        yield (f"advance/{name}", trials * steps,
               lambda k, m=model, s=start: k.advance(m, s, SEED, streams, 0, steps))
        yield (f"first_entry/{name}", None,
               lambda k, m=model, s=start, z=zeta, r=radius:
               k.first_entry(m, s, SEED, streams, 0, z, r, steps))
    model = models["doubling"]
    chains = max(16, trials // 64)
    yield ("exceedance_times/doubling", chains * steps * 10,
           lambda k: k.exceedance_times(model, x0[:chains], SEED, streams[:chains], 0,
                                        steps * 10, 0.5, 5e-4))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=4096)
    ap.add_argument("--steps", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    try:
        compiled = get_kernels("compiled")
    except ImportError:
        print("compiled extension not built; nothing to compare")
        return 1
    print(f"{'workload':<28}{'compiled s':>12}{'python s':>12}{'speedup':>10}{'ns/step':>10}  equal")
    ok = True
    for name, steps, fn in workloads(args.trials, args.steps):
        tc, out_c = best_of(lambda: fn(compiled), args.repeat)
        tp, out_p = best_of(lambda: fn(_fallback), max(1, args.repeat // 3))
        if steps is None:
            # first_entry stops early; count the steps actually taken
            r = np.where(out_c < 0, args.steps, out_c)
            steps = int(r.sum())
        eq = same(out_c, out_p)
        ok &= eq
        print(f"{name:<28}{tc:>12.4f}{tp:>12.4f}{tp / tc:>10.1f}{1e9 * tc / steps:>10.1f}  {eq}")
    return 0 if ok else 1


if __name__ == "__main__":
    raise SystemExit(main())
