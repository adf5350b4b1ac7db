"""Command line entry point: ``noisy-extremes {run,kernel-export,list-maps,selftest}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

EXIT_PASS = 0
EXIT_FAIL = 1
EXIT_USAGE = 2


def _seed_arg(text: str) -> int:
    try:
        v = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be a 64-bit unsigned integer")
    return v


def _threads_arg(text: str) -> int:
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("threads must be at least 1")
    return v


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="noisy-extremes",
                                 description="Extremes and recurrence of randomly perturbed maps.")
    sub = ap.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the scenario of a config file")
    run.add_argument("config")
    run.add_argument("--seed", type=_seed_arg, default=None, help="override the config seed")
    run.add_argument("--threads", type=_threads_arg, default=1)
    run.add_argument("--out", default=None, help="artifact directory (default runs/<name>)")
    exp = sub.add_parser("kernel-export", help="write the grid kernel and stationary density")
    exp.add_argument("config")
    exp.add_argument("--seed", type=_seed_arg, default=None)
    exp.add_argument("--threads", type=_threads_arg, default=1)
    exp.add_argument("--out", default=None)
    sub.add_parser("list-maps", help="print the map catalog")
    sub.add_parser("selftest", help="quick consistency checks of the installation")
    return ap


def _default_out(config: str) -> Path:
    return Path("runs") / Path(config).stem


def cmd_run(args) -> int:
    from .config import ConfigError, load_config
    from .scenarios import run_experiment

    try:
        cfg = load_config(args.config, args.seed)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out) if args.out else _default_out(args.config)
    result = run_experiment(cfg, out, args.threads)
    for c in result.criteria:
        print(f"{'PASS' if c.passed else 'FAIL'} {c.name}: {c.value!r} ({c.threshold})")
    if result.error:
        print(f"error: {result.error}", file=sys.stderr)
    failing = [c.name for c in result.criteria if not c.passed]
    if failing:
        print("failing criteria: " + ", ".join(failing), file=sys.stderr)
    print(f"artifacts in {out}")
    return EXIT_PASS if result.passed else EXIT_FAIL


def cmd_kernel_export(args) -> int:
    from . import grid
    from .config import ConfigError, load_config

    try:
        cfg = load_config(args.config, args.seed)
    except ConfigError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    out = Path(args.out) if args.out else _default_out(args.config)
    out.mkdir(parents=True, exist_ok=True)
    K = grid.discretize(cfg.map, cfg.noise, cfg.grid)
    dens = grid.stationary(K)
    files = list(grid.export_kernel(K, out / "kernel"))
    files.append(grid.export_density(K, dens, out / "density.csv"))
    for f in files:
        print(f)
    return EXIT_PASS


def cmd_list_maps(args) -> int:
    from .dynamics import CATALOG

    for pattern, text in CATALOG.items():
        print(f"{pattern:<18} {text}")
    return EXIT_PASS


def selftest_checks() -> list[tuple[str, bool]]:
    from . import grid
    from ._core import _fallback, get_kernels
    from .dynamics import doubling, lorenz
    from .noise import NoiseSpec, pack_model
    from .stats import exponential_cdf, ks_statistic

    checks = []
    w = _fallback.threefry2x64(0, 0, 0, 0)
    checks.append(("threefry known answer",
                   (int(w[0]), int(w[1])) == (0xC2B6E3A8C2C69865, 0x6F81ED42F350084D)))
    try:
        compiled = get_kernels("compiled")
    except ImportError:
        compiled = None
    if compiled is not None:
        same = True
        for spec, noise in ((doubling(), NoiseSpec(0.25)), (lorenz(), NoiseSpec(0.1, "reflect"))):
            model = pack_model(spec, noise)
            a = compiled.trajectory(model, 0.3, 7, 11, 5, 2000)
            b = _fallback.trajectory(model, 0.3, 7, 11, 5, 2000)
            same &= bool(np.array_equal(a, b))
        checks.append(("compiled and python backends agree", same))
    K = grid.discretize(doubling(), NoiseSpec(0.25), 128)
    checks.append(("doubling grid density is uniform",
                   float(np.max(np.abs(grid.stationary(K).h - 1.0))) < 1e-6))
    x = np.random.default_rng(1).exponential(size=2000)
    checks.append(("KS harness accepts Exp(1)", ks_statistic(x, exponential_cdf).pvalue > 0.05))
    return checks


def cmd_selftest(args) -> int:
    from ._core import BACKEND

    print(f"backend: {BACKEND}")
    ok = True
    for name, passed in selftest_checks():
        print(f"{'PASS' if passed else 'FAIL'} {name}")
        ok &= passed
    return EXIT_PASS if ok else EXIT_FAIL


COMMANDS = {
    "run": cmd_run,
    "kernel-export": cmd_kernel_export,
    "list-maps": cmd_list_maps,
    "selftest": cmd_selftest,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
