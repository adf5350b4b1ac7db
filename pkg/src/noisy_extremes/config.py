"""INI experiment configs: an ``[experiment]`` section plus one section per scenario."""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .dynamics import MapSpec, parse_map
from .noise import NoiseSpec, check_compatible, parse_noise

SCENARIOS = ("markov", "decay", "evl", "hts", "repp", "dprime")


class ConfigError(ValueError):
    """Invalid configuration; the message starts with the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# scenario -> key -> (type, default, lower bound or None)
_PARAMS = {
    "markov": {
        "gamma": (float, 0.75, 0.0), "k": (int, 1, 1),
        "expect_uniform": (bool, False, None), "uniform_tol": (float, 1e-6, 0.0),
        "delta_lo": (float, None, None), "delta_hi": (float, None, None),
    },
    "decay": {
        "n_max": (int, 40, 5), "r2_min": (float, 0.99, 0.0),
        "cor_n_max": (int, 20, 5), "cor_r2_min": (float, 0.95, 0.0),
        "phi": (str, "identity", None), "psi": (str, "indicator:0", None),
    },
    "evl": {
        "zeta": (float, None, None), "n": (int, 5000, 10), "taus": (list, [0.5, 1.0, 2.0], None),
        "trials": (int, 20000, 100), "start": (str, "stationary", None),
        "oracle": (bool, False, None), "sigmas": (float, 3.0, 0.0),
    },
    "hts": {
        "zeta": (float, None, None), "mass": (float, 1e-3, 0.0), "samples": (int, 5000, 500),
        "ks_max": (float, 0.03, 0.0), "kac_lo": (float, 0.95, None), "kac_hi": (float, 1.05, None),
        "reconstruction_max": (float, 0.04, 0.0),
    },
    "repp": {
        "zeta": (float, None, None), "n": (int, 1000, 10), "tau": (float, 1.0, 0.0),
        "windows": (int, 5000, 200), "dispersion_lo": (float, 0.9, None),
        "dispersion_hi": (float, 1.1, None),
    },
    "dprime": {
        "zeta": (float, None, None), "ns": (list, [1000.0, 10000.0], None), "tau": (float, 1.0, 0.0),
        "trials": (list, [10000.0, 20000.0], None), "chains": (int, 400, 1),
        "sigmas": (float, 3.0, 0.0),
    },
}


@dataclass
class ExperimentConfig:
    map: MapSpec
    noise: NoiseSpec
    seed: int
    grid: int
    scenario: str
    params: dict = field(default_factory=dict)
    source: str = ""

    def echo(self) -> dict:
        params = {k: v for k, v in self.params.items()}
        return {"map": self.map.id, "noise": self.noise.id, "seed": self.seed, "grid": self.grid,
                "scenario": self.scenario, "params": params, "source": self.source}


def _convert(path: str, kind, raw: str):
    raw = raw.strip()
    try:
        if kind is bool:
            low = raw.lower()
            if low not in ("true", "false", "yes", "no", "1", "0"):
                raise ValueError(raw)
            return low in ("true", "yes", "1")
        if kind is list:
            return [float(v) for v in raw.replace(",", " ").split()]
        return kind(raw)
    except ValueError:
        raise ConfigError(path, f"cannot parse {raw!r}") from None


def _seed(raw: str) -> int:
    try:
        seed = int(raw.strip(), 0)
    except ValueError:
        raise ConfigError("experiment.seed", f"not an integer: {raw!r}") from None
    if not 0 <= seed < 2 ** 64:
        raise ConfigError("experiment.seed", "must be a 64-bit unsigned integer")
    return seed


def parse_config(text: str, source: str = "<string>", seed: int | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError("<file>", str(exc).splitlines()[0]) from None
    if not cp.has_section("experiment"):
        raise ConfigError("experiment", "missing section")
    ex = cp["experiment"]
    for key in ("map", "noise", "scenario"):
        if key not in ex:
            raise ConfigError(f"experiment.{key}", "missing")
    if seed is None:
        if "seed" not in ex:
            raise ConfigError("experiment.seed", "missing (seed is mandatory)")
        seed = _seed(ex["seed"])
    elif not 0 <= seed < 2 ** 64:
        raise ConfigError("experiment.seed", "must be a 64-bit unsigned integer")
    try:
        spec = parse_map(ex["map"])
    except ValueError as exc:
        raise ConfigError("experiment.map", str(exc)) from None
    try:
        noise = parse_noise(ex["noise"])
        check_compatible(spec, noise)
    except ValueError as exc:
        raise ConfigError("experiment.noise", str(exc)) from None
    scenario = ex["scenario"].strip()
    if scenario not in SCENARIOS:
        raise ConfigError("experiment.scenario", f"unknown scenario {scenario!r}")
    grid = _convert("experiment.grid", int, ex.get("grid", "512"))
    if grid < 16:
        raise ConfigError("experiment.grid", "must be at least 16")
    unknown = set(ex) - {"map", "noise", "seed", "grid", "scenario"}
    if unknown:
        raise ConfigError(f"experiment.{sorted(unknown)[0]}", "unknown key")

    section = cp[scenario] if cp.has_section(scenario) else {}
    schema = _PARAMS[scenario]
    unknown = set(section) - set(schema)
    if unknown:
        raise ConfigError(f"{scenario}.{sorted(unknown)[0]}", "unknown key")
    params = {}
    for key, (kind, default, lower) in schema.items():
        path = f"{scenario}.{key}"
        value = _convert(path, kind, section[key]) if key in section else default
        if value is None and key == "zeta":
            value = spec.domain.lower + spec.domain.length / 2
        if lower is not None and kind in (int, float) and value is not None and value < lower:
            raise ConfigError(path, f"must be at least {lower}")
        if kind is list and not value:
            raise ConfigError(path, "empty list")
        params[key] = value
    _check_params(scenario, params, spec)
    return ExperimentConfig(spec, noise, seed, grid, scenario, params, source)


def _check_params(scenario: str, p: dict, spec: MapSpec) -> None:
    if "zeta" in p and not spec.domain.contains(p["zeta"]):
        raise ConfigError(f"{scenario}.zeta", "outside the phase space")
    if scenario == "markov" and not 0.0 < p["gamma"] < 1.0:
        raise ConfigError("markov.gamma", "must lie in (0, 1)")
    if scenario == "evl":
        if any(t <= 0 for t in p["taus"]):
            raise ConfigError("evl.taus", "must be positive")
        if p["start"] not in ("stationary", "burn-in"):
            raise ConfigError("evl.start", "must be stationary or burn-in")
    if scenario == "hts" and not 0.0 < p["mass"] < 0.5:
        raise ConfigError("hts.mass", "must lie in (0, 0.5)")
    if scenario == "dprime":
        if len(p["ns"]) != len(p["trials"]):
            raise ConfigError("dprime.trials", "needs one entry per n")
        if any(t < 1 for t in p["trials"]):
            raise ConfigError("dprime.trials", "must be positive")
        p["ns"] = [int(v) for v in p["ns"]]
        p["trials"] = [int(v) for v in p["trials"]]


def load_config(path, seed: int | None = None) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("<file>", f"cannot read {path}: {exc.strerror}") from None
    return parse_config(text, str(path), seed)
