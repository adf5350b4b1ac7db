import filecmp
import json
from importlib import resources

import pytest

from noisy_extremes import cli
from noisy_extremes.config import SCENARIOS, ConfigError, load_config, parse_config
from reduced_configs import REDUCED, reduced_text, write_reduced

CONFIGS = resources.files("noisy_extremes") / "configs"
SCHEMA = json.loads((resources.files("noisy_extremes") / "schema" / "csv_schema.json").read_text())

BASE = """[experiment]
map = doubling:2
noise = uniform:epsilon=0.25:boundary=wrap
seed = 5
scenario = evl
"""


def test_shipped_configs_parse():
    names = sorted(p.name for p in CONFIGS.iterdir() if p.name.endswith(".ini"))
    assert len(names) == 8
    for name in names:
        cfg = load_config(CONFIGS / name)
        assert cfg.seed == 2024 and cfg.scenario in SCENARIOS


def test_defaults_and_echo():
    cfg = parse_config(BASE)
    assert cfg.params["zeta"] == 0.5 and cfg.params["taus"] == [0.5, 1.0, 2.0]
    assert cfg.grid == 512
    echo = cfg.echo()
    assert echo["map"] == "doubling:2" and echo["seed"] == 5
    json.dumps(echo)


def test_seed_override():
    assert parse_config(BASE, seed=9).seed == 9
    assert parse_config(BASE.replace("seed = 5", "seed = 0x10")).seed == 16


@pytest.mark.parametrize("text, path", [
    (BASE.replace("seed = 5\n", ""), "experiment.seed"),
    (BASE.replace("seed = 5", "seed = -1"), "experiment.seed"),
    (BASE.replace("doubling:2", "tent"), "experiment.map"),
    (BASE.replace("epsilon=0.25", "epsilon=0.9"), "experiment.noise"),
    (BASE.replace("evl\n", "weather\n"), "experiment.scenario"),
    (BASE + "colour = red\n", "experiment.colour"),
    (BASE + "grid = 8\n", "experiment.grid"),
    (BASE + "\n[evl]\ntrials = 0\n", "evl.trials"),
    (BASE + "\n[evl]\ntrials = many\n", "evl.trials"),
    (BASE + "\n[evl]\nzeta = 2\n", "evl.zeta"),
    (BASE + "\n[evl]\ntaus = 1, -1\n", "evl.taus"),
    (BASE + "\n[evl]\nlevel = 3\n", "evl.level"),
    (BASE + "\n[evl]\nstart = cold\n", "evl.start"),
    (BASE.replace("evl\n", "markov\n") + "\n[markov]\ngamma = 1.5\n", "markov.gamma"),
    (BASE.replace("evl\n", "hts\n") + "\n[hts]\nsamples = 100\n", "hts.samples"),
    (BASE.replace("evl\n", "repp\n") + "\n[repp]\nwindows = 10\n", "repp.windows"),
    (BASE.replace("evl\n", "dprime\n") + "\n[dprime]\nns = 100\ntrials = 1, 2\n", "dprime.trials"),
    ("no sections here", "<file>"),
    ("[other]\nx = 1\n", "experiment"),
])
def test_config_errors_name_the_field(text, path):
    with pytest.raises(ConfigError) as info:
        parse_config(text)
    assert info.value.path == path and str(info.value).startswith(path)


def test_missing_file():
    with pytest.raises(ConfigError):
        load_config("/nonexistent/x.ini")


def test_cli_usage_errors(tmp_path, capsys):
    bad = tmp_path / "bad.ini"
    bad.write_text(BASE + "\n[evl]\ntrials = 0\n")
    assert cli.main(["run", str(bad), "--out", str(tmp_path / "o")]) == 2
    assert "evl.trials" in capsys.readouterr().err
    noseed = tmp_path / "noseed.ini"
    noseed.write_text(BASE.replace("seed = 5\n", ""))
    assert cli.main(["run", str(noseed), "--out", str(tmp_path / "o")]) == 2
    assert cli.main(["kernel-export", str(bad)]) == 2
    for argv in (["run", str(noseed), "--threads", "0"], ["run", str(noseed), "--seed", "x"], []):
        with pytest.raises(SystemExit) as info:
            cli.main(argv)
        assert info.value.code == 2


def test_list_maps(capsys):
    assert cli.main(["list-maps"]) == 0
    out = capsys.readouterr().out
    for name in ("doubling", "lorenz", "quadratic", "gauss"):
        assert name in out


def test_selftest(capsys):
    assert cli.main(["selftest"]) == 0
    out = capsys.readouterr().out
    assert "FAIL" not in out and out.count("PASS") >= 3


def test_kernel_export(tmp_path):
    out = tmp_path / "k"
    assert cli.main(["kernel-export", str(write_reduced(tmp_path, "markov")), "--out", str(out)]) == 0
    names = sorted(p.name for p in out.iterdir())
    assert names == ["density.csv", "kernel.csv", "kernel.json"]
    header = (out / "density.csv").read_text().splitlines()[0].split(",")
    assert header == SCHEMA["density.csv"]["columns"]
    assert (out / "kernel.csv").read_text().splitlines()[0].split(",") == SCHEMA["kernel.csv"]["columns"]


def test_manifest_written_on_failure(tmp_path, capsys):
    out = tmp_path / "decay"
    code = cli.main(["run", str(CONFIGS / "decay_doubling.ini"), "--out", str(out)])
    assert code == 1
    assert "failing criteria: tv_rate_fit" in capsys.readouterr().err
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["pass"] is False and manifest["seed"] == 2024
    assert {c["name"]: c["pass"] for c in manifest["criteria"]}["tv_rate_fit"] is False
    assert set(manifest) >= {"config", "seed", "code_version", "wall_time", "criteria", "pass"}


def test_markov_run_passes(tmp_path):
    out = tmp_path / "markov"
    assert cli.main(["run", str(CONFIGS / "markov_doubling.ini"), "--out", str(out)]) == 0
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["pass"] and manifest["config"]["scenario"] == "markov"
    assert manifest["outputs"] == ["density.csv", "markov.json"]


def test_json_keys_sorted(tmp_path):
    out = tmp_path / "m"
    cli.main(["run", str(write_reduced(tmp_path, "markov")), "--out", str(out)])
    text = (out / "manifest.json").read_text()
    assert text == json.dumps(json.loads(text), sort_keys=True, indent=2) + "\n"


@pytest.mark.parametrize("scenario", sorted(REDUCED))
def test_outputs_match_schema(tmp_path, scenario):
    out = tmp_path / scenario
    cli.main(["run", str(write_reduced(tmp_path, scenario)), "--out", str(out)])
    csvs = sorted(p for p in out.iterdir() if p.suffix == ".csv")
    assert csvs
    for p in csvs:
        assert SCHEMA[p.name]["scenario"] == scenario
        assert p.read_text().splitlines()[0].split(",") == SCHEMA[p.name]["columns"]


@pytest.mark.parametrize("scenario", sorted(REDUCED))
def test_rerun_byte_identical_across_threads(tmp_path, scenario):
    cfg = write_reduced(tmp_path, scenario)
    a, b = tmp_path / "a", tmp_path / "b"
    cli.main(["run", str(cfg), "--out", str(a), "--threads", "1"])
    cli.main(["run", str(cfg), "--out", str(b), "--threads", "4"])
    csvs = sorted(p.name for p in a.iterdir() if p.suffix == ".csv")
    match, mismatch, errors = filecmp.cmpfiles(a, b, csvs, shallow=False)
    assert match == csvs and not mismatch and not errors


def test_reduced_text_parses():
    for scenario in REDUCED:
        assert parse_config(reduced_text(scenario)).scenario == scenario
