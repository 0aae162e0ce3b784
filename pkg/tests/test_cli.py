import json
from pathlib import Path

import pytest

from src.cli import ExperimentPipeline, describe, load_config, main, parse_config
from src.utils.errors import ConfigError, UnknownName

CONFIGS = Path(__file__).parent.parent / "configs"


def _raw(**changes):
    raw = {
        "name": "tiny",
        "seed": 11,
        "model": {"name": "linear_additive", "params": {"b": 0.1}},
        "measure": {"name": "finite_uniform", "params": {"mass": 2.0, "radius": 1.0}},
        "grid": {"x": [0.0], "n_steps": 5, "n_paths": 1000},
        "truncation": {"k": 4},
        "solver": {"method": "lsmc", "basis": {"family": "polynomial", "degree": 2}},
        "oracle": {"enabled": False},
        "abs_tol": 0.05,
        "checks": ["estimator_agreement_check", {"name": "u_class_check", "gated": False}],
    }
    raw.update(changes)
    return raw


def test_config_errors_name_the_key():
    raw = _raw(measure={"name": "tempered_stable", "params": {"alpha_": 0.5}})
    with pytest.raises(ConfigError) as err:
        parse_config(raw)
    assert err.value.key == "measure.params.alpha_"

    with pytest.raises(ConfigError) as err:
        parse_config({**_raw(), "alpha_": 1})
    assert err.value.key == "alpha_"

    with pytest.raises(UnknownName) as err:
        parse_config(_raw(checks=["nosuch_check"]))
    assert err.value.key == "checks.0.name"

    with pytest.raises(ConfigError) as err:
        parse_config(_raw(checks=[{"name": "up_moment_check", "options": {"q": 2}}]))
    assert err.value.key == "checks.0.options.q"


def test_truncation_levels_must_increase():
    with pytest.raises(ConfigError) as err:
        parse_config(_raw(truncation={"k": 4, "ks": [4, 2]}))
    assert err.value.key.startswith("truncation")


def test_flags_override_the_file():
    config = parse_config(_raw(), seed=99, threads=2, out="elsewhere")
    assert (config.seed, config.threads, config.output_dir) == (99, 2, "elsewhere")


def test_shipped_configs_parse():
    for path in sorted(CONFIGS.glob("*.yaml")):
        config = load_config(path)
        assert config.check_entries()


def test_missing_config_file(tmp_path):
    with pytest.raises(ConfigError) as err:
        load_config(tmp_path / "missing.yaml")
    assert err.value.key == "<path>"
    assert main(["run", str(tmp_path / "missing.yaml")]) == 2


def test_describe():
    text = describe("coupled_sine")
    assert "non-monotone" in text
    assert "= 0" in describe("zero")
    assert "infinite" in describe("tempered_stable")
    with pytest.raises(UnknownName):
        describe("nosuch")
    assert main(["describe", "nosuch"]) == 2


def test_small_pipeline_is_reproducible(store, registry):
    config = parse_config(_raw())
    assert ExperimentPipeline(config, store=store, registry=registry).run() == 0

    manifest = json.loads((store.root / "manifest.json").read_text())
    assert manifest["exit_code"] == 0 and manifest["error"] is None
    assert [s["stage"] for s in manifest["stages"]] == ["model", "simulate", "solve", "checks"]
    assert {c["name"] for c in manifest["checks"]} == {"estimator_agreement_check", "u_class_check"}
    assert "solution.csv" in manifest["tables"]
    assert manifest["tables"]["diagnostics.csv"]["residual"].startswith("root-mean-square")
    sizes = {c["name"]: c.get("n_paths", c.get("n_pairs")) for c in manifest["checks"]}
    assert sizes == {"estimator_agreement_check": 1000, "u_class_check": 2000}
    assert "Backward solve" in (store.root / "run.log").read_text(encoding="utf-8")
    first = (store.root / "solution.csv").read_bytes()

    assert ExperimentPipeline(config, store=store, registry=registry).run() == 0
    assert (store.root / "solution.csv").read_bytes() == first
    assert len(registry.find_runs(manifest["config_hash"])) == 2


def test_failed_stage_is_recorded(store, registry):
    # degree 6 in one dimension needs 7 functions; 50 paths allow fewer
    raw = _raw(grid={"x": [0.0], "n_steps": 5, "n_paths": 50},
               solver={"method": "lsmc", "basis": {"family": "polynomial", "degree": 6}})
    code = ExperimentPipeline(parse_config(raw), store=store, registry=registry).run()
    manifest = json.loads((store.root / "manifest.json").read_text())
    assert code == manifest["exit_code"] != 0
    assert manifest["error"]["stage"] == "solve"


@pytest.mark.slow
def test_linear_additive_end_to_end(tmp_path):
    assert main(["run", str(CONFIGS / "linear_additive.yaml"), "--out", str(tmp_path / "run")]) == 0
    assert (tmp_path / "run" / "manifest.json").exists()
