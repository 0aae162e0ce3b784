import struct

import numpy as np
import pandas as pd
import pytest

from src.levy import truncate
from src.operators import ValueField
from src.sde_sim import TimeGrid, simulate
from src.storage import content_key, load_bundle, load_field, read_container, save_bundle, write_container
from src.utils.errors import ArtifactFormatError
from src.verify import CheckReport


def test_container_keeps_dtype_shape_and_order(tmp_path):
    arrays = {"a": np.arange(12.0).reshape(3, 4), "b": np.array([[1, 2], [3, 4]], dtype=np.int64)}
    path = write_container(tmp_path / "demo.jbsd", "demo", {"note": "x"}, arrays)
    kind, meta, back = read_container(path)
    assert kind == "demo" and meta == {"note": "x"}
    np.testing.assert_array_equal(back["a"], arrays["a"])
    assert back["b"].dtype == np.int64


def test_container_rejects_foreign_files(tmp_path):
    bad_magic = tmp_path / "bad.jbsd"
    bad_magic.write_bytes(b"NOPE" + b"\x00" * 16)
    with pytest.raises(ArtifactFormatError):
        read_container(bad_magic)
    path = write_container(tmp_path / "v.jbsd", "demo", {}, {})
    raw = bytearray(path.read_bytes())
    raw[4:6] = struct.pack("<H", 99)
    path.write_bytes(bytes(raw))
    with pytest.raises(ArtifactFormatError) as err:
        read_container(path)
    assert err.value.context["version"] == 99
    (tmp_path / "short.jbsd").write_bytes(b"JB")
    with pytest.raises(ArtifactFormatError):
        read_container(tmp_path / "short.jbsd")


def test_bundle_survives_a_round_trip(tmp_path, linear_uniform):
    bundle = simulate(linear_uniform, truncate(linear_uniform.measure, 4), 0.0, [0.0], TimeGrid(0.0, 1.0, 5),
                      50, seed=1)
    back = load_bundle(save_bundle(tmp_path / "bundle.jbsd", bundle))
    np.testing.assert_array_equal(back.states, bundle.states)
    np.testing.assert_array_equal(back.jump_mark, bundle.jump_mark)
    assert back.grid.n_steps == 5 and back.seed == 1
    with pytest.raises(ArtifactFormatError):
        load_field(tmp_path / "bundle.jbsd")


def test_tables_are_byte_stable(store):
    frame = pd.DataFrame({"k": [1, 2], "e_X": [1.0 / 3.0, 2.0e-7]})
    first = store.save_table(frame, "t.csv").read_bytes()
    second = store.save_table(frame.copy(), "t.csv").read_bytes()
    assert first == second
    assert b"\r\n" not in first


def test_cache_miss_then_hit(store):
    section = {"grid": {"n_paths": 10}}
    assert store.cached_field(section, 1) is None
    field = ValueField.from_function(lambda t, x: x, [0.0, 1.0], [np.linspace(-1, 1, 5)])
    store.store_field(section, 1, field)
    hit = store.cached_field(section, 1)
    np.testing.assert_array_equal(hit.values, field.values)
    assert store.cached_field(section, 2) is None
    assert content_key(section, 1) == content_key({"grid": {"n_paths": 10}}, 1)


def test_registry_records_runs_and_checks(registry):
    run_id = registry.start_run("abc123", seed=5)
    report = CheckReport(name="demo", inputs={"seed": 5}, statistic={"gap": 0.1}, threshold={"gap": 1.0},
                         passed=True, gated=False)
    registry.record_check(run_id, report)
    registry.finish_run(run_id, 0, "out/manifest.json")

    run = registry.get_run(run_id)
    assert run["exit_code"] == 0 and run["seed"] == 5
    assert [r["id"] for r in registry.find_runs("abc123")] == [run_id]
    checks = registry.checks_of(run_id)
    assert checks == [{"name": "demo", "passed": True, "gated": False, "digest": report.digest,
                       "statistic": {"gap": 0.1}}]
    assert registry.get_run("missing") is None
