import numpy as np
import pytest

from wdmd_sysid.application import identification
from wdmd_sysid.domain.errors import FormatError, InvalidSpec
from wdmd_sysid.domain.models import FitConfig, TimeGrid, TrajectorySet
from wdmd_sysid.infrastructure.csv_adapter import (
    CsvTrajectoryAdapter,
    load_input_record,
    load_vector,
    save_vector,
)
from wdmd_sysid.infrastructure.json_adapter import (
    JsonModelAdapter,
    build_provenance,
    config_digest,
    read_json,
    write_json,
)
from wdmd_sysid.infrastructure.report_store import FileReportStore
from wdmd_sysid.infrastructure.yaml_config import (
    TOP_LEVEL_KEYS,
    apply_overrides,
    config_from_dict,
    config_to_dict,
    load_config,
)

EXPERIMENT_YAML = """
seed: 4
dt: 0.0002
noise_level: 0.01
beam:
  n_nodes: 8
  force_nodes: [8]
  output_nodes: [2, 5, 8]
  rayleigh_beta: 1e-6
train:
  - duration: 0.2
    signals:
      - {kind: chirp, f0: 10, f1: 400}
fit:
  method: wdmd
  level: 4
  beta: 1e-10
paths:
  output_dir: results
"""


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "experiment.yaml"
    path.write_text(EXPERIMENT_YAML)
    return str(path)


def test_trajectory_csv_round_trip(tmp_path, white_noise_record):
    store = CsvTrajectoryAdapter()
    data, states = str(tmp_path / "train.csv"), str(tmp_path / "states.csv")
    store.save(white_noise_record, data, states)
    loaded = store.load(data, states)
    np.testing.assert_array_equal(loaded.U, white_noise_record.U)
    np.testing.assert_array_equal(loaded.Y, white_noise_record.Y)
    np.testing.assert_array_equal(loaded.X, white_noise_record.X)
    assert loaded.grid.count == 400
    assert loaded.grid.dt == pytest.approx(1e-3)


def test_trajectory_csv_layout(tmp_path, white_noise_record):
    path = tmp_path / "train.csv"
    CsvTrajectoryAdapter().save(white_noise_record, str(path))
    lines = path.read_text().split("\n")
    assert lines[0] == "t,u1,y1,y2"
    assert lines[-1] == ""
    assert "\r" not in path.read_text()


def test_ragged_csv_is_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,u1,y1\n0,1,2\n0.1,1\n")
    with pytest.raises(FormatError):
        CsvTrajectoryAdapter().load(str(path))


def test_misnamed_columns_are_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,u1,y2\n0,1,2\n0.1,1,2\n")
    with pytest.raises(FormatError):
        CsvTrajectoryAdapter().load(str(path))


def test_non_uniform_time_is_rejected(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,u1,y1\n0,1,2\n0.1,1,2\n0.3,1,2\n")
    with pytest.raises(FormatError):
        CsvTrajectoryAdapter().load(str(path))


def test_empty_csv_is_rejected(tmp_path):
    path = tmp_path / "empty.csv"
    path.write_text("")
    with pytest.raises(FormatError):
        CsvTrajectoryAdapter().load(str(path))


def test_input_record_and_state_vector(tmp_path):
    path = tmp_path / "input.csv"
    path.write_text("t,u1,u2\n0,1,2\n0.5,3,4\n1.0,5,6\n")
    grid, U = load_input_record(str(path))
    assert (grid.count, grid.dt) == (3, 0.5)
    np.testing.assert_array_equal(U, [[1, 3, 5], [2, 4, 6]])

    z_path = str(tmp_path / "z.csv")
    z = np.array([0.1, -2.5e-17, 3.0])
    save_vector(z_path, z)
    np.testing.assert_array_equal(load_vector(z_path), z)


@pytest.mark.parametrize("method", ["dmd", "iodmd", "wdmd", "delay_dmd"])
def test_model_json_round_trip_is_bit_exact(tmp_path, white_noise_record, method):
    config = FitConfig(method=method, level=3, tau=4)
    result = identification.identify(white_noise_record, config)
    path = str(tmp_path / "model.json")
    store = JsonModelAdapter()
    store.save(result, path, {"version": "test"})
    loaded = store.load(path)
    for name in "ABCD":
        np.testing.assert_array_equal(
            getattr(loaded.model, name), getattr(result.model, name)
        )
    np.testing.assert_array_equal(loaded.initial_state, result.initial_state)
    assert loaded.model.dt == result.model.dt
    assert (loaded.method, loaded.rank_used) == (method, result.rank_used)
    assert (loaded.level, loaded.tau) == (result.level, result.tau)
    assert loaded.state_source == result.state_source


def test_model_json_keeps_the_observables(tmp_path, white_noise_record):
    config = FitConfig(method="wdmd", level=2, observables="causal")
    result = identification.identify(white_noise_record, config)
    path = str(tmp_path / "model.json")
    store = JsonModelAdapter()
    store.save(result, path, {"version": "test"})
    loaded = store.load(path)
    assert loaded.observables == "causal"
    z0, _ = identification.observed_initial_state(loaded, white_noise_record)
    np.testing.assert_array_equal(z0, result.initial_state)


def test_report_store_writes_csv_and_json(tmp_path, config_path):
    store = FileReportStore()
    store.write_table(str(tmp_path / "t.csv"), ["a", "b"], [[1, 0.5]])
    store.write_vector(str(tmp_path / "z.csv"), np.array([1.0, 2.0]))
    store.write_document({"k": np.float64(1.5)}, str(tmp_path / "doc.json"))
    assert (tmp_path / "t.csv").read_text() == "a,b\n1,0.5\n"
    np.testing.assert_array_equal(load_vector(str(tmp_path / "z.csv")), [1.0, 2.0])
    assert read_json(str(tmp_path / "doc.json")) == {"k": 1.5}
    experiment = load_config(config_path)
    assert store.describe(experiment) == config_to_dict(experiment)
    assert store.provenance(experiment) == build_provenance(config_to_dict(experiment))


def test_model_json_with_wrong_dims(tmp_path, white_noise_record):
    result = identification.identify(white_noise_record, FitConfig(method="iodmd"))
    store = JsonModelAdapter()
    doc = store.to_dict(result, {})
    doc["dims"]["n"] = 3
    path = tmp_path / "model.json"
    write_json(doc, str(path))
    with pytest.raises(FormatError):
        store.load(str(path))


def test_model_json_must_be_json(tmp_path):
    path = tmp_path / "model.json"
    path.write_text("{not json")
    with pytest.raises(FormatError):
        JsonModelAdapter().load(str(path))


def test_provenance_digest_is_stable():
    doc = {"b": [1.0, 2.0], "a": {"x": 1}}
    assert config_digest(doc) == config_digest({"a": {"x": 1}, "b": [1.0, 2.0]})
    assert build_provenance(doc)["config_sha256"] == config_digest(doc)


def test_yaml_config(config_path):
    experiment = load_config(config_path)
    assert experiment.seed == 4
    assert experiment.dt == pytest.approx(2e-4)
    assert experiment.beam.output_nodes == (2, 5, 8)
    assert experiment.beam.rayleigh_beta == pytest.approx(1e-6)
    assert experiment.fit.beta == pytest.approx(1e-10)
    assert experiment.fit.level == 4
    assert experiment.train[0].signals[0].f1 == 400.0
    assert experiment.test == ()
    assert experiment.output_dir == "results"


def test_missing_config_uses_defaults():
    experiment = load_config(None)
    assert experiment.beam.n_nodes == 30
    assert experiment.fit.method == "wdmd"


def test_missing_config_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_config(str(tmp_path / "nope.yaml"))


@pytest.mark.parametrize(
    "doc",
    [
        {"seeds": 1},
        {"beam": {"nodes": 8}},
        {"fit": {"methd": "wdmd"}},
        {"train": [{"duration": 1.0, "signals": [{"kind": "chirp", "f": 1}]}]},
        {"fit": {"beta": "small"}},
    ],
)
def test_config_rejects_unknown_or_malformed_keys(doc):
    with pytest.raises(InvalidSpec):
        config_from_dict(doc)


def test_config_dict_mirrors_the_file_layout(config_path):
    doc = config_to_dict(load_config(config_path))
    assert set(doc) <= set(TOP_LEVEL_KEYS)
    assert doc["paths"] == {"output_dir": "results"}
    assert doc["fit"]["level"] == 4


def test_overrides_win_over_the_file(config_path):
    experiment = apply_overrides(
        load_config(config_path),
        beta=1e-3,
        method="delay_dmd",
        seed=9,
        noise=0.0,
        output_nodes=[8],
        output_dir="elsewhere",
        level=None,
        observables="causal",
    )
    assert experiment.fit.beta == 1e-3
    assert experiment.fit.observables == "causal"
    assert experiment.fit.method == "delay_dmd"
    assert experiment.fit.level == 4
    assert experiment.seed == 9
    assert experiment.noise_level == 0.0
    assert experiment.beam.output_nodes == (8,)
    assert experiment.output_dir == "elsewhere"


def test_invalid_override_is_a_domain_error(config_path):
    with pytest.raises(InvalidSpec):
        apply_overrides(load_config(config_path), beta=-1.0)
    with pytest.raises(InvalidSpec):
        apply_overrides(load_config(config_path), observables="acausal")


def test_trajectory_set_checks_lengths():
    grid = TimeGrid(dt=0.1, count=5)
    with pytest.raises(ValueError):
        TrajectorySet(grid=grid, U=np.zeros((1, 5)), Y=np.zeros((1, 4)))
