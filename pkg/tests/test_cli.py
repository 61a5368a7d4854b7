import inspect
import json
import os

import numpy as np
import pytest

from wdmd_sysid import run_experiments
from wdmd_sysid.application import experiment_service, identification
from wdmd_sysid.application.experiment_service import ExperimentService, worker_count
from wdmd_sysid.domain.errors import InvalidSpec
from wdmd_sysid.domain.metrics import eps_td
from wdmd_sysid.infrastructure.beam_fem import BeamFemSource
from wdmd_sysid.infrastructure.csv_adapter import CsvTrajectoryAdapter, read_table
from wdmd_sysid.infrastructure.json_adapter import JsonModelAdapter, read_json
from wdmd_sysid.infrastructure.report_store import FileReportStore
from wdmd_sysid.infrastructure.yaml_config import load_config

SMALL_BEAM_YAML = """
seed: 3
dt: 0.0002
beam:
  n_nodes: 8
  force_nodes: [8]
  output_nodes: [2, 5, 8]
train:
  - duration: 0.3
    signals:
      - {kind: chirp, f0: 10, f1: 800}
test:
  - duration: 0.1
    signals:
      - {kind: sine_burst, f: 165.1, cycles: 10}
  - duration: 0.05
    signals:
      - {kind: silence}
fit:
  method: wdmd
  level: 4
  beta: 1e-10
metrics:
  f_min: 10
  f_max: 800
  count: 50
sweep:
  outputs: [2, 3]
  betas: [1e-10, 1e-4]
  methods: [wdmd, delay_dmd]
"""


@pytest.fixture
def config_path(tmp_path):
    path = tmp_path / "experiment.yaml"
    path.write_text(SMALL_BEAM_YAML)
    return str(path)


@pytest.fixture(autouse=True)
def single_worker(monkeypatch):
    monkeypatch.setenv("WDMD_WORKERS", "1")


def wdmd(*argv):
    return run_experiments.main(list(argv))


def run_pipeline(config_path, out):
    assert wdmd("generate", "--config", config_path, "--output-dir", out, "-q") == 0
    assert wdmd("fit", "--config", config_path, "--output-dir", out, "-q") == 0
    assert wdmd("eval", "--config", config_path, "--output-dir", out, "-q") == 0


def last_error(capsys):
    lines = [line for line in capsys.readouterr().err.splitlines() if line.strip()]
    return json.loads(lines[-1])


def test_generate_writes_records_and_manifest(config_path, tmp_path):
    out = str(tmp_path / "out")
    assert wdmd("generate", "--config", config_path, "--output-dir", out, "-q") == 0
    header, rows = read_table(os.path.join(out, "train.csv"))
    assert header == ["t", "u1", "y1", "y2", "y3"]
    assert len(rows) == 1501
    state_header, _ = read_table(os.path.join(out, "train_states.csv"))
    assert len(state_header) == 32
    manifest = read_json(os.path.join(out, "manifest.json"))
    assert manifest["dims"] == {
        "m": 1,
        "d": 3,
        "n": 32,
        "train_samples": 1501,
        "test_samples": 751,
    }
    assert manifest["files"]["test"] == "test.csv"
    assert len(manifest["provenance"]["config_sha256"]) == 64


def test_fit_writes_a_model_and_reports_the_training_error(
    config_path, tmp_path, capsys
):
    out = str(tmp_path / "out")
    wdmd("generate", "--config", config_path, "--output-dir", out, "-q")
    capsys.readouterr()
    assert wdmd("fit", "--config", config_path, "--output-dir", out, "-q") == 0
    printed = dict(
        line.split(": ", 1) for line in capsys.readouterr().out.strip().splitlines()
    )
    assert printed["method"] == "wdmd"
    assert printed["states"] == "15"
    float(printed["eps_td_train"])
    model = read_json(os.path.join(out, "model.json"))
    assert model["dims"] == {"n": 15, "m": 1, "d": 3}
    assert model["lifting"]["level"] == 4
    assert model["lifting"]["observables"] == "mra"
    float(printed["spectral_radius"])


def test_causal_observables_flow_into_the_model_file(config_path, tmp_path):
    out = str(tmp_path / "out")
    wdmd("generate", "--config", config_path, "--output-dir", out, "-q")
    flags = ("--config", config_path, "--output-dir", out, "-q")
    assert wdmd("fit", *flags, "--observables", "causal") == 0
    model = read_json(os.path.join(out, "model.json"))
    assert model["lifting"]["observables"] == "causal"
    assert model["dims"]["n"] == 15
    assert wdmd("eval", *flags) == 0


def test_pipeline_is_deterministic(config_path, tmp_path, monkeypatch):
    runs = []
    for name in ("first", "second"):
        workdir = tmp_path / name
        workdir.mkdir()
        monkeypatch.chdir(workdir)
        run_pipeline(config_path, "out")
        runs.append(workdir / "out")
    for filename in ("train.csv", "test.csv", "model.json", "report.json", "mac.csv"):
        assert (runs[0] / filename).read_bytes() == (runs[1] / filename).read_bytes()


def test_eval_report(config_path, tmp_path):
    out = str(tmp_path / "out")
    run_pipeline(config_path, out)
    report = read_json(os.path.join(out, "report.json"))
    assert report["K"] == 1501
    assert report["L_omega"] == 50
    assert len(report["per_channel"]) == 3
    assert isinstance(report["eps_td"], float)
    assert isinstance(report["eps_fd"], float)
    assert all(0.0 <= v <= 1.0 for v in report["mac_diagonal"])


def test_eval_on_the_test_record_from_rest(config_path, tmp_path):
    out = str(tmp_path / "out")
    run_pipeline(config_path, out)
    code = wdmd(
        "eval",
        "--config",
        config_path,
        "--output-dir",
        out,
        "--data",
        os.path.join(out, "test.csv"),
        "--from-rest",
        "-q",
    )
    assert code == 0
    assert read_json(os.path.join(out, "report.json"))["K"] == 751


def test_simulate_from_rest_and_chained(config_path, tmp_path):
    out = str(tmp_path / "out")
    run_pipeline(config_path, out)
    args = ("--config", config_path, "--output-dir", out, "-q")
    assert wdmd("simulate", *args) == 0
    header, rows = read_table(os.path.join(out, "prediction.csv"))
    assert header == ["t", "u1", "y1", "y2", "y3"]
    assert len(rows) == 751
    terminal = os.path.join(out, "terminal_state.csv")
    assert len(read_table(terminal)[0]) == 15

    chained = str(tmp_path / "chained")
    os.makedirs(chained)
    code = wdmd(
        "simulate",
        "--config",
        config_path,
        "--output-dir",
        chained,
        "--model",
        os.path.join(out, "model.json"),
        "--input",
        os.path.join(out, "test.csv"),
        "--z0",
        terminal,
        "-q",
    )
    assert code == 0


def test_frf_and_modes_tables(config_path, tmp_path, capsys):
    out = str(tmp_path / "out")
    run_pipeline(config_path, out)
    args = ("--config", config_path, "--output-dir", out, "-q")
    assert wdmd("frf", *args, "--truth") == 0
    header, rows = read_table(os.path.join(out, "frf.csv"))
    assert header == ["source", "f_hz", "output", "input", "re", "im", "abs"]
    assert len(rows) == 2 * 50 * 3
    assert {row[0] for row in rows} == {"model", "truth"}

    assert wdmd("modes", *args) == 0
    assert "mode 1:" in capsys.readouterr().out
    header, _ = read_table(os.path.join(out, "modes.csv"))
    assert header[:2] == ["mode", "frequency_hz"]


def test_mimo_generate_has_two_input_columns(tmp_path):
    path = tmp_path / "mimo.yaml"
    path.write_text(
        "beam:\n  n_nodes: 8\n  force_nodes: [3, 8]\n  output_nodes: [4, 8]\n"
    )
    out = str(tmp_path / "out")
    assert wdmd("generate", "--config", str(path), "--output-dir", out, "-q") == 0
    header, _ = read_table(os.path.join(out, "train.csv"))
    assert header == ["t", "u1", "u2", "y1", "y2"]
    header, _ = read_table(os.path.join(out, "test.csv"))
    assert header[:3] == ["t", "u1", "u2"]


def test_outputs_flag_picks_equispaced_nodes(config_path, tmp_path):
    out = str(tmp_path / "out")
    code = wdmd(
        "generate", "--config", config_path, "--output-dir", out, "--outputs", "2", "-q"
    )
    assert code == 0
    header, _ = read_table(os.path.join(out, "train.csv"))
    assert header == ["t", "u1", "y1", "y2"]


def test_domain_error_is_reported_as_json(config_path, tmp_path, capsys):
    out = str(tmp_path / "out")
    code = wdmd(
        "generate", "--config", config_path, "--output-dir", out, "--beta", "-1", "-q"
    )
    assert code == 2
    error = last_error(capsys)
    assert error["error"] == "InvalidSpec"
    assert error["command"] == "generate"
    assert "beta" in error["message"]


def test_missing_data_is_an_io_error(config_path, tmp_path, capsys):
    code = wdmd(
        "fit", "--config", config_path, "--output-dir", str(tmp_path / "empty"), "-q"
    )
    assert code == 3
    assert last_error(capsys)["error"] == "FileNotFoundError"


def test_iodmd_without_states_is_a_domain_error(config_path, tmp_path, capsys):
    out = str(tmp_path / "out")
    wdmd("generate", "--config", config_path, "--output-dir", out, "-q")
    os.remove(os.path.join(out, "train_states.csv"))
    code = wdmd(
        "fit", "--config", config_path, "--output-dir", out, "--method", "iodmd", "-q"
    )
    assert code == 2
    assert last_error(capsys)["error"] == "MissingStates"


def test_modwt_dump_columns(config_path, tmp_path):
    out = str(tmp_path / "out")
    wdmd("generate", "--config", config_path, "--output-dir", out, "-q")
    assert wdmd("modwt-dump", "--config", config_path, "--output-dir", out, "-q") == 0
    header, rows = read_table(os.path.join(out, "modwt.csv"))
    assert header[:6] == ["t", "y1_D1", "y1_D2", "y1_D3", "y1_D4", "y1_S4"]
    assert len(header) == 1 + 3 * 5
    data = np.array(rows, dtype=float)
    record = CsvTrajectoryAdapter().load(os.path.join(out, "train.csv"))
    np.testing.assert_allclose(data[:, 1:6].sum(axis=1), record.Y[0], atol=1e-12)


def test_sweep_table(config_path, tmp_path):
    out = str(tmp_path / "out")
    assert wdmd("sweep", "--config", config_path, "--output-dir", out, "-q") == 0
    header, rows = read_table(os.path.join(out, "sweep.csv"))
    assert header[:3] == ["method", "d", "beta"]
    assert len(rows) == 2 * 2 * 2
    assert [(r[0], r[1]) for r in rows[:4]] == [
        ("wdmd", "2"),
        ("wdmd", "2"),
        ("wdmd", "3"),
        ("wdmd", "3"),
    ]
    assert all(len(row) == 9 for row in rows)


def test_sweep_cell_matches_a_direct_fit(config_path, tmp_path):
    experiment = load_config(config_path)
    service = ExperimentService(
        experiment,
        BeamFemSource,
        CsvTrajectoryAdapter(),
        JsonModelAdapter(),
        FileReportStore(),
    )
    full = service.full_source()
    records = (
        full.generate(service.train_phases(), experiment.dt, 0.0, experiment.seed),
        full.generate(service.test_phases(), experiment.dt, 0.0, experiment.seed + 1),
    )
    rows = service.sweep(str(tmp_path / "sweep.csv"), records=records)
    row = next(r for r in rows if r[0] == "wdmd" and r[1] == 3 and r[2] == 1e-10)

    # d = 3 on an 8-node beam observes nodes 1, 4 (rounded from 4.5) and 8
    train = records[0].select_outputs([0, 3, 7])
    result = identification.identify(train, experiment.fit)
    Yhat, Y = identification.predict(result, train)
    assert row[3] == result.rank_used
    assert row[5] == pytest.approx(eps_td(Y, Yhat), rel=1e-6)


class RecordingReportStore:
    def __init__(self):
        self.tables = {}
        self.vectors = {}
        self.documents = {}

    def write_table(self, output_path, header, rows):
        self.tables[os.path.basename(output_path)] = (list(header), list(rows))

    def write_vector(self, output_path, values):
        self.vectors[os.path.basename(output_path)] = np.asarray(values).copy()

    def write_document(self, data, output_path):
        self.documents[os.path.basename(output_path)] = data

    def describe(self, experiment):
        return {"seed": experiment.seed}

    def provenance(self, experiment):
        return {"config_sha256": "fixed", "version": "test"}


def test_service_writes_reports_through_the_store(config_path, tmp_path):
    experiment = load_config(config_path)
    store = RecordingReportStore()
    service = ExperimentService(
        experiment, BeamFemSource, CsvTrajectoryAdapter(), JsonModelAdapter(), store
    )
    out = str(tmp_path / "out")
    train, _ = service.generate(out)
    assert store.documents["manifest.json"]["config"] == {"seed": 3}
    assert store.documents["manifest.json"]["provenance"]["version"] == "test"

    result, _ = service.fit(train)
    service.simulate(result, train.grid, train.U, out)
    header, rows = store.tables["prediction.csv"]
    assert header[:2] == ["t", "u1"]
    assert len(rows) == train.grid.count
    assert store.vectors["terminal_state.csv"].shape == (result.model.n_states,)
    assert not os.path.exists(os.path.join(out, "prediction.csv"))


def test_application_layer_imports_no_adapters():
    source = inspect.getsource(experiment_service)
    assert "wdmd_sysid.infrastructure" not in source


def test_worker_count(monkeypatch):
    monkeypatch.setenv("WDMD_WORKERS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("WDMD_WORKERS", "zero")
    with pytest.raises(InvalidSpec):
        worker_count()
    monkeypatch.setenv("WDMD_WORKERS", "0")
    with pytest.raises(InvalidSpec):
        worker_count()
