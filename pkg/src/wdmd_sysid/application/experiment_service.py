import dataclasses
import logging
import os
from multiprocessing import Pool
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from wdmd_sysid import config
from wdmd_sysid.application import identification
from wdmd_sysid.domain import lifting, lti, metrics, modwt
from wdmd_sysid.domain.errors import InvalidSpec, WdmdError
from wdmd_sysid.domain.models import (
    BeamSpec,
    ErrorReport,
    ExperimentConfig,
    FitConfig,
    FitResult,
    MacMatrix,
    ModeSet,
    Phase,
    Simulation,
    TimeGrid,
    TrajectorySet,
    equispaced_nodes,
)
from wdmd_sysid.domain.ports import (
    ModelStore,
    ReportStore,
    TrajectorySource,
    TrajectoryStore,
)
from wdmd_sysid.domain.signals import default_test_phases, default_train_phases

logger = logging.getLogger(__name__)

SWEEP_HEADER = [
    "method",
    "d",
    "beta",
    "rank_used",
    "n_states",
    "eps_td_train",
    "eps_td_test",
    "eps_fd",
    "error",
]


def worker_count() -> int:
    raw = os.environ.get(config.WORKERS_ENV)
    if raw is None or raw == "":
        return os.cpu_count() or 1
    try:
        workers = int(raw)
    except ValueError as exc:
        raise InvalidSpec(
            f"{config.WORKERS_ENV} must be an integer, got {raw!r}"
        ) from exc
    if workers < 1:
        raise InvalidSpec(f"{config.WORKERS_ENV} must be >= 1, got {workers}")
    return workers


def _quiet_eps_td(Y: np.ndarray, Yhat: np.ndarray) -> float:
    # diverging models overflow; the error is then reported as inf/nan
    with np.errstate(over="ignore", invalid="ignore"):
        return metrics.eps_td(Y, Yhat)


def _output_path(output_dir: str, key: str) -> str:
    return os.path.join(output_dir, config.OUTPUT_FILES[key])


def reference_frf(
    source: TrajectorySource, dt: float, omegas: np.ndarray, reference: str
) -> np.ndarray:
    """Truth FRF, either of the ZOH-sampled truth or of the continuous one."""
    if reference == "continuous":
        return lti.frf_continuous(source.truth, omegas)
    discrete = getattr(source, "discrete", None)
    sampled = discrete(dt) if discrete else lti.discretize_zoh(source.truth, dt)
    return lti.frf_discrete(sampled, omegas)


class ExperimentService:
    def __init__(
        self,
        experiment: ExperimentConfig,
        source_factory: Callable[[BeamSpec], TrajectorySource],
        trajectory_store: TrajectoryStore,
        model_store: ModelStore,
        report_store: ReportStore,
    ) -> None:
        self.experiment = experiment
        self.source_factory = source_factory
        self.source = source_factory(experiment.beam)
        self.trajectory_store = trajectory_store
        self.model_store = model_store
        self.report_store = report_store

    @property
    def n_inputs(self) -> int:
        return len(self.experiment.beam.force_nodes)

    def train_phases(self) -> List[Phase]:
        return list(self.experiment.train) or default_train_phases(
            self.n_inputs, self.experiment.seed
        )

    def test_phases(self) -> List[Phase]:
        return list(self.experiment.test) or default_test_phases(self.n_inputs)

    def provenance(self) -> Dict[str, str]:
        return self.report_store.provenance(self.experiment)

    # generate

    def generate_records(self) -> Tuple[TrajectorySet, TrajectorySet]:
        """Training and testing records, both simulated from rest."""
        exp = self.experiment
        train = self.source.generate(
            self.train_phases(), exp.dt, exp.noise_level, exp.seed
        )
        test = self.source.generate(
            self.test_phases(), exp.dt, exp.noise_level, exp.seed + 1
        )
        return train, test

    def generate(self, output_dir: str) -> Tuple[TrajectorySet, TrajectorySet]:
        train, test = self.generate_records()
        files = {}
        for name, record in (("train", train), ("test", test)):
            data_path = _output_path(output_dir, name)
            state_path = _output_path(output_dir, f"{name}_states")
            self.trajectory_store.save(record, data_path, state_path)
            files[name] = os.path.basename(data_path)
            files[f"{name}_states"] = os.path.basename(state_path)

        manifest = {
            "config": self.report_store.describe(self.experiment),
            "provenance": self.provenance(),
            "files": files,
            "dims": {
                "m": train.n_inputs,
                "d": train.n_outputs,
                "n": int(self.source.truth.n_states),
                "train_samples": train.grid.count,
                "test_samples": test.grid.count,
            },
        }
        manifest_path = _output_path(output_dir, "manifest")
        self.report_store.write_document(manifest, manifest_path)
        return train, test

    # fit

    def fit(
        self, train: TrajectorySet, fit_config: Optional[FitConfig] = None
    ) -> Tuple[FitResult, float]:
        fit_config = fit_config or self.experiment.fit
        result = identification.identify(train, fit_config)
        Yhat, Y = identification.predict(result, train)
        return result, _quiet_eps_td(Y, Yhat)

    def save_model(self, result: FitResult, output_path: str) -> None:
        self.model_store.save(result, output_path, self.provenance())

    # simulate

    def simulate(
        self,
        result: FitResult,
        grid: TimeGrid,
        U: np.ndarray,
        output_dir: str,
        z0: Optional[np.ndarray] = None,
    ) -> Simulation:
        run = lti.simulate(result.model, U, z0)
        header = ["t"] + [f"u{i + 1}" for i in range(U.shape[0])]
        header += [f"y{i + 1}" for i in range(run.outputs.shape[0])]
        self.report_store.write_table(
            _output_path(output_dir, "prediction"),
            header,
            np.vstack([grid.times, U, run.outputs]).T,
        )
        self.report_store.write_vector(
            _output_path(output_dir, "terminal_state"), run.terminal_state
        )
        return run

    # frf / modes

    def truth_frf(self, dt: float, omegas: np.ndarray) -> np.ndarray:
        return reference_frf(
            self.source, dt, omegas, self.experiment.metrics.reference
        )

    def frf(
        self, result: FitResult, output_path: str, with_truth: bool = False
    ) -> np.ndarray:
        omegas = self.experiment.metrics.omegas
        H = lti.frf_discrete(result.model, omegas)
        blocks = [("model", H)]
        if with_truth:
            blocks.append(("truth", self.truth_frf(result.model.dt, omegas)))
        rows = []
        for label, response in blocks:
            for j, omega in enumerate(omegas):
                for (i, a), h in np.ndenumerate(response[j]):
                    f_hz = omega / (2 * np.pi)
                    rows.append([label, f_hz, i + 1, a + 1, h.real, h.imag, abs(h)])
        self.report_store.write_table(
            output_path,
            ["source", "f_hz", "output", "input", "re", "im", "abs"],
            rows,
        )
        return H

    def modes(self, result: FitResult, output_dir: str) -> ModeSet:
        modes = lti.extract_modes(result.model)
        self.report_store.write_table(
            _output_path(output_dir, "modes"),
            [
                "mode",
                "frequency_hz",
                "damped_frequency_hz",
                "damping_ratio",
                "eig_re",
                "eig_im",
            ],
            [
                [k + 1, f, fd, zeta, lam.real, lam.imag]
                for k, (f, fd, zeta, lam) in enumerate(
                    zip(
                        modes.frequencies,
                        modes.damped_frequencies,
                        modes.damping,
                        modes.eigenvalues,
                    )
                )
            ],
        )
        self.report_store.write_table(
            _output_path(output_dir, "mode_shapes"),
            ["mode", "output", "re", "im"],
            [
                [k + 1, i + 1, modes.shapes[i, k].real, modes.shapes[i, k].imag]
                for k in range(len(modes))
                for i in range(modes.shapes.shape[0])
            ],
        )
        return modes

    # eval

    def mac_against_truth(self, result: FitResult) -> MacMatrix:
        """MAC of the learned shapes, paired by frequency, against the FEM modes."""
        learned = lti.extract_modes(result.model)
        ref_hz, ref_shapes = self.source.reference_shapes(
            min(config.MAC_MODES, len(learned))
        )
        chosen = metrics.pair_modes(ref_hz, learned.frequencies)
        return metrics.mac(
            learned.shapes[:, chosen],
            ref_shapes,
            row_labels=[f"{learned.frequencies[k]:.2f}Hz" for k in chosen],
            col_labels=[f"{f:.2f}Hz" for f in ref_hz],
        )

    def evaluate(
        self,
        result: FitResult,
        data: TrajectorySet,
        with_truth: bool = True,
        from_rest: bool = False,
    ) -> Tuple[ErrorReport, Optional[MacMatrix]]:
        Yhat, Y = identification.predict(result, data, from_rest=from_rest)
        with np.errstate(over="ignore", invalid="ignore"):
            per_channel = metrics.eps_td_per_channel(Y, Yhat)
        omegas = self.experiment.metrics.omegas
        Hhat = lti.frf_discrete(result.model, omegas)
        if with_truth:
            H = self.truth_frf(data.grid.dt, omegas)
        else:
            H = metrics.empirical_frf(data.U, data.Y, data.grid, omegas)
        report = ErrorReport(
            eps_td=_quiet_eps_td(Y, Yhat),
            eps_fd=metrics.eps_fd(H, Hhat),
            per_channel=per_channel,
            samples=Y.shape[1],
            frequencies=len(omegas),
        )
        mac = self.mac_against_truth(result) if with_truth else None
        return report, mac

    def save_evaluation(
        self, report: ErrorReport, mac: Optional[MacMatrix], output_dir: str
    ) -> None:
        doc = report.to_dict()
        if mac is not None:
            doc["mac_diagonal"] = mac.diagonal()
            self.report_store.write_table(
                _output_path(output_dir, "mac"),
                ["learned"] + mac.col_labels,
                [[label, *row] for label, row in zip(mac.row_labels, mac.values)],
            )
        self.report_store.write_document(doc, _output_path(output_dir, "report"))

    # sweep

    def full_source(self) -> TrajectorySource:
        """Same beam observed at every node, so any output subset can be cut out."""
        beam = self.experiment.beam
        all_nodes = tuple(range(1, beam.n_nodes + 1))
        return self.source_factory(dataclasses.replace(beam, output_nodes=all_nodes))

    def sweep(
        self,
        output_path: str,
        records: Optional[Tuple[TrajectorySet, TrajectorySet]] = None,
    ) -> List[List]:
        exp = self.experiment
        grid = exp.sweep
        if grid is None:
            raise InvalidSpec("config has no 'sweep' section")
        full = self.full_source()
        if records is None:
            records = (
                full.generate(self.train_phases(), exp.dt, exp.noise_level, exp.seed),
                full.generate(
                    self.test_phases(), exp.dt, exp.noise_level, exp.seed + 1
                ),
            )
        train, test = records
        omegas = exp.metrics.omegas
        payload = _SweepPayload(
            train=train,
            test=test,
            omegas=omegas,
            H_full=reference_frf(full, exp.dt, omegas, exp.metrics.reference),
            n_nodes=exp.beam.n_nodes,
            fit=exp.fit,
            betas=tuple(grid.betas),
        )
        tasks = [(method, d) for method in grid.methods for d in grid.outputs]
        workers = min(worker_count(), len(tasks))
        logger.info(
            "Sweeping %d (method, d) groups x %d betas on %d worker(s)",
            len(tasks),
            len(grid.betas),
            workers,
        )
        if workers > 1:
            with Pool(workers, initializer=_init_sweep, initargs=(payload,)) as pool:
                groups = pool.map(_sweep_group, tasks)
        else:
            _init_sweep(payload)
            groups = [_sweep_group(task) for task in tasks]

        rows = [row for group in groups for row in group]
        self.report_store.write_table(output_path, SWEEP_HEADER, rows)
        return rows

    # modwt-dump

    def modwt_dump(
        self,
        data: TrajectorySet,
        output_path: str,
        level: Optional[int] = None,
        bank_name: Optional[str] = None,
    ) -> None:
        level = level or self.experiment.fit.level
        bank = modwt.filter_bank(bank_name or self.experiment.fit.bank)
        components = lifting.components(
            data.Y, bank, level, self.experiment.fit.observables
        )
        header, columns = ["t"], [data.grid.times]
        for c in range(data.n_outputs):
            for j in range(level):
                header.append(f"y{c + 1}_D{j + 1}")
                columns.append(components.D[j, c])
            header.append(f"y{c + 1}_S{level}")
            columns.append(components.S[c])
        self.report_store.write_table(output_path, header, np.vstack(columns).T)


@dataclasses.dataclass
class _SweepPayload:
    train: TrajectorySet
    test: TrajectorySet
    omegas: np.ndarray
    H_full: np.ndarray
    n_nodes: int
    fit: FitConfig
    betas: Tuple[float, ...]


_payload: Optional[_SweepPayload] = None


def _init_sweep(payload: _SweepPayload) -> None:
    global _payload
    _payload = payload


def _failed_rows(method: str, d: int, betas: Sequence[float], exc: Exception) -> List:
    message = f"{type(exc).__name__}: {exc}"
    return [
        [method, d, beta, 0, 0, np.nan, np.nan, np.nan, message] for beta in betas
    ]


def _sweep_group(task: Tuple[str, int]) -> List[List]:
    """All beta cells for one (method, d) pair, sharing one SVD."""
    method, d = task
    p = _payload
    try:
        rows_idx = [node - 1 for node in equispaced_nodes(p.n_nodes, d)]
        train = p.train.select_outputs(rows_idx)
        test = p.test.select_outputs(rows_idx)
        fit_config = dataclasses.replace(p.fit, method=method)
        results = identification.identify_over_betas(train, fit_config, p.betas)
    except (WdmdError, np.linalg.LinAlgError) as exc:
        logger.warning("Sweep group %s d=%d failed: %s", method, d, exc)
        return _failed_rows(method, d, p.betas, exc)

    H = p.H_full[:, rows_idx, :]
    rows = []
    for beta, result in zip(p.betas, results):
        try:
            Yhat, Y = identification.predict(result, train)
            eps_train = _quiet_eps_td(Y, Yhat)
            Yhat, Y = identification.predict(result, test, from_rest=True)
            eps_test = _quiet_eps_td(Y, Yhat)
            with np.errstate(over="ignore", invalid="ignore"):
                eps_fd = metrics.eps_fd(H, lti.frf_discrete(result.model, p.omegas))
        except (WdmdError, np.linalg.LinAlgError) as exc:
            rows.extend(_failed_rows(method, d, [beta], exc))
            continue
        rows.append(
            [
                method,
                d,
                beta,
                result.rank_used,
                result.model.n_states,
                eps_train,
                eps_test,
                eps_fd,
                "",
            ]
        )
    logger.debug("Sweep group %s d=%d done", method, d)
    return rows
