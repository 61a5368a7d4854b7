import argparse
import json
import logging
import os
import sys
from typing import List, Optional

from wdmd_sysid import __version__, config
from wdmd_sysid.application.experiment_service import ExperimentService
from wdmd_sysid.application.identification import observed_initial_state
from wdmd_sysid.domain import lti, modwt
from wdmd_sysid.domain.errors import InvalidSpec, WdmdError
from wdmd_sysid.domain.models import (
    ExperimentConfig,
    TimeGrid,
    TrajectorySet,
    equispaced_nodes,
)
from wdmd_sysid.infrastructure.beam_fem import BeamFemSource
from wdmd_sysid.infrastructure.csv_adapter import (
    CsvTrajectoryAdapter,
    load_input_record,
    load_vector,
)
from wdmd_sysid.infrastructure.json_adapter import JsonModelAdapter
from wdmd_sysid.infrastructure.report_store import FileReportStore
from wdmd_sysid.infrastructure.yaml_config import apply_overrides, load_config

logger = logging.getLogger("wdmd_sysid")

EXIT_DOMAIN = 2
EXIT_IO = 3
EXIT_OTHER = 1


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML experiment file (defaults if omitted)")
    common.add_argument("--output-dir", help="directory for every written file")
    common.add_argument("--seed", type=int)
    common.add_argument("--method", choices=config.METHODS)
    common.add_argument("--beta", type=float)
    common.add_argument("--level", type=int, help="MODWT level J")
    common.add_argument("--bank", choices=sorted(modwt.BANKS))
    common.add_argument(
        "--observables",
        choices=config.OBSERVABLES,
        help="zero-phase MRA details or one-sided causal details",
    )
    common.add_argument("--tau", type=int, help="delay embedding depth")
    common.add_argument("--delta", type=int, help="delay embedding stride")
    common.add_argument(
        "--outputs", type=int, help="observe d equispaced nodes instead of the config's"
    )
    common.add_argument("--noise", type=float, help="noise level relative to RMS")
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument("-v", "--verbose", action="store_true")
    verbosity.add_argument("-q", "--quiet", action="store_true")

    parser = argparse.ArgumentParser(
        prog="wdmd", description="Wavelet-lifted DMD system identification"
    )
    parser.add_argument("--version", action="version", version=__version__)
    commands = parser.add_subparsers(dest="command", required=True)

    commands.add_parser("generate", parents=[common], help="simulate beam records")

    fit = commands.add_parser("fit", parents=[common], help="identify a model")
    fit.add_argument("--data", help="trajectory CSV (default: <out>/train.csv)")
    fit.add_argument("--states", help="state CSV (default: <out>/train_states.csv)")

    simulate = commands.add_parser("simulate", parents=[common], help="run a model")
    simulate.add_argument("--model", help="model JSON (default: <out>/model.json)")
    simulate.add_argument("--input", help="input CSV (default: <out>/test.csv)")
    simulate.add_argument(
        "--z0",
        default="zero",
        help="'zero', 'observed' or a CSV holding one x1..xn row",
    )

    frf = commands.add_parser("frf", parents=[common], help="model FRF table")
    frf.add_argument("--model")
    frf.add_argument("--truth", action="store_true", help="also tabulate the truth")

    modes = commands.add_parser("modes", parents=[common], help="model modes")
    modes.add_argument("--model")

    evaluate = commands.add_parser("eval", parents=[common], help="error report + MAC")
    evaluate.add_argument("--model")
    evaluate.add_argument("--data", help="trajectory CSV (default: <out>/train.csv)")
    evaluate.add_argument("--states")
    evaluate.add_argument(
        "--from-rest", action="store_true", help="simulate from a zero state"
    )
    evaluate.add_argument(
        "--empirical",
        action="store_true",
        help="compare against the H1 estimate instead of the truth model",
    )

    commands.add_parser("sweep", parents=[common], help="errors over (d, beta)")

    dump = commands.add_parser("modwt-dump", parents=[common], help="MRA of outputs")
    dump.add_argument("--data")
    return parser


def configure_logging(args: argparse.Namespace) -> None:
    level = logging.INFO
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    logging.basicConfig(
        level=level,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def resolve_config(args: argparse.Namespace) -> ExperimentConfig:
    experiment = load_config(args.config)
    nodes = None
    if args.outputs is not None:
        nodes = equispaced_nodes(experiment.beam.n_nodes, args.outputs)
    return apply_overrides(
        experiment,
        seed=args.seed,
        method=args.method,
        beta=args.beta,
        level=args.level,
        bank=args.bank,
        observables=args.observables,
        tau=args.tau,
        delta=args.delta,
        noise=args.noise,
        output_nodes=nodes,
        output_dir=args.output_dir,
    )


def _default(path: Optional[str], output_dir: str, key: str) -> str:
    return path or os.path.join(output_dir, config.OUTPUT_FILES[key])


def _existing(path: str) -> Optional[str]:
    return path if os.path.exists(path) else None


def _load_record(
    store: CsvTrajectoryAdapter,
    output_dir: str,
    data: Optional[str],
    states: Optional[str],
) -> TrajectorySet:
    data_path = _default(data, output_dir, "train")
    if states is None and data is None:
        states = _existing(_default(None, output_dir, "train_states"))
    return store.load(data_path, states)


def run(args: argparse.Namespace) -> int:
    experiment = resolve_config(args)
    out = experiment.output_dir
    trajectories = CsvTrajectoryAdapter()
    models = JsonModelAdapter()
    service = ExperimentService(
        experiment=experiment,
        source_factory=BeamFemSource,
        trajectory_store=trajectories,
        model_store=models,
        report_store=FileReportStore(),
    )

    if args.command == "generate":
        train, test = service.generate(out)
        print(
            f"Generated {train.grid.count} training and {test.grid.count} testing "
            f"samples ({train.n_inputs} inputs, {train.n_outputs} outputs) in {out}"
        )
        return 0

    if args.command == "fit":
        train = _load_record(trajectories, out, args.data, args.states)
        result, eps_train = service.fit(train)
        model_path = _default(None, out, "model")
        service.save_model(result, model_path)
        print(f"method: {result.method}")
        print(f"states: {result.model.n_states}")
        print(f"rank_used: {result.rank_used}")
        print(f"residual: {result.residual:.6e}")
        print(f"spectral_radius: {lti.spectral_radius(result.model):.6f}")
        print(f"eps_td_train: {eps_train:.6e}")
        return 0

    if args.command == "sweep":
        rows = service.sweep(_default(None, out, "sweep"))
        failed = sum(1 for row in rows if row[-1])
        print(f"Swept {len(rows)} cells ({failed} failed)")
        return 0

    if args.command == "modwt-dump":
        record = _load_record(trajectories, out, args.data, None)
        service.modwt_dump(record, _default(None, out, "modwt"))
        print(f"MRA of {record.n_outputs} outputs written to {out}")
        return 0

    result = models.load(_default(args.model, out, "model"))

    if args.command == "simulate":
        input_path = _default(args.input, out, "test")
        grid, U = load_input_record(input_path)
        if args.z0 == "zero":
            z0 = None
        elif args.z0 == "observed":
            record = trajectories.load(input_path)
            z0, start = observed_initial_state(result, record)
            U = record.U[:, start:]
            grid = TimeGrid(
                dt=record.grid.dt, count=U.shape[1], t0=float(record.grid.times[start])
            )
        else:
            z0 = load_vector(args.z0)
        service.simulate(result, grid, U, out, z0)
        print(f"Simulated {U.shape[1]} samples; terminal state saved in {out}")
        return 0

    if args.command == "frf":
        service.frf(result, _default(None, out, "frf"), with_truth=args.truth)
        print(f"FRF over {experiment.metrics.count} frequencies written to {out}")
        return 0

    if args.command == "modes":
        modes = service.modes(result, out)
        for k in range(min(len(modes), config.MAC_MODES)):
            print(
                f"mode {k + 1}: {modes.frequencies[k]:.4f} Hz, "
                f"zeta {modes.damping[k]:.4e}"
            )
        return 0

    if args.command == "eval":
        record = _load_record(trajectories, out, args.data, args.states)
        report, mac = service.evaluate(
            result, record, with_truth=not args.empirical, from_rest=args.from_rest
        )
        service.save_evaluation(report, mac, out)
        print(f"eps_td: {report.eps_td:.6e}")
        print(f"eps_fd: {report.eps_fd:.6e}")
        if mac is not None:
            diagonal = ", ".join(f"{v:.3f}" for v in mac.diagonal())
            print(f"mac_diagonal: {diagonal}")
        return 0

    raise InvalidSpec(f"unknown command {args.command!r}")


def _report_error(command: str, exc: BaseException) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc), "command": command}
    sys.stderr.write(json.dumps(payload) + "\n")


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    configure_logging(args)
    try:
        return run(args)
    except WdmdError as exc:
        _report_error(args.command, exc)
        return EXIT_DOMAIN
    except OSError as exc:
        _report_error(args.command, exc)
        return EXIT_IO
    except Exception as exc:
        logger.exception("%s failed", args.command)
        _report_error(args.command, exc)
        return EXIT_OTHER


if __name__ == "__main__":
    sys.exit(main())
