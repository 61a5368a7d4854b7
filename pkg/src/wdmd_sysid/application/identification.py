"""Least-squares operator identification: DMD, DMDc, ioDMD, WDMD and Delay-DMD.

Every estimator reduces to one stacked solve

    [X1; Y0] = [A B; C D] [X0; U0]

with a beta-truncated SVD pseudoinverse of the regressor block. The methods only
differ in what plays the role of the state snapshots X.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from wdmd_sysid.config import DEFAULT_OBSERVABLES
from wdmd_sysid.domain import lifting, modwt
from wdmd_sysid.domain.errors import (
    DegenerateData,
    InsufficientData,
    MissingStates,
    ShapeMismatch,
    SvdFailure,
)
from wdmd_sysid.domain.lti import simulate, spectral_radius
from wdmd_sysid.domain.models import (
    DiscreteStateSpace,
    FitConfig,
    FitResult,
    TrajectorySet,
)

logger = logging.getLogger(__name__)

Svd = Tuple[np.ndarray, np.ndarray, np.ndarray]


def _svd(M: np.ndarray) -> Svd:
    try:
        return linalg.svd(M, full_matrices=False, lapack_driver="gesvd")
    except (ValueError, linalg.LinAlgError) as exc:
        raise SvdFailure(f"SVD of a {M.shape} matrix did not converge") from exc


def _retained(s: np.ndarray, beta: float) -> int:
    if s.size == 0 or s[0] == 0:
        return 0
    return int(np.count_nonzero(s >= beta * s[0]))


def truncated_pinv(M: np.ndarray, beta: float) -> np.ndarray:
    """Pseudoinverse keeping singular values >= beta * sigma_max."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    if M.size == 0:
        raise DegenerateData("cannot invert an empty matrix")
    U, s, Vt = _svd(M)
    r = _retained(s, beta)
    return (Vt[:r].T / s[:r]) @ U[:, :r].T


def _stacked_solve(
    target: np.ndarray,
    regressors: np.ndarray,
    beta: float,
    svd: Optional[Svd] = None,
) -> Tuple[np.ndarray, int, float]:
    U, s, Vt = _svd(regressors) if svd is None else svd
    r = _retained(s, beta)
    operator = ((target @ Vt[:r].T) / s[:r]) @ U[:, :r].T
    residual = float(np.linalg.norm(target - operator @ regressors))
    return operator, r, residual


def _check_columns(**blocks: np.ndarray) -> int:
    counts = {name: block.shape[1] for name, block in blocks.items()}
    if len(set(counts.values())) != 1:
        raise ShapeMismatch(f"snapshot blocks disagree on column count: {counts}")
    return next(iter(counts.values()))


def fit_dmd(X0: np.ndarray, X1: np.ndarray, beta: float) -> np.ndarray:
    X0, X1 = np.atleast_2d(X0), np.atleast_2d(X1)
    if X0.shape != X1.shape:
        raise ShapeMismatch(f"X0 {X0.shape} and X1 {X1.shape} differ")
    return X1 @ truncated_pinv(X0, beta)


def fit_dmdc(
    X0: np.ndarray, X1: np.ndarray, U0: np.ndarray, beta: float
) -> Tuple[np.ndarray, np.ndarray]:
    X0, X1, U0 = np.atleast_2d(X0), np.atleast_2d(X1), np.atleast_2d(U0)
    if X0.shape != X1.shape:
        raise ShapeMismatch(f"X0 {X0.shape} and X1 {X1.shape} differ")
    if _check_columns(X0=X0, U0=U0) < 1:
        raise DegenerateData("need at least one snapshot pair")
    operator, _, _ = _stacked_solve(X1, np.vstack([X0, U0]), beta)
    n = X0.shape[0]
    return operator[:, :n], operator[:, n:]


def fit_iodmd(
    X0: np.ndarray,
    X1: np.ndarray,
    U0: np.ndarray,
    Y0: np.ndarray,
    beta: float,
    dt: float = 1.0,
    svd: Optional[Svd] = None,
) -> FitResult:
    X0, X1 = np.atleast_2d(X0), np.atleast_2d(X1)
    U0, Y0 = np.atleast_2d(U0), np.atleast_2d(Y0)
    if X0.shape != X1.shape:
        raise ShapeMismatch(f"X0 {X0.shape} and X1 {X1.shape} differ")
    if _check_columns(X0=X0, U0=U0, Y0=Y0) < 1:
        raise DegenerateData("need at least one snapshot pair")

    n = X0.shape[0]
    operator, rank, residual = _stacked_solve(
        np.vstack([X1, Y0]), np.vstack([X0, U0]), beta, svd
    )
    model = DiscreteStateSpace(
        A=operator[:n, :n],
        B=operator[:n, n:],
        C=operator[n:, :n],
        D=operator[n:, n:],
        dt=dt,
    )
    return FitResult(
        model=model,
        method="iodmd",
        beta=beta,
        rank_used=rank,
        residual=residual,
        initial_state=X0[:, 0].copy(),
        state_source="states",
    )


@dataclass
class _Snapshots:
    X0: np.ndarray
    X1: np.ndarray
    U0: np.ndarray
    Y0: np.ndarray
    initial_state: np.ndarray
    start_index: int
    state_source: str
    structural_Cw: Optional[np.ndarray] = None


def _shift_pairs(
    states: np.ndarray, U: np.ndarray, Y: np.ndarray, start: int, source: str
) -> _Snapshots:
    return _Snapshots(
        X0=states[:, :-1],
        X1=states[:, 1:],
        U0=U[:, start:-1],
        Y0=Y[:, start:-1],
        initial_state=states[:, 0].copy(),
        start_index=start,
        state_source=source,
    )


def _wdmd_snapshots(U: np.ndarray, Y: np.ndarray, config: FitConfig) -> _Snapshots:
    lifted = lifting.lift(
        Y, modwt.filter_bank(config.bank), config.level, config.observables
    )
    Z0, Z1 = lifting.split_snapshots(lifted)
    return _Snapshots(
        X0=Z0,
        X1=Z1,
        U0=U[:, :-1],
        Y0=Y[:, :-1],
        initial_state=lifting.lifted_initial_state(lifted),
        start_index=0,
        state_source="wavelets",
        structural_Cw=lifted.Cw,
    )


def delay_embed(Y: np.ndarray, tau: int, delta: int) -> Tuple[np.ndarray, int]:
    """Rows [y(t_k); y(t_k - delta); ...; y(t_k - delta*(tau-1))] for every valid k.

    Returns the embedding and the index of the first sample it covers.
    """
    Y = np.atleast_2d(Y)
    start = delta * (tau - 1)
    samples = Y.shape[1]
    if samples - start < 1:
        raise InsufficientData(
            f"embedding of tau={tau}, delta={delta} needs more than {samples} samples"
        )
    blocks = [Y[:, start - i * delta : samples - i * delta] for i in range(tau)]
    return np.vstack(blocks), start


def _delay_snapshots(U: np.ndarray, Y: np.ndarray, config: FitConfig) -> _Snapshots:
    Phi, start = delay_embed(Y, config.tau, config.delta)
    if Phi.shape[1] < 2:
        raise InsufficientData("delay embedding leaves no snapshot pair")
    return _shift_pairs(Phi, U, Y, start, "delays")


def _check_record(U: np.ndarray, Y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    U, Y = np.atleast_2d(U), np.atleast_2d(Y)
    if U.shape[1] != Y.shape[1]:
        raise ShapeMismatch(f"U has {U.shape[1]} samples, Y has {Y.shape[1]}")
    if Y.shape[1] < 2:
        raise DegenerateData("need at least two samples")
    return U, Y


def fit_wdmd(
    U: np.ndarray, Y: np.ndarray, config: FitConfig, dt: float = 1.0
) -> FitResult:
    U, Y = _check_record(U, Y)
    return _from_snapshots(_wdmd_snapshots(U, Y, config), config, config.beta, dt)


def fit_delay_dmd(
    U: np.ndarray, Y: np.ndarray, config: FitConfig, dt: float = 1.0
) -> FitResult:
    U, Y = _check_record(U, Y)
    return _from_snapshots(_delay_snapshots(U, Y, config), config, config.beta, dt)


def _snapshots(trajectories: TrajectorySet, config: FitConfig) -> _Snapshots:
    U, Y = _check_record(trajectories.U, trajectories.Y)
    if config.method == "wdmd":
        return _wdmd_snapshots(U, Y, config)
    if config.method == "delay_dmd":
        return _delay_snapshots(U, Y, config)
    if trajectories.X is not None:
        return _shift_pairs(trajectories.X, U, Y, 0, "states")
    if config.method == "iodmd":
        raise MissingStates("ioDMD needs the full-state record")
    return _shift_pairs(Y, U, Y, 0, "outputs")


def _from_snapshots(
    snap: _Snapshots, config: FitConfig, beta: float, dt: float, svd=None
) -> FitResult:
    n = snap.X0.shape[0]
    if config.method in ("dmd", "dmdc"):
        operator, rank, residual = _stacked_solve(
            snap.X1, _regressors(snap, config.method), beta, svd
        )
        if config.method == "dmdc":
            B = operator[:, n:]
        else:
            B = np.zeros((n, snap.U0.shape[0]))
        # output map fitted separately; D stays zero for the state-only methods
        C = snap.Y0 @ truncated_pinv(snap.X0, beta)
        model = DiscreteStateSpace(
            A=operator[:, :n], B=B, C=C, D=np.zeros((C.shape[0], B.shape[1])), dt=dt
        )
        result = FitResult(
            model=model,
            method=config.method,
            beta=beta,
            rank_used=rank,
            residual=residual,
            initial_state=snap.initial_state,
        )
    else:
        result = fit_iodmd(snap.X0, snap.X1, snap.U0, snap.Y0, beta, dt, svd)
        result.method = config.method

    result.initial_state = snap.initial_state
    result.start_index = snap.start_index
    result.state_source = snap.state_source
    if config.method == "wdmd":
        result.level, result.bank = config.level, config.bank
        result.structural_Cw = snap.structural_Cw
        result.observables = config.observables
    if config.method == "delay_dmd":
        result.tau, result.delta = config.tau, config.delta
    return result


def _regressors(snap: _Snapshots, method: str) -> np.ndarray:
    if method == "dmd":
        return snap.X0
    return np.vstack([snap.X0, snap.U0])


def identify(trajectories: TrajectorySet, config: FitConfig) -> FitResult:
    snap = _snapshots(trajectories, config)
    result = _from_snapshots(snap, config, config.beta, trajectories.grid.dt)
    logger.info(
        "Fitted %s model: %d states, rank %d, residual %.3e",
        config.method,
        result.model.n_states,
        result.rank_used,
        result.residual,
    )
    radius = spectral_radius(result.model)
    if radius > 1.0:
        logger.warning(
            "Fitted %s model is unstable: spectral radius %.6f", config.method, radius
        )
    return result


def identify_over_betas(
    trajectories: TrajectorySet, config: FitConfig, betas: Sequence[float]
) -> List[FitResult]:
    """One fit per beta, sharing a single SVD of the regressor block."""
    snap = _snapshots(trajectories, config)
    svd = _svd(_regressors(snap, config.method))
    return [
        _from_snapshots(snap, config, beta, trajectories.grid.dt, svd) for beta in betas
    ]


def observed_initial_state(
    result: FitResult, trajectories: TrajectorySet
) -> Tuple[np.ndarray, int]:
    """Model state consistent with the first usable sample of ``trajectories``."""
    if result.state_source == "wavelets":
        lifted = lifting.lift(
            trajectories.Y,
            modwt.filter_bank(result.bank),
            result.level,
            result.observables or DEFAULT_OBSERVABLES,
        )
        return lifting.lifted_initial_state(lifted), 0
    if result.state_source == "delays":
        Phi, start = delay_embed(trajectories.Y, result.tau, result.delta)
        return Phi[:, 0].copy(), start
    if result.state_source == "states":
        if trajectories.X is None:
            raise MissingStates(f"{result.method} model needs the full-state record")
        return trajectories.X[:, 0].copy(), 0
    return trajectories.Y[:, 0].copy(), 0


def predict(
    result: FitResult, trajectories: TrajectorySet, from_rest: bool = False
) -> Tuple[np.ndarray, np.ndarray]:
    """Simulated outputs and the matching measured window."""
    if from_rest:
        z0, start = None, 0
    else:
        z0, start = observed_initial_state(result, trajectories)
    outputs = simulate(result.model, trajectories.U[:, start:], z0).outputs
    return outputs, trajectories.Y[:, start:]
