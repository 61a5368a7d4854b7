import numpy as np
import pytest

from wdmd_sysid.domain.lti import simulate
from wdmd_sysid.domain.models import (
    BeamSpec,
    DiscreteStateSpace,
    Phase,
    SignalSpec,
    TimeGrid,
    TrajectorySet,
)


def random_stable_system(
    seed: int, n: int = 4, m: int = 1, d: int = 2, radius: float = 0.9, dt: float = 1e-3
) -> DiscreteStateSpace:
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return DiscreteStateSpace(
        A=radius * Q,
        B=rng.standard_normal((n, m)),
        C=rng.standard_normal((d, n)),
        D=rng.standard_normal((d, m)),
        dt=dt,
    )


def record_from(sys: DiscreteStateSpace, U: np.ndarray) -> TrajectorySet:
    run = simulate(sys, U)
    grid = TimeGrid(dt=sys.dt, count=U.shape[1])
    return TrajectorySet(grid=grid, U=U, Y=run.outputs, X=run.states)


@pytest.fixture
def stable_system():
    return random_stable_system(seed=7)


@pytest.fixture
def white_noise_record(stable_system):
    U = np.random.default_rng(11).standard_normal((1, 400))
    return record_from(stable_system, U)


@pytest.fixture
def small_beam():
    return BeamSpec(n_nodes=8, force_nodes=(8,), output_nodes=(2, 5, 8))


@pytest.fixture
def short_chirp_phases():
    return [
        Phase(signals=(SignalSpec(kind="chirp", f0=10.0, f1=400.0),), duration=0.2),
        Phase(signals=(SignalSpec(kind="silence"),), duration=0.05),
    ]
