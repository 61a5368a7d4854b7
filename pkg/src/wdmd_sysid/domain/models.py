from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from wdmd_sysid import config
from wdmd_sysid.domain.errors import InvalidSpec, ShapeMismatch

SIGNAL_KINDS = ("chirp", "sine_burst", "silence", "white_noise")
BOUNDARY_CONDITIONS = ("cantilever", "free_free")
OUTPUT_KINDS = ("displacement", "velocity")
FRF_REFERENCES = ("sampled", "continuous")


@dataclass(frozen=True)
class TimeGrid:
    dt: float
    count: int
    t0: float = 0.0

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise InvalidSpec(f"sample period must be positive, got {self.dt}")
        if self.count < 2:
            raise InvalidSpec(f"a time grid needs at least 2 samples, got {self.count}")

    @property
    def times(self) -> np.ndarray:
        return self.t0 + np.arange(self.count) * self.dt

    @property
    def span(self) -> float:
        return (self.count - 1) * self.dt

    @property
    def nyquist(self) -> float:
        return 0.5 / self.dt


@dataclass(frozen=True)
class SignalSpec:
    kind: str
    amplitude: float = 1.0
    f0: Optional[float] = None
    f1: Optional[float] = None
    f: Optional[float] = None
    cycles: Optional[int] = None
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in SIGNAL_KINDS:
            raise InvalidSpec(f"unknown signal kind {self.kind!r}")
        if self.kind != "silence" and not self.amplitude > 0:
            raise InvalidSpec(f"amplitude must be positive, got {self.amplitude}")
        if self.kind == "chirp":
            if self.f0 is None or self.f1 is None:
                raise InvalidSpec("chirp needs both f0 and f1")
            if self.f0 < 0 or self.f0 > self.f1:
                raise InvalidSpec("chirp range must satisfy 0 <= f0 <= f1")
        if self.kind == "sine_burst":
            if self.f is None or not self.f > 0:
                raise InvalidSpec("sine burst needs a positive carrier f")
            if self.cycles is None or self.cycles < 1:
                raise InvalidSpec("sine burst needs cycles >= 1")

    def max_frequency(self) -> float:
        if self.kind == "chirp":
            return max(self.f0, self.f1)
        if self.kind == "sine_burst":
            return self.f
        return 0.0

    def to_dict(self) -> Dict:
        return {k: v for k, v in self.__dict__.items() if v is not None}


@dataclass(frozen=True)
class Phase:
    """One segment of an excitation record, one SignalSpec per input channel."""

    signals: Tuple[SignalSpec, ...]
    duration: Optional[float] = None

    def __post_init__(self) -> None:
        if not self.signals:
            raise InvalidSpec("a phase needs at least one input signal")
        if self.duration is not None and not self.duration > 0:
            raise InvalidSpec(f"phase duration must be positive, got {self.duration}")

    def to_dict(self) -> Dict:
        return {
            "duration": self.duration,
            "signals": [s.to_dict() for s in self.signals],
        }


@dataclass(eq=False)
class TrajectorySet:
    grid: TimeGrid
    U: np.ndarray
    Y: np.ndarray
    X: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        self.U = np.atleast_2d(np.asarray(self.U, dtype=float))
        self.Y = np.atleast_2d(np.asarray(self.Y, dtype=float))
        if self.X is not None:
            self.X = np.atleast_2d(np.asarray(self.X, dtype=float))
        for name, arr in (("U", self.U), ("Y", self.Y), ("X", self.X)):
            if arr is not None and arr.shape[-1] != self.grid.count:
                raise ShapeMismatch(
                    f"{name} has {arr.shape[-1]} samples, grid has {self.grid.count}"
                )

    @property
    def n_inputs(self) -> int:
        return self.U.shape[0]

    @property
    def n_outputs(self) -> int:
        return self.Y.shape[0]

    def select_outputs(self, indices: List[int]) -> "TrajectorySet":
        return TrajectorySet(self.grid, self.U, self.Y[list(indices)], self.X)


@dataclass(frozen=True)
class FilterBank:
    name: str
    g: Tuple[float, ...]
    h: Tuple[float, ...]

    @property
    def length(self) -> int:
        return len(self.g)


@dataclass(eq=False)
class ModwtDecomposition:
    """Pyramid output. Arrays carry the level on axis 0 and time on the last axis."""

    level: int
    W: np.ndarray
    V: np.ndarray
    bank: str
    scaling: np.ndarray
    boundary: str = "periodic"

    @property
    def K(self) -> int:
        return self.V.shape[-1]


@dataclass(eq=False)
class MraComponents:
    D: np.ndarray
    S: np.ndarray

    def total(self) -> np.ndarray:
        return self.D.sum(axis=0) + self.S


@dataclass(eq=False)
class LiftedStates:
    """Wavelet observables. Rows are grouped by channel, details 1..J then smooth."""

    Z: np.ndarray
    Cw: np.ndarray
    level: int
    n_outputs: int
    bank: str
    observables: str = config.DEFAULT_OBSERVABLES

    @property
    def n_states(self) -> int:
        return self.Z.shape[0]


@dataclass(frozen=True)
class FitConfig:
    method: str = "wdmd"
    beta: float = config.DEFAULT_BETA
    level: int = config.DEFAULT_LEVEL
    bank: str = config.DEFAULT_BANK
    tau: int = config.DEFAULT_TAU
    delta: int = config.DEFAULT_DELTA
    observables: str = config.DEFAULT_OBSERVABLES

    def __post_init__(self) -> None:
        if self.method not in config.METHODS:
            raise InvalidSpec(f"unknown method {self.method!r}")
        if not self.beta > 0:
            raise InvalidSpec(f"beta must be positive, got {self.beta}")
        if self.tau < 1 or self.delta < 1:
            raise InvalidSpec("tau and delta must both be >= 1")
        if self.level < 1:
            raise InvalidSpec("level must be >= 1")
        if self.observables not in config.OBSERVABLES:
            raise InvalidSpec(f"unknown observables {self.observables!r}")


@dataclass(eq=False)
class DiscreteStateSpace:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray
    dt: float

    def __post_init__(self) -> None:
        self.A, self.B, self.C, self.D = _checked_quadruple(
            self.A, self.B, self.C, self.D
        )
        if not self.dt > 0:
            raise InvalidSpec(f"sample period must be positive, got {self.dt}")

    @property
    def n_states(self) -> int:
        return self.A.shape[0]

    @property
    def n_inputs(self) -> int:
        return self.B.shape[1]

    @property
    def n_outputs(self) -> int:
        return self.C.shape[0]


@dataclass(eq=False)
class ContinuousStateSpace:
    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    D: np.ndarray

    def __post_init__(self) -> None:
        self.A, self.B, self.C, self.D = _checked_quadruple(
            self.A, self.B, self.C, self.D
        )

    @property
    def n_states(self) -> int:
        return self.A.shape[0]


def _checked_quadruple(A, B, C, D):
    A = np.atleast_2d(np.asarray(A, dtype=float))
    n = A.shape[0]
    if A.shape != (n, n):
        raise ShapeMismatch(f"A must be square, got {A.shape}")
    B = np.asarray(B, dtype=float)
    if B.ndim < 2:
        B = B.reshape(n, -1) if B.size else np.zeros((n, 0))
    C = np.asarray(C, dtype=float)
    if C.ndim < 2:
        C = C.reshape(-1, n) if C.size else np.zeros((0, n))
    if B.shape[0] != n:
        raise ShapeMismatch(f"B has {B.shape[0]} rows, A has {n} states")
    if C.shape[1] != n:
        raise ShapeMismatch(f"C has {C.shape[1]} columns, A has {n} states")
    D = np.asarray(D, dtype=float)
    shape = (C.shape[0], B.shape[1])
    if D.shape != shape:
        if D.size != shape[0] * shape[1]:
            raise ShapeMismatch(f"D must be {shape}, got {D.shape}")
        D = D.reshape(shape)
    return A, B, C, D


@dataclass(eq=False)
class Simulation:
    outputs: np.ndarray
    states: np.ndarray
    terminal_state: np.ndarray


@dataclass(eq=False)
class FitResult:
    model: DiscreteStateSpace
    method: str
    beta: float
    rank_used: int
    residual: float
    initial_state: np.ndarray
    start_index: int = 0
    state_source: str = "states"
    level: Optional[int] = None
    bank: Optional[str] = None
    tau: Optional[int] = None
    delta: Optional[int] = None
    structural_Cw: Optional[np.ndarray] = None
    observables: Optional[str] = None

    @property
    def row_order(self) -> Optional[str]:
        if self.method != "wdmd":
            return None
        return "channel-major: details 1..J then smooth"


@dataclass(eq=False)
class ModeSet:
    eigenvalues: np.ndarray
    continuous: np.ndarray
    frequencies: np.ndarray
    damped_frequencies: np.ndarray
    damping: np.ndarray
    shapes: np.ndarray
    state_vectors: np.ndarray

    def __len__(self) -> int:
        return len(self.eigenvalues)


@dataclass(frozen=True)
class BeamSpec:
    length: float = config.DEFAULT_BEAM["length"]
    width: float = config.DEFAULT_BEAM["width"]
    thickness: float = config.DEFAULT_BEAM["thickness"]
    youngs_modulus: float = config.DEFAULT_BEAM["youngs_modulus"]
    density: float = config.DEFAULT_BEAM["density"]
    n_nodes: int = config.DEFAULT_BEAM["n_nodes"]
    bc: str = config.DEFAULT_BEAM["bc"]
    rayleigh_alpha: float = config.DEFAULT_BEAM["rayleigh_alpha"]
    rayleigh_beta: float = config.DEFAULT_BEAM["rayleigh_beta"]
    force_nodes: Tuple[int, ...] = config.DEFAULT_BEAM["force_nodes"]
    output_nodes: Tuple[int, ...] = config.DEFAULT_BEAM["output_nodes"]
    output_kind: str = config.DEFAULT_BEAM["output_kind"]
    area: Optional[float] = None
    second_moment: Optional[float] = None

    def __post_init__(self) -> None:
        if self.n_nodes < 2:
            raise InvalidSpec(f"a beam needs at least 2 nodes, got {self.n_nodes}")
        if self.bc not in BOUNDARY_CONDITIONS:
            raise InvalidSpec(f"unknown boundary condition {self.bc!r}")
        if self.output_kind not in OUTPUT_KINDS:
            raise InvalidSpec(f"unknown output kind {self.output_kind!r}")
        for name in ("length", "youngs_modulus", "density"):
            if not getattr(self, name) > 0:
                raise InvalidSpec(f"{name} must be positive")
        if not self.section_area > 0 or not self.section_inertia > 0:
            raise InvalidSpec("section area and second moment must be positive")
        if self.rayleigh_alpha < 0 or self.rayleigh_beta < 0:
            raise InvalidSpec("Rayleigh coefficients must be non-negative")
        if not self.force_nodes or not self.output_nodes:
            raise InvalidSpec("force_nodes and output_nodes must be non-empty")
        for node in (*self.force_nodes, *self.output_nodes):
            if not 1 <= node <= self.n_nodes:
                raise InvalidSpec(f"node {node} outside 1..{self.n_nodes}")

    @property
    def section_area(self) -> float:
        if self.area is not None:
            return self.area
        return self.width * self.thickness

    @property
    def section_inertia(self) -> float:
        if self.second_moment is not None:
            return self.second_moment
        return self.width * self.thickness**3 / 12.0

    def to_dict(self) -> Dict:
        return {
            k: (list(v) if isinstance(v, tuple) else v)
            for k, v in self.__dict__.items()
            if v is not None
        }


def equispaced_nodes(n_nodes: int, d: int) -> List[int]:
    """d output nodes spread evenly by rank over 1..n_nodes."""
    if not 1 <= d <= n_nodes:
        raise InvalidSpec(f"cannot pick {d} distinct nodes out of {n_nodes}")
    if d == 1:
        return [n_nodes]
    return [int(k) for k in np.round(np.linspace(1, n_nodes, d))]


@dataclass(eq=False)
class BeamModel:
    spec: BeamSpec
    M: np.ndarray
    K: np.ndarray
    G: np.ndarray
    F: np.ndarray
    system: ContinuousStateSpace
    output_dofs: Tuple[int, ...]

    @property
    def n_dof(self) -> int:
        return self.M.shape[0]


@dataclass(eq=False)
class ErrorReport:
    eps_td: float
    eps_fd: Optional[float]
    per_channel: List[float]
    samples: int
    frequencies: int = 0

    def to_dict(self) -> Dict:
        return {
            "eps_td": self.eps_td,
            "eps_fd": self.eps_fd,
            "per_channel": list(self.per_channel),
            "K": self.samples,
            "L_omega": self.frequencies,
        }


@dataclass(eq=False)
class MacMatrix:
    values: np.ndarray
    row_labels: List[str] = field(default_factory=list)
    col_labels: List[str] = field(default_factory=list)

    def diagonal(self) -> np.ndarray:
        return np.diag(self.values)


@dataclass(frozen=True)
class SweepConfig:
    outputs: Tuple[int, ...] = tuple(config.SWEEP_OUTPUTS)
    betas: Tuple[float, ...] = tuple(config.SWEEP_BETAS)
    methods: Tuple[str, ...] = tuple(config.SWEEP_METHODS)

    def __post_init__(self) -> None:
        if not self.outputs or not self.betas or not self.methods:
            raise InvalidSpec("sweep grids must be non-empty")
        for method in self.methods:
            if method not in ("wdmd", "delay_dmd", "iodmd"):
                raise InvalidSpec(f"method {method!r} cannot be swept")


@dataclass(frozen=True)
class FrfGrid:
    f_min: float = config.DEFAULT_FRF_BAND[0]
    f_max: float = config.DEFAULT_FRF_BAND[1]
    count: int = config.DEFAULT_FRF_BAND[2]
    reference: str = "sampled"

    def __post_init__(self) -> None:
        if not 0 <= self.f_min < self.f_max or self.count < 1:
            raise InvalidSpec("FRF band needs 0 <= f_min < f_max and count >= 1")
        if self.reference not in FRF_REFERENCES:
            raise InvalidSpec(f"unknown FRF reference {self.reference!r}")

    @property
    def omegas(self) -> np.ndarray:
        return 2 * np.pi * np.linspace(self.f_min, self.f_max, self.count)


@dataclass(frozen=True)
class ExperimentConfig:
    beam: BeamSpec = field(default_factory=BeamSpec)
    dt: float = 1.0 / config.SAMPLING_RATE
    train: Tuple[Phase, ...] = ()
    test: Tuple[Phase, ...] = ()
    noise_level: float = 0.0
    fit: FitConfig = field(default_factory=FitConfig)
    sweep: Optional[SweepConfig] = None
    metrics: FrfGrid = field(default_factory=FrfGrid)
    output_dir: str = "out"
    seed: int = 0

    def __post_init__(self) -> None:
        if not self.dt > 0:
            raise InvalidSpec(f"sample period must be positive, got {self.dt}")
        if self.noise_level < 0:
            raise InvalidSpec("noise_level must be >= 0")
