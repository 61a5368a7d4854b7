from typing import Dict, Optional, Protocol, Sequence

import numpy as np

from wdmd_sysid.domain.models import (
    ContinuousStateSpace,
    ExperimentConfig,
    FitResult,
    Phase,
    TrajectorySet,
)


class TrajectorySource(Protocol):
    @property
    def truth(self) -> ContinuousStateSpace:
        ...

    def reference_shapes(self, count: int) -> "tuple[np.ndarray, np.ndarray]":
        ...

    def generate(
        self,
        phases: Sequence[Phase],
        dt: float,
        noise_level: float = 0.0,
        seed: int = 0,
    ) -> TrajectorySet:
        ...


class TrajectoryStore(Protocol):
    def save(
        self,
        trajectories: TrajectorySet,
        output_path: str,
        state_path: Optional[str] = None,
    ) -> None:
        ...

    def load(self, input_path: str, state_path: Optional[str] = None) -> TrajectorySet:
        ...


class ModelStore(Protocol):
    def save(self, result: FitResult, output_path: str, provenance_info: Dict) -> None:
        ...

    def load(self, input_path: str) -> FitResult:
        ...


class ReportStore(Protocol):
    """Writes tables, vectors and documents produced by the experiment commands."""

    def write_table(self, output_path: str, header: Sequence[str], rows) -> None:
        ...

    def write_vector(self, output_path: str, values: np.ndarray) -> None:
        ...

    def write_document(self, data: Dict, output_path: str) -> None:
        ...

    def describe(self, experiment: ExperimentConfig) -> Dict:
        ...

    def provenance(self, experiment: ExperimentConfig) -> Dict[str, str]:
        ...
