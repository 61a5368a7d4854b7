import logging
from typing import Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from wdmd_sysid import config
from wdmd_sysid.domain.errors import InvalidSpec, ShapeMismatch
from wdmd_sysid.domain.lti import discretize_zoh, simulate
from wdmd_sysid.domain.models import (
    BeamModel,
    BeamSpec,
    ContinuousStateSpace,
    DiscreteStateSpace,
    Phase,
    TimeGrid,
    TrajectorySet,
)
from wdmd_sysid.domain.signals import add_noise, phase_grid, render_phases

logger = logging.getLogger(__name__)

# Local DOF order per element: w_i, theta_i, w_j, theta_j


def element_stiffness(EI: float, le: float) -> np.ndarray:
    return (EI / le**3) * np.array(
        [
            [12, 6 * le, -12, 6 * le],
            [6 * le, 4 * le**2, -6 * le, 2 * le**2],
            [-12, -6 * le, 12, -6 * le],
            [6 * le, 2 * le**2, -6 * le, 4 * le**2],
        ]
    )


def element_mass(rhoA: float, le: float) -> np.ndarray:
    return (rhoA * le / 420.0) * np.array(
        [
            [156, 22 * le, 54, -13 * le],
            [22 * le, 4 * le**2, 13 * le, -3 * le**2],
            [54, 13 * le, 156, -22 * le],
            [-13 * le, -3 * le**2, -22 * le, 4 * le**2],
        ]
    )


def translation_dof(node: int) -> int:
    """Global DOF of the transverse displacement at 1-based unconstrained ``node``."""
    return 2 * (node - 1)


def assemble(spec: BeamSpec) -> BeamModel:
    """Euler-Bernoulli FE model and its first-order realization.

    A cantilever meshes ``n_nodes`` elements with the clamped node 0 removed; a
    free-free beam meshes ``n_nodes - 1`` elements. Either way the remaining
    nodes are numbered 1..n_nodes and carry DOFs (w, theta).
    """
    clamped = spec.bc == "cantilever"
    elements = spec.n_nodes if clamped else spec.n_nodes - 1
    le = spec.length / elements
    mesh_dofs = 2 * (elements + 1)
    EI = spec.youngs_modulus * spec.section_inertia
    rhoA = spec.density * spec.section_area

    K = np.zeros((mesh_dofs, mesh_dofs))
    M = np.zeros((mesh_dofs, mesh_dofs))
    ke, me = element_stiffness(EI, le), element_mass(rhoA, le)
    for e in range(elements):
        dofs = slice(2 * e, 2 * e + 4)
        K[dofs, dofs] += ke
        M[dofs, dofs] += me
    if clamped:
        K, M = K[2:, 2:], M[2:, 2:]

    n_dof = 2 * spec.n_nodes
    G = spec.rayleigh_alpha * M + spec.rayleigh_beta * K
    F = np.zeros((n_dof, len(spec.force_nodes)))
    for col, node in enumerate(spec.force_nodes):
        F[translation_dof(node), col] = 1.0

    try:
        factor = linalg.cho_factor(M)
    except linalg.LinAlgError as exc:
        raise InvalidSpec("mass matrix is not positive definite") from exc

    A = np.block(
        [
            [np.zeros((n_dof, n_dof)), np.eye(n_dof)],
            [-linalg.cho_solve(factor, K), -linalg.cho_solve(factor, G)],
        ]
    )
    B = np.vstack([np.zeros_like(F), linalg.cho_solve(factor, F)])

    output_dofs = tuple(translation_dof(node) for node in spec.output_nodes)
    offset = 0 if spec.output_kind == "displacement" else n_dof
    C = np.zeros((len(output_dofs), 2 * n_dof))
    for row, dof in enumerate(output_dofs):
        C[row, offset + dof] = 1.0

    logger.debug(
        "Assembled %s beam: %d elements, %d DOFs", spec.bc, elements, n_dof
    )
    return BeamModel(
        spec=spec,
        M=M,
        K=K,
        G=G,
        F=F,
        system=ContinuousStateSpace(
            A=A, B=B, C=C, D=np.zeros((C.shape[0], F.shape[1]))
        ),
        output_dofs=output_dofs,
    )


def natural_frequencies(model: BeamModel, count: int) -> Tuple[np.ndarray, np.ndarray]:
    """Undamped frequencies in Hz and mass-normalised mode shapes (columns)."""
    eigenvalues, shapes = linalg.eigh(model.K, model.M)
    eigenvalues = np.clip(eigenvalues, 0.0, None)
    return np.sqrt(eigenvalues[:count]) / (2 * np.pi), shapes[:, :count]


def cantilever_frequencies(spec: BeamSpec, count: int) -> np.ndarray:
    """Closed-form Euler-Bernoulli cantilever frequencies in Hz."""
    roots = np.asarray(config.CANTILEVER_ROOTS[:count])
    wave_speed = np.sqrt(
        spec.youngs_modulus * spec.section_inertia / (spec.density * spec.section_area)
    )
    return roots**2 / (2 * np.pi) * wave_speed / spec.length**2


def mechanical_energy(model: BeamModel, X: np.ndarray) -> np.ndarray:
    """Kinetic plus strain energy for every state column of ``X``."""
    n = model.n_dof
    q, v = X[:n], X[n:]
    kinetic = 0.5 * np.einsum("ik,ij,jk->k", v, model.M, v)
    strain = 0.5 * np.einsum("ik,ij,jk->k", q, model.K, q)
    return kinetic + strain


def generate_dataset(
    model: BeamModel,
    phases: Sequence[Phase],
    grid: TimeGrid,
    noise_level: float = 0.0,
    seed: int = 0,
    discrete: Optional[DiscreteStateSpace] = None,
) -> TrajectorySet:
    """Simulate the beam from rest through every phase without resetting the state."""
    U = render_phases(phases, grid)
    if U.shape[0] != model.F.shape[1]:
        raise ShapeMismatch(
            f"beam has {model.F.shape[1]} force inputs, phases drive {U.shape[0]}"
        )
    sysd = discrete if discrete is not None else discretize_zoh(model.system, grid.dt)
    run = simulate(sysd, U)
    Y = add_noise(run.outputs, noise_level, seed) if noise_level > 0 else run.outputs
    return TrajectorySet(grid=grid, U=U, Y=Y, X=run.states)


class BeamFemSource:
    """Trajectory source backed by the finite-element beam."""

    def __init__(self, spec: BeamSpec) -> None:
        self.spec = spec
        self.model = assemble(spec)
        self._discrete: dict = {}

    @property
    def truth(self) -> ContinuousStateSpace:
        return self.model.system

    def discrete(self, dt: float) -> DiscreteStateSpace:
        if dt not in self._discrete:
            self._discrete[dt] = discretize_zoh(self.model.system, dt)
        return self._discrete[dt]

    def reference_shapes(self, count: int) -> Tuple[np.ndarray, np.ndarray]:
        """First ``count`` flexible FEM modes, restricted to the output nodes."""
        frequencies, shapes = natural_frequencies(self.model, self.model.n_dof)
        flexible = frequencies > 1e-6 * frequencies.max()
        frequencies = frequencies[flexible][:count]
        shapes = shapes[:, flexible][:, :count]
        return frequencies, shapes[list(self.model.output_dofs), :]

    def generate(
        self,
        phases: Sequence[Phase],
        dt: float,
        noise_level: float = 0.0,
        seed: int = 0,
    ) -> TrajectorySet:
        grid = phase_grid(phases, dt)
        logger.info(
            "Simulating %s beam for %d samples (%d outputs, %d inputs)",
            self.spec.bc,
            grid.count,
            len(self.spec.output_nodes),
            len(self.spec.force_nodes),
        )
        return generate_dataset(
            self.model, phases, grid, noise_level, seed, self.discrete(dt)
        )
