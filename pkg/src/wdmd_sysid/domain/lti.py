import logging
from typing import Optional, Sequence

import numpy as np
from scipy import linalg

from wdmd_sysid.domain.errors import (
    EigFailure,
    ExpmFailure,
    InvalidSpec,
    NyquistViolation,
    ShapeMismatch,
    SingularResolvent,
)
from wdmd_sysid.domain.models import (
    ContinuousStateSpace,
    DiscreteStateSpace,
    ModeSet,
    Simulation,
)

logger = logging.getLogger(__name__)

RESOLVENT_TOL = 1e-12


def simulate(
    sys: DiscreteStateSpace, U: np.ndarray, z0: Optional[np.ndarray] = None
) -> Simulation:
    """Run z[k+1] = A z[k] + B u[k], y[k] = C z[k] + D u[k] over every column of U.

    The state is never reset, so chaining a second call from ``terminal_state``
    continues the same trajectory.
    """
    U = np.asarray(U, dtype=float)
    if U.ndim == 1:
        U = U.reshape(1, -1)
    if U.shape[0] != sys.n_inputs:
        raise ShapeMismatch(f"model has {sys.n_inputs} inputs, U has {U.shape[0]}")
    n, samples = sys.n_states, U.shape[1]
    z = np.zeros(n) if z0 is None else np.asarray(z0, dtype=float).reshape(-1)
    if z.shape != (n,):
        raise ShapeMismatch(f"initial state must have {n} entries, got {z.shape}")

    forcing = sys.B @ U
    states = np.empty((n, samples))
    A = sys.A
    for k in range(samples):
        states[:, k] = z
        z = A @ z + forcing[:, k]
    outputs = sys.C @ states + sys.D @ U
    return Simulation(outputs=outputs, states=states, terminal_state=z)


def _resolvent_response(A, B, C, D, points: np.ndarray) -> np.ndarray:
    eigenvalues = linalg.eigvals(A) if A.size else np.empty(0)
    n = A.shape[0]
    identity = np.eye(n)
    H = np.empty((len(points), C.shape[0], B.shape[1]), dtype=complex)
    for i, s in enumerate(points):
        if eigenvalues.size and np.min(np.abs(eigenvalues - s)) < RESOLVENT_TOL:
            raise SingularResolvent(f"{s} is an eigenvalue of A")
        try:
            H[i] = C @ linalg.solve(s * identity - A, B) + D
        except linalg.LinAlgError as exc:
            raise SingularResolvent(f"resolvent at {s} is singular") from exc
    return H


def frf_discrete(sys: DiscreteStateSpace, omegas: Sequence[float]) -> np.ndarray:
    """H(w) = C (exp(i w dt) I - A)^-1 B + D, shape (len(omegas), d, m)."""
    omegas = np.asarray(omegas, dtype=float)
    if np.any(omegas * sys.dt >= np.pi):
        raise NyquistViolation("FRF requested at or above the Nyquist frequency")
    return _resolvent_response(
        sys.A, sys.B, sys.C, sys.D, np.exp(1j * omegas * sys.dt)
    )


def frf_continuous(sys: ContinuousStateSpace, omegas: Sequence[float]) -> np.ndarray:
    omegas = np.asarray(omegas, dtype=float)
    return _resolvent_response(sys.A, sys.B, sys.C, sys.D, 1j * omegas)


def discretize_zoh(sys: ContinuousStateSpace, dt: float) -> DiscreteStateSpace:
    if not dt > 0:
        raise InvalidSpec(f"sample period must be positive, got {dt}")
    n, m = sys.A.shape[0], sys.B.shape[1]
    augmented = np.zeros((n + m, n + m))
    augmented[:n, :n] = sys.A * dt
    augmented[:n, n:] = sys.B * dt
    try:
        exponential = linalg.expm(augmented)
    except (ValueError, linalg.LinAlgError) as exc:
        raise ExpmFailure("matrix exponential failed") from exc
    if not np.all(np.isfinite(exponential)):
        raise ExpmFailure("matrix exponential overflowed")
    return DiscreteStateSpace(
        A=exponential[:n, :n],
        B=exponential[:n, n:],
        C=sys.C.copy(),
        D=sys.D.copy(),
        dt=dt,
    )


def spectral_radius(sys: DiscreteStateSpace) -> float:
    """Largest eigenvalue modulus of A; above 1 the free response grows."""
    if sys.n_states == 0:
        return 0.0
    return float(np.max(np.abs(linalg.eigvals(sys.A))))


def extract_modes(sys: DiscreteStateSpace) -> ModeSet:
    """Eigen-modes of A, one per conjugate pair, sorted by natural frequency."""
    try:
        lam, vectors = linalg.eig(sys.A)
    except (ValueError, linalg.LinAlgError) as exc:
        raise EigFailure("eigendecomposition of A failed") from exc

    scale = max(1.0, float(np.max(np.abs(lam)))) if lam.size else 1.0
    nonzero = np.abs(lam) > 1e-14 * scale
    if not np.all(nonzero):
        logger.debug("Dropping %d zero eigenvalues", np.count_nonzero(~nonzero))
    mu = np.zeros_like(lam, dtype=complex)
    mu[nonzero] = np.log(lam[nonzero].astype(complex)) / sys.dt
    keep = nonzero & (mu.imag >= 0)

    lam, mu, vectors = lam[keep], mu[keep], vectors[:, keep]
    magnitude = np.abs(mu)
    frequencies = magnitude / (2 * np.pi)
    damping = np.divide(
        -mu.real, magnitude, out=np.zeros_like(magnitude), where=magnitude > 0
    )

    shapes = sys.C @ vectors
    norms = np.linalg.norm(shapes, axis=0)
    shapes = np.divide(shapes, norms, out=np.zeros_like(shapes), where=norms > 0)

    order = np.argsort(frequencies, kind="stable")
    return ModeSet(
        eigenvalues=lam[order],
        continuous=mu[order],
        frequencies=frequencies[order],
        damped_frequencies=mu.imag[order] / (2 * np.pi),
        damping=damping[order],
        shapes=shapes[:, order],
        state_vectors=vectors[:, order],
    )
