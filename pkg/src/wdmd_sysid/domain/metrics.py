import logging
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import signal

from wdmd_sysid import config
from wdmd_sysid.domain.errors import (
    InsufficientExcitation,
    ShapeMismatch,
    ZeroModeVector,
    ZeroReference,
)
from wdmd_sysid.domain.models import MacMatrix, TimeGrid

logger = logging.getLogger(__name__)

EXCITATION_FLOOR = 1e-10


def _relative(num: float, den: float) -> float:
    if den == 0:
        raise ZeroReference("reference signal has zero energy")
    return float(np.sqrt(num / den))


def eps_td(Y: np.ndarray, Yhat: np.ndarray) -> float:
    """Relative time-domain error over all channels and samples."""
    Y, Yhat = np.atleast_2d(Y), np.atleast_2d(Yhat)
    if Y.shape != Yhat.shape:
        raise ShapeMismatch(f"shapes differ: {Y.shape} vs {Yhat.shape}")
    return _relative(np.sum(np.abs(Y - Yhat) ** 2), np.sum(np.abs(Y) ** 2))


def eps_td_per_channel(Y: np.ndarray, Yhat: np.ndarray) -> List[float]:
    Y, Yhat = np.atleast_2d(Y), np.atleast_2d(Yhat)
    return [eps_td(Y[i], Yhat[i]) for i in range(Y.shape[0])]


def _spectral_norms(H: np.ndarray) -> np.ndarray:
    # matrix 2-norm per frequency
    return np.linalg.norm(H, ord=2, axis=(1, 2))


def eps_fd(H: np.ndarray, Hhat: np.ndarray) -> float:
    """Relative frequency-domain error; H and Hhat are (L, d, m) complex arrays."""
    H, Hhat = np.asarray(H), np.asarray(Hhat)
    if H.ndim == 1:
        H, Hhat = H[:, None, None], Hhat[:, None, None]
    if H.shape != Hhat.shape:
        raise ShapeMismatch(f"shapes differ: {H.shape} vs {Hhat.shape}")
    return _relative(
        np.sum(_spectral_norms(H - Hhat) ** 2), np.sum(_spectral_norms(H) ** 2)
    )


def mac(
    Phi1: np.ndarray,
    Phi2: np.ndarray,
    row_labels: Optional[Sequence[str]] = None,
    col_labels: Optional[Sequence[str]] = None,
) -> MacMatrix:
    """Modal assurance criterion |phi^H psi|^2 / ((phi^H phi)(psi^H psi))."""
    Phi1 = np.asarray(Phi1).reshape(np.shape(Phi1)[0], -1)
    Phi2 = np.asarray(Phi2).reshape(np.shape(Phi2)[0], -1)
    if Phi1.shape[0] != Phi2.shape[0]:
        raise ShapeMismatch("mode shapes must have the same number of rows")
    energy1 = np.sum(np.abs(Phi1) ** 2, axis=0)
    energy2 = np.sum(np.abs(Phi2) ** 2, axis=0)
    if np.any(energy1 == 0) or np.any(energy2 == 0):
        raise ZeroModeVector("MAC is undefined for a zero mode shape")
    cross = np.abs(Phi1.conj().T @ Phi2) ** 2
    values = np.clip(cross / np.outer(energy1, energy2), 0.0, 1.0)
    return MacMatrix(
        values=values,
        row_labels=list(row_labels or [f"m{i + 1}" for i in range(values.shape[0])]),
        col_labels=list(col_labels or [f"m{j + 1}" for j in range(values.shape[1])]),
    )


def pair_modes(
    reference_hz: Sequence[float], candidate_hz: Sequence[float]
) -> List[int]:
    """Greedy nearest-frequency pairing, reference modes taken in ascending order."""
    candidates = np.asarray(candidate_hz, dtype=float)
    if len(candidates) < len(reference_hz):
        raise ShapeMismatch(
            f"{len(candidates)} candidate modes cannot cover {len(reference_hz)}"
        )
    taken = np.zeros(len(candidates), dtype=bool)
    chosen: List[int] = []
    for f in sorted(reference_hz):
        distance = np.where(taken, np.inf, np.abs(candidates - f))
        best = int(np.argmin(distance))
        taken[best] = True
        chosen.append(best)
    return chosen


def _welch_segment(samples: int, segments: int, overlap: float) -> Tuple[int, int]:
    nperseg = int(samples / (1 + (segments - 1) * (1 - overlap)))
    nperseg = max(min(nperseg, samples), 2)
    return nperseg, int(nperseg * overlap)


def empirical_frf(
    U: np.ndarray,
    Y: np.ndarray,
    grid: TimeGrid,
    omegas: Sequence[float],
    segments: int = config.WELCH_SEGMENTS,
    overlap: float = config.WELCH_OVERLAP,
) -> np.ndarray:
    """H1 estimate Syu Suu^-1 from Hann-windowed Welch averages, (L, d, m)."""
    U, Y = np.atleast_2d(U), np.atleast_2d(Y)
    if U.shape[1] != Y.shape[1]:
        raise ShapeMismatch("input and output records must have equal length")
    m, d = U.shape[0], Y.shape[0]
    fs = 1.0 / grid.dt
    nperseg, noverlap = _welch_segment(U.shape[1], segments, overlap)
    kwargs = dict(fs=fs, window="hann", nperseg=nperseg, noverlap=noverlap)

    f, _ = signal.csd(U[0], U[0], **kwargs)
    Suu = np.empty((len(f), m, m), dtype=complex)
    Syu = np.empty((len(f), d, m), dtype=complex)
    for a in range(m):
        for b in range(m):
            Suu[:, a, b] = signal.csd(U[b], U[a], **kwargs)[1]
        for i in range(d):
            Syu[:, i, a] = signal.csd(U[a], Y[i], **kwargs)[1]

    target = np.asarray(omegas, dtype=float) / (2 * np.pi)
    auto = np.real(np.einsum("fii->fi", Suu))
    peak = auto.max() if auto.size else 0.0
    at_target = np.stack([np.interp(target, f, auto[:, a]) for a in range(m)], axis=1)
    if peak <= 0 or np.any(at_target < EXCITATION_FLOOR * peak):
        raise InsufficientExcitation(
            "input auto-spectrum is below the excitation floor"
        )

    # H Suu = Syu per bin; bins without excitation stay zero
    excited = np.all(auto > EXCITATION_FLOOR * peak, axis=1)
    H_bins = np.zeros_like(Syu)
    H_bins[excited] = np.linalg.solve(
        Suu[excited].transpose(0, 2, 1), Syu[excited].transpose(0, 2, 1)
    ).transpose(0, 2, 1)
    H = np.empty((len(target), d, m), dtype=complex)
    for i in range(d):
        for a in range(m):
            H[:, i, a] = np.interp(target, f, H_bins[:, i, a].real) + 1j * np.interp(
                target, f, H_bins[:, i, a].imag
            )
    logger.debug("H1 estimate from %d-sample Welch segments", nperseg)
    return H
