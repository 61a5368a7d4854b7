import logging
from typing import Tuple

import numpy as np

from wdmd_sysid import config
from wdmd_sysid.domain import modwt
from wdmd_sysid.domain.errors import (
    EmptyData,
    InvalidLevel,
    InvalidSpec,
    TooFewColumns,
)
from wdmd_sysid.domain.models import FilterBank, LiftedStates, MraComponents

logger = logging.getLogger(__name__)


def structural_output_map(d: int, J: int) -> np.ndarray:
    """Cw: each output is the sum of its J detail rows and its smooth row."""
    return np.kron(np.eye(d), np.ones((1, J + 1)))


def components(
    Y: np.ndarray,
    bank: FilterBank,
    J: int,
    observables: str = config.DEFAULT_OBSERVABLES,
) -> MraComponents:
    """Per-channel details and smooth, zero-phase ("mra") or one-sided ("causal")."""
    if observables == "mra":
        return modwt.mra(modwt.forward(Y, bank, J), bank)
    if observables == "causal":
        return modwt.causal_mra(Y, bank, J)
    raise InvalidSpec(
        f"unknown observables {observables!r}, expected one of {config.OBSERVABLES}"
    )


def lift(
    Y: np.ndarray,
    bank: FilterBank,
    J: int,
    observables: str = config.DEFAULT_OBSERVABLES,
) -> LiftedStates:
    """Stack the multiresolution series of every output channel into z(t_k).

    Row c*(J+1) + j of Z holds detail level j+1 of channel c for j < J, and row
    c*(J+1) + J holds the smooth series of channel c. With "causal" observables
    column k only depends on samples up to k, the record being taken from rest.
    """
    Y = np.atleast_2d(np.asarray(Y, dtype=float))
    d, samples = Y.shape
    if d < 1 or samples < 2:
        raise EmptyData(f"lifting needs d >= 1 and at least 2 samples, got {Y.shape}")
    if J < 1:
        raise InvalidLevel(f"decomposition level must be >= 1, got {J}")

    parts = components(Y, bank, J, observables)
    # (J, d, K+1) details and (d, K+1) smooth -> (d, J+1, K+1)
    stacked = np.concatenate(
        [np.moveaxis(parts.D, 0, 1), parts.S[:, np.newaxis, :]], axis=1
    )
    Z = stacked.reshape(d * (J + 1), samples)
    logger.debug(
        "Lifted %d outputs to %d %s wavelet states", d, Z.shape[0], observables
    )
    return LiftedStates(
        Z=Z,
        Cw=structural_output_map(d, J),
        level=J,
        n_outputs=d,
        bank=bank.name,
        observables=observables,
    )


def split_snapshots(lifted: LiftedStates) -> Tuple[np.ndarray, np.ndarray]:
    Z = lifted.Z
    if Z.shape[1] < 2:
        raise TooFewColumns(f"need at least 2 snapshots, got {Z.shape[1]}")
    return Z[:, :-1], Z[:, 1:]


def lifted_initial_state(lifted: LiftedStates) -> np.ndarray:
    return lifted.Z[:, 0].copy()
