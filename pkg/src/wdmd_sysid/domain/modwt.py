"""Maximal-overlap discrete wavelet transform.

All transforms act on the last axis, so a d x K array decomposes d channels at
once. Level-j filtering is done by the pyramid recursion with shifts of
2**(j-1) * l samples; the K x K level matrices are never formed. Shifts are
circular ("periodic") or fill with zeros ("zero"), which treats the record as
starting from rest and keeps every coefficient one-sided.
"""

import functools
import logging
import math
import warnings
from typing import Callable, Dict

import numpy as np
import pywt

from wdmd_sysid import config
from wdmd_sysid.domain.errors import (
    BankMismatch,
    EmptySignal,
    InvalidLevel,
    InvalidSpec,
)
from wdmd_sysid.domain.models import FilterBank, ModwtDecomposition, MraComponents

logger = logging.getLogger(__name__)


def _quadrature_mirror(g) -> tuple:
    L = len(g)
    return tuple((-1) ** l * g[L - 1 - l] for l in range(L))


def haar_bank() -> FilterBank:
    g = (0.5, 0.5)
    return FilterBank(name="haar", g=g, h=_quadrature_mirror(g))


def wavelet_bank(name: str, wavelet: str) -> FilterBank:
    """MODWT bank from a PyWavelets orthogonal wavelet, taps rescaled by 1/sqrt(2)."""
    rec_lo = np.asarray(pywt.Wavelet(wavelet).rec_lo, dtype=float)
    g = tuple(float(c) for c in rec_lo / math.sqrt(2.0))
    return FilterBank(name=name, g=g, h=_quadrature_mirror(g))


d4_bank = functools.partial(wavelet_bank, "d4", "db2")

BANKS: Dict[str, Callable[[], FilterBank]] = {
    "haar": haar_bank,
    "d4": d4_bank,
    "d6": functools.partial(wavelet_bank, "d6", "db3"),
    "d8": functools.partial(wavelet_bank, "d8", "db4"),
}


def filter_bank(name: str) -> FilterBank:
    try:
        return BANKS[name]()
    except KeyError:
        raise InvalidSpec(
            f"unknown filter bank {name!r}, expected one of {sorted(BANKS)}"
        ) from None


def _lag(v: np.ndarray, shift: int) -> np.ndarray:
    # out[t] = v[t - shift], zero before the record starts
    out = np.zeros_like(v)
    if shift < v.shape[-1]:
        out[..., shift:] = v[..., : v.shape[-1] - shift]
    return out


def _analysis_step(
    v: np.ndarray, taps, shift: int, boundary: str = "periodic"
) -> np.ndarray:
    # out[t] = sum_l taps[l] * v[(t - shift*l) mod K]
    out = np.zeros_like(v)
    for l, c in enumerate(taps):
        if boundary == "periodic":
            out += c * np.roll(v, shift * l, axis=-1)
        else:
            out += c * _lag(v, shift * l)
    return out


def _synthesis_step(x: np.ndarray, taps, shift: int) -> np.ndarray:
    # adjoint of _analysis_step: out[t] = sum_l taps[l] * x[(t + shift*l) mod K]
    out = np.zeros_like(x)
    for l, c in enumerate(taps):
        out += c * np.roll(x, -shift * l, axis=-1)
    return out


def forward(
    y: np.ndarray, bank: FilterBank, J: int, boundary: str = "periodic"
) -> ModwtDecomposition:
    y = np.asarray(y, dtype=float)
    if y.ndim == 0 or y.shape[-1] == 0:
        raise EmptySignal("cannot decompose an empty signal")
    if J < 1:
        raise InvalidLevel(f"decomposition level must be >= 1, got {J}")
    if boundary not in config.BOUNDARIES:
        raise InvalidSpec(f"unknown boundary {boundary!r}")
    K = y.shape[-1]
    if bank.length * 2 ** (J - 1) > K:
        warnings.warn(
            f"level {J} filter of a length-{bank.length} bank spans "
            f"{bank.length * 2 ** (J - 1)} samples, more than the record ({K})",
            stacklevel=2,
        )

    W = np.empty((J,) + y.shape)
    V = np.empty((J,) + y.shape)
    v = y
    for j in range(J):
        shift = 2**j
        W[j] = _analysis_step(v, bank.h, shift, boundary)
        v = _analysis_step(v, bank.g, shift, boundary)
        V[j] = v
    return ModwtDecomposition(
        level=J, W=W, V=v.copy(), bank=bank.name, scaling=V, boundary=boundary
    )


def _check_bank(dec: ModwtDecomposition, bank: FilterBank) -> None:
    if dec.bank != bank.name:
        raise BankMismatch(
            f"decomposition was computed with {dec.bank!r}, not {bank.name!r}"
        )
    if dec.boundary != "periodic":
        raise InvalidSpec("only periodic decompositions can be synthesised")


def _reconstruct(W: np.ndarray, V: np.ndarray, bank: FilterBank) -> np.ndarray:
    v = V
    for j in reversed(range(W.shape[0])):
        shift = 2**j
        v = _synthesis_step(W[j], bank.h, shift) + _synthesis_step(v, bank.g, shift)
    return v


def mra(dec: ModwtDecomposition, bank: FilterBank) -> MraComponents:
    """Detail series D_1..D_J and smooth S_J; they add up to the signal."""
    _check_bank(dec, bank)
    zeros = np.zeros_like(dec.W)
    D = np.empty_like(dec.W)
    for j in range(dec.level):
        only_j = zeros.copy()
        only_j[j] = dec.W[j]
        D[j] = _reconstruct(only_j[: j + 1], np.zeros_like(dec.V), bank)
    S = _reconstruct(zeros, dec.V, bank)
    return MraComponents(D=D, S=S)


def causal_mra(y: np.ndarray, bank: FilterBank, J: int) -> MraComponents:
    """One-sided split of y: D_j = V_{j-1} - V_j of the zero-padded pyramid, S = V_J.

    Sample t of every series depends on y[..t] only. The differences telescope,
    so details and smooth still add up to the signal. For the Haar bank D_j is
    exactly the level-j wavelet coefficient series.
    """
    y = np.asarray(y, dtype=float)
    dec = forward(y, bank, J, boundary="zero")
    smooths = np.concatenate([y[np.newaxis], dec.scaling])
    return MraComponents(D=smooths[:-1] - smooths[1:], S=dec.V.copy())


def inverse(dec: ModwtDecomposition, bank: FilterBank) -> np.ndarray:
    _check_bank(dec, bank)
    return _reconstruct(dec.W, dec.V, bank)
