import logging
from typing import List, Optional, Sequence

import numpy as np

from wdmd_sysid import config
from wdmd_sysid.domain.errors import InvalidSpec, NyquistViolation, ShapeMismatch
from wdmd_sysid.domain.models import Phase, SignalSpec, TimeGrid

logger = logging.getLogger(__name__)


def chirp_phase(spec: SignalSpec, grid: TimeGrid) -> np.ndarray:
    """Unwrapped linear-chirp phase in radians, sweeping f0 to f1 over the grid."""
    t = np.arange(grid.count) * grid.dt
    sweep = (spec.f1 - spec.f0) / (2.0 * grid.span)
    return 2.0 * np.pi * (spec.f0 * t + sweep * t**2)


def render(spec: SignalSpec, grid: TimeGrid) -> np.ndarray:
    """Sample ``spec`` on ``grid``. Time is measured from ``grid.t0``."""
    if spec.max_frequency() >= grid.nyquist:
        raise NyquistViolation(
            f"{spec.kind} reaches {spec.max_frequency()} Hz, "
            f"Nyquist is {grid.nyquist} Hz"
        )
    t = np.arange(grid.count) * grid.dt

    if spec.kind == "silence":
        return np.zeros(grid.count)

    if spec.kind == "chirp":
        return spec.amplitude * np.sin(chirp_phase(spec, grid))

    if spec.kind == "sine_burst":
        burst = spec.cycles / spec.f
        window = np.where(t < burst, 0.5 * (1.0 - np.cos(2.0 * np.pi * t / burst)), 0.0)
        return spec.amplitude * window * np.sin(2.0 * np.pi * spec.f * t)

    rng = np.random.default_rng(spec.seed)
    return spec.amplitude * rng.standard_normal(grid.count)


def add_noise(y: np.ndarray, level: float, seed: int) -> np.ndarray:
    """Add zero-mean Gaussian noise with sigma = level * RMS, channel by channel."""
    if level < 0:
        raise InvalidSpec(f"noise level must be >= 0, got {level}")
    y = np.asarray(y, dtype=float)
    if level == 0:
        return y.copy()
    samples = np.atleast_2d(y)
    rms = np.sqrt(np.mean(samples**2, axis=-1, keepdims=True))
    rng = np.random.default_rng(seed)
    noisy = samples + level * rms * rng.standard_normal(samples.shape)
    return noisy.reshape(y.shape)


def phase_lengths(
    phases: Sequence[Phase], dt: float, count: Optional[int] = None
) -> List[int]:
    """Samples per phase. The closing sample of the record belongs to the last phase."""
    if not phases:
        raise InvalidSpec("at least one phase is required")
    lengths: List[Optional[int]] = []
    for i, phase in enumerate(phases):
        if phase.duration is None:
            if i != len(phases) - 1 or count is None:
                raise InvalidSpec("only the last phase may omit its duration")
            lengths.append(None)
        else:
            lengths.append(int(round(phase.duration / dt)))
    if lengths[-1] is None:
        lengths[-1] = count - sum(lengths[:-1])
    else:
        lengths[-1] += 1
    if count is not None and sum(lengths) != count:
        raise InvalidSpec(f"phases cover {sum(lengths)} samples, grid has {count}")
    if min(lengths) < 2:
        raise InvalidSpec("every phase must span at least two samples")
    return lengths


def phase_grid(phases: Sequence[Phase], dt: float, t0: float = 0.0) -> TimeGrid:
    return TimeGrid(dt=dt, count=sum(phase_lengths(phases, dt)), t0=t0)


def render_phases(phases: Sequence[Phase], grid: TimeGrid) -> np.ndarray:
    """Concatenate the phases into one m x count input record."""
    lengths = phase_lengths(phases, grid.dt, grid.count)
    n_inputs = len(phases[0].signals)
    blocks = []
    for phase, n in zip(phases, lengths):
        if len(phase.signals) != n_inputs:
            raise ShapeMismatch(
                f"every phase needs {n_inputs} input signals, got {len(phase.signals)}"
            )
        local = TimeGrid(dt=grid.dt, count=n)
        blocks.append(np.vstack([render(spec, local) for spec in phase.signals]))
        logger.debug(
            "Rendered phase of %d samples: %s",
            n,
            ", ".join(s.kind for s in phase.signals),
        )
    return np.hstack(blocks)


def default_train_phases(n_inputs: int = 1, seed: int = 0) -> List[Phase]:
    """Chirp on the first input; further inputs get independent white noise."""
    chirp = SignalSpec(
        kind="chirp", f0=config.TRAIN_CHIRP["f0"], f1=config.TRAIN_CHIRP["f1"]
    )
    others = [
        SignalSpec(kind="white_noise", seed=seed + i) for i in range(1, n_inputs)
    ]
    return [Phase(signals=(chirp, *others), duration=config.TRAIN_CHIRP["duration"])]


def default_test_phases(n_inputs: int = 1) -> List[Phase]:
    """Two Hann-windowed bursts separated by free decay; extra inputs stay silent."""
    rest = tuple(SignalSpec(kind="silence") for _ in range(1, n_inputs))

    def burst(f: float) -> SignalSpec:
        return SignalSpec(kind="sine_burst", f=f, cycles=config.TEST_BURST_CYCLES)

    return [
        Phase(signals=(burst(config.TEST_BURST_HZ), *rest), duration=0.25),
        Phase(signals=(SignalSpec(kind="silence"), *rest), duration=0.25),
        Phase(signals=(burst(config.TEST_SECOND_BURST_HZ), *rest), duration=0.25),
    ]
