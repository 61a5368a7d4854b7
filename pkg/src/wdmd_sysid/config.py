from typing import Dict, List, Tuple

SAMPLING_RATE: float = 5000.0
DEFAULT_BETA: float = 1e-12
DEFAULT_LEVEL: int = 13
DEFAULT_BANK: str = "haar"
DEFAULT_OBSERVABLES: str = "mra"
DEFAULT_TAU: int = 14
DEFAULT_DELTA: int = 1

# Aluminium cantilever, 25 mm x 5 mm solid section, 30 unconstrained nodes.
DEFAULT_BEAM: Dict[str, object] = {
    "length": 1.0,
    "width": 0.025,
    "thickness": 0.005,
    "youngs_modulus": 69e9,
    "density": 2700.0,
    "n_nodes": 30,
    "bc": "cantilever",
    "rayleigh_alpha": 2.0,
    "rayleigh_beta": 1e-6,
    "force_nodes": (30,),
    "output_nodes": (1, 7, 12, 18, 24, 30),
    "output_kind": "displacement",
}

# Cantilever eigenvalue roots (beta_i * L) for the first modes.
CANTILEVER_ROOTS: Tuple[float, ...] = (1.875104, 4.694091, 7.854757, 10.995541)

TRAIN_CHIRP: Dict[str, float] = {"f0": 10.0, "f1": 800.0, "duration": 5.0}
TEST_BURST_HZ: float = 165.1
TEST_SECOND_BURST_HZ: float = 230.4
TEST_BURST_CYCLES: int = 20

# (f_min Hz, f_max Hz, number of frequencies)
DEFAULT_FRF_BAND: Tuple[float, float, int] = (10.0, 800.0, 800)

WELCH_SEGMENTS: int = 8
WELCH_OVERLAP: float = 0.5

SWEEP_OUTPUTS: List[int] = list(range(2, 16))
SWEEP_BETAS: List[float] = [10.0**-e for e in range(15, 1, -1)]
SWEEP_METHODS: List[str] = ["wdmd", "delay_dmd"]

METHODS: Tuple[str, ...] = ("dmd", "dmdc", "iodmd", "wdmd", "delay_dmd")

# "mra": zero-phase multiresolution details; "causal": one-sided pyramid differences.
OBSERVABLES: Tuple[str, ...] = ("mra", "causal")
BOUNDARIES: Tuple[str, ...] = ("periodic", "zero")

WORKERS_ENV: str = "WDMD_WORKERS"

# Mode pairs compared in MAC tables.
MAC_MODES: int = 6

OUTPUT_FILES: Dict[str, str] = {
    "train": "train.csv",
    "train_states": "train_states.csv",
    "test": "test.csv",
    "test_states": "test_states.csv",
    "manifest": "manifest.json",
    "model": "model.json",
    "prediction": "prediction.csv",
    "terminal_state": "terminal_state.csv",
    "frf": "frf.csv",
    "modes": "modes.csv",
    "mode_shapes": "mode_shapes.csv",
    "report": "report.json",
    "mac": "mac.csv",
    "sweep": "sweep.csv",
    "modwt": "modwt.csv",
}
