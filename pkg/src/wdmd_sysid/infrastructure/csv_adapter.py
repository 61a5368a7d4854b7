import csv
import logging
import os
from typing import Iterable, List, Optional, Sequence

import numpy as np

from wdmd_sysid.domain.errors import FormatError
from wdmd_sysid.domain.models import TimeGrid, TrajectorySet

logger = logging.getLogger(__name__)


def fmt(value) -> str:
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return f"{float(value):.17g}"


def _prepare(path: str) -> None:
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)


def write_table(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Header plus rows, floats at 17 significant digits, LF line endings."""
    _prepare(path)
    with open(path, "w", encoding="utf-8", newline="") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) for v in row])
    logger.info("Successfully saved %s", path)


def read_table(path: str) -> "tuple[List[str], List[List[str]]]":
    with open(path, "r", encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration as exc:
            raise FormatError(f"{path} is empty") from exc
        rows = [row for row in reader if row]
    for number, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise FormatError(
                f"{path}:{number} has {len(row)} fields, header has {len(header)}"
            )
    return header, rows


def _numeric(path: str, rows: List[List[str]]) -> np.ndarray:
    try:
        return np.array([[float(v) for v in row] for row in rows], dtype=float)
    except ValueError as exc:
        raise FormatError(f"{path} holds a non-numeric value") from exc


def _columns(header: List[str], prefix: str) -> List[int]:
    picked = [i for i, name in enumerate(header) if name.startswith(prefix)]
    expected = [f"{prefix}{k + 1}" for k in range(len(picked))]
    if [header[i] for i in picked] != expected:
        raise FormatError(f"{prefix}-columns must read {', '.join(expected)}")
    return picked


def grid_from_times(t: np.ndarray) -> TimeGrid:
    if t.size < 2:
        raise FormatError("a trajectory needs at least two rows")
    dt = float(t[1] - t[0])
    if not np.allclose(np.diff(t), dt, rtol=1e-9, atol=0.0):
        raise FormatError("time column is not uniformly sampled")
    return TimeGrid(dt=dt, count=t.size, t0=float(t[0]))


class CsvTrajectoryAdapter:
    """Trajectory files: ``t, u1..um, y1..yd`` plus an optional ``x1..xn`` file."""

    def save(
        self,
        trajectories: TrajectorySet,
        output_path: str,
        state_path: Optional[str] = None,
    ) -> None:
        t = trajectories.grid.times
        header = ["t"]
        header += [f"u{i + 1}" for i in range(trajectories.n_inputs)]
        header += [f"y{i + 1}" for i in range(trajectories.n_outputs)]
        data = np.vstack([t, trajectories.U, trajectories.Y]).T
        write_table(output_path, header, data)

        if state_path is not None:
            if trajectories.X is None:
                raise FormatError("no state record to save")
            X = trajectories.X
            write_table(state_path, [f"x{i + 1}" for i in range(X.shape[0])], X.T)

    def load(self, input_path: str, state_path: Optional[str] = None) -> TrajectorySet:
        header, rows = read_table(input_path)
        if not header or header[0] != "t":
            raise FormatError(f"{input_path}: first column must be 't'")
        data = _numeric(input_path, rows)
        if data.shape[0] == 0:
            raise FormatError(f"{input_path} has no samples")
        u_cols, y_cols = _columns(header, "u"), _columns(header, "y")
        if len(u_cols) + len(y_cols) + 1 != len(header):
            raise FormatError(f"{input_path}: unexpected columns in {header}")
        if not y_cols:
            raise FormatError(f"{input_path}: no output columns")
        grid = grid_from_times(data[:, 0])
        U = data[:, u_cols].T if u_cols else np.zeros((0, grid.count))

        X = None
        if state_path is not None:
            state_header, state_rows = read_table(state_path)
            _columns(state_header, "x")
            X = _numeric(state_path, state_rows).T
        logger.debug("Loaded %d samples from %s", grid.count, input_path)
        return TrajectorySet(grid=grid, U=U, Y=data[:, y_cols].T, X=X)


def load_input_record(path: str) -> "tuple[TimeGrid, np.ndarray]":
    """Time grid and u-columns of a trajectory or input-only CSV."""
    header, rows = read_table(path)
    if not header or header[0] != "t":
        raise FormatError(f"{path}: first column must be 't'")
    data = _numeric(path, rows)
    grid = grid_from_times(data[:, 0])
    return grid, data[:, _columns(header, "u")].T


def load_vector(path: str) -> np.ndarray:
    """State vector stored as a single ``x1..xn`` row."""
    header, rows = read_table(path)
    _columns(header, "x")
    if len(rows) != 1:
        raise FormatError(f"{path} must hold exactly one state row")
    return _numeric(path, rows)[0]


def save_vector(path: str, z: np.ndarray) -> None:
    write_table(path, [f"x{i + 1}" for i in range(z.size)], [np.asarray(z).ravel()])
