import hashlib
import json
import logging
import os
from typing import Any, Dict

import numpy as np

from wdmd_sysid import __version__
from wdmd_sysid.config import DEFAULT_OBSERVABLES
from wdmd_sysid.domain.errors import FormatError
from wdmd_sysid.domain.models import DiscreteStateSpace, FitResult

logger = logging.getLogger(__name__)

MODEL_FORMAT = "wdmd-model/1"


def _plain(value: Any) -> Any:
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, dict):
        return {k: _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def write_json(data: Dict, output_path: str) -> None:
    os.makedirs(os.path.dirname(output_path) or ".", exist_ok=True)
    with open(output_path, "w", encoding="utf-8", newline="\n") as f:
        json.dump(_plain(data), f, indent=2, sort_keys=True)
        f.write("\n")
    logger.info("Successfully saved JSON to %s", output_path)


def read_json(input_path: str) -> Dict:
    with open(input_path, "r", encoding="utf-8") as f:
        try:
            return json.load(f)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{input_path} is not valid JSON: {exc}") from exc


def config_digest(config_dict: Dict) -> str:
    canonical = json.dumps(_plain(config_dict), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def build_provenance(config_dict: Dict) -> Dict[str, str]:
    return {"config_sha256": config_digest(config_dict), "version": __version__}


def _matrix(doc: Dict, key: str, shape) -> np.ndarray:
    values = np.array(doc[key], dtype=float)
    if values.size == 0:
        values = np.zeros(shape)
    if values.shape != tuple(shape):
        raise FormatError(f"{key} is {values.shape}, dims say {tuple(shape)}")
    return values


class JsonModelAdapter:
    """ModelFile documents. Floats keep full precision and load bit-exactly."""

    def to_dict(self, result: FitResult, provenance_info: Dict) -> Dict:
        model = result.model
        lifting = None
        if result.level is not None:
            lifting = {
                "level": result.level,
                "bank": result.bank,
                "observables": result.observables,
                "row_order": result.row_order,
                "structural_Cw": result.structural_Cw,
            }
        delay = None
        if result.tau is not None:
            delay = {"tau": result.tau, "delta": result.delta}
        return {
            "format": MODEL_FORMAT,
            "method": result.method,
            "dt": model.dt,
            "dims": {
                "n": model.n_states,
                "m": model.n_inputs,
                "d": model.n_outputs,
            },
            "A": model.A,
            "B": model.B,
            "C": model.C,
            "D": model.D,
            "lifting": lifting,
            "delay": delay,
            "fit": {
                "beta": result.beta,
                "rank_used": result.rank_used,
                "residual": result.residual,
            },
            "initial_state": result.initial_state,
            "start_index": result.start_index,
            "state_source": result.state_source,
            "provenance": provenance_info,
        }

    def save(self, result: FitResult, output_path: str, provenance_info: Dict) -> None:
        write_json(self.to_dict(result, provenance_info), output_path)

    def load(self, input_path: str) -> FitResult:
        doc = read_json(input_path)
        if doc.get("format") != MODEL_FORMAT:
            raise FormatError(f"{input_path} is not a {MODEL_FORMAT} document")
        try:
            dims = doc["dims"]
            n, m, d = int(dims["n"]), int(dims["m"]), int(dims["d"])
            model = DiscreteStateSpace(
                A=_matrix(doc, "A", (n, n)),
                B=_matrix(doc, "B", (n, m)),
                C=_matrix(doc, "C", (d, n)),
                D=_matrix(doc, "D", (d, m)),
                dt=float(doc["dt"]),
            )
            fit = doc["fit"]
            result = FitResult(
                model=model,
                method=doc["method"],
                beta=float(fit["beta"]),
                rank_used=int(fit["rank_used"]),
                residual=float(fit["residual"]),
                initial_state=np.array(doc["initial_state"], dtype=float),
                start_index=int(doc["start_index"]),
                state_source=doc["state_source"],
            )
        except (KeyError, TypeError) as exc:
            raise FormatError(f"{input_path} is missing field {exc}") from exc

        if doc.get("lifting"):
            result.level = int(doc["lifting"]["level"])
            result.bank = doc["lifting"]["bank"]
            result.observables = doc["lifting"].get(
                "observables", DEFAULT_OBSERVABLES
            )
            result.structural_Cw = np.array(
                doc["lifting"]["structural_Cw"], dtype=float
            )
        if doc.get("delay"):
            result.tau = int(doc["delay"]["tau"])
            result.delta = int(doc["delay"]["delta"])
        if result.initial_state.shape != (n,):
            raise FormatError(f"initial_state must have {n} entries")
        logger.debug(
            "Loaded %s model (%d states) from %s", result.method, n, input_path
        )
        return result
