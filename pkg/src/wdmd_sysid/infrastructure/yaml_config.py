import dataclasses
import logging
import os
from typing import Any, Dict, List, Optional, Sequence

import yaml

from wdmd_sysid.domain.errors import InvalidSpec
from wdmd_sysid.domain.models import (
    BeamSpec,
    ExperimentConfig,
    FitConfig,
    FrfGrid,
    Phase,
    SignalSpec,
    SweepConfig,
)

logger = logging.getLogger(__name__)

TOP_LEVEL_KEYS = (
    "seed",
    "dt",
    "beam",
    "train",
    "test",
    "noise_level",
    "fit",
    "sweep",
    "metrics",
    "paths",
)

_FLOAT_FIELDS = {
    "length",
    "width",
    "thickness",
    "youngs_modulus",
    "density",
    "rayleigh_alpha",
    "rayleigh_beta",
    "area",
    "second_moment",
    "amplitude",
    "f0",
    "f1",
    "f",
    "duration",
    "beta",
    "f_min",
    "f_max",
}


def _check_keys(section: Dict, allowed: Sequence[str], where: str) -> None:
    if not isinstance(section, dict):
        raise InvalidSpec(f"'{where}' must be a mapping")
    unknown = sorted(set(section) - set(allowed))
    if unknown:
        raise InvalidSpec(f"unknown key(s) in '{where}': {', '.join(unknown)}")


def _coerce(section: Dict) -> Dict:
    # YAML reads 1e-12 as a string; numeric fields are converted explicitly
    out = {}
    for key, value in section.items():
        if key in _FLOAT_FIELDS and value is not None:
            try:
                value = float(value)
            except (TypeError, ValueError) as exc:
                raise InvalidSpec(f"'{key}' must be a number, got {value!r}") from exc
        out[key] = value
    return out


def _fields(cls) -> List[str]:
    return [f.name for f in dataclasses.fields(cls)]


def _beam(section: Dict) -> BeamSpec:
    _check_keys(section, _fields(BeamSpec), "beam")
    values = _coerce(section)
    for key in ("force_nodes", "output_nodes"):
        if key in values:
            values[key] = tuple(int(node) for node in values[key])
    return BeamSpec(**values)


def _phases(entries: Any, where: str) -> tuple:
    if not isinstance(entries, list):
        raise InvalidSpec(f"'{where}' must be a list of phases")
    phases = []
    for i, entry in enumerate(entries):
        _check_keys(entry, ("duration", "signals"), f"{where}[{i}]")
        signals = []
        for spec in entry.get("signals", []):
            _check_keys(spec, _fields(SignalSpec), f"{where}[{i}].signals")
            signals.append(SignalSpec(**_coerce(spec)))
        duration = entry.get("duration")
        phases.append(
            Phase(
                signals=tuple(signals),
                duration=None if duration is None else float(duration),
            )
        )
    return tuple(phases)


def _fit(section: Dict) -> FitConfig:
    _check_keys(section, _fields(FitConfig), "fit")
    return FitConfig(**_coerce(section))


def _sweep(section: Dict) -> SweepConfig:
    _check_keys(section, _fields(SweepConfig), "sweep")
    values = {}
    if "outputs" in section:
        values["outputs"] = tuple(int(d) for d in section["outputs"])
    if "betas" in section:
        values["betas"] = tuple(float(b) for b in section["betas"])
    if "methods" in section:
        values["methods"] = tuple(section["methods"])
    return SweepConfig(**values)


def _metrics(section: Dict) -> FrfGrid:
    _check_keys(section, _fields(FrfGrid), "metrics")
    return FrfGrid(**_coerce(section))


def config_from_dict(doc: Optional[Dict]) -> ExperimentConfig:
    doc = doc or {}
    _check_keys(doc, TOP_LEVEL_KEYS, "config")
    values: Dict[str, Any] = {}
    if "seed" in doc:
        values["seed"] = int(doc["seed"])
    if "dt" in doc:
        values["dt"] = float(doc["dt"])
    if "noise_level" in doc:
        values["noise_level"] = float(doc["noise_level"])
    if "beam" in doc:
        values["beam"] = _beam(doc["beam"])
    if "train" in doc:
        values["train"] = _phases(doc["train"], "train")
    if "test" in doc:
        values["test"] = _phases(doc["test"], "test")
    if "fit" in doc:
        values["fit"] = _fit(doc["fit"])
    if doc.get("sweep") is not None:
        values["sweep"] = _sweep(doc["sweep"])
    if "metrics" in doc:
        values["metrics"] = _metrics(doc["metrics"])
    if "paths" in doc:
        _check_keys(doc["paths"], ("output_dir",), "paths")
        values["output_dir"] = str(doc["paths"].get("output_dir", "out"))
    return ExperimentConfig(**values)


def load_config(path: Optional[str]) -> ExperimentConfig:
    """Read an experiment file; no path means every default."""
    if path is None:
        return ExperimentConfig()
    if not os.path.exists(path):
        raise FileNotFoundError(f"config file not found: {path}")
    with open(path, "r", encoding="utf-8") as f:
        try:
            doc = yaml.safe_load(f)
        except yaml.YAMLError as exc:
            raise InvalidSpec(f"{path} is not valid YAML: {exc}") from exc
    logger.debug("Loaded experiment config from %s", path)
    return config_from_dict(doc)


def config_to_dict(cfg: ExperimentConfig) -> Dict:
    doc = dataclasses.asdict(cfg)
    doc["paths"] = {"output_dir": doc.pop("output_dir")}
    return doc


def apply_overrides(cfg: ExperimentConfig, **overrides: Any) -> ExperimentConfig:
    """Command-line values win over the file. ``None`` leaves a key untouched."""
    fit_keys = {"beta", "level", "method", "tau", "delta", "bank", "observables"}
    fit_values = {
        k: v for k, v in overrides.items() if k in fit_keys and v is not None
    }
    top = {}
    if fit_values:
        top["fit"] = dataclasses.replace(cfg.fit, **fit_values)
    if overrides.get("seed") is not None:
        top["seed"] = int(overrides["seed"])
    if overrides.get("noise") is not None:
        top["noise_level"] = float(overrides["noise"])
    if overrides.get("output_nodes") is not None:
        top["beam"] = dataclasses.replace(
            cfg.beam, output_nodes=tuple(overrides["output_nodes"])
        )
    if overrides.get("output_dir") is not None:
        top["output_dir"] = overrides["output_dir"]
    return dataclasses.replace(cfg, **top) if top else cfg
