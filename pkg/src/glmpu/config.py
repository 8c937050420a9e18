"""JSON experiment configuration for the command-line runner.

The ``scenario`` object takes the model fields directly. Two conveniences:
``"preset": "default"`` fills unspecified fields from the six-sensor default,
and ``"snr_db"`` resets every noise variance to that per-sensor SNR. The
resolved configuration always serializes explicit fields only.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .detectors import DetectorId, GridSpec
from .montecarlo import Axis
from .signal_model import Hypothesis, Scenario

__all__ = ["ConfigError", "ExperimentConfig", "Sweep", "apply_overrides", "load_config"]


class ConfigError(ValueError):
    """The experiment configuration cannot be read or is invalid."""


@dataclass(frozen=True)
class Sweep:
    """Curve abscissa. ``unit="omega0"`` expresses DELTA values as multiples of omega0."""

    axis: Axis
    values: tuple[float, ...]
    unit: str = "rad/s"

    def __post_init__(self):
        if self.unit not in ("rad/s", "omega0", "dB"):
            raise ValueError(f"unknown sweep unit {self.unit!r}")

    def resolved(self, scenario: Scenario) -> list[float]:
        if self.axis is Axis.DELTA and self.unit == "omega0":
            return [v * scenario.omega0 for v in self.values]
        return list(self.values)

    def to_dict(self) -> dict:
        return {"axis": self.axis.value, "values": list(self.values), "unit": self.unit}

    @classmethod
    def from_dict(cls, d: dict) -> Sweep:
        axis = Axis(d["axis"])
        unit = d.get("unit", "dB" if axis is Axis.SNR_DB else "rad/s")
        return cls(axis, tuple(float(v) for v in d["values"]), unit)


@dataclass
class ExperimentConfig:
    scenario: Scenario
    detector_ids: list[DetectorId]
    grid: GridSpec
    alpha_list: list[float]
    sweep: Sweep
    trials: int
    master_seed: int
    output_dir: str
    calibration_trials: int | None = None
    hypothesis: Hypothesis = Hypothesis.H1
    noiseless: bool = False
    bench_N_values: list[int] = field(default_factory=lambda: [48, 480, 4800])
    bench_repetitions: int = 11
    roc_max_points: int | None = None

    def __post_init__(self):
        if not self.detector_ids:
            raise ValueError("detector_ids must not be empty")
        if not self.alpha_list or not all(0 < a < 1 for a in self.alpha_list):
            raise ValueError("alpha_list must hold values in (0, 1)")
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.master_seed < 0:
            raise ValueError("master_seed must be a nonnegative integer")
        if self.bench_repetitions < 5:
            raise ValueError("bench_repetitions must be >= 5")

    def to_dict(self) -> dict[str, Any]:
        return {
            "scenario": self.scenario.to_dict(),
            "detector_ids": [d.value for d in self.detector_ids],
            "grid": self.grid.to_dict(),
            "alpha_list": list(self.alpha_list),
            "sweep": self.sweep.to_dict(),
            "trials": self.trials,
            "master_seed": self.master_seed,
            "output_dir": self.output_dir,
            "calibration_trials": self.calibration_trials,
            "hypothesis": self.hypothesis.value,
            "noiseless": self.noiseless,
            "bench": {"N_values": list(self.bench_N_values), "repetitions": self.bench_repetitions},
            "roc": {"max_points": self.roc_max_points},
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> ExperimentConfig:
        try:
            sd = d.get("scenario")
            scenario = Scenario.default() if sd is None else Scenario.from_dict(
                {**Scenario.default().to_dict(), **sd} if sd.get("preset") == "default" else sd
            )
            if sd is not None and sd.get("snr_db") is not None:
                scenario = scenario.with_snr(float(sd["snr_db"]))
            bench = d.get("bench", {})
            return cls(
                scenario=scenario,
                detector_ids=[DetectorId(x) for x in d.get("detector_ids", ["GLRT", "GLMPU"])],
                grid=GridSpec.from_dict(d.get("grid", {"n_alpha": 2000})),
                alpha_list=[float(a) for a in d.get("alpha_list", [0.05])],
                sweep=Sweep.from_dict(
                    d.get("sweep", {"axis": "DELTA", "values": [0.0, 0.1, 0.2], "unit": "omega0"})
                ),
                trials=int(d.get("trials", 10_000)),
                master_seed=int(d.get("master_seed", 0)),
                output_dir=str(d.get("output_dir", "results")),
                calibration_trials=(
                    None if d.get("calibration_trials") is None else int(d["calibration_trials"])
                ),
                hypothesis=Hypothesis(d.get("hypothesis", "H1")),
                noiseless=bool(d.get("noiseless", False)),
                bench_N_values=[int(n) for n in bench.get("N_values", [48, 480, 4800])],
                bench_repetitions=int(bench.get("repetitions", 11)),
                roc_max_points=d.get("roc", {}).get("max_points"),
            )
        except (AttributeError, KeyError, TypeError, ValueError) as exc:
            raise ConfigError(f"invalid config: {exc}") from exc


def _parse_value(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(raw: dict[str, Any], overrides: list[str]) -> dict[str, Any]:
    """Apply ``dotted.key=value`` overrides; values are parsed as JSON when possible."""
    out = copy.deepcopy(raw)
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep or not key:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        parts = key.split(".")
        node = out
        for p in parts[:-1]:
            if p == "scenario" and "scenario" not in node:
                node["scenario"] = Scenario.default().to_dict()
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {item!r} descends into a non-object")
        node[parts[-1]] = _parse_value(value)
    return out


def load_config(path: str | Path | None) -> dict[str, Any]:
    """Read the raw JSON document (an empty dict when ``path`` is None)."""
    if path is None:
        return {}
    try:
        raw = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    return raw
