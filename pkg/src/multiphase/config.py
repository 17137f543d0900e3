"""Scenario configuration files (YAML, schema-checked)."""

from __future__ import annotations

import hashlib
import json
from pathlib import Path
from typing import Literal

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

SCENARIOS = {
    "scaling-laws": "closed-form Tr bounds for coherent, separate NOON and optimal generalized NOON probes",
    "hong-benchmark": "Tr(Q^-1) of the uniform and optimal generalized NOON probe",
    "povm-saturation": "FI of the probe-adapted POVM against the QFI at the saturation point",
    "hom-dip": "two-photon coincidence probability against visibility",
    "smc-convergence": "per-step Tr(Cov) of SMC runs against the accumulated CRB",
    "mle-benchmark": "MLE error against the CRB over seeded runs",
}


class ConfigError(ValueError):
    """Invalid or unreadable scenario configuration."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class ProbeConfig(_Strict):
    family: Literal["generalized_noon", "noon", "separate_noon", "coherent"] = "generalized_noon"
    d: int = Field(3, ge=1, le=6)
    N: int = Field(2, ge=1, le=4)
    alpha_sq: float | None = Field(None, gt=0.0, lt=1.0)


class EstimatorConfig(_Strict):
    kind: Literal["smc", "mle"] = "smc"
    runs: int = Field(1, ge=1)
    repetitions: int = Field(100, ge=1)
    particles: int = Field(2000, ge=100)
    candidates_per_dim: int = Field(0, ge=0)
    true_phases: list[float] = [0.7, -0.3]
    fixed_controls: list[list[float]] = []
    input_state: list[int] = [1, 0, 0]
    visibility: float = Field(1.0, ge=0.0, le=1.0)


class OutputConfig(_Strict):
    dir: str = "results"
    stem: str | None = None


class ScenarioConfig(_Strict):
    """One reproducible experiment; ``seed`` has no default on purpose."""

    scenario: Literal[tuple(SCENARIOS)]
    seed: int = Field(ge=0)
    description: str = ""
    sweep: dict[str, list[float]] = {}
    probe: ProbeConfig = ProbeConfig()
    povm: Literal["optimal", "probe_adapted"] = "probe_adapted"
    circuit: Literal["two_tritter"] = "two_tritter"
    estimator: EstimatorConfig = EstimatorConfig()
    tolerance: float = Field(1e-10, ge=0.0)
    output: OutputConfig = OutputConfig()

    @model_validator(mode="after")
    def _sweeps_nonempty(self):
        for key, values in self.sweep.items():
            if not values:
                raise ValueError(f"sweep axis {key!r} is empty")
        return self

    def config_hash(self) -> str:
        """Hash of everything that affects the data (output location excluded)."""
        payload = self.model_dump(mode="json", exclude={"output"})
        text = json.dumps(payload, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def format_validation_error(exc: ValidationError) -> str:
    lines = []
    for err in exc.errors():
        path = ".".join(str(p) for p in err["loc"]) or "<root>"
        lines.append(f"{path}: {err['msg']}")
    return "\n".join(lines)


def parse_config(data) -> ScenarioConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a mapping at the top level")
    try:
        return ScenarioConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(format_validation_error(exc)) from exc


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path} is not valid YAML: {exc}") from exc
    try:
        return parse_config(data)
    except ConfigError as exc:
        raise ConfigError(f"{path}:\n{exc}") from exc
