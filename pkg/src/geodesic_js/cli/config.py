from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Optional

from pydantic import BaseModel, ConfigDict, Field

from geodesic_js.harness.experiments import ExperimentName, ExperimentSpec
from geodesic_js.harness.report import ExperimentError


class CliConfig(BaseModel):
    """Parsed command line; ``resolve`` layers defaults, the JSON file and the flags."""

    model_config = ConfigDict(extra="forbid")

    command: ExperimentName
    config: Optional[Path] = None
    reps: Optional[int] = Field(default=None, ge=1)
    oracle_reps: Optional[int] = Field(default=None, ge=10_000)
    seed: Optional[int] = Field(default=None, ge=0, lt=2**64)
    workers: Optional[int] = Field(default=None, ge=1)
    out: Optional[Path] = None
    plots: bool = False
    spaces: list[str] = Field(default_factory=list)
    cases: Optional[int] = Field(default=None, ge=1)
    verbosity: int = Field(default=0, ge=0)

    def file_values(self) -> dict[str, Any]:
        if self.config is None:
            return {}
        try:
            values = json.loads(self.config.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ExperimentError(f"Cannot read config file {self.config}: {exc.strerror}.") from exc
        except json.JSONDecodeError as exc:
            raise ExperimentError(f"Config file {self.config} is not valid JSON: {exc.msg}.") from exc
        if not isinstance(values, dict):
            raise ExperimentError(f"Config file {self.config} must hold a JSON object.")
        declared = values.pop("experiment", self.command)
        if declared != self.command:
            raise ExperimentError(f"Config file is for {declared!r}, not {self.command!r}.")
        return values

    def flag_values(self) -> dict[str, Any]:
        flags = {
            "reps": self.reps,
            "oracle_reps": self.oracle_reps,
            "seed": self.seed,
            "workers": self.workers,
            "out": self.out,
            "cases": self.cases,
        }
        values = {key: value for key, value in flags.items() if value is not None}
        if self.plots:
            values["plots"] = True
        if self.spaces:
            values["spaces"] = list(self.spaces)
        return values

    def resolve(self) -> ExperimentSpec:
        return ExperimentSpec.for_experiment(self.command, **{**self.file_values(), **self.flag_values()})
