"""Machine-readable reports: record schema and canonical JSON serialization."""
from __future__ import annotations

import datetime
import json
import platform
import sys
from typing import Optional

import numpy
import scipy
from pydantic import BaseModel, ConfigDict, Field

SCHEMA_VERSION = 1


class CheckRecord(BaseModel):
    name: str
    value: Optional[float] = None
    tolerance: Optional[float] = None
    passed: bool
    detail: str = ""


class EnvironmentStamp(BaseModel):
    python: str
    numpy: str
    scipy: str
    platform: str


class Report(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    schema_version: int = Field(default=SCHEMA_VERSION, alias="schema")
    command: str
    config: dict
    passed: bool
    records: list[CheckRecord]
    environment: EnvironmentStamp
    wall_time_s: float
    timestamp: str


def environment_stamp() -> EnvironmentStamp:
    return EnvironmentStamp(
        python=sys.version.split()[0],
        numpy=numpy.__version__,
        scipy=scipy.__version__,
        platform=platform.platform(),
    )


def record(name: str, value: Optional[float] = None,
           tolerance: Optional[float] = None, passed: Optional[bool] = None,
           detail: str = "") -> CheckRecord:
    """A record; when `passed` is omitted it means value <= tolerance."""
    if passed is None:
        if value is None or tolerance is None:
            raise ValueError("record needs an explicit verdict or value+tolerance")
        passed = bool(value <= tolerance)
    return CheckRecord(name=name, value=value, tolerance=tolerance,
                       passed=passed, detail=detail)


def make_report(command: str, config: dict, records: list[CheckRecord],
                wall_time_s: float, reproducible: bool = False) -> Report:
    # Under the reproducibility flag the wall time is suppressed so the report
    # is byte-identical across runs modulo the timestamp field.
    return Report(
        command=command,
        config=config,
        passed=all(r.passed for r in records),
        records=records,
        environment=environment_stamp(),
        wall_time_s=0.0 if reproducible else wall_time_s,
        timestamp=datetime.datetime.now(datetime.timezone.utc).isoformat(),
    )


def canonical_json(report: Report) -> str:
    """Deterministic serialization; floats use shortest round-trip form
    (exact to the full 17 significant digits where needed)."""
    payload = report.model_dump(by_alias=True)
    return json.dumps(payload, indent=2, ensure_ascii=True) + "\n"


def records_json(records: list[CheckRecord]) -> str:
    return json.dumps([r.model_dump() for r in records], indent=2) + "\n"


def strip_timestamp(text: str) -> str:
    return "\n".join(line for line in text.splitlines()
                     if '"timestamp"' not in line) + "\n"
