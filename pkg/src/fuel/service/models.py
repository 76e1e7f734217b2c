"""Request/response models shared by the HTTP service and the CLI."""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field, field_validator

from .. import harness


class DiagnosticRecord(BaseModel):
    severity: str = "error"
    code: str
    file: str
    line: int
    col: int
    message: str


class CheckRequest(BaseModel):
    source: str
    filename: str = "<input>"


class CheckResponse(BaseModel):
    ok: bool
    phase: Literal["parse", "type", "ok"]
    diagnostics: list[DiagnosticRecord] = Field(default_factory=list)


class RunRequest(BaseModel):
    source: str
    filename: str = "<input>"
    entry: str = "main"
    unchecked: bool = False
    max_steps: int = 10_000_000
    max_call_depth: int = 10_000


class FaultRecord(BaseModel):
    kind: str
    file: Optional[str] = None
    line: Optional[int] = None
    col: Optional[int] = None
    message: str


class LeakRecord(BaseModel):
    cell: str
    function: str
    layout: str
    message: str


class RunResponse(BaseModel):
    ok: bool
    phase: Literal["parse", "type", "completed", "faulted", "step-limit"]
    diagnostics: list[DiagnosticRecord] = Field(default_factory=list)
    steps: Optional[int] = None
    result: Optional[str] = None
    fault: Optional[FaultRecord] = None
    leaks: list[LeakRecord] = Field(default_factory=list)


class FuzzRequest(BaseModel):
    count: int = Field(default=100, ge=0)
    seed: int = 0
    features: list[str] = Field(default_factory=lambda: sorted(harness.FEATURES))
    max_instrs: int = Field(default=16, ge=1)
    max_cells: int = Field(default=8, ge=1)

    @field_validator("features")
    @classmethod
    def _known_features(cls, value: list[str]) -> list[str]:
        unknown = set(value) - harness.FEATURES
        if unknown:
            raise ValueError(f"unknown feature(s): {sorted(unknown)}")
        return value


class FuzzFailure(BaseModel):
    seed: int
    kind: Literal["static", "fault", "roundtrip"]
    detail: str


class FuzzResponse(BaseModel):
    ok: bool
    programs: int
    static_rejections: int
    faults: int
    roundtrip_failures: int
    failures: list[FuzzFailure] = Field(default_factory=list)


class OracleRequest(BaseModel):
    max_instrs: int = Field(default=4, ge=0)
    max_cells: int = Field(default=2, ge=0)


class OracleResponse(BaseModel):
    ok: bool
    programs: int
    accepted: int
    rejected: int
    disagreements: list[str] = Field(default_factory=list)
