"""Run configuration schema (JSON-syntax files and service request bodies).

Matrices are nested arrays of numbers, row-major. Unknown keys are rejected
everywhere so a typo in a config fails loudly instead of silently running
with a default.
"""

from __future__ import annotations

from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

MAX_SEED = (1 << 64) - 1


class SourceBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")

    A_s: List[List[float]] = Field(default_factory=list)
    A_u_diag: List[float] = Field(default_factory=list)
    Q: List[List[float]]


class ChannelBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["MISO", "SIMO"]
    H: List[List[float]]
    r: Optional[float] = None
    R: Optional[List[List[float]]] = None
    power: float


class SimBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")

    seed: int = Field(default=0, ge=0, le=MAX_SEED)
    horizon: int = Field(default=200, ge=1)
    replicas: int = Field(default=1000, ge=1)


class DesignBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mode: Literal["strict", "normalized"] = "normalized"
    margin: float = Field(default=0.01, gt=0.0)  # relative bisection width
    tol: float = Field(default=1e-9, gt=0.0)
    max_iter: int = Field(default=100000, ge=1)
    divergence_threshold: float = Field(default=1e9, gt=0.0)
    gamma: Optional[List[float]] = None  # explicit row override, length k


class OutputBlock(BaseModel):
    model_config = ConfigDict(extra="forbid")

    directory: str = "."
    format: Literal["csv", "json"] = "csv"


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    source: SourceBlock
    channel: ChannelBlock
    sim: SimBlock = Field(default_factory=SimBlock)
    design: DesignBlock = Field(default_factory=DesignBlock)
    output: OutputBlock = Field(default_factory=OutputBlock)
