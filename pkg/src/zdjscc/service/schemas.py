"""Request/response bodies for the HTTP service.

Numbers that JSON cannot carry (inf, nan) are serialized as the strings
"inf", "-inf", "nan"; fields that may hold them are typed float-or-string.
"""

from __future__ import annotations

from typing import List, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..config import ChannelBlock, DesignBlock, SimBlock, SourceBlock

Num = Union[float, str]

MAX_SIM_CELLS = 2_000_000  # horizon * replicas bound per request
MAX_SWEEP_STEPS = 200


class CheckRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    source: SourceBlock
    channel: ChannelBlock


class DesignRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    source: SourceBlock
    channel: ChannelBlock
    design: DesignBlock = DesignBlock()


class SimulateRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    source: SourceBlock
    channel: ChannelBlock
    sim: SimBlock = SimBlock()
    design: DesignBlock = DesignBlock()

    @model_validator(mode="after")
    def _bound_work(self):
        if self.sim.horizon * self.sim.replicas > MAX_SIM_CELLS:
            raise ValueError(
                f"horizon * replicas must not exceed {MAX_SIM_CELLS} per request"
            )
        return self


class SweepRequest(BaseModel):
    model_config = ConfigDict(extra="forbid")
    lambda_min: float = 0.05
    lambda_max: float = 4.0
    steps: int = Field(default=100, ge=2, le=MAX_SWEEP_STEPS)
    snr: List[float] = Field(default=[0.0, 9.0, 99.0], min_length=1)
    verify: bool = False


class CheckLine(BaseModel):
    name: str
    passed: bool
    margin: Num
    detail: str = ""


class CheckResponse(BaseModel):
    valid: bool
    checks: List[CheckLine]
    s: float
    capacity_nats: float
    capacity_bits: float
    log_instability: float
    capacity_margin: float
    verdict: str


class CertificateBody(BaseModel):
    feasible: bool
    violated: Optional[str]
    alpha: Optional[float]
    capacity_margin: Num
    schur_margin: Num
    gamma: List[List[float]]
    J: List[List[float]]
    J_ss: List[List[float]]
    J_su: List[List[float]]
    J_uu: List[List[float]]
    M: List[List[float]]
    N: Optional[List[List[float]]]
    checks: List[CheckLine]


class DesignResponse(BaseModel):
    verdict: str
    certificate: CertificateBody


class SimulateSummary(BaseModel):
    seed: int
    replicas: int
    horizon: int
    mode: str
    gamma: List[List[float]]
    feasible: Optional[bool]
    diverged: bool
    divergence_step: Optional[int]
    d_estimate: Num
    power_estimate: Num


class SimulateResponse(BaseModel):
    verdict: str
    summary: SimulateSummary
    t: List[int]
    trace_P_t: List[Num]
    empirical_mse: List[Num]
    empirical_power: List[Num]


class SweepCell(BaseModel):
    lambda1: float
    lambda2: float
    snr: float
    achievable: int


class SweepMismatch(BaseModel):
    lambda1: float
    lambda2: float
    snr: float
    achievable: int
    certificate: bool
    dare: str


class SweepResponse(BaseModel):
    cells: List[SweepCell]
    verified: int
    mismatches: List[SweepMismatch]
