"""FastAPI application exposing check/design/simulate/sweep.

Infeasibility is a normal 200 response with a verdict; 422 is reserved for
requests that cannot be processed at all (schema violations, models that
fail validation, out-of-range sweep parameters).
"""

from __future__ import annotations

from fastapi import FastAPI, HTTPException

from .. import design as design_mod, pipeline
from ..config import DesignBlock, OutputBlock, RunConfig, SimBlock
from ..errors import ZdjsccError
from . import schemas


def _config(req):
    return RunConfig(
        source=req.source,
        channel=req.channel,
        sim=getattr(req, "sim", SimBlock()),
        design=getattr(req, "design", DesignBlock()),
        output=OutputBlock(),
    )


def _reject_invalid(report):
    if not report.valid:
        raise HTTPException(
            status_code=422,
            detail={"error": "model validation failed", "checks": pipeline.report_payload(report)},
        )


def create_app():
    app = FastAPI(
        title="zdjscc",
        description="Zero-delay coding of Gauss-Markov sources over AWGN channels with feedback.",
    )

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    @app.post("/check", response_model=schemas.CheckResponse)
    def check(req: schemas.CheckRequest):
        cfg = _config(req)
        try:
            out = pipeline.run_check(cfg)
        except ZdjsccError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return schemas.CheckResponse(
            valid=out.report.valid,
            checks=pipeline.report_payload(out.report),
            s=out.s,
            capacity_nats=out.c_nats,
            capacity_bits=out.c_bits,
            log_instability=out.log_instability,
            capacity_margin=out.feasibility.margin,
            verdict=out.feasibility.status if out.report.valid else "Invalid",
        )

    @app.post("/design", response_model=schemas.DesignResponse)
    def design(req: schemas.DesignRequest):
        cfg = _config(req)
        try:
            out = pipeline.run_design(cfg)
        except ZdjsccError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        _reject_invalid(out.report)
        payload = pipeline.certificate_payload(out.certificate, out.cert_report)
        verdict = design_mod.FEASIBLE if out.certificate.feasible else design_mod.INFEASIBLE
        return schemas.DesignResponse(verdict=verdict, certificate=payload)

    @app.post("/simulate", response_model=schemas.SimulateResponse)
    def simulate(req: schemas.SimulateRequest):
        cfg = _config(req)
        try:
            out = pipeline.run_simulate(cfg)
        except ZdjsccError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        _reject_invalid(out.report)
        if out.infeasible:
            raise HTTPException(
                status_code=409,
                detail={
                    "error": "model is infeasible; pass design.gamma to simulate anyway",
                    "violated": out.certificate.violated,
                },
            )
        summary = pipeline.simulate_summary(out, cfg.design.mode)
        sim = out.sim
        return schemas.SimulateResponse(
            verdict="Diverged" if sim.diverged else "ok",
            summary=summary,
            t=list(range(sim.horizon)),
            trace_P_t=pipeline._jsonable(list(sim.trace_P)),
            empirical_mse=pipeline._jsonable(list(sim.empirical_mse)),
            empirical_power=pipeline._jsonable(list(sim.empirical_power)),
        )

    @app.post("/sweep", response_model=schemas.SweepResponse)
    def sweep(req: schemas.SweepRequest):
        try:
            out = pipeline.run_sweep(
                req.lambda_min, req.lambda_max, req.steps, req.snr, verify=req.verify
            )
        except ZdjsccError as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return schemas.SweepResponse(
            cells=[
                schemas.SweepCell(lambda1=l1, lambda2=l2, snr=snr, achievable=ach)
                for (l1, l2, snr, ach) in out.rows
            ],
            verified=out.verified,
            mismatches=[schemas.SweepMismatch(**m) for m in out.mismatches],
        )

    return app


app = create_app()
