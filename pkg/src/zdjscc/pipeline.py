"""Shared command core: config loading, command bodies, file writers.

The CLI and the HTTP service both call through here so a request body and a
config file produce identical results. Output files are written to a temp
file and atomically renamed; a failed command never leaves partial output.
"""

from __future__ import annotations

import json
import math
import os
import tempfile
from dataclasses import dataclass

import numpy as np
from pydantic import ValidationError

from . import coder, design as design_mod, matlib
from .config import RunConfig
from .errors import InvalidArgument, InvalidModel, ZdjsccError
from .matlib import Matrix
from .model import MISO, SIMO, ChannelModel, SourceModel, validate_model

EXIT_OK = 0
EXIT_INVALID = 1
EXIT_INFEASIBLE = 2


class ConfigError(ZdjsccError):
    """Unreadable or schema-invalid configuration."""


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}")
    return parse_config(raw)


def parse_config(raw):
    try:
        return RunConfig.model_validate(raw)
    except ValidationError as exc:
        raise ConfigError(f"config rejected: {exc}")


def _matrix(rows, what):
    if not rows:
        return Matrix(np.zeros((0, 0)))
    try:
        return Matrix(rows)
    except (ValueError, ZdjsccError) as exc:
        raise InvalidModel(f"{what}: {exc}")


def build_models(cfg):
    src = cfg.source
    source = SourceModel(_matrix(src.A_s, "source.A_s"), tuple(src.A_u_diag), _matrix(src.Q, "source.Q"))
    ch = cfg.channel
    h = _matrix(ch.H, "channel.H")
    if ch.kind == "MISO":
        if ch.r is None:
            raise InvalidModel("MISO channel requires channel.r")
        channel = ChannelModel(MISO, h, ch.power, r=ch.r)
    else:
        if ch.R is None:
            raise InvalidModel("SIMO channel requires channel.R")
        channel = ChannelModel(SIMO, h, ch.power, R=_matrix(ch.R, "channel.R"))
    return source, channel


def _design_mode(cfg):
    return coder.STRICT if cfg.design.mode == "strict" else coder.POWER_NORMALIZED


# ---------------------------------------------------------------------------
# command bodies
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class CheckOutcome:
    report: object
    s: float
    c_nats: float
    c_bits: float
    log_instability: float
    feasibility: object

    @property
    def exit_code(self):
        if not self.report.valid:
            return EXIT_INVALID
        return EXIT_OK if self.feasibility.feasible else EXIT_INFEASIBLE


def run_check(cfg):
    source, channel = build_models(cfg)
    report = validate_model(source, channel)
    s, c_nats, c_bits = design_mod.effective_snr_capacity(channel)
    return CheckOutcome(
        report=report,
        s=s,
        c_nats=c_nats,
        c_bits=c_bits,
        log_instability=design_mod.log_instability(source),
        feasibility=design_mod.feasibility_check(source, channel),
    )


@dataclass(frozen=True)
class DesignOutcome:
    report: object
    design: object
    certificate: object
    cert_report: object

    @property
    def exit_code(self):
        if not self.report.valid:
            return EXIT_INVALID
        return EXIT_OK if self.certificate.feasible else EXIT_INFEASIBLE


def run_design(cfg):
    source, channel = build_models(cfg)
    report = validate_model(source, channel)
    if not report.valid:
        return DesignOutcome(report, None, None, None)
    des, cert = design_mod.design_gamma(source, channel, rel_width=cfg.design.margin)
    cert_report = design_mod.certificate_check(cert)
    return DesignOutcome(report, des, cert, cert_report)


@dataclass(frozen=True)
class SimulateOutcome:
    report: object  # validation
    sim: object  # SimulationReport or None
    design: object
    certificate: object  # None when Gamma was overridden
    seed: int
    infeasible: bool = False

    @property
    def exit_code(self):
        if not self.report.valid:
            return EXIT_INVALID
        if self.infeasible:
            return EXIT_INFEASIBLE
        return EXIT_OK  # divergence is a result, not an error


def run_simulate(cfg, seed=None, horizon=None, replicas=None, mode=None):
    source, channel = build_models(cfg)
    report = validate_model(source, channel)
    if not report.valid:
        return SimulateOutcome(report, None, None, None, 0)
    seed = cfg.sim.seed if seed is None else seed
    horizon = cfg.sim.horizon if horizon is None else horizon
    replicas = cfg.sim.replicas if replicas is None else replicas
    mode = _design_mode(cfg) if mode is None else mode

    cert = None
    if cfg.design.gamma is not None:
        gamma = Matrix(np.asarray(cfg.design.gamma, dtype=float).reshape(1, -1))
        if gamma.cols != source.k:
            raise InvalidModel(f"design.gamma must have length {source.k}")
        des = coder.EncoderDesign(gamma, mode, channel.power_budget)
    else:
        des, cert = design_mod.design_gamma(source, channel, rel_width=cfg.design.margin)
        if not cert.feasible:
            return SimulateOutcome(report, None, des, cert, seed, infeasible=True)
        if mode == coder.STRICT:
            des = coder.EncoderDesign(des.Gamma, coder.STRICT, des.power_budget)
    sim = coder.monte_carlo(
        source, channel, des, seed, horizon, replicas,
        divergence_factor=cfg.design.divergence_threshold,
    )
    return SimulateOutcome(report, sim, des, cert, seed)


@dataclass(frozen=True)
class SweepOutcome:
    rows: list  # (lambda1, lambda2, snr, achievable)
    verified: int
    mismatches: list

    @property
    def exit_code(self):
        return EXIT_OK if not self.mismatches else EXIT_INVALID


def run_sweep(lambda_min, lambda_max, steps, snr_list, verify=False, verify_budget=60):
    """Achievability over a (lambda1, lambda2) grid for each SNR.

    achievable = 1 iff U = prod max(1, |lambda_i|) satisfies U^2 < 1 + snr,
    with the all-stable case (U = 1) always achievable. With verify=True a
    deterministic subsample of cells away from the threshold and from the
    classification boundary is re-checked against design_gamma and
    dare_fixed_point.
    """
    if not (0.0 < lambda_min < lambda_max):
        raise InvalidArgument("need 0 < lambda-min < lambda-max")
    if steps < 2:
        raise InvalidArgument("steps must be at least 2")
    if not snr_list:
        raise InvalidArgument("need at least one SNR value")
    if any(s < 0.0 for s in snr_list):
        raise InvalidArgument("SNR values must be nonnegative")

    grid = np.linspace(lambda_min, lambda_max, steps)
    u = np.maximum(1.0, np.abs(grid))
    uu = np.outer(u, u)
    rows = []
    for snr in snr_list:
        ach = ((uu == 1.0) | (uu * uu < 1.0 + snr)).astype(int)
        for i, l1 in enumerate(grid):
            for j, l2 in enumerate(grid):
                rows.append((float(l1), float(l2), float(snr), int(ach[i, j])))

    verified = 0
    mismatches = []
    if verify:
        eligible = []
        for l1, l2, snr, ach in rows:
            if abs(l1 - 1.0) <= 1e-3 or abs(l2 - 1.0) <= 1e-3:
                continue
            if abs(l1) > 1.0 and abs(l2) > 1.0 and abs(l1 - l2) <= 1e-3:
                continue
            uu_cell = (max(1.0, abs(l1)) * max(1.0, abs(l2))) ** 2
            if abs(uu_cell - (1.0 + snr)) <= 5e-3 * (1.0 + snr):
                continue  # too close to the threshold to settle quickly
            eligible.append((l1, l2, snr, ach))
        stride = max(1, len(eligible) // max(1, verify_budget))
        for l1, l2, snr, ach in eligible[::stride]:
            stable = [v for v in (l1, l2) if abs(v) < 1.0]
            unstable = [v for v in (l1, l2) if abs(v) > 1.0]
            source = SourceModel(
                Matrix(np.diag(stable)) if stable else Matrix(np.zeros((0, 0))),
                tuple(unstable),
                Matrix(np.eye(2)),
            )
            channel = ChannelModel(MISO, Matrix([[1.0]]), float(snr), r=1.0)
            des, cert = design_mod.design_gamma(source, channel)
            dare = design_mod.dare_fixed_point(source, channel, des)
            agree = (cert.feasible == bool(ach)) and (
                (dare.status == design_mod.CONVERGED) == bool(ach)
            )
            verified += 1
            if not agree:
                mismatches.append(
                    {"lambda1": l1, "lambda2": l2, "snr": snr, "achievable": ach,
                     "certificate": cert.feasible, "dare": dare.status}
                )
    return SweepOutcome(rows, verified, mismatches)


# ---------------------------------------------------------------------------
# serialization
# ---------------------------------------------------------------------------


def fmt(x):
    return "%.17g" % float(x)


def atomic_write(path, text):
    directory = os.path.dirname(os.path.abspath(path)) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def trace_csv_text(sim):
    lines = ["t,trace_P_t,empirical_mse,empirical_power"]
    for t in range(sim.horizon):
        lines.append(
            f"{t},{fmt(sim.trace_P[t])},{fmt(sim.empirical_mse[t])},{fmt(sim.empirical_power[t])}"
        )
    return "\n".join(lines) + "\n"


def sweep_csv_text(rows):
    lines = ["lambda1,lambda2,snr,achievable"]
    for l1, l2, snr, ach in rows:
        lines.append(f"{fmt(l1)},{fmt(l2)},{fmt(snr)},{ach}")
    return "\n".join(lines) + "\n"


def _jsonable(x):
    if isinstance(x, float):
        return x if math.isfinite(x) else repr(x)
    if isinstance(x, Matrix):
        return x.tolist()
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    return x


def report_payload(report):
    return [
        {"name": c.name, "passed": c.passed, "margin": _jsonable(c.margin), "detail": c.detail}
        for c in report.checks
    ]


def certificate_payload(cert, cert_report):
    out = {
        "feasible": cert.feasible,
        "violated": cert.violated,
        "alpha": _jsonable(cert.alpha),
        "capacity_margin": _jsonable(cert.capacity_margin),
        "schur_margin": _jsonable(cert.schur_margin),
        "gamma": cert.Gamma.tolist(),
        "J": cert.J.tolist(),
        "J_ss": cert.J_ss.tolist(),
        "J_su": cert.J_su.tolist(),
        "J_uu": cert.J_uu.tolist(),
        "M": cert.M.tolist(),
        "N": cert.N.tolist() if cert.N is not None else None,
        "checks": report_payload(cert_report),
    }
    return out


def simulate_summary(outcome, mode):
    sim = outcome.sim
    return {
        "seed": outcome.seed,
        "replicas": sim.replicas,
        "horizon": sim.horizon,
        "mode": mode,
        "gamma": outcome.design.Gamma.tolist(),
        "feasible": None if outcome.certificate is None else outcome.certificate.feasible,
        "diverged": sim.diverged,
        "divergence_step": sim.divergence_step,
        "d_estimate": _jsonable(sim.d_estimate),
        "power_estimate": _jsonable(sim.power_estimate),
    }


def trace_json_text(sim, summary):
    payload = {
        "summary": summary,
        "t": list(range(sim.horizon)),
        "trace_P_t": _jsonable(list(sim.trace_P)),
        "empirical_mse": _jsonable(list(sim.empirical_mse)),
        "empirical_power": _jsonable(list(sim.empirical_power)),
    }
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
