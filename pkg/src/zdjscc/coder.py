"""Innovations encoder, Kalman decoder, Riccati propagation, Monte Carlo.

The closed loop: the encoder transmits a scalar projection of the decoder's
current estimation error (known to the encoder through the noiseless
feedback link), the decoder runs the matched Kalman update, and the error
covariance P_t obeys an induced Riccati recursion.

Two operating modes:

Strict        X_t proportional to Gamma P_t^{-1} e_t with constant Gamma.
              The instantaneous power Gamma P_t^{-1} Gamma' floats with P_t.

PowerNormalized
              The same direction rescaled by beta_t so the analytic
              instantaneous power equals the budget p at every step. When
              the design carries a fixed weighting vector w (produced by
              the certificate machinery at the designed fixed point), the
              measurement row is anchored at beta_t w' instead of being
              re-derived from P_t; the two coincide at the fixed point and
              for scalar sources coincide everywhere.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import matlib
from .errors import (
    DegenerateDirection,
    DimensionMismatch,
    InvalidArgument,
    NotPD,
    SingularInnovationCovariance,
    SingularMatrix,
)
from .matlib import Matrix
from .model import MISO, RngState

STRICT = "Strict"
POWER_NORMALIZED = "PowerNormalized"

DIVERGENCE_FACTOR = 1e9  # trace(P_t) > factor * trace(Q) marks a run Diverged
TAIL_FRACTION = 0.2  # steady-state window for the asymptotic MSE estimate


@dataclass(frozen=True)
class EncoderDesign:
    """Transmit direction and power handling for the closed loop.

    Gamma is the 1 x k reduced encoding row (for MISO the physical channel
    input is H' times the transmitted scalar). weighting, when present, is
    the k x 1 anchor direction used by the power-normalized scheme; None
    means the direction is re-derived from the current covariance.
    """

    Gamma: Matrix
    mode: str
    power_budget: float
    weighting: Matrix = None

    def __post_init__(self):
        if self.mode not in (STRICT, POWER_NORMALIZED):
            raise InvalidArgument(f"mode must be Strict or PowerNormalized, got {self.mode!r}")
        if self.Gamma.rows != 1:
            raise InvalidArgument(f"Gamma must be a 1xk row, got {self.Gamma.shape}")
        if self.weighting is not None and self.weighting.shape != (self.Gamma.cols, 1):
            raise InvalidArgument(
                f"weighting must be {self.Gamma.cols}x1, got {self.weighting.shape}"
            )
        object.__setattr__(self, "power_budget", float(self.power_budget))

    @property
    def k(self):
        return self.Gamma.cols


@dataclass(frozen=True)
class FilterState:
    """Decoder-side state: time index, estimate, predicted error covariance."""

    t: int
    S_hat: Matrix
    P: Matrix
    accumulated_power: float = 0.0


@dataclass(frozen=True)
class SimulationReport:
    """Per-step series plus tail summaries from a closed-loop run.

    trace_P is the analytic covariance trace of the implemented filter;
    empirical_mse and empirical_power average over replicas. Entries after
    a divergence marker are NaN. d_estimate and power_estimate average the
    tail window (last 20% of the horizon).
    """

    trace_P: tuple
    empirical_mse: tuple
    empirical_power: tuple
    replicas: int
    horizon: int
    diverged: bool
    divergence_step: int = None
    d_estimate: float = math.nan
    power_estimate: float = math.nan


def effective_observation(channel):
    """(H_e, R_e): the observation map seen by the reduced scalar loop.

    MISO transmits H' times a scalar, so the loop sees gain 1 and noise r.
    SIMO keeps the m x 1 column H and the full covariance R.
    """
    if channel.kind == MISO:
        return Matrix([[1.0]]), Matrix([[channel.r]])
    return channel.H, channel.R


def snr_scalar(channel):
    """s = p * H_e' R_e^{-1} H_e, the effective SNR of the reduced loop."""
    h_e, r_e = effective_observation(channel)
    quad = (h_e.a.T @ matlib.lu_solve(r_e, h_e).a).item()
    return channel.power_budget * quad


def encode(design, channel, P, error):
    """Channel input for one step given covariance P and error vector.

    The transmitted scalar is u = Gamma P^{-1} error (or w' error when the
    design carries an anchor weighting), rescaled in PowerNormalized mode so
    that E[u^2] = p under Cov(error) = P. MISO returns the n x 1 input
    H' u; SIMO returns the 1 x 1 scalar input.
    """
    k = design.k
    e = np.asarray(error.a if isinstance(error, Matrix) else error, dtype=float).reshape(-1)
    if e.shape[0] != k:
        raise DimensionMismatch(f"error must have length {k}, got {e.shape[0]}")
    if design.mode == POWER_NORMALIZED and design.weighting is not None:
        w = design.weighting.a.reshape(-1)
        den = float(w @ P.a @ w)
        if den <= 0.0:
            raise DegenerateDirection("w' P w <= 0, nothing to normalize against")
        u = math.sqrt(design.power_budget / den) * float(w @ e)
    else:
        try:
            pinv_g = matlib.lu_solve(P, design.Gamma.T).a.reshape(-1)
        except SingularMatrix:
            raise NotPD("P must be PD for the inverse-weighted encoder")
        u = float(pinv_g @ e)
        if design.mode == POWER_NORMALIZED:
            g = float(design.Gamma.a.reshape(-1) @ pinv_g)
            if g <= 0.0:
                raise DegenerateDirection("Gamma P^{-1} Gamma' <= 0, nothing to normalize against")
            u *= math.sqrt(design.power_budget / g)
    if channel.kind == MISO:
        return Matrix(channel.H.a.T * u)
    return Matrix([[u]])


def kalman_gain(A, Gamma, H, R, P):
    """K = A Gamma' H'(H Gamma P^{-1} Gamma' H' + R)^{-1}.

    H and R are the effective observation map: MISO callers pass H=[[1]],
    R=[[r]] (the reduced loop after beamforming), SIMO callers pass the
    m x 1 column H and covariance R.
    """
    a, gam, h, r, p = A.a, Gamma.a, H.a, R.a, P
    try:
        pinv_g = matlib.lu_solve(p, Matrix(gam.T)).a
    except SingularMatrix:
        raise NotPD("P must be PD")
    g = (gam @ pinv_g).item()
    s_in = r + g * (h @ h.T)
    try:
        s_inv_h = matlib.lu_solve(Matrix(s_in), Matrix(h)).a
    except SingularMatrix:
        raise SingularInnovationCovariance("innovation covariance is singular")
    return Matrix(a @ gam.T @ s_inv_h.T)


def decoder_update(state, A, K, y_observed, y_predicted):
    """One estimate update: S_hat' = A S_hat + K (y_observed - y_predicted).

    For the innovations encoder y_predicted is zero (the transmitted
    innovation has zero mean given the past), but a general value is
    accepted. P is advanced separately by riccati_step.
    """
    a, kk = A.a, K.a
    y = np.asarray(y_observed.a if isinstance(y_observed, Matrix) else y_observed, dtype=float).reshape(-1)
    yp = np.asarray(y_predicted.a if isinstance(y_predicted, Matrix) else y_predicted, dtype=float).reshape(-1)
    s = state.S_hat.a.reshape(-1)
    if y.shape != yp.shape or kk.shape[1] != y.shape[0] or kk.shape[0] != s.shape[0]:
        raise DimensionMismatch(
            f"K {kk.shape}, y {y.shape}, y_pred {yp.shape}, S_hat {s.shape} do not conform"
        )
    s_next = a @ s + kk @ (y - yp)
    return FilterState(state.t + 1, Matrix.col(s_next), state.P, state.accumulated_power)


def riccati_step(A, Q, Gamma, H, R, P, mode, power=None, weighting=None):
    """One step of the induced error-covariance recursion.

    Strict mode applies
        P' = A P A' + Q - A Gamma' H'(R + H Gamma P^{-1} Gamma' H')^{-1} H Gamma A'
    verbatim. PowerNormalized mode rescales Gamma by beta with
    beta^2 = p / (Gamma P^{-1} Gamma'), which collapses the correction to
    (s/(1+s)) * A Gamma' Gamma A' / (Gamma P^{-1} Gamma') with s the
    effective SNR; `power` must be supplied. When `weighting` w is given
    the correction is anchored at that direction instead:
    (s/(1+s)) * (A P w)(A P w)' / (w' P w).

    H and R follow the effective-observation convention of kalman_gain.
    Gamma = 0 gives the open-loop update in both modes. Raises NotPD when
    P fails the PD check.
    """
    a, q, gam = A.a, Q.a, Gamma.a
    if matlib.psd_check(P) != matlib.PD:
        raise NotPD("P must be PD")
    p_arr = P.a
    open_loop = a @ p_arr @ a.T + q
    if matlib.max_abs(Gamma) == 0.0:
        return Matrix(0.5 * (open_loop + open_loop.T))
    if mode == STRICT:
        h, r = H.a, R.a
        pinv_g = matlib.lu_solve(P, Matrix(gam.T)).a
        g = (gam @ pinv_g).item()
        s_in = r + g * (h @ h.T)
        try:
            s_inv_hg = matlib.lu_solve(Matrix(s_in), Matrix(h @ gam @ a.T)).a
        except SingularMatrix:
            raise SingularInnovationCovariance("innovation covariance is singular")
        corr = a @ gam.T @ h.T @ s_inv_hg
    elif mode == POWER_NORMALIZED:
        if power is None:
            raise InvalidArgument("PowerNormalized mode needs the power budget")
        h, r = H.a, R.a
        s = float(power) * (h.T @ matlib.lu_solve(R, H).a).item()
        if weighting is not None:
            w = weighting.a.reshape(-1)
            pw = p_arr @ w
            den = float(w @ pw)
            if den <= 0.0:
                raise DegenerateDirection("w' P w <= 0")
            v = a @ pw
            corr = (s / (1.0 + s)) * np.outer(v, v) / den
        else:
            pinv_g = matlib.lu_solve(P, Matrix(gam.T)).a
            g = (gam @ pinv_g).item()
            if g <= 0.0:
                raise DegenerateDirection("Gamma P^{-1} Gamma' <= 0")
            v = a @ gam.T
            corr = (s / (1.0 + s)) * (v @ v.T) / g
    else:
        raise InvalidArgument(f"unknown mode {mode!r}")
    out = open_loop - corr
    return Matrix(0.5 * (out + out.T))


# ---------------------------------------------------------------------------
# Closed-loop simulation
# ---------------------------------------------------------------------------


def _run_batch(source, channel, design, streams, horizon, gain_perturb=None,
               divergence_factor=DIVERGENCE_FACTOR):
    """Vectorized closed loop over a batch of replicas.

    Propagates the estimation error e_t = S_t - S_hat_t directly:
        e_{t+1} = A e_t + W_t - K_t y_t,    y_t = C_t e_t + Z_t.
    Materializing S_t and S_hat_t separately is algebraically identical but
    numerically fatal for unstable sources: both grow like |det A_u|^t and
    their rounding error overtakes the O(sqrt(trace P)) difference within a
    hundred steps. The covariance is propagated in Joseph form with the
    actually-applied gain, which stays valid when gain_perturb modifies K.

    Returns (trace_P, mse, power, diverged, div_step); series have length
    `horizon` with NaN after a divergence marker.
    """
    k = source.k
    n_rep = len(streams)
    a = source.A.a
    q = source.Q.a
    l_q = matlib.chol_psd_factor(source.Q).a
    h_e, r_e = effective_observation(channel)
    he = h_e.a  # m x 1
    re = r_e.a
    m = he.shape[0]
    l_r = matlib.chol_psd_factor(r_e).a
    p_budget = design.power_budget
    gam = design.Gamma.a.reshape(-1)
    silent = matlib.max_abs(design.Gamma) == 0.0
    anchor = design.weighting.a.reshape(-1) if design.weighting is not None else None
    hnorm2 = (channel.H.a.reshape(-1) @ channel.H.a.reshape(-1)).item() if channel.kind == MISO else 1.0

    # per-replica draws: e_0 = S_0 (since S_hat_0 = 0), then one
    # (horizon x (m + k)) standard-normal block consumed as Z_t then W_t
    err = np.empty((n_rep, k))
    zs = np.empty((n_rep, horizon, m))
    ws = np.empty((n_rep, horizon, k))
    for i, st in enumerate(streams):
        err[i] = l_q @ st.normals(k)
        block = st.normals(horizon, m + k)
        zs[i] = block[:, :m] @ l_r.T
        ws[i] = block[:, m:] @ l_q.T

    q_trace = float(np.trace(q))
    threshold = divergence_factor * (q_trace if q_trace > 0.0 else 1.0)

    trace_p = np.full(horizon, np.nan)
    mse = np.full(horizon, np.nan)
    power = np.full(horizon, np.nan)
    diverged = False
    div_step = None

    p_cov = 0.5 * (q + q.T)
    for t in range(horizon):
        trace_p[t] = np.trace(p_cov)
        mse[t] = float(np.mean(np.einsum("ij,ij->i", err, err)))
        if trace_p[t] > threshold or not np.isfinite(trace_p[t]):
            diverged = True
            div_step = t
            power[t] = np.nan
            break

        # measurement row for this step (may be degenerate: transmit nothing)
        c_row = None
        if not silent:
            if design.mode == POWER_NORMALIZED and anchor is not None:
                den = float(anchor @ p_cov @ anchor)
                if den > 0.0:
                    c_row = math.sqrt(p_budget / den) * anchor
            else:
                try:
                    pinv_g = matlib._lu_solve_arrays(p_cov, gam.reshape(-1, 1)).reshape(-1)
                except SingularMatrix:
                    pinv_g = None
                if pinv_g is not None:
                    g = float(gam @ pinv_g)
                    if g > 0.0:
                        beta = math.sqrt(p_budget / g) if design.mode == POWER_NORMALIZED else 1.0
                        c_row = beta * pinv_g

        if c_row is None:
            power[t] = 0.0
            err = err @ a.T + ws[:, t, :]
            p_cov = a @ p_cov @ a.T + q
        else:
            u = err @ c_row  # transmitted scalar per replica
            power[t] = float(np.mean(u * u)) * hnorm2
            y = u[:, None] * he.reshape(-1)[None, :] + zs[:, t, :]  # n_rep x m
            c_full = he @ c_row[None, :]  # m x k
            quad = float(c_row @ p_cov @ c_row)
            s_in = quad * (he @ he.T) + re
            gain = matlib._lu_solve_arrays(s_in, (c_full @ p_cov @ a.T)).T  # k x m
            if gain_perturb is not None:
                gain = np.asarray(gain_perturb(gain.copy(), t), dtype=float)
            err = err @ a.T + ws[:, t, :] - y @ gain.T
            a_cl = a - gain @ c_full
            p_cov = a_cl @ p_cov @ a_cl.T + q + gain @ re @ gain.T
        p_cov = 0.5 * (p_cov + p_cov.T)

    return trace_p, mse, power, diverged, div_step


def _finish_report(trace_p, mse, power, replicas, horizon, diverged, div_step):
    valid = ~np.isnan(mse)
    tail = max(1, int(math.ceil(TAIL_FRACTION * horizon)))
    idx = np.arange(horizon) >= horizon - tail
    sel = idx & valid
    d_est = float(np.mean(mse[sel])) if sel.any() else math.nan
    p_est = float(np.mean(power[sel])) if sel.any() else math.nan
    return SimulationReport(
        trace_P=tuple(float(v) for v in trace_p),
        empirical_mse=tuple(float(v) for v in mse),
        empirical_power=tuple(float(v) for v in power),
        replicas=replicas,
        horizon=horizon,
        diverged=diverged,
        divergence_step=div_step,
        d_estimate=d_est,
        power_estimate=p_est,
    )


def simulate_trajectory(source, channel, design, rng, horizon,
                        divergence_factor=DIVERGENCE_FACTOR):
    """One closed-loop sample path; per-step squared error, power, trace P.

    Samples S_0 ~ N(0, Q), then per step encodes the current error, passes
    it through the channel, applies the Kalman update, and advances the
    source. Divergence (trace P_t beyond 1e9 x trace Q) is recorded in the
    report, not raised.
    """
    if horizon < 1:
        raise InvalidArgument("horizon must be at least 1")
    trace_p, mse, power, diverged, div_step = _run_batch(
        source, channel, design, [rng], horizon, divergence_factor=divergence_factor
    )
    return _finish_report(trace_p, mse, power, 1, horizon, diverged, div_step)


def monte_carlo(source, channel, design, seed, horizon, replicas, gain_perturb=None,
                divergence_factor=DIVERGENCE_FACTOR):
    """Average squared error and power over independent replicas.

    Each replica gets its own RNG stream derived from the seed, so the
    result does not depend on scheduling or batching. The analytic trace
    series comes from the same covariance recursion the filter applies
    (riccati_step agrees on its domain). The asymptotic MSE estimate is the
    tail-window mean.
    """
    if replicas < 1:
        raise InvalidArgument("replicas must be at least 1")
    if horizon < 1:
        raise InvalidArgument("horizon must be at least 1")
    root = RngState(seed)
    streams = [root.stream(i) for i in range(replicas)]
    trace_p, mse, power, diverged, div_step = _run_batch(
        source, channel, design, streams, horizon, gain_perturb=gain_perturb,
        divergence_factor=divergence_factor,
    )
    return _finish_report(trace_p, mse, power, replicas, horizon, diverged, div_step)
