"""Capacity thresholds, DARE fixed points, and encoder design certificates.

The feasibility boundary for a source with unstable eigenvalue product
det A_u is 1 + s > (det A_u)^2, where s is the effective SNR of the channel
(p/r for MISO after beamforming, p H'R^{-1}H for SIMO). Everything in this
module is organized around certifying that inequality constructively: build
the power-slack matrix J block by block, pick the unstable-block scale alpha
so J is PSD, and hand the resulting fixed-point covariance to the coder.

Sign conventions: J = P - Gamma'Gamma/p, so J >= 0 certifies that the
designed fixed point carries no more than the budgeted power.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import matlib
from .coder import POWER_NORMALIZED, STRICT, EncoderDesign, effective_observation, riccati_step
from .errors import CertificateFailure, InvalidArgument
from .matlib import Matrix
from .model import MISO, CheckResult, ValidationReport

FEASIBLE = "Feasible"
INFEASIBLE = "Infeasible"

CONVERGED = "Converged"
DIVERGED = "Diverged"
OSCILLATING = "Oscillating"

DARE_TOL = 1e-9
DARE_MAX_ITER = 100000
BISECT_REL_WIDTH = 0.01
MAX_DOUBLINGS = 60


def effective_snr_capacity(channel):
    """(s, C_nats, C_bits) for the channel.

    MISO: s = p/r. SIMO: s = p H'R^{-1}H, and the capacity is evaluated both
    as 0.5 log(1+s) and as 0.5 log det(R + pHH')/det R; the matrix
    determinant lemma says these are equal, and the two routes must agree to
    1e-10 or something is numerically wrong.
    """
    p = channel.power_budget
    if channel.kind == MISO:
        s = p / channel.r
    else:
        h = channel.H.a
        quad = (h.T @ matlib.lu_solve(channel.R, channel.H).a).item()
        s = p * quad
        det_route = 0.5 * math.log(
            matlib.determinant(Matrix(channel.R.a + p * (h @ h.T))) / matlib.determinant(channel.R)
        )
        direct = 0.5 * math.log1p(s)
        if abs(det_route - direct) > 1e-10:
            raise matlib.NoConvergence(
                f"capacity routes disagree: {det_route!r} vs {direct!r}"
            )
    c_nats = 0.5 * math.log1p(s)
    return s, c_nats, c_nats / math.log(2.0)


def log_instability(source):
    """Sum of log max(1, |lambda|) over all eigenvalues of A (natural log)."""
    total = 0.0
    for lam in matlib.eigenvalues(source.A_s):
        total += math.log(max(1.0, abs(lam)))
    for lam in source.A_u_diag:
        total += math.log(max(1.0, abs(lam)))
    return total


def r_effective(channel):
    """Scalar noise level of the reduced loop: r for MISO, 1/(H'R^{-1}H) for SIMO."""
    if channel.kind == MISO:
        return channel.r
    h = channel.H.a
    return 1.0 / (h.T @ matlib.lu_solve(channel.R, channel.H).a).item()


@dataclass(frozen=True)
class Feasibility:
    status: str
    margin: float
    s: float
    det_au_sq: float

    @property
    def feasible(self):
        return self.status == FEASIBLE


def feasibility_check(source, channel):
    """Decide 1 + s > (det A_u)^2, strictly; margin = (1+s) - (det A_u)^2.

    An all-stable source is always Feasible, including at p = 0 and at
    margin exactly 0: nothing needs to be transmitted. With unstable modes
    present the inequality is strict, so margin 0 is Infeasible.
    """
    s, _, _ = effective_snr_capacity(channel)
    det_sq = source.det_A_u() ** 2
    margin = (1.0 + s) - det_sq
    if source.k_u == 0:
        return Feasibility(FEASIBLE, margin, s, det_sq)
    return Feasibility(FEASIBLE if margin > 0.0 else INFEASIBLE, margin, s, det_sq)


@dataclass(frozen=True)
class DareResult:
    status: str
    P: Matrix = None
    iterations: int = None
    t_blowup: int = None
    achieved_power: float = None


def dare_fixed_point(
    source, channel, design, mode=None, P0=None, max_iter=DARE_MAX_ITER,
    tol=DARE_TOL, divergence_factor=1e9,
):
    """Iterate the covariance recursion to a fixed point, or report failure.

    Stops Converged when successive iterates agree to tol (relative to
    max-norm), Diverged when trace exceeds divergence_factor x trace(Q),
    and Oscillating when max_iter passes without either. On convergence the
    achieved power is Gamma P^{-1} Gamma' in Strict mode and the budget p
    in PowerNormalized mode (0 when nothing is transmitted).
    """
    mode = design.mode if mode is None else mode
    a_m = source.A
    q_m = source.Q
    h_e, r_e = effective_observation(channel)
    if P0 is None:
        P = q_m if matlib.psd_check(q_m) == matlib.PD else Matrix(q_m.a + 1e-9 * np.eye(source.k))
    else:
        P = P0
    q_trace = matlib.trace(q_m)
    threshold = divergence_factor * (q_trace if q_trace > 0.0 else 1.0)
    weighting = design.weighting if mode == POWER_NORMALIZED else None
    for it in range(1, max_iter + 1):
        P_next = riccati_step(
            a_m, q_m, design.Gamma, h_e, r_e, P,
            mode, power=design.power_budget, weighting=weighting,
        )
        tr = matlib.trace(P_next)
        if not math.isfinite(tr) or tr > threshold:
            return DareResult(DIVERGED, t_blowup=it)
        if matlib.max_abs(P_next - P) <= tol * (1.0 + matlib.max_abs(P)):
            P_next = Matrix(0.5 * (P_next.a + P_next.a.T))
            if matlib.max_abs(design.Gamma) == 0.0:
                power = 0.0
            elif mode == STRICT:
                pinv_g = matlib.lu_solve(P_next, design.Gamma.T)
                power = (design.Gamma.a @ pinv_g.a).item()
            else:
                power = design.power_budget
            return DareResult(CONVERGED, P=P_next, iterations=it, achieved_power=power)
        P = P_next
    return DareResult(OSCILLATING, P=P, iterations=max_iter)


def solve_M(A_u_diag):
    """M solving M = A_u^{-1} M A_u^{-T} + 11'; entrywise lambda_i lambda_j/(lambda_i lambda_j - 1).

    Computed through the generic Stein solver rather than the entrywise
    formula so the closed form stays available as an independent check.
    """
    lam = [float(v) for v in A_u_diag]
    if any(abs(v) <= 1.0 for v in lam):
        raise InvalidArgument("solve_M needs all |lambda| > 1")
    k = len(lam)
    if k == 0:
        return Matrix(np.zeros((0, 0)))
    ainv = Matrix.diag([1.0 / v for v in lam])
    return matlib.stein_solve(ainv, ainv, Matrix(np.ones((k, k))))


def _gamma_terms(source, channel, Gamma):
    """W = Q - Gamma'Gamma/p + A Gamma'Gamma A'/(p(1+s)), the Stein RHS for J."""
    p = channel.power_budget
    q = source.Q.a
    if matlib.max_abs(Gamma) == 0.0:
        return Matrix(q)
    if p <= 0.0:
        raise InvalidArgument("nonzero Gamma needs a positive power budget")
    s, _, _ = effective_snr_capacity(channel)
    a = source.A.a
    gg = Gamma.a.T @ Gamma.a
    w = q - gg / p + (a @ gg @ a.T) / (p * (1.0 + s))
    return Matrix(0.5 * (w + w.T))


def reduced_J_solve(source, channel, Gamma):
    """The unique J with J = AJA' + Q - Gamma'Gamma/p + A Gamma'Gamma A'/(p(1+s))."""
    return matlib.stein_solve(source.A, source.A, _gamma_terms(source, channel, Gamma))


@dataclass(frozen=True)
class DesignCertificate:
    """Everything needed to re-verify a design independently.

    J is the power-slack matrix at the certified Gamma (for infeasible
    certificates, at the reference scale alpha = 1 so the violated check is
    still visible). N is the alpha-free unstable-block kernel
    M/(r_eff + p) - 11'/p whose positive definiteness is exactly the
    capacity condition; it is None when p = 0 makes it undefined.
    """

    J: Matrix
    J_ss: Matrix
    J_su: Matrix
    J_uu: Matrix
    M: Matrix
    N: Matrix
    schur_margin: float
    capacity_margin: float
    alpha: float
    feasible: bool
    violated: str
    source: object
    channel: object
    Gamma: Matrix


def _assemble(J_ss, J_su, J_uu):
    ks = J_ss.shape[0]
    ku = J_uu.shape[0]
    j = np.zeros((ks + ku, ks + ku))
    j[:ks, :ks] = J_ss
    j[:ks, ks:] = J_su
    j[ks:, :ks] = J_su.T
    j[ks:, ks:] = J_uu
    return Matrix(j)


def _schur_complement(J_ss, J_su, J_uu):
    if J_ss.shape[0] == 0:
        return Matrix(J_uu)
    x = matlib.lu_solve(Matrix(J_ss), Matrix(J_su)).a
    s = J_uu - J_su.T @ x
    return Matrix(0.5 * (s + s.T))


def _min_real_eig(S):
    eigs = matlib.eigenvalues(S)
    return min(l.real for l in eigs) if eigs else math.inf


def design_gamma(source, channel, rel_width=BISECT_REL_WIDTH):
    """Construct Gamma = [0 | alpha 1'] and its feasibility certificate.

    Nothing is sent about the stable components. The stable and cross
    blocks of J do not depend on Gamma, so they are solved once; the
    unstable block splits as Jhat_uu + alpha^2 N with N PD exactly when the
    capacity condition holds, and alpha is found by doubling then bisection
    (to 1% relative width) on the PSD check of the Schur complement. The
    returned design carries the anchor weighting P^{-1}Gamma' evaluated at
    the designed fixed point P = J + Gamma'Gamma/p.

    Infeasible models short-circuit: the design falls back to the reference
    scale with no anchor, and the certificate records which check failed.
    """
    p = channel.power_budget
    ks, ku = source.k_s, source.k_u
    feas = feasibility_check(source, channel)

    if ku == 0:
        gamma = Matrix(np.zeros((1, source.k)))
        J = reduced_J_solve(source, channel, gamma)
        empty = Matrix(np.zeros((0, 0)))
        cert = DesignCertificate(
            J=J, J_ss=J, J_su=Matrix(np.zeros((ks, 0))), J_uu=empty,
            M=empty, N=empty,
            schur_margin=math.inf, capacity_margin=feas.margin,
            alpha=0.0, feasible=True, violated=None,
            source=source, channel=channel, Gamma=gamma,
        )
        return EncoderDesign(gamma, POWER_NORMALIZED, p), cert

    # blocks that do not depend on the unstable-block scale
    q_ss, q_su, q_uu = source.Q_ss().a, source.Q_su().a, source.Q_uu().a
    lam = np.array(source.A_u_diag)
    j_ss = matlib.stein_solve(source.A_s, source.A_s, Matrix(q_ss)).a if ks else np.zeros((0, 0))
    j_su = (
        matlib.stein_solve(source.A_s, source.A_u, Matrix(q_su)).a
        if ks
        else np.zeros((0, ku))
    )
    jhat_uu = -q_uu / (np.outer(lam, lam) - 1.0)
    M = solve_M(source.A_u_diag)
    ones = np.ones((ku, ku))
    N = None
    if p > 0.0:
        N = Matrix(M.a / (r_effective(channel) + p) - ones / p)

    def schur_at(alpha_sq):
        j_uu = jhat_uu + alpha_sq * N.a
        return _schur_complement(j_ss, j_su, j_uu)

    gamma_ref = Matrix(np.concatenate([np.zeros(ks), np.ones(ku)]).reshape(1, -1))

    if not feas.feasible or N is None:
        # reference certificate at alpha = 1 so the violated check is visible;
        # at p = 0 the power terms are undefined, so fall back to Gamma = 0
        if N is None:
            gamma_used = Matrix(np.zeros((1, source.k)))
            j_uu_ref = jhat_uu
        else:
            gamma_used = gamma_ref
            j_uu_ref = jhat_uu + N.a
        schur = _schur_complement(j_ss, j_su, j_uu_ref)
        cert = DesignCertificate(
            J=_assemble(j_ss, j_su, j_uu_ref),
            J_ss=Matrix(j_ss), J_su=Matrix(j_su), J_uu=Matrix(j_uu_ref),
            M=M, N=N,
            schur_margin=_min_real_eig(schur),
            capacity_margin=feas.margin,
            alpha=None, feasible=False,
            violated="capacity condition 1 + s > (det A_u)^2",
            source=source, channel=channel, Gamma=gamma_used,
        )
        return EncoderDesign(gamma_used, POWER_NORMALIZED, p), cert

    def passes(alpha):
        return matlib.psd_check(schur_at(alpha * alpha)) in (matlib.PD, matlib.PSD)

    # find a passing power of two, then bisect down to 1% relative width
    alpha = 1.0
    if passes(alpha):
        lo = None
        for _ in range(MAX_DOUBLINGS):
            cand = alpha / 2.0
            if passes(cand):
                alpha = cand
            else:
                lo = cand
                break
        if lo is None:
            raise CertificateFailure("alpha shrank through 60 halvings and still passes")
        hi = alpha
    else:
        lo = alpha
        hi = None
        for _ in range(MAX_DOUBLINGS):
            lo_next = lo * 2.0
            if passes(lo_next):
                hi = lo_next
                break
            lo = lo_next
        if hi is None:
            raise CertificateFailure(
                "no passing alpha within 60 doublings despite a feasible model"
            )
    while hi - lo > rel_width * lo:
        mid = 0.5 * (lo + hi)
        if passes(mid):
            hi = mid
        else:
            lo = mid
    alpha = hi  # the passing endpoint

    j_uu = jhat_uu + alpha * alpha * N.a
    schur = _schur_complement(j_ss, j_su, j_uu)
    J = _assemble(j_ss, j_su, j_uu)
    gamma = Matrix(alpha * gamma_ref.a)
    p_bar = Matrix(J.a + (gamma.a.T @ gamma.a) / p)
    weighting = matlib.lu_solve(p_bar, gamma.T)
    design = EncoderDesign(gamma, POWER_NORMALIZED, p, weighting=weighting)
    cert = DesignCertificate(
        J=J, J_ss=Matrix(j_ss), J_su=Matrix(j_su), J_uu=Matrix(j_uu),
        M=M, N=N,
        schur_margin=_min_real_eig(schur),
        capacity_margin=feas.margin,
        alpha=alpha, feasible=True, violated=None,
        source=source, channel=channel, Gamma=gamma,
    )
    return design, cert


def certificate_check(cert):
    """Re-verify a certificate through independent routes.

    (a) the assembled J actually solves the reduced Lyapunov equation,
    (b) J_ss is PD, (c) the Schur complement is PSD, (d) the M identity
    1'M^{-1}1 = 1 - |det A_u|^{-2}, (e) the closed-form unstable kernel N
    equals a direct Stein solve of its defining equation. Failures are
    reported, not raised; an infeasible certificate is expected to fail (c).
    """
    source, channel = cert.source, cert.channel
    checks = []

    w = _gamma_terms(source, channel, cert.Gamma)
    resid = matlib.max_abs(cert.J - Matrix(source.A.a @ cert.J.a @ source.A.a.T) - w)
    checks.append(
        CheckResult("J solves the reduced Lyapunov equation", resid <= 1e-9, 1e-9 - resid,
                    f"residual {resid:.3e}")
    )

    if cert.J_ss.rows:
        verdict = matlib.psd_check(cert.J_ss)
        checks.append(
            CheckResult("J_ss positive definite", verdict == matlib.PD,
                        _min_real_eig(cert.J_ss), f"psd_check: {verdict}")
        )
    else:
        checks.append(CheckResult("J_ss positive definite", True, math.inf, "no stable block"))

    if cert.J_uu.rows:
        schur = _schur_complement(cert.J_ss.a, cert.J_su.a, cert.J_uu.a)
        verdict = matlib.psd_check(schur)
        checks.append(
            CheckResult("Schur complement J_uu - J_us J_ss^{-1} J_su PSD",
                        verdict in (matlib.PD, matlib.PSD),
                        _min_real_eig(schur), f"psd_check: {verdict}")
        )
    else:
        checks.append(
            CheckResult("Schur complement J_uu - J_us J_ss^{-1} J_su PSD", True, math.inf,
                        "no unstable block")
        )

    if cert.M.rows:
        ones = Matrix(np.ones((cert.M.rows, 1)))
        lhs = (ones.a.T @ matlib.lu_solve(cert.M, ones).a).item()
        rhs = 1.0 - abs(source.det_A_u()) ** -2
        dev = abs(lhs - rhs)
        checks.append(
            CheckResult("M identity 1'M^{-1}1 = 1 - |det A_u|^{-2}", dev <= 1e-8, 1e-8 - dev,
                        f"deviation {dev:.3e}")
        )
    else:
        checks.append(
            CheckResult("M identity 1'M^{-1}1 = 1 - |det A_u|^{-2}", True, math.inf,
                        "no unstable block")
        )

    if cert.N is not None and cert.N.rows:
        s, _, _ = effective_snr_capacity(channel)
        p = channel.power_budget
        lam = np.array(source.A_u_diag)
        ainv = Matrix.diag(1.0 / lam)
        a_vec = (1.0 / lam).reshape(-1, 1)
        rhs_mat = Matrix(np.outer(a_vec, a_vec) / p - np.ones((len(lam), len(lam))) / (p * (1.0 + s)))
        n_direct = matlib.stein_solve(ainv, ainv, rhs_mat)
        dev = matlib.max_abs(cert.N - n_direct)
        checks.append(
            CheckResult("closed-form N matches its defining equation", dev <= 1e-8, 1e-8 - dev,
                        f"deviation {dev:.3e}")
        )
    else:
        checks.append(
            CheckResult("closed-form N matches its defining equation", True, math.inf,
                        "not applicable")
        )

    return ValidationReport(tuple(checks))
