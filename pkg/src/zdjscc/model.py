"""Source and channel model types, assumption checking, seeded sampling.

The source is a linear Gauss-Markov system S_{t+1} = A S_t + W_t supplied in
canonical block form: a stable block A_s (any real matrix with spectral
radius below 1) and a diagonal unstable block given by its eigenvalues.
Models are immutable; anything that can be wrong with a well-formed model is
reported by validate_model rather than raised, so callers can show users the
full list of violated assumptions in one pass.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import matlib
from .errors import DimensionMismatch, InvalidArgument, InvalidModel
from .matlib import Matrix

CLASS_TOL = 1e-6  # eigenvalue classification margin around |lambda| = 1
MISO = "MISO"
SIMO = "SIMO"

_M64 = (1 << 64) - 1


def _splitmix64(x):
    """One splitmix64 output step; standard finalizer constants."""
    x = (x + 0x9E3779B97F4A7C15) & _M64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _M64
    return (z ^ (z >> 31)) & _M64


class RngState:
    """Deterministic Gaussian source with 64-bit seed and splittable streams.

    Wraps a PCG64 generator. Independent per-replica streams come from
    stream(i), which reseeds with splitmix64(seed XOR i) so replicas are
    decorrelated no matter how the caller numbers them. The draw counter
    records how many variates have been issued; it is bookkeeping only.
    """

    __slots__ = ("seed", "counter", "_gen")

    def __init__(self, seed):
        seed = int(seed)
        if not (0 <= seed <= _M64):
            raise InvalidArgument("seed must fit in 64 unsigned bits")
        self.seed = seed
        self.counter = 0
        self._gen = np.random.Generator(np.random.PCG64(seed))

    def stream(self, index):
        """Independent child stream for replica `index`."""
        if index < 0:
            raise InvalidArgument("stream index must be nonnegative")
        return RngState(_splitmix64(self.seed ^ int(index)))

    def normals(self, *shape):
        """Standard normal draws; a size-n batch equals n sequential draws."""
        out = self._gen.standard_normal(shape)
        self.counter += int(np.prod(shape, dtype=int)) if shape else 1
        return out


@dataclass(frozen=True)
class SourceModel:
    """Gauss-Markov source in canonical block form.

    A_s: stable block (possibly 0x0), A_u_diag: real unstable eigenvalues
    (possibly empty), Q: k x k process-noise covariance with
    k = dim(A_s) + len(A_u_diag). The initial state is S_0 ~ N(0, Q).
    """

    A_s: Matrix
    A_u_diag: tuple
    Q: Matrix

    def __post_init__(self):
        a_s = self.A_s
        if a_s.rows != a_s.cols:
            raise InvalidModel(f"A_s must be square, got {a_s.shape}")
        object.__setattr__(self, "A_u_diag", tuple(float(v) for v in self.A_u_diag))
        k = a_s.rows + len(self.A_u_diag)
        if self.Q.shape != (k, k):
            raise InvalidModel(f"Q must be {k}x{k}, got {self.Q.shape}")

    @property
    def k_s(self):
        return self.A_s.rows

    @property
    def k_u(self):
        return len(self.A_u_diag)

    @property
    def k(self):
        return self.k_s + self.k_u

    @property
    def A_u(self):
        return Matrix.diag(self.A_u_diag)

    @property
    def A(self):
        a = np.zeros((self.k, self.k))
        ks = self.k_s
        a[:ks, :ks] = self.A_s.a
        a[ks:, ks:] = np.diag(self.A_u_diag)
        return Matrix(a)

    def det_A_u(self):
        return float(np.prod(self.A_u_diag)) if self.A_u_diag else 1.0

    # covariance blocks in the stable/unstable split
    def Q_ss(self):
        return Matrix(self.Q.a[: self.k_s, : self.k_s])

    def Q_su(self):
        return Matrix(self.Q.a[: self.k_s, self.k_s :])

    def Q_uu(self):
        return Matrix(self.Q.a[self.k_s :, self.k_s :])


@dataclass(frozen=True)
class ChannelModel:
    """AWGN channel with perfect feedback, MISO or SIMO.

    MISO: H is a 1 x n row with unit norm, scalar noise variance r.
    SIMO: H is an m x 1 column, noise covariance R (m x m).
    power_budget is the long-term average transmit power p.
    """

    kind: str
    H: Matrix
    power_budget: float
    r: float = None
    R: Matrix = None

    def __post_init__(self):
        if self.kind not in (MISO, SIMO):
            raise InvalidModel(f"channel kind must be MISO or SIMO, got {self.kind!r}")
        if self.kind == MISO:
            if self.H.rows != 1:
                raise InvalidModel(f"MISO H must be a 1xn row, got {self.H.shape}")
            if self.r is None:
                raise InvalidModel("MISO channel requires scalar noise variance r")
            if self.R is not None:
                raise InvalidModel("MISO channel takes r, not a covariance R")
            object.__setattr__(self, "r", float(self.r))
        else:
            if self.H.cols != 1:
                raise InvalidModel(f"SIMO H must be an mx1 column, got {self.H.shape}")
            if self.R is None:
                raise InvalidModel("SIMO channel requires noise covariance R")
            if self.r is not None:
                raise InvalidModel("SIMO channel takes R, not a scalar r")
            m = self.H.rows
            if self.R.shape != (m, m):
                raise InvalidModel(f"R must be {m}x{m}, got {self.R.shape}")
        object.__setattr__(self, "power_budget", float(self.power_budget))

    @property
    def n_inputs(self):
        return self.H.cols if self.kind == MISO else 1

    @property
    def m_outputs(self):
        return 1 if self.kind == MISO else self.H.rows


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    margin: float
    detail: str = ""


@dataclass(frozen=True)
class ValidationReport:
    checks: tuple

    @property
    def valid(self):
        return all(c.passed for c in self.checks)

    def failures(self):
        return [c for c in self.checks if not c.passed]

    def lines(self):
        out = []
        for c in self.checks:
            mark = "ok  " if c.passed else "FAIL"
            margin = "n/a" if math.isinf(c.margin) else f"{c.margin:.6g}"
            line = f"[{mark}] {c.name}: margin {margin}"
            if c.detail:
                line += f" ({c.detail})"
            out.append(line)
        return out


def controllability_gramian(A, Q, steps):
    """G = sum_{i=0}^{steps-1} A^i Q (A^i)', the steps-step reachability Gramian."""
    a = A.a
    q = Q.a
    k = a.shape[0]
    if a.shape[1] != k or q.shape != (k, k):
        raise DimensionMismatch(f"A {a.shape} and Q {q.shape} must be square and matching")
    if steps < 1:
        raise InvalidArgument("steps must be at least 1")
    g = np.zeros((k, k))
    ai = np.eye(k)
    for _ in range(steps):
        g += ai @ q @ ai.T
        ai = a @ ai
    return Matrix(0.5 * (g + g.T))


def validate_model(source, channel, class_tol=CLASS_TOL):
    """Check the standing assumptions; every failure is reported, not raised.

    Runs the eigenvalue classification of the two blocks, the nonresonance
    condition lambda_i * lambda_j != 1 over all eigenvalue pairs, k-step
    controllability of (A, Q), positive semidefiniteness of Q, and the
    channel normalizations. The report carries a measured margin per check.
    """
    checks = []

    eig_s = matlib.eigenvalues(source.A_s)
    if eig_s:
        margin_s = (1.0 - class_tol) - max(abs(l) for l in eig_s)
    else:
        margin_s = math.inf
    checks.append(
        CheckResult(
            "stable block spectral radius below 1",
            margin_s >= 0.0,
            margin_s,
            f"k_s={source.k_s}",
        )
    )

    if source.A_u_diag:
        margin_u = min(abs(l) for l in source.A_u_diag) - (1.0 + class_tol)
    else:
        margin_u = math.inf
    checks.append(
        CheckResult(
            "unstable eigenvalues outside the unit circle",
            margin_u >= 0.0,
            margin_u,
            f"k_u={source.k_u}",
        )
    )

    if source.k_u >= 2:
        gaps = [
            abs(source.A_u_diag[i] - source.A_u_diag[j])
            for i in range(source.k_u)
            for j in range(i + 1, source.k_u)
        ]
        sep = min(gaps)
        checks.append(
            CheckResult(
                "unstable eigenvalues pairwise distinct",
                sep > class_tol,
                sep,
                "needed for the PD guarantee of the unstable-block construction",
            )
        )

    eig_all = list(eig_s) + [complex(l) for l in source.A_u_diag]
    if eig_all:
        res = min(abs(li * lj - 1.0) for li in eig_all for lj in eig_all)
    else:
        res = math.inf
    checks.append(
        CheckResult(
            "eigenvalue products stay away from 1",
            res > class_tol,
            res,
            "min |lambda_i lambda_j - 1|",
        )
    )

    q_verdict = None
    try:
        q_verdict = matlib.psd_check(source.Q)
    except matlib.NotSymmetric:
        checks.append(CheckResult("Q symmetric PSD", False, -math.inf, "not symmetric"))
    if q_verdict is not None:
        q_eigs = [l.real for l in matlib.eigenvalues(source.Q)]
        checks.append(
            CheckResult(
                "Q symmetric PSD",
                q_verdict in (matlib.PD, matlib.PSD),
                min(q_eigs) if q_eigs else math.inf,
                f"psd_check: {q_verdict}",
            )
        )

    if source.k > 0 and q_verdict is not None:
        G = controllability_gramian(source.A, source.Q, source.k)
        shift = 1e-10 * matlib.trace(G) / source.k if matlib.trace(G) > 0 else 0.0
        verdict = matlib.psd_check(G, shift=shift)
        g_eigs = [l.real for l in matlib.eigenvalues(G)]
        checks.append(
            CheckResult(
                "(A, Q) controllable (k-step Gramian PD)",
                verdict == matlib.PD,
                min(g_eigs) if g_eigs else math.inf,
                f"psd_check: {verdict}",
            )
        )

    if channel.kind == MISO:
        hnorm = math.sqrt((channel.H.a @ channel.H.a.T).item())
        dev = abs(hnorm - 1.0)
        checks.append(CheckResult("MISO beamforming row has unit norm", dev <= 1e-10, dev, f"|H|={hnorm:.12g}"))
        checks.append(CheckResult("noise variance positive", channel.r > 0.0, channel.r, f"r={channel.r:.6g}"))
    else:
        try:
            verdict = matlib.psd_check(channel.R)
        except matlib.NotSymmetric:
            verdict = "NotSymmetric"
        r_eigs = [l.real for l in matlib.eigenvalues(channel.R)] if verdict != "NotSymmetric" else [-math.inf]
        checks.append(
            CheckResult("SIMO noise covariance PD", verdict == matlib.PD, min(r_eigs), f"psd_check: {verdict}")
        )

    checks.append(
        CheckResult(
            "power budget nonnegative",
            channel.power_budget >= 0.0,
            channel.power_budget,
            f"p={channel.power_budget:.6g}",
        )
    )

    return ValidationReport(tuple(checks))


def sample_mvn(rng, Sigma):
    """One draw from N(0, Sigma) as a column Matrix.

    Uses the PSD-tolerant Cholesky factor, so degenerate covariances are
    fine (a zero Sigma gives the zero vector). Advances rng by Sigma.rows
    standard normals.
    """
    L = matlib.chol_psd_factor(Sigma)
    g = rng.normals(L.rows)
    return Matrix.col(L.a @ g)
