"""Shared model factories for the test suite."""

import numpy as np

from zdjscc import MISO, SIMO, ChannelModel, Matrix, SourceModel, validate_model

EMPTY = Matrix(np.zeros((0, 0)))


def scalar_source(a=2.0, q=1.0):
    """Unstable scalar source (k_s = 0, k_u = 1)."""
    return SourceModel(EMPTY, (a,), Matrix([[q]]))


def stable_source(a=0.5, q=1.0):
    return SourceModel(Matrix([[a]]), (), Matrix([[q]]))


def miso(p, r=1.0, h=None):
    hm = Matrix([[1.0]]) if h is None else Matrix(np.asarray(h, dtype=float).reshape(1, -1))
    return ChannelModel(MISO, hm, p, r=r)


def two_mode_source():
    """A_u = diag(1.2, 2.0), Q = I; the smallest genuinely vector case."""
    return SourceModel(EMPTY, (1.2, 2.0), Matrix(np.eye(2)))


def random_validated_model(gen, feasible):
    """Random (source, channel) passing validate_model, with the requested
    feasibility verdict at a comfortable relative margin (>= 5% of det^2,
    absolute margin > 1e-2). Mixes MISO and SIMO, k <= 3, signed unstable
    eigenvalues, random stable blocks and process noise."""
    while True:
        k_u = int(gen.integers(1, 4))
        k_s = int(gen.integers(0, 4 - k_u))
        k = k_s + k_u

        mags = np.sort(gen.uniform(1.05, 2.2, size=k_u))
        if k_u > 1 and np.min(np.diff(mags)) < 1e-2:
            continue
        a_u = tuple(float(m * s) for m, s in zip(mags, gen.choice([-1.0, 1.0], size=k_u)))

        if k_s:
            b = gen.standard_normal((k_s, k_s))
            radius = max(abs(v) for v in np.linalg.eigvals(b))
            a_s = Matrix(b * (gen.uniform(0.2, 0.85) / max(radius, 1e-9)))
        else:
            a_s = EMPTY

        b = gen.standard_normal((k, k))
        q = Matrix(b @ b.T + 0.5 * np.eye(k))
        source = SourceModel(a_s, a_u, q)

        det_sq = float(np.prod(np.abs(a_u))) ** 2
        if feasible:
            delta = gen.uniform(0.05, 0.5)
            s = det_sq * (1.0 + delta) - 1.0
        else:
            delta_max = 0.9 * (1.0 - 1.0 / det_sq)
            if delta_max < 0.05:
                continue
            delta = gen.uniform(0.05, min(0.5, delta_max))
            s = det_sq * (1.0 - delta) - 1.0
        if s <= 1e-6:
            continue

        if gen.random() < 0.5:
            r = gen.uniform(0.3, 3.0)
            n = int(gen.integers(1, 4))
            h = gen.standard_normal(n)
            h /= np.linalg.norm(h)
            channel = ChannelModel(MISO, Matrix(h.reshape(1, -1)), s * r, r=r)
        else:
            m = int(gen.integers(1, 4))
            h = Matrix(gen.standard_normal((m, 1)))
            b = gen.standard_normal((m, m))
            rr = Matrix(b @ b.T + 0.5 * np.eye(m))
            quad = float((h.a.T @ np.linalg.solve(rr.a, h.a))[0, 0])
            if quad < 1e-6:
                continue
            channel = ChannelModel(SIMO, h, s / quad, R=rr)

        if validate_model(source, channel).valid:
            return source, channel
