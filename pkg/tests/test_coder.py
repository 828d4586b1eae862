import math

import numpy as np
import pytest

from zdjscc import (
    POWER_NORMALIZED,
    STRICT,
    DegenerateDirection,
    EncoderDesign,
    FilterState,
    InvalidArgument,
    Matrix,
    NotPD,
    RngState,
    decoder_update,
    design_gamma,
    encode,
    kalman_gain,
    monte_carlo,
    riccati_step,
    simulate_trajectory,
    stein_solve,
)

from conftest import EMPTY, SourceModel, miso, scalar_source, stable_source, two_mode_source

H1 = Matrix([[1.0]])
R1 = Matrix([[1.0]])


def scalar_design(gamma=1.0, mode=STRICT, p=5.0):
    return EncoderDesign(Matrix([[gamma]]), mode, p)


# ---------------------------------------------------------------------------
# encode
# ---------------------------------------------------------------------------


def test_encode_zero_error():
    x = encode(scalar_design(), miso(5.0), Matrix([[1.0]]), [0.0])
    assert np.allclose(x.a, 0.0)


def test_encode_scalar_identity():
    x = encode(scalar_design(gamma=1.0, mode=STRICT), miso(5.0), Matrix([[1.0]]), [1.0])
    assert x.a.reshape(-1)[0] == pytest.approx(1.0)


def test_encode_miso_beamforms():
    # u = Gamma P^{-1} e = 2, channel input H' u with H = [0.6, 0.8]
    ch = miso(5.0, h=[0.6, 0.8])
    x = encode(scalar_design(gamma=2.0, mode=STRICT), ch, Matrix([[1.0]]), [1.0])
    assert np.allclose(x.a.reshape(-1), [1.2, 1.6])
    assert np.linalg.norm(x.a) == pytest.approx(2.0)


def test_encode_power_normalized_hits_budget_in_mean_square():
    # with error = P^{1/2} g the normalized scalar has E[u^2] = p; check the
    # deterministic identity beta^2 Gamma P^{-1} Gamma' = p via a unit error
    p = 7.0
    P = Matrix([[4.0]])
    x = encode(scalar_design(gamma=3.0, mode=POWER_NORMALIZED, p=p), miso(p), P, [2.0])
    # u = beta * Gamma P^{-1} e with beta = sqrt(p / (Gamma P^{-1} Gamma'))
    beta = math.sqrt(p / (9.0 / 4.0))
    assert x.a.reshape(-1)[0] == pytest.approx(beta * 3.0 / 4.0 * 2.0)


def test_encode_degenerate_direction():
    with pytest.raises(DegenerateDirection):
        encode(scalar_design(gamma=0.0, mode=POWER_NORMALIZED), miso(5.0), Matrix([[1.0]]), [1.0])


# ---------------------------------------------------------------------------
# kalman_gain / decoder_update
# ---------------------------------------------------------------------------


def test_kalman_gain_zero_gamma():
    k = kalman_gain(Matrix([[2.0]]), Matrix([[0.0]]), H1, R1, Matrix([[3.0]]))
    assert np.allclose(k.a, 0.0)


def test_kalman_gain_pinned_scalar():
    g = math.sqrt(15.0)
    k = kalman_gain(Matrix([[2.0]]), Matrix([[g]]), H1, R1, Matrix([[3.0]]))
    assert k.a[0, 0] == pytest.approx(2.0 * g / 6.0, rel=1e-12)


def test_kalman_gain_infinite_noise_limit():
    k = kalman_gain(Matrix([[2.0]]), Matrix([[1.0]]), H1, Matrix([[1e12]]), Matrix([[3.0]]))
    assert abs(k.a[0, 0]) <= 1e-5


def test_decoder_update_pinned():
    st = FilterState(0, Matrix.col([1.0]), Matrix([[1.0]]))
    out = decoder_update(st, Matrix([[2.0]]), Matrix([[0.0]]), [5.0], [0.0])
    assert out.S_hat.a[0, 0] == pytest.approx(2.0)
    out = decoder_update(st, Matrix([[2.0]]), Matrix([[0.7]]), [3.0], [3.0])
    assert out.S_hat.a[0, 0] == pytest.approx(2.0)
    out = decoder_update(st, Matrix([[2.0]]), Matrix([[0.5]]), [2.0], [0.0])
    assert out.S_hat.a[0, 0] == pytest.approx(3.0)
    assert out.t == 1


# ---------------------------------------------------------------------------
# riccati_step
# ---------------------------------------------------------------------------


def test_riccati_open_loop():
    a = Matrix([[0.5, 0.1], [0.0, 0.3]])
    q = Matrix(np.eye(2))
    p = Matrix(np.eye(2))
    out = riccati_step(a, q, Matrix([[0.0, 0.0]]), H1, R1, p, STRICT)
    assert np.allclose(out.a, a.a @ a.a.T + np.eye(2))


def test_riccati_strict_pinned_fixed_point():
    g = Matrix([[math.sqrt(15.0)]])
    out = riccati_step(Matrix([[2.0]]), Matrix([[1.0]]), g, H1, R1, Matrix([[3.0]]), STRICT)
    assert out.a[0, 0] == pytest.approx(3.0, abs=1e-12)
    out = riccati_step(Matrix([[2.0]]), Matrix([[1.0]]), g, H1, R1, Matrix([[1.0]]), STRICT)
    assert out.a[0, 0] == pytest.approx(1.25, abs=1e-12)


def test_riccati_rejects_non_pd():
    with pytest.raises(NotPD):
        riccati_step(Matrix([[2.0]]), Matrix([[1.0]]), Matrix([[1.0]]), H1, R1,
                     Matrix([[-1.0]]), STRICT)


def test_riccati_power_normalized_needs_power():
    with pytest.raises(InvalidArgument):
        riccati_step(Matrix([[2.0]]), Matrix([[1.0]]), Matrix([[1.0]]), H1, R1,
                     Matrix([[1.0]]), POWER_NORMALIZED)


def test_riccati_anchored_equals_literal_for_scalar():
    # for k = 1 the anchored correction is direction-free
    for w in (0.3, 1.0, -2.5):
        lit = riccati_step(Matrix([[2.0]]), Matrix([[1.0]]), Matrix([[1.0]]), H1, R1,
                           Matrix([[2.0]]), POWER_NORMALIZED, power=5.0)
        anc = riccati_step(Matrix([[2.0]]), Matrix([[1.0]]), Matrix([[1.0]]), H1, R1,
                           Matrix([[2.0]]), POWER_NORMALIZED, power=5.0,
                           weighting=Matrix([[w]]))
        assert anc.a[0, 0] == pytest.approx(lit.a[0, 0], rel=1e-12)


def test_riccati_fixed_point_consistency():
    # once the recursion has converged, iterating further moves nothing
    from zdjscc import CONVERGED, dare_fixed_point

    source = two_mode_source()
    channel = miso(5.2)
    design, cert = design_gamma(source, channel)
    res = dare_fixed_point(source, channel, design, tol=1e-13)
    assert res.status == CONVERGED
    p = res.P
    step = riccati_step(source.A, source.Q, design.Gamma, H1, R1, p,
                        POWER_NORMALIZED, power=5.2, weighting=design.weighting)
    assert float(np.max(np.abs(step.a - p.a))) <= 1e-9  # genuinely at the fixed point
    tr0 = float(np.trace(p.a))
    for _ in range(100):
        p = riccati_step(source.A, source.Q, design.Gamma, H1, R1, p,
                         POWER_NORMALIZED, power=5.2, weighting=design.weighting)
    assert abs(float(np.trace(p.a)) - tr0) <= 1e-9 * (1.0 + tr0)


# ---------------------------------------------------------------------------
# simulation kernel
# ---------------------------------------------------------------------------


def test_simulate_zero_source():
    source = scalar_source(a=0.5, q=0.0)
    design = scalar_design(gamma=1.0, mode=STRICT, p=1.0)
    rep = simulate_trajectory(source, miso(1.0), design, RngState(3), 50)
    assert not rep.diverged
    assert all(v == 0.0 for v in rep.empirical_mse)
    assert all(v == 0.0 for v in rep.empirical_power)


def test_simulate_determinism():
    source = scalar_source()
    design = scalar_design(gamma=1.0, mode=POWER_NORMALIZED, p=5.0)
    r1 = simulate_trajectory(source, miso(5.0), design, RngState(99), 80)
    r2 = simulate_trajectory(source, miso(5.0), design, RngState(99), 80)
    assert r1.empirical_mse == r2.empirical_mse
    assert r1.empirical_power == r2.empirical_power


def test_simulate_matches_single_replica_monte_carlo():
    source = scalar_source()
    design = scalar_design(gamma=1.0, mode=POWER_NORMALIZED, p=5.0)
    seed = 1234
    mc = monte_carlo(source, miso(5.0), design, seed, 60, 1)
    st = simulate_trajectory(source, miso(5.0), design, RngState(seed).stream(0), 60)
    assert mc.empirical_mse == st.empirical_mse
    assert mc.empirical_power == st.empirical_power


def test_pure_noise_variance():
    # a = 0, Gamma = 0: S_t = W_{t-1}, so the error variance is q at every t
    source = SourceModel(Matrix([[0.0]]), (), Matrix([[1.0]]))
    design = EncoderDesign(Matrix([[0.0]]), STRICT, 0.0)
    rep = monte_carlo(source, miso(0.0), design, 5, 40, 10_000)
    assert rep.d_estimate == pytest.approx(1.0, rel=0.05)


def test_open_loop_lyapunov_limit():
    # Gamma = 0, a = 0.5: D -> 1/(1-0.25) = 4/3
    source = stable_source(a=0.5)
    design = EncoderDesign(Matrix([[0.0]]), STRICT, 0.0)
    rep = monte_carlo(source, miso(0.0), design, 17, 100, 10_000)
    assert rep.d_estimate == pytest.approx(4.0 / 3.0, rel=0.05)
    lyap = stein_solve(source.A, source.A, source.Q)
    assert rep.trace_P[-1] == pytest.approx(float(np.trace(lyap.a)), rel=1e-6)


def test_scalar_normalized_closed_loop():
    # p = 5: P_t obeys p' = (2/3) p + 1 -> 3; power pinned at 5
    source = scalar_source()
    design = scalar_design(gamma=1.0, mode=POWER_NORMALIZED, p=5.0)
    rep = monte_carlo(source, miso(5.0), design, 7, 200, 2000)
    assert not rep.diverged
    assert rep.trace_P[-1] == pytest.approx(3.0, abs=1e-6)
    assert rep.d_estimate == pytest.approx(3.0, rel=0.10)
    assert rep.power_estimate == pytest.approx(5.0, rel=0.05)


def test_kernel_covariance_matches_riccati_step():
    # the Joseph-form propagation inside the kernel is the same map as
    # riccati_step; check both the anchored and the strict routes
    source = two_mode_source()
    channel = miso(5.2)
    design, _ = design_gamma(source, channel)
    rep = monte_carlo(source, channel, design, 21, 40, 2)
    p = source.Q
    for t in range(40):
        assert rep.trace_P[t] == pytest.approx(float(np.trace(p.a)), rel=1e-8)
        p = riccati_step(source.A, source.Q, design.Gamma, H1, R1, p,
                         POWER_NORMALIZED, power=5.2, weighting=design.weighting)

    source1 = scalar_source()
    design1 = scalar_design(gamma=math.sqrt(15.0), mode=STRICT, p=5.0)
    rep1 = monte_carlo(source1, miso(5.0), design1, 22, 40, 2)
    p1 = source1.Q
    for t in range(40):
        assert rep1.trace_P[t] == pytest.approx(p1.a[0, 0], rel=1e-8)
        p1 = riccati_step(source1.A, source1.Q, design1.Gamma, H1, R1, p1, STRICT)


def test_riccati_monte_carlo_agreement():
    # empirical trace within 6 * trace(P_t) * sqrt(2/N) at every recorded step
    source = two_mode_source()
    channel = miso(5.2)
    design, _ = design_gamma(source, channel)
    n = 600
    rep = monte_carlo(source, channel, design, 31, 120, n)
    assert not rep.diverged
    bound = 6.0 * math.sqrt(2.0 / n)
    for t in range(120):
        assert abs(rep.empirical_mse[t] - rep.trace_P[t]) <= bound * rep.trace_P[t]


def test_decoder_unbiasedness():
    # rebuild the textbook S / S_hat loop from the public pieces and check
    # the error mean stays within 4 sqrt(trace P_t / N) componentwise
    source = two_mode_source()
    channel = miso(5.2)
    design, _ = design_gamma(source, channel)
    n, horizon = 3000, 25
    gen = np.random.default_rng(77)
    a = source.A.a
    lq = np.linalg.cholesky(source.Q.a)
    s = (lq @ gen.standard_normal((2, n)))
    s_hat = np.zeros_like(s)
    p = source.Q
    w_dir = design.weighting.a.reshape(-1)
    for t in range(horizon):
        err = s - s_hat
        mean_err = err.mean(axis=1)
        bound = 4.0 * math.sqrt(float(np.trace(p.a)) / n)
        assert np.all(np.abs(mean_err) <= bound)
        den = float(w_dir @ p.a @ w_dir)
        beta = math.sqrt(design.power_budget / den)
        c = beta * w_dir
        u = c @ err
        y = u + gen.standard_normal(n)  # effective channel, r = 1
        # MMSE gain for the anchored measurement row c: K = A P c' / (c P c' + r)
        quad = float(c @ p.a @ c)
        k = (a @ p.a @ c) / (quad + 1.0)
        s_hat = a @ s_hat + np.outer(k, y)
        s = a @ s + lq @ gen.standard_normal((2, n))
        p = riccati_step(source.A, source.Q, design.Gamma, H1, R1, p,
                         POWER_NORMALIZED, power=design.power_budget,
                         weighting=design.weighting)


def test_kalman_optimality_spot_check():
    # perturbing any single gain entry by +/-10% never helps
    source = two_mode_source()
    channel = miso(5.2)
    design, _ = design_gamma(source, channel)
    n, horizon, seed = 2000, 150, 55
    base = monte_carlo(source, channel, design, seed, horizon, n)
    for entry in (0, 1):
        for factor in (1.1, 0.9):
            def perturb(g, t, entry=entry, factor=factor):
                g[entry, 0] *= factor
                return g

            got = monte_carlo(source, channel, design, seed, horizon, n, gain_perturb=perturb)
            assert got.d_estimate >= base.d_estimate * (1.0 - 0.01)


def test_monte_carlo_argument_validation():
    source = scalar_source()
    design = scalar_design()
    with pytest.raises(InvalidArgument):
        monte_carlo(source, miso(5.0), design, 1, 10, 0)
    with pytest.raises(InvalidArgument):
        monte_carlo(source, miso(5.0), design, 1, 0, 5)
    with pytest.raises(InvalidArgument):
        simulate_trajectory(source, miso(5.0), design, RngState(1), 0)


def test_divergence_marks_and_nan_fills():
    # infeasible power with the literal scheme blows up; series keep length
    source = two_mode_source()
    channel = miso(4.5)
    design = EncoderDesign(Matrix([[1.0, 1.0]]), POWER_NORMALIZED, 4.5)
    rep = monte_carlo(source, channel, design, 3, 400, 20)
    assert rep.diverged
    assert rep.divergence_step is not None
    assert len(rep.trace_P) == 400
    assert math.isnan(rep.empirical_mse[-1])
