import math

import numpy as np
import pytest

from zdjscc import (
    MISO,
    SIMO,
    ChannelModel,
    InvalidArgument,
    InvalidModel,
    Matrix,
    RngState,
    SourceModel,
    controllability_gramian,
    eigenvalues,
    sample_mvn,
    validate_model,
)

from conftest import EMPTY, miso, scalar_source


def test_valid_mixed_model():
    # NB 0.5 would be resonant against 2.0 (product exactly 1), so 0.4 here
    source = SourceModel(Matrix([[0.4]]), (2.0,), Matrix(np.eye(2)))
    report = validate_model(source, miso(1.0))
    assert report.valid
    assert all(c.passed for c in report.checks)


def test_boundary_eigenvalue_rejected():
    report = validate_model(scalar_source(a=1.0), miso(1.0))
    assert not report.valid
    names = {c.name for c in report.failures()}
    assert "unstable eigenvalues outside the unit circle" in names
    assert "eigenvalue products stay away from 1" in names


def test_singular_gramian_rejected():
    source = SourceModel(EMPTY, (2.0, 3.0), Matrix.diag([1.0, 0.0]))
    report = validate_model(source, miso(1.0))
    assert not report.valid
    failed = {c.name for c in report.failures()}
    assert "(A, Q) controllable (k-step Gramian PD)" in failed


def test_repeated_unstable_eigenvalues_rejected():
    source = SourceModel(EMPTY, (2.0, 2.0), Matrix(np.eye(2)))
    report = validate_model(source, miso(1.0))
    assert not report.valid
    assert "unstable eigenvalues pairwise distinct" in {c.name for c in report.failures()}


def test_reciprocal_pair_rejected():
    # 0.5 * 2.0 = 1 violates the nonresonance assumption
    source = SourceModel(Matrix([[0.5]]), (2.0,), Matrix(np.eye(2)))
    report = validate_model(source, miso(1.0))
    assert not report.valid


def test_miso_norm_and_simo_pd_checks():
    source = scalar_source()
    bad_h = ChannelModel(MISO, Matrix([[0.6, 0.9]]), 1.0, r=1.0)  # norm != 1
    assert not validate_model(source, bad_h).valid
    bad_r = ChannelModel(SIMO, Matrix([[1.0], [1.0]]), 1.0, R=Matrix([[1.0, 2.0], [2.0, 1.0]]))
    assert not validate_model(source, bad_r).valid


def test_validation_monotone_in_tolerance():
    cases = [
        (SourceModel(Matrix([[0.5]]), (2.0,), Matrix(np.eye(2))), miso(1.0)),
        (scalar_source(1.000002), miso(3.0)),  # fails at 1e-6 and stays failed tighter
    ]
    for source, channel in cases:
        loose = validate_model(source, channel, class_tol=1e-6)
        tight = validate_model(source, channel, class_tol=1e-9)
        for c_loose, c_tight in zip(loose.checks, tight.checks):
            if c_loose.passed:
                assert c_tight.passed


def test_canonical_round_trip():
    a_s = Matrix([[0.3, 0.2], [0.0, -0.5]])
    a_u = (1.5, -2.0)
    source = SourceModel(a_s, a_u, Matrix(np.eye(4)))
    eigs = eigenvalues(source.A)
    stable = sorted(z.real for z in eigs if abs(z) < 1.0)
    unstable = sorted(z.real for z in eigs if abs(z) > 1.0)
    assert np.allclose(stable, sorted(z.real for z in eigenvalues(a_s)), atol=1e-8)
    assert np.allclose(unstable, sorted(a_u), atol=1e-8)


def test_model_shape_errors():
    with pytest.raises(InvalidModel):
        SourceModel(Matrix([[0.5, 0.1]]), (), Matrix([[1.0]]))  # A_s not square
    with pytest.raises(InvalidModel):
        SourceModel(EMPTY, (2.0,), Matrix(np.eye(2)))  # Q is 2x2 for k=1
    with pytest.raises(InvalidModel):
        ChannelModel(MISO, Matrix([[1.0]]), 1.0)  # missing r
    with pytest.raises(InvalidModel):
        ChannelModel(SIMO, Matrix([[1.0]]), 1.0, r=1.0)  # SIMO takes R


def test_gramian_pinned():
    g = controllability_gramian(Matrix(np.zeros((2, 2))), Matrix(np.eye(2)), 2)
    assert np.allclose(g.a, np.eye(2))
    g = controllability_gramian(Matrix.diag([2.0, 0.5]), Matrix(np.eye(2)), 2)
    assert np.allclose(g.a, np.diag([5.0, 1.25]))
    g = controllability_gramian(Matrix.diag([2.0, 3.0]), Matrix.diag([1.0, 0.0]), 2)
    assert np.allclose(g.a, np.diag([5.0, 0.0]))


def test_gramian_errors():
    with pytest.raises(Exception):
        controllability_gramian(Matrix(np.eye(2)), Matrix(np.eye(3)), 2)
    with pytest.raises(InvalidArgument):
        controllability_gramian(Matrix(np.eye(2)), Matrix(np.eye(2)), 0)


def test_rng_determinism_and_streams():
    a = RngState(42).normals(8)
    b = RngState(42).normals(8)
    assert np.array_equal(a, b)
    s0 = RngState(42).stream(0).normals(4)
    s1 = RngState(42).stream(1).normals(4)
    assert not np.array_equal(s0, s1)
    assert np.array_equal(s0, RngState(42).stream(0).normals(4))
    with pytest.raises(InvalidArgument):
        RngState(-1)
    with pytest.raises(InvalidArgument):
        RngState(1 << 64)


def test_sample_mvn_zero_and_determinism():
    z = sample_mvn(RngState(7), Matrix(np.zeros((3, 3))))
    assert np.allclose(np.asarray(z.a if isinstance(z, Matrix) else z), 0.0)
    x1 = sample_mvn(RngState(7), Matrix.diag([4.0, 1.0]))
    x2 = sample_mvn(RngState(7), Matrix.diag([4.0, 1.0]))
    assert np.array_equal(np.asarray(x1.a if isinstance(x1, Matrix) else x1),
                          np.asarray(x2.a if isinstance(x2, Matrix) else x2))


def test_sample_mvn_statistics():
    sigma = Matrix.diag([4.0, 1.0])
    rng = RngState(123)
    n = 100_000
    draws = np.empty((n, 2))
    for i in range(n):
        x = sample_mvn(rng, sigma)
        draws[i] = np.asarray(x.a if isinstance(x, Matrix) else x).reshape(-1)
    emp = draws.T @ draws / n
    assert abs(emp[0, 0] - 4.0) <= 0.05 * 4.0
    assert abs(emp[1, 1] - 1.0) <= 0.05 * 1.0
    assert abs(emp[0, 1]) <= 0.05 * math.sqrt(4.0 * 1.0)
    mean = draws.mean(axis=0)
    for j, var in enumerate([4.0, 1.0]):
        assert abs(mean[j]) <= 4.0 * math.sqrt(var / n)
