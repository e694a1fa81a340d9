import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from phs_regulator.core import (
    PhsModel,
    boundary_port_values,
    build_port_map,
    check_assumption_W,
    numerical_rank,
    perturb_model,
    validate_model,
    validate_structure,
)
from phs_regulator.errors import DimensionError, UnsupportedOrderError

from .conftest import random_admissible_model


def test_timoshenko_structure_passes(timoshenko_model):
    report = validate_structure(timoshenko_model)
    assert report.passed, report.failed()
    assert report.structure_ok["P1 invertible"]
    assert report.structure_ok["H uniformly positive"]


def test_timoshenko_assumption_W(timoshenko_model):
    report = check_assumption_W(timoshenko_model)
    assert report.passed
    assert report.rank_W == 4
    assert abs(report.wsw_min_eig) <= 1e-12
    port_map = build_port_map(timoshenko_model)
    W = timoshenko_model.W
    assert np.linalg.norm(W @ port_map.Sigma @ W.T) <= 1e-12
    assert -1e-12 <= report.kernel_form_min_eig <= 1e-12


def test_validate_model_merges_reports(timoshenko_model):
    report = validate_model(timoshenko_model)
    names = [c.name for c in report.checks]
    assert "P1 symmetric" in names
    assert "W full row rank" in names
    assert report.rank_W == 4
    assert report.to_dict()["passed"] is True


def test_boundary_port_values_timoshenko_example(timoshenko_model):
    port_map = build_port_map(timoshenko_model)
    trace = np.zeros(8)
    trace[0] = 1.0
    f, e = boundary_port_values(port_map, trace)
    s = 1.0 / np.sqrt(2.0)
    np.testing.assert_allclose(f, [0.0, s, 0.0, 0.0], atol=1e-15)
    np.testing.assert_allclose(e, [s, 0.0, 0.0, 0.0], atol=1e-15)


def test_port_map_sigma_is_an_involution(timoshenko_model):
    port_map = build_port_map(timoshenko_model)
    np.testing.assert_array_equal(port_map.Sigma @ port_map.Sigma, np.eye(8))


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**16), a=st.floats(-10, 10), b=st.floats(-10, 10))
def test_boundary_port_values_are_linear(timoshenko_model, seed, a, b):
    port_map = build_port_map(timoshenko_model)
    rng = np.random.default_rng(seed)
    t1, t2 = rng.standard_normal((2, 8))
    f1, e1 = boundary_port_values(port_map, t1)
    f2, e2 = boundary_port_values(port_map, t2)
    f, e = boundary_port_values(port_map, a * t1 + b * t2)
    np.testing.assert_allclose(f, a * f1 + b * f2, atol=1e-12 * (1 + abs(a) + abs(b)) * 10)
    np.testing.assert_allclose(e, a * e1 + b * e2, atol=1e-12 * (1 + abs(a) + abs(b)) * 10)


def test_boundary_port_values_rejects_wrong_length(timoshenko_model):
    port_map = build_port_map(timoshenko_model)
    with pytest.raises(DimensionError):
        boundary_port_values(port_map, np.zeros(6))


def test_non_symmetric_P1_is_reported():
    model = PhsModel(n=2, order=1, P1=[[0.0, 1.0], [2.0, 0.0]], P0=np.zeros((2, 2)), G0=np.zeros((2, 2)),
                     H=np.eye(2), W1=[[1.0, 0, 0, 0]], W2=[[0, 1.0, 0, 0]], Wtilde=[[0, 0, 1.0, 0]],
                     interval=(0.0, 1.0))
    report = validate_structure(model)
    assert not report.passed
    assert "P1 symmetric" in report.failed()


def test_indefinite_G0_is_reported():
    model = PhsModel(n=1, order=1, P1=[[1.0]], P0=[[0.0]], G0=[[-0.5]], H=[[1.0]],
                     W1=[[1.0, 0.0]], W2=np.zeros((0, 2)), Wtilde=[[0.0, 1.0]], interval=(0.0, 1.0))
    report = validate_structure(model)
    assert report.failed() == ["G0 positive semidefinite"]


def test_H_profile_must_stay_positive():
    model = PhsModel(n=1, order=1, P1=[[1.0]], P0=[[0.0]], G0=[[0.0]],
                     H=[[[1.0]], [[-1e-3]]], H_grid=[0.0, 1.0],
                     W1=[[1.0, 0.0]], W2=np.zeros((0, 2)), Wtilde=[[0.0, 1.0]], interval=(0.0, 1.0))
    assert "H uniformly positive" in validate_structure(model).failed()


def test_H_profile_is_interpolated_linearly():
    model = PhsModel(n=1, order=1, P1=[[1.0]], P0=[[0.0]], G0=[[0.0]],
                     H=[[[1.0]], [[3.0]]], H_grid=[0.0, 1.0],
                     W1=[[1.0, 0.0]], W2=np.zeros((0, 2)), Wtilde=[[0.0, 1.0]], interval=(0.0, 1.0))
    np.testing.assert_allclose(model.H_at([0.0, 0.25, 1.0])[:, 0, 0], [1.0, 1.5, 3.0])


def test_Bd_profile_is_piecewise_constant():
    model = PhsModel(n=1, order=1, P1=[[1.0]], P0=[[0.0]], G0=[[0.0]], H=[[1.0]],
                     Bd=[[[1.0]], [[2.0]]], Bd_grid=[0.0, 0.5],
                     W1=[[1.0, 0.0]], W2=np.zeros((0, 2)), Wtilde=[[0.0, 1.0]], interval=(0.0, 1.0))
    np.testing.assert_allclose(model.Bd_at([0.1, 0.49, 0.5, 0.9])[:, 0, 0], [1.0, 1.0, 2.0, 2.0])
    assert model.n_d1 == 1


def test_wrong_W_row_count_raises():
    with pytest.raises(DimensionError) as info:
        PhsModel(n=2, order=1, P1=np.eye(2), P0=np.zeros((2, 2)), G0=np.zeros((2, 2)), H=np.eye(2),
                 W1=[[1.0, 0, 0, 0]], W2=np.zeros((0, 4)), Wtilde=[[0, 0, 1.0, 0]], interval=(0.0, 1.0))
    assert info.value.field == "W2"


def test_order_three_is_unsupported():
    with pytest.raises(UnsupportedOrderError):
        PhsModel(n=1, order=3, P1=[[1.0]], P0=[[0.0]], G0=[[0.0]], H=[[1.0]],
                 W1=[[1.0, 0.0]], W2=np.zeros((0, 2)), Wtilde=[[0.0, 1.0]], interval=(0.0, 1.0))


def test_order_two_port_map():
    # Euler-Bernoulli beam: P2 skew and invertible, Q is 2n x 2n
    eye = np.eye(8)
    model = PhsModel(n=2, order=2, P2=[[0.0, -1.0], [1.0, 0.0]], P1=np.zeros((2, 2)), P0=np.zeros((2, 2)),
                     G0=np.zeros((2, 2)), H=np.eye(2), W1=eye[:1], W2=eye[1:4], Wtilde=eye[4:5],
                     interval=(0.0, 1.0))
    port_map = build_port_map(model)
    assert port_map.Q.shape == (4, 4)
    assert port_map.trace_dim == 8
    ok = validate_structure(model).structure_ok
    assert ok["P2 invertible (order 2)"]
    assert ok["P2 skew"]


def test_singular_P1_has_no_port_map():
    model = PhsModel(n=2, order=1, P1=np.diag([1.0, 0.0]), P0=np.zeros((2, 2)), G0=np.zeros((2, 2)),
                     H=np.eye(2), W1=[[1.0, 0, 0, 0]], W2=[[0, 1.0, 0, 0]], Wtilde=[[0, 0, 1.0, 0]],
                     interval=(0.0, 1.0))
    with pytest.raises(UnsupportedOrderError):
        build_port_map(model)
    report = validate_model(model)
    assert "boundary port map" in report.failed()


def test_W_without_full_rank_fails():
    model = PhsModel(n=2, order=1, P1=np.eye(2), P0=np.zeros((2, 2)), G0=np.zeros((2, 2)), H=np.eye(2),
                     W1=[[1.0, 0, 0, 0]], W2=[[2.0, 0, 0, 0]], Wtilde=[[0, 0, 1.0, 0]], interval=(0.0, 1.0))
    report = check_assumption_W(model)
    assert report.rank_W == 1
    assert "W full row rank" in report.failed()


def test_perturb_model_scales_H(timoshenko_model):
    factors = np.diag([1.1, 0.9, 1.1, 0.9])
    perturbed = perturb_model(timoshenko_model, factors)
    np.testing.assert_allclose(np.diag(perturbed.H), np.diag(timoshenko_model.H) * np.diag(factors))
    np.testing.assert_array_equal(perturbed.P1, timoshenko_model.P1)


def test_numerical_rank_of_empty_matrix():
    assert numerical_rank(np.zeros((0, 3))) == 0


@given(seed=st.integers(0, 2**32 - 1), n=st.integers(1, 3), resistive=st.booleans())
@settings(deadline=None)
def test_random_admissible_models_pass(seed, n, resistive):
    rng = np.random.default_rng(seed)
    m = int(rng.integers(1, n + 1))
    model = random_admissible_model(rng, n, m, resistive=resistive)
    report = validate_model(model)
    assert report.passed, report.failed()
    assert report.rank_W == n
