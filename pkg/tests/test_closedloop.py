import logging

import numpy as np
import pytest

from phs_regulator.closedloop import (
    SignalModel,
    SimulationResult,
    assemble_closed_loop,
    estimate_decay_rate,
    exogenous_signal,
    final_window_error,
    lyapunov_certificate,
    notch,
    settling_horizon,
    simulate,
    solve_regulator_steady_state,
    tracking_metric,
)
from phs_regulator.controller import InternalModelController, gain_sweep, solve_H
from phs_regulator.core import perturb_model
from phs_regulator.discretize import StateSpaceModel, apply_output_feedback, discretize
from phs_regulator.errors import DecayRateUndefinedError, DimensionError, StepSizeError
from phs_regulator.scenarios.timoshenko.main import build_demo_scenario
from phs_regulator.scenarios.transport.main import build_transport_model


def _hand_result(t, e, y_ref=None, untracked=()):
    e = np.asarray(e, dtype=float).reshape(t.size, -1)
    y_ref = np.zeros_like(e) if y_ref is None else np.asarray(y_ref, dtype=float).reshape(t.size, -1)
    return SimulationResult(t=t, y=y_ref + e, y_ref=y_ref, energy=np.zeros(t.size), dt=float(t[1] - t[0]),
                            untracked_freqs=list(untracked))


@pytest.fixture
def integral_loop(scalar_plant):
    ctrl = InternalModelController.build((), 1, include_zero=True, delta_c=0.5)
    return assemble_closed_loop(scalar_plant, ctrl)


@pytest.fixture(scope="module")
def timoshenko_demo():
    return build_demo_scenario()


@pytest.fixture(scope="module")
def timoshenko_loop(timoshenko_demo):
    plant = discretize(timoshenko_demo.model, timoshenko_demo.simulation.n_f)
    return assemble_closed_loop(plant, timoshenko_demo.controller.build(plant.p))


def test_signal_evaluation():
    sig = SignalModel.create((1.0,), 1, 2, a0=np.array([0.5]), a_sin=np.array([[1.0]]), b0=np.array([0.3, 0.0]))
    y_ref, w = exogenous_signal(sig, np.pi / 2)
    np.testing.assert_allclose(y_ref, [1.5])
    np.testing.assert_allclose(w, [0.3, 0.0])
    assert sig.p == 1
    assert sig.nw == 2


def test_complex_coefficients_reproduce_signal():
    sig = SignalModel.create((2.0, 5.0), 2, 1, a0=np.array([1.0, -1.0]),
                             a_cos=np.array([[1.0, 0.0], [0.0, 3.0]]), a_sin=np.array([[0.5, 2.0], [0.0, 0.0]]),
                             b_sin=np.array([[0.0], [4.0]]))
    t = np.linspace(0.0, 3.0, 7)
    y_ref, w = sig.evaluate(t)
    terms = sig.complex_coefficients()
    assert len(terms) == 5
    y_sum = sum(np.outer(np.exp(1j * mu * t), y_mu) for mu, y_mu, _ in terms)
    w_sum = sum(np.outer(np.exp(1j * mu * t), w_mu) for mu, _, w_mu in terms)
    np.testing.assert_allclose(y_sum.real, y_ref, atol=1e-12)
    np.testing.assert_allclose(y_sum.imag, 0.0, atol=1e-12)
    np.testing.assert_allclose(w_sum.real, w, atol=1e-12)


def test_constant_signal_without_tones():
    sig = SignalModel.create((), 1, 1, a0=np.array([2.0]))
    y_ref, w = sig.evaluate([0.0, 1.0])
    np.testing.assert_allclose(y_ref, [[2.0], [2.0]])
    np.testing.assert_allclose(w, [[0.0], [0.0]])


@pytest.mark.parametrize("freqs", [(0.0,), (2.0, 1.0), (-1.0,)])
def test_signal_rejects_bad_frequencies(freqs):
    with pytest.raises(DimensionError):
        SignalModel.create(freqs, 1, 1)


def test_signal_rejects_bad_coefficient_shape():
    with pytest.raises(DimensionError) as info:
        SignalModel.create((1.0, 2.0), 1, 1, a_sin=np.ones((2, 2)))
    assert info.value.field == "a_sin"


def test_closed_loop_input_ordering(integral_loop):
    # columns [y_ref, w1, w2, w3]; the scalar plant has no w1 or w3
    assert integral_loop.n_e == 2
    assert integral_loop.Be.shape == (2, 2)
    np.testing.assert_allclose(integral_loop.Ae, [[-1.0, 0.5], [-0.5, 0.0]])
    np.testing.assert_allclose(integral_loop.Be_ref, [[0.0], [0.5]])
    np.testing.assert_allclose(integral_loop.Be_w2, [[1.0], [0.0]])
    assert integral_loop.Be_w1.shape == (2, 0)
    assert integral_loop.Be_w3.shape == (2, 0)
    assert integral_loop.is_stable()


def test_closed_loop_dimensions_timoshenko(timoshenko_loop):
    assert timoshenko_loop.n_x == 200
    assert timoshenko_loop.n_c == 4
    assert timoshenko_loop.Be.shape == (204, 1 + 0 + 1 + 3)
    assert timoshenko_loop.Ce.shape == (1, 204)
    assert timoshenko_loop.is_stable()


def test_normalized_and_original_closed_loop_agree(timoshenko_loop):
    x = np.linspace(-1.0, 1.0, timoshenko_loop.n_e)
    z = timoshenko_loop.to_normalized(x)
    np.testing.assert_allclose(timoshenko_loop.from_normalized(z), x, rtol=1e-9, atol=1e-9)
    np.testing.assert_allclose(timoshenko_loop.Ce @ x, timoshenko_loop.Ce_n @ z, rtol=1e-9)


def test_closed_loop_rejects_mismatched_controller(scalar_plant):
    with pytest.raises(DimensionError):
        assemble_closed_loop(scalar_plant, InternalModelController.build((1.0,), 2))


def test_untracked_frequencies(scalar_plant):
    clsys = assemble_closed_loop(scalar_plant, InternalModelController.build((1.0,), 1, include_zero=True))
    assert clsys.untracked([0.0, 1.0, 3.0]) == [3.0]
    assert clsys.untracked([-1.0]) == []


def test_simulation_tracks_constant_reference(integral_loop):
    sig = SignalModel.create((), 1, 1, a0=np.array([1.0]), b0=np.array([0.3]))
    res = simulate(integral_loop, sig, horizon=40.0, dt=0.01)
    assert res.t.size == 4001
    assert np.all(np.isfinite(res.energy))
    assert res.final_window_error() <= 1e-4
    assert tracking_metric(res).passed


def test_coarse_step_is_rejected_in_strict_mode(scalar_plant):
    clsys = assemble_closed_loop(scalar_plant, InternalModelController.build((10.0,), 1, delta_c=0.5))
    sig = SignalModel.create((10.0,), 1, 1, a_sin=np.array([[1.0]]))
    with pytest.raises(StepSizeError):
        simulate(clsys, sig, horizon=1.0, dt=0.1, strict=True)


def test_coarse_step_warns(scalar_plant, caplog):
    clsys = assemble_closed_loop(scalar_plant, InternalModelController.build((10.0,), 1, delta_c=0.5))
    sig = SignalModel.create((10.0,), 1, 1, a_sin=np.array([[1.0]]))
    with caplog.at_level(logging.WARNING, logger="phs_regulator"):
        res = simulate(clsys, sig, horizon=1.0, dt=0.1)
    assert res.t.size == 11
    assert any("步长" in record.getMessage() for record in caplog.records)


def test_simulation_rejects_wrong_signal(integral_loop):
    sig = SignalModel.create((), 1, 3)
    with pytest.raises(DimensionError):
        simulate(integral_loop, sig, horizon=1.0, dt=0.1)
    with pytest.raises(StepSizeError):
        simulate(integral_loop, SignalModel.create((), 1, 1), horizon=1.0, dt=0.0)


def test_notch_removes_listed_tones():
    t = np.linspace(0.0, 10.0, 1001)
    v = (np.sin(3.0 * t) + 0.5 * np.cos(3.0 * t))[:, None]
    np.testing.assert_allclose(notch(t, v, [3.0]), 0.0, atol=1e-10)
    np.testing.assert_array_equal(notch(t, v, []), v)


def test_final_window_error_and_tracking_metric():
    t = np.linspace(0.0, 10.0, 1001)
    res = _hand_result(t, np.full(t.size, 0.5), y_ref=np.full(t.size, 100.0))
    assert final_window_error(res) == pytest.approx(0.5)
    metric = tracking_metric(res)
    assert metric.reference_peak == pytest.approx(100.0)
    assert metric.ratio == pytest.approx(0.005)
    assert metric.passed
    assert not tracking_metric(res, threshold=0.001).passed


def test_untracked_tone_is_notched_from_the_window():
    t = np.linspace(0.0, 10.0, 1001)
    res = _hand_result(t, np.sin(3.0 * t), untracked=[3.0])
    assert res.final_window_error(notched=False) > 0.9
    assert res.final_window_error() <= 1e-9


def test_regulator_on_scalar_plant(integral_loop):
    sig = SignalModel.create((), 1, 1, a0=np.array([1.0]), b0=np.array([0.3]))
    sol = solve_regulator_steady_state(integral_loop, sig)
    assert sol.passed
    assert sol.max_residual <= 1e-8
    np.testing.assert_allclose(sol.predicted_output([0.0, 5.0]), [[1.0], [1.0]], atol=1e-10)
    assert sol.to_dict()["passed"] is True


@pytest.fixture(scope="module")
def damped_transport():
    model = build_transport_model(damping=0.5)
    plant = discretize(model, 10)
    ctrl = InternalModelController.build((1.0,), 1, include_zero=True)
    sweep = gain_sweep(plant, ctrl, [0.01, 0.03, 0.1, 0.3])
    return model, ctrl.with_delta(sweep.recommended_delta_c)


def _transport_signal():
    # w = [w1 (distributed), w2 (input)]
    return SignalModel.create((1.0, 3.0), 1, 2, a0=np.array([0.5]), a_sin=np.array([[1.0], [0.0]]),
                              b0=np.array([0.3, 0.2]), b_sin=np.array([[0.0, 0.1], [0.0, 0.2]]))


@pytest.mark.parametrize("factor", [1.0, 0.9, 1.1])
def test_regulator_on_damped_transport(damped_transport, factor):
    model, ctrl = damped_transport
    plant = discretize(perturb_model(model, [[factor]]), 10)
    clsys = assemble_closed_loop(plant, ctrl)
    sol = solve_regulator_steady_state(clsys, _transport_signal())
    assert sol.max_residual <= 1e-8
    assert sol.passed
    # the 3 rad/s input tone is outside the internal model
    amplitude = sol.steady_error_amplitude()
    assert set(amplitude) == {3.0}
    assert amplitude[3.0] > 0


@pytest.mark.parametrize("diag", [[1.1] * 4, [0.9] * 4, [1.1, 0.9, 0.9, 1.1]])
def test_regulator_on_perturbed_timoshenko(timoshenko_demo, diag):
    factors = np.ones((4, 4))
    np.fill_diagonal(factors, diag)
    plant = discretize(perturb_model(timoshenko_demo.model, factors), 50)
    clsys = assemble_closed_loop(plant, timoshenko_demo.controller.build(1))
    sol = solve_regulator_steady_state(clsys, timoshenko_demo.signal)
    assert sol.max_residual <= 1e-8
    assert [e.mu for e in sol.entries if not e.in_internal_model] == [0.0, pytest.approx(100 * np.pi),
                                                                       pytest.approx(-100 * np.pi)]


def test_decay_rate_of_damped_oscillation():
    t = np.linspace(0.0, 20.0, 20001)
    res = _hand_result(t, np.exp(-0.5 * t) * np.abs(np.sin(10.0 * t)))
    est = estimate_decay_rate(res)
    assert est.alpha == pytest.approx(0.5, rel=0.05)
    assert est.decaying
    assert est.method == "peaks"


def test_decay_rate_of_growing_error():
    t = np.linspace(0.0, 20.0, 20001)
    est = estimate_decay_rate(_hand_result(t, np.exp(0.1 * t) * np.sin(3.0 * t)))
    assert est.alpha == pytest.approx(-0.1, rel=0.05)
    assert not est.decaying


def test_decay_rate_undefined_for_zero_error():
    t = np.linspace(0.0, 1.0, 101)
    with pytest.raises(DecayRateUndefinedError):
        estimate_decay_rate(_hand_result(t, np.zeros(t.size)))


def test_certificate_on_scalar_plant(scalar_plant):
    ctrl = InternalModelController.build((), 1, include_zero=True, delta_c=0.1)
    sol = solve_H(scalar_plant, ctrl)
    cert = lyapunov_certificate(scalar_plant, ctrl, H=sol)
    assert cert.valid, cert.reason
    assert cert.eps_c == pytest.approx(1.0)
    np.testing.assert_allclose(cert.P, [[2.0]], atol=1e-10)
    np.testing.assert_allclose(cert.Pc0, [[0.5]], atol=1e-10)
    np.testing.assert_allclose(cert.H, [[-1.0]], atol=1e-10)
    assert cert.pc0_residual <= 1e-10
    assert sol.sylvester_residual <= 1e-10
    assert cert.min_eig_neg_derivative > 0
    assert cert.abscissa < 0
    assert len(cert.eps_table) == 25


def test_certificate_fails_at_tiny_eps(scalar_plant):
    ctrl = InternalModelController.build((), 1, include_zero=True, delta_c=0.1)
    cert = lyapunov_certificate(scalar_plant, ctrl, eps_grid=[1e-6])
    assert not cert.valid
    assert cert.min_eig_neg_derivative <= 0
    assert "εc" in cert.reason


def test_certificate_requires_stable_plant():
    integrator = StateSpaceModel(A=[[0.0]], B=[[1.0]], C=[[1.0]], M=[[1.0]])
    cert = lyapunov_certificate(integrator, InternalModelController.build((1.0,), 1))
    assert not cert.valid
    assert cert.reason == "plant is not exponentially stable"


@pytest.mark.parametrize("delta_c", [0.01, 0.2])
def test_certificate_is_sound_on_timoshenko(timoshenko_plant, timoshenko_demo, delta_c):
    ctrl = timoshenko_demo.controller.build(1).with_delta(delta_c)
    stab = apply_output_feedback(timoshenko_plant, ctrl.Dc)
    cert = lyapunov_certificate(stab, ctrl)
    if cert.valid:
        assert cert.abscissa < 0
        assert cert.pc0_residual <= 1e-10
    assert cert.to_dict()["valid"] is cert.valid


def test_timoshenko_demo_runs_stably(timoshenko_loop, timoshenko_demo):
    sim = timoshenko_demo.simulation
    assert timoshenko_loop.is_stable()
    res = simulate(timoshenko_loop, timoshenko_demo.signal, sim.horizon, sim.dt, strict=True)
    assert res.t[-1] == pytest.approx(20.0)
    assert np.all(np.isfinite(res.energy))
    assert res.untracked_freqs == [pytest.approx(100 * np.pi)]
    early = final_window_error(_hand_result(res.t[:2001], res.e[:2001], untracked=res.untracked_freqs))
    assert res.final_window_error() < early


@pytest.fixture(scope="module")
def settled_run(timoshenko_loop, timoshenko_demo):
    abscissa = timoshenko_loop.spectral_abscissa()
    horizon = settling_horizon(abscissa)
    assert horizon <= 300.0
    return abscissa, simulate(timoshenko_loop, timoshenko_demo.signal, horizon, 5e-4, strict=True)


def test_timoshenko_demo_tracks_within_one_percent(settled_run):
    _, res = settled_run
    metric = tracking_metric(res)
    assert metric.passed, f"final error {metric.final_error:.3e} vs peak {metric.reference_peak:.3e}"


def test_twenty_seconds_leave_the_slow_internal_model_mode(timoshenko_loop):
    # the 10 rad/s mode decays at about 0.11/s, so 20 s cannot reach 1 %
    abscissa = timoshenko_loop.spectral_abscissa()
    assert -0.2 < abscissa < -0.05
    assert settling_horizon(abscissa) > 20.0


def test_decay_rate_matches_abscissa(settled_run):
    abscissa, res = settled_run
    est = estimate_decay_rate(res, start_fraction=0.3, end_fraction=0.8)
    assert est.decaying
    assert est.alpha == pytest.approx(-abscissa, rel=0.2)


def test_settling_horizon():
    assert settling_horizon(-0.5, fraction=0.1, reduction=np.exp(-9.0)) == pytest.approx(20.0)
    assert settling_horizon(0.0) == np.inf
    assert settling_horizon(-1.0, fraction=1.0) == np.inf


@pytest.mark.parametrize("seed", [3, 11])
def test_tracking_survives_parameter_perturbation(timoshenko_demo, seed):
    rng = np.random.default_rng(seed)
    factors = np.ones((4, 4))
    np.fill_diagonal(factors, rng.uniform(0.9, 1.1, 4))
    plant = discretize(perturb_model(timoshenko_demo.model, factors), 20)
    clsys = assemble_closed_loop(plant, timoshenko_demo.controller.build(1))
    assert clsys.is_stable()
    horizon = min(300.0, settling_horizon(clsys.spectral_abscissa()))
    res = simulate(clsys, timoshenko_demo.signal, horizon, 5e-4)
    metric = tracking_metric(res)
    assert metric.passed, f"final error {metric.final_error:.3e} vs peak {metric.reference_peak:.3e}"


def test_energy_does_not_grow_without_input(timoshenko_demo):
    plant = discretize(timoshenko_demo.model, 10)
    clsys = assemble_closed_loop(plant, timoshenko_demo.controller.build(1))
    quiet = SignalModel.create((), 1, clsys.n_w)
    x0 = np.random.default_rng(5).standard_normal(clsys.n_e)
    res = simulate(clsys, quiet, 0.5, 5e-4, x0=x0)
    assert np.all(np.diff(res.energy) <= 1e-12 * res.energy[0])
    assert res.energy[-1] < res.energy[0]
    np.testing.assert_allclose(res.y_ref, 0.0)


def test_midpoint_conserves_energy_of_lossless_loop():
    oscillator = StateSpaceModel(A=[[0.0, 1.0], [-1.0, 0.0]], B=[[0.0], [1.0]], C=[[0.0, 1.0]], M=np.eye(2))
    clsys = assemble_closed_loop(oscillator, InternalModelController.build((2.0,), 1, delta_c=0.3))
    np.testing.assert_allclose(clsys.Ae_n, -clsys.Ae_n.T, atol=1e-14)
    quiet = SignalModel.create((), 1, clsys.n_w)
    res = simulate(clsys, quiet, 10.0, 0.01, x0=np.array([1.0, 0.0, 0.5, -0.2]))
    assert np.max(np.abs(res.energy - res.energy[0])) <= 1e-12 * res.energy[0]


def test_stability_margin_follows_round_off():
    stiff = StateSpaceModel(A=np.diag([-1e8, -1.0]), B=[[1.0], [1.0]], C=[[1.0, 1.0]], M=np.eye(2))
    clsys = assemble_closed_loop(stiff, InternalModelController.build((), 1, include_zero=True, delta_c=0.1))
    assert clsys.stability_margin < 1e-6
    assert clsys.is_stable(-1e-6)
    assert not clsys.is_stable(0.0)


def test_certificate_exists_on_timoshenko_sweep_range(timoshenko_plant, timoshenko_demo):
    ctrl = timoshenko_demo.controller.build(1)
    stab = apply_output_feedback(timoshenko_plant, ctrl.Dc)
    certs = [lyapunov_certificate(stab, ctrl.with_delta(delta)) for delta in (1e-4, 1e-3, 1e-2)]
    assert any(cert.valid for cert in certs), [cert.reason for cert in certs]
    for cert in certs:
        if cert.valid:
            assert cert.abscissa < 0
