"""Closed-loop assembly, simulation, regulator equations, decay rate and Lyapunov certificate"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.linalg import block_diag, lu_factor, lu_solve, solve_continuous_lyapunov
from scipy.signal import find_peaks

from .controller import InternalModelController, SylvesterSolution, solve_H
from .discretize import (
    NormalizedModel,
    StateSpaceModel,
    apply_output_feedback,
    resolvent_solve,
    spectral_abscissa,
)
from .errors import DecayRateUndefinedError, DimensionError, StepSizeError
from .logger import logger

# tones closer than this (rad/s) count as the same frequency
FREQ_MATCH_TOL = 1e-9


@dataclass(frozen=True)
class SignalModel:
    """y_ref(t) = a0 + Σ a_cos[k]·cos(ω_k t) + a_sin[k]·sin(ω_k t), w(t) likewise with b

    ``w`` stacks the three disturbance channels as [w1; w2; w3] with
    lengths (n_d1, p, n_d3).
    """

    freqs: np.ndarray
    a0: np.ndarray
    a_cos: np.ndarray
    a_sin: np.ndarray
    b0: np.ndarray
    b_cos: np.ndarray
    b_sin: np.ndarray
    unit: str = ""

    def __post_init__(self):
        freqs = np.atleast_1d(np.asarray(self.freqs, dtype=float))
        if np.any(freqs <= 0) or np.any(np.diff(freqs) <= 0):
            raise DimensionError("freqs", "signal frequencies must be positive and strictly increasing")
        q = freqs.size
        a0 = np.atleast_1d(np.asarray(self.a0, dtype=float))
        b0 = np.atleast_1d(np.asarray(self.b0, dtype=float))
        object.__setattr__(self, "freqs", freqs)
        object.__setattr__(self, "a0", a0)
        object.__setattr__(self, "b0", b0)
        for key, width in (("a_cos", a0.size), ("a_sin", a0.size), ("b_cos", b0.size), ("b_sin", b0.size)):
            value = np.asarray(getattr(self, key), dtype=float)
            if value.size == 0:
                value = np.zeros((q, width))
            value = value.reshape(q, -1) if q else np.zeros((0, width))
            if value.shape != (q, width):
                raise DimensionError(key, f"expected shape {(q, width)}, got {value.shape}")
            object.__setattr__(self, key, value)

    @classmethod
    def create(cls, freqs, p: int, nw: int, **coeffs) -> "SignalModel":
        """Signal with the given coefficients and zeros elsewhere"""
        freqs = np.atleast_1d(np.asarray(freqs, dtype=float))
        q = freqs.size
        return cls(
            freqs=freqs,
            a0=coeffs.get("a0", np.zeros(p)),
            a_cos=coeffs.get("a_cos", np.zeros((q, p))),
            a_sin=coeffs.get("a_sin", np.zeros((q, p))),
            b0=coeffs.get("b0", np.zeros(nw)),
            b_cos=coeffs.get("b_cos", np.zeros((q, nw))),
            b_sin=coeffs.get("b_sin", np.zeros((q, nw))),
            unit=coeffs.get("unit", ""),
        )

    @property
    def p(self) -> int:
        return self.a0.size

    @property
    def nw(self) -> int:
        return self.b0.size

    def evaluate(self, times) -> tuple[np.ndarray, np.ndarray]:
        """(y_ref, w) at the given times, shapes (len(t), p) and (len(t), nw)"""
        t = np.atleast_1d(np.asarray(times, dtype=float))
        phase = np.outer(t, self.freqs)
        cos, sin = np.cos(phase), np.sin(phase)
        y_ref = self.a0 + cos @ self.a_cos + sin @ self.a_sin
        w = self.b0 + cos @ self.b_cos + sin @ self.b_sin
        return y_ref, w

    def complex_coefficients(self) -> list[tuple[float, np.ndarray, np.ndarray]]:
        """(μ, y_μ, w_μ) with y_ref(t) = Σ_μ y_μ·e^{iμt}, μ ∈ {0, ±ω_k}"""
        terms = [(0.0, self.a0.astype(complex), self.b0.astype(complex))]
        for k, w in enumerate(self.freqs):
            y_k = 0.5 * (self.a_cos[k] - 1j * self.a_sin[k])
            w_k = 0.5 * (self.b_cos[k] - 1j * self.b_sin[k])
            terms.append((float(w), y_k, w_k))
            terms.append((-float(w), y_k.conj(), w_k.conj()))
        return terms


def exogenous_signal(sig: SignalModel, t: float) -> tuple[np.ndarray, np.ndarray]:
    """Reference and disturbance vectors at time t"""
    y_ref, w = sig.evaluate([t])
    return y_ref[0], w[0]


@dataclass(frozen=True)
class SimulationSettings:
    n_f: int = 50
    horizon: float = 20.0
    dt: float = 5e-4


def _closed_loop_blocks(nm: NormalizedModel, ctrl: InternalModelController, delta: float):
    """(Ae, Be, Ce, De) for a plant already carrying the Dc feedback

    Input columns are ordered [y_ref, w1, w2, w3].
    """
    Bc, Jc, Dc = ctrl.Bc, ctrl.Jc, ctrl.Dc
    p = ctrl.p
    Ae = np.block([
        [nm.A, delta * nm.B @ Bc.T],
        [-delta * Bc @ nm.C, Jc - delta ** 2 * Bc @ nm.D @ Bc.T],
    ])
    n_c = Jc.shape[0]
    Be = np.block([
        [nm.B @ Dc, nm.Bd, nm.B, nm.Bw3],
        [delta * Bc @ (np.eye(p) - nm.D @ Dc), np.zeros((n_c, nm.Bd.shape[1])), -delta * Bc @ nm.D,
         -delta * Bc @ nm.Dw3],
    ])
    Ce = np.hstack([nm.C, delta * nm.D @ Bc.T])
    De = np.hstack([nm.D @ Dc, np.zeros((p, nm.Bd.shape[1])), nm.D, nm.Dw3])
    return Ae, Be, Ce, De


@dataclass(frozen=True)
class ClosedLoopSystem:
    """Plant (with Dc feedback) coupled to the internal model

    State x_e = (x, x_c). The ``*_n`` matrices act on the normalized state
    (Lᵀx, x_c) where the closed-loop storage is ½|·|².
    """

    Ae: np.ndarray
    Be: np.ndarray
    Ce: np.ndarray
    De: np.ndarray
    Ae_n: np.ndarray
    Be_n: np.ndarray
    Ce_n: np.ndarray
    L: np.ndarray
    n_x: int
    n_c: int
    p: int
    n_d1: int
    n_d3: int
    delta_c: float
    plant: StateSpaceModel
    controller: InternalModelController

    @property
    def n_e(self) -> int:
        return self.n_x + self.n_c

    @property
    def Me(self) -> np.ndarray:
        return block_diag(self.plant.M, np.eye(self.n_c))

    def _columns(self, start: int, width: int) -> np.ndarray:
        return self.Be[:, start:start + width]

    @property
    def Be_ref(self) -> np.ndarray:
        return self._columns(0, self.p)

    @property
    def Be_w1(self) -> np.ndarray:
        return self._columns(self.p, self.n_d1)

    @property
    def Be_w2(self) -> np.ndarray:
        return self._columns(self.p + self.n_d1, self.p)

    @property
    def Be_w3(self) -> np.ndarray:
        return self._columns(2 * self.p + self.n_d1, self.n_d3)

    @property
    def n_w(self) -> int:
        return self.n_d1 + self.p + self.n_d3

    def to_normalized(self, x_e: np.ndarray) -> np.ndarray:
        return np.concatenate([self.L.T @ x_e[:self.n_x], x_e[self.n_x:]])

    def from_normalized(self, z: np.ndarray) -> np.ndarray:
        x = np.linalg.solve(self.L.T, z[:self.n_x])
        return np.concatenate([x, z[self.n_x:]])

    def spectral_abscissa(self) -> float:
        return spectral_abscissa(self.Ae_n)

    @property
    def stability_margin(self) -> float:
        """Eigenvalue round-off bound eps·‖Ae_n‖₂ times a safety factor of 10"""
        return 10.0 * np.finfo(float).eps * max(1.0, float(np.linalg.norm(self.Ae_n, 2)))

    def is_stable(self, abscissa: Optional[float] = None) -> bool:
        """abscissa < 0 beyond eigenvalue round-off"""
        if abscissa is None:
            abscissa = self.spectral_abscissa()
        return abscissa < -self.stability_margin

    def untracked(self, freqs) -> list[float]:
        """Frequencies of ``freqs`` missing from the internal model"""
        model = np.array(self.controller.all_freqs)
        return [float(w) for w in np.atleast_1d(freqs)
                if not np.any(np.abs(model - abs(w)) <= FREQ_MATCH_TOL * max(1.0, abs(w)))]


def assemble_closed_loop(ss: StateSpaceModel, ctrl: InternalModelController,
                         delta_c: Optional[float] = None) -> ClosedLoopSystem:
    """Couple plant and controller

    The Dc part of the controller is absorbed into the plant as output
    feedback; the reference then enters the plant input through Dc.

    Args:
        ss: plant (without Dc feedback)
        ctrl: internal-model controller
        delta_c: override of ctrl.delta_c (0 allowed, giving the uncoupled loop)
    """
    if ss.p != ctrl.p:
        raise DimensionError("controller", f"plant has {ss.p} inputs but controller has {ctrl.p}")
    delta = ctrl.delta_c if delta_c is None else float(delta_c)
    if delta < 0:
        raise DimensionError("delta_c", f"must be non-negative, got {delta}")
    plant = apply_output_feedback(ss, ctrl.Dc) if np.any(ctrl.Dc) else ss
    nm = plant.normalized()
    Ae_n, Be_n, Ce_n, De = _closed_loop_blocks(nm, ctrl, delta)

    # original coordinates: x̃ = Lᵀx
    L = nm.L
    n_x = ss.n_x
    Sl = block_diag(L.T, np.eye(ctrl.n_c))
    Ae = np.linalg.solve(Sl, Ae_n @ Sl)
    Be = np.linalg.solve(Sl, Be_n)
    Ce = Ce_n @ Sl
    return ClosedLoopSystem(
        Ae=Ae, Be=Be, Ce=Ce, De=De, Ae_n=Ae_n, Be_n=Be_n, Ce_n=Ce_n, L=L,
        n_x=n_x, n_c=ctrl.n_c, p=ctrl.p, n_d1=ss.n_d1, n_d3=ss.n_d3,
        delta_c=delta, plant=plant, controller=ctrl,
    )


def _check_signal(clsys: ClosedLoopSystem, sig: SignalModel):
    if sig.p != clsys.p:
        raise DimensionError("signal.a0", f"expected {clsys.p} reference components, got {sig.p}")
    if sig.nw != clsys.n_w:
        raise DimensionError(
            "signal.b0",
            f"expected {clsys.n_w} disturbance components (n_d1={clsys.n_d1}, p={clsys.p}, n_d3={clsys.n_d3}), got {sig.nw}",
        )


def notch(times, values, freqs) -> np.ndarray:
    """Remove sinusoids at ``freqs`` (rad/s) by least squares over the given samples"""
    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if not len(freqs) or t.size < 2 * len(freqs) + 1:
        return v.copy()
    basis = np.hstack([np.column_stack([np.cos(w * t), np.sin(w * t)]) for w in freqs])
    coef, *_ = np.linalg.lstsq(basis, v, rcond=None)
    return v - basis @ coef


@dataclass
class SimulationResult:
    """Sampled closed-loop trajectory

    ``untracked_freqs`` lists signal tones outside the internal model; the
    window metrics notch them out before measuring the tracking error.
    """

    t: np.ndarray
    y: np.ndarray
    y_ref: np.ndarray
    energy: np.ndarray
    dt: float
    scheme: str = "implicit midpoint"
    untracked_freqs: list[float] = field(default_factory=list)

    @property
    def e(self) -> np.ndarray:
        return self.y - self.y_ref

    def final_window_error(self, fraction: float = 0.1, notched: bool = True) -> float:
        return final_window_error(self, fraction, notched)


def final_window_error(res: SimulationResult, fraction: float = 0.1, notched: bool = True) -> float:
    """max‖e(t)‖ over the last ``fraction`` of the horizon"""
    start = min(int(np.floor((1.0 - fraction) * (res.t.size - 1))), res.t.size - 1)
    t = res.t[start:]
    e = res.e[start:]
    if notched and res.untracked_freqs:
        e = notch(t, e, res.untracked_freqs)
    return float(np.max(np.linalg.norm(e, axis=1)))


@dataclass(frozen=True)
class TrackingMetric:
    final_error: float
    reference_peak: float
    threshold: float

    @property
    def ratio(self) -> float:
        return self.final_error / self.reference_peak if self.reference_peak > 0 else float("inf")

    @property
    def passed(self) -> bool:
        return self.final_error <= self.threshold * self.reference_peak


def tracking_metric(res: SimulationResult, fraction: float = 0.1, threshold: float = 0.01) -> TrackingMetric:
    """Final-window error against ``threshold`` times max‖y_ref‖"""
    peak = float(np.max(np.linalg.norm(res.y_ref, axis=1))) if res.y_ref.size else 0.0
    return TrackingMetric(final_error=final_window_error(res, fraction), reference_peak=peak, threshold=threshold)


def settling_horizon(abscissa: float, fraction: float = 0.1, reduction: float = 1e-4) -> float:
    """Horizon whose final window starts once e^{abscissa·t} has fallen below ``reduction``

    Returns inf when the loop is not exponentially stable or the window covers the whole run.
    """
    if not abscissa < 0 or fraction >= 1:
        return float("inf")
    return float(np.log(1.0 / reduction) / -abscissa / (1.0 - fraction))


def simulate(clsys: ClosedLoopSystem, sig: SignalModel, horizon: float, dt: float,
             x0: Optional[np.ndarray] = None, strict: bool = False,
             samples_per_period: int = 20) -> SimulationResult:
    """Implicit midpoint integration of the closed loop

    Args:
        clsys: assembled closed loop
        sig: reference/disturbance signal
        horizon: final time (s)
        dt: fixed step (s)
        x0: initial state (x, x_c) in plant coordinates, zero by default
        strict: raise StepSizeError instead of warning when dt is too coarse
        samples_per_period: steps required per period of the fastest tone

    Returns:
        SimulationResult sampled at every step
    """
    if not dt > 0 or not horizon > 0:
        raise StepSizeError(f"dt and horizon must be positive, got dt={dt}, horizon={horizon}")
    _check_signal(clsys, sig)
    fastest = max([0.0, *sig.freqs, *clsys.controller.freqs]) / (2 * np.pi)
    if fastest > 0 and dt > 1.0 / (samples_per_period * fastest):
        message = (f"dt={dt:g} resolves {fastest:g} Hz with fewer than {samples_per_period} "
                   f"steps per period (need dt <= {1.0 / (samples_per_period * fastest):g})")
        if strict:
            raise StepSizeError(message)
        logger.warning(f"步长过大: {message}")

    steps = int(round(horizon / dt))
    t = np.arange(steps + 1) * dt
    n_e = clsys.n_e
    A = clsys.Ae_n
    lu = lu_factor(np.eye(n_e) - 0.5 * dt * A)
    Phi = lu_solve(lu, np.eye(n_e) + 0.5 * dt * A)
    Gamma = lu_solve(lu, dt * clsys.Be_n)

    y_ref_mid, w_mid = sig.evaluate(t[:-1] + 0.5 * dt)
    r_mid = np.hstack([y_ref_mid, w_mid])
    y_ref, w = sig.evaluate(t)

    z = np.zeros(n_e) if x0 is None else clsys.to_normalized(np.asarray(x0, dtype=float))
    y = np.empty((steps + 1, clsys.p))
    energy = np.empty(steps + 1)
    Ce = clsys.Ce_n
    for k in range(steps + 1):
        y[k] = Ce @ z
        energy[k] = 0.5 * z @ z
        if k < steps:
            z = Phi @ z + Gamma @ r_mid[k]
    y += np.hstack([y_ref, w]) @ clsys.De.T
    if not np.all(np.isfinite(energy)):
        logger.warning("仿真能量出现非有限值, 闭环可能不稳定")

    res = SimulationResult(t=t, y=y, y_ref=y_ref, energy=energy, dt=dt,
                           untracked_freqs=clsys.untracked(sig.freqs))
    logger.info(f"仿真完成: {steps} 步, dt={dt:g}, 末段误差 {res.final_window_error():.6e}")
    return res


@dataclass(frozen=True)
class RegulatorEntry:
    mu: float
    Sigma: np.ndarray
    output: np.ndarray
    reference: np.ndarray
    residual: float
    in_internal_model: bool

    @property
    def error(self) -> np.ndarray:
        return self.output - self.reference


@dataclass
class RegulatorSolution:
    """Steady state Σ(t) = Σ_μ Σ_μ·e^{iμt} of the closed loop"""

    entries: list[RegulatorEntry]
    tol: float

    @property
    def max_residual(self) -> float:
        return max((e.residual for e in self.entries if e.in_internal_model), default=0.0)

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tol

    def predicted_output(self, times) -> np.ndarray:
        t = np.atleast_1d(np.asarray(times, dtype=float))
        out = sum(np.outer(np.exp(1j * e.mu * t), e.output) for e in self.entries)
        return np.real(out)

    def predicted_error(self, times) -> np.ndarray:
        t = np.atleast_1d(np.asarray(times, dtype=float))
        out = sum(np.outer(np.exp(1j * e.mu * t), e.error) for e in self.entries)
        return np.real(out)

    def steady_error_amplitude(self) -> dict[float, float]:
        """Amplitude of the asymptotic error per frequency outside the internal model"""
        amplitude: dict[float, float] = {}
        for e in self.entries:
            if not e.in_internal_model:
                scale = 1.0 if e.mu == 0 else 2.0
                amplitude[abs(e.mu)] = float(scale * np.linalg.norm(e.error))
        return amplitude

    def to_dict(self) -> dict:
        data = {"passed": self.passed, "max_residual": self.max_residual, "tol": self.tol}
        for e in self.entries:
            tag = "internal model" if e.in_internal_model else "not in internal model"
            data[f"mu={e.mu:+.6g}"] = f"residual={e.residual:.3e} |error|={np.linalg.norm(e.error):.3e} ({tag})"
        return data


def solve_regulator_steady_state(clsys: ClosedLoopSystem, sig: SignalModel, tol: float = 1e-8) -> RegulatorSolution:
    """Solve (iμ - Ae)Σ_μ = Be·[y_μ; w_μ] for every tone of the signal

    At internal-model frequencies Ce·Σ_μ + De·[y_μ; w_μ] must reproduce y_μ;
    elsewhere the mismatch is the predicted steady error.
    """
    _check_signal(clsys, sig)
    entries = []
    ce_norm = np.linalg.norm(clsys.Ce_n)
    de_norm = np.linalg.norm(clsys.De)
    Sl_inv = block_diag(np.linalg.inv(clsys.L.T), np.eye(clsys.n_c))
    for mu, y_mu, w_mu in sig.complex_coefficients():
        r = np.concatenate([y_mu, w_mu])
        in_model = not clsys.untracked([mu])
        if not np.any(r):
            Sigma = np.zeros(clsys.n_e, dtype=complex)
            output = np.zeros(clsys.p, dtype=complex)
            residual = 0.0
        else:
            Sigma_n = resolvent_solve(clsys.Ae_n, 1j * mu, clsys.Be_n @ r, context=f"μ={mu:g}")
            output = clsys.Ce_n @ Sigma_n + clsys.De @ r
            scale = ce_norm * np.linalg.norm(Sigma_n) + de_norm * np.linalg.norm(r) + np.linalg.norm(y_mu)
            residual = float(np.linalg.norm(output - y_mu) / max(scale, np.finfo(float).tiny))
            Sigma = Sl_inv @ Sigma_n
        entries.append(RegulatorEntry(mu=mu, Sigma=Sigma, output=output, reference=y_mu,
                                      residual=residual, in_internal_model=in_model))
    solution = RegulatorSolution(entries=entries, tol=tol)
    if not solution.passed:
        logger.warning(f"调节方程残差 {solution.max_residual:.3e} 超过容差 {tol:.1e}")
    return solution


@dataclass(frozen=True)
class DecayRateEstimate:
    alpha: float
    decaying: bool
    n_points: int
    method: str


def estimate_decay_rate(res: SimulationResult, start_fraction: float = 0.5, end_fraction: float = 1.0,
                        noise_floor: Optional[float] = None) -> DecayRateEstimate:
    """Exponential rate α of the tracking-error envelope, ‖e(t)‖ ~ e^{-αt}

    The envelope is the sequence of local maxima of ‖e‖ over the window (or
    the running maximum from the right when there are fewer than three).

    Raises:
        DecayRateUndefinedError: the error stays below the noise floor
    """
    n = res.t.size
    lo, hi = int(start_fraction * (n - 1)), int(end_fraction * (n - 1)) + 1
    t = res.t[lo:hi]
    e = res.e[lo:hi]
    if res.untracked_freqs:
        e = notch(t, e, res.untracked_freqs)
    norm = np.linalg.norm(e, axis=1)
    if noise_floor is None:
        ref = float(np.max(np.abs(res.y_ref))) if res.y_ref.size else 0.0
        noise_floor = 1e-12 * max(1.0, ref)
    if not np.any(norm > noise_floor):
        raise DecayRateUndefinedError(f"tracking error below noise floor {noise_floor:.1e} on the whole window")

    peaks, _ = find_peaks(norm)
    if peaks.size >= 3:
        t_fit, v_fit, method = t[peaks], norm[peaks], "peaks"
    else:
        t_fit, v_fit, method = t, np.maximum.accumulate(norm[::-1])[::-1], "running max"
    keep = v_fit > noise_floor
    if np.count_nonzero(keep) < 2:
        raise DecayRateUndefinedError("fewer than two envelope points above the noise floor")
    slope, _ = np.polyfit(t_fit[keep], np.log(v_fit[keep]), 1)
    alpha = float(-slope)
    return DecayRateEstimate(alpha=alpha, decaying=alpha > 0, n_points=int(np.count_nonzero(keep)), method=method)


@dataclass
class LyapunovCertificate:
    """V_e = (x + δc·H·x_c)ᵀP(x + δc·H·x_c) + x_cᵀPc·x_c and its derivative"""

    P: np.ndarray
    P_normalized: np.ndarray
    Pc: np.ndarray
    Pc0: np.ndarray
    eps_c: float
    H: np.ndarray
    min_eig_neg_derivative: float
    p_min_eig: float
    pc_min_eig: float
    pc0_residual: float
    abscissa: float
    valid: bool
    reason: str = ""
    eps_table: list[tuple[float, float]] = field(default_factory=list)

    def to_dict(self) -> dict:
        data = {
            "valid": self.valid,
            "reason": self.reason or "-",
            "eps_c": self.eps_c,
            "min_eig_neg_derivative": self.min_eig_neg_derivative,
            "P.min_eig": self.p_min_eig,
            "Pc.min_eig": self.pc_min_eig,
            "Pc0.residual": self.pc0_residual,
            "closed_loop.abscissa": self.abscissa,
        }
        for eps, value in self.eps_table:
            data[f"eps={eps:.3e}"] = value
        return data


def lyapunov_certificate(ss_stab: StateSpaceModel, ctrl: InternalModelController,
                         H: Optional[SylvesterSolution] = None, eps_grid=None) -> LyapunovCertificate:
    """Build the closed-loop Lyapunov function and check its derivative

    Args:
        ss_stab: exponentially stable plant (already carrying the Dc feedback)
        ctrl: controller; its δc is used and its Dc is not applied again
        H: solve_H(ss_stab, ctrl), computed when omitted
        eps_grid: candidate εc values, logarithmic 1e-6..1 with 25 points by default
    """
    eps_grid = np.logspace(-6, 0, 25) if eps_grid is None else np.asarray(eps_grid, dtype=float)
    nm = ss_stab.normalized()
    delta = ctrl.delta_c
    n_x, n_c = ss_stab.n_x, ctrl.n_c
    Ae, _, _, _ = _closed_loop_blocks(nm, ctrl, delta)
    abscissa = spectral_abscissa(Ae)
    empty = np.zeros((0, 0))

    def failed(reason: str, **extra) -> LyapunovCertificate:
        logger.warning(f"Lyapunov 证书失败: {reason}")
        values = dict(P=empty, P_normalized=empty, Pc=empty, Pc0=empty, eps_c=float("nan"), H=empty,
                      min_eig_neg_derivative=float("nan"), p_min_eig=float("nan"), pc_min_eig=float("nan"),
                      pc0_residual=float("nan"))
        values.update(extra)
        return LyapunovCertificate(abscissa=abscissa, valid=False, reason=reason, **values)

    if spectral_abscissa(nm.A) >= 0:
        return failed("plant is not exponentially stable")
    if H is None:
        H = solve_H(ss_stab, ctrl)

    eye = np.eye(n_x)
    P1 = solve_continuous_lyapunov(nm.A.T, -2.0 * eye)
    P2 = solve_continuous_lyapunov(nm.A.T, -2.0 * nm.C.T @ nm.C)
    P = P1 + P2
    P = 0.5 * (P + P.T)
    p_min = float(np.linalg.eigvalsh(P)[0])

    F = ctrl.Jc + delta ** 2 * ctrl.Bc @ H.CH
    if spectral_abscissa(F) >= 0:
        return failed("Jc + δc²·Bc·CH is not Hurwitz", P=P, p_min_eig=p_min, H=H.H)
    Pc0 = solve_continuous_lyapunov(F.T, -delta ** 2 * np.eye(n_c))
    Pc0 = 0.5 * (Pc0 + Pc0.T)
    pc0_residual = float(np.linalg.norm(Pc0 @ F + F.T @ Pc0 + delta ** 2 * np.eye(n_c))
                         / max(1.0, np.linalg.norm(Pc0) * np.linalg.norm(F)))
    pc0_min = float(np.linalg.eigvalsh(Pc0)[0])

    S = np.block([[eye, delta * H.H_normalized], [np.zeros((n_c, n_x)), np.eye(n_c)]])
    table = []
    for eps in eps_grid:
        Pe = S.T @ block_diag(P, eps * Pc0) @ S
        Q = -(Ae.T @ Pe + Pe @ Ae)
        table.append((float(eps), float(np.linalg.eigvalsh(0.5 * (Q + Q.T))[0])))
    eps_c, best = max(table, key=lambda item: item[1])

    valid = p_min > 0 and pc0_min > 0 and best > 0
    reason = "" if valid else (
        "P not positive definite" if p_min <= 0 else
        "Pc0 not positive definite" if pc0_min <= 0 else
        "no εc on the grid makes the derivative negative definite"
    )
    cert = LyapunovCertificate(
        P=nm.L @ P @ nm.L.T, P_normalized=P, Pc=eps_c * Pc0, Pc0=Pc0, eps_c=eps_c, H=H.H,
        min_eig_neg_derivative=best, p_min_eig=p_min, pc_min_eig=eps_c * pc0_min, pc0_residual=pc0_residual,
        abscissa=abscissa, valid=valid, reason=reason, eps_table=table,
    )
    if valid and abscissa >= 0:
        logger.error(f"证书有效但闭环谱横坐标 {abscissa:.3e} >= 0, 数值结果不一致")
    logger.info(f"Lyapunov 证书: valid={valid}, εc={eps_c:.3e}, 最小特征值 {best:.3e}")
    return cert
