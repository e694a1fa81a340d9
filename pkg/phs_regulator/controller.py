"""Internal-model controller: construction, complex diagonalization, checks and gain sweep"""

import asyncio
from dataclasses import dataclass, field, replace
from typing import Any, Optional

import numpy as np
from scipy.linalg import block_diag

from .core import DEFAULT_TOL, numerical_rank
from .discretize import StateSpaceModel, resolvent_solve
from .errors import ControllerError, ModelFormatError, NoStableGainError
from .logger import logger


def _check_freqs(freqs) -> tuple[float, ...]:
    values = tuple(float(w) for w in np.atleast_1d(np.asarray(freqs, dtype=float)))
    for w in values:
        if not np.isfinite(w) or w <= 0:
            raise ControllerError(f"frequencies must be positive and finite, got {w} (use include_zero for ω=0)")
    if any(b <= a for a, b in zip(values, values[1:])):
        raise ControllerError(f"frequencies must be strictly increasing without duplicates, got {list(values)}")
    return values


def _gain_matrix(name: str, value, p: int) -> np.ndarray:
    mat = np.array(value, dtype=float)
    if mat.ndim == 0:
        return float(mat) * np.eye(p)
    if mat.shape != (p, p):
        raise ControllerError(f"{name} must be a scalar or a {p}x{p} matrix, got shape {mat.shape}")
    return mat


def build_internal_model(freqs, p: int, include_zero: bool) -> tuple[np.ndarray, np.ndarray]:
    """Real internal model (Jc, Bc)

    Jc = blkdiag(0_p, J_1, …, J_q) with J_k = [[0, ω_k I], [-ω_k I, 0]] and
    Bc stacks I_p and [I_p; 0]; the zero-frequency block is dropped when
    ``include_zero`` is false.

    Args:
        freqs: positive, strictly increasing frequencies ω_1 < … < ω_q (rad/s)
        p: number of outputs
        include_zero: include the constant (ω_0 = 0) block

    Returns:
        (Jc, Bc) of sizes n_c×n_c and n_c×p
    """
    if int(p) < 1:
        raise ControllerError(f"p must be positive, got {p}")
    p = int(p)
    freqs = _check_freqs(freqs) if np.size(freqs) else ()
    if not freqs and not include_zero:
        raise ControllerError("internal model is empty: give frequencies or include_zero")

    eye = np.eye(p)
    zero = np.zeros((p, p))
    J_blocks, B_blocks = [], []
    if include_zero:
        J_blocks.append(zero)
        B_blocks.append(eye)
    for w in freqs:
        J_blocks.append(np.block([[zero, w * eye], [-w * eye, zero]]))
        B_blocks.append(np.vstack([eye, zero]))
    return block_diag(*J_blocks), np.vstack(B_blocks)


@dataclass(frozen=True)
class InternalModelController:
    """ẋc = Jc·xc + δc·Bc·(y_ref - y), u = δc·Bcᵀ·xc + Dc·(y_ref - y)"""

    freqs: tuple[float, ...]
    p: int
    include_zero: bool
    Jc: np.ndarray
    Bc: np.ndarray
    Dc: np.ndarray
    delta_c: float

    def __post_init__(self):
        object.__setattr__(self, "freqs", _check_freqs(self.freqs) if len(self.freqs) else ())
        Jc = np.array(self.Jc, dtype=float)
        Bc = np.array(self.Bc, dtype=float)
        n_c = self.p * (2 * len(self.freqs) + (1 if self.include_zero else 0))
        if Jc.shape != (n_c, n_c) or Bc.shape != (n_c, self.p):
            raise ControllerError(
                f"expected Jc {n_c}x{n_c} and Bc {n_c}x{self.p}, got {Jc.shape} and {Bc.shape}"
            )
        if np.any(Jc + Jc.T != 0):
            raise ControllerError("Jc must be skew-symmetric")
        Dc = _gain_matrix("Dc", self.Dc, self.p)
        if np.linalg.norm(Dc - Dc.T) > DEFAULT_TOL * max(1.0, np.linalg.norm(Dc)):
            raise ControllerError("Dc must be symmetric")
        if np.linalg.eigvalsh(Dc)[0] < -DEFAULT_TOL:
            raise ControllerError("Dc must be positive semidefinite")
        if not float(self.delta_c) > 0:
            raise ControllerError(f"delta_c must be positive, got {self.delta_c}")
        object.__setattr__(self, "Jc", Jc)
        object.__setattr__(self, "Bc", Bc)
        object.__setattr__(self, "Dc", Dc)
        object.__setattr__(self, "delta_c", float(self.delta_c))

    @classmethod
    def build(cls, freqs, p: int, include_zero: bool = False, Dc: Any = 0.0, delta_c: float = 0.1) -> "InternalModelController":
        Jc, Bc = build_internal_model(freqs, p, include_zero)
        return cls(freqs=tuple(np.atleast_1d(freqs).tolist()), p=p, include_zero=include_zero,
                   Jc=Jc, Bc=Bc, Dc=Dc, delta_c=delta_c)

    @property
    def n_c(self) -> int:
        return self.Jc.shape[0]

    @property
    def all_freqs(self) -> tuple[float, ...]:
        """Frequencies of the internal model including 0 when present"""
        return ((0.0,) if self.include_zero else ()) + self.freqs

    def with_delta(self, delta_c: float) -> "InternalModelController":
        return replace(self, delta_c=delta_c)

    def with_Dc(self, Dc) -> "InternalModelController":
        return replace(self, Dc=Dc)


@dataclass(frozen=True)
class ControllerSettings:
    """Controller parameters as stored in model files and scenarios"""

    freqs: tuple[float, ...]
    include_zero: bool = False
    Dc: Any = 0.0
    delta_c: float = 0.1

    def build(self, p: int) -> InternalModelController:
        return InternalModelController.build(self.freqs, p, self.include_zero, self.Dc, self.delta_c)


@dataclass(frozen=True)
class DiagonalizedInternalModel:
    """Complex form G1 = T⁻¹·Jc·T (diagonal), G2 = T⁻¹·Bc"""

    T: np.ndarray
    Tinv: np.ndarray
    G1: np.ndarray
    G2: np.ndarray
    eigenvalues: tuple[complex, ...]
    p: int


def _transform(freqs, p: int, include_zero: bool) -> tuple[np.ndarray, np.ndarray]:
    eye = np.eye(p)
    T_blocks, Tinv_blocks = [], []
    if include_zero:
        T_blocks.append(eye.astype(complex))
        Tinv_blocks.append(eye.astype(complex))
    for _ in freqs:
        T_blocks.append(np.block([[eye, eye], [1j * eye, -1j * eye]]))
        Tinv_blocks.append(0.5 * np.block([[eye, -1j * eye], [eye, 1j * eye]]))
    return block_diag(*T_blocks), block_diag(*Tinv_blocks)


def diagonalize_internal_model(Jc, Bc, freqs, p: int, include_zero: Optional[bool] = None,
                               tol: float = 1e-12) -> DiagonalizedInternalModel:
    """Block transform T with T_k = [[I, I], [iI, -iI]]

    ``include_zero`` is inferred from the size of Jc when omitted. The result
    is verified against the expected diagonal G1 = blkdiag(iω_0, iω_1, -iω_1, …)
    and G2 = [I; ½I; …; ½I].
    """
    Jc = np.asarray(Jc, dtype=float)
    Bc = np.asarray(Bc, dtype=float)
    freqs = _check_freqs(freqs) if np.size(freqs) else ()
    q = len(freqs)
    if include_zero is None:
        include_zero = Jc.shape[0] == p * (2 * q + 1)
    n_c = p * (2 * q + (1 if include_zero else 0))
    if Jc.shape != (n_c, n_c) or Bc.shape != (n_c, p):
        raise ControllerError(f"(Jc, Bc) shapes {Jc.shape}, {Bc.shape} do not match {q} frequencies with p={p}")

    T, Tinv = _transform(freqs, p, include_zero)
    G1 = Tinv @ Jc @ T
    G2 = Tinv @ Bc

    lam = ([0j] if include_zero else []) + [s * 1j * w for w in freqs for s in (1, -1)]
    expected_G1 = np.diag(np.repeat(np.array(lam, dtype=complex), p))
    expected_G2 = np.vstack(([np.eye(p)] if include_zero else []) + [0.5 * np.eye(p)] * (2 * q))
    scale = max(1.0, max(freqs, default=0.0))
    if np.linalg.norm(G1 - expected_G1) > tol * scale or np.linalg.norm(G2 - expected_G2) > tol:
        raise ControllerError("internal model does not have the expected block structure")
    return DiagonalizedInternalModel(T=T, Tinv=Tinv, G1=G1, G2=G2, eigenvalues=tuple(lam), p=p)


@dataclass(frozen=True)
class FrequencyCondition:
    freq: float
    lam: complex
    rank_stacked: int
    rank_resolvent: int
    rank_Bc: int

    @property
    def passed(self) -> bool:
        return self.rank_stacked == self.rank_resolvent + self.rank_Bc


@dataclass
class InternalModelReport:
    """Range condition per ±iω_k and the kernel condition on Bc"""

    p: int
    rank_Bc: int
    entries: list[FrequencyCondition] = field(default_factory=list)

    @property
    def kernel_ok(self) -> bool:
        return self.rank_Bc == self.p

    @property
    def passed(self) -> bool:
        return self.kernel_ok and all(e.passed for e in self.entries)

    def failed_freqs(self) -> list[float]:
        return sorted({e.freq for e in self.entries if not e.passed})

    def to_dict(self) -> dict:
        data = {"passed": self.passed, "rank_Bc": self.rank_Bc, "kernel_ok": self.kernel_ok}
        for e in self.entries:
            data[f"range.{e.lam.imag:+.6g}i"] = "pass" if e.passed else "FAIL"
        return data


def check_internal_model_conditions(Jc, Bc, freqs, tol: float = DEFAULT_TOL) -> InternalModelReport:
    """ran(μ - Jc) ∩ ran(Bc) = {0} for μ = ±iω and ker(Bc) = {0}

    Args:
        Jc, Bc: controller matrices
        freqs: frequencies to check, 0 allowed (checked once)
        tol: relative rank tolerance
    """
    Jc = np.asarray(Jc, dtype=float)
    Bc = np.asarray(Bc, dtype=float)
    p = Bc.shape[1]
    report = InternalModelReport(p=p, rank_Bc=numerical_rank(Bc, tol))
    eye = np.eye(Jc.shape[0])
    for w in sorted({float(abs(f)) for f in np.atleast_1d(freqs)}):
        for lam in ((0j,) if w == 0 else (1j * w, -1j * w)):
            resolvent = lam * eye - Jc
            report.entries.append(FrequencyCondition(
                freq=w,
                lam=lam,
                rank_stacked=numerical_rank(np.hstack([resolvent, Bc.astype(complex)]), tol),
                rank_resolvent=numerical_rank(resolvent, tol),
                rank_Bc=report.rank_Bc,
            ))
    if not report.passed:
        logger.warning(f"内模条件未满足: 频率 {report.failed_freqs()}, rank(Bc)={report.rank_Bc}/{p}")
    return report


@dataclass(frozen=True)
class SylvesterSolution:
    """H with H·Jc = A·H - B·Bcᵀ, and the extended output CH = C·H - D·Bcᵀ

    ``H_normalized`` lives in energy-normalized coordinates, ``H`` in the
    plant's own coordinates.
    """

    H: np.ndarray
    H_normalized: np.ndarray
    CH: np.ndarray
    CH_T: np.ndarray
    transfer_values: np.ndarray
    sylvester_residual: float
    transfer_residual: float


def solve_H(ss: StateSpaceModel, ctrl: InternalModelController) -> SylvesterSolution:
    """Solve the controller-plant Sylvester equation column block by column block

    In the diagonal basis each block is H̃_j = -(λ_j - A)⁻¹B; the real H is
    H̃·T⁻¹. The plant must not have eigenvalues at ±iω_k (pass the
    stabilized plant).
    """
    if ss.p != ctrl.p:
        raise ControllerError(f"plant has {ss.p} inputs but controller expects {ctrl.p}")
    diag = diagonalize_internal_model(ctrl.Jc, ctrl.Bc, ctrl.freqs, ctrl.p, ctrl.include_zero)
    nm = ss.normalized()
    p = ctrl.p
    H_diag = np.zeros((ss.n_x, ctrl.n_c), dtype=complex)
    P_values = np.zeros((p, ctrl.n_c), dtype=complex)
    B = nm.B.astype(complex)
    for j, lam in enumerate(diag.eigenvalues):
        X = resolvent_solve(nm.A, lam, B, context=f"ω={lam.imag:g}")
        H_diag[:, j * p:(j + 1) * p] = -X
        P_values[:, j * p:(j + 1) * p] = nm.C @ X + nm.D

    H_complex = H_diag @ diag.Tinv
    imag = np.linalg.norm(H_complex.imag)
    if imag > 1e-8 * max(1.0, np.linalg.norm(H_complex.real)):
        raise ControllerError(f"H has a non-negligible imaginary part ({imag:.3e})")
    Hn = H_complex.real

    residual = np.linalg.norm(Hn @ ctrl.Jc - nm.A @ Hn + nm.B @ ctrl.Bc.T)
    scale = (np.linalg.norm(nm.A) * np.linalg.norm(Hn) + np.linalg.norm(Hn) * np.linalg.norm(ctrl.Jc)
             + np.linalg.norm(nm.B) * np.linalg.norm(ctrl.Bc))
    CH = nm.C @ Hn - nm.D @ ctrl.Bc.T
    CH_T = CH @ diag.T
    transfer_residual = np.linalg.norm(CH_T + P_values) / max(1.0, np.linalg.norm(P_values))

    solution = SylvesterSolution(
        H=nm.to_original(Hn),
        H_normalized=Hn,
        CH=CH,
        CH_T=CH_T,
        transfer_values=P_values,
        sylvester_residual=float(residual / max(scale, np.finfo(float).tiny)),
        transfer_residual=float(transfer_residual),
    )
    logger.debug(
        f"H 已求解: Sylvester 残差 {solution.sylvester_residual:.3e}, 传递函数残差 {solution.transfer_residual:.3e}"
    )
    return solution


@dataclass(frozen=True)
class GainSweepRow:
    delta_c: float
    abscissa: float
    stable: bool


@dataclass
class GainSweepResult:
    table: list[GainSweepRow]
    recommended_delta_c: float
    Dc: np.ndarray

    def stable_deltas(self) -> list[float]:
        return [row.delta_c for row in self.table if row.stable]

    def to_dict(self) -> dict:
        data = {"recommended_delta_c": self.recommended_delta_c, "Dc": np.asarray(self.Dc).tolist()}
        for row in self.table:
            data[f"delta_c={row.delta_c:g}"] = f"abscissa={row.abscissa:.6e} {'stable' if row.stable else 'unstable'}"
        return data


def _check_grid(delta_grid) -> list[float]:
    grid = [float(d) for d in delta_grid]
    if not grid or any(d <= 0 for d in grid) or any(b <= a for a, b in zip(grid, grid[1:])):
        raise ControllerError("delta_grid must be positive and strictly increasing")
    return grid


def _evaluate_gain(ss: StateSpaceModel, ctrl: InternalModelController, delta_c: float) -> GainSweepRow:
    # lazy import avoids circular imports
    from .closedloop import assemble_closed_loop

    clsys = assemble_closed_loop(ss, ctrl.with_delta(delta_c))
    abscissa = clsys.spectral_abscissa()
    return GainSweepRow(delta_c=delta_c, abscissa=abscissa, stable=clsys.is_stable(abscissa))


async def gain_sweep_async(ss: StateSpaceModel, ctrl: InternalModelController, delta_grid,
                           workers: int = 4) -> GainSweepResult:
    """Evaluate the closed loop for every δc of the grid concurrently

    Rows are returned in grid order. The recommendation is the stable δc with
    the most negative spectral abscissa; ties go to the larger δc.

    Raises:
        NoStableGainError: no grid point is stable (the table is attached)
    """
    grid = _check_grid(delta_grid)
    semaphore = asyncio.Semaphore(max(1, int(workers)))

    async def evaluate(delta_c: float) -> GainSweepRow:
        async with semaphore:
            return await asyncio.to_thread(_evaluate_gain, ss, ctrl, delta_c)

    table = list(await asyncio.gather(*(evaluate(d) for d in grid)))
    for row in table:
        logger.debug(f"δc={row.delta_c:g}: 谱横坐标 {row.abscissa:.6e} ({'稳定' if row.stable else '不稳定'})")

    stable = [row for row in table if row.stable]
    if not stable:
        logger.error(f"增益扫描未找到稳定的 δc (共 {len(table)} 个网格点)")
        raise NoStableGainError("no stabilizing delta_c on the grid", table)
    best = min(stable, key=lambda row: (row.abscissa, -row.delta_c))
    logger.info(f"增益扫描完成: 推荐 δc={best.delta_c:g}, 谱横坐标 {best.abscissa:.6e}")
    return GainSweepResult(table=table, recommended_delta_c=best.delta_c, Dc=ctrl.Dc.copy())


def gain_sweep(ss: StateSpaceModel, ctrl: InternalModelController, delta_grid, workers: int = 4) -> GainSweepResult:
    """Synchronous wrapper around gain_sweep_async

    Starts its own event loop, so it cannot be called from a coroutine;
    await gain_sweep_async there instead.

    Raises:
        ControllerError: called while an event loop is running
    """
    try:
        asyncio.get_running_loop()
    except RuntimeError:
        return asyncio.run(gain_sweep_async(ss, ctrl, delta_grid, workers))
    raise ControllerError("gain_sweep cannot run inside an event loop; await gain_sweep_async instead")


def controller_to_document(ctrl: InternalModelController) -> dict:
    """JSON-ready controller document (dense Jc/Bc kept for audit)"""
    return {
        "freqs": list(ctrl.freqs),
        "p": ctrl.p,
        "include_zero": ctrl.include_zero,
        "delta_c": ctrl.delta_c,
        "Dc": ctrl.Dc.tolist(),
        "Jc": ctrl.Jc.tolist(),
        "Bc": ctrl.Bc.tolist(),
    }


def controller_from_document(doc: dict) -> InternalModelController:
    """Rebuild a controller; stored Jc/Bc must agree with the rebuilt ones"""
    if not isinstance(doc, dict):
        raise ModelFormatError("", "controller document must be an object")
    for key in ("freqs", "p", "delta_c"):
        if key not in doc:
            raise ModelFormatError(key, "is required")
    try:
        ctrl = InternalModelController.build(
            doc["freqs"], int(doc["p"]), bool(doc.get("include_zero", False)),
            doc.get("Dc", 0.0), float(doc["delta_c"]),
        )
    except (TypeError, ValueError) as e:
        raise ModelFormatError("controller", str(e)) from e
    for key in ("Jc", "Bc"):
        if key in doc:
            try:
                stored = np.array(doc[key], dtype=float)
            except (TypeError, ValueError) as e:
                raise ModelFormatError(key, f"not a real matrix ({e})") from e
            if stored.shape != getattr(ctrl, key).shape or not np.allclose(stored, getattr(ctrl, key), atol=1e-12):
                raise ModelFormatError(key, "does not match the matrix rebuilt from freqs/p/include_zero")
    return ctrl
