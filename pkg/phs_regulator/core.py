"""Boundary controlled port-Hamiltonian models, port variables and assumption checks"""

from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.linalg import null_space

from .errors import DimensionError, UnsupportedOrderError
from .logger import logger

DEFAULT_TOL = 1e-10


def _as_matrix(name: str, value, rows: Optional[int] = None, cols: Optional[int] = None) -> np.ndarray:
    """Convert to a 2D float array and check its shape"""
    try:
        mat = np.array(value, dtype=float)
    except (TypeError, ValueError) as e:
        raise DimensionError(name, f"not a real matrix ({e})") from e
    if mat.ndim == 1 and mat.size == 0:
        mat = mat.reshape(0, cols or 0)
    if mat.ndim != 2:
        raise DimensionError(name, f"expected a matrix, got array with {mat.ndim} dimensions")
    if rows is not None and mat.shape[0] != rows:
        raise DimensionError(name, f"expected {rows} rows, got {mat.shape[0]}")
    if cols is not None and mat.shape[1] != cols:
        raise DimensionError(name, f"expected {cols} columns, got {mat.shape[1]}")
    return mat


def numerical_rank(mat: np.ndarray, tol: float = DEFAULT_TOL) -> int:
    """Rank from singular values above ``tol * sigma_max``"""
    if mat.size == 0:
        return 0
    sv = np.linalg.svd(mat, compute_uv=False)
    if sv[0] == 0:
        return 0
    return int(np.sum(sv > tol * sv[0]))


def sym_min_eig(mat: np.ndarray) -> float:
    """Smallest eigenvalue of the symmetric part (0.0 for empty matrices)"""
    if mat.size == 0:
        return 0.0
    sym = 0.5 * (mat + mat.conj().T)
    return float(np.linalg.eigvalsh(sym)[0])


@dataclass(frozen=True)
class PhsModel:
    """Continuous boundary controlled PHS of order 1 or 2 on ``[a, b]``

    ``H`` is either a constant ``n x n`` matrix (``H_grid`` None) or samples of
    shape ``(k, n, n)`` on the increasing grid ``H_grid``; between samples it is
    interpolated linearly. ``Bd`` follows the same convention with shape
    ``(n, n_d1)`` or ``(k, n, n_d1)`` but is piecewise constant on its grid.
    """

    n: int
    order: int
    P1: np.ndarray
    P0: np.ndarray
    G0: np.ndarray
    H: np.ndarray
    W1: np.ndarray
    W2: np.ndarray
    Wtilde: np.ndarray
    interval: tuple[float, float]
    P2: Optional[np.ndarray] = None
    H_grid: Optional[np.ndarray] = None
    Bd: Optional[np.ndarray] = None
    Bd_grid: Optional[np.ndarray] = None
    name: str = ""

    def __post_init__(self):
        n = int(self.n)
        if n < 1:
            raise DimensionError("n", f"state dimension must be positive, got {self.n}")
        if self.order not in (1, 2):
            raise UnsupportedOrderError(f"order must be 1 or 2, got {self.order}")
        width = 2 * n * self.order
        object.__setattr__(self, "n", n)
        for key in ("P1", "P0", "G0"):
            object.__setattr__(self, key, _as_matrix(key, getattr(self, key), n, n))
        P2 = np.zeros((n, n)) if self.P2 is None else _as_matrix("P2", self.P2, n, n)
        object.__setattr__(self, "P2", P2)

        W1 = _as_matrix("W1", self.W1, cols=width)
        W2 = _as_matrix("W2", self.W2 if np.size(self.W2) else np.zeros((0, width)), cols=width)
        Wt = _as_matrix("Wtilde", self.Wtilde, cols=width)
        if W1.shape[0] < 1:
            raise DimensionError("W1", "at least one control row is required")
        if W1.shape[0] + W2.shape[0] != n * self.order:
            raise DimensionError(
                "W2",
                f"expected {n * self.order - W1.shape[0]} rows so that [W1; W2] has nN rows, got {W2.shape[0]}",
            )
        if Wt.shape[0] != W1.shape[0]:
            raise DimensionError("Wtilde", f"expected {W1.shape[0]} rows (one per input), got {Wt.shape[0]}")
        object.__setattr__(self, "W1", W1)
        object.__setattr__(self, "W2", W2)
        object.__setattr__(self, "Wtilde", Wt)

        a, b = (float(v) for v in self.interval)
        if not a < b:
            raise DimensionError("interval", f"expected a < b, got [{a}, {b}]")
        object.__setattr__(self, "interval", (a, b))

        H, H_grid = self._profile("H", self.H, self.H_grid, n)
        object.__setattr__(self, "H", H)
        object.__setattr__(self, "H_grid", H_grid)
        if self.Bd is not None:
            Bd, Bd_grid = self._profile("Bd", self.Bd, self.Bd_grid, None)
            object.__setattr__(self, "Bd", Bd)
            object.__setattr__(self, "Bd_grid", Bd_grid)

    def _profile(self, key: str, value, grid, cols: Optional[int]):
        arr = np.array(value, dtype=float)
        if grid is None:
            return _as_matrix(key, arr, self.n, cols), None
        grid = np.array(grid, dtype=float).ravel()
        if arr.ndim != 3 or arr.shape[0] != grid.size or arr.shape[1] != self.n:
            raise DimensionError(key, f"expected samples of shape ({grid.size}, {self.n}, ...), got {arr.shape}")
        if cols is not None and arr.shape[2] != cols:
            raise DimensionError(key, f"expected {cols} columns per sample, got {arr.shape[2]}")
        if grid.size > 1 and np.any(np.diff(grid) <= 0):
            raise DimensionError(f"{key}.grid", "grid must be strictly increasing")
        return arr, grid

    @property
    def p(self) -> int:
        return self.W1.shape[0]

    @property
    def n_d1(self) -> int:
        if self.Bd is None:
            return 0
        return self.Bd.shape[-1]

    @property
    def n_d3(self) -> int:
        return self.W2.shape[0]

    @property
    def trace_dim(self) -> int:
        return 2 * self.n * self.order

    @property
    def W(self) -> np.ndarray:
        return np.vstack([self.W1, self.W2])

    def H_at(self, z) -> np.ndarray:
        """H evaluated at the points ``z``, shape ``(len(z), n, n)``"""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if self.H_grid is None:
            return np.broadcast_to(self.H, (z.size, self.n, self.n)).copy()
        flat = self.H.reshape(self.H.shape[0], -1)
        out = np.empty((z.size, flat.shape[1]))
        for j in range(flat.shape[1]):
            out[:, j] = np.interp(z, self.H_grid, flat[:, j])
        return out.reshape(z.size, self.n, self.n)

    def Bd_at(self, z) -> np.ndarray:
        """Distributed disturbance profile at ``z``, shape ``(len(z), n, n_d1)``"""
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if self.Bd is None:
            return np.zeros((z.size, self.n, 0))
        if self.Bd_grid is None:
            return np.broadcast_to(self.Bd, (z.size,) + self.Bd.shape).copy()
        idx = np.clip(np.searchsorted(self.Bd_grid, z, side="right") - 1, 0, self.Bd_grid.size - 1)
        return self.Bd[idx].copy()

    def H_samples(self) -> np.ndarray:
        """All stored samples of H as an array of shape ``(k, n, n)``"""
        return self.H[None, :, :] if self.H_grid is None else self.H


def perturb_model(model: PhsModel, factors) -> PhsModel:
    """Scale the entries of H elementwise by ``factors`` (n x n, symmetric)

    Used for robustness checks; the structure matrices and ports are kept.
    """
    factors = _as_matrix("factors", factors, model.n, model.n)
    factors = 0.5 * (factors + factors.T)
    return replace(model, H=model.H * factors)


@dataclass(frozen=True)
class ConstraintCheck:
    """One entry of an assumption report

    ``residual`` is the violation measure; for invertibility checks it is the
    reciprocal condition number and for positivity checks the smallest
    eigenvalue, so the pass rule is stated in ``rule``.
    """

    name: str
    residual: float
    passed: bool
    rule: str = "residual <= tol"


@dataclass
class AssumptionReport:
    """Outcome of the structural and passivity checks"""

    tol: float
    checks: list[ConstraintCheck] = field(default_factory=list)
    rank_W: Optional[int] = None
    expected_rank: Optional[int] = None
    wsw_min_eig: Optional[float] = None
    kernel_form_min_eig: Optional[float] = None

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    @property
    def structure_ok(self) -> dict[str, bool]:
        return {c.name: c.passed for c in self.checks}

    def failed(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def merge(self, other: "AssumptionReport") -> "AssumptionReport":
        merged = AssumptionReport(tol=self.tol, checks=list(self.checks) + list(other.checks))
        for key in ("rank_W", "expected_rank", "wsw_min_eig", "kernel_form_min_eig"):
            value = getattr(other, key)
            setattr(merged, key, value if value is not None else getattr(self, key))
        return merged

    def to_dict(self) -> dict:
        data = {
            "passed": self.passed,
            "tol": self.tol,
            "rank_W": self.rank_W,
            "expected_rank": self.expected_rank,
            "wsw_min_eig": self.wsw_min_eig,
            "kernel_form_min_eig": self.kernel_form_min_eig,
        }
        for c in self.checks:
            data[f"check.{c.name}"] = f"{'pass' if c.passed else 'FAIL'} residual={c.residual:.6e} ({c.rule})"
        return {k: v for k, v in data.items() if v is not None}


def _scaled(value: float, mat: np.ndarray) -> float:
    """Residual relative to the size of the matrix it was computed from"""
    return value / max(1.0, float(np.linalg.norm(mat)))


def validate_structure(model: PhsModel, tol: float = DEFAULT_TOL) -> AssumptionReport:
    """Check the sign and definiteness constraints on (P2, P1, P0, G0, H)

    Args:
        model: model to check
        tol: numerical tolerance

    Returns:
        AssumptionReport with one ConstraintCheck per constraint
    """
    report = AssumptionReport(tol=tol)

    def add(name, residual, passed, rule="residual <= tol"):
        report.checks.append(ConstraintCheck(name, float(residual), bool(passed), rule))

    for name, mat, sign in (("P2 skew", model.P2, 1), ("P1 symmetric", model.P1, -1),
                            ("P0 skew", model.P0, 1), ("G0 symmetric", model.G0, -1)):
        residual = _scaled(np.linalg.norm(mat + sign * mat.T), mat)
        add(name, residual, residual <= tol)

    g0_min = sym_min_eig(model.G0)
    add("G0 positive semidefinite", g0_min, g0_min >= -tol * max(1.0, np.linalg.norm(model.G0)), "min eig >= -tol")

    def rcond(mat):
        sv = np.linalg.svd(mat, compute_uv=False)
        return 0.0 if sv[0] == 0 else float(sv[-1] / sv[0])

    if model.order == 1:
        residual = _scaled(np.linalg.norm(model.P2), model.P1)
        add("P2 zero (order 1)", residual, residual <= tol)
        rc = rcond(model.P1)
        add("P1 invertible", rc, rc > tol, "1/cond > tol")
    else:
        rc = rcond(model.P2)
        add("P2 invertible (order 2)", rc, rc > tol, "1/cond > tol")

    samples = model.H_samples()
    h_sym = max(_scaled(np.linalg.norm(S - S.T), S) for S in samples)
    add("H symmetric", h_sym, h_sym <= tol)
    kappa = min(float(np.linalg.eigvalsh(0.5 * (S + S.T))[0]) for S in samples)
    add("H uniformly positive", kappa, kappa > tol, "kappa = min eig > tol")

    if not report.passed:
        logger.warning(f"模型 {model.name or '<未命名>'} 结构检查未通过: {', '.join(report.failed())}")
    else:
        logger.debug(f"模型 {model.name or '<未命名>'} 结构检查通过")
    return report


@dataclass(frozen=True)
class BoundaryPortMap:
    """Linear map from boundary traces to (f_∂, e_∂)"""

    Q: np.ndarray
    Rext: np.ndarray
    Sigma: np.ndarray

    @property
    def trace_dim(self) -> int:
        return self.Rext.shape[0]


def build_port_map(model: PhsModel) -> BoundaryPortMap:
    """Q, R_ext and Σ for the model's order

    Raises:
        UnsupportedOrderError: order inconsistent with P2
    """
    n = model.n
    if model.order == 1:
        if np.linalg.norm(model.P2) > DEFAULT_TOL * max(1.0, np.linalg.norm(model.P1)):
            raise UnsupportedOrderError("order 1 requires P2 = 0")
        Q = model.P1.copy()
    else:
        if numerical_rank(model.P2) < n:
            raise UnsupportedOrderError("order 2 requires an invertible P2")
        Q = np.block([[model.P1, model.P2], [-model.P2, np.zeros((n, n))]])
    if numerical_rank(Q) < Q.shape[0]:
        raise UnsupportedOrderError("Q is singular; P1 (order 1) or P2 (order 2) must be invertible")

    k = Q.shape[0]
    eye = np.eye(k)
    Rext = np.block([[Q, -Q], [eye, eye]]) / np.sqrt(2.0)
    Sigma = np.block([[np.zeros((k, k)), eye], [eye, np.zeros((k, k))]])
    return BoundaryPortMap(Q=Q, Rext=Rext, Sigma=Sigma)


def boundary_port_values(port_map: BoundaryPortMap, trace) -> tuple[np.ndarray, np.ndarray]:
    """Boundary flows and efforts from the trace vector

    Args:
        port_map: output of build_port_map
        trace: (Hx(b), [∂z Hx(b)], Hx(a), [∂z Hx(a)]) of length 2nN

    Returns:
        (f_∂, e_∂), each of length nN
    """
    trace = np.asarray(trace)
    if trace.ndim != 1 or trace.size != port_map.trace_dim:
        raise DimensionError("trace", f"expected a vector of length {port_map.trace_dim}, got shape {trace.shape}")
    values = port_map.Rext @ trace
    half = port_map.trace_dim // 2
    return values[:half], values[half:]


def check_assumption_W(model: PhsModel, tol: float = DEFAULT_TOL) -> AssumptionReport:
    """Rank/sign condition on W = [W1; W2] and the kernel-restricted passivity form"""
    port_map = build_port_map(model)
    Sigma = port_map.Sigma
    W = model.W
    expected = model.n * model.order
    report = AssumptionReport(tol=tol, expected_rank=expected)

    report.rank_W = numerical_rank(W, tol)
    report.checks.append(ConstraintCheck("W full row rank", float(expected - report.rank_W),
                                         report.rank_W == expected, "rank W = nN"))

    report.wsw_min_eig = sym_min_eig(W @ Sigma @ W.T)
    report.checks.append(ConstraintCheck("W Sigma W^T >= 0", report.wsw_min_eig,
                                         report.wsw_min_eig >= -tol, "min eig >= -tol"))

    if model.n_d3 == 0:
        Z = np.eye(model.trace_dim)
    else:
        Z = null_space(model.W2, rcond=tol)
    form = model.W1.T @ model.Wtilde + model.Wtilde.T @ model.W1 - Sigma
    report.kernel_form_min_eig = sym_min_eig(Z.T @ form @ Z)
    report.checks.append(ConstraintCheck("impedance form on ker W2 >= 0", report.kernel_form_min_eig,
                                         report.kernel_form_min_eig >= -tol, "min eig >= -tol"))

    logger.debug(
        f"W 检查: rank={report.rank_W}/{expected}, min eig(WΣWᵀ)={report.wsw_min_eig:.3e}, "
        f"核上形式最小特征值={report.kernel_form_min_eig:.3e}"
    )
    return report


def validate_model(model: PhsModel, tol: float = DEFAULT_TOL) -> AssumptionReport:
    """validate_structure followed by check_assumption_W, merged into one report"""
    report = validate_structure(model, tol)
    try:
        port_report = check_assumption_W(model, tol)
    except UnsupportedOrderError as e:
        report.checks.append(ConstraintCheck("boundary port map", 1.0, False, str(e)))
        return report
    return report.merge(port_report)
