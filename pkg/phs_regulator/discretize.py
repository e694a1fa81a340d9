"""Passive spatial discretization of order-1 port-Hamiltonian models

Two schemes are available. The default is a staggered mixed finite element
scheme: the variables are split into a cell part (piecewise constant) and a
node part (piecewise linear) so that P1 only couples the two parts, the
boundary rows prescribe one trace per pair at each end, and the discrete
energy ½ xᵀMx obeys Ė ≤ uᵀy exactly. When the boundary rows collocate with
the output this gives a plant without direct feedthrough (D = 0).

Models that admit no such split (odd n, P1 without the off-diagonal block
structure, boundary rows mixing both parts) fall back to an upwind finite
volume scheme: energy variables are piecewise constant per element,
interface efforts use an energy-dissipating upwind flux, and the boundary
traces are closed with the boundary rows plus the outgoing characteristic
combinations of the adjacent element. That scheme is passive as well but
carries a feedthrough of the order of the characteristic admittance.
"""

from dataclasses import asdict, dataclass, field, replace
from itertools import combinations
from typing import Optional

import numpy as np
from scipy.linalg import block_diag, cholesky, eigh, solve_triangular

from .core import DEFAULT_TOL, PhsModel, build_port_map, check_assumption_W, validate_structure
from .errors import (
    AssumptionError,
    DimensionError,
    DiscretizationError,
    FeedbackError,
    ResolventSingularError,
    UnsupportedOrderError,
)
from .logger import logger

SCHEME_MIXED = "mixed finite element, staggered cell/node efforts"
SCHEME_UPWIND = "upwind finite volume, characteristic boundary closure"
SCHEMES = {"mixed": SCHEME_MIXED, "upwind": SCHEME_UPWIND}

# reciprocal condition number below which λI - A counts as singular
RESOLVENT_RCOND = 1e-13


@dataclass(frozen=True)
class NormalizedModel:
    """Realization in energy-normalized coordinates x̃ = Lᵀx with M = LLᵀ

    In these coordinates the storage is ½|x̃|², so the KYP matrix, Lyapunov
    solves and resolvents are computed without the scaling of M.
    """

    A: np.ndarray
    B: np.ndarray
    Bd: np.ndarray
    Bw3: np.ndarray
    C: np.ndarray
    D: np.ndarray
    Dw3: np.ndarray
    L: np.ndarray

    def to_original(self, x_tilde: np.ndarray) -> np.ndarray:
        """Map normalized states (vector or column matrix) back to x"""
        return solve_triangular(self.L.T, x_tilde, lower=False)


@dataclass(frozen=True)
class StateSpaceModel:
    """Finite-dimensional plant ẋ = Ax + Bu + Bd·w1 + Bw3·w3, y = Cx + Du + Dw3·w3

    The input disturbance w2 enters through B alongside u.
    """

    A: np.ndarray
    B: np.ndarray
    C: np.ndarray
    M: np.ndarray
    D: Optional[np.ndarray] = None
    Bd: Optional[np.ndarray] = None
    Bw3: Optional[np.ndarray] = None
    Dw3: Optional[np.ndarray] = None
    n_f: int = 0
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        A = np.array(self.A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise DimensionError("A", f"expected a square matrix, got shape {A.shape}")
        nx = A.shape[0]
        B = np.array(self.B, dtype=float).reshape(nx, -1)
        C = np.array(self.C, dtype=float).reshape(-1, nx)
        p = B.shape[1]
        if C.shape[0] != p:
            raise DimensionError("C", f"expected {p} rows (one per input), got {C.shape[0]}")
        M = np.array(self.M, dtype=float)
        if M.shape != (nx, nx):
            raise DimensionError("M", f"expected shape {(nx, nx)}, got {M.shape}")
        D = np.zeros((p, p)) if self.D is None else np.array(self.D, dtype=float).reshape(p, p)
        Bd = np.zeros((nx, 0)) if self.Bd is None else np.array(self.Bd, dtype=float).reshape(nx, -1)
        Bw3 = np.zeros((nx, 0)) if self.Bw3 is None else np.array(self.Bw3, dtype=float).reshape(nx, -1)
        Dw3 = np.zeros((p, Bw3.shape[1])) if self.Dw3 is None else np.array(self.Dw3, dtype=float)
        if Dw3.shape != (p, Bw3.shape[1]):
            raise DimensionError("Dw3", f"expected shape {(p, Bw3.shape[1])}, got {Dw3.shape}")
        for key, value in (("A", A), ("B", B), ("C", C), ("M", M), ("D", D), ("Bd", Bd), ("Bw3", Bw3), ("Dw3", Dw3)):
            object.__setattr__(self, key, value)

    @property
    def n_x(self) -> int:
        return self.A.shape[0]

    @property
    def p(self) -> int:
        return self.B.shape[1]

    @property
    def n_d1(self) -> int:
        return self.Bd.shape[1]

    @property
    def n_d3(self) -> int:
        return self.Bw3.shape[1]

    def normalized(self) -> NormalizedModel:
        """Energy-normalized realization (Cholesky factor of M)"""
        try:
            L = cholesky(0.5 * (self.M + self.M.T), lower=True)
        except np.linalg.LinAlgError as e:
            raise DimensionError("M", "energy weight is not positive definite") from e
        Lt = L.T

        def right(mat):
            # mat · L⁻ᵀ
            return solve_triangular(L, mat.T, lower=True).T

        return NormalizedModel(
            A=right(Lt @ self.A),
            B=Lt @ self.B,
            Bd=Lt @ self.Bd,
            Bw3=Lt @ self.Bw3,
            C=right(self.C),
            D=self.D.copy(),
            Dw3=self.Dw3.copy(),
            L=L,
        )

    def to_control(self):
        """(A, B, C, D) as a python-control StateSpace for interoperability"""
        import control

        return control.ss(self.A, self.B, self.C, self.D)


@dataclass(frozen=True)
class KypReport:
    """Largest eigenvalue of the (normalized) KYP block matrix"""

    max_eig: float
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_eig <= self.tol

    def to_dict(self) -> dict:
        return {"kyp.max_eig": self.max_eig, "kyp.tol": self.tol, "kyp.passed": self.passed}


def _abs_sym(mat: np.ndarray) -> np.ndarray:
    """|mat| for symmetric mat via its eigendecomposition"""
    w, v = eigh(0.5 * (mat + mat.T))
    return (v * np.abs(w)) @ v.T


def _sqrt_pair(mat: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """(mat^{1/2}, mat^{-1/2}) for symmetric positive definite mat"""
    w, v = eigh(0.5 * (mat + mat.T))
    if w[0] <= 0:
        raise DiscretizationError("H is not positive definite at a sample point")
    return (v * np.sqrt(w)) @ v.T, (v / np.sqrt(w)) @ v.T


def _upwind_weight(P1: np.ndarray, H_mid: np.ndarray) -> np.ndarray:
    """Interface dissipation S = H^{-1/2}|H^{1/2}P1H^{1/2}|H^{-1/2}"""
    root, inv_root = _sqrt_pair(H_mid)
    return inv_root @ _abs_sym(root @ P1 @ root) @ inv_root


def _characteristics(P1: np.ndarray, H_edge: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Rows selecting the positive and negative characteristics in effort coordinates"""
    root, inv_root = _sqrt_pair(H_edge)
    w, v = eigh(root @ P1 @ root)
    pos = v[:, w > 0]
    neg = v[:, w < 0]
    return pos.T @ inv_root, neg.T @ inv_root


@dataclass(frozen=True)
class MixedLayout:
    """Variable split and end treatment of the mixed scheme

    ``cell`` variables are constant per element, ``node`` variables live on
    the grid nodes. A kept end node stays a state and its cell-type trace is
    prescribed by the boundary rows; a removed end node is prescribed itself
    and the cell-type trace is read from the adjacent element.
    """

    cell: tuple[int, ...]
    node: tuple[int, ...]
    keep_b: bool
    keep_a: bool
    rcond: float
    feedthrough: bool

    def trace_positions(self) -> tuple[list[int], list[int]]:
        """Positions in Φ = [Φb; Φa] of the prescribed traces and of the remaining ones"""
        n = len(self.cell) + len(self.node)
        prescribed, derived = [], []
        for offset, keep in ((0, self.keep_b), (n, self.keep_a)):
            given, other = (self.cell, self.node) if keep else (self.node, self.cell)
            prescribed += [offset + j for j in given]
            derived += [offset + j for j in other]
        return prescribed, derived

    def to_dict(self) -> dict:
        return asdict(self)


def mixed_layout(model: PhsModel, tol: float = DEFAULT_TOL) -> MixedLayout:
    """Pick the variable split and end treatment for the mixed scheme

    Candidates need P1 = [[0, P_cn], [P_nc, 0]] with P_cn invertible, H
    block diagonal in the split at every sample, boundary rows and output
    rows that do not read a cell-type trace at a removed end, and an
    invertible map from prescribed traces to [u; w3]. Layouts without
    feedthrough win, then the best conditioned one.

    Raises:
        DiscretizationError: when no candidate exists
    """
    n = model.n
    if n % 2:
        raise DiscretizationError(f"mixed scheme needs an even n, got n={n}")
    P1 = model.P1
    H = model.H_samples()
    port_map = build_port_map(model)
    rows = model.W @ port_map.Rext
    out = model.Wtilde @ port_map.Rext
    p_tol = tol * max(1.0, float(np.abs(P1).max()))
    h_tol = tol * max(1.0, float(np.abs(H).max()))
    row_tol = tol * max(1.0, float(np.abs(rows).max()), float(np.abs(out).max()))
    m = model.p

    candidates = []
    for cell in combinations(range(n), n // 2):
        node = tuple(j for j in range(n) if j not in cell)
        c, k = list(cell), list(node)
        if np.abs(P1[np.ix_(c, c)]).max() > p_tol or np.abs(P1[np.ix_(k, k)]).max() > p_tol:
            continue
        if np.abs(H[:, c][:, :, k]).max() > h_tol:
            continue
        if 1.0 / np.linalg.cond(P1[np.ix_(c, k)]) < RESOLVENT_RCOND:
            continue
        for keep_b in (True, False):
            for keep_a in (True, False):
                trial = MixedLayout(cell, node, keep_b, keep_a, 0.0, False)
                prescribed, derived = trial.trace_positions()
                removed = [pos for pos in derived if not (keep_b if pos < n else keep_a)]
                if removed and max(np.abs(rows[:, removed]).max(), np.abs(out[:, removed]).max()) > row_tol:
                    continue
                W_given = rows[:, prescribed]
                rcond = 1.0 / np.linalg.cond(W_given)
                if not np.isfinite(rcond) or rcond < RESOLVENT_RCOND:
                    continue
                feed = out[:, prescribed] @ np.linalg.inv(W_given)[:, :m]
                candidates.append(replace(trial, rcond=float(rcond), feedthrough=bool(np.abs(feed).max() > row_tol)))
    if not candidates:
        raise DiscretizationError("no cell/node split of the variables is compatible with P1, H and the boundary rows")
    return min(candidates, key=lambda lay: (lay.feedthrough, -lay.rcond))


def discretize(
    model: PhsModel,
    n_f: int,
    tol: float = DEFAULT_TOL,
    check: bool = True,
    scheme: Optional[str] = None,
) -> StateSpaceModel:
    """Discretize an order-1 model on a uniform grid of ``n_f`` elements

    Args:
        model: continuous model, order 1
        n_f: number of elements (at least 2)
        tol: tolerance of the assumption checks
        check: run validate_structure and check_assumption_W first
        scheme: "mixed", "upwind" or None (mixed when the model admits it, upwind otherwise)

    Returns:
        StateSpaceModel; n_x = n·n_f for the upwind scheme and for the mixed
        scheme with one kept end node
    """
    if model.order != 1:
        raise UnsupportedOrderError("discretization is only available for order-1 models")
    if scheme is not None and scheme not in SCHEMES:
        raise DiscretizationError(f"unknown scheme {scheme!r}, expected one of {sorted(SCHEMES)}")
    n_f = int(n_f)
    if n_f < 2:
        raise DiscretizationError(f"at least 2 elements are required, got n_f={n_f}")
    if check:
        report = validate_structure(model, tol).merge(check_assumption_W(model, tol))
        if not report.passed:
            raise AssumptionError(f"model assumptions failed: {', '.join(report.failed())}", report)

    name = model.name or "<未命名>"
    if scheme == "upwind":
        ss = _discretize_upwind(model, n_f)
    else:
        try:
            layout = mixed_layout(model, tol)
        except DiscretizationError as e:
            if scheme == "mixed":
                raise
            logger.info(f"模型 {name} 不支持混合格式 ({e}), 改用迎风格式")
            ss = _discretize_upwind(model, n_f)
            ss = replace(ss, provenance={**ss.provenance, "fallback": str(e)})
        else:
            ss = _discretize_mixed(model, n_f, layout)
    logger.info(f"模型 {name} 已离散化: {ss.provenance['scheme']}, n_f={n_f}, n_x={ss.n_x}, p={ss.p}")
    return ss


def _discretize_mixed(model: PhsModel, n_f: int, layout: MixedLayout) -> StateSpaceModel:
    n, m = model.n, model.p
    a, b = model.interval
    h = (b - a) / n_f
    cell, node = list(layout.cell), list(layout.node)
    first = 0 if layout.keep_a else 1
    last = n_f if layout.keep_b else n_f - 1
    nodes = np.arange(first, last + 1)
    z_cell = a + h * (np.arange(n_f) + 0.5)
    z_node = a + h * nodes
    H_cell, H_node = model.H_at(z_cell), model.H_at(z_node)
    Bd_cell, Bd_node = model.Bd_at(z_cell), model.Bd_at(z_node)
    port_map = build_port_map(model)

    # states grouped per element: cell i with the node on its right (on its left when node a is kept)
    order = sorted(
        [(i, j, 0, i) for i in range(n_f) for j in cell]
        + [(int(k) - first, j, 1, int(k)) for k in nodes for j in node]
    )
    nx = len(order)
    cidx = np.empty((n_f, len(cell)), dtype=int)
    nidx = np.empty((nodes.size, len(node)), dtype=int)
    for pos, (_, j, kind, idx) in enumerate(order):
        if kind == 0:
            cidx[idx, cell.index(j)] = pos
        else:
            nidx[idx - first, node.index(j)] = pos

    prescribed, _ = layout.trace_positions()

    def given(end: str, variables: list[int]) -> list[int]:
        offset = 0 if end == "b" else n
        return [prescribed.index(offset + j) for j in variables]

    # e = Hloc·x, weighted balance weight·ẋ = K·e + B_in·ι + weight·Bd·w1
    Hloc = np.zeros((nx, nx))
    weight = np.zeros(nx)
    Bd = np.zeros((nx, model.n_d1))
    for i in range(n_f):
        ci = cidx[i]
        Hloc[np.ix_(ci, ci)] = H_cell[i][np.ix_(cell, cell)]
        weight[ci] = h
        Bd[ci] = Bd_cell[i][cell]
    for r, k in enumerate(nodes):
        ni = nidx[r]
        Hloc[np.ix_(ni, ni)] = H_node[r][np.ix_(node, node)]
        weight[ni] = h if 0 < k < n_f else 0.5 * h
        Bd[ni] = Bd_node[r][node]

    P_cn = model.P1[np.ix_(cell, node)]
    P_nc = model.P1[np.ix_(node, cell)]
    R = model.P0 - model.G0
    R_cc, R_cn = R[np.ix_(cell, cell)], R[np.ix_(cell, node)]
    R_nc, R_nn = R[np.ix_(node, cell)], R[np.ix_(node, node)]
    K = np.zeros((nx, nx))
    B_in = np.zeros((nx, n))
    for i in range(n_f):
        ci = cidx[i]
        K[np.ix_(ci, ci)] += h * R_cc
        for k, sign in ((i + 1, 1.0), (i, -1.0)):
            if first <= k <= last:
                nk = nidx[k - first]
                K[np.ix_(ci, nk)] += sign * P_cn + 0.5 * h * R_cn
                K[np.ix_(nk, ci)] += -sign * P_nc + 0.5 * h * R_nc
                K[np.ix_(nk, nk)] += 0.5 * h * R_nn
            else:
                B_in[np.ix_(ci, given("b" if k == n_f else "a", node))] += sign * P_cn
    if layout.keep_b:
        B_in[np.ix_(nidx[-1], given("b", cell))] += P_nc
    if layout.keep_a:
        B_in[np.ix_(nidx[0], given("a", cell))] -= P_nc

    # Φ = Phi_e·e + E_in·ι
    Phi_e = np.zeros((2 * n, nx))
    for offset, keep, ni, ci in ((0, layout.keep_b, nidx[-1], cidx[-1]), (n, layout.keep_a, nidx[0], cidx[0])):
        if keep:
            Phi_e[[offset + j for j in node], ni] = 1.0
        else:
            Phi_e[[offset + j for j in cell], ci] = 1.0
    E_in = np.zeros((2 * n, n))
    E_in[prescribed, np.arange(n)] = 1.0

    rows = model.W @ port_map.Rext
    out = model.Wtilde @ port_map.Rext
    G = np.linalg.inv(rows @ E_in)
    G_e = -G @ rows @ Phi_e
    inv_w = 1.0 / weight[:, None]

    A = inv_w * ((K + B_in @ G_e) @ Hloc)
    B = inv_w * (B_in @ G[:, :m])
    Bw3 = inv_w * (B_in @ G[:, m:])
    C = out @ (Phi_e + E_in @ G_e) @ Hloc
    D = out @ E_in @ G[:, :m]
    Dw3 = out @ E_in @ G[:, m:]
    M = weight[:, None] * Hloc

    return StateSpaceModel(
        A=A, B=B, C=C, D=D, M=M, Bd=Bd, Bw3=Bw3, Dw3=Dw3, n_f=n_f,
        provenance={
            "scheme": SCHEME_MIXED,
            "model": model.name,
            "n": n,
            "n_f": n_f,
            "interval": [a, b],
            "layout": layout.to_dict(),
            "note": "passivity preserving, M = h·H on cells and lumped node masses",
        },
    )


def _discretize_upwind(model: PhsModel, n_f: int) -> StateSpaceModel:
    n = model.n
    a, b = model.interval
    h = (b - a) / n_f
    z = a + h * (np.arange(n_f) + 0.5)
    H = model.H_at(z)
    P1 = model.P1
    port_map = build_port_map(model)
    m = model.p
    nx = n * n_f

    def blk(i):
        return slice(i * n, (i + 1) * n)

    # boundary traces Φ = [Φb; Φa] from W·Rext·Φ = [u; w3] and the outgoing characteristics
    pos_a, _ = _characteristics(P1, H[0])
    _, neg_b = _characteristics(P1, H[-1])
    k_neg, k_pos = neg_b.shape[0], pos_a.shape[0]
    E = np.zeros((2 * n, 2 * n))
    E[:n] = model.W @ port_map.Rext
    E[n:n + k_neg, :n] = neg_b
    E[n + k_neg:, n:] = pos_a
    rcond = 1.0 / np.linalg.cond(E)
    if not np.isfinite(rcond) or rcond < RESOLVENT_RCOND:
        raise DiscretizationError(f"boundary closure is singular (1/cond = {rcond:.3e})")
    E_inv = np.linalg.inv(E)
    G_u = E_inv[:, :m]
    G_w = E_inv[:, m:n]
    # Φ = Phi_x·x + G_u·u + G_w·w3, with e_i = H_i x_i
    Phi_x = np.zeros((2 * n, nx))
    Phi_x[:, blk(n_f - 1)] = E_inv[:, n:n + k_neg] @ neg_b @ H[-1]
    Phi_x[:, blk(0)] += E_inv[:, n + k_neg:] @ pos_a @ H[0]

    # fluxes F_0..F_N as functions of (x, u, w3)
    F_x = np.zeros(((n_f + 1) * n, nx))
    F_u = np.zeros(((n_f + 1) * n, m))
    F_w = np.zeros(((n_f + 1) * n, n - m))
    F_x[blk(0)] = P1 @ Phi_x[n:]
    F_u[blk(0)] = P1 @ G_u[n:]
    F_w[blk(0)] = P1 @ G_w[n:]
    F_x[blk(n_f)] = P1 @ Phi_x[:n]
    F_u[blk(n_f)] = P1 @ G_u[:n]
    F_w[blk(n_f)] = P1 @ G_w[:n]
    for j in range(1, n_f):
        S = _upwind_weight(P1, 0.5 * (H[j - 1] + H[j]))
        F_x[blk(j), blk(j - 1)] = 0.5 * (P1 - S) @ H[j - 1]
        F_x[blk(j), blk(j)] = 0.5 * (P1 + S) @ H[j]

    # element balance h·ẋ_i = F_{i+1} - F_i + h·(P0 - G0)·e_i + h·Bd(z_i)·w1
    diff = np.zeros((nx, (n_f + 1) * n))
    for i in range(n_f):
        diff[blk(i), blk(i)] = -np.eye(n)
        diff[blk(i), blk(i + 1)] = np.eye(n)
    R = model.P0 - model.G0
    A = diff @ F_x / h + block_diag(*[R @ H_i for H_i in H])
    B = diff @ F_u / h
    Bw3 = diff @ F_w / h
    Bd = np.vstack(list(model.Bd_at(z)))

    out = model.Wtilde @ port_map.Rext
    C = out @ Phi_x
    D = out @ G_u
    Dw3 = out @ G_w
    M = block_diag(*[h * H_i for H_i in H])

    return StateSpaceModel(
        A=A, B=B, C=C, D=D, M=M, Bd=Bd, Bw3=Bw3, Dw3=Dw3, n_f=n_f,
        provenance={
            "scheme": SCHEME_UPWIND,
            "model": model.name,
            "n": n,
            "n_f": n_f,
            "interval": [a, b],
            "note": "passivity preserving, M = h·H(z_i) per element",
        },
    )


def apply_output_feedback(ss: StateSpaceModel, K) -> StateSpaceModel:
    """Close u = -K·y + v around the plant

    Args:
        ss: plant
        K: p×p gain (a scalar is promoted to K·I)

    Returns:
        plant with input v; Bd and M are unchanged
    """
    p = ss.p
    K = np.array(K, dtype=float)
    K = K * np.eye(p) if K.ndim == 0 else K.reshape(p, p)
    S = np.eye(p) + ss.D @ K
    if 1.0 / np.linalg.cond(S) < RESOLVENT_RCOND:
        raise FeedbackError("I + D·K is singular; output feedback is ill-posed")
    S_inv = np.linalg.inv(S)
    BK = ss.B @ K @ S_inv
    provenance = dict(ss.provenance)
    provenance["feedback"] = provenance.get("feedback", []) + [K.tolist()]
    return replace(
        ss,
        A=ss.A - BK @ ss.C,
        B=ss.B - BK @ ss.D,
        C=S_inv @ ss.C,
        D=S_inv @ ss.D,
        Bw3=ss.Bw3 - BK @ ss.Dw3,
        Dw3=S_inv @ ss.Dw3,
        provenance=provenance,
    )


def resolvent_solve(A: np.ndarray, lam: complex, rhs: np.ndarray, context: str = "") -> np.ndarray:
    """Solve (λI - A)X = rhs, raising ResolventSingularError near the spectrum"""
    mat = lam * np.eye(A.shape[0]) - A
    cond = np.linalg.cond(mat)
    if not np.isfinite(cond) or 1.0 / cond < RESOLVENT_RCOND:
        raise ResolventSingularError(lam, float(cond), context)
    return np.linalg.solve(mat, rhs)


def transfer_function(ss: StateSpaceModel, lam: complex, normalized: Optional[NormalizedModel] = None) -> np.ndarray:
    """P(λ) = C(λI - A)⁻¹B + D

    Args:
        ss: plant
        lam: complex point off the spectrum of A
        normalized: precomputed ``ss.normalized()`` for repeated evaluations
    """
    nm = normalized or ss.normalized()
    X = resolvent_solve(nm.A, complex(lam), nm.B.astype(complex), context="transfer function")
    return nm.C @ X + nm.D


def kyp_matrix(ss: StateSpaceModel, normalized: Optional[NormalizedModel] = None) -> np.ndarray:
    """[[Ãᵀ+Ã, B̃-C̃ᵀ], [B̃ᵀ-C̃, -(D+Dᵀ)]], congruent to the M-weighted KYP matrix"""
    nm = normalized or ss.normalized()
    return np.block([
        [nm.A + nm.A.T, nm.B - nm.C.T],
        [nm.B.T - nm.C, -(nm.D + nm.D.T)],
    ])


def check_passivity_kyp(ss: StateSpaceModel, tol: Optional[float] = None, rel_tol: float = 1e-8) -> KypReport:
    """Largest eigenvalue of the KYP block matrix

    Args:
        ss: plant
        tol: absolute tolerance; defaults to ``rel_tol`` times the norm of the block matrix
        rel_tol: relative tolerance used when ``tol`` is None
    """
    K = kyp_matrix(ss)
    max_eig = float(np.linalg.eigvalsh(0.5 * (K + K.T))[-1])
    if tol is None:
        tol = rel_tol * max(1.0, float(np.linalg.norm(K, 2)))
    report = KypReport(max_eig=max_eig, tol=float(tol))
    if not report.passed:
        logger.warning(f"KYP 检查失败: 最大特征值 {max_eig:.3e} > {report.tol:.3e}")
    return report


def spectral_abscissa(A) -> float:
    """max Re λ over the eigenvalues of A"""
    A = np.asarray(A)
    if A.size == 0:
        return -np.inf
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix has non-finite entries")
    return float(np.max(np.linalg.eigvals(A).real))
