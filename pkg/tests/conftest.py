import os
from dataclasses import replace

import hypothesis
import numpy as np
import pytest

from phs_regulator.core import PhsModel, build_port_map
from phs_regulator.discretize import StateSpaceModel, discretize
from phs_regulator.scenarios.timoshenko.main import build_timoshenko_model
from phs_regulator.scenarios.transport.main import build_transport_model

hypothesis.settings.register_profile("default", max_examples=20, deadline=None)
hypothesis.settings.register_profile("fast", max_examples=5, deadline=None)
hypothesis.settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def random_admissible_model(rng: np.random.Generator, n: int, m: int = 1, damped: bool = True,
                            resistive: bool = False, profile: bool = False) -> PhsModel:
    """Order-1 model whose boundary rows satisfy the W assumptions

    Each boundary direction o_i (rows of a random orthogonal matrix) imposes
    either the flow or the effort; the first ``m`` directions are inputs and
    the outputs are the conjugate rows. With ``resistive`` the remaining rows
    become o·f + r·o·e with r >= 0.
    """
    O, _ = np.linalg.qr(rng.standard_normal((n, n)))
    zero = np.zeros(n)
    rows, conj = [], []
    for i in range(n):
        o = O[i]
        if rng.integers(2):
            rows.append(np.concatenate([o, zero]))
            conj.append(np.concatenate([zero, o]))
        else:
            rows.append(np.concatenate([zero, o]))
            conj.append(np.concatenate([o, zero]))
    if resistive:
        for i in range(m, n):
            rows[i] = np.concatenate([O[i], rng.uniform(0.0, 2.0) * O[i]])

    V, _ = np.linalg.qr(rng.standard_normal((n, n)))
    lam = rng.uniform(0.5, 2.0, n) * rng.choice([-1.0, 1.0], n)
    P1 = V @ np.diag(lam) @ V.T
    S = rng.standard_normal((n, n))
    P0 = 0.25 * (S - S.T)
    X = rng.standard_normal((n, n))
    G0 = X @ X.T / n + 0.5 * np.eye(n) if damped else np.zeros((n, n))

    def spd():
        Y = rng.standard_normal((n, n))
        return Y @ Y.T / n + np.eye(n)

    H, H_grid = spd(), None
    if profile:
        H, H_grid = np.stack([spd(), spd(), spd()]), np.array([0.0, 0.5, 1.0])

    return PhsModel(
        n=n, order=1, P1=0.5 * (P1 + P1.T), P0=P0, G0=G0, H=H, H_grid=H_grid,
        W1=np.array(rows[:m]), W2=np.array(rows[m:]).reshape(n - m, 2 * n),
        Wtilde=np.array(conj[:m]), interval=(0.0, 1.0), name=f"random-n{n}",
    )


def line_model(input_var: int = 0, far_var: int = 1, damping=(0.0, 0.0), H=(1.0, 1.0)) -> PhsModel:
    """Two-field wave equation ẋ1 = ∂z e2, ẋ2 = ∂z e1 on [0, 1] with effort boundary rows

    u = e_{input_var}(1), y is the other effort at z = 1 and w3 = e_{far_var}(0).
    """
    P1 = np.array([[0.0, 1.0], [1.0, 0.0]])
    model = PhsModel(n=2, order=1, P1=P1, P0=np.zeros((2, 2)), G0=np.diag(damping), H=np.diag(H),
                     W1=np.zeros((1, 4)), W2=np.zeros((1, 4)), Wtilde=np.zeros((1, 4)), interval=(0.0, 1.0))
    # rows picking entries of the trace Φ = [e(1); e(0)] in port coordinates
    pick = np.eye(4) @ np.linalg.inv(build_port_map(model).Rext)
    return replace(model, W1=pick[[input_var]], W2=pick[[2 + far_var]], Wtilde=pick[[1 - input_var]],
                   name=f"line-{input_var}{far_var}")


def random_stable_plant(seed: int, n_f: int = 4) -> StateSpaceModel:
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 4))
    m = int(rng.integers(1, n + 1))
    return discretize(random_admissible_model(rng, n, m, damped=True), n_f)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def timoshenko_model():
    return build_timoshenko_model()


@pytest.fixture(scope="session")
def timoshenko_plant(timoshenko_model):
    return discretize(timoshenko_model, 50)


@pytest.fixture
def transport_model():
    return build_transport_model()


@pytest.fixture
def scalar_plant():
    """ẋ = -x + u, y = x"""
    return StateSpaceModel(A=[[-1.0]], B=[[1.0]], C=[[1.0]], M=[[1.0]])


@pytest.fixture
def workdir(tmp_path, monkeypatch):
    monkeypatch.chdir(tmp_path)
    return tmp_path
