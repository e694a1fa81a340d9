"""
One-field transport equation ∂x/∂t = ∂x/∂z - g·x on [0, 1].

Input u = f_∂ = (x(1) - x(0))/√2, output y = e_∂ = (x(1) + x(0))/√2. The
lossless case (g = 0) is only marginally stable, so the demo closes Dc = 1
(an absorbing boundary) before coupling the internal model.
"""

import numpy as np

from ...closedloop import SignalModel, SimulationSettings
from ...controller import ControllerSettings
from ...core import PhsModel
from ...modelfile import DemoScenario
from .. import ScenarioConfig


def build_transport_model(damping: float = 0.0, distributed_disturbance: bool = True) -> PhsModel:
    """Transport model with optional uniform distributed disturbance Bd = 1"""
    if damping < 0:
        raise ValueError(f"damping must be non-negative, got {damping}")
    return PhsModel(
        n=1,
        order=1,
        P1=[[1.0]],
        P0=[[0.0]],
        G0=[[damping]],
        H=[[1.0]],
        Bd=[[1.0]] if distributed_disturbance else None,
        W1=[[1.0, 0.0]],
        W2=np.zeros((0, 2)),
        Wtilde=[[0.0, 1.0]],
        interval=(0.0, 1.0),
        name="transport" if damping == 0 else f"transport-damped-{damping:g}",
    )


def build_demo_scenario() -> DemoScenario:
    """y_ref = 0.5 + sin(t), constant distributed load 0.3, input tone 0.2·sin(3t) outside the internal model"""
    model = build_transport_model()
    nw = model.n_d1 + model.p + model.n_d3
    b_sin = np.zeros((2, nw))
    b_sin[1, model.n_d1] = 0.2
    signal = SignalModel.create(
        (1.0, 3.0),
        model.p,
        nw,
        a0=np.array([0.5]),
        a_sin=np.array([[1.0], [0.0]]),
        b0=np.array([0.3, 0.0]),
        b_sin=b_sin,
    )
    return DemoScenario(
        model=model,
        signal=signal,
        controller=ControllerSettings(freqs=(1.0,), include_zero=True, Dc=1.0, delta_c=0.5),
        simulation=SimulationSettings(n_f=20, horizon=60.0, dt=0.01),
    )


scenario = ScenarioConfig(
    name="transport",
    builder=build_demo_scenario,
    description="一维输运方程 - 跟踪常值与 1 rad/s 正弦参考并抑制分布式常值干扰",
    display_name="输运方程",
)
