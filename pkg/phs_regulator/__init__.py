"""Robust output regulation of boundary controlled port-Hamiltonian systems"""

from .closedloop import (
    ClosedLoopSystem,
    SignalModel,
    SimulationSettings,
    assemble_closed_loop,
    estimate_decay_rate,
    lyapunov_certificate,
    simulate,
    solve_regulator_steady_state,
)
from .controller import (
    InternalModelController,
    build_internal_model,
    check_internal_model_conditions,
    diagonalize_internal_model,
    gain_sweep,
    solve_H,
)
from .core import PhsModel, boundary_port_values, build_port_map, validate_model
from .discretize import (
    StateSpaceModel,
    apply_output_feedback,
    check_passivity_kyp,
    discretize,
    transfer_function,
)
from .modelfile import DemoScenario, read_model_file, write_model_file

__version__ = "0.1.0"
