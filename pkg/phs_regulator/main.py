"""Command-line front end: check, discretize, zeros, synth, sweep, simulate, certify, demo-piezo"""

import argparse
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional

import numpy as np

from .artifacts import (
    format_report,
    get_output_dir,
    load_document,
    save_document,
    write_matrix_container,
    write_plot_script,
    write_report,
    write_trajectory_csv,
)
from .closedloop import (
    SignalModel,
    SimulationSettings,
    assemble_closed_loop,
    estimate_decay_rate,
    lyapunov_certificate,
    settling_horizon,
    simulate,
    solve_regulator_steady_state,
    tracking_metric,
)
from .config import SCHEME_CHOICES, Settings
from .controller import (
    InternalModelController,
    check_internal_model_conditions,
    controller_from_document,
    controller_to_document,
    diagonalize_internal_model,
    gain_sweep,
    solve_H,
)
from .core import sym_min_eig, validate_model
from .discretize import (
    StateSpaceModel,
    apply_output_feedback,
    check_passivity_kyp,
    discretize,
    spectral_abscissa,
    transfer_function,
)
from .errors import (
    ConfigError,
    DecayRateUndefinedError,
    DimensionError,
    ModelFormatError,
    NoStableGainError,
    PhsRegulatorError,
)
from .logger import logger, setup_logging
from .modelfile import DemoScenario, scenario_to_document
from .registry import scenario_registry

SUBCOMMANDS = ("check", "discretize", "zeros", "synth", "sweep", "simulate", "certify", "demo-piezo")

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_MALFORMED = 2


@dataclass
class CommandConfig:
    """One CLI invocation with its overrides"""

    subcommand: str
    model: Optional[str] = None
    controller: Optional[str] = None
    out: Optional[str] = None
    nf: Optional[int] = None
    delta_c: Optional[float] = None
    dc: Optional[float] = None
    horizon: Optional[float] = None
    dt: Optional[float] = None
    tol: Optional[float] = None
    strict: bool = False
    scheme: Optional[str] = None
    settings: Settings = field(default_factory=Settings)

    def __post_init__(self):
        if self.subcommand not in SUBCOMMANDS:
            raise ConfigError(f"unknown subcommand {self.subcommand!r}")
        if self.subcommand != "demo-piezo" and not self.model:
            raise ConfigError("--model is required")
        if self.controller and not Path(self.controller).is_file():
            raise ConfigError(f"controller file not found: {self.controller}")
        for key in ("delta_c", "horizon", "dt", "tol"):
            value = getattr(self, key)
            if value is not None and not value > 0:
                raise ConfigError(f"--{key.replace('_', '-')} must be positive, got {value}")
        if self.nf is not None and self.nf < 2:
            raise ConfigError(f"--nf must be at least 2, got {self.nf}")
        if self.scheme is not None and self.scheme not in SCHEME_CHOICES:
            raise ConfigError(f"--scheme must be one of {', '.join(SCHEME_CHOICES)}, got {self.scheme!r}")
        if self.dc is not None and self.dc < 0:
            raise ConfigError(f"--dc must be non-negative, got {self.dc}")

    @property
    def tolerance(self) -> float:
        return self.tol if self.tol is not None else self.settings.get_config_value("tolerance", 1e-10)

    @property
    def discretization_scheme(self) -> Optional[str]:
        """--scheme > configuration; "auto" maps to None"""
        scheme = self.scheme or self.settings.get_config_value("scheme", "auto")
        return None if scheme == "auto" else scheme

    def simulation(self, scenario: DemoScenario) -> SimulationSettings:
        """CLI flag > model demo block > configuration"""
        base = scenario.simulation or SimulationSettings(
            n_f=self.settings.get_config_value("nf"),
            horizon=self.settings.get_config_value("horizon"),
            dt=self.settings.get_config_value("dt"),
        )
        return SimulationSettings(
            n_f=self.nf if self.nf is not None else base.n_f,
            horizon=self.horizon if self.horizon is not None else base.horizon,
            dt=self.dt if self.dt is not None else base.dt,
        )

    def output_dir(self) -> Path:
        return get_output_dir(self.out or self.settings.get_config_value("output_dir", "output"))


@dataclass
class CommandResult:
    exit_code: int
    report: dict = field(default_factory=dict)
    title: str = ""


def _emit(config: CommandConfig, result: CommandResult, name: str) -> CommandResult:
    print(format_report(result.report, result.title), end="")
    if config.out:
        write_report(config.output_dir() / f"{name}.txt", result.report, result.title)
    return result


def _scenario(config: CommandConfig) -> DemoScenario:
    return scenario_registry.resolve(config.model)


def _controller(config: CommandConfig, scenario: DemoScenario) -> InternalModelController:
    """--controller file, else the demo block; --dc/--delta-c override either"""
    if config.controller:
        doc = load_document(Path(config.controller))
        if doc is None:
            raise ModelFormatError("--controller", f"cannot read {config.controller}")
        ctrl = controller_from_document(doc)
    elif scenario.controller is not None:
        ctrl = scenario.controller.build(scenario.model.p)
    else:
        raise ConfigError("no controller: pass --controller or add demo.controller to the model file")
    if ctrl.p != scenario.model.p:
        raise DimensionError("controller", f"controller has p={ctrl.p}, model has p={scenario.model.p}")
    if config.dc is not None:
        ctrl = ctrl.with_Dc(config.dc)
    if config.delta_c is not None:
        ctrl = ctrl.with_delta(config.delta_c)
    return ctrl


def _signal(scenario: DemoScenario) -> SignalModel:
    if scenario.signal is None:
        raise ConfigError("no signal: add demo.signal to the model file")
    return scenario.signal


def _plant(config: CommandConfig, scenario: DemoScenario) -> StateSpaceModel:
    return discretize(scenario.model, config.simulation(scenario).n_f, config.tolerance,
                      scheme=config.discretization_scheme)


def cmd_check(config: CommandConfig) -> CommandResult:
    scenario = _scenario(config)
    report = validate_model(scenario.model, config.tolerance)
    data = {"model": scenario.model.name, "order": scenario.model.order, **report.to_dict()}
    return CommandResult(EXIT_OK if report.passed else EXIT_FAILED, data, "assumption report")


def cmd_discretize(config: CommandConfig) -> CommandResult:
    scenario = _scenario(config)
    ss = _plant(config, scenario)
    kyp = check_passivity_kyp(ss, rel_tol=config.settings.get_config_value("kyp_relative_tolerance"))
    data = {
        "model": scenario.model.name,
        "n_f": ss.n_f,
        "n_x": ss.n_x,
        "p": ss.p,
        "scheme": ss.provenance.get("scheme"),
        **kyp.to_dict(),
        "abscissa": spectral_abscissa(ss.A),
        "feedthrough_norm": float(np.linalg.norm(ss.D)),
    }
    if config.out:
        path = config.output_dir() / "plant.txt"
        matrices = {"A": ss.A, "B": ss.B, "Bd": ss.Bd, "Bw3": ss.Bw3, "C": ss.C, "D": ss.D, "Dw3": ss.Dw3, "M": ss.M}
        if write_matrix_container(path, matrices, ss.provenance):
            data["container"] = str(path)
    return CommandResult(EXIT_OK if kyp.passed else EXIT_FAILED, data, "discretization report")


def cmd_zeros(config: CommandConfig) -> CommandResult:
    scenario = _scenario(config)
    ctrl = _controller(config, scenario)
    plant = apply_output_feedback(_plant(config, scenario), ctrl.Dc)
    nm = plant.normalized()
    data: dict = {"model": scenario.model.name, "Dc": ctrl.Dc.tolist(), "abscissa_fb": spectral_abscissa(nm.A)}
    passed = True
    for w in ctrl.all_freqs:
        for lam in ((0j,) if w == 0 else (1j * w, -1j * w)):
            P = transfer_function(plant, lam, normalized=nm)
            min_eig = sym_min_eig(P)
            sigma_min = float(np.linalg.svd(P, compute_uv=False)[-1])
            ok = min_eig > config.tolerance
            passed = passed and ok
            data[f"P({lam.imag:+g}i).sym_min_eig"] = min_eig
            data[f"P({lam.imag:+g}i).sigma_min"] = sigma_min
            data[f"P({lam.imag:+g}i).verdict"] = "positive real part" if ok else "FAIL"
    try:
        zeros = np.atleast_1d(plant.to_control().zeros())
        for w in ctrl.all_freqs:
            if zeros.size:
                data[f"nearest_zero_to_{w:g}i"] = float(np.min(np.abs(zeros - 1j * w)))
    except Exception as e:
        logger.warning(f"不变零点计算失败: {e}")
    return CommandResult(EXIT_OK if passed else EXIT_FAILED, data, "transfer function at internal-model frequencies")


def cmd_synth(config: CommandConfig) -> CommandResult:
    scenario = _scenario(config)
    ctrl = _controller(config, scenario)
    im_report = check_internal_model_conditions(ctrl.Jc, ctrl.Bc, ctrl.all_freqs, config.tolerance)
    diagonalize_internal_model(ctrl.Jc, ctrl.Bc, ctrl.freqs, ctrl.p, ctrl.include_zero)
    plant = apply_output_feedback(_plant(config, scenario), ctrl.Dc)
    sol = solve_H(plant, ctrl)
    data = {
        "n_c": ctrl.n_c,
        "freqs": list(ctrl.all_freqs),
        "delta_c": ctrl.delta_c,
        **{f"internal_model.{k}": v for k, v in im_report.to_dict().items()},
        "H.sylvester_residual": sol.sylvester_residual,
        "H.transfer_residual": sol.transfer_residual,
    }
    path = config.output_dir() / "controller.json"
    if save_document(path, controller_to_document(ctrl)):
        data["controller_file"] = str(path)
    return CommandResult(EXIT_OK if im_report.passed else EXIT_FAILED, data, "controller synthesis")


def cmd_sweep(config: CommandConfig) -> CommandResult:
    scenario = _scenario(config)
    ctrl = _controller(config, scenario)
    ss = _plant(config, scenario)
    grid = config.settings.get_config_value("delta_grid")
    try:
        result = gain_sweep(ss, ctrl, grid, config.settings.get_config_value("sweep_workers", 4))
    except NoStableGainError as e:
        data = {"recommended_delta_c": "none"}
        for row in e.table:
            data[f"delta_c={row.delta_c:g}"] = f"abscissa={row.abscissa:.6e} unstable"
        return CommandResult(EXIT_FAILED, data, "gain sweep")
    return CommandResult(EXIT_OK, result.to_dict(), "gain sweep")


def _run_simulation(config: CommandConfig, scenario: DemoScenario, ctrl: InternalModelController,
                    ss: StateSpaceModel, out: Path, horizon: Optional[float] = None) -> dict:
    """Simulate, write CSV + plot script and return the report entries"""
    settings = config.settings
    sim = config.simulation(scenario)
    horizon = sim.horizon if horizon is None else horizon
    sig = _signal(scenario)
    clsys = assemble_closed_loop(ss, ctrl)
    abscissa = clsys.spectral_abscissa()
    res = simulate(clsys, sig, horizon, sim.dt, strict=config.strict,
                   samples_per_period=settings.get_config_value("samples_per_period"))
    metric = tracking_metric(res, settings.get_config_value("final_window_fraction"),
                             settings.get_config_value("tracking_threshold"))
    data = {
        "delta_c": ctrl.delta_c,
        "abscissa": abscissa,
        "horizon": horizon,
        "dt": sim.dt,
        "scheme": res.scheme,
        "untracked_freqs": res.untracked_freqs,
        "final_window_error": metric.final_error,
        "reference_peak": metric.reference_peak,
        "tracking_ratio": metric.ratio,
        "tracking_passed": metric.passed,
    }
    try:
        rate = estimate_decay_rate(res, settings.get_config_value("decay_window_start"))
        data["decay_rate"] = rate.alpha
        data["decaying"] = rate.decaying
    except DecayRateUndefinedError as e:
        data["decay_rate"] = f"undefined ({e})"
    csv_path = out / "trajectory.csv"
    if write_trajectory_csv(csv_path, res.t, res.y, res.y_ref, res.energy):
        data["csv"] = str(csv_path)
    if write_plot_script(out / "plot.gp", csv_path.name, clsys.p):
        data["plot_script"] = str(out / "plot.gp")
    return data


def cmd_simulate(config: CommandConfig) -> CommandResult:
    scenario = _scenario(config)
    ctrl = _controller(config, scenario)
    data = _run_simulation(config, scenario, ctrl, _plant(config, scenario), config.output_dir())
    return CommandResult(EXIT_OK, data, "simulation")


def cmd_certify(config: CommandConfig) -> CommandResult:
    scenario = _scenario(config)
    ctrl = _controller(config, scenario)
    plant = apply_output_feedback(_plant(config, scenario), ctrl.Dc)
    cert = lyapunov_certificate(plant, ctrl, eps_grid=config.settings.eps_grid())
    data = {"delta_c": ctrl.delta_c, **cert.to_dict()}
    return CommandResult(EXIT_OK if cert.valid else EXIT_FAILED, data, "Lyapunov certificate")


def cmd_demo_piezo(config: CommandConfig) -> CommandResult:
    """Full Timoshenko reproduction bundle

    Without --horizon the run is extended up to the settling horizon of the
    slowest closed-loop mode (capped by max_settling_horizon). The
    certificate is attempted for every stable δc of the sweep. Exits 1 when
    the model check, the KYP test, the tracking metric or every certificate
    attempt fails, or when no δc stabilizes the loop.
    """
    if not config.model:
        config.model = "timoshenko"
    scenario = _scenario(config)
    out = config.output_dir()
    settings = config.settings
    save_document(out / "model.json", scenario_to_document(scenario))

    data: dict = {}
    check = validate_model(scenario.model, config.tolerance)
    data["check.passed"] = check.passed
    data["check.rank_W"] = check.rank_W
    data["check.wsw_min_eig"] = check.wsw_min_eig
    data["check.kernel_form_min_eig"] = check.kernel_form_min_eig

    ss = _plant(config, scenario)
    kyp = check_passivity_kyp(ss, rel_tol=settings.get_config_value("kyp_relative_tolerance"))
    data["scheme"] = ss.provenance.get("scheme")
    data["kyp.passed"] = kyp.passed
    ctrl = _controller(config, scenario)
    plant = apply_output_feedback(ss, ctrl.Dc)
    data["plant_fb.abscissa"] = spectral_abscissa(plant.normalized().A)

    grid = sorted(set(settings.get_config_value("delta_grid")) | {ctrl.delta_c})
    try:
        sweep = gain_sweep(ss, ctrl, grid, settings.get_config_value("sweep_workers", 4))
    except NoStableGainError as e:
        logger.error("演示失败: 没有稳定的 δc")
        for row in e.table:
            data[f"sweep.delta_c={row.delta_c:g}"] = f"abscissa={row.abscissa:.6e} unstable"
        return CommandResult(EXIT_FAILED, data, "demo-piezo")
    for key, value in sweep.to_dict().items():
        data[f"sweep.{key}"] = value
    if ctrl.delta_c not in sweep.stable_deltas():
        candidates = [d for d in sweep.stable_deltas() if d <= ctrl.delta_c] or sweep.stable_deltas()
        chosen = max(candidates)
        logger.warning(f"表中 δc={ctrl.delta_c:g} 在当前离散化下不稳定, 改用 δc={chosen:g}")
        data["delta_c.discrepancy"] = f"tabulated {ctrl.delta_c:g} unstable, using {chosen:g}"
        ctrl = ctrl.with_delta(chosen)
    save_document(out / "controller.json", controller_to_document(ctrl))

    clsys = assemble_closed_loop(ss, ctrl)
    horizon = config.simulation(scenario).horizon
    if config.horizon is None:
        abscissa = clsys.spectral_abscissa()
        settle = settling_horizon(abscissa, settings.get_config_value("final_window_fraction"))
        if settle > horizon:
            extended = min(settle, settings.get_config_value("max_settling_horizon"))
            logger.warning(f"最慢闭环模态 (谱横坐标 {abscissa:.3e}) 在 {horizon:g} s 内未衰减, 仿真时长改为 {extended:g} s")
            data["horizon.discrepancy"] = f"tabulated {horizon:g} s, abscissa {abscissa:.6e} needs {settle:.1f} s, using {extended:g} s"
            horizon = extended

    data.update({f"simulation.{k}": v for k, v in _run_simulation(config, scenario, ctrl, ss, out, horizon).items()})
    regulator = solve_regulator_steady_state(clsys, _signal(scenario), settings.get_config_value("regulation_tolerance"))
    data.update({f"regulator.{k}": v for k, v in regulator.to_dict().items()})

    certified = []
    for delta in sweep.stable_deltas():
        cert = lyapunov_certificate(plant, ctrl.with_delta(delta), eps_grid=settings.eps_grid())
        data[f"certificate.delta_c={delta:g}"] = (
            f"valid, min_eig={cert.min_eig_neg_derivative:.6e}" if cert.valid else f"invalid ({cert.reason})"
        )
        if cert.valid:
            certified.append(delta)
    data["certificate.valid"] = bool(certified)
    data["certificate.certified_delta_c"] = certified or "none"

    passed = check.passed and kyp.passed and data["simulation.tracking_passed"] and bool(certified)
    data["passed"] = passed
    write_report(out / "demo_report.txt", data, "demo-piezo")
    if not passed:
        logger.error("演示未通过: 检查报告中的 check / kyp / tracking / certificate 项")
    return CommandResult(EXIT_OK if passed else EXIT_FAILED, data, "demo-piezo")


COMMAND_HELP = {
    "check": "validate structural assumptions of a model",
    "discretize": "discretize and check passivity (KYP)",
    "zeros": "transfer function at the internal-model frequencies",
    "synth": "build the internal-model controller and solve for H",
    "sweep": "closed-loop spectral abscissa over a δc grid",
    "simulate": "simulate the closed loop and write CSV + plot script",
    "certify": "closed-loop Lyapunov certificate",
    "demo-piezo": "full Timoshenko beam reproduction bundle",
}

COMMANDS: dict[str, Callable[[CommandConfig], CommandResult]] = {
    "check": cmd_check,
    "discretize": cmd_discretize,
    "zeros": cmd_zeros,
    "synth": cmd_synth,
    "sweep": cmd_sweep,
    "simulate": cmd_simulate,
    "certify": cmd_certify,
    "demo-piezo": cmd_demo_piezo,
}


def run(config: CommandConfig) -> int:
    """Execute one subcommand and map failures to exit codes

    Returns:
        0 on success, 1 for failed checks or computations, 2 for malformed input
    """
    try:
        result = COMMANDS[config.subcommand](config)
        _emit(config, result, config.subcommand)
        return result.exit_code
    except (ModelFormatError, ConfigError, DimensionError, FileNotFoundError) as e:
        logger.error(f"输入无效: {e}")
        return EXIT_MALFORMED
    except PhsRegulatorError as e:
        logger.error(f"命令 {config.subcommand} 失败: {e}")
        return EXIT_FAILED


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--model", help="model file (JSON) or scenario name")
    common.add_argument("--controller", help="controller file written by synth")
    common.add_argument("--nf", type=int, help="number of finite elements")
    common.add_argument("--delta-c", dest="delta_c", type=float, help="coupling gain δc")
    common.add_argument("--dc", type=float, help="feedthrough gain Dc (scalar times identity)")
    common.add_argument("--horizon", type=float, help="simulation horizon (s)")
    common.add_argument("--dt", type=float, help="simulation step (s)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--tol", type=float, help="numerical tolerance")
    common.add_argument("--strict", action="store_true", help="treat step-size warnings as errors")
    common.add_argument("--scheme", choices=SCHEME_CHOICES, help="spatial discretization scheme")
    common.add_argument("--log-level", dest="log_level", help="logging level")
    common.add_argument("--env-file", dest="env_file", help=".env file with PHS_REGULATOR_* settings")

    parser = argparse.ArgumentParser(prog="phs_regulator", description="Robust output regulation of boundary controlled port-Hamiltonian systems")
    sub = parser.add_subparsers(dest="subcommand", required=True)
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=COMMAND_HELP[name])
    return parser


def main(argv: Optional[list[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        settings = Settings(env_file=args.env_file)
        setup_logging(args.log_level or settings.get_config_value("log_level", "INFO"))
        if settings.get_config_value("scenario_dir"):
            scenario_registry.load_scenario_modules(settings.get_config_value("scenario_dir"))
        config = CommandConfig(
            subcommand=args.subcommand,
            model=args.model,
            controller=args.controller,
            out=args.out,
            nf=args.nf,
            delta_c=args.delta_c,
            dc=args.dc,
            horizon=args.horizon,
            dt=args.dt,
            tol=args.tol,
            strict=args.strict,
            scheme=args.scheme,
            settings=settings,
        )
    except ConfigError as e:
        setup_logging()
        logger.error(f"参数无效: {e}")
        return EXIT_MALFORMED
    return run(config)
