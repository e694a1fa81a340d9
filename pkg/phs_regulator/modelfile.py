"""Model documents: JSON <-> PhsModel plus the optional demo block

Schema (all matrices row-major, either a list of rows or
``{"scale": s, "rows": [...]}``)::

    {
      "name": "...", "n": 4, "order": 1, "interval": [a, b],
      "P1": [[...]], "P0": [[...]], "G0": [[...]], "P2": [[...]],   # P2 optional for order 1
      "H": {"constant": [[...]]} | {"grid": [z...], "values": [[[...]]...]},
      "Bd": same form as H with n x n_d1 blocks (optional, piecewise constant),
      "W1": ..., "W2": ..., "Wtilde": ...,
      "demo": {
        "controller": {"freqs": [...], "include_zero": false, "Dc": 0.002, "delta_c": 0.2},
        "signal": {"freqs": [...], "a0": [...], "a_cos": [[...]], "a_sin": [[...]],
                   "b0": [...], "b_cos": [[...]], "b_sin": [[...]], "unit": "..."},
        "simulation": {"n_f": 50, "horizon": 20.0, "dt": 0.0005}
      }
    }
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .artifacts import load_document, save_document
from .closedloop import SignalModel, SimulationSettings
from .controller import ControllerSettings
from .core import PhsModel
from .errors import DimensionError, ModelFormatError, UnsupportedOrderError


@dataclass(frozen=True)
class DemoScenario:
    """A model with everything needed to run the pipeline on it"""

    model: PhsModel
    signal: Optional[SignalModel] = None
    controller: Optional[ControllerSettings] = None
    simulation: Optional[SimulationSettings] = None
    notes: dict = field(default_factory=dict)


def _number(value: Any, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ModelFormatError(path, f"expected a number, got {value!r}")
    return float(value)


def _vector(value: Any, path: str, size: Optional[int] = None) -> np.ndarray:
    if not isinstance(value, list):
        raise ModelFormatError(path, "expected a list of numbers")
    vec = np.array([_number(v, f"{path}[{i}]") for i, v in enumerate(value)])
    if size is not None and vec.size != size:
        raise ModelFormatError(path, f"expected {size} entries, got {vec.size}")
    return vec


def _matrix(value: Any, path: str, rows: Optional[int] = None, cols: Optional[int] = None) -> np.ndarray:
    """Parse a matrix given as rows or as {"scale": s, "rows": [...]}"""
    scale = 1.0
    if isinstance(value, dict):
        if "rows" not in value:
            raise ModelFormatError(f"{path}.rows", "is required")
        scale = _number(value.get("scale", 1.0), f"{path}.scale")
        value, path = value["rows"], f"{path}.rows"
    if not isinstance(value, list):
        raise ModelFormatError(path, "expected a list of rows")
    if rows is not None and len(value) != rows:
        raise ModelFormatError(path, f"expected {rows} rows, got {len(value)}")
    parsed = []
    for i, row in enumerate(value):
        if not isinstance(row, list):
            raise ModelFormatError(f"{path}[{i}]", "expected a row (list of numbers)")
        if cols is not None and len(row) != cols:
            raise ModelFormatError(f"{path}[{i}]", f"expected {cols} columns, got {len(row)}")
        if parsed and len(row) != len(parsed[0]):
            raise ModelFormatError(f"{path}[{i}]", f"row length {len(row)} differs from row 0 ({len(parsed[0])})")
        parsed.append([_number(v, f"{path}[{i}][{j}]") for j, v in enumerate(row)])
    width = cols if cols is not None else (len(parsed[0]) if parsed else 0)
    return scale * np.array(parsed, dtype=float).reshape(len(parsed), width)


def _profile(value: Any, path: str, n: int, cols: Optional[int]):
    """(values, grid) for H / Bd entries"""
    if not isinstance(value, dict):
        raise ModelFormatError(path, 'expected {"constant": ...} or {"grid": [...], "values": [...]}')
    if "constant" in value:
        return _matrix(value["constant"], f"{path}.constant", n, cols), None
    if "grid" not in value or "values" not in value:
        raise ModelFormatError(path, 'needs "constant" or both "grid" and "values"')
    grid = _vector(value["grid"], f"{path}.grid")
    samples = value["values"]
    if not isinstance(samples, list) or len(samples) != grid.size:
        raise ModelFormatError(f"{path}.values", f"expected {grid.size} samples (one per grid point)")
    mats = [_matrix(s, f"{path}.values[{k}]", n, cols) for k, s in enumerate(samples)]
    if cols is None and len({m.shape for m in mats}) > 1:
        raise ModelFormatError(f"{path}.values", "samples have different shapes")
    return np.stack(mats), grid


def parse_model(doc: dict) -> PhsModel:
    """PhsModel from a parsed JSON document

    Raises:
        ModelFormatError: with the key path of the offending entry
    """
    if not isinstance(doc, dict):
        raise ModelFormatError("", "model document must be an object")
    for key in ("n", "order", "interval", "P1", "P0", "G0", "H", "W1", "Wtilde"):
        if key not in doc:
            raise ModelFormatError(key, "is required")
    n = doc["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ModelFormatError("n", f"expected a positive integer, got {n!r}")
    order = doc["order"]
    if order not in (1, 2):
        raise ModelFormatError("order", f"expected 1 or 2, got {order!r}")
    width = 2 * n * order
    interval = _vector(doc["interval"], "interval", 2)

    mats = {key: _matrix(doc[key], key, n, n) for key in ("P1", "P0", "G0")}
    if "P2" in doc:
        mats["P2"] = _matrix(doc["P2"], "P2", n, n)
    elif order == 2:
        raise ModelFormatError("P2", "is required for order 2")
    H, H_grid = _profile(doc["H"], "H", n, n)
    Bd = Bd_grid = None
    if "Bd" in doc:
        Bd, Bd_grid = _profile(doc["Bd"], "Bd", n, None)
    W1 = _matrix(doc["W1"], "W1", cols=width)
    W2 = _matrix(doc.get("W2", []), "W2", cols=width)
    Wtilde = _matrix(doc["Wtilde"], "Wtilde", cols=width)

    try:
        return PhsModel(
            n=n, order=order, interval=(interval[0], interval[1]), H=H, H_grid=H_grid,
            Bd=Bd, Bd_grid=Bd_grid, W1=W1, W2=W2, Wtilde=Wtilde, name=str(doc.get("name", "")),
            **mats,
        )
    except DimensionError as e:
        raise ModelFormatError(e.field, str(e).split(": ", 1)[-1]) from e
    except UnsupportedOrderError as e:
        raise ModelFormatError("order", str(e)) from e


def _parse_signal(doc: Any, p: int, nw: int) -> SignalModel:
    if not isinstance(doc, dict):
        raise ModelFormatError("demo.signal", "expected an object")
    freqs = _vector(doc.get("freqs", []), "demo.signal.freqs")
    q = freqs.size
    coeffs = {}
    for key, size in (("a0", p), ("b0", nw)):
        if key in doc:
            coeffs[key] = _vector(doc[key], f"demo.signal.{key}", size)
    for key, width in (("a_cos", p), ("a_sin", p), ("b_cos", nw), ("b_sin", nw)):
        if key in doc:
            coeffs[key] = _matrix(doc[key], f"demo.signal.{key}", q, width)
    try:
        return SignalModel.create(freqs, p, nw, unit=str(doc.get("unit", "")), **coeffs)
    except DimensionError as e:
        raise ModelFormatError(f"demo.signal.{e.field}", str(e).split(": ", 1)[-1]) from e


def _parse_controller(doc: Any, p: int) -> ControllerSettings:
    path = "demo.controller"
    if not isinstance(doc, dict):
        raise ModelFormatError(path, "expected an object")
    if "freqs" not in doc:
        raise ModelFormatError(f"{path}.freqs", "is required")
    freqs = tuple(_vector(doc["freqs"], f"{path}.freqs").tolist())
    Dc = doc.get("Dc", 0.0)
    Dc = _matrix(Dc, f"{path}.Dc", p, p) if isinstance(Dc, (list, dict)) else _number(Dc, f"{path}.Dc")
    return ControllerSettings(
        freqs=freqs,
        include_zero=bool(doc.get("include_zero", False)),
        Dc=Dc,
        delta_c=_number(doc.get("delta_c", 0.1), f"{path}.delta_c"),
    )


def _parse_simulation(doc: Any) -> SimulationSettings:
    path = "demo.simulation"
    if not isinstance(doc, dict):
        raise ModelFormatError(path, "expected an object")
    defaults = SimulationSettings()
    n_f = doc.get("n_f", defaults.n_f)
    if isinstance(n_f, bool) or not isinstance(n_f, int) or n_f < 2:
        raise ModelFormatError(f"{path}.n_f", f"expected an integer >= 2, got {n_f!r}")
    horizon = _number(doc.get("horizon", defaults.horizon), f"{path}.horizon")
    dt = _number(doc.get("dt", defaults.dt), f"{path}.dt")
    if horizon <= 0 or dt <= 0:
        raise ModelFormatError(path, "horizon and dt must be positive")
    return SimulationSettings(n_f=n_f, horizon=horizon, dt=dt)


def parse_document(doc: dict) -> DemoScenario:
    """Model plus the optional demo block"""
    model = parse_model(doc)
    demo = doc.get("demo") or {}
    if not isinstance(demo, dict):
        raise ModelFormatError("demo", "expected an object")
    nw = model.n_d1 + model.p + model.n_d3
    return DemoScenario(
        model=model,
        signal=_parse_signal(demo["signal"], model.p, nw) if "signal" in demo else None,
        controller=_parse_controller(demo["controller"], model.p) if "controller" in demo else None,
        simulation=_parse_simulation(demo["simulation"]) if "simulation" in demo else None,
        notes={k: v for k, v in demo.get("notes", {}).items()} if isinstance(demo.get("notes"), dict) else {},
    )


def _profile_document(values: np.ndarray, grid: Optional[np.ndarray]) -> dict:
    if grid is None:
        return {"constant": values.tolist()}
    return {"grid": grid.tolist(), "values": values.tolist()}


def model_to_document(model: PhsModel) -> dict:
    doc = {
        "name": model.name,
        "n": model.n,
        "order": model.order,
        "interval": list(model.interval),
        "P2": model.P2.tolist(),
        "P1": model.P1.tolist(),
        "P0": model.P0.tolist(),
        "G0": model.G0.tolist(),
        "H": _profile_document(model.H, model.H_grid),
        "W1": model.W1.tolist(),
        "W2": model.W2.tolist(),
        "Wtilde": model.Wtilde.tolist(),
    }
    if model.Bd is not None:
        doc["Bd"] = _profile_document(model.Bd, model.Bd_grid)
    return doc


def signal_to_document(sig: SignalModel) -> dict:
    doc = {
        "freqs": sig.freqs.tolist(),
        "a0": sig.a0.tolist(),
        "a_cos": sig.a_cos.tolist(),
        "a_sin": sig.a_sin.tolist(),
        "b0": sig.b0.tolist(),
        "b_cos": sig.b_cos.tolist(),
        "b_sin": sig.b_sin.tolist(),
    }
    if sig.unit:
        doc["unit"] = sig.unit
    return doc


def scenario_to_document(scenario: DemoScenario) -> dict:
    """Inverse of parse_document"""
    doc = model_to_document(scenario.model)
    demo: dict[str, Any] = {}
    if scenario.simulation is not None:
        demo["simulation"] = {
            "n_f": scenario.simulation.n_f,
            "horizon": scenario.simulation.horizon,
            "dt": scenario.simulation.dt,
        }
    if scenario.controller is not None:
        Dc = np.asarray(scenario.controller.Dc, dtype=float)
        demo["controller"] = {
            "freqs": list(scenario.controller.freqs),
            "include_zero": scenario.controller.include_zero,
            "Dc": Dc.tolist() if Dc.ndim else float(Dc),
            "delta_c": scenario.controller.delta_c,
        }
    if scenario.signal is not None:
        demo["signal"] = signal_to_document(scenario.signal)
    if scenario.notes:
        demo["notes"] = dict(scenario.notes)
    if demo:
        doc["demo"] = demo
    return doc


def read_model_file(path) -> DemoScenario:
    """Load and parse a model file

    Raises:
        ModelFormatError: missing/unreadable file or invalid content
    """
    doc = load_document(Path(path))
    if doc is None:
        raise ModelFormatError("", f"cannot read model file {path}")
    return parse_document(doc)


def write_model_file(path, scenario: DemoScenario) -> bool:
    return save_document(Path(path), scenario_to_document(scenario))
