"""Artifact persistence: JSON documents, matrix containers, trajectories, plot scripts and reports"""

import json
from pathlib import Path
from typing import Any, Optional

import numpy as np

from .logger import logger

CONTAINER_HEADER = "# phs-regulator matrix container v1"


def get_output_dir(base: str | Path, name: str = "") -> Path:
    """Output directory for a run, created on demand"""
    out = Path(base) / name if name else Path(base)
    out.mkdir(parents=True, exist_ok=True)
    return out


def load_document(path: Path) -> Any:
    """Load a JSON document

    Args:
        path: file to read

    Returns:
        Parsed data or None if missing/invalid
    """
    try:
        if path.exists():
            with open(path, encoding="utf-8") as f:
                return json.load(f)
        logger.warning(f"文件不存在: {path}")
    except Exception as e:
        logger.warning(f"读取文件失败 {path}: {e}")
    return None


def save_document(path: Path, data: Any) -> bool:
    """Save data as JSON

    Args:
        path: target file
        data: JSON-serializable data

    Returns:
        True if successful, False otherwise
    """
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as f:
            json.dump(data, f, ensure_ascii=False, indent=2)
        return True
    except Exception as e:
        logger.error(f"保存文件失败 {path}: {e}")
        return False


def write_matrix_container(path: Path, matrices: dict[str, np.ndarray], provenance: Optional[dict] = None) -> bool:
    """Write matrices as text blocks ``matrix NAME rows cols`` followed by rows

    Values use ``%.17g`` so a reload is exact.
    """
    lines = [CONTAINER_HEADER]
    for key, value in (provenance or {}).items():
        lines.append(f"# {key}: {json.dumps(value, ensure_ascii=False)}")
    for name, mat in matrices.items():
        mat = np.atleast_2d(np.asarray(mat, dtype=float))
        lines.append(f"matrix {name} {mat.shape[0]} {mat.shape[1]}")
        lines.extend(" ".join(f"{v:.17g}" for v in row) for row in mat)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
        return True
    except Exception as e:
        logger.error(f"保存矩阵容器失败 {path}: {e}")
        return False


def read_matrix_container(path: Path) -> Optional[tuple[dict[str, np.ndarray], dict[str, Any]]]:
    """Inverse of write_matrix_container; None if the file is missing or malformed"""
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
        if not lines or lines[0].strip() != CONTAINER_HEADER:
            raise ValueError("missing container header")
        provenance: dict[str, Any] = {}
        matrices: dict[str, np.ndarray] = {}
        i = 1
        while i < len(lines):
            line = lines[i].strip()
            i += 1
            if not line:
                continue
            if line.startswith("#"):
                key, _, value = line[1:].partition(":")
                provenance[key.strip()] = json.loads(value)
                continue
            tag, name, rows, cols = line.split()
            if tag != "matrix":
                raise ValueError(f"unexpected line {i}: {line}")
            rows, cols = int(rows), int(cols)
            data = [[float(v) for v in lines[i + r].split()] for r in range(rows)] if cols else [[]] * rows
            matrices[name] = np.array(data, dtype=float).reshape(rows, cols)
            i += rows
        return matrices, provenance
    except Exception as e:
        logger.warning(f"读取矩阵容器失败 {path}: {e}")
        return None


def trajectory_header(p: int) -> str:
    columns = ["t"]
    columns += [f"y_{i + 1}" for i in range(p)]
    columns += [f"yref_{i + 1}" for i in range(p)]
    columns += [f"e_{i + 1}" for i in range(p)]
    columns.append("energy")
    return ",".join(columns)


def write_trajectory_csv(path: Path, t, y, y_ref, energy) -> bool:
    """CSV with columns t, y_1..y_p, yref_1..yref_p, e_1..e_p, energy"""
    y = np.atleast_2d(np.asarray(y, dtype=float))
    y_ref = np.atleast_2d(np.asarray(y_ref, dtype=float))
    data = np.column_stack([t, y, y_ref, y - y_ref, energy])
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        np.savetxt(path, data, delimiter=",", header=trajectory_header(y.shape[1]), comments="", fmt="%.12g")
        return True
    except Exception as e:
        logger.error(f"保存轨迹失败 {path}: {e}")
        return False


def write_plot_script(path: Path, csv_name: str, p: int) -> bool:
    """gnuplot script plotting output vs reference and the tracking error"""
    outputs = ", ".join(
        f'"{csv_name}" using 1:{2 + i} with lines title "y_{i + 1}", '
        f'"{csv_name}" using 1:{2 + p + i} with lines dashtype 2 title "yref_{i + 1}"'
        for i in range(p)
    )
    errors = ", ".join(f'"{csv_name}" using 1:{2 + 2 * p + i} with lines title "e_{i + 1}"' for i in range(p))
    script = "\n".join([
        "# gnuplot -p plot.gp",
        'set datafile separator ","',
        "set key outside",
        "set grid",
        'set xlabel "t [s]"',
        "set multiplot layout 2,1",
        'set title "output tracking"',
        f"plot {outputs}",
        'set title "tracking error"',
        f"plot {errors}",
        "unset multiplot",
        "",
    ])
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(script, encoding="utf-8")
        return True
    except Exception as e:
        logger.error(f"保存绘图脚本失败 {path}: {e}")
        return False


def _format_value(value: Any) -> str:
    if isinstance(value, (bool, np.bool_)) or value is None:
        return str(value).lower()
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.12g}"
    if isinstance(value, (list, tuple, np.ndarray)):
        return json.dumps(np.asarray(value).tolist())
    return str(value)


def format_report(data: dict[str, Any], title: str = "") -> str:
    """``key: value`` lines in insertion order"""
    lines = [f"# {title}"] if title else []
    lines.extend(f"{key}: {_format_value(value)}" for key, value in data.items())
    return "\n".join(lines) + "\n"


def write_report(path: Path, data: dict[str, Any], title: str = "") -> bool:
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(format_report(data, title), encoding="utf-8")
        return True
    except Exception as e:
        logger.error(f"保存报告失败 {path}: {e}")
        return False
