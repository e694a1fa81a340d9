"""Demo scenario descriptors

Each scenario package exposes a module-level ``scenario`` in its main.py.
"""

import re
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path
from typing import TYPE_CHECKING, Optional

if TYPE_CHECKING:
    from ..modelfile import DemoScenario

ScenarioBuilder = Callable[[], "DemoScenario"]

NAME_PATTERN = re.compile(r"^[a-z][a-z0-9_-]*$")


@dataclass(frozen=True)
class ScenarioConfig:
    """A named, buildable demo scenario

    ``model_file`` is the shipped JSON rendition of the scenario, if any;
    it must describe the same model as ``builder``.
    """

    name: str
    builder: ScenarioBuilder
    description: str
    display_name: str = ""
    model_file: Optional[Path] = None

    def __post_init__(self):
        if not NAME_PATTERN.match(self.name or ""):
            raise ValueError(f"scenario name must be lowercase ascii, got {self.name!r}")
        if not callable(self.builder):
            raise ValueError("builder must be callable")
        if not self.description:
            raise ValueError("description is required")
        if not self.display_name:
            object.__setattr__(self, "display_name", self.name)
        if self.model_file is not None:
            object.__setattr__(self, "model_file", Path(self.model_file))

    def build(self) -> "DemoScenario":
        """Fresh DemoScenario from the builder"""
        return self.builder()

    def load_model_file(self) -> Optional["DemoScenario"]:
        """The shipped model file, None when the scenario ships none"""
        if self.model_file is None:
            return None
        # lazy import avoids circular imports
        from ..modelfile import read_model_file

        return read_model_file(self.model_file)
