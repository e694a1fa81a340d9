import importlib
import importlib.util
import sys
from pathlib import Path
from typing import Optional

from .errors import ModelFormatError
from .logger import logger
from .modelfile import DemoScenario, read_model_file
from .scenarios import ScenarioConfig

SCENARIOS_DIR = Path(__file__).parent / "scenarios"


class ScenarioRegistry:
    def __init__(self):
        """初始化 ScenarioRegistry 类
        - 管理内置与自定义场景模块
        """
        self.scenario_configs: dict[str, ScenarioConfig] = {}  # {scenario_name: scenario_config}
        self.display_name_to_scenario_name: dict[str, str] = {}  # {display_name: scenario_name}
        self.loaded = False

    def load_scenario_modules(self, custom_dir: Optional[str | Path] = None) -> list[str]:
        """Load all scenario modules from the package and an optional custom directory"""
        loaded: list[str] = []

        logger.debug(f"正在从包目录加载场景模块: {SCENARIOS_DIR}")
        for dir_path in sorted(SCENARIOS_DIR.iterdir()):
            if self._is_module_dir(dir_path) and self._load_scenario_module(dir_path.name, SCENARIOS_DIR):
                loaded.append(dir_path.name)

        if custom_dir:
            custom_dir = Path(custom_dir)
            if custom_dir.is_dir():
                logger.info(f"正在从自定义目录加载场景模块: {custom_dir}")
                for dir_path in sorted(custom_dir.iterdir()):
                    if not self._is_module_dir(dir_path):
                        continue
                    if dir_path.name in self.scenario_configs:
                        logger.warning(f"覆盖内置场景模块: {dir_path.name} (使用自定义版本)")
                    if self._load_scenario_module(dir_path.name, custom_dir) and dir_path.name not in loaded:
                        loaded.append(dir_path.name)
            else:
                logger.warning(f"自定义场景目录不存在: {custom_dir}")

        self.loaded = True
        logger.debug(f"已加载 {len(loaded)} 个场景模块: {', '.join(loaded) if loaded else '无'}")
        return loaded

    @staticmethod
    def _is_module_dir(dir_path: Path) -> bool:
        return dir_path.is_dir() and dir_path.name != "__pycache__" and not dir_path.name.startswith(".")

    def _load_scenario_module(self, name: str, base_path: Path) -> bool:
        """Load a single scenario module from the given base path"""
        try:
            if base_path == SCENARIOS_DIR:
                module = importlib.import_module(f".scenarios.{name}.main", package=__package__)
            else:
                main_py = base_path / name / "main.py"
                if not main_py.exists():
                    logger.error(f"自定义场景模块 {name} 缺少 main.py 文件")
                    return False
                spec = importlib.util.spec_from_file_location(f"custom_scenarios.{name}.main", main_py)
                module = importlib.util.module_from_spec(spec)
                sys.modules[spec.name] = module
                spec.loader.exec_module(module)

            scenario = getattr(module, "scenario", None)
            if scenario is None:
                logger.warning(f"场景模块 {name} 中未找到 scenario 变量")
                return False
            if not isinstance(scenario, ScenarioConfig):
                logger.warning(f"场景模块 {name} 中的 scenario 变量不是 ScenarioConfig")
                return False
            if scenario.name != name:
                logger.warning(f"场景模块 {name} 注册的名称为 {scenario.name}, 以名称 {scenario.name} 登记")

            self.scenario_configs[scenario.name] = scenario
            self.display_name_to_scenario_name[scenario.display_name] = scenario.name
            logger.debug(f"成功加载场景模块: {scenario.name} (显示名称: {scenario.display_name})")
            return True
        except ImportError as e:
            logger.error(f"加载场景模块 {name} 失败，缺少依赖: {e}")
            return False
        except Exception as e:
            logger.error(f"加载场景模块 {name} 失败: {e}")
            return False

    def _ensure_loaded(self):
        if not self.loaded:
            self.load_scenario_modules()

    def names(self) -> list[str]:
        self._ensure_loaded()
        return sorted(self.scenario_configs)

    def get(self, name: str) -> Optional[ScenarioConfig]:
        """Scenario by module name or display name"""
        self._ensure_loaded()
        name = self.display_name_to_scenario_name.get(name, name)
        return self.scenario_configs.get(name)

    def resolve(self, model_arg: str) -> DemoScenario:
        """A registered scenario name or a model file path

        Raises:
            ModelFormatError: neither a known scenario nor a readable model file
        """
        config = self.get(model_arg)
        if config is not None:
            logger.info(f"使用内置场景: {config.name}")
            return config.build()
        if Path(model_arg).is_file():
            return read_model_file(model_arg)
        raise ModelFormatError(
            "--model", f"{model_arg!r} is neither a scenario ({', '.join(self.names())}) nor a model file"
        )


scenario_registry = ScenarioRegistry()
