import copy
import json
from pathlib import Path
from typing import Any, Dict, Optional

from compression_errors import ConfigError

DEFAULT_CONFIG_FILE = "config.json"

DEFAULTS: Dict[str, Any] = {
    "log_level": "INFO",
    "log_dir": None,
    "clustering": {
        "algorithm": "kmeanspp",
        "k": 16,
        "fuzzifier": 2.0,
        "tolerance": 1e-4,
        "max_iterations": 300,
        "restarts": 1,
        "seed": 0,
        "use_unique_colors": False,
    },
    "iec": {"threshold": 0.95, "metric": "ssim"},
    "bench": {
        "algorithms": ["kmeans", "kmeanspp", "fcm", "fcmpp"],
        "k_values": [4, 8, 16, 32],
        "runs": 30,
        "base_seed": 0,
        "restarts": 1,
        "color_modes": ["gray", "rgb"],
        "baseline": "kmeanspp",
        "workers": 1,
    },
    "report": {"schema_version": 1},
}


def _merge(base: Dict[str, Any], override: Dict[str, Any]) -> Dict[str, Any]:
    merged = copy.deepcopy(base)
    for key, value in override.items():
        if isinstance(value, dict) and isinstance(merged.get(key), dict):
            merged[key] = _merge(merged[key], value)
        else:
            merged[key] = value
    return merged


class ConfigLoader:
    """
    Singleton-style config loader.
    Loads config.json once (falling back to built-in defaults when the
    default file is absent) and exposes clustering / IEC / bench settings.
    """
    _instance = None

    def __init__(self, config_file: Optional[str] = None):
        explicit = config_file is not None
        config_path = Path(config_file or DEFAULT_CONFIG_FILE)

        if config_path.exists():
            try:
                with config_path.open("r", encoding="utf-8") as f:
                    loaded = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"Config file {config_path} is not valid JSON: {e}") from e
            self.config_path: Optional[Path] = config_path
        elif explicit:
            raise FileNotFoundError(f"Config file not found: {config_path.resolve()}")
        else:
            loaded = {}
            self.config_path = None

        self.config_details = _merge(DEFAULTS, loaded)

        # Logging
        self.log_level = self.config_details["log_level"]
        self.log_dir = self.config_details["log_dir"]

        # Sections
        self.clustering = self.config_details["clustering"]
        self.iec = self.config_details["iec"]
        self.bench = self.config_details["bench"]

        self.schema_version = int(self.config_details["report"]["schema_version"])

    def cluster_config(self, **overrides: Any):
        """Build a ClusterConfig from the clustering section; None overrides are ignored."""
        from clusterers import ClusterConfig

        values = dict(self.clustering)
        values.update({k: v for k, v in overrides.items() if v is not None})
        return ClusterConfig(
            algorithm=values["algorithm"],
            k=int(values["k"]),
            fuzzifier=float(values["fuzzifier"]),
            tolerance=float(values["tolerance"]),
            max_iterations=int(values["max_iterations"]),
            restarts=int(values["restarts"]),
            seed=int(values["seed"]),
            use_unique_colors=bool(values["use_unique_colors"]),
        )

    @classmethod
    def get_instance(cls, config_file: Optional[str] = None) -> "ConfigLoader":
        if cls._instance is None:
            cls._instance = cls(config_file=config_file)
        return cls._instance

    @classmethod
    def reset_instance(cls) -> None:
        cls._instance = None
