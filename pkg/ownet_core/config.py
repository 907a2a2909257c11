from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

DEFAULT_MODEL = "tm"
DEFAULT_METHOD = "staged"
DEFAULT_THRESHOLD = 0.5
DEFAULT_THETA = 0.8
DEFAULT_TOP = 50
DEFAULT_MIN_SHARE = 0.10
DEFAULT_MISSING_COUNTRY_FRACTION = 0.05
DEFAULT_DENSE_LIMIT = 2000
DEFAULT_TOLERANCE = 1e-10
DEFAULT_MAX_ITERATIONS = 1_000_000

ALL_STAGES = (
    "validate",
    "extract",
    "components",
    "bowtie",
    "motifs",
    "stats",
    "control",
    "concentration",
    "rank",
)

_MODELS = ("lm", "tm", "rm")
_METHODS = ("naive", "corrected", "staged")
_KEYS = ("cnet", "vnet", "value")
_PRECISIONS = ("6", "full")


class ConfigError(RuntimeError):
    """Raised when a configuration file or option set is invalid."""


@dataclass
class RunConfig:
    nodes: Optional[Path] = None
    edges: Optional[Path] = None
    values: Optional[Path] = None
    seeds: Optional[str] = None
    selection: Optional[Path] = None
    out_dir: Path = Path("ownet-out")
    model: str = DEFAULT_MODEL
    threshold: float = DEFAULT_THRESHOLD
    method: str = DEFAULT_METHOD
    theta: float = DEFAULT_THETA
    key: str = "cnet"
    universe: str = "positive"
    top: int = DEFAULT_TOP
    xmin: Optional[float] = None
    core: Optional[Path] = None
    renormalize: bool = False
    relaxed: bool = False
    split_tt: bool = False
    compare_models: bool = False
    min_share: float = DEFAULT_MIN_SHARE
    min_edge_weight: float = 0.0
    missing_country_fraction: float = DEFAULT_MISSING_COUNTRY_FRACTION
    precision: str = "6"
    dense_limit: int = DEFAULT_DENSE_LIMIT
    tolerance: float = DEFAULT_TOLERANCE
    max_iterations: int = DEFAULT_MAX_ITERATIONS
    seed: int = 0
    stages: List[str] = field(default_factory=lambda: list(ALL_STAGES))

    def check(self) -> "RunConfig":
        """Validate option domains, raising ``ConfigError`` on the first problem."""
        if self.model not in _MODELS:
            raise ConfigError(f"model must be one of {', '.join(_MODELS)}.")
        if self.method not in _METHODS:
            raise ConfigError(f"method must be one of {', '.join(_METHODS)}.")
        if self.key not in _KEYS:
            raise ConfigError(f"key must be one of {', '.join(_KEYS)}.")
        if self.precision not in _PRECISIONS:
            raise ConfigError("precision must be '6' or 'full'.")
        if not 0.0 < self.threshold < 1.0:
            raise ConfigError("threshold must lie strictly between 0 and 1.")
        if not 0.0 < self.theta <= 1.0:
            raise ConfigError("theta must lie in (0, 1].")
        if self.top < 1:
            raise ConfigError("top must be at least 1.")
        if self.xmin is not None and self.xmin <= 0:
            raise ConfigError("xmin must be positive.")
        if self.dense_limit < 1 or self.max_iterations < 1 or self.tolerance <= 0:
            raise ConfigError("solver limits must be positive.")
        unknown = [stage for stage in self.stages if stage not in ALL_STAGES]
        if unknown:
            raise ConfigError(f"Unknown stage(s): {', '.join(unknown)}.")
        return self

    def with_overrides(self, overrides: Mapping[str, Any]) -> "RunConfig":
        """Return a copy with every non-``None`` override applied."""
        changes = {key: value for key, value in overrides.items() if value is not None}
        return replace(self, **changes)


def _ensure_list(value: object) -> List[str]:
    if value is None:
        return []
    if isinstance(value, list):
        return [str(item).strip() for item in value if str(item).strip()]
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    raise ConfigError("Expected a list or comma-separated string.")


def _parse_bool(key: str, raw: str) -> bool:
    lowered = raw.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key} must be a boolean (true/false).")


def _coerce(key: str, raw: str, annotation: str) -> Any:
    text = raw.strip()
    optional = annotation.startswith("Optional[")
    if optional and text == "":
        return None
    base = annotation[len("Optional[") : -1] if optional else annotation
    try:
        if base == "Path":
            return Path(text).expanduser()
        if base == "float":
            return float(text)
        if base == "int":
            return int(text)
        if base == "bool":
            return _parse_bool(key, text)
        if base == "List[str]":
            return _ensure_list(text)
    except ValueError as exc:
        raise ConfigError(f"{key} has an invalid value '{text}'.") from exc
    return text


_FIELD_TYPES: Dict[str, str] = {item.name: str(item.type) for item in fields(RunConfig)}


def parse_config_text(text: str, origin: str = "<config>") -> Dict[str, Any]:
    """Parse flat ``key=value`` lines into typed RunConfig field values."""
    values: Dict[str, Any] = {}
    for number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise ConfigError(f"{origin}:{number}: expected key=value.")
        key, raw = stripped.split("=", 1)
        key = key.strip().replace("-", "_")
        if key not in _FIELD_TYPES:
            raise ConfigError(f"{origin}:{number}: unknown key '{key}'.")
        if key in values:
            raise ConfigError(f"{origin}:{number}: duplicate key '{key}'.")
        values[key] = _coerce(key, raw, _FIELD_TYPES[key])
    return values


def load_config(path: Path) -> RunConfig:
    if not path.exists():
        raise ConfigError(f"No config found at {path}.")
    with path.open("r", encoding="utf-8-sig") as handle:
        contents = parse_config_text(handle.read(), origin=str(path))
    return RunConfig(**contents).check()


def config_items(config: RunConfig) -> List[Tuple[str, str]]:
    """Return ``(key, text)`` pairs in declaration order, ``None`` as empty."""
    items: List[Tuple[str, str]] = []
    for item in fields(RunConfig):
        value = getattr(config, item.name)
        if value is None:
            text = ""
        elif isinstance(value, bool):
            text = "true" if value else "false"
        elif isinstance(value, list):
            text = ",".join(value)
        elif isinstance(value, Path):
            text = value.as_posix()
        else:
            text = repr(value) if isinstance(value, float) else str(value)
        items.append((item.name, text))
    return items


def write_config(path: Path, config: RunConfig) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="\n") as handle:
        for key, text in config_items(config):
            handle.write(f"{key}={text}\n")
