"""Run configuration of the command line front end.

A RunConfig holds everything a run depends on. Together with its seed it
reproduces the run.
"""

from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, Mapping, Optional, Tuple

import yaml  # type: ignore

from tileheat.geometry import Window
from tileheat.global_helpers import setting
from tileheat.mapping import kind_mapping, scheme_mapping
from tileheat.semigroup import TRUNCATIONS

COMMANDS = ("tile", "skeleton", "nash", "heat", "gauss", "report")


class ConfigError(ValueError):
    """Invalid run configuration.

    Properties:
        path: dotted path of the offending field, e.g. ``tiling.side``
    """

    def __init__(self, path: str, message: str) -> None:
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class TilingConfig:
    """Where the tiling of a run comes from: a document or a generator."""

    kind: str = "square"
    side: float = 1.0
    window: str = "40"
    path: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    # pylint: disable=too-many-instance-attributes
    """Complete description of one run.

    Empty time lists and a missing n_functions fall back to the report
    section of the defaults.
    """

    command: str = "report"
    tiling: TilingConfig = field(default_factory=TilingConfig)
    graph: Optional[str] = None
    output: Optional[str] = None
    dump_function: Optional[str] = None
    mesh_size: Optional[float] = None
    scheme: str = "krylov"
    truncation: str = "reflecting"
    seed: int = 0
    n_functions: Optional[int] = None
    times: Tuple[float, ...] = ()
    gauss_times: Tuple[float, ...] = ()
    dilations: Tuple[float, ...] = ()
    sources: Tuple[str, ...] = ()
    robin_b: float = 1.0
    stability: bool = True
    tolerances: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Any]) -> "RunConfig":
        """Validated configuration from a (parsed YAML) mapping.

        Raises:
            ConfigError: naming the dotted path of the first invalid field
        """
        if not isinstance(mapping, Mapping):
            raise ConfigError("<root>", "configuration must be a mapping")
        known = {item.name for item in fields(cls)}
        values: Dict[str, Any] = {}
        for key, value in mapping.items():
            if key not in known:
                raise ConfigError(str(key), "unknown field")
            if value is not None:
                values[key] = value
        values["tiling"] = _tiling_config(values.get("tiling", {}))
        for key in ("times", "gauss_times", "dilations"):
            if key in values:
                values[key] = _float_list(key, values[key])
        if "sources" in values:
            if isinstance(values["sources"], str):
                values["sources"] = [values["sources"]]
            values["sources"] = tuple(str(item) for item in values["sources"])
        if "tolerances" in values:
            values["tolerances"] = _tolerances(values["tolerances"])
        config = cls(**values)
        config.validate()
        return config

    @classmethod
    def from_yaml(cls, path: str) -> "RunConfig":
        """Configuration from a YAML file."""
        with open(path, "r", encoding="utf-8") as __f:
            document = yaml.safe_load(__f)
        return cls.from_mapping(document or {})

    def merged(self, overrides: Mapping[str, Any]) -> "RunConfig":
        """Configuration with the given values replaced. None values are ignored.

        Keys of the form ``tiling.side`` address the tiling section.
        """
        document = self.to_dict()
        for key, value in overrides.items():
            if value is None:
                continue
            if key.startswith("tiling."):
                document["tiling"][key.split(".", 1)[1]] = value
            else:
                document[key] = value
        return RunConfig.from_mapping(document)

    def to_dict(self) -> Dict[str, Any]:
        """Plain serializable form of the configuration."""
        document = asdict(self)
        for key in ("times", "gauss_times", "dilations", "sources"):
            document[key] = list(document[key])
        return document

    def validate(self) -> None:
        # pylint: disable=too-many-branches
        """Raise ConfigError for the first invalid field."""
        if self.command not in COMMANDS:
            raise ConfigError("command", f"expected one of {COMMANDS}")
        if self.tiling.path is None:
            if self.tiling.kind not in kind_mapping:
                raise ConfigError("tiling.kind", f"expected one of {sorted(kind_mapping)}")
            if not _positive(self.tiling.side):
                raise ConfigError("tiling.side", "must be a positive number")
            try:
                Window.parse(self.tiling.window)
            except ValueError as exception:
                raise ConfigError("tiling.window", str(exception)) from exception
        if self.mesh_size is not None and not _positive(self.mesh_size):
            raise ConfigError("mesh_size", "must be a positive number")
        if self.scheme not in scheme_mapping:
            raise ConfigError("scheme", f"expected one of {sorted(scheme_mapping)}")
        if self.truncation not in TRUNCATIONS:
            raise ConfigError("truncation", f"expected one of {TRUNCATIONS}")
        if isinstance(self.seed, bool) or not isinstance(self.seed, int) or self.seed < 0:
            raise ConfigError("seed", "must be a nonnegative integer")
        if self.n_functions is not None and (
            not isinstance(self.n_functions, int) or self.n_functions < 1
        ):
            raise ConfigError("n_functions", "must be a positive integer")
        for key in ("times", "gauss_times", "dilations"):
            if any(not _positive(value) for value in getattr(self, key)):
                raise ConfigError(key, "all values must be positive")
        if not isinstance(self.robin_b, (int, float)) or self.robin_b < 0.0:
            raise ConfigError("robin_b", "must be a nonnegative number")

    def report_times(self) -> Tuple[float, ...]:
        return self.times or tuple(setting("report.times"))

    def report_gauss_times(self) -> Tuple[float, ...]:
        return self.gauss_times or tuple(setting("report.gauss_times"))

    def report_dilations(self) -> Tuple[float, ...]:
        return self.dilations or tuple(setting("report.dilations"))

    def report_n_functions(self) -> int:
        return self.n_functions or int(setting("report.n_functions"))


def _positive(value: Any) -> bool:
    return isinstance(value, (int, float)) and not isinstance(value, bool) and value > 0.0


def _tiling_config(section: Any) -> TilingConfig:
    if isinstance(section, TilingConfig):
        return section
    if not isinstance(section, Mapping):
        raise ConfigError("tiling", "must be a mapping")
    known = {item.name for item in fields(TilingConfig)}
    values = {}
    for key, value in section.items():
        if key not in known:
            raise ConfigError(f"tiling.{key}", "unknown field")
        if value is not None:
            values[key] = value
    if "side" in values:
        try:
            values["side"] = float(values["side"])
        except (TypeError, ValueError) as exception:
            raise ConfigError("tiling.side", "must be a positive number") from exception
    if "window" in values:
        window = values["window"]
        values["window"] = (
            ",".join(str(part) for part in window) if isinstance(window, (list, tuple)) else str(window)
        )
    return TilingConfig(**values)


def _float_list(path: str, value: Any) -> Tuple[float, ...]:
    items = value if isinstance(value, (list, tuple)) else [value]
    try:
        return tuple(float(item) for item in items)
    except (TypeError, ValueError) as exception:
        raise ConfigError(path, "must be a list of numbers") from exception


def _tolerances(value: Any) -> Dict[str, Any]:
    if not isinstance(value, Mapping):
        raise ConfigError("tolerances", "must be a mapping of dotted setting keys")
    for key in value:
        try:
            setting(str(key))
        except KeyError as exception:
            raise ConfigError(f"tolerances.{key}", "unknown setting") from exception
    return {str(key): item for key, item in value.items()}
