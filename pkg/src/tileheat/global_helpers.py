"""Some globally used functions"""

import copy
import os
import tempfile
from typing import Any, Dict, Mapping, Optional

import yaml  # type: ignore

from tileheat.logger import logger

_DEFAULTS: Optional[Dict[str, Any]] = None
_OVERRIDES: Dict[str, Any] = {}

THREADS_ENV = "TILEHEAT_THREADS"


def defaults() -> Dict[str, Any]:
    """Get dict of numerical defaults from the defaults.yaml file.

    The file is shipped with the package and holds the constants of the Nash
    inequalities, tolerances and caps of the numerical schemes.
    """
    global _DEFAULTS  # pylint: disable=global-statement
    if _DEFAULTS is None:
        try:
            with open(
                os.path.dirname(os.path.realpath(__file__))
                + os.path.sep
                + "defaults.yaml",
                "r",
                encoding="utf-8",
            ) as __f:
                _DEFAULTS = yaml.safe_load(__f)
        except (OSError, yaml.YAMLError) as exception:
            logger().error("Cannot get defaults from defaults.yaml. %s", exception)
            raise
    return _DEFAULTS


def setting(key: str) -> Any:
    """Return the value of a dotted key like ``semigroup.krylov.tol``.

    Overrides installed with apply_overrides() take precedence.
    """
    if key in _OVERRIDES:
        return _OVERRIDES[key]
    node: Any = defaults()
    for part in key.split("."):
        try:
            node = node[part]
        except (KeyError, TypeError) as exception:
            raise KeyError(f"unknown setting {key}") from exception
    return copy.deepcopy(node)


def apply_overrides(overrides: Mapping[str, Any]) -> None:
    """Install tolerance overrides of a run. Unknown keys raise KeyError."""
    for key in overrides:
        setting(key)
    _OVERRIDES.clear()
    _OVERRIDES.update(overrides)
    if overrides:
        logger().debug("Setting overrides: %s", dict(overrides))


def threads() -> int:
    """Number of worker threads for kernel computations."""
    raw = os.environ.get(THREADS_ENV, "1")
    try:
        return max(1, int(raw))
    except ValueError:
        logger().warning("Ignoring %s=%r, not an integer.", THREADS_ENV, raw)
        return 1


def write_atomic(path: str, text: str) -> None:
    """Write text to path so that readers never see a partial file."""
    directory = os.path.dirname(os.path.abspath(path))
    with tempfile.NamedTemporaryFile(
        "w", encoding="utf-8", dir=directory, delete=False, suffix=".part"
    ) as __f:
        __f.write(text)
        temporary = __f.name
    os.replace(temporary, path)
    logger().debug("Wrote %s", path)
