"""Resolve cases, scenarios and model bundles from disk or the bundled data."""
from pathlib import Path
from typing import Union

from .errors import ConfigError

DATA_DIR = Path(__file__).parent / "data"


def available_cases() -> set[str]:
    """Names of the case documents shipped with the package."""
    return {p.stem for p in DATA_DIR.glob("*.json")}


def available_scenarios() -> set[str]:
    """Names of the scenario definitions shipped with the package."""
    return {p.stem for p in (DATA_DIR / "scenarios").glob("*.json")}


def resolve_case(resource: Union[str, Path]) -> Path:
    """First checks for a case file locally, then among the bundled cases.

    Args:
        resource: A path to a case document, or the name of a bundled case
            such as `rts24`.

    Raises:
        ConfigError: If neither a file nor a bundled case matches.
    """
    return _resolve(resource, DATA_DIR, available_cases(), "case")


def resolve_scenario(resource: Union[str, Path]) -> Path:
    """Same as `resolve_case`, for scenario definitions."""
    return _resolve(resource, DATA_DIR / "scenarios", available_scenarios(), "scenario")


def resolve_bundle(resource: Union[str, Path]) -> tuple[Path, Path]:
    """Locate the config and parameter files of a model bundle directory."""
    root = Path(resource)
    config, params = root / "config.json", root / "params.pt"
    if not (config.is_file() and params.is_file()):
        raise ConfigError(
            f"'{root}' is not a model bundle (needs {config.name} and {params.name})"
        )
    return config, params


def _resolve(resource: Union[str, Path], root: Path, names: set[str], kind: str):
    path = Path(resource)
    if path.is_file():
        return path
    if str(resource) in names:
        return root / f"{resource}.json"
    raise ConfigError(
        f"Could not find {kind} '{resource}'. Bundled {kind}s: {sorted(names)}"
    )
