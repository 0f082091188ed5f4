"""
Configuration - environment settings and INI experiment files
"""

import configparser
import os
from functools import lru_cache
from pathlib import Path
from typing import Any, Dict, List, Optional, Union

from pydantic import BaseModel, Field, ValidationError
from pydantic_settings import BaseSettings, SettingsConfigDict

from app.models.schemas import EncoderConfig, ExperimentConfig, GepParams, Method, OptimizerSettings
from app.services.benchmarks import get_benchmark, suggest
from app.utils.errors import ConfigurationError, UnknownNameError


class Settings(BaseSettings):
    """Process-wide settings read from NEEP_* environment variables"""
    model_config = SettingsConfigDict(env_prefix="NEEP_", extra="ignore")

    output_root: str = Field("results", description="Parent of default run directories")
    log_level: str = "INFO"
    workers: int = Field(default_factory=lambda: os.cpu_count() or 1, ge=1)
    data_dir: Optional[str] = Field(None, description="Where Energy/Concrete CSVs are looked up")
    host: str = "0.0.0.0"
    port: int = 8000
    max_finished_runs: int = Field(100, ge=1, description="Finished API runs kept for status lookups")


@lru_cache()
def get_settings() -> Settings:
    return Settings()


# ============================================================================
# NAME RESOLUTION
# ============================================================================

def resolve_method(name: Union[str, Method]) -> Method:
    """Method by value or label, e.g. 'cmaes-neep' or 'CMAES-NEEP'"""
    if isinstance(name, Method):
        return name
    key = name.strip().lower()
    for method in Method:
        if method.value == key:
            return method
    valid = [m.value for m in Method]
    raise UnknownNameError("method", name, valid, suggest(name, valid))


def resolve_problem(name: str) -> str:
    """Canonical benchmark name; unknown names raise with suggestions"""
    return get_benchmark(name.strip()).name


# ============================================================================
# INI FILES
# ============================================================================

_SECTIONS: Dict[str, type] = {
    "encoder": EncoderConfig,
    "optimizer": OptimizerSettings,
    "gep": GepParams,
}
_LIST_KEYS = {"methods", "problems"}


def _split_list(value: str) -> List[str]:
    return [item.strip() for item in value.replace("\n", ",").split(",") if item.strip()]


def _section_values(parser: configparser.ConfigParser, section: str, model: type) -> Dict[str, Any]:
    values: Dict[str, Any] = {}
    for key, raw in parser.items(section):
        if key not in model.model_fields:
            raise ConfigurationError(f"unknown key '{key}' in [{section}]")
        if key.endswith("_range"):
            values[key] = tuple(_split_list(raw))
        elif key in _LIST_KEYS:
            values[key] = _split_list(raw)
        elif raw.strip().lower() in ("", "none"):
            values[key] = None
        else:
            values[key] = raw.strip()
    return values


def parse_experiment_text(text: str, source: str = "<config>") -> ExperimentConfig:
    """Validate INI text into an ExperimentConfig"""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigurationError(f"cannot parse {source}: {e}") from None

    data: Dict[str, Any] = {}
    for section in parser.sections():
        if section == "experiment":
            data.update(_section_values(parser, section, ExperimentConfig))
        elif section in _SECTIONS:
            data[section] = _section_values(parser, section, _SECTIONS[section])
        else:
            raise ConfigurationError(f"unknown section [{section}] in {source}")

    if "methods" in data:
        data["methods"] = [resolve_method(m) for m in data["methods"]]
    if "problems" in data:
        data["problems"] = [resolve_problem(p) for p in data["problems"]]
    try:
        return ExperimentConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigurationError(f"invalid configuration in {source}: {e}") from None


def load_experiment_file(path: Union[str, Path]) -> ExperimentConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigurationError(f"config file not found: {path}")
    return parse_experiment_text(path.read_text(encoding="utf-8"), source=str(path))


def apply_overrides(config: ExperimentConfig, **overrides: Any) -> ExperimentConfig:
    """New config with every non-None override applied on top of `config`"""
    updates = {key: value for key, value in overrides.items() if value is not None}
    if not updates:
        return config
    if "methods" in updates:
        updates["methods"] = [resolve_method(m) for m in updates["methods"]]
    if "problems" in updates:
        updates["problems"] = [resolve_problem(p) for p in updates["problems"]]
    try:
        return ExperimentConfig.model_validate({**config.model_dump(), **updates})
    except ValidationError as e:
        raise ConfigurationError(f"invalid override: {e}") from None


def _format_value(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, Method):
        return value.value
    if isinstance(value, (list, tuple)):
        return ", ".join(_format_value(v) for v in value)
    return str(value)


def _model_section(model: BaseModel) -> Dict[str, str]:
    return {
        key: _format_value(getattr(model, key))
        for key in type(model).model_fields
        if getattr(model, key) is not None
    }


def dump_experiment(config: ExperimentConfig) -> str:
    """INI text that parses back into an equal ExperimentConfig"""
    lines: List[str] = []
    experiment = {
        key: _format_value(getattr(config, key))
        for key in ("methods", "problems", "trials", "seed", "pop", "generations", "data")
        if getattr(config, key) is not None
    }
    sections = [("experiment", experiment)] + [
        (name, _model_section(getattr(config, name))) for name in _SECTIONS
    ]
    for name, values in sections:
        lines.append(f"[{name}]")
        lines.extend(f"{key} = {value}" for key, value in values.items())
        lines.append("")
    return "\n".join(lines)


def default_output_dir(config: ExperimentConfig, output_root: Optional[str] = None) -> Path:
    """Deterministic run directory under the output root"""
    root = output_root if output_root is not None else get_settings().output_root
    methods = "+".join(m.value for m in config.methods)
    problems = "+".join(config.problems)
    return Path(root) / f"{methods}_{problems}_s{config.seed}"
