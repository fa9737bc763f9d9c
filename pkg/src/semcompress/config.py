"""Run configuration: a line-based ``key = value`` file with ``[section]`` headers.

Unknown sections and keys are rejected with the offending line number. Keys
placed before the first section header belong to the run itself (only
``master_seed``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Optional

from .errors import SemCompError


class ConfigError(SemCompError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class MissingFile(ConfigError):
    pass


class ParseError(ConfigError):
    pass


class UnknownKey(ConfigError):
    pass


class InvalidValue(ConfigError):
    pass


def _int(text: str) -> int:
    return int(text, 10)


def _float(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise ValueError("not finite")
    return v


def _int_list(text: str) -> tuple[int, ...]:
    return tuple(_int(p.strip()) for p in text.split(",") if p.strip())


def _str(text: str) -> str:
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    return text


def _positive(v) -> bool:
    return v > 0


def _nonneg(v) -> bool:
    return v >= 0


def _unit_open(v) -> bool:
    return 0 < v <= 1


def _increasing_ge2(v) -> bool:
    return len(v) > 0 and all(g >= 2 for g in v) and all(b > a for a, b in zip(v, v[1:]))


def _nonneg_list(v) -> bool:
    return len(v) > 0 and all(k >= 0 for k in v)


@dataclass(frozen=True)
class _Key:
    parse: Callable[[str], Any]
    default: Any
    check: Optional[Callable[[Any], bool]] = None
    hint: str = ""


SCHEMA: dict[str, dict[str, _Key]] = {
    "": {
        "master_seed": _Key(_int, 0, _nonneg, "a nonnegative integer"),
    },
    "world": {
        "dimension": _Key(_int, 2, _positive, "an integer >= 1"),
        "lines_per_class": _Key(_int, 2, _positive, "an integer >= 1"),
        "components_per_line": _Key(_int, 5, _positive, "an integer >= 1"),
        "line_offset": _Key(_float, 0.12, _nonneg, "a real >= 0"),
        "component_spacing": _Key(_float, 0.17, _positive, "a real > 0"),
        "component_stddev": _Key(_float, 0.05, _positive, "a real > 0"),
        "dataset_size": _Key(_int, 20000, _positive, "an integer >= 1"),
    },
    "global_classifier": {
        "C": _Key(_float, 10.0, _positive, "a real > 0"),
        "rbf_gamma": _Key(_float, 30.0, _positive, "a real > 0"),
        "tol": _Key(_float, 1e-3, _positive, "a real > 0"),
        "train_size": _Key(_int, 4000, _positive, "an integer >= 1"),
        "max_iter": _Key(_int, 1_000_000, _positive, "an integer >= 1"),
    },
    "trajectory": {
        "length": _Key(_int, 50000, _positive, "an integer >= 1"),
        "proposal_stddev": _Key(_float, 0.05, _positive, "a real > 0"),
        "burn_in": _Key(_int, 1000, _nonneg, "an integer >= 0"),
    },
    "experiment": {
        "gamma_grid": _Key(_int_list, (5, 10, 20, 40, 80, 160, 320), _increasing_ge2,
                           "a strictly increasing list of integers >= 2"),
        "coverage": _Key(_float, 0.95, _unit_open, "a real in (0, 1]"),
        "windows_per_gamma": _Key(_int, 200, _positive, "an integer >= 1"),
        "aging_windows_per_gamma": _Key(_int, 1000, _positive, "an integer >= 1"),
        "min_local_points": _Key(_int, 10, _positive, "an integer >= 1"),
        "aging_delays": _Key(_int_list, (0, 1, 2, 4), _nonneg_list,
                             "a list of integers >= 0"),
        "loss": _Key(_str, "squared", lambda v: v in ("squared", "logistic"),
                     "'squared' or 'logistic'"),
        "logistic_delta": _Key(_float, 1e-6, lambda v: 0 < v < 0.5, "a real in (0, 0.5)"),
        "local_C": _Key(_float, 1.0, _positive, "a real > 0"),
        "local_tol": _Key(_float, 0.1, _positive, "a real > 0"),
        "negative_weight": _Key(_float, 1.0, _positive, "a real > 0"),
        "positive_weight": _Key(_float, 1.0, _positive, "a real > 0"),
    },
    "constraints": {
        "energy_budget": _Key(_float, 64.0, _positive, "a real > 0"),
        "bandwidth_budget": _Key(_float, 1.0, _nonneg, "a real >= 0"),
        "energy_tolerance": _Key(_float, 0.0, _nonneg, "a real >= 0"),
        "bandwidth_tolerance": _Key(_float, 0.0, _nonneg, "a real >= 0"),
        "payload_size": _Key(_float, 1.0, _positive, "a real > 0"),
    },
    "control": {
        "target_accuracy": _Key(_float, 0.95, _unit_open, "a real in (0, 1]"),
    },
    "output": {
        "out_dir": _Key(_str, None, lambda v: len(v) > 0, "a nonempty path"),
    },
}


@dataclass
class RunConfig:
    sections: dict[str, dict[str, Any]] = field(default_factory=dict)
    base_dir: Path = field(default_factory=Path.cwd)

    def __getitem__(self, section: str) -> dict[str, Any]:
        return self.sections[section]

    @property
    def master_seed(self) -> int:
        return self.sections[""]["master_seed"]

    def with_seed(self, seed: int) -> "RunConfig":
        sections = {k: dict(v) for k, v in self.sections.items()}
        sections[""]["master_seed"] = int(seed)
        return RunConfig(sections, self.base_dir)

    def resolve(self, path: str | Path) -> Path:
        p = Path(path)
        return p if p.is_absolute() else self.base_dir / p


def defaults() -> RunConfig:
    return RunConfig({s: {k: spec.default for k, spec in keys.items()} for s, keys in SCHEMA.items()})


def parse_config_text(text: str, base_dir: Path | None = None) -> RunConfig:
    cfg = defaults()
    if base_dir is not None:
        cfg.base_dir = base_dir
    section = ""
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ParseError(f"malformed section header {raw.strip()!r}", lineno)
            section = line[1:-1].strip()
            if section not in SCHEMA or section == "":
                raise UnknownKey(f"unknown section [{section}]", lineno)
            continue
        if "=" not in line:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        key, _, value = (part.strip() for part in line.partition("="))
        if not key:
            raise ParseError("missing key before '='", lineno)
        where = f"[{section}]" if section else "top level"
        spec = SCHEMA[section].get(key)
        if spec is None:
            raise UnknownKey(f"unknown key {key!r} in {where}", lineno)
        try:
            parsed = spec.parse(value)
        except ValueError:
            raise InvalidValue(f"{key} = {value!r}: expected {spec.hint}", lineno) from None
        if spec.check is not None and not spec.check(parsed):
            raise InvalidValue(f"{key} = {value!r}: expected {spec.hint}", lineno)
        cfg.sections[section][key] = parsed
    return cfg


def parse_config(path: str | Path) -> RunConfig:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise MissingFile(f"config file not found: {p}") from None
    except OSError as exc:
        raise MissingFile(f"cannot read config file {p}: {exc}") from None
    return parse_config_text(text, p.resolve().parent)
