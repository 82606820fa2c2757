"""YAML experiment configs with field-level error messages."""

from __future__ import annotations

from pathlib import Path

import yaml

from .benchmarks.experiment import ExperimentConfig, MethodSpec


class ConfigError(ValueError):
    """Malformed config; the message names the file, line and field when known."""


_SCALARS = {
    "design_multiplier": int,
    "n_test": int,
    "repetitions": int,
    "regularity": int,
    "seed": int,
    "mcmc_draws": int,
    "ml_restarts": int,
    "rule2_pairs": int,
}
_METHOD_FIELDS = {
    "kind": str,
    "rule": str,
    "delta": float,
    "tau_mode": str,
    "tau": float,
    "split": (float, type(None)),
    "standardized": bool,
}


def _key_lines(node) -> dict:
    if not isinstance(node, yaml.MappingNode):
        return {}
    return {k.value: k.start_mark.line + 1 for k, _ in node.value}


def _check_type(value, expected, where):
    exp = expected if isinstance(expected, tuple) else (expected,)
    if bool in exp:
        ok = isinstance(value, bool)
    elif float in exp:
        ok = (isinstance(value, (int, float)) and not isinstance(value, bool)) or (
            value is None and type(None) in exp
        )
    elif int in exp:
        ok = isinstance(value, int) and not isinstance(value, bool)
    else:
        ok = isinstance(value, exp)
    if not ok:
        names = "/".join(t.__name__ for t in exp)
        raise ConfigError(f"{where}: expected {names}, got {value!r}")


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    try:
        node = yaml.compose(text)
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        line = f" line {mark.line + 1}" if mark is not None else ""
        raise ConfigError(f"{source}{line}: invalid YAML ({getattr(exc, 'problem', exc)})") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{source}: top level must be a mapping of fields")
    lines = _key_lines(node)

    def where(key):
        return f"{source} line {lines[key]}, field '{key}'" if key in lines else f"{source}, field '{key}'"

    known = set(_SCALARS) | {"functions", "levels", "methods", "prior_bounds"}
    for key in data:
        if key not in known:
            raise ConfigError(f"{where(key)}: unknown field")
    for key, typ in _SCALARS.items():
        if key in data:
            _check_type(data[key], typ, where(key))
    for key in ("functions", "levels", "prior_bounds", "methods"):
        if key in data and not isinstance(data[key], list):
            raise ConfigError(f"{where(key)}: expected a list")
    for f in data.get("functions", []):
        _check_type(f, str, where("functions"))
    for key in ("levels", "prior_bounds"):
        for v in data.get(key, []):
            _check_type(v, float, where(key))
    methods = []
    method_nodes = []
    if node is not None and "methods" in lines:
        for k, v in node.value:
            if k.value == "methods" and isinstance(v, yaml.SequenceNode):
                method_nodes = v.value
    for i, m in enumerate(data.get("methods", [])):
        line = f" line {method_nodes[i].start_mark.line + 1}" if i < len(method_nodes) else ""
        tag = f"{source}{line}, methods[{i}]"
        if isinstance(m, str):
            m = {"kind": m}
        if not isinstance(m, dict):
            raise ConfigError(f"{tag}: expected a mapping or a method name")
        for k, v in m.items():
            if k not in _METHOD_FIELDS:
                raise ConfigError(f"{tag}: unknown field '{k}'")
            _check_type(v, _METHOD_FIELDS[k], f"{tag}, field '{k}'")
        try:
            methods.append(MethodSpec(**m))
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{tag}: {exc}") from None
    if "methods" in data:
        data = dict(data, methods=tuple(methods))
    try:
        return ExperimentConfig.from_dict(data)
    except (KeyError, TypeError, ValueError) as exc:
        msg = exc.args[0] if exc.args else str(exc)
        raise ConfigError(f"{source}: {msg}") from None


def load_config(path) -> ExperimentConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}") from None
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def dump_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config.to_dict(), sort_keys=False)
