"""TOML config files for the CLI: one documented schema per subcommand,
unknown keys rejected, defaults applied.
"""

from __future__ import annotations

import sys
from dataclasses import dataclass
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib as _toml
else:
    import tomli as _toml

REQUIRED = object()


class ConfigError(ValueError):
    """The config file is missing, malformed, or violates its schema."""


@dataclass(frozen=True)
class Key:
    name: str
    kind: str          # int | float | str | bool | curve | matrix | intlist | path
    default: object
    doc: str


_CURVE = Key("curve", "curve", "hardy-weinberg",
             "curve name, or per-coordinate polynomial coefficient lists")
_SEED = Key("seed", "int", 0, "base RNG seed")
_EMBED_ITERS = Key("embed_max_iters", "int", 200, "Guttman iteration cap")
_EMBED_TOL = Key("embed_tol", "float", 1e-8, "relative stress-decrease stopping tolerance")

_POWER_KEYS = [
    _CURVE,
    Key("s", "int", 5, "community size"),
    Key("m", "int", 1000, "auxiliary vertex count"),
    Key("tau0", "float", REQUIRED, "null curve parameter"),
    Key("tau_star", "float", REQUIRED, "alternative curve parameter"),
    Key("alpha", "float", 0.05, "test level"),
    Key("replicates", "int", 1000, "Monte Carlo replicates per arm"),
    Key("radius", "float", 1.0, "localization graph radius"),
    Key("community_sd", "float", 0.0,
        "sd of the truncated-normal community distribution (0 = point mass)"),
    Key("aux_density", "str", "uniform", "auxiliary parameter density"),
    Key("metric", "matrix", "identity", "'identity' or a k x k SPD matrix as rows"),
    _SEED,
    _EMBED_ITERS,
    _EMBED_TOL,
]

SCHEMAS: dict[str, list[Key]] = {
    "simulate": [
        _CURVE,
        Key("s", "int", 5, "community size"),
        Key("m", "int", 1000, "auxiliary vertex count"),
        Key("tau", "float", REQUIRED, "community curve parameter"),
        _SEED,
    ],
    "ase": [
        Key("input", "path", REQUIRED, "edge-list CSV of the graph to embed"),
        Key("n", "int", REQUIRED, "vertex count of the graph"),
        Key("rank", "int", REQUIRED, "embedding dimension r"),
    ],
    "isomap": [
        Key("input", "path", REQUIRED, "points CSV (header v,x1..xk) to embed"),
        Key("rule", "str", "epsilon", "localization rule: 'epsilon' or 'knn'"),
        Key("radius", "float", 1.0, "epsilon-rule radius"),
        Key("neighbors", "int", 10, "knn-rule neighbor count"),
        Key("largest_component", "bool", False,
            "embed the largest component instead of failing when disconnected"),
        _EMBED_ITERS,
        _EMBED_TOL,
    ],
    "test": [k for k in _POWER_KEYS if k.name not in ("alpha", "replicates")] + [
        Key("arm", "str", "null", "which arm to simulate: 'null' or 'alternative'"),
        Key("index", "int", 0, "replicate index"),
    ],
    "power": list(_POWER_KEYS),
    "converge": [k for k in _POWER_KEYS if k.name != "m"] + [
        Key("m_values", "intlist", REQUIRED, "increasing auxiliary counts to compare"),
    ],
}

OUTPUTS: dict[str, tuple[str, ...]] = {
    "simulate": ("adjacency.csv", "latent.csv"),
    "ase": ("embedding.csv",),
    "isomap": ("line_embedding.csv", "isomap_summary.json"),
    "test": ("statistics.json",),
    "power": ("power_report.json", "replicates.csv"),
    "converge": ("convergence.csv",),
}


def _check_kind(key: Key, value):
    kind = key.kind
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"key {key.name!r} must be an integer, got {value!r}")
        return value
    if kind == "float":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"key {key.name!r} must be a number, got {value!r}")
        return float(value)
    if kind in ("str", "path"):
        if not isinstance(value, str):
            raise ConfigError(f"key {key.name!r} must be a string, got {value!r}")
        return value
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"key {key.name!r} must be true or false, got {value!r}")
        return value
    if kind == "curve":
        if isinstance(value, str):
            return value
        if (isinstance(value, list) and value
                and all(isinstance(c, list) and c
                        and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in c)
                        for c in value)):
            return value
        raise ConfigError(f"key {key.name!r} must be a curve name or coefficient lists")
    if kind == "matrix":
        if value == "identity":
            return value
        if (isinstance(value, list) and value
                and all(isinstance(r, list)
                        and all(isinstance(x, (int, float)) and not isinstance(x, bool) for x in r)
                        for r in value)):
            return value
        raise ConfigError(f"key {key.name!r} must be 'identity' or a matrix as row lists")
    if kind == "intlist":
        if (isinstance(value, list) and value
                and all(isinstance(x, int) and not isinstance(x, bool) for x in value)):
            return value
        raise ConfigError(f"key {key.name!r} must be a non-empty list of integers")
    raise AssertionError(f"unhandled kind {kind}")


def load_config(path, command: str) -> dict:
    """Parse and validate a TOML config for the given subcommand."""
    schema = SCHEMAS[command]
    try:
        with open(path, "rb") as fh:
            raw = _toml.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"config file not found: {path}\n{schema_help(command)}") from None
    except _toml.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: invalid TOML: {exc}") from exc

    known = {k.name for k in schema} | {"schema_version"}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(
            f"{path}: unknown key(s) {unknown} for command {command!r}\n{schema_help(command)}")
    version = raw.get("schema_version")
    if version != 1:
        raise ConfigError(f"{path}: schema_version = 1 is required, got {version!r}")

    out = {}
    for key in schema:
        if key.name in raw:
            out[key.name] = _check_kind(key, raw[key.name])
        elif key.default is REQUIRED:
            raise ConfigError(f"{path}: missing required key {key.name!r}\n{schema_help(command)}")
        else:
            out[key.name] = key.default
        if key.kind == "path" and key.name in out:
            # relative input paths resolve against the config file's directory
            p = Path(out[key.name])
            out[key.name] = str(p if p.is_absolute() else Path(path).parent / p)
    return out


def schema_help(command: str) -> str:
    """Human-readable key listing for a subcommand (also used by --help)."""
    lines = [f"config keys for '{command}' (TOML; schema_version = 1 required):"]
    for key in SCHEMAS[command]:
        default = "(required)" if key.default is REQUIRED else f"default {key.default!r}"
        lines.append(f"  {key.name:<16} {default:<26} {key.doc}")
    return "\n".join(lines)
