"""Experiment configuration files: parsing, overrides, and content hashing.

Two formats are accepted.  The primary one is flat key = value text under
an [experiment] section header:

    [experiment]
    kind = deviation
    loss = square
    y1 = 1.0
    ytilde1 = 0.8
    c0 = 1.0
    n = 2000
    replicates = 100000
    seed = 7

JSON is accepted as an alternative: either a flat object with the same
keys or one nested under an "experiment" key.  List-valued fields
(n_grid, rules, tail_fractions, epsilons) take space- or comma-separated
words in the text format and arrays in JSON.  "n" is shorthand for a
single-point n_grid and is the only required field.
"""

from __future__ import annotations

import configparser
import hashlib
import json

from .harness import ExperimentConfig


class ConfigError(ValueError):
    """A config file that cannot be turned into an ExperimentConfig."""


_STR_FIELDS = ("kind", "loss", "pim_substitution", "pim_selector")
_FLOAT_FIELDS = ("y_lo", "y_hi", "y1", "ytilde1", "gamma", "c0", "lam")
_INT_FIELDS = ("replicates", "seed", "workers")
_LIST_FIELDS = {
    "n_grid": int,
    "rules": str,
    "tail_fractions": float,
    "epsilons": float,
}
_ALL_FIELDS = set(_STR_FIELDS) | set(_FLOAT_FIELDS) | set(_INT_FIELDS) \
    | set(_LIST_FIELDS) | {"n"}


def _split_words(value) -> list[str]:
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value]
    return str(value).replace(",", " ").split()


def _coerce(fields: dict) -> dict:
    """Type-check raw field values; raises ConfigError naming the field."""
    out = {}
    for key, value in fields.items():
        if key not in _ALL_FIELDS:
            raise ConfigError(f"unknown field {key!r}")
        try:
            if key in _STR_FIELDS:
                out[key] = str(value)
            elif key in _FLOAT_FIELDS:
                out[key] = float(value)
            elif key in _INT_FIELDS:
                out[key] = int(value)
            elif key == "n":
                out[key] = int(value)
            else:
                cast = _LIST_FIELDS[key]
                words = _split_words(value)
                if not words:
                    raise ValueError("empty list")
                out[key] = tuple(cast(w) for w in words)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"field {key!r}: cannot read {value!r} ({exc})") from exc
    return out


def load_config(path: str) -> dict:
    """Read a config file into a dict of typed ExperimentConfig fields.

    Raises ConfigError with the offending field or parser line on any
    problem, including an absent n / n_grid.
    """
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from exc

    if text.lstrip().startswith("{"):
        try:
            data = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"invalid JSON at line {exc.lineno}: {exc.msg}") from exc
        if not isinstance(data, dict):
            raise ConfigError("top-level JSON value must be an object")
        if "experiment" in data and isinstance(data["experiment"], dict):
            data = data["experiment"]
        fields = _coerce(data)
    else:
        parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
        try:
            parser.read_string(text, source=path)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
        if not parser.has_section("experiment"):
            raise ConfigError("missing [experiment] section")
        fields = _coerce(dict(parser.items("experiment")))

    if "n" in fields:
        if "n_grid" in fields:
            raise ConfigError("give either n or n_grid, not both")
        fields["n_grid"] = (fields.pop("n"),)
    if "n_grid" not in fields:
        raise ConfigError("missing required field: n (or n_grid)")
    return fields


def make_config(fields: dict) -> ExperimentConfig:
    """Build the config, turning semantic validation errors into ConfigError."""
    try:
        return ExperimentConfig(**fields)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def config_hash(config: ExperimentConfig) -> str:
    """Hex digest of the semantic config content.

    Computed from the parsed field values, so whitespace, comments, key
    order, and the serialization format cannot change it; any change to a
    value that affects results does.
    """
    canon = json.dumps(config.semantic_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()
