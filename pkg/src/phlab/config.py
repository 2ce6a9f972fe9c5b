"""Flat ``key = value`` experiment files and run manifests.

Grammar::

    file    := line*
    line    := blank | comment | pair
    comment := '#' text
    pair    := key '=' value ['#' text]

Keys are the field names of :class:`phlab.experiments.ExperimentConfig`
(dashes are accepted for underscores) plus the mandatory ``schema = 1``.
Lists are comma separated; a matrix is written row by row with ``;`` between
rows, e.g. ``matrix = 1,1,0; 1,2,1; 0,1,2``.  ``sigma = auto`` selects sigma
from the exponent floor.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import os
import time
from pathlib import Path

from .dynamics import parse_matrix
from .errors import ConfigError
from .experiments import ExperimentConfig

SCHEMA_VERSION = 1

__all__ = ["SCHEMA_VERSION", "parse_config", "load_config", "sha256_file", "RunManifest", "utc_timestamp"]

_LISTS = {"sweep": float, "shape": float, "ells": int}
_FIELDS = {f.name: f for f in dataclasses.fields(ExperimentConfig)}


def _convert(key, raw):
    if key == "matrix":
        return parse_matrix(raw)
    if key in _LISTS:
        return tuple(_LISTS[key](v) for v in raw.split(",") if v.strip())
    if key == "family":
        return raw
    if key == "sigma":
        return None if raw.lower() in ("auto", "none") else float(raw)
    default = _FIELDS[key].default
    if isinstance(default, bool):
        return raw.lower() in ("1", "true", "yes")
    if isinstance(default, int):
        return int(raw)
    return float(raw)


def parse_config(text: str) -> ExperimentConfig:
    values = {}
    schema = None
    for lineno, line in enumerate(text.splitlines(), 1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {line!r}")
        key, raw = (part.strip() for part in body.split("=", 1))
        key = key.replace("-", "_")
        if not raw:
            raise ConfigError(f"line {lineno}: empty value for {key!r}")
        if key == "schema":
            schema = raw
            continue
        if key not in _FIELDS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[key] = _convert(key, raw)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from None
    if schema is None:
        raise ConfigError("missing 'schema = 1' line")
    if schema != str(SCHEMA_VERSION):
        raise ConfigError(f"unsupported schema {schema!r}; expected {SCHEMA_VERSION}")
    try:
        return ExperimentConfig(**values)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    return parse_config(Path(path).read_text())


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def utc_timestamp() -> str:
    """Current UTC time, or ``SOURCE_DATE_EPOCH`` when that is set."""
    epoch = os.environ.get("SOURCE_DATE_EPOCH")
    t = float(epoch) if epoch else time.time()
    return time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime(t))


@dataclasses.dataclass
class RunManifest:
    subcommand: str
    flags: dict
    master_seed: int | None
    started: str
    finished: str = ""
    outputs: dict = dataclasses.field(default_factory=dict)
    schema: int = SCHEMA_VERSION
    exit_code: int = 0

    def add_output(self, path: Path):
        self.outputs[path.name] = sha256_file(path)

    def write(self, out_dir: Path) -> Path:
        self.finished = utc_timestamp()
        path = Path(out_dir) / "manifest.json"
        path.write_text(json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True) + "\n")
        return path
