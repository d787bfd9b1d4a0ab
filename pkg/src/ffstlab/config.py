"""Experiment configuration and deterministic file output.

Config files are either line-oriented ``key = value`` text with ``[command]``
section headers, or JSON objects mapping command names to parameter objects.
Keys outside any section apply to every command.  Precedence for a value:
command-line ``--set`` overrides > section key > global key > built-in default.
"""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InvalidArgument


class ConfigError(InvalidArgument):
    """Malformed or inconsistent configuration (CLI exit code 1)."""


@dataclass
class ExperimentConfig:
    """Parameters for one command, with the source location of every value."""

    command: str
    values: dict[str, object] = field(default_factory=dict)
    origin: dict[str, str] = field(default_factory=dict)

    def _fail(self, key: str, message: str) -> ConfigError:
        where = self.origin.get(key, "default")
        return ConfigError(f"{where}: {key}: {message}")

    def has(self, key: str) -> bool:
        return key in self.values

    def get_float(self, key: str, default: float | None = None) -> float:
        if key not in self.values:
            if default is None:
                raise self._fail(key, "required value missing")
            return float(default)
        try:
            return float(self.values[key])
        except (TypeError, ValueError):
            raise self._fail(key, f"expected a number, got {self.values[key]!r}") from None

    def get_int(self, key: str, default: int | None = None) -> int:
        if key not in self.values:
            if default is None:
                raise self._fail(key, "required value missing")
            return int(default)
        raw = self.values[key]
        try:
            value = int(raw) if not isinstance(raw, float) or raw.is_integer() else None
        except (TypeError, ValueError):
            value = None
        if value is None:
            raise self._fail(key, f"expected an integer, got {raw!r}")
        return value

    def get_bool(self, key: str, default: bool = False) -> bool:
        if key not in self.values:
            return default
        raw = self.values[key]
        if isinstance(raw, bool):
            return raw
        text = str(raw).strip().lower()
        if text in ("1", "true", "yes", "on"):
            return True
        if text in ("0", "false", "no", "off"):
            return False
        raise self._fail(key, f"expected a boolean, got {raw!r}")

    def get_str(self, key: str, default: str | None = None) -> str:
        if key not in self.values:
            if default is None:
                raise self._fail(key, "required value missing")
            return default
        return str(self.values[key])

    def get_float_list(self, key: str, default: list[float] | None = None) -> list[float]:
        if key not in self.values:
            if default is None:
                raise self._fail(key, "required value missing")
            return list(default)
        raw = self.values[key]
        items = raw if isinstance(raw, list) else [v for v in str(raw).split(",") if v.strip()]
        try:
            return [float(v) for v in items]
        except (TypeError, ValueError):
            raise self._fail(key, f"expected a comma-separated list of numbers, got {raw!r}") from None

    def get_int_list(self, key: str, default: list[int] | None = None) -> list[int]:
        values = self.get_float_list(key, None if default is None else [float(v) for v in default])
        if any(not v.is_integer() for v in values):
            raise self._fail(key, "expected integers")
        return [int(v) for v in values]

    def grid(self, key: str, values: list[float]) -> list[float]:
        """Validate a sweep grid: nonempty and strictly increasing."""
        if not values:
            raise self._fail(key, "sweep grid is empty")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise self._fail(key, "sweep grid must be strictly increasing")
        return values


def parse_keyvalue(text: str, source: str = "<config>") -> tuple[dict, dict]:
    """Parse sectioned ``key = value`` text into ``{section: {key: value}}`` plus origins.

    The global section is ``""``.
    """
    sections: dict[str, dict] = {"": {}}
    origins: dict[str, dict] = {"": {}}
    current = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]") or len(line) < 3:
                raise ConfigError(f"{source}:{lineno}: malformed section header {raw.strip()!r}")
            current = line[1:-1].strip()
            sections.setdefault(current, {})
            origins.setdefault(current, {})
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        if key in sections[current]:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        sections[current][key] = value.strip()
        origins[current][key] = f"{source}:{lineno}"
    return sections, origins


def load_config(path: str | os.PathLike | None, command: str, overrides: list[str] = ()) -> ExperimentConfig:
    """Assemble the configuration for ``command`` from a file and ``KEY=VALUE`` overrides."""
    config = ExperimentConfig(command=command)
    if path is not None:
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if path.suffix.lower() == ".json":
            try:
                data = json.loads(text)
            except json.JSONDecodeError as exc:
                raise ConfigError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
            if not isinstance(data, dict):
                raise ConfigError(f"{path}: top level must be an object")
            common = {k: v for k, v in data.items() if not isinstance(v, dict)}
            sections = {"": common, command: data.get(command, {})}
            origins = {name: {k: f"{path}[{name or 'global'}]" for k in sec} for name, sec in sections.items()}
        else:
            sections, origins = parse_keyvalue(text, str(path))
        for name in ("", command):
            config.values.update(sections.get(name, {}))
            config.origin.update(origins.get(name, {}))
    for item in overrides:
        key, sep, value = item.partition("=")
        if not sep or not key.strip():
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        config.values[key.strip()] = value.strip()
        config.origin[key.strip()] = f"--set {key.strip()}"
    return config


# ---------------------------------------------------------------------------
# output


def format_value(value) -> str:
    """Shortest round-trip text for floats (never more than 17 significant digits)."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    if value is None:
        return ""
    return str(value)


def atomic_write(path: str | os.PathLike, text: str) -> None:
    """Write UTF-8 text with ``\\n`` line ends via a temporary file and rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header, rows, footer: list[str] = ()) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([format_value(v) for v in row])
    for line in footer:
        buf.write(f"# {line}\n")
    return buf.getvalue()


def read_csv(text: str) -> tuple[list[str], list[list[str]]]:
    """Header and data rows of an emitted CSV; ``#`` footer lines are skipped."""
    lines = [line for line in text.splitlines() if not line.startswith("#")]
    rows = list(csv.reader(lines))
    if not rows:
        raise InvalidArgument("empty CSV")
    return rows[0], rows[1:]


def json_text(data: dict) -> str:
    return json.dumps(data, indent=2, sort_keys=True) + "\n"
