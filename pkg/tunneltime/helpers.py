import csv
import math
import time
from contextlib import contextmanager
from datetime import datetime, timezone

from tunneltime.exceptions import ConfigError, OutputError


def utcnow():
    """Get current UTC datetime."""
    return datetime.now(timezone.utc)


def format_value(value):
    """CSV cell: 17 significant digits for floats, empty for absent values."""
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if not math.isfinite(value):
            return ""
        return f"{value:.17g}"
    return str(value)


def write_csv(path, header, rows):
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\r\n")
            writer.writerow(header)
            for row in rows:
                writer.writerow([format_value(v) for v in row])
    except OSError as e:
        raise OutputError(f"cannot write {path}: {e}") from e


def write_sidecar(path, metadata):
    """Flat key = value metadata next to a CSV file."""
    try:
        with open(path, "w", encoding="utf-8") as fh:
            for key in sorted(metadata):
                fh.write(f"{key} = {format_value(metadata[key])}\n")
    except OSError as e:
        raise OutputError(f"cannot write {path}: {e}") from e


def read_key_values(path, allowed):
    """Parse a key = value file; `allowed` maps key -> converter."""
    values = {}
    try:
        with open(path, encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as e:
        raise ConfigError(f"cannot read config file {path}: {e}", key="config") from e
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected key = value", key=line)
        key, value = (part.strip() for part in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in allowed:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}", key=key)
        try:
            values[key] = allowed[key](value)
        except ValueError as e:
            raise ConfigError(f"{path}:{lineno}: bad value for {key!r}: {value!r}", key=key) from e
    return values


@contextmanager
def stopwatch():
    """Yields a dict whose 'seconds' entry is filled in on exit."""
    result = {}
    start = time.perf_counter()
    try:
        yield result
    finally:
        result["seconds"] = time.perf_counter() - start
