"""Config loading, CSV writing and run manifests."""
from __future__ import annotations

import csv
import hashlib
import io
import json
import os
from pathlib import Path


class ConfigError(ValueError):
    """A configuration file could not be read or parsed."""


def load_json(path):
    """Read a JSON document; parse errors report line and column."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc.strerror or exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: {exc.msg} at line {exc.lineno}, column {exc.colno}") from exc


def file_sha256(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def csv_text(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def fmt(value):
    """Stable text form for CSV cells (round-trippable floats)."""
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, float):
        return repr(value)
    if hasattr(value, "item"):
        return fmt(value.item())
    return value


def write_text(out_dir, name, text):
    path = Path(out_dir) / name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)
    return path


def content_digest(paths):
    """Digest over (name, bytes) of the given files in name order."""
    h = hashlib.sha256()
    for p in sorted(Path(x) for x in paths):
        h.update(p.name.encode())
        h.update(b"\0")
        h.update(p.read_bytes())
        h.update(b"\0")
    return h.hexdigest()


def write_manifest(out_dir, command, config_path, seed, outputs, complete=True):
    out = Path(out_dir)
    manifest = {
        "command": command,
        "config": str(config_path) if config_path else None,
        "config_sha256": file_sha256(config_path) if config_path else None,
        "seed": seed,
        "outputs": sorted(Path(p).name for p in outputs),
        "content_digest": content_digest(outputs),
        "complete": complete,
    }
    return write_text(out, "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def output_dir(cli_value, default="out"):
    """CLI flag wins, then ``JAMNET_OUT``, then ``default``."""
    return Path(cli_value or os.environ.get("JAMNET_OUT") or default)
