"""Atomic writes and canonical JSON.

Every output is first written to a temporary sibling path and then moved into
place with ``os.replace``, so readers never observe a half-written file.
"""

import json
import os
import shutil
import tempfile
from pathlib import Path
from typing import Any


def canonical_json(obj: Any) -> str:
    """Serialize to diff-stable JSON (sorted keys, no whitespace)."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def atomic_write_bytes(path: Path, data: bytes) -> None:
    """Write bytes to ``path`` via a temporary file in the same directory."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp_name, path)
    except BaseException:
        if os.path.exists(tmp_name):
            os.unlink(tmp_name)
        raise


def atomic_write_text(path: Path, text: str) -> None:
    """Write UTF-8 text to ``path`` atomically."""
    atomic_write_bytes(path, text.encode("utf-8"))


def atomic_write_json(path: Path, obj: Any) -> None:
    """Write ``obj`` as canonical JSON followed by a newline."""
    atomic_write_text(path, canonical_json(obj) + "\n")


def make_staging_dir(target: Path) -> Path:
    """Create an empty temporary directory next to ``target``."""
    target = Path(target)
    target.parent.mkdir(parents=True, exist_ok=True)
    return Path(tempfile.mkdtemp(dir=target.parent, prefix=f".{target.name}.", suffix=".tmp"))


def commit_staging_dir(staging: Path, target: Path) -> None:
    """Move a fully written staging directory onto ``target``.

    An existing ``target`` is removed first; callers decide beforehand whether
    overwriting is allowed.
    """
    target = Path(target)
    if target.exists():
        shutil.rmtree(target)
    os.replace(staging, target)


def save_text(path: Path, content: str) -> tuple[bool, str]:
    """Save text atomically, reporting failure instead of raising.

    Args:
        path: Destination file
        content: Text to write

    Returns:
        Tuple of (success, path or error message)
    """
    try:
        atomic_write_text(path, content)
        return True, str(path)
    except PermissionError:
        return False, f"Permission denied writing to {path}"
    except OSError as e:
        return False, f"Error writing {path}: {e}"
