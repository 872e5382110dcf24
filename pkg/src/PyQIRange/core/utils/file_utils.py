"""
File Utilities Module

Provides atomic writes (temp file + rename) and a helper
function to sanitize strings for use in filenames.
"""

import logging
import os
import re
import tempfile
from pathlib import Path
from typing import Union


_UNSAFE = re.compile(r"[^A-Za-z0-9._-]")


def write_atomic(file_path: Path, content: Union[str, bytes]) -> None:
    """
    Write content to a temporary file next to `file_path` and rename it into place,
    so readers never observe a partially written file.
    """
    file_path.parent.mkdir(parents=True, exist_ok=True)
    data = content.encode("utf-8") if isinstance(content, str) else content
    fd, tmp_name = tempfile.mkstemp(prefix=f".{file_path.name}.", suffix=".tmp", dir=file_path.parent)
    try:
        with os.fdopen(fd, "wb") as handle:
            handle.write(data)
        os.replace(tmp_name, file_path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise


def write_text(file_path: Path, content: str) -> bool:
    """
    Writes content to a file atomically and returns True if successful.
    """
    try:
        write_atomic(file_path, content)
        return True
    except Exception as e:
        logging.error(f"Error writing file '{file_path}': {e}")
        return False


def sanitize_filename(name: str) -> str:
    """
    Make a setting label such as "a-22.5_b1e+20" safe as a filename part.
    The exponent sign becomes "p"; anything else outside [A-Za-z0-9._-] becomes "_".
    """
    return _UNSAFE.sub("_", name.replace("+", "p"))
