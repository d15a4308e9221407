"""Small shared helpers: stable seeding and atomic file output."""

from __future__ import annotations

import hashlib
import os
import tempfile
from pathlib import Path


def derive_seed(*parts) -> int:
    """Derive a stable 63-bit seed from arbitrary parts.

    Unlike the builtin ``hash`` this is stable across processes and
    platforms, so per-file seeds derived from a run seed give identical
    results no matter how work is scheduled.
    """
    payload = "\x1f".join(repr(p) for p in parts).encode("utf-8")
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write text to ``path`` via a temp file + rename so readers never see partial output."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
