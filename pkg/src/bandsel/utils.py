"""Shared helpers: seed derivation, wavelength formatting, atomic file writes."""

from __future__ import annotations

import hashlib
import json
import os
import tempfile

import numpy as np


def seed_for(root_seed: int, *path) -> int:
    """Derive a stable 64-bit child seed from a root seed and a label path.

    The derivation is content-based (SHA-256 over the labels), so a consumer
    always gets the same child seed no matter in which order, or on how many
    threads, the different consumers ask for theirs.
    """
    h = hashlib.sha256()
    h.update(str(int(root_seed)).encode())
    for part in path:
        h.update(b"/")
        h.update(str(part).encode())
    return int.from_bytes(h.digest()[:8], "big")


def rng_for(root_seed: int, *path) -> np.random.Generator:
    return np.random.default_rng(seed_for(root_seed, *path))


def fmt_nm(value: float) -> str:
    """Format a wavelength in nm at data precision (4 decimals, trimmed)."""
    text = f"{float(value):.4f}".rstrip("0").rstrip(".")
    return text or "0"


def canonical_json(obj) -> str:
    """Serialize with sorted keys so equal reports are byte-identical."""
    return json.dumps(obj, indent=2, sort_keys=True, allow_nan=False)


def atomic_write_text(path, text: str) -> None:
    """Write via a temp file in the target directory, then rename over."""
    directory = os.path.dirname(os.fspath(path)) or "."
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
