"""Selects the compiled core when importable; ``SSGGM_BACKEND=python`` forces the fallback."""
from __future__ import annotations

import os

try:
    from . import _core as compiled
except ImportError:  # pragma: no cover - exercised only without a build
    compiled = None


def available() -> list[str]:
    return ["compiled", "python"] if compiled is not None else ["python"]


def resolve(name: str | None = None) -> str:
    """Backend to use: explicit name, then the environment, then the fastest available."""
    name = name or os.environ.get("SSGGM_BACKEND") or "auto"
    if name == "auto":
        return "compiled" if compiled is not None else "python"
    if name not in ("compiled", "python"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "compiled" and compiled is None:
        raise ImportError("the compiled core is not built; reinstall the package or use SSGGM_BACKEND=python")
    return name


DEFAULT = resolve()
