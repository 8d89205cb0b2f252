"""Output plumbing: configuration header blocks and atomic file writes."""

from __future__ import annotations

import json
import math
import os
import tempfile


def header_block(config: dict) -> str:
    """``# key=value`` lines, sorted by key, recording a run's full configuration."""
    return "".join(f"# {k}={config[k]}\n" for k in sorted(config))


def write_atomic(path: str, text: str) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _plain(obj):
    if hasattr(obj, "tolist"):
        return _finite(obj.tolist())
    return str(obj)


def _finite(obj):
    # json.dumps would emit bare Infinity/NaN, which is not JSON
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    if isinstance(obj, dict):
        return {k: _finite(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_finite(v) for v in obj]
    return obj


def dumps_json(obj) -> str:
    """Sorted, indented JSON; numpy values become plain ones and non-finite floats strings."""
    return json.dumps(_finite(obj), indent=2, sort_keys=True, default=_plain, allow_nan=False) + "\n"
