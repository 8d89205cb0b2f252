"""Collects one verdict per acceptance criterion for the end-of-run summary."""

from __future__ import annotations

VERDICTS: dict[int, tuple[bool, str]] = {}


def verdict(number: int, ok: bool, detail: str) -> None:
    """Record the outcome, then fail the calling test if it did not pass."""
    VERDICTS[number] = (bool(ok), detail)
    assert ok, f"criterion {number}: {detail}"


def lines() -> list[str]:
    return [f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}" for n, (ok, detail) in sorted(VERDICTS.items())]
