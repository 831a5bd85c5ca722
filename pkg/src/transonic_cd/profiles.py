"""Perturbation shape families on the unit interval.

A profile is ``scale * shape(s)``; callers multiply by the amplitude epsilon
and map their own coordinate onto s in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

FAMILIES = ("none", "constant", "sine", "cosine-bump", "table")


@dataclass(frozen=True)
class Profile:
    family: str = "none"
    scale: float = 1.0
    table: str | None = None
    _interp: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown profile family {self.family!r}; expected one of {', '.join(FAMILIES)}")
        if self.family == "table":
            if not self.table:
                raise ValueError("table profile needs a file")
            object.__setattr__(self, "_interp", _load_table(self.table))

    @classmethod
    def parse(cls, text: str, scale: float = 1.0, base_dir: Path | None = None) -> "Profile":
        text = text.strip()
        if text.startswith("table:"):
            name = text[len("table:"):].strip()
            path = Path(name)
            if base_dir is not None and not path.is_absolute():
                path = Path(base_dir) / path
            return cls("table", scale, str(path.resolve()))
        return cls(text, scale)

    def spec_text(self) -> str:
        return f"table:{self.table}" if self.family == "table" else self.family

    @property
    def is_zero(self) -> bool:
        return self.family == "none" or self.scale == 0.0

    def __call__(self, s, order: int = 0):
        """Value (order 0) or derivative of ``scale * shape`` at s."""
        s = np.asarray(s, dtype=float)
        return self.scale * _shape(self, s, order)


def _shape(prof, s, order):
    fam = prof.family
    if fam == "none":
        return np.zeros_like(s)
    if fam == "constant":
        return np.ones_like(s) if order == 0 else np.zeros_like(s)
    if fam == "sine":
        k = np.pi
        return (np.sin(k * s), k * np.cos(k * s), -k * k * np.sin(k * s))[order]
    if fam == "cosine-bump":
        k = 2.0 * np.pi
        return (0.5 * (1.0 - np.cos(k * s)), 0.5 * k * np.sin(k * s), 0.5 * k * k * np.cos(k * s))[order]
    interp = prof._interp
    return interp(s) if order == 0 else interp.derivative(order)(s)


def _load_table(path):
    try:
        data = np.loadtxt(path, comments="#", ndmin=2)
    except OSError as exc:
        raise ValueError(f"cannot read profile table {path}: {exc}") from exc
    if data.shape[1] != 2 or data.shape[0] < 2:
        raise ValueError(f"profile table {path} must have two columns and at least two rows")
    s, val = data[:, 0], data[:, 1]
    if not np.all(np.diff(s) > 0):
        raise ValueError(f"profile table {path}: abscissae must increase strictly")
    if s[0] > 0.0 or s[-1] < 1.0:
        raise ValueError(f"profile table {path} must cover s in [0, 1]")
    return PchipInterpolator(s, val, extrapolate=True)
