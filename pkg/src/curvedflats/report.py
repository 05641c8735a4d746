"""Defect reports: named residual fields with their norms and a verdict."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

# Counterexample checks pass when the defect is at least this large.
SEPARATION = 0.01


def _float(x) -> Optional[float]:
    x = float(x)
    return x if math.isfinite(x) else None


@dataclass
class DefectReport:
    """A residual field and its verdict.

    ``expect="small"`` passes when ``max <= tolerance``; ``expect="large"``
    (counterexamples) passes when ``max > tolerance``.
    """

    name: str
    values: np.ndarray
    tolerance: float
    grid: tuple[int, int] = (0, 0)
    expect: str = "small"

    def __post_init__(self):
        self.values = np.atleast_1d(np.asarray(self.values, dtype=float))
        if self.expect not in ("small", "large"):
            raise ValueError(f"expect must be 'small' or 'large', got {self.expect!r}")

    @property
    def max(self) -> float:
        return float(np.max(self.values)) if self.values.size else 0.0

    @property
    def mean(self) -> float:
        return float(np.mean(self.values)) if self.values.size else 0.0

    @property
    def passed(self) -> bool:
        if not np.all(np.isfinite(self.values)):
            return False
        return self.max <= self.tolerance if self.expect == "small" else self.max > self.tolerance

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "max": _float(self.max),
            "mean": _float(self.mean),
            "grid": list(self.grid),
            "tolerance": self.tolerance,
            "pass": self.passed,
        }

    def line(self) -> str:
        rel = "<=" if self.expect == "small" else ">"
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}: max {self.max:.3e} (need {rel} {self.tolerance:.1e})"


def defect(name: str, values, tol: float, grid=None, expect: str = "small") -> DefectReport:
    g = (grid.nu, grid.nv) if grid is not None else (0, 0)
    return DefectReport(name, values, float(tol), g, expect)


@dataclass
class CheckReport:
    """Result of one verification: several defects under a common check name."""

    check: str
    params: dict = field(default_factory=dict)
    defects: list = field(default_factory=list)
    notes: list = field(default_factory=list)

    def add(self, d: DefectReport) -> DefectReport:
        self.defects.append(d)
        return d

    def extend(self, ds: Sequence[DefectReport]):
        for d in ds:
            self.add(d)

    def __getitem__(self, name: str) -> DefectReport:
        for d in self.defects:
            if d.name == name:
                return d
        raise KeyError(name)

    @property
    def passed(self) -> bool:
        return all(d.passed for d in self.defects)

    def failures(self) -> list[str]:
        return [d.name for d in self.defects if not d.passed]

    def to_dict(self) -> dict:
        return {
            "check": self.check,
            "params": self.params,
            "defects": {d.name: {"max": _float(d.max), "mean": _float(d.mean), "tolerance": d.tolerance, "pass": d.passed} for d in self.defects},
            "notes": list(self.notes),
            "pass": self.passed,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def observed_orders(hs: Sequence[float], defects: Sequence[float]) -> list[Optional[float]]:
    """``log(d_k / d_{k+1}) / log(h_k / h_{k+1})`` for consecutive grid pairs."""
    out = []
    for (h0, d0), (h1, d1) in zip(zip(hs, defects), zip(hs[1:], defects[1:])):
        if d0 > 0 and d1 > 0:
            out.append(math.log(d0 / d1) / math.log(h0 / h1))
        else:
            out.append(None)
    return out
