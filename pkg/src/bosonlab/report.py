"""Structured results for bound checkers: every checker distinguishes
hypothesis failures from bound violations, and reports measured/bound
pairs side by side."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

STATUS_PASS = "pass"
STATUS_BOUND_VIOLATION = "bound_violation"
STATUS_HYPOTHESIS_FAILED = "hypothesis_failed"
STATUS_INFO = "info"


@dataclass
class CheckRow:
    """One measured-vs-bound comparison."""

    label: str
    measured: float
    bound: float
    tolerance: float = 0.0
    satisfied: bool | None = None

    def __post_init__(self):
        if self.satisfied is None:
            self.satisfied = bool(
                self.measured <= self.bound + self.tolerance * max(1.0, abs(self.bound))
            )

    @property
    def margin(self):
        return self.bound - self.measured


@dataclass
class CheckReport:
    check: str
    hypothesis_ok: bool = True
    hypothesis_note: str = ""
    rows: list = field(default_factory=list)
    extra: dict = field(default_factory=dict)

    def add(self, label, measured, bound, tolerance=0.0, satisfied=None):
        row = CheckRow(label, float(measured), float(bound), tolerance, satisfied)
        self.rows.append(row)
        return row

    @property
    def violations(self):
        return [r for r in self.rows if not r.satisfied]

    @property
    def status(self):
        if not self.hypothesis_ok:
            return STATUS_HYPOTHESIS_FAILED
        if self.violations:
            return STATUS_BOUND_VIOLATION
        return STATUS_PASS

    @property
    def passed(self):
        return self.status == STATUS_PASS

    def to_dict(self):
        d = asdict(self)
        d["status"] = self.status
        d["rows"] = [dict(r, margin=r["bound"] - r["measured"]) for r in d["rows"]]
        return _jsonable(d)

    def to_json(self, **kw):
        return json.dumps(self.to_dict(), **kw)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, float) and not np.isfinite(obj):
        return repr(obj)
    return obj


def aggregate_status(reports):
    """Suite exit status: bound violations dominate hypothesis failures."""
    statuses = {r.status for r in reports}
    if STATUS_BOUND_VIOLATION in statuses:
        return STATUS_BOUND_VIOLATION
    if STATUS_HYPOTHESIS_FAILED in statuses:
        return STATUS_HYPOTHESIS_FAILED
    return STATUS_PASS
