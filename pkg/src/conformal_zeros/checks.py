"""Pass/fail records shared by the analysis modules and the reports."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any


@dataclass
class Check:
    """Outcome of one numerical relation.

    ``passed`` is ``None`` when the relation does not apply to the input
    (for instance a rank relation on a component without essential points).
    """

    name: str
    passed: bool | None
    measured: dict[str, Any] = field(default_factory=dict)
    note: str = ""

    def __post_init__(self):
        # comparisons on numpy scalars yield np.bool_, which breaks `is True`
        if self.passed is not None:
            self.passed = bool(self.passed)

    @property
    def applicable(self) -> bool:
        return self.passed is not None

    def to_record(self) -> dict[str, Any]:
        status = "inapplicable" if self.passed is None else ("pass" if self.passed else "fail")
        rec: dict[str, Any] = {"check": self.name, "status": status, "measured": self.measured}
        if self.note:
            rec["note"] = self.note
        return rec


def inapplicable(name: str, note: str) -> Check:
    return Check(name, None, {}, note)


def all_passed(checks) -> bool:
    return all(c.passed is not False for c in checks)
