"""Records of inequality checks shared by all verification modules."""

import math
from dataclasses import dataclass, field
from typing import Any, Dict, Iterable, List, Optional

from tileheat.global_helpers import setting
from tileheat.typedef import CheckRecordDict

PASS = "pass"
FAIL = "fail"
DEGENERATE = "degenerate"
TRUNCATION_LIMITED = "truncation-limited"


def _tolerance() -> float:
    return float(setting("checks.inequality_tol"))


@dataclass(frozen=True)
class CheckRecord:
    """Outcome of one inequality lhs <= rhs.

    A check whose right hand side vanishes is degenerate: 0 <= 0 holds but no
    ratio exists. It only fails if its left hand side is positive.
    """

    name: str
    lhs: float
    rhs: float
    tolerance: float = field(default_factory=_tolerance)
    metadata: Dict[str, Any] = field(default_factory=dict)
    truncation_limited: bool = False

    @property
    def degenerate(self) -> bool:
        """True if the right hand side is zero."""
        return not self.rhs > 0.0

    @property
    def ratio(self) -> Optional[float]:
        """lhs / rhs or None for degenerate checks."""
        if self.degenerate:
            return None
        return self.lhs / self.rhs

    @property
    def status(self) -> str:
        """One of pass, fail, degenerate and truncation-limited."""
        if self.truncation_limited:
            return TRUNCATION_LIMITED
        if self.degenerate:
            return DEGENERATE if self.lhs <= self.tolerance else FAIL
        if not math.isfinite(self.lhs):
            return FAIL
        return PASS if self.ratio <= 1.0 + self.tolerance else FAIL

    @property
    def passed(self) -> bool:
        """False only for failing checks."""
        return self.status != FAIL

    def as_dict(self) -> CheckRecordDict:
        """Serializable form of the record."""
        return {
            "name": self.name,
            "lhs": float(self.lhs),
            "rhs": float(self.rhs),
            "ratio": self.ratio,
            "status": self.status,
            "passed": self.passed,
            "metadata": dict(self.metadata),
        }


def failing(records: Iterable[CheckRecord]) -> List[str]:
    """Names of the failing records."""
    return [record.name for record in records if not record.passed]
