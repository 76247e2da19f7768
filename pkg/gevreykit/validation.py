"""
Diagnostics collected while normalizing, analyzing and solving an equation.
"""
from enum import Enum
from typing import Dict, List, Optional


class ValidationLevel(Enum):
    """Diagnostic severity levels; CRITICAL means no formal solution can be computed."""
    INFO = "info"
    WARNING = "warning"
    ERROR = "error"
    CRITICAL = "critical"


class InvariantBreach(AssertionError):
    """An internal consistency check failed (dual-route index mismatch, nonzero residual)."""


class ValidationResult:
    """Container for diagnostics attached to a normalized equation or a report."""

    def __init__(self):
        self.issues: List[Dict] = []
        self.warnings: List[str] = []
        self.recommendations: List[str] = []

    def add_issue(self, level: ValidationLevel, category: str, message: str,
                  recommendation: Optional[str] = None):
        """Add a diagnostic."""
        self.issues.append({
            'level': level.value,
            'category': category,
            'message': message,
        })

        if level in (ValidationLevel.WARNING, ValidationLevel.ERROR, ValidationLevel.CRITICAL):
            self.warnings.append(f"{level.value.upper()}: {message}")

        if recommendation:
            self.recommendations.append(recommendation)

    def extend(self, other: "ValidationResult"):
        """Append another result's issues, keeping order."""
        self.issues.extend(other.issues)
        self.warnings.extend(other.warnings)
        self.recommendations.extend(other.recommendations)

    @property
    def has_errors(self) -> bool:
        return any(issue['level'] in ('error', 'critical') for issue in self.issues)

    def by_category(self, category: str) -> List[Dict]:
        return [issue for issue in self.issues if issue['category'] == category]

    def to_dict(self) -> Dict:
        return {
            'issues': list(self.issues),
            'warnings': list(self.warnings),
            'recommendations': list(self.recommendations),
        }
