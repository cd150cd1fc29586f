"""Residual report containers shared by structure validation and the checks."""

from __future__ import annotations

import json
from dataclasses import dataclass, field


@dataclass
class CheckEntry:
    name: str
    max_residual: float
    mean_residual: float
    tolerance: float
    passed: bool
    worst_point: tuple | None


def make_entry(name, tolerance, residuals, points=None):
    """Aggregate per-point residuals into a named entry.

    `residuals` is a flat list of non-negative values; `points` (same
    length, optional) locates each residual so the worst one is
    reproducible as a single-point case.
    """
    if not residuals:
        return CheckEntry(name, 0.0, 0.0, tolerance, True, None)
    worst = max(range(len(residuals)), key=lambda k: residuals[k])
    max_res = float(residuals[worst])
    mean_res = float(sum(residuals) / len(residuals))
    worst_point = None
    if points is not None:
        worst_point = tuple(float(c) for c in points[worst])
    return CheckEntry(name, max_res, mean_res, tolerance, max_res <= tolerance, worst_point)


@dataclass
class CheckReport:
    scenario: str
    seed: int
    entries: list[CheckEntry] = field(default_factory=list)
    check_fields: tuple[tuple[str, ...], ...] = ()

    @property
    def passed(self):
        return all(e.passed for e in self.entries)

    def first_failure(self):
        for e in self.entries:
            if not e.passed:
                return e
        return None

    def to_dict(self):
        return {
            "scenario": self.scenario,
            "seed": self.seed,
            "entries": [
                {
                    "name": e.name,
                    "max": e.max_residual,
                    "mean": e.mean_residual,
                    "tol": e.tolerance,
                    "pass": e.passed,
                    "worst_point": list(e.worst_point) if e.worst_point is not None else None,
                }
                for e in self.entries
            ],
            "pass": self.passed,
            "check_fields": [list(f) for f in self.check_fields],
        }

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    def render_table(self):
        lines = [f"scenario: {self.scenario}    seed: {self.seed}"]
        lines.append(f"{'check':44}  {'max':>12}  {'mean':>12}  {'tol':>8}  status")
        for e in self.entries:
            status = "pass" if e.passed else "FAIL"
            lines.append(
                f"{e.name:44}  {e.max_residual:12.3e}  {e.mean_residual:12.3e}"
                f"  {e.tolerance:8.0e}  {status}"
            )
        lines.append(f"overall: {'pass' if self.passed else 'FAIL'}")
        return "\n".join(lines)
