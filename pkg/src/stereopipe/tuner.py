"""Two-phase constraint-driven search over the target clock period, plus
design-point bookkeeping and Pareto-front extraction.

Phase 1 doubles the target period from a deliberately infeasible start until
the constraints are met, bracketing the feasibility boundary.  Phase 2
bisects the bracket: the midpoint becomes the new feasible or infeasible
end depending on whether its synthesis run met the constraints, until the
bracket is narrower than step_ns.  Every synthesis result is kept: because
achieved timing is not monotone in the target, an early loose probe may
hold the fastest clock, so the best point is selected over all met probes,
never just the last.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .streaming import StreamPlan
from .synthesis import (
    Constraints,
    ResourceBudget,
    SynthesisBackend,
    SynthesisReport,
    constraints_met,
    resource_fraction,
)

DESIGN_POINT_CSV_HEADER = (
    "iteration,phase,target_period_ns,achieved_period_ns,achieved_freq_mhz,"
    "ii,latency_cycles,bram,dsp,ff,lut,max_resource_pct,met"
)


class InfeasibleConstraintsError(RuntimeError):
    """Phase 1 ran out of doublings; carries every point evaluated so far."""

    def __init__(self, message: str, points: tuple["DesignPoint", ...]):
        super().__init__(message)
        self.points = points


@dataclass(frozen=True)
class DesignPoint:
    iteration: int
    phase: int  # 1 = bracketing, 2 = bisection
    target_period_ns: float
    report: SynthesisReport
    max_resource_pct: float
    met: bool

    def to_csv_row(self) -> str:
        r = self.report
        return (
            f"{self.iteration},{self.phase},{self.target_period_ns!r},"
            f"{r.achieved_period_ns!r},{r.achieved_freq_mhz!r},{r.ii},"
            f"{r.latency_cycles},{r.bram_blocks},{r.dsp},{r.ff},{r.lut},"
            f"{self.max_resource_pct!r},{'true' if self.met else 'false'}"
        )

    @classmethod
    def from_csv_row(cls, row: str) -> "DesignPoint":
        parts = row.strip().split(",")
        if len(parts) != 13:
            raise ValueError(f"expected 13 fields, got {len(parts)}")
        report = SynthesisReport(
            ii=int(parts[5]),
            latency_cycles=int(parts[6]),
            bram_blocks=int(parts[7]),
            dsp=int(parts[8]),
            ff=int(parts[9]),
            lut=int(parts[10]),
            achieved_period_ns=float(parts[3]),
        )
        met_token = parts[12].strip().lower()
        if met_token not in ("true", "false"):
            raise ValueError(f"met flag must be true/false, got {parts[12]!r}")
        return cls(
            iteration=int(parts[0]),
            phase=int(parts[1]),
            target_period_ns=float(parts[2]),
            report=report,
            max_resource_pct=float(parts[11]),
            met=met_token == "true",
        )


@dataclass(frozen=True)
class OptimizationResult:
    points: tuple[DesignPoint, ...]
    best: DesignPoint | None
    synthesis_calls: int

    def summary(self) -> str:
        lines = [f"synthesis calls    {self.synthesis_calls}"]
        if self.best is None:
            lines.append("no design point met the constraints")
        else:
            b = self.best
            lines.append(
                f"best point         iteration {b.iteration} (phase {b.phase}), "
                f"target {b.target_period_ns:.3f} ns"
            )
            lines.append(
                f"achieved           {b.report.achieved_period_ns:.3f} ns "
                f"({b.report.achieved_freq_mhz:.2f} MHz), "
                f"max resource {b.max_resource_pct:.2f}%"
            )
        return "\n".join(lines)


def _select_best(points) -> DesignPoint | None:
    best = None
    for p in points:
        if p.met and (best is None or p.report.achieved_freq_mhz > best.report.achieved_freq_mhz):
            best = p
    return best


def optimize(
    plan: StreamPlan,
    constraints: Constraints,
    budget: ResourceBudget,
    backend: SynthesisBackend,
    step_ns: float = 0.005,
    default_low_ns: float = 1.0,
    max_doublings: int = 32,
    growth_factor: float = 2.0,
) -> OptimizationResult:
    """Run the two-phase search and return every design point plus the best.

    The variable parameter is the target clock period in ns; default_low_ns
    must be infeasible (1 ns, i.e. 1 GHz, safely is for the studied
    pipelines).  It is never synthesized itself.  growth_factor is the
    phase-1 relaxation direction: 2.0 doubles the period; a factor in (0, 1)
    serves variable parameters that relax downward instead.  The II is never
    explored: the backend reports the lowest it achieves, and the II
    constraint filters the result.
    """
    if step_ns <= 0:
        raise ValueError(f"step_ns must be positive, got {step_ns}")
    if default_low_ns <= 0:
        raise ValueError(f"default_low_ns must be positive, got {default_low_ns}")
    if growth_factor <= 0 or growth_factor == 1.0:
        raise ValueError(f"growth_factor must be positive and != 1, got {growth_factor}")

    points: list[DesignPoint] = []

    def probe(period: float, phase: int) -> bool:
        report = backend(plan, period)
        pct = resource_fraction(report, budget).max_percent
        met = constraints_met(report, constraints, budget)
        points.append(
            DesignPoint(
                iteration=len(points),
                phase=phase,
                target_period_ns=period,
                report=report,
                max_resource_pct=pct,
                met=met,
            )
        )
        return met

    # Phase 1: find an upper bound by consecutive doubling.
    unmet_end = default_low_ns
    met_end = default_low_ns
    doublings = 0
    while True:
        if doublings >= max_doublings:
            raise InfeasibleConstraintsError(
                f"constraints not met after {max_doublings} doublings "
                f"(last target {met_end!r} ns)",
                tuple(points),
            )
        met_end *= growth_factor
        doublings += 1
        if probe(met_end, phase=1):
            break
        unmet_end = met_end

    # Phase 2: bisect the bracket down to step_ns.
    while abs(met_end - unmet_end) > step_ns:
        pivot = (unmet_end + met_end) / 2.0
        if probe(pivot, phase=2):
            met_end = pivot
        else:
            unmet_end = pivot

    pts = tuple(points)
    return OptimizationResult(points=pts, best=_select_best(pts), synthesis_calls=len(pts))


def synthesis_call_bound(
    default_low_ns: float, step_ns: float, doublings_used: int, growth_factor: float = 2.0
) -> int:
    """Upper bound on total synthesis calls for a run that bracketed after
    `doublings_used` phase-1 probes: the bracket is at most the span between
    the last two probes, and bisection halves it down to step_ns."""
    hi = default_low_ns * growth_factor**doublings_used
    lo = default_low_ns * growth_factor ** (doublings_used - 1) if doublings_used > 1 else default_low_ns
    span = abs(hi - lo)
    bisect = math.ceil(math.log2(span / step_ns)) if span > step_ns else 0
    return doublings_used + bisect + 1


def pareto_front(points) -> list[DesignPoint]:
    """Points not dominated under (maximize achieved frequency, minimize max
    resource percentage), sorted by frequency descending.  Exact duplicates
    keep only the first in evaluation order."""
    decorated = sorted(
        enumerate(points),
        key=lambda t: (-t[1].report.achieved_freq_mhz, t[1].max_resource_pct, t[0]),
    )
    front: list[DesignPoint] = []
    best_res = math.inf
    for _, p in decorated:
        if p.max_resource_pct < best_res:
            front.append(p)
            best_res = p.max_resource_pct
    return front


def design_points_to_csv(points) -> str:
    lines = [DESIGN_POINT_CSV_HEADER]
    lines.extend(p.to_csv_row() for p in points)
    return "\n".join(lines) + "\n"


def design_points_from_csv(text: str) -> list[DesignPoint]:
    """Parse the optimizer CSV schema; errors carry the 1-based line number."""
    lines = text.splitlines()
    if not lines or lines[0].strip() != DESIGN_POINT_CSV_HEADER:
        raise ValueError("line 1: missing or wrong design-point CSV header")
    points = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        try:
            points.append(DesignPoint.from_csv_row(line))
        except ValueError as exc:
            raise ValueError(f"line {i}: {exc}") from None
    return points
