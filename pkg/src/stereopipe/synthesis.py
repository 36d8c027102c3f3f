"""Synthesis backend contract, a deterministic mock cost model, device
budgets, and constraint evaluation.

A backend is any callable (plan, target_period_ns) -> SynthesisReport; a
driver for a real HLS tool would parse the tool's utilization and timing
reports into the same structure.  The mock stands in at desk scale: it
prices window registers, line-buffer rows, and parallel cost evaluations,
inflates resources as the clock target tightens (retiming), and perturbs
achieved timing with deterministic pseudo-noise so tool-heuristic artifacts
are reproducible in tests.  Reports of unmet timing are data, not errors.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field
from typing import Protocol

from .streaming import StreamPlan

BRAM_BLOCK_BITS = 18 * 1024


class SynthesisError(RuntimeError):
    """Backend failure carrying whatever diagnostics the backend produced."""


@dataclass(frozen=True)
class SynthesisReport:
    """One backend evaluation: II, latency, resource counts, achieved timing."""

    ii: int
    latency_cycles: int
    bram_blocks: int
    dsp: int
    ff: int
    lut: int
    achieved_period_ns: float

    CSV_HEADER = "ii,latency_cycles,bram_blocks,dsp,ff,lut,achieved_period_ns"

    def __post_init__(self):
        if self.ii < 1:
            raise ValueError(f"ii must be >= 1, got {self.ii}")
        if self.achieved_period_ns <= 0:
            raise ValueError(f"achieved period must be positive, got {self.achieved_period_ns}")
        if min(self.latency_cycles, self.bram_blocks, self.dsp, self.ff, self.lut) < 0:
            raise ValueError("resource and latency counts must be non-negative")

    @property
    def achieved_freq_mhz(self) -> float:
        return 1000.0 / self.achieved_period_ns

    def to_csv_row(self) -> str:
        return (
            f"{self.ii},{self.latency_cycles},{self.bram_blocks},{self.dsp},"
            f"{self.ff},{self.lut},{self.achieved_period_ns!r}"
        )

    @classmethod
    def from_csv_row(cls, row: str) -> "SynthesisReport":
        parts = row.strip().split(",")
        if len(parts) != 7:
            raise ValueError(f"expected 7 fields, got {len(parts)}")
        return cls(
            ii=int(parts[0]),
            latency_cycles=int(parts[1]),
            bram_blocks=int(parts[2]),
            dsp=int(parts[3]),
            ff=int(parts[4]),
            lut=int(parts[5]),
            achieved_period_ns=float(parts[6]),
        )

    def to_text(self) -> str:
        return (
            f"II                 {self.ii}\n"
            f"latency (cycles)   {self.latency_cycles}\n"
            f"BRAM blocks        {self.bram_blocks}\n"
            f"DSP                {self.dsp}\n"
            f"FF                 {self.ff}\n"
            f"LUT                {self.lut}\n"
            f"achieved period    {self.achieved_period_ns:.3f} ns"
            f" ({self.achieved_freq_mhz:.2f} MHz)"
        )


@dataclass(frozen=True)
class ResourceBudget:
    lut_total: int
    ff_total: int
    dsp_total: int
    bram_blocks_total: int

    def __post_init__(self):
        if min(self.lut_total, self.ff_total, self.dsp_total, self.bram_blocks_total) <= 0:
            raise ValueError("all budget capacities must be positive")


# Zynq 7100: 277,400 LUTs, 554,800 FFs, 2,020 DSP slices, 3,020 kB BRAM
# expressed as 18-kbit blocks (3020 kB * 8 / 18 ~= 1342).
ZYNQ_7100 = ResourceBudget(
    lut_total=277_400, ff_total=554_800, dsp_total=2_020, bram_blocks_total=1_342
)


@dataclass(frozen=True)
class ResourceFractions:
    lut: float
    ff: float
    dsp: float
    bram: float

    @property
    def max_fraction(self) -> float:
        return max(self.lut, self.ff, self.dsp, self.bram)

    @property
    def max_percent(self) -> float:
        return 100.0 * self.max_fraction


def resource_fraction(report: SynthesisReport, budget: ResourceBudget) -> ResourceFractions:
    """Per-resource utilization fractions; the maximum over them is the
    headline utilization a resource constraint is checked against."""
    return ResourceFractions(
        lut=report.lut / budget.lut_total,
        ff=report.ff / budget.ff_total,
        dsp=report.dsp / budget.dsp_total,
        bram=report.bram_blocks / budget.bram_blocks_total,
    )


@dataclass(frozen=True)
class Constraints:
    max_ii: int = 1
    max_resource_pct: float = 100.0
    min_freq_mhz: float | None = None

    def __post_init__(self):
        if self.max_ii < 1:
            raise ValueError(f"max_ii must be >= 1, got {self.max_ii}")
        if not 0 < self.max_resource_pct <= 100:
            raise ValueError(
                f"max_resource_pct must lie in (0, 100], got {self.max_resource_pct}"
            )


def constraints_met(
    report: SynthesisReport, constraints: Constraints, budget: ResourceBudget
) -> bool:
    if report.ii > constraints.max_ii:
        return False
    if resource_fraction(report, budget).max_percent > constraints.max_resource_pct:
        return False
    if constraints.min_freq_mhz is not None and report.achieved_freq_mhz < constraints.min_freq_mhz:
        return False
    return True


class SynthesisBackend(Protocol):
    """Contract every backend satisfies: deterministic for identical inputs,
    raising SynthesisError only for tool failures (unmet timing is a report,
    not a failure)."""

    def __call__(self, plan: StreamPlan, target_period_ns: float) -> SynthesisReport: ...


@dataclass(frozen=True)
class MockModelParams:
    """Cost-model coefficients, calibrated so the default census pipeline at
    450x375 lands within 2x of representative tool results for LUT and FF.

    Retiming inflates LUT/FF by (1 + retiming_ns / target_period_ns):
    tighter clocks never cost less.  Achieved timing is the combinational
    floor plus pseudo-noise keyed on the target period's bit pattern, so a
    looser target may deterministically achieve a faster clock than a
    tighter one."""

    lut_per_register: float = 8.0
    lut_per_buffer_row: float = 40.0
    lut_per_cost_unit: float = 10.0
    ff_per_register: float = 24.0
    ff_per_buffer_row: float = 80.0
    ff_per_cost_unit: float = 25.0
    retiming_ns: float = 1.0
    combinational_floor_ns: float = 3.0
    noise_amplitude_ns: float = 0.0

    def __post_init__(self):
        if self.combinational_floor_ns <= 0:
            raise ValueError("combinational floor must be positive")
        if self.retiming_ns < 0 or self.noise_amplitude_ns < 0:
            raise ValueError("retiming and noise amplitude must be non-negative")


def _unit_noise(target_period_ns: float) -> float:
    """Deterministic pseudo-random value in [0, 1) keyed by the period bits."""
    digest = hashlib.sha256(struct.pack("<d", target_period_ns)).digest()
    return int.from_bytes(digest[:8], "little") / 2**64


def mock_synthesize(
    plan: StreamPlan, target_period_ns: float, params: MockModelParams
) -> SynthesisReport:
    """Deterministic desk-scale synthesis estimate for a lowered pipeline."""
    if target_period_ns <= 0:
        raise ValueError(f"target period must be positive, got {target_period_ns}")
    retime = 1.0 + params.retiming_ns / target_period_ns
    lut = 0.0
    ff = 0.0
    bram = 0
    for stage, kernel in zip(plan.stages, plan.graph.nodes):
        lut += (
            params.lut_per_register * stage.window_registers
            + params.lut_per_buffer_row * stage.line_buffer_rows
            + params.lut_per_cost_unit * kernel.cost_units
        )
        ff += (
            params.ff_per_register * stage.window_registers
            + params.ff_per_buffer_row * stage.line_buffer_rows
            + params.ff_per_cost_unit * kernel.cost_units
        )
        bram += math.ceil(stage.line_buffer_rows * stage.line_buffer_width * 8 / BRAM_BLOCK_BITS)
    achieved = params.combinational_floor_ns + params.noise_amplitude_ns * _unit_noise(
        target_period_ns
    )
    return SynthesisReport(
        ii=plan.ii,
        latency_cycles=plan.cycle_stats().total_cycles,
        bram_blocks=bram,
        dsp=sum(k.real_mults for k in plan.graph.nodes),
        ff=math.ceil(ff * retime),
        lut=math.ceil(lut * retime),
        achieved_period_ns=achieved,
    )


@dataclass(frozen=True)
class MockBackend:
    """mock_synthesize bound to one parameter set; satisfies SynthesisBackend."""

    params: MockModelParams = field(default_factory=MockModelParams)

    def __call__(self, plan: StreamPlan, target_period_ns: float) -> SynthesisReport:
        return mock_synthesize(plan, target_period_ns, self.params)


def table1_fixtures() -> dict[str, SynthesisReport]:
    """Reference synthesis results for the 450x375 block-matching workloads
    on a Zynq 7100: generated (hipacc) and handwritten implementations of
    SAD and census difference.  Used by comparison tooling and tests."""

    def rep(ii, lat, bram, dsp, ff, lut, f_mhz):
        return SynthesisReport(
            ii=ii,
            latency_cycles=lat,
            bram_blocks=bram,
            dsp=dsp,
            ff=ff,
            lut=lut,
            achieved_period_ns=1000.0 / f_mhz,
        )

    return {
        "sad_hipacc": rep(1, 181_797, 8, 2, 140_228, 66_185, 182.38),
        "sad_handwritten": rep(1, 170_565, 4, 0, 29_288, 37_940, 271.59),
        "census_hipacc": rep(1, 180_090, 8, 0, 54_016, 23_144, 289.52),
        "census_handwritten": rep(1, 170_561, 4, 0, 9_978, 19_247, 319.18),
    }
