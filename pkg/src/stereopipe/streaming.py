"""Lower a kernel graph to a streaming pipeline plan and simulate it.

Lowering replaces every intermediate buffer with a stream and assigns each
kernel stage its line buffers ((window_rows - 1) image-wide rows per input)
and window registers.  The fill model charges each stage on the longest
source-to-sink path

    (window_rows - 1) // 2 * width + (window_cols - 1) // 2 + 1

cycles before its first valid output, the trailing 1 being the stage's
output register.  The simulator reproduces the buffered executor's results
bit for bit while consuming sources in raster order, one pixel per initiation
interval per input stream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .image import DimensionMismatchError, Image, resolve_indices
from .kernels import KernelGraph, KernelSpec, _check_source_dims

STAGE_OVERHEAD_CYCLES = 1


class LoweringError(ValueError):
    """Raised when a graph cannot be lowered (e.g. image smaller than a window)."""


@dataclass(frozen=True)
class PlanStage:
    """Per-kernel streaming resources and fill contribution."""

    name: str
    window_rows: int  # max over inputs
    window_cols: int
    line_buffer_rows: int  # summed over inputs: (rows_i - 1) each
    line_buffer_width: int
    window_registers: int  # summed over inputs: rows_i * cols_i each
    fill_cycles: int


@dataclass(frozen=True)
class CycleStats:
    fill_cycles: int
    total_cycles: int
    outputs_produced: int

    CSV_HEADER = "pixels,ii,fill_cycles,total_cycles"

    def to_csv_row(self, ii: int) -> str:
        return f"{self.outputs_produced},{ii},{self.fill_cycles},{self.total_cycles}"


@dataclass(frozen=True)
class StreamPlan:
    """Lowered pipeline: stages plus plan-wide fill and initiation interval."""

    graph: KernelGraph
    width: int
    height: int
    stages: tuple[PlanStage, ...]
    fill_cycles: int
    ii: int = 1

    def stage(self, name: str) -> PlanStage:
        for s in self.stages:
            if s.name == name:
                return s
        raise KeyError(name)

    def cycle_stats(self) -> CycleStats:
        outputs = self.width * self.height
        return CycleStats(
            fill_cycles=self.fill_cycles,
            total_cycles=outputs * self.ii + self.fill_cycles,
            outputs_produced=outputs,
        )


def _stage_fill(kernel: KernelSpec, width: int) -> int:
    rows, cols = kernel.window_rows, kernel.window_cols
    return (rows - 1) // 2 * width + (cols - 1) // 2 + STAGE_OVERHEAD_CYCLES


def _critical_path(graph: KernelGraph, per_stage: dict[str, int]) -> int:
    """Longest source-to-sink sum of per_stage contributions (nodes are in
    topological order, so one forward pass suffices)."""
    acc: dict[str, int] = {}  # stream name -> best path fill up to its producer
    best = 0
    for k in graph.nodes:
        upstream = max((acc.get(inp, 0) for inp in k.inputs), default=0)
        acc[k.output] = upstream + per_stage[k.name]
        best = max(best, acc[k.output])
    return best


def lower(graph: KernelGraph, width: int, height: int, ii: int = 1) -> StreamPlan:
    """Assign line buffers and window registers per kernel and compute the
    pipeline fill along the critical path."""
    if ii < 1:
        raise ValueError(f"initiation interval must be >= 1, got {ii}")
    for k in graph.nodes:
        if width < k.window_cols or height < k.window_rows:
            raise LoweringError(
                f"image {width}x{height} smaller than window "
                f"{k.window_rows}x{k.window_cols} of kernel {k.name!r}"
            )
    stages = tuple(
        PlanStage(
            name=k.name,
            window_rows=k.window_rows,
            window_cols=k.window_cols,
            line_buffer_rows=sum(r - 1 for r, _ in k.windows),
            line_buffer_width=width,
            window_registers=sum(r * c for r, c in k.windows),
            fill_cycles=_stage_fill(k, width),
        )
        for k in graph.nodes
    )
    fills = {s.name: s.fill_cycles for s in stages}
    return StreamPlan(
        graph=graph,
        width=width,
        height=height,
        stages=stages,
        fill_cycles=_critical_path(graph, fills),
        ii=ii,
    )


class _LineBufferReader:
    """Sliding-window access to one input stream, consuming rows in order.

    Holds the boundary-resolved column index map once; for each output row
    it assembles the (rows, width + cols - 1) block such that the window for
    output column x is the slice [:, x : x + cols].
    """

    def __init__(self, plane, rows, cols, anchor, mode, width, height):
        self.plane = plane
        self.rows = rows
        self.cols = cols
        self.anchor_row, self.anchor_col = anchor
        self.mode = mode
        self.width = width
        self.height = height
        self.col_idx = resolve_indices(
            np.arange(-self.anchor_col, width - self.anchor_col + cols - 1), width, mode
        )
        self.rows_consumed = 0

    def block(self, y: int) -> np.ndarray:
        newest_needed = min(y - self.anchor_row + self.rows - 1, self.height - 1)
        if newest_needed >= self.rows_consumed:
            self.rows_consumed = newest_needed + 1
        row_idx = resolve_indices(
            np.arange(y - self.anchor_row, y - self.anchor_row + self.rows),
            self.height,
            self.mode,
        )
        block = self.plane[row_idx][:, self.col_idx]
        block.flags.writeable = False
        return block


def _run_stage(kernel: KernelSpec, input_planes, width: int, height: int) -> np.ndarray:
    readers = [
        _LineBufferReader(
            input_planes[i],
            kernel.windows[i][0],
            kernel.windows[i][1],
            kernel.anchor(i),
            kernel.boundaries[i],
            width,
            height,
        )
        for i in range(len(kernel.inputs))
    ]
    out = np.empty((height, width), dtype=np.int64)
    body = kernel.body
    cols = [w[1] for w in kernel.windows]
    n = len(readers)
    for y in range(height):
        blocks = [r.block(y) for r in readers]
        for x in range(width):
            views = tuple(blocks[i][:, x : x + cols[i]] for i in range(n))
            out[y, x] = int(body(*views))
    return out


def simulate(plan: StreamPlan, sources) -> tuple[dict[str, Image], CycleStats]:
    """Stream the sources through the plan.

    Outputs are bit-identical to the buffered reference executor; cycle
    accounting follows the plan's fill model and initiation interval.
    """
    graph = plan.graph
    width, height = _check_source_dims(graph, sources)
    if (width, height) != (plan.width, plan.height):
        raise DimensionMismatchError(
            f"sources are {width}x{height} but plan was lowered for "
            f"{plan.width}x{plan.height}"
        )
    planes: dict[str, np.ndarray] = {
        name: sources[name].pixels.astype(np.int64) for name in graph.sources
    }
    for k in graph.nodes:
        planes[k.output] = _run_stage(k, [planes[i] for i in k.inputs], width, height)
    images = {s: Image.from_array(planes[s] & 0xFF) for s in graph.sinks}
    return images, plan.cycle_stats()


def measured_fill_cycles(plan: StreamPlan) -> int:
    """Fill latency derived from what the streaming machine actually touches:
    per stage, the flat raster index of the newest input cell referenced while
    producing output (0, 0), plus the output register, summed along the
    critical path.  For center-anchored kernels this reproduces the plan's
    fill formula; epipolar kernels anchored off-center may reference less."""
    width, height = plan.width, plan.height
    per_stage: dict[str, int] = {}
    for k in plan.graph.nodes:
        worst = 0
        for i in range(len(k.inputs)):
            rows, cols = k.windows[i]
            ar, ac = k.anchor(i)
            row_idx = resolve_indices(np.arange(-ar, rows - ar), height, k.boundaries[i])
            col_idx = resolve_indices(np.arange(-ac, cols - ac), width, k.boundaries[i])
            newest = int(row_idx.max()) * width + int(col_idx.max())
            worst = max(worst, newest + STAGE_OVERHEAD_CYCLES)
        per_stage[k.name] = worst
    return _critical_path(plan.graph, per_stage)


def total_latency_seconds(pixels: int, ii: int, clk_mhz: float, fill_cycles: int = 0) -> float:
    """pixels * ii / clock, the steady-state pipeline latency; pass
    fill_cycles to include the initial fill (negligible for large images)."""
    if clk_mhz <= 0:
        raise ValueError(f"clock frequency must be positive, got {clk_mhz}")
    return (pixels * ii + fill_cycles) / (clk_mhz * 1e6)
