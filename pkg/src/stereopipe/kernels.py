"""Kernel description layer: window reductions, bounded iteration, and the
kernel graph with its buffer-wise reference executor.

Kernels are plain Python callables over window views.  A body receives one
read-only (rows, cols) array per input stream and returns the output value
for the pixel the window is anchored on; it sees nothing else, which is what
keeps bodies pure.  Values are carried between kernels as wide (64-bit)
integers so multi-bit intermediate streams survive intact; the final store
into a sink truncates toward zero and keeps the low 8 bits, reproducing an
unsigned-char cast.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Mapping

import numpy as np

from .image import BoundaryMode, DimensionMismatchError, Domain, Image, Mask, resolve_indices


class GraphBuildError(ValueError):
    """Base for kernel-graph construction failures."""


class CycleError(GraphBuildError):
    pass


class DuplicateProducerError(GraphBuildError):
    pass


class DanglingInputError(GraphBuildError):
    pass


class ReduceOp(Enum):
    SUM = "sum"
    MIN = "min"
    MAX = "max"

    @property
    def identity(self):
        if self is ReduceOp.SUM:
            return 0
        if self is ReduceOp.MIN:
            return float("inf")
        return float("-inf")

    def combine(self, a, b):
        if self is ReduceOp.SUM:
            return a + b
        if self is ReduceOp.MIN:
            return b if b < a else a
        return b if b > a else a


def convolve(window: np.ndarray, mask: Mask, op: ReduceOp, body: Callable) -> float:
    """Reduce body(coefficient, value) over every mask cell in row-major order.

    With op=SUM and body=lambda c, v: c * v this is plain 2-D correlation of
    the window with the mask coefficients.
    """
    if window.shape != (mask.rows, mask.cols):
        raise ValueError(
            f"mask extents {mask.rows}x{mask.cols} do not match window {window.shape}"
        )
    acc = op.identity
    coef = mask.coefficients
    for r in range(mask.rows):
        for c in range(mask.cols):
            acc = op.combine(acc, body(coef[r, c], window[r, c]))
    return acc


def reduce(window: np.ndarray, domain: Domain, op: ReduceOp, body: Callable) -> float:
    """Reduce body(value) over the active domain cells only, row-major."""
    if window.shape != (domain.rows, domain.cols):
        raise ValueError(
            f"domain extents {domain.rows}x{domain.cols} do not match window {window.shape}"
        )
    acc = op.identity
    act = domain.active
    for r in range(domain.rows):
        for c in range(domain.cols):
            if act[r, c]:
                acc = op.combine(acc, body(window[r, c]))
    return acc


class _BreakIterate(Exception):
    pass


def break_iterate():
    """Signal early exit from the enclosing iterate()."""
    raise _BreakIterate


def iterate(bound: int, body: Callable[[], None]) -> int:
    """Run body at most `bound` times; body may call break_iterate() to stop.

    The bound must be a static positive integer known up front (a hardware
    loop needs a fixed trip count); the return value is the number of body
    executions that ran to completion, which early exit keeps short even
    though the worst case stays `bound`.
    """
    if not isinstance(bound, int) or isinstance(bound, bool) or bound < 1:
        raise ValueError(f"iterate bound must be a static positive int, got {bound!r}")
    completed = 0
    try:
        for _ in range(bound):
            body()
            completed += 1
    except _BreakIterate:
        pass
    return completed


@dataclass(frozen=True)
class KernelSpec:
    """One local operator: per-input window geometry plus a pure body.

    `windows` gives (rows, cols) per input and `anchors` pins which window
    cell sits on the output pixel; None means the conventional center
    ((rows-1)//2, (cols-1)//2).  Epipolar-search kernels anchor on the
    rightmost column so the window covers candidates to the left only.
    `real_mults` and `cost_units` are resource metadata consumed by the
    synthesis cost model: real-valued multiplies in the body, and parallel
    cost evaluations per output (the processing-element count of a matcher).
    """

    name: str
    inputs: tuple[str, ...]
    output: str
    windows: tuple[tuple[int, int], ...]
    boundaries: tuple[BoundaryMode, ...]
    body: Callable[..., float]
    anchors: tuple[tuple[int, int], ...] | None = None
    real_mults: int = 0
    cost_units: int = 0

    def __post_init__(self):
        if not self.inputs:
            raise ValueError(f"kernel {self.name!r} has no inputs")
        if len(self.windows) != len(self.inputs) or len(self.boundaries) != len(self.inputs):
            raise ValueError(
                f"kernel {self.name!r} needs one window and boundary per input"
            )
        for rows, cols in self.windows:
            if rows < 1 or cols < 1:
                raise ValueError(f"kernel {self.name!r} window extents must be >= 1")
        if self.anchors is not None:
            if len(self.anchors) != len(self.inputs):
                raise ValueError(f"kernel {self.name!r} needs one anchor per input")
            for (ar, ac), (rows, cols) in zip(self.anchors, self.windows):
                if not (0 <= ar < rows and 0 <= ac < cols):
                    raise ValueError(
                        f"kernel {self.name!r} anchor ({ar},{ac}) outside window {rows}x{cols}"
                    )

    def anchor(self, input_index: int) -> tuple[int, int]:
        if self.anchors is not None:
            return self.anchors[input_index]
        rows, cols = self.windows[input_index]
        return (rows - 1) // 2, (cols - 1) // 2

    @property
    def window_rows(self) -> int:
        return max(r for r, _ in self.windows)

    @property
    def window_cols(self) -> int:
        return max(c for _, c in self.windows)


@dataclass(frozen=True)
class KernelGraph:
    """Validated DAG of kernels; nodes are stored in topological order."""

    nodes: tuple[KernelSpec, ...]
    sources: tuple[str, ...]
    sinks: tuple[str, ...]

    @property
    def internal_streams(self) -> tuple[str, ...]:
        produced = [k.output for k in self.nodes]
        return tuple(s for s in produced if s not in self.sinks)

    def producer_of(self, stream: str) -> KernelSpec | None:
        for k in self.nodes:
            if k.output == stream:
                return k
        return None


def build_graph(
    kernels: list[KernelSpec] | tuple[KernelSpec, ...],
    sources: list[str] | tuple[str, ...],
    sinks: list[str] | tuple[str, ...],
) -> KernelGraph:
    """Validate kernels into a graph: every stream has exactly one producer,
    no cycles, no dangling inputs, every sink reachable from a source.
    Intermediate streams (produced and consumed, not a sink) stay internal."""
    sources = tuple(sources)
    sinks = tuple(sinks)
    producers: dict[str, KernelSpec] = {}
    for k in kernels:
        if k.output in producers:
            raise DuplicateProducerError(
                f"stream {k.output!r} produced by both {producers[k.output].name!r} and {k.name!r}"
            )
        if k.output in sources:
            raise DuplicateProducerError(
                f"stream {k.output!r} is a source and may not be produced by {k.name!r}"
            )
        producers[k.output] = k

    for k in kernels:
        for inp in k.inputs:
            if inp not in producers and inp not in sources:
                raise DanglingInputError(
                    f"kernel {k.name!r} reads undefined stream {inp!r}"
                )
    for s in sinks:
        if s not in producers:
            raise DanglingInputError(f"sink {s!r} has no producer")

    # Kahn topological sort; leftovers mean a cycle.
    remaining = list(kernels)
    ready_streams = set(sources)
    ordered: list[KernelSpec] = []
    while remaining:
        progressed = False
        for k in list(remaining):
            if all(inp in ready_streams for inp in k.inputs):
                ordered.append(k)
                ready_streams.add(k.output)
                remaining.remove(k)
                progressed = True
        if not progressed:
            names = ", ".join(k.name for k in remaining)
            raise CycleError(f"cycle through kernels: {names}")

    # reachability from sources
    reachable = set(sources)
    for k in ordered:
        if any(inp in reachable for inp in k.inputs):
            reachable.add(k.output)
    for s in sinks:
        if s not in reachable:
            raise DanglingInputError(f"sink {s!r} not reachable from any source")

    return KernelGraph(nodes=tuple(ordered), sources=sources, sinks=sinks)


def extended_plane(
    arr: np.ndarray, rows: int, cols: int, anchor: tuple[int, int], mode: BoundaryMode
) -> np.ndarray:
    """Boundary-resolved copy of `arr` grown so the window for output (x, y)
    is the slice [y : y+rows, x : x+cols]."""
    h, w = arr.shape
    ar, ac = anchor
    row_idx = resolve_indices(np.arange(-ar, h - ar + rows - 1), h, mode)
    col_idx = resolve_indices(np.arange(-ac, w - ac + cols - 1), w, mode)
    ext = arr[np.ix_(row_idx, col_idx)]
    ext.flags.writeable = False
    return ext


def _check_source_dims(graph: KernelGraph, sources: Mapping[str, Image]) -> tuple[int, int]:
    missing = [s for s in graph.sources if s not in sources]
    if missing:
        raise ValueError(f"missing source images: {missing}")
    dims = {(sources[s].width, sources[s].height) for s in graph.sources}
    if len(dims) != 1:
        pretty = ", ".join(f"{w}x{h}" for w, h in sorted(dims))
        raise DimensionMismatchError(f"connected streams disagree on dimensions: {pretty}")
    return dims.pop()


def execute_buffered(graph: KernelGraph, sources: Mapping[str, Image]) -> dict[str, Image]:
    """Reference semantics: run each kernel to completion over its whole
    iteration space before the next starts (one buffer per stream, host
    barrier between kernels).  Ground truth for the streaming executor."""
    width, height = _check_source_dims(graph, sources)
    buffers: dict[str, np.ndarray] = {
        name: sources[name].pixels.astype(np.int64) for name in graph.sources
    }
    for k in graph.nodes:
        planes = []
        for i, inp in enumerate(k.inputs):
            rows, cols = k.windows[i]
            planes.append(
                extended_plane(buffers[inp], rows, cols, k.anchor(i), k.boundaries[i])
            )
        out = np.empty((height, width), dtype=np.int64)
        windows = k.windows
        body = k.body
        for y in range(height):
            for x in range(width):
                views = tuple(
                    planes[i][y : y + windows[i][0], x : x + windows[i][1]]
                    for i in range(len(planes))
                )
                out[y, x] = int(body(*views))
        buffers[k.output] = out
    return {s: Image.from_array(buffers[s] & 0xFF) for s in graph.sinks}


# 3x3 binomial blur; coefficients sum to exactly 1.0, so a constant image is
# reproduced bit-for-bit after the +0.5 round-and-truncate store.
GAUSSIAN_3X3 = Mask.from_array(
    [
        [0.0625, 0.1250, 0.0625],
        [0.1250, 0.2500, 0.1250],
        [0.0625, 0.1250, 0.0625],
    ]
)


def gaussian_kernel(
    source: str = "in",
    output: str = "out",
    boundary: BoundaryMode = BoundaryMode.CLAMP,
) -> KernelSpec:
    mask = GAUSSIAN_3X3

    def body(win):
        acc = convolve(win, mask, ReduceOp.SUM, lambda c, v: c * v)
        return acc + 0.5

    return KernelSpec(
        name="gaussian",
        inputs=(source,),
        output=output,
        windows=((3, 3),),
        boundaries=(boundary,),
        body=body,
        real_mults=mask.rows * mask.cols,
    )


def build_gaussian_graph(boundary: BoundaryMode = BoundaryMode.CLAMP) -> KernelGraph:
    return build_graph([gaussian_kernel(boundary=boundary)], ["in"], ["out"])


def dump_listing(graph: KernelGraph) -> str:
    """Human-readable graph listing for debugging."""
    lines = [f"sources: {', '.join(graph.sources)}"]
    for k in graph.nodes:
        wins = " ".join(
            f"{inp}[{r}x{c}@{k.anchor(i)[0]},{k.anchor(i)[1]}:{k.boundaries[i].value}]"
            for i, (inp, (r, c)) in enumerate(zip(k.inputs, k.windows))
        )
        lines.append(f"kernel {k.name}: {wins} -> {k.output}")
    lines.append(f"sinks: {', '.join(graph.sinks)}")
    return "\n".join(lines)
