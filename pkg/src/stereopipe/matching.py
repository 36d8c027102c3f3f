"""Stereo block matching: SAD and census-difference costs, the naive
reference matcher, and the pipeline builders that express both matchers as
kernel graphs.

Disparity search follows the rectified-stereo convention: the candidate for
disparity d sits d pixels to the left of the reference pixel, d in
[0, max_disparity), and all candidates are always evaluated with clamped
reads so the datapath has a fixed trip count.  Ties pick the smallest d,
the behaviour of a left-biased pipelined minimum tree.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .image import BoundaryMode, DimensionMismatchError, Image
from .kernels import KernelGraph, KernelSpec, break_iterate, build_graph, iterate


class CostKind(Enum):
    SAD = "sad"
    CENSUS = "census"


@dataclass(frozen=True)
class MatchConfig:
    """Block-matching parameters; defaults are the evaluation point used
    throughout: 5x5 windows, 60-pixel search range."""

    cost: CostKind
    block_rows: int = 5
    block_cols: int = 5
    max_disparity: int = 60

    def __post_init__(self):
        if self.max_disparity < 1:
            raise ValueError(f"max_disparity must be >= 1, got {self.max_disparity}")
        if self.block_rows % 2 == 0 or self.block_cols % 2 == 0 or min(self.block_rows, self.block_cols) < 1:
            raise ValueError(
                f"block extents must be odd and positive, got {self.block_rows}x{self.block_cols}"
            )
        if self.cost is CostKind.CENSUS and self.census_bits > 64:
            raise ValueError(
                f"census vector of {self.census_bits} bits exceeds one 64-bit word"
            )

    @property
    def census_bits(self) -> int:
        return self.block_rows * self.block_cols - 1


@dataclass(frozen=True)
class DisparityMap:
    width: int
    height: int
    max_disparity: int
    values: np.ndarray  # (height, width) integer disparities in [0, max_disparity)

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.int64).reshape(self.height, self.width).copy()
        if arr.min(initial=0) < 0 or arr.max(initial=0) >= self.max_disparity:
            raise ValueError(f"disparities must lie in [0, {self.max_disparity})")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    def to_image(self, normalize: bool = False) -> Image:
        """Raw disparities as gray values, or scaled onto [0, 255]."""
        if normalize:
            span = self.max_disparity - 1
            scaled = self.values * 255 // span if span > 0 else np.zeros_like(self.values)
            return Image.from_array(scaled)
        if self.max_disparity > 256:
            raise ValueError("raw disparities exceed 8 bits; use normalize")
        return Image.from_array(self.values)


# --- cost primitives --------------------------------------------------------


def sad_cost(ref_window, tar_window) -> int:
    """Sum of absolute differences over two equally sized pixel windows."""
    a = np.asarray(ref_window, dtype=np.int64)
    b = np.asarray(tar_window, dtype=np.int64)
    if a.shape != b.shape:
        raise ValueError(f"window extents differ: {a.shape} vs {b.shape}")
    return int(np.abs(a - b).sum())


def census_vector(window) -> int:
    """Binary relation of every non-center window cell to the center pixel.

    Bit k is 1 iff the k-th non-center cell in row-major order is strictly
    greater than the center; ties give 0, and the center itself carries no
    bit.
    """
    arr = np.asarray(window)
    rows, cols = arr.shape
    if rows % 2 == 0 or cols % 2 == 0:
        raise ValueError(f"census window extents must be odd, got {rows}x{cols}")
    flat = arr.ravel().tolist()
    mid = (rows * cols) // 2
    center = flat[mid]
    bits = 0
    k = 0
    for i, v in enumerate(flat):
        if i == mid:
            continue
        if v > center:
            bits |= 1 << k
        k += 1
    return bits


def bounded_bit_count_steps(v: int, width: int) -> tuple[int, int]:
    """Kernighan population count under a static iteration bound.

    Returns (count, iterations completed); the early exit keeps the
    iteration count equal to the number of set bits while the bound gives
    the fixed worst case a pipelined loop needs.
    """
    state = [v, 0]

    def step():
        if not state[0]:
            break_iterate()
        state[0] &= state[0] - 1
        state[1] += 1

    used = iterate(width, step)
    return state[1], used


def bounded_bit_count(v: int, width: int) -> int:
    return bounded_bit_count_steps(v, width)[0]


def census_cost(a: int, b: int, width: int) -> int:
    """Hamming distance between two census vectors of `width` significant bits."""
    return bounded_bit_count(a ^ b, width)


def min_index(costs) -> tuple[int, int]:
    """First (lowest-index) minimum and its index; equivalent to a pipelined
    binary reduction tree that breaks ties leftward."""
    best = None
    best_i = -1
    for i, c in enumerate(costs):
        if best is None or c < best:
            best = c
            best_i = i
    if best is None:
        raise ValueError("min_index of empty sequence")
    return best, best_i


# --- naive reference matcher -------------------------------------------------


def _census_map(plane: np.ndarray, rows: int, cols: int) -> np.ndarray:
    """Census vector at every pixel (edge-clamped window reads), as uint64."""
    br, bc = (rows - 1) // 2, (cols - 1) // 2
    padded = np.pad(plane, ((br, br), (bc, bc)), mode="edge")
    wins = sliding_window_view(padded, (rows, cols))
    flat = wins.reshape(wins.shape[0], wins.shape[1], rows * cols)
    mid = (rows * cols) // 2
    gt = flat > flat[:, :, mid : mid + 1]
    n = rows * cols - 1
    weights = np.zeros(rows * cols, dtype=np.uint64)
    weights[:mid] = np.left_shift(np.uint64(1), np.arange(0, mid, dtype=np.uint64))
    weights[mid + 1 :] = np.left_shift(np.uint64(1), np.arange(mid, n, dtype=np.uint64))
    return (gt.astype(np.uint64) * weights).sum(axis=2, dtype=np.uint64)


def match_reference(ref: Image, tar: Image, cfg: MatchConfig) -> DisparityMap:
    """Ground-truth matcher: evaluate every disparity candidate at every
    pixel, no pipelining.

    SAD compares pixel windows directly (each out-of-bound pixel read is
    clamped at its final coordinate).  Census compares per-pixel census
    vectors, clamping the candidate lookup into the vector plane, which is
    what a vector-stream pipeline sees at the image border.
    """
    if (ref.width, ref.height) != (tar.width, tar.height):
        raise DimensionMismatchError(
            f"reference is {ref.width}x{ref.height} but target is {tar.width}x{tar.height}"
        )
    if ref.width < cfg.block_cols or ref.height < cfg.block_rows:
        raise ValueError(
            f"image {ref.width}x{ref.height} smaller than block "
            f"{cfg.block_rows}x{cfg.block_cols}"
        )
    h, w = ref.height, ref.width
    d_max = cfg.max_disparity
    if cfg.cost is CostKind.SAD:
        costs = _sad_cost_volume(
            ref.pixels.astype(np.int64), tar.pixels.astype(np.int64), cfg
        )
    else:
        vec_ref = _census_map(ref.pixels, cfg.block_rows, cfg.block_cols)
        vec_tar = _census_map(tar.pixels, cfg.block_rows, cfg.block_cols)
        cols = np.arange(w)
        costs = np.empty((d_max, h, w), dtype=np.int64)
        for d in range(d_max):
            shifted = vec_tar[:, np.clip(cols - d, 0, w - 1)]
            costs[d] = np.bitwise_count(vec_ref ^ shifted).astype(np.int64)
    disp = np.argmin(costs, axis=0)
    return DisparityMap(width=w, height=h, max_disparity=d_max, values=disp)


def _sad_cost_volume(ref: np.ndarray, tar: np.ndarray, cfg: MatchConfig) -> np.ndarray:
    h, w = ref.shape
    br, bc = (cfg.block_rows - 1) // 2, (cfg.block_cols - 1) // 2
    d_max = cfg.max_disparity
    margin = bc + d_max
    ecols = np.arange(-margin, w + margin)
    ref_ext = ref[:, np.clip(ecols, 0, w - 1)]
    costs = np.empty((d_max, h, w), dtype=np.int64)
    for d in range(d_max):
        tar_ext = tar[:, np.clip(ecols - d, 0, w - 1)]
        diff = np.pad(np.abs(ref_ext - tar_ext), ((br, br), (0, 0)), mode="edge")
        wins = sliding_window_view(diff, (cfg.block_rows, cfg.block_cols))
        sums = wins.sum(axis=(2, 3))
        costs[d] = sums[:, margin - bc : margin - bc + w]
    return costs


# --- pipeline builders --------------------------------------------------------


def build_sad_pipeline(cfg: MatchConfig) -> KernelGraph:
    """Single kernel spanning block plus epipolar range over both streams;
    its window reaches max_disparity - 1 columns left of the reference block."""
    if cfg.cost is not CostKind.SAD:
        raise ValueError(f"SAD pipeline needs cost=SAD, got {cfg.cost}")
    rows, cols, d_max = cfg.block_rows, cfg.block_cols, cfg.max_disparity
    wcols = cols + d_max - 1
    anchor = ((rows - 1) // 2, (cols - 1) // 2 + d_max - 1)

    def body(ref_win, tar_win):
        ref_block = ref_win[:, d_max - 1 : d_max - 1 + cols]
        cand = sliding_window_view(tar_win, cols, axis=1)  # (rows, d_max, cols)
        by_start = np.abs(cand - ref_block[:, None, :]).sum(axis=(0, 2))
        return int(np.argmin(by_start[::-1]))  # start col d_max-1-d  <->  disparity d

    kernel = KernelSpec(
        name="sad",
        inputs=("left", "right"),
        output="disparity",
        windows=((rows, wcols), (rows, wcols)),
        boundaries=(BoundaryMode.CLAMP, BoundaryMode.CLAMP),
        anchors=(anchor, anchor),
        body=body,
        cost_units=d_max * rows * cols,
    )
    return build_graph([kernel], ["left", "right"], ["disparity"])


def build_census_pipeline(cfg: MatchConfig) -> KernelGraph:
    """Three kernels: a census-vector operator instantiated per input image,
    then a comparator whose 1 x max_disparity window walks the epipolar line
    of the paired vector streams."""
    if cfg.cost is not CostKind.CENSUS:
        raise ValueError(f"census pipeline needs cost=CENSUS, got {cfg.cost}")
    rows, cols, d_max = cfg.block_rows, cfg.block_cols, cfg.max_disparity
    bits = cfg.census_bits

    def vec_body(win):
        return census_vector(win)

    def make_vec(name, source, output):
        return KernelSpec(
            name=name,
            inputs=(source,),
            output=output,
            windows=((rows, cols),),
            boundaries=(BoundaryMode.CLAMP,),
            body=vec_body,
            cost_units=bits,
        )

    def cmp_body(lwin, rwin):
        ref_vec = np.uint64(lwin[0, d_max - 1])
        cands = rwin[0, ::-1].astype(np.uint64)  # indexed by disparity
        return int(np.argmin(np.bitwise_count(cands ^ ref_vec)))

    cmp = KernelSpec(
        name="cmp",
        inputs=("vec_left", "vec_right"),
        output="disparity",
        windows=((1, d_max), (1, d_max)),
        boundaries=(BoundaryMode.CLAMP, BoundaryMode.CLAMP),
        anchors=((0, d_max - 1), (0, d_max - 1)),
        body=cmp_body,
        cost_units=d_max * bits,
    )
    return build_graph(
        [
            make_vec("vec_left", "left", "vec_left"),
            make_vec("vec_right", "right", "vec_right"),
            cmp,
        ],
        ["left", "right"],
        ["disparity"],
    )


def build_pipeline(cfg: MatchConfig) -> KernelGraph:
    if cfg.cost is CostKind.SAD:
        return build_sad_pipeline(cfg)
    return build_census_pipeline(cfg)


def shifted_target(ref: Image, disparity: int) -> Image:
    """Synthesize the target view of a flat scene at uniform `disparity`:
    every target pixel takes the reference pixel `disparity` columns to its
    right, clamped at the edge."""
    cols = np.clip(np.arange(ref.width) + disparity, 0, ref.width - 1)
    return Image.from_array(ref.pixels[:, cols])
