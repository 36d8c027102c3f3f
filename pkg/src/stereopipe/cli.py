"""Command-line front end: stereo matching, pipeline simulation, the
optimization loop, and Pareto filtering.

Exit codes are a stable contract: 0 success, 2 I/O failure, 3 dimension
mismatch, 4 invalid configuration, 5 infeasible constraints (the design
points evaluated so far are still written to the CSV).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .image import BoundaryMode, DimensionMismatchError, Image, PgmError, load_pgm, store_pgm
from .kernels import build_gaussian_graph, execute_buffered
from .matching import (
    CostKind,
    DisparityMap,
    MatchConfig,
    build_pipeline,
    match_reference,
)
from .streaming import LoweringError, lower, simulate, total_latency_seconds
from .synthesis import Constraints, MockBackend, MockModelParams, ResourceBudget, ZYNQ_7100
from .tuner import (
    InfeasibleConstraintsError,
    design_points_from_csv,
    design_points_to_csv,
    optimize,
    pareto_front,
)

EXIT_OK = 0
EXIT_IO = 2
EXIT_DIMENSIONS = 3
EXIT_CONFIG = 4
EXIT_INFEASIBLE = 5


class _CliConfigError(ValueError):
    pass


def _read_config_overlay(path: str) -> dict[str, str]:
    """Flat key=value file; '#' starts a comment line."""
    overlay = {}
    text = Path(path).read_text()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in stripped:
            raise _CliConfigError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
        key, value = stripped.split("=", 1)
        overlay[key.strip().replace("-", "_")] = value.strip()
    return overlay


def _parse_block(text: str) -> tuple[int, int]:
    try:
        rows, cols = text.lower().split("x")
        return int(rows), int(cols)
    except ValueError:
        raise _CliConfigError(f"--block expects RxC (e.g. 5x5), got {text!r}") from None


def _load_image(path: str) -> Image:
    return load_pgm(Path(path).read_bytes())


def _build_parser() -> tuple[argparse.ArgumentParser, dict[str, argparse.ArgumentParser]]:
    parser = argparse.ArgumentParser(
        prog="stereopipe",
        description="Stereo block matching pipelines with synthesis-driven clock tuning.",
    )
    parser.add_argument(
        "--config",
        help="key=value file overlaying flag defaults; explicit flags win",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    m = sub.add_parser("match", help="compute a disparity map from a stereo PGM pair")
    m.add_argument("left")
    m.add_argument("right")
    m.add_argument("--cost", choices=["sad", "census"], default="census")
    m.add_argument("--block", default="5x5", help="window extents RxC")
    m.add_argument("--max-disparity", type=int, default=60)
    m.add_argument("--engine", choices=["reference", "stream"], default="reference")
    m.add_argument("--normalize", action="store_true", help="scale disparities onto 0..255")
    m.add_argument("-o", "--output", default="disparity.pgm")

    s = sub.add_parser("simulate", help="stream a pipeline and report cycle counts")
    s.add_argument("inputs", nargs="*", help="input PGMs (synthetic gray if omitted)")
    s.add_argument("--pipeline", choices=["sad", "census", "gaussian"], required=True)
    s.add_argument("--width", type=int, default=450)
    s.add_argument("--height", type=int, default=375)
    s.add_argument("--block", default="5x5")
    s.add_argument("--max-disparity", type=int, default=60)
    s.add_argument("--ii", type=int, default=1)
    s.add_argument("--clock-mhz", type=float, default=100.0)
    s.add_argument("-o", "--output", help="write the sink image here")

    o = sub.add_parser("optimize", help="two-phase search for the fastest feasible clock")
    o.add_argument("--pipeline", choices=["sad", "census", "gaussian"], default="census")
    o.add_argument("--width", type=int, default=450)
    o.add_argument("--height", type=int, default=375)
    o.add_argument("--block", default="5x5")
    o.add_argument("--max-disparity", type=int, default=60)
    o.add_argument("--max-ii", type=int, default=1)
    o.add_argument("--max-resource-pct", type=float, default=6.0)
    o.add_argument("--min-freq-mhz", type=float, default=None)
    o.add_argument("--step-ns", type=float, default=0.005)
    o.add_argument("--default-low-ns", type=float, default=1.0)
    o.add_argument("--noise-ns", type=float, default=0.0, help="timing pseudo-noise amplitude")
    o.add_argument("--budget-lut", type=int, default=ZYNQ_7100.lut_total)
    o.add_argument("--budget-ff", type=int, default=ZYNQ_7100.ff_total)
    o.add_argument("--budget-dsp", type=int, default=ZYNQ_7100.dsp_total)
    o.add_argument("--budget-bram", type=int, default=ZYNQ_7100.bram_blocks_total)
    o.add_argument("--csv", default="design_points.csv")
    o.add_argument("--svg", default=None, help="write a frequency/resource scatter plot")

    p = sub.add_parser("pareto", help="filter a design-point CSV to its Pareto front")
    p.add_argument("points_csv")
    p.add_argument("-o", "--output", default="front.csv")

    return parser, {"match": m, "simulate": s, "optimize": o, "pareto": p}


def _parse_args(argv: list[str]) -> argparse.Namespace:
    parser, subparsers = _build_parser()
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        overlay = _read_config_overlay(known.config)
        for sub in subparsers.values():
            dests = {a.dest for a in sub._actions}  # noqa: SLF001
            sub.set_defaults(**{k: v for k, v in overlay.items() if k in dests})
    return parser.parse_args(argv)


def _match_config(args) -> MatchConfig:
    rows, cols = _parse_block(args.block)
    return MatchConfig(
        cost=CostKind(args.cost),
        block_rows=rows,
        block_cols=cols,
        max_disparity=args.max_disparity,
    )


def _cmd_match(args) -> int:
    left = _load_image(args.left)
    right = _load_image(args.right)
    cfg = _match_config(args)
    if args.engine == "reference":
        disp = match_reference(left, right, cfg)
    else:
        graph = build_pipeline(cfg)
        plan = lower(graph, left.width, left.height)
        images, stats = simulate(plan, {"left": left, "right": right})
        print(
            f"pixels={stats.outputs_produced} ii={plan.ii} "
            f"fill_cycles={stats.fill_cycles} total_cycles={stats.total_cycles}"
        )
        disp = DisparityMap(
            width=left.width,
            height=left.height,
            max_disparity=cfg.max_disparity,
            values=images["disparity"].pixels,
        )
    Path(args.output).write_bytes(store_pgm(disp.to_image(normalize=args.normalize)))
    return EXIT_OK


def _simulation_setup(args):
    """Returns (graph, sources) for the selected pipeline at the given dims."""
    width, height = args.width, args.height
    if width < 1 or height < 1:
        raise _CliConfigError(f"image extents must be positive, got {width}x{height}")

    def synthetic(_name):
        return Image.from_array(np.full((height, width), 128, dtype=np.uint8))

    if args.pipeline == "gaussian":
        graph = build_gaussian_graph(BoundaryMode.CLAMP)
        names = ["in"]
    else:
        cfg = _match_config_for_pipeline(args)
        graph = build_pipeline(cfg)
        names = ["left", "right"]
    inputs = list(getattr(args, "inputs", []) or [])
    if inputs and len(inputs) != len(names):
        raise _CliConfigError(
            f"pipeline {args.pipeline!r} needs {len(names)} inputs, got {len(inputs)}"
        )
    sources = {}
    for i, name in enumerate(names):
        sources[name] = _load_image(inputs[i]) if inputs else synthetic(name)
    if inputs:
        dims = {(img.width, img.height) for img in sources.values()}
        if len(dims) != 1:
            pretty = ", ".join(f"{w}x{h}" for w, h in sorted(dims))
            raise DimensionMismatchError(f"input dimensions disagree: {pretty}")
        (args.width, args.height) = dims.pop()
    return graph, sources


def _match_config_for_pipeline(args) -> MatchConfig:
    rows, cols = _parse_block(args.block)
    return MatchConfig(
        cost=CostKind(args.pipeline),
        block_rows=rows,
        block_cols=cols,
        max_disparity=args.max_disparity,
    )


def _cmd_simulate(args) -> int:
    graph, sources = _simulation_setup(args)
    plan = lower(graph, args.width, args.height, ii=args.ii)
    images, stats = simulate(plan, sources)
    latency = total_latency_seconds(stats.outputs_produced, plan.ii, args.clock_mhz)
    with_fill = total_latency_seconds(
        stats.outputs_produced, plan.ii, args.clock_mhz, fill_cycles=stats.fill_cycles
    )
    print(f"fill_cycles={stats.fill_cycles}")
    print(f"total_cycles={stats.total_cycles}")
    print(f"outputs={stats.outputs_produced}")
    print(f"latency_us={latency * 1e6:.3f}")
    print(f"latency_with_fill_us={with_fill * 1e6:.3f}")
    if args.output:
        sink = next(iter(images.values()))
        Path(args.output).write_bytes(store_pgm(sink))
    return EXIT_OK


def _cmd_optimize(args) -> int:
    if args.pipeline == "gaussian":
        graph = build_gaussian_graph(BoundaryMode.CLAMP)
    else:
        graph = build_pipeline(_match_config_for_pipeline(args))
    plan = lower(graph, args.width, args.height)
    constraints = Constraints(
        max_ii=args.max_ii,
        max_resource_pct=args.max_resource_pct,
        min_freq_mhz=args.min_freq_mhz,
    )
    budget = ResourceBudget(
        lut_total=args.budget_lut,
        ff_total=args.budget_ff,
        dsp_total=args.budget_dsp,
        bram_blocks_total=args.budget_bram,
    )
    backend = MockBackend(MockModelParams(noise_amplitude_ns=args.noise_ns))
    try:
        result = optimize(
            plan,
            constraints,
            budget,
            backend,
            step_ns=args.step_ns,
            default_low_ns=args.default_low_ns,
        )
    except InfeasibleConstraintsError as exc:
        Path(args.csv).write_text(design_points_to_csv(exc.points))
        print(f"infeasible constraints: {exc}", file=sys.stderr)
        print(f"evaluated points written to {args.csv}", file=sys.stderr)
        return EXIT_INFEASIBLE
    Path(args.csv).write_text(design_points_to_csv(result.points))
    if args.svg:
        Path(args.svg).write_text(
            _scatter_svg(result.points, pareto_front(result.points), args.max_resource_pct)
        )
    print(result.summary())
    return EXIT_OK


def _cmd_pareto(args) -> int:
    points = design_points_from_csv(Path(args.points_csv).read_text())
    front = pareto_front(points)
    Path(args.output).write_text(design_points_to_csv(front))
    print(f"{len(front)} of {len(points)} points on the front")
    return EXIT_OK


def _scatter_svg(points, front, constraint_pct: float) -> str:
    """Minimal SVG 1.1 scatter: achieved frequency vs max resource usage,
    dashed constraint line, Pareto points filled."""
    width, height, margin = 640, 440, 50
    xs = [p.report.achieved_freq_mhz for p in points]
    ys = [p.max_resource_pct for p in points]
    x_lo, x_hi = min(xs), max(xs)
    y_lo, y_hi = min(ys + [constraint_pct]), max(ys + [constraint_pct])
    x_span = (x_hi - x_lo) or 1.0
    y_span = (y_hi - y_lo) or 1.0

    def sx(v):
        return margin + (v - x_lo) / x_span * (width - 2 * margin)

    def sy(v):
        return height - margin - (v - y_lo) / y_span * (height - 2 * margin)

    front_set = {id(p) for p in front}
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{width}" height="{height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" '
        f'stroke="black"/>',
        f'<text x="{width // 2}" y="{height - 12}" text-anchor="middle" '
        f'font-size="12">achieved frequency [MHz] ({x_lo:.1f} .. {x_hi:.1f})</text>',
        f'<text x="14" y="{height // 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 14 {height // 2})">max resource [%] '
        f"({y_lo:.2f} .. {y_hi:.2f})</text>",
        f'<line x1="{margin}" y1="{sy(constraint_pct):.1f}" x2="{width - margin}" '
        f'y2="{sy(constraint_pct):.1f}" stroke="red" stroke-dasharray="6,4"/>',
    ]
    for p in points:
        fill = "#1f77b4" if id(p) in front_set else "none"
        parts.append(
            f'<circle cx="{sx(p.report.achieved_freq_mhz):.1f}" '
            f'cy="{sy(p.max_resource_pct):.1f}" r="4" stroke="#1f77b4" fill="{fill}"/>'
        )
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = _parse_args(argv)
    except (_CliConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG if isinstance(exc, _CliConfigError) else EXIT_IO
    handlers = {
        "match": _cmd_match,
        "simulate": _cmd_simulate,
        "optimize": _cmd_optimize,
        "pareto": _cmd_pareto,
    }
    try:
        return handlers[args.command](args)
    except PgmError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except DimensionMismatchError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DIMENSIONS
    except (LoweringError, _CliConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
