"""Command-line interface.

Exit codes: 0 safe (or success for non-verifying commands), 1 uncertain,
2 usage, parse or dimension error. Reports are one JSON document on stdout
or in ``--out``.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import sys
from pathlib import Path

import numpy as np

from .interval import Box, DimensionError
from .model import ModelError, eval_network, load_model
from .propagation import excess_width_bound, lipschitz_gamma, network_interval
from .scenarios import arm_dataset, arm_forward, arm_spec, perturbation_box, window_indices
from .verifier import (
    SpecError,
    Verdict,
    depth_bound,
    load_spec,
    robustness_region,
    save_spec,
    verify,
    verify_uniform,
)

REPORT_FORMAT = 1
EXIT_SAFE, EXIT_UNCERTAIN, EXIT_ERROR = 0, 1, 2


class UsageError(ValueError):
    pass


def _box_json(b: Box) -> list[list[float]]:
    return b.to_list()


def verdict_report(
    verdict: Verdict, config: dict, dump_partition: bool, max_witnesses: int | None = None
) -> dict:
    total = len(verdict.witnesses)
    shown = total if max_witnesses is None else min(total, max_witnesses)
    report = {
        "format": REPORT_FORMAT,
        "status": verdict.status.value,
        "config": config,
        "stats": verdict.stats.to_dict(),
        "witness_count": total,
        "witnesses_truncated": shown < total,
        "witnesses": [
            {"in_box": _box_json(w.in_box), "out_box": _box_json(w.out_box), "depth": w.depth}
            for w in verdict.witnesses[:shown]
        ],
        "timing": {"wall_time": verdict.stats.wall_time},
    }
    if dump_partition:
        report["partition"] = [
            {"in_box": _box_json(it.in_box), "out_box": _box_json(it.out_box), "status": status}
            for it, status in verdict.partition
        ]
    return report


def _emit(report: dict, out: str | None) -> None:
    text = json.dumps(report, indent=2)
    if out:
        Path(out).write_text(text + "\n", encoding="utf-8")
    else:
        sys.stdout.write(text + "\n")


def _run_verifier(net, input_box, region, epsilon, args) -> Verdict:
    kwargs = dict(fail_fast=args.fail_fast, jobs=args.jobs, record_partition=args.dump_partition)
    if args.uniform:
        return verify_uniform(net, input_box, region, epsilon, **kwargs)
    return verify(net, input_box, region, epsilon, **kwargs)


def _cap(args) -> int | None:
    return None if args.max_witnesses < 0 else args.max_witnesses


def _epsilon(value) -> float:
    eps = float(value)
    if not eps > 0 or not math.isfinite(eps):
        raise argparse.ArgumentTypeError("epsilon must be a positive finite number")
    return eps


def cmd_verify(args) -> int:
    net = load_model(args.model)
    spec = load_spec(args.spec)
    epsilon = args.epsilon if args.epsilon is not None else spec.epsilon
    verdict = _run_verifier(net, spec.input_box, spec.region, epsilon, args)
    config = {
        "command": "verify",
        "model": str(args.model),
        "spec": str(args.spec),
        "epsilon": epsilon,
        "method": "uniform" if args.uniform else "guided",
        "fail_fast": args.fail_fast,
        "jobs": args.jobs,
        "depth_bound": depth_bound(spec.input_box, epsilon),
    }
    _emit(verdict_report(verdict, config, args.dump_partition, _cap(args)), args.out)
    return EXIT_SAFE if verdict.safe else EXIT_UNCERTAIN


def _parse_pair(text: str) -> tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise UsageError(f"expected LO,HI but got {text!r}")
    lo, hi = (float(p) for p in parts)
    return lo, hi


def _input_box(args) -> Box:
    if args.input and args.box:
        raise UsageError("give either --input or --box, not both")
    if args.input:
        bounds = json.loads(args.input)
    elif args.box:
        bounds = [_parse_pair(b) for b in args.box]
    else:
        raise UsageError("an input box is required (--box LO,HI ... or --input JSON)")
    try:
        bounds = [(float(lo), float(hi)) for lo, hi in bounds]
    except (TypeError, ValueError):
        raise UsageError("input box must be a list of [lo, hi] pairs") from None
    if not all(math.isfinite(v) for pair in bounds for v in pair):
        raise UsageError("input box must be finite")
    return Box.from_bounds(bounds)


def cmd_bound(args) -> int:
    net = load_model(args.model)
    box = _input_box(args)
    out = network_interval(net, box)
    lip = lipschitz_gamma(net)
    report = {
        "format": REPORT_FORMAT,
        "config": {"command": "bound", "model": str(args.model), "input": box.to_list()},
        "output": out.to_list(),
        "output_width": out.width,
        "gamma": lip.gamma,
        "xi": lip.xi,
        "per_layer_norms": list(lip.per_layer_norms),
        "excess_width_bound": excess_width_bound(net, box),
    }
    _emit(report, args.out)
    return EXIT_SAFE


def cmd_gen_arm(args) -> int:
    if args.l1 <= 0 or args.l2 <= 0:
        raise UsageError("link lengths must be positive")
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    spec_path = out_dir / "arm_spec.json"
    data_path = out_dir / "arm_data.csv"
    spec = arm_spec(args.epsilon if args.epsilon is not None else 0.01)
    save_spec(spec, spec_path)
    rows = arm_dataset(args.samples, args.seed, args.l1, args.l2)
    with open(data_path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta1", "theta2", "x", "y"])
        writer.writerows((repr(float(v)) for v in row) for row in rows)
    # reach of the true kinematics over the input box, for sanity checking the spec
    grid = np.linspace(spec.input_box.lo[0], spec.input_box.hi[0], 101)
    t1, t2 = np.meshgrid(grid, np.linspace(spec.input_box.lo[1], spec.input_box.hi[1], 101))
    x, y = arm_forward(t1, t2, args.l1, args.l2)
    report = {
        "format": REPORT_FORMAT,
        "config": {
            "command": "gen-arm",
            "l1": args.l1,
            "l2": args.l2,
            "samples": args.samples,
            "seed": args.seed,
        },
        "spec": str(spec_path),
        "dataset": str(data_path),
        "kinematics_range": {
            "x": [float(x.min()), float(x.max())],
            "y": [float(y.min()), float(y.max())],
        },
    }
    sys.stdout.write(json.dumps(report, indent=2) + "\n")
    return EXIT_SAFE


def load_image(path: str | Path) -> np.ndarray:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = [r for r in csv.reader(fh) if any(c.strip() for c in r)]
    except (OSError, UnicodeDecodeError) as exc:
        raise UsageError(f"cannot read image file {path}: {exc}") from exc
    if len(rows) != 1:
        raise UsageError(f"image file must hold exactly one CSV line, found {len(rows)}")
    try:
        values = np.array([float(c) for c in rows[0]], dtype=np.float64)
    except ValueError as exc:
        raise UsageError(f"image file holds a non-numeric value: {exc}") from None
    if not np.isfinite(values).all():
        raise UsageError("image values must be finite")
    return values


def _window(args, n_pixels: int) -> list[int]:
    if bool(args.indices) == bool(args.window):
        raise UsageError("give exactly one of --indices or --window")
    if args.indices:
        return [int(v) for v in args.indices.split(",")]
    parts = [int(v) for v in args.window.split(",")]
    if len(parts) != 4:
        raise UsageError("--window takes ROW,COL,HEIGHT,WIDTH")
    image_width = args.image_width or math.isqrt(n_pixels)
    if image_width * (n_pixels // image_width) != n_pixels:
        raise UsageError("cannot infer image width; pass --image-width")
    row, col, h, w = parts
    if (row + h) * image_width > n_pixels:
        raise UsageError("window does not fit the image")
    return window_indices(row, col, h, w, image_width)


def cmd_robust(args) -> int:
    net = load_model(args.model)
    image = load_image(args.image)
    if image.size != net.input_dim:
        raise DimensionError(f"image has {image.size} values, network expects {net.input_dim}")
    indices = _window(args, image.size)
    try:
        box = perturbation_box(image, indices, args.delta)
    except IndexError as exc:
        raise UsageError(str(exc)) from None
    label = args.label
    if label is None:
        label = int(np.argmax(eval_network(net, image)))
    region = robustness_region(net.output_dim, label)
    verdict = _run_verifier(net, box, region, args.epsilon, args)
    config = {
        "command": "robust",
        "model": str(args.model),
        "image": str(args.image),
        "indices": indices,
        "delta": args.delta,
        "label": label,
        "epsilon": args.epsilon,
        "method": "uniform" if args.uniform else "guided",
        "fail_fast": args.fail_fast,
        "jobs": args.jobs,
    }
    _emit(verdict_report(verdict, config, args.dump_partition, _cap(args)), args.out)
    return EXIT_SAFE if verdict.safe else EXIT_UNCERTAIN


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--uniform", action="store_true", help="use the uniform-grid baseline")
    p.add_argument("--fail-fast", action="store_true", help="stop at the first witness box")
    p.add_argument("--jobs", type=int, default=1, help="worker threads for propagation")
    p.add_argument("--dump-partition", action="store_true", help="include every leaf box")
    p.add_argument(
        "--max-witnesses", type=int, default=1000,
        help="witness boxes listed in the report (-1 for all; witness_count is always exact)",
    )
    p.add_argument("--out", help="write the JSON report here instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="specguard", description="Interval safety verification for feedforward networks."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="verify a model against a safety specification")
    p.add_argument("--model", required=True)
    p.add_argument("--spec", required=True)
    p.add_argument("--epsilon", type=_epsilon, help="override the specification's tolerance")
    _add_run_flags(p)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("bound", help="print the output enclosure and Lipschitz data")
    p.add_argument("--model", required=True)
    p.add_argument("--box", action="append", metavar="LO,HI", help="one per input dimension")
    p.add_argument("--input", help="input box as JSON [[lo, hi], ...]")
    p.add_argument("--out")
    p.set_defaults(func=cmd_bound)

    p = sub.add_parser("gen-arm", help="write the robotic-arm specification and dataset")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--l1", type=float, default=10.0)
    p.add_argument("--l2", type=float, default=10.0)
    p.add_argument("--samples", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--epsilon", type=_epsilon)
    p.set_defaults(func=cmd_gen_arm)

    p = sub.add_parser("robust", help="certify a prediction against pixel-window perturbations")
    p.add_argument("--model", required=True)
    p.add_argument("--image", required=True, help="CSV file with one line of pixel values")
    p.add_argument("--indices", help="comma-separated flat pixel indices to perturb")
    p.add_argument("--window", help="ROW,COL,HEIGHT,WIDTH rectangle to perturb")
    p.add_argument("--image-width", type=int, help="pixels per row for --window")
    p.add_argument("--delta", type=float, required=True, help="perturbation half-width")
    p.add_argument("--label", type=int, help="true class (default: the model's prediction)")
    p.add_argument("--epsilon", type=_epsilon, default=0.01)
    _add_run_flags(p)
    p.set_defaults(func=cmd_robust)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_ERROR if exc.code else EXIT_SAFE
    try:
        return args.func(args)
    except (ModelError, SpecError, UsageError, DimensionError, ValueError, OSError) as exc:
        print(f"specguard: error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
