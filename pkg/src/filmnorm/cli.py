"""Command-line pipeline: synthesis, binarization, reference building,
normalization, evaluation, and the convergence experiment.

Every run writes exactly one manifest JSON next to its primary output
(``<output>.manifest.json``, or ``manifest.json`` inside an output
directory) recording the command, arguments, inputs, outputs, tool version
and wall time. All outputs are written atomically, so concurrent runs with
distinct output paths cannot corrupt each other.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import asdict
from pathlib import Path

from . import __version__
from .binarize import CHANNELS, METHODS, BinarizeConfig, binarize
from .errors import FilmNormError
from .evaluate import (
    convergence_trace,
    pairwise_comparison,
    report_to_csv,
    report_to_json,
    trace_to_csv,
)
from .image import ChannelMeans
from .io import atomic_write_text, read_image, read_mask, write_image, write_mask
from .normalize import (
    DEFAULT_REFERENCE_PROFILE,
    GrayTarget,
    ReferenceProfile,
    build_reference_profile,
    database_gray_world,
    fg_bg_gray_world,
    gray_world,
)
from .retinex import RetinexConfig, retinex
from .synth import IlluminantCast, SceneSpec, apply_cast, render_scene

ALGORITHMS = ("gw", "gw-db", "fg-bg-gw", "retinex")

_MANIFEST_STRIP = {".png", ".ppm", ".csv", ".json"}


class _UsageError(Exception):
    """Bad flag combination detected after argparse."""


def _manifest_path(primary: Path) -> Path:
    if primary.is_dir():
        return primary / "manifest.json"
    name = primary.name
    if primary.suffix.lower() in _MANIFEST_STRIP:
        name = name[: -len(primary.suffix)]
    return primary.with_name(name + ".manifest.json")


def _write_manifest(primary: Path, command: str, argv: list[str], inputs, outputs,
                    wall_time_s: float, algorithm: str | None = None,
                    config: dict | None = None) -> Path:
    payload = {
        "command": command,
        "argv": list(argv),
        "inputs": [str(p) for p in inputs],
        "outputs": [str(p) for p in outputs],
        "algorithm": algorithm,
        "config": config,
        "tool_version": __version__,
        "wall_time_s": wall_time_s,
    }
    path = _manifest_path(primary)
    atomic_write_text(path, json.dumps(payload, indent=2) + "\n")
    return path


def _triple(text: str) -> tuple[float, float, float]:
    """Parse 'V' or 'R,G,B' into a float triple."""
    try:
        values = [float(p) for p in text.split(",")]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected R,G,B floats, got {text!r}")
    if len(values) == 1:
        values = values * 3
    if len(values) != 3:
        raise argparse.ArgumentTypeError(f"expected 1 or 3 values, got {len(values)}")
    return (values[0], values[1], values[2])


def _load_profile(path: str | None) -> ReferenceProfile:
    if path is None:
        return DEFAULT_REFERENCE_PROFILE
    return ReferenceProfile.from_json(Path(path).read_text(encoding="utf-8"))


def _binarize_config(args) -> BinarizeConfig:
    return BinarizeConfig(
        method=args.method,
        working_channel=args.channel,
        strong_offset=args.strong_offset,
        weak_offset=args.weak_offset,
        min_cell_area=args.min_area,
        max_cell_area=args.max_area,
    )


def _add_binarize_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--method", choices=METHODS, default=BinarizeConfig.method,
                        help="binarization method (default: %(default)s)")
    parser.add_argument("--channel", choices=CHANNELS, default=BinarizeConfig.working_channel,
                        help="working channel (default: %(default)s)")
    parser.add_argument("--strong-offset", type=float, default=BinarizeConfig.strong_offset,
                        help="valley minus this gives the seed threshold (default: %(default)s)")
    parser.add_argument("--weak-offset", type=float, default=BinarizeConfig.weak_offset,
                        help="valley plus this bounds the foreground (default: %(default)s)")
    parser.add_argument("--min-area", type=int, default=BinarizeConfig.min_cell_area,
                        help="smallest probed cell area in px (default: %(default)s)")
    parser.add_argument("--max-area", type=int, default=BinarizeConfig.max_cell_area,
                        help="largest probed cell area in px (default: %(default)s)")


def _cmd_synth(args, argv: list[str]) -> int:
    t0 = time.monotonic()
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs: list[Path] = []
    for i in range(args.count):
        spec = SceneSpec(
            width=args.width, height=args.height, n_cells=args.cells,
            cell_radius=args.radius, radius_jitter=args.radius_jitter,
            plasma_color=args.plasma, cell_color=args.cell,
            noise_sigma=args.noise_sigma, seed=args.seed + i,
        )
        img, mask = render_scene(spec)
        if args.cast is not None:
            img = apply_cast(img, IlluminantCast(*args.cast))
        stem = f"scene_{spec.seed:04d}"
        paths = (out_dir / f"{stem}.png", out_dir / f"{stem}_mask.png",
                 out_dir / f"{stem}_spec.json")
        write_image(paths[0], img)
        write_mask(paths[1], mask)
        atomic_write_text(paths[2], spec.to_json())
        outputs.extend(paths)
    config = {
        "count": args.count, "seed": args.seed,
        "width": args.width, "height": args.height, "cells": args.cells,
        "radius": args.radius, "radius_jitter": args.radius_jitter,
        "plasma": list(args.plasma), "cell": list(args.cell),
        "noise_sigma": args.noise_sigma,
        "cast": list(args.cast) if args.cast is not None else None,
    }
    _write_manifest(out_dir, "synth", argv, [], outputs,
                    time.monotonic() - t0, config=config)
    print(f"wrote {args.count} scene(s) to {out_dir}")
    return 0


def _cmd_binarize(args, argv: list[str]) -> int:
    t0 = time.monotonic()
    inputs = [Path(p) for p in args.inputs]
    if args.out is not None and len(inputs) != 1:
        raise _UsageError("--out is only valid with exactly one input; use --out-dir")
    if args.out is None and args.out_dir is None:
        raise _UsageError("give --out (single input) or --out-dir")
    out_dir = None
    if args.out_dir is not None:
        out_dir = Path(args.out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
    cfg = _binarize_config(args)
    outputs: list[Path] = []
    failures = 0
    for path in inputs:
        target = Path(args.out) if args.out else out_dir / f"{path.stem}_mask.png"
        try:
            mask = binarize(read_image(path), cfg)
            write_mask(target, mask)
        except (FilmNormError, OSError, ValueError) as exc:
            failures += 1
            print(f"error: {path}: {exc}", file=sys.stderr)
            continue
        outputs.append(target)
        print(f"{path}: {mask.foreground_count} foreground px -> {target}")
    primary = Path(args.out) if args.out else out_dir
    _write_manifest(primary, "binarize", argv, inputs, outputs,
                    time.monotonic() - t0, algorithm=cfg.method, config=asdict(cfg))
    if failures:
        print(f"{failures} of {len(inputs)} input(s) failed", file=sys.stderr)
        return 1
    return 0


def _cmd_build_reference(args, argv: list[str]) -> int:
    t0 = time.monotonic()
    if args.use_default and args.pair:
        raise _UsageError("--use-default cannot be combined with --pair")
    if not args.use_default and not args.pair:
        raise _UsageError("give at least one --pair IMAGE MASK, or --use-default")
    inputs: list[str] = []
    if args.use_default:
        profile = DEFAULT_REFERENCE_PROFILE
    else:
        pairs = []
        sources = []
        for img_path, mask_path in args.pair:
            pairs.append((read_image(img_path), read_mask(mask_path)))
            sources.append(img_path)
            inputs.extend([img_path, mask_path])
        profile = build_reference_profile(pairs, sources=sources,
                                          background_target=args.background_target)
    out = Path(args.out)
    atomic_write_text(out, profile.to_json())
    _write_manifest(out, "build-reference", argv, inputs, [out],
                    time.monotonic() - t0,
                    config={"use_default": args.use_default,
                            "background_target": args.background_target,
                            "n_images": profile.n_images})
    m = profile.means
    print(f"profile means ({m.r!r}, {m.g!r}, {m.b!r}) from {profile.n_images} image(s) -> {out}")
    return 0


def _cmd_normalize(args, argv: list[str]) -> int:
    t0 = time.monotonic()
    img = read_image(args.input)
    inputs = [args.input]
    config: dict = {}
    bg_transform = fg_transform = None
    if args.algorithm == "gw":
        target = GrayTarget(ChannelMeans(*args.target)) if args.target else GrayTarget()
        result = gray_world(img, target)
        out_img, bg_transform = result.output, result.background_transform
        config["target"] = list(target.levels.as_tuple())
    elif args.algorithm == "gw-db":
        profile = _load_profile(args.profile)
        result = database_gray_world(img, profile)
        out_img, bg_transform = result.output, result.background_transform
        config["profile"] = args.profile or "builtin"
        config["profile_means"] = list(profile.means.as_tuple())
    elif args.algorithm == "fg-bg-gw":
        profile = _load_profile(args.profile)
        if args.mask is not None:
            mask = read_mask(args.mask)
            inputs.append(args.mask)
            config["mask"] = args.mask
        elif args.auto_binarize:
            mask = binarize(img, _binarize_config(args))
            config["mask"] = f"auto ({args.method}, {args.channel} channel)"
        else:
            raise _UsageError("fg-bg-gw needs --mask FILE or --auto-binarize")
        result = fg_bg_gray_world(img, mask, profile, args.background_target)
        out_img = result.output
        bg_transform, fg_transform = result.background_transform, result.foreground_transform
        config["profile"] = args.profile or "builtin"
        config["profile_means"] = list(profile.means.as_tuple())
        config["background_target"] = args.background_target
    else:
        retinex_cfg = RetinexConfig(n_iterations=args.iterations,
                                    pre_normalize=not args.no_pre_normalize)
        out_img = retinex(img, retinex_cfg)
        config.update(asdict(retinex_cfg))
    out = Path(args.out)
    write_image(out, out_img)
    if bg_transform is not None:
        config["background_transform"] = list(bg_transform.as_tuple())
    if fg_transform is not None:
        config["foreground_transform"] = list(fg_transform.as_tuple())
    _write_manifest(out, "normalize", argv, inputs, [out],
                    time.monotonic() - t0, algorithm=args.algorithm, config=config)
    print(f"{args.input} [{args.algorithm}] -> {out}")
    return 0


def _evaluate_ids(paths: list[str]) -> list[str]:
    ids = []
    seen: dict[str, int] = {}
    for p in paths:
        ident = p.replace("|", "_")
        n = seen.get(ident, 0)
        seen[ident] = n + 1
        ids.append(ident if n == 0 else f"{ident}#{n}")
    return ids


def _cmd_evaluate(args, argv: list[str]) -> int:
    t0 = time.monotonic()
    if len(args.inputs) < 2:
        raise _UsageError("evaluate needs at least two images")
    images = [read_image(p) for p in args.inputs]
    report = pairwise_comparison(images, ids=_evaluate_ids(args.inputs))
    base = Path(args.out)
    csv_path = base.with_name(base.name + ".csv")
    json_path = base.with_name(base.name + ".json")
    atomic_write_text(csv_path, report_to_csv(report))
    atomic_write_text(json_path, report_to_json(report))
    _write_manifest(base, "evaluate", argv, args.inputs, [csv_path, json_path],
                    time.monotonic() - t0,
                    config={"n_images": len(images)})
    print(f"rms {report.rms!r} rad over {report.n_pixels} pixel pair(s) -> {csv_path}")
    return 0


def _cmd_convergence(args, argv: list[str]) -> int:
    t0 = time.monotonic()
    img = read_image(args.input)
    mask = read_mask(args.mask)
    profile = _load_profile(args.profile)
    trace = convergence_trace(img, mask, profile, args.iterations,
                              quantize_between=args.quantize_between,
                              background_target=args.background_target)
    out = Path(args.out)
    atomic_write_text(out, trace_to_csv(trace))
    _write_manifest(out, "convergence", argv, [args.input, args.mask], [out],
                    time.monotonic() - t0, algorithm="fg-bg-gw",
                    config={"iterations": args.iterations,
                            "quantize_between": args.quantize_between,
                            "profile": args.profile or "builtin",
                            "background_target": args.background_target})
    print(f"final rms_vs_previous {trace.steps[-1].rms_vs_previous!r} -> {out}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="filmnorm",
        description="Color normalization toolkit for two-class microscopy images.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render synthetic scenes with ground-truth masks")
    p.add_argument("--out-dir", required=True, help="directory for scenes, masks and specs")
    p.add_argument("--count", type=int, default=1, help="number of scenes (default: 1)")
    p.add_argument("--seed", type=int, default=0, help="seed of the first scene (default: 0)")
    p.add_argument("--width", type=int, default=SceneSpec.width)
    p.add_argument("--height", type=int, default=SceneSpec.height)
    p.add_argument("--cells", type=int, default=SceneSpec.n_cells)
    p.add_argument("--radius", type=float, default=SceneSpec.cell_radius)
    p.add_argument("--radius-jitter", type=float, default=SceneSpec.radius_jitter)
    p.add_argument("--plasma", type=_triple, default=SceneSpec.plasma_color,
                   metavar="R,G,B", help="plasma color (default: 200,204,220)")
    p.add_argument("--cell", type=_triple, default=SceneSpec.cell_color,
                   metavar="R,G,B", help="cell color (default: 120,90,130)")
    p.add_argument("--noise-sigma", type=float, default=SceneSpec.noise_sigma)
    p.add_argument("--cast", type=_triple, default=None, metavar="R,G,B",
                   help="apply this diagonal illuminant cast after rendering")
    p.set_defaults(func=_cmd_synth)

    p = sub.add_parser("binarize", help="write foreground/background masks")
    p.add_argument("inputs", nargs="+", help="input images (.png or .ppm)")
    p.add_argument("--out", default=None, help="mask path (single input only)")
    p.add_argument("--out-dir", default=None, help="directory for <stem>_mask.png files")
    _add_binarize_options(p)
    p.set_defaults(func=_cmd_binarize)

    p = sub.add_parser("build-reference", help="build a reference profile from image/mask pairs")
    p.add_argument("--pair", nargs=2, action="append", metavar=("IMAGE", "MASK"),
                   help="reference image plus its mask; repeatable")
    p.add_argument("--use-default", action="store_true",
                   help="write the builtin profile instead of measuring")
    p.add_argument("--background-target", type=float, default=255.0,
                   help="white point for stage one (default: %(default)s)")
    p.add_argument("--out", required=True, help="profile JSON path")
    p.set_defaults(func=_cmd_build_reference)

    p = sub.add_parser("normalize", help="normalize one image")
    p.add_argument("input", help="image to normalize")
    p.add_argument("--algorithm", choices=ALGORITHMS, required=True)
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--profile", default=None,
                   help="reference profile JSON (default: builtin)")
    p.add_argument("--mask", default=None, help="foreground mask for fg-bg-gw")
    p.add_argument("--auto-binarize", action="store_true",
                   help="derive the mask from the input (fg-bg-gw)")
    p.add_argument("--target", type=_triple, default=None, metavar="V|R,G,B",
                   help="gray-world target (default: 127.5)")
    p.add_argument("--background-target", type=float, default=255.0,
                   help="white point for fg-bg-gw stage one (default: %(default)s)")
    p.add_argument("--iterations", type=int, default=RetinexConfig.n_iterations,
                   help="retinex iterations per level (default: %(default)s)")
    p.add_argument("--no-pre-normalize", action="store_true",
                   help="skip the retinex per-channel stretch")
    _add_binarize_options(p)
    p.set_defaults(func=_cmd_normalize)

    p = sub.add_parser("evaluate", help="pairwise RMS angular error report")
    p.add_argument("inputs", nargs="+", help="two or more aligned images")
    p.add_argument("--out", required=True, metavar="BASE",
                   help="writes BASE.csv and BASE.json")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("convergence", help="re-normalization convergence trace")
    p.add_argument("input", help="image to start from")
    p.add_argument("--mask", required=True, help="foreground mask")
    p.add_argument("--profile", default=None,
                   help="reference profile JSON (default: builtin)")
    p.add_argument("--iterations", type=int, default=5,
                   help="number of re-normalization rounds (default: %(default)s)")
    p.add_argument("--quantize-between", action="store_true",
                   help="pass outputs through the 8-bit encoder between rounds")
    p.add_argument("--background-target", type=float, default=255.0)
    p.add_argument("--out", required=True, help="trace CSV path")
    p.set_defaults(func=_cmd_convergence)

    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:]) if argv is None else list(argv)
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (FilmNormError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
