"""Command-line surface: register, eval, bench, descriptors export|inspect.

All commands honor --seed for bit-reproducible output. JSON is written with
sorted keys; bench CSV rows carry wall_ms = 0 unless --timing is given, so
fixed-seed runs are byte-identical.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from .config import EngineConfig
from .descriptors import compute_descriptors, read_descriptor_file, write_descriptor_file
from .errors import GridRegError, NoOverlapError, NoSolutionError
from .grid import GridSpec, gridize
from .image import load_image
from .matching import candidate_sets, distance_matrix
from .metrics import evaluate
from .solver import solve
from .synth import (
    DegradeOptions,
    LEVELS,
    register_case,
    rows_to_csv,
    synth_pair,
    worker_count,
)
from .transform import AffineTransform2D

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NO_SOLUTION = 2


def _emit(payload: dict, out_path) -> None:
    text = json.dumps(payload, indent=2, sort_keys=True) + "\n"
    if out_path:
        with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _load_config(args) -> EngineConfig:
    cfg = EngineConfig.from_file(args.config) if args.config else EngineConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "step", None) is not None:
        cfg.step = args.step
    if getattr(args, "beta", None) is not None:
        cfg.beta = args.beta
    if getattr(args, "iter_cap", None) is not None:
        cfg.iter_cap = args.iter_cap
    return cfg


def _descriptor_inputs(args, cfg):
    """(spec, descriptor set, dims) per side, from images or GRDS files."""
    sides = []
    for img_path, desc_path, modality in (
        (args.sar, args.desc_sar, "sar"),
        (args.ref, args.desc_ref, "opt"),
    ):
        if desc_path:
            dset = read_descriptor_file(desc_path, modality=modality)
            # without the image, fall back to the smallest extent covering the grid
            dims = dset.grid.min_extent()
            sides.append((dset.grid, dset, dims))
        elif img_path:
            image = load_image(img_path)
            spec = gridize(image, cfg.patch, cfg.step)
            dset = compute_descriptors(image, spec, modality=modality)
            sides.append((spec, dset, image.dims))
        else:
            raise GridRegError(
                f"missing input: provide an image or descriptor file for the "
                f"{'source' if modality == 'sar' else 'reference'} side"
            )
    return sides


def cmd_register(args) -> int:
    cfg = _load_config(args)
    (sar_spec, f_s, sar_dims), (opt_spec, f_o, opt_dims) = _descriptor_inputs(args, cfg)
    d = distance_matrix(f_s, f_o)
    cands = candidate_sets(d, cfg.k, f_s.grid.step, sar_dims, opt_dims)
    result = solve(d, cands, sar_spec, opt_spec, cfg.solver_config(sar_dims, opt_dims))
    payload = {
        "affine": result.transform.as_list(),
        "l_min": result.l_min,
        "n_grid_src": sar_spec.n_points,
        "n_grid_ref": opt_spec.n_points,
        "diagnostics": {**result.diagnostics.as_dict(), "support_pairs": len(result.pairs)},
    }
    _emit(payload, args.out)
    return EXIT_OK


def _read_transform_json(path) -> AffineTransform2D:
    with open(path, "r", encoding="utf-8") as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or "affine" not in data:
        raise GridRegError(f"{path} does not contain an 'affine' entry")
    return AffineTransform2D(np.asarray(data["affine"], dtype=np.float64))


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return (int(w), int(h))
    except ValueError as exc:
        raise GridRegError(f"sizes are WIDTHxHEIGHT, got {text!r}") from exc


def cmd_eval(args) -> int:
    pred = _read_transform_json(args.pred)
    gt = _read_transform_json(args.gt)
    if args.sar_size:
        sar_dims = _parse_size(args.sar_size)
    elif args.sar:
        sar_dims = load_image(args.sar).dims
    else:
        raise GridRegError("provide --sar-size WxH or --sar image")
    if args.ref_size:
        opt_dims = _parse_size(args.ref_size)
    elif args.ref:
        opt_dims = load_image(args.ref).dims
    else:
        raise GridRegError("provide --ref-size WxH or --ref image")
    report = evaluate(pred, gt, sar_dims, opt_dims, stride=args.stride)
    _emit(report.as_dict(), args.out)
    return EXIT_OK


def _parse_int_list(text: str) -> list[int]:
    if ":" in text:
        lo, hi = text.split(":")
        return list(range(int(lo), int(hi)))
    return [int(v) for v in text.split(",")]


def _bench_one(task):
    base, level, seed, cfg_dict, source_size, timing = task
    import time as _time

    cfg = EngineConfig.from_dict(cfg_dict)
    case = synth_pair(base, level, seed, source_size=source_size)
    t0 = _time.perf_counter()
    try:
        value, _ = register_case(case, cfg)
    except GridRegError:
        value = float("inf")
    wall = (_time.perf_counter() - t0) * 1000.0 if timing else 0.0
    return value, wall


def cmd_bench(args) -> int:
    base = load_image(args.base)
    levels = args.levels.split(",")
    for level in levels:
        if level not in LEVELS:
            raise GridRegError(f"unknown level {level!r}; choose from {sorted(LEVELS)}")
    seeds = _parse_int_list(args.seeds)
    steps = _parse_int_list(args.step) if args.step else [EngineConfig().step]
    betas = [float(v) for v in args.beta.split(",")] if args.beta else [EngineConfig().beta]

    tasks = []
    for level in levels:
        for seed in seeds:
            for step in steps:
                for beta in betas:
                    cfg = _load_config(args)
                    cfg.step = step
                    cfg.beta = beta
                    tasks.append(
                        (base, level, seed, cfg.to_dict(), args.source_size, args.timing)
                    )

    workers = min(worker_count(), max(1, len(tasks)))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_bench_one, tasks))
    else:
        outcomes = [_bench_one(t) for t in tasks]

    rows = []
    for case_id, (task, (value, wall)) in enumerate(zip(tasks, outcomes)):
        _, level, seed, cfg_dict, _, _ = task
        row = {
            "case_id": case_id,
            "level": level,
            "seed": seed,
            "step": cfg_dict["step"],
            "beta": cfg_dict["beta"],
            "mee_px": value,
            "wall_ms": wall,
        }
        for th in (25, 50, 75, 100):
            row[f"success{th}"] = int(value <= th)
        rows.append(row)
    text = rows_to_csv(rows, extra_cols=("step", "beta"))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_descriptors(args) -> int:
    if args.action == "export":
        if not args.image or not args.out:
            raise GridRegError("descriptors export needs --image and --out")
        cfg = _load_config(args)
        image = load_image(args.image)
        spec = gridize(image, cfg.patch, cfg.step)
        dset = compute_descriptors(image, spec, modality=args.modality)
        write_descriptor_file(dset, args.out)
        sys.stdout.write(
            f"wrote {args.out}: grid {spec.n_w}x{spec.n_h}, dim {dset.dim}, "
            f"patch {spec.patch}, step {spec.step}\n"
        )
        return EXIT_OK
    # inspect
    dset = read_descriptor_file(args.file)
    norms = np.linalg.norm(dset.data.astype(np.float64), axis=1)
    info = {
        "n_w": dset.grid.n_w,
        "n_h": dset.grid.n_h,
        "dim": dset.dim,
        "patch": dset.grid.patch,
        "step": dset.grid.step,
        "normalized": dset.normalized,
        "rows": int(dset.data.shape[0]),
        "zero_fallback_rows": int(np.count_nonzero(norms == 0.0)),
        "max_norm_deviation": float(np.max(np.abs(norms - 1.0))) if norms.size else 0.0,
    }
    _emit(info, None)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gridreg",
        description="Grid-based multimodal image registration engine",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_reg = sub.add_parser("register", help="estimate the source->reference affine")
    p_reg.add_argument("--sar", help="source image (PNG/TIFF)")
    p_reg.add_argument("--ref", help="reference image (PNG/TIFF)")
    p_reg.add_argument("--desc-sar", help="GRDS descriptor file for the source side")
    p_reg.add_argument("--desc-ref", help="GRDS descriptor file for the reference side")
    p_reg.add_argument("--config", help="engine config JSON")
    p_reg.add_argument("--seed", type=int)
    p_reg.add_argument("--step", type=int)
    p_reg.add_argument("--beta", type=float)
    p_reg.add_argument("--iter-cap", type=int, dest="iter_cap")
    p_reg.add_argument("--out", help="output JSON path (default stdout)")
    p_reg.set_defaults(func=cmd_register)

    p_eval = sub.add_parser("eval", help="score a predicted transform against truth")
    p_eval.add_argument("--pred", required=True, help="predicted transform JSON")
    p_eval.add_argument("--gt", required=True, help="ground-truth transform JSON")
    p_eval.add_argument("--sar", help="source image, used only for its size")
    p_eval.add_argument("--ref", help="reference image, used only for its size")
    p_eval.add_argument("--sar-size", help="source WIDTHxHEIGHT")
    p_eval.add_argument("--ref-size", help="reference WIDTHxHEIGHT")
    p_eval.add_argument("--stride", type=int, default=4)
    p_eval.add_argument("--out")
    p_eval.set_defaults(func=cmd_eval)

    p_bench = sub.add_parser("bench", help="synthetic benchmark sweep")
    p_bench.add_argument("--base", required=True, help="textured base image")
    p_bench.add_argument("--levels", default="L0", help="comma list, e.g. L0,L2")
    p_bench.add_argument("--seeds", default="0:10", help="lo:hi range or comma list")
    p_bench.add_argument("--step", help="comma list of steps to sweep")
    p_bench.add_argument("--beta", help="comma list of betas to sweep")
    p_bench.add_argument("--seed", type=int)
    p_bench.add_argument("--config")
    p_bench.add_argument("--iter-cap", type=int, dest="iter_cap")
    p_bench.add_argument("--source-size", type=int, default=400, dest="source_size")
    p_bench.add_argument("--timing", action="store_true", help="record real wall times")
    p_bench.add_argument("--out", help="output CSV path (default stdout)")
    p_bench.set_defaults(func=cmd_bench)

    p_desc = sub.add_parser("descriptors", help="export or inspect GRDS files")
    p_desc.add_argument("action", choices=["export", "inspect"])
    p_desc.add_argument("file", nargs="?", help="GRDS file (inspect)")
    p_desc.add_argument("--image", help="image to export from")
    p_desc.add_argument("--modality", default="unknown")
    p_desc.add_argument("--config")
    p_desc.add_argument("--seed", type=int)
    p_desc.add_argument("--step", type=int)
    p_desc.add_argument("--out", help="GRDS output path (export)")
    p_desc.set_defaults(func=cmd_descriptors)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except NoSolutionError as exc:
        diag = exc.diagnostics.as_dict() if exc.diagnostics else {}
        sys.stderr.write(f"no solution: {exc} {diag}\n")
        return EXIT_NO_SOLUTION
    except NoOverlapError as exc:
        sys.stderr.write(f"no overlap: {exc}\n")
        return EXIT_NO_SOLUTION
    except (GridRegError, OSError, json.JSONDecodeError, ValueError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
