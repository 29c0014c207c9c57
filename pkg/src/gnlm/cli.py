"""Command-line front end.

Subcommands: ``despeckle``, ``gbf``, ``simulate``, ``stats``, ``metrics``,
``sweep`` and ``replay``. Every file-producing command writes a
``<out>.manifest.json`` recording the resolved arguments, input hashes,
seeds, version and timing; ``gnlm replay <manifest>`` re-runs it.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric error.
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import math
import os
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__, image_io, metrics, simulator, speckle_stats
from .core import FilterConfig, count_raster, filter
from .gbf import GbfConfig, filter_gbf

log = logging.getLogger("gnlm")

EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_or_inf(text: str) -> float:
    if text.lower() in ("inf", "infinity", "none"):
        return math.inf
    return float(text)


def _s0(text: str) -> int | None:
    if text.lower() in ("unlimited", "all", "none", "s"):
        return None
    return int(text)


def _sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def _input_hashes(paths) -> dict:
    out = {}
    for p in paths:
        if p is None:
            continue
        out[str(p)] = _sha256(p)
        sc = image_io.sidecar(p)
        if sc.exists():
            out[str(sc)] = _sha256(sc)
    return out


def write_manifest(path, subcommand: str, argv: list[str], config: dict, inputs=(), seeds=None,
                   outputs=(), started: float | None = None) -> dict:
    manifest = {
        "subcommand": subcommand,
        "argv": argv,
        "config": config,
        "input_hashes": _input_hashes(inputs),
        "seeds": seeds or {},
        "outputs": {str(p): _sha256(p) for p in outputs if Path(p).exists()},
        "tool_version": __version__,
        "started": datetime.fromtimestamp(started or time.time(), timezone.utc).isoformat(),
        "wall_clock_s": None if started is None else time.time() - started,
    }
    Path(path).write_text(json.dumps(manifest, indent=2, default=_json_default))
    return manifest


def _json_default(o):
    if isinstance(o, float) and math.isinf(o):
        return "inf"
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (np.floating,)):
        return float(o)
    if isinstance(o, tuple):
        return list(o)
    raise TypeError(f"not JSON serialisable: {type(o)}")


def _dump(obj) -> str:
    def fix(v):
        if isinstance(v, float) and not math.isfinite(v):
            return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
        if isinstance(v, dict):
            return {k: fix(x) for k, x in v.items()}
        if isinstance(v, (list, tuple)):
            return [fix(x) for x in v]
        return v
    return json.dumps(fix(obj), indent=2, default=_json_default)


def _filter_config(args) -> FilterConfig:
    overrides = {}
    if args.lam is not None:
        overrides["lam"] = args.lam
    if args.gamma is not None:
        overrides["gamma"] = args.gamma
    if args.k_sigma is not None:
        overrides["k_sigma"] = args.k_sigma
    if args.threshold is not None:
        overrides["threshold"] = args.threshold
    if args.s0 is not None:
        overrides["s0"] = _s0(args.s0)
    cfg = FilterConfig.preset(
        args.preset,
        patch_side=args.patch,
        search_side=args.search,
        anchor_step=args.step,
        optical_range=args.optical_range,
        **overrides,
    )
    if args.lambda_scale != 1.0:
        cfg = cfg.with_(lam=cfg.lam * args.lambda_scale)
    return cfg


def _config_dict(cfg) -> dict:
    from dataclasses import asdict
    return asdict(cfg)


def cmd_despeckle(args, argv) -> int:
    started = time.time()
    sar = image_io.read_sar(args.sar, looks=args.looks)
    guide = image_io.read_guide(args.guide)
    cfg = _filter_config(args)
    out = filter(sar, guide, cfg, threads=args.threads)
    outp = Path(args.out)
    image_io.write_raster(outp, out.filtered, looks=sar.looks)
    outputs = [outp]
    if args.emit_diagnostics:
        counts = count_raster(out, sar.shape)
        paths = {
            "counts": outp.with_name(outp.name + ".counts"),
            "unfiltered": outp.with_name(outp.name + ".unfiltered"),
            "ratio": outp.with_name(outp.name + ".ratio"),
        }
        image_io.write_raster(paths["counts"], counts.astype(np.float32))
        image_io.write_raster(paths["unfiltered"], (counts == 1).astype(np.float32))
        image_io.write_raster(paths["ratio"], metrics.ratio_image(sar, out.filtered).values)
        image_io.export_count_png(out.predictor_count, outp.with_name(outp.name + ".counts.png"), cfg.search_size)
        outputs += list(paths.values())
    resolved = _config_dict(cfg) | {"T": out.threshold, "looks": sar.looks, "threads": args.threads}
    write_manifest(outp.with_name(outp.name + ".manifest.json"), "despeckle", argv, resolved,
                   inputs=[args.sar, args.guide], outputs=outputs, started=started)
    log.info("wrote %s (T=%.4f, mean predictors %.1f)", outp, out.threshold, out.predictor_count.mean())
    return 0


def cmd_gbf(args, argv) -> int:
    started = time.time()
    sar = image_io.read_sar(args.sar, looks=args.looks)
    guide = image_io.read_guide(args.guide)
    cfg = GbfConfig(window_side=args.window, alpha=args.alpha, lambda_o=args.lambda_o, lambda_s=args.lambda_s)
    res = filter_gbf(sar, guide, cfg)
    outp = Path(args.out)
    image_io.write_raster(outp, res, looks=sar.looks)
    write_manifest(outp.with_name(outp.name + ".manifest.json"), "gbf", argv, _config_dict(cfg),
                   inputs=[args.sar, args.guide], outputs=[outp], started=started)
    return 0


def builtin_scene(name: str, size: int) -> simulator.SceneSpec:
    if name == "mosaic":
        return simulator.two_region_mosaic(size)
    if name == "reflector":
        c = size // 2
        return simulator.SceneSpec(size, size, reflectors=[simulator.Reflector(c, c, 100.0)])
    if name == "roads":
        return simulator.SceneSpec(
            size, size, background=1.0, background_guide=(0.3, 0.6, 0.3),
            regions=[
                simulator.Region(simulator.Rect(0, size // 2, size, size - size // 2), 2.5, (0.6, 0.5, 0.2)),
                simulator.Region(simulator.Road([(0, size * 0.2), (size, size * 0.7)], 3.0), 0.3, (0.5, 0.5, 0.5)),
            ],
        )
    raise UsageError(f"unknown builtin scene {name!r}")


def cmd_simulate(args, argv) -> int:
    started = time.time()
    if args.scene_file:
        spec = simulator.SceneSpec.from_dict(json.loads(Path(args.scene_file).read_text()))
    else:
        spec = builtin_scene(args.scene, args.size)
    clean, guide = simulator.generate_scene(spec, seed=args.seed)
    noisy = simulator.apply_speckle(clean, args.looks, seed=args.seed)
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    image_io.write_raster(out / "clean.f32", clean.pixels)
    image_io.write_raster(out / "noisy.f32", noisy.pixels, looks=args.looks)
    image_io.write_raster(out / "guide.f32", guide.planes)
    write_manifest(out / "manifest.json", "simulate", argv,
                   {"scene": spec.to_dict(), "looks": args.looks},
                   seeds={"seed": args.seed, "streams": "SeedSequence(seed).spawn(2): [scene, speckle]"},
                   outputs=[out / "clean.f32", out / "noisy.f32", out / "guide.f32"], started=started)
    return 0


def cmd_stats(args, argv) -> int:
    k = args.k
    print(_dump(speckle_stats.summary(args.looks, args.patch, k, tuple(args.tail))))
    return 0


def cmd_metrics(args, argv) -> int:
    sar = image_io.read_sar(args.sar)
    regions = {f"region{i}": metrics.RegionRect.parse(r) for i, r in enumerate(args.region or [])}
    if args.filtered:
        filt, _ = image_io.read_raster(args.filtered, require_finite=True)
        report = metrics.metrics_report(sar, filt.astype(np.float64), regions, args.levels)
    else:
        report = {"enl": {n: metrics.enl(sar.pixels, r) for n, r in regions.items()}}
    print(_dump(report))
    return 0


def sweep_grid(param: str, values, looks: float, patch_side: int, search_side: int):
    if param == "threshold":
        ks = [math.inf, 4.0, 2.0, 1.0, 0.0] if not values else [_float_or_inf(v) for v in values]
        n = patch_side * patch_side
        return [{"k_sigma": k, "T": speckle_stats.threshold(looks, n, k)} for k in ks]
    if param == "s0":
        vals = ["unlimited", "256", "64"] if not values else values
        return [{"s0": _s0(v)} for v in vals]
    if param == "lambda":
        return [{"lam": float(v)} for v in (values or ["0.001", "0.002", "0.004"])]
    raise UsageError(f"cannot sweep {param!r}")


def cmd_sweep(args, argv) -> int:
    started = time.time()
    sar = image_io.read_sar(args.sar, looks=args.looks)
    guide = image_io.read_guide(args.guide)
    base = _filter_config(args)
    regions = {f"region{i}": metrics.RegionRect.parse(r) for i, r in enumerate(args.region or [])}
    rows = []
    for point in sweep_grid(args.param, args.values, sar.looks, base.patch_side, base.search_side):
        kw = {k: v for k, v in point.items() if k != "T"}
        if "k_sigma" in kw:
            kw["threshold"] = None
        cfg = base.with_(**kw)
        t0 = time.perf_counter()
        out = filter(sar, guide, cfg, threads=args.threads)
        dt = time.perf_counter() - t0
        row = {
            "param": args.param,
            "k_sigma": cfg.k_sigma if cfg.threshold is None else "",
            "T": out.threshold,
            "s0": "unlimited" if cfg.s0 is None else cfg.s0,
            "lambda": cfg.lam,
            "gamma": cfg.gamma,
            "ris": metrics.ris(metrics.ratio_image(sar, out.filtered)),
            "mean_predictors": float(out.predictor_count.mean()),
            "runtime_s": dt,
        }
        for name, reg in regions.items():
            row[f"enl_{name}"] = metrics.enl(out.filtered, reg)
        rows.append(row)
    outp = Path(args.out)
    with open(outp, "w", newline="") as f:
        writer = csv.DictWriter(f, fieldnames=list(rows[0]))
        writer.writeheader()
        writer.writerows(rows)
    write_manifest(outp.with_name(outp.name + ".manifest.json"), "sweep", argv, _config_dict(base),
                   inputs=[args.sar, args.guide], outputs=[outp], started=started)
    return 0


def cmd_replay(args, argv) -> int:
    manifest = json.loads(Path(args.manifest).read_text())
    if args.check_inputs:
        for path, digest in manifest.get("input_hashes", {}).items():
            if _sha256(path) != digest:
                raise ValueError(f"input {path} changed since the manifest was written")
    return main(manifest["argv"])


def _add_filter_args(p):
    p.add_argument("--sar", required=True, help="SAR intensity raster (f32le + .json sidecar)")
    p.add_argument("--guide", required=True, help="optical guide raster, values in [0, 1]")
    p.add_argument("--looks", type=float, default=None, help="override the looks recorded in the SAR header")
    p.add_argument("--preset", choices=["sharp", "smooth"], default="sharp")
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    p.add_argument("--lambda-scale", type=float, default=1.0, help="multiply lambda, e.g. 4 for a different sensor")
    p.add_argument("--gamma", type=float, default=None)
    grp = p.add_mutually_exclusive_group()
    grp.add_argument("--k-sigma", type=_float_or_inf, default=None, help="threshold T = 1 + k sigma_P")
    grp.add_argument("--threshold", type=_float_or_inf, default=None, help="explicit T ('inf' disables the test)")
    p.add_argument("--s0", default=None, help="predictor cap or 'unlimited'")
    p.add_argument("--patch", type=int, default=8)
    p.add_argument("--search", type=int, default=39)
    p.add_argument("--step", type=int, default=1)
    p.add_argument("--optical-range", type=float, default=255.0)
    p.add_argument("--threads", type=int, default=os.cpu_count() or 1)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gnlm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("despeckle", help="run the guided NLM filter")
    _add_filter_args(p)
    p.add_argument("--out", required=True)
    p.add_argument("--emit-diagnostics", action="store_true")
    p.set_defaults(func=cmd_despeckle)

    p = sub.add_parser("gbf", help="pixel-wise generalized bilateral baseline")
    p.add_argument("--sar", required=True)
    p.add_argument("--guide", required=True)
    p.add_argument("--looks", type=float, default=None)
    p.add_argument("--out", required=True)
    d = GbfConfig()
    p.add_argument("--window", type=int, default=d.window_side)
    p.add_argument("--alpha", type=float, default=d.alpha)
    p.add_argument("--lambda-o", type=float, default=d.lambda_o)
    p.add_argument("--lambda-s", type=float, default=d.lambda_s)
    p.set_defaults(func=cmd_gbf)

    p = sub.add_parser("simulate", help="write a synthetic clean/noisy/guide triple")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--scene", choices=["mosaic", "reflector", "roads"], default="mosaic")
    p.add_argument("--scene-file", default=None, help="JSON SceneSpec, overrides --scene")
    p.add_argument("--size", type=int, default=128)
    p.add_argument("--looks", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("stats", help="speckle distance statistics as JSON")
    p.add_argument("--looks", type=float, default=1.0)
    p.add_argument("--patch", type=int, default=8, help="patch side")
    p.add_argument("--k", type=_float_or_inf, default=2.0)
    p.add_argument("--tail", type=float, nargs="*", default=[0.1, 0.2, 0.5])
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("metrics", help="ENL / RIS report as JSON")
    p.add_argument("--sar", required=True, help="original (noisy) raster")
    p.add_argument("--filtered", default=None)
    p.add_argument("--region", action="append", help="x,y,width,height (repeatable)")
    p.add_argument("--levels", type=int, default=64)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("sweep", help="parameter grid -> CSV of ENL, RIS, runtime")
    _add_filter_args(p)
    p.add_argument("--param", choices=["threshold", "s0", "lambda"], default="threshold")
    p.add_argument("--values", nargs="*", default=None)
    p.add_argument("--region", action="append")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--check-inputs", action="store_true")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args, argv)
    except UsageError as exc:
        print(f"gnlm: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (metrics.DegenerateRegionError, FloatingPointError, ZeroDivisionError) as exc:
        print(f"gnlm: numeric error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (OSError, ValueError, IndexError) as exc:
        print(f"gnlm: data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
