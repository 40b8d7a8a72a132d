"""Command-line front end.

Subcommands::

    scusum detect   --input FIELD --out DIR [--k K | --auto-k --c1 C] ...
    scusum simulate --out DIR [--mu MU --noise {iid,expcov} --scale R] ...
    scusum bench    --config CONFIG.json --out DIR
    scusum replay   MANIFEST [--out DIR]

Every run writes ``manifest.json`` next to its outputs.  ``replay`` re-runs
the recorded subcommand with the recorded parameters; outputs other than the
manifest itself and ``timing.json`` come out byte-identical.

Exit codes: 0 success (including runs with no detections), 2 usage or I/O
error, 3 internal invariant violation.  ``SCUSUM_THREADS`` caps the worker
count (0 or unset: all cores); it never changes results.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path
from typing import List, Optional

from . import __version__
from .bench import run_benchmark, load_config, write_report
from .core import neighbor_size, resolve_workers
from .errors import InvariantViolation, ScusumError
from .field import SpatialField
from .formats import (read_field, sha256_file, write_density_csv, write_field_csv,
                      write_mask_pgm)
from .simulate import SimConfig, exp_covariance, generate
from .threshold import detect

EXIT_OK, EXIT_USAGE, EXIT_INTERNAL = 0, 2, 3


class _UsageError(Exception):
    pass


def _write_manifest(out: Path, subcommand: str, argv: List[str], params: dict,
                    inputs: dict, outputs: List[Path], started: float, extra=None) -> None:
    manifest = {
        "tool": "scusum",
        "version": __version__,
        "subcommand": subcommand,
        "argv": argv,
        "params": params,
        "seed": params.get("seed", params.get("root_seed")),
        "inputs": inputs,
        "outputs": {p.name: sha256_file(p) for p in outputs},
        "threads": resolve_workers(),
        "wall_clock_seconds": round(time.perf_counter() - started, 6),
    }
    if extra:
        manifest.update(extra)
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _out_dir(path: str) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise _UsageError(f"cannot create output directory {out}: {exc}") from exc
    return out


def cmd_detect(args) -> int:
    started = time.perf_counter()
    src = Path(args.input).resolve()
    if not src.is_file():
        raise _UsageError(f"input file not found: {src}")
    try:
        values = read_field(src, args.format)
        field = SpatialField(values)
    except (OSError, ScusumError) as exc:
        raise _UsageError(f"cannot read {src}: {exc}") from exc

    if args.auto_k:
        k = neighbor_size(field.size, args.c1, max_k=min(field.shape))
    else:
        k = args.k
    out = _out_dir(args.out)
    result = detect(field, k, args.m, args.alpha, seed=args.seed, negate=args.negate,
                    rule=args.rule, margin=args.margin, grid_size=args.grid_size,
                    bandwidth=args.bandwidth)

    weights = result.weights
    density = result.density
    report = {
        "alpha": args.alpha,
        "threshold": result.threshold,
        "valley": None if density is None else density.valley,
        "bandwidth": None if density is None else density.bandwidth,
        "rule": args.rule,
        "reason": result.reason,
        "n_detected": result.n_detected,
        "k": k,
        "m": args.m,
        "runs": weights.runs,
        "seed": args.seed,
        "negate": args.negate,
        "rows": field.rows,
        "cols": field.cols,
    }
    paths = [out / "weights.csv", out / "mask.pgm", out / "density.csv", out / "report.json"]
    write_field_csv(paths[0], weights.weights)
    write_mask_pgm(paths[1], result.mask)
    write_density_csv(paths[2], density)
    paths[3].write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")

    params = {"input": str(src), "format": args.format, "k": k, "auto_k": args.auto_k,
              "c1": args.c1, "m": args.m, "alpha": args.alpha, "seed": args.seed,
              "negate": args.negate, "rule": args.rule, "margin": args.margin,
              "grid_size": args.grid_size, "bandwidth": args.bandwidth}
    argv = ["--input", str(src), "--k", str(k), "--m", str(args.m), "--alpha", repr(args.alpha),
            "--seed", str(args.seed), "--rule", args.rule, "--margin", repr(args.margin),
            "--grid-size", str(args.grid_size)]
    if args.format:
        argv += ["--format", args.format]
    if args.negate:
        argv.append("--negate")
    if args.bandwidth is not None:
        argv += ["--bandwidth", repr(args.bandwidth)]
    _write_manifest(out, "detect", argv, params, {str(src): sha256_file(src)}, paths, started)
    msg = f"{result.n_detected} locations detected"
    if result.reason:
        msg += f" ({result.reason})"
    print(msg)
    return EXIT_OK


def cmd_simulate(args) -> int:
    started = time.perf_counter()
    config = SimConfig(rows=args.rows, cols=args.cols, mu0=args.mu0, mu1=args.mu0 + args.mu,
                       noise=args.noise, scale=args.scale, seed=args.seed, stroke=args.stroke)
    field, truth = generate(config)
    out = _out_dir(args.out)
    paths = [out / "field.csv", out / "truth.pgm"]
    write_field_csv(paths[0], field.values)
    write_mask_pgm(paths[1], truth.signal)

    params = {"rows": args.rows, "cols": args.cols, "mu": args.mu, "mu0": args.mu0,
              "noise": args.noise, "scale": args.scale, "seed": args.seed, "stroke": args.stroke}
    argv = ["--rows", str(args.rows), "--cols", str(args.cols), "--mu", repr(args.mu),
            "--mu0", repr(args.mu0), "--noise", args.noise, "--seed", str(args.seed)]
    if args.scale is not None:
        argv += ["--scale", repr(args.scale)]
    if args.stroke is not None:
        argv += ["--stroke", str(args.stroke)]
    extra = {"signal_count": truth.count}
    if args.noise == "expcov":
        extra["unit_distance_covariance"] = float(exp_covariance(1.0, args.scale))
    _write_manifest(out, "simulate", argv, params, {}, paths, started, extra)
    print(f"wrote {field.rows}x{field.cols} field with {truth.count} signal cells to {out}")
    return EXIT_OK


def cmd_bench(args) -> int:
    started = time.perf_counter()
    cfg_path = Path(args.config).resolve()
    if not cfg_path.is_file():
        raise _UsageError(f"config file not found: {cfg_path}")
    try:
        cfg = load_config(cfg_path)
    except (OSError, ScusumError) as exc:
        raise _UsageError(str(exc)) from exc
    out = _out_dir(args.out)

    def progress(i, rep):
        if args.verbose:
            print(f"setting {i} replicate {rep} done", file=sys.stderr)

    outcome = run_benchmark(cfg, progress=progress)
    paths = write_report(outcome, out)
    data_paths = [p for p in paths if p.name != "timing.json"]
    _write_manifest(out, "bench", ["--config", str(cfg_path)],
                    {"config": str(cfg_path), "root_seed": outcome["report"]["root_seed"]},
                    {str(cfg_path): sha256_file(cfg_path)}, data_paths, started)
    for row in outcome["report"]["rows"]:
        s = row["setting"]
        print(f"{row['label']:>26} k={s['k']} mu={s['mu']} noise={s['noise']} r={s['scale']}: "
              f"FN={row['false_negative']:.4f} FP={row['false_positive']:.4f} "
              f"FDR={row['fdr']:.4f}")
    return EXIT_OK


def cmd_replay(args) -> int:
    path = Path(args.manifest)
    try:
        manifest = json.loads(path.read_text())
        sub = manifest["subcommand"]
        argv = list(manifest["argv"])
    except (OSError, ValueError, KeyError) as exc:
        raise _UsageError(f"cannot read manifest {path}: {exc}") from exc
    if sub not in ("detect", "simulate", "bench"):
        raise _UsageError(f"manifest {path} records unknown subcommand {sub!r}")
    for src, digest in manifest.get("inputs", {}).items():
        if not Path(src).is_file():
            raise _UsageError(f"replay input missing: {src}")
        if sha256_file(src) != digest:
            print(f"warning: {src} changed since the recorded run", file=sys.stderr)
    out = args.out or str(path.parent)
    return main([sub, *argv, "--out", out])


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="scusum", description=__doc__.split("\n\n")[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="detect the signal region of a field")
    p.add_argument("--input", required=True, help="field file (CSV grid or PGM image)")
    p.add_argument("--format", choices=("csv", "pgm"), default=None,
                   help="input format (default: from the file extension)")
    ksel = p.add_mutually_exclusive_group()
    ksel.add_argument("--k", type=int, default=5, help="neighbor size (default 5)")
    ksel.add_argument("--auto-k", action="store_true",
                      help="pick k = round((c1 * n) ** 0.25)")
    p.add_argument("--c1", type=float, default=1.0, help="trade-off weight for --auto-k")
    p.add_argument("--m", type=int, default=10, help="repeats of the offset sweep (default 10)")
    p.add_argument("--alpha", type=float, default=0.05, help="mFDR level (default 0.05)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--negate", action="store_true", help="detect low-mean regions instead")
    p.add_argument("--rule", choices=("tail", "local"), default="tail",
                   help="FDR ratio used for the threshold (default tail)")
    p.add_argument("--margin", type=float, default=0.1, help="valley search margin")
    p.add_argument("--grid-size", type=int, default=512, help="density grid points")
    p.add_argument("--bandwidth", type=float, default=None, help="KDE bandwidth override")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("simulate", help="generate an L/H ground-truth field")
    p.add_argument("--mu", type=float, default=1.0, help="signal mean above background")
    p.add_argument("--mu0", type=float, default=0.0, help="background mean")
    p.add_argument("--noise", choices=("iid", "expcov"), default="iid")
    p.add_argument("--scale", type=float, default=None, help="dependence scale r (expcov)")
    p.add_argument("--rows", type=int, default=100)
    p.add_argument("--cols", type=int, default=100)
    p.add_argument("--stroke", type=int, default=None, help="glyph stroke width in pixels")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("bench", help="run a Monte Carlo benchmark config")
    p.add_argument("--config", required=True, help="benchmark JSON config")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--verbose", action="store_true", help="report progress on stderr")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("replay", help="re-run a recorded manifest")
    p.add_argument("manifest", help="manifest.json from a previous run")
    p.add_argument("--out", default=None, help="output directory (default: the manifest's)")
    p.set_defaults(func=cmd_replay)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except _UsageError as exc:
        print(f"scusum: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except InvariantViolation as exc:
        print(f"scusum: internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    except (ScusumError, OSError) as exc:
        print(f"scusum: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
