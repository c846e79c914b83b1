"""Command-line interface: ``tdslbp {gen,tds,features,detect,eval,export-image}``.

Exit codes: 0 success, 2 some corpus file failed, 64 usage error,
65 data error, 70 internal error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .detect import DetectionConfig, default_threads, detect_loaded, evaluate_corpus
from .errors import DataError, ImageWriteError, UsageError
from .ingest import load_dataset, validate_for_detection, write_dataset
from .lbp import LbpParams, histograms_to_csv, lbp_histogram
from .synth import SynthConfig, generate
from .tds import build_tds, export_image

EXIT_OK = 0
EXIT_FILE_FAILURES = 2
EXIT_USAGE = 64
EXIT_DATA = 65
EXIT_INTERNAL = 70

log = logging.getLogger("tdslbp")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text):
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"must be a positive integer: {text}")
    return value


def _bandwidth(text):
    if text == "auto":
        return None
    value = float(text)
    if not value > 0:
        raise argparse.ArgumentTypeError(f"bandwidth must be 'auto' or a positive number: {text}")
    return value


def _nu(text):
    value = float(text)
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError(f"nu must lie in (0, 1): {text}")
    return value


def _bool(text):
    lowered = text.lower()
    if lowered in ("true", "yes", "1"):
        return True
    if lowered in ("false", "no", "0"):
        return False
    raise argparse.ArgumentTypeError(f"expected true or false: {text}")


def _pipeline_flags() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("pipeline")
    g.add_argument("--segment-length", type=_positive_int, default=None,
                   help="samples per TDS column (power of two; default 512, or 256 below 2^17 samples)")
    g.add_argument("--height", type=_positive_int, default=64, help="Doppler bins per TDS column (default 64)")
    g.add_argument("--window", choices=("hamming", "rectangular"), default="hamming", help="segment window")
    g.add_argument("--scale", choices=("db", "linear"), default="db", help="TDS magnitude scale (default db)")
    g.add_argument("--nu", type=_nu, default=0.4, help="nu of the ball SVM; must exceed 2/m (default 0.4)")
    g.add_argument("--bandwidth", type=_bandwidth, default=None,
                   help="Gaussian kernel bandwidth s, or 'auto' for 1/m (default auto)")
    g.add_argument("--exclude-secondary", type=_bool, default=True, metavar="{true,false}",
                   help="drop secondary cells before training (default true)")
    g.add_argument("--seed", type=int, default=0, help="seed recorded with the solver settings (default 0)")
    g.add_argument("--threads", type=_positive_int, default=None,
                   help="worker threads (default: available cores)")
    return p


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="tdslbp", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="log diagnostics to stderr")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    pipeline = _pipeline_flags()

    gen = sub.add_parser("gen", help="generate a labeled synthetic dataset")
    gen.add_argument("--seed", type=int, required=True, help="RNG seed (required)")
    gen.add_argument("--out", type=Path, required=True, help="output directory for manifest.json + samples.bin")
    gen.add_argument("--style", choices=("1993", "1998"), default="1993",
                     help="1993: 11 cells x 2^17 samples; 1998: 28 cells x 60000 samples")
    gen.add_argument("--cells", type=_positive_int, help="override number of cells")
    gen.add_argument("--samples", type=_positive_int, help="override samples per cell")
    gen.add_argument("--target-cell", type=int, help="index of the target cell")
    gen.add_argument("--speckle-rate", type=float, help="target burst rate in bursts/s (0 = no target)")
    gen.add_argument("--speckle-amplitude", type=float, help="target burst amplitude relative to clutter")
    gen.add_argument("--secondary", type=int, nargs="*", default=[], help="cell indices labeled secondary")
    gen.add_argument("--polarization", choices=("HH", "HV", "VH", "VV"), default="HH", help="label to record")
    gen.add_argument("--dataset-id", help="dataset id (default synth-<seed>)")
    gen.add_argument("--json", action="store_true", help="print the manifest as JSON")

    tds = sub.add_parser("tds", parents=[pipeline], help="write the TDS image of every cell")
    tds.add_argument("--manifest", type=Path, required=True, help="dataset manifest")
    tds.add_argument("--out", type=Path, required=True, help="output directory")
    tds.add_argument("--format", choices=("pgm", "png"), default="pgm", help="image format (default pgm)")
    tds.add_argument("--json", action="store_true", help="print JSON instead of a table")

    feats = sub.add_parser("features", parents=[pipeline], help="LBP histograms of every cell as CSV")
    feats.add_argument("--manifest", type=Path, required=True, help="dataset manifest")
    feats.add_argument("--out", type=Path, help="CSV file (default stdout)")
    feats.add_argument("--json", action="store_true", help="print JSON instead of CSV")

    det = sub.add_parser("detect", parents=[pipeline], help="find the target cell of one dataset")
    det.add_argument("--manifest", type=Path, required=True, help="dataset manifest")
    det.add_argument("--out", type=Path, help="also write the JSON report here")
    det.add_argument("--json", action="store_true", help="print the JSON report instead of a table")

    ev = sub.add_parser("eval", parents=[pipeline], help="detection rate over several datasets")
    ev.add_argument("--manifest", type=Path, nargs="+", required=True, help="dataset manifests")
    ev.add_argument("--out", type=Path, help="also write the JSON result here")
    ev.add_argument("--json", action="store_true", help="print JSON instead of a table")

    exp = sub.add_parser("export-image", parents=[pipeline], help="write one cell's TDS image")
    exp.add_argument("--manifest", type=Path, required=True, help="dataset manifest")
    exp.add_argument("--cell", type=int, required=True, help="cell index")
    exp.add_argument("--out", type=Path, required=True, help="output image path")
    exp.add_argument("--format", choices=("pgm", "png"), help="image format (default from extension)")
    return parser


def _config(args) -> DetectionConfig:
    return DetectionConfig(
        segment_length=args.segment_length,
        height=args.height,
        window=args.window,
        magnitude_scale=args.scale,
        nu=args.nu,
        bandwidth=args.bandwidth,
        exclude_secondary=args.exclude_secondary,
        rng_seed=args.seed,
        threads=args.threads or default_threads(),
    )


def _cmd_gen(args) -> int:
    factory = SynthConfig.style_1998 if args.style == "1998" else SynthConfig.style_1993
    overrides = {"polarization": args.polarization, "secondary_cells": tuple(args.secondary)}
    for flag, key in (("cells", "num_cells"), ("samples", "samples_per_cell"), ("target_cell", "target_cell"),
                      ("speckle_rate", "target_speckle_rate"), ("speckle_amplitude", "target_speckle_amplitude"),
                      ("dataset_id", "dataset_id")):
        value = getattr(args, flag)
        if value is not None:
            overrides[key] = value
    cells, manifest = generate(factory(args.seed, **overrides))
    manifest_path = args.out / "manifest.json"
    write_dataset(manifest, cells, manifest_path)
    if args.json:
        print(json.dumps(manifest.to_dict(), indent=2))
    else:
        print(f"wrote {manifest_path} ({manifest.num_cells} cells x {manifest.samples_per_cell} samples, "
              f"primary cell {manifest.primary_cell})")
    return EXIT_OK


def _cmd_tds(args) -> int:
    cells, manifest = load_dataset(args.manifest)
    params = _config(args).tds_params(manifest.samples_per_cell)
    args.out.mkdir(parents=True, exist_ok=True)
    rows = []
    for c in cells:
        img = build_tds(c, params)
        path = export_image(img, args.out / f"cell_{c.cell_index:02d}.{args.format}", args.format)
        rows.append({"cell": c.cell_index, "role": c.role, "height": img.height, "width": img.width,
                     "path": str(path)})
    if args.json:
        print(json.dumps(rows, indent=2))
    else:
        for r in rows:
            print(f"cell {r['cell']:>3}  {r['height']}x{r['width']}  {r['role']:<12}  {r['path']}")
    return EXIT_OK


def _cmd_features(args) -> int:
    cells, manifest = load_dataset(args.manifest)
    config = _config(args)
    kept = validate_for_detection(cells, exclude_secondary=config.exclude_secondary)
    params = config.tds_params(manifest.samples_per_cell)
    hists = [lbp_histogram(build_tds(c, params), LbpParams()) for c in kept]
    if args.json:
        text = json.dumps([{"cell": h.cell_index, "bins": h.bins.tolist(), "pixels": h.pixel_count}
                           for h in hists], indent=2) + "\n"
    else:
        text = histograms_to_csv(hists)
    if args.out:
        args.out.write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _cmd_detect(args) -> int:
    cells, manifest = load_dataset(args.manifest)
    report = detect_loaded(cells, manifest, _config(args))
    if args.out:
        args.out.write_text(report.to_json() + "\n")
    print(report.to_json() if args.json else report.to_text())
    return EXIT_OK


def _cmd_eval(args) -> int:
    result = evaluate_corpus(args.manifest, _config(args))
    if args.out:
        args.out.write_text(result.to_json() + "\n")
    if args.json:
        print(result.to_json())
    else:
        for r in result.per_file:
            mark = "ok " if r.correct else "BAD"
            print(f"{mark} {r.dataset_id:<16} {r.polarization}  verdict {r.verdict_cell:>3}  "
                  f"primary {r.primary_cell:>3}  TCR {r.tcr_db:6.2f} dB")
        for f in result.failures:
            print(f"ERR {f.source}: {f.error}")
        print(result.to_table())
    return EXIT_FILE_FAILURES if result.failures else EXIT_OK


def _cmd_export(args) -> int:
    cells, manifest = load_dataset(args.manifest)
    if not 0 <= args.cell < manifest.num_cells:
        raise UsageError(f"--cell {args.cell} outside [0, {manifest.num_cells})")
    params = _config(args).tds_params(manifest.samples_per_cell)
    img = build_tds(cells[args.cell], params)
    path = export_image(img, args.out, args.format)
    print(f"wrote {path} ({img.height}x{img.width})")
    return EXIT_OK


COMMANDS = {
    "gen": _cmd_gen,
    "tds": _cmd_tds,
    "features": _cmd_features,
    "detect": _cmd_detect,
    "eval": _cmd_eval,
    "export-image": _cmd_export,
}


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"tdslbp {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, ImageWriteError, OSError) as exc:
        print(f"tdslbp {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"tdslbp {args.command}: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


def main():
    sys.exit(run())


if __name__ == "__main__":
    main()
