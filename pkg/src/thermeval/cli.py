"""Command line front end.

Subcommands cover the full pipeline: convert raw frames, mark tiny
ground truth as ignore, plan nested splits, run mock detectors, score
detections, aggregate result tables, and run the significance battery.
Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from pathlib import Path

from . import __version__
from .coco import (
    DatasetError,
    parse_coco,
    parse_detections,
    write_coco,
    write_detections,
)
from .coco import BBox
from .metrics import DEFAULT_MAX_DETS, METRIC_NAMES, evaluate
from .plan import PlanError, plan_splits, write_plan
from .report import (
    ReportError,
    RunResult,
    aggregate,
    emit_significance_figure_data,
    emit_table,
    metric_samples,
    read_results_csv,
    write_results_csv,
)
from .stats import DEFAULT_ALPHA, StatsError, run_battery
from .synth import (
    PRESETS,
    MockDetectorSpec,
    SynthError,
    build_corpus,
    mock_detect,
)
from .thermal import (
    CalibrationRange,
    ThermalError,
    normalize_frame,
    read_raw,
    write_pgm,
    write_raw,
)

_ERRORS = (
    DatasetError,
    ThermalError,
    PlanError,
    StatsError,
    ReportError,
    SynthError,
    ValueError,
    OSError,
)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fp:
        for chunk in iter(lambda: fp.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(
    anchor: Path,
    command: str,
    seed: int | None,
    inputs: list[Path],
    outputs: list[Path],
) -> None:
    """Record what produced the output next to the output itself."""
    target_dir = anchor if anchor.is_dir() else anchor.parent
    manifest = {
        "tool": "thermeval",
        "version": __version__,
        "command": command,
        "seed": seed,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "outputs": [str(p) for p in outputs],
    }
    path = target_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def _load_dataset(path: Path):
    return parse_coco(path.read_text(encoding="utf-8"))


def _parse_thresholds(text: str) -> list[float]:
    return [float(tok) for tok in text.split(",") if tok.strip()]


def cmd_convert(args: argparse.Namespace) -> int:
    src = Path(args.src)
    out = Path(args.out)
    if not src.is_dir():
        print(f"thermeval convert: error: {src} is not a directory", file=sys.stderr)
        return 1
    cal = CalibrationRange(args.cal_lo, args.cal_hi)
    raw_files = sorted(src.glob("*.raw"))
    if not raw_files:
        print(f"thermeval convert: warning: no .raw files in {src}", file=sys.stderr)
        return 0
    out.mkdir(parents=True, exist_ok=True)
    written: list[Path] = []
    failed = 0
    for raw_path in raw_files:
        try:
            with open(raw_path, "rb") as fp:
                frame = read_raw(fp)
            gray = normalize_frame(frame, cal)
            dest = out / (raw_path.stem + ".pgm")
            with open(dest, "wb") as fp:
                write_pgm(gray, fp)
            written.append(dest)
        except (ThermalError, OSError) as exc:
            print(f"thermeval convert: error: {raw_path.name}: {exc}", file=sys.stderr)
            failed += 1
    print(f"converted {len(written)} of {len(raw_files)} frames")
    if args.manifest:
        _write_manifest(out, "convert", None, raw_files, written)
    return 1 if failed else 0


def cmd_filter(args: argparse.Namespace) -> int:
    from .coco import filter_small_objects

    ds = _load_dataset(Path(args.gt))
    filtered = filter_small_objects(ds, args.threshold)
    Path(args.out).write_text(write_coco(filtered), encoding="utf-8")
    flipped = sum(
        1
        for a, b in zip(ds.annotations, filtered.annotations)
        if b.ignore and not a.ignore
    )
    print(f"marked {flipped} of {len(ds.annotations)} annotations as ignore")
    if args.manifest:
        _write_manifest(Path(args.out), "filter", None, [Path(args.gt)], [Path(args.out)])
    return 0


def cmd_split(args: argparse.Namespace) -> int:
    ds = _load_dataset(Path(args.gt))
    plan = plan_splits(ds.image_ids(), args.k_outer, args.k_inner, args.seed)
    Path(args.out).write_text(write_plan(plan), encoding="utf-8")
    print(f"planned {len(plan.runs)} runs over {len(ds.image_ids())} images")
    if args.manifest:
        _write_manifest(Path(args.out), "split", args.seed, [Path(args.gt)], [Path(args.out)])
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    if args.out is None and args.append is None:
        print(
            "thermeval evaluate: error: nothing to do, pass --out and/or --append",
            file=sys.stderr,
        )
        return 1
    if args.append is not None and None in (args.model, args.hpc, args.run, args.dataset):
        print(
            "thermeval evaluate: error: --append needs --model, --hpc, --run and --dataset",
            file=sys.stderr,
        )
        return 1
    gt = _load_dataset(Path(args.gt))
    dets = parse_detections(Path(args.dets).read_text(encoding="utf-8"), gt)
    report = evaluate(gt, dets, args.iou_thresholds, args.max_dets)
    for name in METRIC_NAMES:
        print(f"{name} {getattr(report, name):.6f}")
    outputs: list[Path] = []
    if args.out is not None:
        Path(args.out).write_text(
            json.dumps(report.as_dict(), indent=2) + "\n", encoding="utf-8"
        )
        outputs.append(Path(args.out))
    if args.append is not None:
        path = Path(args.append)
        rows = list(read_results_csv(path.read_text(encoding="utf-8"))) if path.exists() else []
        rows.append(
            RunResult(
                model=args.model,
                hpc=args.hpc,
                run=args.run,
                dataset=args.dataset,
                metrics=report,
            )
        )
        path.write_text(write_results_csv(rows), encoding="utf-8")
        outputs.append(path)
    if args.manifest:
        _write_manifest(
            outputs[0], "evaluate", None, [Path(args.gt), Path(args.dets)], outputs
        )
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    results = read_results_csv(Path(args.results).read_text(encoding="utf-8"))
    metrics = list(METRIC_NAMES) if args.metric == "all" else [args.metric]
    reports = {}
    for metric in metrics:
        try:
            battery = run_battery(metric_samples(results, metric), args.alpha)
        except StatsError as exc:
            if args.metric != "all":
                raise
            print(f"thermeval stats: skipping {metric}: {exc}", file=sys.stderr)
            continue
        reports[metric] = battery.as_dict()
        letters = " ".join(
            f"{name}={battery.letters[name]}" for name in battery.group_names
        )
        print(
            f"{metric}: omnibus={battery.omnibus_method}"
            f" p={battery.omnibus_p:.4g} {letters}"
        )
    if not reports:
        print("thermeval stats: error: no metric could be tested", file=sys.stderr)
        return 1
    if args.out is not None:
        Path(args.out).write_text(json.dumps(reports, indent=2) + "\n", encoding="utf-8")
        if args.manifest:
            _write_manifest(Path(args.out), "stats", None, [Path(args.results)], [Path(args.out)])
    return 0


def cmd_report(args: argparse.Namespace) -> int:
    results = read_results_csv(Path(args.results).read_text(encoding="utf-8"))
    table = aggregate(results)
    if args.model is None and len(table.models) > 1:
        # one table per model, with a heading line so the blocks stay apart
        parts = []
        for model in table.models:
            body = emit_table(table, style=args.style, decimal=args.decimal, model=model)
            head = f"## {model}" if args.style == "markdown" else f"# {model}"
            parts.append(f"{head}\n\n{body}" if args.style == "markdown" else f"{head}\n{body}")
        text = "\n".join(parts)
    else:
        text = emit_table(table, style=args.style, decimal=args.decimal, model=args.model)
    Path(args.out).write_text(text, encoding="utf-8")
    outputs = [Path(args.out)]
    if args.figure_data is not None:
        stats_by_metric = {}
        for metric in METRIC_NAMES:
            try:
                stats_by_metric[metric] = run_battery(
                    metric_samples(results, metric), args.alpha
                )
            except StatsError:
                continue
        if not stats_by_metric:
            print(
                "thermeval report: error: no metric supports the battery",
                file=sys.stderr,
            )
            return 1
        Path(args.figure_data).write_text(
            emit_significance_figure_data(stats_by_metric, table), encoding="utf-8"
        )
        outputs.append(Path(args.figure_data))
    if args.manifest:
        _write_manifest(Path(args.out), "report", None, [Path(args.results)], outputs)
    return 0


def cmd_synth(args: argparse.Namespace) -> int:
    spec = PRESETS[args.preset]
    render = args.frames is not None
    corpus = build_corpus(spec, args.n, args.seed, render=render)
    Path(args.out).write_text(write_coco(corpus.dataset), encoding="utf-8")
    outputs = [Path(args.out)]
    if render:
        frames_dir = Path(args.frames)
        frames_dir.mkdir(parents=True, exist_ok=True)
        for img, frame in zip(corpus.dataset.images, corpus.frames):
            dest = frames_dir / img.file_name
            with open(dest, "wb") as fp:
                write_raw(frame, fp)
            outputs.append(dest)
    if args.emit_distractors is not None:
        payload = {
            str(image_id): [box.as_list() for box in boxes]
            for image_id, boxes in corpus.distractors.items()
        }
        Path(args.emit_distractors).write_text(
            json.dumps(payload, indent=2) + "\n", encoding="utf-8"
        )
        outputs.append(Path(args.emit_distractors))
    n_ann = len(corpus.dataset.annotations)
    print(f"generated {args.n} images with {n_ann} annotations (preset {args.preset})")
    if args.manifest:
        _write_manifest(Path(args.out), "synth", args.seed, [], outputs)
    return 0


def _load_distractors(path: Path) -> dict[int, tuple[BBox, ...]]:
    raw = json.loads(path.read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise SynthError("distractor file must hold an object keyed by image id")
    out = {}
    for key, boxes in raw.items():
        out[int(key)] = tuple(BBox(*map(float, b)) for b in boxes)
    return out


def cmd_detect(args: argparse.Namespace) -> int:
    gt = _load_dataset(Path(args.gt))
    spec = MockDetectorSpec(
        p_drop=args.p_drop,
        p_fp=args.p_fp,
        jitter_sigma=args.jitter_sigma,
        p_distractor_fp=args.p_distractor_fp,
    )
    distractors = None
    inputs = [Path(args.gt)]
    if args.distractors is not None:
        distractors = _load_distractors(Path(args.distractors))
        inputs.append(Path(args.distractors))
    dets = mock_detect(gt, spec, args.seed, distractors)
    Path(args.out).write_text(write_detections(dets), encoding="utf-8")
    print(f"emitted {len(dets)} detections over {len(gt.images)} images")
    if args.manifest:
        _write_manifest(Path(args.out), "detect", args.seed, inputs, [Path(args.out)])
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="thermeval",
        description="Thermal detection evaluation toolkit",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("convert", help="normalize raw frames to 8-bit PGM")
    p.add_argument("--src", required=True, help="directory of .raw frames")
    p.add_argument("--out", required=True, help="destination directory")
    p.add_argument("--cal-lo", type=float, required=True, help="calibration low bound")
    p.add_argument("--cal-hi", type=float, required=True, help="calibration high bound")
    p.add_argument("--manifest", action="store_true", help="write manifest.json")
    p.set_defaults(func=cmd_convert)

    p = sub.add_parser("filter", help="mark tiny ground-truth boxes as ignore")
    p.add_argument("--gt", required=True, help="ground-truth JSON")
    p.add_argument("--out", required=True, help="filtered JSON destination")
    p.add_argument("--threshold", type=float, default=10.0, help="side length cutoff")
    p.add_argument("--manifest", action="store_true", help="write manifest.json")
    p.set_defaults(func=cmd_filter)

    p = sub.add_parser("split", help="plan nested cross-validation runs")
    p.add_argument("--gt", required=True, help="ground-truth JSON")
    p.add_argument("--out", required=True, help="plan JSON destination")
    p.add_argument("--k-outer", type=int, default=5, help="outer fold count")
    p.add_argument("--k-inner", type=int, default=5, help="inner fold count")
    p.add_argument("--seed", type=int, default=0, help="shuffle seed")
    p.add_argument("--manifest", action="store_true", help="write manifest.json")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("evaluate", help="score detections against ground truth")
    p.add_argument("--gt", required=True, help="ground-truth JSON")
    p.add_argument("--dets", required=True, help="detections JSON")
    p.add_argument("--out", help="metric report JSON destination")
    p.add_argument("--append", help="results CSV to append a tagged row to")
    p.add_argument(
        "--iou-thresholds",
        type=_parse_thresholds,
        default=None,
        help="comma-separated overlap thresholds (default 0.50:0.05:0.95)",
    )
    p.add_argument("--max-dets", type=int, default=DEFAULT_MAX_DETS)
    p.add_argument("--model", help="model tag for --append")
    p.add_argument("--hpc", help="combination tag for --append")
    p.add_argument("--run", type=int, help="run index for --append")
    p.add_argument("--dataset", help="dataset tag for --append")
    p.add_argument("--manifest", action="store_true", help="write manifest.json")
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("stats", help="run the significance battery on a results CSV")
    p.add_argument("--results", required=True, help="results CSV")
    p.add_argument(
        "--metric",
        choices=METRIC_NAMES + ("all",),
        default="all",
        help="metric to test (default: every metric)",
    )
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--out", help="battery report JSON destination")
    p.add_argument("--manifest", action="store_true", help="write manifest.json")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("report", help="render the aggregate metric table")
    p.add_argument("--results", required=True, help="results CSV")
    p.add_argument("--out", required=True, help="table destination")
    p.add_argument("--style", choices=("markdown", "csv"), default="markdown")
    p.add_argument("--decimal", choices=("period", "comma"), default="period")
    p.add_argument("--model", help="restrict the table to one model")
    p.add_argument("--figure-data", help="also write letter figure data CSV here")
    p.add_argument("--alpha", type=float, default=DEFAULT_ALPHA)
    p.add_argument("--manifest", action="store_true", help="write manifest.json")
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("synth", help="generate a synthetic benchmark corpus")
    p.add_argument("--preset", choices=sorted(PRESETS), required=True)
    p.add_argument("--n", type=int, default=200, help="number of images")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="ground-truth JSON destination")
    p.add_argument("--frames", help="directory to render .raw frames into")
    p.add_argument("--emit-distractors", help="write distractor boxes JSON here")
    p.add_argument("--manifest", action="store_true", help="write manifest.json")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("detect", help="run a mock detector over a corpus")
    p.add_argument("--gt", required=True, help="ground-truth JSON")
    p.add_argument("--out", required=True, help="detections JSON destination")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--p-drop", type=float, default=0.0, help="miss probability")
    p.add_argument("--p-fp", type=float, default=0.0, help="expected false boxes per image")
    p.add_argument("--jitter-sigma", type=float, default=0.0, help="corner noise, pixels")
    p.add_argument(
        "--p-distractor-fp",
        type=float,
        default=0.0,
        help="per-distractor confusion probability",
    )
    p.add_argument("--distractors", help="distractor boxes JSON from synth")
    p.add_argument("--manifest", action="store_true", help="write manifest.json")
    p.set_defaults(func=cmd_detect)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _ERRORS as exc:
        print(f"thermeval {args.command}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
