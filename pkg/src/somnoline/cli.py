"""Command-line front door: every platform capability without the service.

Exit codes: 0 success, 2 usage error, 3 data/contract error, 4 internal error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import threading
from pathlib import Path

from . import bench as bench_mod
from .config import load_config
from .edf import (
    detect_night_boundaries,
    parse_nights_manifest,
    read_recording,
    split_nights,
    write_recording,
)
from .errors import SomnolineError
from .gray import (
    DEFAULT_GRAY_THRESHOLD,
    certainty,
    fit_threshold,
    gray_mask_to_csv,
    tag_gray,
)
from .report import generate_agreement_report
from .scoring import ScorerKind, ScorerSpec, score
from .staging import hypnodensity_from_csv, hypnodensity_to_csv

CONFIG_ENV_VAR = "SOMNOLINE_CONFIG"


def _config_path(args) -> str | None:
    return args.config or os.environ.get(CONFIG_ENV_VAR)


def cmd_split(args) -> int:
    data = Path(args.input).read_bytes()
    rec = read_recording(data)
    manifest = None
    manifest_path = args.manifest or (
        args.input + ".nights.json" if Path(args.input + ".nights.json").exists() else None
    )
    if manifest_path:
        manifest = parse_nights_manifest(Path(manifest_path).read_text())
    ranges = detect_night_boundaries(rec, gap_threshold_s=args.gap, manifest=manifest)
    nights = split_nights(rec, ranges)
    out_dir = Path(args.output)
    out_dir.mkdir(parents=True, exist_ok=True)
    stem = Path(args.input).stem
    for i, night in enumerate(nights):
        path = out_dir / f"{stem}_night_{i}.edf"
        path.write_bytes(write_recording(night))
        print(f"{path} ({night.num_records} records)")
    return 0


def cmd_score(args) -> int:
    rec = read_recording(Path(args.input).read_bytes())
    if args.hypnodensity:
        spec = ScorerSpec(kind=ScorerKind.PRECOMPUTED, source=Path(args.hypnodensity))
    else:
        spec = ScorerSpec(kind=ScorerKind.BASELINE, channel_label=args.baseline)
    h = score(rec, spec, epoch_length_s=args.epoch)
    text = hypnodensity_to_csv(h)
    if args.output:
        Path(args.output).write_text(text)
        print(f"{args.output} ({len(h)} epochs)", file=sys.stderr)
    else:
        sys.stdout.write(text)
    return 0


def cmd_gray(args) -> int:
    h = hypnodensity_from_csv(Path(args.input).read_text())
    series = certainty(h)
    if args.fit:
        fit = fit_threshold(series)
        threshold = fit.fitted_threshold
        print(
            f"fitted threshold {threshold:.4f} "
            f"(iterations={fit.iterations}, converged={fit.converged})",
            file=sys.stderr,
        )
    else:
        threshold = args.threshold
    mask = tag_gray(h, threshold)
    text = gray_mask_to_csv(mask, series)
    if args.output:
        Path(args.output).write_text(text)
    else:
        sys.stdout.write(text)
    print(f"{mask.gray_count}/{len(mask)} epochs gray at {threshold:.4f}",
          file=sys.stderr)
    return 0


def cmd_kappa(args) -> int:
    report = generate_agreement_report(
        Path(args.ratings), Path(args.layout), Path(args.mask) if args.mask else None
    )
    text = json.dumps(report, indent=2)
    if args.report:
        Path(args.report).write_text(text)
        print(f"wrote {args.report}", file=sys.stderr)
    else:
        print(text)
    return 0


def cmd_bench(args) -> int:
    sizes = [float(s) for s in args.sizes.split(",") if s]
    report = bench_mod.run_benchmark(
        sizes,
        args.trials,
        args.workdir,
        night_s=args.night_hours * 3600.0,
    )
    print(bench_mod.format_report(report))
    if args.report:
        Path(args.report).write_text(json.dumps(report, indent=2))
        print(f"wrote {args.report}", file=sys.stderr)
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import build_service
    from .workers import HttpNotifier, ProcessorWorker, SplitterWorker

    cfg = load_config(_config_path(args))
    app, storage, q_split, q_process = build_service(cfg)
    if not args.no_workers:
        notify = HttpNotifier(
            f"http://{cfg.service.listen_host}:{cfg.service.listen_port}",
            cfg.service.internal_secret,
        )
        splitter = SplitterWorker(
            q_split, q_process, storage, notify,
            gap_threshold_s=cfg.gap_threshold_s, lease_s=cfg.queue.lease_s,
        )
        processor = ProcessorWorker(
            q_process, storage, notify,
            scorer=cfg.scorer.to_spec(),
            gray_threshold=cfg.gray_threshold,
            epoch_length_s=cfg.epoch_length_s,
            lease_s=cfg.queue.lease_s,
        )
        for worker in (splitter, processor):
            threading.Thread(target=worker.run_forever, daemon=True).start()
    uvicorn.run(app, host=cfg.service.listen_host, port=cfg.service.listen_port)
    return 0


def cmd_worker(args) -> int:
    from .workers import HttpNotifier, ProcessorWorker, SplitterWorker, Storage
    from .queueing import DurableQueue

    cfg = load_config(_config_path(args))
    storage = Storage(cfg.service.storage_root)
    notify = HttpNotifier(cfg.frontend_url, cfg.service.internal_secret)
    q_process = DurableQueue(cfg.queue.process_log, max_attempts=cfg.queue.max_attempts)
    if args.role == "split":
        q_split = DurableQueue(cfg.queue.split_log, max_attempts=cfg.queue.max_attempts)
        worker = SplitterWorker(
            q_split, q_process, storage, notify,
            gap_threshold_s=cfg.gap_threshold_s, lease_s=cfg.queue.lease_s,
        )
    else:
        worker = ProcessorWorker(
            q_process, storage, notify,
            scorer=cfg.scorer.to_spec(),
            gray_threshold=cfg.gray_threshold,
            epoch_length_s=cfg.epoch_length_s,
            lease_s=cfg.queue.lease_s,
        )
    print(f"{args.role} worker running; ctrl-c to stop", file=sys.stderr)
    worker.run_forever()
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="somnoline",
        description="PSG splitting, scoring, gray-area tagging, and agreement reports",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("split", help="split a multi-night EDF into one file per night")
    p.add_argument("input")
    p.add_argument("--gap", type=float, default=3600.0,
                   help="onset gap in seconds that separates nights")
    p.add_argument("--manifest", help="nights manifest JSON for continuous files")
    p.add_argument("-o", "--output", required=True, help="output directory")
    p.set_defaults(func=cmd_split)

    p = sub.add_parser("score", help="produce a hypnodensity for a one-night EDF")
    p.add_argument("input")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--hypnodensity", help="precomputed hypnodensity CSV to ingest")
    group.add_argument("--baseline", metavar="CHANNEL",
                       help="run the spectral baseline on this channel")
    p.add_argument("--epoch", type=float, default=30.0, help="epoch length in seconds")
    p.add_argument("-o", "--output", help="output CSV (default: stdout)")
    p.set_defaults(func=cmd_score)

    p = sub.add_parser("gray", help="tag gray areas on a hypnodensity CSV")
    p.add_argument("input")
    group = p.add_mutually_exclusive_group()
    group.add_argument("--threshold", type=float, default=DEFAULT_GRAY_THRESHOLD)
    group.add_argument("--fit", action="store_true",
                       help="fit the threshold with the two-component mixture")
    p.add_argument("-o", "--output", help="output CSV (default: stdout)")
    p.set_defaults(func=cmd_gray)

    p = sub.add_parser("kappa", help="agreement report from ratings + layout CSV")
    p.add_argument("ratings", help="directory of per-recording rater CSVs")
    p.add_argument("--layout", required=True, help="assignment layout CSV (X/O cells)")
    p.add_argument("--mask", help="directory of per-recording gray-mask CSVs")
    p.add_argument("--report", help="output JSON path (default: stdout)")
    p.set_defaults(func=cmd_kappa)

    p = sub.add_parser("bench", help="time the splitter and processor stages")
    p.add_argument("--sizes", required=True,
                   help="comma-separated multi-night file sizes in Mo")
    p.add_argument("--trials", type=int, default=3)
    p.add_argument("--night-hours", type=float, default=8.0)
    p.add_argument("--workdir", default="bench_work")
    p.add_argument("--report", help="write the JSON report here")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("serve", help="run the HTTP front end (workers included)")
    p.add_argument("--config")
    p.add_argument("--no-workers", action="store_true",
                   help="serve without in-process workers")
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("worker", help="run one worker loop standalone")
    p.add_argument("role", choices=["split", "process"])
    p.add_argument("--config")
    p.set_defaults(func=cmd_worker)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except SomnolineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except KeyboardInterrupt:
        return 0
    except Exception as exc:  # pragma: no cover - defensive
        print(f"internal error: {exc}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
