"""Timing harness for the splitter and processor stages.

Generates multi-night files near the requested sizes, runs each stage the
requested number of trials, and reports mean and sample-sd wall time in
minutes per stage and file size. Absolute numbers are machine-bound; the
stable property is that a larger file never takes less time on the same
machine with the same trial count.
"""
from __future__ import annotations

import time
from pathlib import Path

from .agreement import summarize
from .edf import detect_night_boundaries, read_recording, split_nights, write_recording
from .scoring import ScorerKind, ScorerSpec
from .staging import DEFAULT_EPOCH_LENGTH_S
from .synth import DEFAULT_CHANNEL, channels_for_target_size, synthesize_multi_night
from .workers import process_night_bundles

STAGE_SPLITTER = "splitter"
STAGE_PROCESSOR = "processor"


def _time_splitter(upload_path: Path, out_dir: Path) -> float:
    start = time.perf_counter()
    rec = read_recording(upload_path.read_bytes())
    nights = split_nights(rec, detect_night_boundaries(rec))
    for i, night in enumerate(nights):
        (out_dir / f"night_{i}.edf").write_bytes(write_recording(night))
    return time.perf_counter() - start


def _time_processor(night_path: Path, out_dir: Path, epoch_length_s: float) -> float:
    scorer = ScorerSpec(kind=ScorerKind.BASELINE, channel_label=DEFAULT_CHANNEL)
    start = time.perf_counter()
    bundles = process_night_bundles(
        night_path.read_bytes(), scorer, epoch_length_s=epoch_length_s
    )
    for name, content in bundles.items():
        target = out_dir / name
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_bytes(content)
    return time.perf_counter() - start


def run_benchmark(
    sizes_mo: list[float],
    trials: int,
    workdir: str | Path,
    *,
    nights: int = 3,
    night_s: float = 8 * 3600.0,
    sampling_rate: float = 64.0,
    record_duration_s: float = 10.0,
    epoch_length_s: float = DEFAULT_EPOCH_LENGTH_S,
) -> dict:
    """Table-shaped report: one row per (stage, file size) with mean/sd minutes."""
    workdir = Path(workdir)
    workdir.mkdir(parents=True, exist_ok=True)
    rows = []
    for size_mo in sizes_mo:
        case_dir = workdir / f"size_{size_mo:g}"
        case_dir.mkdir(exist_ok=True)
        n_channels = channels_for_target_size(
            size_mo,
            nights=nights,
            night_s=night_s,
            sampling_rate=sampling_rate,
            record_duration_s=record_duration_s,
        )
        rec = synthesize_multi_night(
            nights=nights,
            night_s=night_s,
            gap_s=16 * 3600.0,
            sampling_rate=sampling_rate,
            n_channels=n_channels,
            record_duration_s=record_duration_s,
            seed=int(size_mo),
        )
        upload_path = case_dir / "upload.edf"
        upload_path.write_bytes(write_recording(rec))
        actual_mo = upload_path.stat().st_size / 1e6

        split_times = []
        for _ in range(trials):
            split_times.append(_time_splitter(upload_path, case_dir))
        split_mean, split_sd = summarize([t / 60.0 for t in split_times])
        rows.append(
            {
                "stage": STAGE_SPLITTER,
                "file_size_mo": round(actual_mo, 3),
                "mean_minutes": split_mean,
                "sd_minutes": split_sd,
            }
        )

        night_path = case_dir / "night_0.edf"
        night_mo = night_path.stat().st_size / 1e6
        process_times = []
        for _ in range(trials):
            process_times.append(
                _time_processor(night_path, case_dir / "bundles", epoch_length_s)
            )
        proc_mean, proc_sd = summarize([t / 60.0 for t in process_times])
        rows.append(
            {
                "stage": STAGE_PROCESSOR,
                "file_size_mo": round(night_mo, 3),
                "mean_minutes": proc_mean,
                "sd_minutes": proc_sd,
            }
        )
    return {"trials": trials, "rows": rows}


def format_report(report: dict) -> str:
    lines = [
        f"{'stage':<10} {'file_size_mo':>12} {'mean_minutes':>14} {'sd_minutes':>12}"
    ]
    for row in report["rows"]:
        lines.append(
            f"{row['stage']:<10} {row['file_size_mo']:>12.3f} "
            f"{row['mean_minutes']:>14.4f} {row['sd_minutes']:>12.4f}"
        )
    return "\n".join(lines)
