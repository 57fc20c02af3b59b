"""Agreement report generation from an assignment layout and scoring files.

The layout CSV has one row per recording and one column per technologist;
an ``X`` cell means the technologist scored that recording against the plain
automatic scoring, an ``O`` cell means they used the gray-area-assisted
scoring, and an empty cell means they skipped it.

The ratings directory holds one subdirectory per recording id containing one
hypnogram CSV per rater. Files named after a technologist column belong to
that technologist; every other file is a consensus rater. Each technologist's
agreement is computed from the panel [technologist + consensus raters],
overall and restricted to the recording's gray mask (``<psg_id>.csv`` in the
masks directory), then aggregated per condition as mean and sample sd.
"""
from __future__ import annotations

import csv
import io
from pathlib import Path

from .agreement import build_rating_matrix, fleiss_kappa, kappa_on_mask, summarize
from .errors import SomnolineError
from .gray import gray_mask_from_csv
from .staging import hypnogram_from_csv

WITHOUT_AI = "without_ai"
WITH_AI = "with_ai"
_CELL_CONDITIONS = {"X": WITHOUT_AI, "O": WITH_AI}


class LayoutError(SomnolineError):
    """The assignment layout CSV is malformed."""


def parse_layout(text: str) -> tuple[list[str], list[tuple[str, dict[str, str]]]]:
    """-> (technologist column names, [(psg_id, {tech: condition})])."""
    reader = csv.reader(io.StringIO(text))
    rows = [row for row in reader if row]
    if not rows:
        raise LayoutError("layout CSV is empty")
    header = [cell.strip() for cell in rows[0]]
    if len(header) < 2 or header[0] != "psg_id":
        raise LayoutError("layout header must be psg_id,<tech>,...")
    technologists = header[1:]
    assignments = []
    for row in rows[1:]:
        if len(row) != len(header):
            raise LayoutError(f"layout row has {len(row)} cells, expected {len(header)}")
        cells = {}
        for tech, cell in zip(technologists, row[1:]):
            cell = cell.strip().upper()
            if not cell:
                continue
            if cell not in _CELL_CONDITIONS:
                raise LayoutError(f"layout cell must be X or O, got {cell!r}")
            cells[tech] = _CELL_CONDITIONS[cell]
        assignments.append((row[0].strip(), cells))
    return technologists, assignments


def generate_agreement_report(
    ratings_dir: Path, layout_path: Path, masks_dir: Path | None = None
) -> dict:
    """Per-technologist x condition x (complete, gray-only) kappa summary."""
    ratings_dir = Path(ratings_dir)
    technologists, assignments = parse_layout(Path(layout_path).read_text())
    tech_files = {f"{t}.csv" for t in technologists}

    collected: dict[str, dict[str, dict[str, list[float]]]] = {
        tech: {
            cond: {"complete": [], "gray_only": []} for cond in (WITHOUT_AI, WITH_AI)
        }
        for tech in technologists
    }

    for psg_id, cells in assignments:
        psg_dir = ratings_dir / psg_id
        if not psg_dir.is_dir():
            raise SomnolineError(f"no ratings directory for recording {psg_id!r}")
        consensus = [
            hypnogram_from_csv(path.read_text())
            for path in sorted(psg_dir.glob("*.csv"))
            if path.name not in tech_files
        ]
        if not consensus:
            raise SomnolineError(f"recording {psg_id!r} has no consensus raters")
        mask = None
        if masks_dir is not None:
            mask_path = Path(masks_dir) / f"{psg_id}.csv"
            if mask_path.exists():
                mask, _ = gray_mask_from_csv(mask_path.read_text())

        for tech, condition in cells.items():
            tech_path = psg_dir / f"{tech}.csv"
            if not tech_path.exists():
                raise SomnolineError(
                    f"missing {tech!r} scoring for recording {psg_id!r}"
                )
            panel = [hypnogram_from_csv(tech_path.read_text())] + consensus
            matrix = build_rating_matrix(panel)
            bucket = collected[tech][condition]
            bucket["complete"].append(fleiss_kappa(matrix))
            if mask is not None and mask.gray_count > 0:
                bucket["gray_only"].append(kappa_on_mask(matrix, mask))

    report: dict = {"technologists": {}}
    for tech in technologists:
        per_condition = {}
        for condition in (WITHOUT_AI, WITH_AI):
            per_scope = {}
            for scope in ("complete", "gray_only"):
                values = collected[tech][condition][scope]
                if values:
                    mean, sd = summarize(values)
                    per_scope[scope] = {"mean": mean, "sd": sd, "n": len(values)}
                else:
                    per_scope[scope] = {"mean": None, "sd": None, "n": 0}
            per_condition[condition] = per_scope
        report["technologists"][tech] = per_condition
    return report
