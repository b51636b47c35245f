"""Cost scaling of a dense BEV grid versus the sparse pipeline."""

from __future__ import annotations

import csv
import io
import json
import statistics
import time
from dataclasses import asdict, dataclass, replace
from typing import Sequence

from .config import PipelineConfig
from .pipeline import run_pipeline
from .scene import SceneConfig, generate_scene

CSV_COLUMNS = ("range_m", "dense_cells", "dense_bytes", "sparse_live", "wall_ms")


@dataclass(frozen=True)
class CostReport:
    range_m: float
    dense_cells: int
    dense_bytes: int
    sparse_live: int
    wall_ms: float


def dense_cells(range_m: float, cell_m: float) -> int:
    """Cells of a square BEV grid of half-extent ``range_m``."""
    side = int(round(2.0 * range_m / cell_m))
    return side * side


def dense_bytes(range_m: float, cell_m: float, channels: int, bytes_per_el: int = 4) -> int:
    return dense_cells(range_m, cell_m) * channels * bytes_per_el


def cost_scan(ranges_m: Sequence[float], cell_m: float = 0.2, channels: int = 256,
              template: SceneConfig = SceneConfig(), pipeline: PipelineConfig = PipelineConfig(),
              repeats: int = 5, bytes_per_el: int = 4) -> list:
    """Analytic dense cost and measured sparse cost per range.

    The template scene is regenerated at each range with its object count
    unchanged; ``wall_ms`` is the median pipeline time over ``repeats`` runs.
    """
    reports = []
    for r in ranges_m:
        scene = generate_scene(replace(template, range_m=float(r)))
        times, live = [], 0
        for _ in range(repeats):
            t0 = time.perf_counter()
            run = run_pipeline(scene, pipeline)
            times.append(1e3 * (time.perf_counter() - t0))
            live = run.sparse_live()
        reports.append(CostReport(float(r), dense_cells(r, cell_m),
                                  dense_bytes(r, cell_m, channels, bytes_per_el),
                                  live, statistics.median(times)))
    return reports


def to_csv(reports: Sequence[CostReport]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for rep in reports:
        writer.writerow([repr(rep.range_m), rep.dense_cells, rep.dense_bytes,
                         rep.sparse_live, f"{rep.wall_ms:.3f}"])
    return buf.getvalue()


def to_json(reports: Sequence[CostReport]) -> str:
    return json.dumps({"schema_version": 1, "reports": [asdict(r) for r in reports]}, indent=2)


def to_table(reports: Sequence[CostReport]) -> str:
    lines = [f"{'range_m':>8} {'dense_cells':>12} {'dense_MB':>10} {'sparse_live':>12} {'wall_ms':>9}"]
    for rep in reports:
        lines.append(f"{rep.range_m:8.1f} {rep.dense_cells:12d} {rep.dense_bytes / 2**20:10.1f} "
                     f"{rep.sparse_live:12d} {rep.wall_ms:9.2f}")
    return "\n".join(lines)
