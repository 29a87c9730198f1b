"""Benchmark report rendering: delimited tables plus figures.

The bench command collects per-size rows for each algorithm; this module
writes them as CSV and renders matplotlib figures (explored traces or
classes, and wall time, against instance size) next to the CSV.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional


@dataclass
class BenchRow:
    suite: str
    size: int
    algo: str
    classes: Optional[int]
    traces: Optional[int]
    time_ms: Optional[float]
    complete: bool

    def count_for_plot(self) -> Optional[int]:
        # The data-centric runs are compared by classes, enumerative ones
        # by explored traces.
        if self.algo.startswith("dc"):
            return self.classes
        return self.traces


FIELDS = ["suite", "size", "algo", "classes", "traces", "time_ms", "complete"]


def format_table(rows: list[BenchRow]) -> str:
    header = f"{'suite':<12} {'n':>3} {'algo':>9} {'classes':>8} {'traces':>9} {'time_ms':>9} {'ok':>3}"
    lines = [header, "-" * len(header)]
    for r in rows:
        classes = r.classes if r.classes is not None else "-"
        traces = r.traces if r.traces is not None else "-"
        ms = f"{r.time_ms:.1f}" if r.time_ms is not None else "-"
        ok = "y" if r.complete else "-"
        lines.append(
            f"{r.suite:<12} {r.size:>3} {r.algo:>9} {classes:>8} {traces:>9} {ms:>9} {ok:>3}"
        )
    return "\n".join(lines)


def write_csv(rows: list[BenchRow], path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(FIELDS)
        for r in rows:
            writer.writerow(
                [r.suite, r.size, r.algo, r.classes, r.traces,
                 None if r.time_ms is None else round(r.time_ms, 3), r.complete]
            )


def render_figures(rows: list[BenchRow], out_dir: Path, suite: str) -> list[Path]:
    """One figure for explored counts, one for wall time, log-scale y."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    by_algo: dict[str, list[BenchRow]] = {}
    for r in rows:
        if r.suite == suite:
            by_algo.setdefault(r.algo, []).append(r)
    written: list[Path] = []

    def plot(value_of, ylabel: str, stem: str) -> None:
        fig, ax = plt.subplots(figsize=(5.2, 3.4))
        for algo, series in sorted(by_algo.items()):
            pts = [
                (r.size, value_of(r))
                for r in sorted(series, key=lambda r: r.size)
                if value_of(r)
            ]
            if not pts:
                continue
            ax.plot(
                [p[0] for p in pts],
                [p[1] for p in pts],
                marker="o",
                label=algo,
            )
        ax.set_yscale("log")
        ax.set_xlabel("instance size n")
        ax.set_ylabel(ylabel)
        ax.set_title(suite)
        ax.legend()
        ax.grid(True, which="both", alpha=0.3)
        fig.tight_layout()
        path = out_dir / f"bench_{suite}_{stem}.png"
        fig.savefig(path, dpi=150)
        plt.close(fig)
        written.append(path)

    plot(BenchRow.count_for_plot, "explored classes / traces", "counts")
    plot(lambda r: r.time_ms, "wall time (ms)", "time")
    return written


def write_report(rows: list[BenchRow], out_dir: Path) -> list[Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    csv_path = out_dir / "bench.csv"
    write_csv(rows, csv_path)
    written.append(csv_path)
    for suite in sorted({r.suite for r in rows}):
        written.extend(render_figures(rows, out_dir, suite))
    return written
