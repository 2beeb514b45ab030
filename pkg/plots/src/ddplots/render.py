"""Render sweep CSVs into per-family panels, one series per merge threshold.

Reads the sweep record schema (header
``family,n,delta,bits,seed,max_error,worst_index,final_nodes,peak_nodes,wall_ms,status``)
and draws, for a chosen metric, one panel per circuit family with the qubit
count on the x axis, one line per delta, and a log-scale y axis.  Zero or
absent error values are clamped to the documented floor 1e-18 so delta=0
runs stay visible on the log scale.

Rendering is a pure function of the CSV contents: fixed figure geometry, no
timestamps, deterministic ordering; re-running produces a byte-identical
image under the same library versions.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

METRICS = ("max_error", "final_nodes", "peak_nodes")

#: Log-axis floor for zero/absent errors (below any representable b=53 error).
ERROR_FLOOR = 1e-18

REQUIRED_COLUMNS = ("family", "n", "delta", "status")


@dataclass(frozen=True)
class PlotSpec:
    csv_path: str
    metric: str
    out_path: str
    family: str | None = None

    def __post_init__(self):
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}, got {self.metric!r}")


@dataclass
class RenderResult:
    """What was drawn; returned for programmatic checks."""

    out_path: str
    panels: list[str] = field(default_factory=list)
    series_per_panel: dict[str, list[str]] = field(default_factory=dict)
    points: int = 0


def _read_rows(spec: PlotSpec) -> list[dict]:
    with open(spec.csv_path, newline="") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in (*REQUIRED_COLUMNS, spec.metric) if c not in header]
        if missing:
            raise ValueError(
                f"CSV {spec.csv_path} lacks column(s) {', '.join(missing)}"
            )
        rows = [row for row in reader if row["status"] == "ok"]
    if spec.family is not None:
        rows = [row for row in rows if row["family"] == spec.family]
    if not rows:
        raise ValueError("no plottable rows (after family/status filtering)")
    return rows


def render(spec: PlotSpec) -> RenderResult:
    """Draw the figure described by the spec and write it to spec.out_path."""
    rows = _read_rows(spec)
    families = sorted({row["family"] for row in rows})
    deltas = sorted({float(row["delta"]) for row in rows})
    result = RenderResult(out_path=spec.out_path, panels=families)

    fig, axes = plt.subplots(
        1, len(families), figsize=(4.0 * len(families), 3.2), squeeze=False, dpi=100
    )
    for ax, family in zip(axes[0], families):
        fam_rows = [row for row in rows if row["family"] == family]
        labels = []
        for delta in deltas:
            series = sorted(
                (int(row["n"]), _metric_value(row, spec.metric))
                for row in fam_rows
                if float(row["delta"]) == delta
            )
            if not series:
                continue
            label = f"delta={delta:g}"
            labels.append(label)
            ax.plot(
                [p[0] for p in series],
                [p[1] for p in series],
                marker="o",
                markersize=3,
                linewidth=1.2,
                label=label,
            )
            result.points += len(series)
        ax.set_yscale("log")
        ax.set_xlabel("qubits n")
        ax.set_ylabel(spec.metric)
        ax.set_title(family)
        ax.legend(fontsize=7)
        result.series_per_panel[family] = labels
    fig.tight_layout()
    fig.savefig(spec.out_path)
    plt.close(fig)
    return result


def _metric_value(row: dict, metric: str) -> float:
    raw = row.get(metric, "")
    try:
        value = float(raw)
    except ValueError:
        value = 0.0
    if metric == "max_error" and not value > 0.0:
        return ERROR_FLOOR
    return value


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="render.py",
        description="render a deltadd sweep CSV into per-family log-scale panels",
    )
    parser.add_argument("--csv", required=True, help="sweep CSV path")
    parser.add_argument("--metric", required=True, choices=METRICS)
    parser.add_argument("--out", required=True, help="output image path (.png)")
    parser.add_argument("--family", default=None, help="restrict to one family")
    args = parser.parse_args(argv)
    try:
        result = render(PlotSpec(args.csv, args.metric, args.out, args.family))
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(f"wrote {result.out_path}: {len(result.panels)} panel(s), "
          f"{result.points} points")
    return 0


if __name__ == "__main__":
    sys.exit(main())
