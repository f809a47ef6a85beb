"""Aggregation and presentation of per-run metric results: mean/std
tables per model and combination, best-combination selection with ties,
markdown/CSV rendering with period or comma decimals, and the flat data
file behind the significance figures.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Mapping, Sequence

import numpy as np

from .metrics import METRIC_NAMES, MetricReport, UNDEFINED
from .plan import CANONICAL_HPC_ORDER
from .stats import SampleSet, StatReport

__all__ = [
    "ReportError",
    "RunResult",
    "AggregateCell",
    "AggregateTable",
    "aggregate",
    "best_hpc",
    "emit_table",
    "emit_significance_figure_data",
    "metric_samples",
    "read_results_csv",
    "write_results_csv",
    "METRIC_LABELS",
]

METRIC_LABELS: Mapping[str, str] = {
    "ap": "AP",
    "ap50": "AP@50",
    "ap75": "AP@75",
    "aps": "APs",
    "apm": "APm",
    "ar": "AR",
    "ars": "ARs",
    "arm": "ARm",
}

_CSV_HEADER = ("run", "model", "hpc", "dataset") + METRIC_NAMES


class ReportError(ValueError):
    """Raised for inconsistent result collections or rendering requests."""


@dataclass(frozen=True)
class RunResult:
    """One evaluated run of one model under one combination."""

    model: str
    hpc: str
    run: int
    dataset: str
    metrics: MetricReport

    def __post_init__(self) -> None:
        if not self.model or not self.hpc or not self.dataset:
            raise ReportError("model, hpc, and dataset tags must be non-empty")


def write_results_csv(results: Sequence[RunResult]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(_CSV_HEADER)
    for r in results:
        row = [r.run, r.model, r.hpc, r.dataset]
        row.extend(repr(getattr(r.metrics, name)) for name in METRIC_NAMES)
        writer.writerow(row)
    return buf.getvalue()


def read_results_csv(text: str) -> tuple[RunResult, ...]:
    reader = csv.reader(io.StringIO(text))
    try:
        header = tuple(next(reader))
    except StopIteration:
        raise ReportError("empty results file") from None
    if header != _CSV_HEADER:
        raise ReportError(f"unexpected results header {header!r}")
    out = []
    for ln, row in enumerate(reader, start=2):
        if not row:
            continue
        if len(row) != len(_CSV_HEADER):
            raise ReportError(f"line {ln}: expected {len(_CSV_HEADER)} fields, got {len(row)}")
        try:
            metrics = MetricReport(**{
                name: float(row[4 + i]) for i, name in enumerate(METRIC_NAMES)
            })
            out.append(
                RunResult(
                    model=row[1],
                    hpc=row[2],
                    run=int(row[0]),
                    dataset=row[3],
                    metrics=metrics,
                )
            )
        except (ValueError, TypeError) as exc:
            raise ReportError(f"line {ln}: {exc}") from None
    return tuple(out)


@dataclass(frozen=True)
class AggregateCell:
    """Sample mean and standard deviation (n-1 denominator) over runs."""

    mean: float
    std: float
    n: int


def _is_defined(value: float) -> bool:
    return value != UNDEFINED


def _hpc_sort_key(name: str):
    try:
        return (0, CANONICAL_HPC_ORDER.index(name))
    except ValueError:
        return (1, name)


@dataclass(frozen=True)
class AggregateTable:
    """(model, hpc, metric) -> AggregateCell for one dataset tag."""

    dataset: str
    models: tuple[str, ...]
    hpcs: tuple[str, ...]
    cells: Mapping[tuple[str, str, str], AggregateCell]

    def cell(self, model: str, hpc: str, metric: str) -> AggregateCell:
        try:
            return self.cells[(model, hpc, metric)]
        except KeyError:
            raise ReportError(f"no aggregate cell for ({model!r}, {hpc!r}, {metric!r})") from None

    def has_cell(self, model: str, hpc: str, metric: str) -> bool:
        return (model, hpc, metric) in self.cells


def aggregate(results: Sequence[RunResult]) -> AggregateTable:
    """Collapse runs into mean/std cells.

    All results must carry the same dataset tag, and no (model, hpc, run)
    may repeat.  Undefined stratum values are left out of their cell; a
    single contributing run yields std 0 with n = 1.
    """
    if not results:
        raise ReportError("no results to aggregate")
    datasets = {r.dataset for r in results}
    if len(datasets) > 1:
        raise ReportError(f"mixed dataset tags {sorted(datasets)}")
    seen_runs = set()
    models: list[str] = []
    hpcs: set[str] = set()
    by_cell: dict[tuple[str, str, str], list[float]] = {}
    for r in results:
        key = (r.model, r.hpc, r.run)
        if key in seen_runs:
            raise ReportError(f"duplicate run {key!r}")
        seen_runs.add(key)
        if r.model not in models:
            models.append(r.model)
        hpcs.add(r.hpc)
        for name in METRIC_NAMES:
            v = getattr(r.metrics, name)
            if _is_defined(v):
                by_cell.setdefault((r.model, r.hpc, name), []).append(v)

    cells = {}
    for key, vals in by_cell.items():
        arr = np.asarray(vals, dtype=np.float64)
        std = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
        cells[key] = AggregateCell(mean=float(arr.mean()), std=std, n=arr.size)
    return AggregateTable(
        dataset=results[0].dataset,
        models=tuple(models),
        hpcs=tuple(sorted(hpcs, key=_hpc_sort_key)),
        cells=cells,
    )


def best_hpc(table: AggregateTable, metric: str, model: str | None = None) -> tuple[str, ...]:
    """Combinations with the highest mean for a metric; ties all listed.

    The table must hold exactly one model unless one is named.
    """
    if metric not in METRIC_NAMES:
        raise ReportError(f"unknown metric {metric!r}")
    if model is None:
        if len(table.models) != 1:
            raise ReportError(
                f"table holds models {table.models}; name one to pick a best combination"
            )
        model = table.models[0]
    elif model not in table.models:
        raise ReportError(f"unknown model {model!r}")
    candidates = [h for h in table.hpcs if table.has_cell(model, h, metric)]
    if not candidates:
        raise ReportError(f"no defined {metric!r} cells for model {model!r}")
    best = max(table.cell(model, h, metric).mean for h in candidates)
    return tuple(h for h in candidates if table.cell(model, h, metric).mean == best)


def _round1(value: float) -> Decimal:
    # round-half-up at one decimal on the exact decimal expansion
    return (Decimal(repr(value)) * 100).quantize(Decimal("0.1"), rounding=ROUND_HALF_UP)


def format_cell(cell: AggregateCell, decimal: str = "period") -> str:
    """Render mean and std as percentages: ``58.1±2.3`` (or comma mode)."""
    text = f"{_round1(cell.mean)}±{_round1(cell.std)}"
    if decimal == "comma":
        return text.replace(".", ",")
    if decimal != "period":
        raise ReportError(f"decimal must be 'period' or 'comma', got {decimal!r}")
    return text


def emit_table(
    table: AggregateTable,
    style: str = "markdown",
    decimal: str = "period",
    model: str | None = None,
) -> str:
    """Render one model's metric-by-combination table.

    Rows are the eight metrics, columns the combinations in canonical
    order.  In markdown the best cell of each row (every tie) is bold;
    CSV output uses a semicolon delimiter in comma mode so cells stay
    unquoted.
    """
    if style not in ("markdown", "csv"):
        raise ReportError(f"style must be 'markdown' or 'csv', got {style!r}")
    if model is None:
        if len(table.models) != 1:
            raise ReportError(
                f"table holds models {table.models}; name one to render"
            )
        model = table.models[0]
    elif model not in table.models:
        raise ReportError(f"unknown model {model!r}")

    rows: list[list[str]] = []
    for metric in METRIC_NAMES:
        row = [METRIC_LABELS[metric]]
        try:
            winners = set(best_hpc(table, metric, model))
        except ReportError:
            winners = set()
        for hpc in table.hpcs:
            if not table.has_cell(model, hpc, metric):
                row.append("")
                continue
            text = format_cell(table.cell(model, hpc, metric), decimal)
            if style == "markdown" and hpc in winners:
                text = f"**{text}**"
            row.append(text)
        rows.append(row)

    header = ["Metric", *table.hpcs]
    if style == "markdown":
        lines = [
            "| " + " | ".join(header) + " |",
            "| " + " | ".join("---" for _ in header) + " |",
        ]
        lines.extend("| " + " | ".join(row) + " |" for row in rows)
        return "\n".join(lines) + "\n"

    buf = io.StringIO()
    delimiter = ";" if decimal == "comma" else ","
    writer = csv.writer(buf, delimiter=delimiter, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def metric_samples(results: Sequence[RunResult], metric: str) -> list[SampleSet]:
    """Per model, the run values of its best combination for a metric.

    The best combination is picked by mean (first of any tie in canonical
    column order); values follow run order.  This is the grouping the
    significance battery consumes.
    """
    table = aggregate(results)
    out = []
    for model in table.models:
        hpc = best_hpc(table, metric, model)[0]
        runs = sorted(
            (r for r in results if r.model == model and r.hpc == hpc),
            key=lambda r: r.run,
        )
        values = [
            getattr(r.metrics, metric) for r in runs if _is_defined(getattr(r.metrics, metric))
        ]
        out.append(SampleSet(label=model, values=tuple(values)))
    return out


def emit_significance_figure_data(
    stats_by_metric: Mapping[str, StatReport],
    table: AggregateTable,
) -> str:
    """Flat CSV behind the letter figures: metric, model, mean, std, letters.

    Means and stds come from each model's best combination for the
    metric; letters from the matching battery report.  Every listed
    metric must supply letters for every model.
    """
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("metric", "model", "mean", "std", "letters"))
    for metric in METRIC_NAMES:
        if metric not in stats_by_metric:
            continue
        stat = stats_by_metric[metric]
        for model in table.models:
            if model not in stat.letters:
                raise ReportError(f"no letters for model {model!r} on metric {metric!r}")
            hpc = best_hpc(table, metric, model)[0]
            cell = table.cell(model, hpc, metric)
            writer.writerow((metric, model, repr(cell.mean), repr(cell.std), stat.letters[model]))
    return buf.getvalue()
