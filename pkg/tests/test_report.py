from __future__ import annotations

import pytest

from thermeval.metrics import METRIC_NAMES, MetricReport, UNDEFINED
from thermeval.plan import CANONICAL_HPC_ORDER
from thermeval.report import (
    AggregateCell,
    AggregateTable,
    METRIC_LABELS,
    ReportError,
    RunResult,
    aggregate,
    best_hpc,
    emit_significance_figure_data,
    emit_table,
    format_cell,
    metric_samples,
    read_results_csv,
    write_results_csv,
)
from thermeval.stats import SampleSet, run_battery


def _metrics(base):
    return MetricReport(*(base + 0.01 * i for i in range(8)))


def _result(run, model="net", hpc="4_L_p", base=0.5, dataset="pond"):
    return RunResult(model=model, hpc=hpc, run=run, dataset=dataset, metrics=_metrics(base))


# -- results csv


def test_results_round_trip():
    results = (
        _result(1, base=0.41),
        _result(2, base=0.52),
        _result(1, hpc="16_l_u", base=0.3),
    )
    assert read_results_csv(write_results_csv(results)) == results


def test_results_round_trip_preserves_floats_exactly():
    r = RunResult(
        model="net",
        hpc="4_L_p",
        run=1,
        dataset="pond",
        metrics=MetricReport(1 / 3, 2 / 7, 0.1, UNDEFINED, 0.9999999999999998, 0.5, 0.25, 1e-17),
    )
    back = read_results_csv(write_results_csv([r]))
    assert back == (r,)


def test_read_results_rejects_wrong_header():
    with pytest.raises(ReportError, match="header"):
        read_results_csv("model,ap\nx,0.5\n")


def test_read_results_rejects_short_row():
    text = write_results_csv([_result(1)])
    broken = text + "2,net,4_L_p\n"
    with pytest.raises(ReportError, match="line 3"):
        read_results_csv(broken)


def test_read_results_rejects_bad_number():
    text = write_results_csv([_result(1)]).replace("0.5", "not-a-number", 1)
    with pytest.raises(ReportError, match="line 2"):
        read_results_csv(text)


def test_read_results_empty_file():
    with pytest.raises(ReportError, match="empty"):
        read_results_csv("")


def test_run_result_requires_tags():
    with pytest.raises(ReportError):
        RunResult(model="", hpc="4_L_p", run=1, dataset="d", metrics=_metrics(0.5))


# -- aggregation


def test_aggregate_mean_and_sample_std():
    results = [_result(i, base=v) for i, v in enumerate((0.50, 0.52, 0.54))]
    table = aggregate(results)
    cell = table.cell("net", "4_L_p", "ap")
    assert cell.n == 3
    assert cell.mean == pytest.approx(0.52)
    # n-1 denominator: var = ((0.02)^2 + 0 + (0.02)^2) / 2 = 0.0004
    assert cell.std == pytest.approx(0.02)


def test_aggregate_single_run_has_zero_std():
    table = aggregate([_result(1)])
    cell = table.cell("net", "4_L_p", "ap")
    assert (cell.n, cell.std) == (1, 0.0)


def test_aggregate_skips_undefined_values():
    m1 = MetricReport(0.5, 0.6, 0.4, UNDEFINED, 0.5, 0.5, UNDEFINED, 0.5)
    m2 = MetricReport(0.7, 0.8, 0.6, 0.2, 0.7, 0.7, 0.3, 0.7)
    results = [
        RunResult(model="net", hpc="4_L_p", run=1, dataset="d", metrics=m1),
        RunResult(model="net", hpc="4_L_p", run=2, dataset="d", metrics=m2),
    ]
    table = aggregate(results)
    assert table.cell("net", "4_L_p", "ap").n == 2
    aps = table.cell("net", "4_L_p", "aps")
    assert (aps.n, aps.mean) == (1, 0.2)


def test_aggregate_rejects_duplicate_run():
    with pytest.raises(ReportError, match="duplicate"):
        aggregate([_result(1), _result(1)])


def test_aggregate_rejects_mixed_datasets():
    with pytest.raises(ReportError, match="mixed"):
        aggregate([_result(1), _result(2, dataset="other")])


def test_aggregate_orders_hpcs_canonically():
    results = [
        _result(1, hpc="16_l_u"),
        _result(1, hpc="4_L_p"),
        _result(1, hpc="16_L_p"),
    ]
    table = aggregate(results)
    assert table.hpcs == ("4_L_p", "16_L_p", "16_l_u")


def test_aggregate_keeps_model_first_seen_order():
    results = [_result(1, model="zeta"), _result(1, model="alpha")]
    assert aggregate(results).models == ("zeta", "alpha")


# -- best combination


def _table_from_means(means_by_hpc, metric="ap", model="net"):
    cells = {
        (model, hpc, metric): AggregateCell(mean=m, std=0.01, n=25)
        for hpc, m in means_by_hpc.items()
    }
    hpcs = tuple(h for h in CANONICAL_HPC_ORDER if h in means_by_hpc)
    return AggregateTable(dataset="d", models=(model,), hpcs=hpcs, cells=cells)


def test_best_hpc_single_winner():
    table = _table_from_means({"4_L_p": 0.581, "4_L_u": 0.548, "16_L_p": 0.579})
    assert best_hpc(table, "ap") == ("4_L_p",)


def test_best_hpc_lists_all_ties_in_column_order():
    table = _table_from_means({"16_L_p": 0.908, "4_L_p": 0.908, "4_l_p": 0.871})
    assert best_hpc(table, "ap") == ("4_L_p", "16_L_p")


def test_best_hpc_requires_model_for_multi_model_table():
    results = [_result(1, model="a"), _result(1, model="b")]
    table = aggregate(results)
    with pytest.raises(ReportError, match="name one"):
        best_hpc(table, "ap")
    assert best_hpc(table, "ap", model="a") == ("4_L_p",)


def test_best_hpc_unknown_metric():
    with pytest.raises(ReportError):
        best_hpc(_table_from_means({"4_L_p": 0.5}), "accuracy")


# -- cell formatting


def test_format_cell_period_and_comma():
    cell = AggregateCell(mean=0.581, std=0.023, n=25)
    assert format_cell(cell) == "58.1±2.3"
    assert format_cell(cell, decimal="comma") == "58,1±2,3"


def test_format_cell_rounds_half_up():
    # 0.58250 -> 58.25 -> 58.3 (not banker's 58.2)
    assert format_cell(AggregateCell(mean=0.5825, std=0.00050, n=25)) == "58.3±0.1"
    assert format_cell(AggregateCell(mean=0.58249, std=0.00049, n=25)) == "58.2±0.0"


def test_format_cell_survives_float_representation():
    # 0.615 stores as 0.61499...; repr-based rounding still sees 61.5
    assert format_cell(AggregateCell(mean=0.615, std=0.0, n=25)) == "61.5±0.0"


def test_format_cell_rejects_unknown_mode():
    with pytest.raises(ReportError):
        format_cell(AggregateCell(0.5, 0.1, 5), decimal="space")


# -- table rendering


def _two_hpc_results():
    out = []
    for run in (1, 2):
        out.append(_result(run, hpc="4_L_p", base=0.50 + 0.01 * run))
        out.append(_result(run, hpc="4_L_u", base=0.40 + 0.01 * run))
    return out


def test_emit_table_markdown_bolds_winner_row_wise():
    table = aggregate(_two_hpc_results())
    text = emit_table(table, style="markdown")
    lines = text.splitlines()
    assert lines[0] == "| Metric | 4_L_p | 4_L_u |"
    ap_row = next(l for l in lines if l.startswith("| AP |"))
    assert "**51.5±0.7**" in ap_row
    assert "**41.5" not in ap_row


def test_emit_table_marks_ties_bold_together():
    cells = {}
    for hpc in ("4_L_p", "16_L_p"):
        for metric in METRIC_NAMES:
            cells[("net", hpc, metric)] = AggregateCell(mean=0.9, std=0.01, n=5)
    table = AggregateTable(dataset="d", models=("net",), hpcs=("4_L_p", "16_L_p"), cells=cells)
    text = emit_table(table, style="markdown")
    ap_row = next(l for l in text.splitlines() if l.startswith("| AP |"))
    assert ap_row.count("**90.0±1.0**") == 2


def test_emit_table_csv_comma_mode_uses_semicolons():
    table = aggregate(_two_hpc_results())
    text = emit_table(table, style="csv", decimal="comma")
    lines = text.splitlines()
    assert lines[0] == "Metric;4_L_p;4_L_u"
    assert lines[1].startswith("AP;51,5±0,7;41,5±0,7")


def test_emit_table_csv_period_mode_uses_commas():
    table = aggregate(_two_hpc_results())
    lines = emit_table(table, style="csv").splitlines()
    assert lines[0] == "Metric,4_L_p,4_L_u"
    assert lines[1].startswith("AP,51.5±0.7")


def test_emit_table_blank_cell_for_missing_stratum():
    m = MetricReport(0.5, 0.6, 0.4, UNDEFINED, 0.5, 0.5, UNDEFINED, 0.5)
    table = aggregate([RunResult(model="net", hpc="4_L_p", run=1, dataset="d", metrics=m)])
    lines = emit_table(table, style="csv").splitlines()
    aps_row = next(l for l in lines if l.startswith("APs,"))
    assert aps_row == "APs,"


def test_emit_table_requires_model_choice():
    results = [_result(1, model="a"), _result(1, model="b")]
    table = aggregate(results)
    with pytest.raises(ReportError, match="name one"):
        emit_table(table)
    assert "| Metric |" in emit_table(table, model="a")


def test_emit_table_rejects_unknown_style():
    with pytest.raises(ReportError):
        emit_table(aggregate([_result(1)]), style="html")


def test_metric_labels_cover_all_metrics():
    assert tuple(METRIC_LABELS) == METRIC_NAMES


# -- battery wiring


def _battery_results():
    # two models, two combinations; "good" clearly beats "bad"
    out = []
    for run in range(1, 9):
        for model, base in (("good", 0.70), ("bad", 0.40)):
            wiggle = 0.003 * run + (0.001 if run % 3 == 0 else 0.0)
            out.append(_result(run, model=model, hpc="4_L_p", base=base + wiggle))
            out.append(_result(run, model=model, hpc="4_L_u", base=base - 0.05 + wiggle))
    return out


def test_metric_samples_take_best_hpc_per_model():
    samples = metric_samples(_battery_results(), "ap")
    by_label = {s.label: s for s in samples}
    assert set(by_label) == {"good", "bad"}
    assert len(by_label["good"].values) == 8
    # values come from the winning combination, in run order
    assert by_label["good"].values[0] == pytest.approx(0.703)
    assert by_label["good"].values == tuple(sorted(by_label["good"].values))


def test_figure_data_lists_metrics_models_and_letters():
    results = _battery_results()
    table = aggregate(results)
    stats = {m: run_battery(metric_samples(results, m)) for m in ("ap", "ar")}
    text = emit_significance_figure_data(stats, table)
    lines = text.splitlines()
    assert lines[0] == "metric,model,mean,std,letters"
    body = [l.split(",") for l in lines[1:]]
    assert [row[0] for row in body] == ["ap", "ap", "ar", "ar"]
    assert [row[1] for row in body] == ["good", "bad", "good", "bad"]
    letters = {(row[0], row[1]): row[4] for row in body}
    assert letters[("ap", "good")] != letters[("ap", "bad")]


def test_figure_data_requires_letters_for_every_model():
    results = _battery_results()
    table = aggregate(results)
    samples = metric_samples(results, "ap")
    renamed = [samples[0], SampleSet("stranger", samples[1].values)]
    stats = {"ap": run_battery(renamed)}
    with pytest.raises(ReportError, match="letters"):
        emit_significance_figure_data(stats, table)
