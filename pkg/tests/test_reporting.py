import csv
import json

import pytest

from graphforget import assemble_report
from graphforget.reporting import (
    append_sweep_row,
    render_report_figure,
    render_trace_figure,
    write_history_csv,
    write_report_csv,
    write_report_json,
    write_timing_csv,
    write_trace_csv,
)
from graphforget.unlearning import UnlearnTrace


@pytest.fixture
def trace():
    t = UnlearnTrace()
    for i in range(5):
        t.loss.append(1.0 / (i + 1))
        t.loss_r.append(0.4 / (i + 1))
        t.loss_f.append(0.6 / (i + 1))
        t.kl_info_bound.append(0.5 / (i + 1))
        t.seconds.append(0.01 * (i + 1))
    return t


@pytest.fixture
def report():
    return assemble_report(
        dataset="sbm", arch="gcn", strategy="1", locality="in", ratio=0.025,
        seed=3, auc_retain=0.96, auc_forget=0.51, mi_ratio=1.2,
        unlearn_seconds=1.5, flops_forward=1234,
    )


def read_csv(path):
    with open(path) as fh:
        return list(csv.reader(fh))


def test_trace_csv_excludes_timing(tmp_path, trace):
    path = tmp_path / "trace.csv"
    write_trace_csv(path, trace)
    rows = read_csv(path)
    assert rows[0] == ["epoch", "loss", "loss_r", "loss_f", "kl_info_bound"]
    assert len(rows) == 6
    assert float(rows[1][1]) == 1.0


def test_timing_csv_contains_stages_and_epochs(tmp_path, trace):
    path = tmp_path / "timing.csv"
    write_timing_csv(path, {"train_gold": 2.0, "unlearn": 0.5}, trace)
    rows = read_csv(path)
    assert rows[0] == ["stage", "seconds"]
    stages = [r[0] for r in rows[1:]]
    assert "train_gold" in stages and "unlearn_epoch_0" in stages


def test_history_csv_header(tmp_path):
    path = tmp_path / "history.csv"
    write_history_csv(path, [(0, 0.7, 0.5), (1, 0.6, 0.62)])
    rows = read_csv(path)
    assert rows[0] == ["epoch", "train_loss", "val_auc"]
    assert len(rows) == 3


def test_report_csv_header_fields(tmp_path, report):
    path = tmp_path / "report.csv"
    write_report_csv(path, report)
    rows = read_csv(path)
    assert rows[0] == ["dataset", "arch", "strategy", "locality", "ratio", "seed",
                       "auc_retain", "auc_forget", "mi_ratio", "unlearn_seconds",
                       "flops_forward"]
    assert rows[1][0] == "sbm"
    assert float(rows[1][9]) == 1.5


def test_report_json_deterministic_and_timing_free(tmp_path, report):
    p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
    write_report_json(p1, report, {"gold": {"auc_retain": 0.97}}, {"split": 1})
    write_report_json(p2, report, {"gold": {"auc_retain": 0.97}}, {"split": 1})
    assert p1.read_bytes() == p2.read_bytes()
    doc = json.loads(p1.read_text())
    assert "unlearn_seconds" not in doc
    assert doc["baselines"]["gold"]["auc_retain"] == 0.97
    assert doc["seeds"]["split"] == 1


def test_sweep_rows_append_and_record_errors(tmp_path, report):
    path = tmp_path / "sweep.csv"
    append_sweep_row(path, report.json_dict(include_timing=True))
    append_sweep_row(path, {"dataset": "sbm", "seed": 4}, error="stage 'train-source' failed")
    rows = read_csv(path)
    assert rows[0][-1] == "error"
    assert rows[1][-1] == ""
    assert "train-source" in rows[2][-1]
    assert rows[2][6] == ""  # metrics empty on failure


def test_figures_render_png(tmp_path, trace, report):
    t_path = tmp_path / "trace.png"
    render_trace_figure(trace, t_path)
    assert t_path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    r_path = tmp_path / "report.png"
    render_report_figure(report, {"gold": {"auc_retain": 0.97, "auc_forget": 0.5}},
                         {"unlearn": 0.5}, r_path)
    assert r_path.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_trace_figure_deterministic(tmp_path, trace):
    p1, p2 = tmp_path / "a.png", tmp_path / "b.png"
    render_trace_figure(trace, p1)
    render_trace_figure(trace, p2)
    assert p1.read_bytes() == p2.read_bytes()
