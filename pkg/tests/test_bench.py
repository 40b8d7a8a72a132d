import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from scusum import InvalidArgumentError
from scusum.bench import (CSV_COLUMNS, expand_settings, load_config, report_csv, run_benchmark,
                          score, write_report)

SMALL = {
    "name": "small",
    "root_seed": 7,
    "replicates": 3,
    "defaults": {"rows": 40, "cols": 40, "k": 4, "m": 2, "mu": 2.0},
    "grid": {"detector": ["scusum", "bh", "fdr_l"]},
}


def test_score_examples():
    truth = np.zeros((4, 4), dtype=bool)
    truth[:2] = True
    assert score(truth, truth).as_tuple() == (0.0, 0.0, 0.0)
    assert score(np.zeros_like(truth), truth).as_tuple() == (1.0, 0.0, 0.0)
    assert score(~truth, truth).as_tuple() == (1.0, 1.0, 1.0)


def test_score_shape_mismatch():
    with pytest.raises(InvalidArgumentError):
        score(np.zeros((3, 3), bool), np.zeros((3, 4), bool))


@settings(max_examples=200, deadline=None)
@given(arrays(bool, (6, 7)), arrays(bool, (6, 7)))
def test_score_identity(mask, truth):
    met = score(mask, truth)
    assert 0 <= met.fdr <= 1 and 0 <= met.false_negative <= 1 and 0 <= met.false_positive <= 1
    assert met.fdr * mask.sum() == pytest.approx(met.false_positive * (~truth).sum())


def test_expand_settings_order_and_defaults():
    cfg = {"defaults": {"k": 3}, "settings": [{"detector": "bh"}], "grid": {"mu": [1, 2]}}
    s = expand_settings(cfg)
    assert [x["detector"] for x in s] == ["bh", "scusum", "scusum"]
    assert [x["mu"] for x in s] == [1.0, 1, 2]
    assert all(x["k"] == 3 and x["alpha"] == 0.05 for x in s)


@pytest.mark.parametrize("cfg", [{"bogus": 1}, {"settings": [{"detector": "lis"}]},
                                 {"settings": [{"kk": 5}]}])
def test_expand_settings_rejects(cfg):
    with pytest.raises(InvalidArgumentError):
        expand_settings(cfg)


def test_zero_replicates_gives_empty_report():
    out = run_benchmark({**SMALL, "replicates": 0})
    assert out["report"]["rows"] == []
    assert report_csv(out["report"]).strip() == ",".join(CSV_COLUMNS)


def test_empty_settings():
    out = run_benchmark({"replicates": 5})
    assert out["report"]["rows"] == []


def test_benchmark_deterministic_across_workers():
    a = run_benchmark(SMALL, workers=1)["report"]
    b = run_benchmark(SMALL, workers=4)["report"]
    assert json.dumps(a, sort_keys=True) == json.dumps(b, sort_keys=True)


def test_benchmark_rows_and_common_noise():
    rep = run_benchmark(SMALL, workers=2)["report"]
    assert [r["label"] for r in rep["rows"]] == ["SCUSUM", "BH-FDR", "FDR_L-style (indicative)"]
    for row in rep["rows"]:
        per = row["per_replicate"]
        assert len(per) == 3
        assert row["fdr"] == pytest.approx(np.mean([p["fdr"] for p in per]))
        assert row["false_negative_se"] == pytest.approx(
            np.std([p["false_negative"] for p in per], ddof=1) / np.sqrt(3))
    # BH and FDR_L see the same noise, so an equal-signal config gives equal signal count
    assert len({r["signal_count"] for r in rep["rows"]}) == 1


def test_csv_layout(tmp_path):
    out = run_benchmark(SMALL, workers=1)
    paths = write_report(out, tmp_path)
    assert [p.name for p in paths] == ["report.json", "table.csv", "timing.json"]
    rows = list(csv.DictReader(io.StringIO(paths[1].read_text())))
    assert list(rows[0]) == CSV_COLUMNS and len(rows) == 3
    assert float(rows[0]["fdr"]) == out["report"]["rows"][0]["fdr"]
    assert "seconds" not in paths[0].read_text()


def test_load_config_errors(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(InvalidArgumentError):
        load_config(bad)
    bad.write_text("[1, 2]")
    with pytest.raises(InvalidArgumentError):
        load_config(bad)


def test_shipped_configs_expand():
    from pathlib import Path
    for p in sorted((Path(__file__).parents[1] / "configs").glob("*.json")):
        assert expand_settings(load_config(p)), p.name
