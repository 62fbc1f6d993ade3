import json
import shutil

import numpy as np
import pytest

from volume_intervals.errors import OutputError, StageError
from volume_intervals.report import ARTIFACTS, MANIFEST_FILE, PARTIAL_MARKER, REPORT_FILE, run_full_report, write_json
from volume_intervals.settings import InstrumentInput, RunConfig

TABLE_FIELDS = ("x_min", "delta", "delta_se", "c", "ks", "p_ks", "ksw", "p_ksw", "w2",
                "decision_ks", "decision_ksw", "decision_cvm")


def make_config(csv, out_dir, **overrides):
    values = dict(inputs=(InstrumentInput(str(csv), "mkt"),), n_boot=30, seed=1, out_dir=str(out_dir), threads=1,
                  trace_trigger=3.0, trace_horizon=60)
    values.update(overrides)
    return RunConfig(**values)


def bundle_bytes(out_dir):
    return {str(p.relative_to(out_dir)): p.read_bytes() for p in sorted(out_dir.rglob("*")) if p.is_file()}


def test_full_report_bundle(tmp_path, market_csv):
    out = tmp_path / "bundle"
    rows = run_full_report(make_config(market_csv, out))
    assert len(rows) == 1
    assert not (out / PARTIAL_MARKER).exists()
    for name in ARTIFACTS:
        assert (out / "mkt" / name).is_file(), name

    table = json.loads((out / REPORT_FILE).read_text())
    assert len(table) == 1
    row = table[0]
    for key in TABLE_FIELDS:
        assert key in row
    assert row["delta"] > 1
    assert 0 <= row["p_ks"] <= 1
    assert (row["p_ks"] * 30) == pytest.approx(round(row["p_ks"] * 30))
    assert all(np.isfinite(v) for v in row.values() if isinstance(v, float))

    manifest = json.loads((out / MANIFEST_FILE).read_text())
    assert manifest["seed"] == 1
    assert manifest["inputs"][0]["file"] == market_csv.name
    assert set(manifest["artifacts"]) == {REPORT_FILE} | {f"mkt/{name}" for name in ARTIFACTS}

    profile_lines = (out / "mkt" / "profile.tsv").read_text().splitlines()
    assert profile_lines[0] == "slot\ttime\ta"
    assert len(profile_lines) == 241


def test_bundle_is_reproducible_across_thread_counts(tmp_path, market_csv):
    first = tmp_path / "first"
    second = tmp_path / "second"
    run_full_report(make_config(market_csv, first, threads=1))
    run_full_report(make_config(market_csv, second, threads=2))
    assert bundle_bytes(first) == bundle_bytes(second)


@pytest.mark.slow
def test_two_instruments_give_two_rows(tmp_path, market_csv):
    other = tmp_path / "other.csv"
    shutil.copy(market_csv, other)
    config = make_config(market_csv, tmp_path / "out", threads=2,
                         inputs=(InstrumentInput(str(market_csv), "a"), InstrumentInput(str(other), "b")))
    rows = run_full_report(config)
    assert [row["instrument"] for row in rows] == ["a", "b"]
    assert rows[0]["delta"] == rows[1]["delta"]
    assert len(json.loads((tmp_path / "out" / REPORT_FILE).read_text())) == 2


def test_failed_stage_leaves_partial_marker(tmp_path, market_csv):
    out = tmp_path / "failed"
    with pytest.raises(StageError) as info:
        run_full_report(make_config(market_csv, out, q_list=(2.0, 500.0)))
    assert info.value.stage == "intervals"
    assert info.value.exit_code == 3
    assert "intervals" in (out / PARTIAL_MARKER).read_text()
    assert (out / "mkt" / "profile.tsv").is_file()


def test_json_rejects_non_finite(tmp_path):
    with pytest.raises(OutputError):
        write_json(tmp_path / "x.json", {"value": float("nan")})


def test_numeric_failure_is_tagged_with_its_stage(tmp_path, market_csv, monkeypatch):
    def broken(*args, **kwargs):
        raise ValueError("fit range covers fewer than two scales")

    monkeypatch.setattr("volume_intervals.report.interval_memory_report", broken)
    out = tmp_path / "numeric"
    with pytest.raises(StageError) as info:
        run_full_report(make_config(market_csv, out))
    assert info.value.stage == "memory"
    assert info.value.exit_code == 3
    assert (out / PARTIAL_MARKER).read_text().startswith("failed in stage memory")


def test_unexpected_failure_updates_marker(tmp_path, market_csv, monkeypatch):
    def broken(*args, **kwargs):
        raise KeyError("missing column")

    monkeypatch.setattr("volume_intervals.report.interval_memory_report", broken)
    out = tmp_path / "unexpected"
    with pytest.raises(KeyError):
        run_full_report(make_config(market_csv, out))
    assert (out / PARTIAL_MARKER).read_text().startswith("failed in stage unknown")
