import json
import math

import numpy as np
import pytest

from onebit_mimo.estimators import delta_log_linear, delta_matched
from onebit_mimo.exceptions import ConfigError
from onebit_mimo.harness import (
    CSV_COLUMNS,
    ExperimentSpec,
    TrialError,
    read_csv,
    resolve_deltas,
    run_point,
    run_sweep,
    write_results,
)


def _fields(rec):
    d = dict(rec.__dict__)
    d.pop("wall_time")
    return d


class TestSpec:
    def test_defaults_valid(self):
        ExperimentSpec()

    @pytest.mark.parametrize("change", [
        {"sweep": ()}, {"trials": 0}, {"near_far_db": -1.0}, {"estimator": "magic"},
        {"detector": "ml"}, {"K": 40}, {"tau": 12}, {"rls_lambda": 1.5},
        {"coded": True, "detector": "sic-hard"}, {"detector": None},
        {"delta": -1.0}, {"delta": [0.1, 0.2], "sweep": [0.0]}, {"sweep_axis": "esn0"},
    ])
    def test_invalid(self, change):
        with pytest.raises(ConfigError):
            ExperimentSpec(**change)

    def test_round_trip_dict(self):
        spec = ExperimentSpec(sweep=(0, 5), delta=(0.1, 0.2), estimator="lra-rls")
        assert ExperimentSpec.from_dict(json.loads(json.dumps(spec.to_dict()))) == spec

    def test_unknown_key(self):
        with pytest.raises(ConfigError, match="bogus"):
            ExperimentSpec.from_dict({"bogus": 1})

    def test_ebn0_axis(self):
        spec = ExperimentSpec(sweep=(3.0,), sweep_axis="ebn0", coded=True)
        assert spec.snr_db(3.0) == pytest.approx(3.0)
        uncoded = ExperimentSpec(sweep=(3.0,), sweep_axis="ebn0")
        assert uncoded.snr_db(3.0) == pytest.approx(3.0 + 10 * math.log10(2))

    def test_coded_frame_length(self):
        assert ExperimentSpec(coded=True).frame_data_len == 256


class TestDeltas:
    def test_explicit(self):
        assert resolve_deltas(ExperimentSpec(sweep=(0, 5), delta=0.01)) == [0.01, 0.01]
        assert resolve_deltas(ExperimentSpec(sweep=(0, 5), delta=(0.1, 0.2))) == [0.1, 0.2]

    def test_log_linear(self):
        spec = ExperimentSpec(sweep=(-5, 0, 5, 10, 15))
        d = resolve_deltas(spec)
        assert d == delta_log_linear([-5, 0, 5, 10, 15])
        assert d[0] == pytest.approx(1e-11) and d[-1] == pytest.approx(0.3)
        assert np.all(np.diff(np.log10(d)) > 0)

    def test_matched(self):
        spec = ExperimentSpec(sweep=(0.0,), delta="matched", tau=16)
        assert resolve_deltas(spec) == [delta_matched(spec.noise_variance(0.0), 4.0, 0.94, 16)]


class TestRun:
    def test_noiseless_bypass_zf(self):
        spec = ExperimentSpec(M=16, K=4, sweep=(250.0,), detector="zf", quantize=False, trials=100)
        (rec,) = run_sweep(spec)
        assert rec.value == 0.0 and rec.metric == "ber_uncoded"

    def test_rls_close_to_blmmse(self):
        kw = dict(M=32, K=4, tau=16, sweep=(5.0,), detector=None, trials=300, delta="matched")
        rls = run_point(ExperimentSpec(estimator="lra-rls", **kw), 0)[0].value
        bl = run_point(ExperimentSpec(estimator="blmmse", **kw), 0)[0].value
        assert abs(10 * np.log10(rls / bl)) <= 1.5

    def test_worker_count_invariance(self):
        spec = ExperimentSpec(M=8, K=2, tau=8, sweep=(0, 5), estimator="lra-rls",
                              detector="sic-hard", trials=60, base_seed=3)
        a = [_fields(r) for r in run_sweep(spec, workers=1)]
        b = [_fields(r) for r in run_sweep(spec, workers=2)]
        assert a == b

    def test_seed_changes_values(self):
        kw = dict(M=8, K=2, tau=8, sweep=(0,), estimator="ls", detector=None, trials=30)
        assert run_sweep(ExperimentSpec(base_seed=1, **kw))[0].value != \
            run_sweep(ExperimentSpec(base_seed=2, **kw))[0].value

    def test_point_equals_sweep_entry(self):
        spec = ExperimentSpec(M=8, K=2, tau=8, sweep=(0, 5, 10), detector="mrc", trials=30)
        assert _fields(run_point(spec, 2)[0]) == _fields(run_sweep(spec)[2])
        with pytest.raises(ConfigError):
            run_point(spec, 3)

    def test_record_counts(self):
        spec = ExperimentSpec(M=8, K=2, tau=8, sweep=(0, 5, 10), detector="lra-mmse", trials=10)
        assert len(run_sweep(spec)) == 3
        nf = ExperimentSpec(M=8, K=3, tau=8, sweep=(0, 5, 10), detector="sic-hard",
                            trials=10, near_far_db=6.0)
        recs = run_sweep(nf)
        assert len(recs) == 3 * (1 + 3)
        assert [r.user_index for r in recs[:4]] == [-1, 0, 1, 2]
        for p in range(3):
            agg, users = recs[4 * p], recs[4 * p + 1:4 * p + 4]
            assert agg.value == pytest.approx(np.mean([u.value for u in users]))

    def test_value_ranges(self):
        recs = run_sweep(ExperimentSpec(M=8, K=2, tau=8, sweep=(-5, 5), estimator="lra-rls",
                                        detector="sic-soft", trials=20))
        recs += run_sweep(ExperimentSpec(M=8, K=2, tau=8, sweep=(-5, 5), estimator="blmmse",
                                         detector=None, trials=20))
        for r in recs:
            assert r.value >= 0 and r.stderr >= 0
            if r.metric.startswith("ber"):
                assert r.value <= 1

    def test_ber_monotone(self):
        for det in ("mrc", "zf", "lra-mmse", "sic-hard"):
            recs = run_sweep(ExperimentSpec(M=16, K=4, sweep=(-5, 0, 5, 10), detector=det,
                                            trials=200, data_len=32))
            for lo, hi in zip(recs, recs[1:]):
                slack = 2 * math.hypot(lo.stderr, hi.stderr)
                assert hi.value <= lo.value + slack, det

    def test_coded_run(self):
        spec = ExperimentSpec(M=16, K=2, sweep=(-6.0, 4.0), sweep_axis="ebn0", coded=True,
                              detector="sic-soft", trials=10)
        lo, hi = run_sweep(spec)
        assert lo.metric == "ber_coded" and lo.value > 0 and hi.value == 0

    def test_fail_fast(self, monkeypatch):
        from onebit_mimo import harness
        from onebit_mimo.exceptions import DegenerateCovarianceError

        calls = []

        def boom(*args, **kwargs):
            calls.append(1)
            raise DegenerateCovarianceError("singular")

        monkeypatch.setattr(harness, "detect_mrc", boom)
        with pytest.raises(TrialError, match="point 0, trial 0"):
            run_sweep(ExperimentSpec(sweep=(0, 5), detector="mrc", trials=10))
        assert len(calls) == 1

    def test_progress_callback(self):
        seen = []
        recs = run_sweep(ExperimentSpec(M=8, K=2, tau=8, sweep=(0, 5), detector="mrc", trials=5),
                         progress=seen.append)
        assert seen == recs


class TestOutput:
    @pytest.fixture
    def records(self):
        spec = ExperimentSpec(M=8, K=2, tau=8, sweep=(0, 5), detector="sic-hard",
                              trials=10, near_far_db=3.0)
        return spec, run_sweep(spec)

    def test_csv_round_trip(self, records, tmp_path):
        spec, recs = records
        path = tmp_path / "out.csv"
        write_results(recs, path)
        rows = read_csv(path)
        assert path.read_text().splitlines()[0] == ",".join(CSV_COLUMNS)
        assert len(rows) == len(recs)
        for row, rec in zip(rows, recs):
            assert float(row["point_db"]) == rec.point_db
            assert float(row["value"]) == rec.value
            assert float(row["stderr"]) == rec.stderr
            assert int(row["trials"]) == rec.trials
            assert row["estimator"] == rec.estimator and row["detector"] == rec.detector
            assert (int(row["M"]), int(row["K"]), int(row["tau"])) == (rec.M, rec.K, rec.tau)
            assert bool(int(row["coded"])) == rec.coded
            assert float(row["near_far_db"]) == rec.near_far_db
            assert int(row["user_index"]) == rec.user_index
            assert int(row["seed"]) == rec.seed

    def test_json(self, records, tmp_path):
        spec, recs = records
        path = tmp_path / "out.json"
        write_results(recs, path, "json", specs=[spec])
        doc = json.loads(path.read_text())
        assert doc["version"] and "snr_convention" in doc["metadata"]
        assert ExperimentSpec.from_dict(doc["specs"][0]) == spec
        assert len(doc["records"]) == len(recs)
        assert doc["records"][0]["value"] == recs[0].value

    def test_unwritable(self, records, tmp_path):
        with pytest.raises(OSError):
            write_results(records[1], tmp_path / "missing" / "out.csv")

    def test_bad_format(self, records, tmp_path):
        with pytest.raises(ConfigError):
            write_results(records[1], tmp_path / "x", "xml")
