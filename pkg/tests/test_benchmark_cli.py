import csv
import json

import numpy as np
import pytest

import silfs.benchmark as bench
from silfs.benchmark import ScenarioSpec, run_benchmark, worker_count
from silfs.cli import ingest_csv, parse_scenario, run, write_dataset_csv
from silfs.errors import DataError, InvalidArgumentError
from silfs.simulation import generate_scenario_ab

SMALL_GRIDS = dict(lambda1_grid=[0.1, 1.0], lambda2_grid=[0.01, 0.1])


class TestRunBenchmark:
    def test_separable_single_replication(self):
        res = run_benchmark(ScenarioSpec("A", {"a": 10, "n": 100, "p": 50}), 1,
                            k_grid=[1, 2, 3, 4], **SMALL_GRIDS)
        rep = res.reports["SILFS-l2"]
        assert rep.rand_index == 1.0
        assert rep.k_hat_mean == 2.0 and rep.freq == "0|0"
        assert rep.failures == 0

    def test_seeds_and_methods(self):
        res = run_benchmark(ScenarioSpec("A", {"a": 5, "n": 40, "p": 15}), 2,
                            methods=["SILFS-l2", "S-CAR"], seed0=7, k_grid=[2], **SMALL_GRIDS)
        assert [x.seed for x in res.replications] == [7, 7, 8, 8]
        scar = [x for x in res.replications if x.method == "S-CAR"]
        assert all(x.r == 0 for x in scar)

    def test_failures_are_recorded(self, monkeypatch):
        real = bench.select_model
        calls = {"n": 0}

        def flaky(*args, **kwargs):
            calls["n"] += 1
            if calls["n"] == 1:
                raise FloatingPointError("forced")
            return real(*args, **kwargs)
        monkeypatch.setattr(bench, "select_model", flaky)
        res = run_benchmark(ScenarioSpec("A", {"a": 5, "n": 40, "p": 15}), 2, k_grid=[2],
                            workers=1, **SMALL_GRIDS)
        assert res.reports["SILFS-l2"].failures == 1
        assert res.replications[0].error.startswith("FloatingPointError")
        assert np.isfinite(res.reports["SILFS-l2"].rand_index)

    def test_parallel_matches_serial(self):
        spec = ScenarioSpec("A", {"a": 5, "n": 40, "p": 15})
        a = run_benchmark(spec, 2, k_grid=[1, 2], workers=1, **SMALL_GRIDS)
        b = run_benchmark(spec, 2, k_grid=[1, 2], workers=2, **SMALL_GRIDS)
        strip = [{k: v for k, v in x.to_dict().items() if k != "wall_time_ms"}
                 for x in a.replications]
        assert strip == [{k: v for k, v in x.to_dict().items() if k != "wall_time_ms"}
                         for x in b.replications]

    @pytest.mark.parametrize("kwargs", [dict(reps=0), dict(methods=["FA-PFP"])])
    def test_invalid(self, kwargs):
        args = dict(reps=1, methods=["SILFS-l2"]) | kwargs
        with pytest.raises(InvalidArgumentError):
            run_benchmark(ScenarioSpec("A"), args["reps"], args["methods"])


class TestWorkerCount:
    def test_env(self, monkeypatch):
        monkeypatch.setenv("SILFS_THREADS", "3")
        assert worker_count() == 3

    def test_default(self, monkeypatch):
        monkeypatch.delenv("SILFS_THREADS", raising=False)
        assert worker_count() == 1

    @pytest.mark.parametrize("value", ["zero", "0"])
    def test_invalid(self, monkeypatch, value):
        monkeypatch.setenv("SILFS_THREADS", value)
        with pytest.raises(InvalidArgumentError):
            worker_count()


class TestIngest:
    def test_shape(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("y,x1,x2\n1,2,3\n4,5,6\n7,8,9\n")
        d = ingest_csv(f)
        assert (d.n, d.p) == (3, 2)
        assert np.array_equal(d.design[:, 1], [3, 6, 9])

    def test_nan_cell_located(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("y,x1,x2\n1,NaN,3\n4,5,6\n")
        with pytest.raises(DataError, match=r"row 2, col 'x1'"):
            ingest_csv(f)

    def test_unparseable_cell_located(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("y,x1\n1,2\n4,abc\n")
        with pytest.raises(DataError, match=r"row 3.*x1"):
            ingest_csv(f)

    def test_missing_response_column(self, tmp_path):
        f = tmp_path / "d.csv"
        f.write_text("x0,x1\n1,2\n3,4\n")
        with pytest.raises(DataError, match="'y'"):
            ingest_csv(f)

    def test_round_trip_is_bitwise(self, tmp_path):
        sd = generate_scenario_ab("A", 3, 30, 8, seed=11)
        f = tmp_path / "d.csv"
        write_dataset_csv(f, sd.dataset)
        back = ingest_csv(f)
        assert np.array_equal(back.design, sd.dataset.design)
        assert np.array_equal(back.response, sd.dataset.response)


def test_parse_scenario():
    spec = parse_scenario("A:a=3,n=100,p=50")
    assert spec.kind == "A" and spec.params == {"a": 3, "n": 100, "p": 50}
    with pytest.raises(InvalidArgumentError):
        parse_scenario("A:a")


def simulate(tmp_path, scenario="A:a=5,n=60,p=20", seed=0):
    out = tmp_path / "sim"
    assert run(["simulate", "--scenario", scenario, "--seed", str(seed), "--output", str(out)]) == 0
    return out / f"dataset_seed{seed}.csv"


class TestCli:
    def test_simulate_writes_data_and_truth(self, tmp_path):
        path = simulate(tmp_path)
        truth = json.loads(path.with_name("dataset_seed0_truth.json").read_text())
        assert len(truth["true_labels"]) == 60
        assert ingest_csv(path).p == 20

    def test_fit_labels(self, tmp_path):
        path = simulate(tmp_path)
        out = tmp_path / "fit"
        code = run(["fit", "--input", str(path), "--output", str(out), "--k", "2"])
        assert code in (0, 5)
        with open(out / "labels.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == 60
        assert {int(r["label"]) for r in rows} <= {1, 2}
        fit = json.loads((out / "fit.json").read_text())
        assert len(fit["fit"]["alpha_hat"]) == 60 and "objective_trace" in fit["fit"]

    def test_select(self, tmp_path):
        path = simulate(tmp_path)
        out = tmp_path / "sel"
        code = run(["select", "--input", str(path), "--output", str(out), "--k-grid", "1,2,3",
                    "--lambda1", "0.1,1", "--lambda2", "0.01,0.1"])
        assert code in (0, 5)
        rep = json.loads((out / "selection.json").read_text())
        assert rep["selection"]["k_hat"] in (1, 2, 3)
        assert len(rep["selection"]["gcv_values"]) == 4

    def test_bench_table(self, tmp_path):
        out = tmp_path / "bench"
        code = run(["bench", "--scenario", "A:a=5,n=40,p=15", "--reps", "2", "--output", str(out),
                    "--methods", "SILFS-l2,S-CAR", "--k-grid", "1,2,3",
                    "--lambda1", "0.1,1", "--lambda2", "0.01,0.1"])
        assert code == 0
        with open(out / "bench.csv") as fh:
            rows = list(csv.DictReader(fh))
        assert [r["method"] for r in rows] == ["SILFS-l2", "S-CAR"]
        for col in ("RMSE_alpha", "RMSE_beta", "K_hat_mean", "Freq", "RI", "Sensitivity",
                    "Specificity"):
            assert all(r[col] != "" for r in rows)
        assert "|" in rows[0]["Freq"]

    def test_factors_on_toy(self, tmp_path):
        path = simulate(tmp_path, "toy:rho=0.9,n=100,p=100")
        out = tmp_path / "fac"
        assert run(["factors", "--input", str(path), "--output", str(out), "--format", "json"]) == 0
        rep = json.loads((out / "factors.json").read_text())
        assert rep["explained_variance"][0] > 0.4
        assert rep["r_hat"] >= 1

    def test_rerun_is_byte_identical(self, tmp_path):
        path = simulate(tmp_path)
        for cmd, name in ((["fit", "--k", "2"], "fit.json"), (["factors"], "factors.json")):
            blobs = []
            out = tmp_path / name
            for _ in range(2):
                run(cmd + ["--input", str(path), "--output", str(out)])
                blobs.append((out / name).read_bytes())
            assert blobs[0] == blobs[1]
        first = path.read_bytes()
        assert simulate(tmp_path).read_bytes() == first

    def test_bench_rerun_is_byte_identical(self, tmp_path):
        blobs = []
        out = tmp_path / "b"
        for _ in range(2):
            run(["bench", "--scenario", "A:a=5,n=40,p=15", "--reps", "1", "--output", str(out),
                 "--k-grid", "2", "--lambda1", "1", "--lambda2", "0.05"])
            blobs.append(((out / "bench.csv").read_bytes(),
                          (out / "bench_report.json").read_bytes()))
        assert blobs[0] == blobs[1]

    def test_provenance(self, tmp_path):
        path = simulate(tmp_path)
        out = tmp_path / "fit"
        run(["fit", "--input", str(path), "--output", str(out), "--k", "2", "--seed", "4"])
        prov = json.loads((out / "fit.json").read_text())["provenance"]
        assert prov["config"]["seed"] == 4
        assert "numpy" in prov["versions"] and prov["input_sha256"]

    def test_exit_codes(self, tmp_path, capsys):
        path = simulate(tmp_path)
        assert run(["fit", "--input", str(path), "--output", str(tmp_path / "o")]) == 2
        assert run(["fit", "--input", str(tmp_path / "missing.csv"),
                    "--output", str(tmp_path / "o"), "--k", "2"]) == 3
        bad = tmp_path / "bad.csv"
        bad.write_text("y,x1\n1,inf\n2,3\n")
        assert run(["fit", "--input", str(bad), "--output", str(tmp_path / "o"), "--k", "1"]) == 3
        err = capsys.readouterr().err.strip().splitlines()[-1]
        assert json.loads(err)["error"]["exit_code"] == 3
        code = run(["fit", "--input", str(path), "--output", str(tmp_path / "o"), "--k", "2",
                    "--solver", "l1-admm"])
        assert code in (0, 5)

    def test_non_convergence_exit_code(self, tmp_path, monkeypatch):
        import silfs.cli as cli
        from silfs.objective import SolverConfig
        path = simulate(tmp_path)
        real = SolverConfig

        def capped(**kw):
            return real(**kw, max_outer=1)
        monkeypatch.setattr(cli, "SolverConfig", capped)
        out = tmp_path / "o"
        assert run(["fit", "--input", str(path), "--output", str(out), "--k", "2"]) == 5
        assert (out / "labels.csv").exists()

    def test_threads_env_respected(self, tmp_path, monkeypatch):
        monkeypatch.setenv("SILFS_THREADS", "bogus")
        code = run(["bench", "--scenario", "A:n=40,p=15", "--reps", "1",
                    "--output", str(tmp_path / "b")])
        assert code == 2
