import numpy as np
import pytest

from asyncsvrg import cli
from asyncsvrg.data import synthetic_descriptor
from asyncsvrg.metrics import read_metrics
from asyncsvrg.simulate import alternating_schedule, dump_schedule


@pytest.fixture(scope="module")
def libsvm_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "tiny.libsvm"
    assert cli.main(["gen-data", "--n", "120", "--d", "8", "--seed", "5",
                     "--out", str(path)]) == 0
    return path


@pytest.fixture(scope="module")
def synth_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("cli") / "synth.meta"
    path.write_text(synthetic_descriptor(120, 8, 5, 5.0))
    return path


def test_gen_data_output_parses(libsvm_file):
    from asyncsvrg.data import parse_libsvm
    data = parse_libsvm(libsvm_file)
    assert data.n == 120 and data.dim == 8


def test_run_writes_metrics_csv(libsvm_file, tmp_path):
    out = tmp_path / "run.csv"
    rc = cli.main(["run", "--data", str(libsvm_file), "--algorithm", "svrg",
                   "--lam", "0.01", "--epochs", "8", "--seed", "1",
                   "--out", str(out)])
    assert rc == 0
    rows, header = read_metrics(out)
    assert header["algorithm"] == "svrg"
    assert header["deterministic"] == "True"
    assert rows[0].epoch == 0
    assert rows[-1].objective < rows[0].objective


def test_run_is_deterministic_at_one_worker(synth_file, tmp_path):
    outs = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        assert cli.main(["run", "--data", str(synth_file), "--lam", "0.01",
                         "--epochs", "4", "--seed", "3", "--tol", "inf",
                         "--out", str(out)]) == 0
        rows, _ = read_metrics(out)
        outs.append([(r.epoch, r.objective, r.gap) for r in rows])
    assert outs[0] == outs[1]
    assert len(outs[0]) == 5  # tol=inf never stops early


def test_run_hogwild(libsvm_file, tmp_path):
    out = tmp_path / "hog.csv"
    rc = cli.main(["run", "--data", str(libsvm_file), "--algorithm", "hogwild",
                   "--scheme", "lock-free", "--lam", "0.01", "--epochs", "5",
                   "--tol", "inf", "--out", str(out)])
    assert rc == 0
    rows, header = read_metrics(out)
    assert header["algorithm"] == "hogwild"
    assert len(rows) == 6


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_run_divergence_exit_code(libsvm_file, tmp_path, capsys):
    rc = cli.main(["run", "--data", str(libsvm_file), "--algorithm", "svrg",
                   "--eta", "1e4", "--lam", "0.01", "--epochs", "5",
                   "--out", str(tmp_path / "div.csv")])
    assert rc == 3
    assert "divergence" in capsys.readouterr().err


def test_run_bad_dataset_exit_code(tmp_path):
    rc = cli.main(["run", "--data", str(tmp_path / "missing.libsvm"),
                   "--out", str(tmp_path / "x.csv")])
    assert rc == 1


def test_certify_valid_and_invalid(capsys):
    rc = cli.main(["certify", "--scheme", "consistent", "--smoothness", "1.0",
                   "--strong-convexity", "0.01", "--tau", "2",
                   "--updates", "1000000", "--eta", "0.001"])
    out = capsys.readouterr().out
    assert rc == 0 and "valid=true" in out
    rc = cli.main(["certify", "--scheme", "consistent", "--smoothness", "1.0",
                   "--strong-convexity", "0.01", "--tau", "2",
                   "--updates", "100", "--eta", "0.4"])
    out = capsys.readouterr().out
    assert rc == 2 and "valid=false" in out


def test_certify_sweep(capsys):
    rc = cli.main(["certify", "--scheme", "inconsistent", "--smoothness", "1.0",
                   "--strong-convexity", "0.01", "--tau", "0",
                   "--updates", "100000", "--sweep"])
    out = capsys.readouterr().out
    assert rc == 0
    assert "max_certified_step=" in out and "valid=true" in out


def test_simulate_zero_delay_reports_bitwise_match(synth_file, tmp_path, capsys):
    sched_path = tmp_path / "alt.sched"
    dump_schedule(alternating_schedule(240), sched_path)
    out = tmp_path / "sim.csv"
    rc = cli.main(["simulate", "--data", str(synth_file), "--schedule",
                   str(sched_path), "--eta", "0.2", "--lam", "0.01",
                   "--epochs", "2", "--option", "1", "--out", str(out)])
    printed = capsys.readouterr().out
    assert rc == 0
    assert "bitwise pass" in printed
    assert "variance bound" in printed and "0 violations" in printed
    lines = out.read_text().splitlines()
    data_lines = [l for l in lines if not l.startswith("#")]
    assert data_lines[0] == "epoch,step,worker,sample_index,read_stamp,delay"
    assert len(data_lines) == 1 + 2 * 240


def test_compare_emits_curves(synth_file, tmp_path):
    out = tmp_path / "cmp.csv"
    rc = cli.main(["compare", "--data", str(synth_file), "--budget", "12",
                   "--lam", "0.01", "--out", str(out),
                   "--config", "algo=asysvrg;workers=1",
                   "--config", "algo=hogwild;scheme=lock-free"])
    assert rc == 0
    lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    assert lines[0] == "config,epoch,effective_passes,objective,gap"
    configs = {l.split(",", 1)[0] for l in lines[1:]}
    assert configs == {"algo=asysvrg;workers=1", "algo=hogwild;scheme=lock-free"}
    # the pass budget is respected
    for line in lines[1:]:
        assert float(line.split(",")[2]) <= 12.0 + 1e-9


def test_compare_zero_budget_is_header_only(synth_file, tmp_path):
    out = tmp_path / "cmp0.csv"
    rc = cli.main(["compare", "--data", str(synth_file), "--budget", "0",
                   "--lam", "0.01", "--out", str(out),
                   "--config", "algo=asysvrg"])
    assert rc == 0
    lines = [l for l in out.read_text().splitlines() if not l.startswith("#")]
    assert lines == ["config,epoch,effective_passes,objective,gap"]


def test_speedup_table_shape(synth_file, tmp_path):
    out = tmp_path / "speedup.csv"
    rc = cli.main(["speedup", "--data", str(synth_file), "--threads", "1,2",
                   "--lam", "0.01", "--tol", "1e-3", "--seeds", "1",
                   "--epochs", "40", "--out", str(out)])
    assert rc == 0
    text = out.read_text()
    assert "cpu_count=" in text
    lines = [l for l in text.splitlines() if not l.startswith("#")]
    assert lines[0] == "workers,median_seconds,speedup,converged_runs,flag"
    assert len(lines) == 3
    p1 = lines[1].split(",")
    assert p1[0] == "1" and float(p1[2]) == 1.0
