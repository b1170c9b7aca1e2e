import csv
import io
import json

import pytest

from mrsim import cli, verify
from mrsim.core import load_workload


def run(argv, capsys):
    try:
        code = cli.main(argv)
    except SystemExit as exc:
        code = exc.code
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def workload(tmp_path, capsys):
    path = tmp_path / "w.json"
    code, _, _ = run(["gen", "--kind", "zipf", "--n", "600", "--keys", "50", "--seed", "2", "-o", str(path)], capsys)
    assert code == 0
    return path


def _rows(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_gen_uniform(tmp_path, capsys):
    path = tmp_path / "u.json"
    code, out, _ = run(["gen", "--kind", "uniform", "--n", "100", "--seed", "1", "-o", str(path)], capsys)
    assert code == 0 and "w_hat=1" in out
    (step,) = load_workload(path)
    assert len(step.elements) == 100


@pytest.mark.parametrize(
    "argv",
    [
        ["gen", "--kind", "uniform", "-o", "x.json"],
        ["gen", "--kind", "nope", "--n", "3", "-o", "x.json"],
        ["run", "--p", "2"],
        ["sweep", "--kind", "uniform", "--n", "10", "--p", ""],
        ["sweep", "--kind", "uniform", "--n", "10", "--p", "2,x"],
        ["occupancy", "--b", "3"],
        ["frobnicate"],
        [],
    ],
)
def test_usage_errors(argv, capsys):
    assert run(argv, capsys)[0] == 1


def test_run_single_pe_has_no_comm(workload, capsys):
    code, out, _ = run(["run", "--workload", str(workload), "--scheduler", "bsp", "--p", "1"], capsys)
    assert code == 0
    (row,) = _rows(out)
    assert row["bottleneck_comm"] == "0"


def test_run_is_deterministic(workload, capsys, tmp_path):
    argv = ["run", "--workload", str(workload), "--scheduler", "steal", "--shuffle", "prefix", "--p", "4", "--seed", "3"]
    first = run(argv, capsys)[1]
    assert first == run(argv, capsys)[1]
    out = tmp_path / "r.csv"
    run(argv + ["-o", str(out)], capsys)
    assert out.read_text() == first


def test_run_with_strikes(workload, capsys):
    code, out, _ = run(
        ["run", "--workload", str(workload), "--scheduler", "steal", "--strike", "2,known", "--p", "8"], capsys
    )
    assert code == 0
    (row,) = _rows(out)
    assert row["scheduler"] == "steal-strikes"


@pytest.mark.parametrize("strike", ["1", "2,maybe", "x", "2,known,3"])
def test_bad_strike_flag(workload, capsys, strike):
    argv = ["run", "--workload", str(workload), "--scheduler", "steal", "--strike", strike, "--p", "2"]
    assert run(argv, capsys)[0] == 1


def test_missing_workload_file(tmp_path, capsys):
    assert run(["run", "--workload", str(tmp_path / "none.json"), "--p", "2"], capsys)[0] == 1


def test_engine_diagnostic_exit_code(workload, capsys):
    argv = ["run", "--workload", str(workload), "--scheduler", "steal", "--p", "8", "--max-events", "10"]
    code, _, err = run(argv, capsys)
    assert code == 2 and "diagnostic" in err


def test_seed_from_environment(workload, capsys, monkeypatch):
    argv = ["run", "--workload", str(workload), "--scheduler", "steal", "--p", "4"]
    monkeypatch.setenv("MRSIM_SEED", "17")
    (row,) = _rows(run(argv, capsys)[1])
    assert row["seed"] == "17"
    monkeypatch.setenv("MRSIM_SEED", "zebra")
    assert run(argv, capsys)[0] == 1


def test_sweep_rows_summary_and_plot(tmp_path, capsys):
    csv_path, summary, svg = tmp_path / "s.csv", tmp_path / "s.json", tmp_path / "s.svg"
    argv = [
        "sweep", "--kind", "uniform", "--n", "2000", "--p", "2,4,8", "--seeds", "2",
        "--schedulers", "bsp,steal", "-o", str(csv_path), "--summary", str(summary), "--plot", str(svg),
    ]  # fmt: skip
    code, _, err = run(argv, capsys)
    assert code == 0
    rows = _rows(csv_path.read_text())
    assert len(rows) == 3 * 2 * 2
    assert sum(r["scheduler"] == "bsp" for r in rows) == 6
    fitted = json.loads(summary.read_text())
    assert set(fitted) == {f"{s}/prefix/off:{b}" for s in ("bsp", "steal") for b in ("work", "comm", "output")}
    assert "fitted C" in err
    assert svg.read_text().lstrip().startswith("<?xml")


def test_sweep_work_constant_stable_under_doubling(tmp_path, capsys):
    fitted = []
    for n in (20_000, 40_000):
        summary = tmp_path / f"{n}.json"
        argv = ["sweep", "--kind", "uniform", "--n", str(n), "--p", "16", "--seeds", "3",
                "--schedulers", "bsp", "--shuffle", "hash", "-o", str(tmp_path / "x.csv"), "--summary", str(summary)]  # fmt: skip
        assert run(argv, capsys)[0] == 0
        fitted.append(json.loads(summary.read_text())["bsp/hash/off:work"])
    assert abs(fitted[1] - fitted[0]) / fitted[0] < 0.15


def test_sweep_from_workload_file(workload, capsys):
    code, out, _ = run(["sweep", "--workload", str(workload), "--p", "2,4", "--seeds", "1", "--schedulers", "bsp"], capsys)
    assert code == 0 and len(_rows(out)) == 2


def test_sweep_needs_a_workload(capsys):
    assert run(["sweep", "--p", "2"], capsys)[0] == 1


def test_verify_pass_and_unknown(capsys):
    code, out, _ = run(["verify", "--suite", "lemma-remap", "--instances", "20"], capsys)
    assert code == 0 and out.count("PASS") == 4
    assert run(["verify", "--suite", "nonsense"], capsys)[0] == 1


def test_verify_failure_exit_code(capsys, monkeypatch):
    monkeypatch.setitem(
        verify.SUITES,
        "broken",
        lambda instances=1, seed=0: [verify.PropertyResult("always false", False, "by construction")],
    )
    code, out, _ = run(["verify", "--suite", "broken"], capsys)
    assert code == 3 and "FAIL broken: always false" in out


def test_occupancy_command(capsys):
    code, out, _ = run(["occupancy", "--b", "3", "--p", "3"], capsys)
    assert code == 0 and "17/9" in out
    code, out, _ = run(["occupancy", "--b", "2", "--p", "2", "--mc", "--trials", "1000"], capsys)
    assert code == 0 and out.startswith("mc ")
    assert run(["occupancy", "--b", "2", "--p", "0"], capsys)[0] == 1
