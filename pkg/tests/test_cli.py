import csv
import json
import subprocess
import sys
from dataclasses import replace

import numpy as np
import pytest

from flexhedge.cli import EXIT_INFEASIBLE, EXIT_INPUT, EXIT_OK, main
from flexhedge.scenario_io import save_scenario

CAPPED = [9, 10, 11, 12, 13, 18, 19, 20]


def read(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def col(rows, name):
    return np.array([float(r[name]) for r in rows])


@pytest.fixture(scope="module")
def default_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    assert main(["run", "--horizons", "1,6,8", "--out", str(out)]) == EXIT_OK
    return out


def test_run_writes_outputs(default_run):
    names = sorted(p.name for p in default_run.iterdir())
    assert names == ["baseline.csv", "summary.json", "trajectory_H1.csv",
                     "trajectory_H6.csv", "trajectory_H8.csv"]
    summary = json.loads((default_run / "summary.json").read_text(), parse_constant=pytest.fail)
    assert summary["label"] == "calibrated reconstruction"
    for h in ("1", "6", "8"):
        assert summary["horizons"][h]["cap_violated_hours"] == []


def test_run_holds_cap_in_capped_hours(default_run):
    base = col(read(default_run / "baseline.csv"), "lmp_bus3")
    assert [h for h in range(1, 25) if base[h - 1] > 75] == CAPPED
    for h in (1, 6, 8):
        lmp = col(read(default_run / f"trajectory_H{h}.csv"), "lmp_bus3")
        assert np.all(lmp[np.array(CAPPED) - 1] <= 75 + 1e-6)


def test_run_csv_summary(tmp_path):
    assert main(["run", "--horizons", "1,2", "--emit", "csv", "--out", str(tmp_path)]) == EXIT_OK
    rows = read(tmp_path / "summary.csv")
    assert [r["horizon"] for r in rows] == ["1", "2"]
    assert float(rows[0]["forecast_gain"]) == 0


def test_zero_capacity_equals_baseline(tmp_path):
    assert main(["run", "--ess-capacity", "0", "--horizons", "1,6", "--out", str(tmp_path)]) == EXIT_OK
    base = read(tmp_path / "baseline.csv")
    for h in (1, 6):
        traj = read(tmp_path / f"trajectory_H{h}.csv")
        np.testing.assert_allclose(col(traj, "lmp_bus3"), col(base, "lmp_bus3"), atol=1e-9, rtol=0)
        assert np.all(col(traj, "flex") == 0)
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["horizons"]["6"]["saving_vs_baseline"] == pytest.approx(0, abs=1e-9)


def test_unreachable_cap_with_full_unit_is_inert(tmp_path):
    argv = ["run", "--pi-des", "1000", "--ess-soc", "1", "--horizons", "1", "--out", str(tmp_path)]
    with pytest.warns(UserWarning):
        assert main(argv) == EXIT_OK
    traj = read(tmp_path / "trajectory_H1.csv")
    assert np.all(col(traj, "flex") == 0)
    np.testing.assert_allclose(col(traj, "lmp_bus3"), col(read(tmp_path / "baseline.csv"), "lmp_bus3"),
                               atol=1e-6, rtol=0)


def test_unreachable_cap_never_raises_prices(tmp_path):
    # with lookahead the unit still shifts energy between hours, but only to cheaper effect
    with pytest.warns(UserWarning):
        assert main(["run", "--pi-des", "1000", "--out", str(tmp_path)]) == EXIT_OK
    base = col(read(tmp_path / "baseline.csv"), "lmp_bus3")
    for h in (1, 6, 8):
        traj = read(tmp_path / f"trajectory_H{h}.csv")
        assert np.all(col(traj, "lmp_bus3") <= base + 1e-6)
    assert np.all(col(read(tmp_path / "trajectory_H1.csv"), "flex") <= 0)


def test_quantify_bundled(tmp_path):
    assert main(["quantify", "--out", str(tmp_path)]) == EXIT_OK
    flex = col(read(tmp_path / "flex_required.csv"), "flexreq_bus3")
    assert [h for h in range(1, 25) if flex[h - 1] > 1e-6] == CAPPED


def test_quantify_low_cap(tmp_path):
    assert main(["quantify", "--pi-des", "10", "--out", str(tmp_path)]) == EXIT_OK
    assert np.all(col(read(tmp_path / "flex_required.csv"), "flexreq_bus3") > 0)


def test_quantify_high_cap(tmp_path):
    with pytest.warns(UserWarning):
        assert main(["quantify", "--pi-des", "1000", "--out", str(tmp_path)]) == EXIT_OK
    assert np.all(col(read(tmp_path / "flex_required.csv"), "flexreq_bus3") == 0)


def test_capacity_sweep_monotone(tmp_path):
    argv = ["sweep", "--parameter", "ess-capacity", "--grid", "0,0.5,1,2,3,5", "--out", str(tmp_path)]
    assert main(argv) == EXIT_OK
    rows = read(tmp_path / "sweep_ess_capacity.csv")
    violated = col(rows, "cap_violated_hours")
    assert violated[0] == len(CAPPED)
    assert np.all(np.diff(violated) <= 0)


def test_horizon_sweep(tmp_path):
    argv = ["sweep", "--parameter", "horizon", "--grid", "1,6,8", "--out", str(tmp_path)]
    assert main(argv) == EXIT_OK
    cost = dict(zip((int(r["horizon"]) for r in read(tmp_path / "sweep_horizon.csv")),
                    col(read(tmp_path / "sweep_horizon.csv"), "cost_per_mwh")))
    assert cost[6] <= cost[1]
    assert cost[8] <= cost[1]


def test_single_point_sweep(tmp_path):
    argv = ["sweep", "--parameter", "pi-des", "--grid", "80", "--out", str(tmp_path)]
    assert main(argv) == EXIT_OK
    assert len(read(tmp_path / "sweep_pi_des.csv")) == 1


def test_parallel_sweep_matches_serial(tmp_path):
    grid = ["--parameter", "ess-capacity", "--grid", "0,1,2.6"]
    assert main(["sweep", *grid, "--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(["sweep", *grid, "--jobs", "2", "--out", str(tmp_path / "b")]) == EXIT_OK
    name = "sweep_ess_capacity.csv"
    assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_outputs_are_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert main(["run", "--horizons", "1,3", "--out", str(tmp_path / d)]) == EXIT_OK
    for p in (tmp_path / "a").iterdir():
        assert p.read_bytes() == (tmp_path / "b" / p.name).read_bytes()


def test_validate(capsys):
    assert main(["validate"]) == EXIT_OK
    assert "ok" in capsys.readouterr().out


def test_missing_scenario(tmp_path):
    assert main(["validate", "--scenario", str(tmp_path / "none")]) == EXIT_INPUT


def test_corrupt_scenario(tmp_path, bundled):
    path = save_scenario(bundled, tmp_path / "bad")
    (path / "series.csv").write_text("hour,a_trans\n1,x\n")
    assert main(["validate", "--scenario", str(path)]) == EXIT_INPUT


def test_strict_merit_order(tmp_path, bundled):
    cheap = bundled.a_trans.copy()
    cheap[3] = 5.0
    path = save_scenario(replace(bundled, a_trans=cheap), tmp_path / "cheap")
    assert main(["validate", "--scenario", str(path), "--strict"]) == EXIT_INPUT


def test_infeasible_scenario(tmp_path, bundled):
    path = save_scenario(replace(bundled, transmission_capacity=0.0, dist_capacity=0.0), tmp_path / "dark")
    assert main(["run", "--scenario", str(path), "--horizons", "1", "--out", str(tmp_path / "o")]) == EXIT_INFEASIBLE
    assert main(["validate", "--scenario", str(path)]) == EXIT_INFEASIBLE


def test_bad_horizon_grid(tmp_path):
    assert main(["sweep", "--parameter", "horizon", "--grid", "0,1.5", "--out", str(tmp_path)]) == EXIT_INPUT


def test_bad_arguments():
    with pytest.raises(SystemExit):
        main(["run", "--horizons", "0"])
    with pytest.raises(SystemExit):
        main(["sweep", "--parameter", "colour", "--grid", "1"])


def test_module_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "flexhedge", "validate"], capture_output=True, text=True)
    assert res.returncode == 0
    assert "apx_like" in res.stdout
