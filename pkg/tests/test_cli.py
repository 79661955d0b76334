import csv
import json

import pytest

from cossiga.cli import ExperimentConfig, main
from cossiga.geometry import save_patch, unit_square

SMALL = ["--case", "polygauss2d", "-L", "3", "-s", "5", "-m", "40"]


def read(path):
    return path.read_bytes()


def test_dict_info(capsys):
    assert main(["dict-info", "-p", "2", "-L", "5", "--l0", "1", "--case", "gauss2d"]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert (rep["N_dof"], rep["N_dict"], rep["R"], rep["N_test"]) == (1024, 1364, 48, 2304)


def test_cossiga_solution_is_byte_identical(tmp_path):
    for name in ("a", "b"):
        assert main(["solve", *SMALL, "--seed", "4", "--out", str(tmp_path / name)]) == 0
    assert read(tmp_path / "a" / "solution.csv") == read(tmp_path / "b" / "solution.csv")
    assert read(tmp_path / "a" / "runs.csv") == read(tmp_path / "b" / "runs.csv")


def test_pg_bs_reports_full_dictionary(tmp_path):
    assert main(["solve", "--method", "pg-bs", *SMALL, "--out", str(tmp_path)]) == 0
    row = next(csv.DictReader(open(tmp_path / "runs.csv")))
    assert row["n_comp"] == "84" and row["m"] == ""


def test_dump_matrices(tmp_path):
    assert main(["solve", *SMALL, "--out", str(tmp_path), "--dump-matrices"]) == 0
    assert (tmp_path / "A.mtx").read_text().startswith("%%MatrixMarket matrix array real general")
    tau = list(csv.reader(open(tmp_path / "tau.csv")))
    assert tau[0] == ["i", "q"] and len(tau) == 41


def test_config_round_trip(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"case": "gauss2d", "L": 3, "C": 0.05, "D": {"3": 4.0}, "lambda": 1.5}))
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o1")]) == 0
    eff = json.loads((tmp_path / "o1" / "config.json").read_text())
    assert eff["lambda"] == 1.5 and eff["D"] == {"3": 4.0}
    assert main(["solve", "--config", str(tmp_path / "o1" / "config.json"), "--out", str(tmp_path / "o2")]) == 0
    again = json.loads((tmp_path / "o2" / "config.json").read_text())
    for d in (eff, again):
        d.pop("metadata")
        d.pop("output_dir")
    assert eff == again
    loaded = ExperimentConfig.from_dict(again)
    assert ExperimentConfig.from_dict(loaded.to_dict()) == loaded


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"case": "gauss2d", "L": 3, "s": 3, "m": 20, "seed": 1}))
    assert main(["solve", "--config", str(cfg), "--seed", "9", "--out", str(tmp_path / "o")]) == 0
    assert json.loads((tmp_path / "o" / "config.json").read_text())["seed"] == 9


def test_missing_geometry_is_an_error(tmp_path, capsys):
    assert main(["solve", *SMALL, "--geometry", str(tmp_path / "none.json"), "--out", str(tmp_path)]) != 0
    assert "geometry" in capsys.readouterr().err


def test_geometry_file(tmp_path):
    save_patch(unit_square(), tmp_path / "sq.json")
    args = ["solve", "--case", "sine_mode", "-L", "3", "--method", "pg-omp", "-s", "3"]
    assert main(args + ["--geometry", str(tmp_path / "sq.json"), "--out", str(tmp_path)]) == 0


def test_bad_config_rejected(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"case": "gauss2d", "colour": "red"}))
    assert main(["dict-info", "--config", str(cfg)]) != 0
    cfg.write_text(json.dumps({"case": "gauss2d", "n_runs": 0}))
    assert main(["dict-info", "--config", str(cfg)]) != 0


def test_model_constants_required(tmp_path):
    assert main(["solve", "--case", "gauss2d", "-L", "3", "--out", str(tmp_path)]) != 0


def test_calibrate_c(tmp_path):
    assert main(["calibrate-c", "--case", "polygauss2d", "-L", "3", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "calibration_c.json").read_text())
    assert rep["C"] == rep["s_star"] / rep["N_dof"]
    rows = list(csv.reader(open(tmp_path / "calibration_c.csv")))
    assert rows[0] == ["s", "s_over_N_dof", "h1_rel_err_pg_omp", "target"]


def test_calibrate_d_and_converge(tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"case": "gauss2d", "L": 3, "s_values": [2, 3], "m_grid": [4, 8, 16, 32],
                               "rows": "full"}))
    assert main(["calibrate-d", "--config", str(cfg), "--runs", "3", "--out", str(tmp_path / "d")]) == 0
    assert json.loads((tmp_path / "d" / "calibration_d.json").read_text())["D"] >= 1
    assert main(["converge", "--case", "gauss2d", "--levels", "2", "3", "-C", "0.05", "-D", "4", "--runs", "3",
                 "--jobs", "2", "--out", str(tmp_path / "c")]) == 0
    runs = list(csv.DictReader(open(tmp_path / "c" / "runs.csv")))
    assert len(runs) == 2 * (2 + 3)
    summary = list(csv.DictReader(open(tmp_path / "c" / "summary.csv")))
    assert [r["L"] for r in summary] == ["2", "3"]
    assert all(float(r["p2.7"]) <= float(r["p50"]) <= float(r["p99.3"]) for r in summary)


@pytest.mark.parametrize("fig,m,pct", [("fig4", 76, 7.4), ("fig5", 304, 29.7)])
def test_reproduce_realization_rates(tmp_path, fig, m, pct):
    assert main(["reproduce", fig, "--runs", "1", "--rows", "full", "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / f"{fig}.json").read_text())
    assert rep["m"] == m and rep["N_dof"] == 1024 and rep["subsampling_rate_pct"] == pct


def test_reproduce_fig3(tmp_path):
    assert main(["reproduce", "fig3", "-L", "3", "--out", str(tmp_path)]) == 0
    rows = list(csv.reader(open(tmp_path / "density.csv")))
    assert rows[0] == ["q", "r1", "r2", "nu", "pi"] and len(rows) == 12**2 + 1
