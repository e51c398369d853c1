import csv
import json

import numpy as np
import pytest

from klshell.bench import (
    MAX_CPS,
    SweepConfig,
    build_problem,
    case_setup,
    convergence_sweep,
    run_case,
    series,
    supported,
    write_reports,
)
from klshell.cli import main
from klshell.errors import InvalidArgumentError, UnsupportedError
from klshell.linsolve import read_matrix_market


def test_run_case_report_fields():
    rep = run_case("scordelis-lo", "m", 2, cps=9)
    assert rep.case == "scordelis-lo" and rep.cps == 9 and rep.patches == 1
    assert rep.rel_error == pytest.approx(abs(rep.probe - rep.reference) / abs(rep.reference))
    assert rep.dofs["total"] == sum(v for k, v in rep.dofs.items() if k != "total")
    assert rep.residual <= 1e-10


def test_run_case_deterministic():
    a = run_case("scordelis-lo", "mn", 2, cps=7, patches=4)
    b = run_case("scordelis-lo", "mn", 2, cps=7, patches=4)
    assert a.probe == b.probe


def test_strip_report_carries_slenderness():
    rep = run_case("strip", "m", 2, slenderness=10.0)
    assert rep.cps is None and rep.slenderness == 10.0


def test_build_problem_rejects_bad_cps():
    setup = case_setup("scordelis-lo")
    with pytest.raises(InvalidArgumentError):
        build_problem(setup, "m", 3, 3)
    with pytest.raises(InvalidArgumentError):
        build_problem(setup, "m", 2, MAX_CPS + 1)
    with pytest.raises(InvalidArgumentError):
        build_problem(setup, "m", 2, None)


def test_supported_layouts():
    supported("scordelis-lo", 1)
    supported("scordelis-lo", 4)
    with pytest.raises(UnsupportedError):
        supported("strip", 4)
    with pytest.raises(UnsupportedError):
        supported("hemisphere", 1)


def test_sweep_config_validation(tmp_path):
    cfg = SweepConfig.from_json({"case": "strip", "degrees": [2]})
    assert cfg.formulations == ["m"]
    with pytest.raises(InvalidArgumentError):
        SweepConfig.from_json({"case": "strip", "colour": 1})
    with pytest.raises(InvalidArgumentError):
        SweepConfig.from_json({"case": "strip", "degrees": []})
    with pytest.raises(ValueError):
        SweepConfig.from_json({"case": "teapot"})
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"case": "scordelis-lo", "cps": [7, 5]}))
    assert SweepConfig.from_json(p).cps == [7, 5]


def test_sweep_order_and_series(tmp_path):
    cfg = SweepConfig(case="scordelis-lo", formulations=["m"], degrees=[3, 2], cps=[7, 5])
    seen = []
    reps = convergence_sweep(cfg, progress=seen.append)
    assert [(r.degree, r.cps) for r in reps] == [(2, 5), (2, 7), (3, 5), (3, 7)]
    assert len(seen) == 4
    s = series(reps)
    assert list(s) == ["m/p2", "m/p3"]
    assert s["m/p2"][0] == (5, reps[0].probe / reps[0].reference)
    data = json.loads(write_reports(tmp_path / "r.json", reps).read_text())
    assert len(data["runs"]) == 4 and "m/p3" in data["series"]


def test_cli_run_outputs(tmp_path, capsys):
    out, vtk, mtx = tmp_path / "r.json", tmp_path / "r.vtk", tmp_path / "k.mtx"
    code = main(["run", "--case", "scordelis-lo", "--cps", "6", "--out", str(out), "--vtk", str(vtk), "--dump-system", str(mtx)])
    assert code == 0
    rep = json.loads(out.read_text())
    assert rep["case"] == "scordelis-lo" and rep["rel_error"] >= 0
    assert vtk.read_text().startswith("# vtk DataFile")
    assert read_matrix_market(mtx).shape[0] == rep["dofs"]["total"]
    assert json.loads(capsys.readouterr().out)["probe"] == rep["probe"]


def test_cli_sweep_csv(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"case": "strip", "formulations": ["m", "mn"], "degrees": [2], "slenderness": [10, 100]}))
    out, table = tmp_path / "s.json", tmp_path / "s.csv"
    assert main(["sweep", "--config", str(cfg), "--out", str(out), "--csv", str(table)]) == 0
    with table.open() as fh:
        rows = list(csv.reader(fh))
    assert rows[0][-1] == "probe" and len(rows) == 5
    assert len(json.loads(out.read_text())["runs"]) == 4


@pytest.mark.parametrize(
    "argv",
    [
        ["run", "--case", "scordelis-lo", "--cps", "61"],
        ["run", "--case", "strip", "--patches", "4"],
        ["run", "--case", "scordelis-lo", "--cps", "2", "--degree", "2"],
        ["sweep", "--config", "/nonexistent/cfg.json"],
    ],
)
def test_cli_errors_exit_2(argv, capsys):
    assert main(argv) == 2
    assert capsys.readouterr().err


def test_cli_unknown_case_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["run", "--case", "teapot"])
    assert exc.value.code == 2


def test_probe_ratio_roof_coarse():
    # coarse roof already within a few percent of the reference
    rep = run_case("scordelis-lo", "m", 2, cps=13)
    assert np.isclose(rep.probe / rep.reference, 1.0, atol=0.05)


def _dump_roof(tmp_path, layout):
    from klshell.geometry import benchmark_geometry

    surf = benchmark_geometry("scordelis-lo", layout)
    path = tmp_path / f"roof-{layout}.json"
    path.write_text(json.dumps([p.to_json() for p in surf.patches]))
    return path


def test_cli_custom_geometry_reproduces_case(tmp_path, capsys):
    geo = _dump_roof(tmp_path, "single")
    assert main(["run", "--case", "scordelis-lo", "--cps", "7", "--geometry", str(geo)]) == 0
    custom = json.loads(capsys.readouterr().out)
    assert custom["probe"] == run_case("scordelis-lo", "m", 2, cps=7).probe


def test_cli_custom_geometry_patch_count_mismatch(tmp_path, capsys):
    geo = _dump_roof(tmp_path, "four")
    assert main(["run", "--case", "scordelis-lo", "--cps", "7", "--patches", "1", "--geometry", str(geo)]) == 2
    assert "patch" in capsys.readouterr().err
