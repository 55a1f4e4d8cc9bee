import csv
import io
import json
import subprocess
import sys

import pytest

from hglmreserve import Triangle
from hglmreserve.cli import dumps, main
from hglmreserve.triangle import to_long_csv, to_wide_csv


def run(argv):
    out = io.StringIO()
    status = main(argv, stdout=out)
    return status, out.getvalue()


@pytest.fixture
def tri_csv(tmp_path, tri5):
    path = tmp_path / "tri.csv"
    path.write_text(to_long_csv(tri5))
    return path


def test_reserve_wm_total(wm_path):
    status, text = run(["reserve", "--input", str(wm_path), "--model", "glm", "--p", "1"])
    assert status == 0
    doc = json.loads(text)
    assert doc["reserve"]["total"] == pytest.approx(6_047_044, rel=5e-4)
    assert [r["origin"] for r in doc["reserve"]["per_origin"]] == list(range(1, 10))
    assert doc["phi"] == pytest.approx(14714, rel=0.01)
    assert doc["manifest"]["model"] == "glm"


def test_reserve_csv_output(tri_csv, tri5):
    status, text = run(["reserve", "--input", str(tri_csv), "--output-format", "csv"])
    assert status == 0
    rows = list(csv.reader(io.StringIO(text)))
    assert rows[0] == ["origin", "reserve"]
    assert [r[0] for r in rows[1:]] == [str(i) for i in range(1, tri5.size)] + ["total"]


def test_wide_input(tmp_path, tri5):
    wide = tmp_path / "wide.csv"
    wide.write_text(to_wide_csv(tri5))
    long = tmp_path / "long.csv"
    long.write_text(to_long_csv(tri5))
    a = json.loads(run(["reserve", "--input", str(wide), "--format", "wide"])[1])
    b = json.loads(run(["reserve", "--input", str(long)])[1])
    assert a["reserve"] == b["reserve"]


def test_fit_summary_hglm(tri_csv, tri5):
    status, text = run(["fit", "--input", str(tri_csv), "--model", "hglm", "--fix-phi-u", "0.05"])
    assert status == 0
    fit = json.loads(text)["fit"]
    assert fit["model"] == "hglm" and fit["converged"] is True
    assert len(fit["random_effects"]) == tri5.size
    assert fit["phi_u"] == 0.05
    assert fit["coefficients"]["origin"] is None


def test_fit_summary_glm(tri_csv, tri5):
    fit = json.loads(run(["fit", "--input", str(tri_csv)])[1])["fit"]
    assert fit["random_effects"] is None and fit["phi_u"] is None
    assert len(fit["coefficients"]["origin"]) == tri5.size
    assert fit["coefficients"]["origin"][0] == 0


def test_bootstrap_is_reproducible(tri_csv, tmp_path):
    outs = []
    for k in range(2):
        out = tmp_path / f"boot{k}.json"
        status, _ = run(["bootstrap", "--input", str(tri_csv), "--boot", "10", "--seed", "7", "--output", str(out)])
        assert status == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]


def test_bootstrap_threads(tri_csv, tmp_path):
    docs = []
    for k in (1, 3):
        out = tmp_path / f"t{k}.json"
        dump = tmp_path / f"t{k}.rep.csv"
        args = ["bootstrap", "--input", str(tri_csv), "--boot", "12", "--seed", "3", "--threads", str(k)]
        assert run(args + ["--output", str(out), "--dump-replicates", str(dump)])[0] == 0
        doc = json.loads(out.read_text())
        assert doc["manifest"].pop("threads") == k
        docs.append((doc, dump.read_bytes(), (tmp_path / f"t{k}.plot.csv").read_bytes()))
    assert docs[0] == docs[1]


def test_bootstrap_document(tri_csv, tri5, tmp_path):
    plot = tmp_path / "fig.csv"
    dump = tmp_path / "reps.csv"
    args = ["bootstrap", "--input", str(tri_csv), "--boot", "20", "--seed", "1"]
    status, text = run(args + ["--plot-data", str(plot), "--dump-replicates", str(dump)])
    assert status == 0
    doc = json.loads(text)
    assert list(doc) == ["manifest", "base", "replicates", "failures", "degraded", "rmsep", "quantiles"]
    assert doc["manifest"]["seed"] == 1 and doc["manifest"]["B"] == 20
    assert doc["quantiles"]["probs"] == [0.5, 0.75, 0.9, 0.95]
    assert len(doc["rmsep"]["per_origin"]) == tri5.n

    rows = list(csv.reader(io.StringIO(plot.read_text())))
    assert rows[0] == ["origin", "stat", "value"]
    assert {r[1] for r in rows[1:]} == {"rmsep", "q50", "q75", "q90", "q95"}
    assert {r[0] for r in rows[1:]} == {str(i) for i in range(1, tri5.size)} | {"total"}
    assert len(rows) == 1 + 5 * tri5.size
    total_rmsep = [float(r[2]) for r in rows if r[:2] == ["total", "rmsep"]]
    assert total_rmsep == [doc["rmsep"]["total"]]

    reps = list(csv.reader(io.StringIO(dump.read_text())))
    assert reps[0] == ["b", "origin", "predicted_sum", "simulated_sum"]
    assert len(reps) == 1 + 20 * (tri5.size + 1)


def test_seed_is_required(tri_csv):
    assert run(["bootstrap", "--input", str(tri_csv), "--boot", "5"])[0] == 1


def test_missing_cell(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("origin,dev,value\n0,0,100\n0,1,50\n")
    status, _ = run(["fit", "--input", str(bad)])
    assert status == 1
    assert "IncompleteTriangle" in capsys.readouterr().err


def test_unknown_flag(tri_csv, capsys):
    status, _ = run(["fit", "--input", str(tri_csv), "--frobnicate"])
    assert status == 1
    assert "usage" in capsys.readouterr().err


def test_missing_file(tmp_path, capsys):
    path = tmp_path / "nowhere.csv"
    status, _ = run(["reserve", "--input", str(path)])
    assert status == 1
    assert str(path) in capsys.readouterr().err


def test_invalid_overrides(tmp_path, capsys):
    path = tmp_path / "neg.csv"
    path.write_text(to_long_csv(Triangle.from_rows([[10.0, 5.0, 3.0], [12.0, 4.0], [9.0]])))
    status, _ = run(["reserve", "--input", str(path), "--p", "1.5", "--fix-phi", "-1"])
    assert status == 1
    status, _ = run(["reserve", "--input", str(path), "--fix-phi-u", "0.1"])
    assert status == 1
    assert "hglm" in capsys.readouterr().err


def test_degraded_bootstrap(tmp_path, capsys):
    path = tmp_path / "fragile.csv"
    path.write_text(to_long_csv(Triangle.from_rows([[100, 5, 80, 1], [3, 90, 2], [95, 4], [2]])))
    out = tmp_path / "out.json"
    args = ["bootstrap", "--input", str(path), "--boot", "40", "--seed", "4", "--max-redraws", "0"]
    status, _ = run(args + ["--output", str(out)])
    assert status == 3
    assert "TooManyFailures" in capsys.readouterr().err
    if out.exists():
        assert json.loads(out.read_text())["degraded"] is True


def test_bad_quantiles(tri_csv):
    assert run(["bootstrap", "--input", str(tri_csv), "--boot", "5", "--seed", "1", "--quantiles", "0.5,1.2"])[0] == 1


def test_json_round_trips_floats():
    values = [0.1, 1 / 3, 6047063.774518, 1e-300, -2.5e17]
    assert json.loads(dumps({"v": values}))["v"] == values
    assert json.loads(dumps({"x": float("nan")})) == {"x": None}


def test_module_entry_point(tri_csv):
    proc = subprocess.run(
        [sys.executable, "-m", "hglmreserve", "reserve", "--input", str(tri_csv)],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0
    assert "total" in json.loads(proc.stdout)["reserve"]


def test_unconverged_fit_status(tmp_path):
    path = tmp_path / "tiny.csv"
    rows = [[112.05595248, 70.27424227, 133.6785362], [87.92705733, 111.15583182], [223.43580519]]
    path.write_text(to_long_csv(Triangle.from_rows(rows)))
    with pytest.warns(UserWarning):
        status, text = run(["fit", "--input", str(path), "--model", "hglm", "--p", "1.5"])
    assert status == 2
    assert json.loads(text)["fit"]["converged"] is False
