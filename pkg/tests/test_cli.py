import csv
import io
import json

import pytest

from einwarp.cli import main, run, scan


def write(tmp_path, name, obj):
    path = tmp_path / name
    path.write_text(obj if isinstance(obj, str) else json.dumps(obj))
    return path


def test_catalog_scenario_passes(tmp_path):
    path = write(tmp_path, "s.json", {"kind": "catalog", "name": "affine_conformal", "n": 3, "m": 2, "G": 1, "C": 5})
    out = tmp_path / "r.json"
    assert run(path, str(out)) == 0
    report = json.loads(out.read_text())
    assert report["verdict"] == "pass"
    assert report["sup_norms"]["paper-printed=derived"]["einstein"] < 1e-6
    assert list(report)[:4] == ["scenario", "version", "mode", "tolerance"]


def test_hyperbolic_report_carries_both_constants(tmp_path):
    out = tmp_path / "h.json"
    assert main(["catalog", "--name", "hyperbolic_corollary", "--out", str(out)]) == 1
    report = json.loads(out.read_text())
    assert report["results"]["derived"]["einstein_sup"] < 1e-6
    assert report["results"]["paper-printed"]["einstein_sup"] > 0.1


def test_integrate_writes_csv(tmp_path):
    table = tmp_path / "traj.csv"
    out = tmp_path / "r.json"
    status = main([
        "integrate", "--phi0", "5", "--dphi0", "-1", "--G0", "1", "--lambda", "-4",
        "--span", "0", "4", "--csv", str(table), "--out", str(out),
    ])
    assert status == 0
    rows = list(csv.DictReader(table.open()))
    assert list(rows[0]) == ["xi", "phi", "dphi", "G", "monitor"]
    assert abs(float(rows[-1]["phi"]) - 1.0) < 1e-6


def test_integrate_singularity_is_error(tmp_path):
    status = main(["integrate", "--phi0", "5", "--dphi0", "-1", "--G0", "1", "--lambda", "-4", "--span", "0", "6", "--out", str(tmp_path / "r.json")])
    assert status == 2


def test_integrate_inadmissible_is_error(tmp_path):
    assert main(["integrate", "--phi0", "5", "--dphi0", "-1", "--G0", "3", "--lambda", "-4", "--span", "0", "1"]) == 2


def test_malformed_file(tmp_path, capsys):
    path = write(tmp_path, "bad.json", '{"kind": "catalog",\n  oops}')
    assert main(["verify", str(path)]) == 2
    assert "bad.json:2:" in capsys.readouterr().err


def test_schema_violation(tmp_path):
    path = write(tmp_path, "bad.json", {"kind": "catalog", "name": "nope"})
    assert run(path) == 2


def test_missing_name(tmp_path):
    assert run(write(tmp_path, "s.json", {"kind": "verify"})) == 2


def test_usage_error():
    assert main(["integrate", "--phi0", "1"]) == 2


@pytest.mark.parametrize(
    "scenario, status",
    [
        ({"kind": "verify", "name": "affine_conformal"}, 0),
        ({"kind": "verify", "name": "affine_conformal", "lambda": 0}, 1),
        ({"kind": "oneill", "name": "hyperbolic_corollary", "lambda": -4}, 0),
        ({"kind": "oneill", "name": "flat_exponential", "grid": {"count": 20}}, 1),
        ({"kind": "reduce", "phi0": 5, "dphi0": -1, "lambda": -4}, 0),
        ({"kind": "reduce", "phi0": 1, "dphi0": 0, "lambda": 1}, 1),
        ({"kind": "catalog", "name": "affine_conformal", "mode": "fd", "grid": {"count": 20}}, 0),
    ],
)
def test_exit_status_matches_verdict(tmp_path, scenario, status):
    out = tmp_path / "r.json"
    assert run(write(tmp_path, "s.json", scenario), str(out)) == status
    verdict = json.loads(out.read_text())["verdict"]
    assert (verdict == "pass") == (status == 0)


def test_reproducible(tmp_path):
    path = write(tmp_path, "s.json", {"kind": "oneill", "name": "affine_conformal", "grid": {"count": 30, "seed": 3}})
    a, b = tmp_path / "a.json", tmp_path / "b.json"
    run(path, str(a))
    run(path, str(b))
    ra, rb = json.loads(a.read_text()), json.loads(b.read_text())
    ra.pop("wall_time_s"), rb.pop("wall_time_s")
    assert ra == rb


def test_tolerance_override(tmp_path):
    path = write(tmp_path, "s.json", {"kind": "verify", "name": "affine_conformal", "lambda": -3.9999})
    out = tmp_path / "r.json"
    assert main(["verify", str(path), "--out", str(out)]) == 1
    assert main(["verify", str(path), "--tolerance", "1e-2", "--out", str(out)]) == 0
    assert json.loads(out.read_text())["tolerance"] == 1e-2


class TestScan:
    def rows(self, text):
        return list(csv.DictReader(io.StringIO(text)))

    def test_lambda_sweep(self):
        rows = self.rows(scan({"lambda": [-4, -2, 0]}, {"dphi0": -1}))
        assert len(rows) == 3
        assert rows[0]["roots"] == "-5.0;1.0"
        assert all(r["verdict"] == "admissible" for r in rows)

    def test_empty_range(self):
        assert scan({"lambda": []}).strip() == ",".join(
            ["n", "m", "kappa", "lambda", "phi0", "dphi0", "roots", "constraint_residuals", "G_definition_gaps", "verdict"]
        )

    def test_no_real_roots(self):
        rows = self.rows(scan({"lambda": [1]}, {"dphi0": 0}))
        assert rows[0]["roots"] == "no real roots"
        assert rows[0]["verdict"] == "inadmissible"

    def test_cli(self, tmp_path):
        path = write(tmp_path, "scan.json", {"kind": "scan", "dphi0": -1, "ranges": {"lambda": [-4, 1]}})
        out = tmp_path / "scan.csv"
        assert main(["scan", str(path), "--out", str(out)]) == 0
        rows = self.rows(out.read_text())
        assert [r["lambda"] for r in rows] == ["-4.0", "1.0"]
