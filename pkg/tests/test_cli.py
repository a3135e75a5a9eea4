import csv
import io
import math

import pytest

from msaircomp.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows_of(text):
    body = [line for line in text.splitlines() if not line.startswith("#")]
    return list(csv.DictReader(io.StringIO("\n".join(body))))


def test_simulate_csv_identical_across_threads(tmp_path):
    paths = []
    for t in (1, 2, 8):
        p = tmp_path / f"out{t}.csv"
        assert main(["simulate", "--runs", "4500", "--pth", "0.95,0.98", "--seed", "3",
                     "--threads", str(t), "--out", str(p)]) == 0
        paths.append(p.read_bytes())
    assert paths[0] == paths[1] == paths[2]


def test_optimize_reproduces_threshold_table(capsys):
    code, out, _ = run(capsys, "optimize")
    assert code == 0
    assert out.startswith("# generator: msaircomp")
    rows = rows_of(out)
    assert [float(r["p_th"]) for r in rows] == [0.90, 0.92, 0.94, 0.95, 0.96, 0.97, 0.98, 0.99]
    assert [int(r["n_slots"]) for r in rows] == [2, 3, 3, 3, 3, 4, 4, 5]
    assert all(r["source"] == "analytic" and r["stderr_mse"] == "" for r in rows)


def test_optimize_beta_keeps_thresholds(capsys):
    _, plain, _ = run(capsys, "optimize", "--pth", "0.98")
    _, capped, _ = run(capsys, "optimize", "--pth", "0.98", "--beta", "0.4")
    a, b = rows_of(plain)[0], rows_of(capped)[0]
    assert a["g_th"] == b["g_th"]
    assert float(b["avg_power"]) < float(a["avg_power"])
    assert float(b["beta"]) == 0.4


def test_optimize_with_optsel(capsys):
    code, out, _ = run(capsys, "optimize", "--pth", "0.98", "--policy", "selfirst,optsel")
    rows = rows_of(out)
    assert code == 0 and [r["policy"] for r in rows] == ["selfirst", "optsel"]
    assert float(rows[1]["mse_total"]) < float(rows[0]["mse_total"])


def test_reproduce_table_round_trip(capsys, tmp_path):
    out = tmp_path / "t.csv"
    assert main(["reproduce", "table2", "--out", str(out)]) == 0
    text = out.read_text()
    assert "# figure: table2" in text
    rows = rows_of(text)
    assert len(rows) == 8
    for r in rows:
        assert float(repr(float(r["g_th"]))) == float(r["g_th"])
        assert math.isfinite(float(r["mse_total"]))


def test_reproduce_gain_figure(capsys):
    code, out, _ = run(capsys, "reproduce", "fig3")
    rows = rows_of(out)
    assert code == 0 and len(rows) == 8
    assert float(rows[1]["gain_optsel"]) == pytest.approx(15.0, abs=1e-6)


@pytest.mark.parametrize("argv", [
    ["reproduce", "fig99"],
    ["optimize", "--pth", ""],
    ["optimize", "--pth", "1.5"],
    ["simulate", "--runs", "0"],
    ["optimize", "--policy", "aircomp"],
    ["optimize", "--config", "/nonexistent/config.yaml"],
])
def test_usage_errors_exit_2(capsys, argv):
    code, _, err = run(capsys, *argv)
    assert code == 2
    assert "error" in err


def test_unknown_figure_lists_valid_ids(capsys):
    _, _, err = run(capsys, "reproduce", "fig99")
    assert "table2" in err and "fig7" in err


@pytest.mark.parametrize("argv", [["bogus"], ["optimize", "--nslots-range", "3"], ["simulate", "--seed", "x"]])
def test_argparse_errors_exit_2(capsys, argv):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2


def test_bad_config_file(capsys, tmp_path):
    path = tmp_path / "c.yaml"
    path.write_text("p_max: -3\n")
    code, _, err = run(capsys, "optimize", "--config", str(path))
    assert code == 2 and "p_max" in err
