import math

import pytest

pytest.importorskip("sqwplots")

from sqwplots import PlotJob, SchemaError, read_table, render
from sqwplots.cli import main


def write_decay(path, rate=0.5, rows=8):
    lines = ["# config_hash = deadbeef", "# schema = 1",
             "distance,mean,std_error,n_samples,seed,strength,"
             "fit_c,fit_g,fit_g_stderr,fit_r2"]
    for d in range(rows):
        lines.append(f"{d},{2.0 * math.exp(-rate * d):.17g},0.001,100,1,0.2,"
                     f"2,{rate},0.01,0.998")
    path.write_text("\n".join(lines) + "\n")


def write_gapbound(path):
    lines = ["# config_hash = deadbeef", "# schema = 1",
             "z_re,z_im,eta,mean,std_error,n_samples,seed,bound,bound_applicable"]
    for z_re, z_im in ((0.99, 0.0), (0.0, 1.01)):
        for eta in (0.003, 0.01, 0.03):
            lines.append(f"{z_re},{z_im},{eta},{6.0 * eta},{0.1 * eta},"
                         f"400,7,{18.0 * eta},true")
    path.write_text("\n".join(lines) + "\n")


def write_probe(path):
    lines = ["distance,probe_mean,probe_std_error,ec_mean,ec_std_error,"
             "n_samples,seed,strength"]
    for d in range(6):
        ec = math.exp(-0.4 * d)
        lines.append(f"{d},{0.9 * ec},{0.01 * ec},{ec},{0.02 * ec},50,3,0.1")
    path.write_text("\n".join(lines) + "\n")


def write_ladder(path):
    lines = ["strength,fit_c,fit_g,fit_g_stderr,fit_r2,n_points,envelope_margin"]
    for phi, g in ((0.3, 0.8), (0.2, 1.1), (0.1, 1.6)):
        lines.append(f"{phi},1.5,{g},0.05,0.99,12,0")
    path.write_text("\n".join(lines) + "\n")


def test_decay_round_trip_keeps_fit_text(tmp_path):
    src = tmp_path / "decay.csv"
    out = tmp_path / "decay.svg"
    write_decay(src)
    assert main(["--kind", "decay", "--in", str(src), "--out", str(out)]) == 0
    body = out.read_text()
    assert "0.5000" in body
    assert "0.9980" in body


def test_missing_columns_are_named(tmp_path):
    src = tmp_path / "broken.csv"
    src.write_text("distance,mean\n0,1.0\n1,0.5\n")
    with pytest.raises(SchemaError, match="std_error"):
        read_table(src, "decay")
    assert main(["--kind", "decay", "--in", str(src),
                 "--out", str(tmp_path / "x.svg")]) != 0


def test_too_few_rows_rejected(tmp_path):
    src = tmp_path / "thin.csv"
    write_decay(src, rows=1)
    with pytest.raises(SchemaError, match="2 data rows"):
        read_table(src, "decay")


def test_non_numeric_column_rejected(tmp_path):
    src = tmp_path / "text.csv"
    src.write_text("strength,fit_g,fit_g_stderr\n0.1,oops,0.1\n0.2,1.0,0.1\n")
    with pytest.raises(SchemaError, match="fit_g"):
        read_table(src, "g-ladder")


def test_extra_columns_tolerated(tmp_path):
    src = tmp_path / "ladder.csv"
    write_ladder(src)
    table = read_table(src, "g-ladder")
    assert set(table) == {"strength", "fit_g", "fit_g_stderr"}
    assert len(table["strength"]) == 3


def test_gapbound_smoke(tmp_path):
    src = tmp_path / "gapprob.csv"
    out = tmp_path / "gapprob.svg"
    write_gapbound(src)
    assert main(["--kind", "gapbound", "--in", str(src), "--out", str(out)]) == 0
    assert out.stat().st_size > 0


def test_probe_smoke(tmp_path):
    src = tmp_path / "dynloc.csv"
    out = tmp_path / "dynloc.svg"
    write_probe(src)
    assert main(["--kind", "probe", "--in", str(src), "--out", str(out)]) == 0
    assert out.stat().st_size > 0


def test_g_ladder_smoke(tmp_path):
    src = tmp_path / "summary.csv"
    out = tmp_path / "ladder.svg"
    write_ladder(src)
    assert main(["--kind", "g-ladder", "--in", str(src), "--out", str(out)]) == 0
    assert out.stat().st_size > 0


def test_png_output(tmp_path):
    src = tmp_path / "decay.csv"
    out = tmp_path / "decay.png"
    write_decay(src)
    assert main(["--kind", "decay", "--in", str(src), "--out", str(out),
                 "--dpi", "72"]) == 0
    assert out.read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"


def test_render_api_returns_target(tmp_path):
    src = tmp_path / "decay.csv"
    out = tmp_path / "decay.svg"
    write_decay(src)
    job = PlotJob(source=str(src), kind="decay", target=str(out), log_y=False)
    assert render(job) == str(out)
    assert out.exists()


def test_unknown_kind_is_usage_error(tmp_path):
    assert main(["--kind", "pie", "--in", "x.csv", "--out", "x.svg"]) == 2


def test_missing_input_file_fails(tmp_path):
    assert main(["--kind", "decay", "--in", str(tmp_path / "nope.csv"),
                 "--out", str(tmp_path / "x.svg")]) != 0


def test_help_exits_clean():
    assert main(["--help"]) == 0
