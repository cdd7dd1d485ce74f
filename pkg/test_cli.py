#!/usr/bin/env python3
"""Tests for the qgraph command line, output formats and figures"""

import json
import math

import numpy as np
import pytest
from PIL import Image, ImageChops

from commands import emit_spectrum_vs_mu, spectrum_vs_mu
from errors import ValidationError
from lattice import LatticeModel, band_structure, flat_band_mu
from main import main
from plot_generator import PlotGenerator, PlotSeries, PlotSpec, load_plot_settings, padded_range
from utils import format_number, render_csv

MINUS_R_HIGH_ENERGY = np.array([[1, -2, -2], [-2, 1, -2], [-2, -2, 1]]) / 3


def run_json(capsys, *argv):
    assert main(list(argv)) == 0
    return json.loads(capsys.readouterr().out)


def test_symmetry_of_shift_coupling(capsys):
    payload = run_json(capsys, "symmetry", "--coupling", "shift", "--n", "5")
    assert payload["command"] == "symmetry"
    assert payload["version"]
    row = payload["results"][0]
    assert row["time_reversal"] is False
    assert row["pt_symmetric"] is True
    assert row["nontrivial_pt"] is True
    assert row["parity_fixed_edges"] == "1"
    assert (row["dirichlet"], row["neumann"], row["robin"]) == (0, 1, 4)


def test_smatrix_high_energy_limit(capsys):
    payload = run_json(capsys, "smatrix", "--coupling", "shift", "--n", "3", "--negate", "--k", "1e6")
    assert len(payload["results"]) == 9
    for entry in payload["results"]:
        expected = MINUS_R_HIGH_ENERGY[entry["row"] - 1, entry["col"] - 1]
        assert abs(complex(entry["re"], entry["im"]) - expected) < 1e-5


def test_bound_states_csv(capsys):
    assert main(["bound-states", "--coupling", "shift", "--n", "3", "--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0] == "kind,kappa,energy"
    kind, kappa, energy = lines[1].split(",")
    assert kind == "bound"
    assert float(kappa) == pytest.approx(math.sqrt(3), rel=1e-11)
    assert float(energy) == pytest.approx(-3.0, rel=1e-11)


def test_bands_report_flat_band(capsys):
    mu = flat_band_mu(1.5)
    argv = ["bands", "--mu", repr(mu), "--ell", "1.5", "--branch", "positive", "--k-max", "20", "--format", "csv"]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert first.splitlines()[0] == "mu,ell,branch,k_lo,k_hi,edge_lo,edge_hi"
    assert ",positive,1,1,flat,flat" in first

    assert main(argv) == 0
    assert capsys.readouterr().out == first


def test_output_path_and_plot(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("QGRAPH_OUTPUT_DIR", str(tmp_path))
    code = main(["bands", "--mu", "0.5", "--ell", "1.5", "--k-max", "10",
                 "--output-path", "bands.json", "--plot", "bands.svg"])
    assert code == 0
    assert capsys.readouterr().out == ""
    payload = json.loads((tmp_path / "bands.json").read_text())
    assert payload["params"]["mu"] == 0.5
    assert "positive" in {row["branch"] for row in payload["results"]}
    svg = (tmp_path / "bands.svg").read_text()
    assert svg.startswith("<svg") and "<rect" in svg


def test_fermi_contour_command(capsys):
    band = band_structure(LatticeModel(0.5, 1.5), "positive", (0.1, 8.0)).intervals[1]
    k = band.lo + 0.4 * band.width
    payload = run_json(capsys, "fermi", "--mu", "0.5", "--ell", "1.5", "--k", repr(k), "--grid", "60")
    assert payload["results"]
    for point in payload["results"]:
        assert -math.pi - 1e-9 <= point["theta1"] <= math.pi + 1e-9


def test_dirac_command_finds_center_closing(capsys):
    payload = run_json(capsys, "dirac", "--ell", "10", "--mu-min", "1.549", "--mu-max", "1.552",
                       "--mu-grid", "13", "--k-min", "9.9", "--k-max", "10.2", "--threads", "2")
    assert any(row["location"] == "center" and abs(row["mu"] - 1.55068665) < 1e-4
               and abs(row["k"] - 10.07328547) < 1e-4 for row in payload["results"])


def test_psigma_command(capsys):
    payload = run_json(capsys, "psigma", "--mu", "0", "--ell", "1", "--k-max", "30")
    row = payload["results"][0]
    assert row["K"] == 900
    assert 0.8 < row["p_sigma"] <= 1.0


def test_validation_errors_exit_with_two(capsys):
    assert main(["bands", "--mu", "2", "--ell", "1"]) == 2
    assert main(["bands", "--ell", "1"]) == 2
    assert main(["no-such-command"]) == 2
    assert main(["smatrix", "--coupling", "custom", "--first-row", "[1, 1, 0]", "--k", "1"]) == 2
    assert main(["smatrix", "--coupling", "perm-invariant", "--k", "1"]) == 2
    assert "❌" in capsys.readouterr().err


def test_numerical_errors_exit_with_three(capsys):
    gap = 2 * 2 * math.pi / 3
    assert main(["fermi", "--mu", "0.5", "--ell", "1.5", "--k", repr(gap)]) == 3
    assert "❌" in capsys.readouterr().err


def test_emit_spectrum_vs_mu(tmp_path):
    out = tmp_path / "spectrum.csv"
    figure = tmp_path / "spectrum.png"
    written = emit_spectrum_vs_mu(1.0, 3, (0.1, 5.0), str(out), kappa_max=4.0, plot_path=str(figure), threads=2)
    assert written == [str(out), str(figure)]
    lines = out.read_text().splitlines()
    assert lines[0] == "mu,ell,branch,k_lo,k_hi,edge_lo,edge_hi"
    negative = [line.split(",") for line in lines[1:] if ",negative," in line]
    assert all(float(row[3]) < 0 and float(row[4]) < 0 for row in negative)
    with Image.open(figure) as img:
        assert img.size == (load_plot_settings()["spectrum-vs-mu"]["width"],
                            load_plot_settings()["spectrum-vs-mu"]["height"])


def test_number_formatting():
    assert format_number(1.0) == "1"
    assert format_number(math.pi) == "3.14159265359"
    assert format_number(True) == "true"
    assert format_number(None) == ""
    assert render_csv(["a", "b"], [[0.1, "x"]]) == "a,b\n0.1,x\n"


def test_plot_spec_validation_and_padding():
    with pytest.raises(ValidationError):
        PlotSpec("histogram", (0, 1), (0, 1))
    with pytest.raises(ValidationError):
        PlotSpec("band-diagram", (1, 1), (0, 1))
    assert padded_range([]) == (0.0, 1.0)
    lo, hi = padded_range([1.0, 3.0])
    assert lo < 1.0 and hi > 3.0


def test_plot_generator_renders_all_styles(tmp_path):
    spec = PlotSpec(
        "fermi-contour", (-math.pi, math.pi), (-math.pi, math.pi),
        (
            PlotSeries("cells", "rects", ((0.0, 1.0, 0.0, 1.0),)),
            PlotSeries("tips", "points", ((0.0, 0.0),), color="#000000"),
            PlotSeries("contour", "lines", ((-1.0, 0.0, 0.0, 1.0),)),
        ),
        title="contour",
    )
    generator = PlotGenerator()
    svg = generator.render_svg(spec)
    assert svg.count("<g ") == 3
    assert "<circle" in svg and "<line" in svg
    path = generator.save(spec, str(tmp_path / "contour.png"))
    with Image.open(path) as img:
        assert img.mode == "RGB"


def csv_matches_json(text, value):
    if value is None:
        return text == ""
    if isinstance(value, bool):
        return text == ("true" if value else "false")
    if isinstance(value, (int, float)):
        return float(text) == value
    return text == value


@pytest.mark.parametrize("argv", [
    ["bands", "--mu", "0.5", "--ell", "1.5", "--k-max", "10"],
    ["symmetry", "--coupling", "shift", "--n", "5"],
    ["bound-states", "--coupling", "shift", "--n", "4", "--mu", "0.5", "--ell", "1.0"],
])
def test_csv_and_json_carry_the_same_values(capsys, argv):
    assert main(argv + ["--format", "csv"]) == 0
    lines = capsys.readouterr().out.splitlines()
    payload = run_json(capsys, *argv, "--format", "json")
    header = lines[0].split(",")
    assert len(lines) - 1 == len(payload["results"])
    for line, row in zip(lines[1:], payload["results"]):
        cells = line.split(",")
        assert len(cells) == len(header)
        for name, text in zip(header, cells):
            assert csv_matches_json(text, row[name]), (name, text, row[name])


def test_unwritable_output_path_exits_with_two(tmp_path, capsys):
    target = tmp_path / "missing" / "bands.csv"
    assert main(["bands", "--mu", "0.5", "--ell", "1.5", "--k-max", "5", "--output-path", str(target)]) == 2
    assert not target.exists()
    assert "❌" in capsys.readouterr().err


def test_spectrum_vs_mu_marks_unit_flat_band(tmp_path):
    out = tmp_path / "spectrum.csv"
    emit_spectrum_vs_mu(1.5, 200, (1e-6, 20.0), str(out), threads=2)
    mu_flat = flat_band_mu(1.5)
    assert mu_flat == pytest.approx((math.pi - 3) / 2)
    text = out.read_text()
    assert f"\n{format_number(mu_flat)},1.5,positive,1,1,flat,flat\n" in text
    assert ",negative," in text
    mus = [float(line.split(",")[0]) for line in text.splitlines()[1:]]
    assert mus == sorted(mus)

    _, spec = spectrum_vs_mu(1.5, 20, (1e-6, 20.0))
    flat = next(s for s in spec.series if s.label == "flat bands")
    assert (mu_flat, 1.0) in flat.data


def test_png_draws_tick_values_and_labels():
    def spec(**labels):
        return PlotSpec("band-diagram", (0.0, 10.0), (-1.0, 1.0), (), title="bands", **labels)

    generator = PlotGenerator()
    margin = load_plot_settings()["band-diagram"]["margin"]
    plain = generator.render_png(spec())
    width, height = plain.size
    below = plain.crop((0, height - margin + 3, width, height)).convert("L")
    assert below.getextrema()[0] < 128
    labelled = generator.render_png(spec(x_label="k", y_label="mu"))
    diff = ImageChops.difference(plain, labelled).getbbox()
    assert diff is not None
    left, top, right, bottom = diff
    assert left < margin and bottom > height - margin


if __name__ == "__main__":
    pytest.main([__file__])
