import csv

import pytest


def read_table(path):
    with open(path, newline="") as fh:
        return list(csv.reader(fh))


def read_meta(path):
    meta = {}
    with open(str(path) + ".meta") as fh:
        for line in fh:
            key, value = line.rstrip("\n").split(" = ", 1)
            meta[key] = value
    return meta


def test_poles_command(runner, tmp_path):
    out = tmp_path / "poles.csv"
    result = runner.invoke(args=["poles", "--count", "20", "--out", str(out)])
    assert result.exit_code == 0, result.output
    table = read_table(out)
    assert table[0] == ["n", "re_k", "im_k", "re_E", "im_E", "residual"]
    assert len(table) == 21
    assert all(float(row[5]) <= 1e-10 for row in table[1:])
    meta = read_meta(out)
    assert meta["config.count"] == "20"
    assert meta["command"] == "poles"
    assert "version" in meta and "duration_s" in meta


def test_poles_defaults_go_to_the_output_dir(runner, app):
    result = runner.invoke(args=["poles", "--count", "3"])
    assert result.exit_code == 0, result.output
    assert len(read_table(f"{app.config['OUTPUT_DIR']}/poles.csv")) == 4


def test_zero_count_is_a_validation_error(runner, tmp_path):
    result = runner.invoke(args=["poles", "--count", "0", "--out", str(tmp_path / "p.csv")])
    assert result.exit_code == 2


def test_config_file_and_flag_precedence(runner, tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("count = 4\nL-nm = 5.0\n")
    out = tmp_path / "poles.csv"
    result = runner.invoke(args=["poles", "--config", str(conf), "--count", "2", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert len(read_table(out)) == 3
    meta = read_meta(out)
    assert meta["config.L_nm"] == "5"
    assert meta["config.count"] == "2"


def test_malformed_config_names_the_key(runner, tmp_path):
    conf = tmp_path / "run.conf"
    conf.write_text("count = several\n")
    result = runner.invoke(args=["poles", "--config", str(conf), "--out", str(tmp_path / "p.csv")])
    assert result.exit_code == 2
    assert "count" in result.output


def test_numerical_failure_exit_code(runner, app, tmp_path):
    app.config["POLE_CAP"] = 16
    result = runner.invoke(args=["evolve", "--tail-tol", "1e-12", "--out", str(tmp_path / "e.csv")])
    assert result.exit_code == 3


def test_unwritable_output_exit_code(runner, tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    result = runner.invoke(args=["poles", "--count", "2", "--out", str(blocker / "p.csv")])
    assert result.exit_code == 4


def test_evolve_reference_peak(runner, tmp_path):
    out = tmp_path / "evolve.csv"
    result = runner.invoke(args=["evolve", "--out", str(out)])
    assert result.exit_code == 0, result.output
    table = read_table(out)
    assert table[0] == ["t_fs", "density"]
    rows = [(float(t), float(d)) for t, d in table[1:]]
    assert len(rows) == 2000
    around_peak = [row for row in rows if 4.0 <= row[0] <= 7.0]
    t_peak, _ = max(around_peak, key=lambda row: row[1])
    assert t_peak == pytest.approx(5.17, abs=0.05)
    assert float(read_meta(out)["t_max_fs"]) == pytest.approx(5.17, abs=0.05)


def test_evolve_with_spectrogram_inside_barrier(runner, tmp_path):
    out = tmp_path / "evolve.csv"
    result = runner.invoke(args=[
        "evolve", "--probe-nm", "2.0", "--points", "100", "--t-lo-fs", "0.5",
        "--spectrogram", "--out", str(out),
    ])
    assert result.exit_code == 0, result.output
    table = read_table(out)
    assert table[0] == ["t_fs", "density", "omega_rel", "sigma_per_fs", "valid"]
    assert len(table) == 101
    assert read_meta(out)["region"] == "internal"


def test_bad_time_window(runner, tmp_path):
    result = runner.invoke(args=["evolve", "--t-lo-fs", "5", "--t-hi-fs", "1",
                                 "--out", str(tmp_path / "e.csv")])
    assert result.exit_code == 2


def test_basin_command(runner, tmp_path):
    out = tmp_path / "basin.csv"
    result = runner.invoke(args=[
        "basin", "--L-lo-nm", "2", "--L-hi-nm", "6", "--L-points", "3", "--out", str(out),
    ])
    assert result.exit_code == 0, result.output
    table = read_table(out)
    assert [row[0] for row in table[1:]] == ["2", "4", "6"]
    assert table[1][3] == "false"


def test_posscan_command(runner, tmp_path):
    out = tmp_path / "posscan.csv"
    result = runner.invoke(args=[
        "posscan", "--L-nm", "4.13", "--E-eV", "0.01", "--x-lo-over-L", "0.5",
        "--x-hi-over-L", "1.0", "--x-points", "2", "--energies", "0.01,0.005", "--out", str(out),
    ])
    assert result.exit_code == 0, result.output
    table = read_table(out)
    assert table[0][0] == "E_eV"
    assert len(table) == 5


def test_opacity_command_without_window(runner, tmp_path):
    out = tmp_path / "opacity.csv"
    result = runner.invoke(args=[
        "opacity", "--u", "300", "--alpha-lo", "2.5", "--alpha-hi", "3.0",
        "--alpha-points", "2", "--no-window", "--out", str(out),
    ])
    assert result.exit_code == 0, result.output
    table = read_table(out)
    assert table[0][:2] == ["u", "alpha"]
    assert len(table) == 3
    assert "alpha_min" not in read_meta(out)


def test_worker_count_does_not_change_results(runner, tmp_path):
    outputs = []
    for workers in ("1", "3"):
        out = tmp_path / f"basin{workers}.csv"
        result = runner.invoke(args=["basin", "--L-lo-nm", "3.5", "--L-hi-nm", "5",
                                     "--L-points", "2", "--workers", workers, "--out", str(out)])
        assert result.exit_code == 0, result.output
        outputs.append(read_table(out))
    assert outputs[0] == outputs[1]


@pytest.mark.slow
def test_opacity_window_report(runner, tmp_path):
    out = tmp_path / "opacity.csv"
    result = runner.invoke(args=["opacity", "--u", "300", "--out", str(out)])
    assert result.exit_code == 0, result.output
    meta = read_meta(out)
    assert float(meta["alpha_min"]) == pytest.approx(2.156, abs=0.02)
    assert float(meta["alpha_max"]) == pytest.approx(3.3, abs=0.1)


@pytest.mark.slow
def test_oracle_compare(runner, tmp_path):
    out = tmp_path / "oracle.csv"
    result = runner.invoke(args=["oracle-compare", "--probes-nm", "4", "--t-final-fs", "10",
                                 "--refinements", "3", "--out", str(out)])
    assert result.exit_code == 0, result.output
    meta = read_meta(out)
    assert float(meta["max_rel_deviation"]) <= 1e-3
    assert 1.8 <= float(meta["p_dx"]) <= 2.2
    assert 1.8 <= float(meta["p_dt"]) <= 2.2
    table = read_table(out)
    assert len(table) == 2 and float(table[1][0]) == 4.0
