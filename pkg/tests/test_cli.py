import filecmp
import json

import pytest

import carpetquant.cli as cli
from carpetquant.runner import (
    ANTICHAIN_COLUMNS,
    DIMENSION_COLUMNS,
    QUANTIZE_COLUMNS,
)

RUN_FILES = ("dimension.csv", "antichain.csv", "certificates.csv", "quantize.csv", "summary.csv")


def read_csv_lines(capsys):
    out = capsys.readouterr().out
    return [line for line in out.strip().splitlines() if line]


@pytest.fixture()
def bad_config(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"m": 3, "n": 3, "entries": [[0, 0, 1.0]]}))
    return str(path)


def test_validate_ok(desk1_path, capsys):
    assert cli.main(["validate", "--config", desk1_path]) == 0
    out = capsys.readouterr().out
    assert out.startswith("ok: 2x3 grid, 3 cells, 2 occupied rows")
    assert "uniform_fibres=false" in out


def test_validate_rejects_square_grid(bad_config, capsys):
    assert cli.main(["validate", "--config", bad_config]) == 2
    assert "error:" in capsys.readouterr().err


def test_validate_missing_file(tmp_path, capsys):
    assert cli.main(["validate", "--config", str(tmp_path / "nope.json")]) == 2
    assert "error:" in capsys.readouterr().err


def test_dimension_output(desk1_path, desk1, capsys):
    assert cli.main(["dimension", "--config", desk1_path, "--r", "0.5,2"]) == 0
    lines = read_csv_lines(capsys)
    assert lines[0] == ",".join(DIMENSION_COLUMNS)
    assert len(lines) == 3
    import carpetquant as cq

    first = lines[1].split(",")
    assert first[0] == "0.5"
    assert float(first[1]) == pytest.approx(cq.constants(desk1, 0.5).s_r, rel=1e-15)
    second = lines[2].split(",")
    assert second[0] == "2"
    assert float(second[1]) == pytest.approx(cq.constants(desk1, 2.0).s_r, rel=1e-15)


def test_antichain_output(desk1_path, capsys):
    assert cli.main(["antichain", "--config", desk1_path, "--j", "0:2"]) == 0
    lines = read_csv_lines(capsys)
    assert lines[0] == ",".join(ANTICHAIN_COLUMNS[1:])
    assert len(lines) == 4
    j0 = lines[1].split(",")
    assert j0[0] == "0" and j0[1] == "2"  # j, psi
    assert j0[5] == "true"  # H1_bound_ok
    assert j0[-1] == "true"  # s12_ok


def test_certify_output(desk1_path, capsys):
    assert cli.main(["certify", "--config", desk1_path, "--j", "0,1"]) == 0
    lines = read_csv_lines(capsys)
    assert lines[0] == "j,check,value,op,bound,passed,witness"
    names = {line.split(",")[1] for line in lines[1:]}
    assert {"weight-band-lower", "energy-sum", "psi-monotone"} <= names
    assert all(line.split(",")[5] == "true" for line in lines[1:])


def test_quantize_output(desk1_path, capsys):
    code = cli.main(
        [
            "quantize", "--config", desk1_path,
            "--k", "1,2", "--samples", "2000", "--seed", "7", "--restarts", "2",
        ]
    )
    assert code == 0
    lines = read_csv_lines(capsys)
    assert lines[0] == ",".join(QUANTIZE_COLUMNS[1:])
    rows = [line.split(",") for line in lines[1:]]
    assert [row[0] for row in rows] == ["1", "2"]
    errors = [float(row[1]) for row in rows]
    assert errors[1] < errors[0]
    assert all(int(row[3]) == 2 for row in rows)


def test_proxy_output(desk1_path, capsys):
    code = cli.main(
        ["proxy", "--config", desk1_path, "--j", "0:1", "--samples", "2000", "--seed", "7"]
    )
    assert code == 0
    lines = read_csv_lines(capsys)
    assert lines[0] == "j,psi,proxy,antichain_distortion"
    j0 = lines[1].split(",")
    assert j0[0] == "0" and j0[1] == "2"
    assert float(j0[2]) == pytest.approx(0.25, rel=1e-12)
    assert 0.0 < float(j0[3]) < 1.0


def test_bad_j_argument_exits_with_usage(desk1_path, capsys):
    with pytest.raises(SystemExit) as exc:
        cli.main(["antichain", "--config", desk1_path, "--j", "5:2"])
    assert exc.value.code == 2


SMALL_RUN = ["--j", "0:2", "--k", "1,2,4", "--samples", "4000", "--restarts", "2"]


def test_run_writes_five_files(desk1_path, tmp_path, capsys):
    out = tmp_path / "out"
    code = cli.main(["run", "--config", desk1_path, "--out", str(out)] + SMALL_RUN)
    assert code == 0
    for name in RUN_FILES:
        assert (out / name).is_file(), name
    text = (out / "quantize.csv").read_bytes()
    assert text.startswith(b"r,k,e_k_r,iters,restarts_used\r\n")
    summary = (out / "summary.csv").read_text().strip().splitlines()
    assert summary[0] == "r,s_r,slope,slope_err,band_ratio,all_certificates_pass"
    assert summary[1].split(",")[-1] == "true"


def test_run_repeat_is_byte_identical(desk1_path, tmp_path):
    out_a = tmp_path / "a"
    out_b = tmp_path / "b"
    for out in (out_a, out_b):
        assert cli.main(["run", "--config", desk1_path, "--out", str(out)] + SMALL_RUN) == 0
    for name in RUN_FILES:
        assert filecmp.cmp(out_a / name, out_b / name, shallow=False), name


def test_run_bad_config_exits_2(bad_config, tmp_path, capsys):
    out = tmp_path / "out"
    code = cli.main(["run", "--config", bad_config, "--out", str(out)] + SMALL_RUN)
    assert code == 2
    assert not out.exists()  # rejected before any stage ran


def test_run_tiny_cap_exits_3_with_partial_output(desk1_path, tmp_path, capsys):
    out = tmp_path / "out"
    args = ["run", "--config", desk1_path, "--out", str(out), "--cap", "4"] + SMALL_RUN
    assert cli.main(args) == 3
    err = capsys.readouterr().err
    assert "certify" in err
    for name in RUN_FILES:
        assert (out / name).is_file(), name
    dim = (out / "dimension.csv").read_text().strip().splitlines()
    assert len(dim) == 2  # header plus the completed dimension stage row


def test_thread_env_guard(desk1_path, capsys, monkeypatch):
    monkeypatch.setenv("CARPET_QUANT_THREADS", "abc")
    assert cli.main(["validate", "--config", desk1_path]) == 2
    monkeypatch.setenv("CARPET_QUANT_THREADS", "0")
    assert cli.main(["validate", "--config", desk1_path]) == 2
    monkeypatch.setenv("CARPET_QUANT_THREADS", "4")
    capsys.readouterr()
    assert cli.main(["validate", "--config", desk1_path]) == 0
