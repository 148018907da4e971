import json
import subprocess
import sys

import numpy as np
import pytest

from meshtta import cli, oracle
from meshtta.isa import read_binary
from meshtta.kernels import lbp3x3_program, shipped_source
from meshtta.pgm import read_pgm, write_pgm


def call(capsys, *argv):
    try:
        code = cli.main([str(a) for a in argv])
    except SystemExit as e:  # argparse usage errors
        code = e.code
    out, err = capsys.readouterr()
    return code, out, err


def stats_of(out):
    return json.loads(out.strip().splitlines()[-1])


@pytest.fixture
def lbp_src(tmp_path):
    path = tmp_path / "lbp.tta"
    path.write_text(shipped_source("lbp3x3"))
    return path


def test_asm_shipped(capsys, tmp_path, lbp_src):
    code, out, _ = call(capsys, "asm", lbp_src, tmp_path / "lbp.bin")
    assert code == 0
    n = len(lbp3x3_program().program)
    assert out.strip() == f"{n} instructions"
    with open(tmp_path / "lbp.bin", "rb") as fh:
        assert read_binary(fh) == lbp3x3_program().program


def test_asm_guarded_immediate(capsys, tmp_path):
    (tmp_path / "bad.tta").write_text("?bool.0 5 -> RF.1\n")
    code, _, err = call(capsys, "asm", tmp_path / "bad.tta", tmp_path / "bad.bin")
    assert code == 1
    assert "guarded immediate" in err and "line 1" in err


def test_asm_empty(capsys, tmp_path):
    (tmp_path / "e.tta").write_text("")
    assert call(capsys, "asm", tmp_path / "e.tta", tmp_path / "e.bin")[0] == 0
    assert (tmp_path / "e.bin").read_bytes() == b"TTAM\x01\x00\x00\x00\x00"


def test_disasm_round_trip(capsys, tmp_path, lbp_src):
    call(capsys, "asm", lbp_src, tmp_path / "lbp.bin")
    code, out, _ = call(capsys, "disasm", tmp_path / "lbp.bin")
    assert code == 0
    (tmp_path / "again.tta").write_text(out)
    call(capsys, "asm", tmp_path / "again.tta", tmp_path / "again.bin")
    assert (tmp_path / "again.bin").read_bytes() == (tmp_path / "lbp.bin").read_bytes()


def test_disasm_garbage(capsys, tmp_path):
    (tmp_path / "x.bin").write_bytes(b"junk")
    assert call(capsys, "disasm", tmp_path / "x.bin")[0] == 1


def test_run_check_passes(capsys, tmp_path):
    img = np.random.default_rng(3).integers(0, 256, (16, 16))
    write_pgm(tmp_path / "in.pgm", img)
    code, out, _ = call(capsys, "run", "--kernel", "lbp3x3", "--grid", "16x16",
                        "--image", tmp_path / "in.pgm", "--check", "-o", tmp_path / "out.pgm")
    assert code == 0
    rec = stats_of(out)
    assert rec["check"] == "pass" and rec["cycles"] == lbp3x3_program().predicted_cycles
    assert {"cycles", "load_cycles", "executed_moves", "squashed_moves"} <= rec.keys()
    assert (read_pgm(tmp_path / "out.pgm") == oracle.lbp_ref(img)).all()


def test_run_wave_load(capsys):
    code, out, _ = call(capsys, "run", "--kernel", "lbp3x3", "--grid", "16x16", "--load", "wave")
    assert code == 0 and stats_of(out)["load_cycles"] == 16


def test_run_maxpool_ascending(capsys, tmp_path):
    write_pgm(tmp_path / "asc.pgm", np.arange(1, 17).reshape(4, 4))
    code, _, _ = call(capsys, "run", "--kernel", "maxpool", "--window", 2, "--stride", 2,
                      "--image", tmp_path / "asc.pgm", "-o", tmp_path / "mp.pgm", "--check")
    assert code == 0
    out = read_pgm(tmp_path / "mp.pgm")
    assert [out[0, 0], out[0, 2], out[2, 0], out[2, 2]] == [6, 8, 14, 16]


@pytest.mark.parametrize("boundary", ["zero", "wrap"])
def test_run_fovea(capsys, tmp_path, boundary):
    write_pgm(tmp_path / "big.pgm", np.random.default_rng(1).integers(0, 256, (40, 40)))
    code, out, _ = call(capsys, "run", "--kernel", "sobel_x", "--grid", "16x16", "--boundary",
                        boundary, "--image", tmp_path / "big.pgm", "--check")
    assert code == 0
    rec = stats_of(out)
    assert rec["load_cycles"] == 16 * 9


def test_run_conv_weights_and_energy(capsys):
    code, out, _ = call(capsys, "run", "--kernel", "conv3x3", "--weights", "1,2,1,0,-3,0,1,2,1",
                        "--grid", "8x8", "--check", "--corner", "0.6V125C", "--freq", "10e6")
    rec = stats_of(out)
    assert code == 0 and rec["energy_j"] > 0


def test_run_stats_out_and_trace_env(capsys, tmp_path, monkeypatch):
    monkeypatch.setenv("MESHTTA_TRACE", "1")
    code, out, _ = call(capsys, "run", "--kernel", "lbp3x3", "--grid", "2x2",
                        "--stats-out", tmp_path / "s.json", "--trace-out", tmp_path / "t.txt")
    assert code == 0
    assert json.loads((tmp_path / "s.json").read_text()) == stats_of(out)
    lines = (tmp_path / "t.txt").read_text().splitlines()
    assert len(lines) == 4 * lbp3x3_program().predicted_cycles
    assert "EXEC" in lines[0]


def test_run_exit_codes(capsys, tmp_path):
    assert call(capsys, "run", "--kernel", "nope", "--grid", "4x4")[0] == 1
    assert call(capsys, "run", "--grid", "4x4")[0] == 1
    assert call(capsys, "run", "--kernel", "lbp3x3", "--grid", "4by4")[0] == 1
    write_pgm(tmp_path / "small.pgm", np.zeros((3, 3)))
    assert call(capsys, "run", "--kernel", "lbp3x3", "--grid", "4x4",
                "--image", tmp_path / "small.pgm")[0] == 2
    (tmp_path / "loop.tta").write_text("top: JUMP top\n")
    assert call(capsys, "run", "--program", tmp_path / "loop.tta", "--grid", "2x2",
                "--max-cycles", 50)[0] == 2
    (tmp_path / "bad.pgm").write_bytes(b"garbage")
    assert call(capsys, "run", "--kernel", "lbp3x3", "--image", tmp_path / "bad.pgm")[0] == 1


def test_run_check_mismatch(capsys):
    # RF.0 holds the centre pixel, not the LBP code
    code, out, _ = call(capsys, "run", "--kernel", "lbp3x3", "--grid", "6x6",
                        "--result-reg", 0, "--check")
    assert code == 3
    rec = stats_of(out)
    assert rec["check"] == "fail" and rec["mismatches"] > 0


def test_check_needs_named_kernel(capsys, tmp_path):
    (tmp_path / "nop.tta").write_text("HALT\n")
    args = ["run", "--program", tmp_path / "nop.tta", "--grid", "6x6"]
    assert call(capsys, *args)[0] == 0
    assert call(capsys, *args, "--check")[0] == 1


def test_energy_asic(capsys):
    code, out, _ = call(capsys, "energy", "--corner", "0.6V125C", "--freq", "10e6",
                        "--cycles", 74, "--dims", "1x1")
    assert code == 0 and "energy_nj: 0.13616" in out


def test_energy_fpga(capsys):
    code, out, _ = call(capsys, "energy", "--corner", "fpga", "--cycles", 74, "--json")
    rec = json.loads(out)
    assert code == 0 and rec["energy_nj"] == pytest.approx(1.48)


def test_energy_frame_rate(capsys):
    code, out, _ = call(capsys, "energy", "--corner", "0.6V125C", "--freq", "10e6", "--cycles", 74,
                        "--dims", "128x128", "--frame-rate", 30, "--sleep", "clock", "--json")
    rec = json.loads(out)
    assert code == 0
    assert rec["average_power_mw"] == pytest.approx(128 * 128 * 8.0023e-3, rel=1e-3)
    assert rec["area_mm2"] == pytest.approx(49.5616)


def test_energy_errors(capsys):
    assert call(capsys, "energy", "--corner", "1V0C", "--cycles", 74)[0] == 1
    assert call(capsys, "energy", "--corner", "fpga", "--cycles", 74, "--frame-rate", 30)[0] == 1
    assert call(capsys, "energy", "--corner", "0.6V125C", "--cycles", 10 ** 7,
                "--frame-rate", 30)[0] == 2


def test_deterministic_bytes(tmp_path):
    def once(tag):
        out = tmp_path / f"{tag}.pgm"
        proc = subprocess.run([sys.executable, "-m", "meshtta", "run", "--kernel", "box_blur",
                               "--grid", "12x12", "--seed", "5", "-o", str(out)],
                              capture_output=True, check=True)
        return proc.stdout, out.read_bytes()
    assert once("a") == once("b")
