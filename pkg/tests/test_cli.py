import csv
import subprocess
import sys

import numpy as np
import pytest

from pvpc.cli import main, parse_report
from pvpc.container import read_container
from pvpc.pipeline import decode_atlas
from pvpc.ply import read_plenoptic_ply

SMALL = ["--canvas-width", "256"]


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, parse_report(out), err


@pytest.fixture(scope="module")
def cube(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "cube.ply"
    assert main(["generate", "--shape", "cube", "--points", "1500", "--views", "2",
                 "--rho", "0.9", "--seed", "3", "--output", str(path)]) == 0
    return path


def test_encode_decode_eval(cube, tmp_path, capsys):
    bit = tmp_path / "a.pvpc"
    report = tmp_path / "report.txt"
    code, stats, _ = run(capsys, "encode", "--input", cube, "--output", bit, "--qp", 32,
                         "--mode", "multiview", "--report", report, *SMALL)
    assert code == 0
    assert int(stats["total_bits"]) == 8 * bit.stat().st_size
    for key in ("occupancy_bits", "missed_points", "time.attribute_coding", "unit_bits.attribute.1.0"):
        assert key in stats
    assert parse_report(report.read_text()) == stats

    out = tmp_path / "dec.ply"
    code, stats, _ = run(capsys, "decode", "--input", bit, "--output", out)
    assert code == 0 and read_plenoptic_ply(out.read_bytes()).view_count == 2

    rd = tmp_path / "rd.csv"
    for label in ("first", "second"):
        code, stats, _ = run(capsys, "eval", "--input", cube, "--bitstream", bit, "--output", rd, "--label", label)
        assert code == 0
    rows = list(csv.DictReader(rd.open()))
    assert [r["label"] for r in rows] == ["first", "second"]
    assert rows[0]["qp_i"] == "32" and float(rows[0]["psnr_y"]) > 25


def test_independent_intra_units_are_all_intra(cube, tmp_path, capsys):
    bit = tmp_path / "i.pvpc"
    code, _, _ = run(capsys, "encode", "--input", cube, "--output", bit, "--mode", "independent-intra", *SMALL)
    assert code == 0
    header = read_container(bit.read_bytes())[0]
    assert all(u.slice_type == "I" and not u.refs for u in header.structure.units)

    target = tmp_path / "s.txt"
    assert main(["structure", "--views", "5", "--mode", "independent-intra", "--output", str(target)]) == 0
    rows = target.read_text().splitlines()[1:]
    assert len(rows) == 10 and all(r.split()[2] == "I" for r in rows)


def test_nonexistent_input_leaves_no_output(tmp_path, capsys):
    out = tmp_path / "never.pvpc"
    code, _, err = run(capsys, "encode", "--input", tmp_path / "missing.ply", "--output", out)
    assert code != 0 and not out.exists()
    assert err.startswith("error: cli:")
    assert not list(tmp_path.iterdir())


def test_truncated_bitstream_fails(cube, tmp_path, capsys):
    bit = tmp_path / "t.pvpc"
    run(capsys, "encode", "--input", cube, "--output", bit, *SMALL)
    bit.write_bytes(bit.read_bytes()[:-7])
    code, _, err = run(capsys, "eval", "--input", cube, "--bitstream", bit)
    assert code != 0 and err.startswith("error: video_codec:") and "truncated" in err
    code, _, _ = run(capsys, "decode", "--input", bit, "--output", tmp_path / "x.ply")
    assert code != 0 and not (tmp_path / "x.ply").exists()


def test_lossless_eval_hits_cap(cube, tmp_path, capsys):
    bit = tmp_path / "l.pvpc"
    run(capsys, "encode", "--input", cube, "--output", bit, "--lossless", *SMALL)
    code, stats, _ = run(capsys, "eval", "--input", cube, "--bitstream", bit)
    assert code == 0
    assert float(stats["psnr_y"]) == 99.99


def test_sweep_rows_and_monotone_rate(cube, tmp_path, capsys):
    rd = tmp_path / "sweep.csv"
    code, _, _ = run(capsys, "sweep", "--input", cube, "--sweep", "22,27,32,37,42", "--output", rd, *SMALL)
    assert code == 0
    rows = list(csv.DictReader(rd.open()))
    assert [int(r["qp_i"]) for r in rows] == [22, 27, 32, 37, 42]
    bits = [int(r["total_bits"]) for r in rows]
    assert all(b <= a * 1.02 for a, b in zip(bits, bits[1:]))


def test_sweep_rejects_unsorted_list(cube, tmp_path, capsys):
    with pytest.raises(SystemExit):
        main(["sweep", "--input", str(cube), "--sweep", "32,27"])
    capsys.readouterr()


def test_reruns_are_byte_identical(cube, tmp_path, capsys):
    outs = []
    for i in range(2):
        bit, rd = tmp_path / f"r{i}.pvpc", tmp_path / f"r{i}.csv"
        run(capsys, "encode", "--input", cube, "--output", bit, "--qp", 27, *SMALL)
        run(capsys, "eval", "--input", cube, "--bitstream", bit, "--output", rd)
        outs.append((bit.read_bytes(), rd.read_bytes()))
    assert outs[0] == outs[1]


def test_four_way_ablation_shares_geometry_and_metadata(cube, tmp_path, capsys):
    results = []
    for mode in ("multiview", "independent-intra"):
        for gp in ("on", "off"):
            bit = tmp_path / f"{mode}-{gp}.pvpc"
            assert run(capsys, "encode", "--input", cube, "--output", bit, "--mode", mode,
                       "--group-padding", gp, *SMALL)[0] == 0
            data = bit.read_bytes()
            header, occ, patch_map, units = read_container(data)
            atlas, _ = decode_atlas(data)
            results.append((occ, patch_map, header.patches, atlas.geometry, atlas.occupancy))
    first = results[0]
    for other in results[1:]:
        assert other[0] == first[0] and other[1] == first[1] and other[2] == first[2]
        assert np.array_equal(other[3], first[3]) and np.array_equal(other[4], first[4])


def test_console_entry_point(tmp_path):
    out = tmp_path / "s.txt"
    proc = subprocess.run([sys.executable, "-m", "pvpc.cli", "structure", "--views", "3", "--output", str(out)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert out.read_text().startswith("view frame type level refs qp")
    bad = subprocess.run([sys.executable, "-m", "pvpc.cli", "decode", "--input", str(out), "--output", str(tmp_path / "o.ply")],
                         capture_output=True, text=True)
    assert bad.returncode == 1 and bad.stderr.startswith("error:")
