"""Command-line driver: generate, encode, decode, eval, sweep and structure.

Stats reports are ``key=value`` lines. Errors are printed as
``error: <module>: <message>`` and exit with status 1.
"""

from __future__ import annotations

import argparse
import os
import sys
import tempfile
from pathlib import Path

from .container import read_container
from .errors import PvpcError
from .metrics import evaluate, write_rd_csv
from .model import estimate_normals
from .pipeline import EncoderParams, decode_cloud, encode_cloud
from .ply import read_plenoptic_ply, write_plenoptic_ply
from .structure import build_coding_structure, build_independent_structure, dump_structure
from .synthetic import SHAPES, generate_synthetic

MODE_NAMES = {"multiview": "multiview", "independent-intra": "independent", "independent": "independent"}


def _write_atomic(path, data: bytes | str):
    """Write via a temporary file in the target directory, so failures leave nothing behind."""
    path = Path(path)
    if isinstance(data, str):
        data = data.encode()
    fd, tmp = tempfile.mkstemp(dir=path.parent if str(path.parent) else ".", prefix=".pvpc-")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _read_bytes(path) -> bytes:
    try:
        return Path(path).read_bytes()
    except OSError as exc:
        raise CliError(f"cannot read {path}: {exc.strerror}") from None


class CliError(PvpcError):
    module = "cli"


def format_report(stats: dict) -> str:
    return "".join(f"{k}={v}\n" for k, v in stats.items())


def parse_report(text: str) -> dict:
    out = {}
    for line in text.splitlines():
        if "=" in line:
            key, value = line.split("=", 1)
            out[key.strip()] = value.strip()
    return out


def _qp_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated qp list: {text!r}") from None
    if len(values) < 1 or any(a >= b for a, b in zip(values, values[1:])):
        raise argparse.ArgumentTypeError("sweep qps must be strictly increasing")
    return values


def _on_off(text: str) -> bool:
    if text not in ("on", "off"):
        raise argparse.ArgumentTypeError("expected 'on' or 'off'")
    return text == "on"


def _encoder_params(args, qp: int | None = None) -> EncoderParams:
    return EncoderParams(
        qp_i=args.qp if qp is None else qp,
        qp_geom=args.qp_geom,
        mode=MODE_NAMES[args.mode],
        group_padding=args.group_padding,
        lossless=args.lossless,
        canvas_width=args.canvas_width,
        search_range=args.search_range,
    )


def _bit_counts(bitstream: bytes) -> dict:
    _, _, _, units = read_container(bitstream)
    return {
        "total_bits": 8 * len(bitstream),
        "geom_bits": sum(8 * len(u.payload) for u in units[:2]),
        "attr_bits": sum(8 * len(u.payload) for u in units[2:]),
    }


def cmd_generate(args):
    cloud = generate_synthetic(args.shape, args.points, args.views, args.rho, args.seed)
    fmt = "ascii" if args.ascii else "binary_little_endian"
    _write_atomic(args.output, write_plenoptic_ply(cloud, fmt))
    return {"points": len(cloud), "views": cloud.view_count, "shape": args.shape}


def cmd_encode(args):
    cloud = read_plenoptic_ply(_read_bytes(args.input))
    result = encode_cloud(cloud, _encoder_params(args))
    _write_atomic(args.output, result.bitstream)
    return result.stats


def cmd_decode(args):
    cloud = decode_cloud(_read_bytes(args.input))
    fmt = "ascii" if args.ascii else "binary_little_endian"
    _write_atomic(args.output, write_plenoptic_ply(cloud, fmt))
    return {"points": len(cloud), "views": cloud.view_count}


def _evaluate_bitstream(reference, bitstream: bytes, normals, qp, label):
    decoded = decode_cloud(bitstream)
    counts = _bit_counts(bitstream)
    return evaluate(reference, decoded, counts["total_bits"], counts["attr_bits"],
                    counts["geom_bits"], normals, qp, label)


def _rd_stats(point) -> dict:
    return {
        "total_bits": point.total_bits, "attr_bits": point.attr_bits, "geom_bits": point.geom_bits,
        "psnr_y": f"{point.psnr_y:.4f}", "psnr_cb": f"{point.psnr_cb:.4f}",
        "psnr_cr": f"{point.psnr_cr:.4f}", "d1": f"{point.d1:.4f}", "d2": f"{point.d2:.4f}",
    }


def cmd_eval(args):
    reference = read_plenoptic_ply(_read_bytes(args.input))
    bitstream = _read_bytes(args.bitstream)
    header = read_container(bitstream)[0]
    normals = estimate_normals(reference, min(16, len(reference)))
    point = _evaluate_bitstream(reference, bitstream, normals, header.qp_i, args.label)
    if args.output:
        write_rd_csv(args.output, [point], append=True)
    return _rd_stats(point)


def cmd_sweep(args):
    reference = read_plenoptic_ply(_read_bytes(args.input))
    normals = estimate_normals(reference, min(16, len(reference)))
    points = []
    stats = {}
    for qp in args.sweep:
        result = encode_cloud(reference, _encoder_params(args, qp))
        if args.bitstream_dir:
            _write_atomic(Path(args.bitstream_dir) / f"qp{qp}.pvpc", result.bitstream)
        point = _evaluate_bitstream(reference, result.bitstream, normals, qp, args.label)
        points.append(point)
        for k, v in _rd_stats(point).items():
            stats[f"qp{qp}.{k}"] = v
    if args.output:
        # render the CSV in memory first so a failure leaves no partial file
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / "rd.csv"
            write_rd_csv(path, points)
            _write_atomic(args.output, path.read_bytes())
    return stats


def cmd_structure(args):
    mode = MODE_NAMES[args.mode]
    build = build_coding_structure if mode == "multiview" else build_independent_structure
    text = dump_structure(build(args.views, args.qp))
    if args.output:
        _write_atomic(args.output, text)
    else:
        sys.stdout.write(text)
    return None


def _add_codec_options(p):
    p.add_argument("--qp", type=int, default=32, help="attribute qp of the anchor view")
    p.add_argument("--qp-geom", type=int, default=None, help="geometry qp (default: qp - 4)")
    p.add_argument("--mode", choices=sorted(MODE_NAMES), default="multiview")
    p.add_argument("--group-padding", type=_on_off, default=True, metavar="{on,off}")
    p.add_argument("--lossless", action="store_true", help="bypass transform and quantization")
    p.add_argument("--canvas-width", type=int, default=1280)
    p.add_argument("--search-range", type=int, default=24)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pvpc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="write a synthetic plenoptic cloud")
    p.add_argument("--shape", choices=SHAPES, default="cube")
    p.add_argument("--points", type=int, default=4000)
    p.add_argument("--views", type=int, default=13)
    p.add_argument("--rho", type=float, default=0.9, help="inter-view color correlation in [0, 1]")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--ascii", action="store_true")
    p.add_argument("--output", required=True)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("encode", help="compress a PLY cloud")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    _add_codec_options(p)
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("decode", help="decode a bitstream to PLY")
    p.add_argument("--input", required=True)
    p.add_argument("--output", required=True)
    p.add_argument("--ascii", action="store_true")
    p.set_defaults(func=cmd_decode)

    p = sub.add_parser("eval", help="decode and score against a reference; appends a CSV row")
    p.add_argument("--input", required=True, help="reference PLY")
    p.add_argument("--bitstream", required=True)
    p.add_argument("--output", help="RD CSV to append to")
    p.add_argument("--label", default="")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="encode and evaluate at several qps")
    p.add_argument("--input", required=True)
    p.add_argument("--sweep", type=_qp_list, default=[22, 27, 32, 37, 42])
    p.add_argument("--output", help="RD CSV to write")
    p.add_argument("--bitstream-dir", help="also keep each bitstream here")
    p.add_argument("--label", default="")
    _add_codec_options(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("structure", help="print the coding structure")
    p.add_argument("--views", type=int, required=True)
    p.add_argument("--qp", type=int, default=32)
    p.add_argument("--mode", choices=sorted(MODE_NAMES), default="multiview")
    p.add_argument("--output")
    p.set_defaults(func=cmd_structure)

    for action in sub.choices.values():
        action.add_argument("--report", help="also write the key=value stats to this file")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        stats = args.func(args)
    except PvpcError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, OSError) as exc:
        print(f"error: {args.command}: {exc}", file=sys.stderr)
        return 1
    if stats is not None:
        text = format_report(stats)
        sys.stdout.write(text)
        if args.report:
            _write_atomic(args.report, text)
    return 0


if __name__ == "__main__":
    sys.exit(main())
