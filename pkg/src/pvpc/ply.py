"""PLY reader/writer for plenoptic clouds (per-view ``red_k/green_k/blue_k``)."""

from __future__ import annotations

import io
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import MalformedHeader, NonIntegerGeometry
from .model import PlenopticPointCloud

_TYPES = {
    "char": "i1", "int8": "i1",
    "uchar": "u1", "uint8": "u1",
    "short": "i2", "int16": "i2",
    "ushort": "u2", "uint16": "u2",
    "int": "i4", "int32": "i4",
    "uint": "u4", "uint32": "u4",
    "float": "f4", "float32": "f4",
    "double": "f8", "float64": "f8",
}
_FORMATS = {"ascii": None, "binary_little_endian": "<", "binary_big_endian": ">"}
_COLOR = re.compile(r"^(red|green|blue)(?:_(\d+))?$")


@dataclass
class PlyHeaderInfo:
    format: str
    vertex_count: int
    view_count: int
    property_order: list = field(default_factory=list)
    comments: list = field(default_factory=list)
    # (element name, count, [(prop name, dtype or ('list', count_t, item_t))])
    elements: list = field(default_factory=list)
    data_offset: int = 0


def parse_header(data: bytes) -> PlyHeaderInfo:
    end = data.find(b"end_header")
    if not data.startswith(b"ply") or end < 0:
        raise MalformedHeader("missing 'ply' magic or 'end_header'")
    nl = data.find(b"\n", end)
    offset = len(data) if nl < 0 else nl + 1
    lines = data[:end].decode("ascii", errors="replace").splitlines()[1:]

    fmt = None
    elements = []
    comments = []
    for raw in lines:
        words = raw.split()
        if not words:
            continue
        key = words[0]
        if key == "format":
            if len(words) < 2 or words[1] not in _FORMATS:
                raise MalformedHeader(f"unsupported format line {raw!r}")
            fmt = words[1]
        elif key in ("comment", "obj_info"):
            comments.append(raw.partition(" ")[2])
        elif key == "element":
            if len(words) != 3:
                raise MalformedHeader(f"bad element line {raw!r}")
            elements.append((words[1], int(words[2]), []))
        elif key == "property":
            if not elements:
                raise MalformedHeader("property before any element")
            if words[1] == "list":
                if len(words) != 5:
                    raise MalformedHeader(f"bad list property {raw!r}")
                elements[-1][2].append((words[4], ("list", _dtype(words[2]), _dtype(words[3]))))
            else:
                if len(words) != 3:
                    raise MalformedHeader(f"bad property line {raw!r}")
                elements[-1][2].append((words[2], _dtype(words[1])))
        else:
            raise MalformedHeader(f"unknown header keyword {key!r}")
    if fmt is None:
        raise MalformedHeader("missing format line")

    vertex = [e for e in elements if e[0] == "vertex"]
    if not vertex:
        raise MalformedHeader("no vertex element")
    _, count, props = vertex[0]
    names = [p[0] for p in props]
    for axis in "xyz":
        if axis not in names:
            raise MalformedHeader(f"vertex element lacks coordinate property {axis!r}")
    views = _color_layout(names)
    return PlyHeaderInfo(fmt, count, len(views), names, comments, elements, offset)


def _dtype(name: str) -> str:
    try:
        return _TYPES[name]
    except KeyError:
        raise MalformedHeader(f"unknown property type {name!r}") from None


def _color_layout(names) -> list:
    """Map view index -> (red, green, blue) property names, views ordered by suffix."""
    found: dict = {}
    for name in names:
        m = _COLOR.match(name)
        if m:
            view = 0 if m.group(2) is None else int(m.group(2))
            slot = found.setdefault(view, {})
            if m.group(1) in slot:
                raise MalformedHeader(f"duplicate color property for view {view}: {name}")
            slot[m.group(1)] = name
    if not found:
        raise MalformedHeader("no color properties")
    if sorted(found) != list(range(len(found))):
        raise MalformedHeader(f"view suffixes {sorted(found)} are not contiguous from 0")
    layout = []
    for view in range(len(found)):
        slot = found[view]
        missing = [c for c in ("red", "green", "blue") if c not in slot]
        if missing:
            raise MalformedHeader(f"view {view} color triplet incomplete, missing {missing}")
        layout.append((slot["red"], slot["green"], slot["blue"]))
    return layout


def _bit_depth_comment(comments, key):
    for c in comments:
        words = c.split()
        if len(words) == 2 and words[0] == key:
            return int(words[1])
    return None


def read_plenoptic_ply(source) -> PlenopticPointCloud:
    """Read a cloud from a path, bytes, or binary file object.

    Bit depths come from ``geom_bit_depth``/``attr_bit_depth`` comments when
    present; otherwise geometry depth is the bit length of the largest
    coordinate and attribute depth follows the color property type.
    """
    data = _as_bytes(source)
    info = parse_header(data)
    name, count, props = next(e for e in info.elements if e[0] == "vertex")
    vertex = _read_vertex(data, info, props)

    layout = _color_layout([p[0] for p in props])
    xyz = np.stack([vertex[a] for a in "xyz"], axis=1)
    if xyz.dtype.kind == "f":
        if not np.all(np.isfinite(xyz)) or np.any(xyz != np.round(xyz)):
            raise NonIntegerGeometry("float coordinates are not integral")
    if xyz.size and xyz.min() < 0:
        raise NonIntegerGeometry("negative coordinate")
    positions = xyz.astype(np.int64)
    colors = np.stack(
        [np.stack([vertex[c] for c in triplet], axis=1) for triplet in layout], axis=1
    ).astype(np.int64)

    geom_depth = _bit_depth_comment(info.comments, "geom_bit_depth")
    if geom_depth is None:
        geom_depth = max(1, int(positions.max()).bit_length()) if len(positions) else 1
    attr_depth = _bit_depth_comment(info.comments, "attr_bit_depth")
    if attr_depth is None:
        attr_depth = 8 * np.dtype(dict(props)[layout[0][0]]).itemsize
    return PlenopticPointCloud.from_arrays(positions, colors, geom_depth, attr_depth)


def _as_bytes(source) -> bytes:
    if isinstance(source, (bytes, bytearray, memoryview)):
        return bytes(source)
    if isinstance(source, (str, Path)):
        return Path(source).read_bytes()
    return source.read()


def _read_vertex(data: bytes, info: PlyHeaderInfo, props):
    if any(isinstance(p[1], tuple) for p in props):
        raise MalformedHeader("list properties on vertex element are not supported")
    body = data[info.data_offset:]
    if info.format == "ascii":
        return _read_ascii(body, info, props)
    endian = _FORMATS[info.format]
    skip = 0
    for ename, ecount, eprops in info.elements:
        if ename == "vertex":
            break
        if any(isinstance(p[1], tuple) for p in eprops):
            raise MalformedHeader(f"list element {ename!r} before vertex is not supported")
        skip += ecount * sum(np.dtype(p[1]).itemsize for p in eprops)
    dtype = np.dtype([(p[0], endian + p[1]) for p in props])
    need = skip + dtype.itemsize * info.vertex_count
    if len(body) < need:
        raise MalformedHeader(f"binary body holds {len(body)} bytes, need {need}")
    return np.frombuffer(body, dtype=dtype, count=info.vertex_count, offset=skip)


def _read_ascii(body: bytes, info: PlyHeaderInfo, props):
    lines = body.decode("ascii").split("\n")
    start = 0
    for ename, ecount, _ in info.elements:
        if ename == "vertex":
            break
        start += ecount
    rows = [ln.split() for ln in lines[start:start + info.vertex_count]]
    if len(rows) < info.vertex_count or any(len(r) != len(props) for r in rows):
        raise MalformedHeader("ascii vertex rows do not match the declared properties")
    out = {}
    for col, (pname, ptype) in enumerate(props):
        values = [r[col] for r in rows]
        if np.dtype(ptype).kind == "f":
            out[pname] = np.array(values, dtype=np.float64)
        else:
            out[pname] = np.array(values, dtype=np.int64)
    return out


def write_plenoptic_ply(cloud: PlenopticPointCloud, format: str = "binary_little_endian") -> bytes:
    if format not in ("ascii", "binary_little_endian"):
        raise ValueError(f"unsupported output format {format!r}")
    n, views = len(cloud), cloud.view_count
    ctype, cdt = ("uchar", "u1") if cloud.attr_bit_depth <= 8 else ("ushort", "u2")
    head = [
        "ply",
        f"format {format} 1.0",
        f"comment geom_bit_depth {cloud.geom_bit_depth}",
        f"comment attr_bit_depth {cloud.attr_bit_depth}",
        f"element vertex {n}",
        "property float x",
        "property float y",
        "property float z",
    ]
    for k in range(views):
        head += [f"property {ctype} {c}_{k}" for c in ("red", "green", "blue")]
    head.append("end_header")
    out = io.BytesIO()
    out.write(("\n".join(head) + "\n").encode("ascii"))
    if format == "ascii":
        flat = cloud.colors.reshape(n, views * 3)
        for p, c in zip(cloud.positions, flat):
            out.write((" ".join(str(int(v)) for v in (*p, *c)) + "\n").encode("ascii"))
        return out.getvalue()
    fields = [("x", "<f4"), ("y", "<f4"), ("z", "<f4")]
    fields += [(f"c{k}_{c}", "<" + cdt) for k in range(views) for c in range(3)]
    rec = np.empty(n, dtype=np.dtype(fields))
    for i, a in enumerate("xyz"):
        rec[a] = cloud.positions[:, i]
    for k in range(views):
        for c in range(3):
            rec[f"c{k}_{c}"] = cloud.colors[:, k, c]
    out.write(rec.tobytes())
    return out.getvalue()
