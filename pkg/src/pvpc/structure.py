"""Multiview reference structure and hierarchical QP schedule.

Views form dyadic groups of 8 along the view axis. View 0 frame 0 is the
only intra unit. Key views (level 0) close each group, the group interior
is bisected into levels 1-3, and every frame-1 unit predicts only from
frame 0 of its own view.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import QpOutOfRange

GOP_SIZE = 8
ANCHOR = "anchor"
LEVELS = (ANCHOR, 0, 1, 2, 3)
MAX_QP = 51
FRAME1_QP_OFFSET = 3


@dataclass(frozen=True)
class CodingUnit:
    view: int
    frame: int
    slice_type: str  # "I", "P" or "B"
    level: object  # ANCHOR or 0..3
    refs: tuple  # ((view, frame), ...)
    qp: int


@dataclass(frozen=True)
class CodingStructure:
    view_count: int
    qp_i: int
    units: tuple  # decoding order
    mode: str = "multiview"

    def unit(self, view: int, frame: int) -> CodingUnit:
        for u in self.units:
            if u.view == view and u.frame == frame:
                return u
        raise KeyError((view, frame))

    def dump(self) -> str:
        return dump_structure(self)


def assign_qp(level, frame: int, qp_i: int) -> int:
    if frame not in (0, 1):
        raise ValueError(f"frame index must be 0 or 1, got {frame}")
    if level == ANCHOR:
        base = qp_i
    elif level in (0, 1, 2, 3):
        base = qp_i + level + 1
    else:
        raise ValueError(f"unknown hierarchical level {level!r}")
    return base + FRAME1_QP_OFFSET * frame


def _check_qp(qp_i: int):
    if not 0 <= qp_i <= MAX_QP - 7:
        raise QpOutOfRange(f"qpI {qp_i} outside [0, {MAX_QP - 7}]")


def _bisect(lo: int, hi: int, level: int, out: dict):
    if hi - lo < 2:
        return
    mid = (lo + hi) // 2
    out[mid] = (level, (lo, hi))
    _bisect(lo, mid, level + 1, out)
    _bisect(mid, hi, level + 1, out)


def build_coding_structure(view_count: int, qp_i: int) -> CodingStructure:
    """Hierarchical multiview structure for ``view_count`` views.

    A key view ``v0 + 8`` references ``v0`` and, when ``v0 - 8`` is itself a
    level-0 view, that one too. A trailing group shorter than 8 ends in a key
    view referencing the previous key only.
    """
    if view_count < 1:
        raise ValueError("view_count must be >= 1")
    _check_qp(qp_i)

    units = [
        CodingUnit(0, 0, "I", ANCHOR, (), assign_qp(ANCHOR, 0, qp_i)),
        CodingUnit(0, 1, "P", ANCHOR, ((0, 0),), assign_qp(ANCHOR, 1, qp_i)),
    ]
    v0 = 0
    while v0 < view_count - 1:
        key = min(v0 + GOP_SIZE, view_count - 1)
        plan = {}
        if key - v0 == GOP_SIZE and v0 - GOP_SIZE >= GOP_SIZE:
            plan[key] = (0, (v0, v0 - GOP_SIZE))
        else:
            plan[key] = (0, (v0,))
        _bisect(v0, key, 1, plan)
        for view in sorted(plan, key=lambda v: (plan[v][0], v)):
            level, refs = plan[view]
            slice_type = "B" if len(refs) == 2 else "P"
            units.append(CodingUnit(
                view, 0, slice_type, level, tuple((r, 0) for r in refs), assign_qp(level, 0, qp_i)
            ))
            units.append(CodingUnit(view, 1, "P", level, ((view, 0),), assign_qp(level, 1, qp_i)))
        v0 = key
    return CodingStructure(view_count, qp_i, tuple(units), "multiview")


def build_independent_structure(view_count: int, qp_i: int) -> CodingStructure:
    """Every unit intra-coded at ``qp_i``, views in order (no inter-view prediction)."""
    if view_count < 1:
        raise ValueError("view_count must be >= 1")
    _check_qp(qp_i)
    units = tuple(
        CodingUnit(v, f, "I", ANCHOR, (), qp_i) for v in range(view_count) for f in (0, 1)
    )
    return CodingStructure(view_count, qp_i, units, "independent")


def dump_structure(structure: CodingStructure) -> str:
    lines = ["view frame type level refs qp"]
    for u in structure.units:
        refs = ",".join(f"{v}.{f}" for v, f in u.refs) or "-"
        lines.append(f"{u.view} {u.frame} {u.slice_type} {u.level} {refs} {u.qp}")
    return "\n".join(lines) + "\n"
