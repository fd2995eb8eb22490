from pathlib import Path

import pytest

from pvpc.errors import QpOutOfRange
from pvpc.structure import (
    ANCHOR, assign_qp, build_coding_structure, build_independent_structure, dump_structure,
)

GOLDEN = Path(__file__).parent / "golden"

# QP offsets per (level, frame), written out from the hierarchical QP table
QP_TABLE = {
    (ANCHOR, 0): 0, (ANCHOR, 1): 3,
    (0, 0): 1, (0, 1): 4,
    (1, 0): 2, (1, 1): 5,
    (2, 0): 3, (2, 1): 6,
    (3, 0): 4, (3, 1): 7,
}


def check_structure(structure):
    """Topological oracle plus the per-unit structural rules."""
    seen = set()
    keys = [(u.view, u.frame) for u in structure.units]
    assert len(keys) == len(set(keys)) == 2 * structure.view_count
    assert set(keys) == {(v, f) for v in range(structure.view_count) for f in (0, 1)}
    for u in structure.units:
        for ref in u.refs:
            assert ref in seen, f"{(u.view, u.frame)} uses {ref} before it is decoded"
        if u.frame == 1:
            assert u.refs == ((u.view, 0),)
            assert u.slice_type == "P"
        elif (u.view, u.frame) == (0, 0):
            assert u.slice_type == "I" and u.refs == () and u.level == ANCHOR
        else:
            assert all(f == 0 for _, f in u.refs)
            assert 1 <= len(u.refs) <= 2
            assert u.slice_type == ("B" if len(u.refs) == 2 else "P")
        assert u.level in (ANCHOR, 0, 1, 2, 3)
        assert u.qp == structure.qp_i + QP_TABLE[(u.level, u.frame)]
        seen.add((u.view, u.frame))
    levels = {u.view: u.level for u in structure.units}
    for u in structure.units:
        assert levels[u.view] == u.level


class TestAssignQp:
    def test_examples(self):
        assert assign_qp(0, 0, 32) == 33
        assert assign_qp(3, 1, 32) == 39
        assert assign_qp(ANCHOR, 0, 32) == 32

    @pytest.mark.parametrize("qp_i", [22, 27, 32, 37, 42])
    def test_table(self, qp_i):
        for (level, frame), offset in QP_TABLE.items():
            assert assign_qp(level, frame, qp_i) == qp_i + offset

    def test_monotone_in_level(self):
        for frame in (0, 1):
            qps = [assign_qp(level, frame, 30) for level in (ANCHOR, 0, 1, 2, 3)]
            assert qps == sorted(qps)

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            assign_qp(4, 0, 32)
        with pytest.raises(ValueError):
            assign_qp(0, 2, 32)


class TestBuild:
    def test_nine_views(self):
        s = build_coding_structure(9, 32)
        assert len(s.units) == 18
        levels = {u.view: u.level for u in s.units}
        assert levels == {0: ANCHOR, 8: 0, 4: 1, 2: 2, 6: 2, 1: 3, 3: 3, 5: 3, 7: 3}
        assert s.unit(8, 0).refs == ((0, 0),)
        assert s.unit(4, 0).refs == ((0, 0), (8, 0))
        assert s.unit(2, 0).refs == ((0, 0), (4, 0))
        assert s.unit(6, 0).refs == ((4, 0), (8, 0))
        assert s.unit(5, 0).refs == ((4, 0), (6, 0))
        check_structure(s)

    def test_single_view(self):
        s = build_coding_structure(1, 32)
        assert [(u.view, u.frame, u.slice_type, u.refs) for u in s.units] == [
            (0, 0, "I", ()), (0, 1, "P", ((0, 0),)),
        ]

    def test_thirteen_views_trailing_group(self):
        s = build_coding_structure(13, 32)
        check_structure(s)
        assert s.unit(12, 0).level == 0 and s.unit(12, 0).refs == ((8, 0),)
        assert s.unit(10, 0).level == 1 and s.unit(10, 0).refs == ((8, 0), (12, 0))
        assert s.unit(9, 0).level == 2 and s.unit(9, 0).refs == ((8, 0), (10, 0))
        assert s.unit(11, 0).level == 2 and s.unit(11, 0).refs == ((10, 0), (12, 0))

    def test_later_key_views_are_bidirectional(self):
        s = build_coding_structure(25, 32)
        assert s.unit(16, 0).refs == ((8, 0),)
        assert s.unit(24, 0).slice_type == "B"
        assert s.unit(24, 0).refs == ((16, 0), (8, 0))

    @pytest.mark.parametrize("views", range(1, 33))
    def test_all_view_counts(self, views):
        check_structure(build_coding_structure(views, 27))

    def test_decoding_order_frame0_before_frame1(self):
        order = [(u.view, u.frame) for u in build_coding_structure(13, 32).units]
        for v in range(13):
            assert order.index((v, 0)) < order.index((v, 1))

    def test_qp_range(self):
        build_coding_structure(4, 0)
        build_coding_structure(4, 44)
        with pytest.raises(QpOutOfRange):
            build_coding_structure(4, 45)
        with pytest.raises(QpOutOfRange):
            build_coding_structure(4, -1)

    def test_independent_is_all_intra(self):
        s = build_independent_structure(5, 32)
        assert all(u.slice_type == "I" and u.refs == () and u.qp == 32 for u in s.units)
        assert len(s.units) == 10


@pytest.mark.parametrize("views", [9, 13])
def test_dump_matches_golden(views):
    golden = (GOLDEN / f"structure_v{views}_qp32.txt").read_text()
    assert dump_structure(build_coding_structure(views, 32)) == golden


def test_dump_is_deterministic():
    a = build_coding_structure(17, 30).dump()
    b = build_coding_structure(17, 30).dump()
    assert a == b
    assert a.splitlines()[0] == "view frame type level refs qp"
