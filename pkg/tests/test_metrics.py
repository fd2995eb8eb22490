import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.interpolate import PchipInterpolator

from pvpc.errors import BadView, InvalidCloud, NoOverlap, NormalsRequired
from pvpc.metrics import (
    CSV_COLUMNS, PSNR_CAP, BdRateWarning, RdCurve, RdPoint, attribute_psnr, bd_rate,
    bd_rate_detail, correspond, evaluate, geometry_d1_d2, mean_attribute_psnr, read_rd_csv, write_rd_csv,
)
from pvpc.model import PlenopticPointCloud, estimate_normals

from conftest import random_cloud


# ---- independent oracles -------------------------------------------------

def brute_nn(ref, qry):
    d2 = ((qry[:, None, :].astype(np.int64) - ref[None, :, :]) ** 2).sum(-1)
    idx = np.argmin(d2, axis=1)  # first minimum: lowest index
    return idx, d2[np.arange(len(qry)), idx]


def ycbcr_709(rgb):
    r, g, b = (np.asarray(rgb, float)[..., i] for i in range(3))
    y = 0.2126 * r + 0.7152 * g + 0.0722 * b
    return np.stack([y, (b - y) / 1.8556 + 128, (r - y) / 1.5748 + 128], -1)


def capped(mse, peak):
    return PSNR_CAP if mse == 0 else min(PSNR_CAP, 10 * np.log10(peak ** 2 / mse))


def brute_attribute_psnr(ref, dst, view):
    fi, _ = brute_nn(dst.positions, ref.positions)
    bi, _ = brute_nn(ref.positions, dst.positions)
    a, b = ycbcr_709(ref.colors[:, view]), ycbcr_709(dst.colors[:, view])
    out = []
    for c in range(3):
        fwd = np.mean((a[:, c] - b[fi, c]) ** 2)
        bwd = np.mean((b[:, c] - a[bi, c]) ** 2)
        out.append(min(capped(fwd, 255), capped(bwd, 255)))
    return tuple(out)


def brute_d1_d2(ref, dst, normals, peak):
    fi, fd = brute_nn(dst.positions, ref.positions)
    bi, bd = brute_nn(ref.positions, dst.positions)
    d1 = min(capped(fd.mean(), peak), capped(bd.mean(), peak))
    ef = dst.positions[fi] - ref.positions
    eb = dst.positions - ref.positions[bi]
    pf = np.mean([np.dot(e, n) ** 2 for e, n in zip(ef, normals)])
    pb = np.mean([np.dot(e, normals[j]) ** 2 for e, j in zip(eb, bi)])
    return d1, min(capped(pf, peak), capped(pb, peak))


def jittered(rng, cloud, jitter=1, color_noise=6, drop=0.1):
    keep = rng.random(len(cloud)) > drop
    pos = np.clip(cloud.positions[keep] + rng.integers(-jitter, jitter + 1, (keep.sum(), 3)), 0, 1023)
    col = np.clip(cloud.colors[keep] + rng.integers(-color_noise, color_noise + 1, cloud.colors[keep].shape), 0, 255)
    return PlenopticPointCloud.from_arrays(pos, col)


def gray_grid(step=3, side=10, value=100, views=1):
    xs, ys = np.meshgrid(np.arange(side) * step, np.arange(side) * step)
    pos = np.stack([xs.ravel(), ys.ravel(), np.full(side * side, 7)], 1) + 10
    return PlenopticPointCloud(pos, np.full((side * side, views, 3), value))


# ---- attribute PSNR ------------------------------------------------------

def test_identical_clouds_hit_cap(rng):
    cloud = random_cloud(rng, 300, views=3)
    assert attribute_psnr(cloud, cloud, 1) == (PSNR_CAP,) * 3
    assert mean_attribute_psnr(cloud, cloud) == (PSNR_CAP,) * 3
    normals = estimate_normals(cloud)
    assert geometry_d1_d2(cloud, cloud, normals) == (PSNR_CAP, PSNR_CAP)


def test_luma_off_by_one():
    ref = gray_grid(value=100)
    dst = gray_grid(value=101)
    y, cb, cr = attribute_psnr(ref, dst, 0)
    assert y == pytest.approx(10 * np.log10(255 ** 2), abs=1e-9)
    assert round(y, 2) == 48.13
    assert cb == cr == PSNR_CAP


@pytest.mark.parametrize("seed", range(4))
def test_attribute_psnr_matches_brute_force(seed):
    rng = np.random.default_rng(seed)
    ref = random_cloud(rng, 400 + 400 * seed, views=2, extent=24)
    dst = jittered(rng, ref)
    matches = correspond(ref, dst)
    fi, fd = brute_nn(dst.positions, ref.positions)
    bi, bd = brute_nn(ref.positions, dst.positions)
    assert np.array_equal(matches.forward, fi) and np.array_equal(matches.forward_d2, fd)
    assert np.array_equal(matches.backward, bi) and np.array_equal(matches.backward_d2, bd)
    for view in range(2):
        # same pairs; values differ only by float rounding in the color transform
        assert attribute_psnr(ref, dst, view) == pytest.approx(brute_attribute_psnr(ref, dst, view), abs=1e-9)


def test_attribute_psnr_permutation_invariant(rng):
    # same geometry, so every match is an exact hit and no tie-break is involved
    ref = random_cloud(rng, 500, extent=20)
    dst = jittered(rng, ref, jitter=0, drop=0)
    perm = rng.permutation(len(dst))
    shuffled = PlenopticPointCloud.from_arrays(dst.positions[perm], dst.colors[perm])
    assert attribute_psnr(ref, dst, 0) == pytest.approx(attribute_psnr(ref, shuffled, 0), abs=1e-9)


def test_attribute_errors(rng):
    a = random_cloud(rng, 50, views=2)
    with pytest.raises(BadView):
        attribute_psnr(a, a, 2)
    with pytest.raises(BadView):
        attribute_psnr(a, a, -1)
    with pytest.raises(InvalidCloud):
        attribute_psnr(a, random_cloud(rng, 50, views=3), 0)


# ---- geometry ------------------------------------------------------------

def test_in_plane_displacement():
    ref = gray_grid()
    dst = PlenopticPointCloud(ref.positions + [1, 0, 0], ref.colors)
    normals = np.tile([0.0, 0.0, 1.0], (len(ref), 1))
    d1, d2 = geometry_d1_d2(ref, dst, normals)
    assert d1 == pytest.approx(10 * np.log10(1023 ** 2), abs=1e-9)
    assert d2 == PSNR_CAP


@pytest.mark.parametrize("seed", range(3))
def test_d1_d2_match_brute_force(seed):
    rng = np.random.default_rng(100 + seed)
    ref = random_cloud(rng, 2000 if seed == 0 else 600, extent=30)
    dst = jittered(rng, ref, jitter=2)
    normals = estimate_normals(ref).vectors
    assert geometry_d1_d2(ref, dst, normals) == brute_d1_d2(ref, dst, normals, 1023)


@pytest.mark.parametrize("factor", [2, 3, 5])
def test_d1_scale_invariance(rng, factor):
    ref = random_cloud(rng, 300, extent=20)
    dst = jittered(rng, ref)
    normals = estimate_normals(ref).vectors
    base, _ = geometry_d1_d2(ref, dst, normals, peak=100)
    big_ref = PlenopticPointCloud.from_arrays(ref.positions * factor, ref.colors)
    big_dst = PlenopticPointCloud.from_arrays(dst.positions * factor, dst.colors)
    scaled, _ = geometry_d1_d2(big_ref, big_dst, normals, peak=100 * factor)
    assert scaled == pytest.approx(base, abs=1e-9)


def test_normals_required(rng):
    a = random_cloud(rng, 20)
    with pytest.raises(NormalsRequired):
        geometry_d1_d2(a, a, None)
    with pytest.raises(NormalsRequired):
        geometry_d1_d2(a, a, np.zeros((19, 3)))


def test_evaluate_fills_every_field(rng):
    ref = random_cloud(rng, 300, views=2, extent=16)
    dst = jittered(rng, ref, jitter=0, drop=0)
    point = evaluate(ref, dst, 1000, 600, 300, qp_i=32, label="x")
    assert point.psnr_y == pytest.approx(np.mean([attribute_psnr(ref, dst, v)[0] for v in range(2)]))
    assert point.d1 == PSNR_CAP and point.qp_i == 32


# ---- RD points and CSV ---------------------------------------------------

def test_rd_point_invariants():
    RdPoint(100, 60, 40, 30.0, 40.0, 40.0, 60.0, 65.0)
    with pytest.raises(ValueError):
        RdPoint(90, 60, 40, 30.0, 40.0, 40.0, 60.0, 65.0)
    with pytest.raises(ValueError):
        RdPoint(100, 60, 40, 0.0, 40.0, 40.0, 60.0, 65.0)
    with pytest.raises(ValueError):
        RdPoint(100, 60, 40, 100.0, 40.0, 40.0, 60.0, 65.0)


def test_rd_curve_rules():
    with pytest.raises(ValueError):
        RdCurve.from_pairs([(100, 30)])
    with pytest.raises(ValueError):
        RdCurve.from_pairs([(100, 30), (100, 31)])
    curve = RdCurve.from_pairs([(300, 35), (100, 30)])
    assert [p.total_bits for p in curve] == [100, 300]


def test_csv_round_trip(tmp_path):
    points = [
        RdPoint(12345, 8000, 4000, 33.12346, 40.5, 41.25, 70.0, 75.5, 22, "r1"),
        RdPoint(999, 500, 400, 29.0, 38.0, 39.0, 65.0, 70.0, None, ""),
    ]
    path = tmp_path / "rd.csv"
    write_rd_csv(path, points[:1])
    write_rd_csv(path, points[1:], append=True)
    lines = path.read_text().splitlines()
    assert lines[0] == ",".join(CSV_COLUMNS)
    assert lines[1] == "r1,22,12345,8000,4000,33.1235,40.5000,41.2500,70.0000,75.5000"
    back = read_rd_csv(path)
    assert back[1] == points[1]
    assert back[0].psnr_y == 33.1235 and back[0].total_bits == 12345


# ---- BD-rate -------------------------------------------------------------

ANCHOR = [(1000, 30), (2000, 33), (4000, 36), (8000, 39)]
TEST = [(900, 30), (1700, 33), (3300, 36), (6900, 39)]


def trapezoid_bd(anchor, test, samples=10_000):
    """Dense trapezoid integration of the same PCHIP log-rate interpolants."""
    qa, ra = np.array([q for _, q in anchor], float), np.log10([r for r, _ in anchor])
    qt, rt = np.array([q for _, q in test], float), np.log10([r for r, _ in test])
    lo, hi = max(qa.min(), qt.min()), min(qa.max(), qt.max())
    grid = np.linspace(lo, hi, samples)
    diff = PchipInterpolator(qt, rt)(grid) - PchipInterpolator(qa, ra)(grid)
    avg = np.sum((diff[1:] + diff[:-1]) / 2 * np.diff(grid)) / (hi - lo)
    return 100 * (10 ** avg - 1)


def test_bd_rate_example_matches_trapezoid_oracle():
    value = bd_rate(RdCurve.from_pairs(ANCHOR), RdCurve.from_pairs(TEST))
    assert value == pytest.approx(trapezoid_bd(ANCHOR, TEST), abs=0.1)
    assert -20 < value < -5


def test_bd_rate_identity_and_doubling():
    a = RdCurve.from_pairs(ANCHOR)
    assert bd_rate(a, a) == 0.0
    doubled = RdCurve.from_pairs([(2 * r, q) for r, q in ANCHOR])
    assert bd_rate(a, doubled) == pytest.approx(100.0, abs=1e-6)


def random_curve(rng, start_rate=None):
    q = np.sort(rng.uniform(25, 45, 4))
    while np.any(np.diff(q) < 0.3):
        q = np.sort(rng.uniform(25, 45, 4))
    r = np.cumsum(rng.uniform(200, 3000, 4)) + (start_rate or rng.uniform(100, 2000))
    return [(int(x), float(y)) for x, y in zip(r, q)]


def test_random_curves_against_oracle():
    rng = np.random.default_rng(77)
    done = 0
    while done < 50:
        a, t = random_curve(rng), random_curve(rng)
        try:
            value = bd_rate(RdCurve.from_pairs(a), RdCurve.from_pairs(t))
        except NoOverlap:
            continue
        assert value == pytest.approx(trapezoid_bd(a, t), abs=0.1)
        done += 1


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 31))
def test_bd_rate_antisymmetric(seed):
    rng = np.random.default_rng(seed)
    a, t = RdCurve.from_pairs(random_curve(rng)), RdCurve.from_pairs(random_curve(rng))
    try:
        ab = bd_rate(a, t)
    except NoOverlap:
        return
    ba = bd_rate(t, a)
    assert (1 + ab / 100) * (1 + ba / 100) == pytest.approx(1.0, abs=1e-9)
    assert bd_rate(a, a) == 0.0


def test_no_overlap():
    a = RdCurve.from_pairs([(100, 20), (200, 25), (300, 28), (400, 30)])
    b = RdCurve.from_pairs([(100, 31), (200, 33), (300, 35), (400, 37)])
    with pytest.raises(NoOverlap):
        bd_rate(a, b)


def test_short_curves_warn_and_fall_back():
    a = RdCurve.from_pairs(ANCHOR[:3])
    t = RdCurve.from_pairs(TEST[:2])
    with pytest.warns(BdRateWarning):
        value, _, fits = bd_rate_detail(a, t)
    assert fits == ("poly2", "poly1")
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        assert bd_rate(RdCurve.from_pairs(ANCHOR), RdCurve.from_pairs(ANCHOR)) == 0.0
    doubled = RdCurve.from_pairs([(2 * r, q) for r, q in ANCHOR[:2]])
    with pytest.warns(BdRateWarning):
        assert bd_rate(RdCurve.from_pairs(ANCHOR[:2]), doubled) == pytest.approx(100.0, abs=1e-6)


def test_other_metric_and_rate_selectors():
    pts_a = [RdPoint(1000 * 2 ** i, 500 * 2 ** i, 100, 30.0 + i, 40.0, 40.0, 60.0 + i, 65.0) for i in range(4)]
    pts_b = [RdPoint(800 * 2 ** i, 400 * 2 ** i, 100, 30.0 + i, 40.0, 40.0, 60.0 + i, 65.0) for i in range(4)]
    assert bd_rate(RdCurve(pts_a), RdCurve(pts_b), metric="d1") == pytest.approx(-20.0, abs=1e-6)
    assert bd_rate(RdCurve(pts_a), RdCurve(pts_b), rate="attr") == pytest.approx(-20.0, abs=1e-6)
    with pytest.raises(ValueError):
        bd_rate(RdCurve(pts_a), RdCurve(pts_b), metric="psnr")
