"""Attribute PSNR, geometry D1/D2, RD curves and Bjontegaard delta rate.

Every distortion is computed in both directions (reference to distorted
and back) with exact nearest neighbors, ties going to the lowest point
index, and the smaller of the two directional PSNRs is reported. PSNRs are
capped at ``PSNR_CAP``.
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import asdict, dataclass, fields
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

from .color import rgb_to_ycbcr_float
from .errors import BadView, EmptyCloud, InvalidCloud, NoOverlap, NormalsRequired
from .model import NormalSet, PlenopticPointCloud, nearest_neighbors

PSNR_CAP = 99.99


class BdRateWarning(UserWarning):
    """Raised when a curve is too short for the piecewise-cubic fit."""


def psnr(mse: float, peak: float) -> float:
    if mse <= 0:
        return PSNR_CAP
    return float(min(PSNR_CAP, 10.0 * np.log10(peak * peak / mse)))


def _check_pair(reference: PlenopticPointCloud, distorted: PlenopticPointCloud):
    if len(reference) == 0 or len(distorted) == 0:
        raise EmptyCloud("metrics need two non-empty clouds")


@dataclass(frozen=True)
class Correspondence:
    """Nearest-neighbor matches in both directions.

    ``forward[i]`` is the distorted point closest to reference point ``i``
    and ``backward[j]`` the reference point closest to distorted point
    ``j``; ``*_d2`` hold the squared distances.
    """

    forward: np.ndarray
    forward_d2: np.ndarray
    backward: np.ndarray
    backward_d2: np.ndarray


def correspond(reference: PlenopticPointCloud, distorted: PlenopticPointCloud) -> Correspondence:
    _check_pair(reference, distorted)
    fwd, fwd_d2 = nearest_neighbors(distorted.positions, reference.positions)
    bwd, bwd_d2 = nearest_neighbors(reference.positions, distorted.positions)
    return Correspondence(fwd, fwd_d2, bwd, bwd_d2)


def attribute_psnr(
    reference: PlenopticPointCloud,
    distorted: PlenopticPointCloud,
    view: int,
    matches: Correspondence | None = None,
) -> tuple[float, float, float]:
    """(Y, Cb, Cr) PSNR of one view on BT.709 full-range YCbCr values."""
    _check_pair(reference, distorted)
    if reference.view_count != distorted.view_count:
        raise InvalidCloud(
            f"view counts differ: {reference.view_count} vs {distorted.view_count}"
        )
    if not 0 <= view < reference.view_count:
        raise BadView(f"view {view} outside 0..{reference.view_count - 1}")
    matches = matches or correspond(reference, distorted)
    bd = reference.attr_bit_depth
    peak = float((1 << bd) - 1)
    ref = rgb_to_ycbcr_float(reference.colors[:, view], bd)
    dst = rgb_to_ycbcr_float(distorted.colors[:, view], bd)
    mse_fwd = np.mean((ref - dst[matches.forward]) ** 2, axis=0)
    mse_bwd = np.mean((dst - ref[matches.backward]) ** 2, axis=0)
    return tuple(min(psnr(a, peak), psnr(b, peak)) for a, b in zip(mse_fwd, mse_bwd))


def mean_attribute_psnr(reference, distorted, matches: Correspondence | None = None):
    """Per-component PSNR averaged over all views."""
    matches = matches or correspond(reference, distorted)
    per_view = [attribute_psnr(reference, distorted, v, matches) for v in range(reference.view_count)]
    return tuple(float(x) for x in np.mean(per_view, axis=0))


def geometry_peak(cloud: PlenopticPointCloud) -> float:
    return float((1 << cloud.geom_bit_depth) - 1)


def geometry_d1_d2(
    reference: PlenopticPointCloud,
    distorted: PlenopticPointCloud,
    reference_normals: NormalSet | np.ndarray | None,
    peak: float | None = None,
    matches: Correspondence | None = None,
) -> tuple[float, float]:
    """Point-to-point (D1) and point-to-plane (D2) PSNR.

    D2 projects each error vector onto the normal of the reference point of
    the matched pair, in both directions. ``peak`` defaults to
    ``2**geom_bit_depth - 1`` of the reference.
    """
    _check_pair(reference, distorted)
    if reference_normals is None:
        raise NormalsRequired("point-to-plane distortion needs reference normals")
    normals = np.asarray(getattr(reference_normals, "vectors", reference_normals), np.float64)
    if normals.shape != (len(reference), 3):
        raise NormalsRequired(
            f"expected {len(reference)} reference normals, got shape {normals.shape}"
        )
    matches = matches or correspond(reference, distorted)
    peak = geometry_peak(reference) if peak is None else float(peak)
    ref = reference.positions
    dst = distorted.positions

    d1 = min(psnr(float(np.mean(matches.forward_d2)), peak),
             psnr(float(np.mean(matches.backward_d2)), peak))
    err_fwd = (dst[matches.forward] - ref).astype(np.float64)
    err_bwd = (dst - ref[matches.backward]).astype(np.float64)
    plane_fwd = np.einsum("ij,ij->i", err_fwd, normals) ** 2
    plane_bwd = np.einsum("ij,ij->i", err_bwd, normals[matches.backward]) ** 2
    d2 = min(psnr(float(np.mean(plane_fwd)), peak), psnr(float(np.mean(plane_bwd)), peak))
    return d1, d2


@dataclass(frozen=True)
class RdPoint:
    total_bits: int
    attr_bits: int
    geom_bits: int
    psnr_y: float
    psnr_cb: float
    psnr_cr: float
    d1: float
    d2: float
    qp_i: int | None = None
    label: str = ""

    def __post_init__(self):
        if self.total_bits < self.attr_bits + self.geom_bits:
            raise ValueError("total_bits must cover attribute and geometry bits")
        for name in ("psnr_y", "psnr_cb", "psnr_cr"):
            value = getattr(self, name)
            if not 0 < value <= PSNR_CAP:
                raise ValueError(f"{name}={value} outside (0, {PSNR_CAP}]")

    def rate(self, kind: str = "total") -> int:
        return {"total": self.total_bits, "attr": self.attr_bits}[kind]

    def metric(self, name: str) -> float:
        if name not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        return getattr(self, name)


METRICS = ("psnr_y", "psnr_cb", "psnr_cr", "d1", "d2")
CSV_COLUMNS = ("label", "qp_i", "total_bits", "attr_bits", "geom_bits",
               "psnr_y", "psnr_cb", "psnr_cr", "d1", "d2")


class RdCurve:
    """RD points ordered by strictly increasing total bits."""

    def __init__(self, points):
        points = sorted(points, key=lambda p: p.total_bits)
        if len(points) < 2:
            raise ValueError("an RD curve needs at least two points")
        bits = [p.total_bits for p in points]
        if any(b1 >= b2 for b1, b2 in zip(bits, bits[1:])):
            raise ValueError("RD curve total bits must be strictly increasing")
        self.points = tuple(points)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    @classmethod
    def from_pairs(cls, pairs, metric: str = "psnr_y"):
        """Build a curve from ``(rate, quality)`` pairs; other fields are filler."""
        pts = []
        for rate, quality in pairs:
            values = dict(psnr_y=PSNR_CAP, psnr_cb=PSNR_CAP, psnr_cr=PSNR_CAP, d1=0.0, d2=0.0)
            values[metric] = quality
            pts.append(RdPoint(int(rate), int(rate), 0, **values))
        return cls(pts)


def evaluate(
    reference: PlenopticPointCloud,
    decoded: PlenopticPointCloud,
    total_bits: int,
    attr_bits: int,
    geom_bits: int,
    reference_normals: NormalSet | None = None,
    qp_i: int | None = None,
    label: str = "",
) -> RdPoint:
    """All RD point fields for one decoded cloud."""
    from .model import estimate_normals

    matches = correspond(reference, decoded)
    y, cb, cr = mean_attribute_psnr(reference, decoded, matches)
    if reference_normals is None:
        reference_normals = estimate_normals(reference, min(16, len(reference)))
    d1, d2 = geometry_d1_d2(reference, decoded, reference_normals, matches=matches)
    return RdPoint(total_bits, attr_bits, geom_bits, y, cb, cr, d1, d2, qp_i, label)


def write_rd_csv(path, points, append: bool = False):
    path = Path(path)
    new = not (append and path.exists() and path.stat().st_size > 0)
    with open(path, "a" if append else "w", newline="") as fh:
        writer = csv.writer(fh)
        if new:
            writer.writerow(CSV_COLUMNS)
        for p in points:
            row = asdict(p)
            writer.writerow(_format(row[c]) for c in CSV_COLUMNS)


def _format(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.4f}"
    return value


def read_rd_csv(path) -> list[RdPoint]:
    kinds = {f.name: f.type for f in fields(RdPoint)}
    out = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            values = {}
            for name in CSV_COLUMNS:
                raw = row[name]
                if name == "label":
                    values[name] = raw
                elif name == "qp_i":
                    values[name] = int(raw) if raw else None
                elif "int" in str(kinds[name]):
                    values[name] = int(raw)
                else:
                    values[name] = float(raw)
            out.append(RdPoint(**values))
    return out


def _fit(quality: np.ndarray, log_rate: np.ndarray):
    """Integrable fit of log-rate over quality: PCHIP, or a polynomial below 4 points."""
    if len(quality) >= 4:
        interp = PchipInterpolator(quality, log_rate)
        return lambda lo, hi: float(interp.integrate(lo, hi)), "pchip"
    coefs = np.polyint(np.polyfit(quality, log_rate, len(quality) - 1))
    return lambda lo, hi: float(np.polyval(coefs, hi) - np.polyval(coefs, lo)), f"poly{len(quality) - 1}"


def _curve_arrays(curve: RdCurve, metric: str, rate: str):
    q = np.array([p.metric(metric) for p in curve], dtype=np.float64)
    r = np.log10(np.array([p.rate(rate) for p in curve], dtype=np.float64))
    order = np.argsort(q, kind="stable")
    q, r = q[order], r[order]
    if np.any(np.diff(q) <= 0):
        raise ValueError(f"{metric} values on an RD curve must be distinct")
    return q, r


def bd_rate_detail(anchor: RdCurve, test: RdCurve, metric: str = "psnr_y", rate: str = "total"):
    """Returns ``(percent, interval, fits)``; see :func:`bd_rate`."""
    qa, ra = _curve_arrays(anchor, metric, rate)
    qt, rt = _curve_arrays(test, metric, rate)
    lo, hi = max(qa[0], qt[0]), min(qa[-1], qt[-1])
    if not hi > lo:
        raise NoOverlap(f"{metric} ranges [{qa[0]}, {qa[-1]}] and [{qt[0]}, {qt[-1]}] do not overlap")
    int_a, fit_a = _fit(qa, ra)
    int_t, fit_t = _fit(qt, rt)
    if "poly" in fit_a or "poly" in fit_t:
        warnings.warn(f"short RD curve: using {fit_a}/{fit_t} instead of piecewise cubic",
                      BdRateWarning, stacklevel=3)
    avg_diff = (int_t(lo, hi) - int_a(lo, hi)) / (hi - lo)
    return 100.0 * (10.0 ** avg_diff - 1.0), (lo, hi), (fit_a, fit_t)


def bd_rate(anchor: RdCurve, test: RdCurve, metric: str = "psnr_y", rate: str = "total") -> float:
    """Bjontegaard delta rate of ``test`` against ``anchor`` in percent.

    log10(rate) is interpolated as a monotone piecewise-cubic Hermite
    function of quality per curve and integrated over the common quality
    interval; negative values mean ``test`` needs fewer bits. Curves with
    2 or 3 points fall back to a polynomial through all points and emit a
    :class:`BdRateWarning`.
    """
    return bd_rate_detail(anchor, test, metric, rate)[0]
