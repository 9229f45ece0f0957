"""SVG overlays of calibration constructs in raster image coordinates."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from xml.sax.saxutils import quoteattr

import numpy as np

from .errors import GeometryError

STYLES = {
    "conic": 'fill="none" stroke="#d62728" stroke-width="2"',
    "horizon": 'stroke="#1f9bd6" stroke-width="2"',
    "construction": 'stroke="#333333" stroke-width="1" stroke-dasharray="6,3"',
    "circle": 'fill="none" stroke="#7f7f7f" stroke-width="1"',
    "point": 'fill="#2ca02c" stroke="none"',
    "conformal": 'fill="#ff7f0e" stroke="none"',
    "label": 'font-family="sans-serif" font-size="12" fill="#000000"',
    "curve": 'fill="none" stroke="#1f77b4" stroke-width="1.5"',
    "axis": 'stroke="#000000" stroke-width="1"',
}


def _f(x: float) -> str:
    s = f"{x:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


@dataclass
class OverlayScene:
    width: float
    height: float
    layers: list[tuple[str, str]] = field(default_factory=list)

    def _add(self, kind: str, element: str):
        self.layers.append((kind, element))

    def _check(self, *vals):
        if not all(math.isfinite(v) for v in vals):
            raise GeometryError("overlay coordinates must be finite")

    def path(self, pts: np.ndarray, ident: str, style: str = "conic", closed: bool = True):
        pts = np.asarray(pts, dtype=float)
        self._check(*pts.ravel())
        d = "M " + " L ".join(f"{_f(x)} {_f(y)}" for x, y in pts) + (" Z" if closed else "")
        self._add("path", f'<path id={quoteattr(ident)} d="{d}" {STYLES[style]}/>')

    def segment(self, a, b, ident: str, style: str = "construction", label: str | None = None):
        self._check(*a, *b)
        self._add("segment", f'<line id={quoteattr(ident)} x1="{_f(a[0])}" y1="{_f(a[1])}" '
                             f'x2="{_f(b[0])}" y2="{_f(b[1])}" {STYLES[style]}/>')
        if label:
            mid = 0.5 * (np.asarray(a, float) + np.asarray(b, float))
            self.text(mid, label, ident + "-label")

    def circle(self, centre, r: float, ident: str, style: str = "circle"):
        self._check(*centre, r)
        self._add("circle", f'<circle id={quoteattr(ident)} cx="{_f(centre[0])}" cy="{_f(centre[1])}" '
                            f'r="{_f(r)}" {STYLES[style]}/>')

    def marker(self, p, ident: str, label: str | None = None, style: str = "point"):
        self._check(*p)
        self._add("marker", f'<circle id={quoteattr(ident)} class="marker" cx="{_f(p[0])}" cy="{_f(p[1])}" '
                            f'r="4" {STYLES[style]}/>')
        if label:
            self.text(np.asarray(p, float) + [6, -6], label, ident + "-label")

    def text(self, p, s: str, ident: str):
        self._check(*p)
        body = s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
        self._add("text", f'<text id={quoteattr(ident)} x="{_f(p[0])}" y="{_f(p[1])}" {STYLES["label"]}>{body}</text>')

    def __len__(self):
        return len(self.layers)

    def to_svg(self) -> str:
        if not self.layers:
            raise GeometryError("nothing drawable in the overlay")
        head = ('<?xml version="1.0" encoding="UTF-8"?>\n'
                f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_f(self.width)}" '
                f'height="{_f(self.height)}" viewBox="0 0 {_f(self.width)} {_f(self.height)}">\n')
        order = ("path", "circle", "segment", "marker", "text")
        body = "".join(f"  {el}\n" for kind in order for k, el in self.layers if k == kind)
        return head + body + "</svg>\n"


def calibrating_conic_outline(k_matrix: np.ndarray, samples: int = 180) -> np.ndarray:
    """Image of the 45-degree cone: K (cos t, sin t, 1)."""
    t = np.linspace(0.0, 2 * np.pi, samples, endpoint=False)
    rays = np.vstack([np.cos(t), np.sin(t), np.ones_like(t)])
    img = k_matrix @ rays
    return (img[:2] / img[2]).T


def clip_line(line, width: float, height: float) -> tuple[np.ndarray, np.ndarray] | None:
    """Segment of a homogeneous line inside the image rectangle, or None."""
    a, b, c = line
    hits = []
    for x in (0.0, width):
        if abs(b) > 1e-15:
            y = -(a * x + c) / b
            if -1e-9 <= y <= height + 1e-9:
                hits.append((x, y))
    for y in (0.0, height):
        if abs(a) > 1e-15:
            x = -(b * y + c) / a
            if -1e-9 <= x <= width + 1e-9:
                hits.append((x, y))
    if len(hits) < 2:
        return None
    hits = sorted(set((round(x, 9), round(y, 9)) for x, y in hits))
    return np.array(hits[0]), np.array(hits[-1])


def extended_line(line, width: float, height: float) -> tuple[np.ndarray, np.ndarray]:
    """Clip to the image if possible, else a long segment around the foot from the image centre."""
    seg = clip_line(line, width, height)
    if seg is not None:
        return seg
    a, b, c = line
    n = np.array([a, b]) / math.hypot(a, b)
    centre = np.array([width / 2, height / 2])
    foot = centre - (n @ centre + c / math.hypot(a, b)) * n
    d = np.array([-n[1], n[0]])
    span = 2.0 * math.hypot(width, height)
    return foot - span * d, foot + span * d


def report_overlay(report: dict) -> OverlayScene:
    """Scene for a calibration or measurement report."""
    img = report.get("image") or {}
    w, h = float(img.get("width", 0)), float(img.get("height", 0))
    if w <= 0 or h <= 0:
        raise GeometryError("report has no image size")
    scene = OverlayScene(w, h)
    k = report.get("k")
    if k:
        km = np.array([[k["fx"], k["skew"], k["px"]], [0.0, k["fy"], k["py"]], [0.0, 0.0, 1.0]])
        scene.path(calibrating_conic_outline(km), "calibrating-conic")
        scene.marker((k["px"], k["py"]), "principal-point", "P")
    if report.get("horizon") is not None:
        a, b = extended_line(report["horizon"], w, h)
        scene.segment(a, b, "horizon", "horizon")
    if report.get("conformal_point") is not None:
        scene.marker(report["conformal_point"], "conformal-point", "C", "conformal")
    cons = report.get("construction") or {}
    pts = cons.get("points", {})
    for name in sorted(pts):
        if name in ("P", "C"):
            continue
        scene.marker(pts[name], f"pt-{name}", name)
    for a, b in cons.get("segments", []):
        scene.segment(pts[a], pts[b], f"seg-{a}{b}", label=f"{a}{b}")
    for i, circ in enumerate(cons.get("circles", [])):
        scene.circle(circ["centre"], circ["radius"], f"circle-{i}")
    return scene


def heading_plot(headings_deg, truth_deg=None, width: float = 640, height: float = 320) -> OverlayScene:
    """Heading against frame index."""
    hd = np.asarray(headings_deg, dtype=float)
    scene = OverlayScene(width, height)
    if len(hd) == 0:
        scene.text((10, 20), "empty trajectory", "empty")
        return scene
    series = [hd] + ([np.asarray(truth_deg, float)] if truth_deg is not None else [])
    lo = min(s.min() for s in series)
    hi = max(s.max() for s in series)
    if hi - lo < 1e-9:
        lo, hi = lo - 1, hi + 1
    m = 30.0

    def xy(i, v):
        x = m + (width - 2 * m) * (i / max(len(hd) - 1, 1))
        y = height - m - (height - 2 * m) * (v - lo) / (hi - lo)
        return x, y

    scene.segment((m, height - m), (width - m, height - m), "x-axis", "axis")
    scene.segment((m, m), (m, height - m), "y-axis", "axis")
    scene.path([xy(i, v) for i, v in enumerate(hd)], "heading", "curve", closed=False)
    if truth_deg is not None:
        scene.path([xy(i, v) for i, v in enumerate(series[1])], "heading-truth", "conic", closed=False)
    scene.text((m, m - 8), f"heading [{_f(lo)}, {_f(hi)}] deg", "y-label")
    return scene
