"""SVG overlays of detections and ground truth."""
from __future__ import annotations

from xml.sax.saxutils import escape

from .postprocess import ANCHOR, PIXEL

STYLES = {
    "gt": 'fill="none" stroke="#2ca02c" stroke-width="2" stroke-dasharray="6,3"',
    "gt_ignored": 'fill="none" stroke="#7f7f7f" stroke-width="1.5" stroke-dasharray="2,2"',
    PIXEL: 'fill="#1f77b4" fill-opacity="0.15" stroke="#1f77b4" stroke-width="1.5"',
    ANCHOR: 'fill="#d62728" fill-opacity="0.15" stroke="#d62728" stroke-width="1.5"',
}


def _points(quad) -> str:
    return " ".join(f"{x:.2f},{y:.2f}" for x, y in quad.points)


def render_svg(dets, gt=None, image_size=(640, 640)) -> str:
    w, h = image_size
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{w}" height="{h}" viewBox="0 0 {w} {h}">',
        f'<rect x="0" y="0" width="{w}" height="{h}" fill="white"/>',
    ]
    if gt is not None:
        out.append('<g id="ground-truth">')
        for q, care in zip(gt.quads, gt.care):
            out.append(f'<polygon points="{_points(q)}" {STYLES["gt" if care else "gt_ignored"]}/>')
        out.append("</g>")
    out.append('<g id="detections">')
    for d in dets:
        title = escape(f"{d.source} {d.score:.3f}")
        out.append(f'<polygon points="{_points(d.quad)}" {STYLES[d.source]}><title>{title}</title></polygon>')
    out.append("</g>")
    out.append("</svg>")
    return "\n".join(out) + "\n"
