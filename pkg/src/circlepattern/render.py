"""Deterministic SVG pictures of developed circle patterns.

Edges are ``<line>`` elements, vertices are small ``<path>`` dots and the
circumcircles of the lifted faces are the only ``<circle>`` elements.
"""

from __future__ import annotations

from dataclasses import dataclass

from circlepattern.develop import DevelopingMap
from circlepattern.errors import DegenerateConfigurationError
from circlepattern.moebius import circumcircle, is_inf


@dataclass(frozen=True)
class RenderOptions:
    circles: bool = True
    stroke: float = 0.004  # relative to the larger side of the viewport
    dot: float = 0.006
    margin: float = 0.05
    width: int = 800
    viewport: tuple | None = None  # (xmin, ymin, xmax, ymax) in model units


def _fmt(x: float) -> str:
    s = f"{x:.6f}"
    return "0.000000" if s == "-0.000000" else s


def render_svg(dev: DevelopingMap, options: RenderOptions | None = None) -> str:
    opt = options or RenderOptions()
    s = dev.surface
    lifted = dev.patch.lifted_faces
    faces = []
    for corners in lifted:
        zs = [dev.positions.get(c) for c in corners]
        if any(z is None or is_inf(z) for z in zs):
            continue
        faces.append((corners, zs))
    if not faces:
        raise DegenerateConfigurationError("nothing to render: no finite lifted face")

    pts = {}
    for corners, zs in faces:
        pts.update(zip(corners, zs))
    if opt.viewport is not None:
        x0, y0, x1, y1 = (float(v) for v in opt.viewport)
    else:
        xs = [z.real for z in pts.values()]
        ys = [z.imag for z in pts.values()]
        x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    size = max(x1 - x0, y1 - y0, 1e-12)
    pad = opt.margin * size
    x0, x1, y0, y1 = x0 - pad, x1 + pad, y0 - pad, y1 + pad
    w, h = x1 - x0, y1 - y0
    height = max(1, round(opt.width * h / w))
    sw = opt.stroke * max(w, h)
    r_dot = opt.dot * max(w, h)

    def xy(z):
        # flip y so that the picture has the usual orientation
        return _fmt(z.real), _fmt(-z.imag)

    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{opt.width}" height="{height}" '
        f'viewBox="{_fmt(x0)} {_fmt(-y1)} {_fmt(w)} {_fmt(h)}">',
        f'<g fill="none" stroke="#1f4e79" stroke-width="{_fmt(sw)}">',
    ]
    seen = set()
    for corners, zs in faces:
        for t in range(3):
            a, b = corners[t], corners[(t + 1) % 3]
            key = (min(a, b), max(a, b))
            if key in seen:
                continue
            seen.add(key)
            (xa, ya), (xb, yb) = xy(zs[t]), xy(zs[(t + 1) % 3])
            lines.append(f'<line x1="{xa}" y1="{ya}" x2="{xb}" y2="{yb}"/>')
    lines.append("</g>")
    if opt.circles:
        lines.append(f'<g fill="none" stroke="#c0504d" stroke-width="{_fmt(sw)}">')
        for corners, zs in faces:
            c = circumcircle(*zs)
            if c.is_line:
                continue
            cx, cy = xy(c.center)
            lines.append(f'<circle cx="{cx}" cy="{cy}" r="{_fmt(c.radius)}"/>')
        lines.append("</g>")
    lines.append('<g fill="#000000" stroke="none">')
    rd = _fmt(r_dot)
    dd = _fmt(2 * r_dot)
    for v in sorted(pts):
        x, y = xy(pts[v])
        cx = _fmt(pts[v].real - r_dot)
        lines.append(f'<path d="M {cx} {y} a {rd} {rd} 0 1 0 {dd} 0 a {rd} {rd} 0 1 0 -{dd} 0 z"/>')
    lines.append("</g>")
    lines.append("</svg>")
    return "\n".join(lines) + "\n"
