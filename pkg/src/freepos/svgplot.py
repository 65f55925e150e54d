"""Tiny SVG writer for the CLI figures: line charts, histograms and interval
diagrams. No styling options beyond what the CLI needs."""
from __future__ import annotations

from typing import Iterable, List, Optional, Sequence, Tuple
from xml.sax.saxutils import escape

WIDTH, HEIGHT = 640, 400
MARGIN = 60
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e")


class _Frame:
    def __init__(self, xlo, xhi, ylo, yhi):
        if xhi <= xlo:
            xlo, xhi = xlo - 0.5, xhi + 0.5
        if yhi <= ylo:
            ylo, yhi = ylo - 0.5, yhi + 0.5
        self.xlo, self.xhi, self.ylo, self.yhi = xlo, xhi, ylo, yhi

    def x(self, v):
        return MARGIN + (v - self.xlo) / (self.xhi - self.xlo) * (WIDTH - 2 * MARGIN)

    def y(self, v):
        return HEIGHT - MARGIN - (v - self.ylo) / (self.yhi - self.ylo) * (HEIGHT - 2 * MARGIN)


def _ticks(lo, hi, count=5):
    step = (hi - lo) / (count - 1)
    return [lo + i * step for i in range(count)]


def _axes(fr: _Frame, title: str, xlabel: str, ylabel: str) -> List[str]:
    out = [
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2}" y="{MARGIN / 2}" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<text x="{WIDTH / 2}" y="{HEIGHT - 15}" text-anchor="middle" font-size="12">{escape(xlabel)}</text>',
        f'<text x="15" y="{HEIGHT / 2}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 15 {HEIGHT / 2})">{escape(ylabel)}</text>',
    ]
    for v in _ticks(fr.xlo, fr.xhi):
        px = fr.x(v)
        out.append(f'<text x="{px:.1f}" y="{HEIGHT - MARGIN + 16}" text-anchor="middle" '
                   f'font-size="10">{v:.3g}</text>')
    for v in _ticks(fr.ylo, fr.yhi):
        py = fr.y(v)
        out.append(f'<text x="{MARGIN - 6}" y="{py + 3:.1f}" text-anchor="end" '
                   f'font-size="10">{v:.3g}</text>')
    return out


def _write(path, body: Iterable[str]):
    with open(path, "w") as fh:
        fh.write(f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" '
                 f'viewBox="0 0 {WIDTH} {HEIGHT}">\n')
        for line in body:
            fh.write(line + "\n")
        fh.write("</svg>\n")


def line_chart(path, series: Sequence[Tuple[str, Sequence[float], Sequence[float]]],
               title: str = "", xlabel: str = "", ylabel: str = "",
               hlines: Sequence[Tuple[str, float]] = ()):
    """Polyline with markers per series, plus labelled horizontal reference lines."""
    xs = [x for _, sx, _ in series for x in sx]
    ys = [y for _, _, sy in series for y in sy] + [v for _, v in hlines]
    fr = _Frame(min(xs), max(xs), min(ys), max(ys))
    body = _axes(fr, title, xlabel, ylabel)
    for label, value in hlines:
        py = fr.y(value)
        body.append(f'<line x1="{MARGIN}" y1="{py:.1f}" x2="{WIDTH - MARGIN}" y2="{py:.1f}" '
                    f'stroke="gray" stroke-dasharray="4 3"/>')
        body.append(f'<text x="{WIDTH - MARGIN}" y="{py - 4:.1f}" text-anchor="end" '
                    f'font-size="10" fill="gray">{escape(label)}</text>')
    for idx, (label, sx, sy) in enumerate(series):
        color = COLORS[idx % len(COLORS)]
        pts = " ".join(f"{fr.x(x):.1f},{fr.y(y):.1f}" for x, y in zip(sx, sy))
        body.append(f'<polyline points="{pts}" fill="none" stroke="{color}"/>')
        for x, y in zip(sx, sy):
            body.append(f'<circle cx="{fr.x(x):.1f}" cy="{fr.y(y):.1f}" r="3" fill="{color}"/>')
        body.append(f'<text x="{MARGIN + 8}" y="{MARGIN + 14 * (idx + 1)}" font-size="11" '
                    f'fill="{color}">{escape(label)}</text>')
    _write(path, body)


def histogram_chart(path, edges: Sequence[float], densities: Sequence[float],
                    overlay: Optional[Tuple[Sequence[float], Sequence[float]]] = None,
                    title: str = "", xlabel: str = "", ylabel: str = "density"):
    """Bars for a density histogram with an optional reference curve."""
    ys = list(densities) + (list(overlay[1]) if overlay else [])
    fr = _Frame(edges[0], edges[-1], 0.0, max(ys) * 1.05 if ys else 1.0)
    body = _axes(fr, title, xlabel, ylabel)
    for lo, hi, h in zip(edges[:-1], edges[1:], densities):
        x0, x1, y0 = fr.x(lo), fr.x(hi), fr.y(h)
        body.append(f'<rect x="{x0:.1f}" y="{y0:.1f}" width="{max(x1 - x0, 0.5):.1f}" '
                    f'height="{fr.y(0) - y0:.1f}" fill="#9ecae1" stroke="#3182bd"/>')
    if overlay:
        pts = " ".join(f"{fr.x(x):.1f},{fr.y(y):.1f}" for x, y in zip(*overlay))
        body.append(f'<polyline points="{pts}" fill="none" stroke="#d62728" stroke-width="2"/>')
    _write(path, body)


def interval_chart(path, rows: Sequence[Tuple[str, float, float]],
                   atoms: Sequence[Tuple[float, float]] = (), title: str = ""):
    """Horizontal segments, one per labelled interval; atoms drawn as dots on row 0."""
    lo = min([r[1] for r in rows] + [a[0] for a in atoms])
    hi = max([r[2] for r in rows] + [a[0] for a in atoms])
    pad = 0.05 * (hi - lo or 1.0)
    fr = _Frame(lo - pad, hi + pad, -0.5, len(rows) - 0.5)
    body = _axes(fr, title, "support", "")
    for idx, (label, a, b) in enumerate(rows):
        py = fr.y(idx)
        color = COLORS[idx % len(COLORS)]
        body.append(f'<line x1="{fr.x(a):.1f}" y1="{py:.1f}" x2="{fr.x(b):.1f}" y2="{py:.1f}" '
                    f'stroke="{color}" stroke-width="6"/>')
        body.append(f'<text x="{fr.x(a):.1f}" y="{py - 8:.1f}" font-size="11">'
                    f'{escape(label)}: [{a:.5g}, {b:.5g}]</text>')
    for loc, weight in atoms:
        body.append(f'<circle cx="{fr.x(loc):.1f}" cy="{fr.y(0):.1f}" r="{3 + 6 * weight:.1f}" '
                    f'fill="black"/>')
    _write(path, body)
