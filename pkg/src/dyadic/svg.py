"""Minimal SVG line plots written as plain path data."""

import math
from xml.sax.saxutils import escape

_COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]


def line_plot(path, series, title="", xlabel="", ylabel="", logy=False,
              width=640, height=420):
    """Write ``series`` (a list of ``(label, xs, ys)``) as an SVG line chart.

    With ``logy`` nonpositive values are dropped and the axis is log10.
    """
    margin_l, margin_r, margin_t, margin_b = 70, 20, 40, 50
    pw, ph = width - margin_l - margin_r, height - margin_t - margin_b
    cleaned = []
    for label, xs, ys in series:
        pts = []
        for x, y in zip(xs, ys):
            x, y = float(x), float(y)
            if not (math.isfinite(x) and math.isfinite(y)):
                continue
            if logy:
                if y <= 0:
                    continue
                y = math.log10(y)
            pts.append((x, y))
        cleaned.append((label, pts))
    allpts = [p for _, pts in cleaned for p in pts]
    if allpts:
        x0, x1 = min(p[0] for p in allpts), max(p[0] for p in allpts)
        y0, y1 = min(p[1] for p in allpts), max(p[1] for p in allpts)
    else:
        x0, x1, y0, y1 = 0.0, 1.0, 0.0, 1.0
    if x1 == x0:
        x1 = x0 + 1.0
    if y1 == y0:
        y1 = y0 + 1.0

    def sx(x):
        return margin_l + (x - x0) / (x1 - x0) * pw

    def sy(y):
        return margin_t + ph - (y - y0) / (y1 - y0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<rect x="{margin_l}" y="{margin_t}" width="{pw}" height="{ph}" '
        'fill="none" stroke="black" stroke-width="1"/>',
        f'<text x="{width / 2:.1f}" y="24" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<text x="{width / 2:.1f}" y="{height - 10}" text-anchor="middle" font-size="12">'
        f'{escape(xlabel)}</text>',
        f'<text x="16" y="{height / 2:.1f}" text-anchor="middle" font-size="12" '
        f'transform="rotate(-90 16 {height / 2:.1f})">'
        f'{escape(("log10 " if logy else "") + ylabel)}</text>',
    ]
    for i in range(5):
        xv = x0 + (x1 - x0) * i / 4
        yv = y0 + (y1 - y0) * i / 4
        out.append(f'<text x="{sx(xv):.1f}" y="{margin_t + ph + 16}" text-anchor="middle" '
                   f'font-size="10">{xv:.3g}</text>')
        out.append(f'<text x="{margin_l - 6}" y="{sy(yv) + 3:.1f}" text-anchor="end" '
                   f'font-size="10">{yv:.3g}</text>')
    for i, (label, pts) in enumerate(cleaned):
        color = _COLORS[i % len(_COLORS)]
        if pts:
            d = " ".join(
                f"{'M' if j == 0 else 'L'}{sx(x):.2f},{sy(y):.2f}" for j, (x, y) in enumerate(pts)
            )
            out.append(f'<path d="{d}" fill="none" stroke="{color}" stroke-width="1.5"/>')
        out.append(f'<text x="{margin_l + 8}" y="{margin_t + 14 + 13 * i}" font-size="11" '
                   f'fill="{color}">{escape(label)}</text>')
    out.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
