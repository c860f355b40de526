"""Minimal SVG emitter for log-log sweep plots with quantile bands."""

import math

__all__ = ["svg_loglog"]

_COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf")
_W, _H = 640, 440
_LEFT, _RIGHT, _TOP, _BOTTOM = 80, 180, 40, 60


def _fmt(x):
    return f"{x:.2f}"


def _decades(lo, hi):
    return list(range(math.floor(math.log10(lo)), math.ceil(math.log10(hi)) + 1))


def svg_loglog(summary, columns, title="", xlabel="n", ylabel="error"):
    """Render per-n medians (lines) and 5%-95% quantile bands on log-log axes.

    Parameters
    ----------
    summary : dict
        ``{n: {column: ColumnSummary}}`` as produced by
        :func:`subspace_perturb.stats.summarize`.
    columns : sequence of str
        Columns to draw; nonpositive values are skipped.

    Returns
    -------
    str
        The SVG document. Output depends only on the inputs.
    """
    ns = sorted(summary)
    pts = {}
    for col in columns:
        row = [(n, summary[n][col]) for n in ns]
        row = [(n, s) for n, s in row if s.median > 0 and s.q05 > 0 and s.q95 > 0]
        if row:
            pts[col] = row
    vals = [v for row in pts.values() for _, s in row for v in (s.q05, s.q95, s.median)]
    if not vals:
        vals = [1e-3, 1.0]
    ylo, yhi = min(vals), max(vals)
    if ylo == yhi:
        ylo, yhi = ylo / 10, yhi * 10
    xlo, xhi = min(ns), max(ns)
    if xlo == xhi:
        xlo, xhi = xlo / 2, xhi * 2
    xd = _decades(xlo, xhi)
    yd = _decades(ylo, yhi)
    lx0, lx1 = math.log10(xlo), math.log10(xhi)
    ly0, ly1 = float(yd[0]), float(yd[-1])
    pw = _W - _LEFT - _RIGHT
    ph = _H - _TOP - _BOTTOM

    def px(x):
        return _LEFT + (math.log10(x) - lx0) / (lx1 - lx0) * pw

    def py(y):
        return _TOP + (ly1 - math.log10(y)) / (ly1 - ly0) * ph

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.0f}" y="22" text-anchor="middle" font-size="14">{title}</text>',
        f'<rect x="{_LEFT}" y="{_TOP}" width="{pw}" height="{ph}" fill="none" stroke="black"/>',
    ]
    for n in ns:
        x = px(n)
        out.append(f'<line x1="{_fmt(x)}" y1="{_TOP + ph}" x2="{_fmt(x)}" y2="{_TOP + ph + 5}" stroke="black"/>')
        out.append(f'<text x="{_fmt(x)}" y="{_TOP + ph + 18}" text-anchor="middle">{n}</text>')
    for d in yd:
        y = py(10.0**d)
        out.append(f'<line x1="{_LEFT - 5}" y1="{_fmt(y)}" x2="{_LEFT + pw}" y2="{_fmt(y)}" '
                   'stroke="#dddddd"/>')
        out.append(f'<text x="{_LEFT - 8}" y="{_fmt(y + 4)}" text-anchor="end">1e{d}</text>')
    out.append(f'<text x="{_LEFT + pw / 2:.0f}" y="{_H - 15}" text-anchor="middle">{xlabel}</text>')
    out.append(f'<text x="18" y="{_TOP + ph / 2:.0f}" text-anchor="middle" '
               f'transform="rotate(-90 18 {_TOP + ph / 2:.0f})">{ylabel}</text>')
    for i, (col, row) in enumerate(pts.items()):
        color = _COLORS[i % len(_COLORS)]
        upper = [f"{_fmt(px(n))},{_fmt(py(s.q95))}" for n, s in row]
        lower = [f"{_fmt(px(n))},{_fmt(py(s.q05))}" for n, s in reversed(row)]
        out.append(f'<polygon points="{" ".join(upper + lower)}" fill="{color}" '
                   'fill-opacity="0.2" stroke="none"/>')
        line = " ".join(f"{_fmt(px(n))},{_fmt(py(s.median))}" for n, s in row)
        out.append(f'<polyline points="{line}" fill="none" stroke="{color}" stroke-width="2"/>')
        ly = _TOP + 10 + 20 * i
        lx = _LEFT + pw + 15
        out.append(f'<line x1="{lx}" y1="{ly}" x2="{lx + 20}" y2="{ly}" stroke="{color}" stroke-width="2"/>')
        out.append(f'<text x="{lx + 26}" y="{ly + 4}">{col}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
