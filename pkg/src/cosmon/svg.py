"""Minimal deterministic SVG output (line plots and heat maps)."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

W, H = 640, 420
ML, MR, MT, MB = 70, 20, 40, 50


def _frame(title, xlabel, ylabel, x0, x1, y0, y1):
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<text x="{W / 2:.1f}" y="22" text-anchor="middle" font-size="15">{escape(title)}</text>',
        f'<text x="{W / 2:.1f}" y="{H - 10}" text-anchor="middle" font-size="13">{escape(xlabel)}</text>',
        f'<text x="16" y="{H / 2:.1f}" text-anchor="middle" font-size="13" '
        f'transform="rotate(-90 16 {H / 2:.1f})">{escape(ylabel)}</text>',
        f'<rect x="{ML}" y="{MT}" width="{W - ML - MR}" height="{H - MT - MB}" fill="none" stroke="black"/>',
    ]
    for v, anchor, x, y in ((x0, "start", ML, H - MB + 16), (x1, "end", W - MR, H - MB + 16)):
        out.append(f'<text x="{x}" y="{y}" text-anchor="{anchor}" font-size="11">{v:.4g}</text>')
    for v, y in ((y0, H - MB), (y1, MT + 10)):
        out.append(f'<text x="{ML - 4}" y="{y}" text-anchor="end" font-size="11">{v:.4g}</text>')
    return out


def _sx(x, x0, x1):
    return ML + (x - x0) / (x1 - x0 or 1.0) * (W - ML - MR)


def _sy(y, y0, y1):
    return H - MB - (y - y0) / (y1 - y0 or 1.0) * (H - MT - MB)


def lineplot(path, series, title="", xlabel="", ylabel="", logy=False) -> None:
    """``series``: list of ``(label, x, y)``."""
    colors = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"]
    xs = np.concatenate([np.asarray(s[1], float) for s in series])
    ys = np.concatenate([np.asarray(s[2], float) for s in series])
    if logy:
        ys = np.log10(np.maximum(ys, 1e-300))
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    out = _frame(title, xlabel, ylabel + (" (log10)" if logy else ""), x0, x1, y0, y1)
    for n, (label, x, y) in enumerate(series):
        y = np.asarray(y, float)
        if logy:
            y = np.log10(np.maximum(y, 1e-300))
        pts = " ".join(f"{_sx(a, x0, x1):.2f},{_sy(b, y0, y1):.2f}" for a, b in zip(x, y))
        c = colors[n % len(colors)]
        out.append(f'<polyline fill="none" stroke="{c}" stroke-width="1.5" points="{pts}"/>')
        out.append(f'<text x="{W - MR - 6}" y="{MT + 16 + 14 * n}" text-anchor="end" '
                   f'font-size="11" fill="{c}">{escape(str(label))}</text>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")


def heatmap(path, x, y, z, title="", xlabel="", ylabel="") -> None:
    """``z[i, j]`` at ``(x[i], y[j])``, grey scale on ``log10`` of the values."""
    x = np.asarray(x, float)
    y = np.asarray(y, float)
    z = np.asarray(z, float)
    zl = np.log10(np.maximum(z, 1e-300))
    top = float(zl.max()) if z.max() > 0 else 0.0
    lo = top - 8.0
    x0, x1, y0, y1 = float(x.min()), float(x.max()), float(y.min()), float(y.max())
    out = _frame(title, xlabel, ylabel, x0, x1, y0, y1)
    dx = (W - ML - MR) / max(x.size, 1)
    dy = (H - MT - MB) / max(y.size, 1)
    for i in range(x.size):
        for j in range(y.size):
            if z[i, j] <= 0:
                continue
            lvl = min(1.0, max(0.0, (zl[i, j] - lo) / (top - lo)))
            if lvl == 0:
                continue
            g = int(round(255 * (1 - lvl)))
            out.append(f'<rect x="{ML + i * dx:.2f}" y="{H - MB - (j + 1) * dy:.2f}" '
                       f'width="{dx + 0.05:.2f}" height="{dy + 0.05:.2f}" fill="rgb({g},{g},{g})"/>')
    out.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(out) + "\n")
