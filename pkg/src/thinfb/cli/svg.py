"""Minimal self-contained SVG line and mask plots."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np

W, H = 480, 360
ML, MR, MT, MB = 64, 16, 32, 48
COLORS = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd")


def _fmt(v: float) -> str:
    return f"{v:.3g}"


def _header(title: str, provenance: str) -> list:
    return [f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
            f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
            f"<!-- {escape(provenance)} -->",
            f'<rect width="{W}" height="{H}" fill="white"/>',
            f'<text x="{W / 2}" y="18" text-anchor="middle" font-size="13">{escape(title)}</text>']


def line_plot(series: dict, title: str, xlabel: str, ylabel: str, provenance: str,
              logx: bool = False, logy: bool = False) -> str:
    """series: label -> (x, y). Non-finite or non-positive (on log axes) points are dropped."""
    clean = {}
    for label, (x, y) in series.items():
        x, y = np.asarray(x, float), np.asarray(y, float)
        ok = np.isfinite(x) & np.isfinite(y)
        if logx:
            ok &= x > 0
        if logy:
            ok &= y > 0
        clean[label] = (x[ok], y[ok])
    tx = np.log10 if logx else (lambda a: a)
    ty = np.log10 if logy else (lambda a: a)
    xs = np.concatenate([tx(x) for x, _ in clean.values()] or [np.zeros(0)])
    ys = np.concatenate([ty(y) for _, y in clean.values()] or [np.zeros(0)])
    out = _header(title, provenance)
    if xs.size == 0:
        out.append(f'<text x="{W / 2}" y="{H / 2}" text-anchor="middle">no data</text></svg>')
        return "\n".join(out) + "\n"
    x0, x1 = float(xs.min()), float(xs.max())
    y0, y1 = float(ys.min()), float(ys.max())
    if x1 - x0 < 1e-12:
        x0, x1 = x0 - 0.5, x1 + 0.5
    if y1 - y0 < 1e-12:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(v):
        return ML + (v - x0) / (x1 - x0) * (W - ML - MR)

    def py(v):
        return H - MB - (v - y0) / (y1 - y0) * (H - MT - MB)

    out.append(f'<rect x="{ML}" y="{MT}" width="{W - ML - MR}" height="{H - MT - MB}" '
               'fill="none" stroke="black"/>')
    for v, anchor in ((x0, "start"), (x1, "end")):
        lab = _fmt(10**v if logx else v)
        out.append(f'<text x="{px(v):.2f}" y="{H - MB + 14}" text-anchor="{anchor}">{lab}</text>')
    for v in (y0, y1):
        lab = _fmt(10**v if logy else v)
        out.append(f'<text x="{ML - 4}" y="{py(v) + 4:.2f}" text-anchor="end">{lab}</text>')
    out.append(f'<text x="{(ML + W - MR) / 2}" y="{H - 12}" text-anchor="middle">'
               f'{escape(xlabel)}{" (log)" if logx else ""}</text>')
    out.append(f'<text x="14" y="{(MT + H - MB) / 2}" text-anchor="middle" '
               f'transform="rotate(-90 14 {(MT + H - MB) / 2})">'
               f'{escape(ylabel)}{" (log)" if logy else ""}</text>')
    for i, (label, (x, y)) in enumerate(clean.items()):
        c = COLORS[i % len(COLORS)]
        pts = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(tx(x), ty(y)))
        if len(x) > 1:
            out.append(f'<polyline points="{pts}" fill="none" stroke="{c}" stroke-width="1.5"/>')
        for a, b in zip(tx(x), ty(y)):
            out.append(f'<circle cx="{px(a):.2f}" cy="{py(b):.2f}" r="2.5" fill="{c}"/>')
        out.append(f'<text x="{ML + 8}" y="{MT + 14 + 14 * i}" fill="{c}">{escape(label)}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def mask_plot(positive: np.ndarray, halfwidth: float, title: str, provenance: str) -> str:
    """Positive slit cells (n = 2: 2-D array; n = 1: 1-D array drawn as a strip)."""
    pos = np.atleast_2d(np.asarray(positive, bool))
    if np.ndim(positive) == 1:
        pos = pos.T  # cells along x_1, one row
    nx, ny = pos.shape
    out = _header(title, provenance)
    side = min(W - ML - MR, H - MT - MB)
    cw = side / nx
    ch = side / ny if np.ndim(positive) > 1 else min(side, 40)
    out.append(f'<rect x="{ML}" y="{MT}" width="{side}" height="{ch * ny:.2f}" fill="#eeeeee" '
               'stroke="black"/>')
    # merge runs along the first axis to keep the file small
    for j in range(ny):
        i = 0
        while i < nx:
            if pos[i, j]:
                k = i
                while k < nx and pos[k, j]:
                    k += 1
                y = MT + (ny - 1 - j) * ch
                out.append(f'<rect x="{ML + i * cw:.2f}" y="{y:.2f}" width="{(k - i) * cw:.2f}" '
                           f'height="{ch:.2f}" fill="#1f77b4"/>')
                i = k
            else:
                i += 1
    lab_y = MT + ch * ny + 14
    out.append(f'<text x="{ML}" y="{lab_y:.2f}">{_fmt(-halfwidth)}</text>')
    out.append(f'<text x="{ML + side}" y="{lab_y:.2f}" text-anchor="end">{_fmt(halfwidth)}</text>')
    out.append(f'<text x="{ML + side / 2}" y="{lab_y + 14:.2f}" text-anchor="middle">'
               "slit cells with u &gt; 0 (blue)</text>")
    out.append("</svg>")
    return "\n".join(out) + "\n"


def finite_or_nan(v) -> float:
    try:
        f = float(v)
    except (TypeError, ValueError):
        return math.nan
    return f if math.isfinite(f) else math.nan
