"""Deterministic SVG rendering: contour overlays and simple charts.

Images are embedded as base64 grayscale PNGs; contours become polygon
paths.  Charts are hand-rolled polyline/bar drawings so the output bytes
depend only on the data (no plotting-library version metadata).
"""

from __future__ import annotations

import base64
import math

import numpy as np

from .imgio import encode_png_gray, to_uint8

_SVG_HEADER = '<?xml version="1.0" encoding="UTF-8"?>\n'


def _fmt(v: float) -> str:
    return f"{v:.3f}".rstrip("0").rstrip(".")


def _polygon(points, color, width, scale=1.0, offset=(0.0, 0.0)) -> str:
    pts = " ".join(
        f"{_fmt(offset[0] + scale * x)},{_fmt(offset[1] + scale * y)}" for x, y in points
    )
    return (
        f'<polygon points="{pts}" fill="none" stroke="{color}" '
        f'stroke-width="{_fmt(width)}" />'
    )


def overlay_svg(image01: np.ndarray, contours, scale: int = 4) -> str:
    """Grayscale image with colored contour overlays.

    ``contours``: iterable of (polygon (M,2) in pixel coords, css color).
    Pixel (x, y) centres land at ((x+0.5)*scale, (y+0.5)*scale).
    """
    h, w = image01.shape
    png = encode_png_gray(to_uint8(image01))
    b64 = base64.b64encode(png).decode("ascii")
    parts = [
        _SVG_HEADER,
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{w * scale}" height="{h * scale}" '
        f'viewBox="0 0 {w * scale} {h * scale}">\n',
        f'<image href="data:image/png;base64,{b64}" x="0" y="0" width="{w * scale}" '
        f'height="{h * scale}" preserveAspectRatio="none" '
        'style="image-rendering:pixelated" />\n',
    ]
    for poly, color in contours:
        shifted = [(x + 0.5, y + 0.5) for x, y in np.asarray(poly)]
        parts.append(_polygon(shifted, color, 1.5, scale=scale) + "\n")
    parts.append("</svg>\n")
    return "".join(parts)


_PALETTE = ("#c0392b", "#2980b9", "#27ae60", "#8e44ad", "#d35400", "#16a085")

_W, _H = 640, 400
_ML, _MR, _MT, _MB = 70, 20, 40, 60


def _axes(title, x_label, y_label, y_lo, y_hi, y_ticks) -> list:
    parts = [
        f'<rect x="0" y="0" width="{_W}" height="{_H}" fill="white" />',
        f'<text x="{_W / 2}" y="22" text-anchor="middle" font-size="15" '
        f'font-family="sans-serif">{title}</text>',
        f'<line x1="{_ML}" y1="{_H - _MB}" x2="{_W - _MR}" y2="{_H - _MB}" stroke="black" />',
        f'<line x1="{_ML}" y1="{_MT}" x2="{_ML}" y2="{_H - _MB}" stroke="black" />',
        f'<text x="{_W / 2}" y="{_H - 12}" text-anchor="middle" font-size="12" '
        f'font-family="sans-serif">{x_label}</text>',
        f'<text x="16" y="{_H / 2}" text-anchor="middle" font-size="12" '
        f'font-family="sans-serif" transform="rotate(-90 16 {_H / 2})">{y_label}</text>',
    ]
    for tick in y_ticks:
        y = _y_px(tick, y_lo, y_hi)
        parts.append(f'<line x1="{_ML - 4}" y1="{_fmt(y)}" x2="{_ML}" y2="{_fmt(y)}" stroke="black" />')
        parts.append(
            f'<text x="{_ML - 8}" y="{_fmt(y + 4)}" text-anchor="end" font-size="11" '
            f'font-family="sans-serif">{_fmt(tick)}</text>'
        )
    return parts


def _y_px(v, lo, hi):
    span = hi - lo if hi > lo else 1.0
    return _H - _MB - (v - lo) / span * (_H - _MT - _MB)


def _nice_range(values):
    vals = [v for v in values if v is not None and math.isfinite(v)]
    if not vals:
        return 0.0, 1.0
    lo, hi = min(vals), max(vals)
    if lo == hi:
        pad = abs(lo) * 0.1 or 0.1
        return lo - pad, hi + pad
    pad = (hi - lo) * 0.08
    return lo - pad, hi + pad


def line_chart_svg(x_values, series, title, x_label, y_label, log_x=False) -> str:
    """``series``: list of (label, [y or None per x])."""
    ys = [v for _, yv in series for v in yv]
    y_lo, y_hi = _nice_range(ys)
    ticks = np.linspace(y_lo, y_hi, 5)
    xs = [math.log2(x) for x in x_values] if log_x else list(map(float, x_values))
    x_lo, x_hi = min(xs), max(xs)
    span = x_hi - x_lo if x_hi > x_lo else 1.0

    def x_px(x):
        return _ML + (x - x_lo) / span * (_W - _ML - _MR)

    parts = [_SVG_HEADER, f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}">\n']
    parts.extend(_axes(title, x_label, y_label, y_lo, y_hi, ticks))
    for xv, xp in zip(x_values, xs):
        parts.append(
            f'<text x="{_fmt(x_px(xp))}" y="{_H - _MB + 16}" text-anchor="middle" '
            f'font-size="11" font-family="sans-serif">{xv}</text>'
        )
    for i, (label, yv) in enumerate(series):
        color = _PALETTE[i % len(_PALETTE)]
        pts = [
            (x_px(xp), _y_px(v, y_lo, y_hi))
            for xp, v in zip(xs, yv)
            if v is not None and math.isfinite(v)
        ]
        if pts:
            path = " ".join(f"{_fmt(px)},{_fmt(py)}" for px, py in pts)
            parts.append(f'<polyline points="{path}" fill="none" stroke="{color}" stroke-width="2" />')
            for px, py in pts:
                parts.append(f'<circle cx="{_fmt(px)}" cy="{_fmt(py)}" r="3" fill="{color}" />')
        ly = _MT + 16 * i
        parts.append(f'<rect x="{_W - _MR - 130}" y="{ly}" width="10" height="10" fill="{color}" />')
        parts.append(
            f'<text x="{_W - _MR - 115}" y="{ly + 9}" font-size="11" '
            f'font-family="sans-serif">{label}</text>'
        )
    parts.append("</svg>\n")
    return "\n".join(parts)


def bar_chart_svg(categories, series, title, y_label) -> str:
    """Grouped bars. ``series``: list of (label, [value per category])."""
    ys = [v for _, yv in series for v in yv]
    y_lo, y_hi = _nice_range(ys + [0.0])
    y_lo = min(y_lo, 0.0)
    ticks = np.linspace(y_lo, y_hi, 5)
    parts = [_SVG_HEADER, f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}">\n']
    parts.extend(_axes(title, "", y_label, y_lo, y_hi, ticks))
    n_cat, n_ser = len(categories), len(series)
    slot = (_W - _ML - _MR) / max(n_cat, 1)
    bar_w = slot * 0.8 / max(n_ser, 1)
    y0 = _y_px(0.0, y_lo, y_hi)
    for ci, cat in enumerate(categories):
        cx = _ML + slot * (ci + 0.5)
        parts.append(
            f'<text x="{_fmt(cx)}" y="{_H - _MB + 16}" text-anchor="middle" font-size="10" '
            f'font-family="sans-serif">{cat}</text>'
        )
        for si, (label, yv) in enumerate(series):
            v = yv[ci]
            if v is None or not math.isfinite(v):
                continue
            x = cx - 0.4 * slot + si * bar_w
            y = _y_px(v, y_lo, y_hi)
            top, height = (y, y0 - y) if v >= 0 else (y0, y - y0)
            color = _PALETTE[si % len(_PALETTE)]
            parts.append(
                f'<rect x="{_fmt(x)}" y="{_fmt(top)}" width="{_fmt(bar_w * 0.9)}" '
                f'height="{_fmt(height)}" fill="{color}" />'
            )
    for si, (label, _) in enumerate(series):
        ly = _MT + 16 * si
        color = _PALETTE[si % len(_PALETTE)]
        parts.append(f'<rect x="{_W - _MR - 130}" y="{ly}" width="10" height="10" fill="{color}" />')
        parts.append(
            f'<text x="{_W - _MR - 115}" y="{ly + 9}" font-size="11" '
            f'font-family="sans-serif">{label}</text>'
        )
    parts.append("</svg>\n")
    return "\n".join(parts)
