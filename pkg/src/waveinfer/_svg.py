"""Tiny deterministic SVG chart writer for CLI plot output.

Fixed canvas geometry, fixed palette, fixed "%.2f" coordinate formatting:
identical data yields byte-identical files.
"""

from __future__ import annotations

import math

_W, _H = 720, 480
_ML, _MR, _MT, _MB = 64, 16, 36, 48
_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def _nice_ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi <= lo:
        return [lo]
    raw = (hi - lo) / count
    mag = 10.0 ** math.floor(math.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        if raw <= mult * mag:
            step = mult * mag
            break
    first = math.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else t)
        t += step
    return ticks


def _fmt_tick(v: float) -> str:
    if v == 0:
        return "0"
    if abs(v) >= 1e5 or abs(v) < 1e-3:
        return f"{v:.1e}"
    return f"{v:g}"


class _Frame:
    """Data-to-pixel mapping over the plot rectangle."""

    def __init__(self, xs: list[float], ys: list[float]):
        fx = [v for v in xs if math.isfinite(v)]
        fy = [v for v in ys if math.isfinite(v)]
        if not fx or not fy:
            fx, fy = [0.0, 1.0], [0.0, 1.0]
        x0, x1 = min(fx), max(fx)
        y0, y1 = min(fy), max(fy)
        if x1 <= x0:
            x0, x1 = x0 - 0.5, x0 + 0.5
        if y1 <= y0:
            y0, y1 = y0 - 0.5, y0 + 0.5
        pad_y = 0.05 * (y1 - y0)
        self.x0, self.x1 = x0, x1
        self.y0, self.y1 = y0 - pad_y, y1 + pad_y

    def px(self, x: float) -> float:
        return _ML + (x - self.x0) / (self.x1 - self.x0) * (_W - _ML - _MR)

    def py(self, y: float) -> float:
        return _H - _MB - (y - self.y0) / (self.y1 - self.y0) * (_H - _MT - _MB)


def _axes(frame: _Frame, title: str, xlabel: str, ylabel: str) -> list[str]:
    out = [
        f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" height="{_H - _MT - _MB}" '
        'fill="none" stroke="#333" stroke-width="1"/>',
        f'<text x="{_W // 2}" y="20" text-anchor="middle" font-size="14" '
        f'font-family="sans-serif">{_esc(title)}</text>',
        f'<text x="{_W // 2}" y="{_H - 10}" text-anchor="middle" font-size="12" '
        f'font-family="sans-serif">{_esc(xlabel)}</text>',
        f'<text x="14" y="{_H // 2}" text-anchor="middle" font-size="12" '
        f'font-family="sans-serif" transform="rotate(-90 14 {_H // 2})">{_esc(ylabel)}</text>',
    ]
    for t in _nice_ticks(frame.x0, frame.x1):
        x = frame.px(t)
        out.append(f'<line x1="{x:.2f}" y1="{_H - _MB}" x2="{x:.2f}" y2="{_H - _MB + 5}" '
                   'stroke="#333" stroke-width="1"/>')
        out.append(f'<text x="{x:.2f}" y="{_H - _MB + 18}" text-anchor="middle" '
                   f'font-size="11" font-family="sans-serif">{_fmt_tick(t)}</text>')
    for t in _nice_ticks(frame.y0, frame.y1):
        y = frame.py(t)
        out.append(f'<line x1="{_ML - 5}" y1="{y:.2f}" x2="{_ML}" y2="{y:.2f}" '
                   'stroke="#333" stroke-width="1"/>')
        out.append(f'<text x="{_ML - 8}" y="{y + 4:.2f}" text-anchor="end" '
                   f'font-size="11" font-family="sans-serif">{_fmt_tick(t)}</text>')
    return out


def _document(body: list[str]) -> str:
    head = (
        '<?xml version="1.0" encoding="UTF-8"?>\n'
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">\n'
        f'<rect width="{_W}" height="{_H}" fill="white"/>\n'
    )
    return head + "\n".join(body) + "\n</svg>\n"


def line_chart(series: list[tuple[str, list, list]], title: str,
               xlabel: str, ylabel: str) -> str:
    """SVG line chart. ``series`` is a list of (label, xs, ys); non-finite
    points break the polyline."""
    all_x = [v for _, xs, _ in series for v in xs]
    all_y = [v for _, _, ys in series for v in ys]
    frame = _Frame(all_x, all_y)
    body = _axes(frame, title, xlabel, ylabel)
    for idx, (label, xs, ys) in enumerate(series):
        color = _PALETTE[idx % len(_PALETTE)]
        segment: list[str] = []
        chunks: list[list[str]] = []
        for x, y in zip(xs, ys):
            if math.isfinite(x) and math.isfinite(y):
                segment.append(f"{frame.px(x):.2f},{frame.py(y):.2f}")
            elif segment:
                chunks.append(segment)
                segment = []
        if segment:
            chunks.append(segment)
        for chunk in chunks:
            if len(chunk) > 1:
                body.append(f'<polyline points="{" ".join(chunk)}" fill="none" '
                            f'stroke="{color}" stroke-width="1.5"/>')
        ly = _MT + 16 + 16 * idx
        body.append(f'<line x1="{_W - _MR - 120}" y1="{ly - 4}" x2="{_W - _MR - 96}" '
                    f'y2="{ly - 4}" stroke="{color}" stroke-width="1.5"/>')
        body.append(f'<text x="{_W - _MR - 90}" y="{ly}" font-size="11" '
                    f'font-family="sans-serif">{_esc(label)}</text>')
    return _document(body)


def scatter_chart(xs: list, ys: list, title: str, xlabel: str, ylabel: str,
                  diagonal: bool = True) -> str:
    """SVG scatter chart, optionally with the y = x reference line."""
    frame = _Frame(list(xs), list(ys))
    body = _axes(frame, title, xlabel, ylabel)
    if diagonal:
        lo = max(frame.x0, frame.y0)
        hi = min(frame.x1, frame.y1)
        if hi > lo:
            body.append(f'<line x1="{frame.px(lo):.2f}" y1="{frame.py(lo):.2f}" '
                        f'x2="{frame.px(hi):.2f}" y2="{frame.py(hi):.2f}" '
                        'stroke="#999" stroke-width="1" stroke-dasharray="4 3"/>')
    for x, y in zip(xs, ys):
        if math.isfinite(x) and math.isfinite(y):
            body.append(f'<circle cx="{frame.px(x):.2f}" cy="{frame.py(y):.2f}" r="2.5" '
                        f'fill="{_PALETTE[0]}" fill-opacity="0.7"/>')
    return _document(body)
