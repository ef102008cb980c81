"""Hand-emitted SVG line charts (no plotting dependency)."""

from __future__ import annotations

import math
from pathlib import Path

from .activations import activation_derivative, activation_forward
from .errors import UsageError

COLORS = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd",
          "#8c564b", "#17becf", "#e377c2"]

_PANEL_W = 520
_PANEL_H = 420
_MARGIN = {"left": 62, "right": 16, "top": 40, "bottom": 46}


def _escape(text: str) -> str:
    return (text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;"))


def _ticks(lo: float, hi: float, n: int = 5):
    if hi <= lo:
        hi = lo + 1.0
    step = (hi - lo) / (n - 1)
    return [lo + i * step for i in range(n)]


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def render_panel(series, title, x_label, y_label, x_offset=0.0):
    """One chart panel as a list of SVG fragments.

    ``series`` is a list of (name, xs, ys) with finite values.
    """
    if not series:
        raise UsageError("no series to plot")
    xs_all = [x for _, xs, _ in series for x in xs]
    ys_all = [y for _, _, ys in series for y in ys if math.isfinite(y)]
    x_lo, x_hi = min(xs_all), max(xs_all)
    y_lo, y_hi = min(ys_all), max(ys_all)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_hi = y_lo + 1.0
    pad = 0.05 * (y_hi - y_lo)
    y_lo -= pad
    y_hi += pad

    left = x_offset + _MARGIN["left"]
    right = x_offset + _PANEL_W - _MARGIN["right"]
    top = _MARGIN["top"]
    bottom = _PANEL_H - _MARGIN["bottom"]

    def px(x):
        return left + (x - x_lo) / (x_hi - x_lo) * (right - left)

    def py(y):
        return bottom - (y - y_lo) / (y_hi - y_lo) * (bottom - top)

    out = []
    out.append(
        f'<rect x="{left:.1f}" y="{top:.1f}" width="{right - left:.1f}" '
        f'height="{bottom - top:.1f}" fill="none" stroke="#333"/>'
    )
    out.append(
        f'<text x="{(left + right) / 2:.1f}" y="{top - 14}" '
        f'text-anchor="middle" font-size="15">{_escape(title)}</text>'
    )
    for tx in _ticks(x_lo, x_hi):
        out.append(
            f'<line x1="{px(tx):.1f}" y1="{bottom:.1f}" x2="{px(tx):.1f}" '
            f'y2="{bottom + 5:.1f}" stroke="#333"/>'
        )
        out.append(
            f'<text x="{px(tx):.1f}" y="{bottom + 20:.1f}" text-anchor="middle" '
            f'font-size="11">{_fmt(tx)}</text>'
        )
    for ty in _ticks(y_lo, y_hi):
        out.append(
            f'<line x1="{left - 5:.1f}" y1="{py(ty):.1f}" x2="{left:.1f}" '
            f'y2="{py(ty):.1f}" stroke="#333"/>'
        )
        out.append(
            f'<text x="{left - 8:.1f}" y="{py(ty) + 4:.1f}" text-anchor="end" '
            f'font-size="11">{_fmt(ty)}</text>'
        )
    out.append(
        f'<text x="{(left + right) / 2:.1f}" y="{_PANEL_H - 8}" '
        f'text-anchor="middle" font-size="12">{_escape(x_label)}</text>'
    )
    out.append(
        f'<text x="{x_offset + 16}" y="{(top + bottom) / 2:.1f}" font-size="12" '
        f'text-anchor="middle" transform="rotate(-90 {x_offset + 16} '
        f'{(top + bottom) / 2:.1f})">{_escape(y_label)}</text>'
    )
    for si, (name, xs, ys) in enumerate(series):
        color = COLORS[si % len(COLORS)]
        points = " ".join(
            f"{px(x):.2f},{py(y):.2f}" for x, y in zip(xs, ys)
            if math.isfinite(y)
        )
        out.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.6" '
            f'points="{points}"/>'
        )
        ly = top + 16 + 15 * si
        out.append(
            f'<line x1="{right - 95:.1f}" y1="{ly}" x2="{right - 75:.1f}" '
            f'y2="{ly}" stroke="{color}" stroke-width="2"/>'
        )
        out.append(
            f'<text x="{right - 70:.1f}" y="{ly + 4}" font-size="11">'
            f"{_escape(name)}</text>"
        )
    return out


def write_svg(fragments, width, height, out_path):
    body = "\n".join(fragments)
    doc = (
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}" '
        f'width="{width}" height="{height}" font-family="sans-serif">\n'
        f'{body}\n</svg>\n'
    )
    Path(out_path).write_text(doc)


def plot_activations(kinds, x_range=(-6.0, 6.0), out_path="activations.svg",
                     n_points=1001):
    """Two-panel SVG: forward curves and first derivatives of ``kinds``."""
    if not kinds:
        raise UsageError("kinds list is empty")
    lo, hi = x_range
    if not lo < hi:
        raise UsageError("invalid x range")
    n_points = max(n_points, 1000)
    xs = [lo + i * (hi - lo) / (n_points - 1) for i in range(n_points)]
    fwd, der = [], []
    for kind in kinds:
        ys = [activation_forward(kind, x)[0] for x in xs]
        dys = [activation_derivative(kind, x) for x in xs]
        fwd.append((kind.tag, xs, ys))
        der.append((kind.tag, xs, dys))
    fragments = render_panel(fwd, "activation", "x", "f(x)", 0.0)
    fragments += render_panel(der, "first derivative", "x", "f'(x)", _PANEL_W)
    write_svg(fragments, 2 * _PANEL_W, _PANEL_H, out_path)


def plot_sweep(rows_by_series, title, x_label, y_label, out_path):
    """Single-panel chart from {series_name: (xs, ys)} sweep results."""
    series = [(name, xs, ys) for name, (xs, ys) in rows_by_series.items()]
    fragments = render_panel(series, title, x_label, y_label, 0.0)
    write_svg(fragments, _PANEL_W, _PANEL_H, out_path)
