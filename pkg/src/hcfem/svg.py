"""Standalone SVG log-log plots, byte-deterministic for identical input."""

from __future__ import annotations

import math

_WIDTH = 640
_HEIGHT = 480
_MARGIN_L = 70
_MARGIN_R = 160
_MARGIN_T = 30
_MARGIN_B = 50

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]


def _decades(lo: float, hi: float):
    d0 = math.floor(math.log10(lo))
    d1 = math.ceil(math.log10(hi))
    if d1 == d0:
        d1 += 1
    return d0, d1


def emit_svg_loglog(series, path, title: str = "", xlabel: str = "",
                    ylabel: str = "") -> list:
    """Write a log-log plot with one polyline per named series.

    ``series`` is a list of (name, xs, ys). Points with non-positive x or y
    cannot be drawn on log axes; they are dropped and reported in the
    returned warning list. An empty series list still yields a valid SVG
    with default axes.
    """
    cleaned = []
    warnings = []
    for name, xs, ys in series:
        pts = [(float(x), float(y)) for x, y in zip(xs, ys)]
        kept = [(x, y) for x, y in pts if x > 0.0 and y > 0.0]
        dropped = len(pts) - len(kept)
        if dropped:
            warnings.append(
                f"series {name!r}: dropped {dropped} non-positive point(s) "
                f"from the log-log plot"
            )
        cleaned.append((name, kept))

    all_pts = [p for _, kept in cleaned for p in kept]
    if all_pts:
        x0, x1 = _decades(min(p[0] for p in all_pts), max(p[0] for p in all_pts))
        y0, y1 = _decades(min(p[1] for p in all_pts), max(p[1] for p in all_pts))
    else:
        x0, x1, y0, y1 = 0, 1, 0, 1

    plot_w = _WIDTH - _MARGIN_L - _MARGIN_R
    plot_h = _HEIGHT - _MARGIN_T - _MARGIN_B

    def px(x):
        return _MARGIN_L + (math.log10(x) - x0) / (x1 - x0) * plot_w

    def py(y):
        return _HEIGHT - _MARGIN_B - (math.log10(y) - y0) / (y1 - y0) * plot_h

    parts = []
    parts.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" '
        f'height="{_HEIGHT}" viewBox="0 0 {_WIDTH} {_HEIGHT}">'
    )
    parts.append(f'<rect width="{_WIDTH}" height="{_HEIGHT}" fill="white"/>')
    if title:
        parts.append(
            f'<text x="{_WIDTH // 2}" y="20" text-anchor="middle" '
            f'font-family="monospace" font-size="14">{_esc(title)}</text>'
        )

    # Frame and decade grid.
    parts.append(
        f'<rect x="{_MARGIN_L}" y="{_MARGIN_T}" width="{plot_w}" '
        f'height="{plot_h}" fill="none" stroke="black"/>'
    )
    for d in range(x0, x1 + 1):
        x = px(10.0 ** d)
        parts.append(
            f'<line x1="{x:.2f}" y1="{_MARGIN_T}" x2="{x:.2f}" '
            f'y2="{_HEIGHT - _MARGIN_B}" stroke="#cccccc" stroke-width="0.5"/>'
        )
        parts.append(
            f'<text x="{x:.2f}" y="{_HEIGHT - _MARGIN_B + 18}" '
            f'text-anchor="middle" font-family="monospace" font-size="11">'
            f"1e{d}</text>"
        )
    for d in range(y0, y1 + 1):
        y = py(10.0 ** d)
        parts.append(
            f'<line x1="{_MARGIN_L}" y1="{y:.2f}" x2="{_WIDTH - _MARGIN_R}" '
            f'y2="{y:.2f}" stroke="#cccccc" stroke-width="0.5"/>'
        )
        parts.append(
            f'<text x="{_MARGIN_L - 6}" y="{y:.2f}" text-anchor="end" '
            f'dominant-baseline="middle" font-family="monospace" '
            f'font-size="11">1e{d}</text>'
        )
    if xlabel:
        parts.append(
            f'<text x="{_MARGIN_L + plot_w // 2}" y="{_HEIGHT - 10}" '
            f'text-anchor="middle" font-family="monospace" font-size="12">'
            f"{_esc(xlabel)}</text>"
        )
    if ylabel:
        parts.append(
            f'<text x="16" y="{_MARGIN_T + plot_h // 2}" text-anchor="middle" '
            f'font-family="monospace" font-size="12" '
            f'transform="rotate(-90 16 {_MARGIN_T + plot_h // 2})">'
            f"{_esc(ylabel)}</text>"
        )

    # Series polylines and legend.
    for idx, (name, kept) in enumerate(cleaned):
        color = _PALETTE[idx % len(_PALETTE)]
        if kept:
            coords = " ".join(f"{px(x):.2f},{py(y):.2f}" for x, y in kept)
            parts.append(
                f'<polyline points="{coords}" fill="none" stroke="{color}" '
                f'stroke-width="1.5"/>'
            )
            for x, y in kept:
                parts.append(
                    f'<circle cx="{px(x):.2f}" cy="{py(y):.2f}" r="2.5" '
                    f'fill="{color}"/>'
                )
        ly = _MARGIN_T + 14 + 16 * idx
        lx = _WIDTH - _MARGIN_R + 10
        parts.append(
            f'<line x1="{lx}" y1="{ly}" x2="{lx + 18}" y2="{ly}" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{lx + 24}" y="{ly + 4}" font-family="monospace" '
            f'font-size="11">{_esc(str(name))}</text>'
        )

    parts.append("</svg>")
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(parts))
        fh.write("\n")
    return warnings


def _esc(text: str) -> str:
    return (
        text.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")
    )
