"""Minimal static SVG charts from result CSVs."""

from __future__ import annotations

import csv
import math
from pathlib import Path

WIDTH, HEIGHT = 640, 400
MARGIN = 56


class PlotInputError(ValueError):
    """The CSV lacks the requested columns or has no plottable rows."""


def read_xy(path, x: str, y: str) -> list[tuple[float, float]]:
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        cols = reader.fieldnames or []
        missing = [c for c in (x, y) if c not in cols]
        if missing:
            raise PlotInputError(f"{path}: missing column(s) {', '.join(missing)}")
        pts = []
        for row in reader:
            try:
                pts.append((float(row[x]), float(row[y])))
            except (TypeError, ValueError):
                continue
    pts = [(a, b) for a, b in pts if math.isfinite(a) and math.isfinite(b)]
    if not pts:
        raise PlotInputError(f"{path}: no numeric rows for {x} vs {y}")
    return pts


def _span(lo: float, hi: float) -> tuple[float, float]:
    if lo == hi:
        pad = abs(lo) * 0.05 or 0.5
        return lo - pad, hi + pad
    return lo, hi


def render_svg(points: list[tuple[float, float]], xlabel: str, ylabel: str) -> str:
    pts = sorted(points)
    x0, x1 = _span(min(p[0] for p in pts), max(p[0] for p in pts))
    y0, y1 = _span(min(p[1] for p in pts), max(p[1] for p in pts))
    w, h = WIDTH - 2 * MARGIN, HEIGHT - 2 * MARGIN

    def sx(v):
        return MARGIN + (v - x0) / (x1 - x0) * w

    def sy(v):
        return HEIGHT - MARGIN - (v - y0) / (y1 - y0) * h

    line = " ".join(f"{sx(a):.2f},{sy(b):.2f}" for a, b in pts)
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{WIDTH}" height="{HEIGHT}" '
        f'viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{MARGIN}" y1="{HEIGHT - MARGIN}" x2="{WIDTH - MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{HEIGHT - MARGIN}" stroke="black"/>',
        f'<text x="{MARGIN}" y="{HEIGHT - MARGIN + 18}" font-size="11">{x0:.6g}</text>',
        f'<text x="{WIDTH - MARGIN}" y="{HEIGHT - MARGIN + 18}" font-size="11" text-anchor="end">{x1:.6g}</text>',
        f'<text x="{MARGIN - 6}" y="{HEIGHT - MARGIN}" font-size="11" text-anchor="end">{y0:.6g}</text>',
        f'<text x="{MARGIN - 6}" y="{MARGIN + 4}" font-size="11" text-anchor="end">{y1:.6g}</text>',
        f'<text x="{WIDTH / 2:.0f}" y="{HEIGHT - 14}" font-size="13" text-anchor="middle">{_esc(xlabel)}</text>',
        f'<text x="16" y="{HEIGHT / 2:.0f}" font-size="13" text-anchor="middle" '
        f'transform="rotate(-90 16 {HEIGHT / 2:.0f})">{_esc(ylabel)}</text>',
        f'<polyline fill="none" stroke="steelblue" stroke-width="1.5" points="{line}"/>',
    ]
    out += [f'<circle class="point" cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="3" fill="steelblue"/>'
            for a, b in pts]
    out.append("</svg>")
    return "\n".join(out) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def plot_csv(path, x: str, y: str, out) -> Path:
    svg = render_svg(read_xy(path, x, y), x, y)
    out = Path(out)
    out.write_text(svg)
    return out
