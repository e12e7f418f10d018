"""Plain SVG snapshots of linkage configurations."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .geometry import Linkage

PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf")


@dataclass(frozen=True)
class Style:
    width: int = 480
    stroke_width: float = 2.0
    vertex_radius: float = 3.0
    colors: tuple = PALETTE
    background: str = "white"


def _fmt(x: float) -> str:
    s = f"{x:.6f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def viewbox_for(configs: Sequence[Linkage], pad: float = 0.1) -> tuple:
    """``(xmin, ymin, width, height)`` of the union of bounding boxes, padded on every side."""
    P = np.vstack([c.positions for c in configs])
    lo, hi = P.min(axis=0), P.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    margin = pad * float(span.max())
    lo = lo - margin
    size = span + 2 * margin
    return float(lo[0]), float(lo[1]), float(size[0]), float(size[1])


def render_svg(config: Linkage, style: Style = Style(), viewbox: Optional[tuple] = None) -> str:
    """One ``polyline`` (open) or ``polygon`` (closed) per chain plus a circle per vertex.

    The y axis is flipped so the picture has the usual mathematical
    orientation. Pass the same ``viewbox`` for every frame of a trace.
    """
    x0, y0, w, h = viewbox if viewbox is not None else viewbox_for([config])
    unit = max(w, h) / style.width
    height_px = max(1, round(style.width * h / w)) if w > 0 else style.width
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{style.width}" height="{height_px}" '
        f'viewBox="{_fmt(x0)} {_fmt(-(y0 + h))} {_fmt(w)} {_fmt(h)}">',
        f'<rect x="{_fmt(x0)}" y="{_fmt(-(y0 + h))}" width="{_fmt(w)}" height="{_fmt(h)}" fill="{style.background}"/>',
    ]
    sw = _fmt(style.stroke_width * unit)
    r = _fmt(style.vertex_radius * unit)
    for k, chain in enumerate(config.chains):
        color = style.colors[k % len(style.colors)]
        pts = " ".join(f"{_fmt(x)},{_fmt(-y)}" for x, y in chain.vertices)
        tag = "polygon" if chain.closed else "polyline"
        out.append(f'<{tag} points="{pts}" fill="none" stroke="{color}" stroke-width="{sw}" '
                   'stroke-linejoin="round"/>')
        for x, y in chain.vertices:
            out.append(f'<circle cx="{_fmt(x)}" cy="{_fmt(-y)}" r="{r}" fill="{color}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
