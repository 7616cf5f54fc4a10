"""Plain-text SVG overlays of curves."""
from __future__ import annotations

from pathlib import Path

import numpy as np

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd")


def _path(points: np.ndarray) -> str:
    head = f"M {points[0, 0]:.6g} {points[0, 1]:.6g}"
    body = " ".join(f"L {x:.6g} {y:.6g}" for x, y in points[1:])
    return f"{head} {body}"


def overlay(curves, path, labels=None, width: int = 800, margin: float = 0.05) -> Path:
    """Write an SVG with one ``<path>`` per curve; y axis points up."""
    pts = [np.asarray(c.points if hasattr(c, "points") else c, dtype=float) for c in curves]
    if not pts:
        raise ValueError("nothing to draw")
    allp = np.vstack(pts)
    lo, hi = allp.min(axis=0), allp.max(axis=0)
    span = np.maximum(hi - lo, 1e-9)
    pad = margin * span.max()
    lo, span = lo - pad, span + 2 * pad
    height = max(int(width * span[1] / span[0]), 50)
    stroke = span.max() / width * 1.5
    labels = labels or [f"curve {i}" for i in range(len(pts))]
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
           f'viewBox="{lo[0]:.6g} {-(lo[1] + span[1]):.6g} {span[0]:.6g} {span[1]:.6g}">',
           '<g transform="scale(1,-1)">']
    for i, (p, name) in enumerate(zip(pts, labels)):
        colour = PALETTE[i % len(PALETTE)]
        out.append(f'<path d="{_path(p)}" fill="none" stroke="{colour}" '
                   f'stroke-width="{stroke:.4g}"><title>{name}</title></path>')
    out += ["</g>", "</svg>"]
    path = Path(path)
    path.write_text("\n".join(out) + "\n")
    return path
