"""File outputs: CSV, JSON reports, and SVG plots.

CSV floats are printed with 17 significant digits and a lowercase
exponent so values round-trip exactly.  Report JSON is meant for diffing
across runs, so its floats are quantized: rounded to 9 significant
digits, with magnitudes below 1e-11 reported as 0.  Full-precision
numbers always live in the CSVs.

All writers are deterministic: identical inputs produce byte-identical
files.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .analysis import HexagonFigure
from .web import Domain

CSV_FLOAT_DIGITS = 17
_JSON_FLOOR = 1e-11
_JSON_DIGITS = 9

LEAF_HEADER = "foliation,level,arc,x,y"
LEAF_IMAGE_HEADER = "foliation,level,arc,x,y,image"
CURVATURE_HEADER = "x,y,K"
HEXAGON_LEGS_HEADER = "leg,x,y"
DEFECT_TABLE_HEADER = "r,defect"

# fixed stroke palette per foliation (1-based)
_FOLIATION_COLORS = {0: "#7f7f7f", 1: "#1f77b4", 2: "#2ca02c", 3: "#d62728"}


def fmt(v: float) -> str:
    """17-significant-digit decimal form with lowercase exponent."""
    return format(float(v), f".{CSV_FLOAT_DIGITS}g")


def _clean_json(obj):
    if isinstance(obj, dict):
        return {k: _clean_json(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean_json(v) for v in obj]
    if isinstance(obj, (bool, int, str)) or obj is None:
        return obj
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        if not math.isfinite(v):
            raise ValueError(f"non-finite value {v!r} in report")
        if abs(v) < _JSON_FLOOR:
            return 0.0
        return float(f"{v:.{_JSON_DIGITS}g}")
    if isinstance(obj, np.integer):
        return int(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__} into a report")


def dump_json(obj: dict, path: Path | str) -> None:
    """Write a report object as quantized, diff-stable JSON."""
    text = json.dumps(_clean_json(obj), indent=2) + "\n"
    Path(path).write_text(text)


def write_leaf_csv(path: Path | str, leaves, with_image: bool = False) -> None:
    """One vertex per row.

    ``leaves`` is an iterable of LeafPolyline, or of (LeafPolyline,
    image_flag) pairs when ``with_image`` is set.
    """
    lines = [LEAF_IMAGE_HEADER if with_image else LEAF_HEADER]
    for item in leaves:
        if with_image:
            leaf, image = item
            suffix = f",{int(image)}"
        else:
            leaf, suffix = item, ""
        for arc, (x, y) in zip(leaf.arcs, leaf.vertices):
            lines.append(
                f"{leaf.foliation},{fmt(leaf.level)},{fmt(arc)},{fmt(x)},{fmt(y)}{suffix}"
            )
    Path(path).write_text("\n".join(lines) + "\n")


def write_curvature_csv(path: Path | str, xs, ys, kappa) -> None:
    lines = [CURVATURE_HEADER]
    for x, y, k in zip(xs, ys, kappa):
        lines.append(f"{fmt(x)},{fmt(y)},{fmt(k)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_hexagon_legs_csv(path: Path | str, figure: HexagonFigure) -> None:
    """Leg paths (leg 0 is the radius walk) plus a defect summary line."""
    lines = [HEXAGON_LEGS_HEADER]
    for leg_idx, leg in enumerate(figure.legs):
        for x, y in leg:
            lines.append(f"{leg_idx},{fmt(x)},{fmt(y)}")
    lines.append(f"defect={fmt(figure.defect)}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_defect_table_csv(path: Path | str, radii, defects) -> None:
    lines = [DEFECT_TABLE_HEADER]
    for r, d in zip(radii, defects):
        lines.append(f"{fmt(r)},{fmt(d)}")
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------


def _svg_fmt(v: float) -> str:
    return format(v, ".6g")


def write_svg(
    path: Path | str,
    domain: Domain,
    leaves,
    width: float = 640.0,
) -> None:
    """Static plot with one polyline element per exported leaf.

    ``leaves`` is an iterable of (LeafPolyline, image_flag); images are
    dashed.  The viewport always contains the whole domain box and grows
    as needed to keep mapped leaves visible; the box outline is drawn for
    reference.
    """
    leaves = list(leaves)
    xmin, xmax, ymin, ymax = domain.box
    for leaf, _ in leaves:
        if len(leaf) == 0:
            continue
        xmin = min(xmin, float(leaf.vertices[:, 0].min()))
        xmax = max(xmax, float(leaf.vertices[:, 0].max()))
        ymin = min(ymin, float(leaf.vertices[:, 1].min()))
        ymax = max(ymax, float(leaf.vertices[:, 1].max()))
    pad = 0.03 * max(xmax - xmin, ymax - ymin)
    xmin, xmax = xmin - pad, xmax + pad
    ymin, ymax = ymin - pad, ymax + pad
    scale = width / (xmax - xmin)
    height = (ymax - ymin) * scale

    def to_px(x: float, y: float) -> tuple[float, float]:
        return (x - xmin) * scale, (ymax - y) * scale

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_svg_fmt(width)}" '
        f'height="{_svg_fmt(height)}" viewBox="0 0 {_svg_fmt(width)} {_svg_fmt(height)}">',
        f'<rect width="{_svg_fmt(width)}" height="{_svg_fmt(height)}" fill="white"/>',
    ]
    bx0, by0 = to_px(domain.box[0], domain.box[3])
    bx1, by1 = to_px(domain.box[1], domain.box[2])
    parts.append(
        f'<rect x="{_svg_fmt(bx0)}" y="{_svg_fmt(by0)}" '
        f'width="{_svg_fmt(bx1 - bx0)}" height="{_svg_fmt(by1 - by0)}" '
        'fill="none" stroke="#bbbbbb" stroke-width="1"/>'
    )
    for leaf, image in leaves:
        if len(leaf) < 2:
            continue
        pts = " ".join(
            f"{_svg_fmt(px)},{_svg_fmt(py)}"
            for px, py in (to_px(x, y) for x, y in leaf.vertices)
        )
        color = _FOLIATION_COLORS.get(leaf.foliation, _FOLIATION_COLORS[0])
        dash = ' stroke-dasharray="6 4"' if image else ""
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            f'stroke-width="1.4"{dash}/>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n")
