"""Brute-force grid over two deviation dimensions, with CSV/SVG heatmaps.

Each cell is evaluated by running the lower-layer falsifier at the cell
centre, with the remaining dimensions pinned to nominal.

SVG layout: ``CELL`` pixels per cell, dimension 1 on the horizontal axis
(left to right), dimension 2 on the vertical axis (bottom to top). Cells
with ``gamma >= 0`` are red and cells with ``gamma < 0`` blue. Intensity is
``|gamma|`` divided by the grid's largest ``|gamma|``, clamped to 1 and
floored at ``MIN_INTENSITY`` so that the sign stays readable. Campaign
samples are drawn as grey crosses, violations as yellow crosses.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .envs import SystemModel
from .falsify import derive_seed, lower_falsify

CELL = 24
MARGIN = 70
MIN_INTENSITY = 0.15
GREY = "#808080"
YELLOW = "#ffd700"
UNKNOWN = "#c8c8c8"
CSV_HEADER = ("dim1", "dim2", "center1", "center2", "gamma")


@dataclass
class Grid:
    dims: Tuple[int, int]
    names: Tuple[str, str]
    edges1: np.ndarray
    edges2: np.ndarray
    gamma: np.ndarray  # gamma[a, b]: cell a along dim 1, cell b along dim 2
    lower_budget: int = 0
    seed: int = 0
    system: str = ""
    nominal: Optional[List[float]] = None

    @property
    def resolution(self) -> int:
        return len(self.edges1) - 1

    @property
    def centers1(self) -> np.ndarray:
        return (self.edges1[:-1] + self.edges1[1:]) / 2

    @property
    def centers2(self) -> np.ndarray:
        return (self.edges2[:-1] + self.edges2[1:]) / 2

    @property
    def flagged(self) -> np.ndarray:
        return ~np.isfinite(self.gamma)

    def cell_of(self, point: Sequence[float]) -> Tuple[int, int]:
        """Cell indices holding a full deviation vector ``point``."""
        a = np.searchsorted(self.edges1, point[self.dims[0]], side="right") - 1
        b = np.searchsorted(self.edges2, point[self.dims[1]], side="right") - 1
        n = self.resolution
        return int(min(max(a, 0), n - 1)), int(min(max(b, 0), n - 1))

    def gamma_at(self, point: Sequence[float]) -> float:
        return float(self.gamma[self.cell_of(point)])


def grid_scan(
    model: SystemModel,
    policy,
    dims: Sequence[int] = (0, 1),
    resolution: int = 20,
    lower_budget: int = 50,
    seed: int = 0,
    spec=None,
) -> Grid:
    space = model.deviation
    d1, d2 = (int(d) for d in dims)
    if d1 == d2:
        raise ValueError("grid needs two distinct dimensions")
    if not (0 <= d1 < space.dim and 0 <= d2 < space.dim):
        raise ValueError(f"dimensions must lie in 0..{space.dim - 1}")
    if resolution < 2:
        raise ValueError("resolution must be at least 2")
    e1 = np.linspace(space.lower[d1], space.upper[d1], resolution + 1)
    e2 = np.linspace(space.lower[d2], space.upper[d2], resolution + 1)
    grid = Grid(
        dims=(d1, d2),
        names=(space.names[d1], space.names[d2]),
        edges1=e1,
        edges2=e2,
        gamma=np.empty((resolution, resolution)),
        lower_budget=lower_budget,
        seed=seed,
        system=model.name,
        nominal=[float(v) for v in space.nominal],
    )
    c1, c2 = grid.centers1, grid.centers2
    for a in range(resolution):
        for b in range(resolution):
            delta = np.array(space.nominal, dtype=float)
            delta[d1], delta[d2] = c1[a], c2[b]
            out = lower_falsify(model, delta, policy, lower_budget, derive_seed(seed, a, b), spec)
            grid.gamma[a, b] = out.gamma
    return grid


def write_csv(grid: Grid, path) -> Path:
    """One row per cell: the two dimension names, the cell centre, gamma."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_HEADER)
        for a, x in enumerate(grid.centers1):
            for b, y in enumerate(grid.centers2):
                w.writerow([grid.names[0], grid.names[1], repr(float(x)), repr(float(y)), repr(float(grid.gamma[a, b]))])
    return path


def read_csv(path) -> dict:
    """Parse a grid CSV into ``{(center1, center2): gamma}`` plus names."""
    cells = {}
    names = None
    with Path(path).open() as fh:
        for row in csv.DictReader(fh):
            names = (row["dim1"], row["dim2"])
            cells[(float(row["center1"]), float(row["center2"]))] = float(row["gamma"])
    return {"names": names, "cells": cells}


def cell_color(gamma: float, scale: float) -> str:
    if not math.isfinite(gamma):
        return UNKNOWN
    t = min(abs(gamma) / scale, 1.0) if scale > 0 else 1.0
    t = MIN_INTENSITY + (1 - MIN_INTENSITY) * t
    fade = int(round(255 * (1 - t)))
    if gamma >= 0:
        return f"#ff{fade:02x}{fade:02x}"
    return f"#{fade:02x}{fade:02x}ff"


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def render_svg(grid: Grid, overlay: Iterable = ()) -> str:
    n = grid.resolution
    size = n * CELL
    width = height = size + 2 * MARGIN
    finite = np.abs(grid.gamma[np.isfinite(grid.gamma)])
    scale = float(finite.max()) if finite.size else 1.0
    lo1, hi1 = grid.edges1[0], grid.edges1[-1]
    lo2, hi2 = grid.edges2[0], grid.edges2[-1]

    def px(v1, v2):
        x = MARGIN + (v1 - lo1) / (hi1 - lo1) * size
        y = MARGIN + size - (v2 - lo2) / (hi2 - lo2) * size
        return x, y

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" data-system="{grid.system}">',
        f'<rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff"/>',
        '<g class="cells">',
    ]
    for a in range(n):
        for b in range(n):
            g = float(grid.gamma[a, b])
            kind = "nan" if not math.isfinite(g) else ("pos" if g >= 0 else "neg")
            x = MARGIN + a * CELL
            y = MARGIN + size - (b + 1) * CELL
            out.append(
                f'<rect class="cell {kind}" x="{x}" y="{y}" width="{CELL}" height="{CELL}" '
                f'fill="{cell_color(g, scale)}" data-i="{a}" data-j="{b}" data-gamma="{g!r}"/>'
            )
    out.append("</g>")
    out.append(
        f'<rect x="{MARGIN}" y="{MARGIN}" width="{size}" height="{size}" fill="none" stroke="#000000"/>'
    )

    out.append('<g class="overlay">')
    arm = CELL * 0.3
    d1, d2 = grid.dims
    for rec in overlay:
        delta = rec["delta"] if isinstance(rec, dict) else rec.delta
        violating = rec["violating"] if isinstance(rec, dict) else rec.violating
        x, y = px(delta[d1], delta[d2])
        color = YELLOW if violating else GREY
        kind = "violation" if violating else "sample"
        out.append(
            f'<g class="cross {kind}" stroke="{color}" stroke-width="2" '
            f'data-x="{float(delta[d1])!r}" data-y="{float(delta[d2])!r}">'
            f'<line x1="{x - arm:.2f}" y1="{y - arm:.2f}" x2="{x + arm:.2f}" y2="{y + arm:.2f}"/>'
            f'<line x1="{x - arm:.2f}" y1="{y + arm:.2f}" x2="{x + arm:.2f}" y2="{y - arm:.2f}"/></g>'
        )
    out.append("</g>")

    base = MARGIN + size
    out += [
        f'<text class="axis-label x" x="{MARGIN + size / 2}" y="{base + 45}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{grid.names[0]}</text>',
        f'<text class="axis-label y" x="{MARGIN - 45}" y="{MARGIN + size / 2}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14" transform="rotate(-90 {MARGIN - 45} {MARGIN + size / 2})">'
        f"{grid.names[1]}</text>",
        f'<text x="{MARGIN}" y="{base + 18}" text-anchor="middle" font-size="11">{_fmt(lo1)}</text>',
        f'<text x="{base}" y="{base + 18}" text-anchor="middle" font-size="11">{_fmt(hi1)}</text>',
        f'<text x="{MARGIN - 8}" y="{base}" text-anchor="end" font-size="11">{_fmt(lo2)}</text>',
        f'<text x="{MARGIN - 8}" y="{MARGIN + 4}" text-anchor="end" font-size="11">{_fmt(hi2)}</text>',
        "</svg>",
    ]
    return "\n".join(out) + "\n"


def render_heatmap(grid: Grid, overlay: Iterable = (), path="heatmap.svg") -> Tuple[Path, Path]:
    """Write ``path`` (SVG) and the same stem with ``.csv``; return both paths."""
    svg_path = Path(path)
    csv_path = svg_path.with_suffix(".csv")
    write_csv(grid, csv_path)
    svg_path.write_text(render_svg(grid, list(overlay)))
    return svg_path, csv_path
