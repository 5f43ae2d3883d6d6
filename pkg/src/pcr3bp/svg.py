"""Minimal SVG writer for planar plots in the rotating frame."""

from __future__ import annotations

from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

__all__ = ["Canvas", "PALETTE"]

PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#17becf")


def _fmt(v: float) -> str:
    return f"{v:.5f}".rstrip("0").rstrip(".")


class Canvas:
    """Accumulates primitives in data coordinates; ``y`` points up.

    Output is a pure function of the drawing calls, so identical inputs give
    byte-identical files.
    """

    def __init__(self, bbox, width: int = 800):
        self.xmin, self.xmax, self.ymin, self.ymax = map(float, bbox)
        self.width = int(width)
        self.height = int(round(width * (self.ymax - self.ymin) / (self.xmax - self.xmin)))
        self._items: list[str] = []

    def _xy(self, x, y):
        sx = (np.asarray(x) - self.xmin) / (self.xmax - self.xmin) * self.width
        sy = (self.ymax - np.asarray(y)) / (self.ymax - self.ymin) * self.height
        return sx, sy

    def label_image(self, labels: np.ndarray, colors: dict[int, str]):
        """Draw an integer image (row 0 at ``ymin``) as one rectangle per horizontal run.

        Labels missing from ``colors`` are left blank.
        """
        ny, nx = labels.shape
        dx = self.width / nx
        dy = self.height / ny
        for j in range(ny):
            row = labels[ny - 1 - j]
            cuts = np.concatenate(([0], np.flatnonzero(np.diff(row)) + 1, [nx]))
            for a, b in zip(cuts[:-1], cuts[1:]):
                fill = colors.get(int(row[a]))
                if fill is None:
                    continue
                self._items.append(
                    f'<rect x="{_fmt(a * dx)}" y="{_fmt(j * dy)}" width="{_fmt((b - a) * dx)}" '
                    f'height="{_fmt(dy)}" fill="{fill}" stroke="none"/>'
                )

    def polyline(self, pts, color="#000000", width=1.0, closed=False):
        pts = np.asarray(pts, dtype=float)
        if len(pts) < 2:
            return
        sx, sy = self._xy(pts[:, 0], pts[:, 1])
        coords = " ".join(f"{_fmt(a)},{_fmt(b)}" for a, b in zip(sx, sy))
        tag = "polygon" if closed else "polyline"
        self._items.append(
            f'<{tag} points="{coords}" fill="none" stroke="{color}" stroke-width="{_fmt(width)}"/>'
        )

    def marker(self, x, y, label="", color="#000000", r=3.0):
        sx, sy = self._xy(x, y)
        self._items.append(f'<circle cx="{_fmt(sx)}" cy="{_fmt(sy)}" r="{_fmt(r)}" fill="{color}"/>')
        if label:
            self._items.append(
                f'<text x="{_fmt(sx + 4)}" y="{_fmt(sy - 4)}" font-size="11" font-family="sans-serif">'
                f"{escape(label)}</text>"
            )

    def text(self, x_px: float, y_px: float, s: str, size: int = 12):
        self._items.append(
            f'<text x="{_fmt(x_px)}" y="{_fmt(y_px)}" font-size="{size}" font-family="sans-serif">{escape(s)}</text>'
        )

    def render(self) -> str:
        head = (
            f'<svg xmlns="http://www.w3.org/2000/svg" width="{self.width}" height="{self.height}" '
            f'viewBox="0 0 {self.width} {self.height}">'
        )
        body = "\n".join(self._items)
        return f'<?xml version="1.0" encoding="UTF-8"?>\n{head}\n<rect width="100%" height="100%" fill="white"/>\n{body}\n</svg>\n'

    def save(self, path) -> Path:
        path = Path(path)
        path.write_text(self.render())
        return path
