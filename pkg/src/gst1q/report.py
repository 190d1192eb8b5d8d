"""Plain-text and SVG renderings of gate sets."""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .gateset import GateSet

__all__ = ["format_matrix", "format_gateset", "format_table", "ptm_svg"]

PAULI_LABELS = ("I", "X", "Y", "Z")


def format_matrix(m, digits: int = 4) -> str:
    m = np.asarray(m, dtype=float)
    width = digits + 4
    head = " " * 3 + "".join(f"{p:>{width}}" for p in PAULI_LABELS[: m.shape[1]])
    rows = [f"{PAULI_LABELS[i]:>2} " + "".join(f"{v + 0.0:>{width}.{digits}f}" for v in row)
            for i, row in enumerate(m)]
    return "\n".join([head] + rows)


def format_gateset(gs: GateSet, digits: int = 4) -> str:
    out = [f"rho    = [{', '.join(f'{v:.{digits}f}' for v in gs.rho)}]",
           f"E      = [{', '.join(f'{v:.{digits}f}' for v in gs.effect)}]"]
    for label, g in zip(gs.labels, gs.gates):
        out.append(f"\n{label}:")
        out.append(format_matrix(g, digits))
    return "\n".join(out)


def format_table(header: Sequence[str], rows: Sequence[Sequence]) -> str:
    cells = [[str(h) for h in header]] + [
        [f"{v:.3e}" if isinstance(v, float) else str(v) for v in row] for row in rows]
    widths = [max(len(r[i]) for r in cells) for i in range(len(header))]
    lines = ["  ".join(c.rjust(w) for c, w in zip(r, widths)) for r in cells]
    lines.insert(1, "  ".join("-" * w for w in widths))
    return "\n".join(lines)


def _color(v: float, vmax: float) -> str:
    t = max(-1.0, min(1.0, v / vmax)) if vmax > 0 else 0.0
    if t >= 0:
        r, g, b = 255, int(255 * (1 - t)), int(255 * (1 - t))
    else:
        r, g, b = int(255 * (1 + t)), int(255 * (1 + t)), 255
    return f"rgb({r},{g},{b})"


def ptm_svg(columns: Sequence[tuple[str, GateSet]], cell: int = 22, vmax: float = 1.0) -> str:
    """Grid of PTMs: one column per gate set, one row per gate.

    Red is positive, blue negative, saturating at ``vmax``.
    """
    if not columns:
        raise ValueError("nothing to draw")
    n_rows = max(gs.n_gates for _, gs in columns)
    block = 4 * cell + 30
    width, height = block * len(columns) + 60, block * n_rows + 40
    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'font-family="monospace" font-size="11">']
    for c, (title, gs) in enumerate(columns):
        x0 = 60 + c * block
        parts.append(f'<text x="{x0}" y="16">{title}</text>')
        for k, (label, g) in enumerate(zip(gs.labels, gs.gates)):
            y0 = 30 + k * block
            if c == 0:
                parts.append(f'<text x="4" y="{y0 + 2 * cell}">{label}</text>')
            for i in range(4):
                for j in range(4):
                    v = float(g[i, j])
                    parts.append(f'<rect x="{x0 + j * cell}" y="{y0 + i * cell}" width="{cell}" '
                                 f'height="{cell}" fill="{_color(v, vmax)}" stroke="#888" '
                                 f'stroke-width="0.5"><title>{label}[{i},{j}] = {v:.6g}</title></rect>')
    parts.append("</svg>")
    return "\n".join(parts)
