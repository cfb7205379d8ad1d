"""Figure output: a gnuplot script per plot (always) and a PNG when
matplotlib is importable. The CSV files written by the runner are the data
source for both, so the numerical core never imports a graphics package."""

from __future__ import annotations

from pathlib import Path

import numpy as np


def gnuplot_script(plot, tables: dict, files: dict[str, str]) -> str:
    """Text of a gnuplot script rendering ``plot`` from the CSV files."""
    lines = [
        f"# {plot.title}",
        'set datafile separator ","',
        "set terminal pngcairo size 900,600",
        f"set output '{plot.name}_gnuplot.png'",
        f"set title '{plot.title}'",
        f"set xlabel '{plot.xlabel}'",
        f"set ylabel '{plot.ylabel}'",
    ]
    if plot.logy:
        lines.append("set logscale y")
    if plot.image is not None:
        table, x, y, z = plot.image
        cols = [tables[table].header.index(c) + 1 for c in (x, y, z)]
        lines.append(f"plot '{files[table]}' skip 1 using {cols[0]}:{cols[1]}:{cols[2]} with image notitle")
        return "\n".join(lines) + "\n"
    parts = []
    for s in plot.series:
        header = tables[s.table].header
        xi, yi = header.index(s.x) + 1, header.index(s.y) + 1
        parts.append(f"'{files[s.table]}' skip 1 using {xi}:{yi} with {s.style} title '{s.label}'")
    lines.append("plot " + ", \\\n     ".join(parts))
    return "\n".join(lines) + "\n"


def _column(table, name) -> np.ndarray:
    j = table.header.index(name)
    return np.array([row[j] for row in table.rows], dtype=float)


def render_png(plot, tables: dict, path: Path) -> bool:
    """Draw ``plot`` with matplotlib's Agg backend. Returns False when
    matplotlib is unavailable."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return False

    fig, ax = plt.subplots(figsize=(7, 4.5))
    try:
        if plot.image is not None:
            table, x, y, z = plot.image
            tb = tables[table]
            xs, ys, zs = (_column(tb, c) for c in (x, y, z))
            ux, uy = np.unique(xs), np.unique(ys)
            grid = np.full((uy.size, ux.size), np.nan)
            grid[np.searchsorted(uy, ys), np.searchsorted(ux, xs)] = zs
            mesh = ax.pcolormesh(ux, uy, grid, shading="nearest", cmap="viridis")
            fig.colorbar(mesh, ax=ax, label=z)
        else:
            for s in plot.series:
                tb = tables[s.table]
                x, y = _column(tb, s.x), _column(tb, s.y)
                if s.style == "lines":
                    ax.plot(x, y, "-", label=s.label)
                elif s.style == "linespoints":
                    ax.plot(x, y, "o-", ms=3, label=s.label)
                else:
                    ax.plot(x, y, "o", ms=3, label=s.label)
            if plot.logy:
                ax.set_yscale("log")
            if len(plot.series) > 1:
                ax.legend()
        ax.set_title(plot.title)
        ax.set_xlabel(plot.xlabel)
        ax.set_ylabel(plot.ylabel)
        fig.tight_layout()
        fig.savefig(path, dpi=110, metadata={"Software": None})
    finally:
        plt.close(fig)
    return True
