"""Figure rendering: one PNG per figure table, written next to the CSV."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402  (backend must be set first)

from .experiments import FigureTable

_TITLES = {
    "fig1": "Sample path of the traded price C and the index S",
    "fig2": "Sample path of the market price of risk",
    "fig3": "Equilibrium vs indifference price across strikes",
    "fig4": "Equilibrium vs indifference price across risk aversion",
    "fig5": "Equilibrium vs indifference price across correlation",
    "fig6": "Equilibrium price across risk aversion, weather income",
    "fig7": "Effect of the unspanned income component",
    "fig8": "Two-period price with and without unspanned income",
    "fig9": "Price change from re-updated risk aversion, by initial regime",
}


def render_figure(table: FigureTable, out_dir) -> Path:
    """Render the table as a line plot; returns the PNG path."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / f"{table.figure}.png"
    xs = [row[0] for row in table.rows]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for idx, name in enumerate(table.columns[1:], start=1):
        ax.plot(xs, [row[idx] for row in table.rows], marker="o", label=name)
    ax.set_xlabel(table.columns[0])
    ax.set_title(_TITLES.get(table.figure, table.figure))
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
