"""Deterministic artifact emission: CSV tables, text blocks, atomic writes.

Floating-point cells are rendered with 17 significant digits in lowercase
scientific notation so that identical inputs produce byte-identical files on
every platform.  All writes go through a temp-file-plus-rename so a killed
run never leaves a torn artifact behind.
"""

from __future__ import annotations

import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

from .experiments import FigureTable
from .pricing import PricingSolution


def fmt(value) -> str:
    """Canonical cell rendering: floats at full precision, the rest as-is."""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return f"{value:.16e}"
    return str(value)


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to ``path`` atomically (temp file + rename)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def csv_text(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def write_csv(path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    atomic_write_text(path, csv_text(header, rows))


def write_figure(table: FigureTable, out_dir) -> Path:
    """Emit ``figN.csv`` plus a ``figN.provenance.txt`` sidecar; returns the
    CSV path."""
    out_dir = Path(out_dir)
    csv_path = out_dir / f"{table.figure}.csv"
    write_csv(csv_path, table.columns, table.rows)
    atomic_write_text(
        out_dir / f"{table.figure}.provenance.txt", table.provenance + "\n"
    )
    return csv_path


SOLUTION_HEADER = (
    "time_index",
    "shocks",
    "regimes",
    "c",
    "s",
    "price",
    "alpha",
    "gamma",
    "child_kernels",
)


def solution_rows(solution: PricingSolution):
    """Flat per-node rows of a solved tree, in deterministic level order.

    ``child_kernels`` joins the one-step kernel of every child edge with
    ``;`` in the tree's fixed child order; empty for terminal nodes."""
    tree = solution.tree
    for node in tree.all_nodes():
        state = tree.state(node)
        shocks = ";".join(
            "".join("u" if x == 1 else "d" for x in step) for step in node.shocks
        )
        regimes = ";".join(str(j) for j in node.regimes)
        if tree.is_terminal(node):
            price = tree.payoff_at(node)
            alpha = ""
            gamma = ""
            kernels = ""
        else:
            price = solution.price[node]
            alpha = solution.alpha[node]
            gamma = solution.gamma_used[node]
            kernels = ";".join(
                fmt(solution.kernel[(node, child)])
                for child, _ in tree.children(node)
            )
        yield (
            node.time_index,
            shocks or "-",
            regimes,
            state.C,
            state.S,
            price,
            alpha,
            gamma,
            kernels,
        )


def write_solution(solution: PricingSolution, out_dir, name: str) -> Path:
    out_dir = Path(out_dir)
    path = out_dir / f"{name}.csv"
    write_csv(path, SOLUTION_HEADER, solution_rows(solution))
    return path
