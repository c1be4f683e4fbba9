"""Finite state space of a d-dimensional symmetric binomial walk joined with a
finite Markov chain, plus a small conditional-expectation engine.

Nodes are information sets: the full shock history and the full regime history
(including the initial regime).  The tree is deliberately non-recombining so
path-dependent coefficients and incomes stay sound.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from enum import Enum
from typing import TYPE_CHECKING, Callable, Optional

from .errors import ConfigError, LatticeError

if TYPE_CHECKING:  # pragma: no cover
    from .market import RegimeChain

ShockVector = tuple  # components in {+1, -1}

#: Child weights must sum to one within this tolerance.
WEIGHT_SUM_TOL = 1e-14


@dataclass(frozen=True)
class TimeGrid:
    """Uniform trading grid: ``periods`` steps of length ``step``.

    The horizon is always derived as ``periods * step``; it is never stored.
    """

    periods: int
    step: float

    def __post_init__(self) -> None:
        if self.periods < 1:
            raise ConfigError(f"grid needs at least one period, got {self.periods}")
        if not self.step > 0:
            raise ConfigError(f"period length must be positive, got {self.step}")

    @property
    def horizon(self) -> float:
        return self.periods * self.step

    @property
    def sqrt_step(self) -> float:
        return math.sqrt(self.step)

    def time(self, n: int) -> float:
        return n * self.step


class BranchEvent(Enum):
    """Sign of the first shock component over the next step."""

    UP = 1    # A: first component +1
    DOWN = -1  # A complement


@dataclass(frozen=True)
class Node:
    """An information-set point: time index, shock history, regime history."""

    time_index: int
    shocks: tuple  # tuple of shock vectors, one per elapsed step
    regimes: tuple  # regime index per date, including the initial one

    def __post_init__(self) -> None:
        if len(self.shocks) != self.time_index:
            raise LatticeError(
                f"node at t_{self.time_index} must carry {self.time_index} "
                f"shock vectors, got {len(self.shocks)}"
            )
        if len(self.regimes) != self.time_index + 1:
            raise LatticeError(
                f"node at t_{self.time_index} must carry {self.time_index + 1} "
                f"regime labels, got {len(self.regimes)}"
            )
        for vec in self.shocks:
            if any(c not in (1, -1) for c in vec):
                raise LatticeError(f"shock components must be +1 or -1, got {vec}")

    @property
    def regime(self) -> int:
        """Current regime index."""
        return self.regimes[-1]

    @property
    def initial_regime(self) -> int:
        return self.regimes[0]

    @property
    def last_shock(self) -> ShockVector:
        if not self.shocks:
            raise LatticeError("root node has no incoming shock")
        return self.shocks[-1]

    @property
    def branch(self) -> BranchEvent:
        """Which half-event (A or its complement) this node's last step fell in."""
        return BranchEvent.UP if self.last_shock[0] == 1 else BranchEvent.DOWN

    def coords(self) -> str:
        """Human-readable coordinates, used in error messages."""
        shocks = "|".join(
            "".join("+" if c == 1 else "-" for c in vec) for vec in self.shocks
        )
        regimes = ">".join(str(j) for j in self.regimes)
        return f"t={self.time_index} shocks=[{shocks}] regimes=[{regimes}]"


@dataclass(frozen=True)
class ChildDistribution:
    """Joint law of (next shock vector, next regime) as (child, weight) pairs."""

    entries: tuple

    def __post_init__(self) -> None:
        if any(w <= 0 for _, w in self.entries):
            raise LatticeError("child weights must be strictly positive")
        total = math.fsum(w for _, w in self.entries)
        if abs(total - 1.0) > WEIGHT_SUM_TOL:
            raise LatticeError(f"child weights sum to {total!r}, not 1")


def root_node(initial_regime: int) -> Node:
    return Node(0, (), (initial_regime,))


def shock_outcomes(d: int):
    """All 2^d next shock vectors in a fixed deterministic order."""
    return itertools.product((1, -1), repeat=d)


def enumerate_children(
    node: Node,
    chain: "RegimeChain",
    d: Optional[int] = None,
    grid: Optional[TimeGrid] = None,
) -> ChildDistribution:
    """Every (shock outcome x regime transition) child with its joint weight.

    Shock outcomes carry exact dyadic weight 2^-d each; regime transitions
    follow the chain's transition row; the walk and the chain are independent.
    """
    if grid is not None and node.time_index >= grid.periods:
        raise LatticeError(f"terminal node has no children ({node.coords()})")
    if d is None:
        if not node.shocks:
            raise LatticeError("pass d explicitly for a root node")
        d = len(node.shocks[0])
    row = chain.transition[node.regime]
    base = 0.5 ** d
    entries = []
    for outcome in shock_outcomes(d):
        for j, p in enumerate(row):
            if p <= 0.0:
                continue
            child = Node(
                node.time_index + 1, node.shocks + (outcome,), node.regimes + (j,)
            )
            entries.append((child, base * p))
    return ChildDistribution(tuple(entries))


def expect(
    node: Node,
    f: Callable[[Node], float],
    chain: "RegimeChain",
    d: Optional[int] = None,
    grid: Optional[TimeGrid] = None,
) -> float:
    """One-step conditional expectation E[f | node], compensated summation."""
    dist = enumerate_children(node, chain, d, grid)
    return math.fsum(w * f(child) for child, w in dist.entries)


def expect_given(
    node: Node,
    event: BranchEvent,
    f: Callable[[Node], float],
    chain: "RegimeChain",
    d: Optional[int] = None,
    grid: Optional[TimeGrid] = None,
) -> float:
    """Conditional expectation E[f | event of the first shock component, node]."""
    dist = enumerate_children(node, chain, d, grid)
    matching = [(c, w) for c, w in dist.entries if c.branch is event]
    total = math.fsum(w for _, w in matching)
    return math.fsum(w * f(c) for c, w in matching) / total
