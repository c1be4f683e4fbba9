"""Exogenous model ingredients: forward price dynamics, regime chain with its
risk-aversion map, market price of risk, dividend stream and terminal income.

All specs hold pure functions; evaluation is side-effect free and safe for
concurrent use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import AdmissibilityError, ConfigError
from .lattice import Node, TimeGrid

# (time_index, C, S, regime_index) -> value
CoeffFn = Callable[[int, float, float, int], float]
# (time_index, S) -> nonnegative market price of risk
MprFn = Callable[[int, float], float]

ROW_SUM_TOL = 1e-14


@dataclass(frozen=True)
class RegimeChain:
    """Finite Markov chain with a per-state risk-aversion coefficient."""

    states: tuple  # labels, e.g. ("bull", "bear")
    transition: tuple  # row-stochastic matrix, tuple of tuples
    gamma: tuple  # positive risk aversion per state
    initial: tuple  # initial distribution over states

    def __post_init__(self) -> None:
        n = len(self.states)
        if n == 0:
            raise ConfigError("regime chain needs at least one state")
        if len(self.transition) != n or any(len(row) != n for row in self.transition):
            raise ConfigError("transition matrix shape does not match state count")
        for i, row in enumerate(self.transition):
            if any(p < 0 for p in row):
                raise ConfigError(f"transition row {i} has a negative entry")
            total = math.fsum(row)
            if abs(total - 1.0) > ROW_SUM_TOL:
                raise ConfigError(f"transition row {i} sums to {total!r}, not 1")
        if len(self.gamma) != n or any(g <= 0 for g in self.gamma):
            raise ConfigError("risk aversion must be positive for every state")
        if len(self.initial) != n or any(p < 0 for p in self.initial):
            raise ConfigError("initial distribution must be nonnegative")
        if abs(math.fsum(self.initial) - 1.0) > ROW_SUM_TOL:
            raise ConfigError("initial distribution must sum to 1")

    @classmethod
    def single(cls, gamma: float, label: str = "base") -> "RegimeChain":
        return cls((label,), ((1.0,),), (gamma,), (1.0,))

    def index_of(self, label: str) -> int:
        try:
            return self.states.index(label)
        except ValueError:
            raise ConfigError(f"unknown regime label {label!r}") from None

    def gamma_of(self, state: int) -> float:
        if not 0 <= state < len(self.states):
            raise ConfigError(f"unknown regime index {state}")
        return self.gamma[state]

    def initial_state_indices(self) -> tuple:
        return tuple(i for i, p in enumerate(self.initial) if p > 0)


@dataclass(frozen=True)
class CoefficientSpec:
    """Drift/volatility coefficients of the traded asset C and non-traded S.

    When ``mpr_override`` is set it is authoritative: the effective drift of C
    becomes r * sigma_c node by node, keeping mu = r * sigma consistent.
    """

    mu_c: CoeffFn
    sigma_c: CoeffFn
    mu_s: CoeffFn
    sigma_s: CoeffFn
    rho: float
    mpr_override: Optional[MprFn] = None

    def __post_init__(self) -> None:
        if not abs(self.rho) < 1:
            raise ConfigError(f"|rho| must be < 1, got {self.rho}")


@dataclass(frozen=True)
class ForwardState:
    """Traded price C and non-traded level S at a node; both strictly positive."""

    C: float
    S: float


@dataclass(frozen=True)
class IncomeSpec:
    """Terminal income as a functional of the whole path context."""

    terminal: Callable[["PathContext"], float]

    @classmethod
    def zero(cls) -> "IncomeSpec":
        return cls(lambda ctx: 0.0)


@dataclass(frozen=True)
class DividendSpec:
    """Per-period dividend rate phi(t, C, S); paid as phi * h each step."""

    phi: Callable[[int, float, float], float]
    is_zero: bool = False

    @classmethod
    def zero(cls) -> "DividendSpec":
        return cls(lambda n, c, s: 0.0, is_zero=True)


@dataclass(frozen=True)
class PathContext:
    """Everything a terminal functional may look at: the node (shock and
    regime histories) and the full C/S paths including initial values."""

    grid: TimeGrid
    node: Node
    c_path: tuple
    s_path: tuple

    @property
    def terminal_s(self) -> float:
        return self.s_path[-1]

    @property
    def terminal_c(self) -> float:
        return self.c_path[-1]

    @property
    def initial_s(self) -> float:
        return self.s_path[0]


def mpr(
    time_index: int,
    state: ForwardState,
    regime: int,
    spec: CoefficientSpec,
    grid: TimeGrid,
) -> float:
    """Market price of risk r = mu_c / sigma_c, or the configured override.

    Enforces the admissibility condition r * sqrt(h) < 1 strictly.
    """
    sigma = spec.sigma_c(time_index, state.C, state.S, regime)
    if sigma <= 0:
        raise ConfigError(f"sigma_c must be positive, got {sigma} at t_{time_index}")
    if spec.mpr_override is not None:
        r = spec.mpr_override(time_index, state.S)
    else:
        r = spec.mu_c(time_index, state.C, state.S, regime) / sigma
    if r < 0:
        raise ConfigError(f"market price of risk must be nonnegative, got {r}")
    if r * grid.sqrt_step >= 1.0:
        raise AdmissibilityError(
            f"step size too coarse: r*sqrt(h) = {r * grid.sqrt_step:.6g} >= 1 "
            f"at t_{time_index}, S={state.S:.6g}; shrink h"
        )
    return r


def effective_mu_c(
    time_index: int,
    state: ForwardState,
    regime: int,
    spec: CoefficientSpec,
    grid: TimeGrid,
) -> float:
    """Drift of C consistent with the market price of risk in force."""
    if spec.mpr_override is None:
        return spec.mu_c(time_index, state.C, state.S, regime)
    r = mpr(time_index, state, regime, spec, grid)
    return r * spec.sigma_c(time_index, state.C, state.S, regime)


def evolve_forward(
    parent: ForwardState,
    time_index: int,
    shock: tuple,
    regime: int,
    spec: CoefficientSpec,
    grid: TimeGrid,
) -> ForwardState:
    """One forward step of (C, S) given the shock realized over the step.

    ``time_index`` and ``regime`` refer to the parent node (coefficients are
    adapted).  Raises if either price would stop being positive.
    """
    h = grid.step
    sh = grid.sqrt_step
    mu_c = effective_mu_c(time_index, parent, regime, spec, grid)
    sigma_c = spec.sigma_c(time_index, parent.C, parent.S, regime)
    mu_s = spec.mu_s(time_index, parent.C, parent.S, regime)
    sigma_s = spec.sigma_s(time_index, parent.C, parent.S, regime)
    if sigma_s <= 0:
        raise ConfigError(f"sigma_s must be positive, got {sigma_s} at t_{time_index}")
    rho = spec.rho
    # second walk component drives the idiosyncratic part of S
    w2 = shock[1] if len(shock) > 1 else 0.0
    eps = rho * shock[0] + math.sqrt(1.0 - rho * rho) * w2
    c_next = parent.C * (1.0 + mu_c * h + sigma_c * sh * shock[0])
    s_next = parent.S * (1.0 + mu_s * h + sigma_s * sh * eps)
    if c_next <= 0 or s_next <= 0:
        raise ConfigError(
            f"positivity violated stepping from t_{time_index} "
            f"(C={parent.C:.6g}, S={parent.S:.6g}, shock={shock}): "
            f"C_next={c_next:.6g}, S_next={s_next:.6g}"
        )
    return ForwardState(c_next, s_next)


def risk_aversion(node: Node, chain: RegimeChain) -> float:
    """Risk aversion in force at the node: gamma of its current regime."""
    return chain.gamma_of(node.regime)


def income(ctx: PathContext, spec: IncomeSpec) -> float:
    value = spec.terminal(ctx)
    if not math.isfinite(value):
        raise ConfigError(
            f"income is not finite at terminal node {ctx.node.coords()}"
        )
    return value
