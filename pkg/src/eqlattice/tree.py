"""Compiled scenario tree: joins the lattice with the market ingredients.

Compiles the declarative templates of a :class:`~eqlattice.config.ScenarioConfig`
into callables, then builds the full information-set tree with per-node forward
states, market prices of risk, dividends, terminal payoffs and incomes.

Everything is immutable after construction; functional evaluation is pure, so
any number of concurrent readers is safe.
"""

from __future__ import annotations

import math
from typing import Callable, Dict, List, Tuple

from . import config as cfgmod
from .config import ScenarioConfig
from .errors import ConfigError, ResourceLimitError
from .lattice import BranchEvent, Node, TimeGrid, enumerate_children, root_node
from .market import (
    CoefficientSpec,
    DividendSpec,
    ForwardState,
    IncomeSpec,
    PathContext,
    RegimeChain,
    effective_mu_c,
    evolve_forward,
    income as income_value,
    mpr,
)


def _compile_coeff(t) -> Callable[[int, float, float, int], float]:
    if isinstance(t, cfgmod.ConstCoeff):
        v = t.value
        return lambda n, c, s, j: v
    if isinstance(t, cfgmod.AffineSCoeff):
        a, b = t.intercept, t.slope
        return lambda n, c, s, j: a + b * s
    raise ConfigError(f"unknown coefficient template {t!r}")


def compile_coefficients(cfg: ScenarioConfig) -> CoefficientSpec:
    co = cfg.coefficients
    override = None
    if isinstance(co.mpr, cfgmod.ArctanMpr):
        override = lambda n, s: math.sqrt(math.atan(s) + math.pi / 2.0)
    elif isinstance(co.mpr, cfgmod.ConstMpr):
        v = co.mpr.value
        override = lambda n, s: v
    return CoefficientSpec(
        mu_c=_compile_coeff(co.mu_c),
        sigma_c=_compile_coeff(co.sigma_c),
        mu_s=_compile_coeff(co.mu_s),
        sigma_s=_compile_coeff(co.sigma_s),
        rho=co.rho,
        mpr_override=override,
    )


def compile_chain(cfg: ScenarioConfig) -> RegimeChain:
    ch = cfg.chain
    if ch.initial_distribution is not None:
        initial = ch.initial_distribution
    else:
        initial = tuple(
            1.0 if s == ch.initial_state else 0.0 for s in ch.states
        )
    return RegimeChain(ch.states, ch.transition, ch.gamma, initial)


def compile_income(cfg: ScenarioConfig, chain: RegimeChain) -> IncomeSpec:
    h = cfg.grid.step
    s0 = cfg.initial_s
    periods = cfg.grid.periods
    terms = []
    for term in cfg.income:
        if isinstance(term, cfgmod.ConstIncome):
            v = term.value
            terms.append(lambda ctx, v=v: v)
        elif isinstance(term, cfgmod.ExpAffineIncome):
            t = periods if term.s_time is None else term.s_time
            coef, rate = term.coef, term.rate
            terms.append(
                lambda ctx, coef=coef, rate=rate, t=t: coef
                * math.exp(rate * (ctx.s_path[t] - s0) * h)
            )
        elif isinstance(term, cfgmod.IndicatorIncome):
            shocks = term.shocks
            regimes = tuple(
                (t, chain.index_of(label)) for t, label in term.regimes
            )
            coef = term.coef * math.exp(term.growth * h)

            def indicator(ctx, shocks=shocks, regimes=regimes, coef=coef):
                for step, comp, sign in shocks:
                    if ctx.node.shocks[step][comp - 1] != sign:
                        return 0.0
                for t, j in regimes:
                    if ctx.node.regimes[t] != j:
                        return 0.0
                return coef

            terms.append(indicator)
        else:
            raise ConfigError(f"unknown income template {term!r}")
    if not terms:
        return IncomeSpec.zero()
    return IncomeSpec(lambda ctx: math.fsum(f(ctx) for f in terms))


def compile_dividend(cfg: ScenarioConfig) -> DividendSpec:
    dv = cfg.dividend
    if isinstance(dv, cfgmod.ZeroDividend):
        return DividendSpec.zero()
    if isinstance(dv, cfgmod.ConstDividend):
        v = dv.value
        return DividendSpec(lambda n, c, s: v, is_zero=(v == 0.0))
    if isinstance(dv, cfgmod.AffineDividend):
        a, bc, bs = dv.intercept, dv.slope_c, dv.slope_s
        return DividendSpec(lambda n, c, s: a + bc * c + bs * s)
    raise ConfigError(f"unknown dividend template {dv!r}")


def compile_payoff(cfg: ScenarioConfig) -> Callable[[PathContext], float]:
    p = cfg.payoff
    if isinstance(p, cfgmod.CallPayoff):
        k = p.strike
        return lambda ctx: max(ctx.terminal_s - k, 0.0)
    if isinstance(p, cfgmod.DigitalPayoff):
        return lambda ctx: 1.0 if ctx.node.last_shock[0] == 1 else 0.0
    if isinstance(p, cfgmod.ConstantPayoff):
        v = p.value
        return lambda ctx: v
    raise ConfigError(f"unknown payoff template {p!r}")


class Tree:
    """Fully built scenario tree over all initial regimes with positive mass."""

    def __init__(
        self,
        grid: TimeGrid,
        d: int,
        chain: RegimeChain,
        coefficients: CoefficientSpec,
        income_spec: IncomeSpec,
        dividend_spec: DividendSpec,
        payoff_fn: Callable[[PathContext], float],
        initial_c: float,
        initial_s: float,
        path_cap: int = cfgmod.DEFAULT_PATH_CAP,
    ) -> None:
        self.grid = grid
        self.d = d
        self.chain = chain
        self.coefficients = coefficients
        self.income_spec = income_spec
        self.dividend_spec = dividend_spec
        self.payoff_fn = payoff_fn
        self.initial_c = initial_c
        self.initial_s = initial_s

        roots = [root_node(i) for i in chain.initial_state_indices()]
        n_states = len(chain.states)
        paths = len(roots) * (2 ** (d * grid.periods)) * (n_states ** grid.periods)
        if paths > path_cap:
            raise ResourceLimitError(
                f"configuration spans {paths} path-nodes, above the cap "
                f"{path_cap}; raise --path-cap or shrink N, d or the chain"
            )

        self.roots: Tuple[Node, ...] = tuple(roots)
        self.root_weight: Dict[Node, float] = {
            r: chain.initial[r.initial_regime] for r in roots
        }
        self._state: Dict[Node, ForwardState] = {}
        self._children: Dict[Node, Tuple] = {}
        self._parent: Dict[Node, Node] = {}
        self._rc: Dict[Node, float] = {}
        self._sigma_c: Dict[Node, float] = {}
        self._phi: Dict[Node, float] = {}
        self._payoff: Dict[Node, float] = {}
        self._income: Dict[Node, float] = {}
        self.levels: List[List[Node]] = [list(roots)]

        for r in roots:
            self._state[r] = ForwardState(initial_c, initial_s)
        for n in range(grid.periods):
            level = self.levels[-1]
            next_level: List[Node] = []
            for node in level:
                st = self._state[node]
                try:
                    r = mpr(n, st, node.regime, coefficients, grid)
                except ConfigError as exc:
                    raise type(exc)(f"{exc} (node {node.coords()})") from None
                sigma = coefficients.sigma_c(n, st.C, st.S, node.regime)
                self._rc[node] = r
                self._sigma_c[node] = sigma
                self._phi[node] = dividend_spec.phi(n, st.C, st.S)
                dist = enumerate_children(node, chain, d, grid)
                kids = []
                for child, w in dist.entries:
                    try:
                        self._state[child] = evolve_forward(
                            st, n, child.last_shock, node.regime, coefficients, grid
                        )
                    except ConfigError as exc:
                        raise type(exc)(
                            f"{exc} (node {child.coords()})"
                        ) from None
                    self._parent[child] = node
                    kids.append((child, w))
                    next_level.append(child)
                self._children[node] = tuple(kids)
            self.levels.append(next_level)

        for t in self.levels[-1]:
            ctx = self.path_context(t)
            self._payoff[t] = payoff_fn(ctx)
            self._income[t] = income_value(ctx, income_spec)
            if not math.isfinite(self._payoff[t]):
                raise ConfigError(f"payoff is not finite at {t.coords()}")

    @classmethod
    def from_config(cls, cfg: ScenarioConfig) -> "Tree":
        cfgmod.validate_config(cfg)
        chain = compile_chain(cfg)
        return cls(
            grid=TimeGrid(cfg.grid.periods, cfg.grid.step),
            d=cfg.d,
            chain=chain,
            coefficients=compile_coefficients(cfg),
            income_spec=compile_income(cfg, chain),
            dividend_spec=compile_dividend(cfg),
            payoff_fn=compile_payoff(cfg),
            initial_c=cfg.initial_c,
            initial_s=cfg.initial_s,
            path_cap=cfg.path_cap,
        )

    # -- structure ---------------------------------------------------------

    def children(self, node: Node) -> Tuple:
        return self._children[node]

    def parent(self, node: Node) -> Node:
        return self._parent[node]

    def is_terminal(self, node: Node) -> bool:
        return node.time_index == self.grid.periods

    def terminals(self) -> List[Node]:
        return self.levels[-1]

    def nonterminal_nodes(self):
        for level in self.levels[:-1]:
            yield from level

    def all_nodes(self):
        for level in self.levels:
            yield from level

    def split_children(self, node: Node):
        """Children partitioned by the sign of the first shock component."""
        kids = self._children[node]
        up = [(c, w) for c, w in kids if c.branch is BranchEvent.UP]
        down = [(c, w) for c, w in kids if c.branch is BranchEvent.DOWN]
        return up, down

    # -- per-node data -----------------------------------------------------

    def state(self, node: Node) -> ForwardState:
        return self._state[node]

    def r(self, node: Node) -> float:
        """Market price of risk in force at a non-terminal node."""
        return self._rc[node]

    def sigma_c(self, node: Node) -> float:
        return self._sigma_c[node]

    def phi(self, node: Node) -> float:
        """Dividend rate at the node (paid as phi * h over the next step)."""
        return self._phi[node]

    def gamma_now(self, node: Node) -> float:
        return self.chain.gamma_of(node.regime)

    def gamma0(self, node: Node) -> float:
        """Risk aversion at the node's date-0 ancestor (frozen preferences)."""
        return self.chain.gamma_of(node.initial_regime)

    def payoff_at(self, terminal: Node) -> float:
        return self._payoff[terminal]

    def income_at(self, terminal: Node) -> float:
        return self._income[terminal]

    def path_context(self, terminal: Node) -> PathContext:
        nodes = [terminal]
        while nodes[-1].time_index > 0:
            nodes.append(self._parent[nodes[-1]])
        nodes.reverse()
        return PathContext(
            grid=self.grid,
            node=terminal,
            c_path=tuple(self._state[n].C for n in nodes),
            s_path=tuple(self._state[n].S for n in nodes),
        )

    def path_probability(self, terminal: Node) -> float:
        """Probability of the path conditional on its root."""
        p = 1.0
        node = terminal
        while node.time_index > 0:
            parent = self._parent[node]
            for child, w in self._children[parent]:
                if child == node:
                    p *= w
                    break
            node = parent
        return p

    def unique_root(self) -> Node:
        if len(self.roots) != 1:
            raise ConfigError(
                "this operation needs a fixed initial regime; the scenario "
                "has a non-degenerate initial distribution"
            )
        return self.roots[0]
