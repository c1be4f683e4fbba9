"""Built-in experiment scenarios and figure-data generators.

The scenarios form a small desk-scale study of equilibrium pricing for a
weather-style derivative: a traded energy price C, a non-traded temperature
index S, a call on S, and a representative agent whose income is exposed to
the weather.  Each ``figN`` generator returns a :class:`FigureTable` of
plain numbers (abscissa plus one or more series), ready for CSV emission or
plotting.

Defaults that are not pinned down by the study design (the regime transition
matrix, the two risk-aversion levels of fig9, the sweep variables of
fig3-fig5) are recorded in each table's provenance block and can be
overridden through the keyword arguments of :func:`run_figure`.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, replace
from typing import Dict, List, Optional, Sequence, Tuple

from .config import (
    ArctanMpr,
    CallPayoff,
    ChainConfig,
    CoefficientConfig,
    ConstCoeff,
    ConstantPayoff,
    DigitalPayoff,
    ExpAffineIncome,
    GridConfig,
    IndicatorIncome,
    ScenarioConfig,
    ZeroDividend,
)
from .errors import CheckFailure, ConfigError
from .lattice import TimeGrid
from .market import ForwardState, evolve_forward, mpr
from .pricing import SolutionMode, indifference_price, solve_equilibrium
from .tree import Tree, compile_coefficients

SCENARIO_IDS = (
    "fig1_2_paths",
    "fig3_4_5_eq_vs_indiff",
    "fig6_gamma_sweep",
    "fig7_unspanned",
    "fig8_two_period",
    "fig9_regime",
)

#: figure id -> scenario id
FIGURE_SCENARIO = {
    "fig1": "fig1_2_paths",
    "fig2": "fig1_2_paths",
    "fig3": "fig3_4_5_eq_vs_indiff",
    "fig4": "fig3_4_5_eq_vs_indiff",
    "fig5": "fig3_4_5_eq_vs_indiff",
    "fig6": "fig6_gamma_sweep",
    "fig7": "fig7_unspanned",
    "fig8": "fig8_two_period",
    "fig9": "fig9_regime",
}

GAMMA_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))
DEFAULT_GAMMA_SHIFT = 0.2
DEFAULT_REGIME_TRANSITION = ((0.8, 0.2), (0.3, 0.7))

# study-wide parameter block
STEP = 0.3
INITIAL_C = 10.0
INITIAL_S = 10.0
RHO = 0.5
MU_C = 0.1
SIGMA_C = 0.2
MU_S = 0.3
SIGMA_S = 0.5
STRIKE = 10.0
GAMMA_BASE = 0.7
DIMENSION = 3
PATH_PERIODS = 20


def _coefficients(rho: float = RHO, arctan: bool = True) -> CoefficientConfig:
    return CoefficientConfig(
        mu_c=ConstCoeff(MU_C),
        sigma_c=ConstCoeff(SIGMA_C),
        mu_s=ConstCoeff(MU_S),
        sigma_s=ConstCoeff(SIGMA_S),
        rho=rho,
        mpr=ArctanMpr() if arctan else None,
    )


def _single_chain(gamma: float = GAMMA_BASE) -> ChainConfig:
    return ChainConfig(
        states=("base",),
        transition=((1.0,),),
        gamma=(gamma,),
        initial_state="base",
    )


def spanned_income(s_time: Optional[int] = None) -> ExpAffineIncome:
    """Weather-exposed income 7*exp(-0.5*(S_t - S_0)*h)."""
    return ExpAffineIncome(7.0, -0.5, s_time=s_time)


def unspanned_income(step: int, growth: float = 0.1) -> Tuple[IndicatorIncome, ...]:
    """Four-cell income on the joint signs of shock components 1 and 3."""
    cells = ((5.0, 1, 1), (4.0, 1, -1), (2.0, -1, 1), (1.0, -1, -1))
    return tuple(
        IndicatorIncome(coef, growth, shocks=((step, 1, s1), (step, 3, s3)))
        for coef, s1, s3 in cells
    )


def regime_income(growth: float = 0.03) -> Tuple[IndicatorIncome, ...]:
    """Income cells keyed on the initial regime and the last third-component
    shock: (bull, +), (bull, -), (bear, +), (bear, -)."""
    cells = (
        (10.0, "bull", 1),
        (8.0, "bull", -1),
        (5.0, "bear", 1),
        (4.0, "bear", -1),
    )
    return tuple(
        IndicatorIncome(
            coef, growth, shocks=((1, 3, sign),), regimes=((0, label),)
        )
        for coef, label, sign in cells
    )


def scenario(scenario_id: str) -> ScenarioConfig:
    """Built-in scenario for one of the figure groups (see SCENARIO_IDS)."""
    base = dict(
        d=DIMENSION,
        initial_c=INITIAL_C,
        initial_s=INITIAL_S,
        coefficients=_coefficients(),
        chain=_single_chain(),
        dividend=ZeroDividend(),
        payoff=CallPayoff(STRIKE),
    )
    if scenario_id == "fig1_2_paths":
        return ScenarioConfig(
            label="fig1_2_paths",
            grid=GridConfig(PATH_PERIODS, STEP),
            **base,
        )
    if scenario_id == "fig3_4_5_eq_vs_indiff":
        return ScenarioConfig(
            label="fig3_4_5_eq_vs_indiff",
            grid=GridConfig(1, STEP),
            **base,
        )
    if scenario_id == "fig6_gamma_sweep":
        return ScenarioConfig(
            label="fig6_gamma_sweep",
            grid=GridConfig(1, STEP),
            income=(spanned_income(),),
            **base,
        )
    if scenario_id == "fig7_unspanned":
        return ScenarioConfig(
            label="fig7_unspanned",
            grid=GridConfig(1, STEP),
            income=(spanned_income(),) + unspanned_income(step=0),
            **base,
        )
    if scenario_id == "fig8_two_period":
        return ScenarioConfig(
            label="fig8_two_period",
            grid=GridConfig(2, STEP),
            income=(spanned_income(),) + unspanned_income(step=1),
            **base,
        )
    if scenario_id == "fig9_regime":
        base["chain"] = ChainConfig(
            states=("bull", "bear"),
            transition=DEFAULT_REGIME_TRANSITION,
            gamma=(0.5, 0.5 * (1.0 + DEFAULT_GAMMA_SHIFT)),
            initial_state="bull",
        )
        return ScenarioConfig(
            label="fig9_regime",
            grid=GridConfig(2, STEP),
            income=(spanned_income(s_time=1),) + regime_income(),
            **base,
        )
    raise ConfigError(f"unknown scenario id {scenario_id!r}")


@dataclass(frozen=True)
class FigureTable:
    """Numeric figure data: an abscissa column plus one or more series."""

    figure: str
    columns: Tuple[str, ...]
    rows: Tuple[Tuple[float, ...], ...]
    provenance: str

    def __post_init__(self) -> None:
        for row in self.rows:
            if len(row) != len(self.columns):
                raise ValueError(
                    f"row width {len(row)} does not match {len(self.columns)} columns"
                )
            if any(v is None or not math.isfinite(v) for v in row):
                raise ValueError(f"missing or non-finite cell in row {row!r}")
        xs = [row[0] for row in self.rows]
        if xs != sorted(xs):
            raise ValueError("rows must be sorted by abscissa")

    def series(self, name: str) -> Tuple[float, ...]:
        idx = self.columns.index(name)
        return tuple(row[idx] for row in self.rows)


def _verify_or_raise(cfg: ScenarioConfig) -> None:
    from .verify import verify_scenario  # deferred: verify imports pricing

    report = verify_scenario(cfg)
    if not report.passed:
        raise CheckFailure(
            f"scenario {report.label!r} failed verification:\n{report.lines()}"
        )


def _root_price(cfg: ScenarioConfig, mode: SolutionMode) -> float:
    tree = Tree.from_config(cfg)
    solution = solve_equilibrium(tree, mode)
    return solution.price[tree.unique_root()]


def _provenance(cfg: ScenarioConfig, notes: Sequence[str], seed: Optional[int]) -> str:
    lines = [
        f"scenario: {cfg.label}",
        f"periods: {cfg.grid.periods}",
        f"step: {cfg.grid.step!r}",
        f"d: {cfg.d}",
        f"initial_c: {cfg.initial_c!r}",
        f"initial_s: {cfg.initial_s!r}",
        f"rho: {cfg.coefficients.rho!r}",
        f"mu_c: {cfg.coefficients.mu_c!r}",
        f"sigma_c: {cfg.coefficients.sigma_c!r}",
        f"mu_s: {cfg.coefficients.mu_s!r}",
        f"sigma_s: {cfg.coefficients.sigma_s!r}",
        f"mpr: {cfg.coefficients.mpr!r}",
        f"chain_states: {cfg.chain.states!r}",
        f"chain_transition: {cfg.chain.transition!r}",
        f"chain_gamma: {cfg.chain.gamma!r}",
        f"payoff: {cfg.payoff!r}",
        f"dividend: {cfg.dividend!r}",
        f"income_terms: {len(cfg.income)}",
        f"seed: {seed if seed is not None else 'n/a'}",
    ]
    lines.extend(notes)
    return "\n".join(lines)


def _simulate_path(cfg: ScenarioConfig, seed: int):
    """One forward sample path of (C, S) and the market price of risk."""
    spec = compile_coefficients(cfg)
    grid = TimeGrid(cfg.grid.periods, cfg.grid.step)
    rng = random.Random(seed)
    state = ForwardState(cfg.initial_c, cfg.initial_s)
    regime = 0  # single-regime path scenario
    rows = []
    for n in range(grid.periods + 1):
        r = mpr(n, state, regime, spec, grid)
        rows.append((n, n * grid.step, state.C, state.S, r))
        if n == grid.periods:
            break
        shock = tuple(1 if rng.random() < 0.5 else -1 for _ in range(cfg.d))
        state = evolve_forward(state, n, shock, regime, spec, grid)
    return rows


def _fig_paths(figure: str, seed: Optional[int], verify: bool) -> FigureTable:
    cfg = scenario("fig1_2_paths")
    if seed is not None:
        cfg = replace(cfg, seed=seed)
    if verify:
        # the path scenario itself is simulation-only; its pricing layer is
        # checked on the one-period restriction of the same market
        _verify_or_raise(
            replace(cfg, grid=GridConfig(1, cfg.grid.step), label=cfg.label + "_1p")
        )
    rows = _simulate_path(cfg, cfg.seed)
    notes = [f"simulation_seed: {cfg.seed}"]
    if figure == "fig1":
        table_rows = tuple((float(n), t, c, s) for n, t, c, s, _ in rows)
        columns = ("step", "time", "c", "s")
    else:
        table_rows = tuple((float(n), t, r) for n, t, _, _, r in rows)
        columns = ("step", "time", "mpr")
    return FigureTable(figure, columns, table_rows, _provenance(cfg, notes, cfg.seed))


def _fig_eq_vs_indiff(figure: str, verify: bool) -> FigureTable:
    base = scenario("fig3_4_5_eq_vs_indiff")
    if verify:
        _verify_or_raise(base)
    if figure == "fig3":
        sweep = [6.0 + k for k in range(9)]
        configs = [
            replace(base, payoff=CallPayoff(strike)) for strike in sweep
        ]
        abscissa = "strike"
        note = "sweep: strike 6..14 (reconstruction; sweep variable not pinned)"
    elif figure == "fig4":
        sweep = list(GAMMA_GRID)
        configs = [base.with_gamma(g) for g in sweep]
        abscissa = "gamma"
        note = "sweep: gamma 0.1..0.9 (reconstruction; sweep variable not pinned)"
    else:
        sweep = [round(-0.8 + 0.2 * k, 1) for k in range(9)]
        configs = [
            replace(
                base, coefficients=replace(base.coefficients, rho=rho)
            )
            for rho in sweep
        ]
        abscissa = "rho"
        note = "sweep: rho -0.8..0.8 (reconstruction; sweep variable not pinned)"
    rows = []
    for x, cfg in zip(sweep, configs):
        tree = Tree.from_config(cfg)
        solution = solve_equilibrium(tree, SolutionMode.CONSISTENT)
        rows.append(
            (x, solution.price[tree.unique_root()], indifference_price(tree))
        )
    return FigureTable(
        figure,
        (abscissa, "equilibrium", "indifference"),
        tuple(rows),
        _provenance(base, [note], None),
    )


def _fig_gamma_sweep(verify: bool) -> FigureTable:
    base = scenario("fig6_gamma_sweep")
    if verify:
        _verify_or_raise(base)
    rows = tuple(
        (g, _root_price(base.with_gamma(g), SolutionMode.CONSISTENT))
        for g in GAMMA_GRID
    )
    return FigureTable(
        "fig6",
        ("gamma", "equilibrium"),
        rows,
        _provenance(base, ["sweep: gamma 0.1..0.9"], None),
    )


def _fig_unspanned(verify: bool) -> FigureTable:
    spanned = scenario("fig6_gamma_sweep")
    full = scenario("fig7_unspanned")
    if verify:
        _verify_or_raise(full)
    rows = tuple(
        (
            g,
            _root_price(spanned.with_gamma(g), SolutionMode.CONSISTENT),
            _root_price(full.with_gamma(g), SolutionMode.CONSISTENT),
        )
        for g in GAMMA_GRID
    )
    return FigureTable(
        "fig7",
        ("gamma", "spanned", "unspanned"),
        rows,
        _provenance(full, ["sweep: gamma 0.1..0.9"], None),
    )


def _fig_two_period(verify: bool) -> FigureTable:
    with_income = scenario("fig8_two_period")
    without = replace(with_income, income=(spanned_income(),))
    if verify:
        _verify_or_raise(with_income)
    rows = tuple(
        (
            g,
            _root_price(without.with_gamma(g), SolutionMode.INCONSISTENT),
            _root_price(with_income.with_gamma(g), SolutionMode.INCONSISTENT),
        )
        for g in GAMMA_GRID
    )
    return FigureTable(
        "fig8",
        ("gamma", "without_unspanned", "with_unspanned"),
        rows,
        _provenance(with_income, ["sweep: gamma 0.1..0.9"], None),
    )


def _fig_regime(gamma_shift: Optional[float], verify: bool) -> FigureTable:
    shift = DEFAULT_GAMMA_SHIFT if gamma_shift is None else gamma_shift
    base = scenario("fig9_regime")
    if verify:
        _verify_or_raise(base)
    rows = []
    for g in GAMMA_GRID:
        cells = []
        for state in base.chain.states:
            cfg = replace(
                base,
                chain=replace(
                    base.chain,
                    gamma=(g, g * (1.0 + shift)),
                    initial_state=state,
                ),
            )
            tree = Tree.from_config(cfg)
            d_cons = solve_equilibrium(tree, SolutionMode.CONSISTENT).price[
                tree.unique_root()
            ]
            d_incons = solve_equilibrium(tree, SolutionMode.INCONSISTENT).price[
                tree.unique_root()
            ]
            cells.append(100.0 * (d_cons - d_incons) / d_incons)
        rows.append((g, *cells))
    notes = [
        f"gamma_shift: {shift!r} (default, overridable)",
        f"transition: {base.chain.transition!r} (default, overridable)",
        "series: percentage change of the re-updating price vs the frozen one",
    ]
    return FigureTable(
        "fig9",
        ("gamma", "pct_change_bull", "pct_change_bear"),
        tuple(rows),
        _provenance(base, notes, None),
    )


def run_figure(
    figure: str,
    seed: Optional[int] = None,
    gamma_shift: Optional[float] = None,
    verify: bool = True,
) -> FigureTable:
    """Generate the data table of one figure (``fig1`` .. ``fig9``).

    When ``verify`` is set (the default) the figure's scenario must pass the
    full verification suite before any data is produced.
    """
    if figure not in FIGURE_SCENARIO:
        raise ConfigError(f"unknown figure id {figure!r}")
    if figure in ("fig1", "fig2"):
        return _fig_paths(figure, seed, verify)
    if figure in ("fig3", "fig4", "fig5"):
        return _fig_eq_vs_indiff(figure, verify)
    if figure == "fig6":
        return _fig_gamma_sweep(verify)
    if figure == "fig7":
        return _fig_unspanned(verify)
    if figure == "fig8":
        return _fig_two_period(verify)
    return _fig_regime(gamma_shift, verify)


def single_period_corpus() -> List[ScenarioConfig]:
    """Single-period scenarios crossing payoff, income and price-of-risk
    choices; the oracle-agreement and identity checks run over all of them."""
    payoffs = (
        ("const5", ConstantPayoff(5.0)),
        ("digital", DigitalPayoff()),
        ("call", CallPayoff(STRIKE)),
    )
    incomes = (
        ("noincome", ()),
        ("spanned", (spanned_income(),)),
        ("unspanned", (spanned_income(),) + unspanned_income(step=0)),
    )
    mprs = (("constmpr", False), ("arctanmpr", True))
    corpus = []
    for pname, payoff in payoffs:
        for iname, income in incomes:
            for mname, arctan in mprs:
                corpus.append(
                    ScenarioConfig(
                        label=f"{pname}_{iname}_{mname}",
                        grid=GridConfig(1, STEP),
                        d=DIMENSION,
                        initial_c=INITIAL_C,
                        initial_s=INITIAL_S,
                        coefficients=_coefficients(arctan=arctan),
                        chain=_single_chain(),
                        income=income,
                        dividend=ZeroDividend(),
                        payoff=payoff,
                    )
                )
    return corpus


def dominance_scenario(
    gamma_bull: float = 0.5, gamma_bear: float = 0.6
) -> ScenarioConfig:
    """Two-period, two-regime, zero-income investment scenario used by the
    strategy-dominance check (the derivative is excluded from the traded set,
    so the payoff below is ignored by that check)."""
    return ScenarioConfig(
        label="dominance_two_regime",
        grid=GridConfig(2, STEP),
        d=1,
        initial_c=INITIAL_C,
        initial_s=INITIAL_S,
        coefficients=_coefficients(rho=0.0, arctan=False),
        chain=ChainConfig(
            states=("bull", "bear"),
            transition=DEFAULT_REGIME_TRANSITION,
            gamma=(gamma_bull, gamma_bear),
            initial_state="bull",
        ),
        payoff=ConstantPayoff(0.0),
    )
