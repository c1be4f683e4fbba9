"""Exact lattice engine for equilibrium pricing of a derivative on a
non-traded index, under regime-switching exponential risk aversion.

The model joins a d-dimensional symmetric binomial walk with a finite Markov
regime chain on a non-recombining information-set tree, solves the
representative agent's coupled first-order conditions in closed form by
backward induction, and produces both the subgame-perfect (re-updated risk
aversion) and the frozen-preference equilibrium prices, together with the
one-step pricing kernels, the induced measure density, and an
indifference-price baseline.  Everything is verifiable against an
independent brute-force solver in :mod:`eqlattice.verify`.
"""

from .config import ScenarioConfig, dumps, load, loads
from .errors import (
    AdmissibilityError,
    CheckFailure,
    ConfigError,
    EqLatticeError,
    LatticeError,
    NumericalRangeError,
    PreconditionError,
    ResourceLimitError,
)
from .experiments import FigureTable, run_figure, scenario
from .lattice import BranchEvent, Node, TimeGrid
from .market import (
    CoefficientSpec,
    DividendSpec,
    ForwardState,
    IncomeSpec,
    PathContext,
    RegimeChain,
)
from .pricing import (
    MeasureDensity,
    PricingSolution,
    SolutionMode,
    certainty_equivalent,
    indifference_price,
    measure_density,
    price_single_period,
    solve_equilibrium,
)
from .tree import Tree
from .verify import VerificationReport, brute_force_single_period, verify_scenario

__version__ = "1.0.0"

__all__ = [
    "AdmissibilityError",
    "BranchEvent",
    "CheckFailure",
    "CoefficientSpec",
    "ConfigError",
    "DividendSpec",
    "EqLatticeError",
    "FigureTable",
    "ForwardState",
    "IncomeSpec",
    "LatticeError",
    "MeasureDensity",
    "Node",
    "NumericalRangeError",
    "PathContext",
    "PreconditionError",
    "PricingSolution",
    "RegimeChain",
    "ResourceLimitError",
    "ScenarioConfig",
    "SolutionMode",
    "TimeGrid",
    "Tree",
    "VerificationReport",
    "brute_force_single_period",
    "certainty_equivalent",
    "dumps",
    "indifference_price",
    "load",
    "loads",
    "measure_density",
    "price_single_period",
    "run_figure",
    "scenario",
    "solve_equilibrium",
    "verify_scenario",
]
