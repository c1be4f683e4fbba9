"""Backward-induction equilibrium solver.

Computes, for both the time-consistent and the time-inconsistent notion of
equilibrium: per-node prices, optimal holdings of the traded asset, certainty
equivalents keyed by the requesting risk aversion, one-step pricing kernels on
every edge, and the induced path measure density.  Also provides the classical
exponential-utility indifference price as a comparison baseline.

Within a layer the evaluation order is fixed: certainty equivalents at the
children, then the optimal holding, then the one-step kernels, then the price.
All exponential moments are evaluated in shifted form (subtracting the
per-conditioning-class minimum exponent) to keep ratios well conditioned.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Tuple

from .errors import AdmissibilityError, ConfigError, NumericalRangeError
from .lattice import BranchEvent, Node
from .tree import Tree


class SolutionMode(Enum):
    CONSISTENT = "consistent"      # subgame-perfect, risk aversion re-updated
    INCONSISTENT = "inconsistent"  # date-0 risk aversion frozen


def one_step_lambda(r: float, sqrt_h: float, event: BranchEvent) -> float:
    """Base kernel weight: 1 - r*sqrt(h) on the up event, 1 + r*sqrt(h) below."""
    x = r * sqrt_h
    if x >= 1.0:
        raise AdmissibilityError(f"r*sqrt(h) = {x:.6g} >= 1; kernel not positive")
    return 1.0 - x if event is BranchEvent.UP else 1.0 + x


def _shifted_class_mean(pairs, z: Dict[Node, float], gamma: float):
    """Return (z_min, mean of exp(-gamma*(z - z_min)) over the class).

    ``pairs`` are (child, weight); the mean is weight-normalized within the
    class, so it equals E[exp(-gamma*(z - z_min)) | class].
    """
    zmin = min(z[c] for c, _ in pairs)
    total = math.fsum(w for _, w in pairs)
    mean = math.fsum(w * math.exp(-gamma * (z[c] - zmin)) for c, w in pairs) / total
    if mean == 0.0 or not math.isfinite(mean):
        raise NumericalRangeError(
            f"shifted exponential sum degenerated (mean={mean!r}); "
            "exponents out of floating-point range"
        )
    return zmin, mean


def shifted_log_mean_exp(terms) -> float:
    """-log E[exp(-x)] evaluated stably; ``terms`` are (weight, x) with unit mass."""
    terms = list(terms)
    xmin = min(x for _, x in terms)
    mean = math.fsum(w * math.exp(-(x - xmin)) for w, x in terms)
    if mean == 0.0 or not math.isfinite(mean):
        raise NumericalRangeError("shifted exponential sum degenerated")
    return xmin - math.log(mean)


@dataclass
class PricingSolution:
    """Complete output of one backward-induction pass.

    ``beta`` is identically 1 at every non-terminal node (market clearing);
    ``cert_equiv`` is keyed by (node, requesting gamma) and grows lazily.
    """

    mode: SolutionMode
    tree: Tree
    price: Dict[Node, float]
    alpha: Dict[Node, float]
    kernel: Dict[Tuple[Node, Node], float]
    gamma_used: Dict[Node, float]
    cert_equiv: Dict[Tuple[Node, float], float] = field(default_factory=dict)

    @property
    def beta(self) -> float:
        return 1.0

    def edge_wealth_increment(self, parent: Node, child: Node) -> float:
        """Realized one-step wealth change of the equilibrium portfolio."""
        tree = self.tree
        sh = tree.grid.sqrt_step
        carry = tree.sigma_c(parent) * sh * (
            tree.r(parent) * sh + child.last_shock[0]
        )
        return (
            self.alpha[parent] * carry
            + self.price[child]
            - self.price[parent]
            + tree.phi(parent) * tree.grid.step
        )


def certainty_equivalent(
    solution: PricingSolution, node: Node, gamma: float
) -> float:
    """Certainty equivalent at ``node`` under the requesting risk aversion.

    Terminal nodes return the income.  Elsewhere this is the one-step
    recursion over the already-solved strategy, price and dividend terms,
    memoized on (node, gamma).
    """
    key = (node, gamma)
    memo = solution.cert_equiv
    if key in memo:
        return memo[key]
    tree = solution.tree
    if tree.is_terminal(node):
        value = tree.income_at(node)
    else:
        terms = [
            (
                w,
                gamma
                * (
                    solution.edge_wealth_increment(node, child)
                    + certainty_equivalent(solution, child, gamma)
                ),
            )
            for child, w in tree.children(node)
        ]
        value = shifted_log_mean_exp(terms) / gamma
    memo[key] = value
    return value


def _solve_layer_node(tree: Tree, node: Node, gamma: float, z: Dict[Node, float]):
    """Equilibrium (alpha, kernels, price) at one node.

    ``z`` maps each child to D_child + Y_child under the requesting gamma.
    Returns (alpha, kernels dict, price).
    """
    sh = tree.grid.sqrt_step
    r = tree.r(node)
    sigma = tree.sigma_c(node)
    rsh = r * sh
    up, down = tree.split_children(node)
    z_up, mean_up = _shifted_class_mean(up, z, gamma)
    z_dn, mean_dn = _shifted_class_mean(down, z, gamma)
    # log of E[e^{-gamma z} | A] / E[e^{-gamma z} | A^c], shift-corrected
    log_ratio = -gamma * (z_up - z_dn) + math.log(mean_up / mean_dn)
    alpha = (math.log((1.0 + rsh) / (1.0 - rsh)) + log_ratio) / (
        2.0 * gamma * sigma * sh
    )
    kernels: Dict[Node, float] = {}
    lam_up = one_step_lambda(r, sh, BranchEvent.UP)
    lam_dn = one_step_lambda(r, sh, BranchEvent.DOWN)
    for pairs, zmin, mean, lam in (
        (up, z_up, mean_up, lam_up),
        (down, z_dn, mean_dn, lam_dn),
    ):
        for child, _ in pairs:
            kernels[child] = lam * math.exp(-gamma * (z[child] - zmin)) / mean
    return alpha, kernels


def solve_equilibrium(tree: Tree, mode: SolutionMode) -> PricingSolution:
    """Full backward induction over the tree for the requested mode."""
    price: Dict[Node, float] = {}
    alpha: Dict[Node, float] = {}
    kernel: Dict[Tuple[Node, Node], float] = {}
    gamma_used: Dict[Node, float] = {}
    for t in tree.terminals():
        price[t] = tree.payoff_at(t)
    solution = PricingSolution(
        mode=mode,
        tree=tree,
        price=price,
        alpha=alpha,
        kernel=kernel,
        gamma_used=gamma_used,
    )
    h = tree.grid.step
    for level in reversed(tree.levels[:-1]):
        for node in level:
            gamma = (
                tree.gamma_now(node)
                if mode is SolutionMode.CONSISTENT
                else tree.gamma0(node)
            )
            z = {
                child: price[child] + certainty_equivalent(solution, child, gamma)
                for child, _ in tree.children(node)
            }
            a, kernels = _solve_layer_node(tree, node, gamma, z)
            alpha[node] = a
            for child, k in kernels.items():
                kernel[(node, child)] = k
            price[node] = (
                math.fsum(
                    w * kernels[child] * price[child]
                    for child, w in tree.children(node)
                )
                + tree.phi(node) * h
            )
            gamma_used[node] = gamma
    return solution


def price_single_period(tree: Tree, node: Node) -> float:
    """Closed-form equilibrium price one step before maturity.

    Time-consistent and time-inconsistent equilibria coincide here.  Uses the
    exact evaluation order of :func:`solve_equilibrium`'s base layer.
    """
    if node.time_index != tree.grid.periods - 1:
        raise ConfigError("price_single_period expects a node one step from maturity")
    gamma = tree.gamma_now(node)
    z = {
        child: tree.payoff_at(child) + tree.income_at(child)
        for child, _ in tree.children(node)
    }
    _, kernels = _solve_layer_node(tree, node, gamma, z)
    return (
        math.fsum(
            w * kernels[child] * tree.payoff_at(child)
            for child, w in tree.children(node)
        )
        + tree.phi(node) * tree.grid.step
    )


@dataclass(frozen=True)
class MeasureDensity:
    """dQ/dP restricted to each terminal path, conditional on the path's root."""

    path_density: Dict[Node, float]

    def expectation(self, tree: Tree) -> Dict[Node, float]:
        """P-expectation of the density per root; each must be 1."""
        sums: Dict[Node, list] = {r: [] for r in tree.roots}
        for terminal, dens in self.path_density.items():
            sums[terminal_root(tree, terminal)].append(
                tree.path_probability(terminal) * dens
            )
        return {r: math.fsum(vals) for r, vals in sums.items()}


def terminal_root(tree: Tree, node: Node) -> Node:
    while node.time_index > 0:
        node = tree.parent(node)
    return node


def measure_density(solution: PricingSolution) -> MeasureDensity:
    """Product of one-step kernels along each terminal path."""
    tree = solution.tree
    density: Dict[Node, float] = {}

    def walk(node: Node, acc: float) -> None:
        if tree.is_terminal(node):
            density[node] = acc
            return
        for child, _ in tree.children(node):
            walk(child, acc * solution.kernel[(node, child)])

    for root in tree.roots:
        walk(root, 1.0)
    return MeasureDensity(density)


# --------------------------------------------------------------------------
# indifference price baseline
# --------------------------------------------------------------------------

def _optimal_step_ce(tree: Tree, node: Node, gamma: float, z: Dict[Node, float]):
    """Certainty equivalent of one optimally-invested step (no derivative).

    Maximizes over the holding of the traded asset only; ``z`` carries each
    child's continuation certainty equivalent.
    """
    sh = tree.grid.sqrt_step
    r = tree.r(node)
    sigma = tree.sigma_c(node)
    rsh = r * sh
    up, down = tree.split_children(node)
    z_up, mean_up = _shifted_class_mean(up, z, gamma)
    z_dn, mean_dn = _shifted_class_mean(down, z, gamma)
    log_ratio = -gamma * (z_up - z_dn) + math.log(mean_up / mean_dn)
    a = (math.log((1.0 + rsh) / (1.0 - rsh)) + log_ratio) / (2.0 * gamma * sigma * sh)
    terms = [
        (w, gamma * (a * sigma * sh * (rsh + c.last_shock[0]) + z[c]))
        for c, w in tree.children(node)
    ]
    return shifted_log_mean_exp(terms) / gamma


def _hold_value(tree: Tree, gamma: float, with_claim: bool, quantity: float):
    """Certainty equivalent at each root of trading C optimally while holding
    ``quantity`` units of the claim (buy-and-hold; the claim is not traded)."""
    memo: Dict[Node, float] = {}

    def ce(node: Node) -> float:
        if node in memo:
            return memo[node]
        if tree.is_terminal(node):
            v = tree.income_at(node)
            if with_claim:
                v += quantity * tree.payoff_at(node)
        else:
            z = {child: ce(child) for child, _ in tree.children(node)}
            v = _optimal_step_ce(tree, node, gamma, z)
            if with_claim:
                v += quantity * tree.phi(node) * tree.grid.step
        memo[node] = v
        return v

    return {root: ce(root) for root in tree.roots}


def _claim_bounds(tree: Tree, quantity: float):
    """Bounds on the claim's total cash flow over any path."""
    h = tree.grid.step
    totals = []
    for terminal in tree.terminals():
        total = tree.payoff_at(terminal)
        node = terminal
        while node.time_index > 0:
            node = tree.parent(node)
            total += tree.phi(node) * h
        totals.append(quantity * total)
    return min(totals), max(totals)


def indifference_price(tree: Tree, quantity: float = 1.0) -> float:
    """Buyer's exponential-utility indifference price of ``quantity`` claims.

    Uses the date-0 risk aversion (frozen preferences) and excludes the claim
    from the traded set.  The price is found by bisection on the wealth level
    making the agent indifferent; it is wealth-independent by construction.
    """
    root = tree.unique_root()
    gamma = tree.gamma0(root)
    ce_without = _hold_value(tree, gamma, with_claim=False, quantity=0.0)[root]
    ce_with = _hold_value(tree, gamma, with_claim=True, quantity=quantity)[root]

    def objective(p: float) -> float:
        # utility gap in certainty-equivalent units: buy at p vs stay out
        return (ce_with - p) - ce_without

    lo, hi = _claim_bounds(tree, quantity)
    lo -= 1.0
    hi += 1.0
    f_lo, f_hi = objective(lo), objective(hi)
    if f_lo < 0 or f_hi > 0:
        raise ConfigError(
            f"indifference bracket failure: payoff bounds gave [{lo}, {hi}] "
            f"with objective values ({f_lo}, {f_hi})"
        )
    while hi - lo > 1e-10:
        mid = 0.5 * (lo + hi)
        if objective(mid) >= 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
