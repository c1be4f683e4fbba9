"""Independent oracles and identity checkers.

The brute-force solver re-derives a layer's optimal holding and equilibrium
price from the raw first-order conditions of the one-step objective, by
direct child enumeration and bisection only; it never touches the closed
forms used by the solver, so agreement is evidence rather than tautology.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from . import config as cfgmod
from .config import ScenarioConfig
from .errors import CheckFailure, PreconditionError
from .lattice import Node
from .pricing import PricingSolution, SolutionMode, certainty_equivalent
from .tree import Tree

#: residual tolerances, pinned once here
TOL_ORACLE = 1e-8
TOL_MARTINGALE = 1e-10
TOL_KERNEL_NORM = 1e-12
TOL_MARGINAL_UTILITY = 1e-12
TOL_DOMINANCE = 1e-12
TOL_WEALTH_INVARIANCE = 1e-10


@dataclass
class ObjectiveG:
    """One-step objective g(alpha, beta) = E[exp(-gamma (dX + Y))] at a node.

    ``children`` holds (weight, carry, claim_leg, continuation) per child:
    carry is the per-unit-alpha wealth term sigma*sqrt(h)*(r*sqrt(h)+db);
    claim_leg is the per-unit-beta claim cash flow D_child - D_cand + phi*h;
    continuation is the child's certainty equivalent (income one step before
    maturity), which the agent carries regardless of the claim holding.
    ``wealth`` is threaded only to demonstrate that it cancels.
    """

    gamma: float
    children: List[Tuple[float, float, float, float]]
    wealth: float = 0.0

    def _exponents(self, alpha: float, beta: float):
        g = self.gamma
        return [
            (w, -g * (alpha * carry + beta * leg + y + self.wealth))
            for w, carry, leg, y in self.children
        ]

    def value(self, alpha: float, beta: float = 1.0) -> float:
        return math.fsum(w * math.exp(e) for w, e in self._exponents(alpha, beta))

    def _shifted(self, alpha: float, beta: float):
        ex = self._exponents(alpha, beta)
        m = max(e for _, e in ex)
        return ex, m

    def d_alpha_sign(self, alpha: float, beta: float = 1.0) -> float:
        """Sign-stable dg/dalpha (shifted; positive scale factor dropped)."""
        ex, m = self._shifted(alpha, beta)
        return math.fsum(
            w * (-self.gamma * carry) * math.exp(e - m)
            for (w, e), (_, carry, _, _) in zip(ex, self.children)
        )

    def d_beta_normalized(self, alpha: float, beta: float = 1.0) -> float:
        """dg/dbeta divided by gamma*g: minus the conditional mean of the
        claim leg under the exponentially-tilted weights.  Scale (and
        wealth) invariant."""
        ex, m = self._shifted(alpha, beta)
        num = math.fsum(
            w * (-leg) * math.exp(e - m)
            for (w, e), (_, _, leg, _) in zip(ex, self.children)
        )
        den = math.fsum(w * math.exp(e - m) for w, e in ex)
        return num / den

    def minimize_alpha(self, tol: float = 1e-13, max_iter: int = 400) -> float:
        """Argmin over alpha at beta=1 by bisection on the monotone derivative."""
        lo, hi = -1.0, 1.0
        for _ in range(200):
            if self.d_alpha_sign(lo) < 0:
                break
            lo *= 2.0
        else:
            raise CheckFailure("alpha bracket failure (lower end)")
        for _ in range(200):
            if self.d_alpha_sign(hi) > 0:
                break
            hi *= 2.0
        else:
            raise CheckFailure("alpha bracket failure (upper end)")
        for _ in range(max_iter):
            mid = 0.5 * (lo + hi)
            if hi - lo <= tol * (1.0 + abs(mid)):
                return mid
            if self.d_alpha_sign(mid) < 0:
                lo = mid
            else:
                hi = mid
        return 0.5 * (lo + hi)


def _layer_objective(
    tree: Tree,
    node: Node,
    gamma: float,
    child_d: Dict[Node, float],
    child_y: Dict[Node, float],
    price_candidate: float,
    wealth: float,
) -> ObjectiveG:
    sh = tree.grid.sqrt_step
    h = tree.grid.step
    r = tree.r(node)
    sigma = tree.sigma_c(node)
    ph = tree.phi(node) * h
    children = []
    for child, w in tree.children(node):
        carry = sigma * sh * (r * sh + child.last_shock[0])
        leg = child_d[child] - price_candidate + ph
        children.append((w, carry, leg, child_y[child]))
    return ObjectiveG(gamma=gamma, children=children, wealth=wealth)


def brute_force_layer(
    tree: Tree,
    node: Node,
    gamma: float,
    child_d: Dict[Node, float],
    child_y: Dict[Node, float],
    wealth: float = 0.0,
    max_iter: int = 200,
) -> Tuple[float, float]:
    """Numerically solve the coupled first-order conditions at one node.

    Outer bisection over the candidate price on the arbitrage interval of the
    children's claim values (plus the dividend), inner minimization of the
    objective over the holding, accepting when the clearing derivative
    vanishes.  Returns (alpha, price).  No closed forms are used anywhere.
    """
    ph = tree.phi(node) * tree.grid.step
    values = [child_d[c] for c, _ in tree.children(node)]
    lo = min(values) + ph
    hi = max(values) + ph

    def clearing_residual(price: float) -> Tuple[float, float]:
        g = _layer_objective(tree, node, gamma, child_d, child_y, price, wealth)
        a = g.minimize_alpha()
        return a, g.d_beta_normalized(a)

    a_lo, f_lo = clearing_residual(lo)
    if hi == lo:
        return a_lo, lo
    _, f_hi = clearing_residual(hi)
    # d_beta_normalized is minus the tilted mean of (value - price): it is
    # <= 0 at the lower end of the arbitrage interval and >= 0 at the top.
    if f_lo > 0 or f_hi < 0:
        raise CheckFailure(
            f"price bracket sign failure: residuals ({f_lo:.3g}, {f_hi:.3g}) "
            f"on [{lo:.6g}, {hi:.6g}]"
        )
    alpha, residual, price = a_lo, f_lo, lo
    for _ in range(max_iter):
        price = 0.5 * (lo + hi)
        alpha, residual = clearing_residual(price)
        if abs(residual) <= 1e-14 * (1.0 + abs(price)):
            break
        if residual < 0:
            lo = price
        else:
            hi = price
        if hi - lo <= 1e-15 * (1.0 + abs(price)):
            price = 0.5 * (lo + hi)
            alpha, residual = clearing_residual(price)
            break
    if abs(residual) > 1e-10:
        raise CheckFailure(
            f"clearing condition did not converge: residual {residual:.3g} "
            f"after {max_iter} iterations at {node.coords()}"
        )
    return alpha, price


def brute_force_single_period(
    tree: Tree, node: Node, wealth: float = 0.0
) -> Tuple[float, float]:
    """Oracle (alpha, price) one step before maturity, from raw terminal data."""
    if node.time_index != tree.grid.periods - 1:
        raise PreconditionError("oracle node must be one step from maturity")
    child_d = {c: tree.payoff_at(c) for c, _ in tree.children(node)}
    child_y = {c: tree.income_at(c) for c, _ in tree.children(node)}
    return brute_force_layer(
        tree, node, tree.gamma_now(node), child_d, child_y, wealth
    )


def oracle_gap(solution: PricingSolution, wealth: float = 0.0) -> float:
    """Max |closed form - oracle| over (alpha, price) at every non-terminal
    node, re-solving each layer from the solver's own continuation values."""
    tree = solution.tree
    gap = 0.0
    for node in tree.nonterminal_nodes():
        gamma = solution.gamma_used[node]
        child_d = {c: solution.price[c] for c, _ in tree.children(node)}
        child_y = {
            c: certainty_equivalent(solution, c, gamma)
            for c, _ in tree.children(node)
        }
        a, p = brute_force_layer(tree, node, gamma, child_d, child_y, wealth)
        gap = max(gap, abs(a - solution.alpha[node]), abs(p - solution.price[node]))
    return gap


def alpha_grid_unimodal(
    tree: Tree, node: Node, gamma: float, child_d: Dict[Node, float],
    child_y: Dict[Node, float], price: float,
    half_width: float = 10.0, points: int = 101,
) -> bool:
    """Grid check of the one-step objective's convex shape in alpha."""
    g = _layer_objective(tree, node, gamma, child_d, child_y, price, 0.0)
    center = g.minimize_alpha()
    xs = [
        center - half_width + 2.0 * half_width * i / (points - 1)
        for i in range(points)
    ]
    vals = [g.value(x) for x in xs]
    diffs = [b - a for a, b in zip(vals, vals[1:])]
    signs = [d for d in diffs if d != 0.0]
    changes = sum(
        1 for a, b in zip(signs, signs[1:]) if (a < 0) != (b < 0)
    )
    return changes <= 1


# --------------------------------------------------------------------------
# identity checks
# --------------------------------------------------------------------------

def check_kernel_normalization(solution: PricingSolution) -> float:
    """Max |E[kernel | node] - 1| over nodes; infinite if any kernel <= 0."""
    tree = solution.tree
    worst = 0.0
    for node in tree.nonterminal_nodes():
        mass = math.fsum(
            w * solution.kernel[(node, c)] for c, w in tree.children(node)
        )
        worst = max(worst, abs(mass - 1.0))
        if any(solution.kernel[(node, c)] <= 0 for c, _ in tree.children(node)):
            return math.inf
    return worst


def check_martingale(solution: PricingSolution) -> float:
    """Max residual of the driving-noise, C- and D-martingale conditions
    under the equilibrium measure.  Requires a zero dividend."""
    tree = solution.tree
    if not tree.dividend_spec.is_zero:
        raise PreconditionError(
            "martingale check requires a zero dividend stream"
        )
    sh = tree.grid.sqrt_step
    worst = 0.0
    for node in tree.nonterminal_nodes():
        r = tree.r(node)
        qw = [(c, w * solution.kernel[(node, c)]) for c, w in tree.children(node)]
        noise = r * sh + math.fsum(w * c.last_shock[0] for c, w in qw)
        c_next = math.fsum(w * tree.state(c).C for c, w in qw)
        d_next = math.fsum(w * solution.price[c] for c, w in qw)
        worst = max(
            worst,
            abs(noise),
            abs(c_next - tree.state(node).C) / max(1.0, tree.state(node).C),
            abs(d_next - solution.price[node]),
        )
    return worst


def check_marginal_utility(solution: PricingSolution, wealth: float = 0.0) -> float:
    """Max |kernel - marginal-utility ratio| over all edges (frozen-preference
    mode only).  The ratio is recomputed by full path enumeration of the
    optimal wealth, with the initial wealth threaded through."""
    if solution.mode is not SolutionMode.INCONSISTENT:
        raise PreconditionError(
            "marginal-utility identity holds for the frozen-preference mode"
        )
    tree = solution.tree

    def conditional_marginal(node: Node, wealth_at_node: float, gamma: float):
        """E[gamma * exp(-gamma W_T) | node] by terminal path enumeration."""
        total = []

        def walk(n: Node, prob: float, acc_wealth: float) -> None:
            if tree.is_terminal(n):
                total.append(
                    prob * gamma * math.exp(-gamma * (acc_wealth + tree.income_at(n)))
                )
                return
            for child, w in tree.children(n):
                walk(
                    child,
                    prob * w,
                    acc_wealth + solution.edge_wealth_increment(n, child),
                )

        walk(node, 1.0, wealth_at_node)
        return math.fsum(total)

    def wealth_at(node: Node) -> float:
        w = wealth
        n = node
        while n.time_index > 0:
            p = tree.parent(n)
            w += solution.edge_wealth_increment(p, n)
            n = p
        return w

    worst = 0.0
    for node in tree.nonterminal_nodes():
        gamma = tree.gamma0(node)
        w_node = wealth_at(node)
        m_parent = conditional_marginal(node, w_node, gamma)
        for child, _ in tree.children(node):
            m_child = conditional_marginal(
                child, w_node + solution.edge_wealth_increment(node, child), gamma
            )
            ratio = m_child / m_parent
            worst = max(worst, abs(solution.kernel[(node, child)] - ratio))
    return worst


def check_wealth_invariance(
    tree: Tree, wealths: Tuple[float, ...] = (-10.0, 0.0, 10.0)
) -> float:
    """Max spread of the oracle's (alpha, price) across initial wealths,
    over every node one step from maturity."""
    worst = 0.0
    for node in tree.levels[-2]:
        results = [brute_force_single_period(tree, node, x) for x in wealths]
        alphas = [a for a, _ in results]
        prices = [p for _, p in results]
        worst = max(worst, max(alphas) - min(alphas), max(prices) - min(prices))
    return worst


# --------------------------------------------------------------------------
# dominance of the subgame-perfect strategy (restricted two-period model)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DominanceResult:
    violations: int
    max_violation: float        # worst positive utility shortfall
    strategy_gap_t0: float      # |alpha*_{t0} - alpha_hat_{t0}|, expected 0
    #: |alpha*_{t1} - alpha_hat_{t1}| over nodes whose regime did not move
    strategy_gap_t1_same_regime: float
    #: smallest utility margin (re-optimized minus frozen) over nodes whose
    #: regime did move; positive means strict dominance there
    min_margin_changed_regime: Optional[float]

    @property
    def passed(self) -> bool:
        return self.violations == 0 and self.strategy_gap_t0 == 0.0


def check_dominance(cfg: ScenarioConfig, wealth: float = 0.0) -> DominanceResult:
    """Conditional expected utility of the subgame-perfect strategy dominates
    the frozen-preference one at every intermediate node.

    Hypotheses (enforced): two periods, zero income, zero dividend, constant
    drift and volatility, and the derivative excluded from the traded set.
    """
    if cfg.grid.periods != 2:
        raise PreconditionError("dominance check requires exactly two periods")
    if cfg.income:
        raise PreconditionError("dominance check requires zero terminal income")
    if not isinstance(cfg.dividend, cfgmod.ZeroDividend):
        raise PreconditionError("dominance check requires a zero dividend")
    if not (
        isinstance(cfg.coefficients.mu_c, cfgmod.ConstCoeff)
        and isinstance(cfg.coefficients.sigma_c, cfgmod.ConstCoeff)
        and not isinstance(cfg.coefficients.mpr, cfgmod.ArctanMpr)
    ):
        raise PreconditionError(
            "dominance check requires constant drift and volatility"
        )
    tree = Tree.from_config(cfg)
    sh = tree.grid.sqrt_step
    violations = 0
    max_violation = 0.0
    gap_t0 = 0.0
    gap_t1_same = 0.0
    margins_changed: List[float] = []

    def merton(gamma: float, node: Node) -> float:
        rsh = tree.r(node) * sh
        return math.log((1.0 + rsh) / (1.0 - rsh)) / (
            2.0 * gamma * tree.sigma_c(node) * sh
        )

    def carry(parent: Node, child: Node) -> float:
        return tree.sigma_c(parent) * sh * (
            tree.r(parent) * sh + child.last_shock[0]
        )

    for root in tree.roots:
        g0 = tree.gamma0(root)
        # frozen-preference strategy: date-0 Merton holding at both dates
        a_hat_t0 = merton(g0, root)
        # continuation certainty equivalent of the re-optimizing agent, valued
        # under the date-0 risk aversion (the shock-independent regime effect)
        y_star: Dict[Node, float] = {}
        for mid, _ in tree.children(root):
            a_star = merton(tree.gamma_now(mid), mid)
            y_star[mid] = -math.log(
                math.fsum(
                    w * math.exp(-g0 * a_star * carry(mid, c))
                    for c, w in tree.children(mid)
                )
            ) / g0
        up, down = tree.split_children(root)
        e_up = math.fsum(w * math.exp(-g0 * y_star[c]) for c, w in up) / math.fsum(
            w for _, w in up
        )
        e_dn = math.fsum(
            w * math.exp(-g0 * y_star[c]) for c, w in down
        ) / math.fsum(w for _, w in down)
        a_star_t0 = a_hat_t0 + math.log(e_up / e_dn) / (
            2.0 * g0 * tree.sigma_c(root) * sh
        )
        gap_t0 = max(gap_t0, abs(a_star_t0 - a_hat_t0))

        for mid, _ in tree.children(root):
            g1 = tree.gamma_now(mid)
            w_mid_star = wealth + a_star_t0 * carry(root, mid)
            w_mid_hat = wealth + a_hat_t0 * carry(root, mid)
            a_star_t1 = merton(g1, mid)
            a_hat_t1 = merton(g0, mid)
            u_star = math.fsum(
                w * -math.exp(-g1 * (w_mid_star + a_star_t1 * carry(mid, c)))
                for c, w in tree.children(mid)
            )
            u_hat = math.fsum(
                w * -math.exp(-g1 * (w_mid_hat + a_hat_t1 * carry(mid, c)))
                for c, w in tree.children(mid)
            )
            shortfall = u_hat - u_star  # dominance: u_star >= u_hat
            if shortfall > TOL_DOMINANCE:
                violations += 1
                max_violation = max(max_violation, shortfall)
            if mid.regime == mid.initial_regime:
                gap_t1_same = max(gap_t1_same, abs(a_star_t1 - a_hat_t1))
            else:
                margins_changed.append(-shortfall)
    return DominanceResult(
        violations,
        max_violation,
        gap_t0,
        gap_t1_same,
        min(margins_changed) if margins_changed else None,
    )


# --------------------------------------------------------------------------
# aggregated report
# --------------------------------------------------------------------------

@dataclass
class VerificationReport:
    """Aggregated residuals of the full check suite for one scenario."""

    label: str
    kernel_norm_residual_max: float
    oracle_gap_max: float
    wealth_invariance_residual_max: float
    marginal_utility_residual_max: float
    martingale_residual_max: Optional[float] = None  # None: dividend != 0
    dominance_violations: Optional[int] = None       # None: hypotheses not met

    @property
    def passed(self) -> bool:
        checks = [
            self.kernel_norm_residual_max <= TOL_KERNEL_NORM,
            self.oracle_gap_max <= TOL_ORACLE,
            self.wealth_invariance_residual_max <= TOL_WEALTH_INVARIANCE,
            self.marginal_utility_residual_max <= TOL_MARGINAL_UTILITY,
        ]
        if self.martingale_residual_max is not None:
            checks.append(self.martingale_residual_max <= TOL_MARTINGALE)
        if self.dominance_violations is not None:
            checks.append(self.dominance_violations == 0)
        return all(checks)

    def lines(self) -> str:
        def fmt(value, tol) -> str:
            if value is None:
                return "skipped (hypothesis not met)"
            ok = "ok" if value <= tol else "FAIL"
            return f"{value:.3e} (tol {tol:.0e}) {ok}"

        out = [
            f"scenario: {self.label}",
            f"kernel_norm_residual_max: {fmt(self.kernel_norm_residual_max, TOL_KERNEL_NORM)}",
            f"oracle_gap_max: {fmt(self.oracle_gap_max, TOL_ORACLE)}",
            f"martingale_residual_max: {fmt(self.martingale_residual_max, TOL_MARTINGALE)}",
            f"marginal_utility_residual_max: {fmt(self.marginal_utility_residual_max, TOL_MARGINAL_UTILITY)}",
            f"wealth_invariance_residual_max: {fmt(self.wealth_invariance_residual_max, TOL_WEALTH_INVARIANCE)}",
        ]
        if self.dominance_violations is None:
            out.append("dominance_violations: skipped (hypothesis not met)")
        else:
            ok = "ok" if self.dominance_violations == 0 else "FAIL"
            out.append(f"dominance_violations: {self.dominance_violations} {ok}")
        out.append(f"passed: {self.passed}")
        return "\n".join(out)

    CSV_HEADER = (
        "label",
        "kernel_norm_residual_max",
        "oracle_gap_max",
        "martingale_residual_max",
        "marginal_utility_residual_max",
        "wealth_invariance_residual_max",
        "dominance_violations",
        "passed",
    )

    def csv_row(self):
        return (
            self.label,
            self.kernel_norm_residual_max,
            self.oracle_gap_max,
            "" if self.martingale_residual_max is None else self.martingale_residual_max,
            self.marginal_utility_residual_max,
            self.wealth_invariance_residual_max,
            "" if self.dominance_violations is None else self.dominance_violations,
            int(self.passed),
        )


def verify_scenario(cfg: ScenarioConfig, label: Optional[str] = None) -> VerificationReport:
    """Run the full check suite on a scenario (both solution modes)."""
    from .pricing import solve_equilibrium  # local import avoids cycles

    tree = Tree.from_config(cfg)
    sol_c = solve_equilibrium(tree, SolutionMode.CONSISTENT)
    sol_i = solve_equilibrium(tree, SolutionMode.INCONSISTENT)
    kernel = max(
        check_kernel_normalization(sol_c), check_kernel_normalization(sol_i)
    )
    oracle = max(oracle_gap(sol_c), oracle_gap(sol_i))
    if tree.dividend_spec.is_zero:
        martingale = max(check_martingale(sol_c), check_martingale(sol_i))
    else:
        martingale = None
    marginal = check_marginal_utility(sol_i)
    wealth_inv = check_wealth_invariance(tree)
    dominance: Optional[int] = None
    try:
        dominance = check_dominance(cfg).violations
    except PreconditionError:
        pass
    return VerificationReport(
        label=label or cfg.label or "scenario",
        kernel_norm_residual_max=kernel,
        oracle_gap_max=oracle,
        wealth_invariance_residual_max=wealth_inv,
        marginal_utility_residual_max=marginal,
        martingale_residual_max=martingale,
        dominance_violations=dominance,
    )
