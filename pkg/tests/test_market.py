"""Forward dynamics, regime chain and market-price-of-risk tests."""

import math

import pytest

from eqlattice.errors import AdmissibilityError, ConfigError
from eqlattice.lattice import Node, TimeGrid, root_node
from eqlattice.market import (
    CoefficientSpec,
    ForwardState,
    RegimeChain,
    effective_mu_c,
    evolve_forward,
    mpr,
    risk_aversion,
)

GRID = TimeGrid(1, 0.3)


def const(v):
    return lambda n, c, s, j: v


def spec(mu_c=0.1, sigma_c=0.2, mu_s=0.3, sigma_s=0.5, rho=0.5, override=None):
    return CoefficientSpec(
        mu_c=const(mu_c),
        sigma_c=const(sigma_c),
        mu_s=const(mu_s),
        sigma_s=const(sigma_s),
        rho=rho,
        mpr_override=override,
    )


ARCTAN = lambda n, s: math.sqrt(math.atan(s) + math.pi / 2.0)


class TestRegimeChain:
    def test_valid_two_state(self):
        chain = RegimeChain(
            ("bull", "bear"), ((0.8, 0.2), (0.3, 0.7)), (0.5, 0.6), (1.0, 0.0)
        )
        assert chain.gamma_of(1) == 0.6
        assert chain.index_of("bear") == 1
        assert chain.initial_state_indices() == (0,)

    def test_row_must_be_stochastic(self):
        with pytest.raises(ConfigError):
            RegimeChain(("a", "b"), ((0.8, 0.1), (0.3, 0.7)), (0.5, 0.6), (1.0, 0.0))

    def test_negative_entry_rejected(self):
        with pytest.raises(ConfigError):
            RegimeChain(("a", "b"), ((1.2, -0.2), (0.3, 0.7)), (0.5, 0.6), (1.0, 0.0))

    def test_gamma_must_be_positive(self):
        with pytest.raises(ConfigError):
            RegimeChain(("a",), ((1.0,),), (0.0,), (1.0,))

    def test_initial_distribution_checked(self):
        with pytest.raises(ConfigError):
            RegimeChain(("a", "b"), ((1.0, 0.0), (0.0, 1.0)), (0.5, 0.6), (0.6, 0.6))

    def test_unknown_label(self):
        with pytest.raises(ConfigError):
            RegimeChain.single(0.7).index_of("bear")


class TestRiskAversion:
    def test_single_regime(self):
        node = Node(1, ((1,),), (0, 0))
        assert risk_aversion(node, RegimeChain.single(0.7)) == 0.7

    def test_current_state_rule(self):
        chain = RegimeChain(
            ("bull", "bear"), ((0.5, 0.5), (0.5, 0.5)), (0.5, 0.6), (1.0, 0.0)
        )
        node = Node(2, ((1,), (1,)), (0, 1, 0))  # bull -> bear -> bull
        assert risk_aversion(node, chain) == 0.5
        in_bear = Node(1, ((1,),), (0, 1))
        assert risk_aversion(in_bear, chain) == 0.6


class TestMpr:
    def test_ratio(self):
        assert mpr(0, ForwardState(10.0, 10.0), 0, spec(), GRID) == pytest.approx(0.5)

    def test_arctan_override_value(self):
        r = mpr(0, ForwardState(10.0, 10.0), 0, spec(override=ARCTAN), GRID)
        assert r == pytest.approx(1.74411, abs=5e-6)
        assert r * GRID.sqrt_step == pytest.approx(0.955289, abs=5e-6)

    def test_admissibility_boundary(self):
        # r*sqrt(h) = 1 exactly must be rejected
        grid = TimeGrid(1, 0.25)
        with pytest.raises(AdmissibilityError, match="too coarse"):
            mpr(0, ForwardState(10.0, 10.0), 0, spec(override=lambda n, s: 2.0), grid)

    def test_arctan_with_coarse_step(self):
        grid = TimeGrid(1, 0.35)
        with pytest.raises(AdmissibilityError):
            mpr(0, ForwardState(10.0, 10.0), 0, spec(override=ARCTAN), grid)

    def test_sigma_must_be_positive(self):
        with pytest.raises(ConfigError):
            mpr(0, ForwardState(10.0, 10.0), 0, spec(sigma_c=0.0), GRID)

    def test_effective_drift_restores_consistency(self):
        s = spec(override=ARCTAN)
        state = ForwardState(10.0, 10.0)
        r = mpr(0, state, 0, s, GRID)
        assert effective_mu_c(0, state, 0, s, GRID) == pytest.approx(r * 0.2, rel=1e-15)

    def test_without_override_drift_unchanged(self):
        assert effective_mu_c(0, ForwardState(10.0, 10.0), 0, spec(), GRID) == 0.1


class TestEvolveForward:
    def test_c_step_up(self):
        nxt = evolve_forward(ForwardState(10.0, 10.0), 0, (1, 1), 0, spec(), GRID)
        assert nxt.C == pytest.approx(10 * (1 + 0.1 * 0.3 + 0.2 * math.sqrt(0.3)))
        assert nxt.C == pytest.approx(11.3954, abs=5e-5)

    def test_s_step_mixed(self):
        nxt = evolve_forward(ForwardState(10.0, 10.0), 0, (1, -1), 0, spec(), GRID)
        eps = 0.5 - math.sqrt(0.75)
        assert nxt.S == pytest.approx(10 * (1 + 0.3 * 0.3 + 0.5 * math.sqrt(0.3) * eps))
        assert nxt.S == pytest.approx(9.8976, abs=5e-5)

    def test_degenerate_noise_keeps_price(self):
        s = spec(mu_c=0.0, sigma_c=1e-12)
        nxt = evolve_forward(ForwardState(10.0, 10.0), 0, (1, 1), 0, s, GRID)
        assert nxt.C == pytest.approx(10.0, rel=1e-10)

    def test_d1_has_no_idiosyncratic_component(self):
        s = spec(rho=0.0)
        nxt = evolve_forward(ForwardState(10.0, 10.0), 0, (1,), 0, s, GRID)
        # S moves by drift only: the idiosyncratic weight multiplies nothing
        assert nxt.S == pytest.approx(10 * (1 + 0.3 * 0.3))

    def test_positivity_guard(self):
        s = spec(mu_s=0.0, sigma_s=5.0, rho=0.0)
        with pytest.raises(ConfigError, match="positivity"):
            evolve_forward(ForwardState(10.0, 10.0), 0, (1, -1), 0, s, GRID)

    def test_gross_return_expectation(self):
        # E[C_next / C] = 1 + mu_c*h: the +/- noise terms cancel
        s = spec()
        ups = evolve_forward(ForwardState(10.0, 10.0), 0, (1, 1), 0, s, GRID)
        downs = evolve_forward(ForwardState(10.0, 10.0), 0, (-1, 1), 0, s, GRID)
        assert 0.5 * (ups.C + downs.C) / 10.0 == pytest.approx(1 + 0.1 * 0.3, rel=1e-15)


class TestCoefficientSpec:
    def test_rho_bound(self):
        with pytest.raises(ConfigError):
            spec(rho=1.0)
        with pytest.raises(ConfigError):
            spec(rho=-1.5)
