"""Lattice structure and conditional-expectation engine tests."""

import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from eqlattice.errors import ConfigError, LatticeError
from eqlattice.lattice import (
    BranchEvent,
    Node,
    TimeGrid,
    enumerate_children,
    expect,
    expect_given,
    root_node,
    shock_outcomes,
)
from eqlattice.market import RegimeChain

SINGLE = RegimeChain.single(0.7)
TWO_STATE = RegimeChain(
    ("bull", "bear"), ((0.7, 0.3), (0.4, 0.6)), (0.5, 0.6), (1.0, 0.0)
)


class TestTimeGrid:
    def test_horizon_is_derived(self):
        grid = TimeGrid(4, 0.3)
        assert grid.horizon == 4 * 0.3
        assert grid.time(2) == 2 * 0.3
        assert grid.sqrt_step == math.sqrt(0.3)

    def test_rejects_bad_parameters(self):
        with pytest.raises(ConfigError):
            TimeGrid(0, 0.3)
        with pytest.raises(ConfigError):
            TimeGrid(3, 0.0)
        with pytest.raises(ConfigError):
            TimeGrid(3, -1.0)


class TestNode:
    def test_history_lengths_enforced(self):
        with pytest.raises(LatticeError):
            Node(1, (), (0, 0))  # one shock vector required at t_1
        with pytest.raises(LatticeError):
            Node(1, ((1,),), (0,))  # two regime labels required at t_1

    def test_shock_components_must_be_unit(self):
        with pytest.raises(LatticeError):
            Node(1, ((0,),), (0, 0))

    def test_equality_is_full_history(self):
        a = Node(2, ((1,), (-1,)), (0, 0, 0))
        b = Node(2, ((-1,), (1,)), (0, 0, 0))
        # same (time, position) but different paths: distinct nodes
        assert a != b

    def test_branch_and_accessors(self):
        node = Node(1, ((1, -1),), (0, 1))
        assert node.branch is BranchEvent.UP
        assert node.last_shock == (1, -1)
        assert node.regime == 1
        assert node.initial_regime == 0
        with pytest.raises(LatticeError):
            root_node(0).last_shock


class TestEnumerateChildren:
    def test_d1_single_regime(self):
        dist = enumerate_children(root_node(0), SINGLE, d=1)
        assert len(dist.entries) == 2
        assert all(w == 0.5 for _, w in dist.entries)

    def test_d3_single_regime(self):
        dist = enumerate_children(root_node(0), SINGLE, d=3)
        assert len(dist.entries) == 8
        assert all(w == 0.125 for _, w in dist.entries)

    def test_d1_two_regimes(self):
        dist = enumerate_children(root_node(0), TWO_STATE, d=1)
        weights = sorted(w for _, w in dist.entries)
        assert weights == [0.15, 0.15, 0.35, 0.35]

    def test_zero_probability_transitions_pruned(self):
        chain = RegimeChain(
            ("a", "b"), ((1.0, 0.0), (0.5, 0.5)), (0.5, 0.5), (1.0, 0.0)
        )
        dist = enumerate_children(root_node(0), chain, d=1)
        assert len(dist.entries) == 2
        assert all(c.regime == 0 for c, _ in dist.entries)

    def test_terminal_node_rejected(self):
        grid = TimeGrid(1, 0.3)
        node = Node(1, ((1,),), (0, 0))
        with pytest.raises(LatticeError):
            enumerate_children(node, SINGLE, d=1, grid=grid)

    def test_root_requires_explicit_d(self):
        with pytest.raises(LatticeError):
            enumerate_children(root_node(0), SINGLE)

    def test_weights_sum_to_one(self):
        dist = enumerate_children(root_node(1), TWO_STATE, d=2)
        assert abs(math.fsum(w for _, w in dist.entries) - 1.0) <= 1e-14

    def test_path_count_single_regime(self):
        # depth-2 enumeration visits 2^(d*2) distinct leaves exactly once
        d = 2
        leaves = set()
        for child, _ in enumerate_children(root_node(0), SINGLE, d=d).entries:
            for leaf, _ in enumerate_children(child, SINGLE).entries:
                leaves.add(leaf)
        assert len(leaves) == 2 ** (d * 2)

    def test_shock_outcomes_order_is_deterministic(self):
        assert list(shock_outcomes(1)) == [(1,), (-1,)]
        assert list(shock_outcomes(2))[0] == (1, 1)


class TestExpect:
    def test_constant(self):
        assert expect(root_node(0), lambda n: 3.25, SINGLE, d=2) == 3.25

    def test_first_component_symmetric(self):
        assert expect(root_node(0), lambda n: n.last_shock[0], SINGLE, d=1) == 0.0

    def test_indicator_of_up_event(self):
        f = lambda n: 1.0 if n.branch is BranchEvent.UP else 0.0
        assert expect(root_node(0), f, TWO_STATE, d=3) == pytest.approx(0.5, abs=1e-15)

    def test_expect_given_constant(self):
        assert expect_given(
            root_node(0), BranchEvent.UP, lambda n: 2.5, SINGLE, d=2
        ) == pytest.approx(2.5, abs=1e-15)

    def test_expect_given_independent_component(self):
        f = lambda n: n.last_shock[1]
        val = expect_given(root_node(0), BranchEvent.UP, f, SINGLE, d=2)
        assert val == pytest.approx(0.0, abs=1e-15)

    def test_expect_given_measurable_payoff(self):
        f = lambda n: 1.0 if n.branch is BranchEvent.UP else -1.0
        assert expect_given(root_node(0), BranchEvent.UP, f, SINGLE, d=1) == 1.0


@st.composite
def node_functionals(draw):
    """Random functional of the child's shock vector and regime."""
    coeffs = draw(
        st.lists(
            st.floats(min_value=-5, max_value=5, allow_nan=False),
            min_size=3,
            max_size=3,
        )
    )

    def f(node):
        s = node.last_shock
        return coeffs[0] + coeffs[1] * s[0] + coeffs[2] * s[-1] * node.regime

    return f


@given(f=node_functionals())
@settings(max_examples=50, deadline=None)
def test_tower_property_over_first_shock(f):
    node = root_node(0)
    up = expect_given(node, BranchEvent.UP, f, TWO_STATE, d=2)
    down = expect_given(node, BranchEvent.DOWN, f, TWO_STATE, d=2)
    full = expect(node, f, TWO_STATE, d=2)
    assert abs(full - (0.5 * up + 0.5 * down)) <= 1e-13


@given(
    f=node_functionals(),
    g=node_functionals(),
    a=st.floats(min_value=-3, max_value=3, allow_nan=False),
    b=st.floats(min_value=-3, max_value=3, allow_nan=False),
)
@settings(max_examples=50, deadline=None)
def test_expect_is_linear(f, g, a, b):
    node = root_node(1)
    combined = expect(node, lambda n: a * f(n) + b * g(n), TWO_STATE, d=2)
    separate = a * expect(node, f, TWO_STATE, d=2) + b * expect(node, g, TWO_STATE, d=2)
    assert abs(combined - separate) <= 1e-12
