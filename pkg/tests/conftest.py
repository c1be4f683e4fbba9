"""Shared scenario fixtures for the test suite."""

import pytest

#: one line per acceptance criterion, echoed in the terminal summary so the
#: pass/fail verdicts are visible even when pytest captures stdout
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

from eqlattice.config import (
    CallPayoff,
    ChainConfig,
    CoefficientConfig,
    ConstCoeff,
    ConstMpr,
    ConstantPayoff,
    DigitalPayoff,
    GridConfig,
    ScenarioConfig,
)
from eqlattice.experiments import scenario
from eqlattice.tree import Tree


def simple_chain(gamma=0.7):
    return ChainConfig(
        states=("base",), transition=((1.0,),), gamma=(gamma,), initial_state="base"
    )


def simple_coefficients(rho=0.5, mpr=None):
    return CoefficientConfig(
        mu_c=ConstCoeff(0.1),
        sigma_c=ConstCoeff(0.2),
        mu_s=ConstCoeff(0.3),
        sigma_s=ConstCoeff(0.5),
        rho=rho,
        mpr=mpr,
    )


def make_scenario(
    periods=1,
    step=0.3,
    d=2,
    payoff=None,
    income=(),
    chain=None,
    coefficients=None,
    **kwargs,
):
    return ScenarioConfig(
        label="test",
        grid=GridConfig(periods, step),
        d=d,
        initial_c=10.0,
        initial_s=10.0,
        coefficients=coefficients or simple_coefficients(),
        chain=chain or simple_chain(),
        income=income,
        payoff=payoff or CallPayoff(10.0),
        **kwargs,
    )


@pytest.fixture
def call_tree():
    """Single-period call scenario at the study's base parameters."""
    return Tree.from_config(scenario("fig3_4_5_eq_vs_indiff"))


@pytest.fixture
def digital_halfkernel_config():
    """Digital payoff with r*sqrt(h) = 0.5 exactly (h=0.25, r=1)."""
    return make_scenario(
        step=0.25,
        d=1,
        payoff=DigitalPayoff(),
        coefficients=simple_coefficients(rho=0.0, mpr=ConstMpr(1.0)),
    )


@pytest.fixture
def constant_claim_config():
    return make_scenario(payoff=ConstantPayoff(5.0))
