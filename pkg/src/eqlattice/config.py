"""Declarative scenario configuration and its on-disk TOML format.

A scenario is pure data: every coefficient, income, dividend and payoff is a
small formula template from a closed vocabulary (see README for the exact
semantics of each template).  Parsing is strict: unknown keys are hard errors.
"""

from __future__ import annotations

import math

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from dataclasses import dataclass, field, replace
from typing import Optional, Union

from .errors import AdmissibilityError, ConfigError

DEFAULT_PATH_CAP = 2 ** 24
DEFAULT_SEED = 42


# --------------------------------------------------------------------------
# formula templates
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class ConstCoeff:
    """Constant coefficient."""

    value: float


@dataclass(frozen=True)
class AffineSCoeff:
    """intercept + slope * S, evaluated at the current node."""

    intercept: float
    slope: float


CoeffTemplate = Union[ConstCoeff, AffineSCoeff]


@dataclass(frozen=True)
class ArctanMpr:
    """r = sqrt(arctan(S) + pi/2): higher levels of S raise the price of risk."""


@dataclass(frozen=True)
class ConstMpr:
    """Explicit constant market price of risk override."""

    value: float


MprTemplate = Union[ArctanMpr, ConstMpr]


@dataclass(frozen=True)
class ExpAffineIncome:
    """coef * exp(rate * (S_t - S_0) * h); t defaults to the terminal date."""

    coef: float
    rate: float
    s_time: Optional[int] = None


@dataclass(frozen=True)
class IndicatorIncome:
    """coef * exp(growth * h) * prod of shock and regime indicators.

    ``shocks`` lists (step, component, sign) with 1-based components;
    ``regimes`` lists (time_index, state_label).
    """

    coef: float
    growth: float
    shocks: tuple = ()
    regimes: tuple = ()


@dataclass(frozen=True)
class ConstIncome:
    value: float


IncomeTerm = Union[ExpAffineIncome, IndicatorIncome, ConstIncome]


@dataclass(frozen=True)
class ZeroDividend:
    pass


@dataclass(frozen=True)
class ConstDividend:
    value: float


@dataclass(frozen=True)
class AffineDividend:
    """intercept + slope_c * C + slope_s * S."""

    intercept: float
    slope_c: float
    slope_s: float


DividendTemplate = Union[ZeroDividend, ConstDividend, AffineDividend]


@dataclass(frozen=True)
class CallPayoff:
    """(S_T - strike)^+."""

    strike: float


@dataclass(frozen=True)
class DigitalPayoff:
    """1 if the final step's first shock component is +1, else 0."""


@dataclass(frozen=True)
class ConstantPayoff:
    value: float


PayoffTemplate = Union[CallPayoff, DigitalPayoff, ConstantPayoff]


# --------------------------------------------------------------------------
# scenario config
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class GridConfig:
    periods: int
    step: float


@dataclass(frozen=True)
class CoefficientConfig:
    mu_c: CoeffTemplate
    sigma_c: CoeffTemplate
    mu_s: CoeffTemplate
    sigma_s: CoeffTemplate
    rho: float
    mpr: Optional[MprTemplate] = None


@dataclass(frozen=True)
class ChainConfig:
    states: tuple
    transition: tuple  # tuple of tuples
    gamma: tuple
    initial_state: Optional[str] = None
    initial_distribution: Optional[tuple] = None


@dataclass(frozen=True)
class ScenarioConfig:
    label: str
    grid: GridConfig
    d: int
    initial_c: float
    initial_s: float
    coefficients: CoefficientConfig
    chain: ChainConfig
    income: tuple = ()  # tuple of IncomeTerm, summed
    dividend: DividendTemplate = ZeroDividend()
    payoff: PayoffTemplate = ConstantPayoff(0.0)
    path_cap: int = DEFAULT_PATH_CAP
    seed: int = DEFAULT_SEED

    def with_gamma(self, *gammas: float) -> "ScenarioConfig":
        if len(gammas) != len(self.chain.states):
            raise ConfigError("one gamma per regime state required")
        return replace(self, chain=replace(self.chain, gamma=tuple(gammas)))


def validate_config(cfg: ScenarioConfig) -> None:
    """Static validation that does not require building the tree."""
    if cfg.grid.periods < 1 or cfg.grid.step <= 0:
        raise ConfigError("grid requires periods >= 1 and step > 0")
    if cfg.d < 1:
        raise ConfigError("dimension d must be >= 1")
    if not abs(cfg.coefficients.rho) < 1:
        raise ConfigError(f"|rho| must be < 1, got {cfg.coefficients.rho}")
    if cfg.coefficients.rho != 0 and cfg.d < 2:
        raise ConfigError("rho != 0 requires d >= 2")
    if cfg.initial_c <= 0 or cfg.initial_s <= 0:
        raise ConfigError("initial prices must be positive")
    if cfg.path_cap < 1:
        raise ConfigError("path cap must be positive")
    chain = cfg.chain
    n = len(chain.states)
    if len(set(chain.states)) != n:
        raise ConfigError("regime state labels must be distinct")
    if len(chain.transition) != n or any(len(r) != n for r in chain.transition):
        raise ConfigError("transition matrix shape does not match state count")
    for i, row in enumerate(chain.transition):
        if any(p < 0 for p in row):
            raise ConfigError(f"transition row {i} has a negative entry")
        if abs(math.fsum(row) - 1.0) > 1e-14:
            raise ConfigError(f"transition row {i} is not stochastic")
    if len(chain.gamma) != n or any(g <= 0 for g in chain.gamma):
        raise ConfigError("gamma must be positive for every state")
    if (chain.initial_state is None) == (chain.initial_distribution is None):
        raise ConfigError(
            "exactly one of initial_state / initial_distribution is required"
        )
    if chain.initial_state is not None and chain.initial_state not in chain.states:
        raise ConfigError(f"unknown initial state {chain.initial_state!r}")
    if chain.initial_distribution is not None:
        dist = chain.initial_distribution
        if len(dist) != n or any(p < 0 for p in dist):
            raise ConfigError("initial distribution must be nonnegative per state")
        if abs(math.fsum(dist) - 1.0) > 1e-14:
            raise ConfigError("initial distribution must sum to 1")
    for term in cfg.income:
        if isinstance(term, IndicatorIncome):
            for step, comp, sign in term.shocks:
                if not 0 <= step < cfg.grid.periods:
                    raise ConfigError(f"income shock step {step} out of range")
                if not 1 <= comp <= cfg.d:
                    raise ConfigError(
                        f"income references shock component {comp}, but d={cfg.d}"
                    )
                if sign not in (1, -1):
                    raise ConfigError("income shock sign must be +1 or -1")
            for t, label in term.regimes:
                if not 0 <= t <= cfg.grid.periods:
                    raise ConfigError(f"income regime time {t} out of range")
                if label not in chain.states:
                    raise ConfigError(f"income references unknown regime {label!r}")
        elif isinstance(term, ExpAffineIncome):
            if term.s_time is not None and not 0 <= term.s_time <= cfg.grid.periods:
                raise ConfigError(f"income s_time {term.s_time} out of range")
    # smallness condition probed at the initial level; the tree build re-checks
    # it at every reachable node.
    mpr_t = cfg.coefficients.mpr
    if isinstance(mpr_t, ArctanMpr):
        r0 = math.sqrt(math.atan(cfg.initial_s) + math.pi / 2.0)
    elif isinstance(mpr_t, ConstMpr):
        r0 = mpr_t.value
    else:
        mu = _coeff_value_at(cfg.coefficients.mu_c, cfg.initial_s)
        sig = _coeff_value_at(cfg.coefficients.sigma_c, cfg.initial_s)
        if sig <= 0:
            raise ConfigError("sigma_c must be positive")
        r0 = mu / sig
    if r0 * math.sqrt(cfg.grid.step) >= 1.0:
        raise AdmissibilityError(
            f"step size too coarse: r*sqrt(h) = {r0 * math.sqrt(cfg.grid.step):.6g}"
            f" >= 1 at the initial level; shrink h"
        )


def _coeff_value_at(t: CoeffTemplate, s: float) -> float:
    if isinstance(t, ConstCoeff):
        return t.value
    return t.intercept + t.slope * s


# --------------------------------------------------------------------------
# parsing
# --------------------------------------------------------------------------

def _require_keys(section: str, data: dict, allowed: set, required: set) -> None:
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in [{section}]: {sorted(unknown)}")
    missing = required - set(data)
    if missing:
        raise ConfigError(f"missing key(s) in [{section}]: {sorted(missing)}")


def _as_float(section: str, key: str, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"[{section}] {key} must be a number, got {value!r}")
    return float(value)


def _as_int(section: str, key: str, value) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"[{section}] {key} must be an integer, got {value!r}")
    return value


def _parse_coeff(section: str, data) -> CoeffTemplate:
    if isinstance(data, (int, float)) and not isinstance(data, bool):
        return ConstCoeff(float(data))
    if not isinstance(data, dict):
        raise ConfigError(f"[{section}] must be a number or an inline table")
    kind = data.get("kind")
    if kind == "const":
        _require_keys(section, data, {"kind", "value"}, {"kind", "value"})
        return ConstCoeff(_as_float(section, "value", data["value"]))
    if kind == "affine_s":
        _require_keys(
            section, data, {"kind", "intercept", "slope"}, {"kind", "intercept", "slope"}
        )
        return AffineSCoeff(
            _as_float(section, "intercept", data["intercept"]),
            _as_float(section, "slope", data["slope"]),
        )
    raise ConfigError(f"[{section}] unknown coefficient template {kind!r}")


def _parse_mpr(section: str, data) -> MprTemplate:
    if not isinstance(data, dict):
        raise ConfigError(f"[{section}] must be an inline table")
    kind = data.get("kind")
    if kind == "arctan":
        _require_keys(section, data, {"kind"}, {"kind"})
        return ArctanMpr()
    if kind == "const":
        _require_keys(section, data, {"kind", "value"}, {"kind", "value"})
        return ConstMpr(_as_float(section, "value", data["value"]))
    raise ConfigError(f"[{section}] unknown mpr template {kind!r}")


def _parse_income_term(idx: int, data: dict) -> IncomeTerm:
    section = f"income[{idx}]"
    kind = data.get("kind")
    if kind == "const":
        _require_keys(section, data, {"kind", "value"}, {"kind", "value"})
        return ConstIncome(_as_float(section, "value", data["value"]))
    if kind == "exp_affine":
        _require_keys(
            section, data, {"kind", "coef", "rate", "s_time"}, {"kind", "coef", "rate"}
        )
        s_time = data.get("s_time")
        return ExpAffineIncome(
            _as_float(section, "coef", data["coef"]),
            _as_float(section, "rate", data["rate"]),
            None if s_time is None else _as_int(section, "s_time", s_time),
        )
    if kind == "indicator":
        _require_keys(
            section,
            data,
            {"kind", "coef", "growth", "shocks", "regimes"},
            {"kind", "coef", "growth"},
        )
        shocks = []
        for item in data.get("shocks", []):
            if not (isinstance(item, list) and len(item) == 3):
                raise ConfigError(f"[{section}] shocks entries must be [step, comp, sign]")
            shocks.append(tuple(_as_int(section, "shocks", v) for v in item))
        regimes = []
        for item in data.get("regimes", []):
            if not (
                isinstance(item, list)
                and len(item) == 2
                and isinstance(item[1], str)
            ):
                raise ConfigError(f"[{section}] regimes entries must be [time, label]")
            regimes.append((_as_int(section, "regimes", item[0]), item[1]))
        return IndicatorIncome(
            _as_float(section, "coef", data["coef"]),
            _as_float(section, "growth", data["growth"]),
            tuple(shocks),
            tuple(regimes),
        )
    raise ConfigError(f"[{section}] unknown income template {kind!r}")


def _parse_dividend(data: dict) -> DividendTemplate:
    kind = data.get("kind")
    if kind == "zero":
        _require_keys("dividend", data, {"kind"}, {"kind"})
        return ZeroDividend()
    if kind == "const":
        _require_keys("dividend", data, {"kind", "value"}, {"kind", "value"})
        return ConstDividend(_as_float("dividend", "value", data["value"]))
    if kind == "affine":
        _require_keys(
            "dividend",
            data,
            {"kind", "intercept", "slope_c", "slope_s"},
            {"kind", "intercept", "slope_c", "slope_s"},
        )
        return AffineDividend(
            _as_float("dividend", "intercept", data["intercept"]),
            _as_float("dividend", "slope_c", data["slope_c"]),
            _as_float("dividend", "slope_s", data["slope_s"]),
        )
    raise ConfigError(f"[dividend] unknown template {kind!r}")


def _parse_payoff(data: dict) -> PayoffTemplate:
    kind = data.get("kind")
    if kind == "call":
        _require_keys("payoff", data, {"kind", "strike"}, {"kind", "strike"})
        return CallPayoff(_as_float("payoff", "strike", data["strike"]))
    if kind == "digital":
        _require_keys("payoff", data, {"kind"}, {"kind"})
        return DigitalPayoff()
    if kind == "constant":
        _require_keys("payoff", data, {"kind", "value"}, {"kind", "value"})
        return ConstantPayoff(_as_float("payoff", "value", data["value"]))
    raise ConfigError(f"[payoff] unknown template {kind!r}")


def loads(text: str) -> ScenarioConfig:
    """Parse a scenario from TOML text; every invariant is validated."""
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config parse error: {exc}") from exc

    top_allowed = {
        "label", "d", "path_cap", "seed", "grid", "initial",
        "coefficients", "chain", "payoff", "dividend", "income",
    }
    _require_keys(
        "top level", raw, top_allowed,
        {"d", "grid", "initial", "coefficients", "chain", "payoff"},
    )

    grid_raw = raw["grid"]
    _require_keys("grid", grid_raw, {"periods", "step"}, {"periods", "step"})
    grid = GridConfig(
        _as_int("grid", "periods", grid_raw["periods"]),
        _as_float("grid", "step", grid_raw["step"]),
    )

    init_raw = raw["initial"]
    _require_keys("initial", init_raw, {"c", "s"}, {"c", "s"})

    co = raw["coefficients"]
    _require_keys(
        "coefficients", co,
        {"mu_c", "sigma_c", "mu_s", "sigma_s", "rho", "mpr"},
        {"mu_c", "sigma_c", "mu_s", "sigma_s", "rho"},
    )
    coefficients = CoefficientConfig(
        mu_c=_parse_coeff("coefficients.mu_c", co["mu_c"]),
        sigma_c=_parse_coeff("coefficients.sigma_c", co["sigma_c"]),
        mu_s=_parse_coeff("coefficients.mu_s", co["mu_s"]),
        sigma_s=_parse_coeff("coefficients.sigma_s", co["sigma_s"]),
        rho=_as_float("coefficients", "rho", co["rho"]),
        mpr=_parse_mpr("coefficients.mpr", co["mpr"]) if "mpr" in co else None,
    )

    ch = raw["chain"]
    _require_keys(
        "chain", ch,
        {"states", "transition", "gamma", "initial_state", "initial_distribution"},
        {"states", "transition", "gamma"},
    )
    states = ch["states"]
    if not (isinstance(states, list) and all(isinstance(s, str) for s in states)):
        raise ConfigError("[chain] states must be a list of strings")
    transition = ch["transition"]
    if not isinstance(transition, list) or not all(
        isinstance(r, list) for r in transition
    ):
        raise ConfigError("[chain] transition must be a list of rows")
    chain = ChainConfig(
        states=tuple(states),
        transition=tuple(
            tuple(_as_float("chain", "transition", p) for p in row)
            for row in transition
        ),
        gamma=tuple(_as_float("chain", "gamma", g) for g in ch["gamma"]),
        initial_state=ch.get("initial_state"),
        initial_distribution=(
            tuple(
                _as_float("chain", "initial_distribution", p)
                for p in ch["initial_distribution"]
            )
            if "initial_distribution" in ch
            else None
        ),
    )

    income_raw = raw.get("income", [])
    if not isinstance(income_raw, list):
        raise ConfigError("income must be an array of tables ([[income]])")
    income = tuple(
        _parse_income_term(i, term) for i, term in enumerate(income_raw)
    )

    cfg = ScenarioConfig(
        label=raw.get("label", ""),
        grid=grid,
        d=_as_int("top level", "d", raw["d"]),
        initial_c=_as_float("initial", "c", init_raw["c"]),
        initial_s=_as_float("initial", "s", init_raw["s"]),
        coefficients=coefficients,
        chain=chain,
        income=income,
        dividend=_parse_dividend(raw["dividend"]) if "dividend" in raw else ZeroDividend(),
        payoff=_parse_payoff(raw["payoff"]),
        path_cap=_as_int("top level", "path_cap", raw.get("path_cap", DEFAULT_PATH_CAP)),
        seed=_as_int("top level", "seed", raw.get("seed", DEFAULT_SEED)),
    )
    validate_config(cfg)
    return cfg


def load(path) -> ScenarioConfig:
    with open(path, "rb") as fh:
        text = fh.read().decode("utf-8")
    return loads(text)


# --------------------------------------------------------------------------
# serialization (canonical TOML subset; round-trips through ``loads``)
# --------------------------------------------------------------------------

def _fmt_value(v) -> str:
    if isinstance(v, bool):
        raise ConfigError("booleans are not part of the config vocabulary")
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return repr(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_fmt_value(x) for x in v) + "]"
    raise ConfigError(f"cannot serialize {v!r}")


def _coeff_toml(t: CoeffTemplate) -> str:
    if isinstance(t, ConstCoeff):
        return f'{{kind = "const", value = {_fmt_value(t.value)}}}'
    return (
        f'{{kind = "affine_s", intercept = {_fmt_value(t.intercept)}, '
        f"slope = {_fmt_value(t.slope)}}}"
    )


def dumps(cfg: ScenarioConfig) -> str:
    """Serialize a scenario to canonical TOML; parse(dumps(cfg)) == cfg."""
    lines = []
    if cfg.label:
        lines.append(f"label = {_fmt_value(cfg.label)}")
    lines.append(f"d = {cfg.d}")
    lines.append(f"path_cap = {cfg.path_cap}")
    lines.append(f"seed = {cfg.seed}")
    lines.append("")
    lines.append("[grid]")
    lines.append(f"periods = {cfg.grid.periods}")
    lines.append(f"step = {_fmt_value(cfg.grid.step)}")
    lines.append("")
    lines.append("[initial]")
    lines.append(f"c = {_fmt_value(cfg.initial_c)}")
    lines.append(f"s = {_fmt_value(cfg.initial_s)}")
    lines.append("")
    lines.append("[coefficients]")
    co = cfg.coefficients
    lines.append(f"rho = {_fmt_value(co.rho)}")
    lines.append(f"mu_c = {_coeff_toml(co.mu_c)}")
    lines.append(f"sigma_c = {_coeff_toml(co.sigma_c)}")
    lines.append(f"mu_s = {_coeff_toml(co.mu_s)}")
    lines.append(f"sigma_s = {_coeff_toml(co.sigma_s)}")
    if isinstance(co.mpr, ArctanMpr):
        lines.append('mpr = {kind = "arctan"}')
    elif isinstance(co.mpr, ConstMpr):
        lines.append(f'mpr = {{kind = "const", value = {_fmt_value(co.mpr.value)}}}')
    lines.append("")
    lines.append("[chain]")
    ch = cfg.chain
    lines.append(f"states = {_fmt_value(list(ch.states))}")
    lines.append(f"transition = {_fmt_value([list(r) for r in ch.transition])}")
    lines.append(f"gamma = {_fmt_value(list(ch.gamma))}")
    if ch.initial_state is not None:
        lines.append(f"initial_state = {_fmt_value(ch.initial_state)}")
    if ch.initial_distribution is not None:
        lines.append(
            f"initial_distribution = {_fmt_value(list(ch.initial_distribution))}"
        )
    lines.append("")
    lines.append("[payoff]")
    p = cfg.payoff
    if isinstance(p, CallPayoff):
        lines.append('kind = "call"')
        lines.append(f"strike = {_fmt_value(p.strike)}")
    elif isinstance(p, DigitalPayoff):
        lines.append('kind = "digital"')
    else:
        lines.append('kind = "constant"')
        lines.append(f"value = {_fmt_value(p.value)}")
    lines.append("")
    lines.append("[dividend]")
    dv = cfg.dividend
    if isinstance(dv, ZeroDividend):
        lines.append('kind = "zero"')
    elif isinstance(dv, ConstDividend):
        lines.append('kind = "const"')
        lines.append(f"value = {_fmt_value(dv.value)}")
    else:
        lines.append('kind = "affine"')
        lines.append(f"intercept = {_fmt_value(dv.intercept)}")
        lines.append(f"slope_c = {_fmt_value(dv.slope_c)}")
        lines.append(f"slope_s = {_fmt_value(dv.slope_s)}")
    for term in cfg.income:
        lines.append("")
        lines.append("[[income]]")
        if isinstance(term, ConstIncome):
            lines.append('kind = "const"')
            lines.append(f"value = {_fmt_value(term.value)}")
        elif isinstance(term, ExpAffineIncome):
            lines.append('kind = "exp_affine"')
            lines.append(f"coef = {_fmt_value(term.coef)}")
            lines.append(f"rate = {_fmt_value(term.rate)}")
            if term.s_time is not None:
                lines.append(f"s_time = {term.s_time}")
        else:
            lines.append('kind = "indicator"')
            lines.append(f"coef = {_fmt_value(term.coef)}")
            lines.append(f"growth = {_fmt_value(term.growth)}")
            if term.shocks:
                lines.append(
                    f"shocks = {_fmt_value([list(s) for s in term.shocks])}"
                )
            if term.regimes:
                lines.append(
                    "regimes = "
                    + _fmt_value([[t, label] for t, label in term.regimes])
                )
    lines.append("")
    return "\n".join(lines)


def dump(cfg: ScenarioConfig, path) -> None:
    text = dumps(cfg)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
