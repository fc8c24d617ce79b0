"""Scenario files: flat ``key = value`` configuration for the command line.

Format::

    # comment
    name = fig9
    method = implicit
    market.sigma = 0.35
    market.rho = 0.05, 0.1, 0.2      # a list sweeps the value
    grid.s_min = 20
    grid.h = 2
    ...

Keys are dotted ``section.field`` names, values are numbers, words or
comma-separated lists. Unknown keys are errors, so typos do not silently fall
back to defaults.
"""

from __future__ import annotations

from dataclasses import dataclass, field, fields, replace
from pathlib import Path

from .closed_form import ClosedFormParams
from .errors import DomainError, ScenarioError
from .fd import SolverConfig
from .model import SCHEMES, BullSpread, Call, ClosedFormSnapshot, GridSpec, MarketParams, Strangle

METHODS = SCHEMES
OUTPUTS = ("surface", "greeks", "slice-at-t0", "validation")
PAYOFF_TYPES = ("call", "strangle", "bull-spread", "closed-form")

# key -> (converter, default); documented by ``scenario_help``
TOP_KEYS = {
    "name": (str, "scenario"),
    "method": (str, None),
    "outputs": ("list:str", ["surface"]),
}
MARKET_KEYS = {"sigma": float, "rho": float, "rate": float}
GRID_KEYS = {"s_min": float, "s_max": float, "n_space": int, "n_time": int, "maturity": float,
             "h": float, "n_intervals": int, "tau": float}
PAYOFF_KEYS = {"type": str, "strike": float, "count": float, "put_strike": float, "call_strike": float,
               "put_count": float, "call_count": float, "long_strike": float, "short_strike": float,
               "t": float}
CLOSED_FORM_KEYS = {"m": float, "d1": float, "d2": float, "eps2": int}
SOLVER_KEYS = {f.name: f.type for f in fields(SolverConfig)}
OUTPUT_KEYS = {"vega_sign": int, "s_window": "list:float", "linear": str}
VALIDATION_KEYS = {"checks": "list:str"}
SECTIONS = {"market": MARKET_KEYS, "grid": GRID_KEYS, "payoff": PAYOFF_KEYS,
            "closed_form": CLOSED_FORM_KEYS, "solver": SOLVER_KEYS, "output": OUTPUT_KEYS,
            "validation": VALIDATION_KEYS}
#: keys that may hold a comma-separated list to sweep over
SWEEPABLE = {"market.sigma", "market.rho", "market.rate", "payoff.count", "closed_form.m",
             "solver.guess_constant"}


@dataclass
class Scenario:
    """A validated scenario.

    ``sweep`` maps a dotted key to the list of values it takes; every other
    field holds the first (or only) value.
    """

    name: str
    method: str
    market: MarketParams
    grid: GridSpec
    payoff: object
    solver: SolverConfig
    closed_form: ClosedFormParams | None = None
    outputs: list = field(default_factory=lambda: ["surface"])
    sweep: dict = field(default_factory=dict)
    vega_sign: int = 1
    s_window: tuple | None = None
    linear: str = "linear-fd"
    checks: list = field(default_factory=list)
    source: str | None = None

    def variants(self):
        """Yield ``(label, scenario)`` for each point of the sweep (one point when there is none)."""
        if not self.sweep:
            yield "", self
            return
        key, values = next(iter(self.sweep.items()))
        for value in values:
            yield f"{key.split('.')[-1]}={value!r}", _override(self, key, value)


def _override(s: Scenario, key: str, value) -> Scenario:
    section, name = key.split(".")
    if section == "market":
        return replace(s, market=replace(s.market, **{name: value}), sweep={})
    if section == "solver":
        return replace(s, solver=replace(s.solver, **{name: value}), sweep={})
    if section == "closed_form":
        cf = replace(s.closed_form, **{name: value})
        payoff = replace(s.payoff, params=cf) if isinstance(s.payoff, ClosedFormSnapshot) else s.payoff
        return replace(s, closed_form=cf, payoff=payoff, sweep={})
    if section == "payoff":
        return replace(s, payoff=replace(s.payoff, **{name: value}), sweep={})
    raise ScenarioError(f"cannot sweep {key}", field=key)


# -- raw parsing -------------------------------------------------------------------


def _convert(kind, text, key, line):
    try:
        if isinstance(kind, str) and kind.startswith("list:"):
            inner = {"str": str, "float": float}[kind[5:]]
            return [inner(part.strip()) for part in text.split(",") if part.strip()]
        if kind in (bool, "bool"):
            low = text.lower()
            if low not in ("true", "false"):
                raise ValueError(text)
            return low == "true"
        if kind in (int, "int"):
            as_float = float(text)
            if as_float != int(as_float):
                raise ValueError(text)
            return int(as_float)
        if kind in (float, "float"):
            return float(text)
        if kind in ("str | None",):
            return None if text.lower() in ("none", "") else text
        return str(text)
    except ValueError:
        raise ScenarioError(f"{key}: cannot read {text!r} as {getattr(kind, '__name__', kind)}",
                            line=line, field=key) from None


def _kind_for(key):
    if "." not in key:
        if key not in TOP_KEYS:
            return None
        return TOP_KEYS[key][0]
    section, name = key.split(".", 1)
    table = SECTIONS.get(section)
    if table is None or name not in table:
        return None
    return table[name]


def parse_text(text: str, source: str | None = None) -> dict:
    """Parse scenario text into ``{key: (value, line)}``; values keep their declared types."""
    raw = {}
    for number, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ScenarioError(f"expected 'key = value', got {body!r}", line=number)
        key, value = (part.strip() for part in body.split("=", 1))
        if not key:
            raise ScenarioError("missing key before '='", line=number)
        if key in raw:
            raise ScenarioError(f"duplicate key {key!r} (first set on line {raw[key][1]})",
                                line=number, field=key)
        kind = _kind_for(key)
        if kind is None:
            raise ScenarioError(f"unknown key {key!r}", line=number, field=key)
        if key in SWEEPABLE and "," in value:
            base = float if kind in (float, "float") else kind
            raw[key] = ([_convert(base, part.strip(), key, number) for part in value.split(",")], number)
        else:
            raw[key] = (_convert(kind, value, key, number), number)
    return raw


# -- validation --------------------------------------------------------------------


def _section(raw, name):
    prefix = name + "."
    return {k[len(prefix):]: v for k, (v, _) in raw.items() if k.startswith(prefix)}


def _first(value):
    return value[0] if isinstance(value, list) else value


def _build(key, fn, *args, **kwargs):
    """Call a constructor, renaming its errors to name the scenario field."""
    try:
        return fn(*args, **kwargs)
    except (DomainError, ValueError, TypeError) as exc:
        raise ScenarioError(f"{key}: {exc}", field=key) from exc


def _grid(spec):
    step_keys = {"h", "n_intervals", "tau"}
    node_keys = {"s_max", "n_space", "maturity"}
    given = set(spec)
    if given & step_keys and given & node_keys:
        raise ScenarioError("grid: give either s_max/n_space/maturity or h/n_intervals/tau, not both",
                            field="grid")
    if given & step_keys:
        need = ("s_min", "h", "n_intervals", "tau", "n_time")
        missing = [k for k in need if k not in spec]
        if missing:
            raise ScenarioError(f"grid: missing {', '.join('grid.' + k for k in missing)}", field="grid")
        return _build("grid", GridSpec.from_steps, *(spec[k] for k in need))
    need = ("s_min", "s_max", "n_space", "n_time", "maturity")
    missing = [k for k in need if k not in spec]
    if missing:
        raise ScenarioError(f"grid: missing {', '.join('grid.' + k for k in missing)}", field="grid")
    return _build("grid", GridSpec, *(spec[k] for k in need))


def _payoff(spec, closed_form, grid):
    kind = spec.get("type")
    if kind is None:
        if closed_form is None:
            raise ScenarioError("payoff.type is required", field="payoff.type")
        kind = "closed-form"
    if kind not in PAYOFF_TYPES:
        raise ScenarioError(f"payoff.type must be one of {', '.join(PAYOFF_TYPES)}", field="payoff.type")
    allowed = {"call": {"strike", "count"},
               "strangle": {"put_strike", "call_strike", "put_count", "call_count"},
               "bull-spread": {"long_strike", "short_strike"},
               "closed-form": {"t"}}[kind]
    extra = sorted(set(spec) - allowed - {"type"})
    if extra:
        raise ScenarioError(f"payoff.{extra[0]} does not apply to payoff.type = {kind}", field=f"payoff.{extra[0]}")
    args = {k: _first(v) for k, v in spec.items() if k != "type"}
    if kind == "call":
        if "strike" not in args:
            raise ScenarioError("payoff.strike is required for a call", field="payoff.strike")
        return _build("payoff", Call, **args)
    if kind == "strangle":
        return _build("payoff", Strangle, **args)
    if kind == "bull-spread":
        return _build("payoff", BullSpread, **args)
    if closed_form is None:
        raise ScenarioError("payoff.type = closed-form needs closed_form.m", field="closed_form.m")
    return ClosedFormSnapshot(closed_form, args.get("t", grid.maturity))


def build_scenario(raw: dict, source: str | None = None) -> Scenario:
    """Turn parsed key/values into a :class:`Scenario`, validating every component."""
    top = {k: v for k, (v, _) in raw.items() if "." not in k}
    method = top.get("method")
    if method is None:
        raise ScenarioError("method is required", field="method")
    if method not in METHODS:
        raise ScenarioError(f"method must be one of {', '.join(METHODS)}", field="method")
    outputs = top.get("outputs", TOP_KEYS["outputs"][1])
    bad = [o for o in outputs if o not in OUTPUTS]
    if bad:
        raise ScenarioError(f"unknown output {bad[0]!r}; choose from {', '.join(OUTPUTS)}", field="outputs")

    sweep = {k: v for k, (v, _) in raw.items() if isinstance(v, list) and k in SWEEPABLE}
    if len(sweep) > 1:
        raise ScenarioError("only one key may hold a list of values", field=sorted(sweep)[1])

    market_spec = {k: _first(v) for k, v in _section(raw, "market").items()}
    if "sigma" not in market_spec:
        raise ScenarioError("market.sigma is required", field="market.sigma")
    market = _build("market", MarketParams, **market_spec)
    grid = _grid(_section(raw, "grid"))

    cf_spec = {k: _first(v) for k, v in _section(raw, "closed_form").items()}
    closed_form = _build("closed_form", ClosedFormParams, **cf_spec) if cf_spec else None
    if method == "closed-form" and closed_form is None:
        raise ScenarioError("method = closed-form needs closed_form.m", field="closed_form.m")
    if closed_form is not None and "m" not in cf_spec:
        raise ScenarioError("closed_form.m is required", field="closed_form.m")

    payoff_spec = _section(raw, "payoff")
    if method == "closed-form" and not payoff_spec:
        payoff = ClosedFormSnapshot(closed_form, grid.maturity)
    else:
        payoff = _payoff(payoff_spec, closed_form, grid)

    solver_spec = {k: _first(v) for k, v in _section(raw, "solver").items()}
    if method == "explicit":
        solver_spec.setdefault("scheme", "explicit")
    solver = _build("solver", SolverConfig, **solver_spec)

    rhos = sweep.get("market.rho", [market.rho])
    if method in ("implicit", "explicit", "closed-form") and min(rhos) <= 0:
        raise ScenarioError(f"method = {method} needs market.rho > 0; rho = 0 is the linear model",
                            field="market.rho")
    if method in ("linear-analytic", "linear-fd") and isinstance(payoff, ClosedFormSnapshot):
        raise ScenarioError(f"method = {method} needs a call, strangle or bull-spread payoff", field="payoff.type")
    if "greeks" in outputs and closed_form is None:
        raise ScenarioError("greeks output needs closed_form parameters", field="outputs")

    out = _section(raw, "output")
    window = out.get("s_window")
    if window is not None and (len(window) != 2 or not window[0] < window[1]):
        raise ScenarioError("output.s_window needs two increasing values", field="output.s_window")
    if out.get("vega_sign", 1) not in (1, -1):
        raise ScenarioError("output.vega_sign must be 1 or -1", field="output.vega_sign")
    linear = out.get("linear", "linear-fd")
    if linear not in ("linear-fd", "linear-analytic"):
        raise ScenarioError("output.linear must be linear-fd or linear-analytic", field="output.linear")

    scenario = Scenario(
        name=top.get("name", "scenario"), method=method, market=market, grid=grid, payoff=payoff,
        solver=solver, closed_form=closed_form, outputs=list(outputs), sweep=sweep,
        vega_sign=out.get("vega_sign", 1), s_window=tuple(window) if window else None, linear=linear,
        checks=_section(raw, "validation").get("checks", []), source=source,
    )
    # build every sweep point now so bad values fail before anything runs
    for _, variant in scenario.variants():
        _build(next(iter(sweep)) if sweep else "scenario", _revalidate, variant)
    return scenario


def _revalidate(s: Scenario):
    MarketParams(s.market.sigma, s.market.rho, s.market.rate)
    if s.closed_form is not None:
        ClosedFormParams(s.closed_form.m, s.closed_form.d1, s.closed_form.d2, s.closed_form.delta, s.closed_form.eps2)


def parse_scenario(path) -> Scenario:
    """Read and validate a scenario file.

    Raises
    ------
    ScenarioError
        With the line number for syntax problems and the field name for
        invalid values.
    """
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"cannot read scenario {path}: {exc.strerror}") from exc
    return build_scenario(parse_text(text, str(path)), str(path))


def scenario_help() -> str:
    """Key reference with defaults, shown by ``--help``."""
    solver_defaults = SolverConfig()
    lines = [
        "scenario keys (flat 'key = value', '#' starts a comment):",
        "  name = <text>                      default: scenario",
        f"  method = {'|'.join(METHODS)}   (required)",
        f"  outputs = comma list of {', '.join(OUTPUTS)}   default: surface",
        "  market.sigma (required), market.rho = 0, market.rate = 0 (linear model only)",
        "  grid: s_min, s_max, n_space (all nodes), n_time (steps), maturity",
        "     or s_min, h, n_intervals, tau, n_time",
        f"  payoff.type = {'|'.join(PAYOFF_TYPES)}",
        "     call: strike, count = 1;  strangle: put_strike, call_strike, put_count = 1, call_count = 1",
        "     bull-spread: long_strike, short_strike;  closed-form: t = grid maturity",
        "  closed_form.m (required with method = closed-form), d1 = 0, d2 = 0, eps2 = 1",
    ]
    for f in fields(SolverConfig):
        lines.append(f"  solver.{f.name} = {getattr(solver_defaults, f.name)!r}")
    lines += [
        "  output.vega_sign = 1 (use -1 for the negative vega convention)",
        "  output.s_window = <lo>, <hi>   restrict written rows to lo <= S <= hi",
        "  output.linear = linear-fd|linear-analytic   reference used by 'compare'",
        "  validation.checks = comma list of check names (default: all)",
        f"  sweepable (comma list of values): {', '.join(sorted(SWEEPABLE))}",
    ]
    return "\n".join(lines)
