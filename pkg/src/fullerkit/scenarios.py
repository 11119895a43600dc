"""Scenario documents, built-in fixtures and result emission.

A scenario file is a JSON document with the canonical polynomial
serialization (rational coefficients as "p/q" strings so no float
contamination can occur):

    {
      "name": "...", "dim": n,
      "f0": [[{"exponents": [e1..en], "coeff": "p/q"}, ...], ... n comps],
      "f1": [[...], ...],
      "quadratic_cost": false,
      "initial": {"t": 0.0, "q": [...], "lambda": [...]},   # optional
      "t_final": 1.0,                                        # optional
      "options": {"rtol": 1e-10, ...},                       # optional
      "fixture": "double_integrator"                         # optional tag
    }

Emission is canonical (sorted keys, fixed term order), so identical inputs
produce byte-identical documents and the scenario hash binds results to
their exact inputs.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import random
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from .bracket_algebra import Polynomial, PolyVectorField
from .extremal_sim import (
    ExtremalState,
    ExtremalSystem,
    Scenario,
    SimOptions,
    SimResult,
)
from . import fuller_fixture

__all__ = [
    "ScenarioBundle",
    "parse_scenario",
    "emit_scenario",
    "scenario_hash",
    "builtin",
    "BUILTIN_NAMES",
    "run_bundle",
    "trajectory_csv",
    "RunRecord",
]

BUILTIN_NAMES = ("double_integrator", "fuller", "singular3d", "random_poly")

_OPTION_FIELDS = {f.name for f in dataclasses.fields(SimOptions)}


@dataclass(frozen=True)
class ScenarioBundle:
    """A scenario plus everything needed to reproduce a run."""

    scenario: Scenario
    initial: ExtremalState | None = None
    t_final: float | None = None
    options: dict | None = None
    fixture: str | None = None

    def sim_options(self) -> SimOptions:
        return SimOptions(**(self.options or {}))


def _parse_number(value, where: str):
    """Accept ints, floats and exact 'p/q' strings."""
    if isinstance(value, bool):
        raise ValueError(f"{where}: expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return value
    if isinstance(value, str):
        try:
            return Fraction(value)
        except (ValueError, ZeroDivisionError) as exc:
            raise ValueError(f"{where}: bad rational {value!r} ({exc})") from None
    raise ValueError(f"{where}: expected a number, got {type(value).__name__}")


def _parse_field(doc, key: str, dim: int) -> PolyVectorField:
    comps = doc.get(key)
    if not isinstance(comps, list) or len(comps) != dim:
        raise ValueError(f"{key}: expected a list of {dim} components")
    out = []
    for i, comp in enumerate(comps):
        try:
            out.append(Polynomial.from_payload(dim, comp))
        except (ValueError, KeyError, TypeError) as exc:
            raise ValueError(f"{key}[{i}]: {exc}") from None
    return PolyVectorField(out)


def parse_scenario(text_or_path: str | Path) -> ScenarioBundle:
    """Parse a scenario document from JSON text or a file path."""
    text = str(text_or_path)
    path = Path(text)
    if not text.lstrip().startswith("{") and path.is_file():
        text = path.read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValueError(f"scenario document is not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ValueError("scenario document must be a JSON object")
    for key in ("name", "dim", "f0", "f1"):
        if key not in doc:
            raise ValueError(f"scenario document is missing {key!r}")
    dim = doc["dim"]
    if not isinstance(dim, int) or dim < 1:
        raise ValueError("dim must be a positive integer")
    scenario = Scenario(
        name=str(doc["name"]),
        f0=_parse_field(doc, "f0", dim),
        f1=_parse_field(doc, "f1", dim),
        quadratic_cost=bool(doc.get("quadratic_cost", False)),
    )
    initial = None
    if "initial" in doc:
        init = doc["initial"]
        q = tuple(_parse_number(x, "initial.q") for x in init["q"])
        lam = tuple(_parse_number(x, "initial.lambda") for x in init["lambda"])
        if len(q) != dim or len(lam) != dim:
            raise ValueError("initial state dimension does not match dim")
        initial = ExtremalState(float(init.get("t", 0.0)), q, lam)
    options = None
    if "options" in doc:
        options = dict(doc["options"])
        unknown = set(options) - _OPTION_FIELDS
        if unknown:
            raise ValueError(f"unknown option fields: {sorted(unknown)}")
    t_final = float(doc["t_final"]) if "t_final" in doc else None
    fixture = doc.get("fixture")
    return ScenarioBundle(scenario, initial, t_final, options, fixture)


def _number_payload(x):
    if isinstance(x, Fraction):
        return str(x)
    return x


def scenario_payload(bundle: ScenarioBundle) -> dict:
    doc = {
        "name": bundle.scenario.name,
        "dim": bundle.scenario.dim,
        "f0": bundle.scenario.f0.to_payload(),
        "f1": bundle.scenario.f1.to_payload(),
        "quadratic_cost": bundle.scenario.quadratic_cost,
    }
    if bundle.initial is not None:
        doc["initial"] = {
            "t": bundle.initial.t,
            "q": [_number_payload(x) for x in bundle.initial.q],
            "lambda": [_number_payload(x) for x in bundle.initial.lam],
        }
    if bundle.t_final is not None:
        doc["t_final"] = bundle.t_final
    if bundle.options:
        doc["options"] = dict(sorted(bundle.options.items()))
    if bundle.fixture:
        doc["fixture"] = bundle.fixture
    return doc


def emit_scenario(bundle: ScenarioBundle) -> str:
    """Canonical JSON serialization; emit(parse(emit(b))) == emit(b)."""
    return json.dumps(scenario_payload(bundle), sort_keys=True, indent=2)


def scenario_hash(bundle: ScenarioBundle) -> str:
    canon = json.dumps(scenario_payload(bundle), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode()).hexdigest()


# ---------------------------------------------------------------------------
# built-in fixtures


def _poly(dim: int, terms: dict) -> Polynomial:
    return Polynomial(dim, terms)


def _double_integrator() -> ScenarioBundle:
    f0 = PolyVectorField([_poly(2, {(0, 1): 1}), Polynomial.zero(2)])
    f1 = PolyVectorField([Polynomial.zero(2), Polynomial.constant(2, 1)])
    scenario = Scenario("double_integrator", f0, f1)
    init = ExtremalState(0.0, (0.0, 0.0), (-1.0, -0.5))
    return ScenarioBundle(scenario, init, 1.0, None, "double_integrator")


def _fuller() -> ScenarioBundle:
    f0 = PolyVectorField([_poly(2, {(0, 1): 1}), Polynomial.zero(2)])
    f1 = PolyVectorField([Polynomial.zero(2), Polynomial.constant(2, 1)])
    scenario = Scenario("fuller", f0, f1, quadratic_cost=True)
    t0, q0, lam0 = fuller_fixture.chattering_seed()
    init = ExtremalState(t0, q0, lam0)
    # accumulation sits at t = 0; any positive horizon is past it
    return ScenarioBundle(scenario, init, 1e-3, None, "fuller")


def _singular3d() -> ScenarioBundle:
    # f0 = (x2, x3, 0), f1 = (0, 1, x2); the seed lies on the singular locus
    # h1 = h01 = 0 with h101 = 3 > 0 and feedback control -1/3
    f0 = PolyVectorField(
        [_poly(3, {(0, 1, 0): 1}), _poly(3, {(0, 0, 1): 1}), Polynomial.zero(3)]
    )
    f1 = PolyVectorField(
        [Polynomial.zero(3), Polynomial.constant(3, 1), _poly(3, {(0, 1, 0): 1})]
    )
    scenario = Scenario("singular3d", f0, f1)
    init = ExtremalState(0.0, (0.0, 1.0, 0.0), (1.0, -1.0, 1.0))
    return ScenarioBundle(scenario, init, 0.5, None, "singular3d")


def _random_poly(seed: int) -> ScenarioBundle:
    rng = random.Random(seed)

    def random_polynomial(dim: int) -> Polynomial:
        terms = {}
        exponents = [
            (0, 0, 0), (1, 0, 0), (0, 1, 0), (0, 0, 1),
            (2, 0, 0), (0, 2, 0), (0, 0, 2), (1, 1, 0), (1, 0, 1), (0, 1, 1),
        ]
        for exps in rng.sample(exponents, k=3):
            num = rng.randint(-2, 2)
            if num == 0:
                num = 1
            terms[exps] = Fraction(num, rng.randint(1, 2))
        return Polynomial(dim, terms)

    while True:
        f0 = PolyVectorField([random_polynomial(3) for _ in range(3)])
        f1 = PolyVectorField([random_polynomial(3) for _ in range(3)])
        if not f1.eval_exact((0, 0, 0)) == (0, 0, 0):
            break
    lam = (
        Fraction(rng.randint(1, 3)),
        Fraction(rng.randint(-3, 3)),
        Fraction(rng.randint(-3, 3)),
    )
    init = ExtremalState(0.0, (0.0, 0.0, 0.0), lam)
    scenario = Scenario(f"random_poly_{seed}", f0, f1)
    return ScenarioBundle(scenario, init, 1.0, None, "random_poly")


def builtin(name: str, seed: int | None = None) -> ScenarioBundle:
    """Built-in fixture by name; ``seed`` only applies to random_poly."""
    if name == "double_integrator":
        return _double_integrator()
    if name == "fuller":
        return _fuller()
    if name == "singular3d":
        return _singular3d()
    if name == "random_poly":
        return _random_poly(0 if seed is None else seed)
    raise ValueError(f"unknown builtin scenario {name!r}; known: {BUILTIN_NAMES}")


# ---------------------------------------------------------------------------
# running and emission


def run_bundle(
    bundle: ScenarioBundle,
    t_final: float | None = None,
    options: SimOptions | None = None,
) -> SimResult:
    """Simulate a bundle, dispatching the chattering fixture to its propagator.

    The quadratic-cost fixture needs the dedicated closed-form propagator to
    follow its unstable self-similar cascade; everything else goes through
    the generic adaptive integrator.
    """
    horizon = t_final if t_final is not None else bundle.t_final
    if horizon is None:
        raise ValueError("no t_final given and the bundle does not define one")
    if bundle.fixture == "fuller" and bundle.scenario.quadratic_cost:
        init = bundle.initial
        config = fuller_fixture.ChatterConfig()
        if init is None:
            return fuller_fixture.simulate_chattering(horizon, config=config)
        return fuller_fixture.simulate_chattering(
            horizon,
            init=(*init.q, *init.lam),
            t0=init.t,
            config=config,
        )
    if bundle.initial is None:
        raise ValueError("bundle has no initial state")
    opts = options if options is not None else bundle.sim_options()
    return ExtremalSystem(bundle.scenario).simulate(bundle.initial, horizon, opts)


def result_payload(bundle: ScenarioBundle, result: SimResult) -> dict:
    return {
        "scenario": scenario_payload(bundle),
        "scenario_hash": scenario_hash(bundle),
        "t_final": bundle.t_final,
        "result": result.to_payload(),
    }


def trajectory_csv(result: SimResult, system: ExtremalSystem) -> str:
    """CSV text with columns t, q1..qn, lam1..lamn, u, h1, h01."""
    n = system.dim
    header = (
        ["t"]
        + [f"q{i+1}" for i in range(n)]
        + [f"lam{i+1}" for i in range(n)]
        + ["u", "h1", "h01"]
    )
    lines = [",".join(header)]
    for state, u in result.samples():
        y = np.array([float(x) for x in (*state.q, *state.lam)])
        h1 = system.h(y, "1")
        h01 = system.h(y, "01")
        row = [state.t, *state.q, *state.lam, u, h1, h01]
        lines.append(",".join(repr(float(x)) for x in row))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class RunRecord:
    """Reproducibility metadata for one CLI run; the only place timestamps live."""

    scenario_hash: str
    options: dict
    outputs: dict
    started: str
    finished: str

    def to_payload(self) -> dict:
        return {
            "scenario_hash": self.scenario_hash,
            "options": dict(self.options),
            "outputs": dict(self.outputs),
            "started": self.started,
            "finished": self.finished,
        }
