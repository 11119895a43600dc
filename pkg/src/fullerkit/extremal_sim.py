"""Forward integration of Pontryagin extremals with bang and singular arcs.

The state of an extremal is (t, q, lam) with q the trajectory point and lam
the adjoint covector.  On bang arcs the control is the sign of the switching
function h_1 = <lam, f_1(q)> and integration runs until a located zero
crossing of h_1; on singular arcs the control is the feedback
-h_001 / h_101, valid while h_101 stays away from zero.

Numerics:

* Each arc is integrated by an adaptive Runge-Kutta 4(5) stepper with dense
  output, in arc-local time, so switch times keep full relative precision
  even when inter-switch intervals shrink by many orders of magnitude
  (chattering).
* h-comparisons are made relative to the pairing gauge |lam| * |f_I(q)|,
  which is scale-free: by Cauchy-Schwarz the ratio lies in [0, 1].  This
  keeps the switching logic meaningful while the extremal contracts toward
  an accumulation point.
* A chattering run cannot reach its accumulation in finitely many steps, so
  the simulator terminates with reason "accumulation" once inter-switch
  intervals shrink consistently and fall below a floor, handing the switch
  set to the order-analysis tools.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import RK45

from .bracket_algebra import BracketCache, PolyVectorField, WordLike, pairing

__all__ = [
    "Scenario",
    "ExtremalState",
    "ArcSegment",
    "SimResult",
    "SimOptions",
    "ControlDecision",
    "AmbiguousSwitchError",
    "DegenerateSingularError",
    "SingularRangeError",
    "ExtremalSystem",
    "h_word",
    "locate_switch",
    "simulate",
    "check_arc_invariants",
    "collinearity_report",
]

_TINY = 1e-300
_PROBES_PER_STEP = 8


class AmbiguousSwitchError(ValueError):
    """h_1 is at zero but h_01 is not: a transversal switch, not a singular arc."""


class DegenerateSingularError(ValueError):
    """h_101 is numerically zero where a singular control is required."""


class SingularRangeError(ValueError):
    """The singular feedback lies outside the admissible range [-1, 1]."""


@dataclass(frozen=True)
class Scenario:
    """A single-input control-affine system dq/dt = f0(q) + u f1(q).

    ``quadratic_cost`` switches the adjoint equation to the state-cost
    variant lam' = grad(q1^2) - (D(f0 + u f1))^T lam used by the classical
    chattering fixture; that flow is not homogeneous in lam, so the
    simulator disables covector renormalization for it.
    """

    name: str
    f0: PolyVectorField
    f1: PolyVectorField
    quadratic_cost: bool = False

    def __post_init__(self):
        if self.f0.dim != self.f1.dim:
            raise ValueError("f0 and f1 must have equal dimension")

    @property
    def dim(self) -> int:
        return self.f0.dim


@dataclass(frozen=True)
class ExtremalState:
    """Point (t, q, lam) along an extremal; lam must be nonzero."""

    t: float
    q: tuple
    lam: tuple

    def __post_init__(self):
        if len(self.q) != len(self.lam):
            raise ValueError("q and lam must have equal dimension")
        if all(x == 0 for x in self.lam):
            raise ValueError("the adjoint covector must be nonzero")

    @property
    def dim(self) -> int:
        return len(self.q)


@dataclass(frozen=True)
class ArcSegment:
    """One maximal bang or singular arc with its recorded samples."""

    kind: str  # "bang" or "singular"
    sign: int  # +1 / -1 for bang arcs, 0 for singular arcs
    t_start: float
    t_end: float
    states: tuple[ExtremalState, ...]
    controls: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in ("bang", "singular"):
            raise ValueError(f"unknown arc kind {self.kind!r}")
        if not self.t_start < self.t_end:
            raise ValueError("arc must have positive duration")


@dataclass(frozen=True)
class SimResult:
    """Ordered arcs, switch times and run diagnostics of one simulation."""

    scenario_name: str
    arcs: tuple[ArcSegment, ...]
    switch_times: tuple[float, ...]
    event_log: tuple[dict, ...]
    diagnostics: dict

    def samples(self):
        """All recorded (state, u) pairs in time order."""
        for arc in self.arcs:
            for state, u in zip(arc.states, arc.controls):
                yield state, u

    def to_payload(self) -> dict:
        return {
            "scenario": self.scenario_name,
            "arcs": [
                {
                    "kind": a.kind,
                    "sign": a.sign,
                    "t_start": a.t_start,
                    "t_end": a.t_end,
                    "samples": len(a.states),
                }
                for a in self.arcs
            ],
            "switch_times": list(self.switch_times),
            "event_log": list(self.event_log),
            "diagnostics": dict(self.diagnostics),
        }


@dataclass(frozen=True)
class SimOptions:
    """Integration and event-logic tolerances.

    eps_switch / eps_transversal / eps_legendre gate singular entry: an arc
    becomes singular only when |h1| and |h01| are below their thresholds
    while |h101| is above its own, all relative to the pairing gauge.  The
    accumulation guard fires once ``accumulation_window`` consecutive
    inter-switch intervals each shrink by ``accumulation_factor`` and the
    last of them is below ``min_interval``.
    """

    rtol: float = 1e-10
    atol: float = 1e-10
    scale_aware_atol: bool = True
    max_step: float = math.inf
    eps_switch: float = 1e-8
    eps_transversal: float = 1e-8
    eps_legendre: float = 1e-6
    refine_tol: float = 1e-12
    singular_range_slack: float = 1e-9
    singular_drift_tol: float = 1e-6
    max_events: int = 10_000
    accumulation_window: int = 10
    accumulation_factor: float = 0.9
    min_interval: float = 1e-15
    renormalize_lambda: bool = True


@dataclass(frozen=True)
class ControlDecision:
    kind: str  # "bang" or "singular"
    sign: int | None = None


def h_word(state: ExtremalState, word: WordLike, cache: BracketCache):
    """h_I = <lam, f_I(q)> at a state; exact when the state is rational."""
    return pairing(state.lam, cache.eval(word, state.q))


def locate_switch(
    h: Callable[[float], float],
    t_a: float,
    t_b: float,
    refine_tol: float = 0.0,
    time_tol: float = 1e-12,
) -> float:
    """Bisect a sign change of ``h`` on [t_a, t_b].

    Needs h(t_a) and h(t_b) of opposite sign (either endpoint may already be
    zero).  The bracket is halved until its width is below ``time_tol``;
    when ``refine_tol`` is positive, halving continues until the residual
    |h| at the midpoint is also below it or the bracket reaches floating
    point resolution.
    """
    ha, hb = h(t_a), h(t_b)
    if ha == 0.0:
        return t_a
    if hb == 0.0:
        return t_b
    if math.copysign(1.0, ha) == math.copysign(1.0, hb):
        raise ValueError("no sign change in the given bracket")
    a, b = t_a, t_b
    hm = math.inf
    while b - a > time_tol or (refine_tol > 0.0 and abs(hm) > refine_tol):
        mid = 0.5 * (a + b)
        if mid <= a or mid >= b:  # bracket at float resolution
            break
        hm = h(mid)
        if hm == 0.0:
            return mid
        if math.copysign(1.0, hm) == math.copysign(1.0, ha):
            a, ha = mid, hm
        else:
            b, hb = mid, hm
    return 0.5 * (a + b)


class ExtremalSystem:
    """Extremal flow of one scenario: right-hand sides, h-calculus, simulate."""

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.dim = scenario.dim
        self.cache = BracketCache(scenario.f0, scenario.f1)
        self._jac0 = scenario.f0.jacobian()
        self._jac1 = scenario.f1.jacobian()

    # -- raw dynamics ----------------------------------------------------

    def _rhs(self, y: np.ndarray, u: float) -> np.ndarray:
        n = self.dim
        q, lam = y[:n], y[n:]
        dq = self.scenario.f0.eval_float(q) + u * self.scenario.f1.eval_float(q)
        dlam = np.empty(n)
        for i in range(n):
            acc = 0.0
            row0, row1 = self._jac0[i], self._jac1[i]
            for j in range(n):
                acc += (row0[j].eval_float(q) + u * row1[j].eval_float(q)) * lam[j]
            dlam[i] = -acc
        if self.scenario.quadratic_cost:
            dlam[0] += 2.0 * q[0]
        return np.concatenate([dq, dlam])

    def extremal_rhs(self, state: ExtremalState, u: float):
        """(dq/dt, dlam/dt) at a state for a frozen control value."""
        if abs(u) > 1 + 1e-12:
            raise ValueError("control must lie in [-1, 1]")
        dy = self._rhs(_state_to_y(state), float(u))
        n = self.dim
        return tuple(dy[:n]), tuple(dy[n:])

    # -- h calculus --------------------------------------------------------

    def h(self, y: np.ndarray, word: str) -> float:
        n = self.dim
        return float(np.dot(y[n:], self.cache.field(word).eval_float(y[:n])))

    def h_ratio(self, y: np.ndarray, word: str) -> tuple[float, float]:
        """(h_I, |h_I| / (|lam| |f_I(q)|)); the ratio is scale-free in [0, 1]."""
        n = self.dim
        vec = self.cache.field(word).eval_float(y[:n])
        value = float(np.dot(y[n:], vec))
        gauge = float(np.linalg.norm(y[n:]) * np.linalg.norm(vec))
        return value, abs(value) / (gauge + _TINY)

    def maximized_hamiltonian(self, y: np.ndarray) -> float:
        n = self.dim
        q, lam = y[:n], y[n:]
        value = float(np.dot(lam, self.scenario.f0.eval_float(q)))
        value += abs(float(np.dot(lam, self.scenario.f1.eval_float(q))))
        if self.scenario.quadratic_cost:
            value -= q[0] ** 2
        return value

    # -- pointwise control ------------------------------------------------

    def pmp_control(self, state: ExtremalState, tol: float = 1e-8) -> ControlDecision:
        """Bang/singular decision at a state, relative to the pairing gauge."""
        y = _state_to_y(state)
        h1, r1 = self.h_ratio(y, "1")
        if r1 > tol:
            return ControlDecision("bang", 1 if h1 > 0 else -1)
        _, r01 = self.h_ratio(y, "01")
        if r01 > tol:
            raise AmbiguousSwitchError(
                "h1 is at zero with h01 nonzero: transversal switch, not singular"
            )
        return ControlDecision("singular")

    def singular_control(self, state: ExtremalState, tol: float = 1e-6) -> float:
        """Feedback -h_001 / h_101, checked against the admissible range."""
        return self._singular_u(_state_to_y(state), tol, range_slack=1e-9)

    def _singular_u(self, y: np.ndarray, tol: float, range_slack: float) -> float:
        h101, r101 = self.h_ratio(y, "101")
        if r101 <= tol:
            raise DegenerateSingularError(
                f"|h101| ratio {r101:.3e} below tolerance: chattering-prone configuration"
            )
        u = -self.h(y, "001") / h101
        if abs(u) > 1 + range_slack:
            raise SingularRangeError(f"singular control {u:.6f} outside [-1, 1]")
        return min(1.0, max(-1.0, u))

    def singular_hamiltonian_rhs(self, state: ExtremalState, tol: float = 1e-6):
        """Hamiltonian field of the singular feedback flow.

        Computed as the extremal right-hand side with the feedback control;
        on the locus h1 = h01 = 0 this is the flow of the autonomous
        Hamiltonian <lam, f0> - (h_001 / h_101) <lam, f1>, whose value is
        conserved along singular arcs (checked in the tests).
        """
        return self.extremal_rhs(state, self.singular_control(state, tol))

    def simulate(
        self, init: ExtremalState, t_final: float, opts: SimOptions = SimOptions()
    ) -> SimResult:
        return _SimRun(self, init, t_final, opts).run()


def _state_to_y(state: ExtremalState) -> np.ndarray:
    return np.array([float(x) for x in (*state.q, *state.lam)])


def _y_to_state(t: float, y: np.ndarray, n: int) -> ExtremalState:
    return ExtremalState(
        float(t), tuple(float(v) for v in y[:n]), tuple(float(v) for v in y[n:])
    )


class _SimRun:
    """Mutable state of one simulate() call."""

    def __init__(self, system: ExtremalSystem, init: ExtremalState, t_final, opts):
        self.sys = system
        self.opts = opts
        self.n = system.dim
        self.t0 = float(init.t)
        self.t_final = float(t_final)
        if not self.t_final > self.t0:
            raise ValueError("t_final must exceed the initial time")
        self.y = _state_to_y(init)
        self.t = self.t0
        self.arcs: list[ArcSegment] = []
        self.switch_times: list[float] = []
        self.events: list[dict] = []
        self.intervals: list[float] = []
        self.renorm_count = 0
        self.h_drift = 0.0
        self.h_ref = system.maximized_hamiltonian(self.y)
        self.termination: str | None = None
        self.event_count = 0

    # -- bookkeeping -------------------------------------------------------

    def _atol(self) -> float | np.ndarray:
        if not self.opts.scale_aware_atol:
            return self.opts.atol
        top = max(float(np.abs(self.y).max()), _TINY)
        scale = np.maximum(np.abs(self.y), 1e-8 * top)
        return self.opts.atol * scale

    def _log(self, kind: str, **extra):
        self.events.append({"type": kind, "t": float(self.t), **extra})

    def _terminate(self, reason: str, **extra):
        self.termination = reason
        self._log("terminate", reason=reason, **extra)

    def _track_h(self, y: np.ndarray):
        value = self.sys.maximized_hamiltonian(y)
        self.h_drift = max(self.h_drift, abs(value - self.h_ref))

    def _maybe_renormalize(self) -> bool:
        """Rescale lam to unit norm when it leaves [1/2, 2]; homogeneous flows only."""
        if self.sys.scenario.quadratic_cost or not self.opts.renormalize_lambda:
            return False
        norm = float(np.linalg.norm(self.y[self.n :]))
        if 0.5 <= norm <= 2.0:
            return False
        if norm < 1e-280:
            raise ValueError("adjoint covector collapsed to zero during integration")
        self.y[self.n :] /= norm
        self.h_ref /= norm
        self.renorm_count += 1
        self._log("renormalize", factor=1.0 / norm)
        return True

    def _register_switch(self, t_switch: float):
        t_switch = float(t_switch)
        previous = self.switch_times[-1] if self.switch_times else self.t0
        if t_switch <= previous:
            return
        self.intervals.append(t_switch - previous)
        self.switch_times.append(t_switch)

    def _accumulation_detected(self) -> bool:
        w = self.opts.accumulation_window
        if len(self.intervals) < w + 1:
            return False
        tail = self.intervals[-(w + 1) :]
        shrinking = all(
            tail[i + 1] <= self.opts.accumulation_factor * tail[i] for i in range(w)
        )
        floor = max(self.opts.min_interval, 20 * abs(self.t) * np.finfo(float).eps)
        return shrinking and tail[-1] <= floor

    def _emit_arc(self, kind: str, sign: int, samples, controls):
        states = tuple(_y_to_state(t, y, self.n) for t, y in samples)
        if len(states) >= 2 and states[-1].t > states[0].t:
            self.arcs.append(
                ArcSegment(kind, sign, states[0].t, states[-1].t, states, tuple(controls))
            )

    # -- mode decision -------------------------------------------------------

    def _decide_mode(self):
        o = self.opts
        h1, r1 = self.sys.h_ratio(self.y, "1")
        if r1 > o.eps_switch:
            return "bang", (1 if h1 > 0 else -1)
        h01, r01 = self.sys.h_ratio(self.y, "01")
        if r01 > o.eps_transversal:
            # h1 at zero with h01 nonzero: h1 moves off zero with h01's sign
            return "bang", (1 if h01 > 0 else -1)
        try:
            self.sys._singular_u(self.y, o.eps_legendre, o.singular_range_slack)
        except (DegenerateSingularError, SingularRangeError) as exc:
            self._terminate("degenerate-singular", detail=str(exc))
            return None, None
        return "singular", None

    # -- main loop -------------------------------------------------------------

    def run(self) -> SimResult:
        while self.termination is None:
            if not self.t < self.t_final:
                self._terminate("t_final")
                break
            mode, sign = self._decide_mode()
            if mode is None:
                break
            if mode == "bang":
                self._run_bang_arc(sign)
            else:
                self._run_singular_arc()
            if self.event_count >= self.opts.max_events and self.termination is None:
                self._terminate("max_events")
        diagnostics = {
            "termination": self.termination,
            "hamiltonian_drift": self.h_drift,
            "lambda_renormalizations": self.renorm_count,
            "switch_count": len(self.switch_times),
            "arc_count": len(self.arcs),
        }
        return SimResult(
            self.sys.scenario.name,
            tuple(self.arcs),
            tuple(self.switch_times),
            tuple(self.events),
            diagnostics,
        )

    # -- bang arcs ---------------------------------------------------------------

    def _run_bang_arc(self, sign: int):
        o = self.opts
        u = float(sign)
        t_start = self.t
        budget = self.t_final - t_start
        rhs = lambda s, y: self.sys._rhs(y, u)
        samples = [(t_start, self.y.copy())]
        controls = [u]
        armed = sign * self.sys.h(self.y, "1") > 0.0
        s_local = 0.0

        while self.termination is None:
            solver = RK45(
                rhs,
                s_local,
                self.y.copy(),
                t_bound=budget,
                rtol=o.rtol,
                atol=self._atol(),
                max_step=o.max_step,
            )
            outcome = self._step_bang_session(
                solver, sign, armed, t_start, samples, controls
            )
            if outcome == "renormalized":
                s_local = self.t - t_start
                armed = sign * self.sys.h(self.y, "1") > 0.0
                continue
            break

        self._emit_arc("bang", sign, samples, controls)

    def _step_bang_session(self, solver, sign, armed, t_start, samples, controls):
        """Advance one RK45 session; returns 'renormalized' to request a restart."""
        o = self.opts
        u = float(sign)
        while True:
            if solver.status == "finished":
                self.t = t_start + solver.t
                self.y = solver.y.copy()
                self._terminate("t_final")
                return "done"
            s_prev = solver.t
            try:
                solver.step()
            except (ValueError, RuntimeError) as exc:
                self.t = t_start + solver.t
                self.y = solver.y.copy()
                self._terminate("integrator-failure", detail=str(exc))
                return "done"
            s_now = solver.t
            dense = solver.dense_output()
            h_fn = lambda s: self.sys.h(dense(s), "1")

            crossing = None
            probe_prev = s_prev
            for j in range(1, _PROBES_PER_STEP + 1):
                probe = s_prev + (s_now - s_prev) * j / _PROBES_PER_STEP
                value = h_fn(probe)
                if armed and sign * value < 0.0:
                    crossing = (probe_prev, probe)
                    break
                if sign * value > 0.0:
                    armed = True
                probe_prev = probe

            if crossing is not None:
                self._commit_switch(sign, dense, crossing, t_start, samples, controls)
                return "done"

            y_now = solver.y.copy()
            samples.append((t_start + s_now, y_now))
            controls.append(u)
            self._track_h(y_now)
            self.t = t_start + s_now
            self.y = y_now
            if self._maybe_renormalize():
                samples[-1] = (self.t, self.y.copy())
                return "renormalized"

    def _commit_switch(self, sign, dense, crossing, t_start, samples, controls):
        """Refine a located h1 root and hand over to the next arc or mode."""
        o = self.opts
        h_fn = lambda s: self.sys.h(dense(s), "1")
        y_probe = dense(crossing[1])
        gauge = float(
            np.linalg.norm(y_probe[self.n :])
            * np.linalg.norm(self.sys.cache.field("1").eval_float(y_probe[: self.n]))
        )
        width = max(abs(crossing[1]), abs(crossing[0]), 1e-30)
        s_star = locate_switch(
            h_fn,
            crossing[0],
            crossing[1],
            refine_tol=o.refine_tol * (gauge + _TINY),
            time_tol=5e-16 * width,
        )
        y_star = dense(s_star)
        t_star = t_start + s_star
        samples.append((t_star, y_star.copy()))
        controls.append(float(sign))
        self._track_h(y_star)
        self.t = t_star
        self.y = y_star.copy()
        self.event_count += 1

        _, r01 = self.sys.h_ratio(y_star, "01")
        if r01 > o.eps_transversal:
            self._register_switch(t_star)
            self._log("switch", sign_from=sign, sign_to=-sign)
            if self._accumulation_detected():
                self._terminate("accumulation")
            return
        try:
            self.sys._singular_u(y_star, o.eps_legendre, o.singular_range_slack)
        except (DegenerateSingularError, SingularRangeError) as exc:
            self._terminate("degenerate-singular", detail=str(exc))
            return
        self._register_switch(t_star)
        self._log("singular-entry")

    # -- singular arcs -------------------------------------------------------------

    def _singular_feedback(self, y: np.ndarray) -> float:
        return self.sys._singular_u(
            y, self.opts.eps_legendre, self.opts.singular_range_slack
        )

    def _saturation_sign(self, y: np.ndarray) -> int:
        h101, r101 = self.sys.h_ratio(y, "101")
        if r101 <= self.opts.eps_legendre:
            return 0
        u = -self.sys.h(y, "001") / h101
        return 1 if u > 0 else -1

    def _run_singular_arc(self):
        o = self.opts
        t_start = self.t
        budget = self.t_final - t_start
        rhs = lambda s, y: self.sys._rhs(y, self._singular_feedback(y))
        solver = RK45(
            rhs,
            0.0,
            self.y.copy(),
            t_bound=budget,
            rtol=o.rtol,
            atol=self._atol(),
            max_step=o.max_step,
        )
        samples = [(t_start, self.y.copy())]
        controls = [self._singular_feedback(self.y)]
        exit_sign = None

        while True:
            if solver.status == "finished":
                self.t = t_start + solver.t
                self.y = solver.y.copy()
                self._terminate("t_final")
                break
            s_prev = solver.t
            y_prev = solver.y.copy()
            try:
                solver.step()
            except (DegenerateSingularError, SingularRangeError) as exc:
                # feedback left its domain during a trial step: end the arc at
                # the last accepted state, saturating toward the feedback sign
                exit_sign = self._saturation_sign(y_prev)
                self.t = t_start + s_prev
                self.y = y_prev
                self.event_count += 1
                self._register_switch(self.t)
                self._log("singular-exit", detail=str(exc))
                if exit_sign == 0:
                    self._terminate("degenerate-singular")
                break
            except (ValueError, RuntimeError) as exc:
                self.t = t_start + solver.t
                self.y = solver.y.copy()
                self._terminate("integrator-failure", detail=str(exc))
                break
            s_now, y_now = solver.t, solver.y.copy()
            try:
                u_now = self._singular_feedback(y_now)
            except (DegenerateSingularError, SingularRangeError) as exc:
                dense = solver.dense_output()
                s_exit, y_exit = self._bisect_singular_exit(dense, s_prev, s_now)
                exit_sign = self._saturation_sign(y_exit)
                self.t = t_start + s_exit
                self.y = y_exit
                samples.append((self.t, y_exit.copy()))
                controls.append(float(exit_sign))
                self.event_count += 1
                self._register_switch(self.t)
                self._log("singular-exit", detail=str(exc))
                if exit_sign == 0:
                    self._terminate("degenerate-singular")
                break
            samples.append((t_start + s_now, y_now))
            controls.append(u_now)
            self._track_h(y_now)
            self.t = t_start + s_now
            self.y = y_now
            _, r1 = self.sys.h_ratio(y_now, "1")
            if r1 > o.singular_drift_tol:
                self._log("singular-drift", ratio=r1)

        self._emit_arc("singular", 0, samples, controls)
        if exit_sign and self.termination is None:
            self._run_bang_arc(exit_sign)

    def _bisect_singular_exit(self, dense, s_a: float, s_b: float):
        """Largest s in [s_a, s_b] where the singular feedback is admissible."""

        def admissible(s: float) -> bool:
            try:
                self._singular_feedback(dense(s))
                return True
            except (DegenerateSingularError, SingularRangeError):
                return False

        a, b = s_a, s_b
        for _ in range(120):
            mid = 0.5 * (a + b)
            if mid <= a or mid >= b:
                break
            if admissible(mid):
                a = mid
            else:
                b = mid
        return a, dense(a)


def simulate(
    scenario: Scenario,
    init: ExtremalState,
    t_final: float,
    opts: SimOptions = SimOptions(),
) -> SimResult:
    """Convenience wrapper: build the extremal system and integrate."""
    return ExtremalSystem(scenario).simulate(init, t_final, opts)


# ---------------------------------------------------------------------------
# post-run verification


def check_arc_invariants(
    result: SimResult, system: ExtremalSystem, tol: float = 1e-6
) -> list[dict]:
    """Verify per-arc sign and identity invariants; returns violations.

    Bang arcs must keep sign * h1 > 0 strictly inside the arc; singular arcs
    must keep |h1|, |h01| and the feedback residual h_001 + u h_101 within
    tolerance, everything relative to the pairing gauge.
    """
    violations = []
    for idx, arc in enumerate(result.arcs):
        if arc.kind == "bang":
            for state in arc.states[1:-1]:
                y = _state_to_y(state)
                h1, r1 = system.h_ratio(y, "1")
                if arc.sign * h1 < 0 and r1 > tol:
                    violations.append(
                        {"arc": idx, "t": state.t, "check": "bang-sign", "ratio": r1}
                    )
        else:
            for state, u in zip(arc.states, arc.controls):
                y = _state_to_y(state)
                _, r1 = system.h_ratio(y, "1")
                _, r01 = system.h_ratio(y, "01")
                h001 = system.h(y, "001")
                h101 = system.h(y, "101")
                vec001 = system.cache.field("001").eval_float(y[: system.dim])
                vec101 = system.cache.field("101").eval_float(y[: system.dim])
                lam_norm = float(np.linalg.norm(y[system.dim :]))
                gauge = lam_norm * (
                    float(np.linalg.norm(vec001)) + float(np.linalg.norm(vec101))
                )
                residual = abs(h001 + u * h101) / (gauge + _TINY)
                for check, ratio in (
                    ("singular-h1", r1),
                    ("singular-h01", r01),
                    ("singular-feedback-identity", residual),
                ):
                    if ratio > tol:
                        violations.append(
                            {"arc": idx, "t": state.t, "check": check, "ratio": ratio}
                        )
    return violations


def collinearity_report(
    result: SimResult, system: ExtremalSystem, tol: float = 1e-6
) -> list[dict]:
    """Trajectory times where f0 and f1 are numerically collinear.

    One entry per flagged sample: the collinearity residual, and over the
    maximal run of consecutive flagged samples containing it, the windowed
    mean control u_bar together with |f0 + u_bar f1|(q).  Shrinking the
    tolerance can only remove entries.
    """
    samples = list(result.samples())
    flagged = []
    for k, (state, _) in enumerate(samples):
        q = np.array([float(x) for x in state.q])
        v0 = system.scenario.f0.eval_float(q)
        v1 = system.scenario.f1.eval_float(q)
        minors = [
            v0[i] * v1[j] - v0[j] * v1[i]
            for i in range(len(q))
            for j in range(i + 1, len(q))
        ]
        wedge = float(np.linalg.norm(minors)) if minors else 0.0
        gauge = float(np.linalg.norm(v0) * np.linalg.norm(v1))
        if wedge <= tol * (gauge + _TINY):
            flagged.append(k)
    if not flagged:
        return []
    groups = [[flagged[0]]]
    for k in flagged[1:]:
        if k == groups[-1][-1] + 1:
            groups[-1].append(k)
        else:
            groups.append([k])
    report = []
    for group in groups:
        u_bar = float(np.mean([samples[k][1] for k in group]))
        for k in group:
            state, _ = samples[k]
            q = np.array([float(x) for x in state.q])
            vec = system.scenario.f0.eval_float(q) + u_bar * system.scenario.f1.eval_float(q)
            report.append(
                {
                    "t": state.t,
                    "q": tuple(state.q),
                    "u_bar": u_bar,
                    "residual": float(np.linalg.norm(vec)),
                }
            )
    return report
