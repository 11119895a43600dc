"""Extremal flow: h-calculus, control decisions, event location, simulation."""

import dataclasses
import math
import random
from fractions import Fraction

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from fullerkit import (
    AmbiguousSwitchError,
    BracketCache,
    DegenerateSingularError,
    ExtremalState,
    ExtremalSystem,
    Polynomial,
    PolyVectorField,
    Scenario,
    SimOptions,
    SingularRangeError,
    builtin,
    check_arc_invariants,
    collinearity_report,
    h_word,
    locate_switch,
    run_bundle,
    simulate,
)


def di_system():
    return ExtremalSystem(builtin("double_integrator").scenario)


def s3d_system():
    return ExtremalSystem(builtin("singular3d").scenario)


class TestHWord:
    def test_double_integrator_h1_h01(self):
        system = di_system()
        lam = (Fraction(3), Fraction(-2))
        state = ExtremalState(0.0, (Fraction(1), Fraction(5)), lam)
        assert h_word(state, "1", system.cache) == lam[1]
        assert h_word(state, "01", system.cache) == -lam[0]

    def test_orthogonal_lam(self):
        system = di_system()
        state = ExtremalState(0.0, (0.0, 0.0), (1.0, 0.0))  # lam orthogonal to f1
        assert h_word(state, "1", system.cache) == 0

    def test_linearity_in_lam(self):
        system = di_system()
        lam = (Fraction(1), Fraction(2))
        state1 = ExtremalState(0.0, (Fraction(1), Fraction(1)), lam)
        state2 = ExtremalState(0.0, (Fraction(1), Fraction(1)), tuple(3 * x for x in lam))
        for word in ("1", "01", "001", "+01"):
            assert h_word(state2, word, system.cache) == 3 * h_word(
                state1, word, system.cache
            )


class TestExtremalRhs:
    def test_linear_drift_adjoint(self):
        # f1 = 0, f0 = A q: the adjoint satisfies lam' = -A^T lam
        a = [[2, -1], [3, 1]]
        f0 = PolyVectorField(
            [
                Polynomial(2, {(1, 0): a[0][0], (0, 1): a[0][1]}),
                Polynomial(2, {(1, 0): a[1][0], (0, 1): a[1][1]}),
            ]
        )
        system = ExtremalSystem(Scenario("linear", f0, PolyVectorField.zero(2)))
        q = (0.7, -0.3)
        lam = (1.5, 2.0)
        _, dlam = system.extremal_rhs(ExtremalState(0.0, q, lam), 0.0)
        expected = -np.array(a).T @ np.array(lam)
        assert np.allclose(dlam, expected, atol=1e-14)

    def test_derivative_identity_fd(self):
        # d/dt <lam, X(q)> ~ <lam, [f0 + u f1, X](q)> along a numeric solution
        bundle = builtin("random_poly", seed=3)
        system = ExtremalSystem(bundle.scenario)
        u = 1.0
        y0 = np.array([0.1, -0.2, 0.3, 1.0, 0.5, -0.4])
        sol = solve_ivp(
            lambda t, y: system._rhs(y, u),
            (0.0, 0.2),
            y0,
            rtol=1e-12,
            atol=1e-14,
            dense_output=True,
        )
        rng = random.Random(5)
        from fullerkit import eval_word_field, lie_bracket

        x_field = PolyVectorField(
            [
                Polynomial(3, {(1, 0, 0): 1, (0, 2, 0): Fraction(1, 2)}),
                Polynomial(3, {(0, 0, 1): 2}),
                Polynomial(3, {(0, 1, 1): 1}),
            ]
        )
        drift_plus = system.scenario.f0 + system.scenario.f1  # u = 1
        bracket = lie_bracket(drift_plus, x_field)

        def pair_at(t, field):
            y = sol.sol(t)
            return float(np.dot(y[3:], field.eval_float(y[:3])))

        t_mid = 0.1
        for delta in (1e-4, 5e-5):
            fd = (pair_at(t_mid + delta, x_field) - pair_at(t_mid - delta, x_field)) / (
                2 * delta
            )
            exact = pair_at(t_mid, bracket)
            assert abs(fd - exact) <= 1e-5, (delta, fd, exact)

    def test_h1_derivative_is_h01(self):
        system = di_system()
        u = -1.0
        y0 = np.array([0.0, 0.0, -1.0, -0.5])
        sol = solve_ivp(
            lambda t, y: system._rhs(y, u), (0, 0.4), y0, rtol=1e-12, atol=1e-14,
            dense_output=True,
        )
        t_mid, delta = 0.2, 1e-5
        fd = (system.h(sol.sol(t_mid + delta), "1") - system.h(sol.sol(t_mid - delta), "1")) / (
            2 * delta
        )
        assert abs(fd - system.h(sol.sol(t_mid), "01")) < 1e-9


class TestPmpControl:
    def test_bang_signs(self):
        system = di_system()
        plus = system.pmp_control(ExtremalState(0.0, (0.0, 0.0), (0.0, 0.5)))
        minus = system.pmp_control(ExtremalState(0.0, (0.0, 0.0), (0.0, -0.5)))
        assert (plus.kind, plus.sign) == ("bang", 1)
        assert (minus.kind, minus.sign) == ("bang", -1)

    def test_singular_candidate_on_fixture(self):
        bundle = builtin("singular3d")
        system = ExtremalSystem(bundle.scenario)
        decision = system.pmp_control(bundle.initial)
        assert decision.kind == "singular"

    def test_ambiguous_raises(self):
        system = di_system()
        # h1 = lam2 = 0 but h01 = -lam1 = 1
        with pytest.raises(AmbiguousSwitchError):
            system.pmp_control(ExtremalState(0.0, (0.0, 0.0), (-1.0, 0.0)))


class TestSingularControl:
    def test_zero_numerator(self):
        bundle = builtin("singular3d")
        system = ExtremalSystem(bundle.scenario)
        # h001 = x2 lam1 - 2 x3 lam2 vanishes at x3 = 0, lam1 = 0 while
        # h101 = -lam2 + 2 x2 lam3 = 3 stays away from zero
        state = ExtremalState(0.0, (0.0, 1.0, 0.0), (0.0, -1.0, 1.0))
        assert system.singular_control(state) == 0.0

    def test_equal_h_gives_minus_one(self):
        bundle = builtin("singular3d")
        system = ExtremalSystem(bundle.scenario)
        # choose a state with h001 = h101 != 0: u = -1
        # h101 = -lam2 + 2 x2 lam3, h001 = x2 lam1 - 2 x3 lam2
        state = ExtremalState(0.0, (0.0, 1.0, 0.0), (1.0, -1.0, 0.0))
        # h101 = 1, h001 = 1
        assert system.singular_control(state) == -1.0

    def test_degenerate_raises(self):
        system = di_system()  # f101 = 0 identically for the double integrator
        with pytest.raises(DegenerateSingularError):
            system.singular_control(ExtremalState(0.0, (0.0, 0.0), (1.0, 0.0)))

    def test_range_violation_raises(self):
        bundle = builtin("singular3d")
        system = ExtremalSystem(bundle.scenario)
        # h101 = 1, h001 = 2 -> u = -2 outside the box
        state = ExtremalState(0.0, (0.0, 2.0, 0.0), (1.0, -1.0, 0.0))
        with pytest.raises(SingularRangeError):
            system.singular_control(state)

    def test_feedback_identity(self):
        bundle = builtin("singular3d")
        system = ExtremalSystem(bundle.scenario)
        state = bundle.initial
        u = system.singular_control(state)
        y = np.array([float(x) for x in (*state.q, *state.lam)])
        assert abs(system.h(y, "001") + u * system.h(y, "101")) <= 1e-9


class TestSingularHamiltonian:
    def test_matches_feedback_rhs(self):
        bundle = builtin("singular3d")
        system = ExtremalSystem(bundle.scenario)
        state = bundle.initial
        direct = system.extremal_rhs(state, system.singular_control(state))
        via_h = system.singular_hamiltonian_rhs(state)
        assert direct == via_h

    def test_conservation_along_arc(self):
        bundle = builtin("singular3d")
        system = ExtremalSystem(bundle.scenario)
        result = system.simulate(bundle.initial, 1.0, SimOptions(rtol=1e-10, atol=1e-10))
        arc = result.arcs[0]
        assert arc.kind == "singular"

        def feedback_h(state):
            y = np.array([float(x) for x in (*state.q, *state.lam)])
            return float(
                np.dot(y[3:], system.scenario.f0.eval_float(y[:3]))
            ) - system.h(y, "001") / system.h(y, "101") * system.h(y, "1")

        values = [feedback_h(s) for s in arc.states]
        assert max(values) - min(values) <= 1e-8

    def test_legendre_sign_along_arc(self):
        bundle = builtin("singular3d")
        system = ExtremalSystem(bundle.scenario)
        result = system.simulate(bundle.initial, 0.5, SimOptions())
        for state in result.arcs[0].states:
            y = np.array([float(x) for x in (*state.q, *state.lam)])
            assert system.h(y, "101") >= -1e-9


class TestLocateSwitch:
    def test_linear_root(self):
        t = locate_switch(lambda t: t - 0.5, 0.0, 1.0, time_tol=1e-12)
        assert abs(t - 0.5) <= 1e-12

    def test_no_sign_change(self):
        with pytest.raises(ValueError):
            locate_switch(lambda t: 1.0 + t, 0.0, 1.0)

    def test_iteration_bound(self):
        calls = []

        def h(t):
            calls.append(t)
            return t - 0.3

        time_tol = 1e-10
        locate_switch(h, 0.0, 1.0, time_tol=time_tol)
        # two endpoint evaluations plus at most ceil(log2(span / tol)) halvings
        assert len(calls) - 2 <= math.ceil(math.log2(1.0 / time_tol))

    def test_double_integrator_closed_form(self):
        # h1(t) = -0.5 + t along the u = -1 arc: root at exactly 0.5
        system = di_system()
        u = -1.0
        sol = solve_ivp(
            lambda t, y: system._rhs(y, u),
            (0, 1.0),
            np.array([0.0, 0.0, -1.0, -0.5]),
            rtol=1e-12,
            atol=1e-14,
            dense_output=True,
        )
        t = locate_switch(lambda s: system.h(sol.sol(s), "1"), 0.0, 1.0, time_tol=1e-13)
        assert abs(t - 0.5) <= 1e-11


class TestSimulate:
    def test_double_integrator_two_arcs(self):
        bundle = builtin("double_integrator")
        result = run_bundle(bundle)
        assert len(result.arcs) == 2
        assert [a.sign for a in result.arcs] == [-1, 1]
        assert len(result.switch_times) == 1
        assert abs(result.switch_times[0] - 0.5) <= 1e-9
        assert result.diagnostics["termination"] == "t_final"

    def test_single_bang_no_switch(self):
        # lam2 stays positive on [0, 0.3]: single arc, no switch times
        bundle = builtin("double_integrator")
        init = ExtremalState(0.0, (0.0, 0.0), (-1.0, 1.0))
        result = simulate(bundle.scenario, init, 0.3)
        assert len(result.arcs) == 1
        assert result.switch_times == ()

    def test_switching_necessity(self):
        bundle = builtin("double_integrator")
        system = ExtremalSystem(bundle.scenario)
        result = run_bundle(bundle)
        for t_switch in result.switch_times:
            state = min(
                (s for arc in result.arcs for s in arc.states),
                key=lambda s: abs(s.t - t_switch),
            )
            y = np.array([*state.q, *state.lam])
            _, ratio = system.h_ratio(y, "1")
            assert ratio <= 1e-10

    def test_hamiltonian_conservation(self):
        bundle = builtin("double_integrator")
        result = run_bundle(bundle)
        assert result.diagnostics["hamiltonian_drift"] <= 1e-8

    def test_bang_sign_invariant(self):
        bundle = builtin("double_integrator")
        system = ExtremalSystem(bundle.scenario)
        result = run_bundle(bundle)
        for arc in result.arcs:
            for state in arc.states[1:-1]:
                y = np.array([*state.q, *state.lam])
                h1, ratio = system.h_ratio(y, "1")
                if ratio > 1e-9:
                    assert arc.sign * h1 > 0

    def test_homogeneity_in_lam(self):
        bundle = builtin("double_integrator")
        opts = SimOptions(renormalize_lambda=False)
        base = simulate(bundle.scenario, bundle.initial, 1.0, opts)
        scaled_init = ExtremalState(
            0.0, bundle.initial.q, tuple(3.0 * x for x in bundle.initial.lam)
        )
        scaled = simulate(bundle.scenario, scaled_init, 1.0, opts)
        assert len(base.switch_times) == len(scaled.switch_times) == 1
        assert abs(base.switch_times[0] - scaled.switch_times[0]) <= 1e-9
        # h-values scale by 3
        s_base = base.arcs[0].states[0]
        s_scaled = scaled.arcs[0].states[0]
        system = ExtremalSystem(bundle.scenario)
        assert np.isclose(
            h_word(s_scaled, "1", system.cache), 3 * h_word(s_base, "1", system.cache)
        )

    def test_renormalization_keeps_lambda_bounded(self):
        # exponentially growing adjoint triggers renormalization events
        f0 = PolyVectorField(
            [
                Polynomial(2, {(0, 1): 1}),
                Polynomial(2, {(1, 0): -1, (0, 1): -2}),
            ]
        )
        f1 = PolyVectorField([Polynomial.zero(2), Polynomial.constant(2, 1)])
        scenario = Scenario("collinear_sink", f0, f1)
        init = ExtremalState(0.0, (0.0, 0.0), (1.0, 1.0))
        result = simulate(scenario, init, 5.0)
        assert result.diagnostics["lambda_renormalizations"] >= 1
        for arc in result.arcs:
            for state in arc.states:
                assert 0.2 <= float(np.linalg.norm(state.lam)) <= 4.0

    def test_max_events_guard(self):
        bundle = builtin("fuller")
        # generic integrator on the chattering fixture: cap events tightly
        opts = SimOptions(max_events=3, renormalize_lambda=False)
        result = simulate(bundle.scenario, bundle.initial, 1e-3, opts)
        assert result.diagnostics["termination"] in ("max_events", "accumulation")
        assert result.diagnostics["switch_count"] >= 3


class TestSingularArcSimulation:
    def test_sustained_singular_arc(self):
        bundle = builtin("singular3d")
        result = run_bundle(bundle)
        arc = result.arcs[0]
        assert arc.kind == "singular"
        assert arc.t_end - arc.t_start >= 0.2
        assert result.diagnostics["termination"] == "t_final"

    def test_invariants_within_tolerance(self):
        bundle = builtin("singular3d")
        system = ExtremalSystem(bundle.scenario)
        result = run_bundle(bundle)
        violations = check_arc_invariants(result, system, tol=1e-6)
        assert violations == []


class TestCheckArcInvariants:
    def test_clean_run_no_violations(self):
        bundle = builtin("double_integrator")
        system = ExtremalSystem(bundle.scenario)
        result = run_bundle(bundle)
        assert check_arc_invariants(result, system) == []

    def test_corrupted_control_flagged(self):
        bundle = builtin("singular3d")
        system = ExtremalSystem(bundle.scenario)
        result = run_bundle(bundle)
        arc = result.arcs[0]
        bad_controls = (arc.controls[0],) + (0.9,) * (len(arc.controls) - 1)
        bad_arc = dataclasses.replace(arc, controls=bad_controls)
        bad = dataclasses.replace(result, arcs=(bad_arc,) + result.arcs[1:])
        violations = check_arc_invariants(bad, system)
        assert any(v["check"] == "singular-feedback-identity" for v in violations)


class TestCollinearityReport:
    def test_trajectory_avoiding_collinear_set(self):
        bundle = builtin("double_integrator")
        system = ExtremalSystem(bundle.scenario)
        result = run_bundle(bundle)
        # f0 ^ f1 = x2 vanishes only at x2 = 0; the interior samples avoid it
        report = collinearity_report(result, system, tol=1e-12)
        interior = [r for r in report if 0.05 < r["t"] < 0.95 and abs(r["q"][1]) > 1e-6]
        assert interior == []

    def test_converging_equilibrium(self):
        # f0 + 1 * f1 has an asymptotically stable equilibrium at (1, 0) where
        # f0 = -f1; lam = e^t (1,1) keeps h1 > 0 so u = +1 throughout
        f0 = PolyVectorField(
            [
                Polynomial(2, {(0, 1): 1}),
                Polynomial(2, {(1, 0): -1, (0, 1): -2}),
            ]
        )
        f1 = PolyVectorField([Polynomial.zero(2), Polynomial.constant(2, 1)])
        scenario = Scenario("sink", f0, f1)
        init = ExtremalState(0.0, (0.0, 0.0), (1.0, 1.0))
        result = simulate(scenario, init, 25.0)
        system = ExtremalSystem(scenario)
        # the residual |f0 + u_bar f1|(q) at the deepest flagged sample
        # shrinks as the detection window tightens
        residuals = []
        for tol in (1e-3, 1e-4, 1e-5):
            report = collinearity_report(result, system, tol=tol)
            assert report, f"expected flagged samples at tol {tol}"
            last = report[-1]
            assert abs(last["u_bar"] - 1.0) <= 1e-6
            residuals.append(last["residual"])
        assert residuals == sorted(residuals, reverse=True)
        assert residuals[-1] <= 1e-3

    def test_tolerance_monotonicity(self):
        f0 = PolyVectorField(
            [
                Polynomial(2, {(0, 1): 1}),
                Polynomial(2, {(1, 0): -1, (0, 1): -2}),
            ]
        )
        f1 = PolyVectorField([Polynomial.zero(2), Polynomial.constant(2, 1)])
        scenario = Scenario("sink", f0, f1)
        init = ExtremalState(0.0, (0.0, 0.0), (1.0, 1.0))
        result = simulate(scenario, init, 12.0)
        system = ExtremalSystem(scenario)
        sizes = [
            len(collinearity_report(result, system, tol=tol))
            for tol in (1e-3, 1e-5, 1e-7)
        ]
        assert sizes == sorted(sizes, reverse=True)
