"""Outer loop: schedules, curvature screening, flag dispatch, termination."""
import math

import numpy as np
import pytest

from minresls.core import NoHessianOracle, Objective
from minresls.driver import (
    BUDGET,
    CONVERGED,
    DIVERGED,
    GD,
    STAGNATED,
    IterateRecord,
    ScheduleParams,
    SolverConfig,
    curvature_test_basic,
    curvature_test_refined,
    schedule_eval,
    solve,
)
from minresls.hessians import LbfgsStore
from minresls.linesearch import LinesearchConfig
from minresls.minres import NPC, SOL
from minresls.problems import build_problem


def spec(name, **params):
    return build_problem(name, self_test=False, **params)


class TestSchedule:
    def test_newton_tolerance_cap(self):
        sp = ScheduleParams()
        assert schedule_eval(1, 1.0, sp)[0] == 0.1
        assert schedule_eval(1, 4.0, sp)[0] == 0.1
        assert schedule_eval(1, 1e-4, sp)[0] == pytest.approx(0.01, rel=1e-14)

    def test_shift_cap(self):
        th, ze, _ = schedule_eval(2, 1.0, ScheduleParams())
        z2 = 2.0 * math.log(3.0) ** 2
        assert z2 == pytest.approx(2.414, abs=1e-3)
        assert ze == 1e-12          # cap binds long before z_k does

    def test_floor_sequence(self):
        _, _, a1 = schedule_eval(1, 1.0, ScheduleParams())
        assert a1 == pytest.approx(math.log(2.0) ** 2 / 2.0, rel=1e-15)
        _, _, a3 = schedule_eval(3, 1.0, ScheduleParams(alpha=0.5))
        assert a3 == pytest.approx(math.sqrt(3.0 * math.log(4.0) ** 2) / 2.0, rel=1e-14)

    def test_coupled_links_shift_to_tolerance(self):
        sp = ScheduleParams(mode="coupled", beta=2.0, zeta_mult=0.5)
        th, ze, _ = schedule_eval(1, 0.1, sp)
        assert th == pytest.approx(0.01, rel=1e-15)
        assert ze == pytest.approx(0.005, rel=1e-15)

    def test_lbfgs_tolerance_loosens_with_k(self):
        sp = ScheduleParams(mode="lbfgs_mr")
        tiny = 1e-12
        th1 = schedule_eval(1, tiny, sp)[0]
        th9 = schedule_eval(9, tiny, sp)[0]
        assert th1 == pytest.approx(math.log(2.0) * math.sqrt(tiny), rel=1e-14)
        assert th9 > th1

    def test_validation(self):
        with pytest.raises(ValueError):
            schedule_eval(0, 1.0, ScheduleParams())
        with pytest.raises(ValueError):
            schedule_eval(1, 0.0, ScheduleParams())
        with pytest.raises(ValueError):
            ScheduleParams(mode="cubic")
        with pytest.raises(ValueError):
            ScheduleParams(tol_cap=1.0)
        with pytest.raises(ValueError):
            ScheduleParams(alpha=0.0)
        with pytest.raises(ValueError):
            ScheduleParams(curvature_floor=0.0)


class TestCurvatureTests:
    def test_basic_pass_and_fail(self):
        sp = ScheduleParams()
        a_k = 0.5
        assert curvature_test_basic(1.0, 1.0, 1.0, a_k, sp)       # 1 >= 5e-13
        assert not curvature_test_basic(0.0, 1.0, 1.0, a_k, sp)   # exactly flat

    def test_basic_tie_passes(self):
        sp = ScheduleParams()
        a_k = 0.5
        thresh = min(sp.curvature_floor, a_k * 1.0)
        assert curvature_test_basic(thresh * 2.0, 2.0, 1.0, a_k, sp)

    def test_refined_uses_larger_of_p_and_g(self):
        sp = ScheduleParams()
        a_k = 0.5
        thresh = min(sp.curvature_floor, a_k)
        # passes against ||p||^2 = 0.25 alone but not against gnorm^2 = 1
        ptBp = thresh * 0.5
        assert curvature_test_basic(ptBp, 0.25, 1.0, a_k, sp)
        assert not curvature_test_refined(ptBp, 0.25, 1.0, 0.0, 1.0, SOL, a_k, sp)

    def test_refined_npc_cap(self):
        sp = ScheduleParams()
        assert not curvature_test_refined(0.0, 0.0, 1.0, 2e8, 1.0, NPC, 0.5, sp)
        assert not curvature_test_refined(0.0, 0.0, 1.0, -2e8, 1.0, NPC, 0.5, sp)
        assert curvature_test_refined(0.0, 0.0, 1.0, 0.0, 1.0, NPC, 0.5, sp)


class TestSolverConfig:
    def test_auto_test_resolution(self):
        assert SolverConfig().resolved_curvature_test == "basic"
        assert SolverConfig(hessian="lbfgs").resolved_curvature_test == "refined"
        assert SolverConfig(hessian="lbfgs",
                            curvature_test="basic").resolved_curvature_test == "basic"

    def test_validation(self):
        with pytest.raises(ValueError):
            SolverConfig(hessian="sr1")
        with pytest.raises(ValueError):
            SolverConfig(curvature_test="bold")
        with pytest.raises(ValueError):
            SolverConfig(max_inner=0)
        with pytest.raises(ValueError):
            SolverConfig(max_oracles=0.0)


class TestSolveBasics:
    def test_quadratic_three_iterations(self):
        obj = spec("quadratic", n=10).make_objective()
        trace = solve(obj, np.ones(10))
        assert trace.status == CONVERGED
        assert trace.iters <= 3
        assert trace.gnorm_final <= 1e-10
        assert np.linalg.norm(trace.x_final) <= 1e-10

    def test_stationary_start_returns_immediately(self):
        obj = spec("quartic_saddle", n=5).make_objective()
        trace = solve(obj, np.zeros(5))
        assert trace.status == CONVERGED
        assert trace.iters == 0 and trace.records == []
        assert np.array_equal(trace.x_final, np.zeros(5))

    def test_perturbed_saddle_escapes(self):
        problem = spec("quartic_saddle", n=5)
        x0 = problem.start(np.random.default_rng(77))
        obj = problem.make_objective()
        trace = solve(obj, x0, SolverConfig(check_invariants=True))
        assert trace.status == CONVERGED
        assert trace.f_final == pytest.approx(problem.f_opt, abs=1e-8)
        assert any(r.flag == NPC for r in trace.records)

    def test_monotone_descent(self):
        obj = spec("rosenbrock", n=10).make_objective()
        trace = solve(obj, np.full(10, 0.2))
        assert trace.status == CONVERGED
        fs = [r.f for r in trace.records] + [trace.f_final]
        assert all(b <= a for a, b in zip(fs, fs[1:]))

    def test_record_bookkeeping(self):
        obj = spec("quadratic", n=6).make_objective()
        trace = solve(obj, np.ones(6))
        assert [r.k for r in trace.records] == list(range(1, trace.iters + 1))
        oracle_path = [r.oracles for r in trace.records]
        assert all(b >= a for a, b in zip(oracle_path, oracle_path[1:]))
        assert trace.oracles == obj.oracle_count
        assert trace.records[0].f == 3.0      # f at the start point, 0.5 * 6

    def test_x0_validation(self):
        obj = spec("quadratic", n=4).make_objective()
        with pytest.raises(ValueError, match="size"):
            solve(obj, np.ones(3))

    def test_exact_mode_needs_hvp(self):
        obj = Objective(2, lambda x: 0.5 * float(x @ x), lambda x: x.copy())
        with pytest.raises(NoHessianOracle):
            solve(obj, np.ones(2))


class TestTerminationStatuses:
    def test_budget(self):
        obj = spec("rosenbrock", n=10).make_objective()
        trace = solve(obj, np.zeros(10), SolverConfig(max_oracles=2.5))
        assert trace.status == BUDGET
        assert trace.iters == 1
        # overshoot is bounded by one iteration's work
        assert trace.oracles <= 2.5 + trace.records[0].oracles

    def test_stagnated_on_false_descent_claim(self):
        # gradient oracle promises descent that the (constant) function
        # never delivers; with f = 0 the rounding pad is zero as well
        obj = Objective(2, lambda x: 0.0, lambda x: np.ones(2),
                        lambda x, v: v.copy())
        trace = solve(obj, np.zeros(2))
        assert trace.status == STAGNATED
        assert trace.iters == 0

    def test_diverged_on_nonfinite_gradient(self):
        calls = [0]
        def grad(x):
            calls[0] += 1
            return x.copy() if calls[0] == 1 else np.full(2, np.nan)
        obj = Objective(2, lambda x: 0.5 * float(x @ x), grad,
                        lambda x, v: v.copy())
        trace = solve(obj, np.array([3.0, 4.0]))
        assert trace.status == DIVERGED
        assert trace.iters == 1                     # last valid record kept
        assert math.isfinite(trace.records[0].f)

    def test_diverged_on_nonfinite_f0(self):
        obj = Objective(1, lambda x: float(np.nan), lambda x: np.ones(1),
                        lambda x, v: v.copy())
        trace = solve(obj, np.ones(1))
        assert trace.status == DIVERGED
        assert trace.records == []

    def test_inner_breakdown_is_divergence(self):
        # Hessian oracle emits NaN: the Lanczos recurrence cannot continue
        obj = Objective(2, lambda x: 0.5 * float(x @ x), lambda x: x.copy(),
                        lambda x, v: np.full(2, np.nan))
        trace = solve(obj, np.ones(2))
        assert trace.status == DIVERGED


class TestDirectionDispatch:
    def test_gd_fallback_on_degenerate_model(self, monkeypatch):
        from minresls.core import DegenerateMiddleMatrix

        def broken_apply(self, v):
            raise DegenerateMiddleMatrix("forced")

        monkeypatch.setattr(LbfgsStore, "apply", broken_apply)
        obj = spec("quadratic", n=4).make_objective()
        trace = solve(obj, np.ones(4), SolverConfig(hessian="lbfgs"))
        assert trace.status == CONVERGED
        assert all(r.flag == GD for r in trace.records)
        assert all(r.inner_iters == 0 for r in trace.records)

    def test_basic_screen_demotes_flat_directions(self):
        # raise the curvature floor so the threshold tracks a_k ||g||: the
        # Rayleigh quotient of the returned direction (about 1 here) cannot
        # clear it while the gradient is large, so every step demotes to GD
        sp = ScheduleParams(curvature_floor=1e8)
        obj = spec("quadratic", spectrum=(1e-8, 1.0)).make_objective()
        cfg = SolverConfig(schedule=sp, curvature_test="basic", max_oracles=30)
        trace = solve(obj, np.full(2, 100.0), cfg)
        assert trace.status == BUDGET
        assert trace.records
        assert all(r.flag == GD for r in trace.records)

    def test_npc_steps_on_saddle_problem(self):
        problem = spec("quartic_saddle", n=4)
        obj = problem.make_objective()
        x0 = problem.start(np.random.default_rng(5))
        trace = solve(obj, x0, SolverConfig(check_invariants=True))
        assert trace.status == CONVERGED
        npc_records = [r for r in trace.records if r.flag == NPC]
        assert npc_records
        # near the saddle the curvature search should push past unit steps
        assert any(r.step > 1.0 for r in npc_records)

    def test_lbfgs_inner_iterations_bounded_by_memory(self):
        memory = 10
        obj = spec("rosenbrock", n=20).make_objective()
        cfg = SolverConfig(hessian="lbfgs", lbfgs_memory=memory,
                           max_oracles=1e5, grad_tol=1e-9)
        trace = solve(obj, np.full(20, 0.5), cfg)
        assert trace.status == CONVERGED
        # B has identity-plus-rank-2m structure: Krylov spaces stop growing
        assert max(r.inner_iters for r in trace.records) <= 2 * memory + 2

    def test_invariants_hold_across_modes(self):
        for name, kwargs, hessian in [
            ("toy_sine", {"n": 8}, "exact"),
            ("rosenbrock", {"n": 8}, "exact"),
            ("toy_sine", {"n": 8}, "lbfgs"),
        ]:
            problem = spec(name, **kwargs)
            obj = problem.make_objective()
            x0 = problem.start(np.random.default_rng(3))
            cfg = SolverConfig(hessian=hessian, check_invariants=True,
                               max_oracles=1e5)
            trace = solve(obj, x0, cfg)
            assert trace.status in (CONVERGED, BUDGET), (name, hessian)

    def test_invariant_checks_do_not_bill_oracles(self):
        problem = spec("toy_sine", n=6)
        x0 = problem.start(np.random.default_rng(1))
        plain = solve(problem.make_objective(), x0, SolverConfig())
        checked = solve(problem.make_objective(), x0,
                        SolverConfig(check_invariants=True))
        assert plain.oracles == checked.oracles
        assert plain.f_final == checked.f_final
