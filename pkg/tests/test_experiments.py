import json
import math

import numpy as np
import pytest

from auxref.experiments import (
    BenchSpec,
    TrainSpec,
    run_bench,
    run_training,
    run_verification,
)
from auxref.reflection import AuxReflection
from auxref.rng import SeededRng


class TestBench:
    def test_spec_validation(self):
        with pytest.raises(ValueError):
            BenchSpec(d=2, k=1, batch=1, reps=2)
        with pytest.raises(ValueError):
            BenchSpec(d=1, k=1, batch=1, reps=3)
        with pytest.raises(ValueError):
            BenchSpec(d=2, k=0, batch=1, reps=3)
        with pytest.raises(ValueError):
            BenchSpec(d=2, k=1, batch=0, reps=3)

    def test_smoke_smallest_problem(self):
        records = run_bench(BenchSpec(d=2, k=1, batch=1, reps=3, warmup=1))
        assert [r.method for r in records] == ["chain", "auxiliary"]
        c, a = records
        assert abs(c.checksum - a.checksum) <= 1e-6 * max(abs(c.checksum), abs(a.checksum))

    def test_checksums_agree_at_moderate_scale(self):
        records = run_bench(BenchSpec(d=64, k=64, batch=256, reps=3, warmup=1))
        c, a = records
        assert abs(c.checksum - a.checksum) <= 1e-6 * abs(c.checksum)
        for r in records:
            assert r.mean_ms > 0.0
            assert r.std_ms >= 0.0
            assert r.reps == 3 and r.threads == 1

    def test_checksum_deterministic_across_runs(self):
        spec = BenchSpec(d=16, k=8, batch=32, reps=3, warmup=0, seed=5)
        first = run_bench(spec)
        second = run_bench(spec)
        assert [r.checksum for r in first] == [r.checksum for r in second]


class TestTraining:
    def test_spec_validation(self):
        with pytest.raises(ValueError):
            TrainSpec(d=8, steps=0, lr=0.1, batch=4)
        with pytest.raises(ValueError):
            TrainSpec(d=8, steps=1, lr=-0.1, batch=4)

    def test_zero_learning_rate_freezes_final_row(self):
        trace = run_training(TrainSpec(d=4, steps=1, lr=0.0, batch=8, seed=3))
        assert len(trace.rows) == 2
        assert trace.rows[0][1] == trace.rows[1][1]
        assert trace.rows[0][2] == trace.rows[1][2]

    def test_solved_initialization_is_stationary(self):
        # f with W = I negates the input, so the target U = -I is solved at
        # initialization; the gradient vanishes and one step changes nothing.
        trace = run_training(TrainSpec(d=4, steps=1, lr=0.5, batch=16, seed=1),
                             init_w=np.eye(4), target_u=-np.eye(4))
        step0, step1 = trace.rows
        assert step0[1] <= 1e-24
        assert step0[2] <= 1e-12
        assert abs(step1[1] - step0[1]) <= 1e-12

    def test_loss_decreases_on_default_problem(self):
        trace = run_training(TrainSpec(d=8, steps=200, lr=0.1, batch=64, seed=0,
                                       target_k=8))
        assert len(trace.rows) == 201
        assert trace.rows[-1][1] < 1e-3 * trace.rows[0][1]

    @pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
    def test_trace_is_finite(self, seed):
        trace = run_training(TrainSpec(d=6, steps=40, lr=0.1, batch=16, seed=seed,
                                       target_k=6))
        assert all(math.isfinite(loss) and math.isfinite(g)
                   for _, loss, g in trace.rows)

    def test_divergence_reports_nan_row(self):
        trace = run_training(TrainSpec(d=4, steps=5, lr=1e308, batch=8, seed=0,
                                       target_k=4))
        assert math.isnan(trace.rows[-1][1])
        assert trace.rows[-1][0] < 5

    def test_first_step_gradient_matches_finite_differences(self):
        # Reconstruct the exact first batch and initial weights, then compare
        # the accumulated layer gradient with entrywise differences of the
        # same loss.
        d, batch = 4, 6
        rng = SeededRng(11)
        chain_vs = [rng.standard_normal(d) for _ in range(d)]
        from auxref.householder import ReflectionChain, chain_apply_batch
        target = chain_apply_batch(ReflectionChain(d, chain_vs), np.eye(d))
        g = rng.standard_normal((d, d))
        w0 = np.eye(d) + 0.1 * 0.5 * (g + g.T)
        x = rng.standard_normal((d, batch))

        def loss_for(w):
            f = AuxReflection(w).forward_batch(x)
            return 0.5 * float(np.sum((f - target @ x) ** 2)) / batch

        layer = AuxReflection(w0)
        diff = layer.forward_batch(x) - target @ x
        grad = np.zeros((d, d))
        for j in range(batch):
            grad += layer.vjp_w(x[:, j], diff[:, j] / batch)

        grad_fd = np.zeros((d, d))
        for i in range(d):
            for j in range(d):
                h = 1e-5 * max(1.0, abs(w0[i, j]))
                bump = np.zeros((d, d))
                bump[i, j] = h
                grad_fd[i, j] = (loss_for(w0 + bump) - loss_for(w0 - bump)) / (2 * h)
        assert np.max(np.abs(grad - grad_fd)) <= 1e-5

        trace = run_training(TrainSpec(d=d, steps=1, lr=0.1, batch=batch, seed=11))
        assert trace.rows[0][2] == pytest.approx(float(np.linalg.norm(grad)), rel=1e-12)


class TestVerificationRunner:
    def test_unknown_suite_rejected(self):
        with pytest.raises(ValueError, match="unknown suite"):
            run_verification("nosuch")

    def test_argument_validation(self):
        with pytest.raises(ValueError):
            run_verification("thm1", d_list=())
        with pytest.raises(ValueError):
            run_verification("thm1", d_list=(1,))
        with pytest.raises(ValueError):
            run_verification("thm1", trials=0)

    def test_representation_suite_passes(self):
        report = run_verification("thm1", d_list=(8,), trials=10, seed=1)
        assert report.passed
        assert [c.name for c in report.checks] == ["representation_identity"]
        assert report.checks[0].max_error <= 1e-10

    def test_jacobian_suite_passes(self):
        report = run_verification("jacobian", d_list=(2, 4, 8), trials=20, seed=2)
        assert report.passed
        assert report.checks[0].max_error <= 1e-6

    def test_newton_suite_passes(self):
        report = run_verification("newton", d_list=(4,), trials=20, seed=3)
        assert report.passed
        assert report.checks[0].max_error <= 1e-7

    def test_all_suite_passes(self):
        report = run_verification("all", d_list=(2, 4), trials=10, seed=4)
        assert report.passed
        assert len(report.checks) == 12

    def test_reports_are_byte_identical(self):
        a = run_verification("all", d_list=(2, 4), trials=5, seed=9)
        b = run_verification("all", d_list=(2, 4), trials=5, seed=9)
        assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())

    def test_tolerance_override_can_fail_a_check(self):
        report = run_verification("thm1", d_list=(4,), trials=5, seed=1,
                                  tol_overrides={"representation_identity": 1e-300})
        assert not report.passed

    def test_report_dict_shape(self):
        report = run_verification("thm1", d_list=(4,), trials=5, seed=1)
        d = report.to_dict()
        assert d["schema"] == 1
        assert d["suite"] == "thm1"
        assert isinstance(d["checks"], list)
        assert set(d["checks"][0]) == {"name", "pass", "max_error", "tol"}
        assert d["passed"] is True
