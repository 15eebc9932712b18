import math

import numpy as np
import pytest

from nonlocality_wb.hardy import check, original_hardy, realigned_hardy
from nonlocality_wb.qubit import (
    OptimizerConfig,
    QubitModel,
    _PenaltyProblem,
    behavior_of_model,
    behavior_of_model_trace,
    maximize_hardy,
    observable,
    refine_from,
    state_vector,
)
from nonlocality_wb.scenario import ValidationError, as_inequality, evaluate
from conftest import REFERENCE_MODEL_2, REFERENCE_MODEL_4


def random_model(rng, n):
    return QubitModel(
        rng.uniform(-math.pi, math.pi),
        tuple(rng.uniform(-math.pi, math.pi, n)),
        tuple(rng.uniform(-math.pi, math.pi, n)),
    )


class TestQubitModel:
    def test_wraps_angles(self):
        m = QubitModel(3 * math.pi, (5 * math.pi / 2,), (-5 * math.pi / 2,))
        assert m.theta == pytest.approx(-math.pi)
        assert m.alpha[0] == pytest.approx(math.pi / 2)
        assert m.beta[0] == pytest.approx(-math.pi / 2)

    def test_vector_round_trip(self):
        m = REFERENCE_MODEL_4
        m2 = QubitModel.from_vector(m.as_vector())
        assert m2 == m

    def test_length_mismatch(self):
        with pytest.raises(ValidationError):
            QubitModel(0.0, (0.0,), (0.0, 0.0))

    def test_observable_is_reflection(self):
        a = observable(0.3)
        np.testing.assert_allclose(a @ a, np.eye(2), atol=1e-15)
        assert np.trace(a) == pytest.approx(0.0, abs=1e-15)

    def test_state_vector_normalized(self):
        v = state_vector(0.7968)
        assert v @ v == pytest.approx(1.0)


class TestBehaviorOfModel:
    def test_product_state_aligned(self):
        # |00> measured along z everywhere: outcome (0, 0) is certain
        b = behavior_of_model(QubitModel(0.0, (0.0, 0.0), (0.0, 0.0)))
        assert np.all(b.p[:, :, 0, 0] == pytest.approx(1.0))

    def test_maximally_entangled_matching_measurement(self):
        b = behavior_of_model(QubitModel(math.pi / 4, (0.0, 0.0), (0.0, 0.0)))
        assert b.prob(0, 0, 1, 1) == pytest.approx(0.5, abs=1e-12)
        assert b.prob(1, 1, 1, 1) == pytest.approx(0.5, abs=1e-12)
        assert b.prob(0, 1, 1, 1) == pytest.approx(0.0, abs=1e-12)
        assert b.prob(1, 0, 1, 1) == pytest.approx(0.0, abs=1e-12)

    def test_reference_model_2(self):
        result = check(realigned_hardy(2), behavior_of_model(REFERENCE_MODEL_2), tol=2e-3)
        assert result.conditions_met
        assert result.hardy_value == pytest.approx(0.4140, abs=1e-3)

    def test_reference_model_4(self):
        result = check(realigned_hardy(4), behavior_of_model(REFERENCE_MODEL_4), tol=2e-3)
        assert result.conditions_met
        assert result.hardy_value == pytest.approx(0.7734, abs=1e-3)

    def test_expression_value_on_reference_model_4(self):
        value = evaluate(as_inequality(4), behavior_of_model(REFERENCE_MODEL_4))
        assert value == pytest.approx(10.0 + 0.7734, abs=1e-3)

    def test_closed_form_matches_trace_formula(self):
        rng = np.random.default_rng(3)
        for _ in range(60):
            m = random_model(rng, int(rng.choice([2, 4])))
            np.testing.assert_allclose(
                behavior_of_model(m).p, behavior_of_model_trace(m).p, atol=1e-12
            )

    def test_normalized_and_no_signaling(self):
        rng = np.random.default_rng(4)
        for _ in range(200):
            p = behavior_of_model(random_model(rng, 4)).p
            np.testing.assert_allclose(p.sum(axis=(2, 3)), 1.0, atol=1e-12)
            marg_a = p.sum(axis=3)
            marg_b = p.sum(axis=2)
            assert np.abs(marg_a - marg_a[:, :1, :]).max() <= 1e-12
            assert np.abs(marg_b - marg_b[:1, :, :]).max() <= 1e-12


class TestGradients:
    @pytest.mark.parametrize("n", [2, 4])
    def test_matches_central_differences(self, n):
        problem = _PenaltyProblem(realigned_hardy(n))
        rng = np.random.default_rng(5)
        step = 1e-6
        for _ in range(5):
            x = rng.uniform(-math.pi, math.pi, 1 + 2 * n)
            hardy, hardy_grad, _, cond_grads = problem.components(x)
            for k in range(len(x)):
                xp, xm = x.copy(), x.copy()
                xp[k] += step
                xm[k] -= step
                hp, _, rp, _ = problem.components(xp)
                hm, _, rm, _ = problem.components(xm)
                fd_h = (hp - hm) / (2 * step)
                fd_c = (rp[0] - rm[0]) / (2 * step)
                assert fd_h == pytest.approx(hardy_grad[k], abs=1e-4 * (1 + abs(hardy_grad[k])))
                assert fd_c == pytest.approx(
                    cond_grads[0][k], abs=1e-4 * (1 + abs(cond_grads[0][k]))
                )


class TestOptimizerConfig:
    def test_defaults(self):
        cfg = OptimizerConfig()
        assert cfg.restarts == 200
        assert cfg.seed == 42
        assert cfg.constraint_tol == 1e-6
        assert cfg.penalty_start == 10.0
        assert cfg.penalty_growth == 10.0
        assert cfg.penalty_stages == 6

    def test_default_restart_budget_scales(self):
        assert OptimizerConfig.default_for(realigned_hardy(2)).restarts == 200
        assert OptimizerConfig.default_for(original_hardy()).restarts == 200
        assert OptimizerConfig.default_for(realigned_hardy(4)).restarts == 500

    def test_json_round_trip(self):
        cfg = OptimizerConfig(restarts=7, seed=9, inner_iters=33)
        assert OptimizerConfig.from_json_dict(cfg.to_json_dict()) == cfg

    def test_unknown_key_rejected(self):
        with pytest.raises(ValidationError):
            OptimizerConfig.from_json_dict({"restartz": 3})

    def test_invalid_values_rejected(self):
        with pytest.raises(ValidationError):
            OptimizerConfig(restarts=0)
        with pytest.raises(ValidationError):
            OptimizerConfig(penalty_growth=1.0)


class TestMaximizeHardy:
    def test_realigned_2(self):
        result = maximize_hardy(realigned_hardy(2), OptimizerConfig(restarts=40))
        assert result.converged
        assert 0.4135 <= result.hardy_value <= 0.4143
        assert max(abs(r) for r in result.condition_residuals) <= 1e-6
        assert result.restarts_used == 40

    def test_realigned_4(self):
        result = maximize_hardy(realigned_hardy(4), OptimizerConfig(restarts=60))
        assert result.converged
        assert 0.7700 <= result.hardy_value <= 0.7740

    def test_original(self):
        result = maximize_hardy(original_hardy(), OptimizerConfig(restarts=40))
        assert result.converged
        assert 0.0896 <= result.hardy_value <= 0.0903

    def test_deterministic_for_fixed_seed(self):
        cfg = OptimizerConfig(restarts=8, seed=123)
        r1 = maximize_hardy(realigned_hardy(2), cfg)
        r2 = maximize_hardy(realigned_hardy(2), cfg)
        assert r1.hardy_value == r2.hardy_value
        assert r1.model == r2.model

    def test_thread_count_does_not_change_result(self):
        cfg = OptimizerConfig(restarts=8, seed=123)
        r1 = maximize_hardy(realigned_hardy(2), cfg, threads=1)
        r2 = maximize_hardy(realigned_hardy(2), cfg, threads=3)
        assert r1.hardy_value == r2.hardy_value
        assert r1.model == r2.model

    def test_result_json(self):
        result = maximize_hardy(realigned_hardy(2), OptimizerConfig(restarts=4))
        doc = result.to_json_dict()
        assert doc["kind"] == "optimization_result"
        assert len(doc["model"]["alpha"]) == 2
        assert isinstance(doc["converged"], bool)

    def test_weak_penalty_reports_nonconvergence(self):
        cfg = OptimizerConfig(
            restarts=2, penalty_start=1e-3, penalty_growth=1.5, penalty_stages=1
        )
        result = maximize_hardy(realigned_hardy(2), cfg)
        assert not result.converged
        assert max(abs(r) for r in result.condition_residuals) > cfg.constraint_tol


class TestRefineFrom:
    def test_reference_model_2_is_near_optimal(self):
        result = refine_from(realigned_hardy(2), REFERENCE_MODEL_2)
        assert result.converged
        assert result.hardy_value == pytest.approx(0.4140, abs=1e-4)

    def test_reference_model_4_is_near_optimal(self):
        result = refine_from(realigned_hardy(4), REFERENCE_MODEL_4)
        assert result.converged
        assert result.hardy_value == pytest.approx(0.7734, abs=1e-3)

    def test_stationarity_at_refined_point(self):
        # first-order condition: grad(hardy) parallel to grad(condition)
        paradox = realigned_hardy(2)
        result = refine_from(paradox, REFERENCE_MODEL_2)
        problem = _PenaltyProblem(paradox)
        _, hardy_grad, _, cond_grads = problem.components(result.model.as_vector())
        g, c = hardy_grad, cond_grads[0]
        lam = float(g @ c) / float(c @ c)
        projected = g - lam * c
        assert np.linalg.norm(projected) <= 1e-4 * (1.0 + np.linalg.norm(g))

    def test_monotone_from_feasible_start(self):
        # deterministic feasible point: condition exactly 3, Hardy value 0
        start = QubitModel(0.0, (0.0, math.pi / 2), (math.pi / 2, 0.0))
        paradox = realigned_hardy(2)
        assert check(paradox, behavior_of_model(start), tol=1e-12).conditions_met
        result = refine_from(paradox, start)
        assert result.converged
        assert result.hardy_value >= -1e-9

    def test_scenario_mismatch(self):
        with pytest.raises(ValidationError):
            refine_from(realigned_hardy(4), REFERENCE_MODEL_2)
