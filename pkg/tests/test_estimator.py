import numpy as np
import pytest
from sklearn.base import clone

from pathval.errors import OutOfRangeError, SizeMismatchError
from pathval.estimator import ChanceConstrainedPathSelector
from pathval.instances import draw_samples, generate_canonical_instance
from pathval.numerics import RngStream


@pytest.fixture(scope="module")
def instance_and_data():
    inst = generate_canonical_instance(4, 17)
    X = draw_samples(inst, 120, RngStream(23, 0)).rows
    return inst, X


def make_estimator(inst, **overrides):
    params = dict(
        c=inst.c, b=inst.b, alpha=inst.alpha, beta=0.05,
        method="ro", rule="univariate", mc_budget=10_000, random_state=1,
    )
    params.update(overrides)
    return ChanceConstrainedPathSelector(**params)


class TestSklearnContract:
    def test_get_params_round_trip(self, instance_and_data):
        inst, _ = instance_and_data
        est = make_estimator(inst)
        params = est.get_params()
        rebuilt = ChanceConstrainedPathSelector(**params)
        assert rebuilt.get_params().keys() == params.keys()
        assert rebuilt.alpha == est.alpha

    def test_clone_preserves_params(self, instance_and_data):
        inst, _ = instance_and_data
        est = make_estimator(inst, rule="plain")
        cloned = clone(est)
        assert cloned.rule == "plain"
        assert not hasattr(cloned, "report_")

    def test_set_params(self, instance_and_data):
        inst, _ = instance_and_data
        est = make_estimator(inst)
        est.set_params(rule="norm_gs", mc_budget=20_000)
        assert est.rule == "norm_gs"


class TestFit:
    def test_sets_fitted_attributes(self, instance_and_data):
        inst, X = instance_and_data
        est = make_estimator(inst).fit(X)
        assert est.n_features_in_ == 4
        assert est.solution_ is not None
        assert est.objective_ == pytest.approx(float(inst.c @ est.solution_), abs=1e-12)
        assert est.report_.rule == "univariate"
        assert len(est.path_.candidates) == 50

    def test_deterministic_given_random_state(self, instance_and_data):
        inst, X = instance_and_data
        a = make_estimator(inst, rule="norm_gs").fit(X)
        b = make_estimator(inst, rule="norm_gs").fit(X)
        assert np.array_equal(a.solution_, b.solution_)
        assert a.report_.q == b.report_.q

    def test_requires_objective_vector(self, instance_and_data):
        _, X = instance_and_data
        est = ChanceConstrainedPathSelector()
        with pytest.raises(OutOfRangeError, match="required"):
            est.fit(X)

    def test_rejects_mismatched_c(self, instance_and_data):
        _, X = instance_and_data
        est = ChanceConstrainedPathSelector(c=np.ones(3))
        with pytest.raises(SizeMismatchError):
            est.fit(X)

    def test_rejects_one_dimensional_input(self, instance_and_data):
        inst, _ = instance_and_data
        with pytest.raises(SizeMismatchError):
            make_estimator(inst).fit(np.zeros(10))

    def test_matches_manual_pipeline(self, instance_and_data):
        from pathval.reformulations import build_path
        from pathval.validators import MarginRule, evaluate_h_matrix, select_candidate

        inst, X = instance_and_data
        est = make_estimator(inst).fit(X)
        n2 = 60
        path = build_path("ro", X[n2:], inst.c, inst.b, inst.alpha, 0.05)
        hmat = evaluate_h_matrix(path, X[:n2], inst.b)
        report = select_candidate(path, hmat, inst.gamma, MarginRule("univariate", 0.05))
        assert est.s_star_ == report.s_star
        assert est.objective_ == report.objective


class TestPredictScore:
    def test_predict_binary_indicators(self, instance_and_data):
        inst, X = instance_and_data
        est = make_estimator(inst).fit(X)
        fresh = draw_samples(inst, 500, RngStream(99, 0)).rows
        preds = est.predict(fresh)
        assert preds.dtype == np.uint8
        assert set(np.unique(preds)) <= {0, 1}
        assert est.score(fresh) == pytest.approx(preds.mean())

    def test_score_near_oracle_probability(self, instance_and_data):
        inst, X = instance_and_data
        est = make_estimator(inst).fit(X)
        exact = inst.true_satisfaction_probability(est.solution_)
        fresh = draw_samples(inst, 20_000, RngStream(7, 0)).rows
        assert est.score(fresh) == pytest.approx(exact, abs=0.02)

    def test_unfitted_predict_raises(self, instance_and_data):
        inst, X = instance_and_data
        with pytest.raises(OutOfRangeError, match="not fitted"):
            make_estimator(inst).predict(X)

    def test_none_feasible_predict_raises(self, instance_and_data):
        inst, X = instance_and_data
        # a single-scenario path lands on the guard box and fails validation
        est = make_estimator(inst, method="so", rule="plain", grid_size=1).fit(X)
        assert est.solution_ is None
        assert np.isnan(est.objective_)
        with pytest.raises(OutOfRangeError, match="no candidate"):
            est.predict(X)
