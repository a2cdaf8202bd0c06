import numpy as np
import pytest

from recourse.data import Feature, FeatureSchema, FeatureSpace
from recourse.distances import DistanceSpec, FeatureStats, distance
from recourse.model import MlpModel, init_model
from recourse.search import (
    CfQuery,
    Counterfactual,
    NotConverged,
    SearchConfigError,
    dependence_flags,
    objective,
    solve_best,
    solve_clamped,
    solve_diverse,
    solve_single,
)

SQ_L2 = DistanceSpec("unnormalized_sq_euclidean")


def linear_model(row, bias=0.0):
    w = np.asarray(row, dtype=float).reshape(-1, 1)
    return MlpModel((w.shape[0], 1), [w], [np.array([bias])])


def abs_x1_model():
    # |x1| = relu(x1) + relu(-x1); flat in x2
    w1 = np.array([[1.0, -1.0], [0.0, 0.0]])
    w2 = np.array([[1.0], [1.0]])
    return MlpModel((2, 2, 1), [w1, w2], [np.zeros(2), np.zeros(1)],
                    hidden_activation="relu")


def two_feature_space():
    schema = FeatureSchema(
        [Feature("x1"), Feature("b", "categorical", categories=["no", "yes"])],
        target_name="t",
    )
    stats = FeatureStats(median=[0, 0], mad=[1, 1], std=[1, 1],
                         min=[-10, 0], max=[10, 1], fitted_on=4)
    return FeatureSpace(n_features=2, schema=schema, stats=stats), stats


class TestObjective:
    def test_zero_at_satisfied_origin(self):
        m = linear_model([1.0, 0.0])
        q = CfQuery(x_original=[2.0, 5.0], target_score=2.0, distance=SQ_L2)
        assert objective(m, [2.0, 5.0], q, lam=3.0) == 0.0

    def test_linear_case(self):
        m = linear_model([1.0, 0.0])
        q = CfQuery(x_original=[0.0, 0.0], target_score=0.0, distance=SQ_L2)
        # lambda * (1 - 0)^2 + squared distance 1
        assert objective(m, [1.0, 0.0], q, lam=2.0) == pytest.approx(3.0)

    def test_lambda_zero_is_pure_distance(self):
        m = linear_model([1.0, 0.0])
        q = CfQuery(x_original=[0.0, 0.0], target_score=9.0, distance=SQ_L2)
        d = objective(m, [0.3, 0.4], q, lam=0.0)
        assert d == pytest.approx(distance(SQ_L2, [0.0, 0.0], [0.3, 0.4]))


class TestSolveSingle:
    def test_reaches_half_on_first_axis(self):
        m = linear_model([1.0, 0.0])
        q = CfQuery(x_original=[0.0, 0.0], target_score=0.5, distance=SQ_L2)
        r = solve_single(m, q)
        assert r.converged
        assert r.x_prime[0] == pytest.approx(0.5, abs=0.011)
        assert r.x_prime[1] == pytest.approx(0.0, abs=1e-6)
        assert r.distance_value == pytest.approx(0.25, abs=0.011)

    def test_grid_oracle_agreement(self):
        m = linear_model([1.0, 0.0])
        q = CfQuery(x_original=[0.0, 0.0], target_score=0.5, distance=SQ_L2)
        r = solve_single(m, q)
        g = np.arange(-1.0, 1.0 + 1e-9, 0.01)
        gx, gy = np.meshgrid(g, g)
        pts = np.column_stack([gx.ravel(), gy.ravel()])
        feasible = np.abs(m.forward(pts) - 0.5) <= q.tolerance_eps
        d_grid = np.min(np.sum(pts[feasible] ** 2, axis=1))
        h = 0.01
        margin = float(np.sum((np.abs(r.x_prime) + h) ** 2 - r.x_prime**2))
        assert r.distance_value <= d_grid + margin

    def test_target_already_met_returns_original(self):
        m = linear_model([1.0, 1.0])
        q = CfQuery(x_original=[0.3, 0.4], target_score=0.7, distance=SQ_L2)
        r = solve_single(m, q)
        assert r.converged
        assert np.allclose(r.x_prime, [0.3, 0.4])
        assert r.distance_value == 0.0
        assert r.changed == []

    def test_symmetric_minimum_split_between_features(self):
        m = linear_model([1.0, 1.0])
        q = CfQuery(x_original=[0.0, 0.0], target_score=1.0, distance=SQ_L2)
        r = solve_single(m, q)
        assert r.converged
        assert r.x_prime[0] == pytest.approx(0.5, abs=0.02)
        assert r.x_prime[1] == pytest.approx(0.5, abs=0.02)

    def test_tolerance_holds_under_reevaluation(self):
        rng = np.random.default_rng(0)
        for seed in range(5):
            m = init_model((2, 6, 1), seed=seed)
            x_i = rng.normal(0, 1, 2)
            target = m.forward(x_i) + 0.4
            q = CfQuery(x_original=x_i, target_score=target, distance=SQ_L2,
                        rng_seed=seed)
            r = solve_best(m, q)
            if r.converged:
                assert abs(m.forward(r.x_prime) - target) <= q.tolerance_eps

    def test_not_converged_reports_best_effort(self):
        # a sigmoid head cannot hit a target this tight against saturation
        m = MlpModel((1, 1), [np.array([[1.0]])], [np.array([0.0])],
                     output_head="sigmoid_probability")
        q = CfQuery(x_original=[0.0], target_score=0.999999999, distance=SQ_L2,
                    tolerance_eps=1e-12)
        r = solve_single(m, q)
        assert isinstance(r, NotConverged)
        assert not r.converged
        assert "rounds" in r.message or r.rounds > 0
        assert np.isfinite(r.achieved_score)

    def test_locked_feature_never_moves(self):
        m = linear_model([1.0, 1.0])
        space = FeatureSpace(
            n_features=2,
            schema=FeatureSchema([Feature("a"), Feature("b")], target_name="t"),
        )
        q = CfQuery(x_original=[0.0, 0.0], target_score=1.0, distance=SQ_L2,
                    locked_features={"b"})
        r = solve_best(m, q, space)
        assert r.converged
        assert r.x_prime[1] == 0.0
        assert r.x_prime[0] == pytest.approx(1.0, abs=0.02)

    def test_unknown_locked_feature_rejected(self):
        m = linear_model([1.0, 1.0])
        q = CfQuery(x_original=[0.0, 0.0], target_score=1.0, distance=SQ_L2,
                    locked_features={"nope"})
        with pytest.raises(SearchConfigError):
            solve_single(m, q)

    def test_lambda_schedule_monotone(self):
        m = init_model((2, 8, 1), seed=4)
        box = np.random.default_rng(1).uniform(-2, 2, (500, 2))
        target = float(np.quantile(m.forward(box), 0.9))
        q = CfQuery(x_original=[0.0, 0.0], target_score=target, distance=SQ_L2)
        r = solve_best(m, q)
        lam = r.diagnostics["final_lambda"]
        assert lam >= q.schedule.lambda_init


class TestCapping:
    def test_result_within_training_range(self, lsat_bundle):
        b = lsat_bundle
        spec = DistanceSpec("mad_weighted_l1", stats=b.train_ds.stats)
        for row in b.eval_X[:5]:
            q = CfQuery(x_original=row, target_score=0.0, distance=spec,
                        cap_to_training_range=True)
            r = solve_best(b.model, q, b.space)
            if r.converged:
                assert np.all(r.x_prime >= b.train_ds.stats.min - 1e-9)
                assert np.all(r.x_prime <= b.train_ds.stats.max + 1e-9)

    def test_capping_requires_stats(self):
        m = linear_model([1.0, 0.0])
        q = CfQuery(x_original=[0.0, 0.0], target_score=0.5, distance=SQ_L2,
                    cap_to_training_range=True)
        with pytest.raises(SearchConfigError):
            solve_single(m, q)


class TestSolveClamped:
    def test_closest_assignment_wins(self):
        space, stats = two_feature_space()
        m = linear_model([0.1, 0.6])
        q = CfQuery(x_original=[0.0, 0.0], target_score=0.6,
                    distance=DistanceSpec("mad_weighted_l1", stats=stats))
        r = solve_clamped(m, q, space)
        assert r.converged
        assert r.clamp_assignment == {"b": 1}
        assert r.x_prime[1] == 1.0
        assert r.distance_value == pytest.approx(1.0, abs=0.02)
        assert r.x_prime[0] == pytest.approx(0.0, abs=1e-9)

    def test_locked_categorical_single_run(self):
        space, stats = two_feature_space()
        m = linear_model([0.1, 0.6])
        q = CfQuery(x_original=[0.0, 0.0], target_score=0.6,
                    distance=DistanceSpec("mad_weighted_l1", stats=stats),
                    locked_features={"b"})
        r = solve_clamped(m, q, space)
        assert r.converged
        assert r.x_prime[1] == 0.0
        assert r.clamp_assignment == {}
        assert r.x_prime[0] == pytest.approx(6.0, abs=0.15)

    def test_codes_never_fractional(self, lsat_bundle):
        b = lsat_bundle
        spec = DistanceSpec("mad_weighted_l1", stats=b.train_ds.stats)
        for row in b.eval_X[:5]:
            q = CfQuery(x_original=row, target_score=0.0, distance=spec)
            r = solve_clamped(b.model, q, b.space)
            if r.converged:
                assert r.x_prime[2] in (0.0, 1.0)

    def test_argmin_consistency(self):
        # the clamped winner must equal the best per-assignment run
        space, stats = two_feature_space()
        m = linear_model([0.1, 0.6])
        q = CfQuery(x_original=[0.0, 0.0], target_score=0.6,
                    distance=DistanceSpec("mad_weighted_l1", stats=stats))
        winner = solve_clamped(m, q, space)
        per_assignment = []
        for code in (0, 1):
            pin_q = CfQuery(x_original=[0.0, float(code)], target_score=0.6,
                            distance=DistanceSpec("mad_weighted_l1", stats=stats),
                            locked_features={"b"})
            r = solve_best(m, pin_q, space)
            if r.converged:
                d = distance(q.distance, np.array([0.0, 0.0]), r.x_prime)
                per_assignment.append(d)
        assert winner.distance_value == pytest.approx(min(per_assignment), abs=0.02)

    def test_combination_guard(self):
        feats = [Feature(f"c{i}", "categorical", categories=["a", "b", "c"])
                 for i in range(4)]
        schema = FeatureSchema(feats, target_name="t")
        stats = FeatureStats(median=[0] * 4, mad=[1] * 4, std=[1] * 4,
                             min=[0] * 4, max=[2] * 4, fitted_on=3)
        space = FeatureSpace(n_features=4, schema=schema, stats=stats)
        m = linear_model([0.1, 0.1, 0.1, 0.1])
        q = CfQuery(x_original=[0.0] * 4, target_score=0.3,
                    distance=DistanceSpec("mad_weighted_l1", stats=stats))
        with pytest.raises(SearchConfigError, match="combinations"):
            solve_clamped(m, q, space)  # 3^4 = 81 > 32


class TestSolveDiverse:
    def test_finds_both_symmetric_minima(self):
        m = abs_x1_model()
        q = CfQuery(x_original=[0.0, 0.0], target_score=1.0, distance=SQ_L2,
                    n_restarts=8, n_diverse=4, rng_seed=1)
        rs = solve_diverse(m, q)
        assert isinstance(rs, list)
        signs = {np.sign(r.x_prime[0]) for r in rs}
        assert signs == {-1.0, 1.0}

    def test_singleton_equals_best(self):
        m = init_model((2, 6, 1), seed=8)
        target = m.forward(np.array([0.0, 0.0])) + 0.3
        q = CfQuery(x_original=[0.0, 0.0], target_score=target, distance=SQ_L2,
                    n_restarts=6, n_diverse=1)
        rs = solve_diverse(m, q)
        best = solve_best(m, q)
        assert len(rs) == 1
        assert rs[0].distance_value == best.distance_value
        assert np.array_equal(rs[0].x_prime, best.x_prime)

    def test_single_basin_no_padding(self):
        m = linear_model([1.0, 0.0])
        q = CfQuery(x_original=[0.0, 0.0], target_score=0.5, distance=SQ_L2,
                    n_restarts=6, n_diverse=4)
        rs = solve_diverse(m, q)
        assert len(rs) == 1

    def test_sorted_by_distance(self):
        m = abs_x1_model()
        q = CfQuery(x_original=[0.2, 0.0], target_score=1.0, distance=SQ_L2,
                    n_restarts=10, n_diverse=4, rng_seed=3)
        rs = solve_diverse(m, q)
        dists = [r.distance_value for r in rs]
        assert dists == sorted(dists)

    def test_requires_enough_restarts(self):
        m = linear_model([1.0, 0.0])
        q = CfQuery(x_original=[0.0, 0.0], target_score=0.5, distance=SQ_L2,
                    n_restarts=2, n_diverse=5)
        with pytest.raises(SearchConfigError):
            solve_diverse(m, q)


class TestDependenceFlags:
    def make_cf(self, changed):
        return Counterfactual(
            x_prime=np.zeros(3), achieved_score=0.0, distance_value=1.0,
            changed=changed, restart_seed=0,
        )

    def test_race_flip_flags_dependence(self):
        from recourse.data import lsat_schema

        cfs = [self.make_cf([("race", 1.0, 0.0)])]
        report = dependence_flags(cfs, lsat_schema())
        assert report.flags == {"race": True}

    def test_empty_set_all_false(self):
        from recourse.data import lsat_schema

        report = dependence_flags([], lsat_schema())
        assert report.flags == {"race": False}

    def test_untouched_attribute_not_flagged_with_caveat(self):
        from recourse.data import lsat_schema

        cfs = [self.make_cf([("lsat", 39.0, 34.0)])]
        report = dependence_flags(cfs, lsat_schema())
        assert report.flags == {"race": False}
        assert "NOT evidence of independence" in report.caveat


class TestScoreGapDescent:
    def test_gap_mostly_non_increasing_across_rounds(self):
        # squared gap at round ends should shrink for >=90% of adjacent pairs
        pairs_total, pairs_good = 0, 0
        for seed in range(8):
            m = init_model((2, 8, 1), seed=seed)
            box = np.random.default_rng(seed).uniform(-2, 2, (400, 2))
            target = float(np.quantile(m.forward(box), 0.95))
            q = CfQuery(x_original=[0.0, 0.0], target_score=target,
                        distance=SQ_L2, rng_seed=seed)
            r = solve_best(m, q)
            gaps = r.diagnostics.get("round_gaps", []) if r.converged else []
            sq = [g * g for g in gaps]
            for a, b in zip(sq, sq[1:]):
                pairs_total += 1
                pairs_good += b <= a + 1e-12
        assert pairs_total >= 10
        assert pairs_good / pairs_total >= 0.9
