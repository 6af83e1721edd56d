"""Unit tests for the hypercube search: conditional models, candidates, lanes."""

from __future__ import annotations

import numpy as np
import pytest

from bsaq.driver import SessionConfig, SSchedule, new_session, step
from bsaq.local_model import (
    EmptySupportError,
    Observation,
    LocalModel,
    PriorBounds,
    Subinterval,
    eta as uni_eta,
    posterior_betatilde,
    posterior_theta,
)
from bsaq.multivariate import (
    ConditionalModel,
    Hypercube,
    MvConfig,
    MvLanes,
    MvObservation,
    SchemaError,
    averaged_theta,
    beta_rest_nodes,
    candidate_points,
    conditional_posterior_beta,
    conditional_posterior_theta,
    conditional_theta_weight,
    betatilde_support,
    default_mv_estimator,
    diagonal_distance,
    euclidean_norm,
    locate_hypercube,
    mv_estimate,
    mv_final_points,
    mv_state_from_doc,
    mv_state_to_doc,
    mv_step,
    new_mv_session,
    next_point,
    slope_cap,
)
from bsaq.numerics import SeededRng

from oracles import (
    grid_conditional_beta_density,
    grid_conditional_theta_density,
    mv_direct_likelihood,
)

UNIT = PriorBounds(0.0, 1.0, 0.5)


def make_cm(alpha=0.5, br=(0.0625,), members=(), x_n=(0.6, 0.6), t=(3, 3), s=5):
    cube = Hypercube(t, s)
    return ConditionalModel(0, cube, PriorBounds(0.0, 1.0, alpha), x_n, members, br)


class TestHypercube:
    def test_containing_examples(self):
        cube = locate_hypercube((0.6, 0.6), 5)
        assert cube.t == (3, 3)
        assert cube.v0.tolist() == [0.4, 0.4]
        assert cube.vp.tolist() == [0.6, 0.6]
        assert locate_hypercube((0.25, 0.8), 5).t == (2, 4)

    def test_vertices_walk_one_axis_at_a_time(self):
        cube = Hypercube((3, 3), 5)
        assert cube.vertices.tolist() == [[0.4, 0.4], [0.6, 0.4], [0.6, 0.6]]
        cube = Hypercube((1, 1, 1), 2)
        assert cube.vertices.tolist() == [
            [0.0, 0.0, 0.0],
            [0.5, 0.0, 0.0],
            [0.5, 0.5, 0.0],
            [0.5, 0.5, 0.5],
        ]

    def test_upper_corner_is_exact(self):
        # accumulating v0 + 1/s would give 0.6000000000000001 here
        cube = Hypercube((3, 3), 5)
        assert cube.vp[0] == 3.0 / 5.0
        assert not cube.contains_strictly((0.6, 0.6))

    def test_face_points_go_to_lower_cell(self):
        assert locate_hypercube((0.4, 0.4), 5).t == (2, 2)
        assert locate_hypercube((0.4000000001, 0.4), 5).t == (3, 2)

    def test_zero_coordinate_probes_lowest_cell(self):
        assert locate_hypercube((0.0, 0.3), 5).t == (1, 2)

    def test_strict_membership(self):
        cube = Hypercube((3, 3), 5)
        assert cube.contains_strictly((0.5, 0.45))
        assert not cube.contains_strictly((0.4, 0.5))
        assert not cube.contains_strictly((0.5, 0.6))

    def test_validation(self):
        with pytest.raises(ValueError):
            Hypercube((0, 3), 5)
        with pytest.raises(ValueError):
            Hypercube((6, 3), 5)
        with pytest.raises(ValueError):
            Hypercube((), 5)
        with pytest.raises(ValueError):
            locate_hypercube((1.2, 0.5), 5)


class TestConditionalModel:
    def test_shifted_envelope_levels(self):
        cm = make_cm(br=(0.0625,))
        # alpha0 = 0.5 + 0.0625*5*(0.4-0.6), alpha1 = 0.5 + 0.0625*5*(0.6-0.6)
        assert cm.alpha0 == pytest.approx(0.4375, abs=1e-15)
        assert cm.alpha1 == pytest.approx(0.5, abs=1e-15)
        assert cm.theta0 == pytest.approx((0.5 * 0.4 + 0.4375 * 0.6) / 0.9375, abs=1e-15)

    def test_interior_anchor_shifts_both_levels(self):
        cm = make_cm(br=(0.1,), x_n=(0.45, 0.45))
        assert cm.alpha0 == pytest.approx(0.5 + 0.1 * 5 * (0.4 - 0.45), abs=1e-15)
        assert cm.alpha1 == pytest.approx(0.5 + 0.1 * 5 * (0.6 - 0.45), abs=1e-15)

    def test_eta_continuous_at_breakpoint(self):
        cm = make_cm(br=(0.2,), x_n=(0.55, 0.55))
        th0 = cm.theta0
        left = cm.eta(th0 - 1e-12)
        right = cm.eta(th0 + 1e-12)
        assert left == pytest.approx(right, rel=1e-6)

    def test_alpha_at_matches_manual_sum(self):
        cm = make_cm(br=(0.11,), x_n=(0.55, 0.55))
        x = (0.47, 0.52)
        assert cm.alpha_at(x) == pytest.approx(0.5 + 0.11 * 5 * (0.52 - 0.55), abs=1e-15)

    def test_rejects_nonpositive_frozen_slope(self):
        with pytest.raises(EmptySupportError):
            make_cm(br=(0.0,))
        with pytest.raises(EmptySupportError):
            make_cm(br=(-0.1,))

    def test_rejects_slope_pushing_envelope_out_of_bounds(self):
        # alpha0 = 0.5 - br goes negative once br exceeds 0.5
        with pytest.raises(EmptySupportError):
            make_cm(br=(0.6,))

    def test_rejects_member_outside_cell(self):
        with pytest.raises(ValueError):
            make_cm(members=[MvObservation((0.2, 0.5), 1)])

    def test_p1_reduction_matches_univariate_eta(self):
        cube = Hypercube((3,), 5)
        bounds = PriorBounds(0.1, 0.9, 0.4)
        cm = ConditionalModel(0, cube, bounds, (0.5,), [], ())
        sub = Subinterval(3, 5)
        for th in (0.1, 0.35, 0.47, 0.51, 0.8):
            assert cm.eta(th) == pytest.approx(uni_eta(th, sub, bounds), abs=1e-15)


class TestConditionalPosteriorTheta:
    def test_prior_density_tracks_squared_envelope(self):
        cm = make_cm(br=(0.0625,))
        curve = conditional_posterior_theta(cm)
        th = np.linspace(1e-4, 1 - 1e-4, 1001)
        ref = cm.eta(th) ** 2
        ref /= np.trapezoid(ref, th)
        mine = curve.density(th)
        mine /= np.trapezoid(mine, th)
        assert np.max(np.abs(mine - ref)) < 1e-8

    def test_p1_reduction_matches_univariate_density(self):
        rng = np.random.default_rng(3)
        sub = Subinterval(4, 7)
        bounds = PriorBounds(0.0, 1.0, 0.35)
        obs = [
            Observation(float(rng.uniform(sub.v0 + 1e-6, sub.v1 - 1e-6)), int(rng.integers(0, 2)))
            for _ in range(5)
        ]
        model = LocalModel(sub, bounds, obs)
        cm = ConditionalModel(
            0, Hypercube((4,), 7), bounds, (0.5,),
            [MvObservation((o.x,), o.y) for o in obs], (),
        )
        th = np.linspace(1e-3, 1 - 1e-3, 501)
        a = posterior_theta(model).density(th)
        b = conditional_posterior_theta(cm).density(th)
        assert np.max(np.abs(a - b)) < 1e-10

    def test_grid_oracle_m3(self):
        rng = np.random.default_rng(11)
        cube = Hypercube((3, 4), 6)
        for br in (0.05, 0.22):
            members = [
                MvObservation(
                    (
                        float(rng.uniform(cube.v0[0] + 1e-6, cube.vp[0] - 1e-6)),
                        float(rng.uniform(cube.v0[1] + 1e-6, cube.vp[1] - 1e-6)),
                    ),
                    int(rng.integers(0, 2)),
                )
                for _ in range(3)
            ]
            cm = ConditionalModel(0, cube, UNIT, (0.45, 0.55), members, (br,))
            th = np.linspace(1e-3, 1 - 1e-3, 801)
            oracle = grid_conditional_theta_density(cm, th)
            mine = conditional_theta_weight(cm, th)
            mine /= np.trapezoid(mine, th)
            assert np.max(np.abs(mine - oracle)) < 1e-4

    def test_normalization(self):
        cm = make_cm(
            br=(0.2,),
            x_n=(0.55, 0.55),
            members=[MvObservation((0.45, 0.5), 1), MvObservation((0.55, 0.41), 0)],
        )
        curve = conditional_posterior_theta(cm)
        th = np.linspace(1e-7, 1 - 1e-7, 40001)
        assert np.trapezoid(curve.density(th), th) == pytest.approx(1.0, abs=1e-6)

    def test_mean_against_monte_carlo(self):
        rng = np.random.default_rng(19)
        cube = Hypercube((2, 3), 4)
        members = [
            MvObservation(
                (
                    float(rng.uniform(cube.v0[0] + 1e-6, cube.vp[0] - 1e-6)),
                    float(rng.uniform(cube.v0[1] + 1e-6, cube.vp[1] - 1e-6)),
                ),
                int(rng.integers(0, 2)),
            )
            for _ in range(4)
        ]
        cm = ConditionalModel(0, cube, UNIT, (0.3, 0.6), members, (0.15,))
        n = 400_000
        th = rng.uniform(0.0, 1.0, n)
        top = float(cm.eta(np.array([cm.theta0]))[0])
        bt = rng.uniform(0.0, top, n)
        w = np.where(bt < cm.eta(th), bt * mv_direct_likelihood(cm, th, bt), 0.0)
        mc_mean = float(np.sum(w * th) / np.sum(w))
        ratio = np.sum(w * th) / n, np.sum(w) / n
        var = (
            np.var(w * th) / n
            + (ratio[0] / ratio[1]) ** 2 * np.var(w) / n
            - 2 * (ratio[0] / ratio[1]) * np.cov(w * th, w)[0, 1] / n
        ) / ratio[1] ** 2
        se = float(np.sqrt(max(var, 0.0)))
        assert conditional_posterior_theta(cm).mean == pytest.approx(mc_mean, abs=3 * se + 1e-6)


class TestConditionalPosteriorBeta:
    def test_support_endpoints(self):
        cm = make_cm(br=(0.0625,))
        floor, top = betatilde_support(cm)
        up = 1.0 - cm.alpha1
        down = cm.alpha0
        assert floor == pytest.approx(max(up / (5 * 0.6), down / (5 * 0.6)), abs=1e-15)
        assert top == pytest.approx(1.0 - 0.0625, abs=1e-15)

    def test_p1_reduction_matches_univariate_density(self):
        rng = np.random.default_rng(8)
        sub = Subinterval(3, 5)
        bounds = PriorBounds(0.0, 1.0, 0.45)
        obs = [
            Observation(float(rng.uniform(sub.v0 + 1e-6, sub.v1 - 1e-6)), int(rng.integers(0, 2)))
            for _ in range(4)
        ]
        model = LocalModel(sub, bounds, obs)
        cm = ConditionalModel(
            0, Hypercube((3,), 5), bounds, (0.5,),
            [MvObservation((o.x,), o.y) for o in obs], (),
        )
        ua = posterior_betatilde(model)
        ub = conditional_posterior_beta(cm)
        assert ua.support[0] == pytest.approx(ub.support[0], abs=1e-14)
        assert ua.support[1] == pytest.approx(ub.support[1], abs=1e-14)
        grid = np.linspace(ua.support[0] + 1e-6, ua.support[1] - 1e-6, 401)
        assert np.max(np.abs(ua.density(grid) - ub.density(grid))) < 1e-10

    def test_grid_oracle_m3(self):
        rng = np.random.default_rng(29)
        cube = Hypercube((3, 3), 5)
        members = [
            MvObservation(
                (
                    float(rng.uniform(cube.v0[0] + 1e-6, cube.vp[0] - 1e-6)),
                    float(rng.uniform(cube.v0[1] + 1e-6, cube.vp[1] - 1e-6)),
                ),
                int(rng.integers(0, 2)),
            )
            for _ in range(3)
        ]
        cm = ConditionalModel(0, cube, UNIT, (0.5, 0.5), members, (0.12,))
        curve = conditional_posterior_beta(cm)
        lo, hi = curve.support
        grid = np.linspace(lo + 1e-9, hi - 1e-9, 601)
        oracle = grid_conditional_beta_density(cm, grid)
        mine = curve.density(grid)
        mine /= np.trapezoid(mine, grid)
        assert np.max(np.abs(mine - oracle)) < 2e-4


class TestSlopeNodes:
    def test_slope_cap_centered_cell(self):
        cube = Hypercube((1, 1), 1)
        assert slope_cap(0, cube, UNIT, (0.5, 0.5)) == pytest.approx(1.0, abs=1e-15)

    def test_slope_cap_on_high_face_drops_second_constraint(self):
        cube = Hypercube((1, 1), 1)
        assert slope_cap(0, cube, UNIT, (1.0, 1.0)) == pytest.approx(0.5, abs=1e-15)

    def test_slope_cap_requires_two_dimensions(self):
        with pytest.raises(ValueError):
            slope_cap(0, Hypercube((2, 2, 2), 4), UNIT, (0.4, 0.4, 0.4))

    def test_interior_grid_p2(self):
        cube = Hypercube((3, 3), 5)
        got = beta_rest_nodes(0, cube, UNIT, (0.6, 0.6), nodes=7)
        cap = slope_cap(0, cube, UNIT, (0.6, 0.6))
        assert got == [((i * cap) / 8,) for i in range(1, 8)]

    def test_p1_has_single_empty_node(self):
        assert beta_rest_nodes(0, Hypercube((2,), 3), UNIT, (0.5,)) == [()]

    def test_rejection_sampler_p3(self):
        cube = locate_hypercube((0.55, 0.55, 0.55), 4)
        rng = SeededRng(7, (0,))
        out = beta_rest_nodes(0, cube, UNIT, (0.55, 0.55, 0.55), draws=32, rng=rng)
        assert len(out) == 32
        x = np.asarray((0.55, 0.55, 0.55))
        lo_gap = 4 * (cube.v0[1:] - x[1:])
        hi_gap = 4 * (cube.vp[1:] - x[1:])
        for row in out:
            r = np.asarray(row)
            assert (r > 0.0).all()
            assert 0.5 + r @ lo_gap > 0.0
            assert 0.5 + r @ hi_gap < 1.0
        again = beta_rest_nodes(
            0, cube, UNIT, (0.55, 0.55, 0.55), draws=32, rng=SeededRng(7, (0,))
        )
        assert again == out

    def test_rejection_sampler_needs_rng(self):
        with pytest.raises(ValueError):
            beta_rest_nodes(0, Hypercube((2, 2, 2), 4), UNIT, (0.4, 0.4, 0.4))


class TestCandidates:
    def test_prior_map_candidate_averages_breakpoints(self):
        # with no usable observations the conditional mode sits at theta0
        cfg = MvConfig(alpha=0.5, estimator="map", schedule=SSchedule.fixed(5), start=(0.5, 0.5))
        state = new_mv_session(cfg)
        cube = locate_hypercube((0.5, 0.5), 5)
        cap = slope_cap(0, cube, PriorBounds(0.0, 1.0, 0.5), (0.5, 0.5))
        t0 = []
        for (br,) in beta_rest_nodes(0, cube, PriorBounds(0.0, 1.0, 0.5), (0.5, 0.5)):
            cm = ConditionalModel(0, cube, PriorBounds(0.0, 1.0, 0.5), (0.5, 0.5), [], (br,))
            t0.append(cm.theta0)
        assert averaged_theta(0, state) == pytest.approx(float(np.mean(t0)), abs=1e-7)

    def test_candidates_replace_one_axis(self):
        cfg = MvConfig(alpha=0.4, schedule=SSchedule.fixed(5), start=(0.55, 0.45))
        state = new_mv_session(cfg)
        cands = candidate_points(state)
        assert len(cands) == 2
        assert cands[0][1] == 0.45
        assert cands[1][0] == 0.55
        for cand in cands:
            assert all(0.0 < v < 1.0 for v in cand)

    def test_diagonal_tie_prefers_first_axis(self):
        cfg = MvConfig(alpha=0.5, schedule=SSchedule.fixed(5), start=(0.6, 0.6))
        state = new_mv_session(cfg)
        cands = candidate_points(state)
        assert cands[0][0] == pytest.approx(cands[1][1], abs=1e-12)
        _, j_star = next_point(state)
        assert j_star == 0

    def test_euclidean_objective_picks_smaller_norm(self):
        assert euclidean_norm((0.3, 0.4)) == pytest.approx(0.5)
        cands = ((0.6, 0.2), (0.6, 0.7))
        scores = [euclidean_norm(c) for c in cands]
        assert int(np.argmin(scores)) == 0

    def test_diagonal_objective_measures_spread(self):
        assert diagonal_distance((0.5, 0.5)) == 0.0
        assert diagonal_distance((0.2, 0.6)) == pytest.approx(
            np.sqrt(2) * 0.2, abs=1e-12
        )


class TestMvSession:
    def test_default_estimator_band(self):
        assert default_mv_estimator(0.25) == "map"
        assert default_mv_estimator(0.75) == "map"
        assert default_mv_estimator(0.5) == "bayes"
        assert MvConfig(alpha=0.05).estimator == "map"
        assert MvConfig(alpha=0.5).estimator == "bayes"

    def test_defaults(self):
        cfg = MvConfig(alpha=0.25)
        assert cfg.dimension == 2
        assert cfg.start == (0.6, 0.6)
        assert cfg.schedule == SSchedule.from_alpha(0.25)
        assert cfg.u_name == "diagonal"

    def test_step_appends_history_and_moves_one_axis(self):
        cfg = MvConfig(alpha=0.5, schedule=SSchedule.fixed(5))
        state = new_mv_session(cfg)
        state2, res = mv_step(state, 0)
        assert state2.steps == 1
        assert state2.history == (MvObservation((0.6, 0.6), 0),)
        assert res.x == state2.x
        assert res.candidates[res.j_star] == res.x
        moved = sum(1 for a, b in zip(state.x, state2.x) if a != b)
        assert moved == 1

    def test_rejects_bad_outcome(self):
        state = new_mv_session(MvConfig(alpha=0.5, schedule=SSchedule.fixed(5)))
        with pytest.raises(ValueError):
            mv_step(state, 2)

    def test_estimate_replays_pending_point(self):
        rng = np.random.default_rng(1)
        state = new_mv_session(MvConfig(alpha=0.5, schedule=SSchedule(5, 9)))
        for _ in range(6):
            state, _ = mv_step(state, int(rng.random() < 0.4))
        replay = mv_estimate(state)
        assert replay.x == pytest.approx(state.x, abs=1e-12)
        assert replay.step == state.steps

    def test_estimate_on_fresh_session_uses_prior(self):
        state = new_mv_session(MvConfig(alpha=0.5, schedule=SSchedule.fixed(5)))
        res = mv_estimate(state)
        assert res.step == 0
        assert all(0.0 < v < 1.0 for v in res.x)

    def test_trajectory_deterministic(self):
        ys = [0, 1, 0, 0, 1, 0]
        runs = []
        for _ in range(2):
            state = new_mv_session(MvConfig(alpha=0.25, schedule=SSchedule(5, 9)))
            for y in ys:
                state, _ = mv_step(state, y)
            runs.append(state.x)
        assert runs[0] == runs[1]

    def test_three_dimensional_session_runs(self):
        cfg = MvConfig(alpha=0.5, dimension=3, schedule=SSchedule.fixed(4), draws=16)
        state = new_mv_session(cfg)
        assert state.x == (0.6, 0.6, 0.6)
        for y in (0, 1):
            state, res = mv_step(state, y)
            assert len(res.candidates) == 3
            assert all(0.0 < v < 1.0 for c in res.candidates for v in c)


class TestDocRoundTrip:
    def test_round_trip_preserves_trajectory(self):
        rng = np.random.default_rng(4)
        state = new_mv_session(MvConfig(alpha=0.3, schedule=SSchedule(5, 9)))
        for _ in range(5):
            state, _ = mv_step(state, int(rng.random() < 0.3))
        doc = mv_state_to_doc(state)
        back = mv_state_from_doc(doc)
        assert back == state
        a, _ = mv_step(state, 1)
        b, _ = mv_step(back, 1)
        assert a.x == b.x

    def test_rejects_univariate_document(self):
        state = new_session(SessionConfig(alpha=0.5))
        from bsaq.driver import state_to_doc

        with pytest.raises(SchemaError):
            mv_state_from_doc(state_to_doc(state))

    def test_rejects_bad_version_and_missing_keys(self):
        state = new_mv_session(MvConfig(alpha=0.3, schedule=SSchedule(5, 9)))
        doc = mv_state_to_doc(state)
        bad = dict(doc)
        bad["version"] = 2
        with pytest.raises(SchemaError):
            mv_state_from_doc(bad)
        bad = dict(doc)
        del bad["schedule"]
        with pytest.raises(SchemaError):
            mv_state_from_doc(bad)


class TestUnivariateReduction:
    """dimension=1 sessions must reproduce the plain driver without carry-over."""

    @pytest.mark.parametrize("estimator", ["bayes", "map"])
    def test_matches_driver_without_carryover(self, estimator):
        ys = [0, 1, 0, 0, 1, 1, 0, 1, 0, 0, 1, 0]
        sched = SSchedule(5, 9)
        uni = new_session(
            SessionConfig(
                alpha=0.4, estimator=estimator, schedule=sched,
                start=0.55, bound_carryover=False,
            )
        )
        mv = new_mv_session(
            MvConfig(alpha=0.4, dimension=1, estimator=estimator, schedule=sched, start=(0.55,))
        )
        for y in ys:
            uni, _ = step(uni, y)
            mv, _ = mv_step(mv, y)
            assert mv.x[0] == pytest.approx(uni.x, abs=1e-10)


class TestMvLanes:
    def test_matches_sequential_path(self):
        rng = np.random.default_rng(42)
        ys = (rng.random(10) < 0.5).astype(int)
        sched = SSchedule(5, 9)
        for alpha, est in ((0.5, "bayes"), (0.25, "map")):
            state = new_mv_session(
                MvConfig(alpha=alpha, estimator=est, schedule=sched)
            )
            eng = MvLanes(alpha, 2, sched, est)
            for y in ys:
                state, _ = mv_step(state, int(y))
                eng.step(np.full(2, y, dtype=float))
                assert eng.x[0][0] == pytest.approx(state.x[0], abs=1e-8)
                assert eng.x[1][0] == pytest.approx(state.x[1], abs=1e-8)

    def test_lanes_are_independent(self):
        rng = np.random.default_rng(9)
        sched = SSchedule.fixed(5)
        ys = (rng.random((6, 3)) < 0.45).astype(float)
        eng = MvLanes(0.5, 3, sched, "bayes")
        states = [new_mv_session(MvConfig(alpha=0.5, schedule=sched)) for _ in range(3)]
        for k in range(6):
            eng.step(ys[k])
            for lane in range(3):
                states[lane], _ = mv_step(states[lane], int(ys[k][lane]))
        for lane in range(3):
            assert eng.x[0][lane] == pytest.approx(states[lane].x[0], abs=1e-8)
            assert eng.x[1][lane] == pytest.approx(states[lane].x[1], abs=1e-8)

    def test_rejects_unknown_estimator(self):
        with pytest.raises(ValueError):
            MvLanes(0.5, 2, SSchedule.fixed(5), "median")


class TestFinalPoints:
    def test_shape_and_determinism(self):
        from bsaq.benchmark import BenchmarkConfig
        from bsaq.models import get_model

        config = BenchmarkConfig(
            model="M8", alphas=(0.5,), methods=("bsa-bayes",),
            horizon=4, replications=6, master_seed=11, schedule=SSchedule.fixed(5),
        )
        model = get_model("M8")
        a = mv_final_points(model, "bsa-bayes", 0.5, config)
        b = mv_final_points(model, "bsa-bayes", 0.5, config)
        assert a.shape == (6, 2)
        assert np.array_equal(a, b)
        assert ((a > 0.0) & (a < 1.0)).all()


class TestSearchRegression:
    def test_short_map_run_converges_toward_target(self):
        # 20 probes of the correlated-threshold surface at alpha=0.05
        from bsaq.models import get_model

        model = get_model("M8")
        sched = SSchedule.from_alpha(0.05)
        eng = MvLanes(0.05, 4, sched, "map")
        streams = SeededRng(77, (0,)).uniforms(20 * 4).reshape(20, 4)
        for k in range(20):
            pts = np.stack([eng.x[0], eng.x[1]], axis=-1)
            y = (streams[k] < model.prob(pts, 0.05)).astype(float)
            eng.step(y)
        final = np.stack([eng.x[0], eng.x[1]], axis=-1)
        root = np.array([0.3733, 0.3733])
        rmse = float(np.sqrt(np.mean(np.sum((final - root) ** 2, axis=1))))
        assert rmse < 0.45
