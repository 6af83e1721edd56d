"""Continuous-response front ends: encoding, probes, searches, lockstep engines."""

import math

import numpy as np
import pytest

from bsaq.applications import (
    KwClassicState,
    REGRESSIONS,
    SigmoidEncoder,
    app_noise_streams,
    clipped_probes,
    cubic_drift,
    kw_classic_step,
    kw_search,
    minimum_trajectories,
    probe_width,
    quadratic_bowl,
    rmj_sign_minimum,
    rmj_sign_root,
    root_search,
    root_trajectories,
)
from bsaq.driver import SSchedule
from bsaq.numerics import SeededRng


class TestSigmoidEncoder:
    def test_zero_response_any_scale_two_binaries(self):
        # sigmoid(0) = 0.5 exactly; a = floor(2*0.5 + 0.5) = 1
        for b in (0.5, 1.0, 3.0, 17.0):
            assert SigmoidEncoder(b=b, q=2).encode(0.0) == (1, 0)

    def test_unit_response_three_binaries(self):
        # sigmoid(1) = 0.7310586; nearest third is 2/3
        assert SigmoidEncoder(b=1.0, q=3).encode(1.0) == (1, 1, 0)

    def test_saturation(self):
        enc = SigmoidEncoder(b=1.0, q=3)
        assert enc.encode(1e9) == (1, 1, 1)
        assert enc.encode(-1e9) == (0, 0, 0)

    def test_single_binary_is_sign_dichotomization(self):
        enc = SigmoidEncoder(b=2.5, q=1)
        assert enc.encode(0.7) == (1,)
        assert enc.encode(-0.7) == (0,)
        # ties round up
        assert enc.encode(0.0) == (1,)

    def test_midpoint_ties_round_up(self):
        # sigmoid(0) = 0.5 sits exactly between a/q grid points for odd q
        assert SigmoidEncoder(b=1.0, q=3).encode(0.0) == (1, 1, 0)
        assert SigmoidEncoder(b=1.0, q=5).encode(0.0) == (1, 1, 1, 0, 0)

    def test_closest_fraction_exhaustive(self):
        # away from ties, a/q must be the unique nearest q-denominator fraction
        for q in range(1, 9):
            enc = SigmoidEncoder(b=1.0, q=q)
            fracs = np.arange(q + 1) / q
            for ystar in np.arange(1, 200) / 200.0:
                d = np.abs(fracs - ystar)
                best = d.min()
                if (np.abs(d - best) < 1e-9).sum() > 1:
                    continue
                bits = enc.encode(math.log(ystar / (1.0 - ystar)))
                assert len(bits) == q
                assert bits == tuple(sorted(bits, reverse=True))
                assert abs(sum(bits) / q - ystar) <= best + 1e-9

    def test_range_constructor_scale(self):
        enc = SigmoidEncoder.for_range(3.0, q=2)
        assert enc.b == pytest.approx(1.0)
        assert enc.q == 2
        assert SigmoidEncoder.for_range(6.0).b == pytest.approx(0.5)

    def test_rejects_bad_parameters(self):
        with pytest.raises(ValueError):
            SigmoidEncoder(b=0.0, q=1)
        with pytest.raises(ValueError):
            SigmoidEncoder(b=1.0, q=0)
        with pytest.raises(ValueError):
            SigmoidEncoder.for_range(0.0)
        with pytest.raises(ValueError):
            SigmoidEncoder(b=1.0, q=2).encode(float("nan"))
        with pytest.raises(ValueError):
            SigmoidEncoder(b=1.0, q=2).encode(float("inf"))


class TestProbes:
    def test_half_width_sequence(self):
        assert probe_width(1) == pytest.approx(1.0)
        assert probe_width(8) == pytest.approx(0.5)
        widths = [probe_width(n) for n in range(1, 100)]
        assert all(w > 0 for w in widths)
        assert all(a > b for a, b in zip(widths, widths[1:]))

    def test_rejects_nonpositive_step(self):
        with pytest.raises(ValueError):
            probe_width(0)

    def test_clipping(self):
        assert clipped_probes(0.5, 0.1) == (0.6, 0.4, False)
        hi, lo, flag = clipped_probes(0.5, 1.0)
        assert (hi, lo, flag) == (1.0, 0.0, True)
        hi, lo, flag = clipped_probes(0.95, 0.1)
        assert hi == 1.0 and lo == pytest.approx(0.85) and flag

    def test_unbounded_domain_never_clips(self):
        hi, lo, flag = clipped_probes(0.5, 1.0, domain=None)
        assert (hi, lo, flag) == (1.5, -0.5, False)

    def test_custom_domain(self):
        hi, lo, flag = clipped_probes(0.0, 2.0, domain=(-3.0, 3.0))
        assert (hi, lo, flag) == (2.0, -2.0, False)
        hi, lo, flag = clipped_probes(2.0, 2.0, domain=(-3.0, 3.0))
        assert (hi, lo, flag) == (3.0, 0.0, True)


class TestKwClassic:
    def test_equal_responses_leave_point(self):
        state = kw_classic_step(KwClassicState(0.4), 1.7, 1.7)
        assert state.x == 0.4
        assert state.n == 2

    def test_first_step_direct_substitution(self):
        # gamma_1 = 1, c_1 = 1
        state = kw_classic_step(KwClassicState(0.5), 0.3, 0.1)
        assert state.x == pytest.approx(0.3)

    def test_noiseless_quadratic_converges(self):
        state = KwClassicState(0.5)
        for _ in range(500):
            c = probe_width(state.n)
            y1 = (state.x + c - 0.3) ** 2
            y2 = (state.x - c - 0.3) ** 2
            state = kw_classic_step(state, y1, y2)
        assert abs(state.x - 0.3) < 0.05


class TestRootSearch:
    def test_noiseless_linear_root(self):
        res = root_search(lambda x, rng: x - 0.5, SigmoidEncoder(b=1.0, q=1), 30, 7)
        assert len(res.xs) == 31
        assert abs(res.xs[-1] - 0.5) < 0.05

    def test_deterministic_under_seed(self):
        a = root_search(cubic_drift, SigmoidEncoder(b=1.0, q=2), 15, 99)
        b = root_search(cubic_drift, SigmoidEncoder(b=1.0, q=2), 15, 99)
        assert np.array_equal(a.xs, b.xs)

    def test_single_binary_matches_sign_feed(self):
        # q=1 is the sign dichotomization, so a plain positive-slope line and
        # its sign carry the same information path
        rng1 = SeededRng(5)
        rng2 = SeededRng(5)
        a = root_search(cubic_drift, SigmoidEncoder(b=1.0, q=1), 12, rng1)
        b = root_search(
            lambda x, r: 1.0 if cubic_drift(x, r) > 0 else -1.0,
            SigmoidEncoder(b=1.0, q=1),
            12,
            rng2,
        )
        assert np.array_equal(a.xs, b.xs)

    def test_custom_schedule_and_start(self):
        res = root_search(
            lambda x, rng: x - 0.5,
            SigmoidEncoder(b=1.0, q=1),
            5,
            3,
            start=0.25,
            schedule=SSchedule(7, 11),
        )
        assert res.xs[0] == 0.25
        assert res.state.config.schedule == SSchedule(7, 11)
        assert res.state.config.alpha == 0.5


class TestKwSearch:
    def test_noiseless_quadratic_moves_toward_minimum(self):
        res = kw_search(
            lambda x, rng: 200.0 * (x - 0.3) ** 2, SigmoidEncoder(b=1.0, q=2), 40, 11
        )
        assert abs(res.xs[-1] - 0.3) < 0.1

    def test_wide_first_probe_is_clipped(self):
        # c_1 = 1 pushes both probes out of [0, 1] from any interior start
        res = kw_search(quadratic_bowl, SigmoidEncoder(b=1.0, q=2), 6, 2)
        assert res.clipped.dtype == bool
        assert res.clipped.shape == (6,)
        assert res.clipped[0]

    def test_deterministic_under_seed(self):
        a = kw_search(quadratic_bowl, SigmoidEncoder(b=1.0, q=2), 10, 4)
        b = kw_search(quadratic_bowl, SigmoidEncoder(b=1.0, q=2), 10, 4)
        assert np.array_equal(a.xs, b.xs)
        assert np.array_equal(a.clipped, b.clipped)


class TestBuiltinRegressions:
    def test_registry(self):
        assert set(REGRESSIONS) == {"cubic", "quadratic"}

    def test_noise_is_standard_normal_draw(self):
        rng = SeededRng(123)
        want = SeededRng(123).standard_normal()
        assert cubic_drift(0.3, rng) == want
        rng = SeededRng(124)
        want = SeededRng(124).standard_normal()
        assert quadratic_bowl(0.3, rng) == want

    def test_curve_shapes(self):
        silent = SeededRng(0)
        # consume the noise draw with a fixed rng each call; compare means
        assert cubic_drift(0.8, SeededRng(1)) - cubic_drift(0.8, SeededRng(1)) == 0.0
        base = 200.0 * (0.8 - 0.3) ** 3
        got = cubic_drift(0.8, silent) - SeededRng(0).standard_normal()
        assert got == pytest.approx(base)


class TestNoiseStreams:
    def test_shape_and_determinism(self):
        a = app_noise_streams(42, "root", "bsa", 5, 3, 1)
        b = app_noise_streams(42, "root", "bsa", 5, 3, 1)
        assert a.shape == (5, 1, 3)
        assert np.array_equal(a, b)

    def test_methods_and_apps_use_disjoint_streams(self):
        a = app_noise_streams(42, "root", "bsa", 5, 2, 1)
        b = app_noise_streams(42, "root", "rmj-sign", 5, 2, 1)
        c = app_noise_streams(42, "minimum", "bsa", 5, 2, 1)
        assert not np.allclose(a, b)
        assert not np.allclose(a, c)

    def test_extending_reps_preserves_prefix(self):
        small = app_noise_streams(42, "minimum", "bsa", 4, 2, 2)
        large = app_noise_streams(42, "minimum", "bsa", 4, 5, 2)
        assert np.array_equal(large[:, :, :2], small)


class TestLockstepEquivalence:
    HORIZON = 12
    REPS = 3
    MASTER = 424242

    def test_root_lanes_match_sequential(self):
        traj = root_trajectories(self.MASTER, self.HORIZON, self.REPS, "bsa")
        assert traj.shape == (self.HORIZON + 1, self.REPS)
        for rep in range(self.REPS):
            rng = SeededRng(self.MASTER, (1, 1, rep))
            res = root_search(cubic_drift, SigmoidEncoder(b=1.0, q=2), self.HORIZON, rng)
            assert np.max(np.abs(res.xs - traj[:, rep])) < 1e-10

    def test_root_baseline_lanes_match_sequential(self):
        traj = root_trajectories(self.MASTER, self.HORIZON, self.REPS, "rmj-sign")
        for rep in range(self.REPS):
            rng = SeededRng(self.MASTER, (1, 2, rep))
            xs = rmj_sign_root(cubic_drift, self.HORIZON, rng)
            assert np.array_equal(xs, traj[:, rep])

    @pytest.mark.parametrize("domain", [(0.0, 1.0), None])
    def test_minimum_lanes_match_sequential(self, domain):
        traj = minimum_trajectories(
            self.MASTER, self.HORIZON, self.REPS, "bsa", domain=domain
        )
        for rep in range(self.REPS):
            rng = SeededRng(self.MASTER, (2, 1, rep))
            res = kw_search(
                quadratic_bowl, SigmoidEncoder(b=1.0, q=2), self.HORIZON, rng,
                domain=domain,
            )
            assert np.max(np.abs(res.xs - traj[:, rep])) < 1e-10

    @pytest.mark.parametrize("domain", [(0.0, 1.0), None])
    def test_minimum_baseline_lanes_match_sequential(self, domain):
        traj = minimum_trajectories(
            self.MASTER, self.HORIZON, self.REPS, "rmj-sign", domain=domain
        )
        for rep in range(self.REPS):
            rng = SeededRng(self.MASTER, (2, 2, rep))
            xs = rmj_sign_minimum(quadratic_bowl, self.HORIZON, rng, domain=domain)
            assert np.array_equal(xs, traj[:, rep])

    def test_rejects_unknown_method(self):
        with pytest.raises(ValueError, match="unknown method"):
            root_trajectories(1, 2, 2, "nope")
        with pytest.raises(ValueError, match="unknown method"):
            minimum_trajectories(1, 2, 2, "nope")


class TestTrendSmoke:
    def test_root_error_shrinks_with_steps(self):
        # light preview of the 500-rep comparison: same statistic, 60 reps
        traj = root_trajectories(1729, 30, 60, "bsa")
        rmse = np.sqrt(np.mean((traj - 0.3) ** 2, axis=1))
        assert rmse[29] < rmse[4]

    def test_minimum_error_shrinks_with_steps(self):
        # the built-in objective is defined on the whole line, so its native
        # comparison runs unclipped
        traj = minimum_trajectories(1729, 30, 60, "bsa", domain=None)
        rmse = np.sqrt(np.mean((traj - 0.3) ** 2, axis=1))
        assert rmse[29] < rmse[4]

    def test_clipping_a_polynomial_objective_biases_the_search(self):
        # with the minimizer at 0.3 and c_n = n^(-1/3) still 0.32 at n=30,
        # unit-interval clipping shifts the expected difference-quotient root
        # to 0.6 - c_n; the unclipped run must end closer to the minimizer
        clipped = minimum_trajectories(1729, 30, 60, "bsa")
        free = minimum_trajectories(1729, 30, 60, "bsa", domain=None)
        rc = np.sqrt(np.mean((clipped[29] - 0.3) ** 2))
        rf = np.sqrt(np.mean((free[29] - 0.3) ** 2))
        assert rf < rc
