import numpy as np
import pytest

from gridtrack.kalman import GridEstimate
from gridtrack.iekf import (INVERSE_GAUSSIAN, L1, LOGARITHM,
                            AugmentedMeasurement, SparsityMeasurement,
                            build_augmented, covariance_gain_form,
                            covariance_information, gauss_newton_correct,
                            iekf_correct, rho, rho_grad)
from gridtrack.solver import (RegularizedWlsProblem, SolverOptions, solve_gp)

from oracles import central_difference, random_problem

KINDS = [L1, LOGARITHM, INVERSE_GAUSSIAN]


def make_instance(rng, G, N, kind=L1, mu=1.0, sigma=2.0):
    d = random_problem(rng, G, N)
    m = SparsityMeasurement(rho_kind=kind, mu=mu, sigma=sigma)
    aug = build_augmented(d["y"], d["R"], m)
    pred = GridEstimate(1, d["x_pred"], d["P"])
    return d, m, aug, pred


class TestRho:
    def test_l1_at_zero(self):
        assert rho(np.zeros(4), SparsityMeasurement(rho_kind=L1)) == 0.0

    def test_inverse_gaussian_at_zero(self):
        m = SparsityMeasurement(rho_kind=INVERSE_GAUSSIAN, sigma_p=1.0)
        assert rho(np.zeros(4), m) == 0.0

    def test_logarithm_at_zero(self):
        m = SparsityMeasurement(rho_kind=LOGARITHM, delta=0.1)
        assert rho(np.zeros(2), m) == pytest.approx(2 * np.log(0.1))

    def test_l1_gradient_all_ones(self, rng):
        m = SparsityMeasurement(rho_kind=L1)
        assert np.array_equal(rho_grad(rng.uniform(0, 5, 6), m), np.ones(6))

    def test_logarithm_gradient_value(self):
        m = SparsityMeasurement(rho_kind=LOGARITHM, delta=0.1)
        assert rho_grad(np.array([0.9]), m) == pytest.approx([1.0])

    @pytest.mark.parametrize("kind", KINDS)
    def test_gradient_matches_finite_differences(self, rng, kind):
        m = SparsityMeasurement(rho_kind=kind, delta=0.2, sigma_p=0.7)
        for _ in range(5):
            x = rng.uniform(0.05, 3.0, 5)
            fd = central_difference(lambda z: rho(z, m), x)
            g = rho_grad(x, m)
            assert np.max(np.abs(fd - g)) / max(np.max(np.abs(g)), 1e-9) < 1e-6

    def test_parameter_validation(self):
        with pytest.raises(ValueError):
            SparsityMeasurement(rho_kind="l2")
        with pytest.raises(ValueError):
            SparsityMeasurement(sigma=0.0)
        with pytest.raises(ValueError):
            SparsityMeasurement(delta=-0.1)
        with pytest.raises(ValueError):
            SparsityMeasurement(mu=-1.0)


class TestAugmented:
    def test_layout(self, rng):
        m = SparsityMeasurement(mu=3.0, sigma=2.0)
        aug = build_augmented([1.0, 2.0], np.eye(2), m)
        assert np.array_equal(aug.y_bar, [1.0, 2.0, 3.0])
        assert aug.sigma2 == 4.0
        assert np.array_equal(aug.R, np.eye(2))

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            AugmentedMeasurement(np.ones(3), np.eye(2))


class TestEquivalence:
    """The gain recursion and Gauss-Newton iterations coincide."""

    @pytest.mark.parametrize("kind", KINDS)
    def test_iterates_match_for_all_l(self, rng, kind):
        for _ in range(8):
            G = int(rng.integers(3, 12))
            N = int(rng.integers(2, 7))
            d, m, aug, pred = make_instance(rng, G, N, kind=kind)
            for L in range(1, 11):
                a = iekf_correct(pred, aug, d["H"], m, iters=L, tol=0.0)
                b = gauss_newton_correct(pred, aug, d["H"], m, iters=L,
                                         tol=0.0)
                assert np.max(np.abs(a.x - b.x)) < 1e-8

    def test_covariance_gain_equals_information(self, rng):
        for kind in KINDS:
            d, m, aug, pred = make_instance(rng, 6, 4, kind=kind)
            est = iekf_correct(pred, aug, d["H"], m, iters=5, tol=0.0)
            gain = covariance_gain_form(d["P"], aug, d["H"], m, est.x)
            info = covariance_information(d["P"], d["H"], d["R"], m, est.x)
            rel = np.max(np.abs(gain - info)) / np.max(np.abs(info))
            assert rel < 1e-8
            assert np.max(np.abs(est.P - info)) / np.max(np.abs(info)) < 1e-12

    def test_information_covariance_direct_assembly(self, rng):
        """L1 kind: matches (P^-1 + H'R^-1H + sigma^-2 11')^-1 assembled directly."""
        d, m, aug, pred = make_instance(rng, 5, 3, kind=L1, sigma=1.7)
        est = gauss_newton_correct(pred, aug, d["H"], m, iters=4)
        ones = np.ones((5, 5))
        direct = np.linalg.inv(np.linalg.inv(d["P"])
                               + d["H"].T @ np.linalg.inv(d["R"]) @ d["H"]
                               + ones / 1.7 ** 2)
        assert np.max(np.abs(est.P - direct)) / np.max(np.abs(direct)) < 1e-8


class TestCorrectorBehavior:
    def test_zero_innovation_fixed_point(self, rng):
        d = random_problem(rng, 6, 3)
        x0 = np.abs(d["x_pred"]) + 0.1
        m = SparsityMeasurement(rho_kind=L1, mu=float(x0.sum()), sigma=2.0)
        aug = build_augmented(d["H"] @ x0, d["R"], m)
        pred = GridEstimate(1, x0, d["P"])
        for L in (1, 3, 7):
            est = iekf_correct(pred, aug, d["H"], m, iters=L, tol=0.0)
            assert np.max(np.abs(est.x - x0)) < 1e-12

    def test_huge_sigma_reduces_to_kf(self, rng):
        d = random_problem(rng, 5, 3)
        m = SparsityMeasurement(rho_kind=L1, mu=1.0, sigma=1e9)
        aug = build_augmented(d["y"], d["R"], m)
        pred = GridEstimate(1, d["x_pred"], d["P"])
        est = iekf_correct(pred, aug, d["H"], m, iters=1, tol=0.0)
        K = d["P"] @ d["H"].T @ np.linalg.inv(
            d["H"] @ d["P"] @ d["H"].T + d["R"])
        closed = d["x_pred"] + K @ (d["y"] - d["H"] @ d["x_pred"])
        assert np.max(np.abs(est.x - closed)) < 1e-6

    def test_projected_output_nonnegative(self, rng):
        for _ in range(5):
            d, m, aug, pred = make_instance(rng, 6, 3, mu=0.0, sigma=0.5)
            est = gauss_newton_correct(pred, aug, d["H"], m, iters=8,
                                       projected=True)
            assert np.all(est.x >= 0)
            assert est.info["negative_entries"] is False

    def test_unprojected_flags_negative_entries(self, rng):
        hit = False
        for _ in range(10):
            d, m, aug, pred = make_instance(rng, 6, 3, mu=0.0, sigma=0.2)
            aug = build_augmented(d["y"] - 3.0, d["R"], m)
            est = iekf_correct(pred, aug, d["H"], m, iters=6)
            if np.any(est.x < 0):
                assert est.info["negative_entries"] is True
                hit = True
        assert hit

    def test_large_sigma_approaches_agnostic_constrained(self, rng):
        """With interior solutions, sigma -> large recovers the agnostic state."""
        checked = 0
        for _ in range(10):
            d = random_problem(rng, 5, 3)
            x_pred = d["x_pred"] + 2.0
            y = d["H"] @ x_pred + rng.normal(0, 0.05, 3)
            prob = RegularizedWlsProblem(x_pred, d["P"], y, d["H"], d["R"])
            agnostic = solve_gp(prob, SolverOptions(max_iters=50000,
                                                    tol=1e-13)).x
            if np.any(agnostic < 0.05):
                continue
            checked += 1
            m = SparsityMeasurement(rho_kind=L1, mu=1.0, sigma=1e6)
            aug = build_augmented(y, d["R"], m)
            pred = GridEstimate(1, x_pred, d["P"])
            est = gauss_newton_correct(pred, aug, d["H"], m, iters=10,
                                       projected=True,
                                       projection_opts=SolverOptions(
                                           max_iters=50000, tol=1e-13))
            assert np.max(np.abs(est.x - agnostic)) <= 1e-4
        assert checked >= 5

    def test_projected_objective_nonincreasing_when_damped(self, rng):
        """Feasible-set objective does not increase across projected passes
        once the step is damped enough (unit steps may oscillate for the
        strongly curved logarithm surrogate)."""
        opts = SolverOptions(max_iters=20000, tol=1e-13)
        for kind in KINDS:
            d, m, aug, pred = make_instance(rng, 6, 3, kind=kind, mu=1.0,
                                            sigma=1.0)
            damping = 1.0 if kind == L1 else 0.15

            def augmented_cost(x):
                prior = (d["x_pred"] - x) @ np.linalg.inv(d["P"]) \
                    @ (d["x_pred"] - x)
                meas = (d["y"] - d["H"] @ x) @ np.linalg.inv(d["R"]) \
                    @ (d["y"] - d["H"] @ x)
                return prior + meas + (m.mu - rho(x, m)) ** 2 / m.sigma ** 2

            values = [augmented_cost(np.maximum(d["x_pred"], 0.0))]
            for L in range(1, 7):
                est = gauss_newton_correct(pred, aug, d["H"], m, iters=L,
                                           tol=0.0, projected=True,
                                           projection_opts=opts,
                                           damping=damping)
                values.append(augmented_cost(est.x))
            assert all(b <= a + 1e-9 for a, b in zip(values, values[1:])), \
                (kind, values)

    def test_iteration_floor(self, rng):
        d, m, aug, pred = make_instance(rng, 4, 2)
        with pytest.raises(ValueError):
            iekf_correct(pred, aug, d["H"], m, iters=0)
        with pytest.raises(ValueError):
            gauss_newton_correct(pred, aug, d["H"], m, iters=0)
