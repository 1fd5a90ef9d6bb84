import csv

import numpy as np
import pytest

from curvemeas import (
    DiscreteMeasure,
    InfeasibleError,
    TransportPlan,
    geodesic_interpolate,
    restrict_plan,
    save_plan_csv,
    solve_ot,
    solve_ot_lower_bounded,
)

from oracles import (
    cost_matrix,
    dense_lp_ot,
    dense_lp_ot_lower,
    network_simplex_ot,
    residual_negative_cycle,
)


def random_instance(rng, n, m, d, uniform=False):
    X = rng.standard_normal((n, d))
    Y = rng.standard_normal((m, d))
    if uniform:
        wa = np.full(n, 1.0 / n)
        wb = np.full(m, 1.0 / m)
    else:
        wa = rng.uniform(0.1, 1.0, n)
        wa /= wa.sum()
        wb = rng.uniform(0.1, 1.0, m)
        wb /= wb.sum()
    return DiscreteMeasure(X, wa), DiscreteMeasure(Y, wb)


class TestSolveOT:
    def test_matched_diracs_cost_zero(self):
        mu = DiscreteMeasure([[1.0, 2.0]], [1.0])
        plan = solve_ot(mu, mu, 2.0)
        assert plan.cost == 0.0
        assert len(plan) == 1

    def test_two_diracs_power_cost(self):
        mu = DiscreteMeasure([[0.0]], [1.0])
        nu = DiscreteMeasure([[3.0]], [1.0])
        for p in (1.0, 2.0, 2.5):
            assert solve_ot(mu, nu, p).cost == pytest.approx(3.0**p, rel=1e-12)

    def test_monotone_matching_1d(self):
        mu = DiscreteMeasure([[0.0], [1.0]], [0.5, 0.5])
        nu = DiscreteMeasure([[2.0], [3.0]], [0.5, 0.5])
        plan = solve_ot(mu, nu, 2.0)
        # p=2 in 1-d forces the non-crossing matching: 0->2, 1->3
        assert plan.cost == pytest.approx(4.0, abs=1e-10)
        pairs = dict(zip(plan.src_idx.tolist(), plan.tgt_idx.tolist()))
        assert pairs == {0: 0, 1: 1}

    def test_no_crossings_1d_p2(self):
        rng = np.random.default_rng(31)
        for trial in range(10):
            mu, nu = random_instance(rng, 6, 6, 1)
            plan = solve_ot(mu, nu, 2.0)
            xs = mu.points[plan.src_idx, 0]
            ys = nu.points[plan.tgt_idx, 0]
            for a in range(len(plan)):
                for b in range(len(plan)):
                    if xs[a] < xs[b] - 1e-12:
                        assert ys[a] <= ys[b] + 1e-9

    def test_marginals_respected(self):
        rng = np.random.default_rng(1)
        mu, nu = random_instance(rng, 8, 5, 2)
        plan = solve_ot(mu, nu, 2.0)
        rows = np.bincount(plan.src_idx, weights=plan.mass, minlength=8)
        cols = np.bincount(plan.tgt_idx, weights=plan.mass, minlength=5)
        assert np.abs(rows - mu.weights).max() <= 1e-9
        assert np.abs(cols - nu.weights).max() <= 1e-9

    def test_symmetry(self):
        rng = np.random.default_rng(2)
        mu, nu = random_instance(rng, 5, 7, 2)
        assert solve_ot(mu, nu, 2.0).cost == pytest.approx(
            solve_ot(nu, mu, 2.0).cost, abs=1e-12
        )

    def test_zero_weight_sources_ignored(self):
        mu = DiscreteMeasure([[0.0], [50.0]], [1.0, 0.0])
        nu = DiscreteMeasure([[1.0]], [1.0])
        plan = solve_ot(mu, nu, 2.0)
        assert plan.cost == pytest.approx(1.0, abs=1e-12)
        assert set(plan.src_idx.tolist()) == {0}

    def test_mass_mismatch_rejected(self):
        mu = DiscreteMeasure([[0.0]], [1.0])
        nu = DiscreteMeasure([[1.0]], [0.5])
        with pytest.raises(InfeasibleError, match="mass mismatch"):
            solve_ot(mu, nu, 2.0)

    def test_dimension_mismatch_rejected(self):
        mu = DiscreteMeasure([[0.0]], [1.0])
        nu = DiscreteMeasure([[1.0, 1.0]], [1.0])
        with pytest.raises(ValueError, match="dimension"):
            solve_ot(mu, nu, 2.0)

    def test_p_below_one_rejected(self):
        mu = DiscreteMeasure([[0.0]], [1.0])
        with pytest.raises(ValueError):
            solve_ot(mu, mu, 0.5)


class TestAgainstOracles:
    @pytest.mark.parametrize("p", [1.0, 2.0, 3.5])
    def test_dense_lp_oracle(self, p):
        rng = np.random.default_rng(int(p * 100))
        for trial in range(12):
            n, m = rng.integers(1, 8, size=2)
            d = int(rng.integers(1, 4))
            mu, nu = random_instance(rng, n, m, d, uniform=bool(trial % 2))
            plan = solve_ot(mu, nu, p)
            C = cost_matrix(mu.points, nu.points, p)
            oracle_cost, _ = dense_lp_ot(mu.weights, nu.weights, C)
            assert plan.cost == pytest.approx(oracle_cost, abs=1e-9)

    def test_network_simplex_oracle(self):
        """Cross-check against a combinatorial solver on integer data."""
        rng = np.random.default_rng(77)
        for trial in range(10):
            n, m = rng.integers(2, 7, size=2)
            mu, nu = random_instance(rng, n, m, 2)
            plan = solve_ot(mu, nu, 2.0)
            oracle = network_simplex_ot(
                mu.points, mu.weights, nu.points, nu.weights, 2.0
            )
            # integer mass rounding limits the oracle to ~1e-11 accuracy
            assert plan.cost == pytest.approx(oracle, abs=1e-9)

    def test_residual_cycle_certificate(self):
        """Returned plans admit no negative residual cycle (optimality)."""
        rng = np.random.default_rng(19)
        for trial in range(10):
            n, m = rng.integers(2, 7, size=2)
            p = [1.0, 2.0][trial % 2]
            mu, nu = random_instance(rng, n, m, 2)
            plan = solve_ot(mu, nu, p)
            worst = residual_negative_cycle(
                mu.points, nu.points, plan.src_idx, plan.tgt_idx, plan.mass, p
            )
            assert worst >= -1e-9

    def test_triangle_inequality(self):
        rng = np.random.default_rng(4)
        for p in (1.0, 2.0):
            for trial in range(8):
                a, b = random_instance(rng, 4, 5, 2)
                c, _ = random_instance(rng, 6, 3, 2)
                w_ab = solve_ot(a, b, p).cost ** (1 / p)
                w_bc = solve_ot(b, c, p).cost ** (1 / p)
                w_ac = solve_ot(a, c, p).cost ** (1 / p)
                assert w_ac <= w_ab + w_bc + 1e-9


class TestLowerBounded:
    def test_matches_inequality_lp(self):
        rng = np.random.default_rng(8)
        for trial in range(12):
            n = int(rng.integers(2, 7))
            k = int(rng.integers(1, 5))
            mu, _ = random_instance(rng, n, 2, 2)
            Y = rng.standard_normal((k, 2))
            low = rng.uniform(0.0, 1.0 / k, size=k)
            plan, target = solve_ot_lower_bounded(mu, Y, low, 2.0)
            C = cost_matrix(mu.points, Y, 2.0)
            oracle_cost, _ = dense_lp_ot_lower(mu.weights, C, low)
            assert plan.cost == pytest.approx(oracle_cost, abs=1e-9)
            # floors hold and mass balances
            assert np.all(target.weights >= low - 1e-9)
            assert target.total_mass() == pytest.approx(1.0, abs=1e-9)

    def test_zero_floors_nearest_site(self):
        rng = np.random.default_rng(14)
        mu, _ = random_instance(rng, 6, 2, 2)
        Y = rng.standard_normal((3, 2))
        plan, target = solve_ot_lower_bounded(mu, Y, np.zeros(3), 2.0)
        C = cost_matrix(mu.points, Y, 2.0)
        expected = float((mu.weights * C.min(axis=1)).sum())
        assert plan.cost == pytest.approx(expected, rel=1e-12)

    def test_saturated_floors_reduce_to_balanced(self):
        rng = np.random.default_rng(15)
        mu, _ = random_instance(rng, 5, 2, 2)
        Y = rng.standard_normal((3, 2))
        w = rng.uniform(0.1, 1.0, 3)
        w /= w.sum()
        plan_lb, target = solve_ot_lower_bounded(mu, Y, w, 2.0)
        plan_eq = solve_ot(mu, DiscreteMeasure(Y, w), 2.0)
        assert plan_lb.cost == pytest.approx(plan_eq.cost, abs=1e-9)
        assert np.allclose(target.weights, w, atol=1e-9)

    def test_infeasible_floors(self):
        mu = DiscreteMeasure([[0.0]], [1.0])
        with pytest.raises(InfeasibleError):
            solve_ot_lower_bounded(mu, [[1.0], [2.0]], [0.7, 0.7], 2.0)

    def test_negative_floor_rejected(self):
        mu = DiscreteMeasure([[0.0]], [1.0])
        with pytest.raises(ValueError):
            solve_ot_lower_bounded(mu, [[1.0]], [-0.1], 2.0)


class TestPlanType:
    def test_cost_consistency_enforced(self):
        mu = DiscreteMeasure([[0.0]], [1.0])
        nu = DiscreteMeasure([[1.0]], [1.0])
        with pytest.raises(ValueError, match="cost"):
            TransportPlan(mu, nu, [0], [0], [1.0], 2.0, cost=5.0)

    def test_marginal_consistency_enforced(self):
        mu = DiscreteMeasure([[0.0]], [1.0])
        nu = DiscreteMeasure([[1.0]], [1.0])
        with pytest.raises(ValueError, match="row sums"):
            TransportPlan(mu, nu, [0], [0], [0.5], 2.0, cost=0.5)

    def test_entry_costs_and_recompute(self):
        rng = np.random.default_rng(3)
        mu, nu = random_instance(rng, 4, 4, 2)
        plan = solve_ot(mu, nu, 3.0)
        d = np.linalg.norm(
            mu.points[plan.src_idx] - nu.points[plan.tgt_idx], axis=1
        )
        assert np.allclose(plan.entry_costs(), d**3.0, rtol=1e-14)
        assert plan.recompute_cost() == pytest.approx(plan.cost, abs=1e-12)


class TestRestriction:
    def test_partition_costs_add(self):
        rng = np.random.default_rng(6)
        mu, nu = random_instance(rng, 7, 6, 2)
        plan = solve_ot(mu, nu, 2.0)
        all_t = range(6)
        frag_a, _, _ = restrict_plan(plan, [0, 1, 2], all_t)
        frag_b, _, _ = restrict_plan(plan, [3, 4, 5, 6], all_t)
        assert frag_a.cost + frag_b.cost == pytest.approx(plan.cost, abs=1e-12)
        assert len(frag_a) + len(frag_b) == len(plan)

    def test_fragment_marginals(self):
        rng = np.random.default_rng(7)
        mu, nu = random_instance(rng, 5, 5, 1)
        plan = solve_ot(mu, nu, 2.0)
        frag, rho_S, nu_S = restrict_plan(plan, [0, 1], range(5))
        # fragment source mass is exactly the kept sources' weight
        assert rho_S.total_mass() == pytest.approx(
            mu.weights[:2].sum(), abs=1e-9
        )
        assert rho_S.weights[2:].max() == 0.0
        assert nu_S.total_mass() == pytest.approx(rho_S.total_mass(), abs=1e-12)
        # marginal points keep the original indexing
        assert np.array_equal(rho_S.points, mu.points)

    def test_empty_restriction(self):
        mu = DiscreteMeasure([[0.0]], [1.0])
        nu = DiscreteMeasure([[1.0]], [1.0])
        plan = solve_ot(mu, nu, 2.0)
        frag, _, _ = restrict_plan(plan, [], [0])
        assert len(frag) == 0
        assert frag.cost == 0.0


class TestGeodesic:
    def test_endpoints_recover_marginals(self):
        rng = np.random.default_rng(9)
        mu, nu = random_instance(rng, 5, 4, 2)
        plan = solve_ot(mu, nu, 2.0)
        rho0 = geodesic_interpolate(plan, 0.0)
        rho1 = geodesic_interpolate(plan, 1.0)
        assert rho0.total_mass() == pytest.approx(1.0, abs=1e-9)
        assert rho1.total_mass() == pytest.approx(1.0, abs=1e-9)
        # every endpoint support point is a marginal support point
        for pt in rho0.points:
            assert np.min(np.linalg.norm(mu.points - pt, axis=1)) <= 1e-12
        for pt in rho1.points:
            assert np.min(np.linalg.norm(nu.points - pt, axis=1)) <= 1e-12

    def test_displacement_interpolation_p2(self):
        """W_2 along the interpolation is linear in t."""
        rng = np.random.default_rng(10)
        mu, nu = random_instance(rng, 4, 5, 2)
        plan = solve_ot(mu, nu, 2.0)
        w_full = np.sqrt(plan.cost)
        for t in (0.25, 0.5, 0.75):
            rho_t = geodesic_interpolate(plan, t)
            w_t = np.sqrt(solve_ot(mu, rho_t.normalized(), 2.0).cost)
            assert w_t == pytest.approx(t * w_full, rel=1e-7, abs=1e-10)

    def test_t_out_of_range(self):
        mu = DiscreteMeasure([[0.0]], [1.0])
        plan = solve_ot(mu, mu, 2.0)
        with pytest.raises(ValueError):
            geodesic_interpolate(plan, 1.5)


class TestPlanCSV:
    def test_written_rows_reproduce_cost(self, tmp_path):
        rng = np.random.default_rng(12)
        mu, nu = random_instance(rng, 5, 4, 2)
        plan = solve_ot(mu, nu, 2.0)
        path = tmp_path / "plan.csv"
        save_plan_csv(plan, path)
        with open(path, newline="") as fh:
            rows = list(csv.DictReader(fh))
        assert len(rows) == len(plan)
        mass = sum(float(r["mass"]) for r in rows)
        contrib = sum(float(r["cost_contribution"]) for r in rows)
        assert mass == pytest.approx(1.0, abs=1e-12)
        assert contrib == pytest.approx(plan.cost, abs=1e-12)
