import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from rickwarp.errors import InputError
from rickwarp.planner import ambient_block, betti_total, kmin_for_dimension, packing_radius, plan_connected_sum


def _expected_kmin(n, m):
    return n + 2 if n == m else max(n, m) + 1


class TestPlan:
    def test_three_two(self):
        plan = plan_connected_sum(3, 2, 5)
        assert (plan.p, plan.q, plan.k_min) == (2, 2, 4)
        assert len(plan.slots) == 6 and plan.betti_total == 12

    def test_three_three(self):
        assert plan_connected_sum(3, 3, 1).k_min == 5

    def test_swap_is_chosen_when_it_helps(self):
        plan = plan_connected_sum(2, 3, 1)
        assert plan.swapped and (plan.p, plan.q, plan.k_min) == (2, 2, 4)

    @pytest.mark.parametrize("n,m,r", [(2, 2, 1), (1, 3, 1), (3, 2, 0), (3.5, 2, 1)])
    def test_rejections(self, n, m, r):
        with pytest.raises(InputError):
            plan_connected_sum(n, m, r)

    @pytest.mark.parametrize("n", range(2, 9))
    @pytest.mark.parametrize("m", range(2, 9))
    def test_kmin_table(self, n, m):
        if n == m == 2:
            pytest.skip("outside the hypotheses")
        plan = plan_connected_sum(n, m, 1)
        assert plan.k_min == _expected_kmin(n, m)
        assert plan.k_min == min(max(m + 2, n + 1), max(n + 2, m + 1))
        assert plan.p + plan.q + 1 == n + m
        assert plan.k_min >= max(plan.p, plan.q) + 2

    def test_construction_params_roundtrip(self):
        params = plan_connected_sum(4, 2, 2).construction_params()
        assert (params.p, params.q, params.k) == (3, 2, 5)

    def test_kappa_sets_rho(self):
        plan = plan_connected_sum(3, 2, 1, kappa=0.2)
        assert plan.rho == pytest.approx(0.1)
        assert plan.ambient_check["holds"]

    def test_to_dict_fields(self):
        d = plan_connected_sum(3, 2, 5).to_dict()
        assert d["surgeries"] == 6 and d["k_min"] == 4 and "rho/N < kappa" in d["rho_requirement"]


class TestPacking:
    @given(st.integers(1, 200), st.floats(0.05, 0.95))
    def test_slots_are_disjoint(self, count, fraction):
        R = packing_radius(count, fraction)
        gap = 2 * math.pi / count
        # centres on a great circle are ``gap`` apart, so the balls miss each other
        assert count == 1 or 2 * R < gap
        assert R < math.pi / 2

    def test_plan_slots_are_evenly_spaced(self):
        plan = plan_connected_sum(3, 2, 4)
        angles = [s.angle for s in plan.slots]
        diffs = [b - a for a, b in zip(angles, angles[1:])]
        assert all(d == pytest.approx(2 * math.pi / 5) for d in diffs)
        assert 2 * plan.ratio < diffs[0]

    @pytest.mark.parametrize("count,fraction", [(0, 0.9), (3, 1.0), (3, 0.0)])
    def test_bad_arguments(self, count, fraction):
        with pytest.raises(InputError):
            packing_radius(count, fraction)

    def test_ambient_product_is_k_positive_for_small_rho(self):
        from rickwarp.kchain import check_profile_hypothesis
        assert check_profile_hypothesis(ambient_block(3, 2, 0.05), 4).holds


class TestDimension:
    @pytest.mark.parametrize("d,expected", [(5, (4, (3, 2))), (6, (5, (3, 3))), (7, (5, (4, 3)))])
    def test_examples(self, d, expected):
        assert kmin_for_dimension(d) == expected

    def test_formula_and_monotone(self):
        values = [kmin_for_dimension(d)[0] for d in range(5, 41)]
        assert values == [d // 2 + 2 for d in range(5, 41)]
        assert all(a <= b for a, b in zip(values, values[1:]))

    def test_matches_minimum_over_splittings(self):
        for d in range(5, 41):
            best = min(plan_connected_sum(n, d - n, 1).k_min for n in range(2, d - 1)
                       if not (n == d - n == 2))
            assert kmin_for_dimension(d)[0] == best

    @pytest.mark.parametrize("d", [4, 0, 5.5])
    def test_out_of_range(self, d):
        with pytest.raises(InputError):
            kmin_for_dimension(d)


class TestBetti:
    def test_values(self):
        assert betti_total(3, 2, 1) == 4
        assert betti_total(3, 2, 100) == 202

    @given(st.integers(1, 10_000))
    def test_strictly_increasing(self, r):
        assert betti_total(4, 4, r + 1) > betti_total(4, 4, r)
