import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from submodal.functions import InfoFunction, evaluate, from_joint
from submodal.greedy import (
    GreedyConfig,
    default_variant,
    exhaustive_opt,
    greedy_select,
    partition_quotas,
    partition_sizes,
    partitioned_select,
    stochastic_sample_size,
)
from tests.conftest import rescaled_cosine


def modular(weights):
    """GCMI with one query column encodes an arbitrary modular objective."""
    return InfoFunction(kind="gcmi", uq=0.5 * np.asarray(weights, dtype=float)[:, None])


class TestConfig:
    def test_rejects_bad_variant(self):
        with pytest.raises(ValueError, match="variant"):
            GreedyConfig(budget=2, variant="greedy")

    def test_rejects_nonpositive_budget(self):
        with pytest.raises(ValueError, match="budget"):
            GreedyConfig(budget=0)

    def test_rejects_epsilon_outside_unit_interval(self):
        with pytest.raises(ValueError, match="epsilon"):
            GreedyConfig(budget=2, epsilon=1.5)

    def test_rejects_more_partitions_than_budget(self):
        with pytest.raises(ValueError, match="partition"):
            GreedyConfig(budget=2, partitions=3)

    def test_default_variant_switches_at_threshold(self):
        assert default_variant(20000) == "lazy"
        assert default_variant(20001) == "stochastic"


class TestGreedySelect:
    def test_modular_weights_take_top_budget(self):
        res = greedy_select(modular([3.0, 1.0, 2.0]), GreedyConfig(budget=2, variant="naive"))
        assert res.chosen == (0, 2)
        assert res.gains == (3.0, 2.0)

    def test_naive_and_lazy_identical_on_k3(self):
        k3 = np.array([[1.0, 0.5, 0.2], [0.5, 1.0, 0.4], [0.2, 0.4, 1.0]])
        f = from_joint("flvmi", k3, query=[2], eps=0.0)
        a = greedy_select(f, GreedyConfig(budget=2, variant="naive"))
        b = greedy_select(f, GreedyConfig(budget=2, variant="lazy"))
        assert a.chosen == b.chosen
        assert a.gains == b.gains

    def test_naive_lazy_bit_identical_on_monotone_instances(self, rng):
        for _ in range(60):
            joint = rescaled_cosine(rng, 14, d=5)
            for kind, kw in [
                ("flvmi", dict(query=[12, 13])),
                ("flqmi", dict(query=[12, 13])),
                ("gcmi", dict(query=[12, 13])),
                ("flcg", dict(conditioning=[12, 13])),
            ]:
                f = from_joint(kind, joint, **kw)
                a = greedy_select(f, GreedyConfig(budget=3, variant="naive"))
                b = greedy_select(f, GreedyConfig(budget=3, variant="lazy"))
                assert a.chosen == b.chosen
                assert a.gains == b.gains

    def test_sample_size_formula(self):
        assert stochastic_sample_size(1000, 10, 0.01) == 461

    def test_budget_above_ground_selects_all_with_warning(self):
        f = modular([1.0, 2.0])
        with pytest.warns(UserWarning, match="selecting all"):
            res = greedy_select(f, GreedyConfig(budget=5, variant="naive"))
        assert sorted(res.chosen) == [0, 1]

    def test_value_equals_sum_of_gains(self, rng):
        joint = rescaled_cosine(rng, 10)
        f = from_joint("logdetmi", joint, query=[8, 9])
        res = greedy_select(f, GreedyConfig(budget=4, variant="lazy"))
        assert res.value == pytest.approx(sum(res.gains), rel=1e-9)
        assert len(res.chosen) == 4

    def test_stochastic_deterministic_under_seed(self, rng):
        joint = rescaled_cosine(rng, 40)
        f = from_joint("flvmi", joint, query=[38, 39])
        cfg = GreedyConfig(budget=5, variant="stochastic", seed=123)
        a = greedy_select(f, cfg)
        b = greedy_select(f, cfg)
        assert a.chosen == b.chosen
        assert a.gains == b.gains
        assert a.value == b.value
        assert a.evaluations == b.evaluations

    def test_stop_on_negative_halts_early(self, rng):
        joint = rescaled_cosine(rng, 8)
        f = from_joint("gccg", joint, conditioning=[6, 7])
        free = greedy_select(f, GreedyConfig(budget=6, variant="naive"))
        halted = greedy_select(
            f, GreedyConfig(budget=6, variant="naive", stop_on_negative=True)
        )
        assert len(free.chosen) == 6
        assert len(halted.chosen) < 6


class TestExhaustive:
    def test_modular_top_budget(self):
        res = exhaustive_opt(modular([5.0, 1.0, 4.0, 2.0]), 2)
        assert res.chosen == (0, 2)

    def test_full_set_when_budget_equals_ground(self):
        res = exhaustive_opt(modular([1.0, 1.0, 1.0]), 3)
        assert res.chosen == (0, 1, 2)

    def test_optimum_dominates_greedy(self, rng):
        for _ in range(10):
            joint = rescaled_cosine(rng, 12, d=4)
            f = from_joint("flvmi", joint, query=[10, 11])
            greedy = greedy_select(f, GreedyConfig(budget=3, variant="naive"))
            opt = exhaustive_opt(f, 3)
            assert opt.value >= greedy.value - 1e-12

    def test_oversized_instance_rejected(self):
        f = modular(np.ones(60))
        with pytest.raises(ValueError, match="enumeration"):
            exhaustive_opt(f, 20)


class TestPartitioned:
    def test_quota_arithmetic(self):
        assert partition_quotas(7, 3) == [3, 2, 2]
        assert partition_quotas(25000, 50) == [500] * 50
        assert partition_sizes(10, 3) == [4, 3, 3]

    def test_single_partition_matches_greedy_select(self, rng):
        joint = rescaled_cosine(rng, 12)
        q = [10, 11]
        f = from_joint("flvmi", joint, query=q)
        direct = greedy_select(f, GreedyConfig(budget=3, variant="lazy"))

        def make(ids):
            return InfoFunction(
                kind="flvmi", uu=joint[np.ix_(ids, ids)], uq=joint[ids][:, q]
            )

        part = partitioned_select(make, 12, GreedyConfig(budget=3, variant="lazy"))
        assert part.chosen == direct.chosen
        assert part.gains == direct.gains

    def test_returns_exact_budget_without_duplicates(self, rng):
        joint = rescaled_cosine(rng, 30)
        q = [28, 29]

        def make(ids):
            return InfoFunction(
                kind="flvmi", uu=joint[np.ix_(ids, ids)], uq=joint[ids][:, q]
            )

        cfg = GreedyConfig(budget=10, variant="lazy", partitions=4, seed=7)
        res = partitioned_select(make, 30, cfg)
        assert len(res.chosen) == 10
        assert len(set(res.chosen)) == 10
        assert all(0 <= i < 30 for i in res.chosen)

    def test_deterministic_under_seed(self, rng):
        joint = rescaled_cosine(rng, 24)

        def make(ids):
            return InfoFunction(kind="fl", uu=joint[np.ix_(ids, ids)])

        cfg = GreedyConfig(budget=6, variant="lazy", partitions=3, seed=99)
        a = partitioned_select(make, 24, cfg)
        b = partitioned_select(make, 24, cfg)
        assert a.chosen == b.chosen and a.gains == b.gains

    def test_more_partitions_than_points_degrades_gracefully(self):
        # budget capped to n leaves trailing chunks with zero size and
        # zero quota; they contribute nothing
        def make(ids):
            return InfoFunction(kind="fl", uu=np.eye(len(ids)))

        with pytest.warns(UserWarning, match="selecting all"):
            res = partitioned_select(make, 2, GreedyConfig(budget=3, partitions=3))
        assert sorted(res.chosen) == [0, 1]


class TestApproximationBound:
    def test_one_minus_inverse_e_on_monotone_instances(self, rng):
        bound = 1.0 - 1.0 / math.e
        for _ in range(30):
            joint = rescaled_cosine(rng, 12, d=4)
            for kind, kw in [
                ("flvmi", dict(query=[10, 11])),
                ("gcmi", dict(query=[10, 11])),
            ]:
                f = from_joint(kind, joint, **kw)
                greedy = greedy_select(f, GreedyConfig(budget=3, variant="naive"))
                opt = exhaustive_opt(f, 3)
                assert greedy.value >= bound * opt.value


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), budget=st.integers(1, 6))
def test_greedy_selection_size_property(seed, budget):
    g = np.random.default_rng(seed)
    joint = rescaled_cosine(g, 9, d=4)
    f = from_joint("flvmi", joint, query=[8])
    res = greedy_select(f, GreedyConfig(budget=budget, variant="lazy"))
    assert len(res.chosen) == min(budget, 9)
    assert len(res.gains) == len(res.chosen)
