import math

import numpy as np
import pytest

from siq import (
    FSI_TOP,
    SII,
    STI,
    SV,
    SchemaError,
    UnsupportedOrderError,
    WeightFamily,
    bernoulli_numbers,
    gamma_weight,
    harmonic,
    sampling_weights,
    shapley_kernel,
    weight_m,
)


class TestWeightM:
    def test_sii_pair_weight(self):
        assert weight_m(SII, 4, 2, 1) == pytest.approx(1 / 6, abs=1e-15)

    def test_sti_top_weight(self):
        assert weight_m(STI, 4, 2, 1, s0=2) == pytest.approx(1 / 6, abs=1e-15)

    def test_fsi_top_weight(self):
        assert weight_m(FSI_TOP, 4, 2, 0, s0=2) == pytest.approx(0.3, abs=1e-15)

    def test_sii_order_one_is_classic_weight(self):
        assert weight_m(SII, 3, 1, 0) == pytest.approx(1 / 3, abs=1e-15)
        for d in (3, 7, 12, 30):
            for t in range(d):
                classic = (
                    math.factorial(d - t - 1) * math.factorial(t) / math.factorial(d)
                )
                assert weight_m(SII, d, 1, t) == pytest.approx(classic, rel=1e-12)

    def test_sti_lower_orders_hit_empty_context_only(self):
        assert weight_m(STI, 6, 1, 0, s0=3) == 1.0
        assert weight_m(STI, 6, 2, 0, s0=3) == 1.0
        assert weight_m(STI, 6, 1, 2, s0=3) == 0.0

    def test_fsi_lower_order_unsupported(self):
        with pytest.raises(UnsupportedOrderError):
            weight_m(FSI_TOP, 6, 1, 0, s0=2)

    def test_range_checks(self):
        with pytest.raises(SchemaError):
            weight_m(SII, 4, 2, 3)  # t > d - s
        with pytest.raises(SchemaError):
            weight_m(SV, 4, 2, 0, s0=2)

    def test_no_overflow_at_max_players(self):
        d = 63
        for s in (1, 2, 3):
            vals = [weight_m(SII, d, s, t) for t in range(d - s + 1)]
            assert all(np.isfinite(vals)) and all(v > 0 for v in vals)
        vals = [weight_m(FSI_TOP, d, 3, t, s0=3) for t in range(d - 2)]
        assert all(np.isfinite(vals)) and all(v > 0 for v in vals)


class TestGamma:
    def test_sign_rule_examples(self):
        assert gamma_weight(SII, 4, 2, 2, 1) == pytest.approx(-1 / 6, abs=1e-15)
        # k = s gives the positive top weight, k = 0 at s = 1 flips the sign
        assert gamma_weight(SII, 5, 2, 3, 2) == weight_m(SII, 5, 2, 1)
        assert gamma_weight(SII, 5, 1, 2, 0) == -weight_m(SII, 5, 1, 2)

    def test_out_of_range(self):
        with pytest.raises(SchemaError):
            gamma_weight(SII, 4, 2, 4, 1)  # t - k = 3 > d - s = 2
        with pytest.raises(SchemaError):
            gamma_weight(SII, 4, 2, 1, 2)  # k > t

    def test_consistency_with_weight_table(self):
        for kind, s0 in ((SII, 3), (STI, 3), (FSI_TOP, 2)):
            d = 7
            orders = [s0] if kind == FSI_TOP else range(1, s0 + 1)
            for s in orders:
                for t in range(d + 1):
                    for k in range(max(0, t - (d - s)), min(s, t) + 1):
                        expected = (-1.0) ** (s - k) * weight_m(kind, d, s, t - k, s0)
                        assert gamma_weight(kind, d, s, t, k, s0) == expected

    def test_family_table_matches_scalar(self):
        fam = WeightFamily(SII, 8, 3)
        for s in fam.orders:
            for t in range(9):
                for k in range(max(0, t - (8 - s)), min(s, t) + 1):
                    assert fam.gamma[s, t, k] == gamma_weight(SII, 8, s, t, k, 3)


class TestShapleyKernel:
    def test_values(self):
        assert shapley_kernel(4, 1) == pytest.approx(1 / 3, abs=1e-15)
        assert shapley_kernel(4, 2) == pytest.approx(1 / 6, abs=1e-15)

    def test_symmetry(self):
        for d in (4, 9, 14):
            for t in range(1, d):
                assert shapley_kernel(d, t) == pytest.approx(
                    shapley_kernel(d, d - t), rel=1e-12
                )

    def test_normalization_is_twice_harmonic(self):
        for d in (4, 8, 13):
            total = sum(shapley_kernel(d, t) * math.comb(d, t) for t in range(1, d))
            assert total == pytest.approx(2 * harmonic(d - 1), rel=1e-12)
        d = 4
        total = sum(shapley_kernel(d, t) * math.comb(d, t) for t in range(1, d))
        assert total == pytest.approx(11 / 3, rel=1e-12)

    def test_undefined_at_tails(self):
        with pytest.raises(SchemaError):
            shapley_kernel(4, 0)
        with pytest.raises(SchemaError):
            shapley_kernel(4, 4)


class TestSamplingWeights:
    def test_kernel_scheme_table(self):
        q = sampling_weights(4).q
        assert q[1] == pytest.approx(1 / 3)
        assert q[2] == pytest.approx(1 / 6)
        assert q[3] == pytest.approx(1 / 3)
        assert q[0] == q[4] > 1e6 * q[1]

    def test_symmetry_and_center_decay(self):
        for scheme, s0 in (("shapley_kernel", 1), ("sii_tail", 2)):
            sw = sampling_weights(10, scheme, s0=s0)
            for t in range(1, 10):
                assert sw.q[t] == pytest.approx(sw.q[10 - t], rel=1e-12)
            inner = sw.q[1:6]
            assert all(inner[i] >= inner[i + 1] for i in range(len(inner) - 1))

    def test_sii_tail_interior_formula(self):
        d, s0 = 8, 2
        sw = sampling_weights(d, "sii_tail", s0=s0)
        for t in range(s0, d - s0 + 1):
            expected = (
                math.factorial(d - t - s0)
                * math.factorial(t - s0)
                / math.factorial(d - s0 + 1)
            )
            assert sw.q[t] == pytest.approx(expected, rel=1e-12)
        assert sw.q[1] == sw.q[0] == sw.q[d]

    def test_rejects_tiny_games(self):
        with pytest.raises(SchemaError):
            sampling_weights(1)


class TestBernoulli:
    def test_first_values(self):
        b = bernoulli_numbers(6)
        assert b[0] == 1.0
        assert b[1] == pytest.approx(-0.5, abs=1e-15)
        assert b[2] == pytest.approx(1 / 6, abs=1e-14)
        assert b[3] == pytest.approx(0.0, abs=1e-14)
        assert b[4] == pytest.approx(-1 / 30, abs=1e-13)
        assert b[5] == pytest.approx(0.0, abs=1e-13)
        assert b[6] == pytest.approx(1 / 42, abs=1e-13)

    def test_trivial(self):
        assert bernoulli_numbers(0) == [1.0]


class TestCpiiNormalization:
    def test_sii_every_order(self):
        for d in (4, 7, 12):
            for s in range(1, 4):
                total = sum(
                    math.comb(d - s, t) * weight_m(SII, d, s, t)
                    for t in range(d - s + 1)
                )
                assert total == pytest.approx(1.0, abs=1e-9)

    def test_sti_top_order(self):
        for d in (4, 7, 12):
            for s0 in (2, 3):
                total = sum(
                    math.comb(d - s0, t) * weight_m(STI, d, s0, t, s0)
                    for t in range(d - s0 + 1)
                )
                assert total == pytest.approx(1.0, abs=1e-9)

    def test_fsi_top_order(self):
        # the faithful index's top order is normalized too
        for d in (4, 7, 12):
            for s0 in (2, 3):
                total = sum(
                    math.comb(d - s0, t) * weight_m(FSI_TOP, d, s0, t, s0)
                    for t in range(d - s0 + 1)
                )
                assert total == pytest.approx(1.0, abs=1e-9)


def top_order_gamma_sum(kind: str, d: int, s0: int, t: int) -> float:
    """Sum of gamma over all size-s0 subsets for a coalition of size t."""
    total = 0.0
    for k in range(max(0, t - (d - s0)), min(s0, t) + 1):
        count = math.comb(t, k) * math.comb(d - t, s0 - k)
        total += count * gamma_weight(kind, d, s0, t, k, s0)
    return total


class TestSEfficiency:
    def test_sii_sti_vanish_midrange(self):
        for kind in (SII, STI):
            for s0 in (2, 3):
                for d in (2 * s0, 7, 9):
                    for t in range(s0, d - s0 + 1):
                        assert abs(top_order_gamma_sum(kind, d, s0, t)) <= 1e-9

    def test_fsi_does_not_vanish(self):
        sums = [abs(top_order_gamma_sum(FSI_TOP, 6, 2, t)) for t in range(2, 5)]
        assert max(sums) > 1e-6
